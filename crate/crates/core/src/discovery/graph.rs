use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Output of discovery: a parent set per variable plus unordered dashed
/// pairs for relations masked by unobserved paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    pub names: Vec<String>,
    pub parents: Vec<BTreeSet<usize>>,
    /// Stored as `(low, high)` index pairs.
    pub dashed: BTreeSet<(usize, usize)>,
}

impl CausalGraph {
    pub fn empty(names: Vec<String>) -> Self {
        let p = names.len();
        Self {
            names,
            parents: vec![BTreeSet::new(); p],
            dashed: BTreeSet::new(),
        }
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    /// Directed edges as `(parent, child)`.
    pub fn directed_edges(&self) -> BTreeSet<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(child, ps)| ps.iter().map(move |&parent| (parent, child)))
            .collect()
    }

    pub fn add_dashed(&mut self, i: usize, j: usize) {
        self.dashed.insert(ordered(i, j));
    }

    pub fn has_dashed(&self, i: usize, j: usize) -> bool {
        self.dashed.contains(&ordered(i, j))
    }

    pub fn has_directed_between(&self, i: usize, j: usize) -> bool {
        self.parents[i].contains(&j) || self.parents[j].contains(&i)
    }

    /// Checks the structural invariants: no self-parents, in-range indices,
    /// and no pair carrying both a directed and a dashed edge.
    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if self.parents.len() != p {
            return Err(Error::Schema(format!(
                "{} parent sets for {p} variables",
                self.parents.len()
            )));
        }
        for (i, ps) in self.parents.iter().enumerate() {
            if ps.contains(&i) {
                return Err(Error::Schema(format!(
                    "{} is its own parent",
                    self.names[i]
                )));
            }
            if let Some(&j) = ps.iter().find(|&&j| j >= p) {
                return Err(Error::Schema(format!("parent index {j} out of range")));
            }
        }
        for &(i, j) in &self.dashed {
            if i >= j || j >= p {
                return Err(Error::Schema(format!("malformed dashed pair ({i}, {j})")));
            }
            if self.has_directed_between(i, j) {
                return Err(Error::Schema(format!(
                    "{} and {} carry both a directed and a dashed edge",
                    self.names[i], self.names[j]
                )));
            }
        }
        Ok(())
    }

    /// Pairs listed as parents of each other.
    pub fn mutual_parents(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, ps) in self.parents.iter().enumerate() {
            for &j in ps.range(i + 1..) {
                if self.parents[j].contains(&i) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// True when the directed part contains a cycle.
    pub fn has_directed_cycle(&self) -> bool {
        let p = self.p();
        let mut indegree: Vec<usize> = self.parents.iter().map(BTreeSet::len).collect();
        let mut children = vec![Vec::new(); p];
        for (c, ps) in self.parents.iter().enumerate() {
            for &pa in ps {
                children[pa].push(c);
            }
        }
        let mut stack: Vec<usize> = (0..p).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    stack.push(c);
                }
            }
        }
        seen != p
    }

    /// Relabels variables: column `k` of the new graph is column `order[k]`
    /// of this one.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut inverse = vec![0; order.len()];
        for (k, &old) in order.iter().enumerate() {
            inverse[old] = k;
        }
        let names = order.iter().map(|&o| self.names[o].clone()).collect();
        let parents = order
            .iter()
            .map(|&o| self.parents[o].iter().map(|&j| inverse[j]).collect())
            .collect();
        let dashed = self
            .dashed
            .iter()
            .map(|&(i, j)| ordered(inverse[i], inverse[j]))
            .collect();
        Self {
            names,
            parents,
            dashed,
        }
    }

    /// JSON keyed by variable names:
    /// `{"variables": [...], "parents": {name: [names]}, "dashed": [[a, b]]}`.
    pub fn to_json(&self) -> Value {
        let mut parents = Map::new();
        for (i, ps) in self.parents.iter().enumerate() {
            let list: Vec<&str> = ps.iter().map(|&j| self.names[j].as_str()).collect();
            parents.insert(self.names[i].clone(), json!(list));
        }
        let dashed: Vec<[&str; 2]> = self
            .dashed
            .iter()
            .map(|&(i, j)| [self.names[i].as_str(), self.names[j].as_str()])
            .collect();
        json!({
            "variables": self.names,
            "parents": parents,
            "dashed": dashed,
        })
    }

    /// Parses the JSON produced by [`CausalGraph::to_json`]. The
    /// `variables` list is optional; without it the variable order is the
    /// key order of `parents`.
    pub fn from_json(value: &Value) -> Result<Self> {
        let parents_obj = value
            .get("parents")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Schema("missing \"parents\" object".into()))?;
        let names: Vec<String> = match value.get("variables") {
            Some(v) => v
                .as_array()
                .ok_or_else(|| Error::Schema("\"variables\" must be an array".into()))?
                .iter()
                .map(|s| {
                    s.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| Error::Schema("variable names must be strings".into()))
                })
                .collect::<Result<_>>()?,
            None => parents_obj.keys().cloned().collect(),
        };
        let index: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        if index.len() != names.len() {
            return Err(Error::Schema("duplicate variable name".into()));
        }
        let lookup = |name: &Value| -> Result<usize> {
            let s = name
                .as_str()
                .ok_or_else(|| Error::Schema("variable names must be strings".into()))?;
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::Schema(format!("unknown variable {s:?}")))
        };
        let mut graph = Self::empty(names.clone());
        for (child, list) in parents_obj {
            let c = lookup(&Value::String(child.clone()))?;
            let list = list
                .as_array()
                .ok_or_else(|| Error::Schema(format!("parents of {child:?} must be an array")))?;
            for pa in list {
                graph.parents[c].insert(lookup(pa)?);
            }
        }
        if let Some(dashed) = value.get("dashed") {
            let dashed = dashed
                .as_array()
                .ok_or_else(|| Error::Schema("\"dashed\" must be an array".into()))?;
            for pair in dashed {
                match pair.as_array().map(Vec::as_slice) {
                    Some([a, b]) => {
                        let (a, b) = (lookup(a)?, lookup(b)?);
                        if a == b {
                            return Err(Error::Schema(
                                "dashed pair joins a variable to itself".into(),
                            ));
                        }
                        graph.add_dashed(a, b);
                    }
                    _ => return Err(Error::Schema("dashed entries must be name pairs".into())),
                }
            }
        }
        graph.validate()?;
        Ok(graph)
    }

    /// Graphviz rendering: solid arrows for direct causes, undirected dashed
    /// lines for pairs whose relation cannot be determined.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph causal_graph {\n");
        for name in &self.names {
            let _ = writeln!(out, "  {};", quote(name));
        }
        for (parent, child) in self.directed_edges() {
            let _ = writeln!(
                out,
                "  {} -> {};",
                quote(&self.names[parent]),
                quote(&self.names[child])
            );
        }
        for &(i, j) in &self.dashed {
            let _ = writeln!(
                out,
                "  {} -> {} [style=dashed, dir=none];",
                quote(&self.names[i]),
                quote(&self.names[j])
            );
        }
        out.push_str("}\n");
        out
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub(crate) fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}
