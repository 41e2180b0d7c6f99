#![allow(dead_code)]

use std::collections::BTreeSet;

use camuv::synth::{CausalStructure, GroundTruthGraph, LatentRole};
use camuv::DataMatrix;
use rand::Rng;
use serde_json::json;

pub fn structure(v: serde_json::Value) -> CausalStructure {
    CausalStructure::from_json(&v).expect("valid fixture")
}

/// Observed variables `x1..xp` with the given edges, given as 1-based pairs.
pub fn observed_only(p: usize, edges: &[(usize, usize)]) -> CausalStructure {
    let names: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    let edges: Vec<[String; 2]> = edges
        .iter()
        .map(|&(a, b)| [format!("x{a}"), format!("x{b}")])
        .collect();
    structure(json!({"observed": names, "latent": [], "edges": edges, "latent_role": {}}))
}

pub fn chain3() -> CausalStructure {
    observed_only(3, &[(1, 2), (2, 3)])
}

pub fn collider3() -> CausalStructure {
    observed_only(3, &[(1, 3), (2, 3)])
}

/// `x1 ← y → x2`.
pub fn minimal_ubp() -> CausalStructure {
    structure(json!({
        "observed": ["x1", "x2"], "latent": ["y"],
        "edges": [["y", "x1"], ["y", "x2"]],
        "latent_role": {"y": "common_cause"}
    }))
}

/// `x1 → y → x2`.
pub fn minimal_ucp() -> CausalStructure {
    structure(json!({
        "observed": ["x1", "x2"], "latent": ["y"],
        "edges": [["x1", "y"], ["y", "x2"]],
        "latent_role": {"y": "intermediate"}
    }))
}

/// The nine-variable example with an unobserved mediator `y1` between `x2`
/// and `x3` and an unobserved common cause `y7` of `x4` and `x9`.
pub fn latent_example() -> CausalStructure {
    structure(json!({
        "observed": ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9"],
        "latent": ["y1", "y7"],
        "edges": [
            ["x1", "x4"], ["x1", "x5"], ["x3", "x6"], ["x5", "x6"], ["x6", "x8"],
            ["x7", "x8"], ["x5", "x9"], ["x2", "y1"], ["y1", "x3"],
            ["y7", "x4"], ["y7", "x9"]
        ],
        "latent_role": {"y1": "intermediate", "y7": "common_cause"}
    }))
}

/// Directed edges of the observed graph for [`latent_example`], 1-based.
pub const LATENT_EXAMPLE_DIRECTED: [(usize, usize); 8] = [
    (1, 4),
    (1, 5),
    (2, 3),
    (3, 6),
    (5, 6),
    (6, 8),
    (7, 8),
    (5, 9),
];

/// Ten regions in two chains with a cross link.
pub fn two_chains() -> CausalStructure {
    observed_only(
        10,
        &[
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (1, 5),
            (6, 7),
            (7, 8),
            (8, 9),
            (9, 10),
            (6, 10),
            (3, 8),
        ],
    )
}

pub fn sample(s: &CausalStructure, n: usize, seed: u64) -> DataMatrix {
    GroundTruthGraph::from_structure(s.clone(), seed)
        .and_then(|g| g.sample(n, seed))
        .and_then(|d| d.standardize())
        .expect("fixture sample")
}

pub fn ordered(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

/// Random DAG over `p` observed and `latents` unobserved variables, in a
/// random causal order with edge probability `prob`.
pub fn random_structure(
    rng: &mut impl Rng,
    p: usize,
    latents: usize,
    prob: f64,
) -> CausalStructure {
    let total = p + latents;
    let mut order: Vec<usize> = (0..total).collect();
    for i in (1..total).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut edges = Vec::new();
    for a in 0..total {
        for b in a + 1..total {
            if rng.gen_bool(prob) {
                edges.push((order[a], order[b]));
            }
        }
    }
    edges.sort_unstable();
    CausalStructure {
        observed: (1..=p).map(|i| format!("x{i}")).collect(),
        latent: (1..=latents).map(|i| format!("y{i}")).collect(),
        roles: vec![LatentRole::CommonCause; latents],
        edges,
    }
}

pub type EdgeSet = BTreeSet<(usize, usize)>;

/// Path-enumeration oracle for the projected truth, following the path
/// definitions literally. `hidden` marks every unobserved variable by
/// index into the structure's full variable list.
pub struct PathOracle {
    n: usize,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
    hidden: Vec<bool>,
}

impl PathOracle {
    pub fn new(s: &CausalStructure, hidden: Vec<bool>) -> Self {
        let n = s.num_vars();
        let mut parents = vec![BTreeSet::new(); n];
        let mut children = vec![BTreeSet::new(); n];
        for &(a, b) in &s.edges {
            parents[b].insert(a);
            children[a].insert(b);
        }
        Self {
            n,
            parents,
            children,
            hidden,
        }
    }

    pub fn for_structure(s: &CausalStructure) -> Self {
        let hidden = (0..s.num_vars()).map(|v| !s.is_observed(v)).collect();
        Self::new(s, hidden)
    }

    fn directed_paths(&self, from: usize, to: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![from];
        self.extend_directed(to, &mut path, &mut out);
        out
    }

    fn extend_directed(&self, to: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        for &c in &self.children[last] {
            path.push(c);
            if c == to {
                out.push(path.clone());
            } else {
                self.extend_directed(to, path, out);
            }
            path.pop();
        }
    }

    /// A directed path from `j` to `i` with no observed interior node.
    pub fn projected_edge(&self, j: usize, i: usize) -> bool {
        self.directed_paths(j, i)
            .iter()
            .any(|p| p[1..p.len() - 1].iter().all(|&v| self.hidden[v]))
    }

    /// A directed path from `j` to `i` whose last edge leaves an unobserved
    /// variable.
    pub fn ucp(&self, j: usize, i: usize) -> bool {
        self.directed_paths(j, i)
            .iter()
            .any(|p| p.len() >= 3 && self.hidden[p[p.len() - 2]])
    }

    /// A simple undirected path `x_i ← y_m ← … ← v_k → … → y_n → x_j` with
    /// unobserved `y_m` and `y_n`.
    pub fn ubp(&self, i: usize, j: usize) -> bool {
        let mut visited = vec![false; self.n];
        visited[i] = true;
        let mut path = vec![i];
        self.search_ubp(j, &mut path, &mut visited)
    }

    fn search_ubp(&self, target: usize, path: &mut Vec<usize>, visited: &mut [bool]) -> bool {
        let last = *path.last().unwrap();
        let neighbours: Vec<usize> = self.parents[last]
            .union(&self.children[last])
            .copied()
            .collect();
        for v in neighbours {
            if visited[v] {
                continue;
            }
            path.push(v);
            if v == target {
                if self.is_ubp(path) {
                    path.pop();
                    return true;
                }
            } else {
                visited[v] = true;
                let found = self.search_ubp(target, path, visited);
                visited[v] = false;
                if found {
                    path.pop();
                    return true;
                }
            }
            path.pop();
        }
        false
    }

    fn is_ubp(&self, path: &[usize]) -> bool {
        // Edge t points left when path[t + 1] → path[t].
        let left: Vec<bool> = path
            .windows(2)
            .map(|w| self.parents[w[0]].contains(&w[1]))
            .collect();
        let turns = left.iter().take_while(|&&l| l).count();
        let shape = turns >= 1 && turns < left.len() && left[turns..].iter().all(|&l| !l);
        shape && self.hidden[path[1]] && self.hidden[path[path.len() - 2]]
    }

    /// Projected truth over the observed indices in `observed`, in order.
    pub fn truth(&self, observed: &[usize]) -> (EdgeSet, EdgeSet) {
        let mut directed = BTreeSet::new();
        let mut pairs = BTreeSet::new();
        for (a, &j) in observed.iter().enumerate() {
            for (b, &i) in observed.iter().enumerate() {
                if a == b {
                    continue;
                }
                if self.projected_edge(j, i) {
                    directed.insert((a, b));
                }
                if self.ucp(j, i) || (a < b && self.ubp(j, i)) {
                    pairs.insert(ordered(a, b));
                }
            }
        }
        (directed, pairs)
    }
}

/// Mixed corpus for comparing the gamma approximation with the permutation
/// oracle: independent pairs, linear and nonlinear links of varying
/// strength, and two-column second arguments.
pub fn hsic_corpus(count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<Vec<f64>>)> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal, Uniform};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(-1.0, 1.0);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..count)
        .map(|f| {
            let n = 100 + 50 * (f % 3);
            let x: Vec<f64> = (0..n).map(|_| unit.sample(&mut rng)).collect();
            let strength = [0.0, 0.1, 0.3, 1.0][f % 4];
            let noise: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let y: Vec<f64> = match f % 5 {
                0 | 1 => x
                    .iter()
                    .zip(&noise)
                    .map(|(a, e)| strength * a + 0.5 * e)
                    .collect(),
                2 => x
                    .iter()
                    .zip(&noise)
                    .map(|(a, e)| strength * a * a + 0.2 * e)
                    .collect(),
                3 => x
                    .iter()
                    .zip(&noise)
                    .map(|(a, e)| strength * (3.0 * a).sin() + 0.5 * e)
                    .collect(),
                _ => noise.clone(),
            };
            let mut b = vec![y];
            if f % 2 == 1 {
                b.push((0..n).map(|_| unit.sample(&mut rng)).collect());
            }
            (x, b)
        })
        .collect()
}

/// Compares `project_truth` on `s` with `omit` hidden against the path
/// oracle run on the unreduced structure.
pub fn projection_mismatch(s: &CausalStructure, omit: &[usize]) -> Option<String> {
    let reduced = s.with_omitted(omit).expect("valid omission");
    let truth = camuv::eval::project_truth(&reduced).expect("projection");
    let hidden: Vec<bool> = (0..s.num_vars())
        .map(|v| !s.is_observed(v) || omit.contains(&v))
        .collect();
    let kept: Vec<usize> = (0..s.num_observed())
        .filter(|j| !omit.contains(j))
        .collect();
    let (directed, pairs) = PathOracle::new(s, hidden).truth(&kept);
    if truth.directed_edges != directed || truth.ucp_ubp_pairs != pairs {
        return Some(format!(
            "edges {:?} omit {omit:?}: directed {:?} vs {:?}, pairs {:?} vs {:?}",
            s.edges, truth.directed_edges, directed, truth.ucp_ubp_pairs, pairs
        ));
    }
    None
}
