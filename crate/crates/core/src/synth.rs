//! Synthetic causal additive models with unobserved variables.
//!
//! Structures follow the usual benchmark recipe: an Erdős–Rényi DAG over
//! the observed variables in index order, latent common causes with two
//! observed children each, and latent mediators spliced into randomly
//! chosen observed edges; observed indices are shuffled at the end.
//! Every variable is generated as
//!
//! ```text
//! h_i = Σ_{j ∈ pa(i)} ((v_j + a_ij)^c_ij + b_ij) + n_i,   v_i = h_i / sd(h_i)
//! ```
//!
//! with `a ~ U(-5, 5)`, `b ~ U(-1, 1)`, `c ∈ {2, 3}` and
//! `n_i ~ U(-10 + d_i, 10 + d_i)`, `d_i ~ U(-2, 2)`.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dataset::{mean_sd, DataMatrix};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentRole {
    CommonCause,
    Intermediate,
    /// An observed variable dropped from the data after generation.
    Omitted,
}

impl LatentRole {
    pub fn as_str(self) -> &'static str {
        match self {
            LatentRole::CommonCause => "common_cause",
            LatentRole::Intermediate => "intermediate",
            LatentRole::Omitted => "omitted",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "common_cause" => Ok(LatentRole::CommonCause),
            "intermediate" => Ok(LatentRole::Intermediate),
            "omitted" => Ok(LatentRole::Omitted),
            other => Err(Error::Schema(format!("unknown latent role {other:?}"))),
        }
    }
}

/// A DAG over observed and latent variables. Indices `0..observed.len()`
/// are the observed variables in data-column order; the latents follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalStructure {
    pub observed: Vec<String>,
    pub latent: Vec<String>,
    pub roles: Vec<LatentRole>,
    /// `(from, to)` pairs, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl CausalStructure {
    pub fn num_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn num_vars(&self) -> usize {
        self.observed.len() + self.latent.len()
    }

    pub fn is_observed(&self, v: usize) -> bool {
        v < self.observed.len()
    }

    pub fn name(&self, v: usize) -> &str {
        if v < self.observed.len() {
            &self.observed[v]
        } else {
            &self.latent[v - self.observed.len()]
        }
    }

    pub fn parents(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vars()];
        for &(from, to) in &self.edges {
            out[to].push(from);
        }
        out
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vars()];
        for &(from, to) in &self.edges {
            out[from].push(to);
        }
        out
    }

    /// Topological order (smallest ready index first), or an error when the
    /// edges contain a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.num_vars();
        let children = self.children();
        let mut indegree = vec![0usize; n];
        for &(_, to) in &self.edges {
            indegree[to] += 1;
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Cyclic);
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        if self.roles.len() != self.latent.len() {
            return Err(Error::Schema(
                "one role per latent variable required".into(),
            ));
        }
        let n = self.num_vars();
        for &(a, b) in &self.edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Schema(format!("bad edge ({a}, {b})")));
            }
        }
        let mut names: Vec<&str> = self
            .observed
            .iter()
            .chain(&self.latent)
            .map(String::as_str)
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema("duplicate variable name".into()));
        }
        self.topological_order().map(|_| ())
    }

    /// Ground-truth JSON:
    /// `{"observed": [...], "latent": [...], "edges": [[from, to]], "latent_role": {name: role}}`.
    pub fn to_json(&self) -> Value {
        let edges: Vec<[&str; 2]> = self
            .edges
            .iter()
            .map(|&(a, b)| [self.name(a), self.name(b)])
            .collect();
        let mut roles = Map::new();
        for (name, role) in self.latent.iter().zip(&self.roles) {
            roles.insert(name.clone(), json!(role.as_str()));
        }
        json!({
            "observed": self.observed,
            "latent": self.latent,
            "edges": edges,
            "latent_role": roles,
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let names = |field: &str| -> Result<Vec<String>> {
            value
                .get(field)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Schema(format!("missing {field:?} array")))?
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| Error::Schema(format!("{field:?} entries must be strings")))
                })
                .collect()
        };
        let observed = names("observed")?;
        let latent = names("latent")?;
        let index: BTreeMap<&str, usize> = observed
            .iter()
            .chain(&latent)
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let lookup = |v: &Value| -> Result<usize> {
            let s = v
                .as_str()
                .ok_or_else(|| Error::Schema("edge endpoints must be strings".into()))?;
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::Schema(format!("unknown variable {s:?}")))
        };
        let mut edges = Vec::new();
        for e in value
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Schema("missing \"edges\" array".into()))?
        {
            match e.as_array().map(Vec::as_slice) {
                Some([a, b]) => edges.push((lookup(a)?, lookup(b)?)),
                _ => return Err(Error::Schema("edges must be [from, to] pairs".into())),
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let role_map = value.get("latent_role").and_then(Value::as_object);
        let roles = latent
            .iter()
            .map(
                |name| match role_map.and_then(|m| m.get(name)).and_then(Value::as_str) {
                    Some(r) => LatentRole::parse(r),
                    None => Err(Error::Schema(format!("missing role for latent {name:?}"))),
                },
            )
            .collect::<Result<Vec<_>>>()?;
        let s = Self {
            observed,
            latent,
            roles,
            edges,
        };
        s.validate()?;
        Ok(s)
    }

    /// Turns the listed observed variables into latents with role
    /// [`LatentRole::Omitted`]; the remaining observed variables keep their
    /// relative order.
    pub fn with_omitted(&self, omit: &[usize]) -> Result<Self> {
        let p = self.num_observed();
        if let Some(&j) = omit.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidConfig(format!(
                "observed index {j} out of range"
            )));
        }
        let omitted: std::collections::BTreeSet<usize> = omit.iter().copied().collect();
        let kept: Vec<usize> = (0..p).filter(|j| !omitted.contains(j)).collect();
        let mut map = vec![0usize; self.num_vars()];
        for (k, &j) in kept.iter().enumerate() {
            map[j] = k;
        }
        let base = kept.len();
        for (k, &j) in omitted.iter().enumerate() {
            map[j] = base + k;
        }
        for l in 0..self.latent.len() {
            map[p + l] = base + omitted.len() + l;
        }
        let mut latent: Vec<String> = omitted.iter().map(|&j| self.observed[j].clone()).collect();
        latent.extend(self.latent.iter().cloned());
        let mut roles = vec![LatentRole::Omitted; omitted.len()];
        roles.extend(self.roles.iter().copied());
        let mut edges: Vec<(usize, usize)> =
            self.edges.iter().map(|&(a, b)| (map[a], map[b])).collect();
        edges.sort_unstable();
        Ok(Self {
            observed: kept.iter().map(|&j| self.observed[j].clone()).collect(),
            latent,
            roles,
            edges,
        })
    }
}

/// Coefficients of one structural term `(v_j + a)^c + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    pub a: f64,
    pub b: f64,
    pub c: i32,
}

/// A structure plus the constants of its data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthGraph {
    pub structure: CausalStructure,
    /// Parameters per edge, aligned with `structure.edges`.
    pub func_params: Vec<EdgeParams>,
    /// Noise offset `d_i` per variable.
    pub noise_offsets: Vec<f64>,
    /// Noise half-width per variable; `n_i ~ U(-w_i + d_i, w_i + d_i)`.
    pub noise_widths: Vec<f64>,
    /// Observed column `k` was variable `observed_permutation[k]` in the
    /// causal order used to draw the structure.
    pub observed_permutation: Vec<usize>,
    /// Random-stream id per variable, stable across configurations.
    pub stream_ids: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub p: usize,
    pub er_prob: f64,
    pub n_common: usize,
    pub n_intermediate: usize,
    pub n: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            p: 10,
            er_prob: 0.3,
            n_common: 2,
            n_intermediate: 2,
            n: 500,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.er_prob) {
            return Err(Error::InvalidConfig(format!(
                "edge probability {} outside [0, 1]",
                self.er_prob
            )));
        }
        if self.p == 0 {
            return Err(Error::InvalidConfig(
                "need at least one observed variable".into(),
            ));
        }
        if self.n_common > 0 && self.p < 2 {
            return Err(Error::InvalidConfig(
                "a common cause needs two observed children".into(),
            ));
        }
        Ok(())
    }
}

pub const NOISE_WIDTH: f64 = 10.0;

// Stream ids: structure draws use fixed small ids; per-variable parameter and
// noise streams are keyed by a stable variable id.
const STREAM_ER: u64 = 1;
const STREAM_COMMON: u64 = 2;
const STREAM_INTERMEDIATE: u64 = 3;
const STREAM_PERMUTATION: u64 = 4;
const PARAM_BASE: u64 = 1 << 40;
const COMMON_ID: u64 = 1 << 20;
const INTERMEDIATE_ID: u64 = 2 << 20;

/// Draws a random structure and its parameters.
pub fn gen_structure(cfg: &SynthConfig) -> Result<GroundTruthGraph> {
    cfg.validate()?;
    let p = cfg.p;

    let mut rng = substream(cfg.seed, STREAM_ER);
    let mut observed_edges = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if rng.gen_bool(cfg.er_prob) {
                observed_edges.push((i, j));
            }
        }
    }
    if cfg.n_intermediate > observed_edges.len() {
        return Err(Error::InvalidConfig(format!(
            "{} intermediate latents requested but only {} observed edges exist",
            cfg.n_intermediate,
            observed_edges.len()
        )));
    }

    // Causal-order variable ids: observed 0..p, then common causes, then
    // intermediates.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut stream_ids: Vec<u64> = (0..p as u64).collect();
    let mut roles = Vec::new();

    let mut rng = substream(cfg.seed, STREAM_COMMON);
    for k in 0..cfg.n_common {
        let latent = p + roles.len();
        for child in sample_indices(&mut rng, p, 2).into_vec() {
            edges.push((latent, child));
        }
        roles.push(LatentRole::CommonCause);
        stream_ids.push(COMMON_ID + k as u64);
    }

    let mut rng = substream(cfg.seed, STREAM_INTERMEDIATE);
    let mut replaced =
        sample_indices(&mut rng, observed_edges.len(), cfg.n_intermediate).into_vec();
    replaced.sort_unstable();
    for (k, &e) in replaced.iter().enumerate() {
        let (from, to) = observed_edges[e];
        let latent = p + roles.len();
        edges.push((from, latent));
        edges.push((latent, to));
        roles.push(LatentRole::Intermediate);
        stream_ids.push(INTERMEDIATE_ID + k as u64);
    }
    edges.extend(
        observed_edges
            .iter()
            .enumerate()
            .filter(|(e, _)| replaced.binary_search(e).is_err())
            .map(|(_, &edge)| edge),
    );

    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut substream(cfg.seed, STREAM_PERMUTATION));
    // perm[k] = causal index of observed column k.
    let mut position = vec![0usize; p];
    for (k, &orig) in perm.iter().enumerate() {
        position[orig] = k;
    }
    let relabel = |v: usize| if v < p { position[v] } else { v };
    let mut edges: Vec<(usize, usize)> = edges
        .into_iter()
        .map(|(a, b)| (relabel(a), relabel(b)))
        .collect();
    edges.sort_unstable();
    let mut ids = vec![0u64; stream_ids.len()];
    for (v, &id) in stream_ids.iter().enumerate() {
        ids[relabel(v)] = id;
    }

    let structure = CausalStructure {
        observed: (1..=p).map(|i| format!("x{i}")).collect(),
        latent: (1..=roles.len()).map(|i| format!("y{i}")).collect(),
        roles,
        edges,
    };
    GroundTruthGraph::with_random_params(structure, ids, perm, cfg.seed)
}

impl GroundTruthGraph {
    /// Draws parameters for an arbitrary structure. Each variable's
    /// parameters come from its own stream, with incoming edges taken in
    /// order of the parents' stream ids.
    pub fn with_random_params(
        structure: CausalStructure,
        stream_ids: Vec<u64>,
        observed_permutation: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        structure.validate()?;
        if stream_ids.len() != structure.num_vars() {
            return Err(Error::Dimension(
                "one stream id per variable required".into(),
            ));
        }
        let parents = structure.parents();
        let mut noise_offsets = Vec::with_capacity(structure.num_vars());
        let mut params: BTreeMap<(usize, usize), EdgeParams> = BTreeMap::new();
        for v in 0..structure.num_vars() {
            let mut rng = substream(seed, PARAM_BASE + stream_ids[v]);
            noise_offsets.push(rng.gen_range(-2.0..2.0));
            let mut ps = parents[v].clone();
            ps.sort_by_key(|&u| stream_ids[u]);
            for u in ps {
                let a = rng.gen_range(-5.0..5.0);
                let b = rng.gen_range(-1.0..1.0);
                let c = if rng.gen_bool(0.5) { 2 } else { 3 };
                params.insert((u, v), EdgeParams { a, b, c });
            }
        }
        let func_params = structure.edges.iter().map(|e| params[e]).collect();
        let noise_widths = vec![NOISE_WIDTH; structure.num_vars()];
        Ok(Self {
            structure,
            func_params,
            noise_offsets,
            noise_widths,
            observed_permutation,
            stream_ids,
        })
    }

    /// A structure with default stream ids (the variable indices) and
    /// identity permutation.
    pub fn from_structure(structure: CausalStructure, seed: u64) -> Result<Self> {
        let ids = (0..structure.num_vars() as u64).collect();
        let perm = (0..structure.num_observed()).collect();
        Self::with_random_params(structure, ids, perm, seed)
    }

    /// Samples all variables in topological order; returns every variable's
    /// values, observed first.
    pub fn sample_all(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        let s = &self.structure;
        let order = s.topological_order()?;
        let mut incoming: Vec<Vec<(usize, EdgeParams)>> = vec![Vec::new(); s.num_vars()];
        for (&(from, to), &prm) in s.edges.iter().zip(&self.func_params) {
            incoming[to].push((from, prm));
        }
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); s.num_vars()];
        for v in order {
            let mut rng = substream(seed, self.stream_ids[v]);
            let (d, w) = (self.noise_offsets[v], self.noise_widths[v]);
            let mut h: Vec<f64> = (0..n).map(|_| rng.gen_range(-w + d..w + d)).collect();
            for &(u, prm) in &incoming[v] {
                for (hi, &x) in h.iter_mut().zip(&values[u]) {
                    *hi += (x + prm.a).powi(prm.c) + prm.b;
                }
            }
            let (_, sd) = mean_sd(&h);
            if sd.is_nan() || sd <= 0.0 || !sd.is_finite() {
                return Err(Error::ZeroVariance(s.name(v).to_owned()));
            }
            values[v] = h.into_iter().map(|x| x / sd).collect();
        }
        Ok(values)
    }

    /// Observed columns only.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DataMatrix> {
        let mut all = self.sample_all(n, seed)?;
        all.truncate(self.structure.num_observed());
        DataMatrix::new(self.structure.observed.clone(), all)
    }
}
