//! Scoring estimated graphs against a known structure.
//!
//! The truth is first projected onto the observed variables: `x_j → x_i`
//! is a true directed edge when some directed path from `x_j` to `x_i` has
//! only unobserved interior nodes, and `{x_i, x_j}` is a true dashed pair
//! when the two are joined by an unobserved causal path or an unobserved
//! backdoor path.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::index::sample as sample_indices;

use crate::dataset::DataMatrix;
use crate::discovery::CausalGraph;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::synth::CausalStructure;

const OMIT_STREAM: u64 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedTruth {
    pub names: Vec<String>,
    /// `(from, to)` over observed indices.
    pub directed_edges: BTreeSet<(usize, usize)>,
    /// Unordered pairs stored as `(low, high)`.
    pub ucp_ubp_pairs: BTreeSet<(usize, usize)>,
}

impl ProjectedTruth {
    pub fn p(&self) -> usize {
        self.names.len()
    }

    /// The projected truth as a graph, with UCP/UBP pairs that have no
    /// directed edge drawn dashed.
    pub fn to_graph(&self) -> CausalGraph {
        let mut g = CausalGraph::empty(self.names.clone());
        for &(from, to) in &self.directed_edges {
            g.parents[to].insert(from);
        }
        for &(i, j) in &self.ucp_ubp_pairs {
            if !g.has_directed_between(i, j) {
                g.add_dashed(i, j);
            }
        }
        g
    }
}

/// `reach[v]` holds every strict descendant of `v`.
fn descendants(s: &CausalStructure, order: &[usize]) -> Vec<BTreeSet<usize>> {
    let children = s.children();
    let mut reach = vec![BTreeSet::new(); s.num_vars()];
    for &v in order.iter().rev() {
        let mut set = BTreeSet::new();
        for &c in &children[v] {
            set.insert(c);
            set.extend(reach[c].iter().copied());
        }
        reach[v] = set;
    }
    reach
}

pub fn project_truth(s: &CausalStructure) -> Result<ProjectedTruth> {
    s.validate()?;
    let order = s.topological_order()?;
    let below = descendants(s, &order);
    let children = s.children();
    let parents = s.parents();
    let p = s.num_observed();

    let mut directed_edges = BTreeSet::new();
    for j in 0..p {
        let mut stack = children[j].clone();
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            if s.is_observed(v) {
                directed_edges.insert((j, v));
            } else {
                stack.extend(children[v].iter().copied());
            }
        }
    }

    // Unobserved direct causes of each observed variable.
    let latent_parents: Vec<Vec<usize>> = (0..p)
        .map(|i| {
            parents[i]
                .iter()
                .copied()
                .filter(|&v| !s.is_observed(v))
                .collect()
        })
        .collect();
    let reaches = |a: usize, b: usize| a == b || below[a].contains(&b);

    let mut ucp_ubp_pairs = BTreeSet::new();
    for i in 0..p {
        for j in i + 1..p {
            let ucp = latent_parents[i].iter().any(|&y| below[j].contains(&y))
                || latent_parents[j].iter().any(|&y| below[i].contains(&y));
            let ubp = || {
                latent_parents[i].iter().any(|&ym| {
                    latent_parents[j]
                        .iter()
                        .any(|&yn| (0..s.num_vars()).any(|v| reaches(v, ym) && reaches(v, yn)))
                })
            };
            if ucp || ubp() {
                ucp_ubp_pairs.insert((i, j));
            }
        }
    }

    Ok(ProjectedTruth {
        names: s.observed.clone(),
        directed_edges,
        ucp_ubp_pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    /// `None` when nothing was estimated.
    pub precision: Option<f64>,
    /// `None` when the truth is empty.
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
    pub tp: usize,
    pub n_estimated: usize,
    pub n_true: usize,
}

impl Scores {
    pub fn from_counts(tp: usize, n_estimated: usize, n_true: usize) -> Self {
        let ratio = |den: usize| (den > 0).then(|| tp as f64 / den as f64);
        let precision = ratio(n_estimated);
        let recall = ratio(n_true);
        let f_measure = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Self {
            precision,
            recall,
            f_measure,
            tp,
            n_estimated,
            n_true,
        }
    }

    fn between<T: Ord>(est: &BTreeSet<T>, truth: &BTreeSet<T>) -> Self {
        Self::from_counts(est.intersection(truth).count(), est.len(), truth.len())
    }
}

fn check_universe(est: &CausalGraph, truth: &ProjectedTruth) -> Result<()> {
    if est.names != truth.names {
        return Err(Error::Dimension(format!(
            "estimate has variables {:?}, truth has {:?}",
            est.names, truth.names
        )));
    }
    Ok(())
}

pub fn score_directed(est: &CausalGraph, truth: &ProjectedTruth) -> Result<Scores> {
    check_universe(est, truth)?;
    Ok(Scores::between(
        &est.directed_edges(),
        &truth.directed_edges,
    ))
}

/// Dashed estimates are scored against the UCP/UBP pairs only.
pub fn score_dashed(est: &CausalGraph, truth: &ProjectedTruth) -> Result<Scores> {
    check_universe(est, truth)?;
    Ok(Scores::between(&est.dashed, &truth.ucp_ubp_pairs))
}

/// Mean over the defined values; `None` when none are defined.
pub fn mean_defined<I: IntoIterator<Item = Option<f64>>>(values: I) -> Option<f64> {
    let (sum, count) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// The sorted observed indices dropped by [`omit_variables`] for `seed`.
pub fn omit_selection(p: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m >= p {
        return Err(Error::InvalidConfig(format!(
            "cannot omit {m} of {p} observed variables"
        )));
    }
    let mut picked = sample_indices(&mut substream(seed, OMIT_STREAM), p, m).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Drops `m` randomly chosen observed variables from both the data and the
/// structure, returning the reduced data, the structure with those
/// variables turned into latents, and its projection.
pub fn omit_variables(
    s: &CausalStructure,
    data: &DataMatrix,
    m: usize,
    seed: u64,
) -> Result<(DataMatrix, CausalStructure, ProjectedTruth)> {
    if data.names() != s.observed.as_slice() {
        return Err(Error::Dimension(
            "data columns do not match the structure's observed variables".into(),
        ));
    }
    let omitted = omit_selection(s.num_observed(), m, seed)?;
    let reduced = s.with_omitted(&omitted)?;
    let keep: Vec<usize> = (0..s.num_observed())
        .filter(|j| omitted.binary_search(j).is_err())
        .collect();
    let truth = project_truth(&reduced)?;
    Ok((data.select(&keep)?, reduced, truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Directed,
    Dashed,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Directed => "directed",
            EdgeKind::Dashed => "dashed",
        }
    }
}

/// One line of a scores CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub trial: u64,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub d: Option<usize>,
    pub kind: EdgeKind,
    pub scores: Scores,
}

pub const SCORE_HEADER: [&str; 11] = [
    "trial",
    "n",
    "alpha",
    "d",
    "kind",
    "precision",
    "recall",
    "f",
    "tp",
    "n_est",
    "n_true",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| x.to_string())
}

impl ScoreRow {
    pub fn fields(&self) -> [String; 11] {
        let s = &self.scores;
        [
            self.trial.to_string(),
            opt(self.n),
            opt(self.alpha),
            opt(self.d),
            self.kind.as_str().to_owned(),
            opt(s.precision),
            opt(s.recall),
            opt(s.f_measure),
            s.tp.to_string(),
            s.n_estimated.to_string(),
            s.n_true.to_string(),
        ]
    }
}

/// Writes rows as CSV, preceded by the header when `header` is set.
pub fn write_score_rows<W: Write>(out: W, rows: &[ScoreRow], header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(SCORE_HEADER)?;
    }
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
