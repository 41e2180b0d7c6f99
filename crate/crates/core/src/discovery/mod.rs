//! The discovery engine.
//!
//! Phase 1 grows candidate parent sets by repeatedly finding sinks of small
//! variable sets `K`; phase 2 prunes candidates whose removal leaves the
//! residuals independent. A final pass marks dashed pairs: variables with no
//! directed edge between them whose residuals stay dependent.
//!
//! All regressions and tests are pure functions of the data and of the
//! `(variable, regressor set)` pairs involved, so the engine memoizes them.
//! The trace counters count logical evaluations, not cache misses.

mod graph;

pub use graph::CausalGraph;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use log::warn;
use rayon::prelude::*;

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::gam::{self, SplineBasis};
use crate::hsic::{self, HsicOptions};

/// Run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    /// Significance level of every independence test.
    pub alpha: f64,
    /// Largest `|K|` examined in phase 1 (`d`).
    pub max_set_size: usize,
    /// Seeds the subsample used when `n > hsic_max_n`.
    pub seed: u64,
    pub hsic_max_n: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            max_set_size: 3,
            seed: 0,
            hsic_max_n: Some(hsic::DEFAULT_MAX_N),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.max_set_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "max set size must be at least 2, got {}",
                self.max_set_size
            )));
        }
        if matches!(self.hsic_max_n, Some(m) if m < hsic::MIN_SAMPLES) {
            return Err(Error::InvalidConfig(format!(
                "hsic subsample cap must be at least {}",
                hsic::MIN_SAMPLES
            )));
        }
        Ok(())
    }

    fn hsic_options(&self) -> HsicOptions {
        HsicOptions {
            max_n: self.hsic_max_n,
            seed: self.seed,
        }
    }
}

/// One examined set `K` in phase 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub set: Vec<usize>,
    pub candidate: usize,
    pub e: f64,
    pub h: f64,
    pub accepted: bool,
}

/// Instrumentation of a discovery run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscoveryTrace {
    /// Logical GAM regressions requested (cached or not).
    pub regression_count: u64,
    /// Logical HSIC tests requested (cached or not).
    pub hsic_count: u64,
    /// Joint residual tests made while searching for the most endogenous
    /// variable: `|K|` per examined set.
    pub sink_search_evaluations: u64,
    /// Completed passes over all sets of one size.
    pub phase1_sweeps: u64,
    /// `sink_search_evaluations` contributed by each pass, with the set size.
    pub sweep_evaluations: Vec<(usize, u64)>,
    /// Accepted sinks that changed a parent set.
    pub acceptances: u64,
    pub steps: Vec<StepLog>,
    pub warnings: Vec<String>,
}

impl DiscoveryTrace {
    /// Evaluations in the closing run of unchanged passes, from the last
    /// pass over pairs to the end of candidate extraction.
    pub fn final_sweep_evaluations(&self) -> u64 {
        match self.sweep_evaluations.iter().rposition(|&(t, _)| t == 2) {
            Some(start) => self.sweep_evaluations[start..]
                .iter()
                .map(|&(_, c)| c)
                .sum(),
            None => 0,
        }
    }
}

/// Result of examining one set `K` against the current parent sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SetEvaluation {
    /// Joint p-value for every member of `K`, in `K` order.
    pub p_values: Vec<f64>,
    pub candidate: usize,
    pub e: f64,
    pub h: f64,
}

type ResidualKey = (usize, Vec<usize>);
type TestKey = (ResidualKey, Vec<ResidualKey>);

/// Memoizing evaluator of residuals and independence tests over one dataset.
pub struct Engine<'a> {
    data: &'a DataMatrix,
    config: Config,
    bases: Vec<OnceLock<std::result::Result<Arc<SplineBasis>, String>>>,
    residuals: Mutex<HashMap<ResidualKey, Arc<Vec<f64>>>>,
    tests: Mutex<HashMap<TestKey, f64>>,
}

fn key(var: usize, set: &BTreeSet<usize>) -> ResidualKey {
    (var, set.iter().copied().collect())
}

impl<'a> Engine<'a> {
    pub fn new(data: &'a DataMatrix, config: Config) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            data,
            config,
            bases: (0..data.p()).map(|_| OnceLock::new()).collect(),
            residuals: Mutex::new(HashMap::new()),
            tests: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    fn basis(&self, j: usize) -> Result<Arc<SplineBasis>> {
        let cell = self.bases[j].get_or_init(|| {
            SplineBasis::new(self.data.column(j))
                .map(Arc::new)
                .map_err(|e| format!("{}: {e}", self.data.names()[j]))
        });
        cell.clone().map_err(Error::RankDeficient)
    }

    /// Residual of `var` after additive regression on `set`.
    pub fn residual(&self, var: usize, set: &BTreeSet<usize>) -> Result<Arc<Vec<f64>>> {
        let k = key(var, set);
        if let Some(r) = self.residuals.lock().unwrap().get(&k) {
            return Ok(Arc::clone(r));
        }
        let y = self.data.column(var);
        if y.len() < gam::MIN_SAMPLES && !set.is_empty() {
            return Err(Error::TooFewSamples {
                n: y.len(),
                min: gam::MIN_SAMPLES,
            });
        }
        let bases = set
            .iter()
            .map(|&j| self.basis(j))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&SplineBasis> = bases.iter().map(Arc::as_ref).collect();
        let fit = gam::fit_bases(y, &refs, &k.1)?;
        let r = Arc::new(fit.residuals);
        self.residuals
            .lock()
            .unwrap()
            .entry(k)
            .or_insert_with(|| Arc::clone(&r));
        Ok(r)
    }

    /// p-value of the test between the residual `a` and the stacked
    /// residuals `b`.
    pub fn test(&self, a: ResidualKey, mut b: Vec<ResidualKey>) -> Result<f64> {
        b.sort();
        let k = (a, b);
        if let Some(&p) = self.tests.lock().unwrap().get(&k) {
            return Ok(p);
        }
        let to_set = |r: &ResidualKey| r.1.iter().copied().collect::<BTreeSet<_>>();
        let ra = self.residual(k.0 .0, &to_set(&k.0))?;
        let rb =
            k.1.iter()
                .map(|r| self.residual(r.0, &to_set(r)))
                .collect::<Result<Vec<_>>>()?;
        let cols: Vec<&[f64]> = rb.iter().map(|v| v.as_slice()).collect();
        let p = hsic::p_hsic_with(&ra, &cols, &self.config.hsic_options())?.p_value;
        self.tests.lock().unwrap().insert(k, p);
        Ok(p)
    }

    /// Joint p-value for `x_i ∈ K`: residual of `x_i` on `M_i ∪ K∖{x_i}`
    /// against the residuals of every other member on its own parent set.
    fn joint_p_value(&self, i: usize, k: &[usize], parents: &[BTreeSet<usize>]) -> Result<f64> {
        let mut regressors = parents[i].clone();
        regressors.extend(k.iter().copied().filter(|&j| j != i));
        let others = k
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| key(j, &parents[j]))
            .collect();
        self.test(key(i, &regressors), others)
    }

    /// The member of `K` whose joint p-value is largest (ties go to the
    /// lowest index), with that p-value.
    pub fn find_most_endogenous(
        &self,
        k: &[usize],
        parents: &[BTreeSet<usize>],
    ) -> Result<(usize, f64)> {
        let ps = k
            .iter()
            .map(|&i| self.joint_p_value(i, k, parents))
            .collect::<Result<Vec<_>>>()?;
        Ok(argmax(k, &ps))
    }

    /// Largest pairwise p-value between the residual of `x_b` on `M_b` and
    /// the residual of each other member on its own parent set.
    fn max_pairwise(&self, b: usize, k: &[usize], parents: &[BTreeSet<usize>]) -> Result<f64> {
        k.iter()
            .filter(|&&j| j != b)
            .map(|&j| self.test(key(b, &parents[b]), vec![key(j, &parents[j])]))
            .try_fold(f64::NEG_INFINITY, |m, p| p.map(|p| m.max(p)))
    }

    /// Whether `x_b` passes the sink check for `K`: its residual on
    /// `M_b ∪ K∖{x_b}` is independent of the others (`α < e`) while its
    /// residual on `M_b` alone is dependent on each of them (`α > h`).
    pub fn check_sink(&self, b: usize, k: &[usize], parents: &[BTreeSet<usize>]) -> Result<bool> {
        let e = self.joint_p_value(b, k, parents)?;
        let h = self.max_pairwise(b, k, parents)?;
        Ok(self.config.alpha < e && self.config.alpha > h)
    }

    pub fn evaluate_set(&self, k: &[usize], parents: &[BTreeSet<usize>]) -> Result<SetEvaluation> {
        let p_values = k
            .iter()
            .map(|&i| self.joint_p_value(i, k, parents))
            .collect::<Result<Vec<_>>>()?;
        let (candidate, e) = argmax(k, &p_values);
        let h = self.max_pairwise(candidate, k, parents)?;
        Ok(SetEvaluation {
            p_values,
            candidate,
            e,
            h,
        })
    }

    /// Phase 1 followed by phase 2.
    pub fn directed_edges(&self, trace: &mut DiscoveryTrace) -> Result<Vec<BTreeSet<usize>>> {
        let mut parents = self.phase1(trace)?;
        self.phase2(&mut parents, trace)?;
        Ok(parents)
    }

    /// Candidate-parent extraction.
    pub fn phase1(&self, trace: &mut DiscoveryTrace) -> Result<Vec<BTreeSet<usize>>> {
        let p = self.data.p();
        let mut parents = vec![BTreeSet::new(); p];
        if p < 2 {
            return Ok(parents);
        }
        let d = self.config.max_set_size.min(p);
        let cap = 10 * p * (1usize << d.min(20));
        let mut t = 2;
        while t <= d {
            let sets = combinations(p, t);
            // Evaluate the whole pass against the current parent sets in
            // parallel; the sequential pass below then hits the cache for
            // every set whose members' parent sets are still unchanged.
            let snapshot = parents.clone();
            sets.par_iter().for_each(|k| {
                let _ = self.evaluate_set(k, &snapshot);
            });

            let mut changed = false;
            let mut pass_evaluations = 0u64;
            for k in &sets {
                let ev = self.evaluate_set(k, &parents)?;
                let tu = t as u64;
                pass_evaluations += tu;
                trace.sink_search_evaluations += tu;
                trace.hsic_count += tu + (tu - 1);
                trace.regression_count += tu + 1;
                let accepted = self.config.alpha < ev.e && self.config.alpha > ev.h;
                trace.steps.push(StepLog {
                    set: k.clone(),
                    candidate: ev.candidate,
                    e: ev.e,
                    h: ev.h,
                    accepted,
                });
                if accepted {
                    let before = parents[ev.candidate].len();
                    parents[ev.candidate].extend(k.iter().copied().filter(|&j| j != ev.candidate));
                    if parents[ev.candidate].len() != before {
                        changed = true;
                        trace.acceptances += 1;
                        if trace.acceptances as usize > cap {
                            return Err(Error::SweepCap { cap });
                        }
                    }
                }
            }
            trace.phase1_sweeps += 1;
            trace.sweep_evaluations.push((t, pass_evaluations));
            t = if changed { 2 } else { t + 1 };
        }
        Ok(parents)
    }

    /// Removes each candidate `x_j ∈ M_i` whose exclusion leaves the residual
    /// of `x_i` independent of the residual of `x_j`.
    pub fn phase2(
        &self,
        parents: &mut [BTreeSet<usize>],
        trace: &mut DiscoveryTrace,
    ) -> Result<()> {
        for i in 0..parents.len() {
            let candidates: Vec<usize> = parents[i].iter().copied().collect();
            for j in candidates {
                let mut without = parents[i].clone();
                without.remove(&j);
                trace.hsic_count += 1;
                trace.regression_count += 2;
                let p = self.test(key(i, &without), vec![key(j, &parents[j])])?;
                if self.config.alpha < p {
                    parents[i].remove(&j);
                }
            }
        }
        Ok(())
    }

    /// Dashed pairs: no directed edge either way and dependent residuals.
    pub fn undirected_edges(
        &self,
        parents: &[BTreeSet<usize>],
        trace: &mut DiscoveryTrace,
    ) -> Result<BTreeSet<(usize, usize)>> {
        let p = parents.len();
        let pairs: Vec<(usize, usize)> = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .filter(|&(i, j)| !parents[j].contains(&i) && !parents[i].contains(&j))
            .collect();
        let results: Vec<Result<f64>> = pairs
            .par_iter()
            .map(|&(i, j)| self.test(key(i, &parents[i]), vec![key(j, &parents[j])]))
            .collect();
        let mut dashed = BTreeSet::new();
        for (&(i, j), p) in pairs.iter().zip(results) {
            trace.hsic_count += 1;
            trace.regression_count += 2;
            if p? < self.config.alpha {
                dashed.insert((i, j));
            }
        }
        Ok(dashed)
    }
}

fn argmax(k: &[usize], ps: &[f64]) -> (usize, f64) {
    let mut best = (k[0], ps[0]);
    for (&i, &p) in k.iter().zip(ps).skip(1) {
        if p > best.1 {
            best = (i, p);
        }
    }
    best
}

/// All `t`-subsets of `0..p` in lexicographic order.
pub fn combinations(p: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if t == 0 || t > p {
        return out;
    }
    let mut idx: Vec<usize> = (0..t).collect();
    loop {
        out.push(idx.clone());
        let mut i = t;
        while i > 0 && idx[i - 1] == p - t + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..t {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// See [`Engine::find_most_endogenous`].
pub fn find_most_endogenous(
    k: &[usize],
    parents: &[BTreeSet<usize>],
    data: &DataMatrix,
    config: &Config,
) -> Result<(usize, f64)> {
    check_set(k, data.p())?;
    Engine::new(data, *config)?.find_most_endogenous(k, parents)
}

/// See [`Engine::check_sink`].
pub fn check_sink(
    b: usize,
    k: &[usize],
    parents: &[BTreeSet<usize>],
    data: &DataMatrix,
    config: &Config,
) -> Result<bool> {
    check_set(k, data.p())?;
    if !k.contains(&b) {
        return Err(Error::InvalidConfig(format!("{b} is not a member of K")));
    }
    Engine::new(data, *config)?.check_sink(b, k, parents)
}

fn check_set(k: &[usize], p: usize) -> Result<()> {
    if k.len() < 2 {
        return Err(Error::InvalidConfig("K needs at least two members".into()));
    }
    if let Some(&j) = k.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidConfig(format!(
            "variable index {j} out of range"
        )));
    }
    Ok(())
}

/// Candidate extraction and pruning; returns the parent sets.
pub fn get_directed_edges(
    data: &DataMatrix,
    config: &Config,
) -> Result<(Vec<BTreeSet<usize>>, DiscoveryTrace)> {
    let engine = Engine::new(data, *config)?;
    let mut trace = DiscoveryTrace::default();
    let parents = engine.directed_edges(&mut trace)?;
    Ok((parents, trace))
}

/// Dashed pairs given parent sets estimated on the same data.
pub fn get_undirected_edges(
    data: &DataMatrix,
    parents: &[BTreeSet<usize>],
    config: &Config,
) -> Result<BTreeSet<(usize, usize)>> {
    if parents.len() != data.p() {
        return Err(Error::Dimension(format!(
            "{} parent sets for {} variables",
            parents.len(),
            data.p()
        )));
    }
    let engine = Engine::new(data, *config)?;
    engine.undirected_edges(parents, &mut DiscoveryTrace::default())
}

/// Full pipeline: directed edges, then dashed pairs.
pub fn discover(data: &DataMatrix, config: &Config) -> Result<(CausalGraph, DiscoveryTrace)> {
    let engine = Engine::new(data, *config)?;
    let mut trace = DiscoveryTrace::default();
    let parents = engine.directed_edges(&mut trace)?;
    let dashed = engine.undirected_edges(&parents, &mut trace)?;
    let graph = CausalGraph {
        names: data.names().to_vec(),
        parents,
        dashed,
    };
    for (i, j) in graph.mutual_parents() {
        let msg = format!(
            "{} and {} are parents of each other",
            graph.names[i], graph.names[j]
        );
        warn!("{msg}");
        trace.warnings.push(msg);
    }
    if graph.has_directed_cycle() {
        let msg = "directed edges contain a cycle".to_string();
        warn!("{msg}");
        trace.warnings.push(msg);
    }
    Ok((graph, trace))
}
