//! Additive regression `y ≈ intercept + Σ g_m(x_m)` by penalized-spline
//! backfitting.
//!
//! Each component is a cubic B-spline with quantile knots and an integrated
//! squared second-derivative penalty whose weight is chosen per component by
//! GCV over [`basis::LAMBDA_GRID`]. Components are centered over the training
//! data so the intercept is the mean of `y`.

pub mod basis;

pub use basis::{SmoothFn, SplineBasis};

use crate::error::{Error, Result};

/// Smallest sample size accepted when the predictor list is non-empty.
pub const MIN_SAMPLES: usize = 20;
/// Backfitting sweep cap.
pub const MAX_SWEEPS: usize = 50;
/// Convergence threshold on the largest fitted-value change in a sweep,
/// relative to the standard deviation of the response.
pub const TOLERANCE: f64 = 1e-8;

/// A fitted additive model.
#[derive(Debug, Clone, PartialEq)]
pub struct GamModel {
    pub intercept: f64,
    pub smooths: Vec<SmoothFn>,
    pub predictor_ids: Vec<usize>,
}

/// A fitted model together with its training residuals and convergence
/// diagnostics.
#[derive(Debug, Clone)]
pub struct GamFit {
    pub model: GamModel,
    pub residuals: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Largest fitted-value change seen in the last sweep.
    pub last_change: f64,
}

impl GamModel {
    /// Predicted mean response for one row of predictor values.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .smooths
                .iter()
                .zip(row)
                .map(|(s, &x)| s.eval(x))
                .sum::<f64>()
    }
}

/// Fits `y` on the given predictors; their ids are their positions.
pub fn fit(y: &[f64], predictors: &[&[f64]]) -> Result<GamModel> {
    fit_with_residuals(y, predictors).map(|f| f.model)
}

pub fn fit_with_residuals(y: &[f64], predictors: &[&[f64]]) -> Result<GamFit> {
    check_lengths(y, predictors)?;
    if !predictors.is_empty() && y.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            n: y.len(),
            min: MIN_SAMPLES,
        });
    }
    let bases = predictors
        .iter()
        .map(|x| SplineBasis::new(x))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SplineBasis> = bases.iter().collect();
    let ids: Vec<usize> = (0..predictors.len()).collect();
    fit_bases(y, &refs, &ids)
}

/// Backfits `y` on prepared bases, labelling components with `ids`.
pub fn fit_bases(y: &[f64], bases: &[&SplineBasis], ids: &[usize]) -> Result<GamFit> {
    let n = y.len();
    if bases.len() != ids.len() {
        return Err(Error::Dimension(format!(
            "{} bases for {} predictor ids",
            bases.len(),
            ids.len()
        )));
    }
    if let Some(b) = bases.iter().find(|b| b.n() != n) {
        return Err(Error::Dimension(format!(
            "basis built on {} rows, response has {n}",
            b.n()
        )));
    }
    if !bases.is_empty() && n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            n,
            min: MIN_SAMPLES,
        });
    }

    let intercept = y.iter().sum::<f64>() / n as f64;
    let q = bases.len();
    if q == 0 {
        return Ok(GamFit {
            model: GamModel {
                intercept,
                smooths: Vec::new(),
                predictor_ids: Vec::new(),
            },
            residuals: y.iter().map(|v| v - intercept).collect(),
            sweeps: 0,
            converged: true,
            last_change: 0.0,
        });
    }

    let (_, sd_y) = crate::dataset::mean_sd(y);
    let tol = TOLERANCE * if sd_y > 0.0 { sd_y } else { 1.0 };

    let mut fitted = vec![vec![0.0; n]; q];
    let mut total = vec![0.0; n];
    let mut lambdas: Vec<Option<usize>> = vec![None; q];
    let mut state: Vec<Option<(usize, nalgebra::DVector<f64>, f64)>> = vec![None; q];
    let mut target = vec![0.0; n];
    let mut updated = vec![0.0; n];
    let mut sweeps = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;

    // Backfit until every smooth keeps its GCV choice for a full sweep.
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        let mut lambda_moved = false;
        for j in 0..q {
            for i in 0..n {
                target[i] = y[i] - intercept - (total[i] - fitted[j][i]);
            }
            let (idx, coef, offset) = bases[j].smooth(&target, None, &mut updated);
            if lambdas[j] != Some(idx) {
                lambda_moved = true;
                lambdas[j] = Some(idx);
            }
            for i in 0..n {
                let delta = updated[i] - fitted[j][i];
                max_change = max_change.max(delta.abs());
                total[i] += delta;
                fitted[j][i] = updated[i];
            }
            state[j] = Some((idx, coef, offset));
        }
        last_change = max_change;
        if q == 1 || max_change <= tol {
            converged = true;
            break;
        }
        if !lambda_moved && sweeps > 1 {
            break;
        }
    }

    if !converged {
        let chosen: Vec<usize> = lambdas.iter().map(|l| l.unwrap_or(0)).collect();
        let centered: Vec<f64> = y.iter().map(|v| v - intercept).collect();
        if let Some(coefs) = basis::joint_solve(bases, &chosen, &centered) {
            for (j, coef) in coefs.into_iter().enumerate() {
                bases[j].mul_into(&coef, &mut updated);
                let offset = updated.iter().sum::<f64>() / n as f64;
                for i in 0..n {
                    let v = updated[i] - offset;
                    total[i] += v - fitted[j][i];
                    fitted[j][i] = v;
                }
                state[j] = Some((chosen[j], coef, offset));
            }
        }
        // One sweep with the chosen penalties measures how far the result
        // is from a backfitting fixed point.
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..q {
            for i in 0..n {
                target[i] = y[i] - intercept - (total[i] - fitted[j][i]);
            }
            let (idx, coef, offset) = bases[j].smooth(&target, Some(chosen[j]), &mut updated);
            for i in 0..n {
                let delta = updated[i] - fitted[j][i];
                max_change = max_change.max(delta.abs());
                total[i] += delta;
                fitted[j][i] = updated[i];
            }
            state[j] = Some((idx, coef, offset));
        }
        last_change = max_change;
        converged = max_change <= tol;
    }

    let smooths = bases
        .iter()
        .zip(state)
        .map(|(b, s)| {
            let (idx, coef, offset) = s.expect("every smooth updated at least once");
            b.to_smooth_fn(idx, &coef, offset)
        })
        .collect();
    let residuals = (0..n).map(|i| y[i] - intercept - total[i]).collect();
    Ok(GamFit {
        model: GamModel {
            intercept,
            smooths,
            predictor_ids: ids.to_vec(),
        },
        residuals,
        sweeps,
        converged,
        last_change,
    })
}

/// `y − intercept − Σ g_m(x_m)` evaluated on arbitrary data.
pub fn residuals(model: &GamModel, y: &[f64], predictors: &[&[f64]]) -> Result<Vec<f64>> {
    if predictors.len() != model.smooths.len() {
        return Err(Error::Dimension(format!(
            "model has {} smooths, got {} predictors",
            model.smooths.len(),
            predictors.len()
        )));
    }
    check_lengths(y, predictors)?;
    Ok((0..y.len())
        .map(|i| {
            let g: f64 = model
                .smooths
                .iter()
                .zip(predictors)
                .map(|(s, x)| s.eval(x[i]))
                .sum();
            y[i] - model.intercept - g
        })
        .collect())
}

fn check_lengths(y: &[f64], predictors: &[&[f64]]) -> Result<()> {
    if let Some((j, x)) = predictors
        .iter()
        .enumerate()
        .find(|(_, x)| x.len() != y.len())
    {
        return Err(Error::Dimension(format!(
            "predictor {j} has {} rows, response has {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}
