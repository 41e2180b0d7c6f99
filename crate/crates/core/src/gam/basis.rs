//! Cubic B-spline bases with quantile knots and a curvature penalty.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const DEGREE: usize = 3;
/// Interior knots per smooth, placed at empirical quantiles.
pub const INTERIOR_KNOTS: usize = 10;
/// Penalty grid searched by GCV: 1e-4, 1e-3, ..., 1e3.
pub const LAMBDA_GRID: [f64; 8] = [1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3];

/// Index of the knot span containing `u` in the full (clamped) knot vector.
fn find_span(knots: &[f64], u: f64) -> usize {
    let first = DEGREE;
    let last = knots.len() - DEGREE - 2;
    if u >= knots[last + 1] {
        return last;
    }
    if u <= knots[first] {
        return first;
    }
    // knots[first..=last+1] is ascending; find the last index with knots[i] <= u.
    let slice = &knots[first..=last + 1];
    let pos = slice.partition_point(|&k| k <= u);
    first + pos - 1
}

/// Values and derivatives (up to `n_ders`) of the `DEGREE + 1` basis
/// functions that are nonzero on `span`. Row `k` holds the k-th derivative.
fn basis_derivatives(knots: &[f64], span: usize, u: f64, n_ders: usize) -> Vec<[f64; DEGREE + 1]> {
    const P: usize = DEGREE;
    let mut ndu = [[0.0f64; P + 1]; P + 1];
    let mut left = [0.0f64; P + 1];
    let mut right = [0.0f64; P + 1];
    ndu[0][0] = 1.0;
    for j in 1..=P {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![[0.0f64; P + 1]; n_ders + 1];
    for j in 0..=P {
        ders[0][j] = ndu[j][P];
    }
    let mut a = [[0.0f64; P + 1]; 2];
    for r in 0..=P {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n_ders.min(P) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = P - k;
            if rk >= 0 {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk as isize {
                k - 1
            } else {
                P - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = P as f64;
    for k in 1..=n_ders.min(P) {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= (P - k) as f64;
    }
    ders
}

/// Linear-interpolated empirical quantile of sorted data.
fn quantile(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The spline representation of one fitted additive component.
///
/// Knots and evaluation happen on the standardized predictor scale
/// `u = (x - center) / scale`, which makes the fit equivariant under affine
/// maps of the predictor. Outside the training range the function continues
/// linearly from the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFn {
    /// Clamped knot vector: boundary knots repeated `DEGREE + 1` times.
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub penalty_lambda: f64,
    pub center: f64,
    pub scale: f64,
    /// Subtracted so the component sums to zero over the training data.
    pub offset: f64,
}

impl SmoothFn {
    fn raw(&self, u: f64) -> (f64, f64) {
        let span = find_span(&self.knots, u);
        let d = basis_derivatives(&self.knots, span, u, 1);
        let base = span - DEGREE;
        let mut value = 0.0;
        let mut slope = 0.0;
        for j in 0..=DEGREE {
            value += self.coefficients[base + j] * d[0][j];
            slope += self.coefficients[base + j] * d[1][j];
        }
        (value, slope)
    }

    /// Evaluates the centered component at a predictor value.
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.scale;
        let lo = self.knots[0];
        let hi = self.knots[self.knots.len() - 1];
        let value = if u < lo {
            let (v, s) = self.raw(lo);
            v + s * (u - lo)
        } else if u > hi {
            let (v, s) = self.raw(hi);
            v + s * (u - hi)
        } else {
            self.raw(u).0
        };
        value - self.offset
    }
}

/// Per-smoothing-parameter solve data.
#[derive(Debug, Clone)]
struct PenalizedSystem {
    lambda: f64,
    inverse: DMatrix<f64>,
    edf: f64,
}

/// A predictor prepared for repeated smoothing: its design rows, Gram
/// matrix and the inverted penalized systems for every grid value.
///
/// Preparing is the expensive part of a fit and depends only on the
/// predictor, so callers regressing many targets on the same column should
/// build this once and reuse it.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    knots: Vec<f64>,
    center: f64,
    scale: f64,
    spans: Vec<usize>,
    values: Vec<[f64; DEGREE + 1]>,
    gram: DMatrix<f64>,
    penalty: DMatrix<f64>,
    systems: Vec<PenalizedSystem>,
}

impl SplineBasis {
    pub fn new(x: &[f64]) -> Result<Self> {
        let n = x.len();
        let (center, scale) = crate::dataset::mean_sd(x);
        if scale.is_nan() || scale <= 0.0 || !scale.is_finite() {
            return Err(Error::RankDeficient("predictor is constant".into()));
        }
        let mut sorted: Vec<f64> = x.iter().map(|v| (v - center) / scale).collect();
        sorted.sort_by(f64::total_cmp);
        let distinct = {
            let mut d = sorted.clone();
            d.dedup();
            d.len()
        };
        if distinct <= DEGREE {
            return Err(Error::RankDeficient(format!(
                "predictor has only {distinct} distinct values"
            )));
        }
        let lo = sorted[0];
        let hi = sorted[n - 1];
        let mut interior: Vec<f64> = (1..=INTERIOR_KNOTS)
            .map(|k| quantile(&sorted, k as f64 / (INTERIOR_KNOTS + 1) as f64))
            .filter(|&k| k > lo && k < hi)
            .collect();
        interior.dedup();

        let mut knots = vec![lo; DEGREE + 1];
        knots.extend_from_slice(&interior);
        knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
        let q = knots.len() - DEGREE - 1;

        let mut spans = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let mut gram = DMatrix::<f64>::zeros(q, q);
        for &xi in x {
            let u = (xi - center) / scale;
            let span = find_span(&knots, u);
            let b = basis_derivatives(&knots, span, u, 0)[0];
            let base = span - DEGREE;
            for a in 0..=DEGREE {
                for c in 0..=DEGREE {
                    gram[(base + a, base + c)] += b[a] * b[c];
                }
            }
            spans.push(span);
            values.push(b);
        }

        let penalty = curvature_penalty(&knots, q);
        let systems = LAMBDA_GRID
            .iter()
            .map(|&lambda| {
                let a = &gram + &penalty * lambda;
                let chol = a.cholesky().ok_or_else(|| {
                    Error::RankDeficient(format!(
                        "penalized Gram matrix singular at lambda={lambda}"
                    ))
                })?;
                let inverse = chol.inverse();
                let edf = (&inverse * &gram).trace();
                Ok(PenalizedSystem {
                    lambda,
                    inverse,
                    edf,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            knots,
            center,
            scale,
            spans,
            values,
            gram,
            penalty,
            systems,
        })
    }

    pub fn n(&self) -> usize {
        self.spans.len()
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    fn transpose_mul(&self, r: &[f64]) -> DVector<f64> {
        let mut out = DVector::<f64>::zeros(self.dim());
        for ((&span, b), &ri) in self.spans.iter().zip(&self.values).zip(r) {
            let base = span - DEGREE;
            for j in 0..=DEGREE {
                out[base + j] += b[j] * ri;
            }
        }
        out
    }

    pub(crate) fn mul_into(&self, coef: &DVector<f64>, out: &mut [f64]) {
        for ((&span, b), o) in self.spans.iter().zip(&self.values).zip(out.iter_mut()) {
            let base = span - DEGREE;
            *o = (0..=DEGREE).map(|j| b[j] * coef[base + j]).sum();
        }
    }

    /// Penalized least-squares smooth of `target`.
    ///
    /// With `lambda_index == None` the grid value minimizing GCV is chosen.
    /// Writes the centered fitted values into `fitted` and returns the
    /// chosen grid index, coefficients and centering offset.
    pub(crate) fn smooth(
        &self,
        target: &[f64],
        lambda_index: Option<usize>,
        fitted: &mut [f64],
    ) -> (usize, DVector<f64>, f64) {
        let n = self.n() as f64;
        let rhs = self.transpose_mul(target);
        let solve = |s: &PenalizedSystem| &s.inverse * &rhs;
        let (index, coef) = match lambda_index {
            Some(i) => (i, solve(&self.systems[i])),
            None => {
                let rr: f64 = target.iter().map(|v| v * v).sum();
                let mut best: Option<(f64, usize, DVector<f64>)> = None;
                for (i, sys) in self.systems.iter().enumerate() {
                    let c = solve(sys);
                    let rss = (rr - 2.0 * c.dot(&rhs) + c.dot(&(&self.gram * &c))).max(0.0);
                    let gcv = n * rss / (n - sys.edf).powi(2);
                    if best.as_ref().is_none_or(|(g, _, _)| gcv < *g) {
                        best = Some((gcv, i, c));
                    }
                }
                let (_, i, c) = best.expect("non-empty lambda grid");
                (i, c)
            }
        };
        self.mul_into(&coef, fitted);
        let offset = fitted.iter().sum::<f64>() / n;
        for f in fitted.iter_mut() {
            *f -= offset;
        }
        (index, coef, offset)
    }

    pub(crate) fn to_smooth_fn(
        &self,
        lambda_index: usize,
        coef: &DVector<f64>,
        offset: f64,
    ) -> SmoothFn {
        SmoothFn {
            knots: self.knots.clone(),
            coefficients: coef.iter().copied().collect(),
            penalty_lambda: self.systems[lambda_index].lambda,
            center: self.center,
            scale: self.scale,
            offset,
        }
    }
}

/// Solves the penalized least-squares problem for all smooths at once with
/// the given grid indices; this is the fixed point backfitting converges
/// to. `target` must have zero mean. Returns `None` if the system is not
/// positive definite.
pub(crate) fn joint_solve(
    bases: &[&SplineBasis],
    lambda_indices: &[usize],
    target: &[f64],
) -> Option<Vec<DVector<f64>>> {
    let n = target.len();
    let dims: Vec<usize> = bases.iter().map(|b| b.dim()).collect();
    let starts: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &d| {
            let s = *acc;
            *acc += d;
            Some(s)
        })
        .collect();
    let total = dims.iter().sum();
    let mut a = DMatrix::<f64>::zeros(total, total);
    let mut rhs = DVector::<f64>::zeros(total);
    let mut means = DVector::<f64>::zeros(total);
    for i in 0..n {
        for (j, bj) in bases.iter().enumerate() {
            let rj = starts[j] + bj.spans[i] - DEGREE;
            let vj = &bj.values[i];
            for (x, &v) in vj.iter().enumerate() {
                rhs[rj + x] += v * target[i];
                means[rj + x] += v;
            }
            for (k, bk) in bases.iter().enumerate().skip(j + 1) {
                let rk = starts[k] + bk.spans[i] - DEGREE;
                let vk = &bk.values[i];
                for (x, &u) in vj.iter().enumerate() {
                    for (y, &w) in vk.iter().enumerate() {
                        a[(rj + x, rk + y)] += u * w;
                    }
                }
            }
        }
    }
    means /= n as f64;
    for (j, bj) in bases.iter().enumerate() {
        let (s, d) = (starts[j], dims[j]);
        let lambda = bj.systems[lambda_indices[j]].lambda;
        // Coefficient shifts along the all-ones vector leave the centered
        // smooth unchanged; the extra term pins them down.
        let pin = n as f64 / d as f64;
        let block = &bj.gram + &bj.penalty * lambda;
        for x in 0..d {
            for y in 0..d {
                a[(s + x, s + y)] = block[(x, y)] + pin;
            }
        }
        for k in j + 1..bases.len() {
            for x in 0..d {
                for y in 0..dims[k] {
                    let v = a[(s + x, starts[k] + y)];
                    a[(starts[k] + y, s + x)] = v;
                }
            }
        }
    }
    // Center every column: B~ᵀB~ = BᵀB − n·m·mᵀ.
    for x in 0..total {
        for y in 0..total {
            a[(x, y)] -= n as f64 * means[x] * means[y];
        }
    }
    let chol = a.cholesky()?;
    let coef = chol.solve(&rhs);
    Some(
        starts
            .iter()
            .zip(&dims)
            .map(|(&s, &d)| coef.rows(s, d).into_owned())
            .collect(),
    )
}

/// Gram matrix of basis second derivatives, integrated exactly over the
/// knot range (two-point Gauss–Legendre is exact for the piecewise-quadratic
/// integrand).
fn curvature_penalty(knots: &[f64], q: usize) -> DMatrix<f64> {
    let mut s = DMatrix::<f64>::zeros(q, q);
    let g = 1.0 / 3f64.sqrt();
    for span in DEGREE..q {
        let (a, b) = (knots[span], knots[span + 1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for node in [mid - half * g, mid + half * g] {
            let d2 = basis_derivatives(knots, span, node, 2)[2];
            let base = span - DEGREE;
            for i in 0..=DEGREE {
                for j in 0..=DEGREE {
                    s[(base + i, base + j)] += half * d2[i] * d2[j];
                }
            }
        }
    }
    s
}
