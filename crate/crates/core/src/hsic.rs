//! Hilbert–Schmidt independence test with Gaussian kernels.
//!
//! Bandwidths follow the median heuristic, computed separately for each
//! argument. The second argument may hold several columns; they are treated
//! as one multi-dimensional variable under a single joint kernel, after each
//! column is scaled to unit standard deviation so that the test does not
//! depend on the units of individual columns. The p-value comes from a
//! gamma distribution matched to the first two moments of the biased
//! statistic under independence.

use rand::seq::SliceRandom;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::rng::substream;

/// Minimum sample size for a test.
pub const MIN_SAMPLES: usize = 10;
/// Smallest permutation count accepted by the permutation oracle.
pub const MIN_PERMUTATIONS: usize = 200;
/// Default cap on kernel-matrix size.
pub const DEFAULT_MAX_N: usize = 2000;

const SUBSAMPLE_STREAM: u64 = 0x4853_4943;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsicResult {
    /// `n · HSIC_b`, the biased estimator scaled by the sample size.
    pub statistic: f64,
    pub p_value: f64,
    pub bandwidth_x: f64,
    pub bandwidth_y: f64,
}

/// Subsampling for large inputs: when `n > max_n`, the same seeded uniform
/// subset of rows is used for both arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HsicOptions {
    pub max_n: Option<usize>,
    pub seed: u64,
}

impl Default for HsicOptions {
    fn default() -> Self {
        Self {
            max_n: Some(DEFAULT_MAX_N),
            seed: 0,
        }
    }
}

/// Gamma-approximated test on all rows.
pub fn p_hsic(a: &[f64], b: &[&[f64]]) -> Result<HsicResult> {
    p_hsic_with(
        a,
        b,
        &HsicOptions {
            max_n: None,
            seed: 0,
        },
    )
}

pub fn p_hsic_with(a: &[f64], b: &[&[f64]], opts: &HsicOptions) -> Result<HsicResult> {
    validate(a, b)?;
    let scaled = joint_columns(b)?;
    let b: Vec<&[f64]> = scaled.iter().map(|c| c.as_ref()).collect();
    let rows = subsample(a.len(), opts);
    let k = Kernel::new(&rows, &[a], "first")?;
    let l = Kernel::new(&rows, &b, "second")?;
    let (statistic, p_value) = gamma_test(&k, &l);
    Ok(HsicResult {
        statistic,
        p_value,
        bandwidth_x: k.bandwidth,
        bandwidth_y: l.bandwidth,
    })
}

/// Permutation p-value `(1 + #{stat_π ≥ stat}) / (1 + n_perm)`, permuting
/// the first argument with a seeded generator. Kept as an oracle for the
/// gamma approximation.
pub fn p_hsic_permutation(a: &[f64], b: &[&[f64]], n_perm: usize, seed: u64) -> Result<f64> {
    validate(a, b)?;
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::InvalidConfig(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {n_perm}"
        )));
    }
    let scaled = joint_columns(b)?;
    let b: Vec<&[f64]> = scaled.iter().map(|c| c.as_ref()).collect();
    let n = a.len();
    let rows: Vec<usize> = (0..n).collect();
    let mut k = Kernel::new(&rows, &[a], "first")?.full();
    let mut l = Kernel::new(&rows, &b, "second")?.full();
    center(&mut k, n);
    center(&mut l, n);
    let observed: f64 = k.iter().zip(&l).map(|(x, y)| x * y).sum();
    let mut rng = substream(seed, 0);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut exceed = 0usize;
    for _ in 0..n_perm {
        perm.shuffle(&mut rng);
        let mut stat = 0.0;
        for i in 0..n {
            let krow = &k[perm[i] * n..(perm[i] + 1) * n];
            let lrow = &l[i * n..(i + 1) * n];
            for j in 0..n {
                stat += krow[perm[j]] * lrow[j];
            }
        }
        if stat >= observed {
            exceed += 1;
        }
    }
    Ok((1 + exceed) as f64 / (1 + n_perm) as f64)
}

fn validate(a: &[f64], b: &[&[f64]]) -> Result<()> {
    let n = a.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            n,
            min: MIN_SAMPLES,
        });
    }
    if b.is_empty() {
        return Err(Error::Dimension("second argument has no columns".into()));
    }
    if let Some(c) = b.iter().find(|c| c.len() != n) {
        return Err(Error::Dimension(format!(
            "arguments have {n} and {} rows",
            c.len()
        )));
    }
    if a.iter()
        .chain(b.iter().flat_map(|c| c.iter()))
        .any(|v| !v.is_finite())
    {
        return Err(Error::Dimension("non-finite value in test input".into()));
    }
    Ok(())
}

fn subsample(n: usize, opts: &HsicOptions) -> Vec<usize> {
    match opts.max_n {
        Some(cap) if n > cap && cap >= MIN_SAMPLES => {
            let mut rng = substream(opts.seed, SUBSAMPLE_STREAM);
            let mut rows = rand::seq::index::sample(&mut rng, n, cap).into_vec();
            rows.sort_unstable();
            rows
        }
        _ => (0..n).collect(),
    }
}

/// Columns of a multi-column argument, each divided by its standard
/// deviation. A single column is passed through untouched.
fn joint_columns<'a>(b: &[&'a [f64]]) -> Result<Vec<std::borrow::Cow<'a, [f64]>>> {
    use std::borrow::Cow;
    if b.len() == 1 {
        return Ok(vec![Cow::Borrowed(b[0])]);
    }
    b.iter()
        .map(|c| {
            let (_, sd) = crate::dataset::mean_sd(c);
            if sd.is_nan() || sd <= 0.0 {
                return Err(Error::DegenerateBandwidth("second"));
            }
            Ok(Cow::Owned(c.iter().map(|v| v / sd).collect()))
        })
        .collect()
}

/// Gaussian kernel over `rows`, stored as the strict upper triangle in
/// row-major order; the diagonal is 1.
struct Kernel {
    m: usize,
    upper: Vec<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
    bandwidth: f64,
}

impl Kernel {
    fn new(rows: &[usize], cols: &[&[f64]], which: &'static str) -> Result<Self> {
        let m = rows.len();
        let mut upper = Vec::with_capacity(m * (m - 1) / 2);
        let bandwidth = if let [col] = cols {
            let mut sorted: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
            sorted.sort_unstable_by(f64::total_cmp);
            median_pair_distance(&sorted)
        } else {
            for (r, &i) in rows.iter().enumerate() {
                for &j in &rows[r + 1..] {
                    upper.push(cols.iter().map(|c| (c[i] - c[j]).powi(2)).sum());
                }
            }
            median_sqrt(&mut upper.clone())
        };
        if bandwidth.is_nan() || bandwidth <= 0.0 {
            return Err(Error::DegenerateBandwidth(which));
        }
        let scale = -1.0 / (2.0 * bandwidth * bandwidth);
        if let [col] = cols {
            let x: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
            for (r, &xi) in x.iter().enumerate() {
                upper.extend(
                    x[r + 1..]
                        .iter()
                        .map(|&xj| ((xi - xj) * (xi - xj) * scale).exp()),
                );
            }
        } else {
            for v in upper.iter_mut() {
                *v = (*v * scale).exp();
            }
        }
        let mut sums = vec![1.0; m];
        let mut idx = 0;
        for r in 0..m {
            let row = &upper[idx..idx + m - r - 1];
            sums[r] += row.iter().sum::<f64>();
            for (s, &v) in sums[r + 1..].iter_mut().zip(row) {
                *s += v;
            }
            idx += m - r - 1;
        }
        let row_means: Vec<f64> = sums.iter().map(|s| s / m as f64).collect();
        let grand_mean = row_means.iter().sum::<f64>() / m as f64;
        Ok(Self {
            m,
            upper,
            row_means,
            grand_mean,
            bandwidth,
        })
    }

    /// Mean of the off-diagonal entries.
    fn off_diagonal_mean(&self) -> f64 {
        let m = self.m as f64;
        (self.grand_mean * m * m - m) / (m * (m - 1.0))
    }

    /// Dense row-major copy.
    fn full(&self) -> Vec<f64> {
        let m = self.m;
        let mut g = vec![1.0; m * m];
        let mut it = self.upper.iter();
        for r in 0..m {
            for c in r + 1..m {
                let v = *it.next().unwrap_or(&0.0);
                g[r * m + c] = v;
                g[c * m + r] = v;
            }
        }
        g
    }
}

/// Median of the square roots of `sq`, without taking every root.
fn median_sqrt(sq: &mut [f64]) -> f64 {
    let len = sq.len();
    let mid = len / 2;
    let (lower, upper, _) = sq.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = upper.sqrt();
    if len % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max.sqrt() + upper)
    }
}

/// Number of pairs `i < j` of a sorted slice with `x[j] - x[i] <= t`.
fn pairs_within(x: &[f64], t: f64) -> usize {
    let mut count = 0;
    let mut lo = 0;
    for (j, &xj) in x.iter().enumerate() {
        while lo < j && xj - x[lo] > t {
            lo += 1;
        }
        count += j - lo;
    }
    count
}

/// The `k`-th smallest (0-based) pairwise difference of a sorted slice.
fn kth_pair_distance(x: &[f64], k: usize) -> f64 {
    const WINDOW: usize = 4096;
    let span = x[x.len() - 1] - x[0];
    if span == 0.0 {
        return 0.0;
    }
    // Pairs with distance <= lo number at most k; pairs with distance <= hi
    // number more than k.
    let (mut lo, mut hi) = (-span, span);
    let mut below = 0;
    let mut through = x.len() * (x.len() - 1) / 2;
    while through - below > WINDOW {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c = pairs_within(x, mid);
        if c > k {
            hi = mid;
            through = c;
        } else {
            lo = mid;
            below = c;
        }
    }
    let mut window = Vec::with_capacity(through - below);
    let mut start = 0;
    for (j, &xj) in x.iter().enumerate() {
        while xj - x[start] > hi {
            start += 1;
        }
        window.extend(x[start..j].iter().map(|&xi| xj - xi).filter(|&d| d > lo));
    }
    let rank = k - below;
    *window.select_nth_unstable_by(rank, f64::total_cmp).1
}

/// Median of `|x_i - x_j|` over pairs of a sorted slice.
fn median_pair_distance(x: &[f64]) -> f64 {
    let pairs = x.len() * (x.len() - 1) / 2;
    let mid = pairs / 2;
    if pairs % 2 == 1 {
        kth_pair_distance(x, mid)
    } else {
        0.5 * (kth_pair_distance(x, mid - 1) + kth_pair_distance(x, mid))
    }
}

/// Double-centers a symmetric row-major matrix in place.
fn center(k: &mut [f64], m: usize) {
    let means: Vec<f64> = (0..m)
        .map(|i| k[i * m..(i + 1) * m].iter().sum::<f64>() / m as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    for i in 0..m {
        for j in 0..m {
            k[i * m + j] += grand - means[i] - means[j];
        }
    }
}

/// Statistic and gamma p-value. Centering is applied on the fly.
fn gamma_test(k: &Kernel, l: &Kernel) -> (f64, f64) {
    let m = k.m;
    let mf = m as f64;
    let (kr, lr) = (&k.row_means, &l.row_means);
    let (kg, lg) = (k.grand_mean, l.grand_mean);

    let mut trace = 0.0;
    let mut var_sum = 0.0;
    let mut idx = 0;
    for i in 0..m {
        let len = m - i - 1;
        let (krow, lrow) = (&k.upper[idx..idx + len], &l.upper[idx..idx + len]);
        idx += len;
        let (ki, li) = (kg - kr[i], lg - lr[i]);
        trace += (1.0 + ki - kr[i]) * (1.0 + li - lr[i]);
        let mut row_trace = 0.0;
        let mut row_var = 0.0;
        for (((&kv, &lv), &krj), &lrj) in krow.iter().zip(lrow).zip(&kr[i + 1..]).zip(&lr[i + 1..])
        {
            let prod = (kv + ki - krj) * (lv + li - lrj);
            row_trace += prod;
            row_var += prod * prod;
        }
        trace += 2.0 * row_trace;
        var_sum += 2.0 * row_var / 36.0;
    }
    let statistic = (trace / mf).max(0.0);
    let variance = var_sum / mf / (mf - 1.0) * 72.0 * (mf - 4.0) * (mf - 5.0)
        / mf
        / (mf - 1.0)
        / (mf - 2.0)
        / (mf - 3.0);
    let (mu_x, mu_y) = (k.off_diagonal_mean(), l.off_diagonal_mean());
    let mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / mf;
    let p_value = if variance > 0.0 && mean > 0.0 {
        let shape = mean * mean / variance;
        let scale = variance * mf / mean;
        gamma_ur(shape, statistic / scale).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (statistic, p_value)
}
