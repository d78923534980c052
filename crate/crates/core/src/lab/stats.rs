//! Goodness-of-fit and distance statistics used by the experiments.

use rand::Rng;

use crate::error::{Error, Result};

fn nonempty(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        Err(Error::InvalidArgument(format!("{what}: empty sample")))
    } else {
        Ok(())
    }
}

fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n − F|` for an
/// ascending sample and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> Result<f64> {
    nonempty(sorted, "ks_statistic")?;
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("ks_statistic: sample is not sorted".into()));
    }
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance between empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    nonempty(a, "ks_two_sample")?;
    nonempty(b, "ks_two_sample")?;
    let (a, b) = (sorted_copy(a), sorted_copy(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Approximate p-value of a one-sample KS distance (Stephens' correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

pub fn ks_two_sample_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let eff = (n as f64 * m as f64) / (n + m) as f64;
    let se = eff.sqrt();
    kolmogorov_q((se + 0.12 + 0.11 / se) * d)
}

/// Empirical 1-Wasserstein distance between equal-size samples: the mean
/// absolute difference of order statistics.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    nonempty(a, "wasserstein1")?;
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "wasserstein1: sample sizes differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(wasserstein1_sorted(&sorted_copy(a), &sorted_copy(b)))
}

fn wasserstein1_sorted(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Percentile-bootstrap half-width `(q_{97.5} − q_{2.5}) / 2` of the
/// Wasserstein-1 distance, resampling both samples independently.
pub fn bootstrap_w1_half_width<R: Rng + ?Sized>(a: &[f64], b: &[f64], reps: usize, rng: &mut R) -> Result<f64> {
    wasserstein1(a, b)?;
    let n = a.len();
    let mut stats = Vec::with_capacity(reps);
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    for _ in 0..reps {
        for k in 0..n {
            ra[k] = a[rng.random_range(0..n)];
            rb[k] = b[rng.random_range(0..n)];
        }
        ra.sort_by(f64::total_cmp);
        rb.sort_by(f64::total_cmp);
        stats.push(wasserstein1_sorted(&ra, &rb));
    }
    stats.sort_by(f64::total_cmp);
    Ok(0.5 * (quantile_sorted(&stats, 0.975) - quantile_sorted(&stats, 0.025)))
}

/// Linear-interpolation quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample mean and the half-width `1.96 · s / √n` of its normal 95% interval.
pub fn mean_with_half_width(xs: &[f64]) -> Result<(f64, f64)> {
    nonempty(xs, "mean")?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Ok((mean, 0.0));
    }
    Ok((mean, 1.96 * (sample_variance(xs, mean) / n).sqrt()))
}

/// Unbiased sample variance around a given mean.
pub fn sample_variance(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Kendall's tau-b in `O(n log n)` (Knight's algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("kendall_tau: need two equal samples of size >= 2".into()));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pairs.len();
    let n0 = (n * (n - 1) / 2) as f64;

    let tied_pairs = |eq: &dyn Fn(usize, usize) -> bool| -> f64 {
        let mut total = 0.0;
        let mut run = 1.0;
        for k in 1..n {
            if eq(k - 1, k) {
                run += 1.0;
            } else {
                total += run * (run - 1.0) / 2.0;
                run = 1.0;
            }
        }
        total + run * (run - 1.0) / 2.0
    };
    let n1 = tied_pairs(&|i, j| pairs[i].0 == pairs[j].0);
    let n3 = tied_pairs(&|i, j| pairs[i].0 == pairs[j].0 && pairs[i].1 == pairs[j].1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut ys) as f64;
    let n2 = {
        let mut total = 0.0;
        let mut run = 1.0;
        for k in 1..n {
            if ys[k - 1] == ys[k] {
                run += 1.0;
            } else {
                total += run * (run - 1.0) / 2.0;
                run = 1.0;
            }
        }
        total + run * (run - 1.0) / 2.0
    };
    let denom = ((n0 - n1) * (n0 - n2)).sqrt();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("kendall_tau: a sample is constant".into()));
    }
    Ok((n0 - n1 - n2 + n3 - 2.0 * swaps) / denom)
}

/// Sorts in place, returning the number of inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            merged.push(v[j]);
            count += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    count
}

/// Equal-width histogram on `[lo, hi)`; values outside are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for &x in xs {
            if x >= lo && x < hi {
                let k = (((x - lo) / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
        }
        Histogram { lo, hi, counts }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// `(bin_lo, bin_hi, count, density)` per bin; the density is normalised
    /// by `total`, the size of the full sample.
    pub fn rows(&self, total: usize) -> impl Iterator<Item = (f64, f64, u64, f64)> + '_ {
        let w = self.bin_width();
        self.counts.iter().enumerate().map(move |(k, &c)| {
            let a = self.lo + k as f64 * w;
            (a, a + w, c, c as f64 / (total as f64 * w))
        })
    }
}
