//! Sample statistics shared by the experiment modules: Monte Carlo means with
//! standard errors, two-sample distances between empirical laws, and the
//! log-log slope used for rate checks.

use serde::{Deserialize, Serialize};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = exact_mean(xs);
        if n == 1 {
            return Self { mean, se: 0.0, n };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.se * (self.n as f64).sqrt()
    }
}

/// Mean computed relative to the first element, so a constant sample
/// returns that constant bit-exactly.
pub fn exact_mean(xs: &[f64]) -> f64 {
    match xs.first() {
        None => f64::NAN,
        Some(&x0) => x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64,
    }
}

pub fn sample_std(xs: &[f64]) -> f64 {
    Estimate::from_samples(xs).std_dev()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Two-sample Kolmogorov–Smirnov statistic sup |F_n − G_m|.
pub fn ks_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.is_empty() || ys.is_empty() {
        return f64::NAN;
    }
    let a = sorted(xs);
    let b = sorted(ys);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Scale of the KS statistic under the null hypothesis, sqrt((n+m)/(nm)).
pub fn ks_noise_floor(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ((n + m) / (n * m)).sqrt()
}

/// 1-Wasserstein distance between two empirical laws, ∫ |F_n − G_m| dx.
pub fn wasserstein1(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.is_empty() || ys.is_empty() {
        return f64::NAN;
    }
    let a = sorted(xs);
    let b = sorted(ys);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / n - j as f64 / m).abs() * (next - prev);
        while i < a.len() && a[i] <= next {
            i += 1;
        }
        while j < b.len() && b[j] <= next {
            j += 1;
        }
        prev = next;
    }
    total
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_slope(&lx, &ly)
}

pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Total-variation distance between the histograms of two samples on a
/// common set of `bins` equal-width bins over [lo, hi].
pub fn histogram_tv(xs: &[f64], ys: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let hist = |v: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in v {
            let b = (((x - lo) / (hi - lo)) * bins as f64).floor();
            let b = (b.max(0.0) as usize).min(bins - 1);
            h[b] += 1.0 / v.len() as f64;
        }
        h
    };
    let (hx, hy) = (hist(xs), hist(ys));
    0.5 * hx.iter().zip(&hy).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&a, &[10.0, 11.0]), 1.0);
    }

    #[test]
    fn ks_brute_force() {
        let a = [0.3, 1.2, -0.5, 2.2, 0.9];
        let b = [0.1, 1.0, 1.1, 3.0];
        let mut grid: Vec<f64> = a.iter().chain(&b).copied().collect();
        grid.sort_by(|x, y| x.total_cmp(y));
        let cdf = |v: &[f64], t: f64| v.iter().filter(|&&x| x <= t).count() as f64 / v.len() as f64;
        let brute = grid
            .iter()
            .map(|&t| (cdf(&a, t) - cdf(&b, t)).abs())
            .fold(0.0, f64::max);
        assert!((ks_statistic(&a, &b) - brute).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_shift_and_equal_sizes() {
        let a = [0.0_f64, 1.0, 2.0, 5.0];
        let b: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        assert!((wasserstein1(&a, &b) - 0.7).abs() < 1e-12);
        let c = [3.0_f64, -1.0, 4.0, 0.5];
        let mut sa = a.to_vec();
        let mut sc = c.to_vec();
        sa.sort_by(|x, y| x.total_cmp(y));
        sc.sort_by(|x, y| x.total_cmp(y));
        let direct = sa.iter().zip(&sc).map(|(x, y)| (x - y).abs()).sum::<f64>() / 4.0;
        assert!((wasserstein1(&a, &c) - direct).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.2, 0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e.powf(1.3)).collect();
        assert!((loglog_slope(&x, &y) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_mean_is_exact() {
        let v = vec![0.1; 7];
        assert_eq!(exact_mean(&v), 0.1);
        assert_eq!(Estimate::from_samples(&v).se, 0.0);
    }
}
