//! Goodness-of-fit helpers used to check sampled distributions.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sample Kolmogorov-Smirnov test; returns `(D, p_value)` using the
/// asymptotic Kolmogorov distribution.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-1f64).powi(j - 1) * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Pearson chi-square test of attempt counts (values >= 1) against the
/// geometric law with success probability `p`. Bins are merged so every
/// expected count is at least 5; the last bin is the tail.
pub fn chi_square_geometric(samples: &[u64], p: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let pmf = |k: u64| p * (1.0 - p).powi(k as i32 - 1);
    let mut edges = Vec::new();
    let mut k = 1u64;
    // Last k whose tail still carries an expected count of at least 5.
    while n * (1.0 - p).powi(k as i32) >= 5.0 && n * pmf(k) >= 5.0 {
        edges.push(k);
        k += 1;
    }
    let tail_start = k;
    let mut observed = vec![0f64; edges.len() + 1];
    for &s in samples {
        if s < tail_start {
            observed[(s - 1) as usize] += 1.0;
        } else {
            *observed.last_mut().unwrap() += 1.0;
        }
    }
    let mut expected: Vec<f64> = edges.iter().map(|&k| n * pmf(k)).collect();
    expected.push(n * (1.0 - p).powi(tail_start as i32 - 1));
    let stat: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = (observed.len() - 1).max(1) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat);
    (stat, p_value)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
