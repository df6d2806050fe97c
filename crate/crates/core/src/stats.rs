//! Test statistics shared by the diagnostics: chi-square goodness of fit and
//! homogeneity, Kolmogorov–Smirnov, and Poisson pmf helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// Expected count below which adjacent chi-square cells are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let k = k as f64;
    (k * mu.ln() - mu - ln_gamma(k + 1.0)).exp()
}

/// Upper tail `P[χ²_df ≥ x]`.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    let d = ChiSquared::new(df as f64).expect("positive dof");
    d.sf(x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Merge runs of adjacent cells until each pooled cell has expected count at
/// least [`MIN_EXPECTED`]; a short last run is folded into its neighbour.
fn pool(observed: &[f64], expected: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (oi, ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= MIN_EXPECTED {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
            *lo += o;
            *le += e;
        } else {
            obs.push(o);
            exp.push(e);
        }
    }
    (obs, exp)
}

/// Pearson goodness of fit of observed cell counts against expected counts
/// (same total), with small cells pooled.
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> ChiSquare {
    let (obs, exp) = pool(observed, expected);
    let statistic: f64 = obs
        .iter()
        .zip(&exp)
        .filter(|(_, e)| **e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let df = obs.len().saturating_sub(1);
    ChiSquare {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
    }
}

/// Chi-square test of homogeneity for two histograms over the same cells.
/// Cells are ordered by pooled frequency and sparse ones are merged.
pub fn chi_square_two_sample(a: &[f64], b: &[f64]) -> ChiSquare {
    let na: f64 = a.iter().sum();
    let nb: f64 = b.iter().sum();
    let n = na + nb;
    if na == 0.0 || nb == 0.0 {
        return ChiSquare {
            statistic: 0.0,
            df: 0,
            p_value: 1.0,
        };
    }
    // Pool cells whose smaller expected count falls below the threshold.
    let scale = na.min(nb) / n;
    let mut cells: Vec<(f64, f64)> = a.iter().zip(b).map(|(x, y)| (*x, *y)).collect();
    cells.sort_by(|p, q| (q.0 + q.1).total_cmp(&(p.0 + p.1)));
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for (x, y) in cells {
        ca += x;
        cb += y;
        if (ca + cb) * scale >= MIN_EXPECTED {
            pooled.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += ca;
            last.1 += cb;
        } else {
            pooled.push((ca, cb));
        }
    }
    let mut statistic = 0.0;
    for (x, y) in &pooled {
        let tot = x + y;
        let ea = tot * na / n;
        let eb = tot * nb / n;
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = pooled.len().saturating_sub(1);
    ChiSquare {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
    }
}

/// One-sample Kolmogorov–Smirnov test; returns `(D, p)` with the asymptotic
/// Kolmogorov distribution (Stephens' small-sample correction).
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = sample.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let sn = nf.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

/// `P[K > x]` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// Sample Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_sums_to_one() {
        let s: f64 = (0..60).map(|k| poisson_pmf(k, 5.0)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((poisson_pmf(2, 1.0) - (-1f64).exp() / 2.0).abs() < 1e-15);
        assert_eq!(poisson_pmf(0, 0.0), 1.0);
    }

    #[test]
    fn chi_square_reference_value() {
        // Observed [1,2,3,4] against [2,3,4,1] without pooling: statistic 10.0833…
        let r = chi_square_gof(&[10.0, 20.0, 30.0, 40.0], &[20.0, 30.0, 40.0, 10.0]);
        assert!((r.statistic - 100.833_333_333_333_33).abs() < 1e-9);
        assert_eq!(r.df, 3);
        assert!(r.p_value < 1e-10);
        let same = chi_square_gof(&[10.0, 20.0], &[10.0, 20.0]);
        assert_eq!(same.statistic, 0.0);
        assert!((same.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sf_matches_known_quantile() {
        // 0.95 quantile of χ²₁ is 3.841458820694124
        assert!((chi_square_sf(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn two_sample_identical_histograms() {
        let r = chi_square_two_sample(&[100.0, 50.0, 25.0], &[100.0, 50.0, 25.0]);
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_two_sample(&[100.0, 0.0], &[0.0, 100.0]);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn kolmogorov_tail() {
        // P[K > 1.3581] ≈ 0.05
        assert!((kolmogorov_sf(1.358_1) - 0.05).abs() < 1e-3);
        let (d, p) = ks_test(&[0.1, 0.2, 0.3], |x| x);
        assert!((d - 0.7).abs() < 1e-12);
        assert!(p < 0.1);
    }
}
