//! Small sample-summary helpers shared by the Monte Carlo estimators.

use serde::Serialize;

/// Mean, unbiased variance and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl SampleStats {
    /// Summarizes `values` in iteration order, so results are bit-stable for
    /// a fixed input order.
    pub fn from_values<I>(values: I) -> Self
    where
        I: IntoIterator<Item = f64>,
    {
        // Welford
        let mut count = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for v in values {
            count += 1;
            let delta = v - mean;
            mean += delta / count as f64;
            m2 += delta * (v - mean);
        }
        let variance = if count > 1 {
            m2 / (count - 1) as f64
        } else {
            0.0
        };
        let std_error = if count > 0 {
            (variance / count as f64).sqrt()
        } else {
            f64::NAN
        };
        if count == 0 {
            mean = f64::NAN;
        }
        SampleStats {
            count,
            mean,
            variance,
            std_error,
        }
    }

    /// Standard error of the sample variance, from the fourth central moment.
    pub fn variance_std_error(values: &[f64]) -> f64 {
        let n = values.len();
        if n < 4 {
            return f64::NAN;
        }
        let stats = Self::from_values(values.iter().copied());
        let m4 = values.iter().map(|v| (v - stats.mean).powi(4)).sum::<f64>() / n as f64;
        let s2 = stats.variance;
        let nf = n as f64;
        ((m4 - s2 * s2 * (nf - 3.0) / (nf - 1.0)) / nf)
            .max(0.0)
            .sqrt()
    }
}

/// Two-sample Kolmogorov-Smirnov distance `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
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
    d
}

/// Asymptotic two-sample KS critical value at level 1%.
pub fn ks_critical_1pct(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    1.628 * ((na + nb) / (na * nb)).sqrt()
}

/// `true` when `seq` never rises by more than `slack[i]` between neighbours.
pub fn non_increasing_within(seq: &[f64], slack: &[f64]) -> bool {
    seq.windows(2)
        .zip(slack.iter())
        .all(|(w, s)| w[1] <= w[0] + s)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let v = [1.0, 2.0, 4.0, 8.0];
        let s = SampleStats::from_values(v);
        assert!((s.mean - 3.75).abs() < 1e-15);
        let var = v.iter().map(|x| (x - 3.75f64).powi(2)).sum::<f64>() / 3.0;
        assert!((s.variance - var).abs() < 1e-12);
        assert!((s.std_error - (var / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_has_zero_error() {
        let s = SampleStats::from_values([2.5; 10]);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.std_error, 0.0);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [0.1, 0.5, 0.9];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0];
        let y = [3.0, 5.0, 7.0];
        let (m, c) = linear_fit(&x, &y);
        assert!((m - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }
}
