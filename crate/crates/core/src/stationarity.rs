//! Stationarity tests: augmented Dickey-Fuller for unit roots and KPSS for
//! trend-stationarity.
//!
//! Flag conventions: `adf_flag = 1` means the unit-root null is rejected;
//! `kpss_flag = 1` means the stationarity null is rejected. A clean
//! stationary series therefore reads (1, 0) and a random walk (0, 1).

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StationarityError {
    #[error("series too short: need {need}, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("regression matrix is singular (constant input?)")]
    SingularRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityResult {
    pub adf_stat: f64,
    pub adf_flag: u8,
    pub kpss_stat: f64,
    pub kpss_flag: u8,
    pub adf_lags: usize,
    pub kpss_bandwidth: usize,
    pub alpha: f64,
}

/// MacKinnon (2010) response-surface critical values for the constant-only
/// Dickey-Fuller regression, by significance level. cv = b0 + b1/T + b2/T^2
/// + b3/T^3 with T the regression sample size.
fn adf_critical_value(alpha: f64, t: usize) -> f64 {
    let coeffs: [(f64, [f64; 4]); 3] = [
        (0.01, [-3.43035, -6.5393, -16.786, -79.433]),
        (0.05, [-2.86154, -2.8903, -4.234, -40.040]),
        (0.10, [-2.56677, -1.5384, -2.809, 0.0]),
    ];
    let tf = t as f64;
    let eval = |b: &[f64; 4]| b[0] + b[1] / tf + b[2] / (tf * tf) + b[3] / (tf * tf * tf);
    // nearest table level at or below alpha; exact match for the usual levels
    let mut best = coeffs[1];
    let mut best_gap = f64::INFINITY;
    for c in coeffs {
        let gap = (c.0 - alpha).abs();
        if gap < best_gap {
            best_gap = gap;
            best = c;
        }
    }
    eval(&best.1)
}

/// KPSS critical values for the trend-stationary null (eta_tau table).
fn kpss_critical_value(alpha: f64) -> f64 {
    let table = [(0.10, 0.119), (0.05, 0.146), (0.025, 0.176), (0.01, 0.216)];
    let mut best = table[1];
    let mut best_gap = f64::INFINITY;
    for c in table {
        let gap = (c.0 - alpha).abs();
        if gap < best_gap {
            best_gap = gap;
            best = c;
        }
    }
    best.1
}

/// Schwert lag rule floor(12 (n/100)^(1/4)).
pub fn schwert_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Bartlett-kernel bandwidth floor(4 (n/100)^(1/4)).
pub fn bartlett_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Cholesky solve of the symmetric positive-definite system a x = b.
/// `a` is row-major k x k; consumed in place.
fn cholesky_solve(mut a: Vec<f64>, k: usize, b: &[f64]) -> Option<Vec<f64>> {
    // factor: a = L L^T stored in the lower triangle
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= a[j * k + p] * a[j * k + p];
        }
        if d <= 1e-12 * (1.0 + a[j * k + j].abs()) {
            return None;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut v = a[i * k + j];
            for p in 0..j {
                v -= a[i * k + p] * a[j * k + p];
            }
            a[i * k + j] = v / d;
        }
    }
    // forward then back substitution
    let mut x = b.to_vec();
    for i in 0..k {
        for p in 0..i {
            x[i] -= a[i * k + p] * x[p];
        }
        x[i] /= a[i * k + i];
    }
    for i in (0..k).rev() {
        for p in i + 1..k {
            x[i] -= a[p * k + i] * x[p];
        }
        x[i] /= a[i * k + i];
    }
    Some(x)
}

/// ADF regression with constant: dy_t on [1, y_{t-1}, dy_{t-1} .. dy_{t-p}],
/// reporting the t statistic of the level coefficient. Lag order defaults to
/// the Schwert rule.
pub fn adf_test(
    series: &[f64],
    alpha: f64,
    lags: Option<usize>,
) -> Result<(f64, u8, usize), StationarityError> {
    let n = series.len();
    if n < 50 {
        return Err(StationarityError::TooShort { need: 50, got: n });
    }
    let p = lags.unwrap_or_else(|| schwert_lags(n)).min(n / 3);
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let k = p + 2; // constant, level, p lagged diffs
    let nobs = dy.len() - p;
    if nobs <= k {
        return Err(StationarityError::TooShort {
            need: k + p + 2,
            got: n,
        });
    }

    let mut xtx = vec![0.0f64; k * k];
    let mut xty = vec![0.0f64; k];
    let mut yty = 0.0f64;
    let mut row = vec![0.0f64; k];
    for t in p..dy.len() {
        row[0] = 1.0;
        row[1] = series[t];
        for i in 0..p {
            row[2 + i] = dy[t - 1 - i];
        }
        let y = dy[t];
        for i in 0..k {
            for j in i..k {
                xtx[i * k + j] += row[i] * row[j];
            }
            xty[i] += row[i] * y;
        }
        yty += y * y;
    }
    for i in 0..k {
        for j in 0..i {
            xtx[i * k + j] = xtx[j * k + i];
        }
    }

    let beta =
        cholesky_solve(xtx.clone(), k, &xty).ok_or(StationarityError::SingularRegression)?;
    let mut rss = yty;
    for i in 0..k {
        rss -= beta[i] * xty[i];
    }
    let rss = rss.max(0.0);
    let s2 = rss / (nobs - k) as f64;
    // (X'X)^-1 element for the level coefficient
    let mut e1 = vec![0.0; k];
    e1[1] = 1.0;
    let inv_col = cholesky_solve(xtx, k, &e1).ok_or(StationarityError::SingularRegression)?;
    let se = (s2 * inv_col[1]).sqrt();
    if !se.is_finite() || se <= 0.0 {
        return Err(StationarityError::SingularRegression);
    }
    let stat = beta[1] / se;
    let flag = (stat < adf_critical_value(alpha, nobs)) as u8;
    Ok((stat, flag, p))
}

/// KPSS statistic against the trend-stationary null: partial sums of the
/// residuals from a linear-trend fit, scaled by the Bartlett long-run
/// variance. Bandwidth defaults to floor(4 (n/100)^(1/4)).
pub fn kpss_test(
    series: &[f64],
    alpha: f64,
    bandwidth: Option<usize>,
) -> Result<(f64, u8, usize), StationarityError> {
    let n = series.len();
    if n < 50 {
        return Err(StationarityError::TooShort { need: 50, got: n });
    }
    let nf = n as f64;
    // OLS on [1, t] in closed form
    let sum_t = nf * (nf + 1.0) / 2.0;
    let sum_tt = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0;
    let sum_y: f64 = series.iter().sum();
    let sum_ty: f64 = series
        .iter()
        .enumerate()
        .map(|(i, &y)| (i as f64 + 1.0) * y)
        .sum();
    let det = nf * sum_tt - sum_t * sum_t;
    let slope = (nf * sum_ty - sum_t * sum_y) / det;
    let intercept = (sum_y - slope * sum_t) / nf;
    let resid: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(i, &y)| y - intercept - slope * (i as f64 + 1.0))
        .collect();

    let l = bandwidth.unwrap_or_else(|| bartlett_bandwidth(n)).min(n - 1);
    let gamma = |k: usize| -> f64 {
        resid[k..]
            .iter()
            .zip(&resid[..n - k])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
    };
    let mut s2 = gamma(0);
    for k in 1..=l {
        s2 += 2.0 * (1.0 - k as f64 / (l as f64 + 1.0)) * gamma(k);
    }
    if s2 <= 0.0 {
        return Err(StationarityError::SingularRegression);
    }
    let mut cum = 0.0;
    let mut sum_s2 = 0.0;
    for &e in &resid {
        cum += e;
        sum_s2 += cum * cum;
    }
    let stat = sum_s2 / (nf * nf * s2);
    let flag = (stat > kpss_critical_value(alpha)) as u8;
    Ok((stat, flag, l))
}

/// Both tests on the ±1 mapping of a bit series, at level 0.05 with the
/// default lag and bandwidth rules.
pub fn stationarity_of_bits(
    bits: &crate::bits::Bits,
    alpha: f64,
) -> Result<StationarityResult, StationarityError> {
    let series: Vec<f64> = bits.iter().map(|b| if b { 1.0 } else { -1.0 }).collect();
    stationarity_of(&series, alpha)
}

pub fn stationarity_of(
    series: &[f64],
    alpha: f64,
) -> Result<StationarityResult, StationarityError> {
    let (adf_stat, adf_flag, adf_lags) = adf_test(series, alpha, None)?;
    let (kpss_stat, kpss_flag, kpss_bandwidth) = kpss_test(series, alpha, None)?;
    Ok(StationarityResult {
        adf_stat,
        adf_flag,
        kpss_stat,
        kpss_flag,
        adf_lags,
        kpss_bandwidth,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic uniform(-1/2, 1/2) generator shared with the frozen
    /// reference values.
    fn lcg_series(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 33) as f64 / 2f64.powi(31) - 0.5
            })
            .collect()
    }

    #[test]
    fn lcg_matches_reference_values() {
        let x = lcg_series(5, 1);
        let expect = [-0.07679083, 0.00940744, 0.14835939, -0.11713661, 0.29544775];
        for (a, b) in x.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn adf_matches_frozen_reference() {
        // statsmodels adfuller(x, maxlag=5, regression='c', autolag=None)
        let x = lcg_series(200, 1);
        let (stat, flag, lags) = adf_test(&x, 0.05, Some(5)).unwrap();
        assert_eq!(lags, 5);
        assert!((stat - -4.9562522367).abs() < 1e-6, "stat = {stat}");
        assert_eq!(flag, 1);
    }

    #[test]
    fn kpss_matches_frozen_reference() {
        // statsmodels kpss(x, regression='ct', nlags=5)
        let x = lcg_series(200, 1);
        let (stat, flag, _) = kpss_test(&x, 0.05, Some(5)).unwrap();
        assert!((stat - 0.0560339783).abs() < 1e-8, "stat = {stat}");
        assert_eq!(flag, 0);
    }

    #[test]
    fn random_walk_matches_frozen_reference() {
        let steps = lcg_series(200, 2);
        let mut cum = 0.0;
        let walk: Vec<f64> = steps
            .iter()
            .map(|&s| {
                cum += s;
                cum
            })
            .collect();
        let (adf, adf_flag, _) = adf_test(&walk, 0.05, Some(5)).unwrap();
        assert!((adf - -1.0358020225).abs() < 1e-6, "adf = {adf}");
        assert_eq!(adf_flag, 0);
        let (kpss, kpss_flag, _) = kpss_test(&walk, 0.05, Some(5)).unwrap();
        assert!((kpss - 0.7789118982).abs() < 1e-8, "kpss = {kpss}");
        assert_eq!(kpss_flag, 1);
    }

    #[test]
    fn constant_series_is_singular() {
        let x = vec![1.0; 500];
        assert_eq!(
            adf_test(&x, 0.05, None).unwrap_err(),
            StationarityError::SingularRegression
        );
        assert_eq!(
            kpss_test(&x, 0.05, None).unwrap_err(),
            StationarityError::SingularRegression
        );
    }

    #[test]
    fn too_short_rejected() {
        let x = vec![0.0; 20];
        assert!(matches!(
            adf_test(&x, 0.05, None),
            Err(StationarityError::TooShort { .. })
        ));
    }

    #[test]
    fn iid_bits_read_stationary() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(6);
        let mut good = 0;
        for _ in 0..20 {
            let bits: crate::bits::Bits = (0..5_000).map(|_| rng.gen::<bool>()).collect();
            let r = stationarity_of_bits(&bits, 0.05).unwrap();
            if r.adf_flag == 1 && r.kpss_flag == 0 {
                good += 1;
            }
        }
        assert!(good >= 18, "stationary verdict in {good}/20");
    }

    #[test]
    fn linear_trend_with_noise_is_trend_stationary() {
        let noise = lcg_series(2_000, 9);
        let x: Vec<f64> = noise
            .iter()
            .enumerate()
            .map(|(i, &e)| 0.01 * i as f64 + e)
            .collect();
        let (_, kpss_flag, _) = kpss_test(&x, 0.05, None).unwrap();
        assert_eq!(kpss_flag, 0, "trend-stationary null should hold");
    }

    #[test]
    fn schwert_rule_values() {
        assert_eq!(schwert_lags(100), 12);
        assert_eq!(schwert_lags(10_000), 37);
        assert_eq!(bartlett_bandwidth(10_000), 12);
    }
}
