//! Delay-coordinate reconstruction: mutual-information delay selection,
//! false-nearest-neighbors embedding dimension, the largest Lyapunov exponent
//! by nearest-neighbor divergence, and the per-outcome attractor attack that
//! tries to guess coincidence outcomes from publicly announced times.
//!
//! A definite embedding dimension marks a series as driven by few degrees of
//! freedom, hence not random, however many statistical tests it passes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::least_squares;

/// Distance-ratio tolerance of the false-neighbor criterion.
const FNN_RTOL: f64 = 15.0;
/// Loneliness criterion: neighbors farther than this many standard
/// deviations apart in the extended space are false.
const FNN_ATOL: f64 = 2.0;
/// Acceptance threshold on the false-neighbor fraction.
const FNN_ACCEPT: f64 = 0.01;
/// Cap on query points for neighbor searches; inputs above it are strided.
const MAX_QUERIES: usize = 2000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NonlinearError {
    #[error("series too short: need {need}, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("series is degenerate (no variation)")]
    Degenerate,
    #[error("divergence curve has no usable linear region")]
    NoLinearRegion,
    #[error("no outcome sub-series admits an embedding; no prediction possible")]
    NoPrediction,
    #[error("insufficient history for outcome {0}")]
    InsufficientHistory(usize),
}

// ---------------------------------------------------------------------------
// delay selection
// ---------------------------------------------------------------------------

/// Average mutual information over a 16-bin marginal partition, lags 1..max.
pub fn average_mutual_information(
    series: &[f64],
    max_lag: usize,
) -> Result<Vec<f64>, NonlinearError> {
    const BINS: usize = 16;
    let n = series.len();
    let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(NonlinearError::Degenerate);
    }
    let idx: Vec<usize> = series
        .iter()
        .map(|&x| (((x - lo) / (hi - lo) * BINS as f64) as usize).min(BINS - 1))
        .collect();
    let mut out = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        let m = n - lag;
        let mut joint = [[0u32; BINS]; BINS];
        for t in 0..m {
            joint[idx[t]][idx[t + lag]] += 1;
        }
        let mut pi = [0f64; BINS];
        let mut pj = [0f64; BINS];
        for i in 0..BINS {
            for j in 0..BINS {
                let p = joint[i][j] as f64 / m as f64;
                pi[i] += p;
                pj[j] += p;
            }
        }
        let mut mi = 0.0;
        for i in 0..BINS {
            for j in 0..BINS {
                let p = joint[i][j] as f64 / m as f64;
                if p > 0.0 {
                    mi += p * (p / (pi[i] * pj[j])).ln();
                }
            }
        }
        out.push(mi);
    }
    Ok(out)
}

/// Reconstruction delay: first local minimum of the average mutual
/// information, falling back to the first 1/e autocorrelation crossing,
/// falling back to 1 (the right answer for memoryless data).
pub fn ami_delay(series: &[f64], max_lag: usize) -> Result<usize, NonlinearError> {
    let n = series.len();
    if n < 10 * max_lag.max(1) {
        return Err(NonlinearError::TooShort {
            need: 10 * max_lag.max(1),
            got: n,
        });
    }
    let ami = average_mutual_information(series, max_lag)?;
    // the plug-in MI estimator has a chi-square bias floor of about
    // (bins-1)^2 / 2m under independence; a curve that never clears a few
    // times that floor is flat noise and its dips are spurious
    let floor = 15.0 * 15.0 / (2.0 * (n - 1) as f64);
    let flat = ami.iter().cloned().fold(f64::NEG_INFINITY, f64::max) < 3.0 * floor;
    if !flat {
        for i in 1..ami.len().saturating_sub(1) {
            if ami[i] < ami[i - 1] && ami[i] <= ami[i + 1] {
                return Ok(i + 1); // lags are 1-based
            }
        }
    }
    // autocorrelation fallback
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return Err(NonlinearError::Degenerate);
    }
    for lag in 1..=max_lag {
        let cov: f64 = series[lag..]
            .iter()
            .zip(&series[..n - lag])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / (n - lag) as f64;
        if cov / var < (-1.0f64).exp() {
            return Ok(lag);
        }
    }
    Ok(1)
}

// ---------------------------------------------------------------------------
// false nearest neighbors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    pub tau: usize,
    /// (dimension, false-neighbor fraction) for each evaluated dimension.
    pub fnn_fractions: Vec<(usize, f64)>,
    /// Smallest dimension whose false-neighbor fraction drops below 1% and
    /// stays below for all larger evaluated dimensions; None for random-like
    /// data whose fraction never settles.
    pub d_e: Option<usize>,
    pub saturated: bool,
}

fn stride_queries(n: usize) -> impl Iterator<Item = usize> {
    let step = n.div_ceil(MAX_QUERIES).max(1);
    (0..n).step_by(step)
}

/// Kennel-style false-nearest-neighbors sweep over d = 1..=d_max at delay
/// `tau`, with a Theiler window of tau*d excluding temporal neighbors.
pub fn false_nearest_neighbors(
    series: &[f64],
    tau: usize,
    d_max: usize,
) -> Result<EmbeddingResult, NonlinearError> {
    let n = series.len();
    if n < 1000 {
        return Err(NonlinearError::TooShort { need: 1000, got: n });
    }
    let tau = tau.max(1);
    let mean = series.iter().sum::<f64>() / n as f64;
    let sd = (series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
    if sd <= 0.0 {
        return Err(NonlinearError::Degenerate);
    }

    let mut fnn_fractions = Vec::new();
    for d in 1..=d_max {
        // points with both a d-dimensional vector and the (d+1)-th coordinate
        let usable = n.saturating_sub(d * tau);
        if usable < 100 {
            break;
        }
        let theiler = tau * d;
        let dist2 = |i: usize, j: usize| -> f64 {
            let mut s = 0.0;
            for c in 0..d {
                let diff = series[i + c * tau] - series[j + c * tau];
                s += diff * diff;
            }
            s
        };
        let counts: Vec<(usize, usize)> = stride_queries(usable)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&i| {
                let mut best = f64::INFINITY;
                let mut best_j = usize::MAX;
                for j in 0..usable {
                    if j.abs_diff(i) <= theiler {
                        continue;
                    }
                    let d2 = dist2(i, j);
                    if d2 < best {
                        best = d2;
                        best_j = j;
                    }
                }
                if best_j == usize::MAX {
                    return (0, 0);
                }
                let extra = (series[i + d * tau] - series[best_j + d * tau]).abs();
                let rd = best.sqrt();
                let is_false = if rd > 0.0 {
                    extra / rd > FNN_RTOL || (rd * rd + extra * extra).sqrt() / sd > FNN_ATOL
                } else {
                    extra > 0.0
                };
                (is_false as usize, 1)
            })
            .collect();
        let false_count: usize = counts.iter().map(|c| c.0).sum();
        let total: usize = counts.iter().map(|c| c.1).sum();
        if total == 0 {
            break;
        }
        fnn_fractions.push((d, false_count as f64 / total as f64));
    }
    if fnn_fractions.is_empty() {
        return Err(NonlinearError::TooShort { need: 1000, got: n });
    }
    let d_e = fnn_fractions
        .iter()
        .position(|&(_, f)| f < FNN_ACCEPT)
        .filter(|&pos| fnn_fractions[pos..].iter().all(|&(_, f)| f < FNN_ACCEPT))
        .map(|pos| fnn_fractions[pos].0);
    Ok(EmbeddingResult {
        tau,
        fnn_fractions,
        d_e,
        saturated: d_e.is_some(),
    })
}

// ---------------------------------------------------------------------------
// largest Lyapunov exponent
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Per-element exponent: slope of the mean log-divergence curve.
    pub lambda: f64,
    /// Index range of the curve the slope was fitted on.
    pub fit_range: (usize, usize),
    pub fit_r2: f64,
    /// ceil(1/lambda) elements, defined for positive lambda.
    pub horizon: Option<u64>,
    /// Mean log nearest-neighbor separation at step k.
    pub divergence: Vec<f64>,
}

/// Rosenstein-style estimate: pair each point with its nearest neighbor
/// outside a Theiler window, track mean log separation over k steps, fit the
/// initial linear rise.
pub fn largest_lyapunov(
    series: &[f64],
    tau: usize,
    d: usize,
) -> Result<LyapunovResult, NonlinearError> {
    let n = series.len();
    if n < 1000 {
        return Err(NonlinearError::TooShort { need: 1000, got: n });
    }
    let tau = tau.max(1);
    let d = d.max(1);
    let nv = n.saturating_sub((d - 1) * tau);
    let k_max = 50.min(nv / 5);
    if nv <= k_max + 2 || k_max < 8 {
        return Err(NonlinearError::TooShort { need: 1000, got: n });
    }
    let usable = nv - k_max;
    let theiler = (tau * d).max(1);
    let mean = series.iter().sum::<f64>() / n as f64;
    let sd = (series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
    if sd <= 0.0 {
        return Err(NonlinearError::Degenerate);
    }
    // identical points (exactly periodic data) read as zero separation at
    // every step; flooring keeps their logs finite and the curve flat
    let floor2 = (sd * 1e-9) * (sd * 1e-9);
    let dist2 = |i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..d {
            let diff = series[i + c * tau] - series[j + c * tau];
            s += diff * diff;
        }
        s
    };
    let pairs: Vec<(usize, usize)> = stride_queries(usable)
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|&i| {
            let mut best = f64::INFINITY;
            let mut best_j = usize::MAX;
            for j in 0..usable {
                if j.abs_diff(i) <= theiler {
                    continue;
                }
                let d2 = dist2(i, j);
                if d2 < best {
                    best = d2;
                    best_j = j;
                }
            }
            (best_j != usize::MAX).then_some((i, best_j))
        })
        .collect();
    if pairs.is_empty() {
        return Err(NonlinearError::NoLinearRegion);
    }

    let divergence: Vec<f64> = (0..k_max)
        .map(|k| {
            let mut sum = 0.0;
            for &(i, j) in &pairs {
                sum += 0.5 * dist2(i + k, j + k).max(floor2).ln();
            }
            sum / pairs.len() as f64
        })
        .collect();

    let y_min = divergence.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = divergence.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = y_max - y_min;
    let end = if range < 0.5 {
        // no separation growth at all (periodic data): slope over the whole
        // flat curve, which is ~0
        divergence.len()
    } else {
        // initial rise before saturation: points below 80% of the span
        let cutoff = y_min + 0.8 * range;
        let rise = divergence
            .iter()
            .position(|&v| v > cutoff)
            .unwrap_or(divergence.len());
        if rise < 6 {
            // separation saturates immediately: no rate is defined
            // (uncorrelated data, or chaos run backwards)
            return Err(NonlinearError::NoLinearRegion);
        }
        rise
    };
    let points: Vec<(f64, f64)> = divergence[..end]
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64, v))
        .collect();
    let (lambda, _, fit_r2) = least_squares(&points);
    let horizon = (lambda > 0.0).then(|| (1.0 / lambda).ceil() as u64);
    Ok(LyapunovResult {
        lambda,
        fit_range: (0, end - 1),
        fit_r2,
        horizon,
        divergence,
    })
}

/// Horizon-of-predictability arithmetic, exposed for reporting on exponents
/// obtained elsewhere.
pub fn horizon_from_lambda(lambda: f64) -> Option<u64> {
    (lambda > 0.0).then(|| (1.0 / lambda).ceil() as u64)
}

// ---------------------------------------------------------------------------
// per-outcome attractor prediction attack
// ---------------------------------------------------------------------------

/// Nearest-neighbor forecaster over one outcome's inter-coincidence times.
struct OutcomeModel {
    history: Vec<f64>,
    tau: usize,
    dim: usize,
    last_time: u64,
}

impl OutcomeModel {
    /// Predicts the next time difference: find the stored delay vector
    /// nearest to the current one and emit its successor.
    fn forecast(&self) -> Option<f64> {
        let m = self.history.len();
        let span = (self.dim - 1) * self.tau;
        if m < span + 2 {
            return None;
        }
        let query_end = m - 1;
        let mut best = f64::INFINITY;
        let mut best_end = usize::MAX;
        for e in span..m - 1 {
            let mut d2 = 0.0;
            for c in 0..self.dim {
                let diff = self.history[e - c * self.tau] - self.history[query_end - c * self.tau];
                d2 += diff * diff;
            }
            if d2 < best {
                best = d2;
                best_end = e;
            }
        }
        (best_end != usize::MAX).then(|| self.history[best_end + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    /// Guessed outcome (0..=3) per announced time.
    pub guesses: Vec<u8>,
    /// Fraction of correct guesses when the truth was supplied.
    pub accuracy_vs_truth: Option<f64>,
    /// Which outcome sub-series admitted an embedding dimension.
    pub embeddable: [bool; 4],
    pub d_e: [Option<usize>; 4],
}

/// The key-prediction attack: reconstruct an attractor per outcome sub-series
/// (00, 01, 10, 11); at each announced coincidence time, every embeddable
/// outcome model predicts its next time value, and the closest prediction is
/// the guess. With the true outcomes supplied, models are updated with the
/// truth and the accuracy is scored; otherwise guesses feed back.
pub fn predict_outcomes(
    outcome_diffs: &[Vec<u64>; 4],
    last_seen: [u64; 4],
    announced_times: &[u64],
    truth: Option<&[u8]>,
) -> Result<PredictionReport, NonlinearError> {
    if let Some(t) = truth {
        if t.len() != announced_times.len() {
            return Err(NonlinearError::InsufficientHistory(t.len().min(3)));
        }
    }
    let mut models: [Option<OutcomeModel>; 4] = [None, None, None, None];
    let mut embeddable = [false; 4];
    let mut d_es: [Option<usize>; 4] = [None; 4];
    for (o, diffs) in outcome_diffs.iter().enumerate() {
        if diffs.len() < 1000 {
            continue; // too short for FNN: unpredictable outcome
        }
        let series: Vec<f64> = diffs.iter().map(|&d| d as f64).collect();
        let tau = ami_delay(&series, 20).unwrap_or(1);
        let Ok(embedding) = false_nearest_neighbors(&series, tau, 12) else {
            continue;
        };
        d_es[o] = embedding.d_e;
        if let Some(d_e) = embedding.d_e {
            embeddable[o] = true;
            models[o] = Some(OutcomeModel {
                history: series,
                tau,
                dim: d_e,
                last_time: last_seen[o],
            });
        }
    }
    if !embeddable.iter().any(|&e| e) {
        return Err(NonlinearError::NoPrediction);
    }

    let mut guesses = Vec::with_capacity(announced_times.len());
    let mut correct = 0usize;
    for (k, &t) in announced_times.iter().enumerate() {
        let mut best_o = None;
        let mut best_err = f64::INFINITY;
        for (o, model) in models.iter().enumerate() {
            let Some(model) = model else { continue };
            let Some(pred_diff) = model.forecast() else { continue };
            let predicted_time = model.last_time as f64 + pred_diff;
            let err = (predicted_time - t as f64).abs();
            if err < best_err {
                best_err = err;
                best_o = Some(o as u8);
            }
        }
        let guess = best_o.ok_or(NonlinearError::NoPrediction)?;
        guesses.push(guess);
        let update_o = match truth {
            Some(t_arr) => {
                if t_arr[k] == guess {
                    correct += 1;
                }
                t_arr[k]
            }
            None => guess,
        };
        if let Some(model) = models[update_o as usize].as_mut() {
            model.history.push((t - model.last_time) as f64);
            model.last_time = t;
        }
    }
    Ok(PredictionReport {
        guesses,
        accuracy_vs_truth: truth.map(|_| correct as f64 / announced_times.len() as f64),
        embeddable,
        d_e: d_es,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    pub fn henon_x(n: usize) -> Vec<f64> {
        let (mut x, mut y) = (0.1, 0.1);
        let mut out = Vec::with_capacity(n);
        for i in 0..n + 1000 {
            let nx = 1.0 - 1.4 * x * x + y;
            y = 0.3 * x;
            x = nx;
            if i >= 1000 {
                out.push(x);
            }
        }
        out
    }

    pub fn logistic(n: usize) -> Vec<f64> {
        let mut x = 0.3;
        let mut out = Vec::with_capacity(n);
        for i in 0..n + 100 {
            x = 4.0 * x * (1.0 - x);
            if i >= 100 {
                out.push(x);
            }
        }
        out
    }

    pub fn lorenz_x(n: usize, every: usize) -> Vec<f64> {
        let dt = 0.01;
        let mut st = [1.0f64, 1.0, 20.0];
        let f = |s: [f64; 3]| -> [f64; 3] {
            [
                10.0 * (s[1] - s[0]),
                s[0] * (28.0 - s[2]) - s[1],
                s[0] * s[1] - 8.0 / 3.0 * s[2],
            ]
        };
        let step = |s: [f64; 3]| -> [f64; 3] {
            let k1 = f(s);
            let k2 = f([s[0] + dt / 2.0 * k1[0], s[1] + dt / 2.0 * k1[1], s[2] + dt / 2.0 * k1[2]]);
            let k3 = f([s[0] + dt / 2.0 * k2[0], s[1] + dt / 2.0 * k2[1], s[2] + dt / 2.0 * k2[2]]);
            let k4 = f([s[0] + dt * k3[0], s[1] + dt * k3[1], s[2] + dt * k3[2]]);
            [
                s[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                s[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                s[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
            ]
        };
        let mut out = Vec::with_capacity(n);
        for i in 0..1000 + n * every {
            st = step(st);
            if i >= 1000 && (i - 1000) % every == 0 {
                out.push(st[0]);
            }
        }
        out
    }

    #[test]
    fn ami_of_sine_finds_quarter_period() {
        // measurement noise breaks the 20-point phase degeneracy of the
        // integer-sampled sine; a noiseless deterministic curve keeps the
        // binned MI high at every lag
        let mut rng = StdRng::seed_from_u64(20);
        let x: Vec<f64> = (0..4000)
            .map(|t| {
                (2.0 * std::f64::consts::PI * t as f64 / 20.0).sin()
                    + 0.25 * (rng.gen::<f64>() + rng.gen::<f64>() + rng.gen::<f64>() - 1.5)
            })
            .collect();
        let tau = ami_delay(&x, 30).unwrap();
        assert!((4..=6).contains(&tau), "tau = {tau}");
    }

    #[test]
    fn ami_of_noise_falls_back_to_one() {
        let mut rng = StdRng::seed_from_u64(1);
        let x: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        assert_eq!(ami_delay(&x, 20).unwrap(), 1);
    }

    #[test]
    fn ami_of_constant_is_degenerate() {
        let x = vec![1.0; 4000];
        assert_eq!(ami_delay(&x, 20).unwrap_err(), NonlinearError::Degenerate);
    }

    #[test]
    fn henon_embeds_at_two() {
        let x = henon_x(10_000);
        let r = false_nearest_neighbors(&x, 1, 6).unwrap();
        assert_eq!(r.d_e, Some(2), "fractions: {:?}", r.fnn_fractions);
        assert!(r.saturated);
        // fraction at d_e-1 at least the threshold, below at d_e
        assert!(r.fnn_fractions[0].1 >= FNN_ACCEPT);
        assert!(r.fnn_fractions[1].1 < FNN_ACCEPT);
    }

    #[test]
    fn lorenz_embeds_at_three() {
        let x = lorenz_x(10_000, 5);
        let tau = ami_delay(&x, 40).unwrap();
        assert!((2..=8).contains(&tau), "tau = {tau}");
        let r = false_nearest_neighbors(&x, tau, 6).unwrap();
        assert_eq!(r.d_e, Some(3), "tau {tau}, fractions: {:?}", r.fnn_fractions);
    }

    #[test]
    fn noise_never_saturates() {
        let mut rng = StdRng::seed_from_u64(2);
        let x: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let r = false_nearest_neighbors(&x, 1, 8).unwrap();
        assert_eq!(r.d_e, None, "fractions: {:?}", r.fnn_fractions);
        assert!(!r.saturated);
    }

    #[test]
    fn logistic_lyapunov_is_ln_two() {
        let x = logistic(10_000);
        let r = largest_lyapunov(&x, 1, 1).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!(
            (r.lambda - ln2).abs() < 0.1 * ln2,
            "lambda = {} (fit {:?}, r2 {})",
            r.lambda,
            r.fit_range,
            r.fit_r2
        );
        assert_eq!(r.horizon, Some(2));
        assert!(r.fit_r2 > 0.95);
    }

    #[test]
    fn horizon_arithmetic_matches_reported_range() {
        assert_eq!(horizon_from_lambda(0.13), Some(8));
        assert_eq!(horizon_from_lambda(-0.2), None);
        assert_eq!(horizon_from_lambda(0.0), None);
    }

    #[test]
    fn periodic_series_has_no_positive_exponent() {
        let x: Vec<f64> = (0..5000)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 25.0).sin())
            .collect();
        let r = largest_lyapunov(&x, 6, 2).unwrap();
        assert!(r.lambda < 0.02, "lambda = {}", r.lambda);
        if r.lambda <= 0.0 {
            assert_eq!(r.horizon, None);
        }
    }

    #[test]
    fn reversed_logistic_not_reported_as_valid_positive_exponent() {
        let mut x = logistic(10_000);
        x.reverse();
        match largest_lyapunov(&x, 1, 1) {
            Err(NonlinearError::NoLinearRegion) => {}
            Ok(r) => assert!(
                r.lambda < 0.5 * std::f64::consts::LN_2 || r.fit_r2 < 0.9,
                "reversed chaos must not look like clean divergence: {r:?}"
            ),
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    /// Deterministic outcome-dependent gap process: outcomes cycle 0,1,2,3
    /// over a global gap pattern of period 12, so each outcome's own
    /// inter-occurrence diffs cycle with period 3 and its next time is
    /// exactly predictable from a reconstructed attractor.
    fn periodic_gap_process(n: usize) -> (Vec<u64>, Vec<u8>) {
        let gaps: [u64; 12] = [7, 11, 13, 8, 9, 14, 10, 12, 6, 15, 5, 16];
        let mut t = 0u64;
        let mut times = Vec::with_capacity(n);
        let mut outcomes = Vec::with_capacity(n);
        for k in 0..n {
            t += gaps[k % 12] * 1_000;
            times.push(t);
            outcomes.push((k % 4) as u8);
        }
        (times, outcomes)
    }

    fn split_by_outcome(times: &[u64], outcomes: &[u8]) -> ([Vec<u64>; 4], [u64; 4]) {
        let mut diffs: [Vec<u64>; 4] = Default::default();
        let mut last = [0u64; 4];
        for (&t, &o) in times.iter().zip(outcomes) {
            diffs[o as usize].push(t - last[o as usize]);
            last[o as usize] = t;
        }
        (diffs, last)
    }

    #[test]
    fn attack_beats_chance_on_deterministic_gaps() {
        let (times, outcomes) = periodic_gap_process(7_000);
        let split = 6_000;
        let (diffs, last) = split_by_outcome(&times[..split], &outcomes[..split]);
        let report = predict_outcomes(&diffs, last, &times[split..], Some(&outcomes[split..]))
            .unwrap();
        let acc = report.accuracy_vs_truth.unwrap();
        assert!(acc > 0.6, "accuracy {acc} should beat 4-way chance");
        assert!(report.embeddable.iter().all(|&e| e));
    }

    #[test]
    fn attack_is_chance_level_on_random_gaps() {
        use rand_distr::{Distribution, Exp};
        let mut rng = StdRng::seed_from_u64(5);
        let exp: Exp<f64> = Exp::new(1.0 / 30_000.0).unwrap();
        let mut t = 0u64;
        let n = 7_000;
        let times: Vec<u64> = (0..n)
            .map(|_| {
                t += exp.sample(&mut rng).round().max(1.0) as u64;
                t
            })
            .collect();
        let outcomes: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let split = 6_000;
        let (diffs, last) = split_by_outcome(&times[..split], &outcomes[..split]);
        match predict_outcomes(&diffs, last, &times[split..], Some(&outcomes[split..])) {
            // iid gaps should not embed at all
            Err(NonlinearError::NoPrediction) => {}
            Ok(report) => {
                let acc = report.accuracy_vs_truth.unwrap();
                let se = (0.25 * 0.75 / (n - split) as f64).sqrt();
                assert!(
                    (acc - 0.25).abs() < 4.0 * se + 0.02,
                    "accuracy {acc} should be chance"
                );
            }
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn no_embeddable_outcome_means_no_prediction() {
        let mut rng = StdRng::seed_from_u64(7);
        let diffs: [Vec<u64>; 4] = std::array::from_fn(|_| {
            (0..2_000).map(|_| rng.gen_range(1_000..100_000)).collect()
        });
        let announced = vec![1_000_000u64, 2_000_000];
        assert_eq!(
            predict_outcomes(&diffs, [0; 4], &announced, None).unwrap_err(),
            NonlinearError::NoPrediction
        );
    }

    #[test]
    fn label_shuffle_collapses_to_chance() {
        let (times, outcomes) = periodic_gap_process(7_000);
        let split = 6_000;
        // shuffle the truth labels: structure per outcome is destroyed
        let mut shuffled = outcomes.clone();
        let mut rng = StdRng::seed_from_u64(11);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let (diffs, last) = split_by_outcome(&times[..split], &shuffled[..split]);
        match predict_outcomes(&diffs, last, &times[split..], Some(&shuffled[split..])) {
            Err(NonlinearError::NoPrediction) => {}
            Ok(report) => {
                let acc = report.accuracy_vs_truth.unwrap();
                let se = (0.25 * 0.75 / (times.len() - split) as f64).sqrt();
                assert!((acc - 0.25).abs() < 5.0 * se, "accuracy {acc}");
            }
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }
}
