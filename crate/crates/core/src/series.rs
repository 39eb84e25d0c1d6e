//! Derived binary series.
//!
//! A run yields two families per station: OUT series (the analyzer gate of
//! each detection) and TD series (inter-detection time differences, binarized
//! at a threshold). Each family splits into coincidence-only (CO),
//! singles-only (SO) and all-detections (AL) classes; the CO time differences
//! form a single joint series shared by the stations.
//!
//! The TD threshold is chosen from the complexity/min-entropy spectra over a
//! quantile grid: both curves peak where the binarized series is most
//! balanced, and the peak sits at the empirical median for well-behaved
//! inter-arrival distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::coincidence::{
    classify, find_coincidences, optimize_delay, CoincidenceError, CoincidenceSet, DelayOptimum,
};
use crate::complexity::{kc_bytes, min_entropy_from_counts};
use crate::event::{EventStream, Station};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SeriesClass {
    Co,
    So,
    Al,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SeriesKind {
    Out,
    Td,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesStation {
    A,
    B,
    /// CO time differences are one series shared by both stations.
    Joint,
}

impl From<Station> for SeriesStation {
    fn from(s: Station) -> Self {
        match s {
            Station::A => SeriesStation::A,
            Station::B => SeriesStation::B,
        }
    }
}

/// Where a series came from and how it was binarized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub class: SeriesClass,
    pub kind: SeriesKind,
    pub station: SeriesStation,
    /// Binarization threshold; present exactly for TD-kind series.
    pub threshold_ps: Option<u64>,
    /// Set after Toeplitz extraction.
    pub extracted: bool,
}

impl Provenance {
    pub fn cell_name(&self) -> String {
        let class = match self.class {
            SeriesClass::Co => "CO",
            SeriesClass::So => "SO",
            SeriesClass::Al => "AL",
        };
        let kind = match self.kind {
            SeriesKind::Out => "OUT",
            SeriesKind::Td => "TD",
        };
        format!("{class}+{kind}")
    }
}

/// A binary series with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitSeries {
    pub bits: Bits,
    pub provenance: Provenance,
}

/// Positive inter-detection time differences, before binarization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDiffSeries {
    pub diffs: Vec<u64>,
    pub class: SeriesClass,
    pub station: SeriesStation,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SeriesError {
    #[error("too short: need {need} detections, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("class subset is empty")]
    EmptyClass,
    #[error("all time differences equal; no informative threshold")]
    Degenerate,
    #[error("threshold grid needs at least 3 quantiles, got {0}")]
    BadGrid(usize),
}

/// OUT series: bit i is the analyzer gate of the i-th detection in time order.
pub fn out_series(subset: &[(u64, u8)], class: SeriesClass, station: SeriesStation) -> BitSeries {
    let bits: Bits = subset.iter().map(|&(_, gate)| gate == 1).collect();
    BitSeries {
        bits,
        provenance: Provenance {
            class,
            kind: SeriesKind::Out,
            station,
            threshold_ps: None,
            extracted: false,
        },
    }
}

/// TD series over detection times: diffs[i] = t[i+1] - t[i].
pub fn td_series(
    times: &[u64],
    class: SeriesClass,
    station: SeriesStation,
) -> Result<TimeDiffSeries, SeriesError> {
    if times.len() < 2 {
        return Err(SeriesError::TooShort {
            need: 2,
            got: times.len(),
        });
    }
    let diffs = times.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(TimeDiffSeries {
        diffs,
        class,
        station,
    })
}

/// Binarization rule: 1 iff diff > threshold (ties go to 0).
pub fn binarize(td: &TimeDiffSeries, threshold_ps: u64) -> BitSeries {
    let bits: Bits = td.diffs.iter().map(|&d| d > threshold_ps).collect();
    BitSeries {
        bits,
        provenance: Provenance {
            class: td.class,
            kind: SeriesKind::Td,
            station: td.station,
            threshold_ps: Some(threshold_ps),
            extracted: false,
        },
    }
}

/// One evaluated grid point of a threshold spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub threshold_ps: u64,
    pub kc: f64,
    pub h_min: f64,
    pub phrase_count: usize,
}

/// Complexity and min-entropy of the binarized series across a quantile grid
/// of candidate thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpectrum {
    pub grid: Vec<SpectrumPoint>,
    /// Selected threshold: the complexity maximum after consolidating the
    /// near-maximal plateau (phrase counts within estimator noise of the
    /// peak), resolved toward the median.
    pub theta_star: u64,
    /// Literal complexity argmax, ties broken toward the median.
    pub kc_argmax: u64,
    /// Min-entropy argmax, ties broken toward the median.
    pub h_min_argmax: u64,
    /// Empirical (lower) median of the time differences.
    pub median: u64,
}

/// Evaluates Kc and H_min of `binarize(td, theta)` on an empirical-quantile
/// grid theta_k at k/(Q+1), k = 1..Q, and selects the working threshold.
///
/// The complexity spectrum of near-iid inter-arrival data is a broad hill
/// whose top is flat to within phrase-count noise; the literal argmax
/// therefore wanders over the plateau. The selected `theta_star` is the
/// plateau point nearest the median: phrase counts within a noise allowance
/// of the maximum are treated as ties. The allowance is four times a robust
/// noise scale read off the spectrum's own successive differences.
pub fn select_threshold(
    td: &TimeDiffSeries,
    grid_quantiles: usize,
) -> Result<ThresholdSpectrum, SeriesError> {
    if grid_quantiles < 3 {
        return Err(SeriesError::BadGrid(grid_quantiles));
    }
    let n = td.diffs.len();
    if n < 2 {
        return Err(SeriesError::TooShort { need: 2, got: n });
    }
    let mut sorted = td.diffs.clone();
    sorted.sort_unstable();
    if sorted[0] == sorted[n - 1] {
        return Err(SeriesError::Degenerate);
    }
    let median = sorted[(n - 1) / 2];

    let q1 = grid_quantiles + 1;
    let thresholds: Vec<u64> = (1..=grid_quantiles)
        .map(|k| {
            let idx = ((k as f64 / q1 as f64) * n as f64).ceil() as usize;
            sorted[idx.clamp(1, n) - 1]
        })
        .collect();

    // evaluate each distinct threshold once
    let mut unique = thresholds.clone();
    unique.dedup();
    let evaluated: Vec<(u64, f64, f64, usize)> = unique
        .par_iter()
        .map(|&theta| {
            let bits: Vec<u8> = td.diffs.iter().map(|&d| (d > theta) as u8).collect();
            let ones = bits.iter().map(|&b| b as usize).sum();
            let h = min_entropy_from_counts(ones, n - ones).expect("n >= 2");
            let c = kc_bytes(&bits).expect("n >= 2");
            (theta, c.kc, h.h_min, c.phrase_count)
        })
        .collect();
    let lookup = |theta: u64| -> (f64, f64, usize) {
        let i = evaluated.partition_point(|e| e.0 < theta);
        let e = evaluated[i];
        (e.1, e.2, e.3)
    };
    let grid: Vec<SpectrumPoint> = thresholds
        .iter()
        .map(|&theta| {
            let (kc, h_min, phrase_count) = lookup(theta);
            SpectrumPoint {
                threshold_ps: theta,
                kc,
                h_min,
                phrase_count,
            }
        })
        .collect();

    // distance of grid index k (0-based) from the median quantile
    let mid = (q1 as f64) / 2.0 - 1.0;
    let dist = |i: usize| (i as f64 - mid).abs();
    let argmax_toward_median = |key: &dyn Fn(&SpectrumPoint) -> f64| -> usize {
        let mut best = 0usize;
        for i in 1..grid.len() {
            let (ki, kb) = (key(&grid[i]), key(&grid[best]));
            if ki > kb || (ki == kb && dist(i) < dist(best)) {
                best = i;
            }
        }
        best
    };
    let kc_argmax_idx = argmax_toward_median(&|p: &SpectrumPoint| p.kc);
    let h_min_argmax_idx = argmax_toward_median(&|p: &SpectrumPoint| p.h_min);

    // plateau consolidation: robust phrase-count noise from successive
    // differences over the middle third of the grid
    let third = grid.len() / 3;
    let mid_slice = &grid[third..grid.len() - third];
    let mut jumps: Vec<i64> = mid_slice
        .windows(2)
        .map(|w| (w[1].phrase_count as i64 - w[0].phrase_count as i64).abs())
        .collect();
    jumps.sort_unstable();
    let sigma = if jumps.is_empty() {
        0.0
    } else {
        // MAD of successive differences; /sqrt(2) for the difference of two
        // noisy values, 1.4826 to scale to a standard deviation
        jumps[jumps.len() / 2] as f64 * 1.4826 / std::f64::consts::SQRT_2
    };
    let tol = (4.0 * sigma).ceil().max(1.0) as usize;
    let c_max = grid[kc_argmax_idx].phrase_count;
    let mut theta_idx = kc_argmax_idx;
    for (i, p) in grid.iter().enumerate() {
        if p.phrase_count + tol >= c_max && dist(i) < dist(theta_idx) {
            theta_idx = i;
        }
    }

    Ok(ThresholdSpectrum {
        theta_star: grid[theta_idx].threshold_ps,
        kc_argmax: grid[kc_argmax_idx].threshold_ps,
        h_min_argmax: grid[h_min_argmax_idx].threshold_ps,
        median,
        grid,
    })
}

/// How the A↔B delay is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DelaySpec {
    Fixed(i64),
    Scan { lo: i64, hi: i64, step: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeriveParams {
    /// Full coincidence window width, picoseconds.
    pub window_ps: u64,
    pub delay: DelaySpec,
    pub grid_quantiles: usize,
}

impl Default for DeriveParams {
    fn default() -> Self {
        Self {
            window_ps: 10_000, // 10 ns
            delay: DelaySpec::Fixed(0),
            grid_quantiles: 199,
        }
    }
}

/// One derived series, or the reason it could not be produced.
#[derive(Debug, Clone)]
pub struct DerivedEntry {
    pub class: SeriesClass,
    pub kind: SeriesKind,
    pub station: SeriesStation,
    pub result: Result<BitSeries, SeriesError>,
    /// The raw time differences behind a TD entry (kept for nonlinear
    /// analysis, which needs the metric values rather than bits).
    pub td: Option<TimeDiffSeries>,
    pub spectrum: Option<ThresholdSpectrum>,
}

#[derive(Debug, Clone)]
pub struct DeriveOutput {
    pub delay: DelayOptimum,
    pub coincidences: CoincidenceSet,
    pub entries: Vec<DerivedEntry>,
}

/// Derives the full series set from one run: 6 OUT series (CO/SO/AL per
/// station), the joint CO TD series, and 4 per-station SO/AL TD series.
/// Failures are recorded per series; the rest of the set still derives.
pub fn derive_all(
    stream: &EventStream,
    params: &DeriveParams,
) -> Result<DeriveOutput, CoincidenceError> {
    let a_events = stream.station_split(Station::A);
    let b_events = stream.station_split(Station::B);
    let delay = match params.delay {
        DelaySpec::Fixed(d) => DelayOptimum {
            delay_ps: d,
            count: 0,
            contrast: f64::NAN,
            low_contrast: false,
        },
        DelaySpec::Scan { lo, hi, step } => {
            optimize_delay(&a_events, &b_events, params.window_ps, lo, hi, step)?
        }
    };
    let coincidences = find_coincidences(&a_events, &b_events, params.window_ps, delay.delay_ps);
    let classes = classify(&a_events, &b_events, &coincidences)?;

    let mut entries = Vec::with_capacity(11);

    let out_entry = |subset: &[(u64, u8)], class: SeriesClass, station: SeriesStation| {
        let result = if subset.is_empty() {
            Err(SeriesError::EmptyClass)
        } else {
            Ok(out_series(subset, class, station))
        };
        DerivedEntry {
            class,
            kind: SeriesKind::Out,
            station,
            result,
            td: None,
            spectrum: None,
        }
    };
    for (classes, station) in [(&classes.a, SeriesStation::A), (&classes.b, SeriesStation::B)] {
        entries.push(out_entry(&classes.co, SeriesClass::Co, station));
        entries.push(out_entry(&classes.so, SeriesClass::So, station));
        entries.push(out_entry(&classes.al, SeriesClass::Al, station));
    }

    let td_entry = |times: &[u64], class: SeriesClass, station: SeriesStation| {
        let mut entry = DerivedEntry {
            class,
            kind: SeriesKind::Td,
            station,
            result: Err(SeriesError::EmptyClass),
            td: None,
            spectrum: None,
        };
        match td_series(times, class, station) {
            Err(e) => entry.result = Err(e),
            Ok(td) => match select_threshold(&td, params.grid_quantiles) {
                Err(e) => {
                    entry.result = Err(e);
                    entry.td = Some(td);
                }
                Ok(spectrum) => {
                    entry.result = Ok(binarize(&td, spectrum.theta_star));
                    entry.td = Some(td);
                    entry.spectrum = Some(spectrum);
                }
            },
        }
        entry
    };

    // CO+TD is one joint series; the canonical coincidence time is the
    // station-A timestamp of each pair.
    let co_times: Vec<u64> = coincidences.pairs.iter().map(|p| p.t_a).collect();
    entries.push(td_entry(&co_times, SeriesClass::Co, SeriesStation::Joint));
    for (classes, station) in [(&classes.a, SeriesStation::A), (&classes.b, SeriesStation::B)] {
        let so_times: Vec<u64> = classes.so.iter().map(|e| e.0).collect();
        let al_times: Vec<u64> = classes.al.iter().map(|e| e.0).collect();
        entries.push(td_entry(&so_times, SeriesClass::So, station));
        entries.push(td_entry(&al_times, SeriesClass::Al, station));
    }

    Ok(DeriveOutput {
        delay,
        coincidences,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{simulate_run, SynthConfig};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Exp};

    #[test]
    fn out_series_gate_order() {
        let subset = [(0u64, 0u8), (5, 1), (9, 1), (12, 0)];
        let s = out_series(&subset, SeriesClass::Al, SeriesStation::A);
        assert_eq!(s.bits.to_bit_bytes(), vec![0, 1, 1, 0]);
        assert_eq!(s.provenance.threshold_ps, None);
        let empty = out_series(&[], SeriesClass::Al, SeriesStation::A);
        assert!(empty.bits.is_empty());
    }

    #[test]
    fn td_series_diffs_and_too_short() {
        let td = td_series(&[0, 400, 1000], SeriesClass::Al, SeriesStation::A).unwrap();
        assert_eq!(td.diffs, vec![400, 600]);
        assert_eq!(
            td_series(&[7], SeriesClass::Al, SeriesStation::A).unwrap_err(),
            SeriesError::TooShort { need: 2, got: 1 }
        );
    }

    #[test]
    fn binarize_strict_threshold() {
        let td = TimeDiffSeries {
            diffs: vec![400, 600, 500],
            class: SeriesClass::Al,
            station: SeriesStation::A,
        };
        let s = binarize(&td, 500);
        assert_eq!(s.bits.to_bit_bytes(), vec![0, 1, 0], "tie goes to 0");
        assert_eq!(s.provenance.threshold_ps, Some(500));
        let all_ones = binarize(&td, 0);
        assert_eq!(all_ones.bits.count_ones(), 3);
    }

    #[test]
    fn median_binarization_balances_odd_distinct() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.gen_range(50..200) * 2 + 1;
            let mut vals: Vec<u64> = (0..n as u64).map(|i| i * 10 + 1).collect();
            // shuffle
            for i in (1..vals.len()).rev() {
                vals.swap(i, rng.gen_range(0..=i));
            }
            let td = TimeDiffSeries {
                diffs: vals.clone(),
                class: SeriesClass::Al,
                station: SeriesStation::A,
            };
            let mut sorted = vals;
            sorted.sort_unstable();
            let median = sorted[(n - 1) / 2];
            let ones = binarize(&td, median).bits.count_ones();
            assert!(
                ones == n / 2 || ones == n.div_ceil(2),
                "ones = {ones} of {n}"
            );
        }
    }

    #[test]
    fn select_threshold_linear_ramp() {
        let td = TimeDiffSeries {
            diffs: (1..=1000).collect(),
            class: SeriesClass::Al,
            station: SeriesStation::A,
        };
        let sp = select_threshold(&td, 199).unwrap();
        assert_eq!(sp.grid.len(), 199);
        assert_eq!(sp.median, 500);
        assert!(
            (sp.theta_star as i64 - 500).abs() <= 10,
            "theta_star = {}",
            sp.theta_star
        );
        // H_min peaks at the most balanced split
        assert!((sp.h_min_argmax as i64 - 500).abs() <= 5);
    }

    #[test]
    fn select_threshold_degenerate_and_grid_errors() {
        let td = TimeDiffSeries {
            diffs: vec![5; 100],
            class: SeriesClass::Al,
            station: SeriesStation::A,
        };
        assert_eq!(select_threshold(&td, 199).unwrap_err(), SeriesError::Degenerate);
        let td2 = TimeDiffSeries {
            diffs: vec![1, 2, 3],
            class: SeriesClass::Al,
            station: SeriesStation::A,
        };
        assert_eq!(select_threshold(&td2, 2).unwrap_err(), SeriesError::BadGrid(2));
    }

    #[test]
    fn exponential_theta_star_tracks_median() {
        let mut rng = StdRng::seed_from_u64(5);
        let exp: Exp<f64> = Exp::new(1.0 / 40_000.0).unwrap();
        for _ in 0..5 {
            let diffs: Vec<u64> = (0..20_000)
                .map(|_| exp.sample(&mut rng).round().max(1.0) as u64)
                .collect();
            let td = TimeDiffSeries {
                diffs,
                class: SeriesClass::Co,
                station: SeriesStation::Joint,
            };
            let sp = select_threshold(&td, 99).unwrap();
            // one grid step of 1% quantile spacing around the median of Exp
            // is ~2% of the median in value
            let rel = (sp.theta_star as f64 - sp.median as f64).abs() / sp.median as f64;
            assert!(rel < 0.05, "theta_star {} vs median {}", sp.theta_star, sp.median);
            let bits = binarize(&td, sp.theta_star);
            let ones_frac = bits.bits.count_ones() as f64 / bits.bits.len() as f64;
            assert!((ones_frac - 0.5).abs() < 0.02, "ones fraction {ones_frac}");
        }
    }

    #[test]
    fn poisson_diffs_look_exponential() {
        // mean ~ 1/r and a one-sample KS check against Exp(1/mean)
        let mut rng = StdRng::seed_from_u64(10);
        let rate = 1.0 / 25_000.0; // per ps
        let exp: Exp<f64> = Exp::new(rate).unwrap();
        let mut t = 0u64;
        let times: Vec<u64> = (0..30_000)
            .map(|_| {
                t += exp.sample(&mut rng).round().max(1.0) as u64;
                t
            })
            .collect();
        let td = td_series(&times, SeriesClass::Al, SeriesStation::A).unwrap();
        let mean = td.diffs.iter().sum::<u64>() as f64 / td.diffs.len() as f64;
        assert!((mean * rate - 1.0).abs() < 0.02, "mean {mean}");
        let mut sorted = td.diffs.clone();
        sorted.sort_unstable();
        let n = sorted.len() as f64;
        let mut d_max = 0.0f64;
        for (i, &x) in sorted.iter().enumerate() {
            let f = 1.0 - (-(x as f64) / mean).exp();
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d_max = d_max.max((f - lo).abs()).max((f - hi).abs());
        }
        assert!(d_max < 2.0 / n.sqrt(), "KS distance {d_max}");
    }

    fn small_run(seed: u64) -> crate::event::EventStream {
        simulate_run(&SynthConfig {
            duration_s: 1.0,
            rng_seed: seed,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn derive_all_produces_full_set() {
        let stream = small_run(3);
        let params = DeriveParams {
            grid_quantiles: 49,
            ..DeriveParams::default()
        };
        let out = derive_all(&stream, &params).unwrap();
        assert_eq!(out.entries.len(), 11);
        for e in &out.entries {
            let s = e.result.as_ref().unwrap_or_else(|err| {
                panic!("{:?}+{:?} {:?} failed: {err}", e.class, e.kind, e.station)
            });
            assert!(!s.bits.is_empty());
            assert_eq!(s.provenance.kind == SeriesKind::Td, s.provenance.threshold_ps.is_some());
        }
        // one bit per coincidence in each station's CO+OUT
        let co_len = out.coincidences.len();
        for e in &out.entries {
            if e.class == SeriesClass::Co && e.kind == SeriesKind::Out {
                assert_eq!(e.result.as_ref().unwrap().bits.len(), co_len);
            }
            if e.class == SeriesClass::Co && e.kind == SeriesKind::Td {
                assert_eq!(e.station, SeriesStation::Joint);
                assert_eq!(e.result.as_ref().unwrap().bits.len(), co_len - 1);
            }
        }
    }

    #[test]
    fn derive_all_deterministic() {
        let stream = small_run(4);
        let params = DeriveParams {
            grid_quantiles: 19,
            delay: DelaySpec::Scan {
                lo: -5_000,
                hi: 5_000,
                step: 1_000,
            },
            ..DeriveParams::default()
        };
        let x = derive_all(&stream, &params).unwrap();
        let y = derive_all(&stream, &params).unwrap();
        assert_eq!(x.delay.delay_ps, y.delay.delay_ps);
        for (ex, ey) in x.entries.iter().zip(&y.entries) {
            assert_eq!(ex.result.as_ref().ok().map(|s| &s.bits),
                       ey.result.as_ref().ok().map(|s| &s.bits));
        }
    }

    #[test]
    fn no_coincidences_leaves_co_absent_and_so_equals_al() {
        // two stations firing in disjoint time ranges
        let mut events = Vec::new();
        for i in 0..200u64 {
            events.push(crate::event::DetectionEvent {
                timestamp_ps: i * 1_000,
                channel: if i % 2 == 0 {
                    crate::event::Channel::A0
                } else {
                    crate::event::Channel::A1
                },
            });
        }
        for i in 0..200u64 {
            events.push(crate::event::DetectionEvent {
                timestamp_ps: 10_000_000_000 + i * 1_000,
                channel: if i % 3 == 0 {
                    crate::event::Channel::B1
                } else {
                    crate::event::Channel::B0
                },
            });
        }
        events.sort_by_key(|e| e.timestamp_ps);
        let stream = crate::event::EventStream {
            events,
            meta: Default::default(),
        };
        let out = derive_all(
            &stream,
            &DeriveParams {
                window_ps: 10,
                grid_quantiles: 9,
                ..DeriveParams::default()
            },
        )
        .unwrap();
        assert!(out.coincidences.is_empty());
        for e in &out.entries {
            if e.class == SeriesClass::Co {
                assert!(e.result.is_err(), "CO series should be absent");
            }
        }
        // SO = AL per station and kind
        let find = |class, kind, station| {
            out.entries
                .iter()
                .find(|e| e.class == class && e.kind == kind && e.station == station)
                .unwrap()
        };
        for st in [SeriesStation::A, SeriesStation::B] {
            let so = find(SeriesClass::So, SeriesKind::Out, st);
            let al = find(SeriesClass::Al, SeriesKind::Out, st);
            assert_eq!(
                so.result.as_ref().unwrap().bits,
                al.result.as_ref().unwrap().bits
            );
        }
    }

    #[test]
    fn unbalanced_efficiency_biases_out_series() {
        let cfg = SynthConfig {
            efficiency: [0.19, 0.152, 0.19, 0.19], // A1 at 0.8x A0
            duration_s: 2.0,
            rng_seed: 17,
            ..SynthConfig::default()
        };
        let stream = simulate_run(&cfg).unwrap();
        let out = derive_all(
            &stream,
            &DeriveParams {
                grid_quantiles: 19,
                ..DeriveParams::default()
            },
        )
        .unwrap();
        let al_out_a = out
            .entries
            .iter()
            .find(|e| {
                e.class == SeriesClass::Al
                    && e.kind == SeriesKind::Out
                    && e.station == SeriesStation::A
            })
            .unwrap();
        let bits = &al_out_a.result.as_ref().unwrap().bits;
        let ones_frac = bits.count_ones() as f64 / bits.len() as f64;
        let se = 0.5 / (bits.len() as f64).sqrt();
        assert!(
            ones_frac < 0.5 - 5.0 * se,
            "ones fraction {ones_frac} not significantly below 1/2"
        );
    }
}
