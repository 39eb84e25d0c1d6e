//! Synthetic Bell-run generator.
//!
//! Pairs arrive as a Poisson process. Each pair draws analyzer settings
//! uniformly from the standard CHSH angles (a=0°, a′=45°, b=22.5°, b′=67.5°)
//! and joint gate outcomes with correlation E = V·cos 2Δ, so the ideal-angle
//! entanglement parameter is 2√2·V. Detections are thinned per detector
//! efficiency, smeared with truncated Gaussian jitter, and mixed with
//! uncorrelated background singles.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::event::{Channel, DetectionEvent, EventStream, RunMetadata};

pub const PS_PER_SECOND: f64 = 1e12;

/// CHSH analyzer angles in degrees: (a, a'), (b, b').
pub const SETTINGS_A_DEG: [f64; 2] = [0.0, 45.0];
pub const SETTINGS_B_DEG: [f64; 2] = [22.5, 67.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Two-photon fringe visibility V in [0, 1]; ideal-angle S = 2√2·V.
    pub visibility: f64,
    /// Entangled-pair rate, pairs per second.
    pub pair_rate: f64,
    /// Uncorrelated background rate, counts per second per station
    /// (split evenly between the station's two gates).
    pub background_singles_rate: f64,
    /// Detection efficiency per detector, order A0, A1, B0, B1.
    pub efficiency: [f64; 4],
    /// Std dev of per-detection Gaussian time jitter, picoseconds.
    pub jitter_sigma_ps: f64,
    pub duration_s: f64,
    pub rng_seed: u64,
    pub label: String,
}

impl Default for SynthConfig {
    /// A realistic fiber-optic bench run: ~250-300 Ks singles per station
    /// and ~45-50 Ks coincidences over 10 s, coincidence/singles ratio in
    /// the 18-22% range.
    fn default() -> Self {
        Self {
            visibility: 0.98,
            pair_rate: 130_000.0,
            background_singles_rate: 500.0,
            efficiency: [0.19, 0.19, 0.19, 0.19],
            jitter_sigma_ps: 700.0,
            duration_s: 10.0,
            rng_seed: 1,
            label: String::new(),
        }
    }
}

impl SynthConfig {
    pub fn nominal_s_chsh(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * self.visibility
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(SynthError::InvalidConfig("visibility outside [0,1]".into()));
        }
        if self.pair_rate < 0.0 || self.background_singles_rate < 0.0 {
            return Err(SynthError::InvalidConfig("negative rate".into()));
        }
        if self.duration_s <= 0.0 {
            return Err(SynthError::InvalidConfig("duration must be > 0".into()));
        }
        if self.jitter_sigma_ps < 0.0 {
            return Err(SynthError::InvalidConfig("negative jitter".into()));
        }
        if self.efficiency.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(SynthError::InvalidConfig(
                "efficiencies must lie in (0,1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty counts at setting pair ({0},{1})")]
    EmptyCounts(usize, usize),
}

/// Coincidence outcome counts per setting pair. `counts[i][j][x][y]` is the
/// number of pairs measured at (a_i, b_j) with gate outcomes (x, y).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChshCounts {
    pub counts: [[[[u64; 2]; 2]; 2]; 2],
}

impl ChshCounts {
    pub fn record(&mut self, a_setting: usize, b_setting: usize, x: u8, y: u8) {
        self.counts[a_setting][b_setting][x as usize][y as usize] += 1;
    }

    /// Correlator E = (N00 + N11 - N01 - N10) / N at one setting pair,
    /// with gate 0 valued +1 and gate 1 valued -1.
    pub fn correlator(&self, i: usize, j: usize) -> Result<(f64, u64), SynthError> {
        let c = &self.counts[i][j];
        let n = c[0][0] + c[0][1] + c[1][0] + c[1][1];
        if n == 0 {
            return Err(SynthError::EmptyCounts(i, j));
        }
        let same = (c[0][0] + c[1][1]) as f64;
        let diff = (c[0][1] + c[1][0]) as f64;
        Ok(((same - diff) / n as f64, n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub s: f64,
    pub std_err: f64,
}

/// Standard CHSH combination S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|
/// with a binomial-propagation standard error.
#[allow(clippy::needless_range_loop)] // (i, j) are the setting-pair indices
pub fn estimate_chsh(counts: &ChshCounts) -> Result<ChshEstimate, SynthError> {
    let mut e = [[0.0; 2]; 2];
    let mut var = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let (eij, n) = counts.correlator(i, j)?;
            e[i][j] = eij;
            var += (1.0 - eij * eij) / n as f64;
        }
    }
    let s = (e[0][0] - e[0][1] + e[1][0] + e[1][1]).abs();
    Ok(ChshEstimate {
        s,
        std_err: var.sqrt(),
    })
}

/// Synthesizes one run. Deterministic in `(config, rng_seed)`.
pub fn simulate_run(config: &SynthConfig) -> Result<EventStream, SynthError> {
    Ok(simulate_with_diagnostics(config)?.0)
}

/// `simulate_run` plus the per-setting coincidence outcome counts the run
/// would produce with ideal coincidence identification (both photons of a
/// pair detected), for checking the visibility → S mapping.
pub fn simulate_with_diagnostics(
    config: &SynthConfig,
) -> Result<(EventStream, ChshCounts), SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let v = config.visibility;
    let mut events: Vec<DetectionEvent> = Vec::new();
    let mut chsh = ChshCounts::default();

    let jitter = if config.jitter_sigma_ps > 0.0 {
        Some(Normal::new(0.0, config.jitter_sigma_ps).unwrap())
    } else {
        None
    };
    let jitter_ps = |rng: &mut ChaCha8Rng| -> f64 {
        match jitter {
            None => 0.0,
            Some(dist) => loop {
                let x = dist.sample(rng);
                if x.abs() <= 5.0 * config.jitter_sigma_ps {
                    break x;
                }
            },
        }
    };
    let stamp = |t_s: f64, dt_ps: f64| -> u64 {
        let ps = t_s * PS_PER_SECOND + dt_ps;
        if ps < 0.0 {
            0
        } else {
            ps.round() as u64
        }
    };

    // entangled pairs
    if config.pair_rate > 0.0 {
        let gap = Exp::new(config.pair_rate).unwrap();
        let mut t = gap.sample(&mut rng);
        while t < config.duration_s {
            let a_setting = rng.gen_range(0..2usize);
            let b_setting = rng.gen_range(0..2usize);
            let delta =
                (SETTINGS_A_DEG[a_setting] - SETTINGS_B_DEG[b_setting]).to_radians();
            let corr = v * (2.0 * delta).cos();
            // balanced marginals with <o_A o_B> = corr
            let x: u8 = rng.gen_range(0..2);
            let y: u8 = if rng.gen::<f64>() < (1.0 + corr) / 2.0 {
                x
            } else {
                1 - x
            };
            let det_a = rng.gen::<f64>() < config.efficiency[x as usize];
            let det_b = rng.gen::<f64>() < config.efficiency[2 + y as usize];
            if det_a {
                let ch = if x == 0 { Channel::A0 } else { Channel::A1 };
                events.push(DetectionEvent {
                    timestamp_ps: stamp(t, jitter_ps(&mut rng)),
                    channel: ch,
                });
            }
            if det_b {
                let ch = if y == 0 { Channel::B0 } else { Channel::B1 };
                events.push(DetectionEvent {
                    timestamp_ps: stamp(t, jitter_ps(&mut rng)),
                    channel: ch,
                });
            }
            if det_a && det_b {
                chsh.record(a_setting, b_setting, x, y);
            }
            t += gap.sample(&mut rng);
        }
    }

    // background singles, uncorrelated Poisson per detector
    if config.background_singles_rate > 0.0 {
        let lambda = config.background_singles_rate / 2.0 * config.duration_s;
        let count_dist = Poisson::new(lambda).unwrap();
        for ch in Channel::ALL {
            let n = count_dist.sample(&mut rng) as u64;
            for _ in 0..n {
                let t = rng.gen::<f64>() * config.duration_s;
                events.push(DetectionEvent {
                    timestamp_ps: stamp(t, 0.0),
                    channel: ch,
                });
            }
        }
    }

    events.sort_by_key(|e| e.timestamp_ps);
    let meta = RunMetadata {
        nominal_s_chsh: config.nominal_s_chsh(),
        duration_s: config.duration_s,
        resolution_ps: 10,
        label: config.label.clone(),
    };
    Ok((EventStream { events, meta }, chsh))
}
