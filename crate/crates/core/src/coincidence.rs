//! Coincidence identification between the two stations: greedy one-to-one
//! matching inside a time window after delay alignment, exhaustive delay
//! optimization, and CO/SO/AL classification of each station's detections.

use serde::{Deserialize, Serialize};

/// One matched pair, indexing into the per-station `(timestamp, gate)` lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidencePair {
    pub index_a: usize,
    pub index_b: usize,
    pub t_a: u64,
    pub t_b: u64,
}

/// Result of matching at one (window, delay).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceSet {
    pub pairs: Vec<CoincidencePair>,
    /// Full window width: a pair requires |t_b - t_a - delay| <= window/2.
    pub window_ps: u64,
    pub delay_ps: i64,
}

impl CoincidenceSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CoincidenceError {
    #[error("empty delay scan")]
    EmptyScan,
    #[error("coincidence indices out of range for the supplied streams")]
    InconsistentInputs,
}

#[inline]
fn in_window(t_a: u64, t_b: u64, window_ps: u64, delay_ps: i64) -> bool {
    // 2|t_b - t_a - delay| <= window, exact in integers
    let diff = t_b as i128 - t_a as i128 - delay_ps as i128;
    2 * diff.abs() <= window_ps as i128
}

/// Greedy earliest-first one-to-one matching. Both inputs must be
/// time-ordered; each event ends up in at most one pair.
pub fn find_coincidences(
    a_events: &[(u64, u8)],
    b_events: &[(u64, u8)],
    window_ps: u64,
    delay_ps: i64,
) -> CoincidenceSet {
    let mut pairs = Vec::new();
    let mut i = 0;
    let mut j = 0;
    while i < a_events.len() && j < b_events.len() {
        let t_a = a_events[i].0;
        let t_b = b_events[j].0;
        if in_window(t_a, t_b, window_ps, delay_ps) {
            pairs.push(CoincidencePair {
                index_a: i,
                index_b: j,
                t_a,
                t_b,
            });
            i += 1;
            j += 1;
        } else if (t_b as i128 - delay_ps as i128) < t_a as i128 {
            j += 1;
        } else {
            i += 1;
        }
    }
    CoincidenceSet {
        pairs,
        window_ps,
        delay_ps,
    }
}

/// Count-only matching, used by the delay scan.
fn coincidence_count(a: &[(u64, u8)], b: &[(u64, u8)], window_ps: u64, delay_ps: i64) -> usize {
    let mut count = 0;
    let mut i = 0;
    let mut j = 0;
    while i < a.len() && j < b.len() {
        let t_a = a[i].0;
        let t_b = b[j].0;
        if in_window(t_a, t_b, window_ps, delay_ps) {
            count += 1;
            i += 1;
            j += 1;
        } else if (t_b as i128 - delay_ps as i128) < t_a as i128 {
            j += 1;
        } else {
            i += 1;
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayOptimum {
    pub delay_ps: i64,
    pub count: usize,
    /// Peak count divided by the mean count over the scan; a flat scan
    /// (uncorrelated streams) stays near 1.
    pub contrast: f64,
    /// Set when contrast < 2, signalling there is no real coincidence peak.
    pub low_contrast: bool,
}

/// Exhaustive delay scan maximizing the coincidence count. Ties break toward
/// the smallest |delay|, then the smaller delay.
pub fn optimize_delay(
    a_events: &[(u64, u8)],
    b_events: &[(u64, u8)],
    window_ps: u64,
    scan_lo: i64,
    scan_hi: i64,
    scan_step: u64,
) -> Result<DelayOptimum, CoincidenceError> {
    if scan_step == 0 || scan_lo > scan_hi {
        return Err(CoincidenceError::EmptyScan);
    }
    let mut best: Option<(usize, i64)> = None;
    let mut total = 0usize;
    let mut n_delays = 0usize;
    let mut delay = scan_lo;
    loop {
        let count = coincidence_count(a_events, b_events, window_ps, delay);
        total += count;
        n_delays += 1;
        let better = match best {
            None => true,
            Some((bc, bd)) => {
                count > bc
                    || (count == bc
                        && (delay.abs() < bd.abs() || (delay.abs() == bd.abs() && delay < bd)))
            }
        };
        if better {
            best = Some((count, delay));
        }
        match delay.checked_add(scan_step as i64) {
            Some(next) if next <= scan_hi => delay = next,
            _ => break,
        }
    }
    let (count, delay_ps) = best.unwrap();
    let mean = total as f64 / n_delays as f64;
    let contrast = if mean > 0.0 { count as f64 / mean } else { 1.0 };
    Ok(DelayOptimum {
        delay_ps,
        count,
        contrast,
        low_contrast: contrast < 2.0,
    })
}

/// Per-station CO/SO/AL split of `(timestamp, gate)` events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StationClasses {
    pub co: Vec<(u64, u8)>,
    pub so: Vec<(u64, u8)>,
    pub al: Vec<(u64, u8)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Classified {
    pub a: StationClasses,
    pub b: StationClasses,
}

/// Splits each station's events into coincidence (CO), singles-only (SO) and
/// all (AL) subsets. CO and SO partition AL per station.
pub fn classify(
    a_events: &[(u64, u8)],
    b_events: &[(u64, u8)],
    coincidences: &CoincidenceSet,
) -> Result<Classified, CoincidenceError> {
    let mut in_co_a = vec![false; a_events.len()];
    let mut in_co_b = vec![false; b_events.len()];
    for p in &coincidences.pairs {
        if p.index_a >= a_events.len() || p.index_b >= b_events.len() {
            return Err(CoincidenceError::InconsistentInputs);
        }
        in_co_a[p.index_a] = true;
        in_co_b[p.index_b] = true;
    }
    let split = |events: &[(u64, u8)], mask: &[bool]| -> StationClasses {
        let mut c = StationClasses {
            al: events.to_vec(),
            ..Default::default()
        };
        for (e, &m) in events.iter().zip(mask) {
            if m {
                c.co.push(*e);
            } else {
                c.so.push(*e);
            }
        }
        c
    };
    Ok(Classified {
        a: split(a_events, &in_co_a),
        b: split(b_events, &in_co_b),
    })
}
