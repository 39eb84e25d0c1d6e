//! Complexity and entropy estimators: Lempel-Ziv (1976) phrase counting with
//! the Kaspar-Schuster normalization, per-bit min-entropy and Shannon entropy,
//! the CHSH lower bound on min-entropy, and the rescaled-range Hurst exponent.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ComplexityError {
    #[error("empty series")]
    EmptySeries,
    #[error("series too short: need {need}, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("constant input has no variance")]
    DegenerateVariance,
    #[error("s = {0} exceeds 2*sqrt(2)")]
    OutOfRange(f64),
}

/// Suffix automaton over a binary sequence, with each state carrying the end
/// index of its class's first occurrence. Supports the linear-time LZ76 parse.
struct SuffixAutomaton {
    // per state: transitions on 0/1, suffix link, max length, first end index
    next: Vec<[i32; 2]>,
    link: Vec<i32>,
    len: Vec<u32>,
    first_end: Vec<u32>,
}

impl SuffixAutomaton {
    fn add_state(&mut self, next: [i32; 2], link: i32, len: u32, first_end: u32) -> i32 {
        self.next.push(next);
        self.link.push(link);
        self.len.push(len);
        self.first_end.push(first_end);
        (self.next.len() - 1) as i32
    }

    fn build(s: &[u8]) -> Self {
        let cap = 2 * s.len() + 2;
        let mut sam = SuffixAutomaton {
            next: Vec::with_capacity(cap),
            link: Vec::with_capacity(cap),
            len: Vec::with_capacity(cap),
            first_end: Vec::with_capacity(cap),
        };
        sam.add_state([-1, -1], -1, 0, u32::MAX);
        let mut last = 0i32;
        for (pos, &ch) in s.iter().enumerate() {
            let ch = (ch != 0) as usize;
            let cur_len = sam.len[last as usize] + 1;
            let cur = sam.add_state([-1, -1], -1, cur_len, pos as u32);
            let mut p = last;
            while p != -1 && sam.next[p as usize][ch] == -1 {
                sam.next[p as usize][ch] = cur;
                p = sam.link[p as usize];
            }
            if p == -1 {
                sam.link[cur as usize] = 0;
            } else {
                let q = sam.next[p as usize][ch];
                if sam.len[p as usize] + 1 == sam.len[q as usize] {
                    sam.link[cur as usize] = q;
                } else {
                    let clone_len = sam.len[p as usize] + 1;
                    let clone = sam.add_state(
                        sam.next[q as usize],
                        sam.link[q as usize],
                        clone_len,
                        sam.first_end[q as usize],
                    );
                    while p != -1 && sam.next[p as usize][ch] == q {
                        sam.next[p as usize][ch] = clone;
                        p = sam.link[p as usize];
                    }
                    sam.link[q as usize] = clone;
                    sam.link[cur as usize] = clone;
                }
            }
            last = cur;
        }
        sam
    }
}

/// LZ76 production-parse phrase count over one bit per byte.
/// The final phrase counts even when left incomplete at the end of the series.
///
/// Each phrase is the longest prefix of the remaining suffix reproducible
/// from an earlier start (the copy may overlap the phrase itself), plus one
/// fresh symbol. Reproducibility of s[p..p+m] from a start before p is
/// equivalent to s[p..p+m] occurring in s with an end index below p+m-1,
/// which the suffix automaton answers per extension step in O(1), making the
/// whole parse linear.
pub fn lz76_phrase_count_bytes(s: &[u8]) -> Result<usize, ComplexityError> {
    let n = s.len();
    if n == 0 {
        return Err(ComplexityError::EmptySeries);
    }
    let sam = SuffixAutomaton::build(s);
    let mut phrases = 0usize;
    let mut p = 0usize;
    while p < n {
        let mut state = 0i32;
        let mut m = 0usize;
        while p + m < n {
            let j = p + m;
            let ch = (s[j] != 0) as usize;
            let next = sam.next[state as usize][ch];
            if next == -1 || sam.first_end[next as usize] as usize >= j {
                break; // no earlier occurrence: j is the fresh symbol
            }
            state = next;
            m += 1;
        }
        phrases += 1;
        p += m + 1; // consumes the reproducible run plus one fresh symbol
    }
    Ok(phrases)
}

/// `lz76_phrase_count_bytes` over a packed series.
pub fn lz76_phrase_count(bits: &Bits) -> Result<usize, ComplexityError> {
    lz76_phrase_count_bytes(&bits.to_bit_bytes())
}

/// Kaspar-Schuster normalized complexity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityResult {
    /// Phrase count of the LZ76 parse.
    pub phrase_count: usize,
    /// Normalized complexity c*log2(n)/n. Short fluctuating series can exceed 1.
    pub kc: f64,
    pub n: usize,
}

pub fn kc(bits: &Bits) -> Result<ComplexityResult, ComplexityError> {
    kc_bytes(&bits.to_bit_bytes())
}

pub fn kc_bytes(bits: &[u8]) -> Result<ComplexityResult, ComplexityError> {
    let n = bits.len();
    if n < 2 {
        return Err(ComplexityError::TooShort { need: 2, got: n });
    }
    let c = lz76_phrase_count_bytes(bits)?;
    Ok(ComplexityResult {
        phrase_count: c,
        kc: c as f64 * (n as f64).log2() / n as f64,
        n,
    })
}

/// Per-bit empirical entropies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    /// -log2 of the most frequent symbol's relative frequency.
    pub h_min: f64,
    /// Binary Shannon entropy of the empirical symbol distribution.
    pub shannon: f64,
    pub max_prob: f64,
}

pub fn min_entropy(bits: &Bits) -> Result<EntropyResult, ComplexityError> {
    let n = bits.len();
    if n == 0 {
        return Err(ComplexityError::EmptySeries);
    }
    let ones = bits.count_ones();
    min_entropy_from_counts(ones, n - ones)
}

pub fn min_entropy_from_counts(ones: usize, zeros: usize) -> Result<EntropyResult, ComplexityError> {
    let n = ones + zeros;
    if n == 0 {
        return Err(ComplexityError::EmptySeries);
    }
    let p1 = ones as f64 / n as f64;
    let p0 = zeros as f64 / n as f64;
    let max_prob = p1.max(p0);
    let mut shannon = 0.0;
    for p in [p0, p1] {
        if p > 0.0 {
            shannon -= p * p.log2();
        }
    }
    Ok(EntropyResult {
        h_min: -max_prob.log2(),
        shannon,
        max_prob,
    })
}

/// Lower bound on the per-bit min-entropy implied by an observed CHSH value:
/// 1 - log2(1 + sqrt(2 - s^2/4)). Zero below s = 2; unity at s = 2*sqrt(2).
pub fn chsh_min_entropy_bound(s: f64) -> Result<f64, ComplexityError> {
    let max = 2.0 * std::f64::consts::SQRT_2;
    if s > max + 1e-9 {
        return Err(ComplexityError::OutOfRange(s));
    }
    if s < 2.0 {
        return Ok(0.0);
    }
    // s = 2*sqrt(2) makes the radicand a rounding-level negative; clamp.
    let radicand = (2.0 - s * s / 4.0).max(0.0);
    Ok(1.0 - (1.0 + radicand.sqrt()).log2())
}

/// Rescaled-range Hurst estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstResult {
    /// Fitted exponent, clamped to [0, 1].
    pub h: f64,
    /// True when the raw slope left [0, 1] before clamping.
    pub clamped: bool,
    /// (log2 window, log2 mean R/S) points used in the fit.
    pub fit_points: Vec<(f64, f64)>,
    pub fit_r2: f64,
}

/// Plain R/S analysis: window ladder of powers of two from 16 up to n/4,
/// mean R/S over non-overlapping chunks per window, least-squares slope in
/// log-log space.
pub fn hurst_exponent(series: &[f64]) -> Result<HurstResult, ComplexityError> {
    let n = series.len();
    if n < 256 {
        return Err(ComplexityError::TooShort { need: 256, got: n });
    }
    let mut fit_points = Vec::new();
    let mut window = 16usize;
    while window <= n / 4 {
        let chunks = n / window;
        let mut sum_rs = 0.0;
        let mut valid = 0usize;
        for c in 0..chunks {
            let chunk = &series[c * window..(c + 1) * window];
            let mean = chunk.iter().sum::<f64>() / window as f64;
            let var = chunk.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / window as f64;
            if var <= 0.0 {
                continue;
            }
            let mut cum = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &x in chunk {
                cum += x - mean;
                lo = lo.min(cum);
                hi = hi.max(cum);
            }
            sum_rs += (hi - lo) / var.sqrt();
            valid += 1;
        }
        if valid > 0 {
            fit_points.push(((window as f64).log2(), (sum_rs / valid as f64).log2()));
        }
        window *= 2;
    }
    if fit_points.len() < 2 {
        return Err(ComplexityError::DegenerateVariance);
    }
    let (slope, _intercept, r2) = least_squares(&fit_points);
    let clamped = !(0.0..=1.0).contains(&slope);
    Ok(HurstResult {
        h: slope.clamp(0.0, 1.0),
        clamped,
        fit_points,
        fit_r2: r2,
    })
}

/// Hurst of a bit series via its ±1 mapping.
pub fn hurst_of_bits(bits: &Bits) -> Result<HurstResult, ComplexityError> {
    let series: Vec<f64> = bits.iter().map(|b| if b { 1.0 } else { -1.0 }).collect();
    hurst_exponent(&series)
}

/// OLS fit of y on x; returns (slope, intercept, r2).
pub(crate) fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    (slope, intercept, r2)
}

/// Complexity-vs-entropy check: for ergodic sources the entropy bounds the
/// normalized complexity from below, so `kc >= h_min` is expected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZurekCheck {
    pub kc: f64,
    pub h_min: f64,
    pub satisfied: bool,
}

pub fn zurek_check(bits: &Bits) -> Result<ZurekCheck, ComplexityError> {
    let c = kc(bits)?;
    let e = min_entropy(bits)?;
    Ok(ZurekCheck {
        kc: c.kc,
        h_min: e.h_min,
        satisfied: c.kc >= e.h_min,
    })
}
