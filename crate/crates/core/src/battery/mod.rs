//! Statistical randomness test battery, a nine-test subset of NIST SP 800-22.
//!
//! Decision rule: a series is rejected when at least one *applicable* test
//! fails at level alpha. Tests that a series is too short for are reported
//! inapplicable and excluded from the decision. Each test's p-values come
//! from the SP 800-22 formulas (erfc and regularized incomplete gamma).

pub mod special;
pub mod templates;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use special::{erfc, normal_cdf};
use templates::{aperiodic_templates, is_aperiodic};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BatteryError {
    #[error("empty series")]
    EmptySeries,
    #[error("bad block length {0}")]
    BadBlockLen(usize),
    #[error("bad pattern length {0}")]
    BadM(usize),
    #[error("template set contains a non-aperiodic template")]
    BadTemplateSet,
}

/// Outcome of one test on one series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(rename = "test")]
    pub test_name: String,
    pub p_values: Vec<f64>,
    /// False when the series does not meet the test's input-size needs;
    /// inapplicable results are excluded from the rejection decision.
    pub applicable: bool,
    pub pass: bool,
    pub detail: String,
}

impl TestResult {
    fn inapplicable(name: &str, detail: String) -> Self {
        TestResult {
            test_name: name.into(),
            p_values: Vec::new(),
            applicable: false,
            pass: true,
            detail,
        }
    }

    fn from_p_values(name: &str, p_values: Vec<f64>, alpha: f64, detail: String) -> Self {
        let pass = p_values.iter().all(|&p| p >= alpha);
        TestResult {
            test_name: name.into(),
            p_values,
            applicable: true,
            pass,
            detail,
        }
    }
}

/// Battery verdict for one series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryReport {
    pub results: Vec<TestResult>,
    pub alpha: f64,
    pub rejected: bool,
    pub series_length: usize,
}

/// Battery parameters. `force` bypasses the input-size gates and exists for
/// oracle tests against short reference vectors; production runs keep it off.
#[derive(Debug, Clone)]
pub struct BatteryConfig {
    pub alpha: f64,
    pub serial_m: usize,
    pub approx_entropy_m: usize,
    pub template_m: usize,
    /// Block length for the block-frequency test; `None` picks
    /// `max(128, n/100)`.
    pub block_len: Option<usize>,
    pub force: bool,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            serial_m: 5,
            approx_entropy_m: 3,
            template_m: 9,
            block_len: None,
            force: false,
        }
    }
}

use special::igamc;

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    normal_cdf(x)
}

// ---------------------------------------------------------------------------
// 1. Frequency (monobit)
// ---------------------------------------------------------------------------

pub fn frequency_p(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let s: i64 = bits.iter().map(|&b| if b == 1 { 1 } else { -1 }).sum();
    erfc((s as f64).abs() / n.sqrt() / std::f64::consts::SQRT_2)
}

pub fn test_frequency(bits: &Bits, alpha: f64, force: bool) -> TestResult {
    let name = "frequency";
    let n = bits.len();
    if n < 100 && !force {
        return TestResult::inapplicable(name, format!("needs n >= 100, got {n}"));
    }
    let raw = bits.to_bit_bytes();
    let p = frequency_p(&raw);
    let ones = bits.count_ones();
    TestResult::from_p_values(name, vec![p], alpha, format!("ones {ones}/{n}"))
}

// ---------------------------------------------------------------------------
// 2. Block frequency
// ---------------------------------------------------------------------------

pub fn block_frequency_p(bits: &[u8], m: usize) -> f64 {
    let n = bits.len();
    let blocks = n / m;
    let mut chi2 = 0.0;
    for b in 0..blocks {
        let ones: usize = bits[b * m..(b + 1) * m].iter().map(|&x| x as usize).sum();
        let pi = ones as f64 / m as f64;
        chi2 += (pi - 0.5) * (pi - 0.5);
    }
    chi2 *= 4.0 * m as f64;
    igamc(blocks as f64 / 2.0, chi2 / 2.0)
}

pub fn test_block_frequency(
    bits: &Bits,
    block_len: usize,
    alpha: f64,
    force: bool,
) -> Result<TestResult, BatteryError> {
    let name = "block_frequency";
    if block_len < 1 {
        return Err(BatteryError::BadBlockLen(block_len));
    }
    let n = bits.len();
    if (n < 100 || block_len < 20 || n / block_len < 1) && !force {
        return Ok(TestResult::inapplicable(
            name,
            format!("needs n >= 100 and M >= 20, got n={n} M={block_len}"),
        ));
    }
    if n / block_len < 1 {
        return Err(BatteryError::BadBlockLen(block_len));
    }
    let raw = bits.to_bit_bytes();
    let p = block_frequency_p(&raw, block_len);
    Ok(TestResult::from_p_values(
        name,
        vec![p],
        alpha,
        format!("M={block_len} N={}", n / block_len),
    ))
}

// ---------------------------------------------------------------------------
// 3. Runs
// ---------------------------------------------------------------------------

/// Returns `None` when the frequency prerequisite |pi - 1/2| >= 2/sqrt(n)
/// fails; SP 800-22 then scores the test 0.
pub fn runs_p(bits: &[u8]) -> Option<f64> {
    let n = bits.len();
    let nf = n as f64;
    let pi = bits.iter().map(|&b| b as usize).sum::<usize>() as f64 / nf;
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        return None;
    }
    let v = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let num = (v as f64 - 2.0 * nf * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi);
    Some(erfc(num / den))
}

pub fn test_runs(bits: &Bits, alpha: f64, force: bool) -> TestResult {
    let name = "runs";
    let n = bits.len();
    if n < 100 && !force {
        return TestResult::inapplicable(name, format!("needs n >= 100, got {n}"));
    }
    let raw = bits.to_bit_bytes();
    match runs_p(&raw) {
        Some(p) => TestResult::from_p_values(name, vec![p], alpha, String::new()),
        None => TestResult::from_p_values(
            name,
            vec![0.0],
            alpha,
            "frequency prerequisite failed".into(),
        ),
    }
}

// ---------------------------------------------------------------------------
// 4. Longest run of ones
// ---------------------------------------------------------------------------

struct LongestRunTable {
    block_len: usize,
    min_class: u32,
    probs: &'static [f64],
}

fn longest_run_table(n: usize) -> LongestRunTable {
    if n >= 750_000 {
        LongestRunTable {
            block_len: 10_000,
            min_class: 10,
            probs: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
        }
    } else if n >= 6272 {
        LongestRunTable {
            block_len: 128,
            min_class: 4,
            probs: &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124],
        }
    } else {
        LongestRunTable {
            block_len: 8,
            min_class: 1,
            probs: &[0.2148, 0.3672, 0.2305, 0.1875],
        }
    }
}

pub fn longest_run_p(bits: &[u8]) -> (f64, usize) {
    let n = bits.len();
    let table = longest_run_table(n);
    let m = table.block_len;
    let k = table.probs.len() - 1;
    let blocks = n / m;
    let mut nu = vec![0u64; k + 1];
    for b in 0..blocks {
        let mut longest = 0u32;
        let mut run = 0u32;
        for &bit in &bits[b * m..(b + 1) * m] {
            if bit == 1 {
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
            }
        }
        let class = (longest.saturating_sub(table.min_class)).min(k as u32) as usize;
        nu[class] += 1;
    }
    let nf = blocks as f64;
    let chi2: f64 = nu
        .iter()
        .zip(table.probs)
        .map(|(&obs, &pi)| {
            let e = nf * pi;
            (obs as f64 - e) * (obs as f64 - e) / e
        })
        .sum();
    (igamc(k as f64 / 2.0, chi2 / 2.0), m)
}

pub fn test_longest_run(bits: &Bits, alpha: f64, force: bool) -> TestResult {
    let name = "longest_run";
    let n = bits.len();
    if n < 128 && !force {
        return TestResult::inapplicable(name, format!("needs n >= 128, got {n}"));
    }
    let raw = bits.to_bit_bytes();
    let (p, m) = longest_run_p(&raw);
    TestResult::from_p_values(name, vec![p], alpha, format!("M={m}"))
}

// ---------------------------------------------------------------------------
// 5. Discrete Fourier transform (spectral)
// ---------------------------------------------------------------------------

pub fn dft_p(bits: &[u8]) -> f64 {
    let n = bits.len();
    let mut buf: Vec<Complex<f64>> = bits
        .iter()
        .map(|&b| Complex::new(if b == 1 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nf = n as f64;
    let threshold = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let below = buf[..n / 2].iter().filter(|c| c.norm() < threshold).count();
    let n0 = 0.95 * nf / 2.0;
    let d = (below as f64 - n0) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    erfc(d.abs() / std::f64::consts::SQRT_2)
}

pub fn test_dft(bits: &Bits, alpha: f64, force: bool) -> TestResult {
    let name = "dft";
    let n = bits.len();
    if n < 1000 && !force {
        return TestResult::inapplicable(name, format!("needs n >= 1000, got {n}"));
    }
    let raw = bits.to_bit_bytes();
    let p = dft_p(&raw);
    TestResult::from_p_values(name, vec![p], alpha, String::new())
}

// ---------------------------------------------------------------------------
// 6. Non-overlapping template matching
// ---------------------------------------------------------------------------

/// Occurrences of `template` in `block` with the scan jumping one whole
/// template length past each match.
pub fn template_count(block: &[u8], template: &[u8]) -> usize {
    let m = template.len();
    if block.len() < m {
        return 0;
    }
    let mut count = 0;
    let mut i = 0;
    while i + m <= block.len() {
        if &block[i..i + m] == template {
            count += 1;
            i += m;
        } else {
            i += 1;
        }
    }
    count
}

/// One p-value per template: chi-square of per-block occurrence counts
/// (8 blocks) against the theoretical mean and variance.
pub fn template_ps(bits: &[u8], templates: &[Vec<u8>]) -> Vec<f64> {
    const N_BLOCKS: usize = 8;
    let n = bits.len();
    let block_len = n / N_BLOCKS;
    let m = templates.first().map(|t| t.len()).unwrap_or(0);
    let mf = m as f64;
    let mu = (block_len as f64 - mf + 1.0) / 2f64.powf(mf);
    let var = block_len as f64 * (2f64.powf(-mf) - (2.0 * mf - 1.0) * 2f64.powf(-2.0 * mf));
    templates
        .iter()
        .map(|t| {
            let chi2: f64 = (0..N_BLOCKS)
                .map(|b| {
                    let w = template_count(&bits[b * block_len..(b + 1) * block_len], t) as f64;
                    (w - mu) * (w - mu) / var
                })
                .sum();
            igamc(N_BLOCKS as f64 / 2.0, chi2 / 2.0)
        })
        .collect()
}

/// All-templates variant. Per-template p-values are recorded individually;
/// the test-level verdict applies a Bonferroni-corrected threshold
/// alpha / #templates so the test as a whole stays an alpha-level decision.
pub fn test_non_overlapping_template(
    bits: &Bits,
    template_len: usize,
    alpha: f64,
    force: bool,
) -> Result<TestResult, BatteryError> {
    let templates = aperiodic_templates(template_len);
    test_non_overlapping_template_with(bits, &templates, alpha, force)
}

pub fn test_non_overlapping_template_with(
    bits: &Bits,
    templates: &[Vec<u8>],
    alpha: f64,
    force: bool,
) -> Result<TestResult, BatteryError> {
    let name = "non_overlapping_template";
    if templates.is_empty() || templates.iter().any(|t| !is_aperiodic(t)) {
        return Err(BatteryError::BadTemplateSet);
    }
    let n = bits.len();
    if n < 100_000 && !force {
        return Ok(TestResult::inapplicable(
            name,
            format!("needs n >= 100000, got {n}"),
        ));
    }
    let raw = bits.to_bit_bytes();
    let p_values = template_ps(&raw, templates);
    let level = alpha / templates.len() as f64;
    let failures = p_values.iter().filter(|&&p| p < level).count();
    let worst = p_values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(TestResult {
        test_name: name.into(),
        p_values,
        applicable: true,
        pass: failures == 0,
        detail: format!(
            "{} templates, per-template level {:.2e}, min p {:.3e}",
            templates.len(),
            level,
            worst
        ),
    })
}

// ---------------------------------------------------------------------------
// 7. Serial
// ---------------------------------------------------------------------------

/// psi^2 statistic for overlapping m-bit patterns with wrap-around counting.
pub fn psi_squared(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mut counts = vec![0u64; 1 << m];
    let mask = (1usize << m) - 1;
    let mut v = 0usize;
    // prime the first m-1 bits
    for &b in bits.iter().take(m - 1) {
        v = ((v << 1) | b as usize) & mask;
    }
    for i in 0..n {
        let b = bits[(i + m - 1) % n];
        v = ((v << 1) | b as usize) & mask;
        counts[v] += 1;
    }
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    (1u64 << m) as f64 / n as f64 * sum_sq - n as f64
}

pub fn serial_ps(bits: &[u8], m: usize) -> (f64, f64) {
    let psi_m = psi_squared(bits, m);
    let psi_m1 = psi_squared(bits, m - 1);
    let psi_m2 = psi_squared(bits, m - 2);
    let d1 = psi_m - psi_m1;
    let d2 = psi_m - 2.0 * psi_m1 + psi_m2;
    let p1 = igamc(2f64.powi(m as i32 - 2), d1 / 2.0);
    let p2 = igamc(2f64.powi(m as i32 - 3), d2 / 2.0);
    (p1, p2)
}

pub fn test_serial(
    bits: &Bits,
    m: usize,
    alpha: f64,
    force: bool,
) -> Result<TestResult, BatteryError> {
    let name = "serial";
    if !(3..=24).contains(&m) {
        return Err(BatteryError::BadM(m));
    }
    let n = bits.len();
    let limit = (n.max(2) as f64).log2().floor() as usize;
    if (limit < 3 || m >= limit - 2) && !force {
        return Ok(TestResult::inapplicable(
            name,
            format!("needs m < floor(log2 n) - 2, got m={m} n={n}"),
        ));
    }
    let raw = bits.to_bit_bytes();
    let (p1, p2) = serial_ps(&raw, m);
    Ok(TestResult::from_p_values(
        name,
        vec![p1, p2],
        alpha,
        format!("m={m}"),
    ))
}

// ---------------------------------------------------------------------------
// 8. Approximate entropy
// ---------------------------------------------------------------------------

pub fn approx_entropy_p(bits: &[u8], m: usize) -> (f64, f64) {
    let n = bits.len();
    let phi_stat = |mm: usize| -> f64 {
        if mm == 0 {
            return 0.0;
        }
        let mut counts = vec![0u64; 1 << mm];
        let mask = (1usize << mm) - 1;
        let mut v = 0usize;
        for &b in bits.iter().take(mm - 1) {
            v = ((v << 1) | b as usize) & mask;
        }
        for i in 0..n {
            let b = bits[(i + mm - 1) % n];
            v = ((v << 1) | b as usize) & mask;
            counts[v] += 1;
        }
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n as f64;
                p * p.ln()
            })
            .sum()
    };
    let apen = phi_stat(m) - phi_stat(m + 1);
    let chi2 = 2.0 * n as f64 * (std::f64::consts::LN_2 - apen);
    (igamc(2f64.powi(m as i32 - 1), chi2 / 2.0), apen)
}

pub fn test_approx_entropy(
    bits: &Bits,
    m: usize,
    alpha: f64,
    force: bool,
) -> Result<TestResult, BatteryError> {
    let name = "approx_entropy";
    if !(1..=24).contains(&m) {
        return Err(BatteryError::BadM(m));
    }
    let n = bits.len();
    let limit = (n.max(2) as f64).log2().floor() as usize;
    if (limit < 6 || m >= limit - 5) && !force {
        return Ok(TestResult::inapplicable(
            name,
            format!("needs m < floor(log2 n) - 5, got m={m} n={n}"),
        ));
    }
    let raw = bits.to_bit_bytes();
    let (p, apen) = approx_entropy_p(&raw, m);
    Ok(TestResult::from_p_values(
        name,
        vec![p],
        alpha,
        format!("m={m} ApEn={apen:.6}"),
    ))
}

// ---------------------------------------------------------------------------
// 9. Cumulative sums
// ---------------------------------------------------------------------------

fn cusum_p_from_z(z: f64, n: usize) -> f64 {
    let nf = n as f64;
    let sn = nf.sqrt();
    let mut sum1 = 0.0;
    let k_lo = ((-nf / z + 1.0) / 4.0).floor() as i64;
    let k_hi = ((nf / z - 1.0) / 4.0).floor() as i64;
    for k in k_lo..=k_hi {
        let kf = k as f64;
        sum1 += phi((4.0 * kf + 1.0) * z / sn) - phi((4.0 * kf - 1.0) * z / sn);
    }
    let mut sum2 = 0.0;
    let k_lo = ((-nf / z - 3.0) / 4.0).floor() as i64;
    for k in k_lo..=k_hi {
        let kf = k as f64;
        sum2 += phi((4.0 * kf + 3.0) * z / sn) - phi((4.0 * kf + 1.0) * z / sn);
    }
    (1.0 - sum1 + sum2).clamp(0.0, 1.0)
}

/// (forward, backward) p-values of the maximum partial-sum excursion.
pub fn cusum_ps(bits: &[u8]) -> (f64, f64) {
    let n = bits.len();
    let excursion = |iter: &mut dyn Iterator<Item = i64>| -> f64 {
        let mut s = 0i64;
        let mut z = 0i64;
        for x in iter {
            s += x;
            z = z.max(s.abs());
        }
        z as f64
    };
    let zf = excursion(&mut bits.iter().map(|&b| if b == 1 { 1 } else { -1 }));
    let zb = excursion(&mut bits.iter().rev().map(|&b| if b == 1 { 1 } else { -1 }));
    (cusum_p_from_z(zf, n), cusum_p_from_z(zb, n))
}

pub fn test_cusum(bits: &Bits, alpha: f64, force: bool) -> TestResult {
    let name = "cusum";
    let n = bits.len();
    if n < 100 && !force {
        return TestResult::inapplicable(name, format!("needs n >= 100, got {n}"));
    }
    let raw = bits.to_bit_bytes();
    let (pf, pb) = cusum_ps(&raw);
    TestResult::from_p_values(name, vec![pf, pb], alpha, String::new())
}

// ---------------------------------------------------------------------------
// Battery
// ---------------------------------------------------------------------------

/// Runs the nine tests with per-length applicability gating and the
/// reject-if-any-applicable-test-fails rule.
pub fn run_battery(bits: &Bits, config: &BatteryConfig) -> Result<BatteryReport, BatteryError> {
    let n = bits.len();
    if n == 0 {
        return Err(BatteryError::EmptySeries);
    }
    let alpha = config.alpha;
    let force = config.force;
    let block_len = config.block_len.unwrap_or_else(|| 128.max(n / 100));

    let results = vec![
        test_frequency(bits, alpha, force),
        test_block_frequency(bits, block_len, alpha, force)?,
        test_runs(bits, alpha, force),
        test_longest_run(bits, alpha, force),
        test_dft(bits, alpha, force),
        test_non_overlapping_template(bits, config.template_m, alpha, force)?,
        test_serial(bits, config.serial_m, alpha, force)?,
        test_approx_entropy(bits, config.approx_entropy_m, alpha, force)?,
        test_cusum(bits, alpha, force),
    ];
    let rejected = results.iter().any(|r| r.applicable && !r.pass);
    Ok(BatteryReport {
        results,
        alpha,
        rejected,
        series_length: n,
    })
}
