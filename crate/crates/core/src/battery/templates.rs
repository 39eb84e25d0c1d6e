//! Aperiodic template generation for the non-overlapping template test.

/// A template is aperiodic when no proper shift of it can overlap itself:
/// for every d in 1..m the length-(m-d) suffix differs from the prefix.
/// Matches of such a template at two positions closer than m apart are
/// impossible, which the test's occurrence statistics rely on.
pub fn is_aperiodic(template: &[u8]) -> bool {
    let m = template.len();
    (1..m).all(|d| template[d..] != template[..m - d])
}

/// All aperiodic binary templates of length `m`, MSB-first, ascending.
/// For m = 9 there are 148 of them.
pub fn aperiodic_templates(m: usize) -> Vec<Vec<u8>> {
    assert!((1..=16).contains(&m), "template length out of range");
    let mut out = Vec::new();
    for v in 0u32..(1 << m) {
        let bits: Vec<u8> = (0..m).map(|j| ((v >> (m - 1 - j)) & 1) as u8).collect();
        if is_aperiodic(&bits) {
            out.push(bits);
        }
    }
    out
}
