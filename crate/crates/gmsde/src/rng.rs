//! Counter-based random number generation.
//!
//! Every draw is a pure function of a 64-bit key and a counter, so paths can
//! be generated in any order (or in parallel) and still reproduce bit-for-bit.
//! The mixer is the splitmix64 finalizer; not cryptographically secure.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a full-period 64-bit permutation with good avalanche.
#[inline(always)]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a sequence of words into one well-mixed key.
///
/// Word position enters the accumulator, so permuted inputs map to
/// different keys.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3u64;
    for (i, &w) in words.iter().enumerate() {
        acc = mix(acc ^ w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
    }
    acc
}

#[inline(always)]
fn bits(key: u64, ctr: u64) -> u64 {
    mix(key ^ ctr.wrapping_mul(GOLDEN).wrapping_add(0x452A_F8A2_31D5_0E4Du64))
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline(always)]
pub fn uniform01(key: u64, ctr: u64) -> f64 {
    (bits(key, ctr) >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Uniform in `(0, 1]`; never returns zero, safe under `ln`.
#[inline(always)]
fn uniform_open01(key: u64, ctr: u64) -> f64 {
    ((bits(key, ctr) >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Two independent standard normals from one Box-Muller transform.
///
/// Counter `ctr` indexes the pair; the two underlying uniforms use
/// sub-counters `2*ctr` and `2*ctr + 1`.
#[inline(always)]
pub fn normal_pair(key: u64, ctr: u64) -> (f64, f64) {
    let u1 = uniform_open01(key, 2 * ctr);
    let u2 = uniform01(key, 2 * ctr + 1);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Single standard normal, discarding the second of the pair.
#[inline(always)]
pub fn standard_normal(key: u64, ctr: u64) -> f64 {
    normal_pair(key, ctr).0
}
