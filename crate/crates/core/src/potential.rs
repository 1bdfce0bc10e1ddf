//! External field sequences for the XY chain.
//!
//! The Fibonacci field is the circle-map coding
//! `V_j = λ·χ[1-φ⁻¹, 1)(jφ⁻¹ + ω mod 1)`, evaluated through the floor
//! difference `⌊(j+1)φ⁻¹ + ω⌋ - ⌊jφ⁻¹ + ω⌋`. The floors are computed in
//! double-double arithmetic and, when the rotation lands within rounding
//! distance of an integer, decided exactly with big integers.

use num_bigint::BigInt;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The golden mean `(1 + √5) / 2`.
pub const PHI: f64 = 1.618_033_988_749_895;

/// `φ⁻¹ = φ - 1`, split as a double-double `INV_PHI + INV_PHI_LO`.
pub const INV_PHI: f64 = 0.618_033_988_749_894_9;
const INV_PHI_LO: f64 = -5.432_115_203_682_506e-17;

/// Largest site index handled by the floating-point fast path.
const FAST_PATH_MAX: u64 = 1 << 50;
/// Rotations closer than this to an integer go through the exact path.
const EXACT_GUARD: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    #[default]
    Fibonacci,
    Free,
    Periodic,
    IidRandom,
    RandomDimer,
}

impl PotentialKind {
    pub fn name(self) -> &'static str {
        match self {
            PotentialKind::Fibonacci => "fibonacci",
            PotentialKind::Free => "free",
            PotentialKind::Periodic => "periodic",
            PotentialKind::IidRandom => "iid_random",
            PotentialKind::RandomDimer => "random_dimer",
        }
    }
}

/// Declarative description of a field family.
///
/// `iid_random` draws `±λ` independently per site; `random_dimer` draws
/// `±λ` per adjacent pair `(2i-1, 2i)`. `periodic` repeats `period_values`
/// and ignores `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub lambda: f64,
    pub omega: f64,
    pub seed: u64,
    pub period_values: Vec<f64>,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec {
            kind: PotentialKind::Fibonacci,
            lambda: 8.0,
            omega: 0.0,
            seed: 0,
            period_values: Vec::new(),
        }
    }
}

impl PotentialSpec {
    pub fn fibonacci(lambda: f64, omega: f64) -> Self {
        PotentialSpec { kind: PotentialKind::Fibonacci, lambda, omega, ..Default::default() }
    }

    pub fn free() -> Self {
        PotentialSpec { kind: PotentialKind::Free, lambda: 0.0, ..Default::default() }
    }

    pub fn periodic(values: Vec<f64>) -> Self {
        PotentialSpec {
            kind: PotentialKind::Periodic,
            lambda: 0.0,
            period_values: values,
            ..Default::default()
        }
    }

    pub fn iid_random(lambda: f64, seed: u64) -> Self {
        PotentialSpec { kind: PotentialKind::IidRandom, lambda, seed, ..Default::default() }
    }

    pub fn random_dimer(lambda: f64, seed: u64) -> Self {
        PotentialSpec { kind: PotentialKind::RandomDimer, lambda, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::domain(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        check_phase(self.omega)?;
        if self.kind == PotentialKind::Periodic {
            if self.period_values.is_empty() {
                return Err(Error::domain("periodic potential needs nonempty period_values"));
            }
            if self.period_values.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("period_values must be finite"));
            }
        }
        Ok(())
    }

    /// Largest `|V_j|` any sequence of this family can contain.
    pub fn sup_norm(&self) -> f64 {
        match self.kind {
            PotentialKind::Periodic => self.period_values.iter().fold(0.0, |m, v| m.max(v.abs())),
            PotentialKind::Free => 0.0,
            _ => self.lambda,
        }
    }
}

/// A finite field sequence; `values[0]` is site 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSequence {
    pub values: Vec<f64>,
    pub spec: PotentialSpec,
}

impl PotentialSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at 1-based site `j`.
    pub fn site(&self, j: usize) -> f64 {
        self.values[j - 1]
    }
}

fn check_phase(omega: f64) -> Result<()> {
    if (0.0..1.0).contains(&omega) {
        Ok(())
    } else {
        Err(Error::domain(format!("phase omega must lie in [0,1), got {omega}")))
    }
}

/// Exact test of `j·φ⁻¹ + ω ≥ m`.
///
/// With `ω = a·2^{-e}` this is `j√5·2^e ≥ (2m + j)·2^e - 2a`, decided by
/// comparing squares. Equality is impossible because `√5` is irrational.
fn rotation_at_least(j: u64, omega: f64, m: i64) -> bool {
    let (a, e) = dyadic(omega);
    let j = BigInt::from(j);
    let scale = BigInt::from(1u8) << e;
    let rhs = (BigInt::from(2 * m) + &j) * &scale - (BigInt::from(a) << 1usize);
    if rhs.sign() != num_bigint::Sign::Plus {
        return true;
    }
    let lhs_sq = BigInt::from(5u8) * &j * &j * &scale * &scale;
    lhs_sq > &rhs * &rhs
}

/// Writes a finite `ω ∈ [0,1)` as `a / 2^e`.
fn dyadic(omega: f64) -> (u64, usize) {
    if omega == 0.0 {
        return (0, 0);
    }
    let bits = omega.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    // omega < 1 so exp < 0
    (mant, (-exp) as usize)
}

/// Double-double evaluation of `j·φ⁻¹ + ω`, returned as integer part plus
/// a fractional remainder that may fall slightly outside `[0,1)`.
fn rotation_split(j: u64, omega: f64) -> (i64, f64) {
    let jf = j as f64;
    let p = jf * INV_PHI;
    let pe = jf.mul_add(INV_PHI, -p);
    let q = jf * INV_PHI_LO;
    let m = p.floor();
    let frac = (p - m) + omega + (pe + q);
    (m as i64, frac)
}

/// `⌊j·φ⁻¹ + ω⌋`, exact.
pub fn rotation_floor(j: u64, omega: f64) -> i64 {
    if j <= FAST_PATH_MAX {
        let (m, frac) = rotation_split(j, omega);
        let nearest = frac.round();
        if (frac - nearest).abs() > EXACT_GUARD {
            return m + frac.floor() as i64;
        }
        let mut g = m + nearest as i64;
        while !rotation_at_least(j, omega, g) {
            g -= 1;
        }
        while rotation_at_least(j, omega, g + 1) {
            g += 1;
        }
        return g;
    }
    let mut g = (j as f64 * INV_PHI + omega).floor() as i64;
    while !rotation_at_least(j, omega, g) {
        g -= 1;
    }
    while rotation_at_least(j, omega, g + 1) {
        g += 1;
    }
    g
}

/// Fibonacci field value `V_j(ω)` at site `j ≥ 1`.
pub fn fib_value(j: u64, lambda: f64, omega: f64) -> Result<f64> {
    check_phase(omega)?;
    if j == 0 {
        return Err(Error::domain("site index must be >= 1"));
    }
    let hit = rotation_floor(j + 1, omega) - rotation_floor(j, omega);
    Ok(if hit == 1 { lambda } else { 0.0 })
}

/// The phase `ω_l = ω + l·φ⁻¹ mod 1`, so that `V_{j+l}(ω) = V_j(ω_l)`.
pub fn shift_phase(omega: f64, l: u64) -> Result<f64> {
    check_phase(omega)?;
    if l == 0 {
        return Ok(omega);
    }
    let (_, frac) = rotation_split(l, omega);
    let mut r = frac - frac.floor();
    if r >= 1.0 {
        r = 1.0 - f64::EPSILON / 2.0;
    }
    Ok(r)
}

/// Prefix of length `F_k` of the infinite Fibonacci word over `{a, b}`
/// (substitution `a → ab`, `b → a`), with `F_1 = F_2 = 1`.
pub fn fib_word(k: usize) -> Result<String> {
    if k == 0 {
        return Err(Error::domain("word generation must be >= 1"));
    }
    let mut word = String::from("a");
    for _ in 2..k {
        word = word
            .chars()
            .map(|c| if c == 'a' { "ab" } else { "a" })
            .collect();
    }
    Ok(word)
}

/// Random-kind stream tags, so the same seed gives unrelated site and pair draws.
const STREAM_IID: u64 = 1;
const STREAM_DIMER: u64 = 2;
const STREAM_PHASE: u64 = 3;
pub(crate) const STREAM_ENSEMBLE: u64 = 4;

/// Counter-based draw: the `index`-th 64-bit word of the keyed ChaCha stream.
pub(crate) fn keyed_u64(seed: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

fn keyed_sign(seed: u64, stream: u64, index: u64) -> f64 {
    if keyed_u64(seed, stream, index) >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `count` phases uniform on `[0, 1)`, reproducible from `seed`.
pub fn random_phases(seed: u64, count: usize) -> Vec<f64> {
    (0..count as u64)
        .map(|i| (keyed_u64(seed, STREAM_PHASE, i) >> 11) as f64 * 2f64.powi(-53))
        .collect()
}

/// Field values at sites `1..=n`.
pub fn generate(spec: &PotentialSpec, n: usize) -> Result<PotentialSequence> {
    if n == 0 {
        return Err(Error::domain("sequence length must be >= 1"));
    }
    spec.validate()?;
    let lambda = spec.lambda;
    let values = match spec.kind {
        PotentialKind::Free => vec![0.0; n],
        PotentialKind::Fibonacci => {
            // consecutive floors are shared between neighbouring sites
            let mut prev = rotation_floor(1, spec.omega);
            (1..=n as u64)
                .map(|j| {
                    let next = rotation_floor(j + 1, spec.omega);
                    let v = if next - prev == 1 { lambda } else { 0.0 };
                    prev = next;
                    v
                })
                .collect()
        }
        PotentialKind::Periodic => {
            let p = &spec.period_values;
            (0..n).map(|i| p[i % p.len()]).collect()
        }
        PotentialKind::IidRandom => (0..n as u64)
            .map(|i| lambda * keyed_sign(spec.seed, STREAM_IID, i))
            .collect(),
        PotentialKind::RandomDimer => (0..n as u64)
            .map(|i| lambda * keyed_sign(spec.seed, STREAM_DIMER, i / 2))
            .collect(),
    };
    Ok(PotentialSequence { values, spec: spec.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: the circle map with the fractional part taken in
    /// 128-bit fixed point, `φ⁻¹ ≈ 0x9E3779B97F4A7C15F39CC0605CEDC834 / 2^128`.
    fn fixed_point_value(j: u64, omega: f64) -> bool {
        const INV_PHI_Q128: u128 = 0x9E37_79B9_7F4A_7C15_F39C_C060_5CED_C834;
        const ONE_MINUS_Q128: u128 = u128::MAX - INV_PHI_Q128 + 1;
        let om = (omega * 2f64.powi(64)) as u128;
        let x = (j as u128)
            .wrapping_mul(INV_PHI_Q128)
            .wrapping_add(om << 64);
        x >= ONE_MINUS_Q128
    }

    #[test]
    fn first_sites_at_zero_phase() {
        let v: Vec<f64> = (1..=8).map(|j| fib_value(j, 1.0, 0.0).unwrap()).collect();
        assert_eq!(v, vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(fib_value(2, 3.0, 0.0).unwrap(), 0.0);
        for j in [1, 17, 1000, 123_456] {
            assert_eq!(fib_value(j, 0.0, 0.37).unwrap(), 0.0);
        }
    }

    #[test]
    fn agrees_with_fixed_point_circle_map() {
        for &omega in &[0.0, 0.3, 0.123_456_789, 0.999_999] {
            for j in (1..200_000u64).chain([99_999_989, 100_000_007, 433_494_437]) {
                let ours = fib_value(j, 1.0, omega).unwrap() == 1.0;
                assert_eq!(ours, fixed_point_value(j, omega), "j={j} omega={omega}");
            }
        }
    }

    #[test]
    fn exact_path_matches_fast_path() {
        for j in 1..2000u64 {
            for &omega in &[0.0, 0.25, 0.7] {
                let fast = rotation_floor(j, omega);
                let mut g = fast;
                while !rotation_at_least(j, omega, g) {
                    g -= 1;
                }
                while rotation_at_least(j, omega, g + 1) {
                    g += 1;
                }
                assert_eq!(fast, g);
            }
        }
    }

    #[test]
    fn rejects_bad_phase() {
        assert!(fib_value(1, 1.0, 1.0).is_err());
        assert!(fib_value(1, 1.0, -0.1).is_err());
        assert!(shift_phase(1.5, 2).is_err());
    }

    #[test]
    fn words() {
        assert_eq!(fib_word(1).unwrap(), "a");
        assert_eq!(fib_word(2).unwrap(), "a");
        assert_eq!(fib_word(6).unwrap(), "abaababa");
        assert_eq!(fib_word(10).unwrap().len(), 55);
    }

    #[test]
    fn word_matches_circle_map() {
        let n = 6765; // F_20
        let seq = generate(&PotentialSpec::fibonacci(2.5, 0.0), n).unwrap();
        for k in 1..=20 {
            let w = fib_word(k).unwrap();
            for (c, v) in w.chars().zip(&seq.values) {
                assert_eq!(*v, if c == 'a' { 2.5 } else { 0.0 });
            }
        }
        // no two consecutive b's
        assert!(seq.values.windows(2).all(|w| w[0] != 0.0 || w[1] != 0.0));
    }

    #[test]
    fn shift_phase_values() {
        assert_eq!(shift_phase(0.42, 0).unwrap(), 0.42);
        assert!((shift_phase(0.0, 1).unwrap() - 0.618_033_988_749_894_8).abs() < 1e-15);
        let w3 = shift_phase(0.0, 3).unwrap();
        for j in 1..=10_000 {
            assert_eq!(fib_value(j + 3, 1.0, 0.0).unwrap(), fib_value(j, 1.0, w3).unwrap());
        }
    }

    #[test]
    fn generate_examples() {
        assert_eq!(generate(&PotentialSpec::free(), 4).unwrap().values, vec![0.0; 4]);
        assert_eq!(
            generate(&PotentialSpec::fibonacci(8.0, 0.0), 5).unwrap().values,
            vec![8.0, 0.0, 8.0, 8.0, 0.0]
        );
        let d = generate(&PotentialSpec::random_dimer(0.5, 7), 6).unwrap().values;
        for pair in d.chunks(2) {
            assert_eq!(pair[0], pair[1]);
            assert_eq!(pair[0].abs(), 0.5);
        }
        assert!(generate(&PotentialSpec::free(), 0).is_err());
        let p = generate(&PotentialSpec::periodic(vec![1.0, -2.0, 3.0]), 7).unwrap().values;
        assert_eq!(p, vec![1.0, -2.0, 3.0, 1.0, -2.0, 3.0, 1.0]);
        assert!(PotentialSpec::periodic(vec![]).validate().is_err());
        let neg = PotentialSpec { lambda: -1.0, ..Default::default() };
        assert!(generate(&neg, 3).is_err());
    }

    #[test]
    fn random_kinds_are_deterministic_and_distinct() {
        let a = generate(&PotentialSpec::iid_random(1.0, 11), 64).unwrap();
        let b = generate(&PotentialSpec::iid_random(1.0, 11), 64).unwrap();
        let c = generate(&PotentialSpec::iid_random(1.0, 12), 64).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        // unpaired: some adjacent pair differs
        assert!(a.values.chunks(2).any(|p| p[0] != p[1]));
    }

    #[test]
    fn spec_json_defaults() {
        let s: PotentialSpec = serde_json::from_str(r#"{"kind": "random_dimer", "lambda": 0.5}"#).unwrap();
        assert_eq!(s.kind, PotentialKind::RandomDimer);
        assert_eq!(s.seed, 0);
        assert_eq!(s.omega, 0.0);
        let bad: std::result::Result<PotentialSpec, _> = serde_json::from_str(r#"{"lambdaa": 1}"#);
        assert!(bad.is_err());
        let round: PotentialSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(round, s);
    }
}
