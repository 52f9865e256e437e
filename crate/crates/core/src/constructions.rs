//! Points of a frequency set with slowly growing digits, and the Cantor-like
//! subsets obtained by forcing huge digits at square positions.

use std::fmt::Write as _;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Roots;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::cf::{CylinderWord, Recursion};
use crate::error::{Error, Result};
use crate::markov::FrequencyVector;
use crate::numeric::{format_sig, ksum, ln_biguint};

/// Largest digit the seed-point sampler tabulates.
pub const SEED_DIGIT_CAP: u64 = 10_000_000;

/// A nondecreasing, unbounded sequence of positive integers `c_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GrowthSequence {
    /// `c_n = n`.
    Linear,
    /// `c_n = ceil(scale * n^exponent)`.
    Power { scale: f64, exponent: f64 },
    /// `c_n = ceil(scale * ln(n + 1))`.
    Log { scale: f64 },
}

impl GrowthSequence {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            GrowthSequence::Linear => true,
            GrowthSequence::Power { scale, exponent } => {
                scale > 0.0 && exponent > 0.0 && scale.is_finite()
            }
            GrowthSequence::Log { scale } => scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{self:?} is not an increasing unbounded rule"
            )))
        }
    }

    /// `c_n`, at least 1.
    pub fn value(&self, n: u64) -> u64 {
        let x = n as f64;
        let raw = match *self {
            GrowthSequence::Linear => return n.max(1),
            GrowthSequence::Power { scale, exponent } => scale * x.powf(exponent),
            GrowthSequence::Log { scale } => scale * x.ln_1p(),
        };
        (raw.ceil().min(u64::MAX as f64) as u64).max(1)
    }
}

/// A word of length `n` whose `m`-th digit is drawn from `freq` restricted
/// to `{1..c_m}` and renormalized (uniform on `{1..c_m}` when that
/// restriction has no mass). Digits beyond [`SEED_DIGIT_CAP`] are never
/// drawn.
pub fn seed_point(
    freq: &FrequencyVector,
    growth: &GrowthSequence,
    n: usize,
    seed: u64,
) -> Result<CylinderWord> {
    if n == 0 {
        return Err(Error::domain("seed point length must be at least 1"));
    }
    growth.validate()?;
    let top = growth.value(n as u64).min(SEED_DIGIT_CAP);
    let mut cumulative = Vec::with_capacity(top as usize);
    let mut acc = crate::numeric::KahanSum::new();
    for j in 1..=top {
        acc.add(freq.p(j));
        cumulative.push(acc.value());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut digits = Vec::with_capacity(n);
    for m in 1..=n as u64 {
        let c = growth.value(m).min(SEED_DIGIT_CAP) as usize;
        let mass = cumulative[c - 1];
        let d = if mass > 0.0 {
            let u = rng.gen::<f64>() * mass;
            (cumulative[..c].partition_point(|&s| s <= u) + 1).min(c) as u64
        } else {
            rng.gen_range(1..=c as u64)
        };
        digits.push(d);
    }
    CylinderWord::from_small(&digits)
}

/// `b` as an exact dyadic rational `num / 2^shift` (`shift` may be negative).
fn dyadic(b: f64) -> (BigUint, i64) {
    let bits = b.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    (BigUint::from(mant), -e)
}

/// `floor(factor * b^power)` with `b` taken as the exact value of the float.
fn floor_scaled_power(b: f64, power: u64, factor: u32) -> BigUint {
    let (num, shift) = dyadic(b);
    let value = num.pow(power as u32) * factor;
    let total = shift * power as i64;
    if total >= 0 {
        value >> total as u64
    } else {
        value << (-total) as u64
    }
}

/// Integer range `(b^K, 2 b^K]` as inclusive bounds.
pub fn square_digit_range(b: f64, k_squared: u64) -> Result<(BigUint, BigUint)> {
    if !(b > 1.0) || !b.is_finite() {
        return Err(Error::domain(format!(
            "b = {b} must be a finite number > 1"
        )));
    }
    if k_squared > u32::MAX as u64 {
        return Err(Error::domain("square position too large"));
    }
    let lo = floor_scaled_power(b, k_squared, 1) + 1u32;
    let hi = floor_scaled_power(b, k_squared, 2);
    if lo > hi {
        return Err(Error::domain(format!(
            "(b^{k_squared}, 2 b^{k_squared}] holds no integer"
        )));
    }
    Ok((lo, hi))
}

/// A point of the forced-digit set: seed digits `z` and base `b > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FzParameters {
    pub z: CylinderWord,
    pub b: f64,
}

impl FzParameters {
    pub fn new(z: CylinderWord, b: f64) -> Result<Self> {
        if !(b > 1.0) || !b.is_finite() {
            return Err(Error::domain(format!(
                "b = {b} must be a finite number > 1"
            )));
        }
        Ok(FzParameters { z, b })
    }

    pub fn depth(&self) -> usize {
        self.z.len()
    }
}

fn square_root(i: u64) -> Option<u64> {
    let r = i.sqrt();
    (r * r == i).then_some(r)
}

/// A word of length `n` with the digit at each square position `k^2` drawn
/// uniformly from `(b^(k^2), 2 b^(k^2)]` and the seed digit elsewhere.
pub fn fz_point(params: &FzParameters, n: usize, seed: u64) -> Result<CylinderWord> {
    if n > params.depth() {
        return Err(Error::domain(format!(
            "requested {n} digits but the seed word has {}",
            params.depth()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut digits = Vec::with_capacity(n);
    for i in 1..=n as u64 {
        if square_root(i).is_some() {
            let (lo, hi) = square_digit_range(params.b, i)?;
            digits.push(rng.gen_biguint_range(&lo, &(hi + 1u32)));
        } else {
            digits.push(params.z.digits()[i as usize - 1].clone());
        }
    }
    CylinderWord::new(digits)
}

/// `ln mu(I_m) = -(sum_{k <= floor(sqrt m)} k^2) ln b`.
pub fn fz_measure_mass(m: u64, b: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    Ok(-(square_pyramid(m.sqrt()) as f64) * b.ln())
}

fn square_pyramid(n: u64) -> u128 {
    let n = n as u128;
    n * (n + 1) * (2 * n + 1) / 6
}

/// Upper bound on `-ln |I(x_1..x_{m+1})|` for forced-digit words over a
/// seed point with `z_k <= k`.
pub fn interval_length_bound(m: u64, b: f64) -> f64 {
    let n = m.sqrt();
    let squares = (n + 1) * (n + 1);
    let ln3 = 3f64.ln();
    2f64.ln()
        + 2.0 * (n + 1) as f64 * ln3
        + 2.0 * square_pyramid(n + 1) as f64 * b.ln()
        + 2.0 * ksum((1..=squares).map(|k| ((k + 1) as f64).ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub m: u64,
    pub n: u64,
    /// `ln mu(I(x_1..x_{n^2}))`.
    pub log_mass: f64,
    /// `ln |I(x_1..x_{m+1})|`, from exact convergents.
    pub log_length: f64,
    pub ratio: f64,
    /// `ln(3 mu) / ln(|I| / 3)`, the ratio with the ball-covering constants.
    pub corrected_ratio: f64,
    /// Whether every square-position digit up to `m+1` lies in its range.
    pub verified: bool,
}

/// Cylinder proxies for the local dimension of the forced-digit measure at
/// the word, one row per depth `m`.
pub fn local_dimension_profile(
    word: &CylinderWord,
    b: f64,
    depths: &[u64],
) -> Result<Vec<ProfileRow>> {
    if !(b > 1.0) || !b.is_finite() {
        return Err(Error::domain(format!(
            "b = {b} must be a finite number > 1"
        )));
    }
    let mut order: Vec<u64> = depths.to_vec();
    order.sort_unstable();
    order.dedup();
    if let Some(&m) = order.last() {
        if m as usize + 1 > word.len() {
            return Err(Error::domain(format!(
                "depth {m} needs {} digits, word has {}",
                m + 1,
                word.len()
            )));
        }
    }
    if order.first() == Some(&0) {
        return Err(Error::domain("depths start at 1"));
    }
    let mut rows = Vec::with_capacity(order.len());
    let mut rec = Recursion::new();
    let mut consumed = 0usize;
    let mut verified = true;
    let ln3 = 3f64.ln();
    for &m in &order {
        while consumed < m as usize + 1 {
            let d = &word.digits()[consumed];
            consumed += 1;
            if square_root(consumed as u64).is_some() {
                verified &= match square_digit_range(b, consumed as u64) {
                    Ok((lo, hi)) => *d >= lo && *d <= hi,
                    Err(_) => false,
                };
            }
            rec.step(d);
        }
        let log_length = -(ln_biguint(&rec.q) + ln_biguint(&(&rec.q + &rec.q_prev)));
        let log_mass = fz_measure_mass(m, b)?;
        rows.push(ProfileRow {
            m,
            n: m.sqrt(),
            log_mass,
            log_length,
            ratio: log_mass / log_length,
            corrected_ratio: (log_mass + ln3) / (log_length - ln3),
            verified,
        });
    }
    Ok(rows)
}

/// Profile rows as CSV with columns `m,n,log_mass,log_length,ratio`.
pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut s = String::from("m,n,log_mass,log_length,ratio\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.m,
            r.n,
            format_sig(r.log_mass, 12),
            format_sig(r.log_length, 12),
            format_sig(r.ratio, 12)
        );
    }
    s
}

/// `(sum_{k<=n} k^2) / (2 sum_{k<=n+1} k^2)`, the large-`b` limit of the
/// profile ratio on `[n^2, (n+1)^2)`.
pub fn large_b_ratio(n: u64) -> f64 {
    square_pyramid(n) as f64 / (2.0 * square_pyramid(n + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::basic_interval;
    use crate::word_stats::digit_frequency;
    use num_traits::One;

    #[test]
    fn growth_rules() {
        assert_eq!(GrowthSequence::Linear.value(7), 7);
        let p = GrowthSequence::Power {
            scale: 2.0,
            exponent: 0.5,
        };
        assert_eq!(p.value(9), 6);
        assert_eq!(p.value(10), 7);
        let l = GrowthSequence::Log { scale: 1.0 };
        assert_eq!(l.value(1), 1);
        assert!(GrowthSequence::Power {
            scale: 1.0,
            exponent: 0.0
        }
        .validate()
        .is_err());
        for g in [GrowthSequence::Linear, p, l] {
            assert!((1..1000).all(|n| g.value(n + 1) >= g.value(n)));
        }
    }

    #[test]
    fn dirac_seed_point_is_all_ones() {
        let f = FrequencyVector::finite(&[1.0]).unwrap();
        for g in [GrowthSequence::Linear, GrowthSequence::Log { scale: 3.0 }] {
            let w = seed_point(&f, &g, 500, 1).unwrap();
            assert_eq!(w.small_digits().unwrap(), vec![1; 500]);
        }
    }

    #[test]
    fn seed_point_respects_growth_and_fallback() {
        // no mass on {1}: first step falls back to uniform on {1}
        let f = FrequencyVector::finite(&[0.0, 0.5, 0.5]).unwrap();
        let w = seed_point(&f, &GrowthSequence::Linear, 2000, 3)
            .unwrap()
            .small_digits()
            .unwrap();
        assert_eq!(w[0], 1);
        assert_eq!(w[1], 2);
        assert!(w.iter().enumerate().all(|(i, &d)| d <= i as u64 + 1));
        assert!(w[2..].iter().all(|&d| d == 2 || d == 3));
    }

    #[test]
    fn seed_point_is_reproducible() {
        let g = FrequencyVector::gauss();
        let a = seed_point(&g, &GrowthSequence::Linear, 1000, 42).unwrap();
        let b = seed_point(&g, &GrowthSequence::Linear, 1000, 42).unwrap();
        let c = seed_point(&g, &GrowthSequence::Linear, 1000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gauss_seed_point_frequencies_within_binomial_bands() {
        let g = FrequencyVector::gauss();
        let n = 100_000usize;
        let w = seed_point(&g, &GrowthSequence::Linear, n, 2024).unwrap();
        for j in 1..=5u64 {
            let (count, _) = digit_frequency(&w, j).unwrap();
            let p = g.p(j);
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - n as f64 * p).abs() <= 3.0 * sd, "digit {j}");
        }
    }

    #[test]
    fn square_ranges_are_exact() {
        let (lo, hi) = square_digit_range(std::f64::consts::E, 1).unwrap();
        assert_eq!((lo, hi), (BigUint::from(3u32), BigUint::from(5u32)));
        let (lo, hi) = square_digit_range(2.0, 4).unwrap();
        assert_eq!((lo, hi), (BigUint::from(17u32), BigUint::from(32u32)));
        let (lo, hi) = square_digit_range(1.5, 1).unwrap();
        assert_eq!((lo, hi), (BigUint::from(2u32), BigUint::from(3u32)));
        let (lo, hi) = square_digit_range(1.0001, 1).unwrap();
        assert_eq!((lo, hi), (BigUint::from(2u32), BigUint::from(2u32)));
        assert!(square_digit_range(1.0, 1).is_err());
        assert!(square_digit_range(f64::INFINITY, 1).is_err());
    }

    #[test]
    fn fz_point_unrolled() {
        let e = std::f64::consts::E;
        let z = CylinderWord::from_small(&[1; 10]).unwrap();
        let params = FzParameters::new(z, e).unwrap();
        let w = fz_point(&params, 4, 9).unwrap();
        let d = w.digits();
        assert!(d[0] >= BigUint::from(3u32) && d[0] <= BigUint::from(5u32));
        assert!(d[1].is_one() && d[2].is_one());
        let (lo, hi) = square_digit_range(e, 4).unwrap();
        assert!(d[3] >= lo && d[3] <= hi);
        // e^4 = 54.598...
        assert_eq!((lo, hi), (BigUint::from(55u32), BigUint::from(109u32)));
        let nine = fz_point(&params, 10, 9).unwrap();
        let (lo, hi) = square_digit_range(e, 9).unwrap();
        // e^9 = 8103.08...
        assert_eq!(lo, BigUint::from(8104u32));
        assert!(nine.digits()[8] >= lo && nine.digits()[8] <= hi);
        assert_eq!(w, fz_point(&params, 4, 9).unwrap());
        assert!(fz_point(&params, 11, 9).is_err());
    }

    #[test]
    fn fz_point_keeps_seed_frequencies() {
        let f = FrequencyVector::finite(&[0.5, 0.5]).unwrap();
        let z = seed_point(&f, &GrowthSequence::Linear, 10_000, 5).unwrap();
        let params = FzParameters::new(z.clone(), 3.0).unwrap();
        let w = fz_point(&params, 400, 1).unwrap();
        let changed = (0..400).filter(|&i| w.digits()[i] != z.digits()[i]).count();
        assert!(changed <= 20);
    }

    #[test]
    fn measure_masses() {
        let e = std::f64::consts::E;
        for m in 1..=3 {
            assert!((fz_measure_mass(m, e).unwrap() + 1.0).abs() < 1e-15);
        }
        assert!((fz_measure_mass(4, e).unwrap() + 5.0).abs() < 1e-15);
        assert!((fz_measure_mass(9, 2.0).unwrap() + 14.0 * 2f64.ln()).abs() < 1e-13);
        assert!(fz_measure_mass(0, 2.0).is_err());
        for n in 1..20u64 {
            let b = 3.0f64;
            let inside: Vec<f64> = (n * n..(n + 1) * (n + 1))
                .map(|m| fz_measure_mass(m, b).unwrap())
                .collect();
            assert!(inside.windows(2).all(|w| w[0] == w[1]));
            let jump = fz_measure_mass((n + 1) * (n + 1), b).unwrap() - inside[0];
            assert!((jump + ((n + 1) * (n + 1)) as f64 * b.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_uses_exact_lengths() {
        let b = 10f64.exp();
        let f = FrequencyVector::finite(&[0.5, 0.5]).unwrap();
        let z = seed_point(&f, &GrowthSequence::Linear, 200, 2).unwrap();
        let w = fz_point(&FzParameters::new(z, b).unwrap(), 101, 7).unwrap();
        let depths: Vec<u64> = (4..=100).collect();
        let rows = local_dimension_profile(&w, b, &depths).unwrap();
        assert_eq!(rows.len(), 97);
        for r in &rows {
            assert!(r.verified);
            let len = basic_interval(&w.prefix(r.m as usize + 1))
                .unwrap()
                .ln_length();
            assert!((r.log_length - len).abs() < 1e-9 * len.abs());
            assert!(-r.log_length <= interval_length_bound(r.m, b));
            assert!(r.ratio > 0.0 && r.ratio < 1.0);
        }
        // the big-b asymptote is approached at the end of each block
        let last = rows.iter().find(|r| r.m == 99).unwrap();
        assert!((last.ratio - large_b_ratio(9)).abs() < 0.01);
        let csv = profile_csv(&rows);
        assert!(csv.starts_with("m,n,log_mass,log_length,ratio\n4,2,"));
    }

    #[test]
    fn profile_flags_mismatched_words() {
        let ones = CylinderWord::from_small(&[1; 30]).unwrap();
        let rows = local_dimension_profile(&ones, 2.0, &[1, 5, 20]).unwrap();
        assert!(rows.iter().all(|r| !r.verified && r.ratio.is_finite()));
        assert!(local_dimension_profile(&ones, 2.0, &[30]).is_err());
    }
}
