//! Exact continued-fraction arithmetic.
//!
//! Everything here works on arbitrary-precision integers and rationals:
//! convergents, the geometry of basic intervals (cylinders) and the Gauss-map
//! expansion of a rational number. Floating point only shows up in the
//! `ln_*` helpers, which take logarithms of exact quantities.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numeric::ln_biguint;

/// A finite string of partial quotients `(a_1, ..., a_n)`, each at least 1.
///
/// Digits are arbitrary-precision so that words carrying astronomically large
/// partial quotients can be handled exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CylinderWord {
    digits: Vec<BigUint>,
}

impl CylinderWord {
    pub fn new(digits: Vec<BigUint>) -> Result<Self> {
        if let Some(pos) = digits.iter().position(|d| d.is_zero()) {
            return Err(Error::domain(format!(
                "digit at position {} is 0; partial quotients must be positive",
                pos + 1
            )));
        }
        Ok(Self { digits })
    }

    pub fn from_small(digits: &[u64]) -> Result<Self> {
        Self::new(digits.iter().map(|&d| BigUint::from(d)).collect())
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn digits(&self) -> &[BigUint] {
        &self.digits
    }

    /// Digits as machine integers, or `None` if some digit exceeds `u64`.
    pub fn small_digits(&self) -> Option<Vec<u64>> {
        self.digits.iter().map(|d| d.to_u64()).collect()
    }

    /// The word truncated to its first `n` digits.
    pub fn prefix(&self, n: usize) -> CylinderWord {
        CylinderWord {
            digits: self.digits[..n.min(self.len())].to_vec(),
        }
    }

    /// Word with `b` inserted right after the `position`-th digit
    /// (`position = 0` prepends).
    pub fn with_inserted(&self, position: usize, b: BigUint) -> Result<CylinderWord> {
        if position > self.len() {
            return Err(Error::domain(format!(
                "insert position {position} beyond word of length {}",
                self.len()
            )));
        }
        if b.is_zero() {
            return Err(Error::domain("inserted digit must be positive"));
        }
        let mut digits = self.digits.clone();
        digits.insert(position, b);
        Ok(CylinderWord { digits })
    }

    /// Word with the digit at 1-based `position` removed.
    pub fn with_removed(&self, position: usize) -> Result<CylinderWord> {
        if position == 0 || position > self.len() {
            return Err(Error::domain(format!(
                "delete position {position} outside 1..={}",
                self.len()
            )));
        }
        let mut digits = self.digits.clone();
        digits.remove(position - 1);
        Ok(CylinderWord { digits })
    }

    pub(crate) fn push(&mut self, d: BigUint) {
        debug_assert!(!d.is_zero());
        self.digits.push(d);
    }

    fn require_nonempty(&self, op: &str) -> Result<()> {
        if self.is_empty() {
            Err(Error::domain(format!("{op}: empty word")))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for CylinderWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for CylinderWord {
    type Err = Error;

    /// Parses a comma-separated digit list such as `1,2,1,3`.
    fn from_str(s: &str) -> Result<Self> {
        let mut digits = Vec::new();
        let mut offset = 0;
        for tok in s.split(',') {
            let t = tok.trim();
            let lead = tok.len() - tok.trim_start().len();
            let d = BigUint::from_str(t).map_err(|_| Error::Parse {
                position: offset + lead,
                message: format!("expected a positive integer, found {t:?}"),
            })?;
            if d.is_zero() {
                return Err(Error::Parse {
                    position: offset + lead,
                    message: "partial quotients must be positive".into(),
                });
            }
            digits.push(d);
            offset += tok.len() + 1;
        }
        Ok(CylinderWord { digits })
    }
}

/// The `index`-th convergent `p/q` of a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Convergent {
    pub p: BigUint,
    pub q: BigUint,
    pub index: i64,
}

impl Convergent {
    pub fn value(&self) -> BigRational {
        BigRational::new(BigInt::from(self.p.clone()), BigInt::from(self.q.clone()))
    }
}

/// Running state of the convergent recursion: the last two numerators and
/// denominators.
#[derive(Debug, Clone)]
pub(crate) struct Recursion {
    pub p: BigUint,
    pub q: BigUint,
    pub p_prev: BigUint,
    pub q_prev: BigUint,
}

impl Recursion {
    /// Seeds `p_{-1} = 1, p_0 = 0, q_{-1} = 0, q_0 = 1`.
    pub fn new() -> Self {
        Recursion {
            p: BigUint::zero(),
            q: BigUint::one(),
            p_prev: BigUint::one(),
            q_prev: BigUint::zero(),
        }
    }

    pub fn step(&mut self, a: &BigUint) {
        let p = a * &self.p + &self.p_prev;
        let q = a * &self.q + &self.q_prev;
        self.p_prev = std::mem::replace(&mut self.p, p);
        self.q_prev = std::mem::replace(&mut self.q, q);
    }

    pub fn run(word: &CylinderWord) -> Self {
        let mut r = Recursion::new();
        for a in word.digits() {
            r.step(a);
        }
        r
    }
}

/// All convergents `(p_i, q_i)` for `i = 1..=n`.
pub fn convergents(word: &CylinderWord) -> Result<Vec<Convergent>> {
    word.require_nonempty("convergents")?;
    let mut r = Recursion::new();
    Ok(word
        .digits()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            r.step(a);
            Convergent {
                p: r.p.clone(),
                q: r.q.clone(),
                index: i as i64 + 1,
            }
        })
        .collect())
}

/// The rational `[0; a_1, ..., a_n] = p_n / q_n`.
pub fn fold(word: &CylinderWord) -> Result<BigRational> {
    word.require_nonempty("fold")?;
    let r = Recursion::run(word);
    Ok(ratio(&r.p, &r.q))
}

fn ratio(p: &BigUint, q: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(p.clone()), BigInt::from(q.clone()))
}

/// The rank-n basic interval `I(a_1, ..., a_n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicInterval {
    pub left: BigRational,
    pub right: BigRational,
    pub word: CylinderWord,
    q: BigUint,
    q_prev: BigUint,
}

impl BasicInterval {
    pub fn length(&self) -> BigRational {
        &self.right - &self.left
    }

    /// `1 / (q_n (q_n + q_{n-1}))`, computed directly from the denominators.
    pub fn length_from_denominators(&self) -> BigRational {
        let d = &self.q * (&self.q + &self.q_prev);
        BigRational::new(BigInt::one(), BigInt::from(d))
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn q_prev(&self) -> &BigUint {
        &self.q_prev
    }

    /// Natural log of the length.
    pub fn ln_length(&self) -> f64 {
        -(ln_biguint(&self.q) + ln_biguint(&(&self.q + &self.q_prev)))
    }
}

pub fn basic_interval(word: &CylinderWord) -> Result<BasicInterval> {
    word.require_nonempty("basic_interval")?;
    let r = Recursion::run(word);
    let a = ratio(&r.p, &r.q);
    let b = ratio(&(&r.p + &r.p_prev), &(&r.q + &r.q_prev));
    let (left, right) = if a <= b { (a, b) } else { (b, a) };
    Ok(BasicInterval {
        left,
        right,
        word: word.clone(),
        q: r.q,
        q_prev: r.q_prev,
    })
}

/// `ln |I(word)|` without building the endpoints.
pub fn ln_interval_length(word: &CylinderWord) -> Result<f64> {
    word.require_nonempty("ln_interval_length")?;
    let r = Recursion::run(word);
    Ok(-(ln_biguint(&r.q) + ln_biguint(&(&r.q + &r.q_prev))))
}

/// Partial quotients of a rational `x` in `(0, 1)` by exact Gauss-map
/// iteration. Stops after `max_digits` digits or when the orbit reaches 0.
pub fn cf_expand(x: &BigRational, max_digits: usize) -> Result<CylinderWord> {
    if !x.is_positive() || *x >= BigRational::one() {
        return Err(Error::domain(format!("cf_expand needs 0 < x < 1, got {x}")));
    }
    let mut num = x.numer().magnitude().clone();
    let mut den = x.denom().magnitude().clone();
    let mut word = CylinderWord::default();
    // x = num/den; 1/x = den/num = a + r/num; T(x) = r/num
    while word.len() < max_digits && !num.is_zero() {
        let (a, r) = den.div_rem(&num);
        word.push(a);
        den = std::mem::replace(&mut num, r);
    }
    Ok(word)
}

/// Parses `"3/7"`, `"0.625"` or `"5"` as an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let lead = s.len() - s.trim_start().len();
    let bad = |pos: usize, msg: &str| Error::Parse {
        position: lead + pos,
        message: msg.to_string(),
    };
    if let Some((n, d)) = t.split_once('/') {
        let num = BigInt::from_str(n.trim()).map_err(|_| bad(0, "invalid numerator"))?;
        let den =
            BigInt::from_str(d.trim()).map_err(|_| bad(n.len() + 1, "invalid denominator"))?;
        if den.is_zero() {
            return Err(bad(n.len() + 1, "zero denominator"));
        }
        return Ok(BigRational::new(num, den));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad(0, "empty number"));
    }
    if let Some(i) = int_part
        .chars()
        .chain(frac_part.chars())
        .position(|c| !c.is_ascii_digit())
    {
        let pos = if i < int_part.len() { i } else { i + 1 };
        return Err(bad(pos + usize::from(neg), "unexpected character"));
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).unwrap();
    let den = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let r = BigRational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// `q_{n+1}(a_1..a_j, b, a_{j+1}..a_n) / q_n(a_1..a_n)` for `1 <= j < n`.
pub fn insertion_ratio(word: &CylinderWord, position: usize, b: &BigUint) -> Result<BigRational> {
    if position == 0 || position >= word.len() {
        return Err(Error::domain(format!(
            "insertion position must satisfy 1 <= j < {}, got {position}",
            word.len()
        )));
    }
    let longer = word.with_inserted(position, b.clone())?;
    let q_long = Recursion::run(&longer).q;
    let q = Recursion::run(word).q;
    Ok(ratio(&q_long, &q))
}

/// `(|I(word)|, |I(word without the digit at position)|)`.
pub fn deletion_length_bound(
    word: &CylinderWord,
    position: usize,
) -> Result<(BigRational, BigRational)> {
    if word.len() < 2 {
        return Err(Error::domain("deletion needs a word of length >= 2"));
    }
    let shorter = word.with_removed(position)?;
    Ok((
        basic_interval(word)?.length(),
        basic_interval(&shorter)?.length(),
    ))
}

/// Lengths of the rank-n intervals whose last digit is `a_n - 1`, `a_n` and
/// `a_n + 1`.
pub fn adjacent_interval_lengths(
    word: &CylinderWord,
) -> Result<(BigRational, BigRational, BigRational)> {
    word.require_nonempty("adjacent_interval_lengths")?;
    let last = word.digits().last().unwrap();
    if *last < BigUint::from(2u32) {
        return Err(Error::domain("adjacent intervals need a last digit >= 2"));
    }
    let n = word.len();
    let mut digits = word.digits().to_vec();
    let lengths = [last - 1u32, last.clone(), last + 1u32].map(|d| {
        digits[n - 1] = d;
        basic_interval(&CylinderWord {
            digits: digits.clone(),
        })
        .unwrap()
        .length()
    });
    let [lo, mid, hi] = lengths;
    Ok((lo, mid, hi))
}
