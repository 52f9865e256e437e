//! Digit and block statistics of finite words: frequencies, block entropies,
//! the low-entropy word count and the two sides of the interval log bound.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::cf::{CylinderWord, Recursion};
use crate::error::{Error, Result};
use crate::numeric::{ksum, ln_biguint, phi};

/// Largest `N^n` the exhaustive counter will walk.
pub const ENUMERATION_BUDGET: f64 = 1e8;

/// Absolute slack used when comparing a computed entropy with a threshold.
pub const ENTROPY_SLACK: f64 = 1e-12;

/// Overlapping `k`-block counts of a word over the alphabet `{1..N}`.
///
/// Blocks are counted at start positions `1..=n-k+1`, i.e. only windows that
/// lie fully inside the word.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFrequencyTable {
    pub k: usize,
    pub alphabet: u64,
    pub n: usize,
    pub counts: BTreeMap<Vec<u64>, u64>,
}

impl BlockFrequencyTable {
    pub fn from_word(word: &CylinderWord, k: usize, alphabet: u64) -> Result<Self> {
        let digits = small_digits_within(word, alphabet)?;
        Self::from_digits(&digits, k, alphabet)
    }

    pub(crate) fn from_digits(digits: &[u64], k: usize, alphabet: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("block length must be at least 1"));
        }
        if k > digits.len() {
            return Err(Error::domain(format!(
                "block length {k} exceeds word length {}",
                digits.len()
            )));
        }
        let mut counts = BTreeMap::new();
        for w in digits.windows(k) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
        Ok(BlockFrequencyTable {
            k,
            alphabet,
            n: digits.len(),
            counts,
        })
    }

    /// Number of windows, `n - k + 1`.
    pub fn windows(&self) -> u64 {
        (self.n - self.k + 1) as u64
    }

    /// `p(u|w) = count(u) / (n - k + 1)`.
    pub fn frequency(&self, block: &[u64]) -> f64 {
        self.counts.get(block).copied().unwrap_or(0) as f64 / self.windows() as f64
    }

    /// `H_k(w) = sum_u phi(p(u|w))`, in nats.
    pub fn entropy(&self) -> f64 {
        let m = self.windows() as f64;
        ksum(self.counts.values().map(|&c| phi(c as f64 / m)))
    }
}

fn small_digits_within(word: &CylinderWord, alphabet: u64) -> Result<Vec<u64>> {
    let bound = BigUint::from(alphabet);
    if let Some(pos) = word.digits().iter().position(|d| *d > bound) {
        return Err(Error::domain(format!(
            "digit {} at position {} exceeds alphabet bound {alphabet}",
            word.digits()[pos],
            pos + 1
        )));
    }
    Ok(word.small_digits().expect("digits bounded by a u64"))
}

/// `(tau_j(w, n), tau_j(w, n) / n)`.
pub fn digit_frequency(word: &CylinderWord, j: u64) -> Result<(u64, Ratio<u64>)> {
    if word.is_empty() {
        return Err(Error::domain("digit_frequency: empty word"));
    }
    if j == 0 {
        return Err(Error::domain("digits are positive"));
    }
    let target = BigUint::from(j);
    let count = word.digits().iter().filter(|d| **d == target).count() as u64;
    Ok((count, Ratio::new(count, word.len() as u64)))
}

/// Empirical `k`-block entropy `H_k` of a word, in nats.
pub fn block_entropy(word: &CylinderWord, k: usize) -> Result<f64> {
    let max = word
        .digits()
        .iter()
        .max()
        .and_then(|d| d.to_u64())
        .ok_or_else(|| {
            Error::domain("block_entropy needs a nonempty word of machine-size digits")
        })?;
    Ok(BlockFrequencyTable::from_word(word, k, max)?.entropy())
}

/// Exact `#{w in {1..N}^n : H_k(w) <= k h}` by exhaustive enumeration.
///
/// Words are walked depth-first in lexicographic order while the block
/// counts and `sum c ln c` are updated incrementally, so each word costs
/// O(1) on top of the walk. The top of the tree is split across threads.
pub fn count_low_entropy_words(alphabet: u64, n: usize, k: usize, h: f64) -> Result<u64> {
    if alphabet == 0 || n == 0 || k == 0 {
        return Err(Error::domain(
            "alphabet, word length and block length must be positive",
        ));
    }
    if k > n {
        return Err(Error::domain(format!(
            "block length {k} exceeds word length {n}"
        )));
    }
    let needed = (alphabet as f64).powi(n as i32);
    if needed > ENUMERATION_BUDGET {
        return Err(Error::Resource {
            what: "word enumeration",
            needed,
            budget: ENUMERATION_BUDGET,
        });
    }
    let blocks = (alphabet as usize).pow(k as u32);
    let windows = n - k + 1;
    let m = windows as f64;
    // H = ln m - S/m with S = sum_u c_u ln c_u
    let threshold = k as f64 * h + ENTROPY_SLACK;
    let clogc: Vec<f64> = (0..=windows)
        .map(|c| {
            if c == 0 {
                0.0
            } else {
                c as f64 * (c as f64).ln()
            }
        })
        .collect();

    let walker = Walker {
        alphabet: alphabet as usize,
        n,
        k,
        blocks,
        m,
        threshold,
        clogc: &clogc,
    };

    // split on a prefix so that there are enough independent subtrees
    let mut split = 0;
    while split < n && (alphabet as usize).pow(split as u32) < 64 {
        split += 1;
    }
    let prefixes = (alphabet as usize).pow(split as u32);
    let total = (0..prefixes)
        .into_par_iter()
        .map(|code| {
            let mut digits = vec![0usize; n];
            let mut c = code;
            for i in (0..split).rev() {
                digits[i] = c % walker.alphabet;
                c /= walker.alphabet;
            }
            let mut counts = vec![0usize; walker.blocks];
            let mut s = 0.0;
            for depth in 0..split {
                walker.push(&digits, depth, &mut counts, &mut s);
            }
            walker.descend(&mut digits, split, &mut counts, &mut s)
        })
        .sum();
    Ok(total)
}

struct Walker<'a> {
    alphabet: usize,
    n: usize,
    k: usize,
    blocks: usize,
    m: f64,
    threshold: f64,
    clogc: &'a [f64],
}

impl Walker<'_> {
    fn block_ending_at(&self, digits: &[usize], depth: usize) -> Option<usize> {
        if depth + 1 < self.k {
            return None;
        }
        let start = depth + 1 - self.k;
        Some(
            digits[start..=depth]
                .iter()
                .fold(0, |acc, &d| acc * self.alphabet + d),
        )
    }

    fn push(&self, digits: &[usize], depth: usize, counts: &mut [usize], s: &mut f64) {
        if let Some(b) = self.block_ending_at(digits, depth) {
            let c = counts[b];
            *s += self.clogc[c + 1] - self.clogc[c];
            counts[b] = c + 1;
        }
    }

    fn pop(&self, digits: &[usize], depth: usize, counts: &mut [usize], s: &mut f64) {
        if let Some(b) = self.block_ending_at(digits, depth) {
            let c = counts[b];
            *s -= self.clogc[c] - self.clogc[c - 1];
            counts[b] = c - 1;
        }
    }

    fn descend(
        &self,
        digits: &mut [usize],
        depth: usize,
        counts: &mut [usize],
        s: &mut f64,
    ) -> u64 {
        if depth == self.n {
            let h = self.m.ln() - *s / self.m;
            return u64::from(h <= self.threshold);
        }
        let mut total = 0;
        for d in 0..self.alphabet {
            digits[depth] = d;
            self.push(digits, depth, counts, s);
            total += self.descend(digits, depth + 1, counts, s);
            self.pop(digits, depth, counts, s);
        }
        total
    }
}

/// Both sides of the interval log bound
/// `ln|I_n| <= 2 sum_u tau_u ln(p_k(u)/q_k(u)) + 8 + 8n/2^k`.
pub fn interval_log_bound_sides(
    word: &CylinderWord,
    alphabet: u64,
    k: usize,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::domain("block length must be at least 1"));
    }
    let digits = small_digits_within(word, alphabet)?;
    let lhs = crate::cf::ln_interval_length(word)?;
    let n = digits.len();
    let slack = 8.0 + 8.0 * n as f64 / 2f64.powi(k as i32);
    if k > n {
        return Ok((lhs, slack));
    }
    let table = BlockFrequencyTable::from_digits(&digits, k, alphabet)?;
    let terms = table.counts.iter().map(|(block, &count)| {
        let mut r = Recursion::new();
        for &a in block {
            r.step(&BigUint::from(a));
        }
        count as f64 * (ln_biguint(&r.p) - ln_biguint(&r.q))
    });
    let rhs = 2.0 * ksum(terms) + slack;
    Ok((lhs, rhs))
}

/// Counting threshold `exp(n (h + eps))`.
pub fn counting_bound(n: usize, h: f64, eps: f64) -> f64 {
    (n as f64 * (h + eps)).exp()
}
