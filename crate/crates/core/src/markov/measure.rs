use rayon::prelude::*;

use super::frequency::{truncate_frequencies, FrequencyVector};
use super::geometry::{check_budget, CylinderGeometry};
use crate::cf::CylinderWord;
use crate::error::{Error, Result};
use crate::numeric::{ksum, phi};

pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
pub const STATIONARITY_TOLERANCE: f64 = 1e-10;
const POWER_ITERATIONS: usize = 10_000;
const POWER_TOLERANCE: f64 = 1e-14;
const CHUNK: usize = 1 << 14;

/// A stationary `m`-step Markov measure on the digits `alphabet`, a subset
/// of `{1..bound}`. Digits of `{1..bound}` outside `alphabet` have mass zero.
///
/// States are the last `m` digits, encoded in base `|alphabet|` with the
/// oldest digit most significant; `kernel[s * A + a]` is `t(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovMeasure {
    bound: u64,
    alphabet: Vec<u64>,
    order: usize,
    kernel: Vec<f64>,
    stationary: Vec<f64>,
}

impl MarkovMeasure {
    /// Validated constructor.
    pub fn new(
        bound: u64,
        alphabet: Vec<u64>,
        order: usize,
        kernel: Vec<f64>,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        let m = Self::unchecked(bound, alphabet, order, kernel, stationary)?;
        let rows = m.row_sum_residual();
        if rows > ROW_SUM_TOLERANCE {
            return Err(Error::domain(format!("transition rows off by {rows:e}")));
        }
        let st = m.stationarity_residual();
        if st > STATIONARITY_TOLERANCE {
            return Err(Error::domain(format!(
                "state law is not stationary ({st:e})"
            )));
        }
        Ok(m)
    }

    fn unchecked(
        bound: u64,
        alphabet: Vec<u64>,
        order: usize,
        kernel: Vec<f64>,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::domain("empty alphabet"));
        }
        if alphabet.windows(2).any(|w| w[0] >= w[1]) || alphabet[0] == 0 {
            return Err(Error::domain(
                "alphabet must be strictly increasing positive digits",
            ));
        }
        if *alphabet.last().unwrap() > bound {
            return Err(Error::domain("alphabet exceeds the digit bound"));
        }
        let states = check_budget("state space", alphabet.len(), order)?;
        check_budget("transition kernel", alphabet.len(), order + 1)?;
        if kernel.len() != states * alphabet.len() || stationary.len() != states {
            return Err(Error::domain("kernel or state law has the wrong size"));
        }
        if kernel.iter().chain(&stationary).any(|x| !(*x >= 0.0)) {
            return Err(Error::domain("negative or NaN probability"));
        }
        Ok(MarkovMeasure {
            bound,
            alphabet,
            order,
            kernel,
            stationary,
        })
    }

    /// Measure with the given kernel and its stationary law, found by power
    /// iteration on the lazy chain.
    pub fn from_kernel(
        bound: u64,
        alphabet: Vec<u64>,
        order: usize,
        kernel: Vec<f64>,
    ) -> Result<Self> {
        let states = check_budget("state space", alphabet.len(), order)?;
        let start = vec![1.0 / states as f64; states];
        let mut m = Self::unchecked(bound, alphabet, order, kernel, start)?;
        m.stationary = m.solve_stationary()?;
        Self::new(m.bound, m.alphabet, m.order, m.kernel, m.stationary)
    }

    /// The `(k-1)`-step measure whose kernel conditions the block law `p` on
    /// its first `k-1` digits: `t(a | w) = p(wa) / sum_b p(wb)`. States with
    /// no mass get a uniform row. The stationary law is recomputed, starting
    /// from the prefix marginal of `p`.
    pub fn from_block_probabilities(
        bound: u64,
        alphabet: Vec<u64>,
        k: usize,
        p: &[f64],
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("block length must be at least 1"));
        }
        let a = alphabet.len();
        let size = check_budget("block table", a, k)?;
        if p.len() != size {
            return Err(Error::domain("block table has the wrong size"));
        }
        let states = size / a;
        let mut kernel = vec![0.0; size];
        let mut start = vec![0.0; states];
        for s in 0..states {
            let row = &p[s * a..(s + 1) * a];
            let mass = ksum(row.iter().copied());
            start[s] = mass;
            let out = &mut kernel[s * a..(s + 1) * a];
            if mass > 0.0 {
                for (o, &x) in out.iter_mut().zip(row) {
                    *o = x / mass;
                }
            } else {
                out.fill(1.0 / a as f64);
            }
        }
        let total = ksum(start.iter().copied());
        if !(total > 0.0) {
            return Err(Error::domain("block table has no mass"));
        }
        start.iter_mut().for_each(|x| *x /= total);
        let mut m = Self::unchecked(bound, alphabet, k - 1, kernel, start)?;
        m.stationary = m.solve_stationary()?;
        Self::new(m.bound, m.alphabet, m.order, m.kernel, m.stationary)
    }

    /// Product measure with the truncated frequencies of `freq` on `{1..bound}`.
    pub fn bernoulli(freq: &FrequencyVector, bound: u64) -> Result<Self> {
        let probs = truncate_frequencies(freq, bound)?;
        Self::bernoulli_from_probs(&probs)
    }

    /// Product measure with `P(I(j)) = probs[j - 1]`; zero entries are
    /// dropped from the alphabet.
    pub fn bernoulli_from_probs(probs: &[f64]) -> Result<Self> {
        let total = ksum(probs.iter().copied());
        if !(total > 0.0) {
            return Err(Error::domain("all truncated frequencies vanish"));
        }
        let (alphabet, row): (Vec<u64>, Vec<f64>) = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (i as u64 + 1, p / total))
            .unzip();
        Self::new(probs.len() as u64, alphabet, 0, row, vec![1.0])
    }

    /// Point mass on the all-ones sequence.
    pub fn dirac() -> Self {
        Self::bernoulli_from_probs(&[1.0]).expect("valid")
    }

    fn solve_stationary(&self) -> Result<Vec<f64>> {
        let mut pi = self.stationary.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..POWER_ITERATIONS {
            let next = self.step_law(&pi);
            residual = tv(&next, &pi);
            // lazy averaging removes periodicity
            let lazy: Vec<f64> = pi.iter().zip(&next).map(|(x, y)| 0.5 * (x + y)).collect();
            pi = if residual < POWER_TOLERANCE {
                next
            } else {
                lazy
            };
            if residual < POWER_TOLERANCE {
                let s = ksum(pi.iter().copied());
                pi.iter_mut().for_each(|x| *x /= s);
                return Ok(pi);
            }
        }
        Err(Error::NonConvergence {
            stage: "stationary law",
            iterations: POWER_ITERATIONS,
            residual,
        })
    }

    /// One step of the state chain applied to a law on states.
    fn step_law(&self, law: &[f64]) -> Vec<f64> {
        let a = self.alphabet.len();
        let states = law.len();
        let mut next = vec![0.0; states];
        for (s, &w) in law.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = &self.kernel[s * a..(s + 1) * a];
            let base = (s * a) % states;
            for (j, &t) in row.iter().enumerate() {
                next[(base + j) % states] += w * t;
            }
        }
        next
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn alphabet(&self) -> &[u64] {
        &self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn states(&self) -> usize {
        self.stationary.len()
    }

    /// `t(a | state)`.
    pub fn transition(&self, state: usize, digit: u64) -> f64 {
        match self.index_of(digit) {
            Some(j) => self.kernel[state * self.alphabet.len() + j],
            None => 0.0,
        }
    }

    /// Largest deviation of a kernel row sum from 1.
    pub fn row_sum_residual(&self) -> f64 {
        self.kernel
            .chunks(self.alphabet.len())
            .map(|r| (ksum(r.iter().copied()) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Total variation distance between the state law and its image.
    pub fn stationarity_residual(&self) -> f64 {
        let mass = (ksum(self.stationary.iter().copied()) - 1.0).abs();
        tv(&self.step_law(&self.stationary), &self.stationary) + mass
    }

    fn index_of(&self, digit: u64) -> Option<usize> {
        self.alphabet.binary_search(&digit).ok()
    }

    /// `P(I(word))`.
    pub fn cylinder_probability(&self, word: &CylinderWord) -> Result<f64> {
        let mut idx = Vec::with_capacity(word.len());
        let mut absent = false;
        for d in word.digits() {
            let d = u64::try_from(d)
                .ok()
                .filter(|&d| d <= self.bound)
                .ok_or_else(|| {
                    Error::domain(format!("digit {d} exceeds the bound {}", self.bound))
                })?;
            match self.index_of(d) {
                Some(j) => idx.push(j),
                None => absent = true,
            }
        }
        if absent {
            return Ok(0.0);
        }
        Ok(self.cylinder_by_index(&idx))
    }

    fn cylinder_by_index(&self, idx: &[usize]) -> f64 {
        let a = self.alphabet.len();
        let m = self.order;
        let states = self.states();
        if idx.len() <= m {
            let span = a.pow((m - idx.len()) as u32);
            let lo = idx.iter().fold(0, |s, &j| s * a + j) * span;
            return ksum(self.stationary[lo..lo + span].iter().copied());
        }
        let mut state = idx[..m].iter().fold(0, |s, &j| s * a + j);
        let mut p = self.stationary[state];
        for &j in &idx[m..] {
            p *= self.kernel[state * a + j];
            state = (state * a + j) % states;
        }
        p
    }

    /// All `k`-cylinder probabilities over the alphabet, indexed in base
    /// `|alphabet|` with the first digit most significant.
    pub fn cylinder_table(&self, k: usize) -> Result<Vec<f64>> {
        let a = self.alphabet.len();
        check_budget("cylinder table", a, k)?;
        let m = self.order;
        if k <= m {
            let span = a.pow((m - k) as u32);
            return Ok(self
                .stationary
                .chunks(span)
                .map(|c| ksum(c.iter().copied()))
                .collect());
        }
        let states = self.states();
        let mut table = self.stationary.clone();
        for _ in m..k {
            let kernel = &self.kernel;
            table = table
                .par_iter()
                .enumerate()
                .with_min_len(CHUNK)
                .flat_map_iter(|(i, &w)| {
                    let s = i % states;
                    kernel[s * a..(s + 1) * a].iter().map(move |&t| w * t)
                })
                .collect();
        }
        Ok(table)
    }

    /// Single-digit marginals over `{1..bound}`.
    pub fn digit_marginals(&self) -> Vec<f64> {
        let table = self.cylinder_table(1).expect("alphabet fits the budget");
        let mut out = vec![0.0; self.bound as usize];
        for (&d, &p) in self.alphabet.iter().zip(&table) {
            out[d as usize - 1] = p;
        }
        out
    }

    /// `h_P = -sum_w pi(w) sum_a t(a|w) ln t(a|w)`, in nats per digit.
    pub fn entropy_rate(&self) -> f64 {
        let a = self.alphabet.len();
        ksum(
            self.stationary
                .iter()
                .enumerate()
                .map(|(s, &w)| w * ksum(self.kernel[s * a..(s + 1) * a].iter().map(|&t| phi(t)))),
        )
    }

    /// Shannon entropy of the `k`-cylinder law.
    pub fn block_entropy(&self, k: usize) -> Result<f64> {
        let table = self.cylinder_table(k)?;
        Ok(chunked_sum(&table, |_, p| phi(p)))
    }

    /// `-2 sum p(w) ln(p_k(w)/q_k(w))` over `k`-cylinders.
    pub fn lyapunov_functional(&self, k: usize) -> Result<f64> {
        let (table, g) = self.with_geometry(k)?;
        Ok(-2.0 * chunked_sum(&table, |i, p| weighted(p, g.ln_value[i])))
    }

    /// `sum p(w) ln q_k(w)` over `k`-cylinders.
    pub fn log_qk_moment(&self, k: usize) -> Result<f64> {
        let (table, g) = self.with_geometry(k)?;
        Ok(chunked_sum(&table, |i, p| weighted(p, g.ln_q[i])))
    }

    /// `[-sum p ln |I(w)|] - [-sum p ln p]`, nonnegative by Jensen.
    pub fn jensen_gap(&self, k: usize) -> Result<f64> {
        let (table, g) = self.with_geometry(k)?;
        Ok(chunked_sum(&table, |i, p| {
            if p > 0.0 {
                p * (p.ln() - g.ln_length[i])
            } else {
                0.0
            }
        }))
    }

    pub(crate) fn with_geometry(&self, k: usize) -> Result<(Vec<f64>, CylinderGeometry)> {
        let table = self.cylinder_table(k)?;
        let g = CylinderGeometry::new(&self.alphabet, k)?;
        Ok((table, g))
    }

    /// Same functionals against a precomputed geometry.
    pub fn lyapunov_with(&self, g: &CylinderGeometry) -> Result<f64> {
        self.check_geometry(g)?;
        let table = self.cylinder_table(g.k)?;
        Ok(-2.0 * chunked_sum(&table, |i, p| weighted(p, g.ln_value[i])))
    }

    fn check_geometry(&self, g: &CylinderGeometry) -> Result<()> {
        if g.alphabet != self.alphabet {
            return Err(Error::domain("geometry built for another alphabet"));
        }
        Ok(())
    }

    /// The `(k-1)`-step measure on the full alphabet `{1..bound}` with
    /// `k`-cylinder values `(1 - eps) p(w) + eps / bound^k`.
    pub fn perturb(&self, eps: f64, k: usize) -> Result<MarkovMeasure> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::domain(format!("eps = {eps} is outside (0, 1)")));
        }
        if k == 0 {
            return Err(Error::domain("block length must be at least 1"));
        }
        let n = self.bound as usize;
        let size = check_budget("perturbed block table", n, k)?;
        let own = self.cylinder_table(k)?;
        let a = self.alphabet.len();
        let floor = eps / size as f64;
        let mut table = vec![floor; size];
        for (i, &p) in own.iter().enumerate() {
            let mut r = i;
            let mut full = 0;
            let mut scale = 1;
            for _ in 0..k {
                full += (self.alphabet[r % a] as usize - 1) * scale;
                scale *= n;
                r /= a;
            }
            table[full] += (1.0 - eps) * p;
        }
        let alphabet = (1..=self.bound).collect();
        MarkovMeasure::from_block_probabilities(self.bound, alphabet, k, &table)
    }
}

fn weighted(p: f64, x: f64) -> f64 {
    if p > 0.0 {
        p * x
    } else {
        0.0
    }
}

/// Compensated sum of `f(i, table[i])`, split into fixed chunks so the
/// result does not depend on the thread count.
fn chunked_sum<F: Fn(usize, f64) -> f64 + Sync>(table: &[f64], f: F) -> f64 {
    let partials: Vec<f64> = table
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * CHUNK;
            ksum(chunk.iter().enumerate().map(|(i, &p)| f(base + i, p)))
        })
        .collect();
    ksum(partials)
}

fn tv(x: &[f64], y: &[f64]) -> f64 {
    0.5 * ksum(x.iter().zip(y).map(|(a, b)| (a - b).abs()))
}
