use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{integrate, ksum, KahanSum};

/// Tolerance on the total mass of a frequency vector.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Parametric law for the digits beyond the explicit entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Tail {
    /// `p_j = c j^-a ln(j+1)^-b`.
    PowerLog {
        #[serde(default)]
        c: f64,
        a: f64,
        b: f64,
    },
    /// `p_j = c log2(1 + 1/(j(j+2)))`, the digit law of the Gauss measure
    /// when `c = 1` and the tail starts at `j = 1`.
    Gauss {
        #[serde(default = "one")]
        c: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Whether `sum_j p_j ln j` is finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogMomentClass {
    Finite,
    Infinite,
    Unknown,
}

/// A digit-frequency law `p = (p_1, p_2, ...)`: finitely many explicit
/// entries, optionally followed by a parametric tail.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    entries: BTreeMap<u64, f64>,
    tail: Option<Tail>,
    tail_start: u64,
    declared: Option<LogMomentClass>,
}

/// On-disk form of a [`FrequencyVector`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyVectorSpec {
    #[serde(default)]
    pub entries: Vec<(u64, f64)>,
    #[serde(default)]
    pub tail: Option<Tail>,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_moment: Option<LogMomentClass>,
}

impl FrequencyVector {
    /// Finite law `(p_1, ..., p_m)`.
    pub fn finite(probs: &[f64]) -> Result<Self> {
        let entries = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as u64 + 1, p))
            .collect();
        Self::build(entries, None, false, None)
    }

    /// Digit frequencies of the Gauss measure, `p_j = log2(1 + 1/(j(j+2)))`.
    pub fn gauss() -> Self {
        Self::build(Vec::new(), Some(Tail::Gauss { c: 1.0 }), false, None)
            .expect("Gauss law is normalized")
    }

    /// Normalized `p_j proportional to j^-a ln(j+1)^-b` over all `j >= 1`.
    pub fn power_log(a: f64, b: f64) -> Result<Self> {
        Self::build(
            Vec::new(),
            Some(Tail::PowerLog { c: 0.0, a, b }),
            true,
            None,
        )
    }

    pub fn from_spec(spec: FrequencyVectorSpec) -> Result<Self> {
        Self::build(spec.entries, spec.tail, spec.normalize, spec.log_moment)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FrequencyVectorSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            position: e.column(),
            message: format!("line {}: {e}", e.line()),
        })?;
        Self::from_spec(spec)
    }

    pub fn to_spec(&self) -> FrequencyVectorSpec {
        FrequencyVectorSpec {
            entries: self.entries.iter().map(|(&j, &p)| (j, p)).collect(),
            tail: self.tail,
            normalize: false,
            log_moment: self.declared,
        }
    }

    fn build(
        entries: Vec<(u64, f64)>,
        tail: Option<Tail>,
        normalize: bool,
        declared: Option<LogMomentClass>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (j, p) in entries {
            if j == 0 {
                return Err(Error::domain("digit 0 in frequency vector"));
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::domain(format!(
                    "p_{j} = {p} is not a nonnegative number"
                )));
            }
            if map.insert(j, p).is_some() {
                return Err(Error::domain(format!("digit {j} listed twice")));
            }
        }
        let tail_start = map.keys().next_back().map_or(1, |&j| j + 1);
        let mut fv = FrequencyVector {
            entries: map,
            tail,
            tail_start,
            declared,
        };
        if let Some(Tail::PowerLog { a, b, .. }) = fv.tail {
            if !(a > 1.0 || (a == 1.0 && b > 1.0)) {
                return Err(Error::domain(format!(
                    "power_log tail with a = {a}, b = {b} is not summable"
                )));
            }
        }
        let explicit = ksum(fv.entries.values().copied());
        if normalize {
            match &mut fv.tail {
                None => {
                    if explicit <= 0.0 {
                        return Err(Error::domain("cannot normalize an all-zero vector"));
                    }
                    for p in fv.entries.values_mut() {
                        *p /= explicit;
                    }
                }
                Some(t) => {
                    let remaining = 1.0 - explicit;
                    if remaining < -MASS_TOLERANCE {
                        return Err(Error::domain(format!(
                            "explicit entries already carry mass {explicit} > 1"
                        )));
                    }
                    let unit = unit_tail_mass(t, fv.tail_start);
                    let c = remaining.max(0.0) / unit;
                    match t {
                        Tail::PowerLog { c: cc, .. } | Tail::Gauss { c: cc } => *cc = c,
                    }
                }
            }
        }
        if let Some(Tail::PowerLog { c, .. } | Tail::Gauss { c }) = fv.tail {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::domain(format!("tail scale c = {c} is invalid")));
            }
        }
        let mass = fv.total_mass();
        let tol = if fv.tail.is_some() {
            1e-9
        } else {
            MASS_TOLERANCE
        };
        if (mass - 1.0).abs() > tol {
            return Err(Error::domain(format!("total mass is {mass}, expected 1")));
        }
        Ok(fv)
    }

    /// `p_j`.
    pub fn p(&self, j: u64) -> f64 {
        if j == 0 {
            return 0.0;
        }
        if let Some(&p) = self.entries.get(&j) {
            return p;
        }
        match self.tail {
            Some(t) if j >= self.tail_start => tail_term(&t, j),
            _ => 0.0,
        }
    }

    pub fn tail(&self) -> Option<Tail> {
        self.tail
    }

    pub fn explicit_entries(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.entries.iter().map(|(&j, &p)| (j, p))
    }

    /// Largest digit with positive mass, if the support is finite.
    pub fn support_max(&self) -> Option<u64> {
        match self.tail {
            Some(Tail::PowerLog { c, .. } | Tail::Gauss { c }) if c > 0.0 => None,
            _ => self
                .entries
                .iter()
                .rev()
                .find(|(_, &p)| p > 0.0)
                .map(|(&j, _)| j),
        }
    }

    /// `sum_{j <= n} p_j`.
    pub fn partial_sum(&self, n: u64) -> f64 {
        let mut acc = KahanSum::new();
        for (_, &p) in self.entries.range(..=n) {
            acc.add(p);
        }
        if let Some(t) = self.tail {
            if n >= self.tail_start {
                acc.add(tail_range_mass(&t, self.tail_start, n));
            }
        }
        acc.value()
    }

    /// Mass of the tail law from `tail_start` on.
    pub fn total_mass(&self) -> f64 {
        let explicit = ksum(self.entries.values().copied());
        match self.tail {
            None => explicit,
            Some(t) => explicit + scaled(&t) * unit_tail_mass(&t, self.tail_start),
        }
    }

    /// Class of `sum_j p_j ln j`, taken from the declaration when present and
    /// otherwise derived from the tail family.
    pub fn log_moment_class(&self) -> LogMomentClass {
        if let Some(d) = self.declared {
            return d;
        }
        self.analytic_log_moment_class()
    }

    pub fn analytic_log_moment_class(&self) -> LogMomentClass {
        match self.tail {
            None => LogMomentClass::Finite,
            Some(Tail::Gauss { .. }) => LogMomentClass::Finite,
            Some(Tail::PowerLog { c, a, b }) => {
                if c == 0.0 || a > 1.0 || b > 2.0 {
                    LogMomentClass::Finite
                } else {
                    LogMomentClass::Infinite
                }
            }
        }
    }
}

fn scaled(t: &Tail) -> f64 {
    match *t {
        Tail::PowerLog { c, .. } | Tail::Gauss { c } => c,
    }
}

fn unit_term(t: &Tail, j: u64) -> f64 {
    let x = j as f64;
    match *t {
        Tail::PowerLog { a, b, .. } => x.powf(-a) * (x + 1.0).ln().powf(-b),
        Tail::Gauss { .. } => (1.0 / (x * (x + 2.0))).ln_1p() / std::f64::consts::LN_2,
    }
}

fn tail_term(t: &Tail, j: u64) -> f64 {
    scaled(t) * unit_term(t, j)
}

/// Scaled mass of the tail law on `from..=to`.
fn tail_range_mass(t: &Tail, from: u64, to: u64) -> f64 {
    match *t {
        Tail::Gauss { c } => {
            // telescoping: sum_{j=from}^{to} log2((j+1)^2 / (j(j+2)))
            let lg = |x: f64| x.ln_1p() / std::f64::consts::LN_2;
            c * (lg(1.0 / from as f64) - lg(1.0 / (to as f64 + 1.0)))
        }
        Tail::PowerLog { c, .. } => {
            if to - from <= 2_000_000 {
                c * ksum((from..=to).map(|j| unit_term(t, j)))
            } else {
                c * (unit_tail_mass(t, from) - unit_tail_mass(t, to + 1))
            }
        }
    }
}

/// Mass of the unscaled (`c = 1`) tail law on `from..`.
pub(crate) fn unit_tail_mass(t: &Tail, from: u64) -> f64 {
    match *t {
        Tail::Gauss { .. } => (1.0 / from as f64).ln_1p() / std::f64::consts::LN_2,
        Tail::PowerLog { a, b, .. } => {
            const DIRECT: u64 = 100_000;
            let cut = from + DIRECT;
            let head = ksum((from..cut).map(|j| unit_term(t, j)));
            head + power_log_integral_tail(a, b, cut as f64 - 0.5)
        }
    }
}

/// `int_x0^inf x^-a ln(x+1)^-b dx`, the Euler-Maclaurin (midpoint) remainder of
/// the power-log series. Integrated in `u = ln x`; beyond `u = 60`,
/// `ln(e^u + 1) = u` to double precision and the remainder is closed form
/// (`a = 1`) or a short exponentially damped quadrature (`a > 1`).
fn power_log_integral_tail(a: f64, b: f64, x0: f64) -> f64 {
    let g = |u: f64| ((1.0 - a) * u).exp() * (u.exp().ln_1p()).powf(-b);
    let u0 = x0.ln();
    let u1 = u0.max(60.0);
    let near = if u1 > u0 {
        integrate(g, u0, u1, 400)
    } else {
        0.0
    };
    let far = if a == 1.0 {
        u1.powf(1.0 - b) / (b - 1.0)
    } else {
        let s = a - 1.0;
        let span = 60.0 / s;
        integrate(|u| (-s * u).exp() * u.powf(-b), u1, u1 + span, 400)
    };
    near + far
}

/// `(p_1, ..., p_{N-1}, 1 - sum_{j<N} p_j)`: the law with all mass of digits
/// `>= N` folded onto digit `N`.
pub fn truncate_frequencies(freq: &FrequencyVector, n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("alphabet bound must be at least 1"));
    }
    if n == 1 && (freq.p(1) - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::domain("N = 1 needs p_1 = 1"));
    }
    let mut out: Vec<f64> = (1..n).map(|j| freq.p(j)).collect();
    let head = ksum(out.iter().copied());
    let last = 1.0 - head;
    if last < -MASS_TOLERANCE {
        return Err(Error::domain(format!(
            "first {} frequencies already sum to {head} > 1",
            n - 1
        )));
    }
    out.push(last.max(0.0));
    Ok(out)
}
