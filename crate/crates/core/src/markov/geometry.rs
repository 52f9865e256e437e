use num_bigint::BigUint;
use rayon::prelude::*;

use crate::cf::Recursion;
use crate::error::{Error, Result};
use crate::numeric::ln_biguint;

/// Largest number of dense `k`-cylinders any table may hold.
pub const CYLINDER_BUDGET: f64 = 1e7;

pub(crate) fn check_budget(what: &'static str, alphabet: usize, k: usize) -> Result<usize> {
    let needed = (alphabet as f64).powi(k as i32);
    if needed > CYLINDER_BUDGET {
        return Err(Error::Resource {
            what,
            needed,
            budget: CYLINDER_BUDGET,
        });
    }
    Ok(alphabet.pow(k as u32))
}

/// Per-cylinder logarithms for every word of length `k` over `alphabet`,
/// indexed in base `|alphabet|` with the first digit most significant.
#[derive(Debug, Clone)]
pub struct CylinderGeometry {
    pub alphabet: Vec<u64>,
    pub k: usize,
    /// `ln(p_k / q_k)`.
    pub ln_value: Vec<f64>,
    /// `ln q_k`.
    pub ln_q: Vec<f64>,
    /// `ln |I(w)| = -ln(q_k (q_k + q_{k-1}))`.
    pub ln_length: Vec<f64>,
}

impl CylinderGeometry {
    pub fn new(alphabet: &[u64], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("cylinder depth must be at least 1"));
        }
        if alphabet.is_empty() || alphabet.contains(&0) {
            return Err(Error::domain("alphabet must be nonempty positive digits"));
        }
        let size = check_budget("cylinder geometry", alphabet.len(), k)?;
        let a = alphabet.len();
        let rows: Vec<(f64, f64, f64)> = (0..size)
            .into_par_iter()
            .with_min_len(4096)
            .map(|idx| {
                let mut digits = vec![0u64; k];
                let mut r = idx;
                for slot in digits.iter_mut().rev() {
                    *slot = alphabet[r % a];
                    r /= a;
                }
                logs(&digits)
            })
            .collect();
        let mut ln_value = Vec::with_capacity(size);
        let mut ln_q = Vec::with_capacity(size);
        let mut ln_length = Vec::with_capacity(size);
        for (v, q, l) in rows {
            ln_value.push(v);
            ln_q.push(q);
            ln_length.push(l);
        }
        Ok(CylinderGeometry {
            alphabet: alphabet.to_vec(),
            k,
            ln_value,
            ln_q,
            ln_length,
        })
    }

    pub fn len(&self) -> usize {
        self.ln_q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_q.is_empty()
    }
}

fn logs(digits: &[u64]) -> (f64, f64, f64) {
    match small_convergent(digits) {
        Some((p, q, q_prev)) => {
            let (pf, qf) = (p as f64, q as f64);
            (
                pf.ln() - qf.ln(),
                qf.ln(),
                -(qf.ln() + ((q + q_prev) as f64).ln()),
            )
        }
        None => {
            let mut r = Recursion::new();
            for &d in digits {
                r.step(&BigUint::from(d));
            }
            let Recursion { p, q, q_prev, .. } = r;
            let lq = ln_biguint(&q);
            (ln_biguint(&p) - lq, lq, -(lq + ln_biguint(&(&q + &q_prev))))
        }
    }
}

fn small_convergent(digits: &[u64]) -> Option<(u128, u128, u128)> {
    let (mut p, mut p_prev) = (0u128, 1u128);
    let (mut q, mut q_prev) = (1u128, 0u128);
    for &d in digits {
        let d = d as u128;
        let np = d.checked_mul(p)?.checked_add(p_prev)?;
        let nq = d.checked_mul(q)?.checked_add(q_prev)?;
        p_prev = p;
        p = np;
        q_prev = q;
        q = nq;
    }
    q.checked_add(q_prev)?;
    Some((p, q, q_prev))
}
