//! Unconstrained maximizers of `entropy + <potential>` over stationary
//! block laws on `A^k`.

use crate::error::{Error, Result};

fn lse(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Result of one inner maximization.
#[derive(Debug, Clone)]
pub(crate) struct GibbsSolution {
    /// Block law on `A^k`, base-`A` indexed.
    pub table: Vec<f64>,
    /// Optimal value of the inner objective.
    #[cfg_attr(not(test), allow(dead_code))]
    pub value: f64,
    pub iterations: usize,
}

/// Maximizes `H(p) + sum p(w) logw(w)` over shift-consistent laws `p` on
/// `A^k`. The maximizer is `p(w) = exp(logw(w) + l(pre w) - l(suf w)) / Z`
/// where `l` balances the weighted de Bruijn graph on `A^(k-1)`; the value is
/// `ln Z`. `lambda` is a warm start and receives the balancing potential.
pub(crate) fn block_gibbs(
    a: usize,
    k: usize,
    logw: &[f64],
    lambda: &mut Vec<f64>,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<GibbsSolution> {
    let nodes = a.pow(k as u32 - 1);
    if lambda.len() != nodes {
        *lambda = vec![0.0; nodes];
    }
    let mut sweeps = 0;
    if nodes > 1 {
        loop {
            let mut worst: f64 = 0.0;
            for v in 0..nodes {
                let (out, inn) = flows(a, nodes, logw, lambda, v);
                worst = worst.max(((lambda[v] + out) - (inn - lambda[v])).abs());
                lambda[v] = 0.5 * (inn - out);
            }
            sweeps += 1;
            if worst <= tolerance {
                break;
            }
            if sweeps >= max_sweeps {
                return Err(Error::NonConvergence {
                    stage: "graph balancing",
                    iterations: sweeps,
                    residual: worst,
                });
            }
        }
    }
    let logits: Vec<f64> = (0..logw.len())
        .map(|i| logw[i] + lambda[i / a] - lambda[i % nodes])
        .collect();
    let value = lse(logits.iter().copied());
    let table = logits.iter().map(|x| (x - value).exp()).collect();
    Ok(GibbsSolution {
        table,
        value,
        iterations: sweeps,
    })
}

/// Log of the flow leaving and entering node `v`, excluding the self-loop.
fn flows(a: usize, nodes: usize, logw: &[f64], lambda: &[f64], v: usize) -> (f64, f64) {
    let out = lse((v * a..v * a + a)
        .filter(|&i| i % nodes != v)
        .map(|i| logw[i] - lambda[i % nodes]));
    let inn = lse((0..a)
        .map(|u| u * nodes + v)
        .filter(|&i| i / a != v)
        .map(|i| logw[i] + lambda[i / a]));
    (out, inn)
}

/// Maximizes `h_P + sum p(w) psi(w)` over `(k-1)`-step Markov measures. The
/// maximizer is built from the Perron data of the transfer matrix
/// `T(s, s') = exp(psi(s a))`, `s' = suffix(s a)`; the value is `ln rho`.
/// Eigenvectors are normalized so `<l, r> = 1` with positive first entries.
pub(crate) fn rate_gibbs(
    a: usize,
    k: usize,
    psi: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<GibbsSolution> {
    let states = a.pow(k as u32 - 1);
    let shift = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = psi.iter().map(|x| (x - shift).exp()).collect();
    let apply_right = |r: &[f64]| -> Vec<f64> {
        (0..states)
            .map(|s| (0..a).map(|j| w[s * a + j] * r[(s * a + j) % states]).sum())
            .collect()
    };
    let apply_left = |l: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; states];
        for s in 0..states {
            for j in 0..a {
                out[(s * a + j) % states] += l[s] * w[s * a + j];
            }
        }
        out
    };
    let (rho, r, it_r) = perron(
        &apply_right,
        states,
        tolerance,
        max_iterations,
        "right Perron vector",
    )?;
    let (_, mut l, it_l) = perron(
        &apply_left,
        states,
        tolerance,
        max_iterations,
        "left Perron vector",
    )?;
    let dot: f64 = l.iter().zip(&r).map(|(x, y)| x * y).sum();
    l.iter_mut().for_each(|x| *x /= dot);
    let table: Vec<f64> = (0..states * a)
        .map(|i| l[i / a] * w[i] * r[i % states] / rho)
        .collect();
    let total: f64 = table.iter().sum();
    Ok(GibbsSolution {
        table: table.into_iter().map(|x| x / total).collect(),
        value: rho.ln() + shift,
        iterations: it_r + it_l,
    })
}

fn perron<F: Fn(&[f64]) -> Vec<f64>>(
    apply: &F,
    n: usize,
    tolerance: f64,
    max_iterations: usize,
    stage: &'static str,
) -> Result<(f64, Vec<f64>, usize)> {
    let mut v = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iterations {
        let next = apply(&v);
        let norm: f64 = next.iter().sum();
        let next: Vec<f64> = next.into_iter().map(|x| x / norm).collect();
        // eigen-residual of the previous iterate, relative to rho
        let av = apply(&next);
        let rho: f64 = av.iter().sum();
        residual = av
            .iter()
            .zip(&next)
            .map(|(x, y)| (x - rho * y).abs())
            .sum::<f64>()
            / rho;
        v = next;
        if residual <= tolerance {
            return Ok((rho, v, it));
        }
        // averaging with the identity damps periodic oscillation
        v = av
            .iter()
            .zip(&v)
            .map(|(x, y)| 0.5 * (x / rho + y))
            .collect();
    }
    Err(Error::NonConvergence {
        stage,
        iterations: max_iterations,
        residual,
    })
}
