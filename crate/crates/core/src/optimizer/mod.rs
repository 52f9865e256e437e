//! Maximization of the ratio of block entropy to the Lyapunov functional over
//! finite-order Markov measures with prescribed digit marginals.

mod dimension;
mod gibbs;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{truncate_frequencies, CylinderGeometry, FrequencyVector, MarkovMeasure};

pub use dimension::{
    dimension, divergence_diagnostic, lipschitz_tail_sum, CellResult, DimensionEstimate,
    DivergencePoint, DivergenceReport, DivergenceSource, DIVERGENCE_THRESHOLD, TREND_BOUNDS,
};
pub use oracle::grid_oracle;

/// Numerator of the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `(1/k) H_k`, the entropy of `k`-cylinders per digit.
    #[default]
    BlockEntropy,
    /// The entropy rate `h_P`.
    EntropyRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub objective: Objective,
    pub damping: f64,
    pub marginal_tolerance: f64,
    pub outer_tolerance: f64,
    pub max_outer: usize,
    pub max_dual: usize,
    pub max_power: usize,
    pub eigen_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            objective: Objective::BlockEntropy,
            damping: 0.5,
            marginal_tolerance: 1e-8,
            outer_tolerance: 1e-10,
            max_outer: 100,
            max_dual: 500,
            max_power: 10_000,
            eigen_tolerance: 1e-12,
        }
    }
}

/// One instance of the constrained ratio program at alphabet bound `n` and
/// cylinder depth `k`.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub bound: u64,
    pub k: usize,
    /// Truncated frequencies on `{1..bound}`.
    pub marginals: Vec<f64>,
    pub options: SolverOptions,
}

impl VariationalProblem {
    pub fn new(
        freq: &FrequencyVector,
        bound: u64,
        k: usize,
        options: SolverOptions,
    ) -> Result<Self> {
        Self::from_marginals(truncate_frequencies(freq, bound)?, k, options)
    }

    pub fn from_marginals(marginals: Vec<f64>, k: usize, options: SolverOptions) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        if marginals.is_empty() {
            return Err(Error::domain("empty marginal vector"));
        }
        Ok(VariationalProblem {
            bound: marginals.len() as u64,
            k,
            marginals,
            options,
        })
    }

    /// Digits with positive prescribed mass.
    pub fn alphabet(&self) -> Vec<u64> {
        (1..=self.bound)
            .filter(|&j| self.marginals[j as usize - 1] > 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Dinkelbach levels, starting from the Bernoulli ratio.
    pub theta_sequence: Vec<f64>,
    pub outer_iterations: usize,
    pub dual_iterations: usize,
    pub inner_iterations: usize,
    /// Largest marginal mismatch of the last dual iterate.
    pub dual_residual: f64,
    /// Largest marginal mismatch of the returned measure.
    pub feasibility_residual: f64,
    /// Final `max_P [numerator - theta denominator]`.
    pub inner_gap: f64,
    pub bernoulli_ratio: f64,
    /// Entropy rate over the Lyapunov functional at the argmax.
    pub rate_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct AlphaSolution {
    pub alpha: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub argmax: MarkovMeasure,
    pub diagnostics: Diagnostics,
}

/// `numerator / denominator`, taking `0/0 = 0`.
pub fn ratio(numerator: f64, denominator: f64) -> f64 {
    if numerator <= 0.0 {
        0.0
    } else {
        numerator / denominator
    }
}

/// Numerator and denominator of the ratio at `measure`.
pub fn evaluate(
    measure: &MarkovMeasure,
    k: usize,
    objective: Objective,
    geometry: &CylinderGeometry,
) -> Result<(f64, f64)> {
    let num = match objective {
        Objective::BlockEntropy => measure.block_entropy(k)? / k as f64,
        Objective::EntropyRate => measure.entropy_rate(),
    };
    Ok((num, measure.lyapunov_with(geometry)?))
}

fn marginal_residual(measure: &MarkovMeasure, target: &[f64]) -> f64 {
    measure
        .digit_marginals()
        .iter()
        .zip(target)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Maximizes the ratio over `(k-1)`-step Markov measures on the support of
/// the marginals whose digit marginals match them.
pub fn solve_alpha(problem: &VariationalProblem) -> Result<AlphaSolution> {
    let opts = &problem.options;
    let k = problem.k;
    let alphabet = problem.alphabet();
    if alphabet.is_empty() {
        return Err(Error::Infeasible("no digit carries mass".into()));
    }
    let a = alphabet.len();
    let target: Vec<f64> = alphabet
        .iter()
        .map(|&j| problem.marginals[j as usize - 1])
        .collect();
    let geometry = CylinderGeometry::new(&alphabet, k)?;
    let bernoulli = MarkovMeasure::bernoulli_from_probs(&problem.marginals)?;
    let (bn, bd) = evaluate(&bernoulli, k, opts.objective, &geometry)?;
    let theta0 = ratio(bn, bd);
    let rate_of = |m: &MarkovMeasure| -> Result<f64> {
        Ok(ratio(m.entropy_rate(), m.lyapunov_with(&geometry)?))
    };

    // one digit, or order 0: the Bernoulli law is the only feasible point
    if a == 1 || k == 1 {
        return Ok(AlphaSolution {
            alpha: theta0,
            numerator: bn,
            denominator: bd,
            diagnostics: Diagnostics {
                theta_sequence: vec![theta0],
                outer_iterations: 0,
                dual_iterations: 0,
                inner_iterations: 0,
                dual_residual: 0.0,
                feasibility_residual: marginal_residual(&bernoulli, &problem.marginals),
                inner_gap: 0.0,
                bernoulli_ratio: theta0,
                rate_ratio: rate_of(&bernoulli)?,
            },
            argmax: bernoulli,
        });
    }

    let size = geometry.len();
    let digit_of = |i: usize, pos: usize| -> usize { i / a.pow((k - 1 - pos) as u32) % a };
    let mut beta = vec![0.0; a];
    let mut lambda = Vec::new();
    let mut thetas = vec![theta0];
    let mut theta = theta0;
    let mut dual_total = 0;
    let mut inner_total = 0;

    for outer in 1..=opts.max_outer {
        // dual ascent on the digit multipliers at level theta
        let mut residual = f64::INFINITY;
        let mut table = Vec::new();
        for _ in 0..opts.max_dual {
            dual_total += 1;
            let sol = match opts.objective {
                Objective::BlockEntropy => {
                    let logw: Vec<f64> = (0..size)
                        .map(|i| {
                            2.0 * k as f64 * theta * geometry.ln_value[i]
                                + (0..k).map(|pos| beta[digit_of(i, pos)]).sum::<f64>()
                        })
                        .collect();
                    gibbs::block_gibbs(a, k, &logw, &mut lambda, 1e-13, opts.max_power)?
                }
                Objective::EntropyRate => {
                    let psi: Vec<f64> = (0..size)
                        .map(|i| 2.0 * theta * geometry.ln_value[i] + beta[digit_of(i, k - 1)])
                        .collect();
                    gibbs::rate_gibbs(a, k, &psi, opts.eigen_tolerance, opts.max_power)?
                }
            };
            inner_total += sol.iterations;
            let mut marg = vec![0.0; a];
            for (i, &p) in sol.table.iter().enumerate() {
                marg[digit_of(i, 0)] += p;
            }
            residual = marg
                .iter()
                .zip(&target)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            table = sol.table;
            if residual <= 0.1 * opts.marginal_tolerance {
                break;
            }
            for j in 0..a {
                beta[j] += opts.damping * (target[j] / marg[j].max(f64::MIN_POSITIVE)).ln();
            }
            // a common shift of all multipliers is a gauge; pin the largest digit at 0
            let last = beta[a - 1];
            beta.iter_mut().for_each(|b| *b -= last);
        }
        if residual > 0.1 * opts.marginal_tolerance {
            return Err(Error::NonConvergence {
                stage: "dual ascent",
                iterations: opts.max_dual,
                residual,
            });
        }
        let measure =
            MarkovMeasure::from_block_probabilities(problem.bound, alphabet.clone(), k, &table)?;
        let (num, den) = evaluate(&measure, k, opts.objective, &geometry)?;
        let gap = num - theta * den;
        let next = ratio(num, den);
        if gap <= opts.outer_tolerance {
            let feasibility = marginal_residual(&measure, &problem.marginals);
            if feasibility > opts.marginal_tolerance {
                return Err(Error::NonConvergence {
                    stage: "marginal matching",
                    iterations: dual_total,
                    residual: feasibility,
                });
            }
            let rate_ratio = rate_of(&measure)?;
            // the Bernoulli point is feasible, so a worse Gibbs point means the
            // level was already optimal
            let (measure, num, den) = if next < theta0 {
                (bernoulli, bn, bd)
            } else {
                (measure, num, den)
            };
            return Ok(AlphaSolution {
                alpha: ratio(num, den),
                numerator: num,
                denominator: den,
                argmax: measure,
                diagnostics: Diagnostics {
                    theta_sequence: thetas,
                    outer_iterations: outer,
                    dual_iterations: dual_total,
                    inner_iterations: inner_total,
                    dual_residual: residual,
                    feasibility_residual: feasibility,
                    inner_gap: gap.max(0.0),
                    bernoulli_ratio: theta0,
                    rate_ratio,
                },
            });
        }
        theta = theta.max(next);
        thetas.push(theta);
    }
    Err(Error::NonConvergence {
        stage: "Dinkelbach iteration",
        iterations: opts.max_outer,
        residual: f64::NAN,
    })
}
