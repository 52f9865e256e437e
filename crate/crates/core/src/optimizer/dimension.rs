use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ratio, solve_alpha, SolverOptions, VariationalProblem};
use crate::error::{Error, Result};
use crate::markov::{FrequencyVector, LogMomentClass, MarkovMeasure};
use crate::numeric::{format_sig, ksum, phi};

/// Smallest growth of the log-denominator moment per unit of `ln ln N`
/// that counts as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 0.02;
/// A slope below this fraction of the previous one counts as flattening.
const FLATTENING_FACTOR: f64 = 0.95;

/// Bounds used by the trend test when the log-moment class is not known.
pub const TREND_BOUNDS: [u64; 6] = [10, 100, 1_000, 10_000, 100_000, 1_000_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceSource {
    Declared,
    Analytic,
    Trend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergencePoint {
    pub n: u64,
    /// `2 sum p(w) ln q_k(w)` at the truncated Bernoulli measure.
    pub moment: f64,
    /// `[-sum_{j<=N} p_j ln p_j] / [2 sum_{j<=N} p_j ln j]`.
    pub entropy_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub k: usize,
    pub points: Vec<DivergencePoint>,
    /// Growth of `moment` per unit of `ln ln N` between consecutive points.
    pub slopes: Vec<f64>,
    pub flag: bool,
    pub source: DivergenceSource,
}

/// Tracks `2 sum p ln q_k` at the truncated Bernoulli measure along the
/// bounds `n_list` and flags divergence of `sum p_j ln j` when the growth
/// per unit of `ln ln N` stays above [`DIVERGENCE_THRESHOLD`] without
/// flattening.
pub fn divergence_diagnostic(
    freq: &FrequencyVector,
    n_list: &[u64],
    k: usize,
) -> Result<DivergenceReport> {
    let mut ns: Vec<u64> = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() || ns[0] < 2 {
        return Err(Error::domain("divergence trend needs bounds N >= 2"));
    }
    let points = ns
        .par_iter()
        .map(|&n| {
            let b = MarkovMeasure::bernoulli(freq, n)?;
            let moment = 2.0 * b.log_qk_moment(k)?;
            let h = ksum((1..=n).map(|j| phi(freq.p(j))));
            let l = 2.0 * ksum((1..=n).map(|j| freq.p(j) * (j as f64).ln()));
            Ok(DivergencePoint {
                n,
                moment,
                entropy_ratio: ratio(h, l),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slopes: Vec<f64> = points
        .windows(2)
        .map(|w| {
            let x0 = (w[0].n as f64).ln().ln();
            let x1 = (w[1].n as f64).ln().ln();
            (w[1].moment - w[0].moment) / (x1 - x0)
        })
        .collect();
    let flag = match slopes.as_slice() {
        [] => false,
        [s] => *s > DIVERGENCE_THRESHOLD,
        [.., prev, last] => *last > DIVERGENCE_THRESHOLD && *last > FLATTENING_FACTOR * prev,
    };
    Ok(DivergenceReport {
        k,
        points,
        slopes,
        flag,
        source: DivergenceSource::Trend,
    })
}

/// `sum_{j > n} 8 / (j+1)^(2 gamma)`, the tail that must drop below 1 for the
/// covering bound at exponent `gamma`.
pub fn lipschitz_tail_sum(n: u64, gamma: f64) -> Result<f64> {
    let s = 2.0 * gamma;
    if !(s > 1.0) {
        return Err(Error::domain("tail sum needs gamma > 1/2"));
    }
    let start = n + 2;
    let cut = start + 100_000;
    let head = ksum((start..cut).map(|m| (m as f64).powf(-s)));
    // midpoint Euler-Maclaurin remainder
    let tail = (cut as f64 - 0.5).powf(1.0 - s) / (s - 1.0);
    Ok(8.0 * (head + tail))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub n: u64,
    pub k: usize,
    pub alpha: Option<f64>,
    pub rate_ratio: Option<f64>,
    pub bernoulli_ratio: Option<f64>,
    pub theta_iterations: usize,
    pub dual_iterations: usize,
    pub dual_residual: Option<f64>,
    pub feasibility_residual: Option<f64>,
    /// `|alpha - ratio recomputed from the argmax|`.
    pub consistency_residual: Option<f64>,
    pub inner_gap: Option<f64>,
    pub theta_sequence: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub failure: Option<Error>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub sup_term: f64,
    /// Whether the supremum exceeded 1 and the value was capped.
    pub clamped: bool,
    pub divergence: bool,
    pub divergence_report: DivergenceReport,
    pub cells: Vec<CellResult>,
}

/// Evaluates the ratio program on every cell of `n_list x k_list` and
/// assembles `max(1/2, sup)`, forced to `1/2` in the divergent regime.
pub fn dimension(
    freq: &FrequencyVector,
    n_list: &[u64],
    k_list: &[usize],
    options: &SolverOptions,
) -> Result<DimensionEstimate> {
    if n_list.is_empty() || k_list.is_empty() {
        return Err(Error::domain("N and k lists must be nonempty"));
    }
    let mut grid: Vec<(u64, usize)> = n_list
        .iter()
        .flat_map(|&n| k_list.iter().map(move |&k| (n, k)))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    let cells: Vec<CellResult> = grid
        .par_iter()
        .map(|&(n, k)| run_cell(freq, n, k, options))
        .collect();

    let class = freq.log_moment_class();
    let trend = divergence_diagnostic(freq, &TREND_BOUNDS, 1)?;
    let (divergence, source) = match class {
        LogMomentClass::Unknown => (trend.flag, DivergenceSource::Trend),
        c => {
            let declared = freq.analytic_log_moment_class() != c;
            (
                c == LogMomentClass::Infinite,
                if declared {
                    DivergenceSource::Declared
                } else {
                    DivergenceSource::Analytic
                },
            )
        }
    };
    let divergence_report = DivergenceReport {
        flag: divergence,
        source,
        ..trend
    };

    let solved: Vec<f64> = cells.iter().filter_map(|c| c.alpha).collect();
    if solved.is_empty() {
        let err = cells.iter().find_map(|c| c.failure.clone());
        return Err(err.unwrap_or_else(|| Error::domain("no cell was solved")));
    }
    let sup_term = solved.iter().copied().fold(0.0, f64::max);
    let value = if divergence {
        0.5
    } else {
        sup_term.clamp(0.5, 1.0)
    };
    Ok(DimensionEstimate {
        value,
        sup_term,
        clamped: sup_term > 1.0,
        divergence,
        divergence_report,
        cells,
    })
}

fn run_cell(freq: &FrequencyVector, n: u64, k: usize, options: &SolverOptions) -> CellResult {
    let start = Instant::now();
    let mut cell = CellResult {
        n,
        k,
        alpha: None,
        rate_ratio: None,
        bernoulli_ratio: None,
        theta_iterations: 0,
        dual_iterations: 0,
        dual_residual: None,
        feasibility_residual: None,
        consistency_residual: None,
        inner_gap: None,
        theta_sequence: Vec::new(),
        wall_time_ms: None,
        error: None,
        failure: None,
    };
    let outcome = VariationalProblem::new(freq, n, k, options.clone()).and_then(|p| {
        let sol = solve_alpha(&p)?;
        let numerator = match options.objective {
            super::Objective::BlockEntropy => sol.argmax.block_entropy(k)? / k as f64,
            super::Objective::EntropyRate => sol.argmax.entropy_rate(),
        };
        let again = ratio(numerator, sol.argmax.lyapunov_functional(k)?);
        Ok((sol, again))
    });
    match outcome {
        Ok((sol, again)) => {
            let d = sol.diagnostics;
            cell.alpha = Some(sol.alpha);
            cell.rate_ratio = Some(d.rate_ratio);
            cell.bernoulli_ratio = Some(d.bernoulli_ratio);
            cell.theta_iterations = d.outer_iterations;
            cell.dual_iterations = d.dual_iterations;
            cell.dual_residual = Some(d.dual_residual);
            cell.feasibility_residual = Some(d.feasibility_residual);
            cell.consistency_residual = Some((sol.alpha - again).abs());
            cell.inner_gap = Some(d.inner_gap);
            cell.theta_sequence = d.theta_sequence;
        }
        Err(e) => {
            cell.error = Some(e.to_string());
            cell.failure = Some(e);
        }
    }
    cell.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    cell
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format_sig(v, 12)).unwrap_or_default()
}

impl DimensionEstimate {
    /// Drops wall-clock measurements so that repeated runs serialize
    /// identically.
    pub fn without_timing(mut self) -> Self {
        for c in &mut self.cells {
            c.wall_time_ms = None;
        }
        self
    }

    /// Copy with every float rounded to 12 significant digits.
    pub fn rounded(&self) -> Self {
        use crate::numeric::round_sig;
        let r = |x: f64| round_sig(x, 12);
        let ro = |x: Option<f64>| x.map(r);
        let mut out = self.clone();
        out.value = r(out.value);
        out.sup_term = r(out.sup_term);
        for p in &mut out.divergence_report.points {
            p.moment = r(p.moment);
            p.entropy_ratio = r(p.entropy_ratio);
        }
        out.divergence_report
            .slopes
            .iter_mut()
            .for_each(|s| *s = r(*s));
        for c in &mut out.cells {
            c.alpha = ro(c.alpha);
            c.rate_ratio = ro(c.rate_ratio);
            c.bernoulli_ratio = ro(c.bernoulli_ratio);
            c.dual_residual = ro(c.dual_residual);
            c.feasibility_residual = ro(c.feasibility_residual);
            c.consistency_residual = ro(c.consistency_residual);
            c.inner_gap = ro(c.inner_gap);
            c.wall_time_ms = ro(c.wall_time_ms);
            c.theta_sequence.iter_mut().for_each(|t| *t = r(*t));
        }
        out
    }

    /// The cell table followed by a one-row summary, both as CSV.
    pub fn to_csv(&self) -> String {
        let timing = self.cells.iter().any(|c| c.wall_time_ms.is_some());
        let mut s = String::from(
            "N,k,alpha,rate_ratio,bernoulli_ratio,theta_iterations,dual_iterations,dual_residual,feasibility_residual,consistency_residual,divergence",
        );
        if timing {
            s.push_str(",wall_time_ms");
        }
        s.push_str(",error\n");
        for c in &self.cells {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                c.n,
                c.k,
                opt(c.alpha),
                opt(c.rate_ratio),
                opt(c.bernoulli_ratio),
                c.theta_iterations,
                c.dual_iterations,
                opt(c.dual_residual),
                opt(c.feasibility_residual),
                opt(c.consistency_residual),
                self.divergence
            );
            if timing {
                let _ = write!(s, ",{}", opt(c.wall_time_ms));
            }
            let err = c.error.as_deref().unwrap_or("").replace(['"', ','], ";");
            let _ = writeln!(s, ",{err}");
        }
        let _ = writeln!(
            s,
            "\nvalue,sup_term,clamped,divergence\n{},{},{},{}",
            format_sig(self.value, 12),
            format_sig(self.sup_term, 12),
            self.clamped,
            self.divergence
        );
        s
    }
}
