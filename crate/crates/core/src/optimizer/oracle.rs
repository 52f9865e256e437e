use crate::error::{Error, Result};
use crate::markov::{truncate_frequencies, FrequencyVector};
use crate::numeric::phi;

use super::ratio;

const GRID_BUDGET: f64 = 1e8;

/// Brute-force maximum of the block ratio for `bound <= 3`, `k <= 2`: a grid
/// of spacing `resolution` over the stationary 2-block laws with the
/// truncated marginals, followed by a pattern search from the best node.
pub fn grid_oracle(freq: &FrequencyVector, bound: u64, k: usize, resolution: f64) -> Result<f64> {
    if bound > 3 || k > 2 || k == 0 {
        return Err(Error::Resource {
            what: "grid oracle instance",
            needed: (bound as f64).powi(k as i32),
            budget: 9.0,
        });
    }
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(Error::domain("resolution must lie in (0, 1)"));
    }
    let c = truncate_frequencies(freq, bound)?;
    let n = c.len();
    if k == 1 {
        let h = c.iter().map(|&p| phi(p)).sum::<f64>();
        let g = 2.0
            * c.iter()
                .enumerate()
                .map(|(i, &p)| p * ((i + 1) as f64).ln())
                .sum::<f64>();
        return Ok(ratio(h, g));
    }
    let free = (n - 1) * (n - 1);
    let upper: Vec<f64> = (0..free)
        .map(|v| c[v / (n - 1)].min(c[v % (n - 1)]))
        .collect();
    let steps: Vec<usize> = upper
        .iter()
        .map(|u| (u / resolution).floor() as usize + 1)
        .collect();
    let points: f64 = steps.iter().map(|&s| s as f64).product();
    if points > GRID_BUDGET {
        return Err(Error::Resource {
            what: "grid oracle points",
            needed: points,
            budget: GRID_BUDGET,
        });
    }
    let eval = |x: &[f64]| -> Option<f64> { block_ratio(&c, x) };
    let mut best = f64::NEG_INFINITY;
    let mut best_x = vec![0.0; free];
    let mut x = vec![0.0; free];
    let mut counter = vec![0usize; free];
    loop {
        for v in 0..free {
            x[v] = (counter[v] as f64 * resolution).min(upper[v]);
        }
        if let Some(r) = eval(&x) {
            if r > best {
                best = r;
                best_x.clone_from(&x);
            }
        }
        let mut v = 0;
        while v < free {
            counter[v] += 1;
            if counter[v] < steps[v] {
                break;
            }
            counter[v] = 0;
            v += 1;
        }
        if v == free {
            break;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Infeasible(
            "no grid point is a valid block law".into(),
        ));
    }
    let mut step = resolution;
    while step > 1e-13 {
        let mut improved = false;
        for v in 0..free {
            for dir in [1.0, -1.0] {
                let mut y = best_x.clone();
                y[v] = (y[v] + dir * step).clamp(0.0, upper[v]);
                if let Some(r) = eval(&y) {
                    if r > best {
                        best = r;
                        best_x = y;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best)
}

/// Block ratio of the 2-block law with free upper-left entries `x`, or `None`
/// when the completion has a negative entry.
fn block_ratio(c: &[f64], x: &[f64]) -> Option<f64> {
    let n = c.len();
    let m = n - 1;
    let mut p = vec![0.0; n * n];
    for i in 0..m {
        for j in 0..m {
            p[i * n + j] = x[i * m + j];
        }
    }
    for i in 0..m {
        p[i * n + m] = c[i] - (0..m).map(|j| p[i * n + j]).sum::<f64>();
    }
    for j in 0..n {
        p[m * n + j] = c[j] - (0..m).map(|i| p[i * n + j]).sum::<f64>();
    }
    if p.iter().any(|&v| v < -1e-15) {
        return None;
    }
    let mut h = 0.0;
    let mut g = 0.0;
    for a in 0..n {
        for b in 0..n {
            let v = p[a * n + b].max(0.0);
            let (da, db) = ((a + 1) as f64, (b + 1) as f64);
            h += phi(v);
            g -= 2.0 * v * (db / (da * db + 1.0)).ln();
        }
    }
    Some(ratio(h / 2.0, g))
}
