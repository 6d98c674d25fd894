//! Entropic transport with log-domain Sinkhorn iterations and epsilon
//! scaling. Plans are rounded onto the transport polytope before they are
//! returned, so reported values are costs of feasible plans.

use super::{check_shape, Coupling, CostMatrix};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

pub(crate) const DEFAULT_EPSILON_FACTOR: f64 = 0.05;
pub(crate) const DEFAULT_TOL: f64 = 1e-9;
pub(crate) const DEFAULT_MAX_ITER: usize = 10_000;

// an intermediate epsilon is left once its marginals are this close, or
// after STAGE_MAX_ITERS sweeps; checked every STAGE_CHECK sweeps
const STAGE_TOL: f64 = 1e-6;
const STAGE_MAX_ITERS: usize = 500;
const STAGE_CHECK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SinkhornParams {
    /// Defaults: `epsilon = 0.05 * median positive cost`.
    pub fn for_cost(cost: &CostMatrix) -> Self {
        let med = cost.median_positive();
        SinkhornParams {
            epsilon: if med > 0.0 { DEFAULT_EPSILON_FACTOR * med } else { 1.0 },
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub coupling: Coupling,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Marginal violation of the unrounded plan at exit.
    pub violation: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn row_violation(f: &[f64], g: &[f64], c: &[f64], pa: &[f64], kc: usize, eps: f64) -> f64 {
    (0..pa.len())
        .map(|i| {
            let s: f64 = (0..kc).map(|j| ((f[i] + g[j] - c[i * kc + j]) / eps).exp()).sum();
            (s - pa[i]).abs()
        })
        .fold(0.0, f64::max)
}

pub fn sinkhorn_coupling(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cost: &CostMatrix,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornOutput> {
    check_shape(a, b, cost)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a.weights()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|&j| b.weights()[j] > 0.0).collect();
    let (kr, kc) = (rows.len(), cols.len());
    let pa: Vec<f64> = rows.iter().map(|&i| a.weights()[i]).collect();
    let pb: Vec<f64> = cols.iter().map(|&j| b.weights()[j]).collect();
    let log_a: Vec<f64> = pa.iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = pb.iter().map(|w| w.ln()).collect();
    let c: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| cost.get(i, j)))
        .collect();
    let max_cost = c.iter().fold(0.0f64, |m, &x| m.max(x));

    let mut f = vec![0.0; kr];
    let mut g = vec![0.0; kc];
    let mut eps = max_cost.max(epsilon);
    let mut iterations = 0;
    let mut stage = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;

    while iterations < max_iter {
        for i in 0..kr {
            let row = &c[i * kc..(i + 1) * kc];
            let lse = log_sum_exp((0..kc).map(|j| (g[j] - row[j]) / eps));
            f[i] = eps * (log_a[i] - lse);
        }
        for j in 0..kc {
            let lse = log_sum_exp((0..kr).map(|i| (f[i] - c[i * kc + j]) / eps));
            g[j] = eps * (log_b[j] - lse);
        }
        iterations += 1;
        if f.iter().chain(&g).any(|x| !x.is_finite()) {
            return Err(Error::SinkhornOverflow { epsilon, max_cost });
        }
        if eps > epsilon {
            stage += 1;
            if stage % STAGE_CHECK == 0
                && (stage >= STAGE_MAX_ITERS || row_violation(&f, &g, &c, &pa, kc, eps) < STAGE_TOL)
            {
                stage = 0;
                eps = (eps * 0.5).max(epsilon);
            }
            continue;
        }
        // columns are exact after the g-update; measure the row error
        violation = row_violation(&f, &g, &c, &pa, kc, eps);
        if violation < tol {
            converged = true;
            break;
        }
    }

    let mut plan: Vec<f64> = (0..kr * kc)
        .map(|idx| {
            let (i, j) = (idx / kc, idx % kc);
            ((f[i] + g[j] - c[idx]) / eps).exp()
        })
        .collect();
    if plan.iter().any(|x| !x.is_finite()) {
        return Err(Error::SinkhornOverflow { epsilon, max_cost });
    }
    round_to_polytope(&mut plan, &pa, &pb);

    let (r, cc) = (a.len(), b.len());
    let mut full = vec![0.0; r * cc];
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            full[i * cc + j] = plan[ri * kc + ci];
        }
    }
    let coupling = Coupling::new(full, a.weights().to_vec(), b.weights().to_vec());
    let value = coupling.cost(cost);
    Ok(SinkhornOutput {
        coupling,
        value,
        converged,
        iterations,
        violation,
    })
}

/// Projects a positive matrix onto the transport polytope: shrink rows and
/// columns that carry too much mass, then add the rank-one correction.
fn round_to_polytope(plan: &mut [f64], pa: &[f64], pb: &[f64]) {
    let (kr, kc) = (pa.len(), pb.len());
    for i in 0..kr {
        let row = &mut plan[i * kc..(i + 1) * kc];
        let s: f64 = row.iter().sum();
        if s > pa[i] {
            let x = pa[i] / s;
            row.iter_mut().for_each(|v| *v *= x);
        }
    }
    for j in 0..kc {
        let s: f64 = (0..kr).map(|i| plan[i * kc + j]).sum();
        if s > pb[j] {
            let y = pb[j] / s;
            for i in 0..kr {
                plan[i * kc + j] *= y;
            }
        }
    }
    let err_r: Vec<f64> = (0..kr)
        .map(|i| (pa[i] - plan[i * kc..(i + 1) * kc].iter().sum::<f64>()).max(0.0))
        .collect();
    let err_c: Vec<f64> = (0..kc)
        .map(|j| (pb[j] - (0..kr).map(|i| plan[i * kc + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..kr {
            for j in 0..kc {
                plan[i * kc + j] += err_r[i] * err_c[j] / total;
            }
        }
    }
}
