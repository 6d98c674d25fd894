//! Optimal transport between discrete measures under squared Euclidean
//! cost: exact network simplex, log-domain Sinkhorn, and `W_2`.

mod network_simplex;
mod sinkhorn;

pub(crate) use network_simplex::{solve as solve_flow, FlowNetwork};
pub use sinkhorn::{sinkhorn_coupling, SinkhornOutput, SinkhornParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// Pairwise squared distances between the atoms of two measures, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::Empty("cost matrix"));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidParameter("ragged cost matrix".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::NonFinite("cost matrix"));
        }
        Ok(CostMatrix { rows: r, cols: c, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x))
    }

    /// Median of the strictly positive entries, or 0 if there are none.
    pub fn median_positive(&self) -> f64 {
        let mut v: Vec<f64> = self.data.iter().copied().filter(|&x| x > 0.0).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

/// `entry(i, j) = ||a_i - b_j||^2`.
pub fn cost_matrix(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let rows = a.len();
    let cols = b.len();
    let mut data = Vec::with_capacity(rows * cols);
    for x in a.atoms() {
        for y in b.atoms() {
            data.push(x.sq_dist(y));
        }
    }
    Ok(CostMatrix { rows, cols, data })
}

/// A transport plan together with its prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    plan: Vec<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl Coupling {
    pub(crate) fn new(plan: Vec<f64>, row_marginal: Vec<f64>, col_marginal: Vec<f64>) -> Self {
        let rows = row_marginal.len();
        let cols = col_marginal.len();
        debug_assert_eq!(plan.len(), rows * cols);
        Coupling {
            rows,
            cols,
            plan,
            row_marginal,
            col_marginal,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.plan[i * self.cols..(i + 1) * self.cols]
    }

    pub fn plan(&self) -> &[f64] {
        &self.plan
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, x) in s.iter_mut().zip(self.row(i)) {
                *acc += x;
            }
        }
        s
    }

    /// Largest absolute deviation of row or column sums from the marginals.
    pub fn marginal_violation(&self) -> f64 {
        let r = self
            .row_sums()
            .iter()
            .zip(&self.row_marginal)
            .fold(0.0f64, |m, (s, p)| m.max((s - p).abs()));
        self.col_sums()
            .iter()
            .zip(&self.col_marginal)
            .fold(r, |m, (s, p)| m.max((s - p).abs()))
    }

    /// Frobenius product with a cost matrix of the same shape.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.plan.iter().zip(cost.as_slice()).map(|(t, c)| t * c).sum()
    }
}

fn check_shape(a: &DiscreteMeasure, b: &DiscreteMeasure, cost: &CostMatrix) -> Result<()> {
    if cost.rows() != a.len() || cost.cols() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "cost matrix is {}x{}, supports are {}x{}",
            cost.rows(),
            cost.cols(),
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Exact optimal plan plus dual potentials `(f, g)` with
/// `f_i + g_j <= C_ij`, tight on the plan's support. `f` is defined for
/// every row (zero-weight rows via the c-transform of `g`).
#[derive(Debug, Clone)]
pub(crate) struct ExactTransport {
    pub coupling: Coupling,
    pub value: f64,
    pub row_potential: Vec<f64>,
}

pub(crate) fn exact_transport(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cost: &CostMatrix,
) -> Result<ExactTransport> {
    check_shape(a, b, cost)?;
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a.weights()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..b.len()).filter(|&j| b.weights()[j] > 0.0).collect();
    let (r, c) = (a.len(), b.len());
    let mut plan = vec![0.0; r * c];
    let mut g = vec![0.0; c];

    if rows.len() == 1 || cols.len() == 1 {
        // only one feasible plan
        for &i in &rows {
            for &j in &cols {
                plan[i * c + j] = a.weights()[i] * b.weights()[j];
            }
        }
        if rows.len() == 1 {
            let i0 = rows[0];
            for &j in &cols {
                g[j] = cost.get(i0, j);
            }
        }
        // with a single column, g = 0 and f_i = C_i,j0
    } else {
        let kr = rows.len();
        let mut supply: Vec<f64> = rows.iter().map(|&i| a.weights()[i]).collect();
        supply.extend(cols.iter().map(|&j| -b.weights()[j]));
        let mut net = FlowNetwork::with_nodes(supply);
        for (ri, &i) in rows.iter().enumerate() {
            for (ci, &j) in cols.iter().enumerate() {
                net.add_arc(ri, kr + ci, cost.get(i, j));
            }
        }
        let sol = solve_flow(&net)?;
        let mut e = 0;
        for &i in &rows {
            for &j in &cols {
                plan[i * c + j] = sol.flow[e];
                e += 1;
            }
        }
        let pi_min = sol.potential[kr..].iter().fold(f64::INFINITY, |m, &x| m.min(x));
        for (ci, &j) in cols.iter().enumerate() {
            g[j] = sol.potential[kr + ci] - pi_min;
        }
    }

    // c-transform gives the tightest row potentials for every row
    let row_potential: Vec<f64> = (0..r)
        .map(|i| {
            cols.iter()
                .map(|&j| cost.get(i, j) - g[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let coupling = Coupling::new(plan, a.weights().to_vec(), b.weights().to_vec());
    let value = coupling.cost(cost);
    Ok(ExactTransport {
        coupling,
        value,
        row_potential,
    })
}

/// Optimal coupling and its cost `<T, C>`.
pub fn exact_coupling(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cost: &CostMatrix,
) -> Result<(Coupling, f64)> {
    let t = exact_transport(a, b, cost)?;
    Ok((t.coupling, t.value))
}

/// Solver used for a transport problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransportMethod {
    #[default]
    Exact,
    Sinkhorn,
}

/// `W_2(a, b)`.
pub fn wasserstein2(a: &DiscreteMeasure, b: &DiscreteMeasure, method: TransportMethod) -> Result<f64> {
    Ok(squared_w2(a, b, method)?.sqrt())
}

/// `W_2^2(a, b)`.
pub fn squared_w2(a: &DiscreteMeasure, b: &DiscreteMeasure, method: TransportMethod) -> Result<f64> {
    let cost = cost_matrix(a, b)?;
    match method {
        TransportMethod::Exact => Ok(exact_transport(a, b, &cost)?.value.max(0.0)),
        TransportMethod::Sinkhorn => {
            let params = SinkhornParams::for_cost(&cost);
            Ok(sinkhorn_coupling(a, b, &cost, params.epsilon, params.tol, params.max_iter)?.value)
        }
    }
}

/// Exact `W_2^2`; the evaluation path used for objectives.
pub fn w2_sq(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    squared_w2(a, b, TransportMethod::Exact)
}

/// Chooses between the exact solver and Sinkhorn by support size. Thin
/// problems (one small side) go to the exact solver whatever the other
/// side's size: network simplex stays cheap there, while Sinkhorn at small
/// epsilon needs thousands of sweeps to reach the marginal tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportPolicy {
    /// Exact solver when the smaller support has at most this many atoms.
    pub exact_max_support: usize,
    /// Sinkhorn epsilon as a multiple of the median positive cost.
    pub epsilon_factor: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TransportPolicy {
    fn default() -> Self {
        TransportPolicy {
            exact_max_support: 64,
            epsilon_factor: sinkhorn::DEFAULT_EPSILON_FACTOR,
            tol: sinkhorn::DEFAULT_TOL,
            max_iter: sinkhorn::DEFAULT_MAX_ITER,
        }
    }
}

impl TransportPolicy {
    pub fn exact_only() -> Self {
        TransportPolicy {
            exact_max_support: usize::MAX,
            ..Default::default()
        }
    }

    pub fn method_for(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> TransportMethod {
        if a.support_size().min(b.support_size()) <= self.exact_max_support {
            TransportMethod::Exact
        } else {
            TransportMethod::Sinkhorn
        }
    }

    /// Plan between `a` and `b` using the method this policy selects.
    pub fn couple(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<(Coupling, f64)> {
        let cost = cost_matrix(a, b)?;
        match self.method_for(a, b) {
            TransportMethod::Exact => exact_coupling(a, b, &cost),
            TransportMethod::Sinkhorn => {
                let eps = self.epsilon_factor * cost.median_positive();
                if eps <= 0.0 {
                    return exact_coupling(a, b, &cost);
                }
                let out = sinkhorn_coupling(a, b, &cost, eps, self.tol, self.max_iter)?;
                Ok((out.coupling, out.value))
            }
        }
    }
}
