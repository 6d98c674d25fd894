//! Weighted Wasserstein barycenters of discrete measures.
//!
//! [`fixed_support_weights`] solves for the best weights on a given set of
//! atoms. [`free_support_barycenter`] alternates barycentric projection of
//! the atoms with that weight solve, accepting a block step only when the
//! exact objective does not increase.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::kmeans::{extend_seeding, kmeans_plus_plus, nearest};
use crate::measures::{DiscreteMeasure, Point};
use crate::par;
use crate::rng::stream_rng;
use crate::transport::{cost_matrix, exact_transport, solve_flow, w2_sq, FlowNetwork, TransportPolicy};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-7;
/// Atoms lighter than this are dropped after a weight update.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Largest `|support| + sum of input supports` solved as one dense LP when
/// three or more measures are involved.
pub const EXACT_LP_MAX_ATOMS: usize = 256;
pub const SUBGRADIENT_STEPS: usize = 500;

/// Minimize `sum_i lambda_i W_2^2(P, P_i)` over `P` with at most
/// `max_support` atoms.
#[derive(Debug, Clone)]
pub struct BarycenterProblem {
    pub measures: Vec<DiscreteMeasure>,
    pub lambda: Vec<f64>,
    pub max_support: usize,
    pub init: Option<DiscreteMeasure>,
    pub seed: u64,
}

impl BarycenterProblem {
    pub fn new(measures: Vec<DiscreteMeasure>, lambda: Vec<f64>, max_support: usize) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::Empty("barycenter measures"));
        }
        if lambda.len() != measures.len() {
            return Err(Error::InvalidParameter(format!(
                "{} lambda weights for {} measures",
                lambda.len(),
                measures.len()
            )));
        }
        if lambda.iter().any(|&l| !(l >= 0.0)) || (lambda.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("lambda must lie in the simplex".into()));
        }
        if max_support == 0 {
            return Err(Error::InvalidParameter("support budget must be at least 1".into()));
        }
        let dim = measures[0].dim();
        if let Some(m) = measures.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
        Ok(BarycenterProblem {
            measures,
            lambda,
            max_support,
            init: None,
            seed: 0,
        })
    }

    /// Equal weights on every measure.
    pub fn uniform(measures: Vec<DiscreteMeasure>, max_support: usize) -> Result<Self> {
        let n = measures.len().max(1);
        Self::new(measures, vec![1.0 / n as f64; n], max_support)
    }

    pub fn with_init(mut self, init: DiscreteMeasure) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `sum_i s_i - N + 1`: some barycenter has at most this many atoms.
    pub fn support_bound(&self) -> usize {
        let total: usize = self.measures.iter().map(|m| m.support_size()).sum();
        total + 1 - self.measures.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycenterOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub policy: TransportPolicy,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        BarycenterOptions {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            policy: TransportPolicy::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Barycenter {
    pub measure: DiscreteMeasure,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Exact `sum_i lambda_i W_2^2(candidate, P_i)`.
pub fn barycenter_objective(candidate: &DiscreteMeasure, measures: &[DiscreteMeasure], lambda: &[f64]) -> Result<f64> {
    let terms = par::map(measures, |i, m| {
        if lambda[i] == 0.0 {
            Ok(0.0)
        } else {
            w2_sq(candidate, m).map(|v| lambda[i] * v)
        }
    });
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total)
}

/// Weights on `support` minimizing `sum_i lambda_i W_2^2(., P_i)`.
pub fn fixed_support_weights(support: &[Point], measures: &[DiscreteMeasure], lambda: &[f64]) -> Result<Vec<f64>> {
    solve_fixed_support(support, measures, lambda, None)
}

pub(crate) fn solve_fixed_support(
    support: &[Point],
    measures: &[DiscreteMeasure],
    lambda: &[f64],
    start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if support.is_empty() {
        return Err(Error::Empty("barycenter support"));
    }
    if measures.is_empty() || lambda.len() != measures.len() {
        return Err(Error::InvalidParameter("one lambda weight per measure required".into()));
    }
    let dim = support[0].dim();
    for m in measures {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
    }
    if let Some(p) = support.iter().find(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.dim(),
        });
    }
    if support.len() == 1 {
        return Ok(vec![1.0]);
    }
    let active: Vec<usize> = (0..measures.len()).filter(|&i| lambda[i] > 0.0).collect();
    let weights = match active.len() {
        0 => vec![1.0 / support.len() as f64; support.len()],
        1 => voronoi_weights(support, &measures[active[0]]),
        2 => {
            let (i, j) = (active[0], active[1]);
            two_measure_flow(support, &measures[i], lambda[i], &measures[j], lambda[j])?
        }
        _ => {
            let ms: Vec<&DiscreteMeasure> = active.iter().map(|&i| &measures[i]).collect();
            let ls: Vec<f64> = active.iter().map(|&i| lambda[i]).collect();
            let atoms = support.len() + ms.iter().map(|m| m.support_size()).sum::<usize>();
            if atoms <= EXACT_LP_MAX_ATOMS {
                joint_lp(support, &ms, &ls)?
            } else {
                projected_subgradient(support, &ms, &ls, start)?
            }
        }
    };
    Ok(normalize(weights))
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    for x in &mut w {
        if !(*x > 0.0) {
            *x = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    } else {
        let n = w.len() as f64;
        w.iter_mut().for_each(|x| *x = 1.0 / n);
    }
    w
}

// Single measure: every atom of P goes to its nearest support point.
fn voronoi_weights(support: &[Point], m: &DiscreteMeasure) -> Vec<f64> {
    let mut w = vec![0.0; support.len()];
    for (y, &b) in m.atoms().iter().zip(m.weights()) {
        if b > 0.0 {
            w[nearest(&y.0, support).0] += b;
        }
    }
    w
}

// Two measures: P1 -> support -> P2 is a transshipment problem; the flow
// through each support node is its weight.
fn two_measure_flow(
    support: &[Point],
    p1: &DiscreteMeasure,
    l1: f64,
    p2: &DiscreteMeasure,
    l2: f64,
) -> Result<Vec<f64>> {
    let k = support.len();
    let a_idx: Vec<usize> = (0..p1.len()).filter(|&j| p1.weights()[j] > 0.0).collect();
    let b_idx: Vec<usize> = (0..p2.len()).filter(|&j| p2.weights()[j] > 0.0).collect();
    let na = a_idx.len();
    let mut supply: Vec<f64> = a_idx.iter().map(|&j| p1.weights()[j]).collect();
    supply.extend(std::iter::repeat(0.0).take(k));
    supply.extend(b_idx.iter().map(|&j| -p2.weights()[j]));
    let mut net = FlowNetwork::with_nodes(supply);
    for (ai, &j) in a_idx.iter().enumerate() {
        for (l, s) in support.iter().enumerate() {
            net.add_arc(ai, na + l, l1 * s.sq_dist(&p1.atoms()[j]));
        }
    }
    let first_out = net.num_arcs();
    for (l, s) in support.iter().enumerate() {
        for (bi, &j) in b_idx.iter().enumerate() {
            net.add_arc(na + l, na + k + bi, l2 * s.sq_dist(&p2.atoms()[j]));
        }
    }
    let sol = solve_flow(&net)?;
    let nb = b_idx.len();
    Ok((0..k)
        .map(|l| sol.flow[first_out + l * nb..first_out + (l + 1) * nb].iter().sum())
        .collect())
}

// Three or more measures: couplings T^i share their row marginal.
fn joint_lp(support: &[Point], measures: &[&DiscreteMeasure], lambda: &[f64]) -> Result<Vec<f64>> {
    let k = support.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::with_capacity(measures.len());
    for (m, &lam) in measures.iter().zip(lambda) {
        let cols: Vec<usize> = (0..m.len()).filter(|&j| m.weights()[j] > 0.0).collect();
        let mut block = Vec::with_capacity(k);
        for s in support {
            block.push(
                cols.iter()
                    .map(|&j| lp.add_var(lam * s.sq_dist(&m.atoms()[j]), (0.0, f64::INFINITY)))
                    .collect::<Vec<_>>(),
            );
        }
        for (ci, &j) in cols.iter().enumerate() {
            let expr: Vec<_> = (0..k).map(|l| (block[l][ci], 1.0)).collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, m.weights()[j]);
        }
        vars.push(block);
    }
    for i in 1..vars.len() {
        for l in 0..k {
            let mut expr: Vec<_> = vars[i][l].iter().map(|&v| (v, 1.0)).collect();
            expr.extend(vars[0][l].iter().map(|&v| (v, -1.0)));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 0.0);
        }
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::LinearProgram(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::LinearProgram("solve interrupted".into()))?;
    Ok((0..k)
        .map(|l| vars[0][l].iter().map(|&v| sol.var_value(v)).sum())
        .collect())
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn weights_gradient(support: &[Point], weights: &[f64], measures: &[&DiscreteMeasure], lambda: &[f64]) -> Result<(Vec<f64>, f64)> {
    let cand = DiscreteMeasure::from_raw(support.to_vec(), weights.to_vec());
    let mut grad = vec![0.0; support.len()];
    let mut value = 0.0;
    for (m, &lam) in measures.iter().zip(lambda) {
        let cost = cost_matrix(&cand, m)?;
        let t = exact_transport(&cand, m, &cost)?;
        value += lam * t.value;
        for (g, f) in grad.iter_mut().zip(&t.row_potential) {
            *g += lam * f;
        }
    }
    Ok((grad, value))
}

// Large problems with three or more measures: projected subgradient with
// step c/sqrt(t); returns the better of the averaged and best iterate.
fn projected_subgradient(
    support: &[Point],
    measures: &[&DiscreteMeasure],
    lambda: &[f64],
    start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let k = support.len();
    let mut a = match start {
        Some(s) if s.len() == k => normalize(s.to_vec()),
        _ => vec![1.0 / k as f64; k],
    };
    let (g0, v0) = weights_gradient(support, &a, measures, lambda)?;
    let range = g0.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - g0.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(range > 0.0) {
        return Ok(a);
    }
    let c = 0.5 / range;
    let mut best = (v0, a.clone());
    let mut avg = vec![0.0; k];
    let mut grad = g0;
    for t in 1..=SUBGRADIENT_STEPS {
        let step = c / (t as f64).sqrt();
        let moved: Vec<f64> = a.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
        a = project_simplex(&moved);
        avg.iter_mut().zip(&a).for_each(|(s, x)| *s += x);
        let (g, v) = weights_gradient(support, &a, measures, lambda)?;
        if v < best.0 {
            best = (v, a.clone());
        }
        grad = g;
    }
    let avg = normalize(avg);
    let (_, v_avg) = weights_gradient(support, &avg, measures, lambda)?;
    Ok(if v_avg <= best.0 { avg } else { best.1 })
}

fn pooled_atoms(problem: &BarycenterProblem) -> (Vec<Point>, Vec<f64>) {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (m, &lam) in problem.measures.iter().zip(&problem.lambda) {
        for (a, &w) in m.atoms().iter().zip(m.weights()) {
            if w > 0.0 && lam > 0.0 {
                atoms.push(a.clone());
                weights.push(lam * w);
            }
        }
    }
    (atoms, weights)
}

fn initial_support(problem: &BarycenterProblem, k: usize) -> Vec<Point> {
    let (atoms, weights) = pooled_atoms(problem);
    if atoms.is_empty() {
        // every lambda-weighted atom is massless; fall back to the first measure
        return vec![problem.measures[0].mean()];
    }
    let mut rng = stream_rng(problem.seed, crate::rng::tags::BARYCENTER);
    kmeans_plus_plus(&atoms, Some(&weights), k, &mut rng)
        .into_iter()
        .map(|i| atoms[i].clone())
        .collect()
}

/// Pads a warm start that uses less than the budget with zero-weight atoms
/// drawn by k-means++ continuation, so the weight step can move mass there.
fn padded_init(problem: &BarycenterProblem, init: &DiscreteMeasure, budget: usize) -> DiscreteMeasure {
    let init = init.pruned();
    if init.len() >= budget {
        return init;
    }
    let (atoms, weights) = pooled_atoms(problem);
    let mut rng = stream_rng(problem.seed, crate::rng::tags::BARYCENTER);
    let extra = extend_seeding(&atoms, Some(&weights), init.atoms(), budget - init.len(), &mut rng);
    if extra.is_empty() {
        return init;
    }
    let (mut a, mut w) = init.into_parts();
    for i in extra {
        a.push(atoms[i].clone());
        w.push(0.0);
    }
    DiscreteMeasure::from_raw(a, w)
}

/// Barycentric projection of the atoms given couplings to every measure.
fn project_atoms(
    candidate: &DiscreteMeasure,
    measures: &[DiscreteMeasure],
    lambda: &[f64],
    policy: &TransportPolicy,
) -> Result<Vec<Point>> {
    let couplings = par::map(measures, |i, m| {
        if lambda[i] == 0.0 {
            Ok(None)
        } else {
            policy.couple(candidate, m).map(Some)
        }
    });
    let k = candidate.len();
    let dim = candidate.dim();
    let mut num = vec![vec![0.0; dim]; k];
    let mut den = vec![0.0; k];
    for (i, c) in couplings.into_iter().enumerate() {
        let Some((coupling, _)) = c? else { continue };
        let m = &measures[i];
        for l in 0..k {
            for (j, &t) in coupling.row(l).iter().enumerate() {
                if t > 0.0 {
                    let w = lambda[i] * t;
                    den[l] += w;
                    for (acc, y) in num[l].iter_mut().zip(&m.atoms()[j].0) {
                        *acc += w * y;
                    }
                }
            }
        }
    }
    Ok((0..k)
        .map(|l| {
            if den[l] > 0.0 {
                Point(num[l].iter().map(|x| x / den[l]).collect())
            } else {
                candidate.atoms()[l].clone()
            }
        })
        .collect())
}

/// Free-support barycenter with default iteration limits and transport
/// policy.
pub fn free_support_barycenter(problem: &BarycenterProblem, max_iter: usize, tol: f64) -> Result<Barycenter> {
    free_support_barycenter_with(
        problem,
        &BarycenterOptions {
            max_iter,
            tol,
            ..Default::default()
        },
    )
}

pub fn free_support_barycenter_with(problem: &BarycenterProblem, opts: &BarycenterOptions) -> Result<Barycenter> {
    let measures = &problem.measures;
    let lambda = &problem.lambda;
    let budget = problem.max_support.min(problem.support_bound()).max(1);

    let mut candidate = match &problem.init {
        Some(init) if init.support_size() <= budget && init.dim() == measures[0].dim() => padded_init(problem, init, budget),
        _ => {
            let support = initial_support(problem, budget);
            let w = solve_fixed_support(&support, measures, lambda, None)?;
            DiscreteMeasure::from_raw(support, w).pruned_below(WEIGHT_FLOOR)
        }
    };
    let mut objective = barycenter_objective(&candidate, measures, lambda)?;
    let mut trace = vec![objective];
    let mut iterations = 0;

    while iterations < opts.max_iter && objective > 0.0 {
        iterations += 1;
        let before = objective;

        let atoms = project_atoms(&candidate, measures, lambda, &opts.policy)?;
        let moved = DiscreteMeasure::from_raw(atoms, candidate.weights().to_vec());
        let value = barycenter_objective(&moved, measures, lambda)?;
        if value <= objective {
            candidate = moved;
            objective = value;
        }

        let w = solve_fixed_support(candidate.atoms(), measures, lambda, Some(candidate.weights()))?;
        let reweighted = DiscreteMeasure::from_raw(candidate.atoms().to_vec(), w).pruned_below(WEIGHT_FLOOR);
        let value = barycenter_objective(&reweighted, measures, lambda)?;
        if value <= objective {
            candidate = reweighted;
            objective = value;
        }

        trace.push(objective);
        if before - objective <= opts.tol * before {
            break;
        }
    }

    Ok(Barycenter {
        measure: candidate,
        objective,
        objective_trace: trace,
        iterations,
    })
}
