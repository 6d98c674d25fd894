//! Multilevel Wasserstein means.
//!
//! Minimizes `sum_j W_2^2(G_j, P_j) + min_i W_2^2(G_j, H_i) / m` over local
//! measures `G_j` (at most `k_j` atoms) and global measures `H_1..H_M` (at
//! most `L` atoms each) by block coordinate descent. Every block step is
//! accepted only if the exactly evaluated objective does not go up.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::barycenter::{free_support_barycenter_with, BarycenterOptions, BarycenterProblem};
use crate::baseline::{globals_from_locals, local_quantization};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, GroupedDataset, Point};
use crate::par;
use crate::rng::{derive_seed, tags};
use crate::transport::w2_sq;

pub const DEFAULT_GLOBAL_SUPPORT: usize = 10;
pub const DEFAULT_MAX_OUTER: usize = 100;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mwm,
    Mwms,
    Tsk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelConfig {
    /// Local budgets `k_j`: one per group, or a single value for all groups.
    pub local_atoms: Vec<usize>,
    /// Number of global measures `M`.
    pub num_global: usize,
    /// Support threshold `L` for global measures.
    pub global_support: usize,
    pub max_outer: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Inner barycenter solver settings, including the transport policy.
    pub barycenter: BarycenterOptions,
}

impl MultilevelConfig {
    pub fn new(local_atoms: usize, num_global: usize) -> Self {
        MultilevelConfig {
            local_atoms: vec![local_atoms],
            num_global,
            global_support: DEFAULT_GLOBAL_SUPPORT,
            max_outer: DEFAULT_MAX_OUTER,
            rel_tol: DEFAULT_REL_TOL,
            seed: 0,
            barycenter: BarycenterOptions::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_global_support(mut self, l: usize) -> Self {
        self.global_support = l;
        self
    }

    pub(crate) fn validate(&self, num_groups: usize) -> Result<Vec<usize>> {
        if self.num_global == 0 {
            return Err(Error::InvalidParameter("number of global measures must be at least 1".into()));
        }
        if self.global_support == 0 {
            return Err(Error::InvalidParameter("global support threshold must be at least 1".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("rel_tol must be nonnegative, got {}", self.rel_tol)));
        }
        expand_budgets(&self.local_atoms, num_groups)
    }
}

pub(crate) fn expand_budgets(local_atoms: &[usize], num_groups: usize) -> Result<Vec<usize>> {
    let budgets = match local_atoms.len() {
        1 => vec![local_atoms[0]; num_groups],
        n if n == num_groups => local_atoms.to_vec(),
        n => {
            return Err(Error::InvalidParameter(format!(
                "{n} local budgets for {num_groups} groups"
            )))
        }
    };
    if budgets.iter().any(|&k| k == 0) {
        return Err(Error::InvalidParameter("local budgets must be at least 1".into()));
    }
    Ok(budgets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilevelState {
    pub locals: Vec<DiscreteMeasure>,
    pub globals: Vec<DiscreteMeasure>,
    /// Index of the global measure each group is attached to (0-based).
    pub assignments: Vec<usize>,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilevelResult {
    pub method: Method,
    #[serde(flatten)]
    pub state: MultilevelState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_support: Option<Vec<Point>>,
    pub iterations: usize,
    pub converged: bool,
    /// Not serialized so result files depend only on inputs and seed.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl MultilevelResult {
    pub fn objective(&self) -> f64 {
        self.state.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Objective split into its local and global terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    pub local: f64,
    pub global: f64,
    pub total: f64,
}

fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &d) in row.iter().enumerate() {
        if d < row[best] {
            best = i;
        }
    }
    best
}

fn distance_rows(locals: &[DiscreteMeasure], globals: &[DiscreteMeasure]) -> Result<Vec<Vec<f64>>> {
    par::map(locals, |_, g| globals.iter().map(|h| w2_sq(g, h)).collect::<Result<Vec<f64>>>())
        .into_iter()
        .collect()
}

/// `i_j = argmin_u W_2^2(G_j, H_u)`, lowest `u` on ties.
pub fn assign_groups(locals: &[DiscreteMeasure], globals: &[DiscreteMeasure]) -> Result<Vec<usize>> {
    if globals.is_empty() {
        return Err(Error::Empty("global measures"));
    }
    Ok(distance_rows(locals, globals)?.iter().map(|r| argmin(r)).collect())
}

pub(crate) fn mwm_objective_parts(
    locals: &[DiscreteMeasure],
    globals: &[DiscreteMeasure],
    empiricals: &[DiscreteMeasure],
) -> Result<ObjectiveParts> {
    if locals.len() != empiricals.len() {
        return Err(Error::InvalidParameter(format!(
            "{} local measures for {} groups",
            locals.len(),
            empiricals.len()
        )));
    }
    if globals.is_empty() {
        return Err(Error::Empty("global measures"));
    }
    let local_terms: Vec<f64> = par::map(locals, |j, g| w2_sq(g, &empiricals[j]))
        .into_iter()
        .collect::<Result<_>>()?;
    let rows = distance_rows(locals, globals)?;
    let m = locals.len() as f64;
    let local: f64 = local_terms.iter().sum();
    let global: f64 = rows.iter().map(|r| r[argmin(r)]).sum::<f64>() / m;
    Ok(ObjectiveParts {
        local,
        global,
        total: local + global,
    })
}

/// Exact objective of a state against the data.
pub fn mwm_objective(state: &MultilevelState, data: &GroupedDataset) -> Result<f64> {
    Ok(mwm_objective_parts(&state.locals, &state.globals, &data.empiricals())?.total)
}

pub fn mwm_objective_split(state: &MultilevelState, data: &GroupedDataset) -> Result<ObjectiveParts> {
    mwm_objective_parts(&state.locals, &state.globals, &data.empiricals())
}

fn local_lambda(m: usize) -> Vec<f64> {
    let mf = m as f64;
    vec![mf / (mf + 1.0), 1.0 / (mf + 1.0)]
}

/// One local step: weighted barycenter of `P_j` and `H` warm-started at
/// `G_j`. Falls back to `g` if the term `W_2^2(G, P) + W_2^2(G, H) / m`
/// would increase.
pub fn local_update(
    g: &DiscreteMeasure,
    p: &DiscreteMeasure,
    h: &DiscreteMeasure,
    m: usize,
    k: usize,
    opts: &BarycenterOptions,
) -> Result<DiscreteMeasure> {
    let candidate = local_candidate(g, p, h, m, k, opts, 0)?;
    let mf = m as f64;
    let term = |x: &DiscreteMeasure| -> Result<f64> { Ok(w2_sq(x, p)? + w2_sq(x, h)? / mf) };
    Ok(if term(&candidate)? <= term(g)? {
        candidate
    } else {
        g.clone()
    })
}

fn local_candidate(
    g: &DiscreteMeasure,
    p: &DiscreteMeasure,
    h: &DiscreteMeasure,
    m: usize,
    k: usize,
    opts: &BarycenterOptions,
    seed: u64,
) -> Result<DiscreteMeasure> {
    let problem = BarycenterProblem::new(vec![p.clone(), h.clone()], local_lambda(m), k)?.with_seed(seed);
    Ok(best_start(&problem, Some(g), opts)?.0)
}

/// Cold start and (when it fits the budget) warm start from `warm`; the
/// lower objective wins, the cold start on ties.
fn best_start(
    problem: &BarycenterProblem,
    warm: Option<&DiscreteMeasure>,
    opts: &BarycenterOptions,
) -> Result<(DiscreteMeasure, f64)> {
    let budget = problem.max_support.min(problem.support_bound());
    let cold = free_support_barycenter_with(problem, opts)?;
    let mut best = (cold.measure, cold.objective);
    if let Some(w) = warm.filter(|w| w.support_size() <= budget) {
        let warm_run = free_support_barycenter_with(&problem.clone().with_init(w.clone()), opts)?;
        if warm_run.objective < best.1 {
            best = (warm_run.measure, warm_run.objective);
        }
    }
    Ok(best)
}

/// Uniform barycenter of `members` with at most
/// `min(L, sum |supp| - |members| + 1)` atoms.
pub fn global_update(members: &[DiscreteMeasure], global_support: usize) -> Result<DiscreteMeasure> {
    Ok(global_candidate(members, global_support, &BarycenterOptions::default(), 0, None)?.0)
}

pub(crate) fn global_candidate(
    members: &[DiscreteMeasure],
    global_support: usize,
    opts: &BarycenterOptions,
    seed: u64,
    warm: Option<&DiscreteMeasure>,
) -> Result<(DiscreteMeasure, f64)> {
    if members.is_empty() {
        return Err(Error::Empty("cluster members"));
    }
    let pruned: Vec<DiscreteMeasure> = members.iter().map(|g| g.pruned()).collect();
    let problem = BarycenterProblem::uniform(pruned, global_support)?.with_seed(seed);
    best_start(&problem, warm, opts)
}

/// Working state shared by the multilevel algorithms: caches
/// `W_2^2(G_j, P_j)` and the table `W_2^2(G_j, H_i)` so that guards compare
/// exactly the numbers the objective is made of.
pub(crate) struct Fit<'a> {
    pub empiricals: &'a [DiscreteMeasure],
    pub locals: Vec<DiscreteMeasure>,
    pub globals: Vec<DiscreteMeasure>,
    pub assignments: Vec<usize>,
    pub local_terms: Vec<f64>,
    pub dist: Vec<Vec<f64>>,
}

impl<'a> Fit<'a> {
    pub fn new(empiricals: &'a [DiscreteMeasure], locals: Vec<DiscreteMeasure>, globals: Vec<DiscreteMeasure>) -> Result<Self> {
        let local_terms = par::map(&locals, |j, g| w2_sq(g, &empiricals[j]))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let dist = distance_rows(&locals, &globals)?;
        let assignments = dist.iter().map(|r| argmin(r)).collect();
        Ok(Fit {
            empiricals,
            locals,
            globals,
            assignments,
            local_terms,
            dist,
        })
    }

    pub fn m(&self) -> usize {
        self.locals.len()
    }

    /// Objective with every group at its nearest global measure.
    pub fn total(&self) -> f64 {
        let local: f64 = self.local_terms.iter().sum();
        let global: f64 = self.dist.iter().map(|r| r[argmin(r)]).sum::<f64>();
        local + global / self.m() as f64
    }

    /// Objective under the current assignments.
    pub fn assigned_total(&self) -> f64 {
        let local: f64 = self.local_terms.iter().sum();
        let global: f64 = self.dist.iter().zip(&self.assignments).map(|(r, &a)| r[a]).sum::<f64>();
        local + global / self.m() as f64
    }

    pub fn assign(&mut self) {
        self.assignments = self.dist.iter().map(|r| argmin(r)).collect();
    }

    pub fn group_term(&self, j: usize) -> f64 {
        self.local_terms[j] + self.dist[j][self.assignments[j]] / self.m() as f64
    }

    /// Local term and distance row for a candidate `G_j`.
    pub fn evaluate_local(&self, j: usize, g: &DiscreteMeasure) -> Result<(f64, Vec<f64>)> {
        let local = w2_sq(g, &self.empiricals[j])?;
        let row = self.globals.iter().map(|h| w2_sq(g, h)).collect::<Result<Vec<f64>>>()?;
        Ok((local, row))
    }

    /// Replaces `G_j` if its group term does not increase.
    pub fn offer_local(&mut self, j: usize, g: DiscreteMeasure, local: f64, row: Vec<f64>) -> bool {
        let new_term = local + row[self.assignments[j]] / self.m() as f64;
        if new_term <= self.group_term(j) {
            self.locals[j] = g;
            self.local_terms[j] = local;
            self.dist[j] = row;
            true
        } else {
            false
        }
    }

    pub fn members(&self, i: usize) -> Vec<usize> {
        (0..self.m()).filter(|&j| self.assignments[j] == i).collect()
    }

    fn set_global(&mut self, i: usize, h: DiscreteMeasure, column: Vec<f64>) {
        self.globals[i] = h;
        for (row, d) in self.dist.iter_mut().zip(column) {
            row[i] = d;
        }
    }

    fn column(&self, h: &DiscreteMeasure) -> Result<Vec<f64>> {
        par::map(&self.locals, |_, g| w2_sq(g, h)).into_iter().collect()
    }

    /// Reseeds global measures that no group is attached to with the group
    /// farthest from its own global measure, then reassigns.
    pub fn reinit_empty(&mut self, global_support: usize, opts: &BarycenterOptions, seed: u64) -> Result<()> {
        let mut used = vec![false; self.m()];
        for i in 0..self.globals.len() {
            if self.assignments.iter().any(|&a| a == i) {
                continue;
            }
            let far = (0..self.m())
                .filter(|&j| !used[j])
                .map(|j| (j, self.dist[j][self.assignments[j]]))
                .fold(None, |best: Option<(usize, f64)>, (j, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((j, d)),
                });
            let Some((j, d)) = far else { break };
            if d <= 0.0 {
                break;
            }
            used[j] = true;
            log::debug!("global measure {i} is empty, reseeding from group {j}");
            let (h, _) = global_candidate(
                std::slice::from_ref(&self.locals[j]),
                global_support,
                opts,
                derive_seed(seed, tags::BARYCENTER, i as u64),
                None,
            )?;
            let column = self.column(&h)?;
            self.set_global(i, h, column);
        }
        self.assign();
        Ok(())
    }

    /// Guarded barycenter update of every nonempty global cluster.
    pub fn update_globals(&mut self, global_support: usize, opts: &BarycenterOptions, seed: u64) -> Result<()> {
        let clusters: Vec<Vec<usize>> = (0..self.globals.len()).map(|i| self.members(i)).collect();
        let candidates = par::map(&clusters, |i, members| -> Result<Option<(DiscreteMeasure, Vec<f64>)>> {
            if members.is_empty() {
                return Ok(None);
            }
            let gs: Vec<DiscreteMeasure> = members.iter().map(|&j| self.locals[j].clone()).collect();
            let (h, _) = global_candidate(
                &gs,
                global_support,
                opts,
                derive_seed(seed, tags::BARYCENTER, i as u64),
                Some(&self.globals[i]),
            )?;
            let column = self.column(&h)?;
            Ok(Some((h, column)))
        });
        for (i, cand) in candidates.into_iter().enumerate() {
            let Some((h, column)) = cand? else { continue };
            let old: f64 = clusters[i].iter().map(|&j| self.dist[j][i]).sum();
            let new: f64 = clusters[i].iter().map(|&j| column[j]).sum();
            if new <= old {
                self.set_global(i, h, column);
            }
        }
        Ok(())
    }

    pub fn into_state(self, objective_trace: Vec<f64>) -> MultilevelState {
        MultilevelState {
            locals: self.locals,
            globals: self.globals,
            assignments: self.assignments,
            objective_trace,
        }
    }
}

/// Initial state: per-group K-means for the locals, stages 2 and 3 of the
/// three-stage baseline for the globals, then nearest-measure assignment.
pub fn mwm_init(data: &GroupedDataset, config: &MultilevelConfig) -> Result<MultilevelState> {
    let budgets = config.validate(data.num_groups())?;
    let locals = local_quantization(data, &budgets, config.seed)?;
    let (globals, _) = globals_from_locals(&locals, config.num_global, config.global_support, config.seed)?;
    let empiricals = data.empiricals();
    let fit = Fit::new(&empiricals, locals, globals)?;
    let total = fit.total();
    Ok(fit.into_state(vec![total]))
}

pub fn mwm_run(data: &GroupedDataset, config: &MultilevelConfig) -> Result<MultilevelResult> {
    let start = web_time::Instant::now();
    let budgets = config.validate(data.num_groups())?;
    let init = mwm_init(data, config)?;
    let empiricals = data.empiricals();
    let mut fit = Fit::new(&empiricals, init.locals, init.globals)?;
    let mut trace = init.objective_trace;
    let m = fit.m();
    let opts = &config.barycenter;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_outer {
        let prev = *trace.last().unwrap();
        let iter_seed = derive_seed(config.seed, iterations as u64, 0);
        fit.assign();

        let proposals = par::map_range(m, |j| -> Result<(DiscreteMeasure, f64, Vec<f64>)> {
            let h = &fit.globals[fit.assignments[j]];
            let g = local_candidate(&fit.locals[j], &empiricals[j], h, m, budgets[j], opts, derive_seed(iter_seed, tags::LOCAL_KMEANS, j as u64))?;
            let (local, row) = fit.evaluate_local(j, &g)?;
            Ok((g, local, row))
        });
        for (j, p) in proposals.into_iter().enumerate() {
            let (g, local, row) = p?;
            fit.offer_local(j, g, local, row);
        }

        fit.assign();
        fit.reinit_empty(config.global_support, opts, iter_seed)?;
        fit.update_globals(config.global_support, opts, iter_seed)?;
        fit.assign();

        let cur = fit.total();
        trace.push(cur);
        iterations += 1;
        log::debug!("mwm iteration {iterations}: objective {cur}");
        if cur == 0.0 || prev - cur < config.rel_tol * prev {
            converged = true;
            break;
        }
    }

    Ok(MultilevelResult {
        method: Method::Mwm,
        state: fit.into_state(trace),
        shared_support: None,
        iterations,
        converged,
        wall_time: start.elapsed(),
    })
}
