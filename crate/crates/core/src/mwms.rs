//! Multilevel Wasserstein means with sharing: every local measure is
//! supported on one common set of `K` atoms.

use serde::{Deserialize, Serialize};

use crate::barycenter::fixed_support_weights;
use crate::baseline::globals_from_locals;
use crate::error::{Error, Result};
use crate::kmeans::{lloyd, nearest, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::measures::{DiscreteMeasure, GroupedDataset, Point};
use crate::mwm::{Fit, Method, MultilevelConfig, MultilevelResult};
use crate::par;
use crate::rng::{derive_seed, tags};
use crate::transport::Coupling;

pub const DEFAULT_SHARED_ATOMS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct MwmsConfig {
    /// Shared settings; `local_atoms` is not used since local supports are
    /// fixed to the shared set.
    pub base: MultilevelConfig,
    /// Size `K` of the shared atom set.
    pub shared_atoms: usize,
}

impl MwmsConfig {
    pub fn new(shared_atoms: usize, num_global: usize) -> Self {
        MwmsConfig {
            base: MultilevelConfig::new(1, num_global),
            shared_atoms,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SharedSupport {
    pub atoms: Vec<Point>,
}

impl SharedSupport {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Closed-form minimizer of the objective over the shared atoms for fixed
/// couplings: `T[u]` couples `G_u` with `P_u`, `U[u]` couples `G_u` with
/// its assigned global measure. Rows of both are indexed by shared atom.
pub fn support_update(
    support: &SharedSupport,
    data: &GroupedDataset,
    globals: &[DiscreteMeasure],
    assignments: &[usize],
    t: &[Coupling],
    u: &[Coupling],
) -> SharedSupport {
    let m = data.num_groups();
    let mf = m as f64;
    let dim = data.dim();
    let k = support.len();
    let mut num = vec![vec![0.0; dim]; k];
    let mut den = vec![0.0; k];
    for g in 0..m {
        let xs = data.group(g);
        let hs = globals[assignments[g]].atoms();
        for i in 0..k {
            for (v, &w) in t[g].row(i).iter().enumerate() {
                if w > 0.0 {
                    den[i] += mf * w;
                    for (acc, x) in num[i].iter_mut().zip(&xs[v].0) {
                        *acc += mf * w * x;
                    }
                }
            }
            for (v, &w) in u[g].row(i).iter().enumerate() {
                if w > 0.0 {
                    den[i] += w;
                    for (acc, x) in num[i].iter_mut().zip(&hs[v].0) {
                        *acc += w * x;
                    }
                }
            }
        }
    }
    let atoms = (0..k)
        .map(|i| {
            if den[i] > 0.0 {
                Point(num[i].iter().map(|x| x / den[i]).collect())
            } else {
                support.atoms[i].clone()
            }
        })
        .collect();
    SharedSupport { atoms }
}

/// Best weights on the shared support for `W_2^2(G, P_j) + W_2^2(G, H) / m`.
/// Atoms may get zero weight; they stay in the returned measure.
pub fn local_weight_update(
    p: &DiscreteMeasure,
    support: &SharedSupport,
    h: &DiscreteMeasure,
    m: usize,
) -> Result<DiscreteMeasure> {
    let mf = m as f64;
    let w = fixed_support_weights(
        &support.atoms,
        &[p.clone(), h.clone()],
        &[mf / (mf + 1.0), 1.0 / (mf + 1.0)],
    )?;
    Ok(DiscreteMeasure::from_raw(support.atoms.clone(), w))
}

fn voronoi_frequencies(points: &[Point], support: &SharedSupport) -> DiscreteMeasure {
    let mut w = vec![0.0; support.len()];
    for p in points {
        w[nearest(&p.0, &support.atoms).0] += 1.0;
    }
    DiscreteMeasure::from_raw(support.atoms.clone(), w)
}

fn with_support(g: &DiscreteMeasure, support: &SharedSupport) -> DiscreteMeasure {
    DiscreteMeasure::from_raw(support.atoms.clone(), g.weights().to_vec())
}

pub fn mwms_run(data: &GroupedDataset, config: &MwmsConfig) -> Result<MultilevelResult> {
    let start = web_time::Instant::now();
    let base = &config.base;
    if config.shared_atoms == 0 {
        return Err(Error::InvalidParameter("shared support size must be at least 1".into()));
    }
    base.validate(data.num_groups())?;
    let opts = &base.barycenter;
    let m = data.num_groups();
    let mf = m as f64;

    let pooled = data.pooled();
    let km = lloyd(
        &pooled,
        config.shared_atoms,
        derive_seed(base.seed, tags::SHARED_SUPPORT, 0),
        DEFAULT_MAX_ITER,
        DEFAULT_TOL,
    )?;
    if km.centroids.len() < config.shared_atoms {
        log::warn!(
            "only {} distinct shared atoms available, {} requested",
            km.centroids.len(),
            config.shared_atoms
        );
    }
    let mut support = SharedSupport { atoms: km.centroids };
    let locals: Vec<DiscreteMeasure> = data.groups().iter().map(|g| voronoi_frequencies(g, &support)).collect();
    let pruned: Vec<DiscreteMeasure> = locals.iter().map(|g| g.pruned()).collect();
    let (globals, _) = globals_from_locals(&pruned, base.num_global, base.global_support, base.seed)?;

    let empiricals = data.empiricals();
    let mut fit = Fit::new(&empiricals, locals, globals)?;
    let mut trace = vec![fit.total()];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < base.max_outer {
        let prev = *trace.last().unwrap();
        let iter_seed = derive_seed(base.seed, iterations as u64, 1);
        fit.assign();

        // shared atoms
        let couplings = par::map_range(m, |j| -> Result<(Coupling, Coupling)> {
            let g = &fit.locals[j];
            let (t, _) = opts.policy.couple(g, &empiricals[j])?;
            let (u, _) = opts.policy.couple(g, &fit.globals[fit.assignments[j]])?;
            Ok((t, u))
        });
        let (t, u): (Vec<Coupling>, Vec<Coupling>) = couplings.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
        let moved = support_update(&support, data, &fit.globals, &fit.assignments, &t, &u);
        let candidates: Vec<DiscreteMeasure> = fit.locals.iter().map(|g| with_support(g, &moved)).collect();
        let evaluated = par::map(&candidates, |j, g| fit.evaluate_local(j, g))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let before = fit.assigned_total();
        let after = {
            let local: f64 = evaluated.iter().map(|(l, _)| l).sum();
            let global: f64 = evaluated.iter().zip(&fit.assignments).map(|((_, r), &a)| r[a]).sum();
            local + global / mf
        };
        if after <= before {
            support = moved;
            for (j, (g, (local, row))) in candidates.into_iter().zip(evaluated).enumerate() {
                fit.locals[j] = g;
                fit.local_terms[j] = local;
                fit.dist[j] = row;
            }
        }

        // local weights on the shared atoms
        let proposals = par::map_range(m, |j| -> Result<(DiscreteMeasure, f64, Vec<f64>)> {
            let h = &fit.globals[fit.assignments[j]];
            let g = local_weight_update(&empiricals[j], &support, h, m)?;
            let (local, row) = fit.evaluate_local(j, &g)?;
            Ok((g, local, row))
        });
        for (j, p) in proposals.into_iter().enumerate() {
            let (g, local, row) = p?;
            fit.offer_local(j, g, local, row);
        }

        fit.assign();
        fit.reinit_empty(base.global_support, opts, iter_seed)?;
        fit.update_globals(base.global_support, opts, iter_seed)?;
        fit.assign();

        let cur = fit.total();
        trace.push(cur);
        iterations += 1;
        log::debug!("mwms iteration {iterations}: objective {cur}");
        if cur == 0.0 || prev - cur < base.rel_tol * prev {
            converged = true;
            break;
        }
    }

    let mut state = fit.into_state(trace);
    state.locals = state.locals.iter().map(|g| g.pruned()).collect();
    Ok(MultilevelResult {
        method: Method::Mwms,
        state,
        shared_support: Some(support.atoms),
        iterations,
        converged,
        wall_time: start.elapsed(),
    })
}
