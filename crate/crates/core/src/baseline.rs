//! Three-stage K-means: quantize each group, cluster the pooled atoms into
//! `M` groups, then quantize every atom cluster down to `L` atoms.

use crate::error::{Error, Result};
use crate::kmeans::{lloyd, quantization_measure, quantize, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::measures::{DiscreteMeasure, GroupedDataset, Point};
use crate::mwm::{mwm_objective_parts, Method, MultilevelResult, MultilevelState};
use crate::par;
use crate::rng::{derive_seed, tags};

/// Stage 1: per-group K-means with budget `budgets[j]` (clamped to `n_j`).
pub(crate) fn local_quantization(data: &GroupedDataset, budgets: &[usize], seed: u64) -> Result<Vec<DiscreteMeasure>> {
    let out = par::map(data.groups(), |j, pts| {
        let mut k = budgets[j];
        if k > pts.len() {
            log::warn!("group {j} has {} points, local budget {k} clamped", pts.len());
            k = pts.len();
        }
        quantize(pts, k, derive_seed(seed, tags::LOCAL_KMEANS, j as u64))
    });
    out.into_iter().collect()
}

/// Stages 2 and 3 on given local measures. Returns the global measures and
/// the majority-vote assignment of every local measure.
pub(crate) fn globals_from_locals(
    locals: &[DiscreteMeasure],
    num_global: usize,
    global_support: usize,
    seed: u64,
) -> Result<(Vec<DiscreteMeasure>, Vec<usize>)> {
    let mut owner = Vec::new();
    let mut atoms: Vec<Point> = Vec::new();
    for (j, g) in locals.iter().enumerate() {
        for (a, &w) in g.atoms().iter().zip(g.weights()) {
            if w > 0.0 {
                owner.push(j);
                atoms.push(a.clone());
            }
        }
    }
    if atoms.is_empty() {
        return Err(Error::Empty("pooled atoms"));
    }
    let mut m_eff = num_global;
    if m_eff > atoms.len() {
        log::warn!("{} pooled atoms, number of global clusters {m_eff} clamped", atoms.len());
        m_eff = atoms.len();
    }
    let stage2 = lloyd(&atoms, m_eff, derive_seed(seed, tags::GLOBAL_KMEANS, 0), DEFAULT_MAX_ITER, DEFAULT_TOL)?;

    // drop clusters left empty by the final assignment and renumber
    let mut used = vec![false; stage2.centroids.len()];
    for &l in &stage2.labels {
        used[l] = true;
    }
    let mut remap = vec![0; used.len()];
    let mut next = 0;
    for (r, &u) in remap.iter_mut().zip(&used) {
        if u {
            *r = next;
            next += 1;
        }
    }
    let labels: Vec<usize> = stage2.labels.iter().map(|&l| remap[l]).collect();
    let mut members: Vec<Vec<Point>> = vec![Vec::new(); next];
    for (a, &l) in atoms.iter().zip(&labels) {
        members[l].push(a.clone());
    }

    let globals = par::map(&members, |i, pts| {
        lloyd(pts, global_support, derive_seed(seed, tags::ATOM_KMEANS, i as u64), DEFAULT_MAX_ITER, DEFAULT_TOL)
            .map(|r| quantization_measure(&r))
    });
    let globals: Vec<DiscreteMeasure> = globals.into_iter().collect::<Result<_>>()?;

    let mut votes = vec![vec![0usize; next]; locals.len()];
    for (&j, &l) in owner.iter().zip(&labels) {
        votes[j][l] += 1;
    }
    let assignments = votes
        .iter()
        .map(|v| {
            // lowest index wins ties
            let mut best = 0;
            for (i, &c) in v.iter().enumerate() {
                if c > v[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok((globals, assignments))
}

/// The full three-stage baseline. `local_atoms` holds one budget per group,
/// or a single budget shared by all groups.
pub fn three_stage_kmeans(
    data: &GroupedDataset,
    local_atoms: &[usize],
    num_global: usize,
    global_support: usize,
    seed: u64,
) -> Result<MultilevelResult> {
    let start = web_time::Instant::now();
    let budgets = crate::mwm::expand_budgets(local_atoms, data.num_groups())?;
    if num_global == 0 || global_support == 0 {
        return Err(Error::InvalidParameter("cluster counts must be at least 1".into()));
    }
    let locals = local_quantization(data, &budgets, seed)?;
    let (globals, assignments) = globals_from_locals(&locals, num_global, global_support, seed)?;
    let parts = mwm_objective_parts(&locals, &globals, &data.empiricals())?;
    Ok(MultilevelResult {
        method: Method::Tsk,
        state: MultilevelState {
            locals,
            globals,
            assignments,
            objective_trace: vec![parts.total],
        },
        shared_support: None,
        iterations: 0,
        converged: true,
        wall_time: start.elapsed(),
    })
}
