//! Synthetic grouped data from nested mixtures.
//!
//! Global measure `H_i` has atoms drawn around `5 (i - 1) * 1_d`. In the
//! no-constraint process (NC) each group picks a global label and draws its
//! own atoms around atoms of that `H`. In the local-constraint process (LC)
//! a pool of `K` shared atoms is drawn once and each group reweights the
//! shared atoms that carry its label.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, GroupedDataset, Point};
use crate::par;
use crate::rng::stream_rng;

/// Label draws retried this many times in LC before giving up.
pub const MAX_LABEL_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    /// Unit variance everywhere.
    #[default]
    Constant,
    /// Local atoms drawn with variance equal to the 1-based global label.
    Proportional,
}

impl std::str::FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(VarianceMode::Constant),
            "proportional" => Ok(VarianceMode::Proportional),
            other => Err(Error::InvalidParameter(format!("unknown variance mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Nc,
    Lc,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nc" => Ok(Preset::Nc),
            "lc" => Ok(Preset::Lc),
            other => Err(Error::InvalidParameter(format!("unknown preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    /// Number of groups.
    pub m: usize,
    /// Observations per group.
    pub n: usize,
    pub d: usize,
    /// Number of global measures `M`.
    pub num_global: usize,
    /// Atoms per global measure.
    pub global_atoms: usize,
    /// Atoms per local measure (NC).
    pub local_atoms: usize,
    /// Size of the shared atom pool (LC).
    pub shared_atoms: usize,
    pub variance: VarianceMode,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            m: 50,
            n: 50,
            d: 10,
            num_global: 5,
            global_atoms: 6,
            local_atoms: 5,
            shared_atoms: 50,
            variance: VarianceMode::Constant,
            seed: 0,
        }
    }
}

impl GenParams {
    fn validate(&self) -> Result<()> {
        let counts = [
            ("m", self.m),
            ("n", self.n),
            ("d", self.d),
            ("num_global", self.num_global),
            ("global_atoms", self.global_atoms),
            ("local_atoms", self.local_atoms),
            ("shared_atoms", self.shared_atoms),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub preset: Preset,
    pub params: GenParams,
    pub globals: Vec<DiscreteMeasure>,
    pub locals: Vec<DiscreteMeasure>,
    /// Global label of every group (0-based).
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_support: Option<Vec<Point>>,
    /// Global label of every shared atom (0-based).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_labels: Option<Vec<usize>>,
}

// stream layout: 0 globals, 1 shared atoms, 2 + 2j group j parameters,
// 3 + 2j group j observations
const GLOBAL_STREAM: u64 = 0;
const SHARED_STREAM: u64 = 1;

fn params_stream(j: usize) -> u64 {
    2 + 2 * j as u64
}

fn data_stream(j: usize) -> u64 {
    3 + 2 * j as u64
}

/// Dirichlet(1, ..., 1) via normalized unit exponentials.
pub fn dirichlet_ones<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = draws.iter().sum();
        if s > 0.0 {
            return draws.iter().map(|x| x / s).collect();
        }
    }
}

fn gaussian<R: Rng>(rng: &mut R, mean: &[f64], sd: f64) -> Point {
    Point(
        mean.iter()
            .map(|&c| {
                let z: f64 = StandardNormal.sample(rng);
                c + sd * z
            })
            .collect(),
    )
}

fn draw_atom<R: Rng>(rng: &mut R, m: &DiscreteMeasure) -> Result<Point> {
    let idx = WeightedIndex::new(m.weights()).map_err(|e| Error::Generation(e.to_string()))?;
    Ok(m.atoms()[idx.sample(rng)].clone())
}

fn label_sd(mode: VarianceMode, label: usize) -> f64 {
    match mode {
        VarianceMode::Constant => 1.0,
        VarianceMode::Proportional => ((label + 1) as f64).sqrt(),
    }
}

fn global_measures(p: &GenParams) -> Result<Vec<DiscreteMeasure>> {
    let mut rng = stream_rng(p.seed, GLOBAL_STREAM);
    (0..p.num_global)
        .map(|i| {
            let mu = vec![5.0 * i as f64; p.d];
            let atoms: Vec<Point> = (0..p.global_atoms).map(|_| gaussian(&mut rng, &mu, 1.0)).collect();
            let w = dirichlet_ones(&mut rng, p.global_atoms);
            Ok(DiscreteMeasure::from_raw(atoms, w))
        })
        .collect()
}

/// No-constraint process.
pub fn generate_nc(params: &GenParams) -> Result<(GroupedDataset, SyntheticTruth)> {
    params.validate()?;
    let globals = global_measures(params)?;
    let groups = par::map_range(params.m, |j| -> Result<(usize, DiscreteMeasure)> {
        let mut rng = stream_rng(params.seed, params_stream(j));
        let z = rng.random_range(0..params.num_global);
        let sd = label_sd(params.variance, z);
        let mut atoms = Vec::with_capacity(params.local_atoms);
        for _ in 0..params.local_atoms {
            let tau = draw_atom(&mut rng, &globals[z])?;
            atoms.push(gaussian(&mut rng, &tau.0, sd));
        }
        let w = dirichlet_ones(&mut rng, params.local_atoms);
        Ok((z, DiscreteMeasure::from_raw(atoms, w)))
    });
    let (labels, locals): (Vec<usize>, Vec<DiscreteMeasure>) = groups.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let truth = SyntheticTruth {
        preset: Preset::Nc,
        params: *params,
        globals,
        locals,
        labels,
        shared_support: None,
        shared_labels: None,
    };
    let data = sample_data(&truth, params.n, params.seed)?;
    Ok((data, truth))
}

/// Local-constraint process.
pub fn generate_lc(params: &GenParams) -> Result<(GroupedDataset, SyntheticTruth)> {
    params.validate()?;
    let globals = global_measures(params)?;
    let mut rng = stream_rng(params.seed, SHARED_STREAM);
    let mut shared_labels = None;
    for _ in 0..MAX_LABEL_RESAMPLES {
        let z: Vec<usize> = (0..params.shared_atoms)
            .map(|_| rng.random_range(0..params.num_global))
            .collect();
        let mut seen = vec![false; params.num_global];
        z.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            shared_labels = Some(z);
            break;
        }
    }
    let shared_labels = shared_labels.ok_or_else(|| {
        Error::Generation(format!(
            "no shared-atom labelling covering all {} global labels in {MAX_LABEL_RESAMPLES} draws",
            params.num_global
        ))
    })?;
    let mut shared = Vec::with_capacity(params.shared_atoms);
    for &z in &shared_labels {
        let tau = draw_atom(&mut rng, &globals[z])?;
        shared.push(gaussian(&mut rng, &tau.0, label_sd(params.variance, z)));
    }

    let mut labels = Vec::with_capacity(params.m);
    let mut locals = Vec::with_capacity(params.m);
    for j in 0..params.m {
        let mut rng = stream_rng(params.seed, params_stream(j));
        let z = rng.random_range(0..params.num_global);
        let members: Vec<usize> = (0..params.shared_atoms).filter(|&k| shared_labels[k] == z).collect();
        let w = dirichlet_ones(&mut rng, members.len());
        let atoms = members.iter().map(|&k| shared[k].clone()).collect();
        labels.push(z);
        locals.push(DiscreteMeasure::from_raw(atoms, w));
    }
    let truth = SyntheticTruth {
        preset: Preset::Lc,
        params: *params,
        globals,
        locals,
        labels,
        shared_support: Some(shared),
        shared_labels: Some(shared_labels),
    };
    let data = sample_data(&truth, params.n, params.seed)?;
    Ok((data, truth))
}

pub fn generate(preset: Preset, params: &GenParams) -> Result<(GroupedDataset, SyntheticTruth)> {
    match preset {
        Preset::Nc => generate_nc(params),
        Preset::Lc => generate_lc(params),
    }
}

/// `n` observations per group from the truth's local measures:
/// `mu ~ G_j`, `X ~ N(mu, I_d)`.
pub fn sample_data(truth: &SyntheticTruth, n: usize, seed: u64) -> Result<GroupedDataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let groups = par::map(&truth.locals, |j, g| -> Result<Vec<Point>> {
        let mut rng: ChaCha8Rng = stream_rng(seed, data_stream(j));
        (0..n)
            .map(|_| {
                let mu = draw_atom(&mut rng, g)?;
                Ok(gaussian(&mut rng, &mu.0, 1.0))
            })
            .collect()
    });
    GroupedDataset::new(groups.into_iter().collect::<Result<_>>()?)
}
