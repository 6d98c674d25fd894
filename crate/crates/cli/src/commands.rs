use std::fs::File;
use std::io::BufWriter;

use log::info;
use mlwm::io::{load_grouped_csv, load_json, save_grouped_csv, save_json};
use mlwm::metrics::truth_distance;
use mlwm::synthdata::generate as draw;
use mlwm::{
    cluster_agreement, mwm_run, mwms_run, three_stage_kmeans, AgreementKind, GenParams, GroupedDataset,
    Method, MultilevelConfig, MultilevelResult, MwmsConfig, SyntheticTruth,
};
use serde::Serialize;

use crate::args::{EvaluateArgs, FitArgs, GenerateArgs, MethodArg};
use crate::error::{CliError, Result};

pub fn gen_params(a: &GenerateArgs) -> GenParams {
    GenParams {
        m: a.m,
        n: a.n,
        d: a.d,
        num_global: a.num_global,
        global_atoms: a.global_atoms,
        local_atoms: a.local_atoms,
        shared_atoms: a.shared_atoms,
        variance: a.variance.into(),
        seed: a.seed,
    }
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let (data, truth) = draw(a.preset.into(), &gen_params(a))?;
    save_grouped_csv(&data, &a.out_data)?;
    save_json(&truth, &a.out_truth)?;
    info!("wrote {} groups to {}", data.num_groups(), a.out_data.display());
    Ok(())
}

/// Fitting knobs shared by `fit` and `bench`.
#[derive(Debug, Clone)]
pub struct FitSettings {
    pub method: MethodArg,
    pub num_global: usize,
    pub local_atoms: usize,
    pub shared_atoms: usize,
    pub global_support: usize,
    pub max_outer: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

pub fn fit_data(data: &GroupedDataset, s: &FitSettings) -> Result<MultilevelResult> {
    let mut base = MultilevelConfig::new(s.local_atoms, s.num_global)
        .with_seed(s.seed)
        .with_global_support(s.global_support);
    base.max_outer = s.max_outer;
    base.rel_tol = s.rel_tol;
    let result = match s.method {
        MethodArg::Mwm => mwm_run(data, &base)?,
        MethodArg::Mwms => mwms_run(
            data,
            &MwmsConfig {
                base,
                shared_atoms: s.shared_atoms,
            },
        )?,
        MethodArg::Tsk => three_stage_kmeans(data, &[s.local_atoms], s.num_global, s.global_support, s.seed)?,
    };
    Ok(result)
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let data = load_grouped_csv(&a.data)?;
    let settings = FitSettings {
        method: a.method,
        num_global: a.num_global,
        local_atoms: a.local_atoms,
        shared_atoms: a.shared_atoms,
        global_support: a.global_support,
        max_outer: a.max_outer,
        rel_tol: a.rel_tol,
        seed: a.seed,
    };
    let result = fit_data(&data, &settings)?;
    info!(
        "{} finished: objective {} after {} iterations in {:.3}s",
        a.method.name(),
        result.objective(),
        result.iterations,
        result.wall_time.as_secs_f64()
    );
    save_json(&result, &a.out)?;
    if a.strict && !result.converged {
        return Err(CliError::NotConverged {
            iterations: result.iterations,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub method: String,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub w: f64,
    pub w_local: f64,
    pub w_global: f64,
    pub nmi: f64,
    pub ari: f64,
    pub ami: f64,
}

pub fn metrics(result: &MultilevelResult, truth: &SyntheticTruth) -> Result<Metrics> {
    let method = match result.method {
        Method::Mwm => "mwm",
        Method::Mwms => "mwms",
        Method::Tsk => "tsk",
    };
    let dist = truth_distance(&result.state.locals, &result.state.globals, truth)?;
    let labels = &result.state.assignments;
    Ok(Metrics {
        method: method.to_string(),
        objective: result.objective(),
        iterations: result.iterations,
        converged: result.converged,
        w: dist.total,
        w_local: dist.local,
        w_global: dist.global,
        nmi: cluster_agreement(labels, &truth.labels, AgreementKind::Nmi)?,
        ari: cluster_agreement(labels, &truth.labels, AgreementKind::Ari)?,
        ami: cluster_agreement(labels, &truth.labels, AgreementKind::Ami)?,
    })
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let result: MultilevelResult = load_json(&a.result)?;
    let truth: SyntheticTruth = load_json(&a.truth)?;
    let row = metrics(&result, &truth)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&a.out)?));
    w.serialize(&row)?;
    w.flush()?;
    Ok(())
}
