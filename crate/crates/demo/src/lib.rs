//! Browser demo: draw a planar grouped dataset, fit it, and walk along the
//! Wasserstein geodesic between two fitted global measures.
//!
//! The [`Session`] type holds all state and is plain Rust; the exported
//! [`Demo`] wrapper only converts errors and serializes to JSON strings,
//! which the page parses.

use mlwm::synthdata::generate;
use mlwm::{
    cluster_agreement, free_support_barycenter, mwm_run, mwms_run, three_stage_kmeans, w_to_truth, AgreementKind,
    BarycenterProblem, DiscreteMeasure, GenParams, GroupedDataset, MultilevelConfig, MultilevelResult, MwmsConfig,
    Preset, SyntheticTruth, VarianceMode,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Demo data is always planar so it can be drawn.
pub const DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureView {
    pub atoms: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl From<&DiscreteMeasure> for MeasureView {
    fn from(m: &DiscreteMeasure) -> Self {
        MeasureView {
            atoms: m.atoms().iter().map(|p| [p.0[0], p.0[1]]).collect(),
            weights: m.weights().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetView {
    pub groups: Vec<Vec<[f64; 2]>>,
    pub labels: Vec<usize>,
    pub globals: Vec<MeasureView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitView {
    pub method: String,
    pub locals: Vec<MeasureView>,
    pub globals: Vec<MeasureView>,
    pub assignments: Vec<usize>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub w_to_truth: f64,
    pub ari: f64,
}

#[derive(Debug, Default)]
pub struct Session {
    data: Option<GroupedDataset>,
    truth: Option<SyntheticTruth>,
    fit: Option<MultilevelResult>,
}

impl Session {
    pub fn generate(&mut self, preset: &str, variance: &str, m: usize, n: usize, seed: u64) -> Result<DatasetView, String> {
        let preset: Preset = preset.parse().map_err(|e: mlwm::Error| e.to_string())?;
        let variance: VarianceMode = variance.parse().map_err(|e: mlwm::Error| e.to_string())?;
        let params = GenParams {
            m,
            n,
            d: DIM,
            num_global: 3,
            global_atoms: 3,
            local_atoms: 3,
            shared_atoms: 12,
            variance,
            seed,
        };
        let (data, truth) = generate(preset, &params).map_err(|e| e.to_string())?;
        let view = DatasetView {
            groups: data
                .groups()
                .iter()
                .map(|g| g.iter().map(|p| [p.0[0], p.0[1]]).collect())
                .collect(),
            labels: truth.labels.clone(),
            globals: truth.globals.iter().map(MeasureView::from).collect(),
        };
        self.data = Some(data);
        self.truth = Some(truth);
        self.fit = None;
        Ok(view)
    }

    pub fn fit(&mut self, method: &str, num_global: usize, local_atoms: usize, shared_atoms: usize, seed: u64) -> Result<FitView, String> {
        let data = self.data.as_ref().ok_or("generate a dataset first")?;
        let truth = self.truth.as_ref().ok_or("generate a dataset first")?;
        let base = MultilevelConfig::new(local_atoms, num_global).with_seed(seed);
        let result = match method {
            "mwm" => mwm_run(data, &base),
            "mwms" => mwms_run(data, &MwmsConfig { base, shared_atoms }),
            "tsk" => three_stage_kmeans(data, &[local_atoms], num_global, base.global_support, seed),
            other => return Err(format!("unknown method '{other}'")),
        }
        .map_err(|e| e.to_string())?;
        let view = FitView {
            method: method.to_string(),
            locals: result.state.locals.iter().map(MeasureView::from).collect(),
            globals: result.state.globals.iter().map(MeasureView::from).collect(),
            assignments: result.state.assignments.clone(),
            trace: result.state.objective_trace.clone(),
            iterations: result.iterations,
            w_to_truth: w_to_truth(&result, truth).map_err(|e| e.to_string())?,
            ari: cluster_agreement(&result.state.assignments, &truth.labels, AgreementKind::Ari)
                .map_err(|e| e.to_string())?,
        };
        self.fit = Some(result);
        Ok(view)
    }

    /// Point at fraction `t` of the way from global measure `u` to `v`,
    /// as a two-measure barycenter with weights `(1 - t, t)`.
    pub fn interpolate(&self, u: usize, v: usize, t: f64) -> Result<MeasureView, String> {
        let fit = self.fit.as_ref().ok_or("fit a model first")?;
        let globals = &fit.state.globals;
        let (a, b) = match (globals.get(u), globals.get(v)) {
            (Some(a), Some(b)) => (a.pruned(), b.pruned()),
            _ => return Err(format!("only {} global measures", globals.len())),
        };
        let t = t.clamp(0.0, 1.0);
        if t == 0.0 {
            return Ok((&a).into());
        }
        if t == 1.0 {
            return Ok((&b).into());
        }
        let k = a.len() + b.len() - 1;
        let problem = BarycenterProblem::new(vec![a, b], vec![1.0 - t, t], k).map_err(|e| e.to_string())?;
        let bary = free_support_barycenter(&problem, 100, 1e-9).map_err(|e| e.to_string())?;
        Ok((&bary.measure.pruned()).into())
    }
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[derive(Default)]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo::default()
    }

    /// JSON `{groups, labels, globals}` for a fresh synthetic dataset.
    pub fn generate(&mut self, preset: &str, variance: &str, m: usize, n: usize, seed: u64) -> Result<String, JsError> {
        to_json(self.session.generate(preset, variance, m, n, seed))
    }

    /// JSON fit summary; `method` is one of mwm, mwms, tsk.
    pub fn fit(&mut self, method: &str, num_global: usize, local_atoms: usize, shared_atoms: usize, seed: u64) -> Result<String, JsError> {
        to_json(self.session.fit(method, num_global, local_atoms, shared_atoms, seed))
    }

    pub fn interpolate(&self, u: usize, v: usize, t: f64) -> Result<String, JsError> {
        to_json(self.session.interpolate(u, v, t))
    }
}
