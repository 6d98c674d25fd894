//! Seeded sweeps over presets, variance modes and sizes.
//!
//! Every run lands as one row of `runs.csv`; `summary.csv` holds medians
//! per cell and is rebuilt from the rows alone, so it can be regenerated
//! from a saved `runs.csv`.

use std::fs;
use std::path::Path;

use log::info;
use mlwm::synthdata::generate as draw;
use mlwm::{GenParams, Preset, VarianceMode};
use serde::{Deserialize, Serialize};

use crate::args::{BenchArgs, MethodArg};
use crate::commands::{fit_data, metrics, FitSettings};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_presets")]
    pub presets: Vec<Preset>,
    #[serde(default = "default_variance")]
    pub variance: Vec<VarianceMode>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodArg>,
    #[serde(default = "default_sizes")]
    pub m: Vec<usize>,
    #[serde(default = "default_sizes")]
    pub n: Vec<usize>,
    /// Seeds `0..seeds`, shifted by `--seed`.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_num_global")]
    pub num_global: usize,
    #[serde(default = "default_global_atoms")]
    pub global_atoms: usize,
    #[serde(default = "default_local_atoms")]
    pub local_atoms: usize,
    #[serde(default = "default_shared_atoms")]
    pub shared_atoms: usize,
    /// Fitting budget `k` for mwm and tsk.
    #[serde(default = "default_local_atoms")]
    pub fit_local_atoms: usize,
    /// Fitting budget `K` for mwms.
    #[serde(default = "default_shared_atoms")]
    pub fit_shared_atoms: usize,
    #[serde(default = "default_global_support")]
    pub global_support: usize,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_presets() -> Vec<Preset> {
    vec![Preset::Nc, Preset::Lc]
}
fn default_variance() -> Vec<VarianceMode> {
    vec![VarianceMode::Constant, VarianceMode::Proportional]
}
fn default_methods() -> Vec<MethodArg> {
    vec![MethodArg::Mwm, MethodArg::Mwms, MethodArg::Tsk]
}
fn default_sizes() -> Vec<usize> {
    vec![50]
}
fn default_seeds() -> u64 {
    10
}
fn default_d() -> usize {
    10
}
fn default_num_global() -> usize {
    5
}
fn default_global_atoms() -> usize {
    6
}
fn default_local_atoms() -> usize {
    5
}
fn default_shared_atoms() -> usize {
    50
}
fn default_global_support() -> usize {
    mlwm::mwm::DEFAULT_GLOBAL_SUPPORT
}
fn default_max_outer() -> usize {
    mlwm::mwm::DEFAULT_MAX_OUTER
}
fn default_rel_tol() -> f64 {
    mlwm::mwm::DEFAULT_REL_TOL
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: BenchConfig = toml::from_str(text)?;
        if cfg.presets.is_empty() || cfg.variance.is_empty() || cfg.methods.is_empty() {
            return Err(CliError::Usage("presets, variance and methods must be non-empty".into()));
        }
        if cfg.m.is_empty() || cfg.n.is_empty() || cfg.seeds == 0 {
            return Err(CliError::Usage("m, n and seeds must be non-empty".into()));
        }
        Ok(cfg)
    }
}

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub preset: Preset,
    pub method: MethodArg,
    pub m: usize,
    pub n: usize,
    pub variance_mode: VarianceMode,
    pub seed: u64,
    #[serde(rename = "W")]
    pub w: f64,
    pub w_local: f64,
    pub w_global: f64,
    pub objective: f64,
    pub nmi: f64,
    pub ari: f64,
    pub ami: f64,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub preset: Preset,
    pub method: MethodArg,
    pub m: usize,
    pub n: usize,
    pub variance_mode: VarianceMode,
    pub runs: usize,
    pub median_w: f64,
    pub median_nmi: f64,
    pub median_ari: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

pub fn sweep(cfg: &BenchConfig, seed_offset: u64) -> Result<Vec<RunRow>> {
    let mut rows = Vec::new();
    for &preset in &cfg.presets {
        for &variance in &cfg.variance {
            for &m in &cfg.m {
                for &n in &cfg.n {
                    for s in 0..cfg.seeds {
                        let seed = seed_offset + s;
                        let params = GenParams {
                            m,
                            n,
                            d: cfg.d,
                            num_global: cfg.num_global,
                            global_atoms: cfg.global_atoms,
                            local_atoms: cfg.local_atoms,
                            shared_atoms: cfg.shared_atoms,
                            variance,
                            seed,
                        };
                        let (data, truth) = draw(preset, &params)?;
                        for &method in &cfg.methods {
                            let settings = FitSettings {
                                method,
                                num_global: cfg.num_global,
                                local_atoms: cfg.fit_local_atoms,
                                shared_atoms: cfg.fit_shared_atoms,
                                global_support: cfg.global_support,
                                max_outer: cfg.max_outer,
                                rel_tol: cfg.rel_tol,
                                seed,
                            };
                            let result = fit_data(&data, &settings)?;
                            let mt = metrics(&result, &truth)?;
                            info!("{preset:?} {variance:?} m={m} n={n} seed={seed} {}: W={}", method.name(), mt.w);
                            rows.push(RunRow {
                                preset,
                                method,
                                m,
                                n,
                                variance_mode: variance,
                                seed,
                                w: mt.w,
                                w_local: mt.w_local,
                                w_global: mt.w_global,
                                objective: mt.objective,
                                nmi: mt.nmi,
                                ari: mt.ari,
                                ami: mt.ami,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Medians per (preset, method, m, n, variance) cell, in first-seen order.
pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    type Cell = (Preset, MethodArg, usize, usize, VarianceMode);
    let mut cells: Vec<(Cell, Vec<&RunRow>)> = Vec::new();
    for r in rows {
        let key = (r.preset, r.method, r.m, r.n, r.variance_mode);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(r),
            None => cells.push((key, vec![r])),
        }
    }
    cells
        .into_iter()
        .map(|((preset, method, m, n, variance_mode), cell)| {
            let mut w: Vec<f64> = cell.iter().map(|r| r.w).collect();
            let mut nmi: Vec<f64> = cell.iter().map(|r| r.nmi).collect();
            let mut ari: Vec<f64> = cell.iter().map(|r| r.ari).collect();
            SummaryRow {
                preset,
                method,
                m,
                n,
                variance_mode,
                runs: cell.len(),
                median_w: median(&mut w),
                median_nmi: median(&mut nmi),
                median_ari: median(&mut ari),
            }
        })
        .collect()
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn run(a: &BenchArgs) -> Result<()> {
    let cfg = BenchConfig::parse(&fs::read_to_string(&a.config)?)?;
    fs::create_dir_all(&a.out_dir)?;
    let rows = sweep(&cfg, a.seed)?;
    let runs_path = a.out_dir.join("runs.csv");
    write_rows(&rows, &runs_path)?;
    // summary is computed from what was written, not from memory
    let summary = summarize(&read_runs(&runs_path)?);
    write_rows(&summary, &a.out_dir.join("summary.csv"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn config_defaults_and_rejects_unknown_keys() {
        let cfg = BenchConfig::parse("seeds = 3\nmethods = [\"tsk\"]\n").unwrap();
        assert_eq!(cfg.seeds, 3);
        assert_eq!(cfg.methods, vec![MethodArg::Tsk]);
        assert_eq!(cfg.presets, vec![Preset::Nc, Preset::Lc]);
        assert!(BenchConfig::parse("sedes = 3\n").is_err());
        assert!(BenchConfig::parse("methods = []\n").is_err());
        assert!(BenchConfig::parse("presets = [\"xx\"]\n").is_err());
    }

    fn row(method: MethodArg, seed: u64, w: f64) -> RunRow {
        RunRow {
            preset: Preset::Lc,
            method,
            m: 4,
            n: 5,
            variance_mode: VarianceMode::Constant,
            seed,
            w,
            w_local: 0.0,
            w_global: 0.0,
            objective: 0.0,
            nmi: 1.0,
            ari: 1.0,
            ami: 1.0,
        }
    }

    #[test]
    fn summary_groups_cells_in_order() {
        let rows = vec![
            row(MethodArg::Tsk, 0, 3.0),
            row(MethodArg::Mwm, 0, 1.0),
            row(MethodArg::Tsk, 1, 5.0),
            row(MethodArg::Mwm, 1, 2.0),
            row(MethodArg::Tsk, 2, 4.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].method, s[0].runs, s[0].median_w), (MethodArg::Tsk, 3, 4.0));
        assert_eq!((s[1].method, s[1].runs, s[1].median_w), (MethodArg::Mwm, 2, 1.5));
    }

    #[test]
    fn runs_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let rows = vec![row(MethodArg::Mwms, 7, 0.1 + 0.2), row(MethodArg::Tsk, 7, 1.0 / 3.0)];
        write_rows(&rows, &path).unwrap();
        assert_eq!(read_runs(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("preset,method,m,n,variance_mode,seed,W,"));
    }
}
