//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each, and exits nonzero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use mlwm::synthdata::generate;
use mlwm::{
    exact_coupling, free_support_barycenter, make_measure, mwm_objective, mwm_run, mwms_run, sample_data,
    sinkhorn_coupling, BarycenterProblem, CostMatrix, DiscreteMeasure, GenParams, GroupedDataset, MultilevelConfig,
    MultilevelResult, MultilevelState, MwmsConfig, Point, Preset, VarianceMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(r: &mut ChaCha8Rng, d: usize, scale: f64) -> Point {
    Point((0..d).map(|_| r.random_range(-scale..scale)).collect())
}

fn random_measure(r: &mut ChaCha8Rng, k: usize, d: usize, scale: f64) -> DiscreteMeasure {
    let atoms = (0..k).map(|_| random_point(r, d, scale)).collect();
    let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    make_measure(atoms, raw.iter().map(|w| w / s).collect()).unwrap()
}

fn sq(a: &Point, b: &Point) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nonincreasing(trace: &[f64], slack: f64) -> Result<(), String> {
    for (t, w) in trace.windows(2).enumerate() {
        ensure!(w[1] <= w[0] + slack, "trace rises at step {}: {} -> {}", t + 1, w[0], w[1]);
    }
    Ok(())
}

fn monotone_runs(fit: impl Fn(&GroupedDataset, u64) -> MultilevelResult, preset: Preset) -> Outcome {
    let start = Instant::now();
    let mut outer = 0;
    for seed in 0..20 {
        let params = GenParams {
            m: 10,
            n: 20,
            d: 2,
            num_global: 3,
            global_atoms: 3,
            local_atoms: 3,
            shared_atoms: 10,
            variance: VarianceMode::Constant,
            seed,
        };
        let (data, _) = generate(preset, &params).map_err(|e| e.to_string())?;
        let result = fit(&data, seed);
        let trace = &result.state.objective_trace;
        nonincreasing(trace, 1e-9).map_err(|e| format!("seed {seed}: {e}"))?;
        let exact = mwm_objective(&result.state, &data).map_err(|e| e.to_string())?;
        let last = *trace.last().unwrap();
        ensure!(
            (exact - last).abs() <= 1e-9 * last.max(1.0),
            "seed {seed}: trace ends at {last}, exact objective {exact}"
        );
        outer += trace.len() - 1;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "20 runs took {:.1}s", elapsed.as_secs_f64());
    Ok(format!("20 runs, {outer} outer steps, {:.1}s", elapsed.as_secs_f64()))
}

fn criterion_1() -> Outcome {
    monotone_runs(
        |data, seed| mwm_run(data, &MultilevelConfig::new(3, 3).with_seed(seed)).unwrap(),
        Preset::Nc,
    )
}

fn criterion_2() -> Outcome {
    monotone_runs(
        |data, seed| {
            let r = mwms_run(data, &MwmsConfig::new(10, 3).with_seed(seed)).unwrap();
            let shared = r.shared_support.clone().expect("shared support");
            assert_eq!(shared.len(), 10);
            for g in &r.state.locals {
                for a in g.atoms() {
                    assert!(shared.contains(a), "local atom off the shared support");
                }
            }
            r
        },
        Preset::Lc,
    )
}

fn criterion_3() -> Outcome {
    let (m, n, d) = (3usize, 4usize, 2usize);
    let mut r = rng(31);
    let groups: Vec<Vec<Point>> = (0..m).map(|_| (0..n).map(|_| random_point(&mut r, d, 4.0)).collect()).collect();
    let data = GroupedDataset::new(groups.clone()).unwrap();
    let means: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| (0..d).map(|c| g.iter().map(|p| p.0[c]).sum::<f64>() / n as f64).collect())
        .collect();
    let mf = m as f64;

    // closed form
    let closed: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            (0..d)
                .map(|c| {
                    let others: f64 = (0..m).filter(|&i| i != j).map(|i| means[i][c]).sum();
                    ((mf * mf + 1.0) * means[j][c] + others) / (mf * mf + mf)
                })
                .collect()
        })
        .collect();

    // independent fixed point of the two block updates:
    // theta_j <- (m mean_j + h) / (m + 1), h <- mean of theta
    let mut theta = vec![vec![0.0; d]; m];
    for _ in 0..10_000 {
        let h: Vec<f64> = (0..d).map(|c| theta.iter().map(|t| t[c]).sum::<f64>() / mf).collect();
        let next: Vec<Vec<f64>> = (0..m)
            .map(|j| (0..d).map(|c| (mf * means[j][c] + h[c]) / (mf + 1.0)).collect())
            .collect();
        let moved = theta
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        theta = next;
        if moved == 0.0 {
            break;
        }
    }
    for j in 0..m {
        for c in 0..d {
            ensure!(
                (theta[j][c] - closed[j][c]).abs() < 1e-12,
                "oracle iteration and closed form disagree at group {j}"
            );
        }
    }

    let mut cfg = MultilevelConfig::new(1, 1).with_seed(5);
    cfg.rel_tol = 1e-14;
    cfg.max_outer = 1000;
    let fit = mwm_run(&data, &cfg).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for j in 0..m {
        let g = fit.state.locals[j].pruned();
        ensure!(g.len() == 1, "group {j} has {} atoms", g.len());
        for c in 0..d {
            worst = worst.max((g.atoms()[0].0[c] - closed[j][c]).abs());
        }
    }
    ensure!(worst <= 1e-6, "max coordinate error {worst:e}");
    Ok(format!("max coordinate error {worst:.1e} after {} outer steps", fit.iterations))
}

/// Exact transport value by LP, independent of the library's solvers.
fn lp_transport(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = a
        .atoms()
        .iter()
        .map(|x| b.atoms().iter().map(|y| lp.add_var(sq(x, y), (0.0, f64::INFINITY))).collect())
        .collect();
    for (i, row) in vars.iter().enumerate() {
        let expr: Vec<_> = row.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, a.weights()[i]);
    }
    for j in 0..b.len() {
        let expr: Vec<_> = vars.iter().map(|row| (row[j], 1.0)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, b.weights()[j]);
    }
    lp.solve().unwrap().into_solution().ok().unwrap().objective()
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let m = r.random_range(1..=5usize);
        let big_m = r.random_range(1..=3usize);
        let d = 2;
        let groups: Vec<Vec<Point>> = (0..m)
            .map(|_| (0..r.random_range(1..=4usize)).map(|_| random_point(&mut r, d, 3.0)).collect())
            .collect();
        let data = GroupedDataset::new(groups).unwrap();
        let locals: Vec<DiscreteMeasure> = (0..m)
            .map(|_| {
                let k = r.random_range(1..=4);
                random_measure(&mut r, k, d, 3.0)
            })
            .collect();
        let globals: Vec<DiscreteMeasure> = (0..big_m)
            .map(|_| {
                let k = r.random_range(1..=4);
                random_measure(&mut r, k, d, 3.0)
            })
            .collect();
        let state = MultilevelState {
            locals: locals.clone(),
            globals: globals.clone(),
            assignments: vec![0; m],
            objective_trace: vec![],
        };
        let semi_relaxed = mwm_objective(&state, &data).map_err(|e| e.to_string())?;

        // transport form: couple the uniform measure on {G_j} with a
        // measure of free weights q in the simplex on {H_i}
        let local: f64 = (0..m).map(|j| lp_transport(&locals[j], &data.empiricals()[j])).sum();
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<Vec<_>> = locals
            .iter()
            .map(|g| {
                globals
                    .iter()
                    .map(|h| lp.add_var(lp_transport(g, h), (0.0, f64::INFINITY)))
                    .collect()
            })
            .collect();
        for row in &vars {
            let expr: Vec<_> = row.iter().map(|&v| (v, 1.0)).collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 1.0 / m as f64);
        }
        let q: Vec<_> = (0..big_m).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
        for (i, &qi) in q.iter().enumerate() {
            let mut expr: Vec<_> = vars.iter().map(|row| (row[i], 1.0)).collect();
            expr.push((qi, -1.0));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 0.0);
        }
        let simplex: Vec<_> = q.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(simplex.as_slice(), ComparisonOp::Eq, 1.0);
        let transport_form = local + lp
            .solve()
            .map_err(|e| e.to_string())?
            .into_solution()
            .map_err(|_| "lp interrupted".to_string())?
            .objective();
        let gap = (semi_relaxed - transport_form).abs();
        ensure!(gap <= 1e-8, "state {trial}: semi-relaxed {semi_relaxed} vs transport form {transport_form}");
        worst = worst.max(gap);
    }
    Ok(format!("10 states, max gap {worst:.1e}"))
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut instances = 0;
    for k in 1..=5usize {
        for _ in 0..8 {
            let xs: Vec<Point> = (0..k).map(|_| random_point(&mut r, 2, 5.0)).collect();
            let ys: Vec<Point> = (0..k).map(|_| random_point(&mut r, 2, 5.0)).collect();
            let a = make_measure(xs.clone(), vec![1.0 / k as f64; k]).unwrap();
            let b = make_measure(ys.clone(), vec![1.0 / k as f64; k]).unwrap();
            let cost = CostMatrix::from_rows(xs.iter().map(|x| ys.iter().map(|y| sq(x, y)).collect()).collect())
                .unwrap();
            let perm_cost = |p: &[usize]| -> f64 { (0..k).map(|i| cost.get(i, p[i])).sum::<f64>() };
            let brute = permutations(k)
                .iter()
                .map(|p| perm_cost(p))
                .fold(f64::INFINITY, f64::min);
            let (plan, value) = exact_coupling(&a, &b, &cost).map_err(|e| e.to_string())?;
            // the optimal vertex is a scaled permutation matrix
            let mut sigma = vec![0; k];
            for i in 0..k {
                let row = plan.row(i);
                let j = (0..k).max_by(|&x, &y| row[x].total_cmp(&row[y])).unwrap();
                for (c, &t) in row.iter().enumerate() {
                    let want = if c == j { 1.0 / k as f64 } else { 0.0 };
                    ensure!((t - want).abs() <= 1e-15, "plan is not a permutation at ({i},{c}): {t}");
                }
                sigma[i] = j;
            }
            ensure!(perm_cost(&sigma) == brute, "k={k}: solver permutation {} vs brute {brute}", perm_cost(&sigma));
            ensure!((value - brute / k as f64).abs() <= 1e-12 * brute.max(1.0), "k={k}: value {value}");
            instances += 1;
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = random_measure(&mut r, 5, 2, 5.0);
        let b = random_measure(&mut r, 5, 2, 5.0);
        let cost = mlwm::cost_matrix(&a, &b).unwrap();
        let (_, exact) = exact_coupling(&a, &b, &cost).unwrap();
        let eps = 1e-3 * cost.median_positive();
        let out = sinkhorn_coupling(&a, &b, &cost, eps, 1e-9, 10_000).map_err(|e| e.to_string())?;
        let rel = (out.value - exact).abs() / exact;
        ensure!(rel <= 0.01, "sinkhorn {} vs exact {exact} ({:.3}%)", out.value, 100.0 * rel);
        worst = worst.max(rel);
    }
    Ok(format!(
        "{instances} permutation instances exact, sinkhorn max rel error {:.2e} on 20 instances",
        worst
    ))
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let mut checked = 0;
    for trial in 0..40 {
        let n_measures = r.random_range(1..=4usize);
        let d = r.random_range(1..=3usize);
        let measures: Vec<DiscreteMeasure> = (0..n_measures)
            .map(|_| {
                let s = r.random_range(1..=5);
                random_measure(&mut r, s, d, 3.0)
            })
            .collect();
        let total: usize = measures.iter().map(|m| m.len()).sum();
        let k = r.random_range(1..=20usize);
        let bound = k.min(total - n_measures + 1);
        let raw: Vec<f64> = (0..n_measures).map(|_| r.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let lambda = raw.iter().map(|x| x / s).collect();
        let problem = BarycenterProblem::new(measures, lambda, k).unwrap().with_seed(trial);
        let bary = free_support_barycenter(&problem, 100, 1e-7).map_err(|e| e.to_string())?;
        ensure!(
            bary.measure.len() <= bound,
            "trial {trial}: {} atoms, bound {bound}",
            bary.measure.len()
        );
        checked += 1;
    }
    let x = Point(vec![1.5, -2.0, 0.25]);
    let y = Point(vec![-0.5, 4.0, 1.0]);
    let problem = BarycenterProblem::uniform(vec![DiscreteMeasure::dirac(x.clone()), DiscreteMeasure::dirac(y.clone())], 1)
        .unwrap();
    let bary = free_support_barycenter(&problem, 100, 1e-7).map_err(|e| e.to_string())?;
    let pruned = bary.measure.pruned();
    ensure!(pruned.len() == 1, "midpoint barycenter has {} atoms", pruned.len());
    for c in 0..3 {
        let mid = 0.5 * (x.0[c] + y.0[c]);
        ensure!((pruned.atoms()[0].0[c] - mid).abs() <= 1e-10, "midpoint off in coordinate {c}");
    }
    Ok(format!("{checked} random barycenters within bound, midpoint exact"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn criterion_7() -> Outcome {
    let params = GenParams {
        m: 5,
        n: 10,
        d: 2,
        num_global: 2,
        global_atoms: 3,
        local_atoms: 3,
        variance: VarianceMode::Constant,
        seed: 0,
        ..Default::default()
    };
    let (_, truth) = generate(Preset::Nc, &params).map_err(|e| e.to_string())?;
    let true_state = MultilevelState {
        locals: truth.locals.clone(),
        globals: truth.globals.clone(),
        assignments: truth.labels.clone(),
        objective_trace: vec![],
    };
    // population objective of the true parameters, by Monte Carlo
    let big = sample_data(&truth, 5000, 999).map_err(|e| e.to_string())?;
    let f_true = mwm_objective(&true_state, &big).map_err(|e| e.to_string())?;
    let mut gaps = Vec::new();
    for n in [10usize, 100, 1000] {
        let diffs: Vec<f64> = (0..5u64)
            .map(|s| {
                let data = sample_data(&truth, n, 100 + s).unwrap();
                let fit = mwm_run(&data, &MultilevelConfig::new(3, 2).with_seed(s)).unwrap();
                (fit.objective() - f_true).abs()
            })
            .collect();
        gaps.push(median(diffs));
    }
    ensure!(
        gaps[0] > gaps[1] && gaps[1] > gaps[2],
        "median gaps not strictly decreasing: {gaps:?} (f_true {f_true})"
    );
    Ok(format!(
        "f(true) ~ {f_true:.3}; median gaps {:.3} > {:.3} > {:.3}",
        gaps[0], gaps[1], gaps[2]
    ))
}

fn mlwm_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mlwm"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "mlwm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn read_runs(path: &Path) -> Result<Vec<(String, u64, f64)>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("no {name} column"));
    let (cm, cs, cw) = (col("method")?, col("seed")?, col("W")?);
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            Ok((
                cells[cm].to_string(),
                cells[cs].parse().map_err(|_| "bad seed".to_string())?,
                cells[cw].parse().map_err(|_| "bad W".to_string())?,
            ))
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let common = "m = [50]\nn = [50]\nseeds = 10\nd = 10\nnum_global = 5\nglobal_atoms = 6\nlocal_atoms = 5\n\
                  shared_atoms = 50\nfit_local_atoms = 5\nfit_shared_atoms = 50\nglobal_support = 10\n";
    std::fs::write(
        dir.path().join("lc.toml"),
        format!("presets = [\"lc\"]\nvariance = [\"proportional\"]\nmethods = [\"mwms\", \"tsk\"]\n{common}"),
    )
    .unwrap();
    std::fs::write(
        dir.path().join("nc.toml"),
        format!("presets = [\"nc\"]\nvariance = [\"constant\"]\nmethods = [\"tsk\", \"mwm\"]\n{common}"),
    )
    .unwrap();
    mlwm_cli(&["bench", "--config", "lc.toml", "--out-dir", "lc"], dir.path())?;
    mlwm_cli(&["bench", "--config", "nc.toml", "--out-dir", "nc"], dir.path())?;
    let elapsed = start.elapsed();

    let lc = read_runs(&dir.path().join("lc/runs.csv"))?;
    let w_of = |rows: &[(String, u64, f64)], method: &str, seed: u64| {
        rows.iter().find(|r| r.0 == method && r.1 == seed).map(|r| r.2)
    };
    let mut wins = 0;
    for seed in 0..10 {
        let (a, b) = (w_of(&lc, "mwms", seed), w_of(&lc, "tsk", seed));
        match (a, b) {
            (Some(a), Some(b)) if a < b => wins += 1,
            (Some(_), Some(_)) => {}
            _ => return Err(format!("missing LC runs for seed {seed}")),
        }
    }
    let med = |rows: &[(String, u64, f64)], method: &str| {
        median(rows.iter().filter(|r| r.0 == method).map(|r| r.2).collect())
    };
    let (lc_mwms, lc_tsk) = (med(&lc, "mwms"), med(&lc, "tsk"));
    let nc = read_runs(&dir.path().join("nc/runs.csv"))?;
    let (nc_tsk, nc_mwm) = (med(&nc, "tsk"), med(&nc, "mwm"));
    let report = format!(
        "LC: mwms wins {wins}/10, median W mwms {lc_mwms:.3} vs tsk {lc_tsk:.3}; \
         NC (reported only): median W tsk {nc_tsk:.3}, mwm {nc_mwm:.3}; {:.0}s",
        elapsed.as_secs_f64()
    );
    ensure!(wins >= 8 && lc_mwms < lc_tsk, "{report}");
    ensure!(elapsed < Duration::from_secs(600), "{report}");
    Ok(report)
}

fn snapshot(dir: &Path, files: &[&str]) -> Vec<Vec<u8>> {
    files.iter().map(|f| std::fs::read(dir.join(f)).unwrap_or_default()).collect()
}

fn criterion_9() -> Outcome {
    let runs: Vec<_> = (0..2)
        .map(|_| -> Result<Vec<Vec<u8>>, String> {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let p = dir.path();
            mlwm_cli(&["generate", "--preset", "nc", "--m", "10", "--seed", "7"], p)?;
            mlwm_cli(
                &[
                    "generate", "--preset", "lc", "--m", "8", "--n", "15", "--d", "3", "--num-global", "2",
                    "--shared-atoms", "12", "--variance", "proportional", "--seed", "7", "--out-data", "lc.csv",
                    "--out-truth", "lc.json",
                ],
                p,
            )?;
            for method in ["mwm", "mwms", "tsk"] {
                let out = format!("{method}.json");
                let metrics = format!("{method}.csv");
                mlwm_cli(
                    &["fit", "--method", method, "--data", "lc.csv", "-M", "2", "-K", "12", "--seed", "3", "--out", &out],
                    p,
                )?;
                mlwm_cli(&["evaluate", "--result", &out, "--truth", "lc.json", "--out", &metrics], p)?;
            }
            std::fs::write(
                p.join("bench.toml"),
                "presets = [\"nc\", \"lc\"]\nvariance = [\"constant\"]\nmethods = [\"mwm\", \"mwms\", \"tsk\"]\n\
                 m = [6]\nn = [12]\nseeds = 2\nd = 2\nnum_global = 2\nglobal_atoms = 3\nlocal_atoms = 3\n\
                 shared_atoms = 8\nfit_local_atoms = 3\nfit_shared_atoms = 8\nglobal_support = 5\n",
            )
            .map_err(|e| e.to_string())?;
            mlwm_cli(&["bench", "--config", "bench.toml", "--out-dir", "bench", "--seed", "4"], p)?;
            Ok(snapshot(
                p,
                &[
                    "data.csv", "truth.json", "lc.csv", "lc.json", "mwm.json", "mwms.json", "tsk.json", "mwm.csv",
                    "mwms.csv", "tsk.csv", "bench/runs.csv", "bench/summary.csv",
                ],
            ))
        })
        .collect::<Result<_, _>>()?;
    let names = [
        "data.csv", "truth.json", "lc.csv", "lc.json", "mwm.json", "mwms.json", "tsk.json", "mwm.csv", "mwms.csv",
        "tsk.csv", "bench/runs.csv", "bench/summary.csv",
    ];
    for (i, name) in names.iter().enumerate() {
        ensure!(!runs[0][i].is_empty(), "{name} was not written");
        ensure!(runs[0][i] == runs[1][i], "{name} differs between identical runs");
    }
    Ok(format!("{} output files byte-identical across reruns", names.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("monotone MWM objective trace", criterion_1),
        ("monotone MWMS objective trace", criterion_2),
        ("two-level fixed point with one atom per level", criterion_3),
        ("semi-relaxed objective equals transport form", criterion_4),
        ("exact and entropic transport correctness", criterion_5),
        ("barycenter support bound and midpoint", criterion_6),
        ("consistency trend in sample size", criterion_7),
        ("benchmark ordering on LC data", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS [{name}] {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL [{name}] {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
