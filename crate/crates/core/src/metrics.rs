//! Evaluation against a known truth: the Wasserstein-to-truth score and
//! label agreement indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::mwm::MultilevelResult;
use crate::par;
use crate::synthdata::SyntheticTruth;
use crate::transport::w2_sq;

fn pairwise_w2(a: &[DiscreteMeasure], b: &[DiscreteMeasure]) -> Result<Vec<Vec<f64>>> {
    par::map(a, |_, x| b.iter().map(|y| w2_sq(x, y).map(f64::sqrt)).collect::<Result<Vec<f64>>>())
        .into_iter()
        .collect()
}

/// Minimum-matching distance `max(dbar(A, B), dbar(B, A))` where
/// `dbar(A, B) = max_i min_j W_2(A_i, B_j)`.
pub fn min_matching(a: &[DiscreteMeasure], b: &[DiscreteMeasure]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("measure collection"));
    }
    let d = pairwise_w2(a, b)?;
    let ab = d.iter().map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let ba = (0..b.len())
        .map(|j| d.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(ab.max(ba))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthDistance {
    /// `(1/m) sum_j W_2(G_hat_j, G_j)`.
    pub local: f64,
    /// Minimum-matching distance between the global collections.
    pub global: f64,
    pub total: f64,
}

pub fn truth_distance(
    locals: &[DiscreteMeasure],
    globals: &[DiscreteMeasure],
    truth: &SyntheticTruth,
) -> Result<TruthDistance> {
    if locals.len() != truth.locals.len() {
        return Err(Error::InvalidParameter(format!(
            "estimate has {} groups, truth has {}",
            locals.len(),
            truth.locals.len()
        )));
    }
    let per_group = par::map(locals, |j, g| w2_sq(g, &truth.locals[j]).map(f64::sqrt));
    let mut local = 0.0;
    for d in per_group {
        local += d?;
    }
    local /= locals.len() as f64;
    let global = min_matching(globals, &truth.globals)?;
    Ok(TruthDistance {
        local,
        global,
        total: local + global,
    })
}

/// Wasserstein distance to truth of a fitted model.
pub fn w_to_truth(estimate: &MultilevelResult, truth: &SyntheticTruth) -> Result<f64> {
    Ok(truth_distance(&estimate.state.locals, &estimate.state.globals, truth)?.total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementKind {
    Nmi,
    Ari,
    Ami,
}

struct Contingency {
    n: usize,
    table: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mapped = labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
    (mapped, ids.len())
}

fn contingency(pred: &[usize], truth: &[usize]) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            atoms: pred.len(),
            weights: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let (p, np) = compact(pred);
    let (t, nt) = compact(truth);
    let mut table = vec![vec![0usize; nt]; np];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..nt).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        n: pred.len(),
        table,
        rows,
        cols,
    })
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(c: &Contingency) -> f64 {
    let nf = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / nf * (nf * nij / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

// Expected mutual information under the hypergeometric model.
fn expected_mutual_information(c: &Contingency) -> f64 {
    let n = c.n;
    let nf = n as f64;
    let mut lf = vec![0.0f64; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    let mut emi = 0.0;
    for &a in &c.rows {
        for &b in &c.cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            for nij in lo..=hi {
                let x = nij as f64;
                let term = x / nf * (nf * x / (a as f64 * b as f64)).ln();
                let log_p = lf[a] + lf[b] + lf[n - a] + lf[n - b]
                    - lf[n]
                    - lf[nij]
                    - lf[a - nij]
                    - lf[b - nij]
                    - lf[n + nij - a - b];
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

fn adjusted_rand(c: &Contingency) -> f64 {
    let index: f64 = c.table.iter().flatten().map(|&x| comb2(x)).sum();
    let a: f64 = c.rows.iter().map(|&x| comb2(x)).sum();
    let b: f64 = c.cols.iter().map(|&x| comb2(x)).sum();
    let expected = a * b / comb2(c.n).max(1.0);
    let max_index = 0.5 * (a + b);
    if max_index == expected {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

/// Agreement between two labelings; invariant to relabeling.
pub fn cluster_agreement(pred: &[usize], truth: &[usize], kind: AgreementKind) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let (hp, ht) = (entropy(&c.rows, c.n), entropy(&c.cols, c.n));
    Ok(match kind {
        AgreementKind::Ari => adjusted_rand(&c),
        AgreementKind::Nmi => {
            if c.rows.len() == c.cols.len() && (c.rows.len() == 1 || c.rows.len() == c.n) {
                return Ok(1.0);
            }
            let norm = 0.5 * (hp + ht);
            if norm <= 0.0 {
                1.0
            } else {
                (mutual_information(&c) / norm).clamp(0.0, 1.0)
            }
        }
        AgreementKind::Ami => {
            if c.rows.len() == c.cols.len() && (c.rows.len() == 1 || c.rows.len() == c.n) {
                return Ok(1.0);
            }
            let mi = mutual_information(&c);
            let emi = expected_mutual_information(&c);
            let denom = hp.max(ht) - emi;
            if denom.abs() < f64::EPSILON {
                1.0
            } else {
                (mi - emi) / denom
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_measure, Point};

    fn dirac(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(Point(vec![x]))
    }

    #[test]
    fn min_matching_cases() {
        let a = vec![dirac(0.0)];
        let b = vec![dirac(0.0), dirac(3.0)];
        assert_eq!(min_matching(&a, &a).unwrap(), 0.0);
        assert_eq!(min_matching(&a, &b).unwrap(), 3.0);
        assert_eq!(min_matching(&b, &a).unwrap(), 3.0);
    }

    fn truth_of(locals: Vec<DiscreteMeasure>, globals: Vec<DiscreteMeasure>) -> SyntheticTruth {
        SyntheticTruth {
            preset: crate::synthdata::Preset::Nc,
            params: Default::default(),
            labels: vec![0; locals.len()],
            locals,
            globals,
            shared_support: None,
            shared_labels: None,
        }
    }

    #[test]
    fn truth_distance_identity_perturbation_and_scaling() {
        let g1 = make_measure(vec![Point(vec![0.0, 0.0]), Point(vec![2.0, 1.0])], vec![0.25, 0.75]).unwrap();
        let g2 = make_measure(vec![Point(vec![5.0, 5.0])], vec![1.0]).unwrap();
        let truth = truth_of(vec![g1.clone(), g2.clone()], vec![g1.clone()]);
        let d = truth_distance(&truth.locals, &truth.globals, &truth).unwrap();
        assert_eq!(d.total, 0.0);

        // moving the 0.25 atom of G_1 by v shifts W_2 by sqrt(0.25)*|v|
        // when the atoms stay far apart
        let v: [f64; 2] = [0.3, -0.4];
        let moved = make_measure(vec![Point(vec![0.3, -0.4]), Point(vec![2.0, 1.0])], vec![0.25, 0.75]).unwrap();
        let d = truth_distance(&[moved, g2.clone()], &truth.globals, &truth).unwrap();
        let norm: f64 = (v[0] * v[0] + v[1] * v[1]).sqrt();
        assert!((d.local - 0.5 * norm / 2.0).abs() < 1e-12);

        let double = |m: &DiscreteMeasure| m.map_coords(|x| 2.0 * x);
        let shifted = vec![dirac2(1.0), g2.clone()];
        let base = truth_distance(&shifted, &truth.globals, &truth).unwrap().total;
        let truth2 = truth_of(truth.locals.iter().map(double).collect(), truth.globals.iter().map(double).collect());
        let scaled = truth_distance(&shifted.iter().map(double).collect::<Vec<_>>(), &truth2.globals, &truth2).unwrap().total;
        assert!((scaled - 2.0 * base).abs() < 1e-12);
    }

    fn dirac2(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(Point(vec![x, x]))
    }

    #[test]
    fn agreement_identity_and_relabeling() {
        let t = [0, 0, 1, 1, 2, 2, 2];
        let p = [2, 2, 0, 0, 1, 1, 1];
        for kind in [AgreementKind::Nmi, AgreementKind::Ari, AgreementKind::Ami] {
            assert!((cluster_agreement(&t, &t, kind).unwrap() - 1.0).abs() < 1e-12);
            assert!((cluster_agreement(&p, &t, kind).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(cluster_agreement(&[0, 1], &[0], AgreementKind::Ari).is_err());
    }

    #[test]
    fn ari_matches_pair_counting() {
        let truth = [0, 0, 0, 1, 1, 1];
        let pred = [0, 0, 1, 1, 2, 2];
        // oracle: enumerate all 15 pairs
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..6 {
            for j in i + 1..6 {
                match (truth[i] == truth[j], pred[i] == pred[j]) {
                    (true, true) => a += 1.0,
                    (true, false) => b += 1.0,
                    (false, true) => c += 1.0,
                    (false, false) => d += 1.0,
                }
            }
        }
        let n = a + b + c + d;
        let expected = (a + b) * (a + c) / n;
        let want = (a - expected) / (0.5 * ((a + b) + (a + c)) - expected);
        let got = cluster_agreement(&pred, &truth, AgreementKind::Ari).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn nmi_and_ami_reference_values() {
        let truth = [0, 0, 0, 1, 1, 1];
        let pred = [0, 0, 1, 1, 1, 1];
        let c = contingency(&pred, &truth).unwrap();
        let mi: f64 = {
            // table [[2,0],[1,3]], rows (2,4), cols (3,3)
            let t: [[f64; 2]; 2] = [[2.0, 0.0], [1.0, 3.0]];
            let r = [2.0, 4.0];
            let cc = [3.0, 3.0];
            let mut s = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    if t[i][j] > 0.0 {
                        s += t[i][j] / 6.0 * (6.0 * t[i][j] / (r[i] * cc[j])).ln();
                    }
                }
            }
            s
        };
        assert!((mutual_information(&c) - mi).abs() < 1e-15);
        let hp = -(2.0f64 / 6.0 * (2.0f64 / 6.0).ln() + 4.0 / 6.0 * (4.0f64 / 6.0).ln());
        let ht = 2f64.ln();
        let nmi = cluster_agreement(&pred, &truth, AgreementKind::Nmi).unwrap();
        assert!((nmi - mi / (0.5 * (hp + ht))).abs() < 1e-12);
        let ami = cluster_agreement(&pred, &truth, AgreementKind::Ami).unwrap();
        assert!(ami < nmi && ami > -1.0);
    }

    #[test]
    fn emi_matches_permutation_average() {
        // brute force: average MI over all distinct relabelings of pred
        let truth = [0, 0, 1, 1, 1];
        let pred = [0, 1, 1, 2, 2];
        let c = contingency(&pred, &truth).unwrap();
        let emi = expected_mutual_information(&c);
        let mut total = 0.0;
        let mut count = 0.0;
        let mut perm: Vec<usize> = (0..5).collect();
        permute(&mut perm, 0, &mut |p| {
            let shuffled: Vec<usize> = p.iter().map(|&i| pred[i]).collect();
            total += mutual_information(&contingency(&shuffled, &truth).unwrap());
            count += 1.0;
        });
        assert!((emi - total / count).abs() < 1e-12, "{emi} vs {}", total / count);
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }
}
