//! Points, finitely supported probability measures and grouped data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass accepted by [`make_measure`].
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

const SUM_EXACT_TOL: f64 = 1e-13;

/// Default merge radius for [`DiscreteMeasure::dedupe`].
pub const DEDUPE_TOL: f64 = 1e-9;

/// A location in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn sq_dist(&self, other: &Point) -> f64 {
        sq_dist(&self.0, &other.0)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sq_dist(other).sqrt()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean of a nonempty slice of points.
pub fn mean_point(points: &[Point]) -> Point {
    let dim = points[0].dim();
    let mut acc = vec![0.0; dim];
    for p in points {
        for (a, c) in acc.iter_mut().zip(&p.0) {
            *a += c;
        }
    }
    let n = points.len() as f64;
    Point(acc.into_iter().map(|a| a / n).collect())
}

/// A probability measure with finitely many atoms.
///
/// Atoms may repeat and may carry zero weight; [`DiscreteMeasure::support_size`]
/// counts only atoms with positive mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        make_measure(raw.atoms, raw.weights)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            atoms: m.atoms,
            weights: m.weights,
        }
    }
}

/// Validated constructor; renormalizes weights whose sum is within
/// [`WEIGHT_SUM_TOL`] of one.
pub fn make_measure(atoms: Vec<Point>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
    if atoms.is_empty() {
        return Err(Error::Empty("measure atoms"));
    }
    if atoms.len() != weights.len() {
        return Err(Error::LengthMismatch {
            atoms: atoms.len(),
            weights: weights.len(),
        });
    }
    let dim = atoms[0].dim();
    if dim == 0 {
        return Err(Error::Empty("point coordinates"));
    }
    for a in &atoms {
        if a.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.dim(),
            });
        }
        if a.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("atom coordinates"));
        }
    }
    for (index, &w) in weights.iter().enumerate() {
        if !w.is_finite() {
            return Err(Error::NonFinite("weights"));
        }
        if w < 0.0 {
            return Err(Error::NegativeWeight { index, value: w });
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightSum(total));
    }
    // sums already within rounding of one are kept so that saved measures
    // reload bit for bit
    let weights = if (total - 1.0).abs() <= SUM_EXACT_TOL {
        weights
    } else {
        weights.into_iter().map(|w| w / total).collect()
    };
    Ok(DiscreteMeasure { atoms, weights })
}

/// Uniform measure `1/n` on the given points, in input order.
pub fn empirical_measure(points: &[Point]) -> Result<DiscreteMeasure> {
    if points.is_empty() {
        return Err(Error::Empty("points"));
    }
    let w = 1.0 / points.len() as f64;
    make_measure(points.to_vec(), vec![w; points.len()])
}

impl DiscreteMeasure {
    /// Dirac mass at `p`.
    pub fn dirac(p: Point) -> Self {
        DiscreteMeasure {
            atoms: vec![p],
            weights: vec![1.0],
        }
    }

    /// Builds a measure from algorithm output: clamps tiny negative weights,
    /// rescales to unit mass. Callers guarantee matching lengths and a
    /// positive total.
    pub(crate) fn from_raw(atoms: Vec<Point>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(atoms.len(), weights.len());
        let mut weights: Vec<f64> = weights.into_iter().map(|w| w.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0);
        for w in &mut weights {
            *w /= total;
        }
        DiscreteMeasure { atoms, weights }
    }

    #[inline]
    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    /// Number of stored atoms, including zero-weight ones.
    #[inline]
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Number of atoms with positive weight.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn into_parts(self) -> (Vec<Point>, Vec<f64>) {
        (self.atoms, self.weights)
    }

    /// Copy without zero-weight atoms.
    pub fn pruned(&self) -> DiscreteMeasure {
        self.pruned_below(0.0)
    }

    /// Drops atoms whose weight is `<= threshold` and renormalizes. The
    /// heaviest atom is always kept.
    pub fn pruned_below(&self, threshold: f64) -> DiscreteMeasure {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > threshold).collect();
        let keep = if keep.is_empty() {
            let best = (0..self.len())
                .max_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            vec![best]
        } else {
            keep
        };
        DiscreteMeasure::from_raw(
            keep.iter().map(|&i| self.atoms[i].clone()).collect(),
            keep.iter().map(|&i| self.weights[i]).collect(),
        )
    }

    /// Weighted mean of the atoms.
    pub fn mean(&self) -> Point {
        let mut acc = vec![0.0; self.dim()];
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            for (s, c) in acc.iter_mut().zip(&a.0) {
                *s += w * c;
            }
        }
        Point(acc)
    }

    /// Merges atoms within Euclidean distance `tol` of an earlier kept atom,
    /// summing their weights. Zero-weight atoms are dropped.
    pub fn dedupe(&self, tol: f64) -> DiscreteMeasure {
        let tol2 = tol * tol;
        let mut atoms: Vec<Point> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            if w <= 0.0 {
                continue;
            }
            match atoms.iter().position(|b| b.sq_dist(a) <= tol2) {
                Some(i) => weights[i] += w,
                None => {
                    atoms.push(a.clone());
                    weights.push(w);
                }
            }
        }
        if atoms.is_empty() {
            return self.pruned();
        }
        DiscreteMeasure::from_raw(atoms, weights)
    }

    /// Applies `f` to every coordinate of every atom.
    pub fn map_coords(&self, f: impl Fn(f64) -> f64) -> DiscreteMeasure {
        DiscreteMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Point(a.0.iter().map(|&c| f(c)).collect()))
                .collect(),
            weights: self.weights.clone(),
        }
    }
}

/// `m` groups of observations sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDataset {
    groups: Vec<Vec<Point>>,
}

impl GroupedDataset {
    pub fn new(groups: Vec<Vec<Point>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Empty("dataset groups"));
        }
        if groups.iter().any(|g| g.is_empty()) {
            return Err(Error::Empty("dataset group"));
        }
        let dim = groups[0][0].dim();
        if dim == 0 {
            return Err(Error::Empty("point coordinates"));
        }
        for p in groups.iter().flatten() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if p.0.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("observations"));
            }
        }
        Ok(GroupedDataset { groups })
    }

    pub fn groups(&self) -> &[Vec<Point>] {
        &self.groups
    }

    pub fn group(&self, j: usize) -> &[Point] {
        &self.groups[j]
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.groups[0][0].dim()
    }

    pub fn total_points(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Empirical measure of group `j`.
    pub fn empirical(&self, j: usize) -> DiscreteMeasure {
        let g = &self.groups[j];
        let w = 1.0 / g.len() as f64;
        DiscreteMeasure {
            atoms: g.clone(),
            weights: vec![w; g.len()],
        }
    }

    pub fn empiricals(&self) -> Vec<DiscreteMeasure> {
        (0..self.num_groups()).map(|j| self.empirical(j)).collect()
    }

    /// All observations, group by group.
    pub fn pooled(&self) -> Vec<Point> {
        self.groups.iter().flatten().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point(c.to_vec())
    }

    #[test]
    fn single_atom_measure() {
        let m = make_measure(vec![p(&[0.0, 0.0])], vec![1.0]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn uniform_two_atoms() {
        let m = make_measure(vec![p(&[0.0]), p(&[1.0])], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_weight_sum() {
        let err = make_measure(vec![p(&[0.0]), p(&[1.0])], vec![0.3, 0.3]).unwrap_err();
        assert!(matches!(err, Error::WeightSum(s) if (s - 0.6).abs() < 1e-12));
    }

    #[test]
    fn rejects_negative_and_mismatched() {
        assert!(matches!(
            make_measure(vec![p(&[0.0]), p(&[1.0])], vec![1.5, -0.5]),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(
            make_measure(vec![p(&[0.0]), p(&[1.0, 2.0])], vec![0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            make_measure(vec![p(&[0.0])], vec![0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn renormalizes_near_unit_sum() {
        let m = make_measure(vec![p(&[0.0]), p(&[1.0])], vec![0.5, 0.5 + 5e-10]).unwrap();
        let s: f64 = m.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn duplicates_are_kept() {
        let m = make_measure(vec![p(&[1.0]), p(&[1.0])], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.len(), 2);
        let d = m.dedupe(DEDUPE_TOL);
        assert_eq!(d.len(), 1);
        assert_eq!(d.weights(), &[1.0]);
    }

    #[test]
    fn empirical_cases() {
        let m = empirical_measure(&[p(&[1.0, 1.0])]).unwrap();
        assert_eq!(m.weights(), &[1.0]);
        let m = empirical_measure(&[p(&[0.0]), p(&[2.0])]).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert_eq!(m.atoms()[1], p(&[2.0]));
        let pts = [p(&[0.3]), p(&[-1.0]), p(&[7.0]), p(&[0.3])];
        let m = empirical_measure(&pts).unwrap();
        let expected: Vec<f64> = pts.iter().map(|_| 1.0 / pts.len() as f64).collect();
        assert_eq!(m.weights(), expected.as_slice());
        assert_eq!(m.atoms(), &pts);
        assert!(empirical_measure(&[]).is_err());
    }

    #[test]
    fn json_shape() {
        let m = make_measure(vec![p(&[0.0, 1.0]), p(&[2.0, 3.0])], vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"atoms":[[0.0,1.0],[2.0,3.0]],"weights":[0.25,0.75]}"#);
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<DiscreteMeasure>(r#"{"atoms":[[0.0]],"weights":[0.4]}"#).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(GroupedDataset::new(vec![]).is_err());
        assert!(GroupedDataset::new(vec![vec![]]).is_err());
        assert!(GroupedDataset::new(vec![vec![p(&[0.0])], vec![p(&[0.0, 1.0])]]).is_err());
        let d = GroupedDataset::new(vec![vec![p(&[0.0]), p(&[2.0])]]).unwrap();
        assert_eq!(d.empirical(0).weights(), &[0.5, 0.5]);
    }
}
