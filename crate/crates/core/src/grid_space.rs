//! Piecewise-constant model of `L¹(μ)` over a σ-finite space.
//!
//! A [`Partition`] is an ordered list of finite-measure windows, each split
//! into cells of positive measure. A [`GridFunction`] assigns one real value
//! per cell. Everything here is exact on that class: no interpolation, no
//! quadrature.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered finite-measure windows, each subdivided into cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    windows: Vec<Vec<f64>>,
    measures: Vec<f64>,
    offsets: Vec<usize>,
}

impl Partition {
    pub fn new(windows: Vec<Vec<f64>>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidPartition("no windows".into()));
        }
        let mut offsets = Vec::with_capacity(windows.len() + 1);
        let mut measures = Vec::new();
        offsets.push(0);
        for (w, cells) in windows.iter().enumerate() {
            if cells.is_empty() {
                return Err(Error::InvalidPartition(format!("window {w} has no cells")));
            }
            for (c, &m) in cells.iter().enumerate() {
                if !(m.is_finite() && m > 0.0) {
                    return Err(Error::InvalidPartition(format!(
                        "cell {c} of window {w} has measure {m}"
                    )));
                }
            }
            measures.extend_from_slice(cells);
            offsets.push(measures.len());
        }
        Ok(Partition {
            windows,
            measures,
            offsets,
        })
    }

    /// `[0,1]` with Lebesgue measure split into `2^depth` equal cells.
    pub fn dyadic(depth: u32) -> Self {
        let n = 1usize << depth;
        let h = 1.0 / n as f64;
        Partition::new(vec![vec![h; n]]).expect("dyadic partition is valid")
    }

    /// A single window of total measure `measure` split into `cells` equal cells.
    pub fn uniform(cells: usize, measure: f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidPartition("no cells".into()));
        }
        Partition::new(vec![vec![measure / cells as f64; cells]])
    }

    pub fn windows(&self) -> &[Vec<f64>] {
        &self.windows
    }

    pub fn window_count(&self) -> usize {
        self.windows.len()
    }

    pub fn cell_count(&self) -> usize {
        self.measures.len()
    }

    /// Cell measures, window-major.
    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn window_range(&self, window: usize) -> Result<Range<usize>> {
        if window >= self.windows.len() {
            return Err(Error::InvalidWindow {
                index: window,
                count: self.windows.len(),
            });
        }
        Ok(self.offsets[window]..self.offsets[window + 1])
    }

    pub fn window_measure(&self, window: usize) -> Result<f64> {
        Ok(self.measures[self.window_range(window)?].iter().sum())
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// `Some(k)` when this is the dyadic partition of `[0,1]` at depth `k`.
    pub fn dyadic_depth(&self) -> Option<u32> {
        if self.windows.len() != 1 {
            return None;
        }
        let n = self.measures.len();
        if !n.is_power_of_two() {
            return None;
        }
        let h = 1.0 / n as f64;
        self.measures
            .iter()
            .all(|&m| m == h)
            .then(|| n.trailing_zeros())
    }
}

/// A simple function: one value per cell of a shared [`Partition`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "GridFunctionDoc", try_from = "GridFunctionDoc")]
pub struct GridFunction {
    partition: Arc<Partition>,
    values: Vec<f64>,
    effective_resolution: Option<u32>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.shares_partition(other)
            && self.values == other.values
            && self.effective_resolution == other.effective_resolution
    }
}

impl GridFunction {
    pub fn new(partition: Arc<Partition>, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.cell_count() {
            return Err(Error::LengthMismatch {
                expected: partition.cell_count(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("value {i} is not finite")));
        }
        Ok(GridFunction {
            partition,
            values,
            effective_resolution: None,
        })
    }

    pub fn constant(partition: Arc<Partition>, value: f64) -> Self {
        let n = partition.cell_count();
        GridFunction {
            partition,
            values: vec![value; n],
            effective_resolution: None,
        }
    }

    pub fn zero(partition: Arc<Partition>) -> Self {
        GridFunction::constant(partition, 0.0)
    }

    /// Function on the dyadic grid of depth `log2(values.len())`, tagged
    /// with the coarsest depth on whose blocks it is constant.
    pub fn dyadic(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_power_of_two() {
            return Err(Error::param(
                "values",
                format!("length {} is not a power of two", values.len()),
            ));
        }
        let depth = values.len().trailing_zeros();
        let mut f = GridFunction::new(Arc::new(Partition::dyadic(depth)), values)?;
        f.effective_resolution = f.detect_dyadic_resolution();
        Ok(f)
    }

    /// Tag with a dyadic effective resolution after checking block constancy.
    pub fn with_effective_resolution(mut self, depth: u32) -> Result<Self> {
        let storage = self.partition.dyadic_depth().ok_or_else(|| {
            Error::param("effective_resolution", "partition is not dyadic on [0,1]")
        })?;
        if depth > storage {
            return Err(Error::param(
                "effective_resolution",
                format!("depth {depth} exceeds storage depth {storage}"),
            ));
        }
        let block = 1usize << (storage - depth);
        for chunk in self.values.chunks(block) {
            if chunk.iter().any(|&v| v != chunk[0]) {
                return Err(Error::param(
                    "effective_resolution",
                    format!("values are not constant on dyadic blocks of depth {depth}"),
                ));
            }
        }
        self.effective_resolution = Some(depth);
        Ok(self)
    }

    /// Coarsest dyadic depth on whose blocks the values are constant.
    pub fn detect_dyadic_resolution(&self) -> Option<u32> {
        let storage = self.partition.dyadic_depth()?;
        (0..=storage).find(|&depth| {
            let block = 1usize << (storage - depth);
            self.values
                .chunks(block)
                .all(|chunk| chunk.iter().all(|&v| v == chunk[0]))
        })
    }

    /// Copy onto the dyadic grid `extra` levels finer, keeping the effective depth.
    pub fn refine_dyadic(&self, extra: u32) -> Result<Self> {
        let storage = self
            .partition
            .dyadic_depth()
            .ok_or_else(|| Error::param("partition", "not dyadic on [0,1]"))?;
        let copies = 1usize << extra;
        let values = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, copies))
            .collect();
        let effective = self
            .effective_resolution
            .or_else(|| self.detect_dyadic_resolution())
            .unwrap_or(storage);
        Ok(GridFunction {
            partition: Arc::new(Partition::dyadic(storage + extra)),
            values,
            effective_resolution: Some(effective),
        })
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn effective_resolution(&self) -> Option<u32> {
        self.effective_resolution
    }

    pub(crate) fn from_parts(
        partition: Arc<Partition>,
        values: Vec<f64>,
        effective_resolution: Option<u32>,
    ) -> Self {
        debug_assert_eq!(values.len(), partition.cell_count());
        GridFunction {
            partition,
            values,
            effective_resolution,
        }
    }

    pub fn shares_partition(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.partition, &other.partition) || *self.partition == *other.partition
    }

    pub(crate) fn check_partition(&self, other: &GridFunction) -> Result<()> {
        if self.shares_partition(other) {
            Ok(())
        } else {
            Err(Error::PartitionMismatch)
        }
    }

    fn combine(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_partition(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        let effective = match (self.effective_resolution, other.effective_resolution) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(GridFunction::from_parts(
            self.partition.clone(),
            values,
            effective,
        ))
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    /// `(1 - t)·self + t·other`.
    pub fn lerp(&self, other: &GridFunction, t: f64) -> Result<Self> {
        self.combine(other, |a, b| (1.0 - t) * a + t * b)
    }

    pub fn scale(&self, a: f64) -> Self {
        GridFunction::from_parts(
            self.partition.clone(),
            self.values.iter().map(|v| a * v).collect(),
            self.effective_resolution,
        )
    }

    pub fn map_values(&self, op: impl Fn(f64) -> f64) -> Self {
        GridFunction::from_parts(
            self.partition.clone(),
            self.values.iter().map(|&v| op(v)).collect(),
            None,
        )
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.partition.measures())
            .map(|(v, m)| v * m)
            .sum()
    }

    /// `‖self − other‖₁` without allocating the difference.
    pub fn l1_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_partition(other)?;
        Ok(l1_distance_slices(
            &self.values,
            &other.values,
            self.partition.measures(),
        ))
    }
}

pub(crate) fn l1_distance_slices(a: &[f64], b: &[f64], measures: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(measures)
        .map(|((x, y), m)| (x - y).abs() * m)
        .sum()
}

/// On-disk form: `{"windows": [[m, ...], ...], "values": [...], "effective_resolution": k}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFunctionDoc {
    pub windows: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_resolution: Option<u32>,
}

impl From<GridFunction> for GridFunctionDoc {
    fn from(f: GridFunction) -> Self {
        GridFunctionDoc {
            windows: f.partition.windows().to_vec(),
            values: f.values,
            effective_resolution: f.effective_resolution,
        }
    }
}

impl TryFrom<GridFunctionDoc> for GridFunction {
    type Error = Error;

    fn try_from(doc: GridFunctionDoc) -> Result<Self> {
        let f = GridFunction::new(Arc::new(Partition::new(doc.windows)?), doc.values)?;
        match doc.effective_resolution {
            Some(depth) => f.with_effective_resolution(depth),
            None => Ok(f),
        }
    }
}

/// Finite indexed set of functions on one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionFamily {
    pub label: String,
    members: Vec<GridFunction>,
}

impl FunctionFamily {
    pub fn new(label: impl Into<String>, members: Vec<GridFunction>) -> Result<Self> {
        if let Some(first) = members.first() {
            for m in &members[1..] {
                first.check_partition(m)?;
            }
        }
        Ok(FunctionFamily {
            label: label.into(),
            members,
        })
    }

    pub fn members(&self) -> &[GridFunction] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn partition(&self) -> Option<&Arc<Partition>> {
        self.members.first().map(GridFunction::partition)
    }

    pub(crate) fn nonempty(&self) -> Result<&[GridFunction]> {
        if self.members.is_empty() {
            Err(Error::EmptyFamily)
        } else {
            Ok(&self.members)
        }
    }
}

pub fn l1_norm(f: &GridFunction) -> f64 {
    f.values
        .iter()
        .zip(f.partition.measures())
        .map(|(v, m)| v.abs() * m)
        .sum()
}

/// Ky Fan distance on one window: `inf{ε ≥ 0 : μ({x ∈ S : |f−g| > ε}) ≤ ε}`.
pub fn ky_fan_distance(f: &GridFunction, g: &GridFunction, window: usize) -> Result<f64> {
    f.check_partition(g)?;
    let range = f.partition.window_range(window)?;
    let measures = &f.partition.measures()[range.clone()];
    let mut diffs: Vec<(f64, f64)> = range
        .map(|i| (f.values[i] - g.values[i]).abs())
        .zip(measures.iter().copied())
        .filter(|&(d, _)| d > 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(0.0);
    }
    diffs.sort_by(|a, b| b.0.total_cmp(&a.0));

    // On [v_{j+1}, v_j) the superlevel measure is the mass of the first j
    // distinct levels; the smallest admissible ε there is max(v_{j+1}, mass).
    let mut best = diffs[0].0;
    let mut mass = 0.0;
    let mut i = 0;
    while i < diffs.len() {
        let level = diffs[i].0;
        while i < diffs.len() && diffs[i].0 == level {
            mass += diffs[i].1;
            i += 1;
        }
        let next = diffs.get(i).map_or(0.0, |d| d.0);
        let candidate = next.max(mass);
        if candidate < level {
            best = best.min(candidate);
        }
    }
    Ok(best)
}

/// `Σ_m 2^{-(m+1)} · min(1, ky_fan_distance(f, g, m))` over the windows.
pub fn local_measure_distance(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.check_partition(g)?;
    let mut total = 0.0;
    let mut weight = 0.5;
    for w in 0..f.partition.window_count() {
        total += weight * ky_fan_distance(f, g, w)?.min(1.0);
        weight *= 0.5;
    }
    Ok(total)
}

/// Clamp every value to `[-level, level]` keeping its sign.
pub fn truncate(f: &GridFunction, level: f64) -> Result<GridFunction> {
    if !(level > 0.0) {
        return Err(Error::param(
            "level",
            format!("must be positive, got {level}"),
        ));
    }
    let mut out = f.map_values(|v| v.signum() * v.abs().min(level));
    out.effective_resolution = f.effective_resolution;
    Ok(out)
}

/// `(|value|, cell measure)` pairs sorted by `|value|` descending (stable).
pub fn rearrange_decreasing(f: &GridFunction) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = f
        .values
        .iter()
        .map(|v| v.abs())
        .zip(f.partition.measures().iter().copied())
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Exceptional set selected for an Egorov-style uniform convergence statement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EgorovSet {
    /// Global cell indices removed from the window.
    pub cells: Vec<usize>,
    pub measure: f64,
    /// Largest tail defect `sup_n |f_n − limit|` over the remaining cells.
    pub defect: f64,
}

/// Greedy Egorov set on one window.
///
/// The per-cell defect is `max |f_n − limit|` over the tail `n ≥ len/2` of
/// the sequence. Cells are removed in decreasing defect order while the
/// removed measure stays strictly below `eps`.
pub fn egorov_bad_set(
    sequence: &[GridFunction],
    limit: &GridFunction,
    window: usize,
    eps: f64,
) -> Result<EgorovSet> {
    if !(eps > 0.0) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    if sequence.is_empty() {
        return Err(Error::param("sequence", "must be nonempty"));
    }
    for f in sequence {
        f.check_partition(limit)?;
    }
    let range = limit.partition.window_range(window)?;
    let measures = limit.partition.measures();
    let tail = &sequence[sequence.len() / 2..];

    let mut defects: Vec<(usize, f64)> = range
        .map(|i| {
            let d = tail
                .iter()
                .map(|f| (f.values[i] - limit.values[i]).abs())
                .fold(0.0, f64::max);
            (i, d)
        })
        .collect();
    defects.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut cells = Vec::new();
    let mut measure = 0.0;
    let mut rest = defects.as_slice();
    while let Some((&(cell, d), tail)) = rest.split_first() {
        if d == 0.0 || measure + measures[cell] >= eps {
            break;
        }
        measure += measures[cell];
        cells.push(cell);
        rest = tail;
    }
    let defect = rest.first().map_or(0.0, |&(_, d)| d);
    cells.sort_unstable();
    Ok(EgorovSet {
        cells,
        measure,
        defect,
    })
}

/// Indices of a subsequence whose members are pairwise closer than `tol`
/// in [`local_measure_distance`].
///
/// Cell by cell, window by window, the current index set is split into
/// value bins of width `tol` and the most populated bin is kept (lowest bin
/// on ties). Surviving members then differ by less than `tol` on every cell,
/// which bounds every Ky Fan term and hence the weighted sum.
pub fn extract_measure_cauchy_subsequence(
    sequence: &[GridFunction],
    tol: f64,
) -> Result<Vec<usize>> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let first = sequence
        .first()
        .ok_or_else(|| Error::param("sequence", "must be nonempty"))?;
    for f in &sequence[1..] {
        first.check_partition(f)?;
    }
    let partition = first.partition.clone();
    let mut selected: Vec<usize> = (0..sequence.len()).collect();
    for w in 0..partition.window_count() {
        for cell in partition.window_range(w)? {
            if selected.len() == 1 {
                return Ok(selected);
            }
            let floor = selected
                .iter()
                .map(|&i| sequence[i].values[cell])
                .fold(f64::INFINITY, f64::min);
            let mut bins: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for &i in &selected {
                let bin = ((sequence[i].values[cell] - floor) / tol).floor() as i64;
                bins.entry(bin).or_default().push(i);
            }
            // bins arrive in increasing order; ties keep the earlier (lower) bin
            selected = bins
                .into_values()
                .reduce(|best, next| match next.len().cmp(&best.len()) {
                    Ordering::Greater => next,
                    _ => best,
                })
                .expect("at least one bin");
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on(windows: Vec<Vec<f64>>, values: Vec<f64>) -> GridFunction {
        GridFunction::new(Arc::new(Partition::new(windows).unwrap()), values).unwrap()
    }

    #[test]
    fn partition_rejects_bad_cells() {
        assert!(Partition::new(vec![]).is_err());
        assert!(Partition::new(vec![vec![]]).is_err());
        assert!(Partition::new(vec![vec![0.5, 0.0]]).is_err());
        assert!(Partition::new(vec![vec![f64::INFINITY]]).is_err());
        let p = Partition::new(vec![vec![0.25, 0.75], vec![2.0]]).unwrap();
        assert_eq!(p.cell_count(), 3);
        assert_eq!(p.window_range(1).unwrap(), 2..3);
        assert_eq!(p.total_measure(), 3.0);
        assert!(p.window_range(2).is_err());
    }

    #[test]
    fn dyadic_depth_detection() {
        assert_eq!(Partition::dyadic(5).dyadic_depth(), Some(5));
        assert_eq!(Partition::uniform(4, 2.0).unwrap().dyadic_depth(), None);
        let f = GridFunction::dyadic(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.effective_resolution(), Some(1));
        assert!(f.clone().with_effective_resolution(0).is_err());
        let g = f.refine_dyadic(2).unwrap();
        assert_eq!(g.values().len(), 16);
        assert_eq!(g.effective_resolution(), Some(1));
    }

    #[test]
    fn l1_norm_examples() {
        let ones = GridFunction::constant(Arc::new(Partition::dyadic(3)), 1.0);
        assert_eq!(l1_norm(&ones), 1.0);
        let half = GridFunction::dyadic(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(l1_norm(&half), 0.5);
        let f = on(vec![vec![0.25, 0.75]], vec![2.0, -1.0]);
        // oracle: 2·0.25 + 1·0.75
        assert!((l1_norm(&f) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn ky_fan_examples() {
        let p = Arc::new(Partition::uniform(10, 1.0).unwrap());
        let f = GridFunction::new(p.clone(), (0..10).map(|i| i as f64 * 0.1).collect()).unwrap();
        assert_eq!(ky_fan_distance(&f, &f, 0).unwrap(), 0.0);
        assert!(ky_fan_distance(&f, &f, 1).is_err());

        // |f − g| = c on a set of measure m: two-case oracle min(c, m)
        for &(c, k) in &[(0.5, 3usize), (0.05, 7), (2.0, 10), (0.3, 3)] {
            let m = k as f64 * 0.1;
            let g = GridFunction::new(
                p.clone(),
                f.values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if i < k { v + c } else { *v })
                    .collect(),
            )
            .unwrap();
            let d = ky_fan_distance(&f, &g, 0).unwrap();
            assert!((d - f64::min(c, m)).abs() < 1e-12, "c={c} m={m} d={d}");
        }
    }

    #[test]
    fn local_measure_distance_sums_windows() {
        // single window: min(1, d)/2
        let f = on(vec![vec![1.0]], vec![0.0]);
        let g = on(vec![vec![1.0]], vec![0.4]);
        assert!((local_measure_distance(&f, &g).unwrap() - 0.2).abs() < 1e-15);

        // two windows with Ky Fan distances 0.2 and 0.6 → 0.2/2 + 0.6/4
        let w = vec![vec![1.0], vec![0.6, 0.4]];
        let f = on(w.clone(), vec![0.0, 0.0, 0.0]);
        let g = on(w, vec![0.2, 5.0, 0.0]);
        assert!((ky_fan_distance(&f, &g, 0).unwrap() - 0.2).abs() < 1e-15);
        assert!((ky_fan_distance(&f, &g, 1).unwrap() - 0.6).abs() < 1e-15);
        assert!((local_measure_distance(&f, &g).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn truncate_examples() {
        let f = on(vec![vec![0.5, 0.5]], vec![3.0, -4.0]);
        let t = truncate(&f, 2.0).unwrap();
        assert_eq!(t.values(), &[2.0, -2.0]);
        assert!((f.l1_distance(&t).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(truncate(&f, 4.0).unwrap(), f);
        let five = on(vec![vec![1.0]], vec![5.0]);
        assert_eq!(truncate(&five, 2.0).unwrap().values(), &[2.0]);
        assert!(truncate(&f, 0.0).is_err());
        assert!(truncate(&f, -1.0).is_err());
    }

    #[test]
    fn rearrangement_examples() {
        let f = on(vec![vec![0.3, 0.7]], vec![1.0, -2.0]);
        let r = rearrange_decreasing(&f);
        assert_eq!(r, vec![(2.0, 0.7), (1.0, 0.3)]);
        let norm: f64 = r.iter().map(|(v, m)| v * m).sum();
        assert!((norm - 1.7).abs() < 1e-15);
        let g = on(vec![vec![1.0; 3]], vec![1.0, 3.0, 2.0]);
        let vals: Vec<f64> = rearrange_decreasing(&g).iter().map(|p| p.0).collect();
        assert_eq!(vals, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn egorov_examples() {
        let p = Arc::new(Partition::uniform(10, 1.0).unwrap());
        let limit = GridFunction::zero(p.clone());
        let shrinking: Vec<GridFunction> = (0..6)
            .map(|n| {
                GridFunction::constant(p.clone(), if n < 3 { 1.0 / (n + 1) as f64 } else { 0.0 })
            })
            .collect();
        let e = egorov_bad_set(&shrinking, &limit, 0, 0.2).unwrap();
        assert!(e.cells.is_empty());
        assert_eq!(e.defect, 0.0);

        let mut bump = vec![0.0; 10];
        bump[4] = 1.0;
        let bumped = GridFunction::new(p.clone(), bump).unwrap();
        let seq = vec![bumped.clone(); 4];
        let e = egorov_bad_set(&seq, &limit, 0, 0.2).unwrap();
        assert_eq!(e.cells, vec![4]);
        assert_eq!(e.defect, 0.0);

        let e = egorov_bad_set(&seq, &limit, 0, 0.05).unwrap();
        assert!(e.cells.is_empty());
        assert_eq!(e.defect, 1.0);

        assert!(egorov_bad_set(&seq, &limit, 0, 0.0).is_err());
        assert!(egorov_bad_set(&[], &limit, 0, 0.1).is_err());
    }

    #[test]
    fn cauchy_extraction_examples() {
        let f = GridFunction::dyadic(vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let g = GridFunction::dyadic(vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            extract_measure_cauchy_subsequence(&vec![f.clone(); 5], 0.1).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
        let alternating: Vec<GridFunction> = (0..10)
            .map(|i| if i % 2 == 0 { f.clone() } else { g.clone() })
            .collect();
        assert!(local_measure_distance(&f, &g).unwrap() > 0.1);
        let picked = extract_measure_cauchy_subsequence(&alternating, 0.1).unwrap();
        assert_eq!(picked, vec![0, 2, 4, 6, 8]);
        assert!(extract_measure_cauchy_subsequence(&alternating, 0.0).is_err());
        assert!(extract_measure_cauchy_subsequence(&[], 0.1).is_err());
    }

    #[test]
    fn doc_round_trip_keeps_resolution() {
        let f = GridFunction::dyadic(vec![0.5, 0.5, 0.25, 0.25]).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.contains("\"effective_resolution\":1"));
        let back: GridFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"windows": [[0.5, 0.5]], "values": [1.0]}"#;
        assert!(serde_json::from_str::<GridFunction>(bad).is_err());
    }
}
