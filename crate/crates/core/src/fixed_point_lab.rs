//! Nonexpansive maps as data, and iterations that probe them.
//!
//! The centerpiece is the baker's-transform isometry on
//! `K = {f : 0 ≤ f ≤ 1, ∫f = 1/2}` over `[0,1]`:
//!
//! ```text
//! (Tf)(t) = min(2 f(2t), 1)          t ∈ [0, 1/2]
//! (Tf)(t) = max(2 f(2t − 1) − 1, 0)  t ∈ (1/2, 1]
//! ```
//!
//! On a dyadic grid of storage depth `M`, a function constant on blocks of
//! depth `m < M` is mapped exactly to one constant on blocks of depth `m+1`.
//! At `m = M` the exact image no longer fits the grid; the map then either
//! reports [`Error::ResolutionExhausted`] or, under
//! [`ExhaustionPolicy::Project`], returns the cell averages of the exact image
//! (still nonexpansive and still inside `K`).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::convex_geometry::{normal_structure_gap, ChebyshevOptions, ConvexBody, NormalStructure};
use crate::error::{Error, Result};
use crate::grid_space::{FunctionFamily, GridFunction, Partition};
use crate::rng;

use rand::Rng;
use std::sync::Arc;

/// Tolerance for membership in `K`.
pub const K_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionPolicy {
    #[default]
    Error,
    Project,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapKind {
    Identity,
    Alspach {
        #[serde(default)]
        on_exhaustion: ExhaustionPolicy,
    },
    Constant {
        value: GridFunction,
    },
    ConvexCombination {
        terms: Vec<WeightedMap>,
    },
    /// Applied in list order: `maps[0]` first.
    Composition {
        maps: Vec<MapSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedMap {
    pub weight: f64,
    pub map: MapSpec,
}

/// A map tree with a label for its intended domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    #[serde(flatten)]
    pub kind: MapKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub domain_label: String,
}

impl From<MapKind> for MapSpec {
    fn from(kind: MapKind) -> Self {
        MapSpec {
            kind,
            domain_label: String::new(),
        }
    }
}

impl MapSpec {
    pub fn identity() -> Self {
        MapKind::Identity.into()
    }

    pub fn alspach() -> Self {
        MapKind::Alspach {
            on_exhaustion: ExhaustionPolicy::Error,
        }
        .into()
    }

    pub fn alspach_projected() -> Self {
        MapKind::Alspach {
            on_exhaustion: ExhaustionPolicy::Project,
        }
        .into()
    }

    pub fn constant(value: GridFunction) -> Self {
        MapKind::Constant { value }.into()
    }

    pub fn convex_combination(terms: Vec<(f64, MapSpec)>) -> Result<Self> {
        let spec: MapSpec = MapKind::ConvexCombination {
            terms: terms
                .into_iter()
                .map(|(weight, map)| WeightedMap { weight, map })
                .collect(),
        }
        .into();
        spec.validate()?;
        Ok(spec)
    }

    pub fn composition(maps: Vec<MapSpec>) -> Result<Self> {
        let spec: MapSpec = MapKind::Composition { maps }.into();
        spec.validate()?;
        Ok(spec)
    }

    /// Weights nonnegative summing to 1, compositions nonempty, recursively.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            MapKind::Identity | MapKind::Alspach { .. } | MapKind::Constant { .. } => Ok(()),
            MapKind::ConvexCombination { terms } => {
                if terms.is_empty() {
                    return Err(Error::param("terms", "convex combination needs a term"));
                }
                if terms.iter().any(|t| !(t.weight >= 0.0)) {
                    return Err(Error::param("weight", "weights must be nonnegative"));
                }
                let total: f64 = terms.iter().map(|t| t.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::param(
                        "weight",
                        format!("weights sum to {total}, not 1"),
                    ));
                }
                terms.iter().try_for_each(|t| t.map.validate())
            }
            MapKind::Composition { maps } => {
                if maps.is_empty() {
                    return Err(Error::param("maps", "composition needs a map"));
                }
                maps.iter().try_for_each(MapSpec::validate)
            }
        }
    }
}

/// Checks `0 ≤ f ≤ 1` and `∫f = 1/2` to [`K_TOLERANCE`].
pub fn check_in_example_set(f: &GridFunction) -> Result<()> {
    if let Some(v) = f
        .values()
        .iter()
        .find(|&&v| !(-K_TOLERANCE..=1.0 + K_TOLERANCE).contains(&v))
    {
        return Err(Error::DomainViolation(format!("value {v} outside [0, 1]")));
    }
    let integral = f.integral();
    if (integral - 0.5).abs() > K_TOLERANCE {
        return Err(Error::DomainViolation(format!(
            "integral {integral} differs from 1/2"
        )));
    }
    Ok(())
}

fn alspach_with(f: &GridFunction, policy: ExhaustionPolicy) -> Result<GridFunction> {
    let storage = f.partition().dyadic_depth().ok_or_else(|| {
        Error::DomainViolation("the baker's map needs the dyadic partition of [0,1]".into())
    })?;
    check_in_example_set(f)?;
    let depth = f
        .effective_resolution()
        .or_else(|| f.detect_dyadic_resolution())
        .unwrap_or(storage);
    if depth >= storage && policy == ExhaustionPolicy::Error {
        return Err(Error::ResolutionExhausted { depth });
    }
    let v = f.values();
    let n = v.len();
    if n == 1 {
        // single cell: the image of the constant 1/2 averages back to 1/2
        return Ok(f.clone());
    }
    let half = n / 2;
    let mut out = Vec::with_capacity(n);
    for j in 0..half {
        let (a, b) = (v[2 * j], v[2 * j + 1]);
        out.push(((2.0 * a).min(1.0) + (2.0 * b).min(1.0)) / 2.0);
    }
    for j in 0..half {
        let (a, b) = (v[2 * j], v[2 * j + 1]);
        out.push(((2.0 * a - 1.0).max(0.0) + (2.0 * b - 1.0).max(0.0)) / 2.0);
    }
    Ok(GridFunction::from_parts(
        f.partition().clone(),
        out,
        Some((depth + 1).min(storage)),
    ))
}

/// The exact baker's-transform isometry; fails once the effective depth
/// reaches the storage depth.
pub fn alspach_map(f: &GridFunction) -> Result<GridFunction> {
    alspach_with(f, ExhaustionPolicy::Error)
}

/// Grid-averaged baker's map: exact while representable, cell averages of
/// the exact image afterwards.
pub fn alspach_map_projected(f: &GridFunction) -> Result<GridFunction> {
    alspach_with(f, ExhaustionPolicy::Project)
}

pub fn apply_map(spec: &MapSpec, f: &GridFunction) -> Result<GridFunction> {
    match &spec.kind {
        MapKind::Identity => Ok(f.clone()),
        MapKind::Alspach { on_exhaustion } => alspach_with(f, *on_exhaustion),
        MapKind::Constant { value } => {
            f.check_partition(value)?;
            Ok(value.clone())
        }
        MapKind::ConvexCombination { terms } => {
            let mut acc: Option<GridFunction> = None;
            for t in terms {
                let image = apply_map(&t.map, f)?.scale(t.weight);
                acc = Some(match acc {
                    None => image,
                    Some(a) => a.add(&image)?,
                });
            }
            acc.ok_or_else(|| Error::param("terms", "convex combination needs a term"))
        }
        MapKind::Composition { maps } => {
            let mut x = f.clone();
            for m in maps {
                x = apply_map(m, &x)?;
            }
            Ok(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `‖x_n − T x_n‖₁`
    pub residual: f64,
    /// `‖x_{n+1} − x_n‖₁`
    pub step_norm: f64,
    /// `‖x_n − x_0‖₁`
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceStatus {
    Converged { tol: f64 },
    Maxed,
    ResolutionExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub status: TraceStatus,
    #[serde(skip)]
    pub last: GridFunction,
}

impl IterationTrace {
    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    /// `n,residual,step_norm,drift` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,residual,step_norm,drift\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.n, r.residual, r.step_norm, r.drift);
        }
        out
    }
}

pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 100_000;

/// Krasnoselskii–Mann iteration `x_{n+1} = (1−λ) x_n + λ T x_n`.
///
/// `λ = 1` is plain Picard iteration. Stops when the residual drops below
/// `tol`, after `max_steps` records, or when an exact baker's map leaf runs
/// out of resolution.
pub fn km_iterate(
    spec: &MapSpec,
    x0: &GridFunction,
    lambda: f64,
    max_steps: usize,
    tol: f64,
) -> Result<IterationTrace> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::param(
            "lambda",
            format!("must lie in (0, 1], got {lambda}"),
        ));
    }
    if !(tol >= 0.0) {
        return Err(Error::param(
            "tol",
            format!("must be nonnegative, got {tol}"),
        ));
    }
    spec.validate()?;
    let mut x = x0.clone();
    let mut records = Vec::new();
    let mut status = TraceStatus::Maxed;
    for n in 0..max_steps {
        let tx = match apply_map(spec, &x) {
            Ok(tx) => tx,
            Err(Error::ResolutionExhausted { .. }) => {
                status = TraceStatus::ResolutionExhausted;
                break;
            }
            Err(e) => return Err(e),
        };
        let residual = x.l1_distance(&tx)?;
        let next = if lambda == 1.0 {
            tx
        } else {
            x.lerp(&tx, lambda)?
        };
        records.push(IterationRecord {
            n,
            residual,
            step_norm: next.l1_distance(&x)?,
            drift: x.l1_distance(x0)?,
        });
        if residual < tol {
            status = TraceStatus::Converged { tol };
            break;
        }
        x = next;
    }
    Ok(IterationTrace {
        records,
        status,
        last: x,
    })
}

/// Members of `K` on the dyadic grid with `resolution` cells.
///
/// Each member draws cell values uniformly from `[0,1]` on its own random
/// stream, then shifts them by a constant found by bisection and clips to
/// `[0,1]` until the integral is `1/2` to within `1e-12`. This generates
/// points of `K`; it is not a metric projection.
pub fn sample_example_set(seed: u64, count: usize, resolution: usize) -> Result<FunctionFamily> {
    if !resolution.is_power_of_two() {
        return Err(Error::param(
            "resolution",
            format!("{resolution} is not a power of two"),
        ));
    }
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    let depth = resolution.trailing_zeros();
    let partition = Arc::new(Partition::dyadic(depth));
    let mut members = Vec::with_capacity(count);
    for i in 0..count {
        let mut r = rng::stream(seed, i as u64);
        let raw: Vec<f64> = (0..resolution).map(|_| r.random::<f64>()).collect();
        let mean_at =
            |c: f64| raw.iter().map(|u| (u + c).clamp(0.0, 1.0)).sum::<f64>() / resolution as f64;
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        let mut shift = 0.0;
        for _ in 0..200 {
            shift = 0.5 * (lo + hi);
            let m = mean_at(shift);
            if (m - 0.5).abs() <= 1e-13 {
                break;
            }
            if m < 0.5 {
                lo = shift;
            } else {
                hi = shift;
            }
        }
        let values = raw.iter().map(|u| (u + shift).clamp(0.0, 1.0)).collect();
        let f = GridFunction::from_parts(partition.clone(), values, Some(depth));
        check_in_example_set(&f)?;
        members.push(f);
    }
    FunctionFamily::new(format!("K(seed={seed}, n={resolution})"), members)
}

/// Where [`lipschitz_estimate`] draws its pairs from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleDomain {
    /// [`sample_example_set`] at `resolution` cells, then refined by
    /// `headroom` dyadic levels so exact baker's maps can act.
    ExampleSet { resolution: usize, headroom: u32 },
}

/// `max ‖Tx − Ty‖₁ / ‖x − y‖₁` over `pair_count` sampled pairs.
pub fn lipschitz_estimate(
    spec: &MapSpec,
    seed: u64,
    pair_count: usize,
    domain: SampleDomain,
) -> Result<f64> {
    if pair_count == 0 {
        return Err(Error::param("pair_count", "must be at least 1"));
    }
    let SampleDomain::ExampleSet {
        resolution,
        headroom,
    } = domain;
    let family = sample_example_set(seed, 2 * pair_count, resolution)?;
    let points: Vec<GridFunction> = family
        .members()
        .iter()
        .map(|f| f.refine_dyadic(headroom))
        .collect::<Result<_>>()?;
    let mut best: Option<f64> = None;
    for pair in points.chunks(2) {
        let d = pair[0].l1_distance(&pair[1])?;
        if d == 0.0 {
            continue;
        }
        let td = apply_map(spec, &pair[0])?.l1_distance(&apply_map(spec, &pair[1])?)?;
        let ratio = td / d;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.ok_or(Error::NoValidPair)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrbitOutcome {
    Measured(NormalStructure),
    ResolutionExhausted { representable_steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitScanRow {
    pub resolution: usize,
    #[serde(flatten)]
    pub outcome: OrbitOutcome,
}

/// The orbit `{x0, T x0, …, T^steps x0}` of the baker's map under `policy`.
pub fn alspach_orbit(
    x0: &GridFunction,
    steps: usize,
    policy: ExhaustionPolicy,
) -> Result<Vec<GridFunction>> {
    let spec: MapSpec = MapKind::Alspach {
        on_exhaustion: policy,
    }
    .into();
    let mut orbit = vec![x0.clone()];
    for _ in 0..steps {
        let next = apply_map(&spec, orbit.last().expect("nonempty"))?;
        orbit.push(next);
    }
    Ok(orbit)
}

/// Diameter, Chebyshev radius and their gap for the hull of the baker's-map
/// orbit of `x0`, at each dyadic `resolution` (cell count).
pub fn orbit_hull_scan(
    x0: &GridFunction,
    steps: usize,
    resolutions: &[usize],
    policy: ExhaustionPolicy,
    tol: f64,
    opts: ChebyshevOptions,
) -> Result<Vec<OrbitScanRow>> {
    if steps == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    if resolutions.iter().any(|r| !r.is_power_of_two())
        || resolutions.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::param(
            "resolutions",
            "must be increasing powers of two",
        ));
    }
    let base = x0
        .partition()
        .dyadic_depth()
        .ok_or_else(|| Error::param("x0", "must live on a dyadic grid"))?;
    let mut rows = Vec::with_capacity(resolutions.len());
    for &resolution in resolutions {
        let depth = resolution.trailing_zeros();
        if depth < base {
            return Err(Error::param(
                "resolutions",
                format!("{resolution} cells is coarser than x0"),
            ));
        }
        let start = x0.refine_dyadic(depth - base)?;
        let outcome = match alspach_orbit(&start, steps, policy) {
            Ok(orbit) => {
                let body = ConvexBody::new(format!("orbit@{resolution}"), orbit)?;
                OrbitOutcome::Measured(normal_structure_gap(&body, tol, opts)?)
            }
            Err(Error::ResolutionExhausted { depth: d }) => {
                let start_depth = start.effective_resolution().unwrap_or(depth);
                OrbitOutcome::ResolutionExhausted {
                    representable_steps: (d - start_depth) as usize,
                }
            }
            Err(e) => return Err(e),
        };
        rows.push(OrbitScanRow {
            resolution,
            outcome,
        });
    }
    Ok(rows)
}

/// `resolution,status,diam,rad,gap,ratio`; empty numeric fields for
/// exhausted rows.
pub fn orbit_scan_csv(rows: &[OrbitScanRow]) -> String {
    let mut out = String::from("resolution,status,diam,rad,gap,ratio\n");
    for row in rows {
        let _ = match &row.outcome {
            OrbitOutcome::Measured(ns) => writeln!(
                out,
                "{},MEASURED,{},{},{},{}",
                row.resolution, ns.diam, ns.rad, ns.gap, ns.ratio
            ),
            OrbitOutcome::ResolutionExhausted { .. } => {
                writeln!(out, "{},RESOLUTION_EXHAUSTED,,,,", row.resolution)
            }
        };
    }
    out
}
