//! Radius, diameter and Chebyshev centers of finitely generated convex
//! bodies in `L¹`, plus the convexity-in-measure probes.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_space::{l1_distance_slices, l1_norm, FunctionFamily, GridFunction};
use crate::integrability::family_difference;
use crate::rng;

/// The convex hull of a nonempty list of generators on one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    pub label: String,
    generators: Vec<GridFunction>,
}

impl ConvexBody {
    pub fn new(label: impl Into<String>, generators: Vec<GridFunction>) -> Result<Self> {
        let first = generators
            .first()
            .ok_or_else(|| Error::param("generators", "body needs at least one generator"))?;
        for g in &generators[1..] {
            first.check_partition(g)?;
        }
        Ok(ConvexBody {
            label: label.into(),
            generators,
        })
    }

    pub fn generators(&self) -> &[GridFunction] {
        &self.generators
    }

    pub fn has_duplicates(&self) -> bool {
        let g = &self.generators;
        (0..g.len()).any(|i| (i + 1..g.len()).any(|j| g[i].values() == g[j].values()))
    }
}

/// `∫(|a| + |b| − |a+b|) dμ`, nonnegative.
pub fn slack(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    a.check_partition(b)?;
    let direct = a
        .values()
        .iter()
        .zip(b.values())
        .zip(a.partition().measures())
        .map(|((x, y), m)| (x.abs() + y.abs() - (x + y).abs()) * m)
        .sum();
    Ok(direct)
}

/// The same quantity through the positive/negative parts:
/// `2 ∫(a⁺∧b⁻ + a⁻∧b⁺) dμ`.
pub fn slack_by_parts(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    a.check_partition(b)?;
    let parts: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .zip(a.partition().measures())
        .map(|((&x, &y), m)| {
            let cross = x.max(0.0).min((-y).max(0.0)) + (-x).max(0.0).min(y.max(0.0));
            cross * m
        })
        .sum();
    Ok(2.0 * parts)
}

/// Largest pairwise distance and the first pair attaining it.
pub fn diametral_pair(body: &ConvexBody) -> (usize, usize, f64) {
    let g = &body.generators;
    let mut best = (0, 0, 0.0);
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let d = g[i].l1_distance(&g[j]).expect("shared partition");
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    best
}

/// `diam(conv(G)) = max_{i,j} ‖g_i − g_j‖₁` (joint convexity of the distance).
pub fn diameter(body: &ConvexBody) -> f64 {
    diametral_pair(body).2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevOptions {
    pub max_iterations: usize,
    /// Evaluate the dual lower bound every this many iterations.
    pub dual_every: usize,
}

impl Default for ChebyshevOptions {
    fn default() -> Self {
        ChebyshevOptions {
            max_iterations: 20_000,
            dual_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterResult {
    /// `max_g ‖g − center‖₁`, an upper bound on the Chebyshev radius.
    pub radius: f64,
    pub center: GridFunction,
    pub iterations: usize,
    /// Certified lower bound on the radius.
    pub lower_bound: f64,
    /// `radius − lower_bound`.
    pub certified_gap: f64,
    /// `certified_gap ≤ tol` was reached.
    pub converged: bool,
    /// The descent stalled above `tol` and the center came from the exact
    /// linear program instead.
    pub exact: bool,
}

struct Normalized<'a> {
    points: Vec<Vec<f64>>,
    measures: &'a [f64],
}

impl Normalized<'_> {
    fn radius_at(&self, z: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (j, p) in self.points.iter().enumerate() {
            let d = l1_distance_slices(p, z, self.measures);
            if d > best.0 {
                best = (d, j);
            }
        }
        best
    }

    /// `Σ_i μ_i min_z Σ_j w_j |p_ji − z|` for weights `w` on the simplex; a
    /// lower bound on the radius for any such `w`.
    fn dual_bound(&self, weights: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return 0.0;
        }
        let mut column: Vec<(f64, f64)> = Vec::with_capacity(self.points.len());
        let mut bound = 0.0;
        for (i, &m) in self.measures.iter().enumerate() {
            column.clear();
            column.extend(
                self.points
                    .iter()
                    .zip(weights)
                    .map(|(p, &w)| (p[i], w / total)),
            );
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0.0;
            let median = column
                .iter()
                .find(|(_, w)| {
                    acc += w;
                    acc >= 0.5
                })
                .map_or(column[column.len() - 1].0, |c| c.0);
            let cost: f64 = column.iter().map(|(v, w)| w * (v - median).abs()).sum();
            bound += m * cost;
        }
        bound
    }
}

impl Normalized<'_> {
    /// `min r` subject to `Σ_i μ_i t_ji ≤ r` and `t_ji ≥ |p_ji − z_i|`.
    fn solve_exact(&self) -> Result<(f64, Vec<f64>)> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem};
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let r = lp.add_var(1.0, (0.0, f64::INFINITY));
        let z: Vec<_> = self
            .measures
            .iter()
            .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        for p in &self.points {
            let mut row = vec![(r, -1.0)];
            for ((&pi, &zi), &m) in p.iter().zip(&z).zip(self.measures) {
                let t = lp.add_var(0.0, (0.0, f64::INFINITY));
                lp.add_constraint([(t, 1.0), (zi, 1.0)], ComparisonOp::Ge, pi);
                lp.add_constraint([(t, 1.0), (zi, -1.0)], ComparisonOp::Ge, -pi);
                row.push((t, m));
            }
            lp.add_constraint(row, ComparisonOp::Le, 0.0);
        }
        let solution = lp
            .solve()
            .map_err(|e| Error::Solver(e.to_string()))?
            .into_solution()
            .map_err(|e| Error::Solver(format!("{:?}", e.termination_reason())))?;
        let center = z.iter().map(|&v| solution.var_value(v)).collect();
        Ok((solution.objective(), center))
    }
}

/// Chebyshev radius and a center of `conv(generators)` over all functions
/// on the partition.
///
/// Minimizes `r(z) = max_g ‖g − z‖₁` by subgradient descent with step sizes
/// `α₀ (k+1)^{-0.6}` (square-summable), keeping the best iterate. Work is done
/// in coordinates translated by the first generator and scaled by the
/// diameter. The lower bound is the larger of `diam/2` and the weighted-median
/// bound from the step-weighted frequencies of active generators.
///
/// Subgradient steps shrink only polynomially, so if the iteration budget
/// ends with the gap above `tol` the radius is finished by solving the
/// equivalent linear program, whose optimal value then serves as the lower
/// bound.
pub fn chebyshev(body: &ConvexBody, tol: f64, opts: ChebyshevOptions) -> Result<CenterResult> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let gens = body.generators();
    let origin = &gens[0];
    let (pi, pj, diam) = diametral_pair(body);
    if diam == 0.0 {
        return Ok(CenterResult {
            radius: 0.0,
            center: origin.clone(),
            iterations: 0,
            lower_bound: 0.0,
            certified_gap: 0.0,
            converged: true,
            exact: false,
        });
    }
    let measures = origin.partition().measures();
    let n = measures.len();
    let prob = Normalized {
        points: gens
            .iter()
            .map(|g| {
                g.values()
                    .iter()
                    .zip(origin.values())
                    .map(|(v, o)| (v - o) / diam)
                    .collect()
            })
            .collect(),
        measures,
    };
    let tol_n = tol / diam;

    let mut candidates: Vec<Vec<f64>> = prob.points.clone();
    candidates.push(
        (0..n)
            .map(|i| (prob.points[pi][i] + prob.points[pj][i]) / 2.0)
            .collect(),
    );
    candidates.push(
        (0..n)
            .map(|i| prob.points.iter().map(|p| p[i]).sum::<f64>() / prob.points.len() as f64)
            .collect(),
    );
    let (mut best_r, mut best_z) = candidates
        .into_iter()
        .map(|z| (prob.radius_at(&z).0, z))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty candidates");
    let mut lower = 0.5;

    let spread = (0..n)
        .map(|i| {
            let (lo, hi) = prob
                .points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[i]), hi.max(p[i]))
                });
            hi - lo
        })
        .fold(0.0, f64::max);
    let alpha0 = 0.25 * spread;

    let mut z = best_z.clone();
    let mut weights = vec![0.0; prob.points.len()];
    let mut iterations = 0;
    let mut converged = best_r - lower <= tol_n;
    while !converged && iterations < opts.max_iterations {
        let (r, active) = prob.radius_at(&z);
        if r < best_r {
            best_r = r;
            best_z.copy_from_slice(&z);
        }
        let alpha = alpha0 * ((iterations + 1) as f64).powf(-0.6);
        weights[active] += alpha;
        for (zi, pi) in z.iter_mut().zip(&prob.points[active]) {
            let s = if *zi > *pi {
                1.0
            } else if *zi < *pi {
                -1.0
            } else {
                0.0
            };
            *zi -= alpha * s;
        }
        iterations += 1;
        if iterations % opts.dual_every == 0 || iterations == opts.max_iterations {
            lower = lower.max(prob.dual_bound(&weights));
            converged = best_r - lower <= tol_n;
        }
    }

    let mut exact = false;
    if !converged {
        let (value, z_lp) = prob.solve_exact()?;
        let (r_lp, _) = prob.radius_at(&z_lp);
        if r_lp < best_r {
            best_r = r_lp;
            best_z = z_lp;
        }
        lower = lower.max(value.min(best_r));
        exact = true;
        converged = best_r - lower <= tol_n;
    }

    let center_values: Vec<f64> = best_z
        .iter()
        .zip(origin.values())
        .map(|(z, o)| o + diam * z)
        .collect();
    let center = GridFunction::new(origin.partition().clone(), center_values)?;
    let radius = gens
        .iter()
        .map(|g| g.l1_distance(&center).expect("shared partition"))
        .fold(0.0, f64::max);
    let lower_bound = (lower * diam).min(radius);
    Ok(CenterResult {
        radius,
        center,
        iterations,
        lower_bound,
        certified_gap: radius - lower_bound,
        converged,
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalStructure {
    pub diam: f64,
    pub rad: f64,
    pub gap: f64,
    pub ratio: f64,
    pub certified_gap: f64,
}

/// `diam − rad` and `rad/diam` for a body of positive diameter.
pub fn normal_structure_gap(
    body: &ConvexBody,
    tol: f64,
    opts: ChebyshevOptions,
) -> Result<NormalStructure> {
    let diam = diameter(body);
    if diam == 0.0 {
        return Err(Error::Degenerate);
    }
    let c = chebyshev(body, tol, opts)?;
    Ok(NormalStructure {
        diam,
        rad: c.radius,
        gap: diam - c.radius,
        ratio: c.radius / diam,
        certified_gap: c.certified_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusProbe {
    /// `min 1 − ‖(x+y)/2‖₁ / ((‖x‖₁+‖y‖₁)/2)` over qualifying sampled pairs.
    pub delta_hat: f64,
    /// Indices of the minimizing pair in the difference family.
    pub witness_indices: (usize, usize),
    pub witness_pair: (GridFunction, GridFunction),
    pub qualifying_pairs: usize,
    pub examined_pairs: usize,
    pub exhaustive: bool,
}

/// `(‖x−y‖₁/(‖x‖₁+‖y‖₁), 1 − ‖(x+y)/2‖₁ / ((‖x‖₁+‖y‖₁)/2))`, or `None`
/// when both norms vanish. The second term is evaluated as
/// `slack(x, y)/(‖x‖₁+‖y‖₁)`, which keeps it nonnegative under rounding.
pub fn modulus_terms(x: &GridFunction, y: &GridFunction) -> Result<Option<(f64, f64)>> {
    let denom = l1_norm(x) + l1_norm(y);
    if denom == 0.0 {
        return Ok(None);
    }
    let sep = x.l1_distance(y)? / denom;
    Ok(Some((sep, slack(x, y)? / denom)))
}

/// Empirical modulus of convexity over pairs from `family − family` whose
/// normalized separation `‖x−y‖₁/(‖x‖₁+‖y‖₁)` is at least `eta`.
///
/// When `sample_count` covers every ordered pair they are all enumerated;
/// otherwise `sample_count` ordered pairs are drawn with the given seed.
pub fn empirical_modulus(
    family: &FunctionFamily,
    eta: f64,
    sample_count: usize,
    seed: u64,
) -> Result<ModulusProbe> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::param(
            "eta",
            format!("must lie in (0, 1], got {eta}"),
        ));
    }
    let diff = family_difference(family)?;
    let g = diff.members();
    let n = g.len();
    let exhaustive = sample_count >= n * n;
    let pairs: Vec<(usize, usize)> = if exhaustive {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
    } else {
        let mut r = rng::seeded(seed);
        (0..sample_count)
            .map(|_| (r.random_range(0..n), r.random_range(0..n)))
            .collect()
    };

    let norms: Vec<f64> = g.iter().map(l1_norm).collect();
    let mut best: Option<(f64, f64, usize, usize)> = None;
    let mut qualifying = 0;
    for &(i, j) in &pairs {
        let Some((sep, delta)) = modulus_terms(&g[i], &g[j])? else {
            continue;
        };
        if sep < eta {
            continue;
        }
        qualifying += 1;
        // on ties prefer the pair whose smaller norm is larger: a pair
        // containing 0 reaches delta = 0 in any norm and says nothing
        let weak = norms[i].min(norms[j]);
        if best.is_none_or(|(b, bw, _, _)| delta < b || (delta == b && weak > bw)) {
            best = Some((delta, weak, i, j));
        }
    }
    let (delta_hat, _, i, j) = best.ok_or(Error::NoQualifyingPair)?;
    Ok(ModulusProbe {
        delta_hat,
        witness_indices: (i, j),
        witness_pair: (g[i].clone(), g[j].clone()),
        qualifying_pairs: qualifying,
        examined_pairs: pairs.len(),
        exhaustive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Separation {
    pub holds: bool,
    pub witness: Option<usize>,
    pub ratio: Option<f64>,
}

/// Search the generators `w` for `‖c1−c2‖₁ / (‖c1−w‖₁ + ‖c2−w‖₁) ≥ eta`.
pub fn separation_check(
    c1: &GridFunction,
    c2: &GridFunction,
    body: &ConvexBody,
    eta: f64,
) -> Result<Separation> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param(
            "eta",
            format!("must lie in (0, 1), got {eta}"),
        ));
    }
    c1.check_partition(c2)?;
    c1.check_partition(&body.generators[0])?;
    let num = c1.l1_distance(c2)?;
    for (k, w) in body.generators.iter().enumerate() {
        let denom = c1.l1_distance(w)? + c2.l1_distance(w)?;
        if denom == 0.0 {
            continue;
        }
        let ratio = num / denom;
        if ratio >= eta {
            return Ok(Separation {
                holds: true,
                witness: Some(k),
                ratio: Some(ratio),
            });
        }
    }
    Ok(Separation {
        holds: false,
        witness: None,
        ratio: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::disjoint_halves;
    use crate::grid_space::Partition;
    use std::sync::Arc;

    fn dy(values: &[f64]) -> GridFunction {
        GridFunction::dyadic(values.to_vec()).unwrap()
    }

    #[test]
    fn slack_examples() {
        let a = dy(&[1.0, 2.0, 0.0, 0.5]);
        let b = dy(&[0.5, 0.0, 3.0, 1.0]);
        assert_eq!(slack(&a, &b).unwrap(), 0.0);
        let neg = a.scale(-1.0);
        assert!((slack(&a, &neg).unwrap() - 2.0 * l1_norm(&a)).abs() < 1e-15);
        assert!((slack_by_parts(&a, &neg).unwrap() - 2.0 * l1_norm(&a)).abs() < 1e-15);
        let other = GridFunction::zero(Arc::new(Partition::dyadic(3)));
        assert_eq!(slack(&a, &other), Err(Error::PartitionMismatch));
    }

    #[test]
    fn diameter_examples() {
        let x = dy(&[1.0, 0.0]);
        let single = ConvexBody::new("x", vec![x.clone()]).unwrap();
        assert_eq!(diameter(&single), 0.0);
        let y = dy(&[0.0, 3.0]);
        let two = ConvexBody::new("xy", vec![x.clone(), y.clone()]).unwrap();
        assert_eq!(diameter(&two), x.l1_distance(&y).unwrap());
        assert!(ConvexBody::new("none", vec![]).is_err());
        let dup = ConvexBody::new("dup", vec![x.clone(), x]).unwrap();
        assert!(dup.has_duplicates());
        assert!(!two.has_duplicates());
    }

    #[test]
    fn chebyshev_trivial_bodies() {
        let x = dy(&[0.3, -0.2, 0.1, 0.9]);
        let one = ConvexBody::new("x", vec![x.clone()]).unwrap();
        let c = chebyshev(&one, 1e-9, ChebyshevOptions::default()).unwrap();
        assert_eq!(c.radius, 0.0);
        assert_eq!(c.center, x);

        let y = dy(&[1.0, 0.5, -0.5, 0.0]);
        let two = ConvexBody::new("xy", vec![x.clone(), y.clone()]).unwrap();
        let c = chebyshev(&two, 1e-9, ChebyshevOptions::default()).unwrap();
        let d = x.l1_distance(&y).unwrap();
        assert!((c.radius - d / 2.0).abs() < 1e-10);
        assert!(c.converged);
        assert!(chebyshev(&two, 0.0, ChebyshevOptions::default()).is_err());
    }

    #[test]
    fn chebyshev_three_vertices_of_simplex() {
        // unit-mass spikes on three cells: pairwise distance 2, and z = 0
        // attains diam/2 = 1 while centroid and midpoints do not
        let p = Arc::new(Partition::uniform(3, 1.0).unwrap());
        let gens: Vec<GridFunction> = (0..3)
            .map(|k| {
                let mut v = vec![0.0; 3];
                v[k] = 3.0;
                GridFunction::new(p.clone(), v).unwrap()
            })
            .collect();
        let body = ConvexBody::new("simplex", gens).unwrap();
        let c = chebyshev(&body, 1e-6, ChebyshevOptions::default()).unwrap();
        assert!((c.radius - 1.0).abs() < 1e-3, "radius {}", c.radius);
        assert!(c.lower_bound <= 1.0 + 1e-12);
        assert!(c.lower_bound >= 1.0 - 1e-3);
    }

    #[test]
    fn normal_structure_two_points() {
        let x = dy(&[1.0, 0.0]);
        let y = dy(&[0.0, 1.0]);
        let body = ConvexBody::new("xy", vec![x, y]).unwrap();
        let ns = normal_structure_gap(&body, 1e-9, ChebyshevOptions::default()).unwrap();
        assert!((ns.ratio - 0.5).abs() < 1e-12);
        assert!((ns.gap - ns.diam / 2.0).abs() < 1e-12);
        let single = ConvexBody::new("x", vec![dy(&[1.0, 0.0])]).unwrap();
        assert_eq!(
            normal_structure_gap(&single, 1e-9, ChebyshevOptions::default()),
            Err(Error::Degenerate)
        );
    }

    #[test]
    fn modulus_disjoint_support_gives_zero() {
        let probe = empirical_modulus(&disjoint_halves(), 0.9, 1000, 1).unwrap();
        assert!(probe.exhaustive);
        assert!(probe.delta_hat.abs() < 1e-12);
        let (x, y) = &probe.witness_pair;
        assert!(x.values().iter().zip(y.values()).all(|(a, b)| a * b == 0.0));
        assert!(l1_norm(x) > 0.0 && l1_norm(y) > 0.0);
        assert!(empirical_modulus(&disjoint_halves(), 0.0, 10, 1).is_err());
        assert!(empirical_modulus(&disjoint_halves(), 1.5, 10, 1).is_err());
    }

    #[test]
    fn modulus_pair_terms() {
        let p = Arc::new(Partition::dyadic(1));
        let a = GridFunction::new(p.clone(), vec![1.0, 0.5]).unwrap();
        let (sep, delta) = modulus_terms(&a, &a.scale(-1.0)).unwrap().unwrap();
        assert_eq!((sep, delta), (1.0, 1.0));
        let (sep, _) = modulus_terms(&a, &a).unwrap().unwrap();
        assert_eq!(sep, 0.0);
        let zero = GridFunction::zero(p.clone());
        assert_eq!(modulus_terms(&zero, &zero).unwrap(), None);

        // {0, a, −a}: (a, 0) qualifies at η = 1 with midpoint norm equal to the average
        let fam = FunctionFamily::new("a", vec![zero, a]).unwrap();
        let probe = empirical_modulus(&fam, 1.0, 100, 3).unwrap();
        assert_eq!(probe.qualifying_pairs, 6);
        assert_eq!(probe.delta_hat, 0.0);
    }

    #[test]
    fn modulus_without_qualifying_pair() {
        let p = Arc::new(Partition::dyadic(1));
        let fam = FunctionFamily::new("zero", vec![GridFunction::zero(p)]).unwrap();
        assert_eq!(
            empirical_modulus(&fam, 0.5, 10, 0),
            Err(Error::NoQualifyingPair)
        );
    }

    #[test]
    fn separation_examples() {
        let c1 = dy(&[1.0, 0.0]);
        let c2 = dy(&[0.0, 0.5]);
        let body = ConvexBody::new("b", vec![dy(&[3.0, 3.0]), c2.clone()]).unwrap();
        let same = separation_check(&c1, &c1, &body, 0.3).unwrap();
        assert!(!same.holds);
        let s = separation_check(&c1, &c2, &body, 0.3).unwrap();
        assert!(s.holds);
        assert_eq!(s.witness, Some(1));
        assert_eq!(s.ratio, Some(1.0));
        assert!(separation_check(&c1, &c2, &body, 1.0).is_err());
    }
}
