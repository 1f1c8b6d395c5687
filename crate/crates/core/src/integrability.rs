//! Uniform-integrability diagnostics on finite families.
//!
//! Both clauses of the definition are checked at a finite list of ε values,
//! and a piecewise-linear convex Φ is built from the tail profile
//! `φ(t) = max_f μ(|f| > t)` by the de la Vallée-Poussin ladder.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid_space::{l1_norm, FunctionFamily, GridFunction};

/// Maximum ladder length for [`build_orlicz`].
pub const MAX_LADDER: usize = 60;

/// Convex piecewise-linear Φ with Φ(0) = 0, slope 1 on `[0, s_1)` and slope
/// `k` on `[s_k, s_{k+1})`; the last slope extends to infinity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrliczFunction {
    breakpoints: Vec<f64>,
}

impl OrliczFunction {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::param(
                "breakpoints",
                "at least one breakpoint required",
            ));
        }
        if !(breakpoints[0] > 0.0) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::param("breakpoints", "must be positive and finite"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("breakpoints", "must be strictly increasing"));
        }
        Ok(OrliczFunction { breakpoints })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Slopes on `[0,s_1), [s_1,s_2), …, [s_K, ∞)`: `1, 1, 2, …, K`.
    pub fn slopes(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain((1..=self.breakpoints.len()).map(|k| k as f64))
            .collect()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        let s = &self.breakpoints;
        if t <= s[0] {
            return t;
        }
        let mut acc = s[0];
        for k in 1..=s.len() {
            let hi = s.get(k).copied().unwrap_or(f64::INFINITY);
            if t <= hi {
                return acc + k as f64 * (t - s[k - 1]);
            }
            acc += k as f64 * (hi - s[k - 1]);
        }
        unreachable!("last segment is unbounded")
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::param("eps", format!("must be positive, got {eps}")))
    }
}

/// `φ(t) = max_f μ({|f| > t})`.
pub fn tail_profile(family: &FunctionFamily, t: f64) -> Result<f64> {
    let members = family.nonempty()?;
    Ok(members
        .iter()
        .map(|f| {
            f.values()
                .iter()
                .zip(f.partition().measures())
                .filter(|(v, _)| v.abs() > t)
                .map(|(_, m)| m)
                .sum::<f64>()
        })
        .fold(0.0, f64::max))
}

/// Sorted distinct `|value|` over all members, always including 0.
fn value_set(members: &[GridFunction]) -> Vec<f64> {
    let mut vals: Vec<f64> = members
        .iter()
        .flat_map(|f| f.values().iter().map(|v| v.abs()))
        .chain(std::iter::once(0.0))
        .collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    vals
}

/// Greedy concentration `c_f(δ)`: cells by `|value|` descending, each taken
/// whole if it still fits under `δ`.
fn concentration(order: &[(f64, f64)], delta: f64) -> f64 {
    let mut used = 0.0;
    let mut mass = 0.0;
    for &(v, m) in order {
        if used + m <= delta {
            used += m;
            mass += v * m;
        }
    }
    mass
}

/// Largest achievable δ with `max_f c_f(δ') < eps` for every achievable
/// `δ' ≤ δ`, or `None` when no positive δ qualifies.
///
/// Achievable δ values are the cell measures, the cumulative measures along
/// each member's greedy order, and the total measure.
pub fn absolute_continuity_delta(family: &FunctionFamily, eps: f64) -> Result<Option<f64>> {
    check_eps(eps)?;
    let members = family.nonempty()?;
    let measures = members[0].partition().measures();
    let orders: Vec<Vec<(f64, f64)>> = members
        .iter()
        .map(|f| {
            let mut o: Vec<(f64, f64)> = f
                .values()
                .iter()
                .map(|v| v.abs())
                .zip(measures.iter().copied())
                .collect();
            o.sort_by(|a, b| b.0.total_cmp(&a.0));
            o
        })
        .collect();

    let mut grid: Vec<f64> = measures.to_vec();
    for order in &orders {
        let mut acc = 0.0;
        grid.extend(order.iter().map(|&(_, m)| {
            acc += m;
            acc
        }));
    }
    grid.push(members[0].partition().total_measure());
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut best = None;
    let mut running = 0.0f64;
    for &delta in &grid {
        let c = orders
            .iter()
            .map(|o| concentration(o, delta))
            .fold(0.0, f64::max);
        running = running.max(c);
        if running < eps {
            best = Some(delta);
        } else {
            break;
        }
    }
    Ok(best)
}

/// `max_f ∫_{|f|>M} |f| dμ`.
pub fn tail_mass(family: &FunctionFamily, threshold: f64) -> Result<f64> {
    let members = family.nonempty()?;
    Ok(members
        .iter()
        .map(|f| excess_mass(f, threshold, |v| v))
        .fold(0.0, f64::max))
}

/// `∫_{|f|>t} w(|f|) dμ`.
fn excess_mass(f: &GridFunction, t: f64, w: impl Fn(f64) -> f64) -> f64 {
    f.values()
        .iter()
        .zip(f.partition().measures())
        .filter(|(v, _)| v.abs() > t)
        .map(|(v, m)| w(v.abs()) * m)
        .sum()
}

/// Smallest `M` from the family's value set with `max_f ∫_{|f|>M}|f| < eps`.
///
/// Uncapped, the largest value always qualifies, so the result is `Some`.
pub fn tail_threshold(family: &FunctionFamily, eps: f64) -> Result<Option<f64>> {
    tail_threshold_capped(family, eps, f64::INFINITY)
}

/// [`tail_threshold`] restricted to candidates `M ≤ cap`.
pub fn tail_threshold_capped(family: &FunctionFamily, eps: f64, cap: f64) -> Result<Option<f64>> {
    check_eps(eps)?;
    let members = family.nonempty()?;
    let values = value_set(members);
    let capped = &values[..values.partition_point(|&m| m <= cap)];
    // tail mass is nonincreasing in M, so the qualifying candidates form a suffix
    let first = first_where(capped, |m| tail_mass(family, m).map(|t| t < eps))?;
    Ok(first.map(|i| capped[i]))
}

/// Index of the first element satisfying a predicate that is monotone
/// (false, …, false, true, …, true) along `values`.
fn first_where(values: &[f64], mut pred: impl FnMut(f64) -> Result<bool>) -> Result<Option<usize>> {
    let (mut lo, mut hi) = (0, values.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(values[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok((lo < values.len()).then_some(lo))
}

/// De la Vallée-Poussin ladder from the tail profile.
///
/// `t_k` is the smallest point of the value set with `φ(t_k) ≤ 2^{-k}` and
/// `s_k = max(t_k, s_{k-1} + 2^{-2k})` with `s_0 = 0`. The ladder stops at
/// the first `k` where `φ(t_k) = 0`, or at [`MAX_LADDER`].
pub fn build_orlicz(family: &FunctionFamily) -> Result<OrliczFunction> {
    let members = family.nonempty()?;
    let values = value_set(members);
    let mut breakpoints = Vec::new();
    let mut prev = 0.0;
    for k in 1..=MAX_LADDER {
        let target = (-(k as f64)).exp2();
        // φ is nonincreasing, and the maximum of the value set has φ = 0
        let i = first_where(&values, |v| {
            tail_profile(family, v).map(|phi| phi <= target)
        })?
        .expect("value set maximum has empty tail");
        let (t_k, phi) = (values[i], tail_profile(family, values[i])?);
        let s_k = t_k.max(prev + (-2.0 * k as f64).exp2());
        breakpoints.push(s_k);
        prev = s_k;
        if phi == 0.0 {
            break;
        }
    }
    OrliczFunction::new(breakpoints)
}

/// `∫ Φ(|f|) dμ`.
pub fn orlicz_integral(phi: &OrliczFunction, f: &GridFunction) -> f64 {
    f.values()
        .iter()
        .zip(f.partition().measures())
        .map(|(v, m)| phi.eval(*v) * m)
        .sum()
}

/// Layer-cake bound on `max_f ∫Φ(|f|)`:
/// `max_f ‖f‖₁ + Σ_k k (s_{k+1} − s_k) 2^{-k}` over the stored ladder, plus
/// `(K − 1) · max_f ∫(|f| − s_K)₊` for the unbounded last segment (zero when
/// the ladder ended with an empty tail).
pub fn layer_cake_bound(phi: &OrliczFunction, family: &FunctionFamily) -> Result<f64> {
    let members = family.nonempty()?;
    let max_norm = members.iter().map(l1_norm).fold(0.0, f64::max);
    let s = phi.breakpoints();
    let ladder: f64 = s
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let k = (i + 1) as f64;
            k * (w[1] - w[0]) * (-k).exp2()
        })
        .sum();
    let last = *s.last().expect("nonempty ladder");
    let overflow = members
        .iter()
        .map(|f| excess_mass(f, last, |v| v - last))
        .fold(0.0, f64::max);
    Ok(max_norm + ladder + (s.len() as f64 - 1.0) * overflow)
}

pub fn family_scale(family: &FunctionFamily, a: f64) -> Result<FunctionFamily> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    FunctionFamily::new(
        format!("{}*{a}", family.label),
        family.members().iter().map(|f| f.scale(a)).collect(),
    )
}

/// `𝓕 − 𝓕`: one zero function, then `f_i − f_j` for `i ≠ j` in
/// lexicographic order, exact duplicates dropped.
pub fn family_difference(family: &FunctionFamily) -> Result<FunctionFamily> {
    let members = family.nonempty()?;
    let mut out: Vec<GridFunction> = vec![GridFunction::zero(members[0].partition().clone())];
    for (i, f) in members.iter().enumerate() {
        for (j, g) in members.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = f.sub(g)?;
            if !out.iter().any(|o| o.values() == d.values()) {
                out.push(d);
            }
        }
    }
    FunctionFamily::new(format!("{}-{}", family.label, family.label), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UiClause {
    /// μ(E) < δ ⇒ ∫_E |f| < ε
    AbsoluteContinuity,
    /// ∫_{|f|>M} |f| < ε
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UiVerdict {
    UiAtTestedScales,
    Failed { clause: UiClause, eps: f64 },
}

impl UiVerdict {
    pub fn is_ui(&self) -> bool {
        matches!(self, UiVerdict::UiAtTestedScales)
    }
}

impl Serialize for UiVerdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            UiVerdict::UiAtTestedScales => "UI_AT_TESTED_SCALES",
            UiVerdict::Failed { .. } => "FAILED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrliczSummary {
    pub breakpoints: Vec<f64>,
}

/// Result of checking both UI clauses on a finite ε grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiCertificate {
    pub eps: Vec<f64>,
    /// Largest validated δ per ε; `None` where clause (i) failed.
    pub delta: Vec<Option<f64>>,
    /// Smallest validated M per ε; `None` where clause (ii) failed.
    #[serde(rename = "M")]
    pub m: Vec<Option<f64>>,
    pub orlicz: Option<OrliczSummary>,
    pub bound: Option<f64>,
    pub verdict: UiVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_clause: Option<UiClause>,
}

/// Check both clauses at every ε and attach the Orlicz ladder and its bound.
/// `m_cap` restricts the threshold search (use `f64::INFINITY` for none).
pub fn ui_certificate(
    family: &FunctionFamily,
    eps_grid: &[f64],
    m_cap: f64,
) -> Result<UiCertificate> {
    if eps_grid.is_empty() {
        return Err(Error::param("eps_grid", "must be nonempty"));
    }
    let mut delta = Vec::with_capacity(eps_grid.len());
    let mut m = Vec::with_capacity(eps_grid.len());
    let mut verdict = UiVerdict::UiAtTestedScales;
    for &eps in eps_grid {
        let d = absolute_continuity_delta(family, eps)?;
        let t = tail_threshold_capped(family, eps, m_cap)?;
        if verdict.is_ui() {
            if d.is_none() {
                verdict = UiVerdict::Failed {
                    clause: UiClause::AbsoluteContinuity,
                    eps,
                };
            } else if t.is_none() {
                verdict = UiVerdict::Failed {
                    clause: UiClause::Tail,
                    eps,
                };
            }
        }
        delta.push(d);
        m.push(t);
    }
    let phi = build_orlicz(family)?;
    let bound = layer_cake_bound(&phi, family)?;
    let failing_clause = match verdict {
        UiVerdict::Failed { clause, .. } => Some(clause),
        UiVerdict::UiAtTestedScales => None,
    };
    Ok(UiCertificate {
        eps: eps_grid.to_vec(),
        delta,
        m,
        orlicz: Some(OrliczSummary {
            breakpoints: phi.breakpoints().to_vec(),
        }),
        bound: Some(bound),
        verdict,
        failing_clause,
    })
}
