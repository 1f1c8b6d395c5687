//! Named test families used by the experiments.

use std::sync::Arc;

use rand::Rng;

use crate::grid_space::{FunctionFamily, GridFunction, Partition};
use crate::rng;

/// Partition of `[0,1]` with breakpoints at `1/n` for `n ≤ n_max`: cell 0 is
/// `[0, 1/n_max]`, then `(1/(k+1), 1/k]` for `k = n_max − 1, …, 1`.
pub fn harmonic_partition(n_max: usize) -> Partition {
    assert!(n_max >= 1, "n_max must be positive");
    let mut cells = vec![1.0 / n_max as f64];
    for k in (1..n_max).rev() {
        cells.push(1.0 / k as f64 - 1.0 / (k + 1) as f64);
    }
    Partition::new(vec![cells]).expect("harmonic partition is valid")
}

/// `{ n · 1_[0,1/n] : n = 1..=n_max }`: bounded in L¹, not uniformly integrable
/// as `n_max → ∞`.
pub fn spike_family(n_max: usize) -> FunctionFamily {
    let p = Arc::new(harmonic_partition(n_max));
    let members = (1..=n_max)
        .map(|n| {
            // cells 0..=n_max-n lie inside [0, 1/n]
            let values = (0..n_max)
                .map(|cell| if cell <= n_max - n { n as f64 } else { 0.0 })
                .collect();
            GridFunction::new(p.clone(), values).expect("length matches")
        })
        .collect();
    FunctionFamily::new(format!("spikes(n<={n_max})"), members).expect("shared partition")
}

/// The integrable dominator `g(t) ≈ t^{-1/2}` sampled at cell midpoints of
/// the dyadic grid.
pub fn dominator(depth: u32) -> GridFunction {
    let n = 1usize << depth;
    let h = 1.0 / n as f64;
    let values = (0..n).map(|j| ((j as f64 + 0.5) * h).powf(-0.5)).collect();
    GridFunction::new(Arc::new(Partition::dyadic(depth)), values).expect("length matches")
}

/// Members `u · g` with `u` uniform in `[-1, 1]` per cell, so `|f| ≤ g`.
pub fn dominated_family(seed: u64, count: usize, depth: u32) -> FunctionFamily {
    let g = dominator(depth);
    let members = (0..count)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let values = g
                .values()
                .iter()
                .map(|&gv| gv * r.random_range(-1.0..=1.0))
                .collect();
            GridFunction::new(g.partition().clone(), values).expect("length matches")
        })
        .collect();
    FunctionFamily::new(format!("dominated(seed={seed})"), members).expect("shared partition")
}

/// `{0, 1_[0,1/2], 1_(1/2,1]}` on the two-cell dyadic grid.
pub fn disjoint_halves() -> FunctionFamily {
    let p = Arc::new(Partition::dyadic(1));
    let members = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
        .iter()
        .map(|v| GridFunction::new(p.clone(), v.to_vec()).expect("length matches"))
        .collect();
    FunctionFamily::new("disjoint-halves", members).expect("shared partition")
}
