//! Browser bindings for three l1lab operations. Each export is a thin
//! wrapper over a plain function so the numerics can be tested natively.

use l1lab_core::fixed_point_lab::{alspach_orbit, km_iterate, ExhaustionPolicy, MapSpec};
use l1lab_core::lorentz::lorentz_norm_table;
use l1lab_core::{GridFunction, Result};
use wasm_bindgen::prelude::*;

fn policy(project: bool) -> ExhaustionPolicy {
    if project {
        ExhaustionPolicy::Project
    } else {
        ExhaustionPolicy::Error
    }
}

/// `values` on the dyadic grid refined to `2^depth` cells.
fn start(values: &[f64], depth: u32) -> Result<GridFunction> {
    let base = GridFunction::dyadic(values.to_vec())?;
    let have = base.values().len().trailing_zeros();
    base.refine_dyadic(depth.saturating_sub(have))
}

/// Cell values of `x0, T x0, …, T^steps x0`, one row of `2^depth` after another.
pub fn orbit_rows(x0: &[f64], depth: u32, steps: usize, project: bool) -> Result<Vec<f64>> {
    let orbit = alspach_orbit(&start(x0, depth)?, steps, policy(project))?;
    Ok(orbit
        .iter()
        .flat_map(|f| f.values().iter().copied())
        .collect())
}

/// Residuals `‖x_n − T x_n‖₁` of Krasnoselskii–Mann iteration of the baker's map.
pub fn km_residuals(
    x0: &[f64],
    depth: u32,
    lambda: f64,
    steps: usize,
    project: bool,
) -> Result<Vec<f64>> {
    let spec = if project {
        MapSpec::alspach_projected()
    } else {
        MapSpec::alspach()
    };
    let trace = km_iterate(&spec, &start(x0, depth)?, lambda, steps, 0.0)?;
    Ok(trace.residuals())
}

fn js(e: l1lab_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = orbitRows)]
pub fn orbit_rows_js(
    x0: Vec<f64>,
    depth: u32,
    steps: usize,
    project: bool,
) -> std::result::Result<Vec<f64>, JsError> {
    orbit_rows(&x0, depth, steps, project).map_err(js)
}

#[wasm_bindgen(js_name = kmResiduals)]
pub fn km_residuals_js(
    x0: Vec<f64>,
    depth: u32,
    lambda: f64,
    steps: usize,
    project: bool,
) -> std::result::Result<Vec<f64>, JsError> {
    km_residuals(&x0, depth, lambda, steps, project).map_err(js)
}

/// `‖Σ_{n≤k} e_n‖_{p,1}` for `k = 1..=k_max`.
#[wasm_bindgen(js_name = lorentzTable)]
pub fn lorentz_table_js(k_max: usize, p: f64) -> std::result::Result<Vec<f64>, JsError> {
    lorentz_norm_table(k_max, p).map_err(js)
}
