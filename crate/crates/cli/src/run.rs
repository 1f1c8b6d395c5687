//! Experiment dispatch and report writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use l1lab_core::convex_geometry::{
    chebyshev, diametral_pair, empirical_modulus, normal_structure_gap, slack, slack_by_parts,
    ChebyshevOptions, ConvexBody,
};
use l1lab_core::fixed_point_lab::{
    apply_map, km_iterate, orbit_hull_scan, orbit_scan_csv, ExhaustionPolicy, MapKind, MapSpec,
    TraceStatus, DEFAULT_LAMBDA, DEFAULT_MAX_STEPS, DEFAULT_TOL,
};
use l1lab_core::grid_space::l1_norm;
use l1lab_core::integrability::{
    build_orlicz, layer_cake_bound, orlicz_integral, tail_profile, ui_certificate,
};
use l1lab_core::lorentz::{lorentz_norm_table, table_csv};
use l1lab_core::{rng, FunctionFamily, GridFunction, Partition};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, OrbitScan, ScenarioConfig};
use crate::sources::{sha256_hex, BodySource, FamilySource, Inputs, StartPoint};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] l1lab_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: String,
    pub experiment: Experiment,
    pub config: ScenarioConfig,
    /// SHA-256 of the scenario document and of every file it referenced.
    pub input_digests: BTreeMap<String, String>,
    pub results: Value,
    /// CSV traces written next to the report, by file name.
    pub traces: Vec<String>,
    pub wall_time_s: f64,
}

impl RunReport {
    /// The deterministic part of the report.
    pub fn results_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&self.results).expect("results serialize")
    }
}

/// Output of one experiment before it is written out.
struct Outcome {
    results: Value,
    traces: Vec<(&'static str, String)>,
}

impl Outcome {
    fn plain(results: Value) -> Self {
        Outcome {
            results,
            traces: Vec::new(),
        }
    }
}

/// Run `config`, write `report.json`, `results.json` and any CSV traces to
/// its `output_path`, and return the report.
///
/// Relative file references inside the scenario resolve against
/// `base_dir`. `config_digest` is recorded under the `config` key.
pub fn run_scenario(
    config: &ScenarioConfig,
    base_dir: &Path,
    config_digest: Option<String>,
) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let mut inputs = Inputs {
        seed: config.seed,
        resolution: config.resolution,
        base_dir,
        digests: BTreeMap::new(),
    };
    if let Some(d) = config_digest {
        inputs.digests.insert("config".into(), d);
    }
    let outcome = execute(config, &mut inputs)?;

    let out = &config.output_path;
    fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.clone(),
        source,
    })?;
    let mut traces = Vec::new();
    for (name, body) in &outcome.traces {
        write(&out.join(name), body.as_bytes())?;
        traces.push(name.to_string());
    }
    let report = RunReport {
        version: VERSION.into(),
        experiment: config.experiment,
        config: config.clone(),
        input_digests: inputs.digests,
        results: outcome.results,
        traces,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write(&out.join("results.json"), &report.results_bytes())?;
    let full = serde_json::to_vec_pretty(&report).expect("report serializes");
    write(&out.join("report.json"), &full)?;
    Ok(report)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn execute(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    match config.experiment {
        Experiment::UiCertificate => ui_certificate_run(config, inputs),
        Experiment::OrliczBuild => orlicz_run(config, inputs),
        Experiment::Chebyshev => chebyshev_run(config, inputs),
        Experiment::NormalStructure => normal_structure_run(config, inputs),
        Experiment::ModulusProbe => modulus_run(config, inputs),
        Experiment::AlspachOrbit => orbit_run(config, inputs),
        Experiment::KmIterate => km_run(config, inputs),
        Experiment::LorentzTable => lorentz_run(config),
        Experiment::SlackAudit => slack_run(config, inputs),
    }
}

fn family_summary(family: &FunctionFamily) -> Value {
    json!({
        "label": family.label,
        "members": family.len(),
        "cells": family.partition().map_or(0, |p| p.cell_count()),
    })
}

fn chebyshev_options(config: &ScenarioConfig) -> ChebyshevOptions {
    let mut opts = ChebyshevOptions::default();
    if let Some(n) = config.param("max_iterations") {
        opts.max_iterations = n;
    }
    opts
}

fn ui_certificate_run(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    let family = config.required::<FamilySource>("family").build(inputs)?;
    let eps: Vec<f64> = config.required("eps_grid");
    let cap = config.param("m_cap").unwrap_or(f64::INFINITY);
    let cert = ui_certificate(&family, &eps, cap)?;
    Ok(Outcome::plain(json!({
        "family": family_summary(&family),
        "m_cap": config.param::<f64>("m_cap"),
        "certificate": cert,
    })))
}

fn orlicz_run(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    let family = config.required::<FamilySource>("family").build(inputs)?;
    let phi = build_orlicz(&family)?;
    let slopes = phi.slopes();
    let mut csv = String::from("k,breakpoint,slope,tail_profile,cap\n");
    let mut ladder = Vec::new();
    let mut ladder_ok = true;
    for (i, &s) in phi.breakpoints().iter().enumerate() {
        let k = i + 1;
        let tail = tail_profile(&family, s)?;
        let cap = 0.5f64.powi(k as i32);
        ladder_ok &= tail <= cap;
        csv.push_str(&format!("{k},{s},{},{tail},{cap}\n", slopes[k]));
        ladder.push(json!({"k": k, "breakpoint": s, "tail_profile": tail, "cap": cap}));
    }
    let bound = layer_cake_bound(&phi, &family)?;
    let max_integral = family
        .members()
        .iter()
        .map(|f| orlicz_integral(&phi, f))
        .fold(0.0, f64::max);
    Ok(Outcome {
        results: json!({
            "family": family_summary(&family),
            "breakpoints": phi.breakpoints(),
            "slopes": slopes,
            "ladder": ladder,
            "ladder_within_caps": ladder_ok,
            "layer_cake_bound": bound,
            "max_orlicz_integral": max_integral,
            "bound_holds": max_integral <= bound + 1e-9,
        }),
        traces: vec![("orlicz.csv", csv)],
    })
}

fn body_summary(body: &ConvexBody) -> Value {
    let (i, j, diam) = diametral_pair(body);
    json!({
        "label": body.label,
        "generators": body.generators().len(),
        "cells": body.generators()[0].values().len(),
        "diam": diam,
        "diametral_pair": [i, j],
    })
}

fn chebyshev_run(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    let body = config.required::<BodySource>("body").build(inputs)?;
    let tol = config.param("tol").unwrap_or(1e-9);
    let c = chebyshev(&body, tol, chebyshev_options(config))?;
    Ok(Outcome::plain(json!({
        "body": body_summary(&body),
        "radius": c.radius,
        "lower_bound": c.lower_bound,
        "certified_gap": c.certified_gap,
        "converged": c.converged,
        "exact": c.exact,
        "iterations": c.iterations,
        "center": c.center.values(),
    })))
}

fn normal_structure_run(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    let tol = config.param("tol").unwrap_or(1e-9);
    let opts = chebyshev_options(config);
    if let Some(scan) = config.param::<OrbitScan>("orbit_scan") {
        let x0 = GridFunction::dyadic(vec![scan.x0])?;
        let rows = orbit_hull_scan(&x0, scan.steps, &scan.resolutions, scan.policy, tol, opts)?;
        return Ok(Outcome {
            results: json!({
                "orbit_scan": {"x0": scan.x0, "steps": scan.steps, "policy": scan.policy},
                "rows": rows,
            }),
            traces: vec![("orbit_scan.csv", orbit_scan_csv(&rows))],
        });
    }
    let body = config.required::<BodySource>("body").build(inputs)?;
    let ns = normal_structure_gap(&body, tol, opts)?;
    Ok(Outcome::plain(json!({
        "body": body_summary(&body),
        "normal_structure": ns,
    })))
}

fn modulus_run(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    let family = config.required::<FamilySource>("family").build(inputs)?;
    let eta: f64 = config.required("eta");
    let samples: usize = config.required("sample_count");
    let probe = empirical_modulus(&family, eta, samples, config.seed)?;
    Ok(Outcome::plain(json!({
        "family": family_summary(&family),
        "eta": eta,
        "delta_hat": probe.delta_hat,
        "zero_modulus": probe.delta_hat == 0.0,
        "witness_indices": probe.witness_indices,
        "witness_pair": [probe.witness_pair.0.values(), probe.witness_pair.1.values()],
        "qualifying_pairs": probe.qualifying_pairs,
        "examined_pairs": probe.examined_pairs,
        "exhaustive": probe.exhaustive,
    })))
}

fn orbit_run(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    let x0 = config.required::<StartPoint>("x0").build(inputs.cells()?)?;
    let steps: usize = config.required("steps");
    let policy: ExhaustionPolicy = config.param("policy").unwrap_or_default();
    let spec: MapSpec = MapKind::Alspach {
        on_exhaustion: policy,
    }
    .into();

    let mut orbit = vec![x0];
    let mut exhausted = false;
    while orbit.len() <= steps {
        match apply_map(&spec, orbit.last().expect("nonempty")) {
            Ok(next) => orbit.push(next),
            Err(l1lab_core::Error::ResolutionExhausted { .. }) => {
                exhausted = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut csv = String::from("n,effective_resolution,integral,dist_to_x0,dist_to_prev\n");
    let mut rows = Vec::new();
    for (n, f) in orbit.iter().enumerate() {
        let to_x0 = f.l1_distance(&orbit[0])?;
        let to_prev = if n == 0 {
            0.0
        } else {
            f.l1_distance(&orbit[n - 1])?
        };
        let depth = f.effective_resolution();
        csv.push_str(&format!(
            "{n},{},{},{to_x0},{to_prev}\n",
            depth.map_or(String::new(), |d| d.to_string()),
            f.integral()
        ));
        rows.push(json!({
            "n": n,
            "effective_resolution": depth,
            "integral": f.integral(),
            "dist_to_x0": to_x0,
            "dist_to_prev": to_prev,
        }));
    }
    let mut min_pair = f64::INFINITY;
    for i in 0..orbit.len() {
        for j in i + 1..orbit.len() {
            min_pair = min_pair.min(orbit[i].l1_distance(&orbit[j])?);
        }
    }
    Ok(Outcome {
        results: json!({
            "status": if exhausted { "RESOLUTION_EXHAUSTED" } else { "COMPLETE" },
            "policy": policy,
            "representable_steps": orbit.len() - 1,
            "orbit": rows,
            "min_pairwise_distance": if orbit.len() > 1 { Some(min_pair) } else { None },
        }),
        traces: vec![("orbit.csv", csv)],
    })
}

fn km_run(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    let spec: MapSpec = config.required("map");
    let x0 = config.required::<StartPoint>("x0").build(inputs.cells()?)?;
    let lambda = config.param("lambda").unwrap_or(DEFAULT_LAMBDA);
    let max_steps = config.param("max_steps").unwrap_or(DEFAULT_MAX_STEPS);
    let tol = config.param("tol").unwrap_or(DEFAULT_TOL);
    let trace = km_iterate(&spec, &x0, lambda, max_steps, tol)?;
    let residuals = trace.residuals();
    let converged_at = match trace.status {
        TraceStatus::Converged { .. } => trace.records.last().map(|r| r.n),
        _ => None,
    };
    Ok(Outcome {
        results: json!({
            "lambda": lambda,
            "tol": tol,
            "max_steps": max_steps,
            "status": trace.status,
            "converged_at": converged_at,
            "records": trace.records.len(),
            "first_residual": residuals.first(),
            "final_residual": residuals.last(),
            "residuals_nonincreasing": residuals.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "final_drift": trace.records.last().map(|r| r.drift),
        }),
        traces: vec![("trace.csv", trace.to_csv())],
    })
}

fn lorentz_run(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    let k_max: usize = config.required("k_max");
    let p: f64 = config.required("p");
    let table = lorentz_norm_table(k_max, p)?;
    let rows: Vec<Value> = table
        .iter()
        .enumerate()
        .map(|(i, v)| json!({"k": i + 1, "norm": v}))
        .collect();
    Ok(Outcome {
        results: json!({"p": p, "table": rows}),
        traces: vec![("lorentz.csv", table_csv(&table))],
    })
}

fn slack_run(config: &ScenarioConfig, inputs: &mut Inputs) -> Result<Outcome, RunError> {
    let pairs: usize = config.required("pairs");
    let cells = inputs.cells()?;
    let partition = std::sync::Arc::new(Partition::dyadic(cells.trailing_zeros()));
    let mut max_err = 0.0f64;
    let mut min_slack = f64::INFINITY;
    let mut zero_rule_holds = true;
    let mut same_sign_pairs = 0;
    let mut total = 0.0;
    for i in 0..pairs {
        let mut r = rng::stream(inputs.seed, i as u64);
        let a: Vec<f64> = (0..cells).map(|_| r.random_range(-1.0..=1.0)).collect();
        // every fourth pair is sign-aligned so the zero case is exercised
        let b: Vec<f64> = if i % 4 == 3 {
            a.iter().map(|x| x.signum() * r.random::<f64>()).collect()
        } else {
            (0..cells).map(|_| r.random_range(-1.0..=1.0)).collect()
        };
        let same_sign = a.iter().zip(&b).all(|(x, y)| x * y >= 0.0);
        let fa = GridFunction::new(partition.clone(), a)?;
        let fb = GridFunction::new(partition.clone(), b)?;
        let s = slack(&fa, &fb)?;
        let direct = l1_norm(&fa) + l1_norm(&fb) - l1_norm(&fa.add(&fb)?);
        max_err = max_err
            .max((s - slack_by_parts(&fa, &fb)?).abs())
            .max((s - direct).abs());
        min_slack = min_slack.min(s);
        zero_rule_holds &= (s == 0.0) == same_sign;
        same_sign_pairs += usize::from(same_sign);
        total += s;
    }
    Ok(Outcome::plain(json!({
        "pairs": pairs,
        "cells": cells,
        "max_identity_error": max_err,
        "min_slack": min_slack,
        "mean_slack": total / pairs as f64,
        "same_sign_pairs": same_sign_pairs,
        "zero_iff_same_sign": zero_rule_holds,
    })))
}

/// SHA-256 of a scenario document, as recorded in reports.
pub fn digest_config(raw: &str) -> String {
    sha256_hex(raw.as_bytes())
}
