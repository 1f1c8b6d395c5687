//! Scenario documents and their schema validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use l1lab_core::fixed_point_lab::{ExhaustionPolicy, MapSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::sources::{BodySource, FamilySource, StartPoint};

/// Largest accepted `resolution` (cells on the dyadic grid).
pub const MAX_RESOLUTION: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    UiCertificate,
    OrliczBuild,
    Chebyshev,
    NormalStructure,
    ModulusProbe,
    AlspachOrbit,
    KmIterate,
    LorentzTable,
    SlackAudit,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::UiCertificate,
        Experiment::OrliczBuild,
        Experiment::Chebyshev,
        Experiment::NormalStructure,
        Experiment::ModulusProbe,
        Experiment::AlspachOrbit,
        Experiment::KmIterate,
        Experiment::LorentzTable,
        Experiment::SlackAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::UiCertificate => "ui-certificate",
            Experiment::OrliczBuild => "orlicz-build",
            Experiment::Chebyshev => "chebyshev",
            Experiment::NormalStructure => "normal-structure",
            Experiment::ModulusProbe => "modulus-probe",
            Experiment::AlspachOrbit => "alspach-orbit",
            Experiment::KmIterate => "km-iterate",
            Experiment::LorentzTable => "lorentz-table",
            Experiment::SlackAudit => "slack-audit",
        }
    }

    fn needs_resolution(self) -> bool {
        matches!(
            self,
            Experiment::AlspachOrbit | Experiment::KmIterate | Experiment::SlackAudit
        )
    }

    fn fields(self) -> Vec<Field> {
        use Kind::*;
        match self {
            Experiment::UiCertificate => vec![
                Field::req("family", Family),
                Field::req("eps_grid", PositiveList),
                Field::opt("m_cap", Positive),
            ],
            Experiment::OrliczBuild => vec![Field::req("family", Family)],
            Experiment::Chebyshev => vec![
                Field::req("body", Body),
                Field::opt("tol", Positive),
                Field::opt("max_iterations", Count),
            ],
            Experiment::NormalStructure => vec![
                Field::opt("body", Body),
                Field::opt("orbit_scan", OrbitScan),
                Field::opt("tol", Positive),
                Field::opt("max_iterations", Count),
            ],
            Experiment::ModulusProbe => vec![
                Field::req("family", Family),
                Field::req("eta", UnitFraction),
                Field::req("sample_count", Count),
            ],
            Experiment::AlspachOrbit => vec![
                Field::req("x0", Start),
                Field::req("steps", Count),
                Field::opt("policy", Policy),
            ],
            Experiment::KmIterate => vec![
                Field::req("map", Map),
                Field::req("x0", Start),
                Field::opt("lambda", UnitFraction),
                Field::opt("max_steps", Count),
                Field::opt("tol", NonNegative),
            ],
            Experiment::LorentzTable => vec![
                Field::req("k_max", Count),
                Field::req("p", ExponentAboveOne),
            ],
            Experiment::SlackAudit => vec![Field::req("pairs", Count)],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or(())
    }
}

/// Parameters of the `normal-structure` orbit scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitScan {
    #[serde(default = "half")]
    pub x0: f64,
    pub steps: usize,
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub policy: ExhaustionPolicy,
}

fn half() -> f64 {
    0.5
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    pub params: Map<String, Value>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    pub output_path: PathBuf,
}

impl ScenarioConfig {
    /// Typed read of an optional parameter; validation has already
    /// checked its shape.
    pub fn param<T: DeserializeOwned>(&self, name: &str) -> Option<T> {
        self.params
            .get(name)
            .map(|v| serde_json::from_value(v.clone()).expect("validated parameter"))
    }

    pub fn required<T: DeserializeOwned>(&self, name: &str) -> T {
        self.param(name).expect("validated required parameter")
    }
}

/// One schema violation, named by its JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Count,
    Positive,
    NonNegative,
    UnitFraction,
    ExponentAboveOne,
    PositiveList,
    Family,
    Body,
    OrbitScan,
    Start,
    Map,
    Policy,
}

struct Field {
    name: &'static str,
    required: bool,
    kind: Kind,
}

impl Field {
    const fn req(name: &'static str, kind: Kind) -> Self {
        Field {
            name,
            required: true,
            kind,
        }
    }

    const fn opt(name: &'static str, kind: Kind) -> Self {
        Field {
            name,
            required: false,
            kind,
        }
    }
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T, String> {
    serde_json::from_value(v.clone()).map_err(|e| e.to_string())
}

fn number(v: &Value, ok: impl Fn(f64) -> bool, want: &str) -> Result<(), String> {
    match v.as_f64() {
        Some(x) if x.is_finite() && ok(x) => Ok(()),
        _ => Err(format!("expected {want}, got {v}")),
    }
}

/// Checks one parameter value. `Ok(true)` means it needs a resolution.
fn check_kind(kind: Kind, v: &Value) -> Result<bool, String> {
    match kind {
        Kind::Count => match v.as_u64() {
            Some(n) if n >= 1 => Ok(false),
            _ => Err(format!("expected a positive integer, got {v}")),
        },
        Kind::Positive => number(v, |x| x > 0.0, "a positive number").map(|_| false),
        Kind::NonNegative => number(v, |x| x >= 0.0, "a nonnegative number").map(|_| false),
        Kind::UnitFraction => {
            number(v, |x| x > 0.0 && x <= 1.0, "a number in (0, 1]").map(|_| false)
        }
        Kind::ExponentAboveOne => number(v, |x| x > 1.0, "a finite number above 1").map(|_| false),
        Kind::PositiveList => {
            let list: Vec<f64> = parse(v)?;
            if list.is_empty() || list.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err("expected a nonempty list of positive numbers".into());
            }
            Ok(false)
        }
        Kind::Family => {
            let source: FamilySource = parse(v)?;
            source.check()?;
            Ok(source.needs_resolution())
        }
        Kind::Body => {
            let source: BodySource = parse(v)?;
            source.check()?;
            Ok(source.needs_resolution())
        }
        Kind::OrbitScan => {
            let scan: OrbitScan = parse(v)?;
            if scan.steps == 0 {
                return Err("steps must be at least 1".into());
            }
            if scan.resolutions.is_empty()
                || scan
                    .resolutions
                    .iter()
                    .any(|r| !r.is_power_of_two() || *r as u64 > MAX_RESOLUTION)
                || scan.resolutions.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(format!(
                    "resolutions must be increasing powers of two up to {MAX_RESOLUTION}"
                ));
            }
            Ok(false)
        }
        Kind::Start => {
            let start: StartPoint = parse(v)?;
            start.check()?;
            Ok(true)
        }
        Kind::Map => {
            let spec: MapSpec = parse(v)?;
            spec.validate().map_err(|e| e.to_string())?;
            Ok(true)
        }
        Kind::Policy => parse::<ExhaustionPolicy>(v).map(|_| false),
    }
}

/// Parse and validate a scenario document, reporting every violation found.
pub fn validate_config(raw: &str) -> Result<ScenarioConfig, Vec<Violation>> {
    let doc: Value = serde_json::from_str(raw)
        .map_err(|e| vec![Violation::new("$", format!("not valid JSON: {e}"))])?;
    validate_value(doc)
}

/// As [`validate_config`], on an already parsed document.
pub fn validate_value(doc: Value) -> Result<ScenarioConfig, Vec<Violation>> {
    let Value::Object(top) = doc else {
        return Err(vec![Violation::new("$", "expected a JSON object")]);
    };
    let mut errors = Vec::new();
    for key in top.keys() {
        if !matches!(
            key.as_str(),
            "experiment" | "params" | "seed" | "resolution" | "output_path"
        ) {
            errors.push(Violation::new(key.as_str(), "unknown field"));
        }
    }

    let experiment = match top.get("experiment") {
        None => {
            errors.push(Violation::new("experiment", "required"));
            None
        }
        Some(Value::String(s)) => match s.parse::<Experiment>() {
            Ok(e) => Some(e),
            Err(()) => {
                let known: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                errors.push(Violation::new(
                    "experiment",
                    format!(
                        "unknown experiment `{s}` (expected one of {})",
                        known.join(", ")
                    ),
                ));
                None
            }
        },
        Some(v) => {
            errors.push(Violation::new(
                "experiment",
                format!("expected a string, got {v}"),
            ));
            None
        }
    };

    let seed = match top.get("seed") {
        None => {
            errors.push(Violation::new("seed", "required"));
            None
        }
        Some(v) => match v.as_u64() {
            Some(s) => Some(s),
            None => {
                errors.push(Violation::new(
                    "seed",
                    format!("expected a nonnegative integer, got {v}"),
                ));
                None
            }
        },
    };

    let resolution = match top.get("resolution") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => match v.as_u64() {
            Some(r) if r >= 2 && r.is_power_of_two() && r <= MAX_RESOLUTION => Ok(Some(r as usize)),
            _ => {
                errors.push(Violation::new(
                    "resolution",
                    format!("expected a power of two between 2 and {MAX_RESOLUTION}, got {v}"),
                ));
                Err(())
            }
        },
    };

    let output_path = match top.get("output_path") {
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        None => {
            errors.push(Violation::new("output_path", "required"));
            None
        }
        Some(v) => {
            errors.push(Violation::new(
                "output_path",
                format!("expected a nonempty string, got {v}"),
            ));
            None
        }
    };

    let params = match top.get("params") {
        None => {
            errors.push(Violation::new("params", "required"));
            None
        }
        Some(Value::Object(m)) => Some(m.clone()),
        Some(v) => {
            errors.push(Violation::new(
                "params",
                format!("expected an object, got {v}"),
            ));
            None
        }
    };

    if let (Some(exp), Some(params)) = (experiment, &params) {
        let fields = exp.fields();
        let mut wants_resolution = exp.needs_resolution();
        for key in params.keys() {
            if !fields.iter().any(|f| f.name == key) {
                errors.push(Violation::new(format!("params.{key}"), "unknown parameter"));
            }
        }
        for field in &fields {
            match params.get(field.name) {
                None if field.required => {
                    errors.push(Violation::new(format!("params.{}", field.name), "required"))
                }
                None => {}
                Some(v) => match check_kind(field.kind, v) {
                    Ok(needs) => wants_resolution |= needs,
                    Err(msg) => errors.push(Violation::new(format!("params.{}", field.name), msg)),
                },
            }
        }
        if exp == Experiment::NormalStructure
            && params.contains_key("body") == params.contains_key("orbit_scan")
        {
            errors.push(Violation::new(
                "params",
                "normal-structure takes exactly one of `body` and `orbit_scan`",
            ));
        }
        if wants_resolution && resolution == Ok(None) {
            errors.push(Violation::new(
                "resolution",
                format!("required by this {exp} scenario"),
            ));
        }
    }

    match (experiment, params, seed, resolution, output_path) {
        (Some(experiment), Some(params), Some(seed), Ok(resolution), Some(output_path))
            if errors.is_empty() =>
        {
            Ok(ScenarioConfig {
                experiment,
                params,
                seed,
                resolution,
                output_path,
            })
        }
        _ => Err(errors),
    }
}
