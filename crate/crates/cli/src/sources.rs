//! Where experiments get their functions from: generated families and
//! bodies, inline documents, or JSON files next to the scenario.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use l1lab_core::convex_geometry::ConvexBody;
use l1lab_core::families::{disjoint_halves, dominated_family, spike_family};
use l1lab_core::fixed_point_lab::{alspach_orbit, sample_example_set, ExhaustionPolicy};
use l1lab_core::rng;
use l1lab_core::{FunctionFamily, GridFunction, Partition};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySource {
    /// `{n · 1_[0,1/n] : n ≤ n_max}` on the harmonic partition.
    Spike {
        n_max: usize,
    },
    /// Points of `K = {0 ≤ f ≤ 1, ‖f‖₁ = 1/2}` on the dyadic grid.
    ExampleSet {
        count: usize,
    },
    /// Random members dominated by `t^{-1/2}` on the dyadic grid.
    Dominated {
        count: usize,
    },
    DisjointHalves,
    Inline {
        windows: Vec<Vec<f64>>,
        members: Vec<Vec<f64>>,
    },
    /// A JSON file holding `{"windows": …, "members": …}`.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BodySource {
    Inline {
        windows: Vec<Vec<f64>>,
        generators: Vec<Vec<f64>>,
    },
    /// A JSON file holding `{"windows": …, "generators": …}`.
    File {
        path: PathBuf,
    },
    /// Generators with cell values uniform in `[-1, 1]` on the dyadic grid.
    Random {
        count: usize,
    },
    ExampleSet {
        count: usize,
    },
    /// The baker's-map orbit of `x0 ≡ 1/2`.
    AlspachOrbit {
        steps: usize,
        #[serde(default)]
        policy: ExhaustionPolicy,
    },
}

/// A constant, or cell values on a dyadic grid that get refined to the
/// scenario resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartPoint {
    Constant(f64),
    Values(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    windows: Vec<Vec<f64>>,
    members: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyFile {
    windows: Vec<Vec<f64>>,
    generators: Vec<Vec<f64>>,
}

/// Seed, grid size and file access shared by every source in one run.
pub struct Inputs<'a> {
    pub seed: u64,
    pub resolution: Option<usize>,
    pub base_dir: &'a Path,
    /// SHA-256 of every file read, keyed by the path as written.
    pub digests: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl FamilySource {
    pub fn needs_resolution(&self) -> bool {
        matches!(
            self,
            FamilySource::ExampleSet { .. } | FamilySource::Dominated { .. }
        )
    }

    pub fn check(&self) -> Result<(), String> {
        match self {
            FamilySource::Spike { n_max: 0 } => Err("n_max must be at least 1".into()),
            FamilySource::ExampleSet { count: 0 } | FamilySource::Dominated { count: 0 } => {
                Err("count must be at least 1".into())
            }
            FamilySource::Inline { windows, members } => {
                build_family("inline", windows.clone(), members.clone()).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, inputs: &mut Inputs) -> Result<FunctionFamily, RunError> {
        Ok(match self {
            FamilySource::Spike { n_max } => spike_family(*n_max),
            FamilySource::ExampleSet { count } => {
                sample_example_set(inputs.seed, *count, inputs.cells()?)?
            }
            FamilySource::Dominated { count } => {
                dominated_family(inputs.seed, *count, inputs.cells()?.trailing_zeros())
            }
            FamilySource::DisjointHalves => disjoint_halves(),
            FamilySource::Inline { windows, members } => {
                build_family("inline", windows.clone(), members.clone()).map_err(RunError::Input)?
            }
            FamilySource::File { path } => {
                let doc: FamilyFile = inputs.read_json(path)?;
                build_family(&path.display().to_string(), doc.windows, doc.members)
                    .map_err(RunError::Input)?
            }
        })
    }
}

impl BodySource {
    pub fn needs_resolution(&self) -> bool {
        matches!(
            self,
            BodySource::Random { .. }
                | BodySource::ExampleSet { .. }
                | BodySource::AlspachOrbit { .. }
        )
    }

    pub fn check(&self) -> Result<(), String> {
        match self {
            BodySource::Random { count: 0 } | BodySource::ExampleSet { count: 0 } => {
                Err("count must be at least 1".into())
            }
            BodySource::AlspachOrbit { steps: 0, .. } => Err("steps must be at least 1".into()),
            BodySource::Inline {
                windows,
                generators,
            } => build_body("inline", windows.clone(), generators.clone()).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn build(&self, inputs: &mut Inputs) -> Result<ConvexBody, RunError> {
        Ok(match self {
            BodySource::Inline {
                windows,
                generators,
            } => build_body("inline", windows.clone(), generators.clone())
                .map_err(RunError::Input)?,
            BodySource::File { path } => {
                let doc: BodyFile = inputs.read_json(path)?;
                build_body(&path.display().to_string(), doc.windows, doc.generators)
                    .map_err(RunError::Input)?
            }
            BodySource::Random { count } => {
                let cells = inputs.cells()?;
                let partition = Arc::new(Partition::dyadic(cells.trailing_zeros()));
                let generators = (0..*count)
                    .map(|i| {
                        let mut r = rng::stream(inputs.seed, i as u64);
                        let values = (0..cells).map(|_| r.random_range(-1.0..=1.0)).collect();
                        GridFunction::new(partition.clone(), values)
                    })
                    .collect::<Result<_, _>>()?;
                ConvexBody::new(format!("random(seed={})", inputs.seed), generators)?
            }
            BodySource::ExampleSet { count } => {
                let family = sample_example_set(inputs.seed, *count, inputs.cells()?)?;
                ConvexBody::new(family.label.clone(), family.members().to_vec())?
            }
            BodySource::AlspachOrbit { steps, policy } => {
                let x0 = StartPoint::Constant(0.5).build(inputs.cells()?)?;
                let orbit = alspach_orbit(&x0, *steps, *policy)?;
                ConvexBody::new(format!("alspach-orbit(steps={steps})"), orbit)?
            }
        })
    }
}

impl StartPoint {
    pub fn check(&self) -> Result<(), String> {
        match self {
            StartPoint::Constant(v) if !v.is_finite() => Err("must be finite".into()),
            StartPoint::Values(v) if !v.len().is_power_of_two() => {
                Err(format!("{} values is not a power of two", v.len()))
            }
            StartPoint::Values(v) if v.iter().any(|x| !x.is_finite()) => {
                Err("values must be finite".into())
            }
            _ => Ok(()),
        }
    }

    /// The start point on the dyadic grid with `cells` cells.
    pub fn build(&self, cells: usize) -> Result<GridFunction, RunError> {
        let base = match self {
            StartPoint::Constant(v) => GridFunction::dyadic(vec![*v])?,
            StartPoint::Values(v) => GridFunction::dyadic(v.clone())?,
        };
        let have = base.values().len();
        if have > cells {
            return Err(RunError::Input(format!(
                "x0 has {have} cells, more than the resolution {cells}"
            )));
        }
        Ok(base.refine_dyadic((cells / have).trailing_zeros())?)
    }
}

impl Inputs<'_> {
    pub fn cells(&self) -> Result<usize, RunError> {
        self.resolution
            .ok_or_else(|| RunError::Input("this source needs a resolution".into()))
    }

    fn read_json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T, RunError> {
        let full = self.base_dir.join(path);
        let bytes = std::fs::read(&full).map_err(|source| RunError::Io {
            path: full.clone(),
            source,
        })?;
        self.digests
            .insert(path.display().to_string(), sha256_hex(&bytes));
        serde_json::from_slice(&bytes)
            .map_err(|e| RunError::Input(format!("{}: {e}", full.display())))
    }
}

fn build_family(
    label: &str,
    windows: Vec<Vec<f64>>,
    members: Vec<Vec<f64>>,
) -> Result<FunctionFamily, String> {
    if members.is_empty() {
        return Err("members must be nonempty".into());
    }
    let partition = Arc::new(Partition::new(windows).map_err(|e| e.to_string())?);
    let members = members
        .into_iter()
        .map(|v| GridFunction::new(partition.clone(), v))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    FunctionFamily::new(label, members).map_err(|e| e.to_string())
}

fn build_body(
    label: &str,
    windows: Vec<Vec<f64>>,
    generators: Vec<Vec<f64>>,
) -> Result<ConvexBody, String> {
    let family = build_family(label, windows, generators)?;
    ConvexBody::new(label, family.members().to_vec()).map_err(|e| e.to_string())
}
