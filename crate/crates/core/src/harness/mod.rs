//! Experiment drivers with seed-stamped outputs.
//!
//! Every run produces an [`ExperimentReport`]; [`write_outputs`] lays it out
//! as `manifest.json`, `summary.json`, `series/*.csv` and `grids/*.bin`.

mod ensembles;
mod linearity;
mod scenes;
mod speed;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Environment;
use crate::error::{Error, Result};
use crate::measurement::NoiseModel;
use crate::optimize::ControllerParams;
use crate::physics::FieldMap;
use crate::synth::{gen_iid, GeometricScene, IidEnvSpec, GENERATOR_VERSION};

pub use ensembles::{
    exp_measurability, exp_pi_bound, exp_quadratic, exp_two_approx, line_angles, theorem_instance,
    MeasurabilityOptions, PiBoundOptions, QuadraticOptions, TwoApproxOptions,
};
pub use linearity::{
    calibrate_linearity, exp_linearity, linearity_errors, linearity_noise, LinearityErrors,
    LinearityOptions, LINEARITY_NOISE_DB, LINEARITY_STRENGTH,
};
pub use scenes::{
    default_frequency_scene, exp_diffraction, exp_frequency, DiffractionOptions, FrequencyOptions,
};
pub use speed::{exp_opt_speed, OptSpeedOptions};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Linearity,
    Measurability,
    Quadratic,
    OptSpeed,
    Frequency,
    PiBound,
    TwoApprox,
    Diffraction,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 8] = [
        ExperimentName::Linearity,
        ExperimentName::Measurability,
        ExperimentName::Quadratic,
        ExperimentName::OptSpeed,
        ExperimentName::Frequency,
        ExperimentName::PiBound,
        ExperimentName::TwoApprox,
        ExperimentName::Diffraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Linearity => "linearity",
            ExperimentName::Measurability => "measurability",
            ExperimentName::Quadratic => "quadratic",
            ExperimentName::OptSpeed => "opt_speed",
            ExperimentName::Frequency => "frequency",
            ExperimentName::PiBound => "pi_bound",
            ExperimentName::TwoApprox => "two_approx",
            ExperimentName::Diffraction => "diffraction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s.replace('-', "_"))
    }
}

/// Where an experiment's environment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSource {
    Iid(IidEnvSpec),
    SceneFile(PathBuf),
    Scene(GeometricScene),
}

impl EnvSource {
    pub fn scene(&self) -> Result<Option<GeometricScene>> {
        match self {
            EnvSource::Iid(_) => Ok(None),
            EnvSource::Scene(s) => {
                s.validate()?;
                Ok(Some(s.clone()))
            }
            EnvSource::SceneFile(p) => Ok(Some(GeometricScene::from_json(&fs::read_to_string(p)?)?)),
        }
    }

    pub fn iid(&self) -> Option<&IidEnvSpec> {
        match self {
            EnvSource::Iid(s) => Some(s),
            _ => None,
        }
    }

    /// Environment at `frequency` (only used for scenes).
    pub fn environment(&self, frequency: f64) -> Result<Environment> {
        match self {
            EnvSource::Iid(s) => gen_iid(s),
            _ => crate::synth::gen_geometric(&self.scene()?.expect("scene source"), frequency),
        }
    }
}

/// Experiment-specific knobs; only the block matching `name` is read.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentOptions {
    pub linearity: LinearityOptions,
    pub measurability: MeasurabilityOptions,
    pub quadratic: QuadraticOptions,
    pub opt_speed: OptSpeedOptions,
    pub frequency: FrequencyOptions,
    pub pi_bound: PiBoundOptions,
    pub two_approx: TwoApproxOptions,
    pub diffraction: DiffractionOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    #[serde(default)]
    pub env: Option<EnvSource>,
    /// Overrides the experiment's default noise model.
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub controller: ControllerParams,
    /// Overrides the experiment's default trial count.
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: ExperimentOptions,
}

impl ExperimentSpec {
    pub fn new(name: ExperimentName, seed: u64) -> Self {
        Self {
            name,
            env: None,
            noise: None,
            controller: ControllerParams::default(),
            trials: None,
            output_dir: None,
            seed,
            options: ExperimentOptions::default(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One checked property of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// Reported-only properties never affect the exit status.
    pub asserted: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: ExperimentName,
    pub seed: u64,
    pub properties: Vec<PropertyCheck>,
    pub metrics: serde_json::Map<String, serde_json::Value>,
    pub series: Vec<Series>,
    #[serde(skip)]
    pub grids: Vec<(String, FieldMap)>,
}

impl ExperimentReport {
    fn new(name: ExperimentName, seed: u64) -> Self {
        Self {
            name,
            seed,
            properties: Vec::new(),
            metrics: serde_json::Map::new(),
            series: Vec::new(),
            grids: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.properties.push(PropertyCheck {
            name: name.into(),
            passed,
            asserted: true,
            detail,
        });
    }

    fn note(&mut self, name: &str, passed: bool, detail: String) {
        self.properties.push(PropertyCheck {
            name: name.into(),
            passed,
            asserted: false,
            detail,
        });
    }

    fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics.insert(
            key.into(),
            serde_json::to_value(value).expect("metric serializes"),
        );
    }

    pub fn property(&self, name: &str) -> Option<&PropertyCheck> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn metric_f64(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(|v| v.as_f64())
    }

    /// True when every asserted property passed.
    pub fn passed(&self) -> bool {
        self.properties.iter().filter(|p| p.asserted).all(|p| p.passed)
    }
}

/// Deterministic per-trial seed, independent across `tag`s.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(tag);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.name {
        ExperimentName::Linearity => exp_linearity(spec),
        ExperimentName::Measurability => exp_measurability(spec),
        ExperimentName::Quadratic => exp_quadratic(spec),
        ExperimentName::OptSpeed => exp_opt_speed(spec),
        ExperimentName::Frequency => exp_frequency(spec),
        ExperimentName::PiBound => exp_pi_bound(spec),
        ExperimentName::TwoApprox => exp_two_approx(spec),
        ExperimentName::Diffraction => exp_diffraction(spec),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    seed: u64,
    tool_version: &'a str,
    generator_version: &'a str,
    spec: &'a ExperimentSpec,
}

#[derive(Serialize)]
struct Summary<'a> {
    passed: bool,
    #[serde(flatten)]
    report: &'a ExperimentReport,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes the run directory. Files are a pure function of `spec` and `report`.
pub fn write_outputs(dir: &Path, spec: &ExperimentSpec, report: &ExperimentReport) -> Result<()> {
    if report.name != spec.name {
        return Err(Error::InvalidArgument("report does not belong to this spec".into()));
    }
    fs::create_dir_all(dir.join("series"))?;
    fs::create_dir_all(dir.join("grids"))?;
    let manifest = Manifest {
        experiment: spec.name.as_str(),
        seed: spec.seed,
        tool_version: TOOL_VERSION,
        generator_version: GENERATOR_VERSION,
        spec,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let summary = Summary {
        passed: report.passed(),
        report,
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    for s in &report.series {
        let mut w = create(&dir.join("series").join(format!("{}.csv", s.name)))?;
        s.write_csv(&mut w)?;
        w.flush()?;
    }
    for (name, map) in &report.grids {
        let mut w = create(&dir.join("grids").join(format!("{name}.bin")))?;
        map.write_bin(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in ExperimentName::ALL {
            assert_eq!(ExperimentName::parse(e.as_str()), Some(e));
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{}\"", e.as_str()));
        }
        assert_eq!(ExperimentName::parse("opt-speed"), Some(ExperimentName::OptSpeed));
        assert_eq!(ExperimentName::parse("nope"), None);
    }

    #[test]
    fn minimal_spec_parses() {
        let spec = ExperimentSpec::from_json(r#"{"name": "pi_bound", "seed": 3}"#).unwrap();
        assert_eq!(spec.seed, 3);
        assert_eq!(spec.options.pi_bound, PiBoundOptions::default());
        let spec = ExperimentSpec::from_json(
            r#"{"name": "quadratic", "env": {"iid": {"n_elements": 4, "element_sigma": 1.0,
                "baseline_magnitude": 1.0, "seed": 2}}, "options": {"quadratic": {"n_elements": 64}}}"#,
        )
        .unwrap();
        assert_eq!(spec.options.quadratic.n_elements, 64);
        assert_eq!(spec.env.unwrap().iid().unwrap().n_elements, 4);
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..50).map(|i| derive_seed(1, 0, i)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 50);
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(9, 4, 7), derive_seed(9, 4, 7));
    }

    #[test]
    fn outputs_layout_and_determinism() {
        let mut spec = ExperimentSpec::new(ExperimentName::PiBound, 11);
        spec.options.pi_bound = PiBoundOptions {
            small_instances: 20,
            large_sizes: vec![64],
            large_instances: 3,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let read_all = |d: &Path| {
            let mut out = Vec::new();
            for rel in ["manifest.json", "summary.json", "series/pi_bound_ratios.csv"] {
                out.push(fs::read(d.join(rel)).unwrap());
            }
            out
        };
        let report = run_experiment(&spec).unwrap();
        assert!(report.passed());
        write_outputs(dir.path(), &spec, &report).unwrap();
        let first = read_all(dir.path());
        write_outputs(dir.path(), &spec, &run_experiment(&spec).unwrap()).unwrap();
        assert_eq!(first, read_all(dir.path()));
        let manifest: serde_json::Value = serde_json::from_slice(&first[0]).unwrap();
        assert_eq!(manifest["seed"], 11);
        assert_eq!(manifest["tool_version"], TOOL_VERSION);
        let back: ExperimentSpec = serde_json::from_value(manifest["spec"].clone()).unwrap();
        assert_eq!(back, spec);
    }
}
