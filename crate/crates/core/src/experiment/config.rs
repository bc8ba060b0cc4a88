use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diffusion::{AffinityTransforms, DiffusionConfig};
use crate::error::{Error, Result};
use crate::frontend::{FrontendParams, GUIDANCE_CHANNELS};
use crate::synth::{preset, NoiseParams, SamplePattern, SceneSpec, PRESET_NAMES};

/// A scene given either by preset name or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneRef {
    Preset(String),
    Inline(SceneSpec),
}

impl SceneRef {
    pub fn resolve(&self) -> Result<SceneSpec> {
        match self {
            SceneRef::Preset(name) => preset(name),
            SceneRef::Inline(spec) => Ok(spec.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoarseSource {
    /// Inverse-distance interpolation of the (possibly noisy) seeds.
    Idw,
    /// Ground truth with smooth and white multiplicative error, standing in
    /// for a learned coarse prediction.
    PerturbedTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoarseParams {
    pub source: CoarseSource,
    /// Peak relative error of the perturbed-truth source.
    pub amplitude: f64,
}

impl Default for CoarseParams {
    fn default() -> Self {
        Self {
            source: CoarseSource::PerturbedTruth,
            amplitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalSource {
    /// Plane fits on the coarse depth.
    Estimated,
    /// The scene's exact normals.
    GroundTruth,
}

/// One swept parameter: a dotted path into the config and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenes: Vec<SceneRef>,
    pub sampling: SamplePattern,
    pub noise: NoiseParams,
    pub coarse: CoarseParams,
    pub normals: NormalSource,
    pub frontend: FrontendParams,
    pub diffusion: DiffusionConfig,
    pub affinity: AffinityTransforms,
    pub sweeps: Vec<Sweep>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Write PNG and lossless maps for every scene next to the CSV.
    pub write_images: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenes: PRESET_NAMES
                .iter()
                .map(|n| SceneRef::Preset(n.to_string()))
                .collect(),
            sampling: SamplePattern::default(),
            noise: NoiseParams::default(),
            coarse: CoarseParams::default(),
            normals: NormalSource::GroundTruth,
            frontend: FrontendParams::default(),
            diffusion: DiffusionConfig::default(),
            affinity: AffinityTransforms::default(),
            sweeps: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            write_images: true,
        }
    }
}

/// A config that has passed parsing, plus the keys it ignored.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}:{msg}", path.display())),
        other => other,
    })
}

/// Parses and validates a JSON config. Errors carry `line:column` when the
/// JSON itself is at fault.
pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let anchored =
        |e: serde_json::Error| Error::Config(format!("{}:{}: {e}", e.line(), e.column()));
    let raw: Value = serde_json::from_str(text).map_err(anchored)?;
    let config: ExperimentConfig = serde_json::from_str(text).map_err(anchored)?;
    let known = serde_json::to_value(&config).expect("config serializes");
    let mut warnings = Vec::new();
    unknown_keys(&raw, &known, "", &mut warnings);
    config.validate()?;
    Ok(LoadedConfig { config, warnings })
}

fn unknown_keys(raw: &Value, known: &Value, prefix: &str, out: &mut Vec<String>) {
    match (raw, known) {
        (Value::Object(r), Value::Object(k)) => {
            for (key, value) in r {
                let path = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                match k.get(key) {
                    Some(sub) => unknown_keys(value, sub, &path, out),
                    None if value.is_null() => {}
                    None => out.push(format!("unknown key '{path}' ignored")),
                }
            }
        }
        (Value::Array(r), Value::Array(k)) if r.len() == k.len() => {
            for (i, (a, b)) in r.iter().zip(k).enumerate() {
                unknown_keys(a, b, &format!("{prefix}[{i}]"), out);
            }
        }
        _ => {}
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        if self.scenes.is_empty() {
            return Err(Error::Config("at least one scene is required".into()));
        }
        for scene in &self.scenes {
            scene.resolve()?.validate().map_err(cfg)?;
        }
        self.sampling.validate().map_err(cfg)?;
        self.noise.validate().map_err(cfg)?;
        self.diffusion.validate().map_err(cfg)?;
        self.affinity
            .validate(Some(GUIDANCE_CHANNELS))
            .map_err(cfg)?;
        let f = &self.frontend;
        if f.k == 0 || f.w == 0 || !(f.p >= 0.0) || !(f.b > 0.0) || !(f.depth_max > 0.0) {
            return Err(Error::Config(
                "frontend needs k ≥ 1, w ≥ 1, p ≥ 0, b > 0 and depth_max > 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.coarse.amplitude) {
            return Err(Error::Config(format!(
                "coarse amplitude must lie in [0, 1), got {}",
                self.coarse.amplitude
            )));
        }
        let base = serde_json::to_value(self).expect("config serializes");
        for sweep in &self.sweeps {
            if sweep.values.is_empty() {
                return Err(Error::Config(format!(
                    "sweep over '{}' has no values",
                    sweep.parameter
                )));
            }
            if sweep.parameter.starts_with("sweeps") {
                return Err(Error::Config("sweeps cannot sweep themselves".into()));
            }
            if lookup(&base, &sweep.parameter).is_none() {
                return Err(Error::Config(format!(
                    "sweep parameter '{}' does not name a config key",
                    sweep.parameter
                )));
            }
        }
        Ok(())
    }

    /// Every combination of sweep values, first sweep outermost. A config with
    /// no sweeps yields itself once.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let mut points = vec![SweepPoint {
            overrides: Vec::new(),
            config: self.clone(),
        }];
        for sweep in &self.sweeps {
            let mut next = Vec::with_capacity(points.len() * sweep.values.len());
            for point in &points {
                for value in &sweep.values {
                    let mut tree = serde_json::to_value(&point.config).expect("config serializes");
                    *lookup_mut(&mut tree, &sweep.parameter).ok_or_else(|| {
                        Error::Config(format!("unknown sweep parameter '{}'", sweep.parameter))
                    })? = value.clone();
                    let mut config: ExperimentConfig =
                        serde_json::from_value(tree).map_err(|e| {
                            Error::Config(format!(
                                "sweep value {value} for '{}': {e}",
                                sweep.parameter
                            ))
                        })?;
                    config.sweeps.clear();
                    config.validate().map_err(|e| {
                        Error::Config(format!(
                            "sweep value {value} for '{}': {e}",
                            sweep.parameter
                        ))
                    })?;
                    let mut overrides = point.overrides.clone();
                    overrides.push((sweep.parameter.clone(), value.clone()));
                    next.push(SweepPoint { overrides, config });
                }
            }
            points = next;
        }
        for p in &mut points {
            p.config.sweeps.clear();
        }
        Ok(points)
    }
}

/// One concrete configuration of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub overrides: Vec<(String, Value)>,
    pub config: ExperimentConfig,
}

impl SweepPoint {
    /// `path=value` pairs joined by commas; empty without overrides.
    pub fn label(&self) -> String {
        self.overrides
            .iter()
            .map(|(p, v)| format!("{p}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn lookup<'a>(tree: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .try_fold(tree, |node, key| node.as_object()?.get(key))
}

fn lookup_mut<'a>(tree: &'a mut Value, path: &str) -> Option<&'a mut Value> {
    path.split('.')
        .try_fold(tree, |node, key| node.as_object_mut()?.get_mut(key))
}
