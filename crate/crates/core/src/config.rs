//! Scenario files (TOML) and dotted-key overrides.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bohmian::BohmianConfiguration;
use crate::collapse::CollapseParams;
use crate::grid::Grid;
use crate::spectral::separable_sum;
use crate::wavefunction::{gaussian_packet, superpose, symmetrize, Packet, Region, WaveFunction};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("override {key}: {message}")]
    Override { key: String, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub particles: usize,
    pub points: usize,
    pub box_length: f64,
}

/// Single-particle external potential, applied to every particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Free,
    /// `½ ω² (x - center)²`
    Harmonic {
        omega: f64,
        #[serde(default)]
        center: f64,
    },
    /// `barrier · ((2x/separation)² - 1)²`: minima at `±separation/2`, a
    /// hump of height `barrier` at the origin.
    DoubleWell { barrier: f64, separation: f64 },
    /// One value per axis point.
    Tabulated { values: Vec<f64> },
}

impl PotentialSpec {
    pub fn axis_values(&self, grid: &Grid) -> Vec<f64> {
        let xs = grid.coordinates();
        match self {
            PotentialSpec::Free => vec![0.0; xs.len()],
            PotentialSpec::Harmonic { omega, center } => xs
                .iter()
                .map(|x| 0.5 * omega * omega * (x - center) * (x - center))
                .collect(),
            PotentialSpec::DoubleWell { barrier, separation } => xs
                .iter()
                .map(|x| {
                    let u = 2.0 * x / separation;
                    barrier * (u * u - 1.0) * (u * u - 1.0)
                })
                .collect(),
            PotentialSpec::Tabulated { values } => values.clone(),
        }
    }
}

/// Pair potential `strength · exp(-d²/range²)` with minimum-image `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairInteraction {
    pub pairs: Vec<[usize; 2]>,
    pub strength: f64,
    pub range: f64,
}

/// Complex coefficient, written as `[re, im]` or as a plain real number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude(pub Complex64);

impl Serialize for Amplitude {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Amplitude {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Real(f64),
            Pair([f64; 2]),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Real(re) => Amplitude(Complex64::new(re, 0.0)),
            Raw::Pair([re, im]) => Amplitude(Complex64::new(re, im)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBranch {
    pub amplitude: Amplitude,
    /// One packet per particle.
    pub packets: Vec<Packet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub branches: Vec<InitialBranch>,
    #[serde(default)]
    pub symmetrized: bool,
    /// Fixed starting configuration instead of sampling from `|Ψ|²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BohmianSpec {
    /// Hold positions fixed; only the wave function evolves.
    #[serde(default)]
    pub freeze: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "one")]
    pub record_stride: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub name: String,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default = "one")]
    pub size: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_threshold")]
    pub resolution_threshold: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            size: 1,
            master_seed: 0,
            resolution_threshold: default_threshold(),
        }
    }
}

fn default_threshold() -> f64 {
    0.99
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Write a binary snapshot every this many steps; 0 disables.
    #[serde(default)]
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<PairInteraction>,
    pub initial: InitialSpec,
    pub collapse: CollapseParams,
    #[serde(default)]
    pub bohmian: BohmianSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub branches: Vec<BranchSpec>,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ScenarioConfig {
    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.grid.particles, self.grid.points, self.grid.box_length).map_err(|e| invalid("grid", e))
    }

    /// Number of steps covering `duration`.
    pub fn steps(&self) -> usize {
        (self.time.duration / self.time.dt).round() as usize
    }

    /// Total potential on the configuration grid, or `None` when it vanishes.
    pub fn potential_field(&self, grid: &Grid) -> Option<Vec<f64>> {
        let free = matches!(self.potential, PotentialSpec::Free);
        if free && self.interactions.is_empty() {
            return None;
        }
        let mut v = separable_sum(grid, &self.potential.axis_values(grid));
        for inter in &self.interactions {
            for (flat, value) in v.iter_mut().enumerate() {
                let idx = grid.unravel(flat);
                for &[i, j] in &inter.pairs {
                    let d = grid.min_image(grid.coordinate(idx[i]) - grid.coordinate(idx[j])) / inter.range;
                    *value += inter.strength * (-d * d).exp();
                }
            }
        }
        Some(v)
    }

    pub fn initial_state(&self) -> Result<WaveFunction, ConfigError> {
        let grid = self.grid()?;
        let components = self
            .initial
            .branches
            .iter()
            .enumerate()
            .map(|(i, b)| {
                gaussian_packet(&grid, &b.packets)
                    .map(|psi| (b.amplitude.0, psi))
                    .map_err(|e| invalid(format!("initial.branches[{i}].packets"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let psi = superpose(&components).map_err(|e| invalid("initial.branches", e))?;
        if self.initial.symmetrized {
            symmetrize(&psi).map_err(|e| invalid("initial.symmetrized", e))
        } else {
            Ok(psi)
        }
    }

    pub fn initial_positions(&self) -> Result<Option<BohmianConfiguration>, ConfigError> {
        let grid = self.grid()?;
        self.initial
            .positions
            .as_ref()
            .map(|p| BohmianConfiguration::new(&grid, p.clone(), 0.0).map_err(|e| invalid("initial.positions", e)))
            .transpose()
    }

    pub fn regions(&self) -> Vec<Region> {
        self.branches.iter().map(|b| b.region.clone()).collect()
    }

    pub fn branch_index(&self, name: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.name == name)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        let grid = self.grid()?;
        let n = grid.particles();

        if let PotentialSpec::Tabulated { values } = &self.potential {
            if values.len() != grid.points() {
                return Err(invalid(
                    "potential.values",
                    format!("expected {} values, got {}", grid.points(), values.len()),
                ));
            }
        }
        if self.potential.axis_values(&grid).iter().any(|v| !v.is_finite()) {
            return Err(invalid("potential", "non-finite potential values"));
        }
        for (k, inter) in self.interactions.iter().enumerate() {
            let key = format!("interactions[{k}]");
            if !(inter.range.is_finite() && inter.range > 0.0) {
                return Err(invalid(format!("{key}.range"), "must be positive"));
            }
            if !inter.strength.is_finite() {
                return Err(invalid(format!("{key}.strength"), "must be finite"));
            }
            if inter.pairs.iter().any(|&[i, j]| i >= n || j >= n || i == j) {
                return Err(invalid(
                    format!("{key}.pairs"),
                    format!("pairs must name two distinct particles below {n}"),
                ));
            }
        }

        if self.initial.branches.is_empty() {
            return Err(invalid("initial.branches", "at least one branch is required"));
        }
        for (i, b) in self.initial.branches.iter().enumerate() {
            if !(b.amplitude.0.re.is_finite() && b.amplitude.0.im.is_finite()) {
                return Err(invalid(format!("initial.branches[{i}].amplitude"), "must be finite"));
            }
        }
        self.initial_state()?;
        if let Some(p) = &self.initial.positions {
            if p.len() != n {
                return Err(invalid(
                    "initial.positions",
                    format!("expected {n} positions, got {}", p.len()),
                ));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(invalid("initial.positions", "must be finite"));
            }
        }

        self.collapse.validate().map_err(|e| invalid("collapse", e))?;

        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return Err(invalid("time.dt", "must be positive"));
        }
        if !(t.duration.is_finite() && t.duration > 0.0) {
            return Err(invalid("time.duration", "must be positive"));
        }
        let steps = t.duration / t.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(invalid("time.duration", "must be a whole number of steps dt"));
        }
        if t.record_stride == 0 {
            return Err(invalid("time.record_stride", "must be at least 1"));
        }

        for (i, b) in self.branches.iter().enumerate() {
            b.region
                .validate(&grid)
                .map_err(|e| invalid(format!("branches[{i}].region"), e))?;
            for (j, other) in self.branches.iter().enumerate().skip(i + 1) {
                if b.name == other.name {
                    return Err(invalid(format!("branches[{j}].name"), "duplicate branch name"));
                }
                if !b.region.disjoint_from(&other.region) {
                    return Err(invalid(
                        format!("branches[{j}].region"),
                        format!("overlaps branch {:?}", b.name),
                    ));
                }
            }
        }

        let e = &self.ensemble;
        if e.size == 0 {
            return Err(invalid("ensemble.size", "must be at least 1"));
        }
        if !(e.resolution_threshold > 0.5 && e.resolution_threshold <= 1.0) {
            return Err(invalid("ensemble.resolution_threshold", "must lie in (0.5, 1]"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }
}

/// Reads, overrides and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text, overrides)
}

pub fn parse_scenario_str(text: &str, overrides: &[(String, String)]) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let config = if overrides.is_empty() {
        config
    } else {
        // overrides apply to the defaulted tree, so every default is addressable
        let mut tree = toml::Value::try_from(&config).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut tree, key, value)?;
        }
        tree.try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
    };
    config.validate()?;
    Ok(config)
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Override {
        key: s.to_string(),
        message: "expected key=value".into(),
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn apply_override(tree: &mut toml::Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    let fail = |message: String| ConfigError::Override {
        key: key.to_string(),
        message,
    };
    let mut node = tree;
    for part in key.split('.') {
        node = match node {
            toml::Value::Table(t) => t
                .get_mut(part)
                .ok_or_else(|| fail(format!("no key {part:?} in the scenario")))?,
            toml::Value::Array(a) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| fail(format!("{part:?} is not an array index")))?;
                let len = a.len();
                a.get_mut(i)
                    .ok_or_else(|| fail(format!("index {i} out of range (length {len})")))?
            }
            _ => return Err(fail(format!("{part:?} addresses inside a scalar"))),
        };
    }
    let parsed = parse_value(raw);
    let value = match (&*node, parsed) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (old, new) if std::mem::discriminant(old) == std::mem::discriminant(&new) => new,
        (toml::Value::String(_), _) => toml::Value::String(raw.to_string()),
        (old, new) => {
            return Err(fail(format!(
                "expected a {} but got the {} {raw:?}",
                old.type_str(),
                new.type_str()
            )))
        }
    };
    *node = value;
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "free"

[grid]
particles = 1
points = 256
box_length = 32.0

[[initial.branches]]
amplitude = 1.0
packets = [{ center = 0.0, width = 1.0 }]

[collapse]
gamma_L = 0.5
a_L = 2.0

[time]
dt = 0.01
duration = 1.0
"#;

    #[test]
    fn defaults_are_filled() {
        let c = parse_scenario_str(MINIMAL, &[]).unwrap();
        assert_eq!(c.time.record_stride, 1);
        assert!(!c.initial.symmetrized);
        assert_eq!(c.potential, PotentialSpec::Free);
        assert_eq!(c.ensemble.resolution_threshold, 0.99);
        assert!(!c.collapse.renormalize_each_step);
        assert_eq!(c.steps(), 100);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("gamma_L", "gamm_L");
        let err = parse_scenario_str(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("gamm_L"), "{err}");
    }

    #[test]
    fn override_sets_value() {
        let ov = vec![parse_assignment("collapse.gamma_L=0.0").unwrap()];
        let c = parse_scenario_str(MINIMAL, &ov).unwrap();
        assert_eq!(c.collapse.gamma_l, 0.0);

        let ov = vec![
            parse_assignment("grid.points=512").unwrap(),
            parse_assignment("collapse.a_L=3").unwrap(),
        ];
        let c = parse_scenario_str(MINIMAL, &ov).unwrap();
        assert_eq!(c.grid.points, 512);
        assert_eq!(c.collapse.a_l, 3.0);
    }

    #[test]
    fn override_errors_name_the_key() {
        let ov = vec![parse_assignment("collapse.gamma=1").unwrap()];
        let err = parse_scenario_str(MINIMAL, &ov).unwrap_err().to_string();
        assert!(err.contains("collapse.gamma"), "{err}");
        let ov = vec![parse_assignment("grid.points=big").unwrap()];
        assert!(parse_scenario_str(MINIMAL, &ov).is_err());
        assert!(parse_assignment("novalue").is_err());
    }

    #[test]
    fn invariant_violations_carry_key_path() {
        let text = MINIMAL.replace("duration = 1.0", "duration = 1.005");
        let err = parse_scenario_str(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("time.duration"), "{err}");

        let text = format!(
            "{MINIMAL}\n[[branches]]\nname = \"a\"\nregion = [[-16.0, 1.0]]\n[[branches]]\nname = \"b\"\nregion = [[0.0, 16.0]]\n"
        );
        let err = parse_scenario_str(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("branches[1].region"), "{err}");
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{MINIMAL}\n[potential]\nkind = \"double_well\"\nbarrier = 2.0\nseparation = 16.0\n\n[[branches]]\nname = \"left\"\nregion = [[-16.0, 0.0]]\n"
        );
        let c = parse_scenario_str(&text, &[]).unwrap();
        let again = parse_scenario_str(&c.to_toml(), &[]).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn double_well_shape() {
        let grid = Grid::new(1, 64, 32.0).unwrap();
        let v = PotentialSpec::DoubleWell {
            barrier: 2.0,
            separation: 16.0,
        }
        .axis_values(&grid);
        assert_eq!(v[32], 2.0);
        assert_eq!(v[16], 0.0);
        assert_eq!(v[48], 0.0);
    }

    #[test]
    fn pair_interaction_field() {
        let text = format!(
            "{}\n[[interactions]]\npairs = [[0, 1]]\nstrength = 3.0\nrange = 1.0\n",
            MINIMAL.replace("particles = 1", "particles = 2").replace(
                "packets = [{ center = 0.0, width = 1.0 }]",
                "packets = [{ center = 0.0, width = 1.0 }, { center = 2.0, width = 1.0 }]"
            )
        );
        let c = parse_scenario_str(&text, &[]).unwrap();
        let grid = c.grid().unwrap();
        let v = c.potential_field(&grid).unwrap();
        assert_eq!(v[grid.ravel(&[10, 10])], 3.0);
        assert!((v[grid.ravel(&[10, 18])] - 3.0 * (-1.0f64).exp()).abs() < 1e-12);
    }
}
