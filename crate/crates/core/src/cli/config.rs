//! Job configuration: a TOML document naming the system, the objects to
//! check and the checks to run.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::genfun::parse_f2;
use crate::phase::{ExprMap, MapFamily, ParamTable, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Brackets,
    Symplectic,
    TimeCanonical,
    RecoverK,
    FlowMatch,
    GroupLaw,
    GeneratorExtract,
    Invariance,
    NoetherForward,
    NoetherReverse,
    InfinitesimalScaling,
}

impl CheckKind {
    pub const ALL: [CheckKind; 11] = [
        CheckKind::Brackets,
        CheckKind::Symplectic,
        CheckKind::TimeCanonical,
        CheckKind::RecoverK,
        CheckKind::FlowMatch,
        CheckKind::GroupLaw,
        CheckKind::GeneratorExtract,
        CheckKind::Invariance,
        CheckKind::NoetherForward,
        CheckKind::NoetherReverse,
        CheckKind::InfinitesimalScaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Brackets => "brackets",
            CheckKind::Symplectic => "symplectic",
            CheckKind::TimeCanonical => "time-canonical",
            CheckKind::RecoverK => "recover-k",
            CheckKind::FlowMatch => "flow-match",
            CheckKind::GroupLaw => "group-law",
            CheckKind::GeneratorExtract => "generator-extract",
            CheckKind::Invariance => "invariance",
            CheckKind::NoetherForward => "noether-forward",
            CheckKind::NoetherReverse => "noether-reverse",
            CheckKind::InfinitesimalScaling => "infinitesimal-scaling",
        }
    }

    pub fn from_name(name: &str) -> Option<CheckKind> {
        CheckKind::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            CheckKind::Brackets | CheckKind::Symplectic => 1e-10,
            CheckKind::TimeCanonical | CheckKind::RecoverK => 1e-7,
            CheckKind::FlowMatch | CheckKind::GroupLaw | CheckKind::Invariance => 1e-7,
            CheckKind::GeneratorExtract => 1e-8,
            CheckKind::NoetherForward | CheckKind::NoetherReverse => 1e-6,
            // relative spread of defect / ε²
            CheckKind::InfinitesimalScaling => 0.1,
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Points with `lo < expr < hi` are left out of the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exclusion {
    pub expr: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    /// `[lo, hi]` per coordinate in the order q1..qn, p1..pn.
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    pub t_range: [f64; 2],
    pub s_values: Vec<f64>,
    pub count: usize,
    pub seed: u64,
    pub exclude: Vec<Exclusion>,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            bounds: None,
            t_range: [0.0, 2.0],
            s_values: vec![-1.0, -0.5, 0.5, 1.0],
            count: 100,
            seed: 0,
            exclude: Vec::new(),
        }
    }
}

pub const DEFAULT_BOX: [f64; 2] = [-2.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    pub n: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<String>,
    /// 2n components `Q1..Qn, P1..Pn` in q, p, t.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// 2n components in q, p, t and the group parameter s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<String>>,
    /// Type-2 generating function in q, P, t.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generating_function: Option<String>,
    /// Expected new Hamiltonian in q, p, t, s; compared through its
    /// (q, p) gradient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_new_hamiltonian: Option<String>,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub tolerances: BTreeMap<CheckKind, f64>,
}

/// A configuration problem, located by the path of the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        let path = path.into();
        ConfigError {
            path: if path.is_empty() { "<root>".into() } else { path },
            message: message.into(),
        }
    }
}

impl JobConfig {
    pub fn from_toml(source: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(source).map_err(|e| ConfigError::new("", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            ConfigError::new(path, e.inner().message().to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    pub fn tolerance(&self, check: CheckKind) -> f64 {
        self.tolerances.get(&check).copied().unwrap_or_else(|| check.default_tolerance())
    }

    /// Parses every expression and checks that each requested check has
    /// its inputs.
    pub fn compile(&self) -> Result<Job, ConfigError> {
        let n = self.n;
        if n == 0 {
            return Err(ConfigError::new("n", "must be at least 1"));
        }
        let params: ParamTable = self.params.clone();
        for (name, v) in &params {
            if !v.is_finite() {
                return Err(ConfigError::new(format!("params.{name}"), "must be finite"));
            }
        }
        let field = |path: &str, src: &str, allow_s: bool| -> Result<ScalarField, ConfigError> {
            let f = ScalarField::parse(src, n, &params).map_err(|e| ConfigError::new(path, e.to_string()))?;
            if !allow_s && f.depends_on_s() {
                return Err(ConfigError::new(path, "the group parameter s is not allowed here"));
            }
            Ok(f)
        };
        let components = |path: &str, srcs: &[String], allow_s: bool| -> Result<ExprMap, ConfigError> {
            if srcs.len() != 2 * n {
                return Err(ConfigError::new(path, format!("needs {} components, got {}", 2 * n, srcs.len())));
            }
            let parsed = srcs
                .iter()
                .enumerate()
                .map(|(i, s)| field(&format!("{path}[{i}]"), s, allow_s))
                .collect::<Result<Vec<_>, _>>()?;
            ExprMap::new(parsed).map_err(|e| ConfigError::new(path, e.to_string()))
        };

        let hamiltonian = self.hamiltonian.as_deref().map(|s| field("hamiltonian", s, false)).transpose()?;
        let map = self.map.as_deref().map(|s| components("map", s, false)).transpose()?;
        let generator = self.generator.as_deref().map(|s| field("generator", s, false)).transpose()?;
        let family = self
            .family
            .as_deref()
            .map(|s| components("family", s, true).map(MapFamily::new))
            .transpose()?;
        let generating_function = self
            .generating_function
            .as_deref()
            .map(|s| parse_f2(s, n, &params).map_err(|e| ConfigError::new("generating_function", e.to_string())))
            .transpose()?;
        let expected_new_hamiltonian = self
            .expected_new_hamiltonian
            .as_deref()
            .map(|s| field("expected_new_hamiltonian", s, true))
            .transpose()?;

        if map.is_none() && generator.is_none() && family.is_none() && generating_function.is_none() {
            return Err(ConfigError::new(
                "",
                "at least one of map, generator, family or generating_function is required",
            ));
        }

        let s = &self.sampling;
        if let Some(bounds) = &s.bounds {
            if bounds.len() != 2 * n {
                return Err(ConfigError::new("sampling.box", format!("needs {} intervals, got {}", 2 * n, bounds.len())));
            }
            for (i, [lo, hi]) in bounds.iter().enumerate() {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(ConfigError::new(format!("sampling.box[{i}]"), "needs finite lo < hi"));
                }
            }
        }
        let [t0, t1] = s.t_range;
        if !(t0.is_finite() && t1.is_finite() && t0 <= t1) {
            return Err(ConfigError::new("sampling.t_range", "needs finite lo <= hi"));
        }
        if s.count == 0 {
            return Err(ConfigError::new("sampling.count", "must be at least 1"));
        }
        if let Some(i) = s.s_values.iter().position(|v| !v.is_finite()) {
            return Err(ConfigError::new(format!("sampling.s_values[{i}]"), "must be finite"));
        }
        let exclusions = s
            .exclude
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if e.lo.is_nan() || e.hi.is_nan() || e.lo >= e.hi {
                    return Err(ConfigError::new(format!("sampling.exclude[{i}]"), "needs lo < hi"));
                }
                Ok((field(&format!("sampling.exclude[{i}].expr"), &e.expr, false)?, e.lo, e.hi))
            })
            .collect::<Result<Vec<_>, _>>()?;

        for (check, tol) in &self.tolerances {
            if !(tol.is_finite() && *tol > 0.0) {
                return Err(ConfigError::new(format!("tolerances.{check}"), "must be positive and finite"));
            }
        }

        let has_subject = map.is_some() || generating_function.is_some() || family.is_some() || generator.is_some();
        for (i, check) in self.checks.iter().enumerate() {
            let path = format!("checks[{i}]");
            let missing = |what: &str| Err(ConfigError::new(path.clone(), format!("{check} needs {what}")));
            use CheckKind::*;
            let uses_s = match check {
                Brackets | Symplectic | TimeCanonical | Invariance | RecoverK => {
                    map.is_none() && generating_function.is_none()
                }
                FlowMatch | GroupLaw | GeneratorExtract => true,
                _ => false,
            };
            if uses_s && s.s_values.is_empty() {
                return Err(ConfigError::new("sampling.s_values", format!("{check} needs at least one value of s")));
            }
            match check {
                Brackets | Symplectic | TimeCanonical if !has_subject => return missing("a map, family or generator"),
                Invariance if hamiltonian.is_none() => return missing("hamiltonian"),
                RecoverK if hamiltonian.is_none() => return missing("hamiltonian"),
                RecoverK if expected_new_hamiltonian.is_none() => return missing("expected_new_hamiltonian"),
                FlowMatch | GeneratorExtract if generator.is_none() || family.is_none() => {
                    return missing("generator and family")
                }
                GroupLaw | InfinitesimalScaling if generator.is_none() => return missing("generator"),
                NoetherForward | NoetherReverse if generator.is_none() || hamiltonian.is_none() => {
                    return missing("generator and hamiltonian")
                }
                _ => {}
            }
        }

        Ok(Job {
            config: self.clone(),
            n,
            hamiltonian,
            map,
            generator,
            family,
            generating_function,
            expected_new_hamiltonian,
            exclusions,
        })
    }
}

/// A validated configuration with every expression parsed.
#[derive(Debug, Clone)]
pub struct Job {
    pub config: JobConfig,
    pub n: usize,
    pub hamiltonian: Option<ScalarField>,
    pub map: Option<ExprMap>,
    pub generator: Option<ScalarField>,
    pub family: Option<MapFamily>,
    pub generating_function: Option<ScalarField>,
    pub expected_new_hamiltonian: Option<ScalarField>,
    pub exclusions: Vec<(ScalarField, f64, f64)>,
}

impl Job {
    pub fn bounds(&self) -> Vec<[f64; 2]> {
        self.config
            .sampling
            .bounds
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_BOX; 2 * self.n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
n = 1
map = ["2*q1", "p1"]
checks = ["brackets"]
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = JobConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.sampling, Sampling::default());
        assert_eq!(c.tolerance(CheckKind::Brackets), 1e-10);
        let job = c.compile().unwrap();
        assert_eq!(job.bounds(), vec![[-2.0, 2.0]; 2]);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = JobConfig::from_toml(MINIMAL).unwrap();
        c.tolerances.insert(CheckKind::Brackets, 1e-6);
        c.sampling.exclude.push(Exclusion { expr: "q1".into(), lo: -0.1, hi: 0.1 });
        let again = JobConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    fn err(src: &str) -> ConfigError {
        match JobConfig::from_toml(src) {
            Err(e) => e,
            Ok(c) => c.compile().unwrap_err(),
        }
    }

    #[test]
    fn errors_carry_field_paths() {
        assert_eq!(err("n = 1\nmap = [\"q1\", \"p1\"]\nchecks = [\"bracket\"]\n").path, "checks[0]");
        assert_eq!(err("n = 1\nmap = [\"q1\"]\nchecks = []\n").path, "map");
        assert_eq!(err("n = 1\nmap = [\"q1\", \"x*p1\"]\nchecks = []\n").path, "map[1]");
        assert_eq!(err("n = 1\nmap = [\"q1\", \"p1\"]\nchecks = [\"invariance\"]\n").path, "checks[0]");
        assert_eq!(
            err("n = 1\nmap = [\"q1\", \"p1\"]\nchecks = []\n[sampling]\nt_range = [2.0, 1.0]\n").path,
            "sampling.t_range"
        );
        assert_eq!(err("n = 1\nmap = [\"q1\", \"p1\"]\nchecks = []\n[sampling]\nbogus = 1\n").path, "sampling.bogus");
        assert_eq!(err("n = 1\nchecks = []\n").path, "<root>");
        assert_eq!(err("n = 1\nhamiltonian = \"s*p1\"\ngenerator = \"p1\"\nchecks = []\n").path, "hamiltonian");
        assert_eq!(err("n = 1\ngenerator = \"p1\"\nchecks = []\n[tolerances]\ngroup-law = -1.0\n").path, "tolerances.group-law");
    }

    #[test]
    fn check_names_are_stable() {
        for c in CheckKind::ALL {
            assert_eq!(CheckKind::from_name(c.name()), Some(c));
        }
    }
}
