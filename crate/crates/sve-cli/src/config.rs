//! Scenario files: flat `key = value` text, one pair per line, `#` comments.
//!
//! Every key is spelled exactly as in the tables of physical parameters
//! (`Cf`, `Ag`, `Hstar`, …); unknown or duplicate keys are rejected with the
//! offending line number so a typo cannot silently fall back to a default.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use sve_control::{
    BoundaryTerms, Controller, EquilibriumSetup, PhysicalParams, SimConfig,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`, got `{text}`")]
    Syntax {
        path: String,
        line: usize,
        text: String,
    },
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: duplicate key `{key}`")]
    DuplicateKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: invalid value `{value}` for `{key}`: {reason}")]
    BadValue {
        path: String,
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("{path}: missing required key `{key}`")]
    MissingKey { path: String, key: String },
    #[error("{path}: invalid scenario: {reason}")]
    Invalid { path: String, reason: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A fully parsed scenario, before command-line overrides.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// File stem, used to name per-scenario output directories.
    pub name: String,
    pub g: f64,
    pub cf: f64,
    pub ag: f64,
    pub pg: f64,
    pub hstar: f64,
    pub vstar: f64,
    pub bstar: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub q1: f64,
    pub q2: f64,
    pub cells: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub kernel_n: usize,
    pub kernel_tol: f64,
    pub controller: Controller,
    pub boundary_terms: BoundaryTerms,
    pub out_dir: Option<PathBuf>,
}

pub const KNOWN_KEYS: [&str; 19] = [
    "g",
    "Cf",
    "Ag",
    "pg",
    "Hstar",
    "Vstar",
    "Bstar",
    "rho1",
    "rho2",
    "q1",
    "q2",
    "cells",
    "cfl",
    "t_final",
    "kernel_n",
    "kernel_tol",
    "controller",
    "boundary_terms",
    "out_dir",
];

pub fn parse_controller(s: &str) -> Option<Controller> {
    match s {
        "none" => Some(Controller::None),
        "state" => Some(Controller::FullState),
        "output" => Some(Controller::OutputFeedback),
        _ => None,
    }
}

pub fn controller_name(c: Controller) -> &'static str {
    match c {
        Controller::None => "none",
        Controller::FullState => "state",
        Controller::OutputFeedback => "output",
    }
}

pub fn parse_boundary_terms(s: &str) -> Option<BoundaryTerms> {
    match s {
        "measured" => Some(BoundaryTerms::Measured),
        "estimated" => Some(BoundaryTerms::Estimated),
        _ => None,
    }
}

pub fn boundary_terms_name(b: BoundaryTerms) -> &'static str {
    match b {
        BoundaryTerms::Measured => "measured",
        BoundaryTerms::Estimated => "estimated",
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: shown.clone(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario(&text, &shown, name)
}

pub fn parse_scenario(text: &str, path: &str, name: String) -> Result<Scenario, ConfigError> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut f64s: Vec<(&str, Option<f64>)> = vec![
        ("g", None),
        ("Cf", None),
        ("Ag", None),
        ("pg", None),
        ("Hstar", None),
        ("Vstar", None),
        ("Bstar", None),
        ("rho1", None),
        ("rho2", None),
        ("q1", None),
        ("q2", None),
        ("cfl", None),
        ("t_final", None),
        ("kernel_tol", None),
    ];
    let mut cells: Option<usize> = None;
    let mut kernel_n: Option<usize> = None;
    let mut controller: Option<Controller> = None;
    let mut boundary_terms: Option<BoundaryTerms> = None;
    let mut out_dir: Option<PathBuf> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.into(),
            line,
            text: content.into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                path: path.into(),
                line,
                key: key.into(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey {
                path: path.into(),
                line,
                key: key.into(),
            });
        }
        let bad = |reason: &str| ConfigError::BadValue {
            path: path.into(),
            line,
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        };
        match key {
            "cells" => cells = Some(value.parse().map_err(|_| bad("not a positive integer"))?),
            "kernel_n" => {
                kernel_n = Some(value.parse().map_err(|_| bad("not a positive integer"))?)
            }
            "controller" => {
                controller =
                    Some(parse_controller(value)
                        .ok_or_else(|| bad("expected none, state, or output"))?)
            }
            "boundary_terms" => {
                boundary_terms = Some(
                    parse_boundary_terms(value)
                        .ok_or_else(|| bad("expected measured or estimated"))?,
                )
            }
            "out_dir" => {
                if value.is_empty() {
                    return Err(bad("empty path"));
                }
                out_dir = Some(PathBuf::from(value));
            }
            _ => {
                let slot = f64s.iter_mut().find(|(k, _)| *k == key).unwrap();
                slot.1 = Some(value.parse().map_err(|_| bad("not a number"))?);
            }
        }
    }

    let need = |key: &str| -> Result<f64, ConfigError> {
        f64s.iter()
            .find(|(k, _)| *k == key)
            .and_then(|(_, v)| *v)
            .ok_or_else(|| ConfigError::MissingKey {
                path: path.into(),
                key: key.into(),
            })
    };
    let missing = |key: &str| ConfigError::MissingKey {
        path: path.into(),
        key: key.into(),
    };
    Ok(Scenario {
        name,
        g: need("g")?,
        cf: need("Cf")?,
        ag: need("Ag")?,
        pg: need("pg")?,
        hstar: need("Hstar")?,
        vstar: need("Vstar")?,
        bstar: need("Bstar")?,
        rho1: need("rho1")?,
        rho2: need("rho2")?,
        q1: need("q1")?,
        q2: need("q2")?,
        cells: cells.ok_or_else(|| missing("cells"))?,
        cfl: need("cfl")?,
        t_final: need("t_final")?,
        kernel_n: kernel_n.unwrap_or(201),
        kernel_tol: f64s
            .iter()
            .find(|(k, _)| *k == "kernel_tol")
            .and_then(|(_, v)| *v)
            .unwrap_or(1e-10),
        controller: controller.ok_or_else(|| missing("controller"))?,
        boundary_terms: boundary_terms.unwrap_or_default(),
        out_dir,
    })
}

impl Scenario {
    /// Builds the simulation config, deriving the bottom slope from the
    /// steady-state relation.
    pub fn to_sim_config(&self) -> Result<SimConfig, ConfigError> {
        let setup = EquilibriumSetup::with_derived_slope(
            PhysicalParams {
                g: self.g,
                cf: self.cf,
                ag: self.ag,
                pg: self.pg,
                sb: 0.0,
            },
            self.hstar,
            self.vstar,
            self.bstar,
            (self.rho1, self.rho2),
            (self.q1, self.q2),
        )
        .map_err(|e| ConfigError::Invalid {
            path: self.name.clone(),
            reason: e.to_string(),
        })?;
        let cfg = SimConfig {
            cells: self.cells,
            cfl: self.cfl,
            t_final: self.t_final,
            controller: self.controller,
            boundary_terms: self.boundary_terms,
            kernel_n: self.kernel_n,
            kernel_tol: self.kernel_tol,
            ..SimConfig::new(setup)
        };
        cfg.validate().map_err(|e| ConfigError::Invalid {
            path: self.name.clone(),
            reason: e.to_string(),
        })?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# demo scenario
g = 9.81
Cf = 0.1
Ag = 0.008
pg = 0.002
Hstar = 2.0   # meters
Vstar = 3.0
Bstar = 0.4
rho1 = 1.5
rho2 = 1.5
q1 = 1.0
q2 = 1.2
cells = 100
cfl = 0.95
t_final = 8.0
kernel_n = 201
kernel_tol = 1e-10
controller = state
boundary_terms = measured
out_dir = report/demo
";

    #[test]
    fn full_scenario_parses_with_comments() {
        let s = parse_scenario(FULL, "demo.conf", "demo".into()).unwrap();
        assert_eq!(s.g, 9.81);
        assert_eq!(s.hstar, 2.0);
        assert_eq!(s.cells, 100);
        assert_eq!(s.cfl, 0.95);
        assert_eq!(s.controller, Controller::FullState);
        assert_eq!(s.boundary_terms, BoundaryTerms::Measured);
        assert_eq!(s.out_dir.as_deref(), Some(Path::new("report/demo")));
        let cfg = s.to_sim_config().unwrap();
        assert_eq!(cfg.kernel_n, 201);
        assert!((cfg.setup.params.sb - 0.1 * 9.0 / (9.81 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_is_rejected_with_line_number() {
        let text = format!("{FULL}mystery = 1\n");
        match parse_scenario(&text, "demo.conf", "demo".into()) {
            Err(ConfigError::UnknownKey { line, key, .. }) => {
                assert_eq!(line, 21);
                assert_eq!(key, "mystery");
            }
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_syntax_errors_carry_line_numbers() {
        let text = format!("{FULL}g = 10\n");
        assert!(matches!(
            parse_scenario(&text, "d.conf", "d".into()),
            Err(ConfigError::DuplicateKey { line: 21, .. })
        ));
        assert!(matches!(
            parse_scenario("just words\n", "d.conf", "d".into()),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn missing_and_malformed_values_are_rejected() {
        assert!(matches!(
            parse_scenario("g = 9.81\n", "d.conf", "d".into()),
            Err(ConfigError::MissingKey { ref key, .. }) if key == "Cf"
        ));
        let text = FULL.replace("cfl = 0.95", "cfl = brisk");
        assert!(matches!(
            parse_scenario(&text, "d.conf", "d".into()),
            Err(ConfigError::BadValue { ref key, .. }) if key == "cfl"
        ));
        let text = FULL.replace("controller = state", "controller = pid");
        assert!(matches!(
            parse_scenario(&text, "d.conf", "d".into()),
            Err(ConfigError::BadValue { ref key, .. }) if key == "controller"
        ));
    }

    #[test]
    fn optional_keys_take_defaults() {
        let text: String = FULL
            .lines()
            .filter(|l| {
                !l.starts_with("kernel_n")
                    && !l.starts_with("kernel_tol")
                    && !l.starts_with("boundary_terms")
                    && !l.starts_with("out_dir")
            })
            .map(|l| format!("{l}\n"))
            .collect();
        let s = parse_scenario(&text, "d.conf", "d".into()).unwrap();
        assert_eq!(s.kernel_n, 201);
        assert_eq!(s.kernel_tol, 1e-10);
        assert_eq!(s.boundary_terms, BoundaryTerms::Measured);
        assert!(s.out_dir.is_none());
    }

    #[test]
    fn enum_names_round_trip() {
        for c in ["none", "state", "output"] {
            assert_eq!(controller_name(parse_controller(c).unwrap()), c);
        }
        for b in ["measured", "estimated"] {
            assert_eq!(boundary_terms_name(parse_boundary_terms(b).unwrap()), b);
        }
    }

    #[test]
    fn shipped_scenarios_carry_the_published_parameter_sets() {
        let sub = parse_scenario(
            include_str!("../../../scenarios/subcritical.conf"),
            "scenarios/subcritical.conf",
            "subcritical".into(),
        )
        .unwrap();
        assert_eq!(
            (sub.g, sub.cf, sub.ag, sub.pg),
            (9.81, 0.1, 0.008, 0.002)
        );
        assert_eq!((sub.hstar, sub.vstar, sub.bstar), (2.0, 3.0, 0.4));
        assert_eq!((sub.rho1, sub.rho2, sub.q1, sub.q2), (1.5, 1.5, 1.0, 1.2));
        assert_eq!((sub.cells, sub.cfl, sub.t_final), (100, 0.95, 8.0));
        assert_eq!((sub.kernel_n, sub.kernel_tol), (201, 1e-10));
        assert_eq!(sub.controller, Controller::FullState);
        assert_eq!(sub.boundary_terms, BoundaryTerms::Measured);
        let cfg = sub.to_sim_config().unwrap();
        assert!(cfg.setup.froude() < 1.0);

        let sup = parse_scenario(
            include_str!("../../../scenarios/supercritical.conf"),
            "scenarios/supercritical.conf",
            "supercritical".into(),
        )
        .unwrap();
        assert_eq!(
            (sup.g, sup.cf, sup.ag, sup.pg),
            (9.81, 0.1, 0.003, 0.002)
        );
        assert_eq!((sup.hstar, sup.vstar, sup.bstar), (1.0, 5.0, 0.4));
        assert_eq!((sup.rho1, sup.rho2, sup.q1, sup.q2), (1.0, 1.5, 1.0, 1.2));
        assert_eq!((sup.cells, sup.cfl, sup.t_final), (100, 0.9, 8.0));
        assert_eq!(sup.controller, Controller::OutputFeedback);
        let cfg = sup.to_sim_config().unwrap();
        assert!(cfg.setup.froude() > 1.0);
    }
}
