//! Line-based `key = value` configuration for simulation runs and
//! refinement studies.

use std::fmt::Write as _;
use std::str::FromStr;

use dch_core::{DchParams, InitialCondition};

use crate::error::ConfigError;

/// Parsed `key = value` pairs in file order, with the line they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String, usize)>,
}

impl KeyValues {
    /// Parses `key = value` lines. Blank lines and text after `#` are
    /// ignored; a key may appear only once.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_pair(line).ok_or(ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            if out.get(key).is_some() {
                return Err(ConfigError::Duplicate {
                    key: key.to_string(),
                    line: idx + 1,
                });
            }
            out.entries
                .push((key.to_string(), value.to_string(), idx + 1));
        }
        Ok(out)
    }

    /// Parses one `key=value` override.
    pub fn parse_override(text: &str) -> Result<(String, String), ConfigError> {
        split_pair(text.trim())
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .ok_or(ConfigError::Syntax {
                line: 0,
                text: text.to_string(),
            })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    /// Inserts or replaces `key`.
    pub fn set(&mut self, key: &str, value: &str) {
        match self.entries.iter_mut().find(|(k, _, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string(), 0)),
        }
    }

    /// Applies `other` on top of `self`.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v, _) in &other.entries {
            self.set(k, v);
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    fn check_keys(&self, valid: &[&str]) -> Result<(), ConfigError> {
        for key in self.keys() {
            if !valid.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    valid: valid.join(", "),
                });
            }
        }
        Ok(())
    }

    fn parsed<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|_| ConfigError::Invalid {
                    key,
                    value: v.to_string(),
                    reason: "malformed value".into(),
                })
            })
            .transpose()
    }

    fn parsed_or<T: FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

fn split_pair(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty() && !v.is_empty()).then_some((k, v))
}

/// Initial phase field of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Spinodal,
    Cauchy,
    Manufactured,
}

impl InitialKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Spinodal => "spinodal",
            Self::Cauchy => "cauchy",
            Self::Manufactured => "manufactured",
        }
    }

    pub fn condition(self) -> InitialCondition {
        match self {
            Self::Spinodal => InitialCondition::Spinodal,
            Self::Cauchy => InitialCondition::Cauchy,
            Self::Manufactured => InitialCondition::Manufactured,
        }
    }
}

impl FromStr for InitialKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "spinodal" => Ok(Self::Spinodal),
            "cauchy" => Ok(Self::Cauchy),
            "manufactured" => Ok(Self::Manufactured),
            _ => Err(()),
        }
    }
}

/// Nodal field written to snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldName {
    Phi,
    Mu,
    P,
}

impl FieldName {
    pub const ALL: [FieldName; 3] = [FieldName::Phi, FieldName::Mu, FieldName::P];

    pub fn name(self) -> &'static str {
        match self {
            Self::Phi => "phi",
            Self::Mu => "mu",
            Self::P => "p",
        }
    }
}

impl FromStr for FieldName {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|f| f.name() == s).ok_or(())
    }
}

/// Keys accepted by a run configuration.
pub const RUN_KEYS: [&str; 15] = [
    "L",
    "tau",
    "T",
    "epsilon",
    "gamma",
    "lambda",
    "tol",
    "n0",
    "seed",
    "max_cycles",
    "coarsest_sweeps",
    "initial",
    "mms",
    "snapshot_every",
    "fields",
];

/// Keys without a default.
pub const REQUIRED_KEYS: [&str; 5] = ["L", "tau", "T", "epsilon", "gamma"];

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Index of the finest level.
    pub levels: usize,
    pub tau: f64,
    pub final_time: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Smoothing sweeps per stage.
    pub lambda: usize,
    pub tol: f64,
    /// Cells per side on the coarsest level.
    pub n0: usize,
    pub seed: u64,
    pub max_cycles: usize,
    pub coarsest_sweeps: usize,
    pub initial: InitialKind,
    /// Adds the manufactured source terms.
    pub mms: bool,
    /// Snapshot every this many steps, besides the first and last; 0 writes
    /// only those two.
    pub snapshot_every: usize,
    pub fields: Vec<FieldName>,
}

impl RunConfig {
    /// Parses a complete run configuration.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_values(&KeyValues::parse(text)?)
    }

    pub fn from_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.check_keys(&RUN_KEYS)?;
        let missing: Vec<&str> = REQUIRED_KEYS
            .iter()
            .copied()
            .filter(|k| kv.get(k).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::Missing {
                keys: missing.join(", "),
            });
        }
        let req = |key: &'static str| kv.parsed::<f64>(key).map(|v| v.expect("checked above"));
        let initial = match kv.get("initial") {
            None => InitialKind::Spinodal,
            Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                key: "initial",
                value: v.to_string(),
                reason: "expected spinodal, cauchy or manufactured".into(),
            })?,
        };
        let fields = match kv.get("fields") {
            None => vec![FieldName::Phi],
            Some(v) => parse_list(
                v,
                "fields",
                "expected a comma-separated subset of phi, mu, p",
            )?,
        };
        let cfg = Self {
            levels: kv.parsed::<usize>("L")?.expect("checked above"),
            tau: req("tau")?,
            final_time: req("T")?,
            epsilon: req("epsilon")?,
            gamma: req("gamma")?,
            lambda: kv.parsed_or("lambda", 2)?,
            tol: kv.parsed_or("tol", 1e-12)?,
            n0: kv.parsed_or("n0", 1)?,
            seed: kv.parsed_or("seed", 42)?,
            max_cycles: kv.parsed_or("max_cycles", 200)?,
            coarsest_sweeps: kv.parsed_or("coarsest_sweeps", 0)?,
            initial,
            mms: kv.parsed_or("mms", false)?,
            snapshot_every: kv.parsed_or("snapshot_every", 10)?,
            fields,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.levels == 0 {
            return Err(invalid(
                "L",
                self.levels,
                "at least one level above the coarsest is needed",
            ));
        }
        if self.n0 == 0 {
            return Err(invalid("n0", self.n0, "must be at least 1"));
        }
        if self.lambda == 0 {
            return Err(invalid("lambda", self.lambda, "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", self.tol, "must be positive"));
        }
        if self.fields.is_empty() {
            return Err(invalid("fields", "", "at least one field is needed"));
        }
        let params = self.params();
        params.validate().map_err(ConfigError::Solver)?;
        params.steps().map_err(|_| ConfigError::NonIntegerSteps {
            final_time: self.final_time,
            tau: self.tau,
        })?;
        Ok(())
    }

    /// Solver parameters of this run.
    pub fn params(&self) -> DchParams {
        let mut p = DchParams::new(
            self.epsilon,
            self.gamma,
            self.tau,
            self.final_time,
            self.levels,
        );
        p.sweeps = self.lambda;
        p.tol = self.tol;
        p.coarsest_cells = self.n0;
        p.seed = self.seed;
        p.max_cycles = self.max_cycles;
        p.coarsest_extra_sweeps = self.coarsest_sweeps;
        p
    }

    /// Number of time steps.
    pub fn steps(&self) -> usize {
        self.params().steps().expect("validated on construction")
    }

    /// Serializes every key; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let fields: Vec<&str> = self.fields.iter().map(|f| f.name()).collect();
        let _ = writeln!(s, "L = {}", self.levels);
        let _ = writeln!(s, "tau = {:?}", self.tau);
        let _ = writeln!(s, "T = {:?}", self.final_time);
        let _ = writeln!(s, "epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "gamma = {:?}", self.gamma);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "tol = {:?}", self.tol);
        let _ = writeln!(s, "n0 = {}", self.n0);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "max_cycles = {}", self.max_cycles);
        let _ = writeln!(s, "coarsest_sweeps = {}", self.coarsest_sweeps);
        let _ = writeln!(s, "initial = {}", self.initial.name());
        let _ = writeln!(s, "mms = {}", self.mms);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "fields = {}", fields.join(","));
        s
    }

    /// Whether step `m` gets a snapshot.
    pub fn snapshot_due(&self, m: usize) -> bool {
        m == 0 || m == self.steps() || (self.snapshot_every > 0 && m % self.snapshot_every == 0)
    }
}

/// Spinodal decomposition on 256x256 with epsilon = gamma = 0.01, tau = 1e-3, T = 0.1.
pub fn spinodal_preset() -> KeyValues {
    let mut kv = KeyValues::default();
    for (k, v) in [
        ("L", "8"),
        ("tau", "1e-3"),
        ("T", "0.1"),
        ("epsilon", "0.01"),
        ("gamma", "0.01"),
        ("initial", "spinodal"),
    ] {
        kv.set(k, v);
    }
    kv
}

fn invalid(key: &'static str, value: impl std::fmt::Display, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        key,
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn parse_list<T: FromStr>(v: &str, key: &'static str, reason: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| invalid(key, v, reason)))
        .collect()
}

/// Which refinement study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Mms,
    Cauchy,
}

/// Keys accepted by a study configuration.
pub const STUDY_KEYS: [&str; 10] = [
    "norm",
    "cells",
    "tau_coefficient",
    "T",
    "epsilon",
    "gamma",
    "lambda",
    "tol",
    "max_cycles",
    "coarsest_sweeps",
];

/// A refinement study. The time step on the mesh with `n` cells per side is
/// `tau_coefficient / n²` for the L² norm and `tau_coefficient / n` for H¹.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub norm: dch_core::mms::Norm,
    pub cells: Vec<usize>,
    pub tau_coefficient: f64,
    pub final_time: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub lambda: usize,
    pub tol: f64,
    pub max_cycles: usize,
    pub coarsest_sweeps: usize,
}

impl StudyConfig {
    /// Parses `kv` on top of the reference setup for `kind` and its norm.
    pub fn from_values(kind: StudyKind, kv: &KeyValues) -> Result<Self, ConfigError> {
        use dch_core::mms::Norm;
        kv.check_keys(&STUDY_KEYS)?;
        let norm = match kv.get("norm").unwrap_or("l2") {
            "l2" => Norm::L2,
            "h1" => Norm::H1,
            other => return Err(invalid("norm", other, "expected l2 or h1")),
        };
        let (tau_default, t_default, eps_default, gamma_default) = match (kind, norm) {
            (StudyKind::Mms, Norm::L2) => (25.6, 1.0, 1.0, 1.0),
            (StudyKind::Mms, Norm::H1) => (1.6, 1.0, 1.0, 1.0),
            (StudyKind::Cauchy, Norm::L2) => (1.024, 0.04, 0.0625, 0.125),
            (StudyKind::Cauchy, Norm::H1) => (2e-3, 0.04, 0.0625, 0.125),
        };
        let cells: Vec<usize> = match kv.get("cells") {
            None => vec![16, 32, 64, 128],
            Some(v) => parse_list(v, "cells", "expected comma-separated powers of two")?,
        };
        if cells.is_empty() || cells.iter().any(|&n| n < 2 || !n.is_power_of_two()) {
            return Err(invalid(
                "cells",
                format!("{cells:?}"),
                "expected powers of two >= 2",
            ));
        }
        let cfg = Self {
            kind,
            norm,
            cells,
            tau_coefficient: kv.parsed_or("tau_coefficient", tau_default)?,
            final_time: kv.parsed_or("T", t_default)?,
            epsilon: kv.parsed_or("epsilon", eps_default)?,
            gamma: kv.parsed_or("gamma", gamma_default)?,
            lambda: kv.parsed_or("lambda", 2)?,
            tol: kv.parsed_or("tol", 1e-12)?,
            max_cycles: kv.parsed_or("max_cycles", 200)?,
            coarsest_sweeps: kv.parsed_or("coarsest_sweeps", 0)?,
        };
        if !(cfg.tau_coefficient > 0.0) {
            return Err(invalid(
                "tau_coefficient",
                cfg.tau_coefficient,
                "must be positive",
            ));
        }
        cfg.template().validate().map_err(ConfigError::Solver)?;
        Ok(cfg)
    }

    /// Time step on the mesh with `n` cells per side.
    pub fn tau(&self, n: usize) -> f64 {
        let n = n as f64;
        match self.norm {
            dch_core::mms::Norm::L2 => self.tau_coefficient / (n * n),
            dch_core::mms::Norm::H1 => self.tau_coefficient / n,
        }
    }

    /// Parameters shared by every mesh of the study.
    pub fn template(&self) -> DchParams {
        let mut p = DchParams::new(
            self.epsilon,
            self.gamma,
            self.final_time,
            self.final_time,
            1,
        );
        p.sweeps = self.lambda;
        p.tol = self.tol;
        p.max_cycles = self.max_cycles;
        p.coarsest_extra_sweeps = self.coarsest_sweeps;
        p
    }

    pub fn norm_name(&self) -> &'static str {
        match self.norm {
            dch_core::mms::Norm::L2 => "l2",
            dch_core::mms::Norm::H1 => "h1",
        }
    }

    /// `# key = value` lines describing the study.
    pub fn metadata(&self) -> String {
        let cells: Vec<String> = self.cells.iter().map(|n| n.to_string()).collect();
        let taus: Vec<String> = self
            .cells
            .iter()
            .map(|&n| format!("{:?}", self.tau(n)))
            .collect();
        let kind = match self.kind {
            StudyKind::Mms => "mms-convergence",
            StudyKind::Cauchy => "cauchy-convergence",
        };
        let mut s = String::new();
        let _ = writeln!(s, "# study = {kind}");
        let _ = writeln!(s, "# norm = {}", self.norm_name());
        let _ = writeln!(s, "# cells = {}", cells.join(","));
        let _ = writeln!(s, "# tau = {}", taus.join(","));
        let _ = writeln!(s, "# T = {:?}", self.final_time);
        let _ = writeln!(s, "# epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "# gamma = {:?}", self.gamma);
        let _ = writeln!(s, "# lambda = {}", self.lambda);
        let _ = writeln!(s, "# tol = {:?}", self.tol);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPINODAL: &str = "epsilon = 0.01\ngamma = 0.01\nL = 8\ntau = 1e-3\nT = 0.1\n";

    #[test]
    fn spinodal_preset_has_one_hundred_steps() {
        let cfg = RunConfig::parse(SPINODAL).unwrap();
        assert_eq!(cfg.steps(), 100);
        assert_eq!(cfg.params().finest_cells(), 256);
        assert_eq!((cfg.lambda, cfg.tol, cfg.n0, cfg.seed), (2, 1e-12, 1, 42));
        assert_eq!(cfg, RunConfig::from_values(&spinodal_preset()).unwrap());
    }

    #[test]
    fn empty_file_lists_required_keys() {
        match RunConfig::parse("# nothing here\n\n") {
            Err(ConfigError::Missing { keys }) => assert_eq!(keys, "L, tau, T, epsilon, gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn override_wins_over_file() {
        let mut kv = KeyValues::parse(SPINODAL).unwrap();
        let (k, v) = KeyValues::parse_override("gamma=0").unwrap();
        let mut overrides = KeyValues::default();
        overrides.set(&k, &v);
        kv.merge(&overrides);
        assert_eq!(RunConfig::from_values(&kv).unwrap().gamma, 0.0);
    }

    #[test]
    fn unknown_keys_list_the_valid_ones() {
        let err = RunConfig::parse(&format!("{SPINODAL}gama = 1\n")).unwrap_err();
        match &err {
            ConfigError::UnknownKey { key, valid } => {
                assert_eq!(key, "gama");
                assert!(valid.contains("gamma") && valid.contains("snapshot_every"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(matches!(
            RunConfig::parse(&format!("{SPINODAL}seed = x\n")),
            Err(ConfigError::Invalid { key: "seed", .. })
        ));
        assert!(matches!(
            RunConfig::parse("L 8\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse(&format!("{SPINODAL}L = 3\n")),
            Err(ConfigError::Duplicate { .. })
        ));
        let uneven = SPINODAL.replace("T = 0.1", "T = 0.1005");
        assert!(matches!(
            RunConfig::parse(&uneven),
            Err(ConfigError::NonIntegerSteps { .. })
        ));
        let negative = SPINODAL.replace("epsilon = 0.01", "epsilon = -1");
        assert!(matches!(
            RunConfig::parse(&negative),
            Err(ConfigError::Solver(_))
        ));
        assert!(RunConfig::parse(&format!("{SPINODAL}initial = lumpy\n")).is_err());
        assert!(RunConfig::parse(&format!("{SPINODAL}fields = phi,rho\n")).is_err());
    }

    #[test]
    fn comments_and_spacing_are_ignored() {
        let text = "  epsilon=0.01   # interface\n# full line\ngamma =0.01\nL= 8\ntau = 1e-3\nT = 0.1 # end\n";
        assert_eq!(
            RunConfig::parse(text).unwrap(),
            RunConfig::parse(SPINODAL).unwrap()
        );
    }

    #[test]
    fn snapshot_cadence() {
        let mut cfg = RunConfig::parse(&SPINODAL.replace("T = 0.1", "T = 0.025")).unwrap();
        let due: Vec<usize> = (0..=25).filter(|&m| cfg.snapshot_due(m)).collect();
        assert_eq!(due, vec![0, 10, 20, 25]);
        cfg.snapshot_every = 0;
        let due: Vec<usize> = (0..=25).filter(|&m| cfg.snapshot_due(m)).collect();
        assert_eq!(due, vec![0, 25]);
    }

    #[test]
    fn study_defaults_match_the_reference_setups() {
        let cfg = StudyConfig::from_values(StudyKind::Mms, &KeyValues::default()).unwrap();
        assert_eq!(cfg.cells, vec![16, 32, 64, 128]);
        assert_eq!(cfg.tau(16), 0.1);
        let mut kv = KeyValues::default();
        kv.set("norm", "h1");
        let cfg = StudyConfig::from_values(StudyKind::Cauchy, &kv).unwrap();
        assert_eq!(
            (cfg.epsilon, cfg.gamma, cfg.final_time),
            (0.0625, 0.125, 0.04)
        );
        assert_eq!(cfg.tau(16), 1.25e-4);
        kv.set("cells", "16,24");
        assert!(StudyConfig::from_values(StudyKind::Cauchy, &kv).is_err());
        kv.set("L", "3");
        assert!(matches!(
            StudyConfig::from_values(StudyKind::Mms, &kv),
            Err(ConfigError::UnknownKey { .. })
        ));
    }
}
