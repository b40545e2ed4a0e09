//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored.
//! Unknown or repeated keys are errors. Entries given on the command line
//! replace file entries of the same key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{FadingConfig, Geometry, Placement};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    ThetaSweep,
    SnrDelay,
    Esr,
    ParSweep,
    OracleCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::ThetaSweep,
        Experiment::SnrDelay,
        Experiment::Esr,
        Experiment::ParSweep,
        Experiment::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ThetaSweep => "theta-sweep",
            Experiment::SnrDelay => "snr-delay",
            Experiment::Esr => "esr",
            Experiment::ParSweep => "par-sweep",
            Experiment::OracleCheck => "oracle-check",
        }
    }

    /// Config key holding this experiment's sweep axis.
    pub fn axis_key(self) -> &'static str {
        match self {
            Experiment::ThetaSweep | Experiment::OracleCheck => "thetas",
            Experiment::SnrDelay | Experiment::Esr => "snr_dbs",
            Experiment::ParSweep => "rhos",
        }
    }

    fn default_axis(self) -> Vec<f64> {
        match self {
            Experiment::ThetaSweep => vec![
                0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.97, 0.99,
            ],
            Experiment::OracleCheck => vec![0.3, 0.7, 0.95],
            Experiment::SnrDelay | Experiment::Esr => vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            Experiment::ParSweep => vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('-', "_") == s)
            .ok_or_else(|| Error::config(format!("unknown experiment `{s}`")))
    }
}

pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "nakagami_m",
    "power_db",
    "beta",
    "placement",
    "relay_x",
    "relay_y",
    "seed",
    "thetas",
    "snr_dbs",
    "rhos",
    "n_samples",
    "horizon",
    "warmup",
    "packet_len",
    "oracle_sequences",
    "oracle_rounds",
    "trace_rounds",
    "output_path",
];

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    value: String,
    origin: String,
}

/// Raw entries before interpretation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigEntries {
    entries: BTreeMap<String, Entry>,
}

impl ConfigEntries {
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut out = ConfigEntries::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| Error::ConfigFile {
                path: source.to_path_buf(),
                line,
                msg,
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if out.entries.contains_key(key) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            out.entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    origin: format!("{}:{line}", source.display()),
                },
            );
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigFile {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    /// Sets `key` from a command-line override, replacing any file entry.
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::config(format!("{origin}: unknown key `{key}`")));
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                origin: origin.to_string(),
            },
        );
        Ok(())
    }

    /// Parses a `key=value` command-line override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got `{pair}`")))?;
        self.set(k.trim(), v, "--set")
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.entries
            .get(key)
            .map(|e| {
                e.value.parse::<T>().map_err(|err| {
                    Error::config(format!("{}: `{key} = {}`: {err}", e.origin, e.value))
                })
            })
            .transpose()
    }

    fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|err| {
                    Error::config(format!("{}: `{key}` item `{}`: {err}", e.origin, s.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub experiment: Experiment,
    pub fading: FadingConfig,
    pub axis: Vec<f64>,
    pub n_samples: u64,
    pub horizon: u64,
    pub warmup: u64,
    pub packet_len: f64,
    pub oracle_sequences: u64,
    pub oracle_rounds: u64,
    pub trace_rounds: u64,
    pub output_path: Option<PathBuf>,
}

pub const DEFAULT_POWER_DB: f64 = 20.0;

impl SweepSpec {
    /// Defaults for `experiment` with no configuration entries.
    pub fn defaults(experiment: Experiment) -> Self {
        SweepSpec {
            experiment,
            fading: FadingConfig::default().with_snr_db(DEFAULT_POWER_DB),
            axis: experiment.default_axis(),
            n_samples: 1_000_000,
            horizon: 1_000_000,
            warmup: 10_000,
            packet_len: 10.0,
            oracle_sequences: 1_000,
            oracle_rounds: 2_000,
            trace_rounds: 1_000,
            output_path: None,
        }
    }

    pub fn from_entries(experiment: Experiment, entries: &ConfigEntries) -> Result<Self> {
        let mut spec = SweepSpec::defaults(experiment);
        if let Some(e) = entries.get::<String>("experiment")? {
            let named: Experiment = e.parse()?;
            if named != experiment {
                return Err(Error::config(format!(
                    "config is for `{named}` but `{experiment}` was requested"
                )));
            }
        }

        let f = &mut spec.fading;
        if let Some(m) = entries.get("nakagami_m")? {
            f.nakagami_m = m;
        }
        if let Some(db) = entries.get::<f64>("power_db")? {
            if !db.is_finite() {
                return Err(Error::config("power_db must be finite"));
            }
            *f = f.with_snr_db(db);
        }
        if let Some(beta) = entries.get("beta")? {
            f.beta = beta;
        }
        if let Some(seed) = entries.get("seed")? {
            f.seed = seed;
        }
        let x = entries.get::<f64>("relay_x")?;
        let y = entries.get::<f64>("relay_y")?;
        let placement = entries.get::<String>("placement")?;
        f.placement = match placement.as_deref() {
            None | Some("uniform_per_round") => Placement::UniformPerRound,
            Some("uniform_per_replication") => Placement::UniformPerReplication,
            Some("fixed") => Placement::Fixed(Geometry::new(x.unwrap_or(0.0), y.unwrap_or(0.0))?),
            Some(other) => {
                return Err(Error::config(format!(
                    "placement must be fixed, uniform_per_round or uniform_per_replication, got `{other}`"
                )))
            }
        };
        if !matches!(f.placement, Placement::Fixed(_)) && (x.is_some() || y.is_some()) {
            return Err(Error::config("relay_x/relay_y require placement = fixed"));
        }
        f.validate()?;

        if let Some(axis) = entries.get_list(experiment.axis_key())? {
            spec.axis = axis;
        }
        if let Some(n) = entries.get("n_samples")? {
            spec.n_samples = n;
        }
        if let Some(h) = entries.get("horizon")? {
            spec.horizon = h;
        }
        if let Some(w) = entries.get("warmup")? {
            spec.warmup = w;
        }
        if let Some(p) = entries.get("packet_len")? {
            spec.packet_len = p;
        }
        if let Some(n) = entries.get("oracle_sequences")? {
            spec.oracle_sequences = n;
        }
        if let Some(n) = entries.get("oracle_rounds")? {
            spec.oracle_rounds = n;
        }
        if let Some(n) = entries.get("trace_rounds")? {
            spec.trace_rounds = n;
        }
        if let Some(p) = entries.get::<String>("output_path")? {
            spec.output_path = Some(PathBuf::from(p));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.fading.validate()?;
        if self.axis.is_empty() {
            return Err(Error::config(format!(
                "`{}` must list at least one value",
                self.experiment.axis_key()
            )));
        }
        let key = self.experiment.axis_key();
        for &v in &self.axis {
            let ok = match self.experiment {
                Experiment::ThetaSweep | Experiment::OracleCheck => (0.0..=1.0).contains(&v),
                Experiment::SnrDelay | Experiment::Esr => v.is_finite(),
                Experiment::ParSweep => v >= 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::config(format!("`{key}` value {v} is out of range")));
            }
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be >= 1"));
        }
        if self.horizon <= self.warmup {
            return Err(Error::config(format!(
                "horizon ({}) must exceed warmup ({})",
                self.horizon, self.warmup
            )));
        }
        if !(self.packet_len.is_finite() && self.packet_len > 0.0) {
            return Err(Error::config("packet_len must be > 0"));
        }
        if self.oracle_sequences == 0 || self.oracle_rounds == 0 {
            return Err(Error::config(
                "oracle_sequences and oracle_rounds must be >= 1",
            ));
        }
        Ok(())
    }

    /// Effective configuration as `key=value` pairs, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let f = &self.fading;
        let mut out = vec![
            ("experiment".into(), self.experiment.name().into()),
            ("nakagami_m".into(), f.nakagami_m.to_string()),
            ("power_db".into(), f.snr_db().to_string()),
            ("beta".into(), f.beta.to_string()),
            ("placement".into(), f.placement.name().into()),
        ];
        if let Placement::Fixed(g) = f.placement {
            out.push(("relay_x".into(), g.relay_x().to_string()));
            out.push(("relay_y".into(), g.relay_y().to_string()));
        }
        out.push(("seed".into(), f.seed.to_string()));
        out.push((
            self.experiment.axis_key().into(),
            self.axis
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        ));
        let numbers: &[(&str, String)] = match self.experiment {
            Experiment::ThetaSweep | Experiment::SnrDelay => &[
                ("horizon", self.horizon.to_string()),
                ("warmup", self.warmup.to_string()),
            ],
            Experiment::Esr => &[("n_samples", self.n_samples.to_string())],
            Experiment::ParSweep => &[
                ("horizon", self.horizon.to_string()),
                ("warmup", self.warmup.to_string()),
                ("packet_len", self.packet_len.to_string()),
            ],
            Experiment::OracleCheck => &[
                ("oracle_sequences", self.oracle_sequences.to_string()),
                ("oracle_rounds", self.oracle_rounds.to_string()),
            ],
        };
        out.extend(numbers.iter().map(|(k, v)| (k.to_string(), v.clone())));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigEntries> {
        ConfigEntries::parse(text, Path::new("test.cfg"))
    }

    #[test]
    fn parses_comments_and_lists() {
        let e =
            parse("# fading\nnakagami_m = 2   # shape\n\npower_db=10\nthetas = 0.1, 0.5 ,0.9\n")
                .unwrap();
        let spec = SweepSpec::from_entries(Experiment::ThetaSweep, &e).unwrap();
        assert_eq!(spec.fading.nakagami_m, 2.0);
        assert!((spec.fading.snr_db() - 10.0).abs() < 1e-12);
        assert_eq!(spec.axis, vec![0.1, 0.5, 0.9]);
    }

    #[test]
    fn unknown_and_duplicate_keys_fail() {
        let err = parse("nakagami = 2\n").unwrap_err();
        assert!(matches!(err, Error::ConfigFile { line: 1, .. }));
        let err = parse("seed=1\nseed=2\n").unwrap_err();
        assert!(matches!(err, Error::ConfigFile { line: 2, .. }));
        assert!(parse("just a line\n").is_err());
        let mut e = ConfigEntries::default();
        assert!(e.set_pair("bogus=1").is_err());
        assert!(e.set_pair("seed").is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut e = parse("seed = 3\n").unwrap();
        e.set_pair("seed=9").unwrap();
        let spec = SweepSpec::from_entries(Experiment::Esr, &e).unwrap();
        assert_eq!(spec.fading.seed, 9);
    }

    #[test]
    fn out_of_domain_values_fail() {
        for (exp, text) in [
            (Experiment::ThetaSweep, "thetas = 0.5, 1.5"),
            (Experiment::ParSweep, "rhos = -0.1"),
            (Experiment::Esr, "nakagami_m = 0.3"),
            (Experiment::Esr, "snr_dbs ="),
            (Experiment::ThetaSweep, "horizon = 10\nwarmup = 10"),
            (Experiment::Esr, "relay_x = 0.1"),
            (Experiment::Esr, "placement = fixed\nrelay_x = -0.5"),
            (Experiment::Esr, "placement = everywhere"),
            (Experiment::Esr, "experiment = par-sweep"),
            (Experiment::Esr, "seed = -4"),
        ] {
            let e = parse(text).unwrap();
            let err = SweepSpec::from_entries(exp, &e).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }

    #[test]
    fn fixed_placement_reads_coordinates() {
        let e = parse("placement = fixed\nrelay_x = 0.2\nrelay_y = -0.1").unwrap();
        let spec = SweepSpec::from_entries(Experiment::Esr, &e).unwrap();
        match spec.fading.placement {
            Placement::Fixed(g) => assert_eq!((g.relay_x(), g.relay_y()), (0.2, -0.1)),
            other => panic!("{other:?}"),
        }
        assert!(spec
            .echo()
            .iter()
            .any(|(k, v)| k == "relay_x" && v == "0.2"));
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }
}
