//! Run configuration: a named profile, overlaid by a TOML file, the output
//! directory environment variable, and command-line flags, in that order.
//! Flags carry exactly the names of the config fields.

use std::path::{Path, PathBuf};

use lapreg::data::{RatingRange, SplitScheme};
use lapreg::eval::{PipelineConfig, SyntheticSpec};
use lapreg::features::{Axis, FeatureOptions, Impute, Scaling};
use lapreg::solvers::Method;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUT_ENV: &str = "LAPREG_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// MovieLens-format split files under `data_dir`.
    Movielens,
    /// Generated two-moons point cloud.
    TwoMoons,
    /// Generated low-rank rating matrix.
    Synthetic,
}

/// Every effective parameter of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: String,
    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    pub scheme: SplitScheme,
    pub split: Option<String>,
    pub n_points: usize,
    pub noise: f64,
    pub labels_per_class: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub labels_per_item: usize,
    pub test_per_item: usize,
    pub rank: usize,
    pub axis: Axis,
    pub impute: Impute,
    pub scaling: Scaling,
    pub reduce_rank: Option<usize>,
    pub k: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub methods: Vec<Method>,
    pub kb: Vec<usize>,
    pub clip: bool,
    pub timing_runs: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

/// Field name, whether it takes a list, help text.
pub const FIELDS: &[(&str, bool, &str)] = &[
    ("dataset", false, "movielens | two_moons | synthetic"),
    ("data_dir", false, "directory holding u.data and the split files"),
    ("scheme", false, "split family: u1..u5 | ua_ub"),
    ("split", false, "restrict to one split, e.g. u1"),
    ("n_points", false, "two-moons point count (even)"),
    ("noise", false, "two-moons Gaussian noise"),
    ("labels_per_class", false, "labeled two-moons points per class"),
    ("n_users", false, "synthetic users"),
    ("n_items", false, "synthetic items"),
    ("labels_per_item", false, "synthetic training ratings per item"),
    ("test_per_item", false, "synthetic test ratings per item"),
    ("rank", false, "synthetic latent rank"),
    ("axis", false, "user_based | item_based"),
    ("impute", false, "row_mean | global_mean"),
    ("scaling", false, "rms | none"),
    ("reduce_rank", false, "truncated-SVD feature rank"),
    ("k", false, "k-NN graph neighbors"),
    ("sigma", false, "Gaussian kernel width"),
    ("lambda", false, "kernel norm weight (> 0)"),
    ("gamma", false, "Laplacian weight (>= 0)"),
    ("epsilon", false, "heat-kernel bandwidth (default: mean k-th-neighbor squared distance)"),
    ("methods", true, "comma list of Ori, Prop, GBa<k>"),
    ("kb", true, "comma list of GBa bandwidths for sweep-kb"),
    ("clip", false, "clamp predictions to the rating range (true|false)"),
    ("timing_runs", false, "repetitions of the per-item phase"),
    ("out_dir", false, "output directory (env LAPREG_OUT)"),
    ("seed", false, "RNG seed"),
];

pub const PROFILES: &[&str] = &["movielens", "twomoons"];

impl RunConfig {
    pub fn profile(name: &str) -> Result<Self, CliError> {
        let base = Self {
            profile: name.to_string(),
            dataset: DatasetKind::Movielens,
            data_dir: PathBuf::from("data/ml-100k"),
            scheme: SplitScheme::U1ToU5,
            split: None,
            n_points: 2000,
            noise: 0.05,
            labels_per_class: 3,
            n_users: 1000,
            n_items: 500,
            labels_per_item: 10,
            test_per_item: 2,
            rank: 4,
            axis: Axis::UserBased,
            impute: Impute::RowMean,
            scaling: Scaling::Rms,
            reduce_rank: None,
            k: 20,
            sigma: 4.0,
            lambda: 0.022,
            gamma: 0.05,
            epsilon: None,
            methods: vec![Method::Prop],
            kb: vec![10, 20, 50, 100],
            clip: false,
            timing_runs: 3,
            out_dir: PathBuf::from("out"),
            seed: 0,
        };
        match name {
            "movielens" | "movielens-paper" => Ok(base),
            "twomoons" | "twomoons-paper" => Ok(Self {
                dataset: DatasetKind::TwoMoons,
                k: 30,
                sigma: 0.1,
                lambda: 1e-4,
                gamma: 0.005,
                ..base
            }),
            other => Err(CliError::Validation(format!(
                "profile: unknown profile {other:?} (expected one of {})",
                PROFILES.join(", ")
            ))),
        }
    }

    /// Resolves the effective configuration.
    ///
    /// The profile is `profile_flag`, else the file's `profile` key, else
    /// `default_profile`.
    pub fn resolve(
        default_profile: &str,
        profile_flag: Option<&str>,
        file: Option<&Path>,
        env_out: Option<String>,
        flags: &[(&str, String)],
    ) -> Result<Self, CliError> {
        let mut file_table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        let file_profile = match file_table.remove("profile") {
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => {
                return Err(CliError::Validation(format!("profile: expected a string, got {other}")))
            }
            None => None,
        };
        let name = profile_flag
            .map(str::to_string)
            .or(file_profile)
            .unwrap_or_else(|| default_profile.to_string());
        let base = Self::profile(&name)?;
        let mut table = toml::Table::try_from(&base).expect("config serializes");
        for (key, value) in file_table {
            table.insert(key, value);
        }
        if let Some(out) = env_out {
            table.insert("out_dir".into(), toml::Value::String(out));
        }
        for (key, raw) in flags {
            let list = FIELDS.iter().any(|(f, l, _)| f == key && *l);
            table.insert(key.to_string(), flag_value(raw, list));
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(e.message().trim().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline().validate().map_err(|e| CliError::Validation(e.to_string()))?;
        if self.methods.is_empty() {
            return Err(CliError::Validation("methods must not be empty".into()));
        }
        if self.dataset == DatasetKind::TwoMoons && self.n_points % 2 == 1 {
            return Err(CliError::Validation(format!("n_points must be even, got {}", self.n_points)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(CliError::Validation(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            sigma: self.sigma,
            lambda: self.lambda,
            gamma: self.gamma,
            epsilon: self.epsilon,
            features: FeatureOptions {
                axis: self.axis,
                impute: self.impute,
                reduce_rank: self.reduce_rank,
                scaling: self.scaling,
            },
            range: match self.dataset {
                DatasetKind::TwoMoons => RatingRange { min: -1.0, max: 1.0 },
                _ => RatingRange::default(),
            },
            clip: self.clip,
            timing_runs: self.timing_runs,
        }
    }

    pub fn synthetic(&self) -> SyntheticSpec {
        SyntheticSpec {
            n_users: self.n_users,
            n_items: self.n_items,
            labels_per_item: self.labels_per_item,
            test_per_item: self.test_per_item,
            rank: self.rank,
            seed: self.seed,
        }
    }
}

/// Interprets a flag value as a TOML scalar, falling back to a string.
fn scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn flag_value(raw: &str, list: bool) -> toml::Value {
    let raw = raw.trim();
    if !list {
        return scalar(raw);
    }
    let inner = raw.strip_prefix('[').and_then(|r| r.strip_suffix(']')).unwrap_or(raw);
    toml::Value::Array(
        inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| scalar(s.trim_matches('"')))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_pin_parameters() {
        let m = RunConfig::profile("movielens").unwrap();
        assert_eq!((m.k, m.sigma, m.lambda, m.gamma), (20, 4.0, 0.022, 0.05));
        let t = RunConfig::profile("twomoons").unwrap();
        assert_eq!((t.k, t.sigma, t.lambda, t.gamma), (30, 0.1, 1e-4, 0.005));
        assert_eq!((t.n_points, t.labels_per_class), (2000, 3));
        assert!(RunConfig::profile("netflix").is_err());
    }

    #[test]
    fn flags_override_and_parse() {
        let flags = [
            ("sigma", "2".to_string()),
            ("methods", "Prop,GBa10".to_string()),
            ("kb", "[5, 6]".to_string()),
            ("data_dir", "some/dir".to_string()),
            ("scheme", "ua_ub".to_string()),
            ("clip", "true".to_string()),
        ];
        let c = RunConfig::resolve("movielens", None, None, Some("o".into()), &flags).unwrap();
        assert_eq!(c.sigma, 2.0);
        assert_eq!(c.methods, vec![Method::Prop, Method::GBa { kb: 10 }]);
        assert_eq!(c.kb, vec![5, 6]);
        assert_eq!(c.data_dir, PathBuf::from("some/dir"));
        assert_eq!(c.scheme, SplitScheme::UaUb);
        assert_eq!(c.out_dir, PathBuf::from("o"));
        assert!(c.clip);
    }

    #[test]
    fn bad_values_name_the_field() {
        let e = RunConfig::resolve("movielens", None, None, None, &[("lambda", "0".into())]).unwrap_err();
        assert!(e.to_string().contains("lambda"), "{e}");
        let e = RunConfig::resolve("movielens", None, None, None, &[("methods", "SVD".into())]).unwrap_err();
        assert!(matches!(e, CliError::Validation(_)), "{e}");
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::profile("twomoons").unwrap();
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
