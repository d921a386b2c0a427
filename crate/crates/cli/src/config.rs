//! Experiment configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use mnac::capacity::{optimize_rate_with, RateSearch};
use mnac::decoders::BpOptions;
use mnac::metrics::{DecoderSpec, RecoveryCriterion};
use mnac::model::{ChannelParams, NetworkConfig};
use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use crate::CliError;

/// A number or the literal `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Auto {
    #[default]
    Auto,
    Value(f64),
}

impl<'de> Deserialize<'de> for Auto {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct AutoVisitor;

        impl Visitor<'_> for AutoVisitor {
            type Value = Auto;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"auto\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Auto, E> {
                if v == "auto" {
                    Ok(Auto::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Auto, E> {
                Ok(Auto::Value(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Auto, E> {
                Ok(Auto::Value(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Auto, E> {
                Ok(Auto::Value(v as f64))
            }
        }

        deserializer.deserialize_any(AutoVisitor)
    }
}

impl Auto {
    fn value(self) -> Option<f64> {
        match self {
            Auto::Auto => None,
            Auto::Value(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub ell: usize,
    pub k: usize,
    #[serde(default)]
    pub q_sp: Auto,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// SNR points `P sigma^2 / sigma_w^2`; exclusive with `on_power`.
    pub snr_db: Option<Vec<f64>>,
    pub on_power: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub fading_var: f64,
    #[serde(default = "one")]
    pub noise_var: f64,
    #[serde(default)]
    pub gamma: Auto,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodersSection {
    /// Optional so that capacity-only configs can omit it; an explicit `[]` is rejected.
    pub list: Option<Vec<String>>,
    #[serde(default = "one")]
    pub rho: f64,
    /// Thresholds for a bare `bp_aht` entry.
    #[serde(default = "default_eta")]
    pub eta: Vec<f64>,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for DecodersSection {
    fn default() -> Self {
        Self {
            list: None,
            rho: 1.0,
            eta: default_eta(),
            damping: default_damping(),
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSection {
    pub list: Vec<String>,
}

impl Default for CriteriaSection {
    fn default() -> Self {
        Self {
            list: vec!["exact".into()],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Output file stem; defaults to the config file stem.
    pub name: Option<String>,
    #[serde(default)]
    pub fixed_codebook: bool,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_target")]
    pub target_success: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: 0,
            out: None,
            name: None,
            fixed_codebook: false,
            alpha: 0.0,
            target_success: default_target(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_eta() -> Vec<f64> {
    vec![0.3]
}
fn default_damping() -> f64 {
    0.5
}
fn default_max_iters() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-6
}
fn default_trials() -> usize {
    500
}
fn default_target() -> f64 {
    0.95
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    pub channel: ChannelSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub decoders: DecodersSection,
    #[serde(default)]
    pub criteria: CriteriaSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Channel parameters and sampling probability resolved for one SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub params: ChannelParams,
    pub q_sp: f64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if cfg.run.name.is_none() {
            cfg.run.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let (ell, k) = (self.network.ell, self.network.k);
        if k == 0 || k > ell {
            return bad(format!(
                "network.k must satisfy 1 <= k <= ell, got k = {k}, ell = {ell}"
            ));
        }
        if let Auto::Value(q) = self.network.q_sp {
            if !(q > 0.0 && q < 1.0) {
                return bad(format!("network.q_sp must lie in (0, 1), got {q}"));
            }
        }
        match (&self.channel.snr_db, &self.channel.on_power) {
            (Some(v), None) | (None, Some(v)) if !v.is_empty() => {}
            (Some(_), Some(_)) => return bad("channel: give snr_db or on_power, not both".into()),
            _ => return bad("channel: snr_db (or on_power) must be a non-empty list".into()),
        }
        if self.run.trials == 0 {
            return bad("run.trials must be at least 1".into());
        }
        if !(self.run.alpha >= 0.0 && self.run.alpha < 1.0) {
            return bad(format!(
                "run.alpha must lie in [0, 1), got {}",
                self.run.alpha
            ));
        }
        if !(self.run.target_success > 0.0 && self.run.target_success <= 1.0) {
            return bad(format!(
                "run.target_success must lie in (0, 1], got {}",
                self.run.target_success
            ));
        }
        self.channel_points()?;
        if self.decoders.list.is_some() {
            self.decoder_specs()?;
        }
        self.criteria()?;
        Ok(())
    }

    /// Channel parameters per SNR point, with the threshold left at a placeholder.
    pub fn channel_points(&self) -> Result<Vec<ChannelParams>, CliError> {
        let ch = &self.channel;
        let powers: Vec<f64> = match (&ch.snr_db, &ch.on_power) {
            (Some(db), _) => db
                .iter()
                .map(|d| 10f64.powf(d / 10.0) * ch.noise_var / ch.fading_var)
                .collect(),
            (None, Some(p)) => p.clone(),
            (None, None) => Vec::new(),
        };
        let placeholder = ch.gamma.value().unwrap_or(1.0);
        powers
            .into_iter()
            .map(|p| {
                ChannelParams::new(p, ch.fading_var, ch.noise_var, placeholder)
                    .map_err(|e| CliError::Config(format!("channel: {e}")))
            })
            .collect()
    }

    /// Resolves `"auto"` entries against the rate optimiser for each SNR point.
    pub fn operating_points(&self) -> Result<Vec<OperatingPoint>, CliError> {
        let search = RateSearch {
            gamma: self.channel.gamma.value(),
            q_sp: self.network.q_sp.value(),
        };
        self.channel_points()?
            .into_iter()
            .map(|params| {
                let (gamma, q_sp) = match (search.gamma, search.q_sp) {
                    (Some(g), Some(q)) => (g, q),
                    _ => {
                        let best = optimize_rate_with(&params, self.network.k, search);
                        (best.gamma, best.q_sp)
                    }
                };
                let params = params
                    .with_threshold(gamma)
                    .map_err(|e| CliError::Config(format!("channel.gamma: {e}")))?;
                Ok(OperatingPoint { params, q_sp })
            })
            .collect()
    }

    pub fn network(&self, n: usize, q_sp: f64) -> Result<NetworkConfig, CliError> {
        NetworkConfig::new(self.network.ell, self.network.k, n, q_sp)
            .map_err(|e| CliError::Config(format!("network: {e}")))
    }

    pub fn bp_options(&self) -> BpOptions {
        BpOptions {
            max_iters: self.decoders.max_iters,
            damping: self.decoders.damping,
            tol: self.decoders.tol,
        }
    }

    /// Decoder list with `[decoders]` options applied and bare `bp_aht` expanded over `eta`.
    pub fn decoder_specs(&self) -> Result<Vec<DecoderSpec>, CliError> {
        let d = &self.decoders;
        let list = match &d.list {
            Some(list) if !list.is_empty() => list,
            Some(_) => return Err(CliError::Config("decoders.list must not be empty".into())),
            None => return Err(CliError::Config("sweep needs a [decoders] list".into())),
        };
        if !(0.0..1.0).contains(&d.damping) {
            return Err(CliError::Config(format!(
                "decoders.damping must lie in [0, 1), got {}",
                d.damping
            )));
        }
        let opts = self.bp_options();
        let mut specs = Vec::new();
        for entry in list {
            let entry = entry.trim();
            let parsed: Vec<DecoderSpec> = match entry {
                "bp_aht" => {
                    if d.eta.is_empty() {
                        return Err(CliError::Config("decoders.eta must not be empty".into()));
                    }
                    d.eta
                        .iter()
                        .map(|eta| format!("bp_aht:{eta}").parse())
                        .collect::<Result<_, _>>()
                }
                "alg1" => format!("alg1:{}", d.rho).parse().map(|s| vec![s]),
                other => other.parse().map(|s| vec![s]),
            }
            .map_err(|e| CliError::Config(format!("decoders.list entry `{entry}`: {e}")))?;
            specs.extend(parsed.into_iter().map(|s| s.with_bp_options(opts)));
        }
        Ok(specs)
    }

    pub fn criteria(&self) -> Result<Vec<RecoveryCriterion>, CliError> {
        if self.criteria.list.is_empty() {
            return Err(CliError::Config("criteria.list must not be empty".into()));
        }
        self.criteria
            .list
            .iter()
            .map(|c| {
                c.parse()
                    .map_err(|e| CliError::Config(format!("criteria.list entry `{c}`: {e}")))
            })
            .collect()
    }

    pub fn name(&self) -> &str {
        self.run.name.as_deref().unwrap_or("experiment")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[network]
ell = 100
k = 5

[channel]
snr_db = [0, 10]

[sweep]
n = [50, 100]

[decoders]
list = ["ncomp", "bp_st", "bp_aht"]
eta = [0.3, 0.6]

[criteria]
list = ["exact", "partial:80"]
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.network.q_sp, Auto::Auto);
        assert_eq!(cfg.run.trials, 500);
        let specs = cfg.decoder_specs().unwrap();
        let names: Vec<String> = specs.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["ncomp", "bp_st", "bp_aht:0.3", "bp_aht:0.6"]);
        assert_eq!(cfg.criteria().unwrap().len(), 2);
        let points = cfg.channel_points().unwrap();
        assert!((points[1].snr_db() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn auto_resolves_through_optimiser() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let ops = cfg.operating_points().unwrap();
        assert_eq!(ops.len(), 2);
        for op in ops {
            assert!(op.q_sp > 0.0 && op.q_sp < 1.0);
            assert!(op.params.threshold() > 0.0);
        }
    }

    #[test]
    fn fixed_values_pass_through() {
        let text = MINIMAL
            .replace("k = 5", "k = 5\nq_sp = 0.05")
            .replace("snr_db = [0, 10]", "snr_db = [10]\ngamma = 3");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let op = cfg.operating_points().unwrap()[0];
        assert_eq!(op.q_sp, 0.05);
        assert_eq!(op.params.threshold(), 3.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            MINIMAL.replace(r#"list = ["ncomp", "bp_st", "bp_aht"]"#, "list = []"),
            MINIMAL.replace(r#""exact", "partial:80""#, r#""exact", "partial:180""#),
            MINIMAL.replace("k = 5", "k = 500"),
            MINIMAL.replace("snr_db = [0, 10]", "snr_db = []"),
            MINIMAL.replace("ell = 100", "ell = 100\nbogus = 1"),
            MINIMAL.replace(r#""ncomp""#, r#""magic""#),
            MINIMAL.replace("k = 5", "k = 5\nq_sp = \"sometimes\""),
        ];
        for text in cases {
            assert!(
                matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ExperimentConfig::parse("[network]\nell = \"many\"\nk = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("ell"), "{msg}");
    }
}
