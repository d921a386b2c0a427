//! Recovery criteria and the seeded Monte Carlo estimator behind every sweep.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::channel::{
    generate_preambles, generate_preambles_with, sample_active_set, simulate_equivalent_with,
    RngSeed,
};
use crate::decoders::{
    algorithm1_decode, bp_aht, bp_marginals, bp_sht, bp_st, check_enumeration, ml_exhaustive,
    ncomp_decode, BpOptions, BpState, DecoderOutput, LikelihoodModel, DEFAULT_ENUMERATION_CAP,
};
use crate::model::{ActivitySet, ChannelParams, MeasurementVector, NetworkConfig, PreambleMatrix};
use crate::{Error, Result};

// absorbs rounding in k (1 -+ sigma) and k (1 - zeta / 100)
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecoveryCriterion {
    Exact,
    /// At most `k (1 - zeta / 100)` misdetections.
    Partial {
        zeta: f64,
    },
    /// `Partial` plus `k (1 - deviation) <= k_hat <= k (1 + deviation)`.
    PartialUnknownK {
        zeta: f64,
        deviation: f64,
    },
}

impl RecoveryCriterion {
    pub fn partial(zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        Ok(Self::Partial { zeta })
    }

    pub fn partial_unknown_k(zeta: f64, deviation: f64) -> Result<Self> {
        check_zeta(zeta)?;
        if !(deviation >= 0.0 && deviation.is_finite()) {
            return Err(Error::invalid(
                "deviation",
                format!("must be >= 0, got {deviation}"),
            ));
        }
        Ok(Self::PartialUnknownK { zeta, deviation })
    }

    /// Recovery percentage; exact recovery is 100.
    pub fn zeta(&self) -> f64 {
        match *self {
            Self::Exact => 100.0,
            Self::Partial { zeta } | Self::PartialUnknownK { zeta, .. } => zeta,
        }
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if !(zeta > 0.0 && zeta <= 100.0) {
        return Err(Error::invalid(
            "zeta",
            format!("must lie in (0, 100], got {zeta}"),
        ));
    }
    Ok(())
}

impl fmt::Display for RecoveryCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => f.write_str("exact"),
            Self::Partial { zeta } => write!(f, "partial:{zeta}"),
            Self::PartialUnknownK { zeta, deviation } => {
                write!(f, "partial_unknown_k:{zeta}:{deviation}")
            }
        }
    }
}

impl FromStr for RecoveryCriterion {
    type Err = Error;

    /// `exact`, `partial:ZETA` or `partial_unknown_k:ZETA:DEVIATION`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid("criterion", format!("`{p}` is not a number in `{s}`")))
        };
        match parts.as_slice() {
            ["exact"] => Ok(Self::Exact),
            ["partial", zeta] => Self::partial(num(zeta)?),
            ["partial_unknown_k", zeta, dev] => Self::partial_unknown_k(num(zeta)?, num(dev)?),
            _ => Err(Error::invalid(
                "criterion",
                format!("unrecognised criterion `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Active devices missing from the estimate.
    pub misdetections: usize,
    /// Estimated devices that were not active.
    pub false_positives: usize,
    pub estimated_size: usize,
    pub success: bool,
}

impl TrialOutcome {
    /// Outcome of a decoder that declared an error instead of an estimate.
    pub fn declared_error(k: usize) -> Self {
        Self {
            misdetections: k,
            false_positives: 0,
            estimated_size: 0,
            success: false,
        }
    }
}

pub fn judge(
    truth: &ActivitySet,
    estimate: &ActivitySet,
    criterion: &RecoveryCriterion,
) -> Result<TrialOutcome> {
    if truth.population() != estimate.population() {
        return Err(Error::DimensionMismatch(format!(
            "truth over {} devices, estimate over {}",
            truth.population(),
            estimate.population()
        )));
    }
    let misdetections = truth.difference_count(estimate);
    let false_positives = estimate.difference_count(truth);
    let k = truth.len() as f64;
    let k_hat = estimate.len();
    let tolerated = |zeta: f64| misdetections as f64 <= k * (1.0 - zeta / 100.0) + SLACK;
    let success = match *criterion {
        RecoveryCriterion::Exact => truth == estimate,
        RecoveryCriterion::Partial { zeta } => tolerated(zeta),
        RecoveryCriterion::PartialUnknownK { zeta, deviation } => {
            let size_ok = (k_hat as f64) >= k * (1.0 - deviation) - SLACK
                && (k_hat as f64) <= k * (1.0 + deviation) + SLACK;
            tolerated(zeta) && size_ok
        }
    };
    Ok(TrialOutcome {
        misdetections,
        false_positives,
        estimated_size: k_hat,
        success,
    })
}

/// A decoder together with the options it runs with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecoderSpec {
    Ml,
    Algorithm1 { rho: f64 },
    Ncomp,
    BpSt(BpOptions),
    BpSht(BpOptions),
    BpAht { eta: f64, opts: BpOptions },
}

impl DecoderSpec {
    fn bp_options(&self) -> Option<BpOptions> {
        match *self {
            Self::BpSt(o) | Self::BpSht(o) | Self::BpAht { opts: o, .. } => Some(o),
            _ => None,
        }
    }

    /// Replaces the BP options; other decoders are returned unchanged.
    pub fn with_bp_options(self, opts: BpOptions) -> Self {
        match self {
            Self::BpSt(_) => Self::BpSt(opts),
            Self::BpSht(_) => Self::BpSht(opts),
            Self::BpAht { eta, .. } => Self::BpAht { eta, opts },
            other => other,
        }
    }

    /// Fails with [`Error::Infeasible`] when an exhaustive decoder cannot run at `(ell, k)`.
    pub fn check_feasible(&self, ell: usize, k: usize) -> Result<()> {
        match self {
            Self::Ml | Self::Algorithm1 { .. } => {
                check_enumeration(ell, k, DEFAULT_ENUMERATION_CAP).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Algorithm1 { rho } if !(rho > 0.0 && rho.is_finite()) => {
                Err(Error::invalid("rho", format!("must be > 0, got {rho}")))
            }
            Self::BpAht { eta, .. } if !(eta > 0.0 && eta < 1.0) => Err(Error::invalid(
                "eta",
                format!("must lie in (0, 1), got {eta}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DecoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ml => f.write_str("ml"),
            Self::Algorithm1 { rho } => write!(f, "alg1:{rho}"),
            Self::Ncomp => f.write_str("ncomp"),
            Self::BpSt(_) => f.write_str("bp_st"),
            Self::BpSht(_) => f.write_str("bp_sht"),
            Self::BpAht { eta, .. } => write!(f, "bp_aht:{eta}"),
        }
    }
}

impl FromStr for DecoderSpec {
    type Err = Error;

    /// `ml`, `alg1[:RHO]`, `ncomp`, `bp_st`, `bp_sht`, `bp_aht:ETA`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.trim().split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s.trim(), None),
        };
        let num = |what: &'static str, p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(what, format!("`{p}` is not a number in `{s}`")))
        };
        let spec = match (name, arg) {
            ("ml", None) => Self::Ml,
            ("alg1", None) => Self::Algorithm1 { rho: 1.0 },
            ("alg1", Some(r)) => Self::Algorithm1 {
                rho: num("rho", r)?,
            },
            ("ncomp", None) => Self::Ncomp,
            ("bp_st", None) => Self::BpSt(BpOptions::default()),
            ("bp_sht", None) => Self::BpSht(BpOptions::default()),
            ("bp_aht", Some(e)) => Self::BpAht {
                eta: num("eta", e)?,
                opts: BpOptions::default(),
            },
            _ => {
                return Err(Error::invalid(
                    "decoder",
                    format!("unrecognised decoder `{s}`"),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Aggregate of one `(cfg, params, decoder, criterion)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub ell: usize,
    pub k: usize,
    pub n: usize,
    pub snr_db: f64,
    pub q_sp: f64,
    pub gamma: f64,
    pub decoder: DecoderSpec,
    pub criterion: RecoveryCriterion,
    pub trials: usize,
    pub successes: usize,
    pub success_prob: f64,
    /// Binomial standard error of `success_prob`.
    pub stderr: f64,
    /// Time for the whole batch the cell was estimated in.
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MonteCarloOptions {
    /// Reuse one preamble matrix (drawn from its own stream) for every trial.
    pub fixed_codebook: bool,
}

/// Stream reserved for the shared codebook in fixed-codebook mode.
const CODEBOOK_STREAM: u64 = u64::MAX;

pub fn monte_carlo(
    cfg: &NetworkConfig,
    params: &ChannelParams,
    decoder: DecoderSpec,
    criterion: RecoveryCriterion,
    trials: usize,
    seed: u64,
) -> Result<SweepRecord> {
    let mut records = monte_carlo_many(
        cfg,
        params,
        &[decoder],
        &[criterion],
        trials,
        seed,
        MonteCarloOptions::default(),
    )?;
    Ok(records.remove(0))
}

/// Runs every decoder and criterion on the same trials.
///
/// Trial `t` draws from stream `t` of `seed`: truth set, then preambles, then
/// measurements. Records come back decoder-major, criterion-minor, and do not
/// depend on how many worker threads rayon uses.
pub fn monte_carlo_many(
    cfg: &NetworkConfig,
    params: &ChannelParams,
    decoders: &[DecoderSpec],
    criteria: &[RecoveryCriterion],
    trials: usize,
    seed: u64,
    opts: MonteCarloOptions,
) -> Result<Vec<SweepRecord>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    if decoders.is_empty() || criteria.is_empty() {
        return Err(Error::invalid(
            "decoders",
            "need at least one decoder and one criterion",
        ));
    }
    let (ell, k) = (cfg.total_devices(), cfg.active_devices());
    for d in decoders {
        d.validate()?;
        d.check_feasible(ell, k)?;
    }
    let started = Instant::now();
    let codebook = opts
        .fixed_codebook
        .then(|| generate_preambles(cfg, RngSeed::new(seed, CODEBOOK_STREAM)));
    let model = LikelihoodModel::new(*params, k);
    let runner = TrialRunner {
        cfg,
        params,
        decoders,
        criteria,
        model: &model,
    };

    let per_trial: Vec<Vec<bool>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| runner.run(RngSeed::new(seed, t), codebook.as_ref()))
        .collect::<Result<_>>()?;

    let wall_time = started.elapsed();
    let width = criteria.len();
    let mut records = Vec::with_capacity(decoders.len() * width);
    for (di, decoder) in decoders.iter().enumerate() {
        for (ci, criterion) in criteria.iter().enumerate() {
            let successes = per_trial.iter().filter(|row| row[di * width + ci]).count();
            let p = successes as f64 / trials as f64;
            records.push(SweepRecord {
                ell,
                k,
                n: cfg.preamble_len(),
                snr_db: params.snr_db(),
                q_sp: cfg.sampling_prob(),
                gamma: params.threshold(),
                decoder: *decoder,
                criterion: *criterion,
                trials,
                successes,
                success_prob: p,
                stderr: (p * (1.0 - p) / trials as f64).sqrt(),
                wall_time,
            });
        }
    }
    Ok(records)
}

struct TrialRunner<'a> {
    cfg: &'a NetworkConfig,
    params: &'a ChannelParams,
    decoders: &'a [DecoderSpec],
    criteria: &'a [RecoveryCriterion],
    model: &'a LikelihoodModel,
}

impl TrialRunner<'_> {
    /// Success flags, decoder-major.
    fn run(&self, seed: RngSeed, codebook: Option<&PreambleMatrix>) -> Result<Vec<bool>> {
        let mut rng = seed.rng();
        let (ell, k) = (self.cfg.total_devices(), self.cfg.active_devices());
        let truth = sample_active_set(ell, k, &mut rng);
        let fresh;
        let preambles = match codebook {
            Some(x) => x,
            None => {
                fresh = generate_preambles_with(self.cfg, &mut rng);
                &fresh
            }
        };
        let z = simulate_equivalent_with(preambles, &truth, self.params, &mut rng)?;

        let mut bp_cache: HashMap<[u64; 3], BpState> = HashMap::new();
        let mut flags = Vec::with_capacity(self.decoders.len() * self.criteria.len());
        for decoder in self.decoders {
            let output = self.decode(decoder, &z, preambles, &mut bp_cache)?;
            for criterion in self.criteria {
                let outcome = match &output {
                    Some(out) => judge(&truth, &out.estimate, criterion)?,
                    None => TrialOutcome::declared_error(k),
                };
                flags.push(outcome.success);
            }
        }
        Ok(flags)
    }

    /// `None` when the decoder declared an error for this trial.
    fn decode(
        &self,
        decoder: &DecoderSpec,
        z: &MeasurementVector,
        preambles: &PreambleMatrix,
        bp_cache: &mut HashMap<[u64; 3], BpState>,
    ) -> Result<Option<DecoderOutput>> {
        let k = self.cfg.active_devices();
        if let Some(opts) = decoder.bp_options() {
            let key = [
                opts.max_iters as u64,
                opts.damping.to_bits(),
                opts.tol.to_bits(),
            ];
            let state = match bp_cache.entry(key) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let prior = k as f64 / self.cfg.total_devices() as f64;
                    e.insert(bp_marginals(z, preambles, self.model, prior, &opts)?)
                }
            };
            let state = &*state;
            return Ok(Some(match *decoder {
                DecoderSpec::BpSt(_) => bp_st(state, k),
                DecoderSpec::BpSht(_) => bp_sht(state),
                DecoderSpec::BpAht { eta, .. } => bp_aht(state, eta)?,
                _ => unreachable!("only BP specs carry BP options"),
            }));
        }
        let out = match *decoder {
            DecoderSpec::Ml => ml_exhaustive(z, preambles, k, self.model),
            DecoderSpec::Algorithm1 { rho } => {
                algorithm1_decode(z, preambles, k, self.model, rho, self.cfg.sampling_prob())
            }
            DecoderSpec::Ncomp => ncomp_decode(z, preambles, k),
            _ => unreachable!("BP specs handled above"),
        };
        match out {
            Ok(out) => Ok(Some(out)),
            Err(Error::NoSetPassed | Error::MultipleSetsPassed(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ell: usize, members: &[usize]) -> ActivitySet {
        ActivitySet::new(ell, members.to_vec()).unwrap()
    }

    #[test]
    fn criterion_strings_round_trip() {
        for s in [
            "exact",
            "partial:90",
            "partial_unknown_k:100:0.1",
            "partial:12.5",
        ] {
            let c: RecoveryCriterion = s.parse().unwrap();
            assert_eq!(c.to_string(), s);
        }
        for bad in [
            "",
            "partial",
            "partial:0",
            "partial:101",
            "partial_unknown_k:90:-1",
            "nope",
        ] {
            assert!(bad.parse::<RecoveryCriterion>().is_err(), "{bad}");
        }
        assert_eq!(RecoveryCriterion::Exact.zeta(), 100.0);
    }

    #[test]
    fn decoder_strings_round_trip() {
        for s in [
            "ml",
            "alg1:1",
            "alg1:0.5",
            "ncomp",
            "bp_st",
            "bp_sht",
            "bp_aht:0.3",
        ] {
            let d: DecoderSpec = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert_eq!(
            "alg1".parse::<DecoderSpec>().unwrap(),
            DecoderSpec::Algorithm1 { rho: 1.0 }
        );
        for bad in ["bp_aht", "bp_aht:1.5", "alg1:0", "ml:3", "bp"] {
            assert!(bad.parse::<DecoderSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn judge_partial_arithmetic() {
        let truth = set(100, &(0..25).collect::<Vec<_>>());
        let partial = RecoveryCriterion::partial(90.0).unwrap();
        let mut two_missed: Vec<usize> = (2..25).collect();
        two_missed.extend([50, 51]);
        let out = judge(&truth, &set(100, &two_missed), &partial).unwrap();
        assert_eq!((out.misdetections, out.false_positives), (2, 2));
        assert!(out.success);
        let mut three_missed: Vec<usize> = (3..25).collect();
        three_missed.extend([50, 51, 52]);
        assert!(
            !judge(&truth, &set(100, &three_missed), &partial)
                .unwrap()
                .success
        );
        assert!(
            !judge(&truth, &set(100, &two_missed), &RecoveryCriterion::Exact)
                .unwrap()
                .success
        );
    }

    #[test]
    fn judge_rejects_mismatched_population() {
        assert!(judge(&set(5, &[0]), &set(6, &[0]), &RecoveryCriterion::Exact).is_err());
    }

    #[test]
    fn declared_error_never_succeeds() {
        let o = TrialOutcome::declared_error(3);
        assert!(!o.success);
        assert_eq!(o.misdetections, 3);
    }

    fn noiseless() -> ChannelParams {
        ChannelParams::new(1e6, 1.0, 1.0, 50.0).unwrap()
    }

    #[test]
    fn single_trial_is_zero_or_one_and_repeatable() {
        let cfg = NetworkConfig::new(6, 1, 10, 0.5).unwrap();
        let a = monte_carlo(
            &cfg,
            &noiseless(),
            DecoderSpec::Ml,
            RecoveryCriterion::Exact,
            1,
            3,
        )
        .unwrap();
        let b = monte_carlo(
            &cfg,
            &noiseless(),
            DecoderSpec::Ml,
            RecoveryCriterion::Exact,
            1,
            3,
        )
        .unwrap();
        assert!(a.success_prob == 0.0 || a.success_prob == 1.0);
        assert_eq!(a.successes, b.successes);
    }

    #[test]
    fn shared_trials_nest_criteria() {
        let cfg = NetworkConfig::new(60, 5, 40, 0.1).unwrap();
        let params = ChannelParams::from_snr_db(10.0, 3.0).unwrap();
        let decoders = [DecoderSpec::Ncomp, DecoderSpec::BpSt(BpOptions::default())];
        let criteria = [
            RecoveryCriterion::Exact,
            RecoveryCriterion::partial(80.0).unwrap(),
        ];
        let recs = monte_carlo_many(
            &cfg,
            &params,
            &decoders,
            &criteria,
            40,
            9,
            MonteCarloOptions::default(),
        )
        .unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs[1].successes >= recs[0].successes);
        assert!(recs[3].successes >= recs[2].successes);
        assert_eq!(recs[2].decoder.to_string(), "bp_st");
    }

    #[test]
    fn infeasible_exhaustive_is_run_level_error() {
        let cfg = NetworkConfig::new(1000, 25, 10, 0.05).unwrap();
        let params = ChannelParams::from_snr_db(10.0, 3.0).unwrap();
        let err = monte_carlo(
            &cfg,
            &params,
            DecoderSpec::Ml,
            RecoveryCriterion::Exact,
            1,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn fixed_codebook_changes_draws_but_stays_deterministic() {
        let cfg = NetworkConfig::new(30, 3, 25, 0.2).unwrap();
        let params = ChannelParams::from_snr_db(10.0, 3.0).unwrap();
        let run = |fixed| {
            monte_carlo_many(
                &cfg,
                &params,
                &[DecoderSpec::Ncomp],
                &[RecoveryCriterion::Exact],
                50,
                1,
                MonteCarloOptions {
                    fixed_codebook: fixed,
                },
            )
            .unwrap()[0]
                .successes
        };
        assert_eq!(run(true), run(true));
        assert_eq!(run(false), run(false));
    }
}
