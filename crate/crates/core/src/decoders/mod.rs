//! Activity detectors operating on the binary measurement model.
//!
//! Every decoder maps `(Z, preambles)` to a [`DecoderOutput`]: an estimated
//! active set plus the per-device scores the estimate was derived from.
//! Ties are always broken towards the smaller device index.

mod bp;
mod exhaustive;
mod ncomp;

pub use bp::{
    bp_aht, bp_marginals, bp_sht, bp_st, factor_message_llrs, BpOptions, BpState,
    MESSAGE_CLAMP_BITS,
};
pub use exhaustive::{
    algorithm1_decode, algorithm1_decode_with_cap, check_enumeration, ml_exhaustive,
    ml_exhaustive_with_cap, threshold_test, threshold_values, ThresholdTestReport,
    DEFAULT_ENUMERATION_CAP,
};
pub use ncomp::ncomp_decode;

use std::cmp::Ordering;
use std::fmt;

use crate::model::{transition_prob_zero, ActivitySet, ChannelParams, MeasurementVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    MlExhaustive,
    Algorithm1,
    Ncomp,
    BpSt,
    BpSht,
    BpAht,
}

impl DecoderKind {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderKind::MlExhaustive => "ml",
            DecoderKind::Algorithm1 => "alg1",
            DecoderKind::Ncomp => "ncomp",
            DecoderKind::BpSt => "bp_st",
            DecoderKind::BpSht => "bp_sht",
            DecoderKind::BpAht => "bp_aht",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutput {
    pub estimate: ActivitySet,
    /// Ratio statistics, marginals or max-marginal log-likelihoods, depending on the decoder.
    pub scores: Vec<f64>,
    pub decoder: DecoderKind,
    /// Only set by the belief-propagation decoders.
    pub converged: Option<bool>,
}

/// `log2 P(Z = z | V = v)` for `v = 0..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    params: ChannelParams,
    table: Vec<[f64; 2]>,
}

impl LikelihoodModel {
    pub fn new(params: ChannelParams, k_max: usize) -> Self {
        let table = (0..=k_max)
            .map(|v| {
                // log(1 - p_v) = -gamma / (v sigma^2 P + sigma_w^2) exactly
                let exponent = params.threshold() / params.received_var(v);
                let log_zero = transition_prob_zero(&params, v).log2();
                [log_zero, -exponent / std::f64::consts::LN_2]
            })
            .collect();
        Self { params, table }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn k_max(&self) -> usize {
        self.table.len() - 1
    }

    #[inline]
    pub fn log_prob(&self, v: usize, z: bool) -> f64 {
        self.table[v][z as usize]
    }

    pub fn table(&self) -> &[[f64; 2]] {
        &self.table
    }

    pub(crate) fn require(&self, weight: usize) -> Result<()> {
        if weight > self.k_max() {
            return Err(Error::WeightOutOfRange {
                weight,
                max: self.k_max(),
            });
        }
        Ok(())
    }
}

/// `sum_t log2 P(z_t | v_t)` for hypothesised per-slot On-counts.
pub fn log_likelihood(
    z: &MeasurementVector,
    weights: &[usize],
    model: &LikelihoodModel,
) -> Result<f64> {
    if weights.len() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} slot weights for {} measurements",
            weights.len(),
            z.len()
        )));
    }
    let mut total = 0.0;
    for (&v, &bit) in weights.iter().zip(z.bits()) {
        model.require(v)?;
        total += model.log_prob(v, bit);
    }
    Ok(total)
}

/// Indices of the `k` largest scores; ties go to the smaller index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    order.truncate(k);
    order.sort_unstable();
    order
}

pub(crate) fn check_shapes(
    z: &MeasurementVector,
    preambles: &crate::model::PreambleMatrix,
) -> Result<()> {
    if z.len() != preambles.slots() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurements for a preamble length of {}",
            z.len(),
            preambles.slots()
        )));
    }
    Ok(())
}
