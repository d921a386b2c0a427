//! Decoders that enumerate every size-`k` candidate set.

use super::{check_shapes, DecoderKind, DecoderOutput, LikelihoodModel};
use crate::model::{
    binomial_coefficient, binomial_weight_pmf, ActivitySet, MeasurementVector, PreambleMatrix,
};
use crate::{Error, Result};

/// Largest `C(ell, k)` the exhaustive decoders accept by default.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

pub fn check_enumeration(ell: usize, k: usize, cap: u128) -> Result<u128> {
    let subsets = binomial_coefficient(ell, k);
    if subsets > cap {
        return Err(Error::Infeasible {
            ell,
            k,
            subsets,
            cap,
        });
    }
    Ok(subsets)
}

/// Lexicographic walk over size-`k` subsets of `0..ell` that keeps, for every
/// prefix depth, the summed slot weights of the chosen columns.
struct CandidateWalk<'a> {
    preambles: &'a PreambleMatrix,
    ell: usize,
    members: Vec<usize>,
    // prefix[d] = slot weights of members[..d]
    prefix: Vec<Vec<usize>>,
    started: bool,
}

impl<'a> CandidateWalk<'a> {
    fn new(preambles: &'a PreambleMatrix, k: usize) -> Self {
        let n = preambles.slots();
        Self {
            preambles,
            ell: preambles.devices(),
            members: (0..k).collect(),
            prefix: vec![vec![0; n]; k + 1],
            started: false,
        }
    }

    fn rebuild_from(&mut self, depth: usize) {
        for d in depth..self.members.len() {
            let (head, tail) = self.prefix.split_at_mut(d + 1);
            let device = self.members[d];
            for (t, (next, prev)) in tail[0].iter_mut().zip(&head[d]).enumerate() {
                *next = prev + self.preambles.get(t, device) as usize;
            }
        }
    }

    /// Moves to the next candidate; `false` once exhausted.
    fn advance(&mut self) -> bool {
        let k = self.members.len();
        if !self.started {
            self.started = true;
            if k > self.ell {
                return false;
            }
            self.rebuild_from(0);
            return true;
        }
        let Some(pos) = (0..k).rev().find(|&i| self.members[i] < self.ell - k + i) else {
            return false;
        };
        self.members[pos] += 1;
        for i in pos + 1..k {
            self.members[i] = self.members[i - 1] + 1;
        }
        self.rebuild_from(pos);
        true
    }

    fn weights(&self) -> &[usize] {
        &self.prefix[self.members.len()]
    }
}

fn check_inputs(
    z: &MeasurementVector,
    preambles: &PreambleMatrix,
    k: usize,
    model: &LikelihoodModel,
    cap: u128,
) -> Result<()> {
    check_shapes(z, preambles)?;
    if k == 0 || k > preambles.devices() {
        return Err(Error::invalid("k", format!("need 1 <= k <= ell, got {k}")));
    }
    model.require(k)?;
    check_enumeration(preambles.devices(), k, cap)?;
    Ok(())
}

pub fn ml_exhaustive(
    z: &MeasurementVector,
    preambles: &PreambleMatrix,
    k: usize,
    model: &LikelihoodModel,
) -> Result<DecoderOutput> {
    ml_exhaustive_with_cap(z, preambles, k, model, DEFAULT_ENUMERATION_CAP)
}

/// Size-`k` set maximising `log2 p(z | x(A))`, the lexicographically smallest
/// on ties. `scores[i]` is the best log-likelihood over candidates containing `i`.
pub fn ml_exhaustive_with_cap(
    z: &MeasurementVector,
    preambles: &PreambleMatrix,
    k: usize,
    model: &LikelihoodModel,
    cap: u128,
) -> Result<DecoderOutput> {
    check_inputs(z, preambles, k, model, cap)?;
    let mut walk = CandidateWalk::new(preambles, k);
    let mut scores = vec![f64::NEG_INFINITY; preambles.devices()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    while walk.advance() {
        let ll: f64 = walk
            .weights()
            .iter()
            .zip(z.bits())
            .map(|(&v, &bit)| model.log_prob(v, bit))
            .sum();
        for &i in &walk.members {
            if ll > scores[i] {
                scores[i] = ll;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, walk.members.clone()));
        }
    }
    let (_, members) = best.expect("at least one candidate");
    Ok(DecoderOutput {
        estimate: ActivitySet::new(preambles.devices(), members)?,
        scores,
        decoder: DecoderKind::MlExhaustive,
        converged: None,
    })
}

/// `log2(C(n, r))` without forming the coefficient.
fn log2_binomial(n: usize, r: usize) -> f64 {
    (0..r)
        .map(|i| ((n - i) as f64 / (i + 1) as f64).log2())
        .sum()
}

/// `eta_j = log2(rho / (k C(k, j) C(ell - k, j)))` for `j = 1..=k` (index `j - 1`).
pub fn threshold_values(ell: usize, k: usize, rho: f64) -> Vec<f64> {
    (1..=k)
        .map(|j| rho.log2() - (k as f64).log2() - log2_binomial(k, j) - log2_binomial(ell - k, j))
        .collect()
}

/// Outcome of all partition tests for one candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTestReport {
    /// Partition tests evaluated, `2^k - 1`.
    pub tests_run: usize,
    /// The counter `n_t`: `C(k, j)` is added for each level `j` whose tests all pass.
    pub tests_passed: usize,
    /// Smallest `LLR - eta_j` over all partitions.
    pub min_margin: f64,
    pub passed: bool,
}

/// Everything about a threshold-test run that depends only on `(k, ell, rho, q_sp)`.
struct ThresholdPlan {
    k: usize,
    eta: Vec<f64>,
    // marginal[j][u][z] = log2 sum_a Bin(a; j, q) P(z | u + a), u = 0..=k-j
    marginal: Vec<Vec<[f64; 2]>>,
}

impl ThresholdPlan {
    fn new(ell: usize, k: usize, model: &LikelihoodModel, rho: f64, q_sp: f64) -> Self {
        let prob = |v: usize, z: usize| model.table()[v][z].exp2();
        let marginal = (0..=k)
            .map(|j| {
                let pmf = binomial_weight_pmf(j, q_sp);
                (0..=k - j)
                    .map(|u| {
                        let mix = |z: usize| -> f64 {
                            pmf.pmf()
                                .iter()
                                .enumerate()
                                .map(|(a, w)| w * prob(u + a, z))
                                .sum()
                        };
                        [mix(0).log2(), mix(1).log2()]
                    })
                    .collect()
            })
            .collect();
        Self {
            k,
            eta: threshold_values(ell, k, rho),
            marginal,
        }
    }

    /// Runs every partition test for the candidate whose columns are `members`.
    fn evaluate(
        &self,
        z: &MeasurementVector,
        preambles: &PreambleMatrix,
        members: &[usize],
        model: &LikelihoodModel,
    ) -> ThresholdTestReport {
        let k = self.k;
        let n = preambles.slots();
        let full = (1usize << k) - 1;
        // weights[mask] = per-slot On-count of the members selected by mask
        let mut weights = vec![vec![0usize; n]; 1 << k];
        for mask in 1..=full {
            let low = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            let (head, tail) = weights.split_at_mut(mask);
            for (t, w) in tail[0].iter_mut().enumerate() {
                *w = head[rest][t] + preambles.get(t, members[low]) as usize;
            }
        }
        let numerator: f64 = weights[full]
            .iter()
            .zip(z.bits())
            .map(|(&v, &bit)| model.log_prob(v, bit))
            .sum();

        let mut level_ok = vec![true; k + 1];
        let mut min_margin = f64::INFINITY;
        let mut tests_run = 0;
        for known_out in 1..=full {
            // `known_out` is I^0; its complement I^1 keeps exact slot weights
            let j = known_out.count_ones() as usize;
            let kept = full & !known_out;
            let denominator: f64 = weights[kept]
                .iter()
                .zip(z.bits())
                .map(|(&u, &bit)| self.marginal[j][u][bit as usize])
                .sum();
            let margin = (numerator - denominator) - self.eta[j - 1];
            tests_run += 1;
            // NaN (impossible observations on both sides) counts as a failure
            if !(margin > 0.0) {
                level_ok[j] = false;
            }
            if margin < min_margin || margin.is_nan() {
                min_margin = margin;
            }
        }
        let tests_passed = (1..=k)
            .filter(|&j| level_ok[j])
            .map(|j| binomial_coefficient(k, j) as usize)
            .sum();
        ThresholdTestReport {
            tests_run,
            tests_passed,
            min_margin,
            passed: tests_passed == full,
        }
    }
}

/// Threshold tests of a single candidate set (0-based `members`, size `k`).
pub fn threshold_test(
    z: &MeasurementVector,
    preambles: &PreambleMatrix,
    members: &[usize],
    model: &LikelihoodModel,
    rho: f64,
    q_sp: f64,
) -> Result<ThresholdTestReport> {
    check_shapes(z, preambles)?;
    let k = members.len();
    if k == 0 || k >= preambles.devices() {
        return Err(Error::invalid("members", "need 1 <= k < ell"));
    }
    model.require(k)?;
    let plan = ThresholdPlan::new(preambles.devices(), k, model, rho, q_sp);
    Ok(plan.evaluate(z, preambles, members, model))
}

pub fn algorithm1_decode(
    z: &MeasurementVector,
    preambles: &PreambleMatrix,
    k: usize,
    model: &LikelihoodModel,
    rho: f64,
    q_sp: f64,
) -> Result<DecoderOutput> {
    algorithm1_decode_with_cap(z, preambles, k, model, rho, q_sp, DEFAULT_ENUMERATION_CAP)
}

/// Threshold-test decoder: a candidate passes when every partition
/// `(I^0, I^1)` clears its `eta_{|I^0|}`; the unique passing set is returned.
///
/// The denominator `p(z | x(I^1))` averages the unknown contribution of the
/// `|I^0|` left-out members over i.i.d. Bernoulli(`q_sp`) participation in
/// each slot. `scores[i]` is the best `min_margin` over candidates containing `i`.
pub fn algorithm1_decode_with_cap(
    z: &MeasurementVector,
    preambles: &PreambleMatrix,
    k: usize,
    model: &LikelihoodModel,
    rho: f64,
    q_sp: f64,
    cap: u128,
) -> Result<DecoderOutput> {
    check_inputs(z, preambles, k, model, cap)?;
    if k >= preambles.devices() {
        return Err(Error::invalid("k", "need k < ell"));
    }
    if !(rho > 0.0) {
        return Err(Error::invalid("rho", format!("must be > 0, got {rho}")));
    }
    if !(q_sp > 0.0 && q_sp < 1.0) {
        return Err(Error::invalid(
            "q_sp",
            format!("must lie in (0, 1), got {q_sp}"),
        ));
    }
    let plan = ThresholdPlan::new(preambles.devices(), k, model, rho, q_sp);
    let mut walk = CandidateWalk::new(preambles, k);
    let mut scores = vec![f64::NEG_INFINITY; preambles.devices()];
    let mut passing: Vec<Vec<usize>> = Vec::new();
    while walk.advance() {
        let report = plan.evaluate(z, preambles, &walk.members, model);
        for &i in &walk.members {
            if report.min_margin > scores[i] {
                scores[i] = report.min_margin;
            }
        }
        if report.passed {
            passing.push(walk.members.clone());
        }
    }
    match passing.len() {
        0 => Err(Error::NoSetPassed),
        1 => Ok(DecoderOutput {
            estimate: ActivitySet::new(preambles.devices(), passing.pop().unwrap())?,
            scores,
            decoder: DecoderKind::Algorithm1,
            converged: None,
        }),
        many => Err(Error::MultipleSetsPassed(many)),
    }
}
