//! Loopy belief propagation on the device/measurement bipartite graph.
//!
//! A measurement depends on the activity vector only through the number of
//! active neighbours, so each factor update is a count convolution rather
//! than a sum over `2^d` configurations.

use std::f64::consts::LN_2;

use super::{check_shapes, top_k, DecoderKind, DecoderOutput, LikelihoodModel};
use crate::model::{ActivitySet, MeasurementVector, PreambleMatrix};
use crate::{Error, Result};

/// Messages are clamped to `+-MESSAGE_CLAMP_BITS` (log2 odds).
pub const MESSAGE_CLAMP_BITS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpOptions {
    pub max_iters: usize,
    /// Weight of the previous factor message; not applied on the first sweep.
    pub damping: f64,
    /// Stop once no marginal moves by this much.
    pub tol: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            damping: 0.5,
            tol: 1e-6,
        }
    }
}

impl BpOptions {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::invalid(
                "damping",
                format!("must lie in [0, 1), got {}", self.damping),
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid(
                "tol",
                format!("must be >= 0, got {}", self.tol),
            ));
        }
        Ok(())
    }
}

/// Converged (or abandoned) message state. Edges are stored factor-major:
/// edge `e` in `edge_range(t)` joins slot `t` to device `edge_devices()[e]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BpState {
    marginals: Vec<f64>,
    iterations: usize,
    converged: bool,
    factor_start: Vec<usize>,
    edge_device: Vec<usize>,
    // natural-log odds
    to_factor: Vec<f64>,
    to_variable: Vec<f64>,
}

impl BpState {
    /// Estimates of `P(beta_i = 1 | Z)`.
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn edge_range(&self, slot: usize) -> std::ops::Range<usize> {
        self.factor_start[slot]..self.factor_start[slot + 1]
    }

    pub fn edge_devices(&self) -> &[usize] {
        &self.edge_device
    }

    /// Variable-to-factor log2 odds, one per edge.
    pub fn variable_messages(&self) -> Vec<f64> {
        self.to_factor.iter().map(|m| m / LN_2).collect()
    }

    /// Factor-to-variable log2 odds, one per edge.
    pub fn factor_messages(&self) -> Vec<f64> {
        self.to_variable.iter().map(|m| m / LN_2).collect()
    }

    fn output(&self, estimate: Vec<usize>, decoder: DecoderKind) -> DecoderOutput {
        let estimate = ActivitySet::new(self.marginals.len(), estimate)
            .expect("indices come from the marginal vector");
        DecoderOutput {
            estimate,
            scores: self.marginals.clone(),
            decoder,
            converged: Some(self.converged),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Outgoing factor messages `ln(A_1 / A_0)` for every neighbour of one factor.
///
/// `probs[j]` is the incoming belief that neighbour `j` is active and
/// `lik[c] = P(z | c active neighbours)` for `c = 0..=probs.len()`.
/// `A_b` is the likelihood averaged over the other neighbours with neighbour
/// `j` pinned to `b`. Both zero gives 0.
pub fn factor_message_llrs(probs: &[f64], lik: &[f64]) -> Vec<f64> {
    let d = probs.len();
    assert_eq!(
        lik.len(),
        d + 1,
        "likelihood table must cover counts 0..=degree"
    );
    // backward[j] has length j + 2 and holds E[lik(c + S_j)] where S_j counts
    // active neighbours among j+1..d; stored flat, block j starts at j(j+3)/2.
    let start = |j: usize| j * (j + 3) / 2;
    let mut backward = vec![0.0; start(d)];
    if d > 0 {
        let last = start(d - 1);
        backward[last..last + d + 1].copy_from_slice(lik);
        for j in (0..d - 1).rev() {
            let (head, tail) = backward.split_at_mut(start(j + 1));
            let next = &tail[..j + 3];
            let p = probs[j + 1];
            for (c, b) in head[start(j)..].iter_mut().enumerate() {
                *b = (1.0 - p) * next[c] + p * next[c + 1];
            }
        }
    }
    let mut prefix = vec![1.0];
    let mut out = Vec::with_capacity(d);
    for (j, &p) in probs.iter().enumerate() {
        let b = &backward[start(j)..start(j) + j + 2];
        let (mut a0, mut a1) = (0.0, 0.0);
        for (c, &w) in prefix.iter().enumerate() {
            a0 += w * b[c];
            a1 += w * b[c + 1];
        }
        out.push(if a0 == 0.0 && a1 == 0.0 {
            0.0
        } else {
            (a1 / a0).ln()
        });
        let mut grown = vec![0.0; prefix.len() + 1];
        for (c, &w) in prefix.iter().enumerate() {
            grown[c] += (1.0 - p) * w;
            grown[c + 1] += p * w;
        }
        prefix = grown;
    }
    out
}

/// Synchronous loopy BP with a common activity prior.
///
/// The likelihood table is rebuilt from `model`'s channel parameters up to the
/// largest slot degree, so `model.k_max()` does not constrain it.
pub fn bp_marginals(
    z: &MeasurementVector,
    preambles: &PreambleMatrix,
    model: &LikelihoodModel,
    prior: f64,
    opts: &BpOptions,
) -> Result<BpState> {
    check_shapes(z, preambles)?;
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::invalid(
            "prior",
            format!("must lie in (0, 1), got {prior}"),
        ));
    }
    opts.validate()?;
    let ell = preambles.devices();

    let mut factor_start = vec![0];
    let mut edge_device = Vec::new();
    for row in preambles.rows() {
        edge_device.extend(row.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i));
        factor_start.push(edge_device.len());
    }
    let max_degree = factor_start
        .windows(2)
        .map(|w| w[1] - w[0])
        .max()
        .unwrap_or(0);
    let table = if model.k_max() >= max_degree {
        model.clone()
    } else {
        LikelihoodModel::new(*model.params(), max_degree)
    };
    // per-slot likelihoods scaled by their maximum; ratios are unaffected
    let liks: Vec<Vec<f64>> = (0..z.len())
        .map(|t| {
            let d = factor_start[t + 1] - factor_start[t];
            let logs: Vec<f64> = (0..=d).map(|c| table.log_prob(c, z.get(t))).collect();
            let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            logs.iter().map(|l| (l - top).exp2()).collect()
        })
        .collect();

    let clamp = MESSAGE_CLAMP_BITS * LN_2;
    let prior_llr = (prior / (1.0 - prior)).ln();
    let edges = edge_device.len();
    let mut to_factor = vec![0.0; edges];
    let mut to_variable = vec![0.0; edges];
    let mut marginals = vec![prior; ell];
    let mut belief = vec![prior_llr; ell];
    let mut iterations = 0;
    let mut converged = false;
    let mut probs = Vec::with_capacity(max_degree);

    while iterations < opts.max_iters {
        for (e, &i) in edge_device.iter().enumerate() {
            to_factor[e] = (belief[i] - to_variable[e]).clamp(-clamp, clamp);
        }
        for t in 0..z.len() {
            let range = factor_start[t]..factor_start[t + 1];
            if range.is_empty() {
                continue;
            }
            probs.clear();
            probs.extend(to_factor[range.clone()].iter().map(|&m| sigmoid(m)));
            let fresh = factor_message_llrs(&probs, &liks[t]);
            for (old, new) in to_variable[range].iter_mut().zip(fresh) {
                let new = new.clamp(-clamp, clamp);
                *old = if iterations == 0 {
                    new
                } else {
                    opts.damping * *old + (1.0 - opts.damping) * new
                };
            }
        }
        belief.fill(prior_llr);
        for (e, &i) in edge_device.iter().enumerate() {
            belief[i] += to_variable[e];
        }
        iterations += 1;
        let mut change: f64 = 0.0;
        for (m, &b) in marginals.iter_mut().zip(&belief) {
            let fresh = sigmoid(b);
            change = change.max((fresh - *m).abs());
            *m = fresh;
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(BpState {
        marginals,
        iterations,
        converged,
        factor_start,
        edge_device,
        to_factor,
        to_variable,
    })
}

/// Soft thresholding: the `k` largest marginals.
pub fn bp_st(state: &BpState, k: usize) -> DecoderOutput {
    let k = k.min(state.marginals.len());
    state.output(top_k(&state.marginals, k), DecoderKind::BpSt)
}

/// Hard thresholding at one half.
pub fn bp_sht(state: &BpState) -> DecoderOutput {
    state.output(above(&state.marginals, 0.5), DecoderKind::BpSht)
}

/// Hard thresholding at `eta`.
pub fn bp_aht(state: &BpState, eta: f64) -> Result<DecoderOutput> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(
            "eta",
            format!("must lie in (0, 1), got {eta}"),
        ));
    }
    Ok(state.output(above(&state.marginals, eta), DecoderKind::BpAht))
}

fn above(marginals: &[f64], eta: f64) -> Vec<usize> {
    marginals
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > eta)
        .map(|(i, _)| i)
        .collect()
}
