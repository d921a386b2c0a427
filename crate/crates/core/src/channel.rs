//! Preamble generation and the two channel simulators.
//!
//! [`simulate_fading`] runs the physical pipeline: fresh CN(0, sigma^2)
//! coefficients for every device in every channel-use, AWGN, envelope
//! detection and thresholding. [`simulate_equivalent`] draws each output
//! directly from `p_v`, which has the same law because `|S|^2` given `V = v`
//! is exponential with mean `v sigma^2 P + sigma_w^2`. Sweeps use the
//! equivalent path; the fading path is kept as a validation oracle.

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{
    transition_prob_zero, ActivitySet, ChannelParams, MeasurementVector, NetworkConfig,
    PreambleMatrix,
};
use crate::{Error, Result};

/// A (seed, stream) pair naming one reproducible ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One channel-use worth of fading: a coefficient per device plus the noise sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingSample {
    pub coefficients: Vec<Complex64>,
    pub noise: Complex64,
}

impl FadingSample {
    pub fn draw<R: Rng + ?Sized>(devices: usize, params: &ChannelParams, rng: &mut R) -> Self {
        let coefficients = (0..devices)
            .map(|_| complex_gaussian(params.fading_var(), rng))
            .collect();
        let noise = complex_gaussian(params.noise_var(), rng);
        Self {
            coefficients,
            noise,
        }
    }

    /// `S_t = sqrt(P) sum_{i in A, X_t^i = 1} h_t^i + W_t`.
    pub fn received(
        &self,
        row: &[bool],
        active: &ActivitySet,
        params: &ChannelParams,
    ) -> Complex64 {
        let faded: Complex64 = active
            .members()
            .iter()
            .filter(|&&i| row[i])
            .map(|&i| self.coefficients[i])
            .sum();
        faded * params.on_power().sqrt() + self.noise
    }
}

/// Circularly-symmetric complex Gaussian with `E|x|^2 = variance`.
fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Energy detector decision for one channel-use.
fn detect(received: Complex64, params: &ChannelParams) -> bool {
    received.norm_sqr() > params.threshold()
}

/// Bernoulli(`p`) via one 64-bit draw; `p` is quantised to 2^-64.
#[inline]
fn bernoulli<R: RngCore + ?Sized>(cutoff: u64, rng: &mut R) -> bool {
    rng.next_u64() < cutoff
}

fn bernoulli_cutoff(p: f64) -> u64 {
    if p >= 1.0 {
        u64::MAX
    } else if p <= 0.0 {
        0
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

pub fn generate_preambles(cfg: &NetworkConfig, seed: RngSeed) -> PreambleMatrix {
    generate_preambles_with(cfg, &mut seed.rng())
}

/// I.i.d. Bernoulli(`q_sp`) preambles, filled row by row.
pub fn generate_preambles_with<R: RngCore + ?Sized>(
    cfg: &NetworkConfig,
    rng: &mut R,
) -> PreambleMatrix {
    let cutoff = bernoulli_cutoff(cfg.sampling_prob());
    let (n, ell) = (cfg.preamble_len(), cfg.total_devices());
    let entries = (0..n * ell).map(|_| bernoulli(cutoff, rng)).collect();
    PreambleMatrix::from_entries(n, ell, entries).expect("sized by construction")
}

/// Uniformly random size-`k` subset of `0..ell`.
pub fn sample_active_set<R: Rng + ?Sized>(ell: usize, k: usize, rng: &mut R) -> ActivitySet {
    let members = index::sample(rng, ell, k).into_vec();
    ActivitySet::new(ell, members).expect("distinct in-range indices")
}

fn check_dims(preambles: &PreambleMatrix, active: &ActivitySet) -> Result<()> {
    if preambles.devices() != active.population() {
        return Err(Error::DimensionMismatch(format!(
            "preambles cover {} devices, activity set covers {}",
            preambles.devices(),
            active.population()
        )));
    }
    Ok(())
}

pub fn simulate_fading(
    preambles: &PreambleMatrix,
    active: &ActivitySet,
    params: &ChannelParams,
    seed: RngSeed,
) -> Result<MeasurementVector> {
    simulate_fading_with(preambles, active, params, &mut seed.rng())
}

pub fn simulate_fading_with<R: Rng + ?Sized>(
    preambles: &PreambleMatrix,
    active: &ActivitySet,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<MeasurementVector> {
    check_dims(preambles, active)?;
    let bits = preambles
        .rows()
        .map(|row| {
            let fading = FadingSample::draw(preambles.devices(), params, rng);
            detect(fading.received(row, active, params), params)
        })
        .collect();
    Ok(MeasurementVector::new(bits))
}

pub fn simulate_equivalent(
    preambles: &PreambleMatrix,
    active: &ActivitySet,
    params: &ChannelParams,
    seed: RngSeed,
) -> Result<MeasurementVector> {
    simulate_equivalent_with(preambles, active, params, &mut seed.rng())
}

/// Draws `Z_t = 0` with probability `p_{v_t}`, `v_t` being the slot's On-count.
pub fn simulate_equivalent_with<R: RngCore + ?Sized>(
    preambles: &PreambleMatrix,
    active: &ActivitySet,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<MeasurementVector> {
    check_dims(preambles, active)?;
    let cutoffs: Vec<u64> = (0..=active.len())
        .map(|v| bernoulli_cutoff(transition_prob_zero(params, v)))
        .collect();
    let bits = preambles
        .rows()
        .map(|row| {
            let v = active.members().iter().filter(|&&i| row[i]).count();
            !bernoulli(cutoffs[v], rng)
        })
        .collect();
    Ok(MeasurementVector::new(bits))
}

/// Monte Carlo estimate of `P(Z = 0 | V = v)` from `v` fresh fading
/// coefficients per trial.
pub fn empirical_transition(params: &ChannelParams, v: usize, trials: usize, seed: RngSeed) -> f64 {
    assert!(trials >= 1, "need at least one trial");
    let mut rng = seed.rng();
    let amplitude = params.on_power().sqrt();
    let zeros = (0..trials)
        .filter(|_| {
            let faded: Complex64 = (0..v)
                .map(|_| complex_gaussian(params.fading_var(), &mut rng))
                .sum();
            let s = faded * amplitude + complex_gaussian(params.noise_var(), &mut rng);
            !detect(s, params)
        })
        .count();
    zeros as f64 / trials as f64
}
