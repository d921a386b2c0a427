//! Domain types and the closed-form scalar laws of the equivalent channel.
//!
//! Device indices are 0-based everywhere inside the crate. The `*_one_based`
//! helpers on [`ActivitySet`] convert at I/O boundaries.

use std::fmt;

use crate::{Error, Result};

/// Physical constants of the OOK / Rayleigh / energy-detector link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    on_power: f64,
    fading_var: f64,
    noise_var: f64,
    threshold: f64,
}

impl ChannelParams {
    pub fn new(on_power: f64, fading_var: f64, noise_var: f64, threshold: f64) -> Result<Self> {
        for (name, value) in [
            ("on_power", on_power),
            ("fading_var", fading_var),
            ("noise_var", noise_var),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        if !(threshold >= 0.0) || threshold.is_nan() {
            return Err(Error::invalid(
                "threshold",
                format!("must be >= 0, got {threshold}"),
            ));
        }
        Ok(Self {
            on_power,
            fading_var,
            noise_var,
            threshold,
        })
    }

    /// Unit fading and noise variances with `P` set from the SNR in dB.
    ///
    /// The transition law depends on `(P, sigma^2, sigma_w^2)` only through
    /// `P sigma^2 / sigma_w^2` and `gamma / sigma_w^2`, so this normalisation
    /// loses nothing.
    pub fn from_snr_db(snr_db: f64, threshold: f64) -> Result<Self> {
        Self::new(10f64.powf(snr_db / 10.0), 1.0, 1.0, threshold)
    }

    pub fn with_threshold(self, threshold: f64) -> Result<Self> {
        Self::new(self.on_power, self.fading_var, self.noise_var, threshold)
    }

    pub fn on_power(&self) -> f64 {
        self.on_power
    }

    pub fn fading_var(&self) -> f64 {
        self.fading_var
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `P sigma^2 / sigma_w^2`.
    pub fn snr(&self) -> f64 {
        self.on_power * self.fading_var / self.noise_var
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr().log10()
    }

    /// Variance of the received signal when `v` active devices send 'On'.
    pub(crate) fn received_var(&self, v: usize) -> f64 {
        v as f64 * self.fading_var * self.on_power + self.noise_var
    }
}

/// Sizes of one (ell, k)-many-access instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    total_devices: usize,
    active_devices: usize,
    preamble_len: usize,
    sampling_prob: f64,
}

impl NetworkConfig {
    pub fn new(
        total_devices: usize,
        active_devices: usize,
        preamble_len: usize,
        sampling_prob: f64,
    ) -> Result<Self> {
        if active_devices == 0 || active_devices >= total_devices {
            return Err(Error::invalid(
                "active_devices",
                format!("need 1 <= k < ell, got k = {active_devices}, ell = {total_devices}"),
            ));
        }
        if preamble_len == 0 {
            return Err(Error::invalid("preamble_len", "must be >= 1"));
        }
        if !(sampling_prob > 0.0 && sampling_prob < 1.0) {
            return Err(Error::invalid(
                "sampling_prob",
                format!("must lie in (0, 1), got {sampling_prob}"),
            ));
        }
        Ok(Self {
            total_devices,
            active_devices,
            preamble_len,
            sampling_prob,
        })
    }

    pub fn total_devices(&self) -> usize {
        self.total_devices
    }

    pub fn active_devices(&self) -> usize {
        self.active_devices
    }

    pub fn preamble_len(&self) -> usize {
        self.preamble_len
    }

    pub fn sampling_prob(&self) -> f64 {
        self.sampling_prob
    }

    pub fn with_preamble_len(self, preamble_len: usize) -> Result<Self> {
        Self::new(
            self.total_devices,
            self.active_devices,
            preamble_len,
            self.sampling_prob,
        )
    }

    pub fn with_sampling_prob(self, sampling_prob: f64) -> Result<Self> {
        Self::new(
            self.total_devices,
            self.active_devices,
            self.preamble_len,
            sampling_prob,
        )
    }
}

/// `n x ell` binary matrix of OOK preambles; column `i` is device `i`'s
/// signature and row `t` is the pool tested in channel-use `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreambleMatrix {
    slots: usize,
    devices: usize,
    // row-major, `slots * devices`
    entries: Vec<bool>,
}

impl PreambleMatrix {
    pub fn from_entries(slots: usize, devices: usize, entries: Vec<bool>) -> Result<Self> {
        if entries.len() != slots * devices {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {slots} x {devices} preamble matrix",
                entries.len()
            )));
        }
        Ok(Self {
            slots,
            devices,
            entries,
        })
    }

    /// Builds the matrix from rows of 0/1 values. All rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(devices: usize, rows: &[R]) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows.len() * devices);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != devices {
                return Err(Error::DimensionMismatch(format!(
                    "row {t} has {} entries, expected {devices}",
                    row.len()
                )));
            }
            for &x in row {
                match x {
                    0 => entries.push(false),
                    1 => entries.push(true),
                    other => {
                        return Err(Error::invalid("entries", format!("{other} is not binary")))
                    }
                }
            }
        }
        Ok(Self {
            slots: rows.len(),
            devices,
            entries,
        })
    }

    pub fn zeros(slots: usize, devices: usize) -> Self {
        Self {
            slots,
            devices,
            entries: vec![false; slots * devices],
        }
    }

    /// Preamble length `n`.
    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Population size `ell`.
    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn get(&self, slot: usize, device: usize) -> bool {
        self.entries[slot * self.devices + device]
    }

    pub fn set(&mut self, slot: usize, device: usize, on: bool) {
        self.entries[slot * self.devices + device] = on;
    }

    pub fn row(&self, slot: usize) -> &[bool] {
        &self.entries[slot * self.devices..(slot + 1) * self.devices]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[bool]> + '_ {
        // chunks_exact panics on a zero chunk size
        let width = self.devices.max(1);
        self.entries
            .chunks_exact(width)
            .take(if self.devices == 0 { 0 } else { self.slots })
    }

    pub fn column(&self, device: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.slots).map(move |t| self.get(t, device))
    }

    /// Hamming weight `G_i` of device `i`'s preamble.
    pub fn column_weight(&self, device: usize) -> usize {
        self.column(device).filter(|&on| on).count()
    }

    pub fn column_weights(&self) -> Vec<usize> {
        let mut weights = vec![0; self.devices];
        for row in self.rows() {
            for (w, &on) in weights.iter_mut().zip(row) {
                *w += on as usize;
            }
        }
        weights
    }

    pub fn row_weight(&self, slot: usize) -> usize {
        self.row(slot).iter().filter(|&&on| on).count()
    }

    /// Per-slot count `v_t` of members of `set` that transmit 'On'.
    pub fn slot_weights(&self, set: &ActivitySet) -> Result<Vec<usize>> {
        if set.population() != self.devices {
            return Err(Error::DimensionMismatch(format!(
                "activity set over {} devices, preambles over {}",
                set.population(),
                self.devices
            )));
        }
        Ok(self.slot_weights_of(set.members()))
    }

    pub(crate) fn slot_weights_of(&self, members: &[usize]) -> Vec<usize> {
        self.rows()
            .map(|row| members.iter().filter(|&&i| row[i]).count())
            .collect()
    }
}

/// A set of devices (true or estimated active set) over a population of `ell`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivitySet {
    population: usize,
    members: Vec<usize>,
}

impl ActivitySet {
    /// Builds a set from 0-based indices. Duplicates and out-of-range
    /// indices are rejected.
    pub fn new(population: usize, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "members",
                format!("device {} listed twice", w[0]),
            ));
        }
        if let Some(&last) = members.last() {
            if last >= population {
                return Err(Error::invalid(
                    "members",
                    format!("device index {last} outside 0..{population}"),
                ));
            }
        }
        Ok(Self {
            population,
            members,
        })
    }

    pub fn empty(population: usize) -> Self {
        Self {
            population,
            members: Vec::new(),
        }
    }

    pub fn from_one_based(population: usize, members: &[usize]) -> Result<Self> {
        let zero_based = members
            .iter()
            .map(|&i| {
                i.checked_sub(1)
                    .ok_or_else(|| Error::invalid("members", "1-based device index 0"))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(population, zero_based)
    }

    pub fn from_status_vector(status: &[bool]) -> Self {
        let members = status
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect();
        Self {
            population: status.len(),
            members,
        }
    }

    /// Activity status vector `beta`.
    pub fn to_status_vector(&self) -> Vec<bool> {
        let mut beta = vec![false; self.population];
        for &i in &self.members {
            beta[i] = true;
        }
        beta
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.members.iter().map(|&i| i + 1).collect()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, device: usize) -> bool {
        self.members.binary_search(&device).is_ok()
    }

    /// Number of members of `self` that are not in `other`.
    pub fn difference_count(&self, other: &ActivitySet) -> usize {
        self.members.iter().filter(|&&i| !other.contains(i)).count()
    }
}

impl fmt::Display for ActivitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.members.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// Binary energy-detector outputs `Z_1..Z_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeasurementVector {
    bits: Vec<bool>,
}

impl MeasurementVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::invalid("bits", format!("{other} is not binary"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, slot: usize) -> bool {
        self.bits[slot]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Law of the per-slot On-count `V ~ Bin(k, q_sp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDistribution {
    pmf: Vec<f64>,
}

impl WeightDistribution {
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn max_weight(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(v, p)| v as f64 * p).sum()
    }

    /// `E[f(V)]`.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.pmf.iter().enumerate().map(|(v, p)| p * f(v)).sum()
    }
}

/// `P(Z = 0 | V = v) = 1 - exp(-gamma / (v sigma^2 P + sigma_w^2))`.
pub fn transition_prob_zero(params: &ChannelParams, v: usize) -> f64 {
    -(-params.threshold() / params.received_var(v)).exp_m1()
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::EntropyDomain(x));
    }
    Ok(entropy_bits(x))
}

/// Unchecked binary entropy for hot loops; callers guarantee `x` in [0, 1].
#[inline]
pub(crate) fn entropy_bits(x: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(x) + term(1.0 - x)
}

/// Binomial pmf of the On-count of `k` i.i.d. Bernoulli(`q_sp`) preambles.
///
/// Runs the ratio recurrence `pmf[v+1] = pmf[v] (k-v)/(v+1) q/(1-q)` outward
/// from the mode, so every intermediate value stays in `(0, 1]` and the tails
/// underflow to zero instead of overflowing; the result is then normalised.
pub fn binomial_weight_pmf(k: usize, q_sp: f64) -> WeightDistribution {
    debug_assert!((0.0..=1.0).contains(&q_sp));
    let mut pmf = vec![0.0; k + 1];
    if q_sp <= 0.0 {
        pmf[0] = 1.0;
        return WeightDistribution { pmf };
    }
    if q_sp >= 1.0 {
        pmf[k] = 1.0;
        return WeightDistribution { pmf };
    }
    let odds = q_sp / (1.0 - q_sp);
    let mode = (((k + 1) as f64 * q_sp).floor() as usize).min(k);
    pmf[mode] = 1.0;
    for v in mode..k {
        pmf[v + 1] = pmf[v] * (k - v) as f64 / (v + 1) as f64 * odds;
    }
    for v in (1..=mode).rev() {
        pmf[v - 1] = pmf[v] * v as f64 / (k - v + 1) as f64 / odds;
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    WeightDistribution { pmf }
}

/// `C(n, r)` as `u128`, saturating at `u128::MAX`.
pub fn binomial_coefficient(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) / (i + 1) is exact at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}
