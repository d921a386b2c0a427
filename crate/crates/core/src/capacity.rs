//! Maximum rate of the weight-to-bit channel and the identification cost it implies.
//!
//! The rate at a design point `(gamma, q_sp)` is `I(V; Z) = h(q_s) - E[h(p_V)]`
//! with `V ~ Bin(k, q_sp)` and `q_s = E[p_V] = P(Z = 0)`. Because `h(x) =
//! h(1 - x)` it does not matter whether the law is written through `p_V` or
//! through `1 - p_V`. All information quantities are in bits.

use crate::model::{binomial_weight_pmf, entropy_bits, transition_prob_zero, ChannelParams};
use crate::{Error, Result};

/// Number of log-spaced thresholds in the coarse grid.
pub const GAMMA_GRID_POINTS: usize = 400;
/// Sampling probabilities 0.001, 0.002, ..., 0.999.
pub const Q_GRID_POINTS: usize = 999;
/// Parameter tolerance of the golden-section refinement.
pub const REFINE_TOL: f64 = 1e-10;
const MAX_REFINE_ROUNDS: usize = 200;
const Q_EDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub gamma: f64,
    pub q_sp: f64,
    /// `I(V; Z)` in bits per channel-use.
    pub rate: f64,
    /// Marginal `P(Z = 0)`.
    pub q_s: f64,
}

/// Per-threshold quantities that do not depend on `q_sp`.
struct ConditionalLaw {
    p_zero: Vec<f64>,
    entropy: Vec<f64>,
}

impl ConditionalLaw {
    fn new(params: &ChannelParams, k: usize) -> Self {
        let p_zero: Vec<f64> = (0..=k).map(|v| transition_prob_zero(params, v)).collect();
        let entropy = p_zero.iter().map(|&p| entropy_bits(p)).collect();
        Self { p_zero, entropy }
    }

    fn rate(&self, pmf: &[f64]) -> (f64, f64) {
        let (mut q_s, mut cond) = (0.0, 0.0);
        for ((w, p), h) in pmf.iter().zip(&self.p_zero).zip(&self.entropy) {
            q_s += w * p;
            cond += w * h;
        }
        let q_s = q_s.clamp(0.0, 1.0);
        ((entropy_bits(q_s) - cond).max(0.0), q_s)
    }
}

/// Mutual information `I(V; Z)` at the threshold stored in `params`.
pub fn rate_at(params: &ChannelParams, k: usize, q_sp: f64) -> RatePoint {
    let law = ConditionalLaw::new(params, k);
    let (rate, q_s) = law.rate(binomial_weight_pmf(k, q_sp).pmf());
    RatePoint {
        gamma: params.threshold(),
        q_sp,
        rate,
        q_s,
    }
}

/// Which coordinates of the design point are held fixed during the search.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateSearch {
    pub gamma: Option<f64>,
    pub q_sp: Option<f64>,
}

/// Jointly maximises the rate over `(gamma, q_sp)`. The threshold carried by
/// `params` is ignored.
pub fn optimize_rate(params: &ChannelParams, k: usize) -> RatePoint {
    optimize_rate_with(params, k, RateSearch::default())
}

/// Log-threshold search interval `[1e-3 sigma_w^2, 1e3 (k sigma^2 P + sigma_w^2)]`.
pub fn gamma_search_range(params: &ChannelParams, k: usize) -> (f64, f64) {
    let hi = 1e3 * (k as f64 * params.fading_var() * params.on_power() + params.noise_var());
    (1e-3 * params.noise_var(), hi)
}

/// Coarse grid over `ln gamma x q_sp`, then alternating golden-section line
/// searches on each free coordinate until both move less than [`REFINE_TOL`].
///
/// Grid ties resolve to the smallest `gamma`, then the smallest `q_sp`.
pub fn optimize_rate_with(params: &ChannelParams, k: usize, search: RateSearch) -> RatePoint {
    let objective = |log_gamma: f64, q: f64| -> f64 {
        let p = params
            .with_threshold(log_gamma.exp())
            .expect("finite threshold");
        rate_at(&p, k, q).rate
    };

    let (g_lo, g_hi) = gamma_search_range(params, k);
    let (x_lo, x_hi) = (g_lo.ln(), g_hi.ln());
    let x_grid: Vec<f64> = match search.gamma {
        Some(g) => vec![g.max(f64::MIN_POSITIVE).ln()],
        None => (0..GAMMA_GRID_POINTS)
            .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (GAMMA_GRID_POINTS - 1) as f64)
            .collect(),
    };
    let q_grid: Vec<f64> = match search.q_sp {
        Some(q) => vec![q],
        None => (1..=Q_GRID_POINTS)
            .map(|i| i as f64 / (Q_GRID_POINTS + 1) as f64)
            .collect(),
    };
    let pmfs: Vec<Vec<f64>> = q_grid
        .iter()
        .map(|&q| binomial_weight_pmf(k, q).pmf().to_vec())
        .collect();

    let mut best = (f64::NEG_INFINITY, x_grid[0], q_grid[0]);
    for &x in &x_grid {
        let law = ConditionalLaw::new(&params.with_threshold(x.exp()).expect("finite"), k);
        for (pmf, &q) in pmfs.iter().zip(&q_grid) {
            let (r, _) = law.rate(pmf);
            if r > best.0 {
                best = (r, x, q);
            }
        }
    }

    let (mut value, mut x, mut q) = best;
    let dx = if x_grid.len() > 1 {
        x_grid[1] - x_grid[0]
    } else {
        0.0
    };
    let dq = if q_grid.len() > 1 {
        q_grid[1] - q_grid[0]
    } else {
        0.0
    };
    for _ in 0..MAX_REFINE_ROUNDS {
        let (x_prev, q_prev) = (x, q);
        if search.gamma.is_none() {
            let (a, b) = ((x - dx).max(x_lo), (x + dx).min(x_hi));
            let cand = golden_section_max(|t| objective(t, q), a, b, REFINE_TOL);
            let v = objective(cand, q);
            if v >= value {
                value = v;
                x = cand;
            }
        }
        if search.q_sp.is_none() {
            let (a, b) = ((q - dq).max(Q_EDGE), (q + dq).min(1.0 - Q_EDGE));
            let cand = golden_section_max(|t| objective(x, t), a, b, REFINE_TOL);
            let v = objective(x, cand);
            if v >= value {
                value = v;
                q = cand;
            }
        }
        if (x - x_prev).abs() < REFINE_TOL && (q - q_prev).abs() < REFINE_TOL {
            break;
        }
    }

    let gamma = search.gamma.unwrap_or_else(|| x.exp());
    rate_at(&params.with_threshold(gamma).expect("finite"), k, q)
}

/// Golden-section search for the maximiser of a unimodal `f` on `[a, b]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// Finite-`ell` plug-in of the minimum identification cost and its companions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub ell: usize,
    pub k: usize,
    /// Channel-uses `k log2(ell) / C`.
    pub n_required: f64,
    pub c_star: f64,
    pub gamma_star: f64,
    pub q_star: f64,
    /// Gaussian many-access baseline at `P_av = q_star P`.
    pub gaussian_baseline: f64,
    pub alpha: f64,
    /// `k (1 - alpha) log2(ell) / C`.
    pub sublinear_lower_bound: f64,
}

/// Minimum identification cost with the rate maximised over `(gamma, q_sp)`.
///
/// `alpha` only affects the `sublinear_lower_bound` field; at `alpha = 0` that
/// field equals `n_required`.
pub fn min_identification_cost(
    ell: usize,
    k: usize,
    params: &ChannelParams,
    alpha: f64,
) -> Result<CostReport> {
    check_sizes(ell, k)?;
    let best = optimize_rate(params, k);
    cost_report(ell, k, params, &best, alpha)
}

/// Builds the report from an already optimised design point.
pub fn cost_report(
    ell: usize,
    k: usize,
    params: &ChannelParams,
    best: &RatePoint,
    alpha: f64,
) -> Result<CostReport> {
    check_sizes(ell, k)?;
    if !(best.rate > 0.0) {
        return Err(Error::invalid(
            "rate",
            "maximum rate is zero, cost is unbounded",
        ));
    }
    let sublinear = sublinear_lower_bound(ell, k, alpha, best.rate)?;
    Ok(CostReport {
        ell,
        k,
        n_required: k as f64 * (ell as f64).log2() / best.rate,
        c_star: best.rate,
        gamma_star: best.gamma,
        q_star: best.q_sp,
        gaussian_baseline: gaussian_baseline(ell, k, best.q_sp * params.on_power())?,
        alpha,
        sublinear_lower_bound: sublinear,
    })
}

fn check_sizes(ell: usize, k: usize) -> Result<()> {
    if k == 0 || k >= ell {
        return Err(Error::invalid(
            "k",
            format!("need 1 <= k < ell, got k = {k}, ell = {ell}"),
        ));
    }
    Ok(())
}

/// `n_0 = k log2(ell) / (1/2 log2(1 + k P_av))`.
pub fn gaussian_baseline(ell: usize, k: usize, p_av: f64) -> Result<f64> {
    if !(p_av > 0.0 && p_av.is_finite()) {
        return Err(Error::invalid(
            "p_av",
            format!("must be finite and > 0, got {p_av}"),
        ));
    }
    Ok(k as f64 * (ell as f64).log2() / (0.5 * (k as f64 * p_av).ln_1p() / std::f64::consts::LN_2))
}

/// `k (1 - alpha) log2(ell) / c_star`, the bound for `k = Theta(ell^alpha)`.
pub fn sublinear_lower_bound(ell: usize, k: usize, alpha: f64, c_star: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in [0, 1), got {alpha}"),
        ));
    }
    if !(c_star > 0.0) {
        return Err(Error::invalid(
            "c_star",
            format!("must be > 0, got {c_star}"),
        ));
    }
    Ok(k as f64 * (1.0 - alpha) * (ell as f64).log2() / c_star)
}
