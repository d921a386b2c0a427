use mnac::capacity::rate_at;
use mnac::channel::{generate_preambles, sample_active_set, simulate_equivalent, RngSeed};
use mnac::decoders::{
    bp_aht, bp_marginals, factor_message_llrs, log_likelihood, ml_exhaustive, ncomp_decode,
    BpOptions, LikelihoodModel,
};
use mnac::metrics::{judge, RecoveryCriterion};
use mnac::model::{
    binary_entropy, binomial_weight_pmf, ActivitySet, ChannelParams, MeasurementVector,
    NetworkConfig, PreambleMatrix,
};
use proptest::prelude::*;

struct Instance {
    x: PreambleMatrix,
    z: MeasurementVector,
    params: ChannelParams,
}

fn instance(ell: usize, k: usize, n: usize, q: f64, snr: f64, seed: u64) -> Instance {
    let params = ChannelParams::from_snr_db(snr, 2.5).unwrap();
    let cfg = NetworkConfig::new(ell, k, n, q).unwrap();
    let x = generate_preambles(&cfg, RngSeed::new(seed, 0));
    let truth = sample_active_set(ell, k, &mut RngSeed::new(seed, 1).rng());
    let z = simulate_equivalent(&x, &truth, &params, RngSeed::new(seed, 2)).unwrap();
    Instance { x, z, params }
}

/// Column `perm[i]` of the result is column `i` of `x`.
fn permute_columns(x: &PreambleMatrix, perm: &[usize]) -> PreambleMatrix {
    let mut out = PreambleMatrix::zeros(x.slots(), x.devices());
    for t in 0..x.slots() {
        for (i, &p) in perm.iter().enumerate() {
            out.set(t, p, x.get(t, i));
        }
    }
    out
}

fn naive_llrs(probs: &[f64], lik: &[f64]) -> Vec<f64> {
    let d = probs.len();
    (0..d)
        .map(|j| {
            let mut a = [0.0f64; 2];
            for mask in 0u32..1 << d {
                let mut w = 1.0;
                for (i, &p) in probs.iter().enumerate() {
                    if i != j {
                        w *= if mask >> i & 1 == 1 { p } else { 1.0 - p };
                    }
                }
                let b = (mask >> j & 1) as usize;
                a[b] += w * lik[(mask & !(1 << j)).count_ones() as usize + b];
            }
            (a[1] / a[0]).ln()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factor_dp_equals_enumeration(
        probs in prop::collection::vec(0.01f64..0.99, 1..=12),
        seed in prop::collection::vec(0.05f64..1.0, 13),
    ) {
        let lik = &seed[..=probs.len()];
        let dp = factor_message_llrs(&probs, lik);
        let naive = naive_llrs(&probs, lik);
        for (a, b) in dp.iter().zip(&naive) {
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn decoders_are_permutation_equivariant(seed in 0u64..1000, shuffle in any::<u64>()) {
        let inst = instance(9, 2, 20, 0.3, 8.0, seed);
        let mut perm: Vec<usize> = (0..9).collect();
        let mut state = shuffle | 1;
        for i in (1..9).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let y = permute_columns(&inst.x, &perm);
        let model = LikelihoodModel::new(inst.params, 2);

        let a = ncomp_decode(&inst.z, &inst.x, 2).unwrap();
        let b = ncomp_decode(&inst.z, &y, 2).unwrap();
        for i in 0..9 {
            prop_assert_eq!(a.scores[i], b.scores[perm[i]]);
        }

        let a = bp_marginals(&inst.z, &inst.x, &model, 0.2, &BpOptions::default()).unwrap();
        let b = bp_marginals(&inst.z, &y, &model, 0.2, &BpOptions::default()).unwrap();
        for i in 0..9 {
            prop_assert!((a.marginals()[i] - b.marginals()[perm[i]]).abs() < 1e-12);
        }

        // ML likelihood values move with the labels (the argmax set may differ only on ties)
        let a = ml_exhaustive(&inst.z, &inst.x, 2, &model).unwrap();
        let b = ml_exhaustive(&inst.z, &y, 2, &model).unwrap();
        for i in 0..9 {
            prop_assert!((a.scores[i] - b.scores[perm[i]]).abs() < 1e-9);
        }
        let mapped = ActivitySet::new(9, a.estimate.members().iter().map(|&i| perm[i]).collect()).unwrap();
        let la = log_likelihood(&inst.z, &y.slot_weights(&mapped).unwrap(), &model).unwrap();
        let lb = log_likelihood(&inst.z, &y.slot_weights(&b.estimate).unwrap(), &model).unwrap();
        prop_assert!((la - lb).abs() < 1e-9);
    }

    #[test]
    fn ml_dominates_other_decoders(seed in 0u64..1000) {
        let inst = instance(10, 2, 30, 0.25, 6.0, seed);
        let model = LikelihoodModel::new(inst.params, 2);
        let ml = ml_exhaustive(&inst.z, &inst.x, 2, &model).unwrap();
        let best = log_likelihood(&inst.z, &inst.x.slot_weights(&ml.estimate).unwrap(), &model).unwrap();
        let nc = ncomp_decode(&inst.z, &inst.x, 2).unwrap();
        let other = log_likelihood(&inst.z, &inst.x.slot_weights(&nc.estimate).unwrap(), &model).unwrap();
        prop_assert!(best >= other - 1e-12);
        let state = bp_marginals(&inst.z, &inst.x, &model, 0.2, &BpOptions::default()).unwrap();
        let st = mnac::decoders::bp_st(&state, 2);
        let other = log_likelihood(&inst.z, &inst.x.slot_weights(&st.estimate).unwrap(), &model).unwrap();
        prop_assert!(best >= other - 1e-12);
    }

    #[test]
    fn aht_estimates_nest(seed in 0u64..1000, e1 in 0.01f64..0.99, e2 in 0.01f64..0.99) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let inst = instance(40, 4, 30, 0.1, 10.0, seed);
        let model = LikelihoodModel::new(inst.params, 1);
        let state = bp_marginals(&inst.z, &inst.x, &model, 0.1, &BpOptions::default()).unwrap();
        prop_assert!(state.marginals().iter().all(|m| (0.0..=1.0).contains(m)));
        let wide = bp_aht(&state, lo).unwrap().estimate;
        let narrow = bp_aht(&state, hi).unwrap().estimate;
        prop_assert!(narrow.members().iter().all(|&i| wide.contains(i)));
    }

    #[test]
    fn ncomp_scores_in_unit_interval(seed in 0u64..1000) {
        let inst = instance(30, 3, 15, 0.15, 4.0, seed);
        let out = ncomp_decode(&inst.z, &inst.x, 3).unwrap();
        prop_assert!(out.scores.iter().all(|&s| s == f64::NEG_INFINITY || (0.0..=1.0).contains(&s)));
        prop_assert_eq!(out.estimate.len(), 3);
    }

    #[test]
    fn criteria_nest(
        truth_bits in prop::collection::vec(any::<bool>(), 20),
        est_bits in prop::collection::vec(any::<bool>(), 20),
        zeta in 1.0f64..100.0,
        dev in 0.0f64..1.0,
    ) {
        let truth = ActivitySet::from_status_vector(&truth_bits);
        let est = ActivitySet::from_status_vector(&est_bits);
        let exact = judge(&truth, &est, &RecoveryCriterion::Exact).unwrap();
        let partial = judge(&truth, &est, &RecoveryCriterion::partial(zeta).unwrap()).unwrap();
        let unknown = judge(&truth, &est, &RecoveryCriterion::partial_unknown_k(zeta, dev).unwrap()).unwrap();
        let full = judge(&truth, &est, &RecoveryCriterion::partial(100.0).unwrap()).unwrap();
        if exact.success {
            prop_assert!(partial.success && unknown.success);
        }
        if unknown.success {
            prop_assert!(partial.success);
        }
        if partial.success && est.len() == truth.len() {
            prop_assert!(unknown.success);
        }
        prop_assert!(exact.misdetections <= truth.len());
        if est.len() == truth.len() {
            prop_assert_eq!(exact.misdetections, exact.false_positives);
            prop_assert_eq!(exact.success, full.success);
        }
    }

    #[test]
    fn rate_is_a_valid_mutual_information(
        snr in -5.0f64..20.0, gamma in 0.01f64..30.0, k in 1usize..40, q in 0.001f64..0.999,
    ) {
        let params = ChannelParams::from_snr_db(snr, gamma).unwrap();
        let r = rate_at(&params, k, q);
        prop_assert!(r.rate >= -1e-12 && r.rate <= 1.0 + 1e-12);
        prop_assert!(r.rate <= binary_entropy(r.q_s).unwrap() + 1e-12);
        let pmf = binomial_weight_pmf(k, q);
        prop_assert!((pmf.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((pmf.mean() - k as f64 * q).abs() < 1e-9 * k as f64);
    }
}
