use mvgan_core::data::split_for_protocol;
use mvgan_core::metrics::MetricsReport;
use mvgan_core::model::{aggregate_real, argmax, decide_probabilities, DecisionKind};
use mvgan_core::theory::{
    augmented_value, jsd, kl, mixture, optimal_discriminator, value_function, DiscreteJoint, DiscriminatorTable,
};
use mvgan_core::{seeded_rng, AdamConfig, AdamState, Mlp, MultiviewExample, OutputKind};
use proptest::prelude::*;

/// Softmax head whose logits are exactly `logits` (zero hidden-to-output weights).
fn softmax_of(logits: &[f64]) -> Vec<f64> {
    let mut net = Mlp::zeros(1, 1, logits.len(), OutputKind::Softmax).unwrap();
    net.bias_out = logits.to_vec();
    net.forward(&[0.0]).unwrap().output
}

fn joint(n1: usize, n2: usize, w: Vec<f64>) -> DiscreteJoint {
    DiscreteJoint::from_weights(n1, n2, w).unwrap()
}

fn arb_joint_triple(max: usize) -> impl Strategy<Value = (DiscreteJoint, DiscreteJoint, DiscreteJoint)> {
    (1..=max, 1..=max).prop_flat_map(|(n1, n2)| {
        let w = || prop::collection::vec(0.001f64..1.0, n1 * n2);
        (w(), w(), w()).prop_map(move |(a, b, c)| (joint(n1, n2, a), joint(n1, n2, b), joint(n1, n2, c)))
    })
}

fn arb_probabilities() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0f64..30.0, 2..8).prop_map(|l| softmax_of(&l))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-1e4f64..1e4, 1..10)) {
        let p = softmax_of(&logits);
        prop_assert!(p.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_interior_for_moderate_spread(
        base in -1e4f64..1e4,
        offsets in prop::collection::vec(0.0f64..699.0, 1..10),
    ) {
        let logits: Vec<f64> = offsets.iter().map(|o| base + o).collect();
        let p = softmax_of(&logits);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        let spread = offsets.iter().cloned().fold(f64::MIN, f64::max) - offsets.iter().cloned().fold(f64::MAX, f64::min);
        if logits.len() > 1 && spread < 36.0 {
            prop_assert!(p.iter().all(|&x| x < 1.0));
        }
    }

    #[test]
    fn decide_rule(p in arb_probabilities()) {
        let k = p.len() - 1;
        let real = aggregate_real(&p).unwrap();
        prop_assert!((real + p[k] - 1.0).abs() < 1e-12);
        let d = decide_probabilities(p.clone());
        match d.kind {
            DecisionKind::Fake => prop_assert!(p[k] > real),
            DecisionKind::Class(c) => {
                prop_assert!(p[k] <= real);
                prop_assert!(c < k);
                prop_assert!(p[..k].iter().all(|&x| x <= p[c]));
                prop_assert!(p[..c].iter().all(|&x| x < p[c]));
            }
        }
    }

    #[test]
    fn argmax_takes_first_maximum(v in prop::collection::vec(0u8..4, 1..12)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let i = argmax(&v);
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(v[i], max);
        prop_assert!(v[..i].iter().all(|&x| x < max));
    }

    #[test]
    fn metrics_identities(
        k in 2usize..6,
        raw in prop::collection::vec((0usize..100, prop::option::of(0usize..100)), 1..60),
        shift in 1usize..5,
    ) {
        let truth: Vec<usize> = raw.iter().map(|(t, _)| t % k).collect();
        let pred: Vec<Option<usize>> = raw.iter().map(|(_, p)| p.map(|p| p % k)).collect();
        let r = MetricsReport::from_predictions(&truth, &pred, k, 0).unwrap();

        let trace: usize = (0..k).map(|c| r.confusion[c][c]).sum();
        prop_assert_eq!(r.accuracy, trace as f64 / truth.len() as f64);
        prop_assert_eq!(r.fake_rate + r.classified_rate(), 1.0);

        let perm = |c: usize| (c + shift) % k;
        let truth_p: Vec<usize> = truth.iter().map(|&c| perm(c)).collect();
        let pred_p: Vec<Option<usize>> = pred.iter().map(|p| p.map(perm)).collect();
        let rp = MetricsReport::from_predictions(&truth_p, &pred_p, k, 0).unwrap();
        prop_assert!((r.macro_f1 - rp.macro_f1).abs() <= 1e-15);
        prop_assert_eq!(r.accuracy, rp.accuracy);
    }

    #[test]
    fn divergences((p, q, _) in arb_joint_triple(6)) {
        prop_assert!((jsd(&p, &q).unwrap() - jsd(&q, &p).unwrap()).abs() <= 1e-14);
        prop_assert!(kl(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl(&p, &p).unwrap().abs() <= 1e-12);
        let js = jsd(&p, &q).unwrap();
        prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-15).contains(&js));
    }

    #[test]
    fn optimal_discriminator_dominates_perturbations(
        (p, g1, g2) in arb_joint_triple(5),
        noise in prop::collection::vec(-0.2f64..0.2, 25),
    ) {
        let d_star = optimal_discriminator(&p, &g1, &g2).unwrap();
        let v_star = value_function(&d_star, &p, &g1, &g2).unwrap();
        let perturbed: Vec<f64> = d_star
            .table()
            .iter()
            .zip(noise.iter().cycle())
            .map(|(d, e)| (d + e).clamp(0.0, 1.0))
            .collect();
        let (n1, n2) = d_star.shape();
        let d = DiscriminatorTable::new(n1, n2, perturbed).unwrap();
        prop_assert!(v_star >= value_function(&d, &p, &g1, &g2).unwrap() - 1e-15);
        prop_assert!(augmented_value(&d_star, &p, &g1, &g2).unwrap() >= v_star);
        let mix = mixture(&g1, &g2).unwrap();
        prop_assert!((mix.table().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adam_rejects_non_finite_without_touching_state(
        grads in prop::collection::vec(-1.0f64..1.0, 1..8),
        bad in 0usize..8,
        which in 0usize..3,
    ) {
        let mut params = vec![0.5; grads.len()];
        let mut state = AdamState::new(AdamConfig::default(), grads.len());
        state.step(&mut [&mut params], &[&grads]).unwrap();
        let (before_p, before_s) = (params.clone(), state.clone());

        let mut poisoned = grads.clone();
        poisoned[bad % grads.len()] = [f64::NAN, f64::INFINITY, f64::NEG_INFINITY][which];
        prop_assert!(state.step(&mut [&mut params], &[&poisoned]).is_err());
        prop_assert_eq!(params, before_p);
        prop_assert_eq!(state, before_s);
    }

    #[test]
    fn protocol_split_partitions_the_pool(
        n in 1usize..60,
        fractions in (0.0f64..0.4, 0.0f64..0.3, 0.0f64..0.3),
        seed in any::<u64>(),
    ) {
        let pool: Vec<MultiviewExample> =
            (0..n).map(|i| MultiviewExample::complete(vec![i as f64], vec![-(i as f64)], i % 3)).collect();
        let m_f = (fractions.0 * n as f64) as usize;
        let m1 = (fractions.1 * n as f64) as usize;
        let m2 = (fractions.2 * n as f64) as usize;
        let (ds, test) = split_for_protocol(&pool, 1, 1, 3, m_f, m1, m2, &mut seeded_rng(seed)).unwrap();
        prop_assert_eq!(ds.sizes(), (m_f, m1, m2));
        prop_assert_eq!(ds.len() + test.len(), n);

        // Each pool id appears exactly once across all parts.
        let mut seen = vec![0u8; n];
        for ex in ds.iter().chain(&test) {
            let id = match (&ex.view1, &ex.view2) {
                (Some(v), _) => v[0],
                (None, Some(v)) => -v[0],
                (None, None) => unreachable!(),
            };
            seen[id as usize] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert!(ds.s_missing1().iter().all(|e| e.view1.is_none() && e.view2.is_some()));
        prop_assert!(ds.s_missing2().iter().all(|e| e.view2.is_none() && e.view1.is_some()));
    }
}

#[test]
fn identity_holds_on_large_supports() {
    use rand::Rng;
    let mut rng = seeded_rng(50);
    for _ in 0..20 {
        let (n1, n2) = (rng.random_range(30..=50), rng.random_range(30..=50));
        let mut draw = || joint(n1, n2, (0..n1 * n2).map(|_| rng.random_range(0.0..1.0)).collect());
        let (p, g1, g2) = (draw(), draw(), draw());
        let r = mvgan_core::theory::check_theorem(&p, &g1, &g2, 1e-10).unwrap();
        assert!(r.identity_residual < 1e-10, "{r:?}");
    }
}

#[test]
fn softmax_extremes() {
    let p = softmax_of(&[1e4, -1e4, 0.0]);
    assert_eq!(p, vec![1.0, 0.0, 0.0]);
    let p = softmax_of(&[1e4, 1e4]);
    assert_eq!(p, vec![0.5, 0.5]);
}
