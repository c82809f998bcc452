use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcmlab::connfn::ConnectionFunction;
use rcmlab::moments::{mean_l_scaled, var_l_scaled, ModelConfig};
use rcmlab::quadrature::isotropic_covariogram;
use rcmlab::region::Region;
use rcmlab::simulator::{margin_policy, RepStream, Scenario};
use rcmlab::stats::{ks_distance_to_normal, replicate};
use rcmlab::{Dimension, Spec};

fn arb_g() -> impl Strategy<Value = ConnectionFunction<f64>> {
    prop_oneof![
        (0.3..2.0f64).prop_map(|a| ConnectionFunction::exponential(a).unwrap()),
        (0.3..2.0f64).prop_map(|a| ConnectionFunction::gaussian(a).unwrap()),
        (0.2..1.5f64).prop_map(|a| ConnectionFunction::hard_disk(a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shared_randomness_couples_truncations(g in arb_g(), seed in any::<u64>(), r in 0.05..3.0f64, n in 1.0..2.5f64) {
        let cfg = ModelConfig::new(2.0, n, Region::unit(Dimension::TWO), g).unwrap();
        let sc = Scenario::new(&cfg, 1e-6).unwrap();
        let check = sc.coupling_check(RepStream::new(seed, 0), r).unwrap();
        prop_assert!(check.holds(), "{check:?}");
    }

    #[test]
    fn margin_keeps_bias_below_tolerance(g in arb_g(), lambda in 0.1..50.0f64, eps in 1e-9..1e-2f64) {
        let w = margin_policy(&g, lambda, &Region::unit(Dimension::TWO), eps).unwrap();
        prop_assert!(w.bias_bound <= eps * (1.0 + 1e-9));
        prop_assert!(w.margin >= 0.0);
    }

    #[test]
    fn replication_ignores_worker_count(seed in any::<u64>(), workers in 2usize..6) {
        let draw = |s: RepStream| Ok(s.derived_seed(7) ^ s.pair_uniforms().get(0, 1).to_bits());
        let one = replicate(25, seed, 1, draw).unwrap();
        let many = replicate(25, seed, workers, draw).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn ks_distance_is_a_probability_gap(z in prop::collection::vec(-5.0..5.0f64, 1..200)) {
        let d = ks_distance_to_normal(&z);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn truncation_error_shrinks_with_range(a in 0.5..1.5f64, r in 0.1..2.0f64, step in 0.1..2.0f64) {
        let spec = Spec::default();
        let cfg = ModelConfig::new(1.0, 2.0, Region::unit(Dimension::TWO), ConnectionFunction::exponential(a).unwrap()).unwrap();
        let near = mean_l_scaled(&cfg, r, &spec).unwrap();
        let far = mean_l_scaled(&cfg, r + step, &spec).unwrap();
        prop_assert!(far.value <= near.value + near.error + far.error);
        prop_assert!(near.value >= -near.error);
        let v = var_l_scaled(&cfg, r, &spec).unwrap();
        prop_assert!(v.value >= -v.error);
    }

    #[test]
    fn isotropic_covariogram_is_circle_integral(w in 0.2..3.0f64, h in 0.2..3.0f64, rho in 0.0..4.0f64) {
        let k = Region::new(vec![0.0, 0.0], vec![w, h]).unwrap();
        let exact = isotropic_covariogram(&k, rho, &Spec::default()).unwrap();
        let steps = 4000;
        let dt = std::f64::consts::TAU / steps as f64;
        let sum = (0..steps)
            .map(|i| {
                let t = (i as f64 + 0.5) * dt;
                k.covariogram(&[rho * t.cos(), rho * t.sin()]) * dt
            })
            .sum::<f64>();
        prop_assert!((exact - sum).abs() < 1e-4 * (w * h), "{exact} vs {sum}");
    }

    #[test]
    fn isotropic_covariogram_in_three_dimensions(side in 0.5..2.0f64, rho in 0.0..2.0f64, seed in any::<u64>()) {
        let k = Region::new(vec![0.0; 3], vec![side, 0.8 * side, 1.3 * side]).unwrap();
        let exact = isotropic_covariogram(&k, rho, &Spec::default()).unwrap();
        // uniform directions from normalized Gaussians; surface area 4π
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = 20_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..draws {
            let v: [f64; 3] = std::array::from_fn(|_| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c = k.covariogram(&v.map(|x| rho * x / norm));
            acc += c;
            acc2 += c * c;
        }
        let mean = acc / draws as f64;
        let se = ((acc2 / draws as f64 - mean * mean).max(0.0) / draws as f64).sqrt();
        let area = 4.0 * std::f64::consts::PI;
        prop_assert!((exact - area * mean).abs() <= area * (5.0 * se + 1e-9), "{exact} vs {}", area * mean);
    }
}
