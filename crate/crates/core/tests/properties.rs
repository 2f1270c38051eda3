use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use volforms::domains::DomainModel;
use volforms::forms::ComplexPoint;
use volforms::harness::{check_ahlfors_schwarz, failures};
use volforms::maps::{pullback_poincare, CandidateMap};
use volforms::metrics::{bergman_metric, caratheodory_metric_lower, kobayashi_metric_upper};
use volforms::optimize::MapSearchConfig;
use volforms::volumes::{bergman_density_closed, caratheodory_lower, kobayashi_upper, poincare_density};

fn point(xs: &[(f64, f64)]) -> ComplexPoint {
    ComplexPoint::new(xs.iter().map(|&(a, b)| num_complex::Complex64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_self_maps_decrease_volume(seed in any::<u64>(), n in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = CandidateMap::random_ball_self_map(n, &mut rng);
        let grid = DomainModel::unit_ball(n).interior_samples(20, 0.95, seed);
        prop_assert_eq!(failures(&check_ahlfors_schwarz(&f, &grid).unwrap()), 0);
    }

    #[test]
    fn automorphisms_preserve_poincare_volume(a in (-0.6f64..0.6, -0.6f64..0.6), z in (-0.6f64..0.6, -0.6f64..0.6)) {
        let f = CandidateMap::ball_automorphism(point(&[a])).unwrap();
        let z = point(&[z]);
        let pulled = pullback_poincare(&f, &z, 1.0).unwrap().value();
        let mu = poincare_density(1, 1.0, &z).unwrap().value();
        prop_assert!((pulled / mu - 1.0).abs() < 1e-10);
    }

    #[test]
    fn polydisk_sandwich(x in (-0.7f64..0.7, -0.7f64..0.7), y in (-0.7f64..0.7, -0.7f64..0.7)) {
        let poly = DomainModel::polydisk(vec![1.0, 1.0]).unwrap();
        let p = point(&[x, y]);
        let cfg = MapSearchConfig { starts: 2, local_steps: 300, ..MapSearchConfig::default() };
        let c = caratheodory_lower(&poly, &p, &cfg).unwrap().density();
        let k = kobayashi_upper(&poly, &p, &cfg).unwrap().density();
        let b = bergman_density_closed(&poly, &p).unwrap().density();
        prop_assert!(c <= k * (1.0 + 1e-9));
        prop_assert!(c > 0.0 && b > 0.0);
    }

    #[test]
    fn metrics_are_quadratic_and_ordered(x in (-0.6f64..0.6, -0.6f64..0.6), v in (-1.0f64..1.0, -1.0f64..1.0), s in 0.1f64..3.0) {
        prop_assume!(v.0.abs() + v.1.abs() > 1e-3);
        let ball = DomainModel::unit_ball(1);
        let cfg = MapSearchConfig::default();
        let p = point(&[x]);
        let v = point(&[v]);
        let gc = caratheodory_metric_lower(&ball, &p, &v, &cfg).unwrap().value;
        let gk = kobayashi_metric_upper(&ball, &p, &v, &cfg).unwrap().value;
        let gb = bergman_metric(&ball, &p, &v).unwrap().value;
        let gb_scaled = bergman_metric(&ball, &p, &v.scale(s)).unwrap().value;
        prop_assert!(gc <= gk * (1.0 + 1e-9));
        prop_assert!(gc <= gb);
        prop_assert!((gb_scaled / (s * s * gb) - 1.0).abs() < 1e-12);
    }
}
