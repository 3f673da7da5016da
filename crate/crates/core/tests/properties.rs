use owc_noma::env::NomaEnv;
use owc_noma::projection::project_alphas;
use owc_noma::rlnc::{self, Generation};
use owc_noma::Scenario;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn projection_lands_on_ordered_simplex(raw in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let a = project_alphas(&raw).unwrap();
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn projection_is_idempotent(raw in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let a = project_alphas(&raw).unwrap();
        let b = project_alphas(&a).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn rates_rise_with_own_power(i in 0usize..4, scale in 1.01f64..3.0, base in prop::collection::vec(0.01f64..0.6, 4)) {
        let link = Scenario::default_scenario().group_links().unwrap().remove(0);
        let mut up = base.clone();
        up[i] *= scale;
        prop_assert!(link.user_rates(&up)[i] > link.user_rates(&base)[i]);
    }

    #[test]
    fn env_steps_keep_allocations_feasible(actions in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 32), 1..20)) {
        let mut env = NomaEnv::new(&Scenario::default_scenario()).unwrap();
        env.reset();
        for a in actions {
            env.step(&[a]).unwrap();
            for al in env.alphas() {
                prop_assert!((al.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(al.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn rlnc_decodes_any_spanning_set(size in 1usize..10, len in 1usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen = Generation::random(size, len, &mut rng).unwrap();
        let mut packets = Vec::new();
        while packets.len() < size + 4 {
            packets.push(rlnc::encode(&gen, &mut rng));
        }
        let rows: Vec<_> = packets.iter().map(|p| p.coefficients.clone()).collect();
        if rlnc::rank(&rows).unwrap() == size {
            prop_assert_eq!(rlnc::decode(&packets, size).unwrap(), gen);
        } else {
            prop_assert!(rlnc::decode(&packets, size).is_err());
        }
    }
}
