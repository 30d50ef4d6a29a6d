use proptest::prelude::*;

use qlqr_core::complexity::{table_flops, Algorithm, FlopConfig};
use qlqr_core::linalg::{cholesky, det_triangular_sum, determinant, ql_decompose, qr_decompose, svd, ComplexMatrix};
use qlqr_core::model::{generate_channels, relay_power, RelayPowerMode, SystemConfig};
use qlqr_core::optimizer::{run_qlqr, QlqrOptions};
use qlqr_core::rng::{complex_normal_matrix, stream_rng, Purpose};
use qlqr_core::simulator::{qpsk_map, qpsk_slice};

fn draw(seed: u64, r: usize, c: usize) -> ComplexMatrix {
    complex_normal_matrix(&mut stream_rng(seed, 0, Purpose::Oracle, 0), r, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qr_and_ql_reconstruct(seed in any::<u64>(), n in 1usize..7, m_off in 0usize..6) {
        let m = n - m_off.min(n - 1);
        let a = draw(seed, n, m);
        let s = a.frobenius_norm();
        let qr = qr_decompose(&a).unwrap();
        prop_assert!((&qr.q * &qr.r).distance(&a) / s < 1e-12);
        prop_assert!(qr.q.orthonormality_defect() < 1e-12);
        prop_assert!(qr.r.is_upper_triangular(1e-12 * s));
        let ql = ql_decompose(&a).unwrap();
        prop_assert!((&ql.q * &ql.l).distance(&a) / s < 1e-12);
        prop_assert!(ql.q.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn cholesky_factor_is_lower_with_positive_diagonal(seed in any::<u64>(), n in 1usize..7, ridge in 1e-3f64..10.0) {
        let x = draw(seed, n, n);
        let c = (&x * &x.adjoint()).add_diagonal(ridge);
        let f = cholesky(&c).unwrap();
        prop_assert!(f.xi.is_lower_triangular(0.0));
        prop_assert!((0..n).all(|k| f.xi[(k, k)].re > 0.0));
        prop_assert!((&f.xi.adjoint() * &f.xi).distance(&c) / c.frobenius_norm() < 1e-12);
        let ld = determinant(&c).unwrap().re.ln();
        prop_assert!((f.log_det() - ld).abs() < 1e-9 * ld.abs().max(1.0));
    }

    #[test]
    fn svd_values_are_sorted_and_reconstruct(seed in any::<u64>(), r in 1usize..7, c in 1usize..7) {
        let a = draw(seed, r, c);
        let s = svd(&a).unwrap();
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.reconstruct().distance(&a) / a.frobenius_norm() < 1e-10);
    }

    #[test]
    fn triangular_sum_determinant_matches_dense(seed in any::<u64>(), n in 1usize..7) {
        let a = draw(seed, n, n);
        let b = draw(seed ^ 0x55, n, n);
        let up = |x: &ComplexMatrix| ComplexMatrix::from_fn(n, n, |i, j| if i <= j { x[(i, j)] } else { Default::default() });
        let (ta, tb) = (up(&a), up(&b));
        let dense = determinant(&(&ta + &tb)).unwrap();
        let fast = det_triangular_sum(&ta, &tb).unwrap();
        prop_assert!((dense - fast).norm() <= 1e-10 * dense.norm().max(1.0));
    }

    #[test]
    fn qpsk_round_trips(b0 in any::<bool>(), b1 in any::<bool>()) {
        prop_assert_eq!(qpsk_slice(qpsk_map(b0, b1)), (b0, b1));
        prop_assert!((qpsk_map(b0, b1).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flops_grow_with_users(k in 1u64..6, n_i in 1u64..4) {
        for alg in Algorithm::ALL {
            let small = table_flops(alg, &FlopConfig::new(k, n_i)).unwrap().total;
            let big = table_flops(alg, &FlopConfig::new(k + 1, n_i)).unwrap().total;
            prop_assert!(big > small);
        }
    }

    #[test]
    fn channels_are_a_function_of_seed_and_trial(seed in any::<u64>(), trial in 0u64..1000) {
        let cfg = SystemConfig { seed, ..SystemConfig::default() };
        prop_assert_eq!(generate_channels(&cfg, trial), generate_channels(&cfg, trial));
        prop_assert_ne!(generate_channels(&cfg, trial), generate_channels(&cfg, trial + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimizer_output_is_feasible_and_balanced(
        seed in any::<u64>(),
        m in 1usize..3,
        extra in 0usize..3,
        p_db in 0.0f64..20.0,
        pr_db in 0.0f64..20.0,
        per_relay in any::<bool>(),
    ) {
        let lin = |db: f64| 10f64.powf(db / 10.0);
        let cfg = SystemConfig {
            m,
            n: m + extra,
            p1: lin(p_db),
            p2: lin(p_db),
            pr: lin(pr_db),
            seed,
            relay_power: if per_relay { RelayPowerMode::PerRelay } else { RelayPowerMode::Total },
            ..SystemConfig::default()
        };
        let ch = generate_channels(&cfg, 0);
        let out = run_qlqr(&ch, &cfg, &QlqrOptions::default()).unwrap();
        let slack = 1.0 + 1e-6;
        let sp = out.state.source_powers();
        prop_assert!(sp[0] <= cfg.p1 * slack && sp[1] <= cfg.p2 * slack);
        let rp = relay_power(&ch, &out.state);
        if per_relay {
            let b = cfg.relay_budgets();
            prop_assert!(rp[0] <= b[0] * slack && rp[1] <= b[1] * slack);
        } else {
            prop_assert!(rp[0] + rp[1] <= cfg.pr * slack);
        }
        let f = out.final_report();
        prop_assert!(f.tr1 > 0.0 && f.tr1 <= m as f64 + 1e-9);
        prop_assert!(f.tr2 > 0.0 && f.tr2 <= m as f64 + 1e-9);
        if out.converged {
            prop_assert!((f.tr1 - f.tr2).abs() <= 1e-3 * f.worst());
        }
        prop_assert!(out.history.windows(2).all(|w| w[1].worst() <= w[0].worst() + 1e-9));
    }
}
