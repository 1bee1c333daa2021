use std::f64::consts::PI;
use std::sync::Arc;

use kirchhoff_core::basis::{Domain, EigenBasis, GalerkinVector};
use kirchhoff_core::fountain::{compute_r_k, SolutionRecord};
use kirchhoff_core::functional::{Cone, KirchhoffParams, KirchhoffProblem};
use kirchhoff_core::nonlinearity::{NonlinearitySpec, Power};
use kirchhoff_core::oracles::{exact_cone_distance, scaling_factor};
use kirchhoff_core::run::{parse_config, RunConfig};
use proptest::prelude::*;

fn problem(m: usize, a: f64, b: f64) -> KirchhoffProblem {
    let basis = EigenBasis::with_exponent(Domain::interval(PI).unwrap(), m, 6.0).unwrap();
    KirchhoffProblem::new(
        Arc::new(basis),
        KirchhoffParams::new(a, b).unwrap(),
        Arc::new(Power::new(6.0)),
    )
    .unwrap()
}

fn coeffs(m: usize) -> impl Strategy<Value = GalerkinVector> {
    prop::collection::vec(-1.0f64..1.0, m).prop_map(|c| {
        GalerkinVector::new(c.iter().enumerate().map(|(j, v)| v / (j as f64 + 1.0)).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_even_and_gradient_odd(u in coeffs(16), b in 0.0f64..2.0) {
        let pr = problem(16, 1.0, b);
        prop_assert_eq!(pr.energy(&u).unwrap(), pr.energy(&-&u).unwrap());
        prop_assert_eq!(pr.gradient(&-&u).unwrap(), -&pr.gradient(&u).unwrap());
    }

    #[test]
    fn gradient_is_stiffness_times_residual(u in coeffs(16), a in 0.2f64..3.0, b in 0.0f64..2.0) {
        let pr = problem(16, a, b);
        let g = pr.gradient(&u).unwrap();
        let (v, _) = pr.residual(&u).unwrap();
        let k = pr.params().stiffness(pr.basis().h1_norm_sq(&u));
        let defect = pr.basis().h1_norm(&g.add_scaled(-k, &v));
        prop_assert!(defect <= 1e-10 * (1.0 + pr.basis().h1_norm(&g)));
    }

    #[test]
    fn operator_inequalities(u in coeffs(16), a in 0.2f64..3.0, b in 0.0f64..2.0) {
        let pr = problem(16, a, b);
        let r = pr.check_a_lemma(&[u], 0.0).unwrap();
        prop_assert!(r.descent_violation <= 1e-12);
        prop_assert!(r.gradient_bound_violation <= 1e-12);
        prop_assert!(r.factor_deviation <= 1e-10);
    }

    #[test]
    fn proxy_bounds_exact_distance(u in coeffs(4)) {
        let pr = problem(4, 1.0, 0.0);
        for cone in [Cone::Positive, Cone::Negative] {
            let exact = exact_cone_distance(&pr, &u, cone).unwrap();
            let proxy = pr.cone_distance(&u, cone).unwrap();
            prop_assert!(exact <= proxy * (1.0 + 1e-12) + 1e-14, "{} > {}", exact, proxy);
        }
    }

    #[test]
    fn scaling_root_solves_its_equation(s in 1e-3f64..1e3, a in 0.1f64..10.0, b in 0.0f64..10.0, p in 4.5f64..8.0) {
        let f = scaling_factor(s, KirchhoffParams::new(a, b).unwrap(), p).unwrap();
        prop_assert!(f.t > 0.0);
        prop_assert!(f.defect().abs() <= 1e-12 * (a + b * s * f.t * f.t));
    }

    #[test]
    fn r_k_power_law(beta in 0.01f64..2.0, p in 3.0f64..8.0) {
        let params = KirchhoffParams::new(1.0, 0.0).unwrap();
        let (r1, b1) = compute_r_k(beta, params, p, 1.0 / p, 0.0).unwrap();
        let (r2, b2) = compute_r_k(beta / 2.0, params, p, 1.0 / p, 0.0).unwrap();
        prop_assert!((r2 / r1 / 2f64.powf(p / (p - 2.0)) - 1.0).abs() < 1e-12);
        prop_assert!(b2 > b1);
    }

    #[test]
    fn record_json_round_trip(u in coeffs(12), e in -1e6f64..1e6) {
        let rec = SolutionRecord {
            coefficients: u,
            energy: e,
            residual: 1e-11,
            norm: 1.0,
            h1_plus: 0.5,
            h1_minus: 0.25,
            l2_plus: 0.1,
            l2_minus: 0.2,
            sign_changes: 1,
            sign_changing: true,
            k: 2,
            m: 12,
            hits: 3,
            outer_iterations: 10,
            newton_iterations: 2,
        };
        let text = serde_json::to_string_pretty(&rec).unwrap();
        let back: SolutionRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    }

    #[test]
    fn oversized_seed_is_rejected(seed in (i64::MAX as u64 + 1)..=u64::MAX) {
        let mut cfg = parse_config("[domain]\nkind = \"interval\"\nlength = 2.0\n[nonlinearity]\nkind = \"power\"\np = 6.0\n").unwrap().config;
        cfg.rng_seed = seed;
        prop_assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_echo_round_trip(a in 0.1f64..5.0, b in 0.0f64..5.0, p in 4.1f64..9.0, m in 10usize..80, seed in 0u64..=i64::MAX as u64) {
        let cfg = RunConfig {
            a,
            b,
            m,
            rng_seed: seed,
            k_max: 4,
            nonlinearity: NonlinearitySpec::Power { p, coefficient: 1.0 },
            ..parse_config("[domain]\nkind = \"interval\"\nlength = 2.0\n[nonlinearity]\nkind = \"power\"\np = 6.0\n").unwrap().config
        };
        let text = cfg.to_toml().unwrap();
        let back = parse_config(&text).unwrap().config;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}
