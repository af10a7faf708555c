use std::f64::consts::TAU;

use opk_core::config::{parse_config, parse_override_args};
use opk_core::kinetic::{apply_q, InitialCondition, KineticState, OpinionGrid};
use opk_core::macro_pde::{Boundary, FaceMean, MacroGrid, MacroSolver, MacroState};
use opk_core::model::{
    crossover_density, equilibrium_sigma2_for, normalized_coefficient_from_variance, normalized_coefficient_rewritten,
};
use opk_core::particles::interact;
use opk_core::trace::Table;
use opk_core::{Params, RateMode};
use proptest::prelude::*;

fn mode() -> impl Strategy<Value = RateMode> {
    prop_oneof![Just(RateMode::Symmetric), Just(RateMode::NonSymmetric)]
}

/// Positive density and opinion profiles built from two random Fourier modes.
fn profile(coeffs: [f64; 4], rho_amp: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let [a, b, c, d] = coeffs;
    let rho = move |x: f64| 1.0 + rho_amp * (0.6 * (TAU * x + a).sin() + 0.4 * (2.0 * TAU * x + b).cos());
    let phi = move |x: f64| c * (TAU * x).cos() + d * (3.0 * TAU * x).sin();
    (rho, phi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interaction_without_noise_stays_between(pi in -10.0..10.0f64, pj in -10.0..10.0f64, gamma in 0.0..=0.5f64) {
        let out = interact(pi, pj, gamma, 0.0);
        prop_assert!(out >= pi.min(pj) - 1e-12 && out <= pi.max(pj) + 1e-12);
        prop_assert!((out - pi).abs() <= (pj - pi).abs() * 0.5 + 1e-12);
        let shift = 3.25;
        prop_assert!((interact(pi + shift, pj + shift, gamma, 0.0) - out - shift).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_agree(zeta in 0.1..10.0f64, frac in 0.001..0.999f64, m in mode()) {
        let kc = match m { RateMode::Symmetric => zeta * zeta, RateMode::NonSymmetric => 2.0 * zeta * zeta };
        let kappa = frac * kc;
        let a = normalized_coefficient_from_variance(zeta, kappa, m).unwrap();
        let b = normalized_coefficient_rewritten(zeta, kappa, m).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!(equilibrium_sigma2_for(zeta, kappa, m).unwrap() > 0.0);
        prop_assert!(equilibrium_sigma2_for(zeta, kc * (1.0 + frac), m).is_err());
    }

    #[test]
    fn crossover_exceeds_one(zeta in 0.2..5.0f64, frac in 0.01..0.99f64) {
        let p = Params::new(0.05, frac * zeta * zeta, zeta, RateMode::Symmetric);
        prop_assert!(crossover_density(&p).unwrap() > 1.0);
    }

    #[test]
    fn macro_step_conserves_and_dissipates(
        coeffs in prop::array::uniform4(-1.0..1.0f64),
        rho_amp in 0.0..0.9f64,
        m in mode(),
        zero_flux in any::<bool>(),
        frac in 0.05..1.0f64,
    ) {
        let boundary = if zero_flux { Boundary::ZeroFlux } else { Boundary::Periodic };
        let grid = MacroGrid::new(48, boundary).unwrap();
        let (rho, phi) = profile(coeffs, rho_amp);
        let mut state = MacroState::from_fn(grid, rho, phi).unwrap();
        let solver = MacroSolver::new(grid, &state.rho, m, 0.01, FaceMean::Harmonic, 1e-3).unwrap();
        let c0 = state.conserved(m);
        let e0 = state.entropy(m);
        let scale = state.conserved_scale(m);
        let lo = state.phi.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = state.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..20 {
            solver.step(&mut state, frac * solver.stable_dt()).unwrap();
        }
        prop_assert!((state.conserved(m) - c0).abs() <= 1e-12 * scale.max(1e-300));
        prop_assert!(state.entropy(m) <= e0 * (1.0 + 1e-12));
        prop_assert!(state.phi.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    #[test]
    fn macro_constant_is_fixed(c in -5.0..5.0f64, coeffs in prop::array::uniform4(-1.0..1.0f64), m in mode()) {
        let grid = MacroGrid::periodic(32).unwrap();
        let (rho, _) = profile(coeffs, 0.8);
        let mut state = MacroState::from_fn(grid, rho, |_| c).unwrap();
        let solver = MacroSolver::new(grid, &state.rho, m, 0.01, FaceMean::Arithmetic, 1e-3).unwrap();
        solver.step(&mut state, 0.5 * solver.stable_dt()).unwrap();
        prop_assert!(state.phi.iter().all(|&v| v == c));
    }

    #[test]
    fn collision_operator_conserves_mass(
        w in 0.1..0.9f64, s1 in 0.3..1.5f64, s2 in 0.3..1.5f64, m1 in -1.0..1.0f64, m2 in -1.0..1.0f64,
        kappa in 0.1..0.9f64, m in mode(),
    ) {
        let ic = InitialCondition { components: vec![(w, s1, m1), (1.0 - w, s2, m2)] };
        let grid = OpinionGrid::centered(0.0, 9.0, 128).unwrap();
        let s = KineticState::from_initial(grid, &ic);
        let p = Params::new(0.05, kappa, 1.0, m);
        let q = apply_q(&s, &p).unwrap();
        let l1 = grid.integrate(&q.iter().map(|v| v.abs()).collect::<Vec<_>>());
        prop_assert!(grid.integrate(&q).abs() <= 1e-12 * l1.max(1e-300));
    }

    #[test]
    fn table_csv_round_trips(rows in prop::collection::vec(prop::array::uniform3(any::<f64>()), 0..20)) {
        let mut t = Table::new("test/1", &["a", "b", "c"]).with_params(vec![("gamma".into(), "0.05".into())]);
        for r in &rows {
            t.push(r.to_vec());
        }
        let back = Table::read(t.to_csv().as_bytes()).unwrap();
        prop_assert_eq!(&back.params, &t.params);
        for (x, y) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
        }
    }

    #[test]
    fn override_flags_round_trip(gamma in 0.001..0.5f64, kappa in 0.01..0.99f64) {
        let args: Vec<String> = ["--gamma", &format!("{gamma:?}"), "--kappa", &format!("{kappa:?}")]
            .iter().map(|s| s.to_string()).collect();
        let cfg = parse_config(None, &parse_override_args(&args).unwrap()).unwrap();
        let p = cfg.params().unwrap();
        prop_assert_eq!(p.gamma, gamma);
        prop_assert_eq!(p.kappa, kappa);
    }
}
