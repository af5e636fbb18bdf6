use std::f64::consts::PI;

use proptest::prelude::*;

use drpforge::dispersion::{ratio_at, stability_limit};
use drpforge::grid::{Discretization, Field};
use drpforge::metrics::{convergence_rate, error_over_time, l2_grid_norm};
use drpforge::simulator::{InitialData, RecordPolicy, Scheme, Simulator, WaveState};
use drpforge::stencil::{
    constraint_residuals, fornberg_weights, from_free_params, FreeParams, Order, Stencil,
};

fn order_strategy() -> impl Strategy<Value = Order> {
    prop_oneof![Just(Order::Second), Just(Order::Fourth)]
}

fn params_strategy() -> impl Strategy<Value = FreeParams> {
    order_strategy().prop_flat_map(|o| {
        prop::collection::vec(-1.0f64..1.0, o.free_len())
            .prop_map(move |theta| FreeParams::new(o, theta).unwrap())
    })
}

fn field_from(n: usize, values: &[f64]) -> Field {
    let mut f = Field::from_fn(n, |i, j| values[(i * n + j) % values.len()]);
    f.zero_boundary();
    f
}

fn scheme_strategy() -> impl Strategy<Value = Scheme> {
    prop_oneof![
        Just(Scheme::classic2()),
        Just(Scheme::classic4()),
        Just(Scheme::published_k2()),
        Just(Scheme::published_k4()),
    ]
}

fn small_disc(n: usize, steps: usize) -> Discretization {
    // alpha = 0.3 keeps every roster stencil stable
    let h = 1.0 / (n - 1) as f64;
    Discretization::new(1.0, n, steps, 0.3 * h * steps as f64, 1.0).unwrap()
}

proptest! {
    #[test]
    fn eliminated_weights_satisfy_constraints(p in params_strategy()) {
        let w = from_free_params(&p).unwrap();
        prop_assert!(constraint_residuals(&w).max_active(p.order()) <= 1e-12);
    }

    #[test]
    fn symmetric_stencils_are_flip_invariant(p in params_strategy()) {
        let s = Stencil::build_symmetric(&from_free_params(&p).unwrap());
        prop_assert_eq!(&s.flip_rows(), &s);
        prop_assert_eq!(&s.flip_cols(), &s);
        prop_assert_eq!(&s.transpose(), &s);
    }

    #[test]
    fn fornberg_differentiates_monomials(
        offsets in prop::collection::btree_set(-6i32..7, 3..7),
        x0 in -2.0f64..2.0,
    ) {
        let nodes: Vec<f64> = offsets.iter().map(|&k| k as f64 * 0.5).collect();
        let n = nodes.len();
        for m in 0..n.min(3) {
            let w = fornberg_weights(&nodes, x0, m).unwrap();
            for j in 0..n {
                let approx: f64 = w.iter().zip(&nodes).map(|(c, x)| c * x.powi(j as i32)).sum();
                // d^m/dx^m x^j at x0
                let exact = if j < m {
                    0.0
                } else {
                    let coef: f64 = ((j - m + 1)..=j).map(|k| k as f64).product();
                    coef * x0.powi((j - m) as i32)
                };
                let scale = exact.abs().max(1.0);
                prop_assert!((approx - exact).abs() <= 1e-10 * scale,
                    "m={} j={} approx={} exact={}", m, j, approx, exact);
            }
        }
    }

    #[test]
    fn dispersion_angle_symmetry(p in params_strategy(), kh in 0.05f64..3.0, theta in 0.0f64..(PI / 2.0)) {
        let s = Stencil::build_symmetric(&from_free_params(&p).unwrap());
        let a = ratio_at(&s, kh, theta, 0.2).unwrap();
        let b = ratio_at(&s, kh, PI / 2.0 - theta, 0.2).unwrap();
        let c = ratio_at(&s, kh, -theta, 0.2).unwrap();
        prop_assert_eq!(a.stable, b.stable);
        prop_assert_eq!(a.stable, c.stable);
        if a.stable {
            prop_assert!((a.ratio - b.ratio).abs() <= 1e-12);
            prop_assert!((a.ratio - c.ratio).abs() <= 1e-12);
        }
    }

    #[test]
    fn denser_sampling_never_raises_stability_limit(p in params_strategy()) {
        let s = Stencil::build_symmetric(&from_free_params(&p).unwrap());
        if let (Ok(coarse), Ok(fine)) = (stability_limit(&s, 8, 64), stability_limit(&s, 16, 128)) {
            prop_assert!(fine <= coarse + 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn simulator_is_linear(
        scheme in scheme_strategy(),
        n in 8usize..20,
        u in prop::collection::vec(-1.0f64..1.0, 64),
        w in prop::collection::vec(-1.0f64..1.0, 64),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let d = small_disc(n, 15);
        let sim = Simulator::new(scheme, d).unwrap();
        let fu = field_from(n, &u);
        let fw = field_from(n, &w[3..]);
        let mut mix = fu.clone();
        mix.scale(a);
        mix.axpy(b, &fw);
        let run = |f: Field| sim.run(&InitialData::at_rest(f), None, RecordPolicy::FinalOnly).unwrap().fields[0].clone();
        let ru = run(fu);
        let rw = run(fw);
        let rm = run(mix);
        let mut expect = ru.clone();
        expect.scale(a);
        expect.axpy(b, &rw);
        let scale = expect.max_abs().max(1e-300);
        let mut diff = rm.clone();
        diff.axpy(-1.0, &expect);
        prop_assert!(diff.max_abs() <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn transpose_symmetry_is_preserved(
        scheme in scheme_strategy(),
        n in 8usize..20,
        u in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let d = small_disc(n, 20);
        let sim = Simulator::new(scheme, d).unwrap();
        let f = field_from(n, &u);
        let mut sym = f.clone();
        sym.axpy(1.0, &f.transpose());
        let traj = sim.run(&InitialData::at_rest(sym), None, RecordPolicy::All).unwrap();
        for level in &traj.fields {
            let mut diff = level.clone();
            diff.axpy(-1.0, &level.transpose());
            prop_assert!(diff.max_abs() <= 1e-12 * level.max_abs().max(1.0));
        }
    }

    #[test]
    fn boundary_stays_exactly_zero(
        scheme in scheme_strategy(),
        n in 8usize..20,
        u in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let d = small_disc(n, 20);
        let sim = Simulator::new(scheme, d).unwrap();
        let traj = sim.run(&InitialData::at_rest(field_from(n, &u)), None, RecordPolicy::All).unwrap();
        prop_assert!(traj.fields.iter().all(Field::boundary_is_zero));
    }

    #[test]
    fn update_is_time_reversible(
        scheme in scheme_strategy(),
        n in 8usize..20,
        u in prop::collection::vec(-1.0f64..1.0, 64),
        v in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let steps = 12;
        let d = small_disc(n, steps);
        let sim = Simulator::new(scheme, d).unwrap();
        let mut state = WaveState { prev: field_from(n, &u), curr: field_from(n, &v), step_index: 1 };
        let start = state.clone();
        for _ in 0..steps {
            let next = sim.step(&state, None).unwrap();
            state = WaveState { prev: state.curr, curr: next, step_index: state.step_index + 1 };
        }
        // the recursion read backwards is the same recursion
        let mut back = WaveState { prev: state.curr, curr: state.prev, step_index: 1 };
        for _ in 0..steps {
            let next = sim.step(&back, None).unwrap();
            back = WaveState { prev: back.curr, curr: next, step_index: back.step_index + 1 };
        }
        let mut diff = back.curr.clone();
        diff.axpy(-1.0, &start.prev);
        prop_assert!(diff.max_abs() <= 1e-8, "{}", diff.max_abs());
        let mut diff = back.prev.clone();
        diff.axpy(-1.0, &start.curr);
        prop_assert!(diff.max_abs() <= 1e-8);
    }

    #[test]
    fn norm_invariants(
        n in 5usize..12,
        steps in 1usize..8,
        err in prop::collection::vec(-1.0f64..1.0, 50),
        s in -5.0f64..5.0,
    ) {
        let d = Discretization::new(1.0, n, steps, 0.08, 1.0).unwrap();
        let zero: Vec<Field> = (0..=steps).map(|_| Field::zeros(n)).collect();
        let e: Vec<Field> = (0..=steps)
            .map(|k| Field::from_fn(n, |i, j| err[(k * 7 + i * n + j) % err.len()]))
            .collect();
        let scaled: Vec<Field> = e.iter().map(|f| { let mut g = f.clone(); g.scale(s); g }).collect();
        let base = l2_grid_norm(&e, &zero, &d).unwrap();
        let l2s = l2_grid_norm(&scaled, &zero, &d).unwrap();
        prop_assert!((l2s - s.abs() * base).abs() <= 1e-12 * base.max(1e-300) * s.abs().max(1.0));
        let per_step = error_over_time(&e, &zero, &d).unwrap();
        prop_assert_eq!(per_step.len(), steps);
        prop_assert!(per_step.iter().all(|v| *v >= 0.0));
        let integral = d.dt() * per_step.iter().map(|v| v * v).sum::<f64>();
        prop_assert!((integral - base * base).abs() <= 1e-12 * (base * base).max(1e-300));
    }

    #[test]
    fn rate_is_antisymmetric(e1 in 1e-8f64..1.0, e2 in 1e-8f64..1.0, h1 in 1e-3f64..0.5, ratio in 1.1f64..4.0) {
        let h2 = h1 / ratio;
        let r = convergence_rate(e1, h1, e2, h2).unwrap();
        let back = convergence_rate(e2, h2, e1, h1).unwrap();
        prop_assert!((r - back).abs() <= 1e-12 * r.abs().max(1.0));
        prop_assert!(((e1 / e2).ln() - r * ratio.ln()).abs() <= 1e-10);
    }
}
