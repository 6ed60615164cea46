use snpair_core::diagnostics::{entropies, marginals, schmidt, short_time_coefficient, EIGENVALUE_FLOOR};
use snpair_core::initial_states::{
    assemble_state, ground_state_sn, AssembleConfig, GroundStateOptions, InitialKind, ProfileSpec,
};
use snpair_core::{Couplings, Grid1D, Propagator, StepPlan, TwoBodyState};

fn grid() -> Grid1D {
    Grid1D::new(256, 40.0).unwrap()
}

fn gaussian_state(kind: InitialKind, couplings: Couplings, masses: (f64, f64)) -> (TwoBodyState, Propagator) {
    gaussian_state_dt(kind, couplings, masses, 0.01)
}

fn gaussian_state_dt(kind: InitialKind, couplings: Couplings, masses: (f64, f64), dt: f64) -> (TwoBodyState, Propagator) {
    let g = grid();
    let plan = StepPlan::new(&g, masses, couplings, 0.2, dt).unwrap();
    let cfg = AssembleConfig { kind, profile: ProfileSpec::Gaussian, r0: 6.0, sigma0: 1.0, masses, couplings };
    let state = assemble_state(&cfg, &g, &plan.kernel).unwrap().state;
    (state, Propagator::new(plan))
}

fn run(prop: &mut Propagator, state: &mut TwoBodyState, steps: usize) {
    for _ in 0..steps {
        prop.step(state).unwrap();
    }
}

fn variance(rho: &[f64], g: &Grid1D) -> f64 {
    let mean: f64 = rho.iter().zip(g.x()).map(|(r, x)| r * x).sum::<f64>() * g.dx();
    rho.iter().zip(g.x()).map(|(r, x)| r * (x - mean).powi(2)).sum::<f64>() * g.dx()
}

#[test]
fn free_gaussians_follow_the_spreading_law() {
    for mu in [1.0, 2.0] {
        let (mut s, mut p) = gaussian_state(InitialKind::I, Couplings::new(0.0, 0.0).unwrap(), (mu, mu));
        run(&mut p, &mut s, 200);
        let (r1, r2) = marginals(&s);
        let want = 1.0 + 4.0 / (4.0 * mu * mu);
        for r in [&r1, &r2] {
            let got = variance(r, &s.grid);
            assert!(((got - want) / want).abs() < 1e-4, "mu {mu}: {got} vs {want}");
        }
    }
}

#[test]
fn free_evolution_conserves_energy_exactly() {
    let (product, mut p) = gaussian_state(InitialKind::I, Couplings::new(0.0, 0.0).unwrap(), (1.0, 1.0));
    assert!((p.energy(&product).unwrap().e_total - 0.25).abs() < 1e-8);
    let (mut s, _) = gaussian_state(InitialKind::IV, Couplings::new(0.0, 0.0).unwrap(), (1.0, 1.0));
    let e0 = p.energy(&s).unwrap();
    run(&mut p, &mut s, 300);
    let e1 = p.energy(&s).unwrap();
    assert!(((e1.e_total - e0.e_total) / e0.e_total).abs() < 1e-12);
    assert!((e1.norm - 1.0).abs() < 1e-12);
}

#[test]
fn stationary_profile_stays_put_without_pair_term() {
    let g = grid();
    let couplings = Couplings::new(1.0, 0.0).unwrap();
    let plan = StepPlan::new(&g, (1.0, 1.0), couplings, 0.2, 0.01).unwrap();
    let (sn, _) = ground_state_sn(&g, 1.0, 1.0, &plan.kernel, 1.0, GroundStateOptions::default()).unwrap();
    let far = sn.translated(&g, 10.0);
    let mut s = TwoBodyState::product(&sn.amplitude, &far.amplitude, g.clone(), (1.0, 1.0)).unwrap();
    let (rho0, _) = marginals(&s);
    let mut p = Propagator::new(plan);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        run(&mut p, &mut s, 100);
        let (rho, _) = marginals(&s);
        worst = rho.iter().zip(&rho0).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn self_field_alone_preserves_the_schmidt_spectrum() {
    for kind in [InitialKind::III, InitialKind::IV] {
        let (mut s, mut p) = gaussian_state(kind, Couplings::new(1.0, 0.0).unwrap(), (1.0, 1.0));
        let before = schmidt(&s, EIGENVALUE_FLOOR).unwrap();
        run(&mut p, &mut s, 500);
        let after = schmidt(&s, EIGENVALUE_FLOOR).unwrap();
        for (a, b) in before.eigenvalues().iter().zip(after.eigenvalues()).take(8) {
            assert!((a - b).abs() < 1e-8, "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn pair_term_entangles_a_product_state() {
    let (mut s, mut p) = gaussian_state(InitialKind::I, Couplings::new(1.0, 1.0).unwrap(), (1.0, 1.0));
    run(&mut p, &mut s, 300);
    let (svn, _) = entropies(&schmidt(&s, EIGENVALUE_FLOOR).unwrap());
    assert!(svn > 1e-6, "{svn}");
}

#[test]
fn exchange_symmetry_is_preserved() {
    let (mut s, mut p) = gaussian_state(InitialKind::IV, Couplings::new(1.0, 1.0).unwrap(), (1.0, 1.0));
    assert!(s.exchange_asymmetry() < 1e-14);
    run(&mut p, &mut s, 300);
    let scale = s.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(s.exchange_asymmetry() < 1e-12 * scale, "{}", s.exchange_asymmetry());
}

#[test]
fn exchanging_the_particles_commutes_with_evolution() {
    let masses = (1.0, 2.0);
    let c = Couplings::new(1.0, 1.0).unwrap();
    let (mut s, mut p) = gaussian_state(InitialKind::I, c, masses);
    let mut swapped = s.exchanged();
    let mut q = Propagator::new(StepPlan::new(&s.grid, (masses.1, masses.0), c, 0.2, 0.01).unwrap());
    run(&mut p, &mut s, 100);
    run(&mut q, &mut swapped, 100);
    assert!(s.exchanged().distance(&swapped) < 1e-11);
}

#[test]
fn evolution_is_time_reversible() {
    let (mut s, mut p) = gaussian_state(InitialKind::II, Couplings::new(1.0, 1.0).unwrap(), (1.0, 1.0));
    let start = s.clone();
    run(&mut p, &mut s, 400);
    assert!(s.distance(&start) > 0.1);
    s.conjugate();
    run(&mut p, &mut s, 400);
    s.conjugate();
    let err = s.distance(&start);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn splitting_is_second_order() {
    let c = Couplings::new(1.0, 1.0).unwrap();
    let at = |dt: f64| {
        let (mut s, mut p) = gaussian_state_dt(InitialKind::I, c, (1.0, 1.0), dt);
        run(&mut p, &mut s, (2.0 / dt).round() as usize);
        s
    };
    let (a, b, d) = (at(0.01), at(0.005), at(0.0025));
    let ratio = a.distance(&b) / b.distance(&d);
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn linear_entropy_grows_at_the_predicted_rate() {
    let c = Couplings::new(1.0, 1.0).unwrap();
    let dt = 0.001;
    let (mut s, mut p) = gaussian_state_dt(InitialKind::I, c, (1.0, 1.0), dt);
    let coefficient = short_time_coefficient(&s, &p.plan().pair_field).unwrap();
    assert!(((coefficient.residual_form - coefficient.variance_form) / coefficient.residual_form).abs() < 1e-10);

    let mut samples = Vec::new();
    let mut done = 0;
    for t in [0.02, 0.04, 0.08] {
        let target = (t / dt).round() as usize;
        run(&mut p, &mut s, target - done);
        done = target;
        let (_, sl) = entropies(&schmidt(&s, 0.0).unwrap());
        samples.push((t, sl / (t * t)));
    }
    // quadratic through the three samples, evaluated at t = 0
    let [(t0, y0), (t1, y1), (t2, y2)] = [samples[0], samples[1], samples[2]];
    let limit = y0 * t1 * t2 / ((t0 - t1) * (t0 - t2)) + y1 * t0 * t2 / ((t1 - t0) * (t1 - t2))
        + y2 * t0 * t1 / ((t2 - t0) * (t2 - t1));
    let rel = ((limit - coefficient.value()) / coefficient.value()).abs();
    assert!(rel < 0.02, "measured {limit}, predicted {}", coefficient.value());
}

#[test]
fn superposition_entropy_tends_to_ln2() {
    let g = grid();
    let couplings = Couplings::new(1.0, 1.0).unwrap();
    let plan = StepPlan::new(&g, (1.0, 1.0), couplings, 0.2, 0.01).unwrap();
    let mut last = 0.0;
    for r0 in [2.0, 4.0, 6.0, 10.0] {
        let cfg = AssembleConfig {
            kind: InitialKind::III,
            profile: ProfileSpec::Gaussian,
            r0,
            sigma0: 1.0,
            masses: (1.0, 1.0),
            couplings,
        };
        let s = assemble_state(&cfg, &g, &plan.kernel).unwrap().state;
        let (svn, _) = entropies(&schmidt(&s, EIGENVALUE_FLOOR).unwrap());
        assert!(svn > last);
        last = svn;
    }
    assert!((last - std::f64::consts::LN_2).abs() < 1e-5);
}
