use num_complex::Complex64;

use qutrit_transfer::experiments::{convergence_study, ConvergenceReport, Scenario, SweepSpec};
use qutrit_transfer::lindblad::{evolve_pure, IntegratorConfig};
use qutrit_transfer::model::{reduced_exchange_hamiltonian, DeviceDesign, Lifetimes};
use qutrit_transfer::operators::{KetVector, Level, SpaceLayout};
use qutrit_transfer::protocol::Dynamics;

fn reference() -> Scenario {
    Scenario::default()
}

#[test]
fn exchange_rabi_oscillation() {
    let layout = SpaceLayout::new(2).unwrap();
    let params = DeviceDesign::default().build().unwrap();
    let lambda = params.lambda1();
    let h = reduced_exchange_hamiltonian(&params, &layout).unwrap();
    let cfg = IntegratorConfig::default();
    for level in [Level::E, Level::F] {
        let mut psi = KetVector::basis(&layout, level, Level::G, 0, 0);
        let (here, there) = (layout.index(level, Level::G, 0, 0), layout.index(Level::G, level, 0, 0));
        let step = 2.5;
        for k in 1..=20 {
            psi = evolve_pure(&psi, &h, &layout, (k - 1) as f64 * step, step, &cfg).unwrap();
            let t = k as f64 * step;
            let stay = Complex64::new((lambda * t).cos(), 0.0);
            let moved = Complex64::new(0.0, -(lambda * t).sin());
            assert!((psi.amplitude(here) - stay).norm() < 1e-9, "t = {t}");
            assert!((psi.amplitude(there) - moved).norm() < 1e-9, "t = {t}");
        }
    }
}

#[test]
fn no_leakage_outside_reachable_subspace() {
    let mut full = reference();
    full.settings.integrator.reduce = false;
    let r_full = full.run().unwrap();
    let r_red = reference().run().unwrap();
    assert!((r_full.fidelity - r_red.fidelity).abs() < 1e-10);

    let layout = full.settings.layout;
    let rho = r_full.final_state.matrix();
    let leaked: f64 = (0..layout.dim())
        .filter(|&i| {
            let (q1, q2, na, nb) = layout.decompose(i);
            let excited = |l: Level| usize::from(l != Level::G);
            excited(q1) + excited(q2) + na + nb > 1
        })
        .map(|i| rho[(i, i)].re)
        .sum();
    assert!(leaked.abs() < 1e-8, "leaked population {leaked}");
}

#[test]
fn virtual_photons_stay_small() {
    let r = reference().run().unwrap();
    assert!(r.peak_photons() < 0.05, "{}", r.peak_photons());
    assert!(r.peak_photons() > 0.0);
}

#[test]
fn fidelity_grows_with_resonator_lifetime() {
    let mut last = 0.0;
    for kappa_inv in [0.1, 1.0, 10.0] {
        let mut s = reference();
        s.lifetimes.kappa_inv_us = kappa_inv;
        let f = s.run().unwrap().fidelity;
        assert!(f + 1e-4 >= last, "κ⁻¹ = {kappa_inv}: {f} < {last}");
        last = f;
    }
}

#[test]
fn effective_dynamics_is_nearly_exact_without_losses() {
    let mut s = reference();
    s.lifetimes = Lifetimes::lossless();
    s.settings.dynamics = Dynamics::Effective;
    s.settings.crosstalk = false;
    assert!((s.run().unwrap().fidelity - 1.0).abs() < 1e-9);
}

#[test]
fn self_convergence_and_small_truncation_smoke() {
    let result = convergence_study(&reference(), &SweepSpec::default()).unwrap();
    assert_eq!(result.rows.len(), 5);
    let report = ConvergenceReport::from_result(&result, 3, 1.0);
    assert!(report.truncation_delta.unwrap() < 1e-4);
    assert!(report.timestep_delta.unwrap() < 1e-5);
    let n2 = result.fidelity_at(&[2.0, 1.0]).expect("N = 2 row");
    assert!(n2 > 0.9 && n2 <= 1.0);
}

#[test]
fn runs_are_bitwise_reproducible() {
    let a = reference().run().unwrap();
    let b = reference().run().unwrap();
    assert_eq!(a.fidelity.to_bits(), b.fidelity.to_bits());
    assert_eq!(a.final_state, b.final_state);
}

#[test]
fn rk4_doubling_agrees_with_fixed_step() {
    let mut s = reference();
    s.settings.integrator.method = qutrit_transfer::lindblad::Method::Rk4StepDoubling;
    let adaptive = s.run().unwrap().fidelity;
    let fixed = reference().run().unwrap().fidelity;
    assert!((adaptive - fixed).abs() < 1e-6, "{adaptive} vs {fixed}");
}
