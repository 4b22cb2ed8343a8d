//! Self-checks that need no reference numbers: dark states, closed-form
//! oracles, conservation laws and numerical convergence.

use std::f64::consts::PI;

use crate::error::Result;
use crate::experiments::{convergence_study, ConvergenceReport, Scenario, SweepSpec};
use crate::lindblad::{evolve, evolve_pure};
use crate::model::{
    effective_hamiltonian, stage2_hamiltonian, Channel, ChannelKind, ConstraintMode, DeviceDesign,
    Hamiltonian, InitialStateSpec, Lifetimes,
};
use crate::operators::{resonator_lowering, Factor, KetVector, Level};
use crate::protocol::{
    analytic_stage1_state, build_schedule, initial_ket, pure_fidelity, run_transfer_pure, Dynamics,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn at_most(name: &'static str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name,
            passed: measured <= threshold,
            measured,
            threshold,
            detail: detail.into(),
        }
    }

    fn at_least(name: &'static str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name,
            passed: measured >= threshold,
            measured,
            threshold,
            detail: detail.into(),
        }
    }
}

fn equal_rates(base: &Scenario) -> Scenario {
    Scenario {
        design: DeviceDesign {
            mode: ConstraintMode::EqualRates,
            mu_mhz: None,
            c: 1.0,
            d: 1.0,
            ..base.design.clone()
        },
        ..base.clone()
    }
}

fn lossless(base: &Scenario, dynamics: Dynamics, crosstalk: bool) -> Scenario {
    let mut s = equal_rates(base);
    s.lifetimes = Lifetimes::lossless();
    s.settings.dynamics = dynamics;
    s.settings.crosstalk = crosstalk;
    s
}

/// Ground input under full dissipative dynamics must come out untouched.
pub fn dark_state(base: &Scenario) -> Result<CheckOutcome> {
    let s = Scenario {
        state: InitialStateSpec::basis(Level::G),
        ..base.clone()
    };
    let f = s.run()?.fidelity;
    Ok(CheckOutcome::at_most("dark_state", (1.0 - f).abs(), 1e-7, format!("F = {f:.12}")))
}

/// Dispersive-model pure evolution against the closed-form swap.
pub fn analytic_oracle(base: &Scenario) -> Result<CheckOutcome> {
    let s = lossless(base, Dynamics::Effective, false);
    let params = s.design.build()?;
    let layout = s.settings.layout;
    let h = effective_hamiltonian(&params, &layout)?;
    let lambda = params.lambda1();
    let t_end = PI / (2.0 * lambda);
    let segments = 20;
    let mut worst = 0.0f64;
    for spec in [InitialStateSpec::uniform(), InitialStateSpec::basis(Level::E), InitialStateSpec::basis(Level::F)] {
        let mut psi = initial_ket(&spec, &layout)?;
        for k in 0..segments {
            let t0 = t_end * k as f64 / segments as f64;
            psi = evolve_pure(&psi, &h, &layout, t0, t_end / segments as f64, &s.settings.integrator)?;
            let oracle = analytic_stage1_state(&spec, lambda, t0 + t_end / segments as f64, &layout);
            let err = (psi.amplitudes() - oracle.amplitudes()).camax();
            worst = worst.max(err);
        }
    }
    Ok(CheckOutcome::at_most(
        "analytic_oracle",
        worst,
        1e-6,
        "max amplitude error over 20 checkpoints, 3 inputs",
    ))
}

/// Lossless dispersive model without crosstalk: transfer is exact.
pub fn ideal_limit(base: &Scenario) -> Result<CheckOutcome> {
    let s = lossless(base, Dynamics::Effective, false);
    let params = s.design.build()?;
    let mut worst = 0.0f64;
    for spec in crate::protocol::validation_states() {
        let (psi, _) = run_transfer_pure(&spec, &params, &s.settings)?;
        let target = crate::protocol::ideal_target(&spec, &s.settings.layout);
        worst = worst.max(1.0 - pure_fidelity(&psi, &target)?);
    }
    Ok(CheckOutcome::at_most("ideal_limit", worst, 1e-6, "1 − F over 9 inputs"))
}

/// Lossless full couplings without crosstalk at D = 10.
pub fn adiabatic_elimination(base: &Scenario) -> Result<CheckOutcome> {
    let mut s = lossless(base, Dynamics::Full, false);
    s.design.detuning_ratio = 10.0;
    let params = s.design.build()?;
    let mut worst = 1.0f64;
    for spec in crate::protocol::validation_states() {
        let (psi, _) = run_transfer_pure(&spec, &params, &s.settings)?;
        let target = crate::protocol::ideal_target(&spec, &s.settings.layout);
        worst = worst.min(pure_fidelity(&psi, &target)?);
    }
    Ok(CheckOutcome::at_least("adiabatic_elimination", worst, 0.99, "min F over 9 inputs, D = 10"))
}

/// The stage-2 π pulse flips the sign of |e⟩₂ and |f⟩₂.
pub fn pi_pulse(base: &Scenario) -> Result<CheckOutcome> {
    let params = base.design.build()?;
    let layout = base.settings.layout;
    let h = stage2_hamiltonian(&params, &layout, false)?;
    let t2 = build_schedule(&params)?.t2;
    let mut worst = 0.0f64;
    for level in [Level::E, Level::F] {
        let psi = KetVector::basis(&layout, Level::G, level, 0, 0);
        let out = evolve_pure(&psi, &h, &layout, 0.0, t2, &base.settings.integrator)?;
        let err = (out.amplitudes() + psi.amplitudes()).camax();
        worst = worst.max(err);
    }
    Ok(CheckOutcome::at_most("pi_pulse", worst, 1e-8, "max |ψ(t2) + ψ(0)|"))
}

/// Trace and positivity along the reference dissipative run.
pub fn conservation(base: &Scenario) -> Result<Vec<CheckOutcome>> {
    let r = base.run()?;
    Ok(vec![
        CheckOutcome::at_most("trace_preservation", r.max_trace_error(), 1e-8, "max |Tr ρ − 1| over samples"),
        CheckOutcome::at_least("positivity", r.min_eigenvalue(), -1e-7, "min eigenvalue over samples"),
        CheckOutcome::at_most("purity_bound", r.max_purity(), 1.0 + 1e-9, "max Tr ρ²"),
    ])
}

/// Single photon in resonator `a` decaying at κ: population e^{−1} at t = 1/κ.
pub fn photon_decay(base: &Scenario) -> Result<CheckOutcome> {
    let layout = base.settings.layout;
    let kappa = match crate::model::rate_from_lifetime_us(base.lifetimes.kappa_inv_us) {
        k if k > 0.0 => k,
        _ => 0.01,
    };
    let a = resonator_lowering(Factor::ResonatorA, &layout)?;
    let channels = vec![Channel {
        label: "a".into(),
        operator: a,
        rate: kappa,
        kind: ChannelKind::Decay,
    }];
    let rho0 = KetVector::basis(&layout, Level::G, Level::G, 1, 0).to_density();
    let rec = evolve(
        &rho0,
        &Hamiltonian::zero(layout.dim()),
        &channels,
        &layout,
        0.0,
        1.0 / kappa,
        &base.settings.integrator,
    )?;
    let last = rec.samples.last().expect("final sample");
    let expected = (-1.0f64).exp();
    let rel = (last.photons_a - expected).abs() / expected;
    Ok(CheckOutcome::at_most("photon_decay", rel, 1e-6, format!("κ = {kappa} /ns")))
}

/// Density-matrix and state-vector propagation agree without losses.
pub fn unitary_consistency(base: &Scenario) -> Result<CheckOutcome> {
    let s = lossless(base, Dynamics::Full, true);
    let r = s.run()?;
    let params = s.design.build()?;
    let (psi, _) = run_transfer_pure(&s.state, &params, &s.settings)?;
    let overlap = r.final_state.overlap(&psi)?;
    Ok(CheckOutcome::at_most(
        "unitary_consistency",
        (overlap - 1.0).abs(),
        1e-7,
        "|⟨ψ|ρ|ψ⟩ − 1|",
    ))
}

/// Truncation and step-size sensitivity of the reference fidelity.
pub fn convergence(base: &Scenario) -> Result<Vec<CheckOutcome>> {
    let n = base.settings.layout.n_photon();
    let dt_ps = base.settings.integrator.dt * 1e3;
    let sweep = SweepSpec {
        photon_levels: vec![n, n + 1],
        timesteps_ps: vec![dt_ps / 2.0],
        ..SweepSpec::default()
    };
    let result = convergence_study(base, &sweep)?;
    let report = ConvergenceReport::from_result(&result, n, dt_ps);
    Ok(vec![
        CheckOutcome::at_most(
            "truncation_convergence",
            report.truncation_delta.unwrap_or(f64::INFINITY),
            1e-4,
            format!("|F(N={n}) − F(N={})|", n + 1),
        ),
        CheckOutcome::at_most(
            "timestep_convergence",
            report.timestep_delta.unwrap_or(f64::INFINITY),
            1e-5,
            format!("|F(dt={dt_ps} ps) − F(dt={} ps)|", dt_ps / 2.0),
        ),
    ])
}

/// Every check, in a fixed order.
pub fn run_all(base: &Scenario) -> Result<Vec<CheckOutcome>> {
    let mut out = vec![
        dark_state(base)?,
        analytic_oracle(base)?,
        ideal_limit(base)?,
        adiabatic_elimination(base)?,
        pi_pulse(base)?,
    ];
    out.extend(conservation(base)?);
    out.push(photon_decay(base)?);
    out.push(unitary_consistency(base)?);
    out.extend(convergence(base)?);
    Ok(out)
}
