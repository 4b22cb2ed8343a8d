//! The two-stage transfer: resonator-mediated swap for t1 = π/(2λ1), then a
//! π pulse of length t2 = π/Ω on qutrit 2's e↔f transition.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lindblad::{evolve, evolve_pure, IntegratorConfig, TrajectoryRecord};
use crate::model::{
    collapse_operators, effective_hamiltonian, quality_factor, stage1_hamiltonian, stage2_hamiltonian,
    DecoherenceRates, DeviceParams, Hamiltonian, InitialStateSpec,
};
use crate::operators::{DensityMatrix, KetVector, Level, SpaceLayout, ZERO};

/// Which stage-1 Hamiltonian drives the swap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    /// Full interaction-picture qutrit–resonator couplings.
    Full,
    /// Second-order dispersive model with the resonators eliminated.
    Effective,
}

impl fmt::Display for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dynamics::Full => "full",
            Dynamics::Effective => "effective",
        })
    }
}

impl FromStr for Dynamics {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(Dynamics::Full),
            "effective" => Ok(Dynamics::Effective),
            other => Err(format!("expected `full` or `effective`, got `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolSchedule {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Swap rate that sets t1; always λ1.
    pub lambda: f64,
    /// ns
    pub t1: f64,
    /// ns
    pub t2: f64,
}

impl ProtocolSchedule {
    pub fn rate_ratio(&self) -> f64 {
        self.lambda2 / self.lambda1
    }

    pub fn total_time(&self) -> f64 {
        self.t1 + self.t2
    }
}

pub fn build_schedule(params: &DeviceParams) -> Result<ProtocolSchedule> {
    let lambda1 = params.lambda1();
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidArgument(format!("λ1 must be positive, got {lambda1}")));
    }
    if !(params.rabi > 0.0) {
        return Err(Error::InvalidArgument("Rabi frequency must be positive".into()));
    }
    Ok(ProtocolSchedule {
        lambda1,
        lambda2: params.lambda2(),
        lambda: lambda1,
        t1: PI / (2.0 * lambda1),
        t2: PI / params.rabi,
    })
}

/// `(α|g⟩ + β|e⟩ + γ|f⟩)₁|g⟩₂|0⟩_a|0⟩_b`.
pub fn initial_ket(spec: &InitialStateSpec, layout: &SpaceLayout) -> Result<KetVector> {
    let norm_sq = spec.norm_sqr();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm_sq });
    }
    let mut v = DVector::from_element(layout.dim(), ZERO);
    for (level, amp) in Level::ALL.into_iter().zip(spec.amplitudes()) {
        v[layout.index(level, Level::G, 0, 0)] = amp;
    }
    Ok(KetVector::from_vector(v))
}

pub fn initial_state(spec: &InitialStateSpec, layout: &SpaceLayout) -> Result<DensityMatrix> {
    Ok(initial_ket(spec, layout)?.to_density())
}

/// `|g⟩₁|0⟩_a|0⟩_b(α|g⟩ + β|e⟩ + γ|f⟩)₂`, with no extra phases.
pub fn ideal_target(spec: &InitialStateSpec, layout: &SpaceLayout) -> KetVector {
    let mut v = DVector::from_element(layout.dim(), ZERO);
    for (level, amp) in Level::ALL.into_iter().zip(spec.amplitudes()) {
        v[layout.index(Level::G, level, 0, 0)] = amp;
    }
    KetVector::from_vector(v)
}

/// Closed-form stage-1 state under the dispersive model with λ1 = λ2 = λ,
/// including the Stark phase `e^{−iλt}`.
pub fn analytic_stage1_state(spec: &InitialStateSpec, lambda: f64, t: f64, layout: &SpaceLayout) -> KetVector {
    let phase = Complex64::from_polar(1.0, -lambda * t);
    let stay = phase * (lambda * t).cos();
    let moved = phase * Complex64::new(0.0, -(lambda * t).sin());
    let mut v = DVector::from_element(layout.dim(), ZERO);
    v[layout.index(Level::G, Level::G, 0, 0)] = spec.alpha;
    for (level, amp) in [(Level::E, spec.beta), (Level::F, spec.gamma)] {
        v[layout.index(level, Level::G, 0, 0)] = amp * stay;
        v[layout.index(Level::G, level, 0, 0)] = amp * moved;
    }
    KetVector::from_vector(v)
}

/// `F = √⟨ψ|ρ|ψ⟩`.
pub fn fidelity(rho: &DensityMatrix, target: &KetVector) -> Result<f64> {
    Ok(rho.overlap(target)?.max(0.0).sqrt())
}

/// Pure-state fidelity `|⟨target|ψ⟩|`.
pub fn pure_fidelity(psi: &KetVector, target: &KetVector) -> Result<f64> {
    Ok(target.inner(psi)?.norm())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferSettings {
    pub layout: SpaceLayout,
    pub crosstalk: bool,
    pub dynamics: Dynamics,
    pub integrator: IntegratorConfig,
}

impl Default for TransferSettings {
    fn default() -> Self {
        TransferSettings {
            layout: SpaceLayout::new(3).expect("3 photon levels"),
            crosstalk: true,
            dynamics: Dynamics::Full,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransferResult {
    pub fidelity: f64,
    pub final_state: DensityMatrix,
    pub target: KetVector,
    pub stage1: TrajectoryRecord,
    pub stage2: TrajectoryRecord,
    pub schedule: ProtocolSchedule,
    pub q_a: f64,
    pub q_b: f64,
    /// Non-fatal notes, e.g. an under-resolved time step.
    pub warnings: Vec<String>,
}

impl TransferResult {
    pub fn peak_photons(&self) -> f64 {
        self.stage1.peak_photons().max(self.stage2.peak_photons())
    }

    pub fn peak_photons_split(&self) -> (f64, f64) {
        let all = self.stage1.samples.iter().chain(&self.stage2.samples);
        all.fold((0.0f64, 0.0f64), |(a, b), s| (a.max(s.photons_a), b.max(s.photons_b)))
    }

    pub fn max_trace_error(&self) -> f64 {
        self.stage1.max_trace_error().max(self.stage2.max_trace_error())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.stage1.min_eigenvalue().min(self.stage2.min_eigenvalue())
    }

    pub fn max_purity(&self) -> f64 {
        self.stage1.max_purity().max(self.stage2.max_purity())
    }
}

fn stage_hamiltonians(params: &DeviceParams, settings: &TransferSettings) -> Result<(Hamiltonian, Hamiltonian)> {
    let layout = &settings.layout;
    let h1 = match settings.dynamics {
        Dynamics::Full => stage1_hamiltonian(params, layout, settings.crosstalk)?,
        Dynamics::Effective => effective_hamiltonian(params, layout)?,
    };
    let h2 = stage2_hamiltonian(params, layout, settings.crosstalk)?;
    Ok((h1, h2))
}

fn resolution_warnings(h1: &Hamiltonian, h2: &Hamiltonian, settings: &TransferSettings) -> Vec<String> {
    let omega_max = h1.max_frequency().max(h2.max_frequency());
    settings.integrator.resolution_warning(omega_max).into_iter().collect()
}

/// Runs both stages under the master equation and scores the final state
/// against the ideal transferred state.
pub fn run_transfer(
    spec: &InitialStateSpec,
    params: &DeviceParams,
    rates: &DecoherenceRates,
    settings: &TransferSettings,
) -> Result<TransferResult> {
    let schedule = build_schedule(params)?;
    run_transfer_with_schedule(spec, params, rates, settings, &schedule)
}

/// Like [`run_transfer`] but with stage durations fixed by the caller, e.g.
/// a schedule designed for nominal couplings applied to a perturbed device.
pub fn run_transfer_with_schedule(
    spec: &InitialStateSpec,
    params: &DeviceParams,
    rates: &DecoherenceRates,
    settings: &TransferSettings,
    schedule: &ProtocolSchedule,
) -> Result<TransferResult> {
    params.validate()?;
    if !(schedule.t1 > 0.0 && schedule.t2 > 0.0) {
        return Err(Error::InvalidArgument("stage durations must be positive".into()));
    }
    let schedule = *schedule;
    let layout = &settings.layout;
    let rho0 = initial_state(spec, layout)?;
    let target = ideal_target(spec, layout);
    let (h1, h2) = stage_hamiltonians(params, settings)?;
    let warnings = resolution_warnings(&h1, &h2, settings);
    let channels = collapse_operators(rates, layout)?;

    let stage1 = evolve(&rho0, &h1, &channels, layout, 0.0, schedule.t1, &settings.integrator)?;
    let stage2 = evolve(
        &stage1.final_state,
        &h2,
        &channels,
        layout,
        schedule.t1,
        schedule.t2,
        &settings.integrator,
    )?;
    let final_state = stage2.final_state.clone();
    Ok(TransferResult {
        fidelity: fidelity(&final_state, &target)?,
        final_state,
        target,
        stage1,
        stage2,
        schedule,
        q_a: quality_factor(params.omega_a, rates.kappa_a),
        q_b: quality_factor(params.omega_b, rates.kappa_b),
        warnings,
    })
}

/// Unitary run of both stages; returns the final state vector.
pub fn run_transfer_pure(
    spec: &InitialStateSpec,
    params: &DeviceParams,
    settings: &TransferSettings,
) -> Result<(KetVector, ProtocolSchedule)> {
    params.validate()?;
    let layout = &settings.layout;
    let schedule = build_schedule(params)?;
    let psi0 = initial_ket(spec, layout)?;
    let (h1, h2) = stage_hamiltonians(params, settings)?;
    let mid = evolve_pure(&psi0, &h1, layout, 0.0, schedule.t1, &settings.integrator)?;
    let end = evolve_pure(&mid, &h2, layout, schedule.t1, schedule.t2, &settings.integrator)?;
    Ok((end, schedule))
}

/// Nine fixed input states spread over the (γ, θ) parameterization, used by
/// the validation checks.
pub fn validation_states() -> Vec<InitialStateSpec> {
    let mut out = Vec::with_capacity(9);
    for gamma in [0.15, 0.55, 0.85] {
        for theta in [0.4, 2.3, 4.4] {
            out.push(InitialStateSpec::from_angles(gamma, theta).expect("γ in range"));
        }
    }
    out
}
