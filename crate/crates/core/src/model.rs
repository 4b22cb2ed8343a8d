//! Device parameters, Hamiltonians and dissipation channels.
//!
//! Inputs are ordinary frequencies (GHz, MHz) and lifetimes (μs). Everything
//! stored in [`DeviceParams`] and [`DecoherenceRates`] is already converted to
//! angular frequency in rad/ns and rates in 1/ns; times are in ns.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{
    qutrit_operator, resonator_lowering, ComplexMatrix, Factor, Level, SpaceLayout, ONE,
};

const QUTRITS: [Factor; 2] = [Factor::Qutrit1, Factor::Qutrit2];

/// GHz → rad/ns.
pub fn ghz_to_angular(nu_ghz: f64) -> f64 {
    2.0 * PI * nu_ghz
}

/// MHz → rad/ns.
pub fn mhz_to_angular(nu_mhz: f64) -> f64 {
    2.0 * PI * nu_mhz * 1e-3
}

/// rad/ns → MHz.
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e3
}

/// Lifetime in μs → rate in 1/ns. An infinite lifetime means no decay.
pub fn rate_from_lifetime_us(lifetime_us: f64) -> f64 {
    if lifetime_us.is_infinite() {
        0.0
    } else {
        1.0 / (lifetime_us * 1e3)
    }
}

/// How the resonator-`b` coupling μ is derived from g.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintMode {
    /// μ = g·√(Δ/δ): makes g²/δ = μ²/Δ, so both exchange rates coincide.
    EqualRates,
    /// μ = g·Δ/δ: the linear scaling that yields μ/2π = 80 MHz at the
    /// reference point.
    LinearRatio,
}

impl ConstraintMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::EqualRates => "equal-rates",
            ConstraintMode::LinearRatio => "linear-ratio",
        }
    }
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "equal-rates" => Ok(ConstraintMode::EqualRates),
            "linear-ratio" => Ok(ConstraintMode::LinearRatio),
            other => Err(format!("expected `equal-rates` or `linear-ratio`, got `{other}`")),
        }
    }
}

/// Physical parameters in angular units (rad/ns). Index 0 is qutrit 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceParams {
    pub omega_eg: [f64; 2],
    pub omega_fg: [f64; 2],
    pub omega_a: f64,
    pub omega_b: f64,
    /// Qutrit–resonator-`a` couplings on the g↔e transition.
    pub g: [f64; 2],
    /// Qutrit–resonator-`b` couplings on the g↔f transition.
    pub mu: [f64; 2],
    /// Direct resonator–resonator crosstalk coupling.
    pub g_ab: f64,
    /// Rabi frequency of the e↔f drive on qutrit 2.
    pub rabi: f64,
}

impl DeviceParams {
    /// δ_j = ω_eg,j − ω_a.
    pub fn delta(&self, j: usize) -> f64 {
        self.omega_eg[j] - self.omega_a
    }

    /// Δ_j = ω_fg,j − ω_b.
    pub fn big_delta(&self, j: usize) -> f64 {
        self.omega_fg[j] - self.omega_b
    }

    /// Δ_ab = ω_b − ω_a.
    pub fn delta_ab(&self) -> f64 {
        self.omega_b - self.omega_a
    }

    pub fn validate(&self) -> Result<()> {
        let freqs = [
            ("omega_eg_1", self.omega_eg[0]),
            ("omega_eg_2", self.omega_eg[1]),
            ("omega_fg_1", self.omega_fg[0]),
            ("omega_fg_2", self.omega_fg[1]),
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
        ];
        for (name, v) in freqs {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for j in 0..2 {
            if !(self.delta(j) > 0.0) || !(self.big_delta(j) > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "qutrit {} is not in the dispersive regime (δ = {}, Δ = {})",
                    j + 1,
                    self.delta(j),
                    self.big_delta(j)
                )));
            }
        }
        let couplings = [self.g[0], self.g[1], self.mu[0], self.mu[1], self.g_ab, self.rabi];
        if couplings.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidArgument("couplings must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// λ1 = (g1 g2 / 2)(1/δ1 + 1/δ2).
    pub fn lambda1(&self) -> f64 {
        0.5 * self.g[0] * self.g[1] * (1.0 / self.delta(0) + 1.0 / self.delta(1))
    }

    /// λ2 = (μ1 μ2 / 2)(1/Δ1 + 1/Δ2).
    pub fn lambda2(&self) -> f64 {
        0.5 * self.mu[0] * self.mu[1] * (1.0 / self.big_delta(0) + 1.0 / self.big_delta(1))
    }

    /// Scales the qutrit-2 couplings: g2 = c·g1, μ2 = d·μ1.
    pub fn with_inhomogeneity(mut self, c: f64, d: f64) -> Self {
        self.g[1] = c * self.g[0];
        self.mu[1] = d * self.mu[0];
        self
    }

    /// Largest oscillation frequency (rad/ns) appearing in either stage.
    pub fn max_frequency(&self) -> f64 {
        [
            self.delta(0).abs(),
            self.delta(1).abs(),
            self.big_delta(0).abs(),
            self.big_delta(1).abs(),
            self.delta_ab().abs(),
            self.rabi,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Fixes μ from g (taken from qutrit 1) and the detunings δ1, Δ1, and makes
/// both qutrits identical.
pub fn solve_constraints(params: &DeviceParams, mode: ConstraintMode) -> Result<DeviceParams> {
    let delta = params.delta(0);
    let big_delta = params.big_delta(0);
    if !(delta > 0.0) || !(big_delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "detunings must be positive (δ = {delta}, Δ = {big_delta})"
        )));
    }
    let g = params.g[0];
    let mu = match mode {
        ConstraintMode::EqualRates => g * (big_delta / delta).sqrt(),
        ConstraintMode::LinearRatio => g * big_delta / delta,
    };
    Ok(DeviceParams {
        g: [g, g],
        mu: [mu, mu],
        ..*params
    })
}

/// Ordinary-frequency description of a device, as written in a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceDesign {
    pub nu_eg_ghz: f64,
    pub nu_fg_ghz: f64,
    /// δ/2π; resonator `a` sits at ν_eg − δ/2π.
    pub delta_ghz: f64,
    /// Δ/2π; resonator `b` sits at ν_fg − Δ/2π.
    pub big_delta_ghz: f64,
    /// D = δ/g.
    pub detuning_ratio: f64,
    /// Explicit μ/2π; when absent μ follows from `mode`.
    pub mu_mhz: Option<f64>,
    pub mode: ConstraintMode,
    /// g_ab / g.
    pub crosstalk_ratio: f64,
    pub rabi_mhz: f64,
    /// g2 / g1.
    pub c: f64,
    /// μ2 / μ1.
    pub d: f64,
}

impl Default for DeviceDesign {
    fn default() -> Self {
        DeviceDesign {
            nu_eg_ghz: 3.5,
            nu_fg_ghz: 8.8,
            delta_ghz: 1.0,
            big_delta_ghz: 0.8,
            detuning_ratio: 10.0,
            mu_mhz: None,
            mode: ConstraintMode::EqualRates,
            crosstalk_ratio: 0.1,
            rabi_mhz: 100.0,
            c: 1.0,
            d: 1.0,
        }
    }
}

impl DeviceDesign {
    pub fn nu_a_ghz(&self) -> f64 {
        self.nu_eg_ghz - self.delta_ghz
    }

    pub fn nu_b_ghz(&self) -> f64 {
        self.nu_fg_ghz - self.big_delta_ghz
    }

    pub fn g_mhz(&self) -> f64 {
        self.delta_ghz * 1e3 / self.detuning_ratio
    }

    pub fn build(&self) -> Result<DeviceParams> {
        if !(self.detuning_ratio > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "detuning ratio D must exceed 1, got {}",
                self.detuning_ratio
            )));
        }
        if !(self.delta_ghz > 0.0) || !(self.big_delta_ghz > 0.0) {
            return Err(Error::InvalidArgument("detunings must be positive".into()));
        }
        let g = mhz_to_angular(self.g_mhz());
        let base = DeviceParams {
            omega_eg: [ghz_to_angular(self.nu_eg_ghz); 2],
            omega_fg: [ghz_to_angular(self.nu_fg_ghz); 2],
            omega_a: ghz_to_angular(self.nu_a_ghz()),
            omega_b: ghz_to_angular(self.nu_b_ghz()),
            g: [g, g],
            mu: [0.0, 0.0],
            g_ab: self.crosstalk_ratio * g,
            rabi: mhz_to_angular(self.rabi_mhz),
        };
        let solved = match self.mu_mhz {
            Some(mu) => {
                let mu = mhz_to_angular(mu);
                DeviceParams { mu: [mu, mu], ..base }
            }
            None => solve_constraints(&base, self.mode)?,
        };
        let params = solved.with_inhomogeneity(self.c, self.d);
        params.validate()?;
        Ok(params)
    }
}

/// `e^{iωt}·O + h.c.`
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatingTerm {
    pub frequency: f64,
    pub operator: ComplexMatrix,
}

/// Hamiltonian of the form `H(t) = H_s + Σ_k (e^{iω_k t} O_k + h.c.)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    static_part: ComplexMatrix,
    oscillating: Vec<OscillatingTerm>,
}

impl Hamiltonian {
    pub fn zero(dim: usize) -> Self {
        Hamiltonian {
            static_part: ComplexMatrix::zeros(dim, dim),
            oscillating: Vec::new(),
        }
    }

    /// `static_part` must be Hermitian.
    pub fn new(static_part: ComplexMatrix, oscillating: Vec<OscillatingTerm>) -> Result<Self> {
        let dim = static_part.nrows();
        if static_part.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: static_part.ncols(),
            });
        }
        for term in &oscillating {
            if term.operator.nrows() != dim || term.operator.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: term.operator.nrows(),
                });
            }
        }
        Ok(Hamiltonian {
            static_part,
            oscillating,
        })
    }

    pub fn dim(&self) -> usize {
        self.static_part.nrows()
    }

    pub fn static_part(&self) -> &ComplexMatrix {
        &self.static_part
    }

    pub fn oscillating(&self) -> &[OscillatingTerm] {
        &self.oscillating
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        let mut h = self.static_part.clone();
        for term in &self.oscillating {
            let phase = Complex64::from_polar(1.0, term.frequency * t);
            let scaled = &term.operator * phase;
            h += &scaled;
            h += scaled.adjoint();
        }
        h
    }

    pub fn max_frequency(&self) -> f64 {
        self.oscillating
            .iter()
            .filter(|t| t.operator.iter().any(|z| z.norm() > 0.0))
            .map(|t| t.frequency.abs())
            .fold(0.0, f64::max)
    }

    fn push(&mut self, frequency: f64, operator: ComplexMatrix) {
        self.oscillating.push(OscillatingTerm { frequency, operator });
    }
}

fn crosstalk_term(params: &DeviceParams, layout: &SpaceLayout) -> Result<OscillatingTerm> {
    let a = resonator_lowering(Factor::ResonatorA, layout)?;
    let b = resonator_lowering(Factor::ResonatorB, layout)?;
    Ok(OscillatingTerm {
        frequency: params.delta_ab(),
        operator: (a * b.adjoint()) * Complex64::new(params.g_ab, 0.0),
    })
}

/// Stage-1 interaction-picture Hamiltonian: each qutrit's g↔e transition
/// couples to resonator `a`, its g↔f transition to resonator `b`; optionally
/// the resonators also couple directly.
pub fn stage1_hamiltonian(params: &DeviceParams, layout: &SpaceLayout, crosstalk: bool) -> Result<Hamiltonian> {
    params.validate()?;
    let a = resonator_lowering(Factor::ResonatorA, layout)?;
    let b = resonator_lowering(Factor::ResonatorB, layout)?;
    let mut h = Hamiltonian::zero(layout.dim());
    for (j, q) in QUTRITS.into_iter().enumerate() {
        let s_eg = qutrit_operator(q, Level::G, Level::E, layout)?;
        let s_fg = qutrit_operator(q, Level::G, Level::F, layout)?;
        h.push(params.delta(j), (&a * s_eg) * Complex64::new(params.g[j], 0.0));
        h.push(params.big_delta(j), (&b * s_fg) * Complex64::new(params.mu[j], 0.0));
    }
    if crosstalk {
        h.oscillating.push(crosstalk_term(params, layout)?);
    }
    Ok(h)
}

/// Stage-2 Hamiltonian: resonant e↔f drive on qutrit 2, qutrits decoupled
/// from both resonators; optionally the resonator crosstalk persists.
pub fn stage2_hamiltonian(params: &DeviceParams, layout: &SpaceLayout, crosstalk: bool) -> Result<Hamiltonian> {
    params.validate()?;
    let e_f = qutrit_operator(Factor::Qutrit2, Level::F, Level::E, layout)?;
    let drive = (&e_f + e_f.adjoint()) * Complex64::new(params.rabi, 0.0);
    let mut h = Hamiltonian::new(drive, Vec::new())?;
    if crosstalk {
        h.oscillating.push(crosstalk_term(params, layout)?);
    }
    Ok(h)
}

/// Second-order dispersive Hamiltonian: Stark shifts, the photon-conversion
/// terms `a†b|f⟩⟨e|` and the resonator-mediated exchange at rates λ1, λ2.
pub fn effective_hamiltonian(params: &DeviceParams, layout: &SpaceLayout) -> Result<Hamiltonian> {
    for j in 0..2 {
        if params.delta(j) == 0.0 || params.big_delta(j) == 0.0 {
            return Err(Error::InvalidArgument("zero detuning".into()));
        }
    }
    let a = resonator_lowering(Factor::ResonatorA, layout)?;
    let b = resonator_lowering(Factor::ResonatorB, layout)?;
    let n_a = a.adjoint() * &a;
    let n_b = b.adjoint() * &b;
    let aad = &a * a.adjoint();
    let bbd = &b * b.adjoint();
    let real = |x: f64| Complex64::new(x, 0.0);

    let mut stark = ComplexMatrix::zeros(layout.dim(), layout.dim());
    let mut h = Hamiltonian::zero(layout.dim());
    for (j, q) in QUTRITS.into_iter().enumerate() {
        let (delta, big_delta) = (params.delta(j), params.big_delta(j));
        let p_g = qutrit_operator(q, Level::G, Level::G, layout)?;
        let p_e = qutrit_operator(q, Level::E, Level::E, layout)?;
        let p_f = qutrit_operator(q, Level::F, Level::F, layout)?;
        let chi_e = params.g[j] * params.g[j] / delta;
        let chi_f = params.mu[j] * params.mu[j] / big_delta;
        stark += (&aad * &p_e - &n_a * &p_g) * real(chi_e);
        stark += (&bbd * &p_f - &n_b * &p_g) * real(chi_f);

        let s_fe = qutrit_operator(q, Level::E, Level::F, layout)?;
        let conv = 0.5 * params.g[j] * params.mu[j] * (1.0 / delta + 1.0 / big_delta);
        h.push(-(delta - big_delta), (a.adjoint() * &b * s_fe) * real(conv));
    }
    h.static_part = stark;

    let s_eg1 = qutrit_operator(Factor::Qutrit1, Level::G, Level::E, layout)?;
    let s_eg2 = qutrit_operator(Factor::Qutrit2, Level::G, Level::E, layout)?;
    let s_fg1 = qutrit_operator(Factor::Qutrit1, Level::G, Level::F, layout)?;
    let s_fg2 = qutrit_operator(Factor::Qutrit2, Level::G, Level::F, layout)?;
    h.push(
        params.delta(0) - params.delta(1),
        (s_eg1 * s_eg2.adjoint()) * real(params.lambda1()),
    );
    h.push(
        params.big_delta(0) - params.big_delta(1),
        (s_fg1 * s_fg2.adjoint()) * real(params.lambda2()),
    );
    Ok(h)
}

/// Time-independent two-qutrit exchange at the common rate λ; requires
/// λ1 = λ2 to 1e-12 relative.
pub fn reduced_exchange_hamiltonian(params: &DeviceParams, layout: &SpaceLayout) -> Result<Hamiltonian> {
    let (l1, l2) = (params.lambda1(), params.lambda2());
    if (l1 - l2).abs() > 1e-12 * l1.abs().max(l2.abs()) {
        return Err(Error::InvalidArgument(format!(
            "exchange rates differ (λ1 = {l1}, λ2 = {l2})"
        )));
    }
    let s_eg1 = qutrit_operator(Factor::Qutrit1, Level::G, Level::E, layout)?;
    let s_eg2 = qutrit_operator(Factor::Qutrit2, Level::G, Level::E, layout)?;
    let s_fg1 = qutrit_operator(Factor::Qutrit1, Level::G, Level::F, layout)?;
    let s_fg2 = qutrit_operator(Factor::Qutrit2, Level::G, Level::F, layout)?;
    let x_e = s_eg1 * s_eg2.adjoint();
    let x_f = s_fg1 * s_fg2.adjoint();
    let sum = &x_e + x_e.adjoint() + &x_f + x_f.adjoint();
    Hamiltonian::new(sum * Complex64::new(l1, 0.0), Vec::new())
}

/// Lifetimes in μs, as written in a config file. `f64::INFINITY` turns a
/// channel off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lifetimes {
    pub kappa_inv_us: f64,
    pub relax_inv_us: f64,
    pub dephase_inv_us: f64,
}

impl Default for Lifetimes {
    fn default() -> Self {
        Lifetimes {
            kappa_inv_us: 0.1,
            relax_inv_us: 5.0,
            dephase_inv_us: 2.0,
        }
    }
}

impl Lifetimes {
    pub fn lossless() -> Self {
        Lifetimes {
            kappa_inv_us: f64::INFINITY,
            relax_inv_us: f64::INFINITY,
            dephase_inv_us: f64::INFINITY,
        }
    }

    pub fn rates(&self) -> DecoherenceRates {
        DecoherenceRates::from_lifetimes_us(self.kappa_inv_us, self.relax_inv_us, self.dephase_inv_us)
    }
}

/// Relaxation and dephasing rates in 1/ns. Index 0 is qutrit 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoherenceRates {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub gamma_eg: [f64; 2],
    pub gamma_fe: [f64; 2],
    pub gamma_fg: [f64; 2],
    pub gamma_phi_e: [f64; 2],
    pub gamma_phi_f: [f64; 2],
}

impl DecoherenceRates {
    pub fn none() -> Self {
        DecoherenceRates {
            kappa_a: 0.0,
            kappa_b: 0.0,
            gamma_eg: [0.0; 2],
            gamma_fe: [0.0; 2],
            gamma_fg: [0.0; 2],
            gamma_phi_e: [0.0; 2],
            gamma_phi_f: [0.0; 2],
        }
    }

    /// Same lifetime for both resonators, one relaxation lifetime for all
    /// three decay paths and one dephasing lifetime for both levels.
    pub fn from_lifetimes_us(kappa_inv: f64, relax_inv: f64, dephase_inv: f64) -> Self {
        let k = rate_from_lifetime_us(kappa_inv);
        let r = rate_from_lifetime_us(relax_inv);
        let p = rate_from_lifetime_us(dephase_inv);
        DecoherenceRates {
            kappa_a: k,
            kappa_b: k,
            gamma_eg: [r; 2],
            gamma_fe: [r; 2],
            gamma_fg: [r; 2],
            gamma_phi_e: [p; 2],
            gamma_phi_f: [p; 2],
        }
    }

    /// Resonator lifetime `kappa_inv_us`, qutrit relaxation 5 μs and
    /// dephasing 2 μs.
    pub fn reference(kappa_inv_us: f64) -> Self {
        Self::from_lifetimes_us(kappa_inv_us, 5.0, 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.kappa_a,
            self.kappa_b,
            self.gamma_eg[0],
            self.gamma_eg[1],
            self.gamma_fe[0],
            self.gamma_fe[1],
            self.gamma_fg[0],
            self.gamma_fg[1],
            self.gamma_phi_e[0],
            self.gamma_phi_e[1],
            self.gamma_phi_f[0],
            self.gamma_phi_f[1],
        ];
        if all.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidArgument("decoherence rates must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// `Q = ω/κ`; infinite when κ = 0.
pub fn quality_factor(omega: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        f64::INFINITY
    } else {
        omega / kappa
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    /// Lowering operator: `ΛρΛ† − ½{Λ†Λ, ρ}`.
    Decay,
    /// Level projector: same form with a Hermitian idempotent Λ.
    Dephasing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub label: String,
    pub operator: ComplexMatrix,
    pub rate: f64,
    pub kind: ChannelKind,
}

/// All dissipation channels with a nonzero rate: photon loss from each
/// resonator, three relaxation paths and two dephasing projectors per qutrit.
pub fn collapse_operators(rates: &DecoherenceRates, layout: &SpaceLayout) -> Result<Vec<Channel>> {
    rates.validate()?;
    let mut out = Vec::new();
    let mut add = |label: String, operator: ComplexMatrix, rate: f64, kind: ChannelKind| {
        if rate > 0.0 {
            out.push(Channel {
                label,
                operator,
                rate,
                kind,
            });
        }
    };
    add("a".into(), resonator_lowering(Factor::ResonatorA, layout)?, rates.kappa_a, ChannelKind::Decay);
    add("b".into(), resonator_lowering(Factor::ResonatorB, layout)?, rates.kappa_b, ChannelKind::Decay);
    for (j, q) in QUTRITS.into_iter().enumerate() {
        let n = j + 1;
        add(format!("eg{n}"), qutrit_operator(q, Level::E, Level::G, layout)?, rates.gamma_eg[j], ChannelKind::Decay);
        add(format!("fe{n}"), qutrit_operator(q, Level::F, Level::E, layout)?, rates.gamma_fe[j], ChannelKind::Decay);
        add(format!("fg{n}"), qutrit_operator(q, Level::F, Level::G, layout)?, rates.gamma_fg[j], ChannelKind::Decay);
        add(format!("phi_e{n}"), qutrit_operator(q, Level::E, Level::E, layout)?, rates.gamma_phi_e[j], ChannelKind::Dephasing);
        add(format!("phi_f{n}"), qutrit_operator(q, Level::F, Level::F, layout)?, rates.gamma_phi_f[j], ChannelKind::Dephasing);
    }
    Ok(out)
}

/// Qutrit-1 input state `α|g⟩ + β|e⟩ + γ|f⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialStateSpec {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
}

impl InitialStateSpec {
    pub fn new(alpha: Complex64, beta: Complex64, gamma: Complex64) -> Result<Self> {
        let spec = InitialStateSpec { alpha, beta, gamma };
        let norm_sq = spec.norm_sqr();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(spec)
    }

    pub fn real(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(alpha.into(), beta.into(), gamma.into())
    }

    /// α = √(1−γ²)·sin θ, β = √(1−γ²)·cos θ with real γ ∈ [0, 1].
    pub fn from_angles(gamma: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("γ must lie in [0, 1], got {gamma}")));
        }
        let r = (1.0 - gamma * gamma).sqrt();
        Self::real(r * theta.sin(), r * theta.cos(), gamma)
    }

    /// α = β = γ = 1/√3.
    pub fn uniform() -> Self {
        let s = 1.0 / 3f64.sqrt();
        InitialStateSpec {
            alpha: s.into(),
            beta: s.into(),
            gamma: s.into(),
        }
    }

    pub fn basis(level: Level) -> Self {
        let mut amps = [Complex64::new(0.0, 0.0); 3];
        amps[level.index()] = ONE;
        InitialStateSpec {
            alpha: amps[0],
            beta: amps[1],
            gamma: amps[2],
        }
    }

    pub fn with_global_phase(&self, phi: f64) -> Self {
        let p = Complex64::from_polar(1.0, phi);
        InitialStateSpec {
            alpha: self.alpha * p,
            beta: self.beta * p,
            gamma: self.gamma * p,
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr() + self.gamma.norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::hermiticity_error;

    fn reference() -> DeviceParams {
        DeviceDesign::default().build().unwrap()
    }

    fn layout() -> SpaceLayout {
        SpaceLayout::new(3).unwrap()
    }

    #[test]
    fn unit_conversion_is_two_pi() {
        let p = reference();
        assert!((p.omega_a - 2.0 * PI * 2.5).abs() < 1e-12);
        assert!((p.omega_b - 2.0 * PI * 8.0).abs() < 1e-12);
        assert!((p.delta(0) - 2.0 * PI).abs() < 1e-12);
        assert!((p.big_delta(1) - 2.0 * PI * 0.8).abs() < 1e-12);
        assert!((p.delta_ab() - 2.0 * PI * 5.5).abs() < 1e-12);
        assert!((angular_to_mhz(p.g[0]) - 100.0).abs() < 1e-9);
        assert!((angular_to_mhz(p.g_ab) - 10.0).abs() < 1e-9);
        assert!((angular_to_mhz(p.rabi) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn constraint_modes() {
        let base = reference();
        let strict = solve_constraints(&base, ConstraintMode::EqualRates).unwrap();
        assert!((angular_to_mhz(strict.mu[0]) - 89.442_719_1).abs() < 1e-6);
        assert_eq!(strict.mu[0], strict.mu[1]);
        assert_eq!(strict.g[0], strict.g[1]);

        let literal = solve_constraints(&base, ConstraintMode::LinearRatio).unwrap();
        assert!((angular_to_mhz(literal.mu[0]) - 80.0).abs() < 1e-9);

        let mut sym = base;
        sym.omega_fg = [sym.omega_b + sym.delta(0); 2];
        let s = solve_constraints(&sym, ConstraintMode::EqualRates).unwrap();
        assert!((s.mu[0] - s.g[0]).abs() < 1e-12);

        let mut bad = base;
        bad.omega_a = bad.omega_eg[0];
        assert!(solve_constraints(&bad, ConstraintMode::EqualRates).is_err());
    }

    #[test]
    fn exchange_rates_at_reference_point() {
        let p = reference();
        assert!((angular_to_mhz(p.lambda1()) - 10.0).abs() < 1e-9);
        assert!((angular_to_mhz(p.lambda2()) - 10.0).abs() < 1e-9);
        assert!((p.lambda1() - p.lambda2()).abs() <= 1e-14 * p.lambda1());

        let literal = DeviceDesign {
            mode: ConstraintMode::LinearRatio,
            ..DeviceDesign::default()
        }
        .build()
        .unwrap();
        assert!((literal.lambda2() / literal.lambda1() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn design_rejects_nonsense() {
        let bad = DeviceDesign {
            detuning_ratio: 0.5,
            ..DeviceDesign::default()
        };
        assert!(bad.build().is_err());
        let bad = DeviceDesign {
            delta_ghz: -1.0,
            ..DeviceDesign::default()
        };
        assert!(bad.build().is_err());
    }

    #[test]
    fn stage1_zero_couplings_is_zero() {
        let mut p = reference();
        p.g = [0.0; 2];
        p.mu = [0.0; 2];
        p.g_ab = 0.0;
        let h = stage1_hamiltonian(&p, &layout(), true).unwrap();
        assert_eq!(h.at(0.0).norm(), 0.0);
    }

    #[test]
    fn stage1_matrix_element() {
        let l = layout();
        let p = reference();
        let h = stage1_hamiltonian(&p, &l, false).unwrap().at(0.0);
        let row = l.index(Level::E, Level::G, 0, 0);
        let col = l.index(Level::G, Level::G, 1, 0);
        assert!((h[(row, col)] - Complex64::new(p.g[0], 0.0)).norm() < 1e-14);
        let row = l.index(Level::G, Level::F, 0, 0);
        let col = l.index(Level::G, Level::G, 0, 1);
        assert!((h[(row, col)] - Complex64::new(p.mu[1], 0.0)).norm() < 1e-14);
    }

    #[test]
    fn builders_are_hermitian() {
        let l = layout();
        let p = reference().with_inhomogeneity(1.03, 0.97);
        let hs = [
            stage1_hamiltonian(&p, &l, true).unwrap(),
            stage2_hamiltonian(&p, &l, true).unwrap(),
            effective_hamiltonian(&p, &l).unwrap(),
        ];
        for h in &hs {
            for t in [0.0, 0.137, 3.3, 24.9] {
                assert!(hermiticity_error(&h.at(t)) < 1e-13);
            }
        }
    }

    #[test]
    fn stage2_drive_element() {
        let l = layout();
        let mut p = reference();
        let h = stage2_hamiltonian(&p, &l, false).unwrap().at(1.0);
        let row = l.index(Level::G, Level::E, 0, 0);
        let col = l.index(Level::G, Level::F, 0, 0);
        assert!((h[(row, col)] - Complex64::new(p.rabi, 0.0)).norm() < 1e-14);
        p.rabi = 0.0;
        assert_eq!(stage2_hamiltonian(&p, &l, false).unwrap().at(2.0).norm(), 0.0);
    }

    #[test]
    fn stage1_time_average_vanishes() {
        // δ, Δ and Δ_ab (1, 0.8, 5.5 GHz) share the 10 ns period.
        let l = layout();
        let h = stage1_hamiltonian(&reference(), &l, true).unwrap();
        let period = 10.0;
        let n = 4000;
        let mut avg = ComplexMatrix::zeros(l.dim(), l.dim());
        for k in 0..n {
            avg += h.at(period * k as f64 / n as f64);
        }
        avg /= Complex64::new(n as f64, 0.0);
        let scale = h.at(0.0).norm();
        assert!(avg.norm() < 1e-10 * scale, "{}", avg.norm() / scale);
    }

    #[test]
    fn effective_static_under_equal_detunings() {
        let h = effective_hamiltonian(&reference(), &layout()).unwrap();
        let exch: Vec<_> = h.oscillating().iter().skip(2).collect();
        assert!(exch.iter().all(|t| t.frequency == 0.0));
    }

    #[test]
    fn reduced_exchange() {
        let l = layout();
        let p = reference();
        let h = reduced_exchange_hamiltonian(&p, &l).unwrap().at(0.0);
        let gg = l.index(Level::G, Level::G, 0, 0);
        assert!(h.column(gg).norm() == 0.0);
        let ge = l.index(Level::G, Level::E, 0, 0);
        let eg = l.index(Level::E, Level::G, 0, 0);
        assert!((h[(ge, eg)] - Complex64::new(p.lambda1(), 0.0)).norm() < 1e-15);

        // Excitation-class projectors commute with the exchange.
        let classes = [
            vec![gg],
            vec![eg, ge],
            vec![l.index(Level::F, Level::G, 0, 0), l.index(Level::G, Level::F, 0, 0)],
        ];
        for class in classes {
            let mut p = ComplexMatrix::zeros(l.dim(), l.dim());
            for i in class {
                p[(i, i)] = ONE;
            }
            assert!((&p * &h - &h * &p).norm() < 1e-15);
        }

        let literal = DeviceDesign {
            mode: ConstraintMode::LinearRatio,
            ..DeviceDesign::default()
        }
        .build()
        .unwrap();
        assert!(reduced_exchange_hamiltonian(&literal, &l).is_err());
    }

    #[test]
    fn channel_counts() {
        let l = layout();
        assert!(collapse_operators(&DecoherenceRates::none(), &l).unwrap().is_empty());
        let ch = collapse_operators(&DecoherenceRates::reference(0.1), &l).unwrap();
        assert_eq!(ch.len(), 12);
        assert_eq!(ch.iter().filter(|c| c.kind == ChannelKind::Dephasing).count(), 4);

        let ground = l.index(Level::G, Level::G, 0, 0);
        for c in ch.iter().filter(|c| c.kind == ChannelKind::Decay) {
            assert_eq!(c.operator.column(ground).norm(), 0.0, "{}", c.label);
        }
    }

    #[test]
    fn reference_rates() {
        let r = DecoherenceRates::reference(0.1);
        assert!((r.kappa_a - 0.01).abs() < 1e-15);
        assert!((r.gamma_eg[0] - 2e-4).abs() < 1e-15);
        assert!((r.gamma_phi_f[1] - 5e-4).abs() < 1e-15);
        assert_eq!(rate_from_lifetime_us(f64::INFINITY), 0.0);
    }

    #[test]
    fn initial_state_specs() {
        let s = InitialStateSpec::from_angles(0.0, PI / 2.0).unwrap();
        assert!((s.alpha - ONE).norm() < 1e-15);
        assert!(s.beta.norm() < 1e-15);
        assert!(InitialStateSpec::real(1.0, 1.0, 0.0).is_err());
        assert!(InitialStateSpec::from_angles(1.5, 0.0).is_err());
        assert!((InitialStateSpec::uniform().norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mode_round_trip() {
        for m in [ConstraintMode::EqualRates, ConstraintMode::LinearRatio] {
            assert_eq!(m.as_str().parse::<ConstraintMode>().unwrap(), m);
        }
        assert!("strict".parse::<ConstraintMode>().is_err());
    }
}
