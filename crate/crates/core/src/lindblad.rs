//! Master-equation and Schrödinger propagation.
//!
//! `dρ/dt = −i[H(t), ρ] + Σ_k γ_k (Λ_k ρ Λ_k† − ½{Λ_k†Λ_k, ρ})`
//!
//! The operators are compiled into sparse triplet lists before integration.
//! Unless disabled in [`IntegratorConfig`], integration is also restricted to
//! the span of basis states reachable from the initial support through the
//! nonzero pattern of `H`, every `Λ_k` and every `Λ_k†Λ_k`. That span is
//! invariant under the generator, so the restriction is exact; for the
//! transfer protocol it shrinks the problem from `9·N²` states to the seven
//! states with at most one excitation.

use std::collections::VecDeque;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Channel, Hamiltonian};
use crate::operators::{
    min_hermitian_eigenvalue, ComplexMatrix, DensityMatrix, KetVector, SpaceLayout, I, ZERO,
};

/// Trace drift beyond this aborts an integration.
pub const TRACE_ABORT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Classic fourth-order Runge–Kutta at a fixed step.
    Rk4,
    /// RK4 with step-doubling error control; `dt` is the initial step.
    Rk4StepDoubling,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    /// Step in ns.
    pub dt: f64,
    pub method: Method,
    /// Max-norm local error target for step doubling.
    pub local_tolerance: f64,
    pub max_steps: usize,
    /// Diagnostics are recorded every `sample_stride` accepted steps.
    pub sample_stride: usize,
    /// Restrict to the reachable invariant subspace.
    pub reduce: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            method: Method::Rk4,
            local_tolerance: 1e-10,
            max_steps: 50_000_000,
            sample_stride: 1000,
            reduce: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.local_tolerance > 0.0) {
            return Err(Error::InvalidArgument("local tolerance must be positive".into()));
        }
        if self.max_steps == 0 || self.sample_stride == 0 {
            return Err(Error::InvalidArgument("max_steps and sample_stride must be nonzero".into()));
        }
        Ok(())
    }

    /// Returns a warning when `dt` exceeds 1/(20 ν_max) for the fastest
    /// angular frequency `omega_max` in rad/ns.
    pub fn resolution_warning(&self, omega_max: f64) -> Option<String> {
        if omega_max <= 0.0 {
            return None;
        }
        let nu_max = omega_max / (2.0 * std::f64::consts::PI);
        let limit = 1.0 / (20.0 * nu_max);
        (self.dt > limit).then(|| {
            format!(
                "dt = {} ns exceeds 1/(20·ν_max) = {limit:.3e} ns for ν_max = {nu_max:.3} GHz",
                self.dt
            )
        })
    }
}

/// Diagnostics at one sampled time.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub purity: f64,
    pub photons_a: f64,
    pub photons_b: f64,
    /// `[qutrit][level]` populations.
    pub populations: [[f64; 3]; 2],
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub final_state: DensityMatrix,
    pub steps: usize,
    /// Dimension actually integrated.
    pub integrated_dim: usize,
}

impl TrajectoryRecord {
    pub fn max_trace_error(&self) -> f64 {
        self.samples.iter().map(|s| (s.trace - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.samples.iter().map(|s| s.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn peak_photons(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.photons_a + s.photons_b)
            .fold(0.0, f64::max)
    }

    pub fn max_purity(&self) -> f64 {
        self.samples.iter().map(|s| s.purity).fold(0.0, f64::max)
    }
}

/// Dense reference evaluation of the master-equation right-hand side.
pub fn lindblad_rhs(t: f64, rho: &ComplexMatrix, h: &Hamiltonian, channels: &[Channel]) -> Result<ComplexMatrix> {
    let dim = rho.nrows();
    if h.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: h.dim(),
        });
    }
    let ht = h.at(t);
    let mut out = (&ht * rho - rho * &ht) * (-I);
    for ch in channels {
        if ch.operator.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ch.operator.nrows(),
            });
        }
        let l = &ch.operator;
        let ldl = l.adjoint() * l;
        let half = Complex64::new(0.5, 0.0);
        let term = l * rho * l.adjoint() - (&ldl * rho) * half - (rho * &ldl) * half;
        out += term * Complex64::new(ch.rate, 0.0);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
struct Sparse {
    entries: Vec<(usize, usize, Complex64)>,
}

impl Sparse {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v != ZERO {
                    entries.push((r, c, v));
                }
            }
        }
        Sparse { entries }
    }

    fn restrict(&self, map: &[Option<usize>]) -> Sparse {
        let entries = self
            .entries
            .iter()
            .filter_map(|&(r, c, v)| Some((map[r]?, map[c]?, v)))
            .collect();
        Sparse { entries }
    }
}

struct Term {
    frequency: f64,
    forward: Sparse,
    backward: Sparse,
}

/// Generator in sparse form, restricted to `basis`.
struct Compiled {
    basis: Vec<usize>,
    /// `H_s − (i/2) Σ γ Λ†Λ`
    static_k: Sparse,
    terms: Vec<Term>,
    jumps: Vec<(f64, Sparse)>,
    /// Per-basis-state photon numbers and qutrit levels, for diagnostics.
    n_a: Vec<f64>,
    n_b: Vec<f64>,
    levels: Vec<[usize; 2]>,
}

fn reachable(seed: &[usize], dim: usize, patterns: &[&Sparse]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); dim];
    for p in patterns {
        for &(r, c, _) in &p.entries {
            adj[c].push(r);
        }
    }
    let mut seen = vec![false; dim];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seed {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    (0..dim).filter(|&i| seen[i]).collect()
}

impl Compiled {
    fn new(h: &Hamiltonian, channels: &[Channel], layout: &SpaceLayout, support: &[usize], reduce: bool) -> Result<Self> {
        let dim = layout.dim();
        if h.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: h.dim(),
            });
        }
        let mut k_static = h.static_part().clone();
        let mut jumps_full = Vec::new();
        for ch in channels {
            if ch.operator.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ch.operator.nrows(),
                });
            }
            let ldl = ch.operator.adjoint() * &ch.operator;
            k_static -= ldl * Complex64::new(0.0, 0.5 * ch.rate);
            jumps_full.push((ch.rate, Sparse::from_dense(&ch.operator)));
        }
        let static_full = Sparse::from_dense(&k_static);
        let terms_full: Vec<(f64, Sparse, Sparse)> = h
            .oscillating()
            .iter()
            .map(|t| {
                (
                    t.frequency,
                    Sparse::from_dense(&t.operator),
                    Sparse::from_dense(&t.operator.adjoint()),
                )
            })
            .collect();

        let basis = if reduce {
            let mut patterns: Vec<&Sparse> = vec![&static_full];
            for (_, f, b) in &terms_full {
                patterns.push(f);
                patterns.push(b);
            }
            for (_, j) in &jumps_full {
                patterns.push(j);
            }
            reachable(support, dim, &patterns)
        } else {
            (0..dim).collect()
        };
        let mut map = vec![None; dim];
        for (k, &i) in basis.iter().enumerate() {
            map[i] = Some(k);
        }

        let mut n_a = Vec::with_capacity(basis.len());
        let mut n_b = Vec::with_capacity(basis.len());
        let mut levels = Vec::with_capacity(basis.len());
        for &i in &basis {
            let (q1, q2, na, nb) = layout.decompose(i);
            n_a.push(na as f64);
            n_b.push(nb as f64);
            levels.push([q1.index(), q2.index()]);
        }

        Ok(Compiled {
            static_k: static_full.restrict(&map),
            terms: terms_full
                .iter()
                .map(|(f, fw, bw)| Term {
                    frequency: *f,
                    forward: fw.restrict(&map),
                    backward: bw.restrict(&map),
                })
                .collect(),
            jumps: jumps_full.iter().map(|(r, j)| (*r, j.restrict(&map))).collect(),
            basis,
            n_a,
            n_b,
            levels,
        })
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `out += coeff · S · x` for row-major `n×n` x (or a vector when `cols = 1`).
    fn apply(out: &mut [Complex64], s: &Sparse, coeff: Complex64, x: &[Complex64], cols: usize) {
        for &(r, c, v) in &s.entries {
            let w = coeff * v;
            let (dst, src) = (r * cols, c * cols);
            for k in 0..cols {
                out[dst + k] += w * x[src + k];
            }
        }
    }

    /// `out = K(t)·x` where `K` is the non-Hermitian effective generator.
    fn apply_k(&self, t: f64, x: &[Complex64], out: &mut [Complex64], cols: usize) {
        out.iter_mut().for_each(|z| *z = ZERO);
        Self::apply(out, &self.static_k, Complex64::new(1.0, 0.0), x, cols);
        for term in &self.terms {
            let phase = Complex64::from_polar(1.0, term.frequency * t);
            Self::apply(out, &term.forward, phase, x, cols);
            Self::apply(out, &term.backward, phase.conj(), x, cols);
        }
    }

    /// dρ/dt for Hermitian row-major `rho`, using `−iKρ + (−iKρ)†`.
    fn rhs_density(&self, t: f64, rho: &[Complex64], scratch: &mut [Complex64], out: &mut [Complex64]) {
        let n = self.dim();
        self.apply_k(t, rho, scratch, n);
        for r in 0..n {
            for c in 0..n {
                let a = -I * scratch[r * n + c];
                let b = -I * scratch[c * n + r];
                out[r * n + c] = a + b.conj();
            }
        }
        for (rate, l) in &self.jumps {
            for &(r1, c1, v1) in &l.entries {
                let w1 = v1 * *rate;
                for &(r2, c2, v2) in &l.entries {
                    out[r1 * n + r2] += w1 * rho[c1 * n + c2] * v2.conj();
                }
            }
        }
    }

    fn rhs_pure(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        self.apply_k(t, psi, out, 1);
        out.iter_mut().for_each(|z| *z *= -I);
    }

    fn sample(&self, time: f64, rho: &[Complex64]) -> Sample {
        let n = self.dim();
        let mut trace = 0.0;
        let mut photons_a = 0.0;
        let mut photons_b = 0.0;
        let mut populations = [[0.0; 3]; 2];
        for i in 0..n {
            let p = rho[i * n + i].re;
            trace += p;
            photons_a += p * self.n_a[i];
            photons_b += p * self.n_b[i];
            populations[0][self.levels[i][0]] += p;
            populations[1][self.levels[i][1]] += p;
        }
        let m = ComplexMatrix::from_row_slice(n, n, rho);
        let purity = rho.iter().map(|z| z.norm_sqr()).sum();
        Sample {
            time,
            trace,
            min_eigenvalue: min_hermitian_eigenvalue(&m),
            purity,
            photons_a,
            photons_b,
            populations,
        }
    }

    fn expand_density(&self, rho: &[Complex64], dim: usize) -> ComplexMatrix {
        let n = self.dim();
        let mut full = ComplexMatrix::zeros(dim, dim);
        for r in 0..n {
            for c in 0..n {
                full[(self.basis[r], self.basis[c])] = rho[r * n + c];
            }
        }
        full
    }
}

/// One RK4 step of `y' = f(t, y)` with caller-provided scratch space.
struct Rk4 {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![ZERO; len],
            k2: vec![ZERO; len],
            k3: vec![ZERO; len],
            k4: vec![ZERO; len],
            tmp: vec![ZERO; len],
        }
    }

    fn step<F>(&mut self, f: &mut F, t: f64, h: f64, y: &[Complex64], out: &mut [Complex64])
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        f(t, y, &mut self.k1);
        axpy(&mut self.tmp, y, 0.5 * h, &self.k1);
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        axpy(&mut self.tmp, y, 0.5 * h, &self.k2);
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        axpy(&mut self.tmp, y, h, &self.k3);
        f(t + h, &self.tmp, &mut self.k4);
        let w = h / 6.0;
        for i in 0..y.len() {
            out[i] = y[i] + (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]) * w;
        }
    }
}

fn axpy(out: &mut [Complex64], y: &[Complex64], a: f64, x: &[Complex64]) {
    for i in 0..y.len() {
        out[i] = y[i] + x[i] * a;
    }
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Drives `y` from `t_start` to `t_start + duration`, calling `after_step`
/// with (t, y) after every accepted step. `post` runs on each accepted state
/// before `after_step`.
fn integrate<F, P, A>(
    y: &mut Vec<Complex64>,
    mut f: F,
    mut post: P,
    mut after_step: A,
    t_start: f64,
    duration: f64,
    config: &IntegratorConfig,
) -> Result<usize>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    P: FnMut(&mut [Complex64]),
    A: FnMut(usize, f64, &[Complex64], bool) -> Result<()>,
{
    let len = y.len();
    let mut rk = Rk4::new(len);
    let mut next = vec![ZERO; len];
    let t_end = t_start + duration;
    match config.method {
        Method::Rk4 => {
            let steps = (duration / config.dt - 1e-9).ceil().max(1.0) as usize;
            if steps > config.max_steps {
                return Err(Error::StepLimit {
                    steps: config.max_steps,
                    time_ns: t_start,
                });
            }
            let h = duration / steps as f64;
            for k in 0..steps {
                let t = t_start + h * k as f64;
                rk.step(&mut f, t, h, y, &mut next);
                std::mem::swap(y, &mut next);
                post(y);
                let t_now = if k + 1 == steps { t_end } else { t + h };
                after_step(k + 1, t_now, y, k + 1 == steps)?;
            }
            Ok(steps)
        }
        Method::Rk4StepDoubling => {
            let mut half = vec![ZERO; len];
            let mut twice = vec![ZERO; len];
            let mut h = config.dt.min(duration);
            let mut t = t_start;
            let mut steps = 0usize;
            let mut attempts = 0usize;
            while t < t_end {
                attempts += 1;
                if attempts > config.max_steps {
                    return Err(Error::StepLimit { steps, time_ns: t });
                }
                let last = t + h >= t_end - 1e-12 * duration.max(1.0);
                let step = if last { t_end - t } else { h };
                rk.step(&mut f, t, step, y, &mut next);
                rk.step(&mut f, t, 0.5 * step, y, &mut half);
                rk.step(&mut f, t + 0.5 * step, 0.5 * step, &half, &mut twice);
                let err = max_abs_diff(&next, &twice) / 15.0;
                let factor = if err == 0.0 {
                    2.0
                } else {
                    (0.9 * (config.local_tolerance / err).powf(0.2)).clamp(0.2, 2.0)
                };
                if err <= config.local_tolerance {
                    for i in 0..len {
                        y[i] = twice[i] + (twice[i] - next[i]) / 15.0;
                    }
                    post(y);
                    t = if last { t_end } else { t + step };
                    steps += 1;
                    after_step(steps, t, y, last)?;
                    if last {
                        break;
                    }
                }
                h = step * factor;
            }
            Ok(steps)
        }
    }
}

fn symmetrize(rho: &mut [Complex64], n: usize) {
    for r in 0..n {
        rho[r * n + r].im = 0.0;
        for c in (r + 1)..n {
            let avg = 0.5 * (rho[r * n + c] + rho[c * n + r].conj());
            rho[r * n + c] = avg;
            rho[c * n + r] = avg.conj();
        }
    }
}

fn support_of(m: &ComplexMatrix) -> Vec<usize> {
    (0..m.nrows())
        .filter(|&r| m.row(r).iter().any(|z| *z != ZERO))
        .collect()
}

/// Integrates the master equation from `t_start` for `duration` ns.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    channels: &[Channel],
    layout: &SpaceLayout,
    t_start: f64,
    duration: f64,
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let dim = layout.dim();
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho0.dim(),
        });
    }
    let compiled = Compiled::new(h, channels, layout, &support_of(rho0.matrix()), config.reduce)?;
    let n = compiled.dim();
    let mut y: Vec<Complex64> = Vec::with_capacity(n * n);
    for &r in &compiled.basis {
        for &c in &compiled.basis {
            y.push(rho0.matrix()[(r, c)]);
        }
    }

    let mut samples = vec![compiled.sample(t_start, &y)];
    let mut scratch = vec![ZERO; n * n];
    let stride = config.sample_stride;
    let steps = integrate(
        &mut y,
        |t, rho, out| compiled.rhs_density(t, rho, &mut scratch, out),
        |rho| symmetrize(rho, n),
        |k, t, rho, last| {
            let trace: f64 = (0..n).map(|i| rho[i * n + i].re).sum();
            if !trace.is_finite() || (trace - 1.0).abs() > TRACE_ABORT {
                return Err(Error::TraceDrift { trace, time_ns: t });
            }
            if k % stride == 0 || last {
                samples.push(compiled.sample(t, rho));
            }
            Ok(())
        },
        t_start,
        duration,
        config,
    )?;

    Ok(TrajectoryRecord {
        samples,
        final_state: DensityMatrix::new_unchecked(compiled.expand_density(&y, dim)),
        steps,
        integrated_dim: n,
    })
}

/// Integrates the Schrödinger equation (no dissipation).
pub fn evolve_pure(
    psi0: &KetVector,
    h: &Hamiltonian,
    layout: &SpaceLayout,
    t_start: f64,
    duration: f64,
    config: &IntegratorConfig,
) -> Result<KetVector> {
    config.validate()?;
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let dim = layout.dim();
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: psi0.dim(),
        });
    }
    let norm_sq = psi0.norm_sqr();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm_sq });
    }
    let support: Vec<usize> = (0..dim).filter(|&i| psi0.amplitude(i) != ZERO).collect();
    let compiled = Compiled::new(h, &[], layout, &support, config.reduce)?;
    let mut y: Vec<Complex64> = compiled.basis.iter().map(|&i| psi0.amplitude(i)).collect();
    integrate(
        &mut y,
        |t, psi, out| compiled.rhs_pure(t, psi, out),
        |_| {},
        |_, t, psi, _| {
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            if !norm.is_finite() || (norm - 1.0).abs() > TRACE_ABORT {
                return Err(Error::TraceDrift { trace: norm, time_ns: t });
            }
            Ok(())
        },
        t_start,
        duration,
        config,
    )?;
    let mut full = DVector::from_element(dim, ZERO);
    for (k, &i) in compiled.basis.iter().enumerate() {
        full[i] = y[k];
    }
    Ok(KetVector::from_vector(full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{collapse_operators, stage1_hamiltonian, ChannelKind, DecoherenceRates, DeviceDesign};
    use crate::operators::{resonator_lowering, Factor, Level, ONE};

    fn layout() -> SpaceLayout {
        SpaceLayout::new(3).unwrap()
    }

    #[test]
    fn rhs_zero_generator() {
        let l = layout();
        let rho = KetVector::basis(&l, Level::E, Level::G, 1, 0).to_density();
        let d = lindblad_rhs(0.3, rho.matrix(), &Hamiltonian::zero(l.dim()), &[]).unwrap();
        assert_eq!(d.norm(), 0.0);
    }

    #[test]
    fn rhs_dark_ground_state() {
        let l = layout();
        let p = DeviceDesign::default().build().unwrap();
        let h = stage1_hamiltonian(&p, &l, true).unwrap();
        let ch = collapse_operators(&DecoherenceRates::reference(0.1), &l).unwrap();
        let rho = KetVector::basis(&l, Level::G, Level::G, 0, 0).to_density();
        let d = lindblad_rhs(1.7, rho.matrix(), &h, &ch).unwrap();
        assert!(d.norm() < 1e-15);
    }

    #[test]
    fn rhs_photon_loss_rate() {
        // Brute-force dense RHS traced against a†a.
        let l = layout();
        let kappa = 0.37;
        let a = resonator_lowering(Factor::ResonatorA, &l).unwrap();
        let ch = vec![Channel {
            label: "a".into(),
            operator: a.clone(),
            rate: kappa,
            kind: ChannelKind::Decay,
        }];
        let rho = KetVector::basis(&l, Level::G, Level::G, 1, 0).to_density();
        let d = lindblad_rhs(0.0, rho.matrix(), &Hamiltonian::zero(l.dim()), &ch).unwrap();
        let n = a.adjoint() * &a;
        let rate = crate::operators::trace_of_product(&n, &d);
        assert!((rate.re + kappa).abs() < 1e-14);
        assert!(rate.im.abs() < 1e-14);
    }

    #[test]
    fn compiled_rhs_matches_dense() {
        let l = layout();
        let p = DeviceDesign::default().build().unwrap().with_inhomogeneity(0.97, 1.02);
        let h = stage1_hamiltonian(&p, &l, true).unwrap();
        let ch = collapse_operators(&DecoherenceRates::reference(0.1), &l).unwrap();

        // A generic Hermitian unit-trace matrix on the full space.
        let dim = l.dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = Complex64::new(((r * 7 + c * 3) % 11) as f64, ((r + 2 * c) % 5) as f64 - 2.0);
            }
        }
        let m = &m * m.adjoint();
        let tr = m.trace();
        let rho = m / tr;

        let compiled = Compiled::new(&h, &ch, &l, &[], false).unwrap();
        let flat: Vec<Complex64> = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .map(|(r, c)| rho[(r, c)])
            .collect();
        let mut out = vec![ZERO; dim * dim];
        let mut scratch = vec![ZERO; dim * dim];
        let t = 0.4321;
        compiled.rhs_density(t, &flat, &mut scratch, &mut out);
        let dense = lindblad_rhs(t, &rho, &h, &ch).unwrap();
        let fast = ComplexMatrix::from_row_slice(dim, dim, &out);
        assert!((fast - &dense).norm() < 1e-12 * dense.norm());

        let trace = dense.trace();
        assert!(trace.norm() < 1e-12 * dim as f64);
        assert!(crate::operators::hermiticity_error(&dense) < 1e-12);
    }

    #[test]
    fn reachable_subspace_is_single_excitation() {
        let l = layout();
        let p = DeviceDesign::default().build().unwrap();
        let h = stage1_hamiltonian(&p, &l, true).unwrap();
        let ch = collapse_operators(&DecoherenceRates::reference(0.1), &l).unwrap();
        let seed = [l.index(Level::E, Level::G, 0, 0), l.index(Level::G, Level::G, 0, 0)];
        let c = Compiled::new(&h, &ch, &l, &seed, true).unwrap();
        assert_eq!(c.dim(), 7);
    }

    #[test]
    fn zero_generator_leaves_state_unchanged() {
        let l = layout();
        let psi = KetVector::normalized({
            let mut v = vec![ZERO; l.dim()];
            v[l.index(Level::G, Level::G, 0, 0)] = Complex64::new(0.6, 0.0);
            v[l.index(Level::F, Level::G, 0, 0)] = Complex64::new(0.0, 0.8);
            v
        })
        .unwrap();
        let rho0 = psi.to_density();
        let rec = evolve(&rho0, &Hamiltonian::zero(l.dim()), &[], &l, 0.0, 2.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(rec.final_state.matrix(), rho0.matrix());
        let out = evolve_pure(&psi, &Hamiltonian::zero(l.dim()), &l, 0.0, 2.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn guards() {
        let l = layout();
        let rho = KetVector::basis(&l, Level::G, Level::G, 0, 0).to_density();
        let h = Hamiltonian::zero(l.dim());
        let tight = IntegratorConfig {
            max_steps: 10,
            ..IntegratorConfig::default()
        };
        assert!(matches!(
            evolve(&rho, &h, &[], &l, 0.0, 1.0, &tight),
            Err(Error::StepLimit { .. })
        ));
        assert!(evolve(&rho, &h, &[], &l, 0.0, -1.0, &IntegratorConfig::default()).is_err());
        let bad = IntegratorConfig {
            dt: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(evolve(&rho, &h, &[], &l, 0.0, 1.0, &bad).is_err());

        let unnormalized = KetVector::from_amplitudes(vec![ONE; l.dim()]).unwrap();
        assert!(matches!(
            evolve_pure(&unnormalized, &h, &l, 0.0, 1.0, &IntegratorConfig::default()),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn trace_drift_aborts() {
        // A non-Hermitian "Hamiltonian" pumps trace.
        let l = layout();
        let mut s = ComplexMatrix::zeros(l.dim(), l.dim());
        let gg = l.index(Level::G, Level::G, 0, 0);
        s[(gg, gg)] = Complex64::new(0.0, 1.0);
        let h = Hamiltonian::new(s, Vec::new()).unwrap();
        let rho = KetVector::basis(&l, Level::G, Level::G, 0, 0).to_density();
        assert!(matches!(
            evolve(&rho, &h, &[], &l, 0.0, 1.0, &IntegratorConfig::default()),
            Err(Error::TraceDrift { .. })
        ));
    }

    #[test]
    fn resolution_warning() {
        let c = IntegratorConfig::default();
        assert!(c.resolution_warning(2.0 * std::f64::consts::PI * 5.5).is_none());
        let coarse = IntegratorConfig { dt: 0.05, ..c };
        assert!(coarse.resolution_warning(2.0 * std::f64::consts::PI * 5.5).is_some());
    }
}
