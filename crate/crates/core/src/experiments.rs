//! Parameter sweeps over detuning ratio, input state, coupling inhomogeneity
//! and numerical resolution.
//!
//! Grid points are independent transfers. They run on a bounded rayon pool
//! and are collected in grid order, so serial and parallel runs of the same
//! spec produce identical rows.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DeviceDesign, InitialStateSpec, Lifetimes};
use crate::operators::SpaceLayout;
use crate::protocol::{build_schedule, run_transfer_with_schedule, ProtocolSchedule, TransferResult, TransferSettings};

/// Everything needed for a single transfer.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub design: DeviceDesign,
    pub lifetimes: Lifetimes,
    pub state: InitialStateSpec,
    pub settings: TransferSettings,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            design: DeviceDesign::default(),
            lifetimes: Lifetimes::default(),
            state: InitialStateSpec::uniform(),
            settings: TransferSettings::default(),
        }
    }
}

impl Scenario {
    pub fn run(&self) -> Result<TransferResult> {
        let params = self.design.build()?;
        let schedule = build_schedule(&params)?;
        self.run_with_schedule(&schedule)
    }

    pub fn run_with_schedule(&self, schedule: &ProtocolSchedule) -> Result<TransferResult> {
        let params = self.design.build()?;
        run_transfer_with_schedule(&self.state, &params, &self.lifetimes.rates(), &self.settings, schedule)
    }

    /// Schedule of the same design with homogeneous couplings (c = d = 1).
    pub fn nominal_schedule(&self) -> Result<ProtocolSchedule> {
        let nominal = DeviceDesign {
            c: 1.0,
            d: 1.0,
            ..self.design.clone()
        };
        build_schedule(&nominal.build()?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Detuning,
    StateGrid,
    Coupling,
    Convergence,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Detuning => "detuning",
            SweepKind::StateGrid => "state_grid",
            SweepKind::Coupling => "coupling",
            SweepKind::Convergence => "convergence",
        }
    }

    /// Names of the swept parameters, in row order.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            SweepKind::Detuning => &["kappa_inv_us", "D"],
            SweepKind::StateGrid => &["gamma", "theta"],
            SweepKind::Coupling => &["c", "d"],
            SweepKind::Convergence => &["n_photon", "dt_ps"],
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [SweepKind::Detuning, SweepKind::StateGrid, SweepKind::Coupling, SweepKind::Convergence]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown sweep kind `{s}`"))
    }
}

/// Inclusive, evenly spaced axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Axis { min, max, points }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.points == 0 {
            return Err(Error::InvalidArgument(format!("{name}: grid is empty")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::InvalidArgument(format!(
                "{name}: range [{}, {}] is not ordered",
                self.min, self.max
            )));
        }
        if self.points == 1 && self.min != self.max {
            return Err(Error::InvalidArgument(format!("{name}: a single point needs min = max")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.max } else { self.min + step * i as f64 })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateSampling {
    /// Uniform (γ, θ) grid.
    Grid,
    /// Seeded uniform draws of γ ∈ [0, 1] and θ ∈ [0, 2π].
    Random { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub detuning: Axis,
    pub kappa_inv_us: Vec<f64>,
    pub gamma: Axis,
    pub theta: Axis,
    pub sampling: StateSampling,
    pub c: Axis,
    pub d: Axis,
    pub photon_levels: Vec<usize>,
    pub timesteps_ps: Vec<f64>,
    pub workers: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            detuning: Axis::new(4.0, 20.0, 17),
            kappa_inv_us: vec![0.1, 1.0, 10.0],
            gamma: Axis::new(0.0, 1.0, 21),
            theta: Axis::new(0.0, 2.0 * PI, 41),
            sampling: StateSampling::Grid,
            c: Axis::new(0.95, 1.05, 11),
            d: Axis::new(0.95, 1.05, 11),
            photon_levels: vec![2, 3, 4],
            timesteps_ps: vec![2.0, 1.0, 0.5],
            workers: 1,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.detuning.validate("D")?;
        if !(self.detuning.min > 1.0) {
            return Err(Error::InvalidArgument("D must exceed 1".into()));
        }
        if self.kappa_inv_us.is_empty() || self.kappa_inv_us.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::InvalidArgument("κ⁻¹ list must be non-empty and positive".into()));
        }
        self.gamma.validate("gamma")?;
        if self.gamma.min < 0.0 || self.gamma.max > 1.0 {
            return Err(Error::InvalidArgument("γ grid must lie in [0, 1]".into()));
        }
        self.theta.validate("theta")?;
        if let StateSampling::Random { samples: 0, .. } = self.sampling {
            return Err(Error::InvalidArgument("random sampling needs at least one sample".into()));
        }
        self.c.validate("c")?;
        self.d.validate("d")?;
        if self.photon_levels.is_empty() || self.photon_levels.iter().any(|n| *n < 2) {
            return Err(Error::InvalidArgument("photon levels must be non-empty and ≥ 2".into()));
        }
        if self.timesteps_ps.is_empty() || self.timesteps_ps.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument("timesteps must be non-empty and positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("worker count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub fidelity: f64,
    pub peak_photons: f64,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    pub t1_ns: f64,
    pub t2_ns: f64,
}

impl SweepRow {
    fn from_result(params: Vec<f64>, r: &TransferResult) -> Self {
        SweepRow {
            params,
            fidelity: r.fidelity,
            peak_photons: r.peak_photons(),
            max_trace_error: r.max_trace_error(),
            min_eigenvalue: r.min_eigenvalue(),
            t1_ns: r.schedule.t1,
            t2_ns: r.schedule.t2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    /// Ordered `key=value` pairs describing how the sweep was produced.
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    pub const DIAGNOSTIC_COLUMNS: [&'static str; 6] =
        ["fidelity", "peak_photons", "max_trace_error", "min_eigenvalue", "t1_ns", "t2_ns"];

    pub fn columns(&self) -> Vec<&'static str> {
        let mut cols = self.kind.parameter_names().to_vec();
        cols.extend(Self::DIAGNOSTIC_COLUMNS);
        cols
    }

    pub fn summary(&self) -> Summary {
        let n = self.rows.len().max(1) as f64;
        Summary {
            min: self.rows.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min),
            mean: self.rows.iter().map(|r| r.fidelity).sum::<f64>() / n,
            max: self.rows.iter().map(|r| r.fidelity).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn max_trace_error(&self) -> f64 {
        self.rows.iter().map(|r| r.max_trace_error).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rows.iter().map(|r| r.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Row values in [`SweepResult::columns`] order.
    pub fn row_values(row: &SweepRow) -> Vec<f64> {
        let mut v = row.params.clone();
        v.extend([
            row.fidelity,
            row.peak_photons,
            row.max_trace_error,
            row.min_eigenvalue,
            row.t1_ns,
            row.t2_ns,
        ]);
        v
    }

    /// For a detuning sweep: `(κ⁻¹, D at maximum fidelity, that fidelity)`
    /// per κ value, in first-appearance order.
    pub fn detuning_optima(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = Vec::new();
        for row in &self.rows {
            let (kappa, d) = (row.params[0], row.params[1]);
            match out.iter_mut().find(|o| o.0 == kappa) {
                Some(o) if row.fidelity > o.2 => *o = (kappa, d, row.fidelity),
                Some(_) => {}
                None => out.push((kappa, d, row.fidelity)),
            }
        }
        out
    }

    /// Fidelity of the first row whose parameters equal `params`.
    pub fn fidelity_at(&self, params: &[f64]) -> Option<f64> {
        self.rows.iter().find(|r| r.params == params).map(|r| r.fidelity)
    }
}

/// Runs `f` over `items` on at most `workers` threads, keeping input order.
fn run_grid<T, F>(items: Vec<T>, workers: usize, f: F) -> Result<Vec<SweepRow>>
where
    T: Send + Sync,
    F: Fn(&T) -> Result<SweepRow> + Send + Sync,
{
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn base_metadata(kind: SweepKind, base: &Scenario, sweep: &SweepSpec) -> Vec<(String, String)> {
    let s = &base.settings;
    vec![
        ("sweep".into(), kind.to_string()),
        ("code_version".into(), env!("CARGO_PKG_VERSION").into()),
        ("constraint_mode".into(), base.design.mode.to_string()),
        ("dynamics".into(), s.dynamics.to_string()),
        ("crosstalk".into(), s.crosstalk.to_string()),
        ("n_photon".into(), s.layout.n_photon().to_string()),
        ("dt_ps".into(), (s.integrator.dt * 1e3).to_string()),
        ("method".into(), format!("{:?}", s.integrator.method)),
        ("reduce_subspace".into(), s.integrator.reduce.to_string()),
        ("workers".into(), sweep.workers.to_string()),
    ]
}

fn finish(kind: SweepKind, rows: Vec<SweepRow>, mut metadata: Vec<(String, String)>) -> SweepResult {
    let mut result = SweepResult {
        kind,
        rows,
        metadata: Vec::new(),
    };
    let s = result.summary();
    metadata.push(("rows".into(), result.rows.len().to_string()));
    metadata.push(("fidelity_min".into(), s.min.to_string()));
    metadata.push(("fidelity_mean".into(), s.mean.to_string()));
    metadata.push(("fidelity_max".into(), s.max.to_string()));
    metadata.push(("max_trace_error".into(), result.max_trace_error().to_string()));
    metadata.push(("min_eigenvalue".into(), result.min_eigenvalue().to_string()));
    result.metadata = metadata;
    result
}

/// Fidelity against D = δ/g at fixed δ, Δ, for each resonator lifetime.
/// μ is re-solved and g_ab rescaled at every D.
pub fn sweep_detuning(base: &Scenario, sweep: &SweepSpec) -> Result<SweepResult> {
    sweep.validate()?;
    let mut items = Vec::new();
    for &kappa in &sweep.kappa_inv_us {
        for d in sweep.detuning.values() {
            items.push((kappa, d));
        }
    }
    let rows = run_grid(items, sweep.workers, |&(kappa, d)| {
        let scenario = Scenario {
            design: DeviceDesign {
                detuning_ratio: d,
                ..base.design.clone()
            },
            lifetimes: Lifetimes {
                kappa_inv_us: kappa,
                ..base.lifetimes
            },
            ..base.clone()
        };
        Ok(SweepRow::from_result(vec![kappa, d], &scenario.run()?))
    })?;
    let mut meta = base_metadata(SweepKind::Detuning, base, sweep);
    meta.push((
        "D_grid".into(),
        format!("{}..{} ({} points)", sweep.detuning.min, sweep.detuning.max, sweep.detuning.points),
    ));
    Ok(finish(SweepKind::Detuning, rows, meta))
}

/// (γ, θ) pairs for the state sweep, in row order.
pub fn state_samples(sweep: &SweepSpec) -> Vec<(f64, f64)> {
    match sweep.sampling {
        StateSampling::Grid => {
            let thetas = sweep.theta.values();
            sweep
                .gamma
                .values()
                .into_iter()
                .flat_map(|g| thetas.iter().map(move |&t| (g, t)))
                .collect()
        }
        StateSampling::Random { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..samples)
                .map(|_| (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=2.0 * PI)))
                .collect()
        }
    }
}

/// Fidelity over input states α = √(1−γ²) sin θ, β = √(1−γ²) cos θ.
pub fn sweep_state_grid(base: &Scenario, sweep: &SweepSpec) -> Result<SweepResult> {
    sweep.validate()?;
    let rows = run_grid(state_samples(sweep), sweep.workers, |&(gamma, theta)| {
        let scenario = Scenario {
            state: InitialStateSpec::from_angles(gamma, theta)?,
            ..base.clone()
        };
        Ok(SweepRow::from_result(vec![gamma, theta], &scenario.run()?))
    })?;
    let mut meta = base_metadata(SweepKind::StateGrid, base, sweep);
    meta.push(("kappa_inv_us".into(), base.lifetimes.kappa_inv_us.to_string()));
    meta.push(("D".into(), base.design.detuning_ratio.to_string()));
    meta.push((
        "state_sampling".into(),
        match sweep.sampling {
            StateSampling::Grid => format!("grid {}x{}", sweep.gamma.points, sweep.theta.points),
            StateSampling::Random { samples, seed } => format!("random {samples} seed {seed}"),
        },
    ));
    Ok(finish(SweepKind::StateGrid, rows, meta))
}

/// Fidelity over coupling ratios c = g2/g1 and d = μ2/μ1. Stage durations
/// come from the homogeneous design, since a fabrication spread in the
/// couplings is not known to whoever times the pulses.
pub fn sweep_coupling(base: &Scenario, sweep: &SweepSpec) -> Result<SweepResult> {
    sweep.validate()?;
    let schedule = base.nominal_schedule()?;
    let ds = sweep.d.values();
    let items: Vec<(f64, f64)> = sweep
        .c
        .values()
        .into_iter()
        .flat_map(|c| ds.iter().map(move |&d| (c, d)))
        .collect();
    let rows = run_grid(items, sweep.workers, |&(c, d)| {
        let scenario = Scenario {
            design: DeviceDesign {
                c,
                d,
                ..base.design.clone()
            },
            ..base.clone()
        };
        Ok(SweepRow::from_result(vec![c, d], &scenario.run_with_schedule(&schedule)?))
    })?;
    let mut meta = base_metadata(SweepKind::Coupling, base, sweep);
    meta.push(("schedule".into(), "nominal".into()));
    meta.push(("t1_ns".into(), schedule.t1.to_string()));
    Ok(finish(SweepKind::Coupling, rows, meta))
}

/// Fidelity against photon truncation (at the base step) and against step
/// size (at the base truncation).
pub fn convergence_study(base: &Scenario, sweep: &SweepSpec) -> Result<SweepResult> {
    sweep.validate()?;
    let base_levels = base.settings.layout.n_photon();
    let base_dt_ps = base.settings.integrator.dt * 1e3;
    let mut items: Vec<(usize, f64)> = sweep.photon_levels.iter().map(|&n| (n, base_dt_ps)).collect();
    for &dt in &sweep.timesteps_ps {
        if !items.contains(&(base_levels, dt)) {
            items.push((base_levels, dt));
        }
    }
    let rows = run_grid(items, sweep.workers, |&(n, dt_ps)| {
        let mut settings = base.settings;
        settings.layout = SpaceLayout::new(n)?;
        settings.integrator.dt = dt_ps * 1e-3;
        let scenario = Scenario {
            settings,
            ..base.clone()
        };
        Ok(SweepRow::from_result(vec![n as f64, dt_ps], &scenario.run()?))
    })?;
    let mut result = finish(
        SweepKind::Convergence,
        rows,
        base_metadata(SweepKind::Convergence, base, sweep),
    );
    let conv = ConvergenceReport::from_result(&result, base_levels, base_dt_ps);
    if let Some(t) = conv.truncation_delta {
        result.metadata.push(("truncation_delta".into(), t.to_string()));
    }
    if let Some(t) = conv.timestep_delta {
        result.metadata.push(("timestep_delta".into(), t.to_string()));
    }
    Ok(result)
}

/// Fidelity differences extracted from a convergence sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// |F(N) − F(N+1)| at the base truncation N.
    pub truncation_delta: Option<f64>,
    /// |F(dt) − F(dt/2)| at the base step.
    pub timestep_delta: Option<f64>,
}

impl ConvergenceReport {
    pub fn from_result(result: &SweepResult, base_levels: usize, base_dt_ps: f64) -> Self {
        let f = |n: usize, dt: f64| result.fidelity_at(&[n as f64, dt]);
        let truncation_delta = match (f(base_levels, base_dt_ps), f(base_levels + 1, base_dt_ps)) {
            (Some(a), Some(b)) => Some((a - b).abs()),
            _ => None,
        };
        let timestep_delta = match (f(base_levels, base_dt_ps), f(base_levels, base_dt_ps / 2.0)) {
            (Some(a), Some(b)) => Some((a - b).abs()),
            _ => None,
        };
        ConvergenceReport {
            truncation_delta,
            timestep_delta,
        }
    }
}

pub fn run_sweep(kind: SweepKind, base: &Scenario, sweep: &SweepSpec) -> Result<SweepResult> {
    match kind {
        SweepKind::Detuning => sweep_detuning(base, sweep),
        SweepKind::StateGrid => sweep_state_grid(base, sweep),
        SweepKind::Coupling => sweep_coupling(base, sweep),
        SweepKind::Convergence => convergence_study(base, sweep),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepSpec {
        SweepSpec {
            detuning: Axis::new(9.0, 11.0, 3),
            kappa_inv_us: vec![0.1, 10.0],
            gamma: Axis::new(0.0, 1.0, 3),
            theta: Axis::new(0.0, 2.0 * PI, 3),
            c: Axis::new(0.95, 1.05, 3),
            d: Axis::new(1.0, 1.0, 1),
            ..SweepSpec::default()
        }
    }

    #[test]
    fn axis_values() {
        let a = Axis::new(4.0, 20.0, 17);
        let v = a.values();
        assert_eq!(v.len(), 17);
        assert_eq!(v[0], 4.0);
        assert_eq!(v[6], 10.0);
        assert_eq!(v[16], 20.0);
        assert!(Axis::new(1.0, 0.0, 3).validate("x").is_err());
        assert!(Axis::new(0.0, 1.0, 0).validate("x").is_err());
        assert!(Axis::new(0.0, 1.0, 1).validate("x").is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = SweepSpec::default();
        assert!(s.validate().is_ok());
        s.detuning = Axis::new(0.5, 3.0, 3);
        assert!(s.validate().is_err());
        let s = SweepSpec {
            kappa_inv_us: vec![],
            ..SweepSpec::default()
        };
        assert!(s.validate().is_err());
        let s = SweepSpec {
            workers: 0,
            ..SweepSpec::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn detuning_rows_and_optimum_bookkeeping() {
        let r = sweep_detuning(&Scenario::default(), &small()).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(r.rows[0].params, vec![0.1, 9.0]);
        assert_eq!(r.rows[5].params, vec![10.0, 11.0]);
        let optima = r.detuning_optima();
        assert_eq!(optima.len(), 2);
        let mean = r.rows.iter().map(|x| x.fidelity).sum::<f64>() / 6.0;
        assert!((r.summary().mean - mean).abs() < 1e-15);
    }

    #[test]
    fn state_grid_corner_matches_direct_run() {
        let base = Scenario::default();
        let r = sweep_state_grid(&base, &small()).unwrap();
        assert_eq!(r.rows.len(), 9);
        let direct = Scenario {
            state: InitialStateSpec::from_angles(0.0, 0.0).unwrap(),
            ..base
        }
        .run()
        .unwrap();
        assert_eq!(r.fidelity_at(&[0.0, 0.0]).unwrap(), direct.fidelity);
    }

    #[test]
    fn random_sampling_is_seeded() {
        let s = SweepSpec {
            sampling: StateSampling::Random { samples: 5, seed: 7 },
            ..SweepSpec::default()
        };
        let a = state_samples(&s);
        assert_eq!(a, state_samples(&s));
        assert_eq!(a.len(), 5);
        assert!(a.iter().all(|(g, t)| (0.0..=1.0).contains(g) && (0.0..=2.0 * PI).contains(t)));
    }

    #[test]
    fn parallel_matches_serial() {
        let base = Scenario::default();
        let serial = sweep_coupling(&base, &small()).unwrap();
        let parallel = sweep_coupling(&base, &SweepSpec { workers: 3, ..small() }).unwrap();
        assert_eq!(serial.rows, parallel.rows);
    }

    #[test]
    fn homogeneous_coupling_point_is_reference_run() {
        let base = Scenario::default();
        let r = sweep_coupling(&base, &small()).unwrap();
        assert_eq!(r.fidelity_at(&[1.0, 1.0]).unwrap(), base.run().unwrap().fidelity);
    }

    #[test]
    fn kind_names() {
        for k in [SweepKind::Detuning, SweepKind::StateGrid, SweepKind::Coupling, SweepKind::Convergence] {
            assert_eq!(k.as_str().parse::<SweepKind>().unwrap(), k);
        }
    }
}
