//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Every key has a default, so an empty file is a complete configuration.
//! Unknown or repeated keys are rejected, and a file either parses completely
//! or not at all.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::experiments::{Axis, Scenario, StateSampling, SweepSpec};
use crate::lindblad::{IntegratorConfig, Method};
use crate::model::{ConstraintMode, DeviceDesign, InitialStateSpec, Lifetimes};
use crate::operators::SpaceLayout;
use crate::protocol::{Dynamics, TransferSettings};

/// Environment variable that overrides `workers`.
pub const WORKERS_ENV: &str = "QTRANSFER_WORKERS";

struct KeySpec {
    key: &'static str,
    default: &'static str,
    help: &'static str,
}

const fn k(key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

const SECTIONS: &[(&str, &[KeySpec])] = &[
    (
        "device (frequencies as ω/2π)",
        &[
            k("nu_eg_GHz", "3.5", "g↔e transition frequency of both qutrits"),
            k("nu_fg_GHz", "8.8", "g↔f transition frequency of both qutrits"),
            k("delta_GHz", "1.0", "δ/2π = ν_eg − ν_a; resonator a sits at 2.5 GHz"),
            k("Delta_GHz", "0.8", "Δ/2π = ν_fg − ν_b; resonator b sits at 8.0 GHz"),
            k("D", "10", "detuning ratio D = δ/g; g/2π = 100 MHz at D = 10"),
            k("mu_MHz", "auto", "μ/2π; `auto` derives it from constraint_mode"),
            k("constraint_mode", "equal-rates", "equal-rates: μ = g√(Δ/δ); linear-ratio: μ = gΔ/δ"),
            k("crosstalk", "true", "include the direct resonator–resonator coupling"),
            k("crosstalk_ratio", "0.1", "g_ab / g"),
            k("Omega_MHz", "100", "Rabi frequency Ω/2π of the stage-2 pulse"),
            k("c", "1.0", "g2 / g1"),
            k("d", "1.0", "μ2 / μ1"),
        ],
    ),
    (
        "decoherence (lifetimes in μs; `inf` disables a channel)",
        &[
            k("kappa_inv_us", "0.1", "photon lifetime of both resonators"),
            k("gamma_relax_inv_us", "5", "relaxation lifetime for e→g, f→e and f→g"),
            k("gamma_phi_inv_us", "2", "dephasing lifetime of levels e and f"),
        ],
    ),
    (
        "input state of qutrit 1 (complex amplitudes, e.g. `0.5+0.1i`)",
        &[
            k("alpha", "0.5773502691896258", "amplitude of |g⟩"),
            k("beta", "0.5773502691896258", "amplitude of |e⟩"),
            k("gamma", "0.5773502691896258", "amplitude of |f⟩"),
            k("theta_rad", "none", "if set: α = √(1−γ²) sin θ, β = √(1−γ²) cos θ, γ real"),
        ],
    ),
    (
        "integration",
        &[
            k("dynamics", "full", "full couplings, or `effective` dispersive model"),
            k("n_photon", "3", "Fock levels kept per resonator"),
            k("dt_ps", "1", "time step in ps"),
            k("method", "rk4", "rk4 or rk4-doubling"),
            k("tolerance", "1e-10", "local error target for rk4-doubling"),
            k("max_steps", "50000000", "step budget per stage"),
            k("sample_stride", "1000", "diagnostics every this many steps"),
            k("reduce_subspace", "true", "integrate only the reachable invariant subspace"),
        ],
    ),
    (
        "sweeps",
        &[
            k("D_min", "4", "detuning sweep start"),
            k("D_max", "20", "detuning sweep end"),
            k("D_points", "17", "detuning sweep points"),
            k("kappa_inv_list_us", "0.1,1,10", "resonator lifetimes for the detuning sweep"),
            k("gamma_points", "21", "γ grid points over [0, 1]"),
            k("theta_points", "41", "θ grid points over [0, 2π]"),
            k("state_sampling", "grid", "grid or random"),
            k("random_samples", "200", "samples when state_sampling = random"),
            k("seed", "1", "seed when state_sampling = random"),
            k("c_min", "0.95", "coupling sweep c start"),
            k("c_max", "1.05", "coupling sweep c end"),
            k("c_points", "11", "coupling sweep c points"),
            k("d_min", "0.95", "coupling sweep d start"),
            k("d_max", "1.05", "coupling sweep d end"),
            k("d_points", "11", "coupling sweep d points"),
            k("photon_levels", "2,3,4", "truncations for the convergence study"),
            k("timesteps_ps", "2,1,0.5", "steps for the convergence study"),
            k("workers", "1", "sweep worker threads (overridden by QTRANSFER_WORKERS)"),
        ],
    ),
    (
        "output",
        &[
            k("output_csv", "none", "CSV path for sweep results"),
            k("output_svg", "none", "SVG path for sweep plots"),
        ],
    ),
];

fn key_spec(key: &str) -> Option<&'static KeySpec> {
    SECTIONS.iter().flat_map(|(_, keys)| keys.iter()).find(|s| s.key == key)
}

/// Annotated configuration listing every key at its default.
pub fn default_config_text() -> String {
    let mut out = String::from("# qutrit-transfer run configuration. All values shown are defaults.\n");
    for (section, keys) in SECTIONS {
        out.push_str(&format!("\n# --- {section} ---\n"));
        for s in keys.iter() {
            out.push_str(&format!("# {}\n{} = {}\n", s.help, s.key, s.default));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub sweep: SweepSpec,
    pub output_csv: Option<PathBuf>,
    pub output_svg: Option<PathBuf>,
    /// Effective value of every key, with whether it came from the input.
    pub echo: Vec<(String, String, bool)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults parse")
    }
}

impl RunConfig {
    /// `# key=value` lines for result headers.
    pub fn metadata(&self) -> Vec<(String, String)> {
        self.echo
            .iter()
            .map(|(k, v, set)| {
                let source = if *set { "config" } else { "default" };
                (format!("config.{k}"), format!("{v} ({source})"))
            })
            .collect()
    }

    /// Applies a worker-count override such as the value of
    /// [`WORKERS_ENV`].
    pub fn apply_workers_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::config(WORKERS_ENV, format!("expected a positive integer, got `{v}`")))?;
            if n == 0 {
                return Err(Error::config(WORKERS_ENV, "must be at least 1"));
            }
            self.sweep.workers = n;
        }
        Ok(())
    }
}

/// Splits text into `key → value`, rejecting malformed, unknown and
/// repeated keys.
fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key_spec(key).is_none() {
            return Err(Error::config(key, "unknown key"));
        }
        if value.is_empty() {
            return Err(Error::config(key, "missing value"));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
    }
    Ok(map)
}

struct Values {
    given: BTreeMap<String, String>,
}

impl Values {
    fn raw(&self, key: &str) -> &str {
        self.given
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| key_spec(key).expect("known key").default)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse::<T>()
            .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            "none" | "auto" => Ok(None),
            _ => self.parse(key).map(Some),
        }
    }

    fn float(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse(key)?;
        if v.is_nan() {
            return Err(Error::config(key, "NaN is not allowed"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.float(key)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(key, format!("must be positive and finite, got {v}")));
        }
        Ok(v)
    }

    fn non_negative(&self, key: &str) -> Result<f64> {
        let v = self.float(key)?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config(key, format!("must be ≥ 0 and finite, got {v}")));
        }
        Ok(v)
    }

    /// Positive, possibly infinite.
    fn lifetime(&self, key: &str) -> Result<f64> {
        let v = self.float(key)?;
        if !(v > 0.0) {
            return Err(Error::config(key, format!("lifetime must be positive, got {v}")));
        }
        Ok(v)
    }

    fn count(&self, key: &str, min: usize) -> Result<usize> {
        let v: usize = self.parse(key)?;
        if v < min {
            return Err(Error::config(key, format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }

    fn boolean(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(Error::config(key, format!("expected true or false, got `{other}`"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        let items: std::result::Result<Vec<T>, _> = raw.split(',').map(|s| s.trim().parse::<T>()).collect();
        let items = items.map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))?;
        if items.is_empty() {
            return Err(Error::config(key, "empty list"));
        }
        Ok(items)
    }

    fn complex(&self, key: &str) -> Result<Complex64> {
        let raw = self.raw(key);
        let z = Complex64::from_str(raw).map_err(|_| Error::config(key, format!("cannot parse `{raw}` as a complex number")))?;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::config(key, "must be finite"));
        }
        Ok(z)
    }

    fn axis(&self, prefix: &str, min_ok: impl Fn(f64) -> bool) -> Result<Axis> {
        let (kmin, kmax, kpts) = (format!("{prefix}_min"), format!("{prefix}_max"), format!("{prefix}_points"));
        let min = self.float(&kmin)?;
        let max = self.float(&kmax)?;
        if !min_ok(min) {
            return Err(Error::config(kmin, format!("value {min} out of range")));
        }
        if max < min {
            return Err(Error::config(kmax, format!("must be ≥ {kmin} ({min}), got {max}")));
        }
        let points = self.count(&kpts, 1)?;
        if points == 1 && min != max {
            return Err(Error::config(kpts, "a single point needs min = max"));
        }
        Ok(Axis::new(min, max, points))
    }
}

fn parse_enum<T: FromStr<Err = String>>(v: &Values, key: &str) -> Result<T> {
    v.raw(key).parse::<T>().map_err(|e| Error::config(key, e))
}

fn build(v: &Values) -> Result<RunConfig> {
    let nu_eg = v.positive("nu_eg_GHz")?;
    let nu_fg = v.positive("nu_fg_GHz")?;
    let delta = v.positive("delta_GHz")?;
    let big_delta = v.positive("Delta_GHz")?;
    if delta >= nu_eg {
        return Err(Error::config("delta_GHz", "resonator a frequency would be non-positive"));
    }
    if big_delta >= nu_fg {
        return Err(Error::config("Delta_GHz", "resonator b frequency would be non-positive"));
    }
    let d_ratio = v.float("D")?;
    if !(d_ratio > 1.0 && d_ratio.is_finite()) {
        return Err(Error::config("D", format!("must exceed 1, got {d_ratio}")));
    }
    let mu_mhz = v.optional::<f64>("mu_MHz")?;
    if let Some(mu) = mu_mhz {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::config("mu_MHz", format!("must be ≥ 0, got {mu}")));
        }
    }
    let design = DeviceDesign {
        nu_eg_ghz: nu_eg,
        nu_fg_ghz: nu_fg,
        delta_ghz: delta,
        big_delta_ghz: big_delta,
        detuning_ratio: d_ratio,
        mu_mhz,
        mode: parse_enum::<ConstraintMode>(v, "constraint_mode")?,
        crosstalk_ratio: v.non_negative("crosstalk_ratio")?,
        rabi_mhz: v.positive("Omega_MHz")?,
        c: v.positive("c")?,
        d: v.positive("d")?,
    };

    let lifetimes = Lifetimes {
        kappa_inv_us: v.lifetime("kappa_inv_us")?,
        relax_inv_us: v.lifetime("gamma_relax_inv_us")?,
        dephase_inv_us: v.lifetime("gamma_phi_inv_us")?,
    };

    let state = match v.optional::<f64>("theta_rad")? {
        Some(theta) => {
            if v.given.contains_key("alpha") || v.given.contains_key("beta") {
                return Err(Error::config("theta_rad", "cannot be combined with explicit alpha or beta"));
            }
            let gamma = v.complex("gamma")?;
            if gamma.im != 0.0 || !(0.0..=1.0).contains(&gamma.re) {
                return Err(Error::config("gamma", "must be real in [0, 1] when theta_rad is set"));
            }
            InitialStateSpec::from_angles(gamma.re, theta).map_err(|e| Error::config("theta_rad", e.to_string()))?
        }
        None => InitialStateSpec::new(v.complex("alpha")?, v.complex("beta")?, v.complex("gamma")?)
            .map_err(|e| Error::config("alpha", e.to_string()))?,
    };

    let n_photon = v.count("n_photon", 2)?;
    let method = match v.raw("method") {
        "rk4" => Method::Rk4,
        "rk4-doubling" => Method::Rk4StepDoubling,
        other => return Err(Error::config("method", format!("expected rk4 or rk4-doubling, got `{other}`"))),
    };
    let integrator = IntegratorConfig {
        dt: v.positive("dt_ps")? * 1e-3,
        method,
        local_tolerance: v.positive("tolerance")?,
        max_steps: v.count("max_steps", 1)?,
        sample_stride: v.count("sample_stride", 1)?,
        reduce: v.boolean("reduce_subspace")?,
    };
    let settings = TransferSettings {
        layout: SpaceLayout::new(n_photon).map_err(|e| Error::config("n_photon", e.to_string()))?,
        crosstalk: v.boolean("crosstalk")?,
        dynamics: parse_enum::<Dynamics>(v, "dynamics")?,
        integrator,
    };

    let sampling = match v.raw("state_sampling") {
        "grid" => StateSampling::Grid,
        "random" => StateSampling::Random {
            samples: v.count("random_samples", 1)?,
            seed: v.parse("seed")?,
        },
        other => return Err(Error::config("state_sampling", format!("expected grid or random, got `{other}`"))),
    };
    let kappa_list: Vec<f64> = v.list("kappa_inv_list_us")?;
    if kappa_list.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::config("kappa_inv_list_us", "lifetimes must be positive"));
    }
    let photon_levels: Vec<usize> = v.list("photon_levels")?;
    if photon_levels.iter().any(|n| *n < 2) {
        return Err(Error::config("photon_levels", "each truncation must keep at least 2 levels"));
    }
    let timesteps: Vec<f64> = v.list("timesteps_ps")?;
    if timesteps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::config("timesteps_ps", "steps must be positive"));
    }
    let gamma_points = v.count("gamma_points", 1)?;
    let theta_points = v.count("theta_points", 1)?;
    let sweep = SweepSpec {
        detuning: v.axis("D", |m| m > 1.0)?,
        kappa_inv_us: kappa_list,
        gamma: Axis::new(0.0, if gamma_points == 1 { 0.0 } else { 1.0 }, gamma_points),
        theta: Axis::new(0.0, if theta_points == 1 { 0.0 } else { 2.0 * PI }, theta_points),
        sampling,
        c: v.axis("c", |m| m > 0.0)?,
        d: v.axis("d", |m| m > 0.0)?,
        photon_levels,
        timesteps_ps: timesteps,
        workers: v.count("workers", 1)?,
    };

    let scenario = Scenario {
        design,
        lifetimes,
        state,
        settings,
    };
    scenario.design.build().map_err(|e| Error::config("D", e.to_string()))?;

    let echo = SECTIONS
        .iter()
        .flat_map(|(_, keys)| keys.iter())
        .map(|s| (s.key.to_string(), v.raw(s.key).to_string(), v.given.contains_key(s.key)))
        .collect();

    Ok(RunConfig {
        scenario,
        sweep,
        output_csv: v.optional::<PathBuf>("output_csv")?,
        output_svg: v.optional::<PathBuf>("output_svg")?,
        echo,
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    build(&Values {
        given: parse_pairs(text)?,
    })
}

/// Parses `text`, then applies `key=value` overrides on top (an override
/// replaces a key given in the text).
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut given = parse_pairs(text)?;
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| Error::config(o.clone(), "override must be `key=value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key_spec(key).is_none() {
            return Err(Error::config(key, "unknown key"));
        }
        given.insert(key.to_string(), value.to_string());
    }
    build(&Values { given })
}
