use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::orbit::orbital_distance_with;
use super::{boost, check_boundary, embed_soliton, CartesianField, Geometry, Propagator};
use crate::error::{DomainKind, Error, Result};
use crate::functionals::FunctionalReport;
use crate::ground_state::{solve_scalar_field, Frequency, GroundStateRecord, ShootingConfig};

/// Boundary amplitude, relative to the initial peak, at which a run stops.
pub const CONTAMINATION_LIMIT: f64 = 1e-6;

/// Time series recorded along one evolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub mass_drift: Vec<f64>,
    pub energy_drift: Vec<f64>,
    pub momentum_drift: Vec<[f64; 2]>,
    /// Empty unless a reference soliton is attached.
    pub orbital_distance: Vec<f64>,
    pub variance: Vec<f64>,
    pub l4_pow4: Vec<f64>,
    pub center_of_mass: Vec<[f64; 2]>,
    pub boundary_amplitude: Vec<f64>,
    /// Final time actually reached.
    pub horizon: f64,
    pub warnings: Vec<String>,
}

impl SimulationTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "time,mass_drift,energy_drift,momentum_drift_x,momentum_drift_y,orbital_distance,variance,l4\n",
        );
        for i in 0..self.times.len() {
            let d = self.orbital_distance.get(i).copied().unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.times[i],
                self.mass_drift[i],
                self.energy_drift[i],
                self.momentum_drift[i][0],
                self.momentum_drift[i][1],
                d,
                self.variance[i],
                self.l4_pow4[i]
            );
        }
        out
    }

    pub fn max_abs(series: &[f64]) -> f64 {
        series.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn max_momentum_drift(&self) -> f64 {
        self.momentum_drift
            .iter()
            .map(|p| p[0].abs().max(p[1].abs()))
            .fold(0.0, f64::max)
    }

    /// Least-squares velocity of the center of mass.
    pub fn center_velocity(&self) -> [f64; 2] {
        let n = self.times.len() as f64;
        let tm = self.times.iter().sum::<f64>() / n;
        let var: f64 = self.times.iter().map(|t| (t - tm).powi(2)).sum();
        let mut v = [0.0; 2];
        for (axis, slot) in v.iter_mut().enumerate() {
            let cm = self.center_of_mass.iter().map(|c| c[axis]).sum::<f64>() / n;
            let cov: f64 = self
                .times
                .iter()
                .zip(&self.center_of_mass)
                .map(|(t, c)| (t - tm) * (c[axis] - cm))
                .sum();
            *slot = cov / var;
        }
        v
    }
}

/// Runs Strang steps and samples the diagnostics.
pub struct Recorder<'a> {
    prop: &'a mut Propagator,
    initial: FunctionalReport,
    initial_peak: f64,
    reference: Option<CartesianField>,
    limit: f64,
    pub trace: SimulationTrace,
}

impl<'a> Recorder<'a> {
    pub fn new(
        prop: &'a mut Propagator,
        field: &CartesianField,
        reference: Option<CartesianField>,
    ) -> Result<Self> {
        let initial = prop.report(field)?;
        let mut rec = Self {
            prop,
            initial,
            initial_peak: field.max_abs(),
            reference,
            limit: CONTAMINATION_LIMIT,
            trace: SimulationTrace::default(),
        };
        rec.sample(field)?;
        Ok(rec)
    }

    /// Replaces the relative boundary amplitude at which the run stops.
    pub fn with_contamination_limit(mut self, limit: f64) -> Self {
        self.limit = limit;
        self
    }

    fn sample(&mut self, field: &CartesianField) -> Result<()> {
        let r = self.prop.report(field)?;
        let rel = |now: f64, then: f64| {
            if then != 0.0 {
                (now - then) / then.abs()
            } else {
                now - then
            }
        };
        let t = &mut self.trace;
        t.times.push(field.time);
        t.mass_drift.push(rel(r.mass, self.initial.mass));
        t.energy_drift.push(rel(r.energy, self.initial.energy));
        t.momentum_drift.push([
            r.momentum[0] - self.initial.momentum[0],
            r.momentum[1] - self.initial.momentum[1],
        ]);
        t.variance.push(field.variance());
        t.l4_pow4.push(r.l4_pow4);
        t.center_of_mass.push(field.center_of_mass());
        t.boundary_amplitude
            .push(field.boundary_max() / self.initial_peak);
        t.horizon = field.time;
        if let Some(reference) = &self.reference {
            let d = orbital_distance_with(self.prop, field, reference)?;
            self.trace.orbital_distance.push(d.distance);
        }
        Ok(())
    }

    /// Evolves to `t_final`, sampling every `sample_every` steps. Stops with
    /// a warning when the boundary amplitude exceeds the contamination limit.
    pub fn run(
        mut self,
        field: &mut CartesianField,
        dt: f64,
        t_final: f64,
        sample_every: usize,
    ) -> Result<SimulationTrace> {
        let total = (t_final / dt).round() as usize;
        let sample_every = sample_every.max(1);
        let mut done = 0;
        while done < total {
            let k = sample_every.min(total - done);
            if let Err(e) = self.prop.evolve(field, dt, k) {
                return Err(match e {
                    Error::Numeric(message) => Error::Blowup {
                        message,
                        trace: Box::new(self.trace),
                    },
                    other => other,
                });
            }
            done += k;
            self.sample(field)?;
            let edge = *self.trace.boundary_amplitude.last().expect("sampled");
            if edge > self.limit {
                self.trace.warnings.push(format!(
                    "stopped at t = {:.4}: boundary amplitude {edge:.3e} of the initial peak exceeds {:e}",
                    field.time, self.limit
                ));
                break;
            }
        }
        Ok(self.trace)
    }
}

fn steps_per_sample(dt: f64, interval: f64) -> usize {
    ((interval / dt).round() as usize).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Relative H¹ size of the perturbation.
    pub delta: f64,
    /// Largest wavenumber `|k_x|, |k_y|` in the noise band.
    pub max_wavenumber: f64,
    pub seed: u64,
}

/// Band-limited random field times a Gaussian envelope around `center`,
/// scaled to H¹ norm `size`.
pub fn random_perturbation(
    prop: &mut Propagator,
    spec: &PerturbationSpec,
    center: [f64; 2],
    envelope: f64,
    size: f64,
) -> Result<CartesianField> {
    let geometry = prop.geometry();
    let n = geometry.n;
    let modes =
        (spec.max_wavenumber * geometry.box_length / (2.0 * std::f64::consts::PI)).floor() as i32;
    if !(spec.max_wavenumber >= 0.0) || 2 * modes as usize >= n {
        return Err(Error::domain(
            DomainKind::InvalidParameter,
            "perturbation band exceeds the grid",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut spec_field = vec![Complex64::default(); n * n];
    let index = |m: i32| {
        if m >= 0 {
            m as usize
        } else {
            (n as i32 + m) as usize
        }
    };
    for my in -modes..=modes {
        for mx in -modes..=modes {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            spec_field[index(my) * n + index(mx)] = c;
        }
    }
    prop.inverse_spectrum(&mut spec_field);
    let xs = geometry.coords();
    for iy in 0..n {
        for ix in 0..n {
            let r2 = (xs[ix] - center[0]).powi(2) + (xs[iy] - center[1]).powi(2);
            spec_field[iy * n + ix] *= (-r2 / (2.0 * envelope * envelope)).exp();
        }
    }
    let mut field = CartesianField {
        geometry,
        values: spec_field,
        time: 0.0,
    };
    let r = prop.report(&field)?;
    let norm = (r.mass + r.grad_norm_sq).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Numeric("perturbation vanished".into()));
    }
    let c = size / norm;
    field.values.iter_mut().for_each(|z| *z *= c);
    Ok(field)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub omega: f64,
    pub perturbation: PerturbationSpec,
    pub t_final: f64,
    pub dt: f64,
    pub geometry: Geometry,
    pub sample_interval: f64,
    pub center: [f64; 2],
    /// Galilean boost; the orbital distance is only tracked when zero.
    pub velocity: [f64; 2],
    pub shooting: ShootingConfig,
}

impl StabilityConfig {
    /// Perturbed runs default to a wide box so that radiation stays clear of
    /// the boundary over long horizons; unperturbed runs use a finer grid.
    pub fn new(omega: f64, delta: f64, t_final: f64) -> Self {
        let geometry = if delta > 0.0 {
            Geometry {
                n: 512,
                box_length: 512.0,
            }
        } else {
            Geometry {
                n: 256,
                box_length: 128.0,
            }
        };
        Self {
            omega,
            perturbation: PerturbationSpec {
                delta,
                max_wavenumber: std::f64::consts::FRAC_PI_4,
                seed: 7,
            },
            t_final,
            dt: 5e-3,
            geometry,
            sample_interval: 0.5,
            center: [0.0, 0.0],
            velocity: [0.0, 0.0],
            shooting: ShootingConfig::for_omega(omega),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityOutcome {
    pub trace: SimulationTrace,
    pub mass: f64,
    pub initial_distance: Option<f64>,
    pub max_distance: Option<f64>,
    #[serde(skip)]
    pub final_field: Option<CartesianField>,
}

/// Evolves `P_ω + δ·η` (optionally boosted) and records the orbital distance.
pub fn run_stability_experiment(cfg: &StabilityConfig) -> Result<StabilityOutcome> {
    Frequency::new(cfg.omega)?;
    let rec = solve_scalar_field(cfg.omega, &cfg.shooting)?;
    run_stability_with(&rec, cfg)
}

pub fn run_stability_with(
    rec: &GroundStateRecord,
    cfg: &StabilityConfig,
) -> Result<StabilityOutcome> {
    let geometry = Geometry::new(cfg.geometry.n, cfg.geometry.box_length)?;
    if !(cfg.perturbation.delta >= 0.0) {
        return Err(Error::domain(
            DomainKind::InvalidParameter,
            "delta must be nonnegative",
        ));
    }
    let mut prop = Propagator::new(geometry);
    let mut field = embed_soliton(rec, cfg.center, cfg.velocity, 0.0, geometry)?;
    if cfg.perturbation.delta > 0.0 {
        let r = prop.report(&field)?;
        let size = cfg.perturbation.delta * (r.mass + r.grad_norm_sq).sqrt();
        let envelope = super::half_max_radius(rec) + 3.0;
        let eta = random_perturbation(&mut prop, &cfg.perturbation, cfg.center, envelope, size)?;
        field
            .values
            .iter_mut()
            .zip(&eta.values)
            .for_each(|(a, b)| *a += b);
        check_boundary(&field)?;
    }
    let boosted = cfg.velocity != [0.0, 0.0];
    let reference = if boosted {
        None
    } else {
        Some(embed_soliton(rec, [0.0, 0.0], [0.0, 0.0], 0.0, geometry)?)
    };
    let recorder = Recorder::new(&mut prop, &field, reference)?;
    let trace = recorder.run(
        &mut field,
        cfg.dt,
        cfg.t_final,
        steps_per_sample(cfg.dt, cfg.sample_interval),
    )?;
    let initial_distance = trace.orbital_distance.first().copied();
    let max_distance = (!trace.orbital_distance.is_empty())
        .then(|| SimulationTrace::max_abs(&trace.orbital_distance));
    Ok(StabilityOutcome {
        mass: rec.mass(),
        trace,
        initial_distance,
        max_distance,
        final_field: Some(field),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// Real Gaussian `A·e^{−|x|²/(2σ²)}` with mass `fraction·M(q)`.
    Gaussian { mass_fraction: f64, width: f64 },
    /// A ground state at rest.
    Soliton { omega: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringConfig {
    pub initial: InitialData,
    pub t_final: f64,
    pub dt: f64,
    pub geometry: Geometry,
    pub sample_interval: f64,
}

impl ScatteringConfig {
    pub fn gaussian(mass_fraction: f64, t_final: f64) -> Self {
        Self {
            initial: InitialData::Gaussian {
                mass_fraction,
                width: 2.0,
            },
            t_final,
            dt: 1e-2,
            geometry: Geometry {
                n: 512,
                box_length: 384.0,
            },
            sample_interval: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringOutcome {
    pub trace: SimulationTrace,
    pub initial_mass: f64,
    /// `∫|φ|⁴` at the horizon over its initial value.
    pub l4_ratio: f64,
    pub variance_monotone: bool,
    /// Variance gained over the second half of the run exceeds that of the
    /// first half.
    pub variance_superlinear: bool,
    #[serde(skip)]
    pub final_field: Option<CartesianField>,
}

/// Records `∫|φ|⁴` and `∫|x|²|φ|²` along the evolution of the initial data.
pub fn run_scattering_experiment(
    cfg: &ScatteringConfig,
    townes_mass: f64,
) -> Result<ScatteringOutcome> {
    let geometry = Geometry::new(cfg.geometry.n, cfg.geometry.box_length)?;
    let mut field = match cfg.initial {
        InitialData::Gaussian {
            mass_fraction,
            width,
        } => {
            if !(mass_fraction > 0.0 && mass_fraction < 1.0) {
                return Err(Error::domain(
                    DomainKind::InvalidParameter,
                    format!("mass fraction {mass_fraction} must lie in (0, 1)"),
                ));
            }
            let amp = (mass_fraction * townes_mass / (std::f64::consts::PI * width * width)).sqrt();
            let f = CartesianField::from_fn(geometry, |x, y| {
                Complex64::new(amp * (-(x * x + y * y) / (2.0 * width * width)).exp(), 0.0)
            });
            check_boundary(&f)?;
            f
        }
        InitialData::Soliton { omega } => {
            let rec = solve_scalar_field(omega, &ShootingConfig::for_omega(omega))?;
            embed_soliton(&rec, [0.0, 0.0], [0.0, 0.0], 0.0, geometry)?
        }
    };
    let initial_mass = field.mass();
    let mut prop = Propagator::new(geometry);
    let recorder = Recorder::new(&mut prop, &field, None)?;
    let trace = recorder.run(
        &mut field,
        cfg.dt,
        cfg.t_final,
        steps_per_sample(cfg.dt, cfg.sample_interval),
    )?;
    let v = &trace.variance;
    let l4 = &trace.l4_pow4;
    let mid = v.len() / 2;
    Ok(ScatteringOutcome {
        initial_mass,
        l4_ratio: l4[l4.len() - 1] / l4[0],
        variance_monotone: v.windows(2).all(|w| w[1] > w[0]),
        variance_superlinear: v[v.len() - 1] - v[mid] > v[mid] - v[0],
        trace,
        final_field: Some(field),
    })
}

/// Sup-norm distance between the evolved `P_ω` and `e^{iωt}P_ω` at `t`.
pub fn soliton_deviation(
    rec: &GroundStateRecord,
    geometry: Geometry,
    dt: f64,
    t: f64,
) -> Result<f64> {
    let mut prop = Propagator::new(geometry);
    let mut field = embed_soliton(rec, [0.0, 0.0], [0.0, 0.0], 0.0, geometry)?;
    let mut exact = field.clone();
    prop.evolve(&mut field, dt, (t / dt).round() as usize)?;
    exact.rotate_phase(rec.omega.value() * field.time);
    Ok(field.sup_distance(&exact))
}

/// Sup-norm gap between evolving a boosted soliton and boosting the evolved
/// soliton, at time `t`.
pub fn galilean_gap(
    rec: &GroundStateRecord,
    geometry: Geometry,
    v: [f64; 2],
    dt: f64,
    t: f64,
) -> Result<f64> {
    let mut prop = Propagator::new(geometry);
    let rest = embed_soliton(rec, [0.0, 0.0], [0.0, 0.0], 0.0, geometry)?;
    let mut moving = boost(&mut prop, &rest, v, 0.0);
    let mut evolved = rest;
    let steps = (t / dt).round() as usize;
    prop.evolve(&mut moving, dt, steps)?;
    prop.evolve(&mut evolved, dt, steps)?;
    let boosted_after = boost(&mut prop, &evolved, v, evolved.time);
    Ok(moving.sup_distance(&boosted_after))
}

/// Writes `<stem>.bin` (little-endian `(re, im)` pairs, row-major) and
/// `<stem>.json` with the grid size, box length and time.
pub fn write_snapshot(field: &CartesianField, stem: &Path) -> Result<()> {
    std::fs::write(stem.with_extension("bin"), field.to_le_bytes())?;
    let sidecar = serde_json::json!({
        "n": field.geometry.n,
        "L": field.geometry.box_length,
        "time": field.time,
    });
    std::fs::write(
        stem.with_extension("json"),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    Ok(())
}

pub fn read_snapshot(stem: &Path) -> Result<CartesianField> {
    #[derive(Deserialize)]
    struct Sidecar {
        n: usize,
        #[serde(rename = "L")]
        l: f64,
        time: f64,
    }
    let side: Sidecar =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    let bytes = std::fs::read(stem.with_extension("bin"))?;
    CartesianField::from_le_bytes(Geometry::new(side.n, side.l)?, side.time, &bytes)
}
