//! Split-step spectral evolution of `i∂ₜφ + Δφ + |φ|²φ − |φ|⁴φ = 0` on a
//! periodic square.
//!
//! The Strang step is a half step of the exact nonlinear phase rotation
//! `φ ↦ e^{i(dt/2)(|φ|² − |φ|⁴)}φ`, a full step of the free propagator
//! `e^{−i·dt·|k|²}` in Fourier space, and another half nonlinear step. Both
//! substeps are isometries, so mass is conserved to rounding.

mod experiments;
mod orbit;
pub mod spectral;

pub use experiments::*;
pub use orbit::{orbital_distance, OrbitalDistance};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DomainKind, Error, Result};
use crate::functionals::{FunctionalReport, Measurable};
use crate::ground_state::GroundStateRecord;
use spectral::{derivative_wavenumbers, wavenumbers, Fft2};

/// Largest `dt·max|k|²` accepted by the linear substep.
pub const MAX_LINEAR_PHASE: f64 = std::f64::consts::PI;

/// Boundary amplitude, relative to the peak, required of initial data.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Points per axis.
    pub n: usize,
    /// Period `L` of the square.
    pub box_length: f64,
}

impl Geometry {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::domain(
                DomainKind::InvalidParameter,
                format!("grid size {n} must be a power of two and at least 64"),
            ));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::domain(
                DomainKind::InvalidParameter,
                "box length must be positive",
            ));
        }
        Ok(Self { n, box_length })
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Coordinate of index `j`; the box is `[−L/2, L/2)`.
    pub fn coord(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(j)).collect()
    }
}

/// Complex field on an `n × n` periodic grid, row-major with `y` as the
/// slow index.
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianField {
    pub geometry: Geometry,
    pub values: Vec<Complex64>,
    pub time: f64,
}

impl CartesianField {
    pub fn zeros(geometry: Geometry) -> Self {
        Self {
            values: vec![Complex64::default(); geometry.n * geometry.n],
            geometry,
            time: 0.0,
        }
    }

    pub fn from_fn(geometry: Geometry, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let xs = geometry.coords();
        let values = xs
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            geometry,
            values,
            time: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.geometry.n
    }

    pub fn cell_area(&self) -> f64 {
        self.geometry.spacing().powi(2)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus on the outermost rows and columns.
    pub fn boundary_max(&self) -> f64 {
        let n = self.n();
        let v = &self.values;
        (0..n)
            .flat_map(|i| [v[i], v[(n - 1) * n + i], v[i * n], v[i * n + n - 1]])
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn mass(&self) -> f64 {
        self.cell_area() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `∫x|φ|² / ∫|φ|²`.
    pub fn center_of_mass(&self) -> [f64; 2] {
        let xs = self.geometry.coords();
        let n = self.n();
        let (mut mx, mut my, mut m) = (0.0, 0.0, 0.0);
        for iy in 0..n {
            for ix in 0..n {
                let w = self.values[iy * n + ix].norm_sqr();
                mx += w * xs[ix];
                my += w * xs[iy];
                m += w;
            }
        }
        [mx / m, my / m]
    }

    /// `∫|x|²|φ|²` about the box center.
    pub fn variance(&self) -> f64 {
        let xs = self.geometry.coords();
        let n = self.n();
        let mut s = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                s += (xs[ix] * xs[ix] + xs[iy] * xs[iy]) * self.values[iy * n + ix].norm_sqr();
            }
        }
        s * self.cell_area()
    }

    pub fn l4_pow4(&self) -> f64 {
        self.cell_area()
            * self
                .values
                .iter()
                .map(|z| z.norm_sqr().powi(2))
                .sum::<f64>()
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if let Some(i) = self
            .values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::Numeric(format!(
                "field became non-finite at index {i}, t = {}",
                self.time
            )));
        }
        Ok(())
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &CartesianField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Multiplies every sample by `e^{iθ}`.
    pub fn rotate_phase(&mut self, theta: f64) {
        let c = Complex64::from_polar(1.0, theta);
        self.values.iter_mut().for_each(|z| *z *= c);
    }

    /// Flat little-endian `(re, im)` pairs in row-major order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 * self.values.len());
        for z in &self.values {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(geometry: Geometry, time: f64, bytes: &[u8]) -> Result<Self> {
        let len = geometry.n * geometry.n;
        if bytes.len() != 16 * len {
            return Err(Error::Structural(format!(
                "snapshot holds {} bytes, expected {}",
                bytes.len(),
                16 * len
            )));
        }
        let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        let values = bytes
            .chunks_exact(16)
            .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
            .collect();
        Ok(Self {
            geometry,
            values,
            time,
        })
    }
}

/// Radius at which the profile first drops to half its center value.
pub(crate) fn half_max_radius(rec: &GroundStateRecord) -> f64 {
    let p = &rec.profile;
    let half = 0.5 * p.values[0];
    p.values
        .iter()
        .position(|&v| v < half)
        .map(|i| p.grid.nodes()[i])
        .unwrap_or(p.grid.r_max())
}

/// The radial profile at any radius: interpolated inside the grid, the
/// fitted far-field form beyond it.
pub fn radial_value(rec: &GroundStateRecord, r: f64) -> f64 {
    rec.profile
        .interpolate(r)
        .unwrap_or_else(|| rec.tail.value(r))
}

/// `P_ω(x − x₀)·e^{i(θ₀ + ½v₀·x)}` sampled on the grid.
pub fn embed_soliton(
    rec: &GroundStateRecord,
    x0: [f64; 2],
    v0: [f64; 2],
    theta0: f64,
    geometry: Geometry,
) -> Result<CartesianField> {
    let width = half_max_radius(rec);
    if width > geometry.box_length / 4.0 {
        return Err(Error::domain(
            DomainKind::FieldTooWide,
            format!(
                "soliton half-width {width:.3} exceeds a quarter of the box {}",
                geometry.box_length
            ),
        ));
    }
    let field = CartesianField::from_fn(geometry, |x, y| {
        let r = ((x - x0[0]).powi(2) + (y - x0[1]).powi(2)).sqrt();
        Complex64::from_polar(radial_value(rec, r), theta0 + 0.5 * (v0[0] * x + v0[1] * y))
    });
    check_boundary(&field)?;
    Ok(field)
}

pub(crate) fn check_boundary(field: &CartesianField) -> Result<()> {
    let (edge, peak) = (field.boundary_max(), field.max_abs());
    if edge >= BOUNDARY_TOLERANCE * peak {
        return Err(Error::domain(
            DomainKind::FieldTooWide,
            format!(
                "boundary amplitude {:.3e} of the peak exceeds {BOUNDARY_TOLERANCE:e}; enlarge the box",
                edge / peak
            ),
        ));
    }
    Ok(())
}

/// Reusable FFT plans and multipliers for one grid geometry.
#[derive(Debug)]
pub struct Propagator {
    geometry: Geometry,
    fft: Fft2,
    /// `|k|²`, symmetric in the two axes.
    k2: Vec<f64>,
    k: Vec<f64>,
    k_odd: Vec<f64>,
    cached_dt: f64,
    linear: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl Propagator {
    pub fn new(geometry: Geometry) -> Self {
        let n = geometry.n;
        let k = wavenumbers(n, geometry.box_length);
        let k2 = (0..n * n)
            .map(|i| k[i / n].powi(2) + k[i % n].powi(2))
            .collect();
        Self {
            geometry,
            fft: Fft2::new(n),
            k2,
            k_odd: derivative_wavenumbers(n, geometry.box_length),
            k,
            cached_dt: f64::NAN,
            linear: Vec::new(),
            work: vec![Complex64::default(); n * n],
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn max_k2(&self) -> f64 {
        self.k2.iter().copied().fold(0.0, f64::max)
    }

    fn check(&self, field: &CartesianField, dt: f64) -> Result<()> {
        if field.geometry != self.geometry {
            return Err(Error::Structural(
                "field geometry does not match the propagator".into(),
            ));
        }
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::domain(
                DomainKind::InvalidParameter,
                "time step must be finite and nonzero",
            ));
        }
        let phase = dt.abs() * self.max_k2();
        if phase > MAX_LINEAR_PHASE {
            return Err(Error::domain(
                DomainKind::InvalidParameter,
                format!("dt·max|k|² = {phase:.3} exceeds {MAX_LINEAR_PHASE:.3}; reduce dt or the grid size"),
            ));
        }
        Ok(())
    }

    fn nonlinear(values: &mut [Complex64], tau: f64) {
        for z in values.iter_mut() {
            let s = z.norm_sqr();
            *z *= Complex64::from_polar(1.0, tau * (s - s * s));
        }
    }

    fn linear(&mut self, values: &mut [Complex64], dt: f64) {
        if dt != self.cached_dt {
            self.linear = self
                .k2
                .iter()
                .map(|&k2| Complex64::from_polar(1.0, -dt * k2))
                .collect();
            self.cached_dt = dt;
        }
        self.fft.forward_transposed(values);
        values
            .iter_mut()
            .zip(&self.linear)
            .for_each(|(z, p)| *z *= p);
        self.fft.inverse_transposed(values);
    }

    /// One Strang step.
    pub fn step(&mut self, field: &mut CartesianField, dt: f64) -> Result<()> {
        self.evolve(field, dt, 1)
    }

    /// `steps` Strang steps with the adjacent half nonlinear substeps fused.
    pub fn evolve(&mut self, field: &mut CartesianField, dt: f64, steps: usize) -> Result<()> {
        self.check(field, dt)?;
        if steps == 0 {
            return Ok(());
        }
        let values = &mut field.values;
        Self::nonlinear(values, 0.5 * dt);
        for s in 0..steps {
            self.linear(values, dt);
            Self::nonlinear(values, if s + 1 == steps { 0.5 * dt } else { dt });
        }
        field.time += dt * steps as f64;
        field.ensure_finite()
    }

    /// Unnormalized spectrum of the field in standard layout.
    pub fn spectrum(&mut self, field: &CartesianField) -> Vec<Complex64> {
        let mut s = field.values.clone();
        self.fft.forward(&mut s);
        s
    }

    pub(crate) fn inverse_spectrum(&mut self, spec: &mut [Complex64]) {
        self.fft.inverse(spec);
    }

    pub(crate) fn wavenumbers(&self) -> (&[f64], &[f64]) {
        (&self.k, &self.k_odd)
    }

    /// Mass, energy and momentum with spectral derivatives.
    pub fn report(&mut self, field: &CartesianField) -> Result<FunctionalReport> {
        field.ensure_finite()?;
        let n = self.geometry.n;
        let area = field.cell_area();
        let mut spec = std::mem::take(&mut self.work);
        spec.copy_from_slice(&field.values);
        self.fft.forward(&mut spec);
        // Parseval: Σ_j |f_j|² = Σ_k |f̂_k|² / n².
        let norm = area / (n * n) as f64;
        let (mut grad, mut px, mut py) = (0.0, 0.0, 0.0);
        for iy in 0..n {
            for ix in 0..n {
                let w = spec[iy * n + ix].norm_sqr();
                grad += (self.k[ix].powi(2) + self.k[iy].powi(2)) * w;
                px += self.k_odd[ix] * w;
                py += self.k_odd[iy] * w;
            }
        }
        self.work = spec;
        let (mut mass, mut l4, mut l6) = (0.0, 0.0, 0.0);
        for z in &field.values {
            let s = z.norm_sqr();
            mass += s;
            l4 += s * s;
            l6 += s * s * s;
        }
        Ok(FunctionalReport::from_norms(
            mass * area,
            grad * norm,
            l4 * area,
            l6 * area,
            [2.0 * px * norm, 2.0 * py * norm],
        ))
    }

    /// `φ(x − shift)` by a spectral phase ramp, exact for band-limited fields.
    pub fn translate(&mut self, field: &mut CartesianField, shift: [f64; 2]) {
        let n = self.geometry.n;
        self.fft.forward(&mut field.values);
        for iy in 0..n {
            for ix in 0..n {
                let phase = -(self.k_odd[ix] * shift[0] + self.k_odd[iy] * shift[1]);
                field.values[iy * n + ix] *= Complex64::from_polar(1.0, phase);
            }
        }
        self.fft.inverse(&mut field.values);
    }
}

/// One Strang step of a copy of `field`.
pub fn step_strang(field: &CartesianField, dt: f64) -> Result<CartesianField> {
    let mut out = field.clone();
    Propagator::new(field.geometry).step(&mut out, dt)?;
    Ok(out)
}

/// `(mass, energy, momentum)` of the field.
pub fn conserved_report(field: &CartesianField) -> Result<(f64, f64, [f64; 2])> {
    let r = Propagator::new(field.geometry).report(field)?;
    Ok((r.mass, r.energy, r.momentum))
}

impl Measurable for CartesianField {
    fn report(&self) -> Result<FunctionalReport> {
        Propagator::new(self.geometry).report(self)
    }
}

/// Galilean boost of a solution at time `t`:
/// `φ(x − vt)·e^{i(½v·x − ¼|v|²t)}`.
pub fn boost(prop: &mut Propagator, field: &CartesianField, v: [f64; 2], t: f64) -> CartesianField {
    let mut out = field.clone();
    prop.translate(&mut out, [v[0] * t, v[1] * t]);
    let xs = field.geometry.coords();
    let n = field.n();
    let v2 = v[0] * v[0] + v[1] * v[1];
    for iy in 0..n {
        for ix in 0..n {
            let phase = 0.5 * (v[0] * xs[ix] + v[1] * xs[iy]) - 0.25 * v2 * t;
            out.values[iy * n + ix] *= Complex64::from_polar(1.0, phase);
        }
    }
    out
}
