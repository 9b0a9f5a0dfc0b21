use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{embed_soliton, CartesianField, Propagator};
use crate::error::{Error, Result};
use crate::ground_state::GroundStateRecord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitalDistance {
    pub distance: f64,
    pub theta: f64,
    pub shift: [f64; 2],
    /// `‖P_ω‖_{H¹}` on the grid, for relative sizes.
    pub reference_norm: f64,
}

/// Fourier coefficients `a_k` of the correlation `C(y) = Σ a_k e^{ik·y}`
/// with first and second derivatives.
struct Correlation<'a> {
    n: usize,
    a: &'a [Complex64],
    k: &'a [f64],
}

impl Correlation<'_> {
    /// `(C, ∂C/∂y, ∂²C/∂y²)` at `y`.
    fn eval(&self, y: [f64; 2]) -> (Complex64, [Complex64; 2], [Complex64; 3]) {
        let n = self.n;
        let ex: Vec<Complex64> = self
            .k
            .iter()
            .map(|&k| Complex64::from_polar(1.0, k * y[0]))
            .collect();
        let ey: Vec<Complex64> = self
            .k
            .iter()
            .map(|&k| Complex64::from_polar(1.0, k * y[1]))
            .collect();
        let i = Complex64::i();
        let (mut c, mut cx, mut cy, mut cxx, mut cxy, mut cyy) = Default::default();
        for iy in 0..n {
            let (mut r0, mut r1, mut r2) = (
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
            );
            for ix in 0..n {
                let t = self.a[iy * n + ix] * ex[ix];
                let kx = self.k[ix];
                r0 += t;
                r1 += t * kx;
                r2 += t * (kx * kx);
            }
            let e = ey[iy];
            let ky = self.k[iy];
            c += r0 * e;
            cx += i * r1 * e;
            cy += i * r0 * e * ky;
            cxx -= r2 * e;
            cxy -= r1 * e * ky;
            cyy -= r0 * e * (ky * ky);
        }
        (c, [cx, cy], [cxx, cxy, cyy])
    }
}

fn wrap(y: f64, l: f64) -> f64 {
    y - l * (y / l).round()
}

/// `inf_{s,y} ‖φ − e^{is}P_ω(· − y)‖_{H¹}` with the H¹ weight `1 + |k|²`.
/// Grid shifts are scanned by one cross-correlation FFT; the best one is
/// refined by Newton iterations on the exact trigonometric correlation.
pub fn orbital_distance(
    field: &CartesianField,
    rec: &GroundStateRecord,
) -> Result<OrbitalDistance> {
    let geometry = field.geometry;
    let reference = embed_soliton(rec, [0.0, 0.0], [0.0, 0.0], 0.0, geometry)?;
    let mut prop = Propagator::new(geometry);
    orbital_distance_with(&mut prop, field, &reference)
}

pub(crate) fn orbital_distance_with(
    prop: &mut Propagator,
    field: &CartesianField,
    reference: &CartesianField,
) -> Result<OrbitalDistance> {
    if field.geometry != reference.geometry || prop.geometry() != field.geometry {
        return Err(Error::Structural(
            "orbital distance needs fields on one grid".into(),
        ));
    }
    field.ensure_finite()?;
    let geometry = field.geometry;
    let n = geometry.n;
    let l = geometry.box_length;
    let phi = prop.spectrum(field);
    let p = prop.spectrum(reference);
    let (k, k_odd) = prop.wavenumbers();
    let (k, k_odd) = (k.to_vec(), k_odd.to_vec());
    let weight = |i: usize| 1.0 + k[i % n].powi(2) + k[i / n].powi(2);
    let norm = field.cell_area() / (n * n) as f64;
    let h1 = |s: &[Complex64]| {
        s.iter()
            .enumerate()
            .map(|(i, z)| weight(i) * z.norm_sqr())
            .sum::<f64>()
            * norm
    };
    let reference_norm = h1(&p).sqrt();

    // ⟨φ, P(· − y)⟩_{H¹} = Σ_k w_k φ̂_k conj(P̂_k) e^{ik·y}·(area/n²).
    let a: Vec<Complex64> = (0..n * n)
        .map(|i| phi[i] * p[i].conj() * (weight(i) * norm))
        .collect();
    let mut corr = a.clone();
    prop.inverse_spectrum(&mut corr);
    let best = (0..n * n)
        .max_by(|&i, &j| corr[i].norm_sqr().total_cmp(&corr[j].norm_sqr()))
        .expect("non-empty grid");
    let dx = geometry.spacing();
    let mut y = [
        wrap((best % n) as f64 * dx, l),
        wrap((best / n) as f64 * dx, l),
    ];

    let c = Correlation {
        n,
        a: &a,
        k: &k_odd,
    };
    for _ in 0..4 {
        let (s, g, h) = c.eval(y);
        // F = |C|²; gradient and Hessian from the derivatives of C.
        let fx = 2.0 * (s.conj() * g[0]).re;
        let fy = 2.0 * (s.conj() * g[1]).re;
        let fxx = 2.0 * (g[0].norm_sqr() + (s.conj() * h[0]).re);
        let fxy = 2.0 * ((g[1].conj() * g[0]).re + (s.conj() * h[1]).re);
        let fyy = 2.0 * (g[1].norm_sqr() + (s.conj() * h[2]).re);
        let det = fxx * fyy - fxy * fxy;
        if !(det > 0.0 && fxx < 0.0) {
            break;
        }
        let step = [(fyy * fx - fxy * fy) / det, (fxx * fy - fxy * fx) / det];
        if step[0].abs() > dx || step[1].abs() > dx {
            break;
        }
        y = [y[0] - step[0], y[1] - step[1]];
        if step[0].abs().max(step[1].abs()) < 1e-13 * l {
            break;
        }
    }
    let theta = c.eval(y).0.arg();

    // Residual evaluated directly rather than by the cancelling expansion.
    let mut diff = p;
    for iy in 0..n {
        for ix in 0..n {
            let i = iy * n + ix;
            let ph = Complex64::from_polar(1.0, theta - (k_odd[ix] * y[0] + k_odd[iy] * y[1]));
            diff[i] = phi[i] - diff[i] * ph;
        }
    }
    Ok(OrbitalDistance {
        distance: h1(&diff).sqrt(),
        theta,
        shift: y,
        reference_norm,
    })
}
