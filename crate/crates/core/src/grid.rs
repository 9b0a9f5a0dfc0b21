//! Uniform radial grids, area-weighted quadrature and finite differences.
//!
//! Every integral over the plane of a radial integrand reduces to
//! `∫₀^R f(r)·2πr dr`, evaluated here with composite Simpson.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Uniform grid `0 = r_0 < r_1 < … < r_{n-1} = r_max` with an odd node count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "GridSpec", try_from = "GridSpec")]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
    spacing: f64,
    nodes: Vec<f64>,
}

/// Serialized form of a grid; the nodes are rebuilt on load.
#[derive(Serialize, Deserialize)]
struct GridSpec {
    r_max: f64,
    n: usize,
}

impl From<RadialGrid> for GridSpec {
    fn from(g: RadialGrid) -> Self {
        Self {
            r_max: g.r_max,
            n: g.n,
        }
    }
}

impl TryFrom<GridSpec> for RadialGrid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        RadialGrid::new(s.r_max, s.n)
    }
}

impl RadialGrid {
    pub const MIN_NODES: usize = 9;

    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::Structural(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        if n < Self::MIN_NODES || n.is_multiple_of(2) {
            return Err(Error::Structural(format!(
                "radial grid needs an odd node count >= {}, got {n}",
                Self::MIN_NODES
            )));
        }
        let spacing = r_max / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * spacing).collect();
        nodes[n - 1] = r_max;
        Ok(Self {
            r_max,
            n,
            spacing,
            nodes,
        })
    }

    /// Grid with spacing close to (never above) `target_spacing`.
    pub fn with_spacing(r_max: f64, target_spacing: f64) -> Result<Self> {
        if !(target_spacing.is_finite() && target_spacing > 0.0) {
            return Err(Error::Structural(format!(
                "spacing must be positive, got {target_spacing}"
            )));
        }
        let mut n = (r_max / target_spacing).ceil() as usize + 1;
        if n.is_multiple_of(2) {
            n += 1;
        }
        Self::new(r_max, n.max(Self::MIN_NODES))
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Samples of a radial function on a [`RadialGrid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
    /// Fitted far-field exponential rate; 0 when no fit was made.
    pub decay_rate: f64,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Structural(format!(
                "profile has {} samples for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        ensure_finite(&values, "profile")?;
        Ok(Self {
            grid,
            values,
            decay_rate: 0.0,
        })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `c·u`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            decay_rate: self.decay_rate,
        }
    }

    /// `μ·u(λ·)`, represented exactly by moving the nodes to `r_i/λ`.
    pub fn rescaled(&self, lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Structural(format!(
                "dilation must be positive, got {lambda}"
            )));
        }
        let grid = RadialGrid::new(self.grid.r_max() / lambda, self.grid.len())?;
        Ok(Self {
            grid,
            values: self.values.iter().map(|v| mu * v).collect(),
            decay_rate: self.decay_rate * lambda,
        })
    }

    /// Four-point Lagrange interpolation, using even reflection at the
    /// origin. Returns `None` beyond `r_max`.
    pub fn interpolate(&self, r: f64) -> Option<f64> {
        let r = r.abs();
        let h = self.grid.spacing();
        let n = self.grid.len();
        if r > self.grid.r_max() {
            return None;
        }
        let pos = r / h;
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        // Stencil i-1 .. i+2, shifted inward at the far end.
        let base = if i + 2 >= n {
            n as isize - 4
        } else {
            i as isize - 1
        };
        let sample = |j: isize| -> f64 { self.values[j.unsigned_abs()] };
        let t = t + (i as isize - base) as f64;
        let (x0, x1, x2, x3) = (0.0, 1.0, 2.0, 3.0);
        let l0 = (t - x1) * (t - x2) * (t - x3) / ((x0 - x1) * (x0 - x2) * (x0 - x3));
        let l1 = (t - x0) * (t - x2) * (t - x3) / ((x1 - x0) * (x1 - x2) * (x1 - x3));
        let l2 = (t - x0) * (t - x1) * (t - x3) / ((x2 - x0) * (x2 - x1) * (x2 - x3));
        let l3 = (t - x0) * (t - x1) * (t - x2) / ((x3 - x0) * (x3 - x1) * (x3 - x2));
        Some(
            l0 * sample(base)
                + l1 * sample(base + 1)
                + l2 * sample(base + 2)
                + l3 * sample(base + 3),
        )
    }
}

/// Composite Simpson approximation of `∫₀^{r_max} f(r)·2πr dr`.
pub fn integrate_radial(f: &[f64], grid: &RadialGrid) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::Structural(format!(
            "integrand has {} samples for a grid of {}",
            f.len(),
            grid.len()
        )));
    }
    ensure_finite(f, "integrand")?;
    let n = grid.len();
    let nodes = grid.nodes();
    let mut acc = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * f[i] * nodes[i];
    }
    Ok(acc * 2.0 * PI * grid.spacing() / 3.0)
}

/// Fourth-order finite-difference `du/dr`.
///
/// Central stencils inside, one-sided stencils on the two outermost nodes at
/// each end. The value at `r = 0` is pinned to zero: a smooth radial function
/// has no radial slope at the origin.
pub fn differentiate(u: &RadialProfile) -> Result<Vec<f64>> {
    derivative_samples(&u.values, u.grid.spacing()).map(|mut d| {
        d[0] = 0.0;
        d
    })
}

pub(crate) fn derivative_samples(v: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = v.len();
    if n < 5 {
        return Err(Error::Structural(format!(
            "differentiation needs at least 5 samples, got {n}"
        )));
    }
    let c = 1.0 / (12.0 * h);
    let mut d = vec![0.0; n];
    d[0] = c * (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]);
    d[1] = c * (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]);
    for i in 2..n - 2 {
        d[i] = c * (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]);
    }
    let m = n - 1;
    d[m - 1] = -c * (-3.0 * v[m] - 10.0 * v[m - 1] + 18.0 * v[m - 2] - 6.0 * v[m - 3] + v[m - 4]);
    d[m] =
        -c * (-25.0 * v[m] + 48.0 * v[m - 1] - 36.0 * v[m - 2] + 16.0 * v[m - 3] - 3.0 * v[m - 4]);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_even_or_tiny_counts() {
        assert!(RadialGrid::new(1.0, 10).is_err());
        assert!(RadialGrid::new(1.0, 7).is_err());
        assert!(RadialGrid::new(-1.0, 11).is_err());
        let g = RadialGrid::new(2.0, 9).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(*g.nodes().last().unwrap(), 2.0);
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - g.spacing()).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_area() {
        let g = RadialGrid::new(12.0, 4097).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
        assert!((integrate_radial(&f, &g).unwrap() - PI).abs() < 1e-10);
    }

    #[test]
    fn disk_area() {
        let g = RadialGrid::new(3.5, 101).unwrap();
        let f = vec![1.0; g.len()];
        assert!((integrate_radial(&f, &g).unwrap() - PI * 3.5 * 3.5).abs() < 1e-10);
    }

    #[test]
    fn exponential_moment() {
        let g = RadialGrid::new(60.0, 8193).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| (-r).exp()).collect();
        assert!((integrate_radial(&f, &g).unwrap() - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn quadrature_errors() {
        let g = RadialGrid::new(1.0, 11).unwrap();
        assert!(matches!(
            integrate_radial(&[1.0; 5], &g),
            Err(Error::Structural(_))
        ));
        let mut f = vec![1.0; 11];
        f[3] = f64::NAN;
        assert!(matches!(integrate_radial(&f, &g), Err(Error::Numeric(_))));
    }

    #[test]
    fn quadrature_is_fourth_order() {
        let f = |r: f64| (-r * r / 4.0).exp() * r.cos();
        let exact = {
            let g = RadialGrid::new(10.0, 40001).unwrap();
            let s: Vec<f64> = g.nodes().iter().map(|&r| f(r)).collect();
            integrate_radial(&s, &g).unwrap()
        };
        let err = |n: usize| {
            let g = RadialGrid::new(10.0, n).unwrap();
            let s: Vec<f64> = g.nodes().iter().map(|&r| f(r)).collect();
            (integrate_radial(&s, &g).unwrap() - exact).abs()
        };
        let ratio = err(101) / err(201);
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn derivative_of_square_is_exact() {
        let g = RadialGrid::new(4.0, 1025).unwrap();
        let u = RadialProfile::from_fn(g.clone(), |r| r * r).unwrap();
        let d = differentiate(&u).unwrap();
        for (r, dr) in g.nodes().iter().zip(&d) {
            assert!((dr - 2.0 * r).abs() <= 1e-10);
        }
    }

    #[test]
    fn derivative_of_gaussian() {
        let g = RadialGrid::new(8.0, 2049).unwrap();
        let u = RadialProfile::from_fn(g.clone(), |r| (-r * r / 2.0).exp()).unwrap();
        let d = differentiate(&u).unwrap();
        for (r, dr) in g.nodes().iter().zip(&d) {
            assert!((dr + r * (-r * r / 2.0).exp()).abs() <= 1e-8);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = RadialGrid::new(1.0, 9).unwrap();
        let u = RadialProfile::new(g, vec![3.25; 9]).unwrap();
        assert!(differentiate(&u).unwrap().iter().all(|&d| d.abs() < 1e-12));
        assert!(derivative_samples(&[1.0; 4], 0.1).is_err());
    }

    #[test]
    fn integration_by_parts_identity() {
        // ∫ u'v r + ∫ u v' r + ∫ u v = [r u v] → 0 for decaying u, v.
        let g = RadialGrid::new(20.0, 4001).unwrap();
        let u = RadialProfile::from_fn(g.clone(), |r| (-r * r / 3.0).exp()).unwrap();
        let v = RadialProfile::from_fn(g.clone(), |r| (1.0 + r) * (-r).exp()).unwrap();
        let du = differentiate(&u).unwrap();
        let dv = differentiate(&v).unwrap();
        let a: Vec<f64> = du.iter().zip(&v.values).map(|(a, b)| a * b).collect();
        let b: Vec<f64> = u.values.iter().zip(&dv).map(|(a, b)| a * b).collect();
        // ∫ u v 2π dr = ∫ (u v / r) 2πr dr; evaluate directly with Simpson on [0, R].
        let h = g.spacing();
        let uv: Vec<f64> = u.values.iter().zip(&v.values).map(|(a, b)| a * b).collect();
        let mut plain = uv[0] + uv[g.len() - 1];
        for (i, x) in uv.iter().enumerate().take(g.len() - 1).skip(1) {
            plain += if i % 2 == 1 { 4.0 } else { 2.0 } * x;
        }
        plain *= 2.0 * PI * h / 3.0;
        let total = integrate_radial(&a, &g).unwrap() + integrate_radial(&b, &g).unwrap() + plain;
        assert!(total.abs() <= 1e-6, "{total}");
    }

    #[test]
    fn interpolation_is_accurate() {
        let g = RadialGrid::new(10.0, 1001).unwrap();
        let u = RadialProfile::from_fn(g, |r| (-r * r / 4.0).exp()).unwrap();
        for &r in &[0.0, 0.003, 0.7321, 4.4444, 9.995, 10.0] {
            let exact: f64 = (-r * r / 4.0_f64).exp();
            assert!((u.interpolate(r).unwrap() - exact).abs() < 1e-9, "r={r}");
        }
        assert!(u.interpolate(10.5).is_none());
    }

    #[test]
    fn rescaling_moves_nodes() {
        let g = RadialGrid::new(10.0, 101).unwrap();
        let u = RadialProfile::from_fn(g, |r| (-r).exp()).unwrap();
        let v = u.rescaled(2.0, 3.0).unwrap();
        assert!((v.grid.r_max() - 5.0).abs() < 1e-15);
        assert!((v.interpolate(0.5).unwrap() - 3.0 * (-1.0_f64).exp()).abs() < 1e-6);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn quadrature_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, w in 0.3..3.0f64) {
            let g = RadialGrid::new(15.0, 301).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r / w).exp()).collect();
            let h: Vec<f64> = g.nodes().iter().map(|r| (r * w).cos() / (1.0 + r)).collect();
            let mix: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
            let lhs = integrate_radial(&mix, &g).unwrap();
            let rhs = a * integrate_radial(&f, &g).unwrap() + b * integrate_radial(&h, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
