//! Mass, energy, momentum and the algebraic identities satisfied by ground
//! states: the Pohozaev identity, the α-relations of the F_α minimizers and
//! the sharp Gagliardo–Nirenberg bound.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, DomainKind, Error, Result};
use crate::grid::{differentiate, integrate_radial, RadialProfile};
use crate::ground_state::GroundStateRecord;

/// Every functional evaluated for one function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub energy: f64,
    pub momentum: [f64; 2],
    pub grad_norm_sq: f64,
    pub l4_pow4: f64,
    pub l6_pow6: f64,
    pub beta: f64,
    pub pohozaev_residual: f64,
}

impl FunctionalReport {
    /// Assembles the derived fields from the raw norms.
    pub fn from_norms(
        mass: f64,
        grad_norm_sq: f64,
        l4_pow4: f64,
        l6_pow6: f64,
        momentum: [f64; 2],
    ) -> Self {
        let energy = 0.5 * grad_norm_sq - 0.25 * l4_pow4 + l6_pow6 / 6.0;
        let (beta, pohozaev_residual) = if grad_norm_sq > 0.0 {
            (
                l6_pow6 / grad_norm_sq,
                (grad_norm_sq + 2.0 / 3.0 * l6_pow6 - 0.5 * l4_pow4) / grad_norm_sq,
            )
        } else {
            (0.0, 0.0)
        };
        Self {
            mass,
            energy,
            momentum,
            grad_norm_sq,
            l4_pow4,
            l6_pow6,
            beta,
            pohozaev_residual,
        }
    }

    /// Minimizer index α = (2/3)·β.
    pub fn alpha(&self) -> f64 {
        2.0 / 3.0 * self.beta
    }
}

/// Anything the functionals can be measured on.
pub trait Measurable {
    fn report(&self) -> Result<FunctionalReport>;
}

impl Measurable for RadialProfile {
    fn report(&self) -> Result<FunctionalReport> {
        report(self)
    }
}

/// Full functional report for a real radial profile; the momentum of a real
/// function vanishes identically.
pub fn report(u: &RadialProfile) -> Result<FunctionalReport> {
    ensure_finite(&u.values, "profile")?;
    let du = differentiate(u)?;
    let grid = &u.grid;
    let sq: Vec<f64> = u.values.iter().map(|v| v * v).collect();
    let mass = integrate_radial(&sq, grid)?;
    let grad: Vec<f64> = du.iter().map(|d| d * d).collect();
    let grad_norm_sq = integrate_radial(&grad, grid)?;
    let p4: Vec<f64> = sq.iter().map(|s| s * s).collect();
    let l4_pow4 = integrate_radial(&p4, grid)?;
    let p6: Vec<f64> = sq.iter().map(|s| s * s * s).collect();
    let l6_pow6 = integrate_radial(&p6, grid)?;
    Ok(FunctionalReport::from_norms(
        mass,
        grad_norm_sq,
        l4_pow4,
        l6_pow6,
        [0.0, 0.0],
    ))
}

/// F_α assembled from the norms in `r`.
pub fn f_alpha_from_report(r: &FunctionalReport, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::domain(
            DomainKind::InvalidParameter,
            format!("alpha must be positive, got {alpha}"),
        ));
    }
    if r.l4_pow4 <= 0.0 {
        return Err(Error::domain(
            DomainKind::ZeroFunction,
            "F_alpha undefined: L4 norm vanishes",
        ));
    }
    let k = 1.0 + alpha;
    // ‖∇u‖^{2/(1+α)} ‖u‖^{(2+α)/(1+α)} ‖u‖_6^{3α/(1+α)}, in terms of squared norms.
    let log_num = r.grad_norm_sq.ln() / k
        + r.mass.ln() * (2.0 + alpha) / (2.0 * k)
        + r.l6_pow6.ln() * alpha / (2.0 * k);
    Ok((log_num - r.l4_pow4.ln()).exp())
}

pub fn f_alpha(u: &RadialProfile, alpha: f64) -> Result<f64> {
    f_alpha_from_report(&report(u)?, alpha)
}

/// Closed form of C_α in terms of the minimizer's L² and gradient norms.
pub fn c_alpha_closed_form(alpha: f64, mass: f64, grad_norm_sq: f64) -> f64 {
    let k = 1.0 + alpha;
    let prefactor = (1.5 * alpha).powf(alpha / (2.0 * k)) / (2.0 * k);
    prefactor * mass.powf((2.0 + alpha) / (2.0 * k)) * grad_norm_sq.powf(-alpha / (2.0 * k))
}

/// `(‖∇u‖² + ⅔‖u‖₆⁶ − ½‖u‖₄⁴) / ‖∇u‖²`.
pub fn pohozaev_residual(u: &RadialProfile) -> Result<f64> {
    let r = report(u)?;
    if r.grad_norm_sq <= 0.0 {
        return Err(Error::domain(
            DomainKind::ZeroFunction,
            "gradient norm vanishes",
        ));
    }
    Ok(r.pohozaev_residual)
}

/// Slack in the sharp Gagliardo–Nirenberg inequality,
/// `2(M(u)/M(q))‖∇u‖² − ‖u‖₄⁴`; nonnegative up to discretization error.
pub fn gn_check(u: &RadialProfile, townes_mass: f64) -> Result<f64> {
    let r = report(u)?;
    gn_slack(&r, townes_mass)
}

pub fn gn_slack(r: &FunctionalReport, townes_mass: f64) -> Result<f64> {
    if r.mass <= 0.0 {
        return Err(Error::domain(DomainKind::ZeroFunction, "function vanishes"));
    }
    if !(townes_mass > 0.0) {
        return Err(Error::domain(
            DomainKind::InvalidParameter,
            "townes mass must be positive",
        ));
    }
    Ok(2.0 * (r.mass / townes_mass) * r.grad_norm_sq - r.l4_pow4)
}

/// Relative residuals of `‖Q‖₄⁴ = 2(1+α)‖∇Q‖²` and `ω = (2+α)/2·‖∇Q‖²/‖Q‖²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaResiduals {
    pub l4_relation: f64,
    pub omega_relation: f64,
}

pub fn alpha_relations(r: &FunctionalReport, omega: f64) -> AlphaResiduals {
    let alpha = r.alpha();
    let l4_pred = 2.0 * (1.0 + alpha) * r.grad_norm_sq;
    let omega_pred = (2.0 + alpha) / 2.0 * r.grad_norm_sq / r.mass;
    AlphaResiduals {
        l4_relation: ((r.l4_pow4 - l4_pred) / r.l4_pow4).abs(),
        omega_relation: ((omega - omega_pred) / omega).abs(),
    }
}

/// [`alpha_relations`] for a solved ground state at its own frequency.
pub fn alpha_relations_check(rec: &GroundStateRecord) -> AlphaResiduals {
    alpha_relations(&rec.norms, rec.omega.value())
}

/// Pointwise-interpolation bound `∫u⁴ ≤ ε∫u⁶ + ε⁻¹∫u²`; returns the slack.
pub fn interpolation_slack(r: &FunctionalReport, eps: f64) -> f64 {
    eps * r.l6_pow6 + r.mass / eps - r.l4_pow4
}

/// Energy lower bound `E ≥ −M/(4ε)`; returns `E + M/(4ε)`.
pub fn energy_lower_bound_slack(r: &FunctionalReport, eps: f64) -> f64 {
    r.energy + r.mass / (4.0 * eps)
}
