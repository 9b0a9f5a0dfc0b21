//! Ground states of `−Δu + ωu − u³ + u⁵ = 0` by shooting on the center
//! amplitude, the cubic ground state of `−Δq + q − q³ = 0`, and the
//! one-dimensional problem whose solution is known in closed form.
//!
//! Radially the equation reads `u″ + (d−1)u′/r = f(u)` with
//! `f(u) = ωu − u³ + u⁵ = u(u² − s₊)(u² − s₋)`. For ω near 3/16 the ground
//! state sits exponentially close to the plateau root `a₊ = √s₊` over a large
//! core, so the shooting parameter is the gap `δ = a₊ − u(0)` and the
//! trajectory is integrated in the deviation `w = a₊ − u` until it leaves the
//! plateau. That keeps full relative precision in δ even when δ ~ 1e-50.

use serde::{Deserialize, Serialize};

use crate::error::{DomainKind, Error, Result};
use crate::functionals::{report, FunctionalReport};
use crate::grid::{RadialGrid, RadialProfile};
use crate::ode::{State, Stepper};

/// Upper end of the existence window for cubic-quintic ground states.
pub const OMEGA_CRITICAL: f64 = 3.0 / 16.0;
/// Scans never leave `[OMEGA_SCAN_MIN, OMEGA_SCAN_MAX]`; both window ends are
/// singular limits of the branch.
pub const OMEGA_SCAN_MIN: f64 = 0.005;
pub const OMEGA_SCAN_MAX: f64 = 0.18;

/// A soliton frequency.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frequency(f64);

impl Frequency {
    /// Frequency inside the cubic-quintic window `0 < ω < 3/16`.
    pub fn new(omega: f64) -> Result<Self> {
        if omega.is_finite() && omega > 0.0 && omega < OMEGA_CRITICAL {
            Ok(Self(omega))
        } else {
            Err(Error::domain(
                DomainKind::FrequencyOutOfWindow,
                format!("omega = {omega} lies outside (0, 3/16)"),
            ))
        }
    }

    /// The unit frequency of the cubic ground state.
    pub fn unit() -> Self {
        Self(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundStateKind {
    CubicQuintic,
    Cubic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    /// Relative local error per Runge–Kutta step.
    pub ode_tolerance: f64,
    /// Required final bracket width on the center amplitude.
    pub bisection_tolerance: f64,
    pub r_max: f64,
    pub n: usize,
    pub max_bisections: usize,
}

impl Default for ShootingConfig {
    /// Grid wide enough for every frequency of a default scan.
    fn default() -> Self {
        Self::for_branch(OMEGA_SCAN_MIN, OMEGA_SCAN_MAX)
    }
}

impl ShootingConfig {
    pub const DEFAULT_SPACING: f64 = 0.02;

    fn with_grid(r_max: f64, spacing: f64) -> Self {
        let mut n = (r_max / spacing).ceil() as usize + 1;
        if n % 2 == 0 {
            n += 1;
        }
        Self {
            ode_tolerance: 1e-12,
            bisection_tolerance: 1e-12,
            r_max,
            n,
            max_bisections: 200,
        }
    }

    /// Truncation radius for a single frequency: forty decay lengths past the
    /// estimated core radius.
    pub fn for_omega(omega: f64) -> Self {
        Self::with_grid(suggested_r_max(omega), Self::DEFAULT_SPACING)
    }

    /// One grid shared by every frequency in `[omega_min, omega_max]`.
    pub fn for_branch(omega_min: f64, omega_max: f64) -> Self {
        let r_max = suggested_r_max(omega_min).max(suggested_r_max(omega_max));
        Self::with_grid(r_max, Self::DEFAULT_SPACING)
    }

    /// Grid for the cubic ground state (decay rate 1).
    pub fn for_cubic() -> Self {
        Self::with_grid(40.0, 0.01)
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::domain(
                DomainKind::InvalidParameter,
                what.to_string(),
            ))
        };
        if !(self.ode_tolerance > 0.0 && self.ode_tolerance.is_finite()) {
            return bad("ode_tolerance must be positive");
        }
        if !(self.bisection_tolerance > 0.0 && self.bisection_tolerance.is_finite()) {
            return bad("bisection_tolerance must be positive");
        }
        if self.max_bisections < 40 {
            return bad("max_bisections must be at least 40");
        }
        self.grid().map(|_| ())
    }

    /// Same tolerances on a grid with half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n - 1,
            ..self.clone()
        }
    }
}

/// `40/√ω` plus the core radius of the flat-top regime, which grows like
/// `1/(3/16 − ω)`.
pub fn suggested_r_max(omega: f64) -> f64 {
    40.0 / omega.sqrt() + 0.25 / (OMEGA_CRITICAL - omega).max(1e-6)
}

/// Far-field fit `u ≈ A·e^{−k r}·r^{−p}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub amplitude: f64,
    pub rate: f64,
    /// Prefactor exponent used for the fill (½ in 2D, 0 in 1D).
    pub prefactor_exponent: f64,
    /// Prefactor exponent when it is fitted as a free parameter.
    pub free_prefactor_exponent: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    /// First node replaced by the fitted form.
    pub start_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateRecord {
    pub profile: RadialProfile,
    pub omega: Frequency,
    pub center_value: f64,
    pub kind: GroundStateKind,
    /// `(2/3)·β(profile)`.
    pub alpha: f64,
    pub norms: FunctionalReport,
    pub solver_iters: usize,
    pub bracket_width: f64,
    pub tail: TailFit,
}

impl GroundStateRecord {
    pub fn mass(&self) -> f64 {
        self.norms.mass
    }

    pub fn energy(&self) -> f64 {
        self.norms.energy
    }
}

// ---------------------------------------------------------------------------
// Nonlinearities

#[derive(Clone, Copy, Debug)]
enum Model {
    CubicQuintic {
        omega: f64,
        s_minus: f64,
        a_plus: f64,
    },
    Cubic,
}

impl Model {
    fn cubic_quintic(omega: f64) -> Self {
        let disc = (1.0 - 4.0 * omega).sqrt();
        let s_plus = 0.5 * (1.0 + disc);
        // s₊s₋ = ω, written to avoid cancellation for small ω.
        let s_minus = omega / s_plus;
        Model::CubicQuintic {
            omega,
            s_minus,
            a_plus: s_plus.sqrt(),
        }
    }

    fn force(&self, u: f64) -> f64 {
        match *self {
            Model::CubicQuintic { omega, .. } => u * (omega - u * u + u.powi(4)),
            Model::Cubic => u - u * u * u,
        }
    }

    fn force_slope(&self, u: f64) -> f64 {
        match *self {
            Model::CubicQuintic { omega, .. } => omega - 3.0 * u * u + 5.0 * u.powi(4),
            Model::Cubic => 1.0 - 3.0 * u * u,
        }
    }

    /// `−f(a₊ − w)`, exact in relative terms for small `w`.
    fn plateau_force(&self, w: f64) -> f64 {
        match *self {
            Model::CubicQuintic {
                s_minus, a_plus, ..
            } => {
                let u = a_plus - w;
                u * w * (2.0 * a_plus - w) * (u * u - s_minus)
            }
            Model::Cubic => unreachable!("cubic shooting runs in amplitude form"),
        }
    }

    fn decay_rate(&self) -> f64 {
        match *self {
            Model::CubicQuintic { omega, .. } => omega.sqrt(),
            Model::Cubic => 1.0,
        }
    }

    fn a_plus(&self) -> f64 {
        match *self {
            Model::CubicQuintic { a_plus, .. } => a_plus,
            Model::Cubic => 1.0,
        }
    }
}

/// Classification of a single outward shot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Trajectory crossed zero: amplitude too large.
    Overshoot,
    /// Trajectory turned upward before decaying: amplitude too small.
    Undershoot,
}

/// A single outward integration sampled at grid nodes.
#[derive(Clone, Debug)]
struct Shot {
    values: Vec<f64>,
    outcome: Outcome,
}

/// Shooting parameter: the plateau gap `δ` for the cubic-quintic model, the
/// center amplitude itself for the cubic one.
#[derive(Clone, Copy, Debug)]
enum Param {
    Gap(f64),
    Amplitude(f64),
}

struct Shooter<'a> {
    model: Model,
    dim: usize,
    grid: &'a RadialGrid,
    tol: f64,
}

impl Shooter<'_> {
    fn friction(&self, r: f64) -> f64 {
        (self.dim as f64 - 1.0) / r
    }

    fn shoot(&self, param: Param) -> Result<Shot> {
        let nodes = self.grid.nodes();
        let h = self.grid.spacing();
        let n = nodes.len();
        let d = self.dim as f64;
        let a_plus = self.model.a_plus();

        let (a, force_at_a) = match param {
            Param::Gap(delta) => {
                let a = a_plus - delta;
                (a, -self.model.plateau_force(delta))
            }
            Param::Amplitude(a) => (a, self.model.force(a)),
        };
        // Series start: u = a + c r² + e r⁴.
        let c = force_at_a / (2.0 * d);
        let e = self.model.force_slope(a) * c / (4.0 * (2.0 + d));
        let r0 = 1e-2 * h;

        let mut values = Vec::with_capacity(n);
        values.push(a);

        let mut stepper = Stepper::new(self.tol, 1e-300);
        // `plateau` tracks whether the state holds (w, w') or (u, u').
        let mut plateau = matches!(param, Param::Gap(_));
        let mut y: State = if plateau {
            let delta = match param {
                Param::Gap(g) => g,
                Param::Amplitude(_) => unreachable!(),
            };
            [
                delta - c * r0 * r0 - e * r0.powi(4),
                -(2.0 * c * r0 + 4.0 * e * r0.powi(3)),
            ]
        } else {
            [
                a + c * r0 * r0 + e * r0.powi(4),
                2.0 * c * r0 + 4.0 * e * r0.powi(3),
            ]
        };

        let model = self.model;
        let plateau_rhs = |r: f64, s: &State| -> State {
            [s[1], -self.friction(r) * s[1] + model.plateau_force(s[0])]
        };
        let amp_rhs =
            |r: f64, s: &State| -> State { [s[1], -self.friction(r) * s[1] + model.force(s[0])] };

        let mut r_prev = r0;
        let mut outcome = None;
        for &r_next in &nodes[1..] {
            let mut t = r_prev;
            if plateau {
                // Leave the deviation form once w reaches a₊/2, or on an early
                // turn (w' < 0).
                let stopped = stepper.advance(&plateau_rhs, t, r_next, &mut y, |s| {
                    s[0] >= 0.5 * a_plus || s[1] < 0.0
                })?;
                if let Some(t_stop) = stopped {
                    if y[0] < 0.5 * a_plus {
                        outcome = Some(Outcome::Undershoot);
                        break;
                    }
                    plateau = false;
                    y = [a_plus - y[0], -y[1]];
                    if y[0] < 0.0 {
                        outcome = Some(Outcome::Overshoot);
                        break;
                    }
                    t = t_stop;
                }
            }
            if !plateau {
                let stopped =
                    stepper.advance(&amp_rhs, t, r_next, &mut y, |s| s[0] < 0.0 || s[1] > 0.0)?;
                if stopped.is_some() {
                    outcome = Some(if y[0] < 0.0 {
                        Outcome::Overshoot
                    } else {
                        Outcome::Undershoot
                    });
                    break;
                }
            }
            values.push(if plateau { a_plus - y[0] } else { y[0] });
            r_prev = r_next;
        }

        let outcome = match outcome {
            Some(o) => o,
            None => {
                // Reached r_max undecided.
                let (u, du) = if plateau {
                    (a_plus - y[0], -y[1])
                } else {
                    (y[0], y[1])
                };
                if plateau || u > 0.5 * a.abs() {
                    Outcome::Overshoot
                } else {
                    let k = self.model.decay_rate();
                    if u + du / k > 0.0 {
                        Outcome::Undershoot
                    } else {
                        Outcome::Overshoot
                    }
                }
            }
        };
        Ok(Shot { values, outcome })
    }
}

/// Result of bisection: the two bracketing shots and bookkeeping.
struct Bracketed {
    center: f64,
    over: Shot,
    under: Shot,
    iters: usize,
    width: f64,
}

/// Bisects on `param ∈ (lo, hi)` where `make(lo)` overshoots and `make(hi)`
/// undershoots (for the gap parametrization the roles are mirrored by the
/// caller through `over_at_low`). Runs until floating-point exhaustion or the
/// iteration cap.
fn bisect(
    shooter: &Shooter,
    lo: f64,
    hi: f64,
    over_at_low: bool,
    wrap: impl Fn(f64) -> Param,
    to_center: impl Fn(f64) -> f64,
    cfg: &ShootingConfig,
) -> Result<Bracketed> {
    let (mut lo, mut hi) = (lo, hi);
    let mut lo_shot: Option<Shot> = None;
    let mut hi_shot: Option<Shot> = None;
    let mut iters = 0;
    while iters < cfg.max_bisections {
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        iters += 1;
        let shot = shooter.shoot(wrap(mid))?;
        let goes_low = (shot.outcome == Outcome::Overshoot) == over_at_low;
        if goes_low {
            lo = mid;
            lo_shot = Some(shot);
        } else {
            hi = mid;
            hi_shot = Some(shot);
        }
    }
    let width = (to_center(hi) - to_center(lo)).abs();
    let (lo_shot, hi_shot) = match (lo_shot, hi_shot) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::convergence(
                "bracket never produced a dichotomy",
                Some((to_center(lo), to_center(hi))),
            ))
        }
    };
    if width > cfg.bisection_tolerance {
        return Err(Error::convergence(
            format!("bisection stopped with bracket width {width:e} after {iters} iterations"),
            Some((to_center(lo), to_center(hi))),
        ));
    }
    let (over, under) = if over_at_low {
        (lo_shot, hi_shot)
    } else {
        (hi_shot, lo_shot)
    };
    Ok(Bracketed {
        center: to_center(0.5 * (lo + hi)),
        over,
        under,
        iters,
        width,
    })
}

/// Linear least squares `y ≈ c0 + c1·x (+ c2·z)`.
fn least_squares(cols: &[&[f64]], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = cols.len() + 1;
    let rows = y.len();
    if rows < m {
        return None;
    }
    let basis = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            cols[j - 1][i]
        }
    };
    let mut ata = vec![vec![0.0; m]; m];
    let mut aty = vec![0.0; m];
    for i in 0..rows {
        for j in 0..m {
            aty[j] += basis(i, j) * y[i];
            for k in 0..m {
                ata[j][k] += basis(i, j) * basis(i, k);
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let piv = (col..m).max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))?;
        ata.swap(col, piv);
        aty.swap(col, piv);
        if ata[col][col].abs() < 1e-300 {
            return None;
        }
        for row in col + 1..m {
            let f = ata[row][col] / ata[col][col];
            for k in col..m {
                ata[row][k] -= f * ata[col][k];
            }
            aty[row] -= f * aty[col];
        }
    }
    let mut coef = vec![0.0; m];
    for col in (0..m).rev() {
        let s: f64 = (col + 1..m).map(|k| ata[col][k] * coef[k]).sum();
        coef[col] = (aty[col] - s) / ata[col][col];
    }
    let rss: f64 = (0..rows)
        .map(|i| {
            let fit: f64 = (0..m).map(|j| coef[j] * basis(i, j)).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    Some((coef, (rss / rows as f64).sqrt()))
}

/// Fits `ln u + p ln r = ln A − k r` over `window` (node indices).
fn fit_tail(
    grid: &RadialGrid,
    values: &[f64],
    window: std::ops::Range<usize>,
    p: f64,
) -> Result<TailFit> {
    let nodes = grid.nodes();
    let idx: Vec<usize> = window
        .filter(|&i| values[i] > 0.0 && nodes[i] > 0.0)
        .collect();
    if idx.len() < 8 {
        return Err(Error::Numeric(
            "too few positive samples to fit the decay".into(),
        ));
    }
    let r: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
    let lnr: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let y: Vec<f64> = idx
        .iter()
        .map(|&i| values[i].ln() + p * nodes[i].ln())
        .collect();
    let (coef, residual) =
        least_squares(&[&r], &y).ok_or_else(|| Error::Numeric("singular decay fit".into()))?;
    let y_free: Vec<f64> = idx.iter().map(|&i| values[i].ln()).collect();
    let free = least_squares(&[&r, &lnr], &y_free)
        .map(|(c, _)| -c[2])
        .unwrap_or(f64::NAN);
    Ok(TailFit {
        amplitude: coef[0].exp(),
        rate: -coef[1],
        prefactor_exponent: p,
        free_prefactor_exponent: free,
        residual,
        start_index: 0,
    })
}

impl TailFit {
    /// The fitted far-field form at radius `r`.
    pub fn value(&self, r: f64) -> f64 {
        self.amplitude * (-self.rate * r).exp() * r.powf(-self.prefactor_exponent)
    }
}

/// Fit residual (log-space RMS) above which a tail fit is rejected.
const TAIL_FIT_MAX_RESIDUAL: f64 = 1e-2;
/// Relative separation of the bracketing shots beyond which samples are no
/// longer trusted.
const TRUST_SEPARATION: f64 = 1e-6;

/// Assembles the profile from the two bracketing shots: their mean where
/// they agree, the fitted decay beyond.
fn assemble_profile(
    grid: &RadialGrid,
    b: &Bracketed,
    rate_hint: f64,
    p: f64,
) -> Result<(RadialProfile, TailFit)> {
    let n = grid.len();
    let m = b.over.values.len().min(b.under.values.len());
    let mut values = Vec::with_capacity(n);
    let mut trust = m;
    for i in 0..m {
        let (x, y) = (b.over.values[i], b.under.values[i]);
        let mean = 0.5 * (x + y);
        if !(mean > 0.0) || (x - y).abs() > TRUST_SEPARATION * mean {
            trust = i;
            break;
        }
        values.push(mean);
    }
    // Keep the monotone part only.
    let mut end = values.len();
    for i in 1..values.len() {
        if values[i] > values[i - 1] {
            end = i;
            break;
        }
    }
    trust = trust.min(end);
    values.truncate(trust);
    let center = values.first().copied().unwrap_or(b.center);
    if trust >= n {
        let window_len = ((3.0 / rate_hint) / grid.spacing()).ceil() as usize;
        let start = n.saturating_sub(window_len.max(16));
        let mut fit = fit_tail(grid, &values, start..n, p)?;
        fit.start_index = n;
        let mut prof = RadialProfile::new(grid.clone(), values)?;
        prof.decay_rate = fit.rate;
        return Ok((prof, fit));
    }
    if trust < 16 || values[trust - 1] > 1e-3 * center {
        return Err(Error::convergence(
            format!(
                "shooting trajectory loses precision at r = {:.3} before decaying (u = {:.3e})",
                grid.nodes()[trust.saturating_sub(1)],
                values.last().copied().unwrap_or(f64::NAN)
            ),
            None,
        ));
    }
    let window_len = ((3.0 / rate_hint) / grid.spacing()).ceil() as usize;
    let linear_start = values.iter().position(|&v| v < 1e-2 * center).unwrap_or(0);
    let start = trust
        .saturating_sub(window_len)
        .max(linear_start)
        .min(trust.saturating_sub(16));
    let mut fit = fit_tail(grid, &values, start..trust, p)?;
    if fit.residual > TAIL_FIT_MAX_RESIDUAL {
        return Err(Error::Numeric(format!(
            "tail fit residual {:.3e} too large",
            fit.residual
        )));
    }
    fit.start_index = trust;
    for &r in &grid.nodes()[trust..] {
        values.push(fit.value(r));
    }
    let mut prof = RadialProfile::new(grid.clone(), values)?;
    prof.decay_rate = fit.rate;
    Ok((prof, fit))
}

fn ensure_window(omega: f64) -> Result<Frequency> {
    Frequency::new(omega)
}

fn solve_cq(
    omega: f64,
    cfg: &ShootingConfig,
    dim: usize,
    bracket: Option<(f64, f64)>,
) -> Result<(RadialProfile, TailFit, Bracketed)> {
    ensure_window(omega)?;
    cfg.validate()?;
    let grid = cfg.grid()?;
    let model = Model::cubic_quintic(omega);
    let (a_plus, s_minus) = match model {
        Model::CubicQuintic {
            a_plus, s_minus, ..
        } => (a_plus, s_minus),
        Model::Cubic => unreachable!(),
    };
    let shooter = Shooter {
        model,
        dim,
        grid: &grid,
        tol: cfg.ode_tolerance,
    };
    // a² ∈ (s₋, s₊): the force is negative there, so the trajectory starts
    // downhill. A tiny gap lingers on the plateau and then overshoots.
    let (gap_lo, gap_hi) = match bracket {
        Some((a_lo, a_hi)) => {
            if !(a_lo < a_hi && a_lo * a_lo > s_minus && a_hi < a_plus) {
                return Err(Error::domain(
                    DomainKind::InvalidParameter,
                    format!("bracket ({a_lo}, {a_hi}) is not inside (sqrt(s-), a+)"),
                ));
            }
            (a_plus - a_hi, a_plus - a_lo)
        }
        None => (1e-300, a_plus - s_minus.sqrt()),
    };
    let b = bisect(
        &shooter,
        gap_lo,
        gap_hi,
        true,
        Param::Gap,
        |g| a_plus - g,
        cfg,
    )?;
    let p = if dim == 2 { 0.5 } else { 0.0 };
    let (prof, fit) = assemble_profile(&grid, &b, omega.sqrt(), p)?;
    Ok((prof, fit, b))
}

/// Ground state `P_ω` of the radial scalar-field equation.
pub fn solve_scalar_field(omega: f64, cfg: &ShootingConfig) -> Result<GroundStateRecord> {
    solve_2d(omega, cfg, None)
}

/// Same as [`solve_scalar_field`] with the bisection started from the center
/// amplitudes `(a_lo, a_hi)`, which must satisfy `s₋ < a_lo² < a_hi² < s₊`.
pub fn solve_scalar_field_in_bracket(
    omega: f64,
    cfg: &ShootingConfig,
    bracket: (f64, f64),
) -> Result<GroundStateRecord> {
    solve_2d(omega, cfg, Some(bracket))
}

/// Outcome of one 2D shot from center amplitude `a`, `s₋ < a² < s₊`.
pub fn classify_shot(omega: f64, a: f64, cfg: &ShootingConfig) -> Result<Outcome> {
    ensure_window(omega)?;
    cfg.validate()?;
    let grid = cfg.grid()?;
    let model = Model::cubic_quintic(omega);
    let gap = model.a_plus() - a;
    if !(gap > 0.0) {
        return Err(Error::domain(
            DomainKind::InvalidParameter,
            format!("amplitude {a} is not below the plateau root"),
        ));
    }
    let shooter = Shooter {
        model,
        dim: 2,
        grid: &grid,
        tol: cfg.ode_tolerance,
    };
    Ok(shooter.shoot(Param::Gap(gap))?.outcome)
}

fn solve_2d(
    omega: f64,
    cfg: &ShootingConfig,
    bracket: Option<(f64, f64)>,
) -> Result<GroundStateRecord> {
    let (profile, tail, b) = solve_cq(omega, cfg, 2, bracket)?;
    let norms = report(&profile)?;
    Ok(GroundStateRecord {
        center_value: profile.values[0],
        omega: Frequency::new(omega)?,
        kind: GroundStateKind::CubicQuintic,
        alpha: norms.alpha(),
        norms,
        solver_iters: b.iters,
        bracket_width: b.width,
        tail,
        profile,
    })
}

/// Cubic ground state `q`; its mass is the Townes threshold.
pub fn solve_cubic_ground_state(cfg: &ShootingConfig) -> Result<GroundStateRecord> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let shooter = Shooter {
        model: Model::Cubic,
        dim: 2,
        grid: &grid,
        tol: cfg.ode_tolerance,
    };
    // G(a) = a²/2 − a⁴/4 must be negative, so a > √2; a = 5 overshoots.
    let b = bisect(
        &shooter,
        2f64.sqrt(),
        5.0,
        false,
        Param::Amplitude,
        |a| a,
        cfg,
    )?;
    let (profile, tail) = assemble_profile(&grid, &b, 1.0, 0.5)?;
    let norms = report(&profile)?;
    Ok(GroundStateRecord {
        center_value: profile.values[0],
        omega: Frequency::unit(),
        kind: GroundStateKind::Cubic,
        alpha: norms.alpha(),
        norms,
        solver_iters: b.iters,
        bracket_width: b.width,
        tail,
        profile,
    })
}

/// `φ(x) = 2√(ω / (1 + √(1 − 16ω/3)·cosh(2√ω x)))`.
pub fn closed_form_1d(omega: f64, x: f64) -> Result<f64> {
    ensure_window(omega)?;
    let b = (1.0 - 16.0 * omega / 3.0).sqrt();
    let z = 2.0 * omega.sqrt() * x.abs();
    // For large |x| cosh overflows; the value is then 0 to double precision.
    let c = z.cosh();
    if !c.is_finite() {
        return Ok(0.0);
    }
    Ok(2.0 * (omega / (1.0 + b * c)).sqrt())
}

/// One-dimensional shooting solution on `[0, r_max]`, used to validate the
/// shooting machinery against [`closed_form_1d`].
pub fn solve_scalar_field_1d(omega: f64, cfg: &ShootingConfig) -> Result<RadialProfile> {
    solve_cq(omega, cfg, 1, None).map(|(p, _, _)| p)
}

/// Replaces the last 10% of the samples by the fitted far-field form
/// `A·e^{−√ω r}/√r`, fitted on the three decay lengths before the cut.
pub fn tail_extend(record: &GroundStateRecord) -> Result<RadialProfile> {
    let prof = &record.profile;
    let grid = &prof.grid;
    let n = grid.len();
    let cut = n - n / 10;
    let rate = record.omega.value().sqrt();
    let window_len = ((3.0 / rate) / grid.spacing()).ceil() as usize;
    let start = cut.saturating_sub(window_len.max(16));
    let fit = fit_tail(grid, &prof.values, start..cut, 0.5)?;
    if fit.residual > TAIL_FIT_MAX_RESIDUAL {
        return Err(Error::Numeric(format!(
            "tail fit residual {:.3e} too large",
            fit.residual
        )));
    }
    let mut values = prof.values.clone();
    for (v, &r) in values[cut..].iter_mut().zip(&grid.nodes()[cut..]) {
        *v = fit.value(r);
    }
    let mut out = RadialProfile::new(grid.clone(), values)?;
    out.decay_rate = fit.rate;
    Ok(out)
}

/// Max over interior nodes of `|u″ + u′/r − f(u)| / max|u|`, with
/// eighth-order central differences.
pub fn ode_residual(record: &GroundStateRecord) -> f64 {
    let model = match record.kind {
        GroundStateKind::CubicQuintic => Model::cubic_quintic(record.omega.value()),
        GroundStateKind::Cubic => Model::Cubic,
    };
    let u = &record.profile.values;
    let nodes = record.profile.grid.nodes();
    let h = record.profile.grid.spacing();
    let scale = record.profile.max_abs();
    const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    const D2C: f64 = -205.0 / 72.0;
    const D2: [f64; 4] = [8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    let end = record.tail.start_index.min(u.len()).saturating_sub(4);
    let mut worst = 0.0_f64;
    for i in 4..end {
        let mut d1 = 0.0;
        let mut d2 = D2C * u[i];
        for k in 0..4 {
            d1 += D1[k] * (u[i + k + 1] - u[i - k - 1]);
            d2 += D2[k] * (u[i + k + 1] + u[i - k - 1]);
        }
        d1 /= h;
        d2 /= h * h;
        let res = d2 + d1 / nodes[i] - model.force(u[i]);
        worst = worst.max(res.abs());
    }
    worst / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_window() {
        assert!(Frequency::new(0.1).is_ok());
        for bad in [0.0, -0.1, 0.1875, 0.19, f64::NAN] {
            assert!(matches!(
                Frequency::new(bad),
                Err(Error::Domain {
                    kind: DomainKind::FrequencyOutOfWindow,
                    ..
                })
            ));
        }
    }

    #[test]
    fn closed_form_values() {
        let v = closed_form_1d(0.1, 0.0).unwrap();
        let expected = 2.0 * (0.1 / (1.0 + (7.0_f64 / 15.0).sqrt())).sqrt();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.4875).abs() < 1e-3);
        assert!(closed_form_1d(0.1, 500.0).unwrap() < 1e-30);
        assert!(closed_form_1d(0.1, 1e6).unwrap() == 0.0);
        assert_eq!(
            closed_form_1d(0.1, 2.5).unwrap(),
            closed_form_1d(0.1, -2.5).unwrap()
        );
        let near = closed_form_1d(OMEGA_CRITICAL - 1e-12, 0.0).unwrap();
        assert!((near - 3f64.sqrt() / 2.0).abs() < 1e-5);
        assert!(closed_form_1d(0.19, 0.0).is_err());
    }

    #[test]
    fn plateau_force_matches_direct_form() {
        let m = Model::cubic_quintic(0.12);
        let a = m.a_plus();
        for w in [1e-3, 0.1, 0.3] {
            let direct = -m.force(a - w);
            assert!((m.plateau_force(w) - direct).abs() < 1e-14);
        }
        assert!(m.force(a).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ShootingConfig::for_omega(0.1);
        cfg.max_bisections = 10;
        assert!(cfg.validate().is_err());
        let mut cfg = ShootingConfig::for_omega(0.1);
        cfg.ode_tolerance = 0.0;
        assert!(cfg.validate().is_err());
        assert!(ShootingConfig::for_omega(0.1).validate().is_ok());
    }

    #[test]
    fn least_squares_recovers_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (c, res) = least_squares(&[&x], &y).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-12 && res < 1e-12);
    }
}
