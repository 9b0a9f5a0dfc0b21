//! The ground-state branch `ω ↦ (M, E, α, C_α)`: tabulation, the numerical
//! certificates of monotonicity, and the inverse map mass → frequency.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DomainKind, Error, Result};
use crate::functionals::{c_alpha_closed_form, f_alpha, f_alpha_from_report};
use crate::grid::RadialProfile;
use crate::ground_state::{
    solve_cubic_ground_state, solve_scalar_field, Frequency, GroundStateRecord, ShootingConfig,
    OMEGA_CRITICAL, OMEGA_SCAN_MAX, OMEGA_SCAN_MIN,
};

/// How the points of an ω grid are distributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaSpacing {
    /// Uniform in `ln ω`.
    Log,
    Uniform,
    /// Uniform in `2·asin √(ω/ω_c)`, which equalizes the leading
    /// central-difference error of the branch derivatives.
    Arcsine,
}

impl std::str::FromStr for OmegaSpacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Self::Log),
            "uniform" => Ok(Self::Uniform),
            "arcsine" => Ok(Self::Arcsine),
            _ => Err(Error::domain(
                DomainKind::InvalidParameter,
                format!("unknown spacing '{s}' (expected log, uniform or arcsine)"),
            )),
        }
    }
}

/// `points` frequencies from `lo` to `hi` inclusive.
pub fn omega_grid(points: usize, lo: f64, hi: f64, spacing: OmegaSpacing) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::domain(
            DomainKind::InvalidParameter,
            "an omega grid needs at least 2 points",
        ));
    }
    if !(OMEGA_SCAN_MIN <= lo && lo < hi && hi <= OMEGA_SCAN_MAX) {
        return Err(Error::domain(
            DomainKind::FrequencyOutOfWindow,
            format!("scan range [{lo}, {hi}] must lie inside [{OMEGA_SCAN_MIN}, {OMEGA_SCAN_MAX}]"),
        ));
    }
    let (fwd, inv): (fn(f64) -> f64, fn(f64) -> f64) = match spacing {
        OmegaSpacing::Log => (f64::ln, f64::exp),
        OmegaSpacing::Uniform => (|w| w, |s| s),
        OmegaSpacing::Arcsine => (
            |w| 2.0 * (w / OMEGA_CRITICAL).sqrt().asin(),
            |s| OMEGA_CRITICAL * (0.5 * s).sin().powi(2),
        ),
    };
    let (a, b) = (fwd(lo), fwd(hi));
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| match i {
            0 => lo,
            i if i == points - 1 => hi,
            i => inv(a + (b - a) * i as f64 / last),
        })
        .collect())
}

/// The default scan grid: 30 log-spaced points in `[0.005, 0.18]`.
pub fn default_omega_grid() -> Vec<f64> {
    omega_grid(30, OMEGA_SCAN_MIN, OMEGA_SCAN_MAX, OmegaSpacing::Log).expect("static grid")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub omega: f64,
    pub mass: f64,
    pub energy: f64,
    pub alpha: f64,
    pub c_alpha: f64,
    pub pohozaev_residual: f64,
    pub grad_norm_sq: f64,
}

impl BranchRow {
    pub fn from_record(rec: &GroundStateRecord) -> Self {
        let n = &rec.norms;
        Self {
            omega: rec.omega.value(),
            mass: n.mass,
            energy: n.energy,
            alpha: rec.alpha,
            c_alpha: c_alpha_closed_form(rec.alpha, n.mass, n.grad_norm_sq),
            pohozaev_residual: n.pohozaev_residual,
            grad_norm_sq: n.grad_norm_sq,
        }
    }
}

/// Observations about monotonicity made when the table is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchAnnotations {
    pub mass_strictly_increasing: bool,
    pub min_mass_gap: f64,
    pub alpha_strictly_increasing: bool,
    pub max_pohozaev_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchTable {
    pub rows: Vec<BranchRow>,
    pub omega_grid: Vec<f64>,
    pub townes_mass: f64,
    pub annotations: BranchAnnotations,
}

impl BranchTable {
    /// Sorts the rows by ω and annotates them.
    pub fn from_rows(mut rows: Vec<BranchRow>, townes_mass: f64) -> Result<Self> {
        if rows.iter().any(|r| !r.omega.is_finite()) {
            return Err(Error::Numeric("row with non-finite omega".into()));
        }
        rows.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let min_mass_gap = rows
            .windows(2)
            .map(|w| w[1].mass - w[0].mass)
            .fold(f64::INFINITY, f64::min);
        let annotations = BranchAnnotations {
            mass_strictly_increasing: rows.windows(2).all(|w| w[1].mass > w[0].mass),
            min_mass_gap,
            alpha_strictly_increasing: rows.windows(2).all(|w| w[1].alpha > w[0].alpha),
            max_pohozaev_residual: rows
                .iter()
                .map(|r| r.pohozaev_residual.abs())
                .fold(0.0, f64::max),
        };
        Ok(Self {
            omega_grid: rows.iter().map(|r| r.omega).collect(),
            rows,
            townes_mass,
            annotations,
        })
    }

    pub fn from_records(records: &[GroundStateRecord], townes_mass: f64) -> Result<Self> {
        Self::from_rows(
            records.iter().map(BranchRow::from_record).collect(),
            townes_mass,
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,mass,energy,alpha,c_alpha,pohozaev_residual\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.omega, r.mass, r.energy, r.alpha, r.c_alpha, r.pohozaev_residual
            );
        }
        out
    }
}

/// Solves every frequency of `omega_grid`, in parallel, keeping grid order.
pub fn scan_records(omega_grid: &[f64], cfg: &ShootingConfig) -> Result<Vec<GroundStateRecord>> {
    if omega_grid.len() < 10 {
        return Err(Error::domain(
            DomainKind::InvalidParameter,
            format!(
                "a branch scan needs at least 10 frequencies, got {}",
                omega_grid.len()
            ),
        ));
    }
    if let Some(&w) = omega_grid
        .iter()
        .find(|&&w| !(OMEGA_SCAN_MIN..=OMEGA_SCAN_MAX).contains(&w))
    {
        return Err(Error::domain(
            DomainKind::FrequencyOutOfWindow,
            format!("scan frequency {w} outside [{OMEGA_SCAN_MIN}, {OMEGA_SCAN_MAX}]"),
        ));
    }
    omega_grid
        .par_iter()
        .map(|&w| {
            solve_scalar_field(w, cfg).map_err(|e| e.context(format!("solve at omega = {w}")))
        })
        .collect()
}

/// Tabulates the branch; the Townes mass comes from a fresh cubic solve.
pub fn scan_branch(omega_grid: &[f64], cfg: &ShootingConfig) -> Result<BranchTable> {
    let townes = solve_cubic_ground_state(&ShootingConfig::for_cubic())?;
    BranchTable::from_records(&scan_records(omega_grid, cfg)?, townes.mass())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianReport {
    pub max_residual: f64,
    pub worst_omega: f64,
    /// `(ω, residual)` for each interior row.
    pub residuals: Vec<(f64, f64)>,
}

/// Three-point derivative on a non-uniform grid at the middle node.
fn central_difference(x: [f64; 3], y: [f64; 3]) -> f64 {
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[1];
    -h2 / (h1 * (h1 + h2)) * y[0] + (h2 - h1) / (h1 * h2) * y[1] + h1 / (h2 * (h1 + h2)) * y[2]
}

/// Relative residual of `dE/dω = −(ω/2)·dM/dω` at every interior row.
pub fn check_hamiltonian_relation(table: &BranchTable) -> Result<HamiltonianReport> {
    let rows = &table.rows;
    if rows.len() < 3 {
        return Err(Error::Structural(
            "the Hamiltonian relation needs at least 3 rows".into(),
        ));
    }
    const FLOOR: f64 = 1e-300;
    let mut residuals = Vec::with_capacity(rows.len() - 2);
    for w in rows.windows(3) {
        let x = [w[0].omega, w[1].omega, w[2].omega];
        let de = central_difference(x, [w[0].energy, w[1].energy, w[2].energy]);
        let dm = central_difference(x, [w[0].mass, w[1].mass, w[2].mass]);
        let half = 0.5 * x[1] * dm;
        residuals.push((x[1], (de + half).abs() / (de.abs() + half.abs() + FLOOR)));
    }
    let (worst_omega, max_residual) = residuals.iter().copied().fold(
        (f64::NAN, 0.0),
        |acc, (w, r)| if r > acc.1 { (w, r) } else { acc },
    );
    Ok(HamiltonianReport {
        max_residual,
        worst_omega,
        residuals,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMonotonicityReport {
    /// Whether α increases strictly along the ω grid.
    pub alpha_increasing_in_omega: bool,
    pub pairs_checked: usize,
    pub duplicates_skipped: usize,
    /// `min (‖∇Q_α‖²/‖∇Q_ν‖²) / (α(1+ν)/(ν(1+α))) − 1` over adjacent pairs.
    pub worst_gradient_margin: f64,
    /// `min (‖Q_α‖²/‖Q_ν‖²) / ((1+α)/(1+ν)) − 1` over adjacent pairs.
    pub worst_mass_margin: f64,
    pub violations: usize,
}

/// Checks both ratio bounds for every adjacent pair `ν < α` after sorting by α.
pub fn check_alpha_monotonicity(table: &BranchTable) -> AlphaMonotonicityReport {
    let alpha_increasing_in_omega = table.rows.windows(2).all(|w| w[1].alpha > w[0].alpha);
    let mut rows = table.rows.clone();
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let mut report = AlphaMonotonicityReport {
        alpha_increasing_in_omega,
        pairs_checked: 0,
        duplicates_skipped: 0,
        worst_gradient_margin: f64::INFINITY,
        worst_mass_margin: f64::INFINITY,
        violations: 0,
    };
    for w in rows.windows(2) {
        let (nu, al) = (&w[0], &w[1]);
        if al.alpha == nu.alpha {
            report.duplicates_skipped += 1;
            continue;
        }
        let (a, v) = (al.alpha, nu.alpha);
        let grad_margin =
            (al.grad_norm_sq / nu.grad_norm_sq) / (a * (1.0 + v) / (v * (1.0 + a))) - 1.0;
        let mass_margin = (al.mass / nu.mass) / ((1.0 + a) / (1.0 + v)) - 1.0;
        report.pairs_checked += 1;
        if !(grad_margin > 0.0 && mass_margin > 0.0) {
            report.violations += 1;
        }
        report.worst_gradient_margin = report.worst_gradient_margin.min(grad_margin);
        report.worst_mass_margin = report.worst_mass_margin.min(mass_margin);
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub shooting: ShootingConfig,
    /// Stop once `|M(P_ω) − m| ≤ mass_tolerance·m`.
    pub mass_tolerance: f64,
    pub max_solves: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            shooting: ShootingConfig::default(),
            mass_tolerance: 1e-12,
            max_solves: 80,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub omega: Frequency,
    pub mass: f64,
    pub relative_residual: f64,
    pub solves: usize,
    pub bracket: (f64, f64),
}

/// The unique ω with `M(P_ω) = m`. The table supplies the initial bracket;
/// masses above the table are bracketed by extending toward `0.18`.
pub fn invert_mass_to_frequency(
    m: f64,
    table: &BranchTable,
    cfg: &InversionConfig,
) -> Result<Inversion> {
    check_mass(m, table.townes_mass)?;
    let rows = &table.rows;
    if rows.is_empty() {
        return Err(Error::Structural("empty branch table".into()));
    }
    if !table.annotations.mass_strictly_increasing {
        return Err(Error::Numeric(
            "branch mass is not strictly increasing on the table; refusing to invert".into(),
        ));
    }
    let i = rows.partition_point(|r| r.mass < m);
    let bracket = if i == 0 {
        return Err(Error::domain(
            DomainKind::InvalidParameter,
            format!(
                "mass {m} lies below the smallest tabulated mass {} (omega = {}); extend the table",
                rows[0].mass, rows[0].omega
            ),
        ));
    } else if i == rows.len() {
        let last = rows[rows.len() - 1];
        if last.omega >= OMEGA_SCAN_MAX {
            return Err(Error::domain(
                DomainKind::InvalidParameter,
                format!("mass {m} exceeds M(P_omega) at the bracket cap omega = {OMEGA_SCAN_MAX}"),
            ));
        }
        (last.omega, OMEGA_SCAN_MAX)
    } else {
        // One extra row on each side absorbs the difference between the
        // table's solves and the fresh ones.
        let hi = rows
            .get(i + 1)
            .map_or(OMEGA_SCAN_MAX.max(rows[i].omega), |r| r.omega);
        (rows[i.saturating_sub(2)].omega, hi)
    };
    invert_in_bracket(m, bracket, table.townes_mass, cfg)
}

fn check_mass(m: f64, townes_mass: f64) -> Result<()> {
    if !(m.is_finite() && m > townes_mass) {
        return Err(Error::domain(
            DomainKind::MassNotAboveThreshold,
            format!(
                "mass {m} does not exceed the Townes mass {townes_mass}: no normalized ground state exists"
            ),
        ));
    }
    Ok(())
}

/// Illinois false position on `M(P_ω) − m` over `ω ∈ (lo, hi)`, with fresh
/// solves at every iterate.
pub fn invert_in_bracket(
    m: f64,
    bracket: (f64, f64),
    townes_mass: f64,
    cfg: &InversionConfig,
) -> Result<Inversion> {
    check_mass(m, townes_mass)?;
    let (mut lo, mut hi) = bracket;
    Frequency::new(lo)?;
    Frequency::new(hi)?;
    let mass_at = |w: f64| -> Result<f64> {
        solve_scalar_field(w, &cfg.shooting)
            .map(|r| r.mass())
            .map_err(|e| e.context(format!("inversion solve at omega = {w}")))
    };
    let mut g_lo = mass_at(lo)? - m;
    let mut g_hi = mass_at(hi)? - m;
    let mut solves = 2;
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(Error::convergence(
            format!("mass {m} not bracketed by omega in ({lo}, {hi})"),
            Some((lo, hi)),
        ));
    }
    let done = |g: f64| g.abs() <= cfg.mass_tolerance * m;
    if done(g_lo) {
        return finish(lo, g_lo, m, solves, (lo, hi));
    }
    if done(g_hi) {
        return finish(hi, g_hi, m, solves, (lo, hi));
    }
    let mut side = 0i8;
    while solves < cfg.max_solves {
        let mut w = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(w > lo && w < hi) {
            w = 0.5 * (lo + hi);
        }
        let g = mass_at(w)? - m;
        solves += 1;
        if done(g) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return finish(w, g, m, solves, (lo, hi));
        }
        if g < 0.0 {
            lo = w;
            g_lo = g;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = w;
            g_hi = g;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::convergence(
        format!("mass inversion did not reach tolerance in {solves} solves"),
        Some((lo, hi)),
    ))
}

fn finish(w: f64, g: f64, m: f64, solves: usize, bracket: (f64, f64)) -> Result<Inversion> {
    Ok(Inversion {
        omega: Frequency::new(w)?,
        mass: m + g,
        relative_residual: (g / m).abs(),
        solves,
        bracket,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub f_alpha_ground_state: f64,
    pub trials: usize,
    pub min_trial_value: f64,
    /// `min_trial_value / f_alpha_ground_state − 1`.
    pub worst_margin: f64,
    pub violations: usize,
}

/// Random positive trial profile: a sum of one to three Gaussian rings with
/// random center, width and amplitude.
pub fn random_bump_profile(template: &RadialProfile, rng: &mut impl Rng) -> Result<RadialProfile> {
    let r_max = template.grid.r_max();
    let scale = (0.05 * r_max).max(1.0);
    let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=3usize))
        .map(|_| {
            (
                rng.gen_range(0.2..2.0),
                rng.gen_range(0.0..2.0) * scale,
                rng.gen_range(0.3..1.5) * scale,
            )
        })
        .collect();
    RadialProfile::from_fn(template.grid.clone(), |r| {
        bumps
            .iter()
            .map(|&(a, c, w)| a * (-((r - c) / w).powi(2)).exp())
            .sum()
    })
}

/// Compares `F_α(Q_α)` against `trials` random profiles with a fixed seed.
pub fn minimality_spot_check(
    rec: &GroundStateRecord,
    trials: usize,
    seed: u64,
) -> Result<MinimalityReport> {
    let alpha = rec.alpha;
    let f_q = f_alpha_from_report(&rec.norms, alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_trial = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let v = random_bump_profile(&rec.profile, &mut rng)?;
        let f_v = f_alpha(&v, alpha)?;
        if f_v < f_q {
            violations += 1;
        }
        min_trial = min_trial.min(f_v);
    }
    Ok(MinimalityReport {
        f_alpha_ground_state: f_q,
        trials,
        min_trial_value: min_trial,
        worst_margin: min_trial / f_q - 1.0,
        violations,
    })
}
