//! Cross-module identity suite: every check evaluates one identity or
//! inequality on a freshly scanned branch and records value, tolerance and
//! verdict.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::branch::{
    check_alpha_monotonicity, check_hamiltonian_relation, minimality_spot_check, omega_grid,
    random_bump_profile, scan_records, BranchTable, InversionConfig, OmegaSpacing,
};
use crate::error::Result;
use crate::functionals::{alpha_relations_check, f_alpha, gn_slack};
use crate::ground_state::{
    solve_cubic_ground_state, ShootingConfig, OMEGA_SCAN_MAX, OMEGA_SCAN_MIN,
};
use crate::minimizer::{compare_to_branch, gaussian_seed, minimize_from, FlowConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub points: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub spacing: OmegaSpacing,
    pub scale_trials: usize,
    pub minimality_trials: usize,
    /// Masses for the minimizer comparison, in units of the Townes mass.
    pub mass_factors: Vec<f64>,
    /// Widths of the two Gaussian seeds of the minimizer.
    pub seed_widths: Vec<f64>,
    pub seed: u64,
}

impl SuiteConfig {
    pub fn full() -> Self {
        Self {
            points: 30,
            omega_min: OMEGA_SCAN_MIN,
            omega_max: OMEGA_SCAN_MAX,
            spacing: OmegaSpacing::Log,
            scale_trials: 100,
            minimality_trials: 100,
            mass_factors: vec![1.2, 2.0],
            seed_widths: vec![3.0, 1.5],
            seed: 2024,
        }
    }

    pub fn quick() -> Self {
        Self {
            points: 10,
            scale_trials: 20,
            minimality_trials: 20,
            ..Self::full()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Measured quantity; its meaning is given by `criterion`.
    pub value: f64,
    pub tolerance: f64,
    /// `"<="` when `value` must not exceed `tolerance`, `">"` when it must
    /// exceed it.
    pub criterion: String,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            criterion: "<=".into(),
            passed: value <= tolerance,
        }
    }

    fn above(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: bound,
            criterion: ">".into(),
            passed: value > bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    pub branch: BranchTable,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            out += &format!(
                "{:<width$}  {}  {:>12.4e} {} {:.1e}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.value,
                c.criterion,
                c.tolerance
            );
        }
        out
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let grid = omega_grid(cfg.points, cfg.omega_min, cfg.omega_max, cfg.spacing)?;
    let shooting = ShootingConfig::for_branch(cfg.omega_min, cfg.omega_max);
    let records = scan_records(&grid, &shooting)?;
    let townes = solve_cubic_ground_state(&ShootingConfig::for_cubic())?.mass();
    let table = BranchTable::from_records(&records, townes)?;
    let mut checks = Vec::new();

    checks.push(Check::at_most(
        "pohozaev_residual",
        table.annotations.max_pohozaev_residual,
        1e-6,
    ));

    let (mut l4, mut om) = (0.0_f64, 0.0_f64);
    for rec in &records {
        let a = alpha_relations_check(rec);
        l4 = l4.max(a.l4_relation);
        om = om.max(a.omega_relation);
    }
    checks.push(Check::at_most("alpha_l4_relation", l4, 1e-6));
    checks.push(Check::at_most("alpha_omega_relation", om, 1e-6));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst_scale = 0.0_f64;
    for i in 0..cfg.scale_trials {
        let rec = &records[i % records.len()];
        let v = random_bump_profile(&rec.profile, &mut rng)?;
        let (lambda, mu) = (rng.gen_range(0.25..4.0), rng.gen_range(0.25..4.0));
        let f0 = f_alpha(&v, rec.alpha)?;
        let f1 = f_alpha(&v.rescaled(lambda, mu)?, rec.alpha)?;
        worst_scale = worst_scale.max(((f1 - f0) / f0).abs());
    }
    checks.push(Check::at_most(
        "f_alpha_scale_invariance",
        worst_scale,
        1e-10,
    ));

    let mut worst_margin = f64::INFINITY;
    for (i, rec) in records.iter().enumerate() {
        let rep = minimality_spot_check(
            rec,
            cfg.minimality_trials,
            cfg.seed.wrapping_add(1 + i as u64),
        )?;
        worst_margin = worst_margin.min(rep.worst_margin);
    }
    checks.push(Check::above("f_alpha_minimality_margin", worst_margin, 0.0));

    let gn = records
        .iter()
        .map(|r| gn_slack(&r.norms, townes).map(|s| s / r.norms.l4_pow4))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::above("gn_relative_slack", gn, 0.0));

    checks.push(Check::at_most(
        "hamiltonian_relation",
        check_hamiltonian_relation(&table)?.max_residual,
        1e-3,
    ));
    checks.push(Check::above(
        "mass_min_adjacent_gap",
        table.annotations.min_mass_gap,
        0.0,
    ));

    let chains = check_alpha_monotonicity(&table);
    checks.push(Check::above(
        "alpha_chain_margin",
        if chains.violations > 0 {
            -1.0
        } else {
            chains.worst_gradient_margin.min(chains.worst_mass_margin)
        },
        0.0,
    ));

    let flow = FlowConfig::default();
    let inversion = InversionConfig {
        shooting,
        ..InversionConfig::default()
    };
    for &factor in &cfg.mass_factors {
        let m = factor * townes;
        let (mut sup, mut gap) = (0.0_f64, 0.0_f64);
        for &w in &cfg.seed_widths {
            let res = minimize_from(m, townes, &gaussian_seed(&flow.grid, w)?, &flow)?;
            let cmp = compare_to_branch(&res, &table, &inversion)?;
            sup = sup.max(cmp.sup_distance);
            gap = gap.max(cmp.multiplier_gap);
        }
        checks.push(Check::at_most(
            &format!("minimizer_sup_{factor}x"),
            sup,
            1e-4,
        ));
        checks.push(Check::at_most(
            &format!("minimizer_multiplier_{factor}x"),
            gap,
            1e-5,
        ));
    }

    Ok(SuiteReport {
        checks,
        branch: table,
    })
}
