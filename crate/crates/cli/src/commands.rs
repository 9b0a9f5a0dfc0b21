use serde::Serialize;
use serde_json::{json, Map, Value};

use cqnls::branch::{
    check_alpha_monotonicity, check_hamiltonian_relation, invert_mass_to_frequency, omega_grid,
    scan_branch, BranchTable, InversionConfig, OmegaSpacing,
};
use cqnls::functionals::report;
use cqnls::grid::RadialGrid;
use cqnls::ground_state::{
    closed_form_1d, ode_residual, solve_cubic_ground_state, solve_scalar_field,
    solve_scalar_field_1d, Frequency, ShootingConfig, OMEGA_SCAN_MAX, OMEGA_SCAN_MIN,
};
use cqnls::minimizer::{
    compare_to_branch, gaussian_seed, minimize_from, verify_negative_energy_by_scaling, FlowConfig,
};
use cqnls::propagator::{
    run_scattering_experiment, run_stability_experiment, soliton_deviation, CartesianField,
    Geometry, InitialData, ScatteringConfig, SimulationTrace, StabilityConfig,
};
use cqnls::verify::{run_suite, SuiteConfig};
use cqnls::{DomainKind, Error};

use crate::config::*;
use crate::output::{CliError, Output};

type Layers<'a> = [&'a Map<String, Value>; 3];

/// Rejects unknown keys in every section of the config file, not only the
/// one of the running command.
pub fn validate_sections(file: &ConfigFile) -> Result<(), CliError> {
    for (name, section) in &file.sections {
        let layer = section.as_object().expect("sections are objects");
        let check = match name.as_str() {
            "solve" => resolve::<SolveParams>(name, &[layer]).map(drop),
            "scan" => resolve::<ScanParams>(name, &[layer]).map(drop),
            "invert" => resolve::<InvertParams>(name, &[layer]).map(drop),
            "minimize" => resolve::<MinimizeParams>(name, &[layer]).map(drop),
            "simulate" => resolve::<SimulateParams>(name, &[layer]).map(drop),
            "verify" => resolve::<VerifyParams>(name, &[layer]).map(drop),
            other => Err(format!("unknown config section `{other}`")),
        };
        check.map_err(CliError::config)?;
    }
    Ok(())
}

fn params<T>(section: &str, layers: &Layers) -> Result<(T, Value), CliError>
where
    T: Default + Serialize + serde::de::DeserializeOwned,
{
    let p: T = resolve(section, layers).map_err(CliError::config)?;
    let v = serde_json::to_value(&p)?;
    Ok((p, v))
}

pub fn dispatch(section: &str, layers: &Layers, out: &Output) -> Result<(), CliError> {
    match section {
        "solve" => solve(layers, out),
        "scan" => scan(layers, out),
        "invert" => invert(layers, out),
        "minimize" => minimize(layers, out),
        "simulate" => simulate(layers, out),
        "verify" => verify(layers, out),
        _ => unreachable!("clap restricts the command set"),
    }
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Core(Error::domain(DomainKind::InvalidParameter, message))
}

fn shooting_config(p: &SolveParams) -> Result<ShootingConfig, CliError> {
    if !(p.spacing > 0.0 && p.spacing.is_finite()) {
        return Err(invalid("spacing must be positive"));
    }
    let base = ShootingConfig::for_omega(p.omega);
    let r_max = p.r_max.unwrap_or(base.r_max);
    let grid = RadialGrid::with_spacing(r_max, p.spacing)?;
    let cfg = ShootingConfig {
        ode_tolerance: p.ode_tolerance,
        bisection_tolerance: p.bisection_tolerance,
        r_max,
        n: grid.len(),
        ..base
    };
    cfg.validate()?;
    Ok(cfg)
}

fn profile_csv(nodes: &[f64], columns: &[(&str, &[f64])]) -> String {
    let mut s = String::from("r");
    for (name, _) in columns {
        s += ",";
        s += name;
    }
    s += "\n";
    for (i, r) in nodes.iter().enumerate() {
        s += &format!("{r:.17e}");
        for (_, col) in columns {
            s += &format!(",{:.17e}", col[i]);
        }
        s += "\n";
    }
    s
}

fn solve(layers: &Layers, out: &Output) -> Result<(), CliError> {
    let (p, cfg_json) = params::<SolveParams>("solve", layers)?;
    Frequency::new(p.omega)?;
    let sc = shooting_config(&p)?;
    if p.one_d {
        let prof = solve_scalar_field_1d(p.omega, &sc)?;
        let exact = prof
            .grid
            .nodes()
            .iter()
            .map(|&x| closed_form_1d(p.omega, x))
            .collect::<cqnls::Result<Vec<_>>>()?;
        let sup = prof
            .values
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let result = json!({
            "omega": p.omega,
            "dimension": 1,
            "center_value": prof.values[0],
            "sup_error_vs_closed_form": sup,
            "r_max": sc.r_max,
            "nodes": sc.n,
        });
        out.json("solve.json", &cfg_json, &result)?;
        out.text(
            "solve_profile.csv",
            &cfg_json,
            &profile_csv(
                prof.grid.nodes(),
                &[("u", &prof.values), ("closed_form", &exact)],
            ),
        )?;
        println!(
            "omega = {}  u(0) = {:.15}  sup error vs closed form = {sup:.3e}",
            p.omega, prof.values[0]
        );
        return Ok(());
    }
    let rec = solve_scalar_field(p.omega, &sc)?;
    let result = json!({
        "pohozaev_residual": rec.norms.pohozaev_residual,
        "ode_residual": ode_residual(&rec),
        "record": rec,
    });
    out.json("solve.json", &cfg_json, &result)?;
    out.text(
        "solve_profile.csv",
        &cfg_json,
        &profile_csv(rec.profile.grid.nodes(), &[("u", &rec.profile.values)]),
    )?;
    println!(
        "omega = {}  P(0) = {:.15}  mass = {:.12}  energy = {:.12}  pohozaev residual = {:.3e}",
        p.omega,
        rec.center_value,
        rec.mass(),
        rec.energy(),
        rec.norms.pohozaev_residual
    );
    Ok(())
}

fn branch(
    points: usize,
    lo: f64,
    hi: f64,
    spacing: &str,
) -> Result<(BranchTable, ShootingConfig), CliError> {
    let spacing: OmegaSpacing = spacing.parse()?;
    let grid = omega_grid(points, lo, hi, spacing)?;
    let sc = ShootingConfig::for_branch(lo, hi);
    Ok((scan_branch(&grid, &sc)?, sc))
}

fn scan(layers: &Layers, out: &Output) -> Result<(), CliError> {
    let (p, cfg_json) = params::<ScanParams>("scan", layers)?;
    let (table, _) = branch(p.points, p.omega_min, p.omega_max, &p.spacing)?;
    let hamiltonian = check_hamiltonian_relation(&table)?;
    let chains = check_alpha_monotonicity(&table);
    out.text("branch.csv", &cfg_json, &table.to_csv())?;
    out.json(
        "scan.json",
        &cfg_json,
        json!({ "table": table, "hamiltonian": hamiltonian, "alpha_monotonicity": chains }),
    )?;
    println!(
        "{} rows  townes mass = {:.10}  mass strictly increasing = {}  min gap = {:.3e}  hamiltonian residual = {:.3e}",
        table.rows.len(),
        table.townes_mass,
        table.annotations.mass_strictly_increasing,
        table.annotations.min_mass_gap,
        hamiltonian.max_residual
    );
    Ok(())
}

fn invert(layers: &Layers, out: &Output) -> Result<(), CliError> {
    let (p, cfg_json) = params::<InvertParams>("invert", layers)?;
    let (table, shooting) = branch(p.points, OMEGA_SCAN_MIN, OMEGA_SCAN_MAX, "log")?;
    let cfg = InversionConfig {
        shooting,
        mass_tolerance: p.mass_tolerance,
        ..InversionConfig::default()
    };
    let inv = invert_mass_to_frequency(p.mass, &table, &cfg)?;
    out.json(
        "invert.json",
        &cfg_json,
        json!({ "inversion": inv, "townes_mass": table.townes_mass }),
    )?;
    println!(
        "mass = {}  omega = {:.15}  round-trip residual = {:.3e}  solves = {}",
        p.mass,
        inv.omega.value(),
        inv.relative_residual,
        inv.solves
    );
    Ok(())
}

fn minimize(layers: &Layers, out: &Output) -> Result<(), CliError> {
    let (p, cfg_json) = params::<MinimizeParams>("minimize", layers)?;
    let townes = solve_cubic_ground_state(&ShootingConfig::for_cubic())?.mass();
    let m = p.mass.unwrap_or(p.mass_factor * townes);
    let flow = FlowConfig {
        time_step: p.time_step,
        max_steps: p.max_steps,
        stationarity_tolerance: p.stationarity_tolerance,
        grid: RadialGrid::new(p.r_max, p.nodes)?,
        ..FlowConfig::default()
    };
    flow.validate()?;
    let seed = gaussian_seed(&flow.grid, p.seed_width)?;
    let res = minimize_from(m, townes, &seed, &flow)?;
    let quadrature_mass = report(&res.profile)?.mass;
    let witness = verify_negative_energy_by_scaling(quadrature_mass, &res.profile).ok();
    let matched = if p.compare {
        let (table, shooting) = branch(30, OMEGA_SCAN_MIN, OMEGA_SCAN_MAX, "log")?;
        let cfg = InversionConfig {
            shooting,
            ..InversionConfig::default()
        };
        Some(compare_to_branch(&res, &table, &cfg)?)
    } else {
        None
    };
    out.text(
        "minimize_profile.csv",
        &cfg_json,
        &profile_csv(res.profile.grid.nodes(), &[("u", &res.profile.values)]),
    )?;
    println!(
        "mass = {m:.10}  energy = {:.12}  multiplier = {:.12}  stationarity = {:.2e}",
        res.energy, res.multiplier, res.stationarity
    );
    if let Some(b) = &matched {
        println!(
            "branch omega = {:.12}  multiplier gap = {:.3e}  sup distance = {:.3e}",
            b.omega, b.multiplier_gap, b.sup_distance
        );
    }
    out.json(
        "minimize.json",
        &cfg_json,
        json!({ "townes_mass": townes, "result": res, "scaling_witness": witness, "branch_match": matched }),
    )?;
    Ok(())
}

fn apply_overrides(p: &SimulateParams, dt: &mut f64, geometry: &mut Geometry, sample: &mut f64) {
    if let Some(v) = p.dt {
        *dt = v;
    }
    if let Some(v) = p.n {
        geometry.n = v;
    }
    if let Some(v) = p.box_length {
        geometry.box_length = v;
    }
    if let Some(v) = p.sample_interval {
        *sample = v;
    }
}

fn write_trace(
    out: &Output,
    cfg: &Value,
    name: &str,
    trace: &SimulationTrace,
) -> Result<(), CliError> {
    out.text(name, cfg, &trace.to_csv()).map(drop)
}

fn write_field(out: &Output, cfg: &Value, field: &CartesianField) -> Result<(), CliError> {
    out.bytes("field.bin", &field.to_le_bytes())?;
    out.json(
        "field.json",
        cfg,
        json!({ "n": field.geometry.n, "L": field.geometry.box_length, "time": field.time }),
    )?;
    Ok(())
}

/// Writes the partial trace of a failed evolution before reporting it.
fn keep_partial<T>(out: &Output, cfg: &Value, r: cqnls::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| {
        if let Error::Blowup { trace, .. } = &e {
            let _ = write_trace(out, cfg, "trace_partial.csv", trace);
        }
        CliError::Core(e)
    })
}

fn simulate(layers: &Layers, out: &Output) -> Result<(), CliError> {
    let (p, cfg_json) = params::<SimulateParams>("simulate", layers)?;
    match p.experiment.as_str() {
        "stability" | "boost" => {
            let boosted = p.experiment == "boost";
            let delta = if boosted { 0.0 } else { p.delta };
            let t_final = p.t_final.unwrap_or(if boosted { 20.0 } else { 50.0 });
            let mut cfg = StabilityConfig::new(p.omega, delta, t_final);
            cfg.perturbation.seed = p.seed;
            cfg.center = p.center;
            if boosted {
                cfg.velocity = p.velocity;
            }
            apply_overrides(&p, &mut cfg.dt, &mut cfg.geometry, &mut cfg.sample_interval);
            let outcome = keep_partial(out, &cfg_json, run_stability_experiment(&cfg))?;
            write_trace(out, &cfg_json, "trace.csv", &outcome.trace)?;
            if p.snapshot {
                if let Some(f) = &outcome.final_field {
                    write_field(out, &cfg_json, f)?;
                }
            }
            let summary = if boosted {
                let v = outcome.trace.center_velocity();
                let speed = (cfg.velocity[0].powi(2) + cfg.velocity[1].powi(2)).sqrt();
                let err = ((v[0] - cfg.velocity[0]).powi(2) + (v[1] - cfg.velocity[1]).powi(2))
                    .sqrt()
                    / speed;
                println!(
                    "center-of-mass velocity = ({:.10}, {:.10})  relative error = {err:.3e}",
                    v[0], v[1]
                );
                json!({ "center_velocity": v, "relative_velocity_error": err })
            } else {
                let ratio = match (outcome.initial_distance, outcome.max_distance) {
                    (Some(a), Some(b)) if a > 0.0 => Some(b / a),
                    _ => None,
                };
                println!(
                    "initial distance = {:.4e}  max distance = {:.4e}  horizon = {}",
                    outcome.initial_distance.unwrap_or(f64::NAN),
                    outcome.max_distance.unwrap_or(f64::NAN),
                    outcome.trace.horizon
                );
                json!({ "distance_ratio": ratio })
            };
            for w in &outcome.trace.warnings {
                println!("warning: {w}");
            }
            out.json(
                "simulate.json",
                &cfg_json,
                json!({ "summary": summary, "outcome": outcome }),
            )?;
        }
        "scattering" => {
            let mut cfg = ScatteringConfig::gaussian(p.mass_fraction, p.t_final.unwrap_or(20.0));
            cfg.initial = InitialData::Gaussian {
                mass_fraction: p.mass_fraction,
                width: p.width,
            };
            apply_overrides(&p, &mut cfg.dt, &mut cfg.geometry, &mut cfg.sample_interval);
            let townes = solve_cubic_ground_state(&ShootingConfig::for_cubic())?.mass();
            let outcome = keep_partial(out, &cfg_json, run_scattering_experiment(&cfg, townes))?;
            write_trace(out, &cfg_json, "trace.csv", &outcome.trace)?;
            if p.snapshot {
                if let Some(f) = &outcome.final_field {
                    write_field(out, &cfg_json, f)?;
                }
            }
            println!(
                "L4 ratio = {:.4e}  variance monotone = {}  superlinear = {}  horizon = {}",
                outcome.l4_ratio,
                outcome.variance_monotone,
                outcome.variance_superlinear,
                outcome.trace.horizon
            );
            for w in &outcome.trace.warnings {
                println!("warning: {w}");
            }
            out.json(
                "simulate.json",
                &cfg_json,
                json!({ "townes_mass": townes, "outcome": outcome }),
            )?;
        }
        "fidelity" => {
            let rec = solve_scalar_field(p.omega, &ShootingConfig::for_omega(p.omega))?;
            let mut dt = 1e-3;
            let mut geometry = Geometry {
                n: 256,
                box_length: 128.0,
            };
            let mut unused = 0.0;
            apply_overrides(&p, &mut dt, &mut geometry, &mut unused);
            let geometry = Geometry::new(geometry.n, geometry.box_length)?;
            let t = p.t_final.unwrap_or(1.0);
            let coarse = soliton_deviation(&rec, geometry, dt, t)?;
            let fine = soliton_deviation(&rec, geometry, 0.5 * dt, t)?;
            println!(
                "sup deviation at dt = {dt}: {coarse:.4e}; at dt/2: {fine:.4e}; ratio {:.3}",
                coarse / fine
            );
            out.json(
                "simulate.json",
                &cfg_json,
                json!({ "dt": dt, "deviation": coarse, "deviation_half_dt": fine, "ratio": coarse / fine }),
            )?;
        }
        other => {
            return Err(invalid(format!(
                "unknown experiment `{other}` (expected stability, boost, scattering or fidelity)"
            )))
        }
    }
    Ok(())
}

fn verify(layers: &Layers, out: &Output) -> Result<(), CliError> {
    let (p, cfg_json) = params::<VerifyParams>("verify", layers)?;
    let suite = SuiteConfig {
        seed: p.seed,
        ..if p.quick {
            SuiteConfig::quick()
        } else {
            SuiteConfig::full()
        }
    };
    let report = run_suite(&suite)?;
    let table = report.table();
    out.text("verify_table.txt", &cfg_json, &table)?;
    out.text("branch.csv", &cfg_json, &report.branch.to_csv())?;
    out.json(
        "verify.json",
        &cfg_json,
        json!({ "suite": suite, "report": report }),
    )?;
    print!("{table}");
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(
            report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.clone())
                .collect(),
        ))
    }
}
