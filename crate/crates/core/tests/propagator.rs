use num_complex::Complex64;

use cqnls::ground_state::{solve_scalar_field, GroundStateRecord, ShootingConfig};
use cqnls::propagator::*;

fn soliton(omega: f64) -> GroundStateRecord {
    solve_scalar_field(omega, &ShootingConfig::for_omega(omega)).unwrap()
}

fn geometry() -> Geometry {
    Geometry::new(256, 128.0).unwrap()
}

#[test]
fn free_gaussian_spreading_matches_closed_form() {
    let g = Geometry::new(128, 64.0).unwrap();
    let (amp, sigma) = (1e-6, 2.0);
    let mut f = CartesianField::from_fn(g, |x, y| {
        Complex64::new(amp * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp(), 0.0)
    });
    let mut p = Propagator::new(g);
    p.evolve(&mut f, 1e-3, 1000).unwrap();
    let s2 = Complex64::new(sigma * sigma, 2.0 * f.time);
    let exact = CartesianField::from_fn(g, |x, y| {
        amp * sigma * sigma / s2 * (-(x * x + y * y) / (2.0 * s2)).exp()
    });
    assert!(f.sup_distance(&exact) / amp < 1e-8);
}

#[test]
fn forward_then_backward_returns_initial_field() {
    let rec = soliton(0.1);
    let g = geometry();
    let f0 = embed_soliton(&rec, [1.0, -2.0], [0.3, 0.1], 0.4, g).unwrap();
    let mut p = Propagator::new(g);
    let mut f = f0.clone();
    p.evolve(&mut f, 1e-2, 100).unwrap();
    assert!(f.sup_distance(&f0) > 1e-4);
    p.evolve(&mut f, -1e-2, 100).unwrap();
    assert!(f.sup_distance(&f0) < 1e-8);
}

#[test]
fn boosted_evolution_equals_evolved_boost() {
    let rec = soliton(0.1);
    let g = geometry();
    let v = 4.0 * std::f64::consts::PI * 5.0 / g.box_length;
    let gap = galilean_gap(&rec, g, [v, 0.0], 1e-3, 1.0).unwrap();
    assert!(gap <= 1e-5, "gap {gap:e}");
}

#[test]
fn embedding_preserves_mass_and_sets_momentum() {
    let rec = soliton(0.1);
    let g = geometry();
    let rest = embed_soliton(&rec, [0.0, 0.0], [0.0, 0.0], 0.0, g).unwrap();
    assert!(rest.values.iter().all(|z| z.im == 0.0 && z.re >= 0.0));
    assert!((rest.mass() - rec.mass()).abs() / rec.mass() < 1e-6);
    let moving = embed_soliton(&rec, [0.0, 0.0], [1.0, 0.0], 0.0, g).unwrap();
    let (m, _, p) = conserved_report(&moving).unwrap();
    assert!((p[0] - m).abs() / m < 1e-5);
    assert!(p[1].abs() < 1e-10);
    let turned = embed_soliton(&rec, [0.0, 0.0], [0.0, 0.0], 2.1, g).unwrap();
    let worst = rest
        .values
        .iter()
        .zip(&turned.values)
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-15);
}

#[test]
fn rejects_box_too_small_for_soliton() {
    let rec = soliton(0.17);
    let err = embed_soliton(
        &rec,
        [0.0, 0.0],
        [0.0, 0.0],
        0.0,
        Geometry::new(64, 32.0).unwrap(),
    )
    .unwrap_err();
    assert_eq!(err.kind(), "field_too_wide");
}

#[test]
fn orbital_distance_recovers_orbit_member() {
    let rec = soliton(0.1);
    let g = geometry();
    let f = embed_soliton(&rec, [1.3, -2.7], [0.0, 0.0], 0.7, g).unwrap();
    let d = orbital_distance(&f, &rec).unwrap();
    assert!(d.distance <= 1e-6, "distance {:e}", d.distance);
    assert!((d.theta - 0.7).abs() < 1e-6);
    assert!((d.shift[0] - 1.3).abs() < g.spacing() && (d.shift[1] + 2.7).abs() < g.spacing());
}

#[test]
fn orbital_distance_of_scaled_soliton() {
    let rec = soliton(0.1);
    let g = geometry();
    let mut f = embed_soliton(&rec, [0.0, 0.0], [0.0, 0.0], 0.0, g).unwrap();
    let delta = 1e-2;
    f.values.iter_mut().for_each(|z| *z *= 1.0 + delta);
    let d = orbital_distance(&f, &rec).unwrap();
    let expected = delta * d.reference_norm;
    assert!((d.distance - expected).abs() / expected < 0.05);
    let before = d.distance;
    f.rotate_phase(1.234);
    let after = orbital_distance(&f, &rec).unwrap().distance;
    assert!((after - before).abs() < 1e-10);
}

#[test]
fn short_run_conserves_mass_energy_momentum() {
    let rec = soliton(0.1);
    let g = geometry();
    let mut p = Propagator::new(g);
    let mut f = embed_soliton(&rec, [0.0, 0.0], [0.0, 0.0], 0.0, g).unwrap();
    let trace = Recorder::new(&mut p, &f, None)
        .unwrap()
        .run(&mut f, 1e-3, 1.0, 250)
        .unwrap();
    assert_eq!(trace.times.len(), 5);
    assert!(SimulationTrace::max_abs(&trace.mass_drift) < 1e-10);
    assert!(SimulationTrace::max_abs(&trace.energy_drift) < 1e-6);
    assert!(trace.max_momentum_drift() < 1e-8);
    assert!(trace.warnings.is_empty());
}

#[test]
fn contamination_stops_the_run() {
    let rec = soliton(0.1);
    let g = geometry();
    let mut p = Propagator::new(g);
    let mut f = embed_soliton(&rec, [0.0, 0.0], [0.0, 0.0], 0.0, g).unwrap();
    let trace = Recorder::new(&mut p, &f, None)
        .unwrap()
        .with_contamination_limit(0.0)
        .run(&mut f, 1e-3, 1.0, 100)
        .unwrap();
    assert_eq!(trace.warnings.len(), 1);
    assert!(trace.horizon < 1.0);
}

#[test]
fn snapshot_round_trip() {
    let g = Geometry::new(64, 64.0).unwrap();
    let mut f = CartesianField::from_fn(g, |x, y| {
        Complex64::from_polar((-(x * x + y * y) / 8.0).exp(), 0.1 * x - 0.3)
    });
    f.time = 2.5;
    let dir = std::env::temp_dir().join(format!("cqnls-snapshot-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let stem = dir.join("field");
    write_snapshot(&f, &stem).unwrap();
    let back = read_snapshot(&stem).unwrap();
    assert_eq!(back, f);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unperturbed_soliton_stays_on_orbit() {
    let mut cfg = StabilityConfig::new(0.1, 0.0, 2.0);
    cfg.sample_interval = 1.0;
    let out = run_stability_experiment(&cfg).unwrap();
    assert_eq!(out.initial_distance, Some(0.0));
    assert!(out.max_distance.unwrap() < 1e-5);
    assert_eq!(out.trace.orbital_distance.len(), 3);
}
