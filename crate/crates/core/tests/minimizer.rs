use cqnls::branch::*;
use cqnls::functionals::report;
use cqnls::ground_state::{solve_cubic_ground_state, ShootingConfig};
use cqnls::minimizer::*;

#[test]
fn minimizer_agrees_with_shooting_from_two_seeds() {
    let townes = solve_cubic_ground_state(&ShootingConfig::for_cubic())
        .unwrap()
        .mass();
    let grid = omega_grid(10, 0.01, 0.17, OmegaSpacing::Log).unwrap();
    let table = scan_branch(&grid, &ShootingConfig::for_branch(0.01, 0.17)).unwrap();
    let cfg = FlowConfig::default();
    let m = 1.5 * townes;
    let mut omegas = Vec::new();
    for width in [1.5, 6.0] {
        let seed = gaussian_seed(&cfg.grid, width).unwrap();
        let res = minimize_from(m, townes, &seed, &cfg).unwrap();
        assert!((res.mass - m).abs() < 1e-10 * m);
        assert!(res.energy < 0.0);
        assert!(res.max_energy_increase <= 0.0);
        let cmp = compare_to_branch(&res, &table, &InversionConfig::default()).unwrap();
        assert!(cmp.sup_distance <= 1e-4, "sup {:e}", cmp.sup_distance);
        assert!(cmp.multiplier_gap <= 1e-5, "gap {:e}", cmp.multiplier_gap);
        omegas.push(res.multiplier);
        let quadrature_mass = report(&res.profile).unwrap().mass;
        assert!((quadrature_mass - m).abs() < 1e-5 * m);
        let witness = verify_negative_energy_by_scaling(quadrature_mass, &res.profile).unwrap();
        assert!(witness.energy < 0.0);
    }
    assert!((omegas[0] - omegas[1]).abs() < 1e-8);
}

#[test]
fn threshold_mass_is_a_domain_error() {
    let townes = solve_cubic_ground_state(&ShootingConfig::for_cubic())
        .unwrap()
        .mass();
    let err = minimize_energy_at_mass(townes, townes, &FlowConfig::default()).unwrap_err();
    assert_eq!(err.kind(), "mass_not_above_threshold");
}
