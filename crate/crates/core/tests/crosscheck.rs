//! Cross-checks between the analytic solvers and the finite-difference oracle.

use kg_hierarchy::oracle::{self, OracleConfig};
use kg_hierarchy::spectra::{self, EnergyLevel};
use kg_hierarchy::{Complex64, Error, PotentialParams};

fn distinct_normalizable(levels: &[EnergyLevel]) -> usize {
    let mut ns: Vec<usize> = levels.iter().filter(|l| l.is_normalizable()).map(|l| l.n).collect();
    ns.dedup();
    ns.len()
}

#[test]
fn strong_coupling_level_count_matches_oracle() {
    let p = PotentialParams::hermitian(0.0, 2.0, 0.1, 1.0, 1.0).unwrap();
    let levels = spectra::spectrum(&p, 20).unwrap();
    let analytic = distinct_normalizable(&levels);
    // V0 = 0 makes V_eff independent of E, so the oracle count is the number
    // of negative eigenvalues of one discretized operator.
    let d = oracle::discretize(&p, 0.0, &OracleConfig::default()).unwrap();
    let negative = d.matrix.count_below(0.0);
    assert_eq!(analytic, 8);
    assert_eq!(negative, analytic);
}

#[test]
fn weak_coupling_has_no_oracle_bound_state() {
    let p = PotentialParams::hermitian(0.001, 0.001, 5.0, 1.0, 1.0).unwrap();
    assert!(spectra::spectrum(&p, 5).unwrap().is_empty());
    let cfg = OracleConfig {
        richardson: false,
        ..Default::default()
    };
    assert!(matches!(oracle::solve_selfconsistent(&p, 0, &cfg), Err(Error::NoBoundState { k: 0 })));
}

#[test]
fn richardson_estimate_tracks_the_refined_error() {
    // Set C: estimate at n points against the solution on 4n points.
    let p = PotentialParams::hermitian(0.3, 0.5, 0.25, 0.8, 1.0).unwrap();
    let base = OracleConfig {
        n_points: 1000,
        outer_tol: 1e-13,
        ..Default::default()
    };
    let coarse = oracle::solve_selfconsistent(&p, 1, &base).unwrap();
    let fine_cfg = OracleConfig {
        n_points: 4003,
        richardson: false,
        ..base
    };
    let fine = oracle::solve_selfconsistent(&p, 1, &fine_cfg).unwrap();
    assert!(!coarse.is_empty());
    for c in &coarse {
        let f = fine
            .iter()
            .min_by(|a, b| (a.energy - c.energy).abs().total_cmp(&(b.energy - c.energy).abs()))
            .unwrap();
        let est = c.grid_convergence_est.unwrap();
        let actual = (c.energy - f.energy).abs();
        assert!(actual < 10.0 * est, "E={} actual {actual:e} est {est:e}", c.energy);
        assert!(c.outer_iters > 0 && c.outer_iters <= base.max_outer);
    }
}

#[test]
fn oracle_agrees_on_a_negative_deformation() {
    // q < 0 has no pole; the wall sits at x = 0.
    let p = PotentialParams::hermitian(0.2, 1.0, 0.3, -0.5, 1.0).unwrap();
    let levels = spectra::spectrum(&p, 6).unwrap();
    assert!(!levels.is_empty());
    let report = oracle::compare(&p, &levels, &OracleConfig::default()).unwrap();
    assert!(report.passes(1e-3), "{report:?}");
}

#[test]
fn screening_weakens_binding() {
    // Ground-state energy of the lower branch rises toward the threshold as lambda grows.
    let mut prev = f64::NEG_INFINITY;
    for lambda in [0.05, 0.1, 0.2, 0.4] {
        let p = PotentialParams::hermitian(0.25, 0.25, lambda, 1.0, 1.0).unwrap();
        let e0 = spectra::solve_level(&p, 0)
            .unwrap()
            .into_iter()
            .filter(|l| l.is_normalizable())
            .map(|l| l.energy.re)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(e0 > prev, "lambda={lambda}: {e0} <= {prev}");
        prev = e0;
    }
}

#[test]
fn pt_and_hermitian_meet_as_lambda_vanishes() {
    // At lambda -> 0 the level equation degenerates to (S0 E + m V0)^2 = 0 on
    // both branches, so both root pairs collapse onto E = -m V0 / S0.
    let (v0, s0, q, m) = (0.3, 0.5, 0.8, 1.0);
    let target = Complex64::new(-m * v0 / s0, 0.0);
    let mut prev_gap = f64::INFINITY;
    for lambda in [1e-2, 1e-3, 1e-4] {
        let herm = PotentialParams::hermitian(v0, s0, lambda, q, m).unwrap();
        let pt = PotentialParams::pt_symmetric(v0, s0, lambda, q, m).unwrap();
        let hr = spectra::complex_roots(&herm, 0).unwrap();
        let pr = spectra::complex_roots(&pt, 0).unwrap();
        let gap = pr
            .iter()
            .map(|a| hr.iter().map(|b| (a.energy - b.energy).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        let spread = pr.iter().chain(&hr).map(|l| (l.energy - target).norm()).fold(0.0, f64::max);
        assert!(gap < prev_gap, "lambda={lambda}: gap {gap} not below {prev_gap}");
        assert!(spread < 20.0 * lambda.sqrt(), "lambda={lambda}: spread {spread}");
        prev_gap = gap;
    }
}
