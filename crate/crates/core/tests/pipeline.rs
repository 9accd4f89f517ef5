//! Cross-module checks against closed-form oracles.

use std::f64::consts::PI;

use divspec::discretize::{assemble, Boundary, Grid};
use divspec::liouville::{schrodinger_operator, transform};
use divspec::metric::{verify_heat_bound, MetricField};
use divspec::spectral::{eigensolve, heat, lowest_eigenvalues, resolvent};
use divspec::{CoefficientProfile, Tolerances};

/// Eigenvalues of the three-point Dirichlet Laplacian: `(4/h^2) sin^2(k pi h / 2L)`.
fn discrete_dirichlet(len: f64, n: usize, k: usize) -> f64 {
    let h = len / (n + 1) as f64;
    let s = (k as f64 * PI * h / (2.0 * len)).sin();
    4.0 * s * s / (h * h)
}

#[test]
fn uniform_spectrum_matches_the_discrete_sine_basis() {
    let (n, value) = (300, 2.5);
    let op = assemble(&CoefficientProfile::uniform(value).unwrap(), &Grid::line(-1.0, 2.0, n).unwrap(), Boundary::Dirichlet)
        .unwrap();
    let data = eigensolve(&op, 10).unwrap();
    for (k, l) in data.eigenvalues.iter().enumerate() {
        let want = value * discrete_dirichlet(3.0, n, k + 1);
        assert!((l - want).abs() <= 1e-10 * want, "k={k}: {l} vs {want}");
    }
}

#[test]
fn resolvent_and_heat_share_eigenvectors() {
    let op = assemble(
        &CoefficientProfile::periodic(2.0, 1.0, 1.0).unwrap(),
        &Grid::line(0.0, 3.0, 120).unwrap(),
        Boundary::Dirichlet,
    )
    .unwrap();
    let data = eigensolve(&op, 4).unwrap();
    let r = resolvent(&op, 0.5).unwrap();
    let e = heat(&op, 0.01).unwrap();
    let v = data.eigenvectors.unwrap();
    for (c, l) in data.eigenvalues.iter().enumerate() {
        let col = v.column(c);
        let rv = &r * col;
        let ev = &e * col;
        assert!((rv - col / (l + 0.5)).norm() < 1e-10);
        assert!((ev - col * (-0.01 * l).exp()).norm() < 1e-10);
    }
}

#[test]
fn liouville_pair_shares_its_low_spectrum() {
    let p = CoefficientProfile::exp_decay(1.0).unwrap();
    let tr = transform(&p, (-3.0, 1.0)).unwrap();
    let (lo, hi) = tr.s_range();
    let n = 2000;
    let x = lowest_eigenvalues(&assemble(&p, &Grid::line(-3.0, 1.0, n).unwrap(), Boundary::Dirichlet).unwrap(), 4).unwrap();
    let s = lowest_eigenvalues(&schrodinger_operator(&tr, &Grid::line(lo, hi, n).unwrap()).unwrap(), 4).unwrap();
    for (a, b) in x.iter().zip(&s) {
        assert!((a - b).abs() < 2e-3 * a, "{a} vs {b}");
    }
}

#[test]
fn heat_bound_holds_for_a_power_profile() {
    let p = CoefficientProfile::power(1.0).unwrap();
    let grid = Grid::line(0.25, 4.0, 299).unwrap();
    let op = assemble(&p, &grid, Boundary::Dirichlet).unwrap();
    let metric = MetricField::closed_1d(&p, 0.25, 4.0, 2048).unwrap();
    let pairs = vec![
        ((0..20).collect(), (100..140).collect()),
        ((150..160).collect(), (280..299).collect()),
        ((40..50).collect(), (52..60).collect()),
    ];
    let audit = verify_heat_bound(&op, &metric, &pairs, &[0.05, 0.5], &Tolerances::default()).unwrap();
    assert_eq!(audit.violations(), 0, "{audit:?}");
    assert_eq!(audit.rows.len(), 6);
}
