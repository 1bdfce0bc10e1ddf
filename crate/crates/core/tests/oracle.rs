use fibxy::onebody::{build_hamiltonian, eigenvalues};
use fibxy::oracle::*;
use fibxy::potential::{generate, PotentialSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;

#[test]
fn anticommutation_relations() {
    for n in 1..=5 {
        let cs = jordan_wigner(n).unwrap();
        assert!(car_defect(&cs) <= 1e-12, "n={n}");
        assert!(sigma_z_defect(&cs).unwrap() <= 1e-12, "n={n}");
    }
}

/// Many-body levels are `Σ_{m∈S} 2E_m - Σ_j V_j` over subsets `S` of the
/// one-body levels.
#[test]
fn spectrum_is_free_fermion_sums() {
    for (n, spec) in [(3, PotentialSpec::fibonacci(1.0, 0.0)), (4, PotentialSpec::fibonacci(8.0, 0.3)), (5, PotentialSpec::free())] {
        let h = build_xy(&spec, n).unwrap();
        assert!(h.is_hermitian());
        let mut many: Vec<f64> = h.matrix.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        many.sort_by(f64::total_cmp);
        let e = eigenvalues(&build_hamiltonian(&spec, n).unwrap()).unwrap();
        let shift: f64 = generate(&spec, n).unwrap().values.iter().sum();
        let mut sums: Vec<f64> = (0..1u32 << n)
            .map(|mask| (0..n).filter(|m| mask >> m & 1 == 1).map(|m| 2.0 * e[m]).sum::<f64>() - shift)
            .collect();
        sums.sort_by(f64::total_cmp);
        for (a, b) in many.iter().zip(&sums) {
            assert!((a - b).abs() <= 1e-10, "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn heisenberg_composes() {
    let h = build_xy(&PotentialSpec::fibonacci(8.0, 0.3), 4).unwrap();
    let ev = Evolution::new(&h).unwrap();
    let a = sigma('x', 2, 4).unwrap();
    let once = ev.heisenberg(&a, 2.2).unwrap();
    let twice = ev.heisenberg(&ev.heisenberg(&a, 0.9).unwrap(), 1.3).unwrap();
    let diff = &once.matrix - &twice.matrix;
    assert!(diff.iter().all(|z| z.norm() <= 1e-9));
    assert!((once.norm().unwrap() - 1.0).abs() <= 1e-10);
}

#[test]
fn commutator_norm_edge_cases() {
    let n = 5;
    let h = build_xy(&PotentialSpec::fibonacci(1.0, 0.0), n).unwrap();
    let z1 = sigma('z', 1, n).unwrap();
    let z3 = sigma('z', 3, n).unwrap();
    assert!(exact_commutator_norm(&z1, &z3, &h, 0.0).unwrap() <= 1e-10);
    let x1 = sigma('x', 1, n).unwrap();
    for t in [0.0, 0.5, 4.0] {
        let v = exact_commutator_norm(&x1, &sigma('y', 4, n).unwrap(), &h, t).unwrap();
        assert!(v <= 2.0 + 1e-10);
    }
    let same = exact_commutator_norm(&x1, &sigma('y', 1, n).unwrap(), &h, 0.0).unwrap();
    assert!((same - 2.0).abs() <= 1e-10);
}

#[test]
fn monomial_commutator_matches_dense() {
    let n = 4;
    let h = build_xy(&PotentialSpec::fibonacci(1.0, 0.2), n).unwrap();
    let a = Evolution::new(&h).unwrap().heisenberg(&lowering_op(2, n).unwrap(), 0.8).unwrap();
    for probe in Probe::ALL {
        let b = probe.operator(3, n).unwrap();
        let fast = Monomial::from_dense(&b).unwrap().commutator_with(&a);
        let slow = a.commutator(&b);
        assert!((&fast.matrix - &slow.matrix).iter().all(|z| z.norm() <= 1e-14));
    }
    let dense = DenseOperator { sites: 1, matrix: DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0)) };
    assert!(Monomial::from_dense(&dense).is_none());
}

#[test]
fn free_fermion_reduction() {
    let check = verify_free_fermion(&PotentialSpec::fibonacci(8.0, 0.0), 6, 3, 1.7).unwrap();
    assert!(check.defect <= 1e-8 && check.magnitude_defect <= 1e-8, "{check:?}");
    assert_eq!(check.gauge, Gauge::Identity);
    let zero = verify_free_fermion(&PotentialSpec::fibonacci(8.0, 0.0), 6, 3, 0.0).unwrap();
    assert!(zero.defect <= 1e-12);
    assert!(matches!(verify_free_fermion(&PotentialSpec::free(), 11, 1, 0.0), Err(fibxy::Error::Resource(_))));
}

#[test]
fn sandwich_on_a_small_grid() {
    let grid = OracleGrid {
        sites: vec![2, 5],
        lambdas: vec![0.0, 8.0],
        omegas: vec![0.3],
        times: vec![0.0, 1.7],
        defect_tolerance: 1e-8,
    };
    let report = oracle_check(&grid).unwrap();
    assert!(report.pass, "{report:?}");
    assert_eq!(report.sandwich_violations, 0);
    assert_eq!(report.sandwich_rows, 2 * 2 * 3 * (1 + 10));
    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("\"gauges\""));
}
