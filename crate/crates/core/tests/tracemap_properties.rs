use fibxy::potential::{generate, PotentialSpec};
use fibxy::tracemap::{
    band_roots, fibonacci_number, fibonacci_sandwich, trace_orbit, transfer_matrix, transfer_product,
    transfer_product_reversed,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn sample_energies(lambda: f64, count: usize) -> Vec<f64> {
    // irrational offsets keep samples off special points
    (0..count).map(|i| -3.0 + (lambda + 6.0) * ((i as f64 + 0.5) / count as f64) + 1e-3 * (i as f64).sqrt()).collect()
}

#[test]
fn recursion_matches_direct_products() {
    for lambda in [1.0, 8.0] {
        let values = generate(&PotentialSpec::fibonacci(lambda, 0.0), 400).unwrap().values;
        for e in sample_energies(lambda, 20) {
            let z = Complex64::new(e, 0.0);
            let orbit = trace_orbit(z, lambda, 12).unwrap();
            for m in 1..=12 {
                let sites = fibonacci_number(m as u32 + 1).unwrap() as usize;
                let direct = transfer_product(&values[..sites], z).half_trace();
                let rec = orbit.x(m as i64).to_complex();
                let err = (direct - rec).norm() / rec.norm().max(1.0);
                assert!(err <= 1e-8, "λ={lambda} E={e} M={m}: {err:e}");
            }
            assert!(orbit.fricke_defects().iter().all(|d| *d <= 1e-9), "λ={lambda} E={e}");
            assert!(orbit.recursion_residuals().iter().all(|r| *r <= 1e-10));
        }
    }
}

#[test]
fn multiplication_order_does_not_change_traces() {
    let values = generate(&PotentialSpec::fibonacci(2.5, 0.0), 233).unwrap().values;
    for e in sample_energies(2.5, 10) {
        let z = Complex64::new(e, 0.05);
        for m in [1usize, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233] {
            let a = transfer_product(&values[..m], z).half_trace();
            let b = transfer_product_reversed(&values[..m], z).half_trace();
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0), "m={m}");
        }
    }
}

#[test]
fn band_root_counts() {
    for lambda in [8.0, 12.0] {
        for k in 1..=12usize {
            let r = band_roots(lambda, k).unwrap();
            assert_eq!(r.count() as u64, fibonacci_number(k as u32 + 1).unwrap());
            assert!(r.roots.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn sandwich_exhaustive() {
    for l in 1..=30 {
        assert!(fibonacci_sandwich(l).unwrap(), "l={l}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_determinant_is_one(
        lambda in 0.0f64..10.0,
        omega in 0.0f64..1.0,
        re in -4.0f64..14.0,
        im in -1.0f64..1.0,
        m in 0usize..120,
    ) {
        let phi = transfer_matrix(&PotentialSpec::fibonacci(lambda, 0.0), Complex64::new(re, im), m, omega).unwrap();
        prop_assert!(phi.det_defect() <= 1e-10);
    }

    #[test]
    fn fricke_invariant_along_orbits(lambda in 0.0f64..10.0, re in -4.0f64..14.0, im in -1.0f64..1.0) {
        let o = trace_orbit(Complex64::new(re, im), lambda, 25).unwrap();
        prop_assert!(o.fricke_defects().iter().all(|d| *d <= 1e-9));
    }

    #[test]
    fn transfer_matrix_transports_solutions(
        lambda in 0.0f64..8.0,
        omega in 0.0f64..1.0,
        e in -3.0f64..11.0,
        u0 in -1.0f64..1.0,
        u1 in -1.0f64..1.0,
        m in 1usize..=100,
    ) {
        let spec = PotentialSpec::fibonacci(lambda, omega);
        let v = generate(&spec, m).unwrap().values;
        let z = Complex64::new(e, 0.0);
        let (mut prev, mut cur) = (Complex64::new(u0, 0.0), Complex64::new(u1, 0.0));
        for vi in &v {
            let next = (z - vi) * cur - prev;
            (prev, cur) = (cur, next);
        }
        let phi = transfer_matrix(&spec, z, m, omega).unwrap();
        let out = phi.apply([Complex64::new(u1, 0.0), Complex64::new(u0, 0.0)]);
        let scale = phi.norm().max(1.0);
        prop_assert!((out[0] - cur).norm() <= 1e-9 * scale);
        prop_assert!((out[1] - prev).norm() <= 1e-9 * scale);
    }
}
