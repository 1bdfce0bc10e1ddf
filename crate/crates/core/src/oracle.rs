//! Dense many-body oracle for small XY chains.
//!
//! Operators act on `(C²)^{⊗n}` with site 1 as the most significant factor
//! and basis `(1,0)` = spin up, so `σ^z (1,0) = (1,0)` and the lowering
//! operator `a = (σ^x - iσ^y)/2` annihilates spin down.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::onebody::{build_hamiltonian, eigensolve, propagator_row, SpectralData};
use crate::potential::{generate, PotentialSpec};
use crate::manybody::CommutatorBounds;

/// Largest chain that [`build_xy`] will build.
pub const MAX_BUILD_SITES: usize = 12;
/// Largest chain for Heisenberg evolution and norm scans.
pub const MAX_SCAN_SITES: usize = 10;
/// Relative residual tolerance of the norm iteration.
pub const NORM_TOLERANCE: f64 = 1e-10;
pub const NORM_MAX_ITERATIONS: usize = 4096;
const HERMITIAN_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub sites: usize,
    pub matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn identity(sites: usize) -> Self {
        let d = 1 << sites;
        DenseOperator { sites, matrix: DMatrix::identity(d, d) }
    }

    /// `max |A - A*|` over entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..=i {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOLERANCE
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator { sites: self.sites, matrix: self.matrix.adjoint() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        DenseOperator { sites: self.sites, matrix: &self.matrix * &other.matrix }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        DenseOperator { sites: self.sites, matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix }
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        DenseOperator { sites: self.sites, matrix: &self.matrix * &other.matrix + &other.matrix * &self.matrix }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Spectral norm, see [`spectral_norm`].
    pub fn norm(&self) -> Result<f64> {
        spectral_norm(&self.matrix)
    }
}

fn pauli(name: char) -> DMatrix<Complex64> {
    match name {
        'x' => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        'y' => DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        'z' => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => DMatrix::identity(2, 2),
    }
}

/// Lowering operator `(σ^x - iσ^y)/2`.
fn lowering() -> DMatrix<Complex64> {
    (pauli('x') - pauli('y') * I) * Complex64::new(0.5, 0.0)
}

/// `⊗_{l=1}^{n}` of `factors[l]` (identity where absent).
fn kron_chain(sites: usize, factors: &[(usize, DMatrix<Complex64>)]) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(1, 1, ONE);
    for l in 1..=sites {
        let f = factors.iter().find(|(s, _)| *s == l).map_or_else(|| pauli('1'), |(_, m)| m.clone());
        out = out.kronecker(&f);
    }
    out
}

fn check_sites(n: usize, limit: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("need at least one site"));
    }
    if n > limit {
        return Err(Error::Resource(format!("{n} sites exceeds the dense limit of {limit}")));
    }
    Ok(())
}

fn check_site(n: usize, j: usize) -> Result<()> {
    if j == 0 || j > n {
        return Err(Error::domain(format!("site {j} outside 1..={n}")));
    }
    Ok(())
}

/// Pauli matrix `σ^{name}_j`, `name ∈ {x, y, z}`.
pub fn sigma(name: char, j: usize, n: usize) -> Result<DenseOperator> {
    check_sites(n, MAX_BUILD_SITES)?;
    check_site(n, j)?;
    if !matches!(name, 'x' | 'y' | 'z') {
        return Err(Error::domain(format!("unknown Pauli matrix '{name}'")));
    }
    Ok(DenseOperator { sites: n, matrix: kron_chain(n, &[(j, pauli(name))]) })
}

/// Lowering operator `a_j`.
pub fn lowering_op(j: usize, n: usize) -> Result<DenseOperator> {
    check_sites(n, MAX_BUILD_SITES)?;
    check_site(n, j)?;
    Ok(DenseOperator { sites: n, matrix: kron_chain(n, &[(j, lowering())]) })
}

/// `H^XY_n = -Σ_{j<n} (σ^x_j σ^x_{j+1} + σ^y_j σ^y_{j+1}) + Σ_j V_j σ^z_j`.
pub fn build_xy(spec: &PotentialSpec, n: usize) -> Result<DenseOperator> {
    check_sites(n, MAX_BUILD_SITES)?;
    let v = generate(spec, n)?.values;
    build_xy_from_values(&v)
}

pub fn build_xy_from_values(v: &[f64]) -> Result<DenseOperator> {
    let n = v.len();
    check_sites(n, MAX_BUILD_SITES)?;
    let d = 1 << n;
    let mut h = DMatrix::from_element(d, d, ZERO);
    for j in 1..n {
        for p in ['x', 'y'] {
            h -= kron_chain(n, &[(j, pauli(p)), (j + 1, pauli(p))]);
        }
    }
    for (j, &vj) in v.iter().enumerate() {
        if vj != 0.0 {
            h += kron_chain(n, &[(j + 1, pauli('z'))]) * Complex64::new(vj, 0.0);
        }
    }
    Ok(DenseOperator { sites: n, matrix: h })
}

/// Jordan-Wigner fermions `c_j = σ^z_1⋯σ^z_{j-1} a_j`, `j = 1..=n`.
pub fn jordan_wigner(n: usize) -> Result<Vec<DenseOperator>> {
    check_sites(n, MAX_BUILD_SITES)?;
    Ok((1..=n)
        .map(|j| {
            let mut factors: Vec<(usize, DMatrix<Complex64>)> = (1..j).map(|l| (l, pauli('z'))).collect();
            factors.push((j, lowering()));
            DenseOperator { sites: n, matrix: kron_chain(n, &factors) }
        })
        .collect())
}

/// Largest defect of `{c_j, c_k*} = δ_jk` and `{c_j, c_k} = 0`.
pub fn car_defect(cs: &[DenseOperator]) -> f64 {
    let Some(first) = cs.first() else { return 0.0 };
    let id = DenseOperator::identity(first.sites);
    let mut worst: f64 = 0.0;
    for (j, cj) in cs.iter().enumerate() {
        for (k, ck) in cs.iter().enumerate() {
            let mut a = cj.anticommutator(&ck.adjoint());
            if j == k {
                a.matrix -= &id.matrix;
            }
            worst = worst.max(a.max_abs());
            worst = worst.max(cj.anticommutator(ck).max_abs());
        }
    }
    worst
}

/// Largest defect of `σ^z_l = 2 c_l* c_l - 1`.
pub fn sigma_z_defect(cs: &[DenseOperator]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (l, c) in cs.iter().enumerate() {
        let z = sigma('z', l + 1, c.sites)?;
        let two_n = c.adjoint().mul(c).matrix * Complex64::new(2.0, 0.0) - DMatrix::identity(c.dim(), c.dim());
        worst = worst.max(DenseOperator { sites: c.sites, matrix: two_n - z.matrix }.max_abs());
    }
    Ok(worst)
}

fn split(m: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

fn join(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<Complex64> {
    re.zip_map(im, Complex64::new)
}

/// `Uᵀ A U` or `U A Uᵀ` for real `U`, on the real and imaginary parts.
fn real_sandwich(u: &DMatrix<f64>, a: &DMatrix<Complex64>, forward: bool) -> DMatrix<Complex64> {
    let (re, im) = split(a);
    let conj = |x: &DMatrix<f64>| if forward { u.tr_mul(&(x * u)) } else { u * x * u.transpose() };
    join(&conj(&re), &conj(&im))
}

#[derive(Debug, Clone)]
enum Basis {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// Eigendecomposition of a Hermitian generator, reused across times.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub sites: usize,
    pub energies: Vec<f64>,
    basis: Basis,
}

impl Evolution {
    pub fn new(h: &DenseOperator) -> Result<Self> {
        check_sites(h.sites, MAX_SCAN_SITES)?;
        let defect = h.hermiticity_defect();
        if defect > HERMITIAN_TOLERANCE * h.max_abs().max(1.0) {
            return Err(Error::domain(format!("generator is not Hermitian (defect {defect:e})")));
        }
        let (re, im) = split(&h.matrix);
        let (energies, basis) = if im.amax() == 0.0 {
            let eig = re.symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect(), Basis::Real(eig.eigenvectors))
        } else {
            let eig = h.matrix.clone().symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect(), Basis::Complex(eig.eigenvectors))
        };
        Ok(Evolution { sites: h.sites, energies, basis })
    }

    /// `τ_t(A) = e^{itH} A e^{-itH}`.
    pub fn heisenberg(&self, a: &DenseOperator, t: f64) -> Result<DenseOperator> {
        if a.sites != self.sites {
            return Err(Error::domain("operator and generator act on different chains"));
        }
        let d = a.dim();
        let mut inner = match &self.basis {
            Basis::Real(u) => real_sandwich(u, &a.matrix, true),
            Basis::Complex(u) => u.ad_mul(&(&a.matrix * u)),
        };
        for c in 0..d {
            for r in 0..d {
                inner[(r, c)] *= Complex64::from_polar(1.0, t * (self.energies[r] - self.energies[c]));
            }
        }
        let matrix = match &self.basis {
            Basis::Real(u) => real_sandwich(u, &inner, false),
            Basis::Complex(u) => u * inner * u.adjoint(),
        };
        Ok(DenseOperator { sites: self.sites, matrix })
    }
}

/// `τ_t(A)` for the generator `h`.
pub fn heisenberg(a: &DenseOperator, h: &DenseOperator, t: f64) -> Result<DenseOperator> {
    Evolution::new(h)?.heisenberg(a, t)
}

fn start_vector(d: usize) -> DVector<Complex64> {
    // fixed, generic entries; never orthogonal to a top singular vector in practice
    let v = DVector::from_fn(d, |i, _| Complex64::new(1.0 + 0.37 * ((i as f64) * 1.618).sin(), 0.29 * ((i as f64) * 0.577).cos()));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Spectral norm from the top eigenvalue of `M*M`, by Lanczos iteration
/// (a power iteration that keeps the whole Krylov space) with full
/// reorthogonalization. Stops when the top Ritz pair has residual below
/// [`NORM_TOLERANCE`] relative, or when the Krylov space is exhausted.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> Result<f64> {
    let frob = m.norm();
    if frob <= NORM_TOLERANCE {
        return Ok(frob);
    }
    let d = m.ncols();
    let gram = |v: &DVector<Complex64>| m.ad_mul(&(m * v));
    let mut basis: Vec<DVector<Complex64>> = vec![start_vector(d)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let steps = d.min(NORM_MAX_ITERATIONS);
    for k in 0..steps {
        let mut w = gram(&basis[k]);
        alpha.push(basis[k].dotc(&w).re);
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&w);
                w -= q * c;
            }
        }
        let b = w.norm();
        let exhausted = b <= 1e-14 * frob * frob || k + 1 == steps;
        if exhausted || k % 4 == 3 {
            let (theta, last) = top_ritz(&alpha, &beta);
            if exhausted || b * last.abs() <= NORM_TOLERANCE * theta {
                return Ok(theta.max(0.0).sqrt());
            }
        }
        beta.push(b);
        basis.push(w / Complex64::new(b, 0.0));
    }
    Err(Error::numeric(format!("Lanczos iteration did not converge in {steps} steps")))
}

/// Largest eigenvalue of the Lanczos tridiagonal and the last component of
/// its eigenvector.
fn top_ritz(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let top = (0..k).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap_or(0);
    (eig.eigenvalues[top], eig.eigenvectors[(k - 1, top)])
}

/// `‖[τ_t(A), B]‖` with `τ` generated by `H`.
pub fn exact_commutator_norm(a: &DenseOperator, b: &DenseOperator, h: &DenseOperator, t: f64) -> Result<f64> {
    check_sites(h.sites, MAX_SCAN_SITES)?;
    Evolution::new(h)?.heisenberg(a, t)?.commutator(b).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    Identity,
    Alternating,
}

/// Comparison of `τ_t(c_j)` with `Σ_k (gFg)_{jk} c_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeFermionCheck {
    pub n: usize,
    pub lambda: f64,
    pub omega: f64,
    pub j: usize,
    pub t: f64,
    pub defect_identity: f64,
    pub defect_alternating: f64,
    pub defect: f64,
    pub gauge: Gauge,
    /// `max_k | |tr(c_k* τ_t(c_j))| / 2^{n-1} - |F_jk| |`.
    pub magnitude_defect: f64,
}

/// Everything needed to check one `(spec, n)` at several times.
pub struct ChainOracle {
    pub spec: PotentialSpec,
    pub n: usize,
    pub h: DenseOperator,
    pub evolution: Evolution,
    pub fermions: Vec<DenseOperator>,
    pub spectral: SpectralData,
}

impl ChainOracle {
    pub fn new(spec: &PotentialSpec, n: usize) -> Result<Self> {
        check_sites(n, MAX_SCAN_SITES)?;
        let h = build_xy(spec, n)?;
        let evolution = Evolution::new(&h)?;
        Ok(ChainOracle {
            spec: spec.clone(),
            n,
            evolution,
            h,
            fermions: jordan_wigner(n)?,
            spectral: eigensolve(&build_hamiltonian(spec, n)?)?,
        })
    }

    pub fn verify_free_fermion(&self, j: usize, t: f64) -> Result<FreeFermionCheck> {
        check_site(self.n, j)?;
        let evolved = self.evolution.heisenberg(&self.fermions[j - 1], t)?;
        let row = propagator_row(&self.spectral, j, t)?;
        let combo = |alternate: bool| -> Result<f64> {
            let mut m = evolved.matrix.clone();
            for (k, ck) in self.fermions.iter().enumerate() {
                let sign = if alternate && (j + k + 1) % 2 == 1 { -1.0 } else { 1.0 };
                m -= &ck.matrix * (row.amplitudes[k] * sign);
            }
            spectral_norm(&m)
        };
        let defect_identity = combo(false)?;
        let defect_alternating = combo(true)?;
        // ties (t = 0, or F with a single nonzero entry) go to the identity
        let (defect, gauge) = if defect_identity <= defect_alternating + 1e-12 {
            (defect_identity, Gauge::Identity)
        } else {
            (defect_alternating, Gauge::Alternating)
        };
        let scale = (1u64 << (self.n - 1)) as f64;
        let mut magnitude_defect: f64 = 0.0;
        for (k, ck) in self.fermions.iter().enumerate() {
            let coeff = ck.matrix.dotc(&evolved.matrix) / scale;
            magnitude_defect = magnitude_defect.max((coeff.norm() - row.amplitudes[k].norm()).abs());
        }
        Ok(FreeFermionCheck {
            n: self.n,
            lambda: self.spec.lambda,
            omega: self.spec.omega,
            j,
            t,
            defect_identity,
            defect_alternating,
            defect,
            gauge,
            magnitude_defect,
        })
    }
}

/// `min` over the two gauges of `‖τ_t(c_j) - Σ_k (gF(t)g)_{jk} c_k‖`.
pub fn verify_free_fermion(spec: &PotentialSpec, n: usize, j: usize, t: f64) -> Result<FreeFermionCheck> {
    ChainOracle::new(spec, n)?.verify_free_fermion(j, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    /// `a_{j′}`
    Lowering,
    /// `a_{j′}*`
    Raising,
    /// `σ^z_{j′}`
    SigmaZ,
}

impl Probe {
    pub const ALL: [Probe; 3] = [Probe::Lowering, Probe::Raising, Probe::SigmaZ];

    /// Whether `‖[τ_t(c_j), B]‖ ≥ |F_{jj′}(t)|` holds. For `a_{j′}*` this is
    /// the exact lower bound; for `σ^z_{j′}` the commutator is
    /// `2F_{jj′} c_{j′}`-like with norm `2|F_{jj′}|`. For `a_{j′}` it fails:
    /// `[c_k, a_{j′}] = 0` for `k ≤ j′`.
    pub fn has_lower_bound(self) -> bool {
        self != Probe::Lowering
    }

    pub fn operator(self, jp: usize, n: usize) -> Result<DenseOperator> {
        match self {
            Probe::Lowering => lowering_op(jp, n),
            Probe::Raising => Ok(lowering_op(jp, n)?.adjoint()),
            Probe::SigmaZ => sigma('z', jp, n),
        }
    }
}

/// Operator with at most one nonzero entry per column: `B e_c = b_c e_{π(c)}`.
/// Every product of single-site Pauli and ladder operators has this form.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub sites: usize,
    pub columns: Vec<Option<(usize, Complex64)>>,
}

impl Monomial {
    pub fn from_dense(b: &DenseOperator) -> Option<Self> {
        let d = b.dim();
        let mut columns = Vec::with_capacity(d);
        for c in 0..d {
            let mut hit = None;
            for r in 0..d {
                let z = b.matrix[(r, c)];
                if z != ZERO {
                    if hit.is_some() {
                        return None;
                    }
                    hit = Some((r, z));
                }
            }
            columns.push(hit);
        }
        Some(Monomial { sites: b.sites, columns })
    }

    /// `[A, B]` in `O(d²)`.
    pub fn commutator_with(&self, a: &DenseOperator) -> DenseOperator {
        let d = a.dim();
        let m = &a.matrix;
        let mut out = DMatrix::from_element(d, d, ZERO);
        for (c, col) in self.columns.iter().enumerate() {
            if let Some((target, z)) = *col {
                // (AB) e_c = z A e_target
                for r in 0..d {
                    out[(r, c)] += z * m[(r, target)];
                }
                // (BA)[target, :] += z A[c, :]
                for k in 0..d {
                    out[(target, k)] -= z * m[(c, k)];
                }
            }
        }
        DenseOperator { sites: a.sites, matrix: out }
    }
}

/// Exact norms against the one-body bounds at one `(t, j, j′, B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub t: f64,
    pub j: usize,
    pub j_prime: usize,
    pub probe: Probe,
    pub lower: f64,
    /// `‖[τ_t(c_j), B]‖`
    pub fermion_norm: f64,
    /// `‖[τ_t(a_j), B]‖`
    pub spin_norm: f64,
    pub fermi_envelope: f64,
    pub spin_envelope: f64,
    /// `lower > ‖[τ_t(c_j), B]‖ + tol`. A violation only where the lower
    /// bound is a theorem, i.e. for `a_{j′}*` and `σ^z_{j′}`.
    pub lower_exceeds_norm: bool,
    pub violations: Vec<String>,
}

/// Tolerance for every inequality of the sandwich.
pub const SANDWICH_TOLERANCE: f64 = 1e-8;

impl ChainOracle {
    /// Checks `lower ≤ ‖[τ(c_j),B]‖ ≤ fermi ≤ spin`, `‖[τ(a_j),B]‖ ≤ spin`
    /// and `‖[τ(A),B]‖ ≤ 2` for every pair `j < j′` and probe, the first
    /// inequality only where [`Probe::has_lower_bound`].
    pub fn sandwich(&self, t: f64) -> Result<Vec<SandwichRow>> {
        let n = self.n;
        let rows = (1..=n).map(|l| propagator_row(&self.spectral, l, t)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for j in 1..n {
            let tc = self.evolution.heisenberg(&self.fermions[j - 1], t)?;
            let ta = self.evolution.heisenberg(&lowering_op(j, n)?, t)?;
            for jp in j + 1..=n {
                let bounds = CommutatorBounds::from_rows(&rows, j, jp, t)?;
                for probe in Probe::ALL {
                    let b = Monomial::from_dense(&probe.operator(jp, n)?)
                        .ok_or_else(|| Error::numeric("probe operator is not monomial"))?;
                    let fermion_norm = b.commutator_with(&tc).norm()?;
                    let spin_norm = b.commutator_with(&ta).norm()?;
                    let tol = SANDWICH_TOLERANCE;
                    let mut violations = Vec::new();
                    let mut check = |ok: bool, what: &str| {
                        if !ok {
                            violations.push(what.to_string());
                        }
                    };
                    let lower_exceeds_norm = bounds.lower > fermion_norm + tol;
                    check(!(lower_exceeds_norm && probe.has_lower_bound()), "lower > fermion norm");
                    check(fermion_norm <= bounds.fermi_envelope + tol, "fermion norm > fermi envelope");
                    check(bounds.fermi_envelope <= bounds.spin_envelope + tol, "fermi envelope > spin envelope");
                    check(spin_norm <= bounds.spin_envelope + tol, "spin norm > spin envelope");
                    check(fermion_norm.max(spin_norm) <= 2.0 + tol, "norm > 2");
                    out.push(SandwichRow {
                        t,
                        j,
                        j_prime: jp,
                        probe,
                        lower: bounds.lower,
                        fermion_norm,
                        spin_norm,
                        fermi_envelope: bounds.fermi_envelope,
                        spin_envelope: bounds.spin_envelope,
                        lower_exceeds_norm,
                        violations,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Grid for [`oracle_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleGrid {
    pub sites: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub times: Vec<f64>,
    pub defect_tolerance: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid {
            sites: (2..=8).collect(),
            lambdas: vec![0.0, 1.0, 8.0],
            omegas: vec![0.0, 0.3],
            times: vec![0.0, 0.5, 1.7, 4.0],
            defect_tolerance: 1e-8,
        }
    }
}

impl OracleGrid {
    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() || self.lambdas.is_empty() || self.omegas.is_empty() || self.times.is_empty() {
            return Err(Error::domain("oracle grid has an empty axis"));
        }
        for &n in &self.sites {
            check_sites(n, MAX_SCAN_SITES)?;
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::domain("oracle couplings must be finite and >= 0"));
        }
        if self.omegas.iter().chain(&self.times).any(|x| !x.is_finite()) {
            return Err(Error::domain("oracle phases and times must be finite"));
        }
        if !(self.defect_tolerance > 0.0) {
            return Err(Error::domain("oracle defect tolerance must be positive"));
        }
        Ok(())
    }
}

/// Results for one `(n, λ, ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub n: usize,
    pub lambda: f64,
    pub omega: f64,
    pub free_fermion: Vec<FreeFermionCheck>,
    pub sandwich_rows: usize,
    pub sandwich_violations: Vec<SandwichRow>,
    /// Rows with `B = a_{j′}` where the lower bound exceeds the norm.
    pub lowering_exceedances: usize,
    pub max_defect: f64,
    pub max_magnitude_defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub grid: OracleGrid,
    pub points: Vec<OraclePoint>,
    pub max_defect: f64,
    pub sandwich_rows: usize,
    pub sandwich_violations: usize,
    pub lowering_exceedances: usize,
    pub gauges: Vec<Gauge>,
    pub pass: bool,
}

fn check_point(grid: &OracleGrid, n: usize, lambda: f64, omega: f64) -> Result<OraclePoint> {
    let oracle = ChainOracle::new(&PotentialSpec::fibonacci(lambda, omega), n)?;
    let mut free_fermion = Vec::new();
    let mut sandwich_rows = 0;
    let mut sandwich_violations = Vec::new();
    let mut lowering_exceedances = 0;
    for &t in &grid.times {
        for j in 1..=n {
            free_fermion.push(oracle.verify_free_fermion(j, t)?);
        }
        let rows = oracle.sandwich(t)?;
        sandwich_rows += rows.len();
        lowering_exceedances += rows.iter().filter(|r| r.lower_exceeds_norm && !r.probe.has_lower_bound()).count();
        sandwich_violations.extend(rows.into_iter().filter(|r| !r.violations.is_empty()));
    }
    let max_defect = free_fermion.iter().fold(0.0, |m: f64, c| m.max(c.defect));
    let max_magnitude_defect = free_fermion.iter().fold(0.0, |m: f64, c| m.max(c.magnitude_defect));
    let pass = max_defect <= grid.defect_tolerance
        && max_magnitude_defect <= grid.defect_tolerance
        && sandwich_violations.is_empty();
    Ok(OraclePoint {
        n,
        lambda,
        omega,
        free_fermion,
        sandwich_rows,
        sandwich_violations,
        lowering_exceedances,
        max_defect,
        max_magnitude_defect,
        pass,
    })
}

/// Free-fermion reduction and commutator sandwich over a grid of chains.
pub fn oracle_check(grid: &OracleGrid) -> Result<OracleReport> {
    grid.validate()?;
    let jobs: Vec<(usize, f64, f64)> = grid
        .sites
        .iter()
        .flat_map(|&n| grid.lambdas.iter().flat_map(move |&l| grid.omegas.iter().map(move |&w| (n, l, w))))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(n, l, w)| check_point(grid, n, l, w))
        .collect::<Result<Vec<_>>>()?;
    let mut gauges: Vec<Gauge> = points.iter().flat_map(|p| p.free_fermion.iter().map(|c| c.gauge)).collect();
    gauges.sort_by_key(|g| *g as u8);
    gauges.dedup();
    Ok(OracleReport {
        grid: grid.clone(),
        max_defect: points.iter().fold(0.0, |m: f64, p| m.max(p.max_defect)),
        sandwich_rows: points.iter().map(|p| p.sandwich_rows).sum(),
        sandwich_violations: points.iter().map(|p| p.sandwich_violations.len()).sum(),
        lowering_exceedances: points.iter().map(|p| p.lowering_exceedances).sum(),
        pass: points.iter().all(|p| p.pass),
        gauges,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_field() {
        let h = build_xy_from_values(&[0.7]).unwrap();
        assert_eq!(h.matrix[(0, 0)], Complex64::new(0.7, 0.0));
        assert_eq!(h.matrix[(1, 1)], Complex64::new(-0.7, 0.0));
        assert_eq!(h.matrix[(0, 1)], ZERO);
    }

    #[test]
    fn two_site_chain_is_traceless_and_hermitian() {
        let h = build_xy(&PotentialSpec::free(), 2).unwrap();
        assert!(h.is_hermitian());
        assert!(h.matrix.trace().norm() < 1e-15);
        let mut e: Vec<f64> = h.matrix.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn first_fermion_is_lowering() {
        let cs = jordan_wigner(1).unwrap();
        assert_eq!(cs[0].matrix, lowering());
        assert!(lowering_op(2, 1).is_err());
        assert!(matches!(build_xy(&PotentialSpec::free(), 13), Err(Error::Resource(_))));
    }

    #[test]
    fn heisenberg_trivial_and_unitary() {
        let h = build_xy(&PotentialSpec::fibonacci(1.0, 0.3), 4).unwrap();
        let ev = Evolution::new(&h).unwrap();
        let c = &jordan_wigner(4).unwrap()[2];
        let same = ev.heisenberg(c, 0.0).unwrap();
        assert!(DenseOperator { sites: 4, matrix: &same.matrix - &c.matrix }.max_abs() < 1e-13);
        let moved = ev.heisenberg(c, 1.3).unwrap();
        assert!((moved.norm().unwrap() - c.norm().unwrap()).abs() < 1e-10);
        let mut bad = h.clone();
        bad.matrix[(0, 1)] += ONE;
        assert!(Evolution::new(&bad).is_err());
    }

    #[test]
    fn power_iteration_agrees_with_eigen() {
        let h = build_xy(&PotentialSpec::fibonacci(8.0, 0.0), 5).unwrap();
        let ev = Evolution::new(&h).unwrap();
        let b = sigma('x', 4, 5).unwrap();
        for t in [0.5, 1.7] {
            let c = ev.heisenberg(&lowering_op(2, 5).unwrap(), t).unwrap().commutator(&b);
            let gram = c.matrix.adjoint() * &c.matrix;
            let top = gram.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |m, x| m.max(*x)).sqrt();
            assert!((c.norm().unwrap() - top).abs() <= 1e-9 * top, "{} vs {top}", c.norm().unwrap());
        }
        let zero = DMatrix::from_element(8, 8, ZERO);
        assert_eq!(spectral_norm(&zero).unwrap(), 0.0);
    }
}
