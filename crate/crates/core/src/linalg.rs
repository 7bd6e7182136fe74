//! Dense complex matrix kernel.
//!
//! Everything here works on small (d ≲ 32) dense matrices. Hermitian
//! eigendecompositions use a cyclic complex Jacobi sweep, which is accurate
//! to a few ulps at these sizes and needs no external LAPACK.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative Hermiticity tolerance: ‖A − A†‖_max ≤ tol · (1 + ‖A‖_max).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues of a PSD input below `-PSD_FLOOR` are an error, above it they are clipped to zero.
pub const PSD_FLOOR: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real part of the trace.
pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

/// `AB − BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `AB + BA`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// `(A + A†)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Pauli matrices σx, σy, σz.
pub fn pauli() -> [CMatrix; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// A complex matrix known to be Hermitian within [`HERMITIAN_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates squareness, finiteness and Hermiticity, then stores the
    /// exact Hermitian part so downstream code sees a symmetric matrix.
    pub fn new(a: CMatrix) -> Result<Self> {
        check_hermitian(&a)?;
        Ok(Self(hermitian_part(&a)))
    }

    /// Takes the Hermitian part without validating.
    pub fn from_hermitian_part(a: &CMatrix) -> Self {
        Self(hermitian_part(a))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(diag[i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        }))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.0)
    }

    pub fn eigen(&self) -> EigenSystem {
        jacobi_eigen(&self.0)
    }

    /// Applies `f` to the spectrum: `U f(Λ) U†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let es = self.eigen();
        let vals: Vec<f64> = es.values.iter().map(|&l| f(l)).collect();
        HermitianMatrix::from_hermitian_part(&es.compose(&vals))
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix(self.0.map(|z| z * s))
    }
}

impl std::ops::Deref for HermitianMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    let tolerance = HERMITIAN_TOL * (1.0 + max_abs(a));
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            let deviation = (a[(i, j)] - a[(j, i)].conj()).norm();
            if deviation > tolerance {
                return Err(Error::NotHermitian {
                    deviation,
                    tolerance,
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

/// Spectral decomposition `A = U Λ U†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector paired with `values[k]`.
    pub vectors: CMatrix,
}

impl EigenSystem {
    /// `U diag(vals) U†` for an arbitrary replacement spectrum.
    pub fn compose(&self, vals: &[f64]) -> CMatrix {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (k, &v) in vals.iter().enumerate() {
            for i in 0..n {
                scaled[(i, k)] *= v;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.compose(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Validating entry point for the Hermitian eigensolver.
pub fn eig_hermitian(a: &CMatrix) -> Result<EigenSystem> {
    check_hermitian(a)?;
    Ok(jacobi_eigen(&hermitian_part(a)))
}

/// Cyclic Jacobi for a complex Hermitian matrix.
///
/// Each rotation first removes the phase of `a_pq` with a diagonal unitary,
/// then applies the classical real Jacobi rotation to the resulting real
/// symmetric 2x2 block.
fn jacobi_eigen(input: &CMatrix) -> EigenSystem {
    let n = input.nrows();
    let mut a = input.clone();
    let mut v = CMatrix::identity(n, n);
    let scale = frobenius(input).max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g <= 1e-300 {
                    continue;
                }
                let phase = apq / g;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * g);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                // J = diag(1, conj(phase)) · [[c, s], [-s, c]]
                let jpp = c(cs, 0.0);
                let jpq = c(sn, 0.0);
                let jqp = phase.conj() * (-sn);
                let jqq = phase.conj() * cs;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = c(0.0, 0.0);
                a[(q, p)] = c(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    EigenSystem { values, vectors }
}

/// Principal square root of a PSD matrix; eigenvalues in `[-PSD_FLOOR, 0)` are clipped.
pub fn psd_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let es = a.eigen();
    if es.min() < -PSD_FLOOR {
        return Err(Error::NotPsd {
            min_eigenvalue: es.min(),
            floor: PSD_FLOOR,
        });
    }
    let vals: Vec<f64> = es.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(HermitianMatrix::from_hermitian_part(&es.compose(&vals)))
}

/// Σ|λᵢ(A)|.
pub fn trabs_hermitian(a: &HermitianMatrix) -> f64 {
    a.eigen().values.iter().map(|l| l.abs()).sum()
}

/// TrAbs of `ρ[X₁, X₂]`, evaluated as the trace norm of the Hermitian
/// matrix `i √ρ [X₁, X₂] √ρ`.
pub fn trabs_rho_commutator(
    rho: &HermitianMatrix,
    x1: &HermitianMatrix,
    x2: &HermitianMatrix,
) -> Result<f64> {
    let d = rho.dim();
    for x in [x1, x2] {
        if x.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.dim(),
            });
        }
    }
    let sqrt_rho = psd_sqrt(rho)?;
    Ok(trabs_commutator_sqrt(
        sqrt_rho.matrix(),
        x1.matrix(),
        x2.matrix(),
    ))
}

/// Same as [`trabs_rho_commutator`] with a precomputed `√ρ`.
///
/// The two orderings are evaluated and averaged so that swapping `x1` and
/// `x2` gives a bitwise-identical result.
pub fn trabs_commutator_sqrt(sqrt_rho: &CMatrix, x1: &CMatrix, x2: &CMatrix) -> f64 {
    let p = x1 * x2;
    let q = x2 * x1;
    let h = rho_commutator_hermitian(sqrt_rho, &p, &q);
    let h_swapped = rho_commutator_hermitian(sqrt_rho, &q, &p);
    let a: f64 = h.eigen().values.iter().map(|l| l.abs()).sum();
    let b: f64 = h_swapped.eigen().values.iter().map(|l| l.abs()).sum();
    0.5 * (a + b)
}

/// `i √ρ (P − Q) √ρ` as a Hermitian matrix (P − Q must be anti-Hermitian).
fn rho_commutator_hermitian(sqrt_rho: &CMatrix, p: &CMatrix, q: &CMatrix) -> HermitianMatrix {
    let inner = (p - q).map(|z| z * c(0.0, 1.0));
    HermitianMatrix::from_hermitian_part(&(sqrt_rho * inner * sqrt_rho))
}

/// Coordinates in the orthonormal Hermitian basis
/// `{E_kk} ∪ {(E_jk + E_kj)/√2} ∪ {i(E_kj − E_jk)/√2}` (j < k), so that
/// `Tr[A B] = ⟨coords(A), coords(B)⟩` for Hermitian `A`, `B`.
pub fn hermitian_coords(a: &CMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(a[(i, i)].re);
    }
    let s = std::f64::consts::SQRT_2;
    for j in 0..n {
        for k in (j + 1)..n {
            let z = 0.5 * (a[(j, k)] + a[(k, j)].conj());
            out.push(s * z.re);
            out.push(-s * z.im);
        }
    }
    out
}

/// Inverse of [`hermitian_coords`].
pub fn hermitian_from_coords(n: usize, x: &[f64]) -> CMatrix {
    debug_assert_eq!(x.len(), n * n);
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(x[i], 0.0);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut idx = n;
    for j in 0..n {
        for k in (j + 1)..n {
            let z = c(x[idx] * s, -x[idx + 1] * s);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
            idx += 2;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        hermitian_part(&a)
    }

    #[test]
    fn identity_spectrum() {
        let es = eig_hermitian(&CMatrix::identity(3, 3)).unwrap();
        assert_eq!(es.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn pauli_x_spectrum() {
        let es = eig_hermitian(&pauli()[0]).unwrap();
        assert!((es.values[0] + 1.0).abs() < 1e-15);
        assert!((es.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3, 4, 6, 9, 16] {
            for _ in 0..20 {
                let a = random_hermitian(n, &mut rng);
                let es = eig_hermitian(&a).unwrap();
                let resid = frobenius(&(es.reconstruct() - &a));
                assert!(
                    resid <= 1e-10 * (1.0 + frobenius(&a)),
                    "n={n} resid={resid}"
                );
                let u = &es.vectors;
                let orth = frobenius(&(u.adjoint() * u - CMatrix::identity(n, n)));
                assert!(orth <= 1e-10);
                assert!(es.values.windows(2).all(|w| w[0] <= w[1]));
                let tr = trace_re(&a);
                let sum: f64 = es.values.iter().sum();
                assert!((sum - tr).abs() <= 1e-10 * (1.0 + tr.abs()));
            }
        }
    }

    #[test]
    fn agrees_with_nalgebra_symmetric_eigen() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 4, 5] {
            let a = random_hermitian(n, &mut rng);
            let mut ours = eig_hermitian(&a).unwrap().values;
            let mut theirs: Vec<f64> = a
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            ours.sort_by(f64::total_cmp);
            theirs.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let a =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        match eig_hermitian(&a) {
            Err(Error::NotHermitian { tolerance, .. }) => assert!(tolerance > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sqrt_of_diagonal() {
        let a = HermitianMatrix::from_real_diagonal(&[4.0, 9.0]);
        let s = psd_sqrt(&a).unwrap();
        assert!((s[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((s[(1, 1)].re - 3.0).abs() < 1e-14);
        assert!(s[(0, 1)].norm() < 1e-14);
        let id = psd_sqrt(&HermitianMatrix::identity(3)).unwrap();
        assert!(frobenius(&(id.matrix() - CMatrix::identity(3, 3))) < 1e-14);
    }

    #[test]
    fn sqrt_of_gram_matrix_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3, 5] {
            let g = CMatrix::from_fn(n, n, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let mut a = &g * g.adjoint();
            let tr = trace_re(&a);
            a /= c(tr, 0.0);
            let a = HermitianMatrix::new(a).unwrap();
            let s = psd_sqrt(&a).unwrap();
            let resid = frobenius(&(s.matrix() * s.matrix() - a.matrix()));
            assert!(resid <= 1e-9 * (1.0 + frobenius(a.matrix())));
            assert!(s.eigen().min() >= -1e-14);
        }
    }

    #[test]
    fn sqrt_rejects_negative() {
        let a = HermitianMatrix::from_real_diagonal(&[1.0, -1e-6]);
        assert!(matches!(psd_sqrt(&a), Err(Error::NotPsd { .. })));
        let clipped = psd_sqrt(&HermitianMatrix::from_real_diagonal(&[1.0, -1e-12])).unwrap();
        assert_eq!(clipped[(1, 1)].re, 0.0);
    }

    #[test]
    fn trabs_examples() {
        let sz = HermitianMatrix::new(pauli()[2].clone()).unwrap();
        assert!((trabs_hermitian(&sz) - 2.0).abs() < 1e-15);
        assert!(
            (trabs_hermitian(&HermitianMatrix::from_real_diagonal(&[3.0, -1.0])) - 4.0).abs()
                < 1e-15
        );
        assert_eq!(trabs_hermitian(&HermitianMatrix::zeros(3)), 0.0);
    }

    #[test]
    fn trabs_commutator_maximally_mixed() {
        let [sx, sy, _] = pauli();
        let rho = HermitianMatrix::identity(2).scale(0.5);
        let x1 = HermitianMatrix::new(sx).unwrap();
        let x2 = HermitianMatrix::new(sy).unwrap();
        let v = trabs_rho_commutator(&rho, &x1, &x2).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        assert!(trabs_rho_commutator(&rho, &x1, &x1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn trabs_commutator_dimension_mismatch() {
        let rho = HermitianMatrix::identity(3).scale(1.0 / 3.0);
        let x = HermitianMatrix::identity(2);
        assert!(matches!(
            trabs_rho_commutator(&rho, &x, &x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn coords_round_trip_and_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(4, &mut rng);
        let b = random_hermitian(4, &mut rng);
        let xa = hermitian_coords(&a);
        let back = hermitian_from_coords(4, &xa);
        assert!(frobenius(&(back - &a)) < 1e-14);
        let ip: f64 = xa
            .iter()
            .zip(hermitian_coords(&b))
            .map(|(x, y)| x * y)
            .sum();
        assert!((ip - trace_re(&(&a * &b))).abs() < 1e-13);
    }

    proptest::proptest! {
        #[test]
        fn trabs_commutator_is_swap_symmetric(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed % 3) as usize;
            let g = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let mut rho = &g * g.adjoint();
            let tr = trace_re(&rho);
            rho /= c(tr, 0.0);
            let s = psd_sqrt(&HermitianMatrix::from_hermitian_part(&rho)).unwrap();
            let x1 = random_hermitian(n, &mut rng);
            let x2 = random_hermitian(n, &mut rng);
            let a = trabs_commutator_sqrt(s.matrix(), &x1, &x2);
            let b = trabs_commutator_sqrt(s.matrix(), &x2, &x1);
            proptest::prop_assert_eq!(a, b);
            let h = HermitianMatrix::from_hermitian_part(&(s.matrix() * commutator(&x1, &x2).map(|z| z * c(0.0, 1.0)) * s.matrix()));
            proptest::prop_assert!(a >= h.trace().abs() - 1e-12);
        }
    }
}
