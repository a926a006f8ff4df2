//! Dense complex linear-algebra substrate.
//!
//! Everything downstream is built from a handful of primitives on
//! `DMatrix<Complex<f64>>`: the operator (spectral) norm, Hermitian
//! eigendecomposition, functional calculus, polar decomposition and the
//! principal logarithm of a unitary. All functions are pure; inputs are
//! never mutated.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERM_TOL: f64 = 1e-10;
/// Relative invertibility threshold, measured against the largest singular value.
pub const INV_TOL: f64 = 1e-12;
/// Angular gap from -1 required of a unitary spectrum before taking logarithms.
pub const GAP_TOL: f64 = 1e-6;

#[inline]
pub fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// (A + A*)/2.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5)
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    for z in a.iter() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
    }
    Ok(())
}

fn ensure_square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    // Frobenius residual; an upper bound on the operator-norm residual.
    let residual = (a - a.adjoint()).norm();
    let tol = HERM_TOL * a.norm();
    if residual > tol {
        return Err(Error::NotHermitian { residual, tol });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Real eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, column k paired with `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// V f(Λ) V*, re-Hermitized.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let scaled = scale_columns(&self.eigenvectors, &self.eigenvalues.iter().map(|&t| c(f(t))).collect::<Vec<_>>());
        hermitize(&(scaled * self.eigenvectors.adjoint()))
    }

    /// V g(Λ) V* for complex-valued g (no Hermitization).
    pub fn apply_complex(&self, g: impl Fn(f64) -> C64) -> CMatrix {
        let scaled = scale_columns(&self.eigenvectors, &self.eigenvalues.iter().map(|&t| g(t)).collect::<Vec<_>>());
        scaled * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|t| t)
    }
}

fn scale_columns(v: &CMatrix, weights: &[C64]) -> CMatrix {
    let mut m = v.clone();
    for (k, w) in weights.iter().enumerate() {
        for z in m.column_mut(k).iter_mut() {
            *z *= *w;
        }
    }
    m
}

/// Internal: eigendecomposition of an already Hermitized matrix, sorted ascending.
pub(crate) fn hermitian_eig_unchecked(h: &CMatrix) -> SpectralDecomposition {
    let n = h.nrows();
    if n == 0 {
        return SpectralDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        };
    }
    let se = nalgebra::SymmetricEigen::new(h.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let eigenvalues: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let cols: Vec<DVector<C64>> = idx.iter().map(|&i| se.eigenvectors.column(i).clone_owned()).collect();
    SpectralDecomposition {
        eigenvalues,
        eigenvectors: CMatrix::from_columns(&cols),
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input must satisfy `||A - A*|| <= HERM_TOL * ||A||`; inputs failing the
/// check are rejected rather than silently symmetrized.
pub fn hermitian_eig(a: &CMatrix) -> Result<SpectralDecomposition> {
    ensure_finite(a)?;
    ensure_square(a)?;
    check_hermitian(a)?;
    Ok(hermitian_eig_unchecked(&hermitize(a)))
}

/// Eigenvalues only, ascending, of a Hermitian matrix (no vectors).
pub(crate) fn hermitian_eigenvalues_unchecked(h: &CMatrix) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// max |eigenvalue| of a Hermitian matrix. Cheaper and sharper than the
/// general norm for Hermitian arguments.
pub fn hermitian_norm(a: &CMatrix) -> Result<f64> {
    ensure_finite(a)?;
    ensure_square(a)?;
    check_hermitian(a)?;
    let ev = hermitian_eigenvalues_unchecked(&hermitize(a));
    Ok(ev.iter().fold(0.0f64, |m, &t| m.max(t.abs())))
}

pub(crate) fn hermitian_norm_unchecked(h: &CMatrix) -> f64 {
    hermitian_eigenvalues_unchecked(h)
        .iter()
        .fold(0.0f64, |m, &t| m.max(t.abs()))
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> Result<f64> {
    ensure_finite(a)?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    // Gram route: accurate for the top of the spectrum.
    let gram = if a.nrows() <= a.ncols() {
        hermitize(&(a * a.adjoint()))
    } else {
        hermitize(&(a.adjoint() * a))
    };
    let top = hermitian_eigenvalues_unchecked(&gram)
        .last()
        .copied()
        .unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

/// All singular values, ascending.
///
/// Computed from the Hermitian embedding `[[0, A], [A*, 0]]`, whose spectrum is
/// `{±σ_i} ∪ {0}`; this keeps small singular values accurate to machine
/// precision times `||A||`, unlike the Gram route.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    ensure_finite(a)?;
    let (m, n) = (a.nrows(), a.ncols());
    let k = m.min(n);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut f = CMatrix::zeros(m + n, m + n);
    f.view_mut((0, m), (m, n)).copy_from(a);
    let adj = a.adjoint();
    f.view_mut((m, 0), (n, m)).copy_from(&adj);
    let ev = hermitian_eigenvalues_unchecked(&f);
    let svs: Vec<f64> = ev[m + n - k..].iter().map(|&t| t.max(0.0)).collect();
    Ok(svs)
}

/// Functional calculus on a Hermitian matrix: V f(Λ) V*, re-Hermitized.
pub fn apply_hermitian_function(a: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let se = hermitian_eig(a)?;
    for &t in &se.eigenvalues {
        if !f(t).is_finite() {
            return Err(Error::FunctionDomain { eigenvalue: t });
        }
    }
    Ok(se.apply(f))
}

/// e^{iH} for Hermitian H, via V e^{iΛ} V*. Exactly unitary up to the accuracy
/// of the eigendecomposition.
pub fn exp_i_hermitian(h: &CMatrix) -> Result<CMatrix> {
    let se = hermitian_eig(h)?;
    Ok(se.apply_complex(|t| Complex::from_polar(1.0, t)))
}

/// The two polar factors of an invertible matrix: A = U P.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    /// Unitary factor.
    pub unitary: CMatrix,
    /// Hermitian positive-semidefinite factor (A*A)^{1/2}.
    pub positive: CMatrix,
}

/// Polar decomposition A = U P of an invertible square matrix.
///
/// The unitary factor is computed with the scaled Newton iteration
/// `X <- (μX + μ^{-1}X^{-*})/2`, which converges quadratically and yields a
/// factor unitary to machine precision; P is then recovered as Herm(U*A).
pub fn polar_decompose(a: &CMatrix) -> Result<PolarFactors> {
    ensure_finite(a)?;
    ensure_square(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }

    // Invertibility gate. The Gram estimate is cheap but loses relative
    // accuracy below ~1e-8; fall back to the embedding only near the edge.
    let gram = hermitize(&(a.adjoint() * a));
    let gev = hermitian_eigenvalues_unchecked(&gram);
    let smax = gev.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let smin_est = gev.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    if smax == 0.0 {
        return Err(Error::Singular {
            min_sv: 0.0,
            threshold: 0.0,
        });
    }
    if smin_est <= 1e-6 * smax {
        let sv = singular_values(a)?;
        let smin = sv[0];
        if smin <= INV_TOL * smax {
            return Err(Error::Singular {
                min_sv: smin,
                threshold: INV_TOL * smax,
            });
        }
    }

    let mut x = a.clone();
    let mut converged = false;
    for _ in 0..100 {
        let xinv = match x.clone().lu().try_inverse() {
            Some(inv) => inv,
            None => {
                return Err(Error::Singular {
                    min_sv: 0.0,
                    threshold: INV_TOL * smax,
                })
            }
        };
        let mu = (xinv.norm() / x.norm()).sqrt();
        let next = (&x * c(0.5 * mu)) + (xinv.adjoint() * c(0.5 / mu));
        let delta = (&next - &x).norm();
        let scale = next.norm();
        x = next;
        if !delta.is_finite() {
            return Err(Error::Convergence("polar Newton iteration diverged".into()));
        }
        if delta <= 1e-13 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(
            "polar Newton iteration did not reach tolerance in 100 steps".into(),
        ));
    }
    let positive = hermitize(&(x.adjoint() * a));
    Ok(PolarFactors {
        unitary: x,
        positive,
    })
}

/// Eigendecomposition of the Cayley generator K = -i(1-W)(1+W)^{-1} of a
/// unitary W. K is Hermitian, shares eigenvectors with W, and its eigenvalue
/// arctangents encode the principal eigenangles: W = e^{-2i·arctan(K)}.
/// Spectrum of W within GAP_TOL of -1 is a branch error.
pub(crate) fn unitary_cayley_eig(w: &CMatrix) -> Result<SpectralDecomposition> {
    ensure_finite(w)?;
    ensure_square(w)?;
    let n = w.nrows();
    let id = CMatrix::identity(n, n);
    let residual = (w.adjoint() * w - &id).norm();
    let utol = 1e-8 * (n as f64).max(1.0);
    if residual > utol {
        return Err(Error::NotUnitary { residual });
    }

    let one_plus = &id + w;
    let inv = one_plus.lu().try_inverse().ok_or_else(|| Error::BranchCut {
        detail: "1+W is numerically singular (eigenvalue at -1)".into(),
    })?;
    // Hermitian because (1-W)(1+W)^{-1} is skew for unitary W.
    let k = hermitize(&((&id - w) * inv * Complex::new(0.0, -1.0)));
    let se = hermitian_eig_unchecked(&k);
    let kmax = se.eigenvalues.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    // |λ(K)| = tan(θ/2) for W-eigenangle θ; reject angles within GAP_TOL of ±π.
    let cap = 1.0 / (GAP_TOL / 2.0).tan();
    if kmax > cap {
        return Err(Error::BranchCut {
            detail: format!("eigenangle within {GAP_TOL:.1e} of -1 (|K| = {kmax:.3e})"),
        });
    }
    Ok(se)
}

/// Principal logarithm of a unitary matrix.
///
/// Returns the skew-Hermitian L with e^L = W and spectrum of L/i inside
/// (-π, π). The principal branch falls out of the Hermitian
/// eigendecomposition of the Cayley generator, no phase unwrapping needed.
pub fn principal_log_unitary(w: &CMatrix) -> Result<CMatrix> {
    let se = unitary_cayley_eig(w)?;
    let l = se.apply_complex(|t| Complex::new(0.0, -2.0 * t.atan()));
    // exact skew-Hermitization
    Ok((&l - l.adjoint()) * c(0.5))
}

// ---------------------------------------------------------------------------
// Matrix JSON format, used library-wide:
//   {"rows": n, "cols": m, "data": [[re, im], ...]}  (row-major)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<(f64, f64)>,
}

impl MatrixJson {
    fn from_matrix(a: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(a.nrows() * a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let z = a[(i, j)];
                data.push((z.re, z.im));
            }
        }
        MatrixJson {
            rows: a.nrows(),
            cols: a.ncols(),
            data,
        }
    }

    fn into_matrix(self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::InvalidInput(format!(
                "matrix JSON: expected {} entries, found {}",
                self.rows * self.cols,
                self.data.len()
            )));
        }
        let m = CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let (re, im) = self.data[i * self.cols + j];
            Complex::new(re, im)
        });
        ensure_finite(&m)?;
        Ok(m)
    }
}

pub fn matrix_to_json(a: &CMatrix) -> String {
    serde_json::to_string(&MatrixJson::from_matrix(a)).expect("matrix serialization cannot fail")
}

pub fn matrix_from_json(s: &str) -> Result<CMatrix> {
    let mj: MatrixJson = serde_json::from_str(s)?;
    mj.into_matrix()
}

pub fn write_matrix_json(path: &Path, a: &CMatrix) -> Result<()> {
    std::fs::write(path, matrix_to_json(a))?;
    Ok(())
}

pub fn read_matrix_json(path: &Path) -> Result<CMatrix> {
    let s = std::fs::read_to_string(path)?;
    matrix_from_json(&s)
}

/// Serde adapter so larger records can embed matrices in the library-wide
/// JSON shape via `#[serde(with = "crate::matcore::mat_serde")]`.
pub mod mat_serde {
    use super::{CMatrix, MatrixJson};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(a).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let mj = MatrixJson::deserialize(d)?;
        mj.into_matrix().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c_: f64, d: f64) -> CMatrix {
        CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(a),
            (0, 1) => c(b),
            (1, 0) => c(c_),
            _ => c(d),
        })
    }

    fn assert_close(x: f64, y: f64, tol: f64) {
        assert!((x - y).abs() <= tol, "expected {y}, got {x} (tol {tol})");
    }

    #[test]
    fn operator_norm_identity_and_zero() {
        let id = CMatrix::identity(3, 3);
        assert_close(operator_norm(&id).unwrap(), 1.0, 1e-14);
        let z = CMatrix::zeros(2, 2);
        assert_close(operator_norm(&z).unwrap(), 0.0, 0.0);
    }

    #[test]
    fn operator_norm_rank_one() {
        // A*A has trace 3, det 0, so σ_max = sqrt(2) for [[1,1],[0,0]].
        let a = m2(1.0, 1.0, 0.0, 0.0);
        assert_close(operator_norm(&a).unwrap(), 2.0f64.sqrt(), 1e-14);
    }

    #[test]
    fn operator_norm_rejects_non_finite() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = Complex::new(f64::NAN, 0.0);
        assert!(matches!(operator_norm(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hermitian_eig_diagonal() {
        let a = m2(2.0, 0.0, 0.0, 1.0);
        let se = hermitian_eig(&a).unwrap();
        assert_close(se.eigenvalues[0], 1.0, 1e-14);
        assert_close(se.eigenvalues[1], 2.0, 1e-14);
    }

    #[test]
    fn hermitian_eig_rank_one_projection() {
        let a = m2(0.5, 0.5, 0.5, 0.5);
        let se = hermitian_eig(&a).unwrap();
        assert_close(se.eigenvalues[0], 0.0, 1e-14);
        assert_close(se.eigenvalues[1], 1.0, 1e-14);
    }

    #[test]
    fn hermitian_eig_symmetric_pair() {
        // char. poly λ² - 1/2 = 0
        let a = m2(0.5, -0.5, -0.5, -0.5);
        let se = hermitian_eig(&a).unwrap();
        let r = 0.5f64.sqrt();
        assert_close(se.eigenvalues[0], -r, 1e-14);
        assert_close(se.eigenvalues[1], r, 1e-14);
    }

    #[test]
    fn hermitian_eig_rejects_non_hermitian() {
        let a = m2(1.0, 1.0, 0.0, 0.0);
        assert!(matches!(
            hermitian_eig(&a),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn functional_calculus_arctan_and_sqrt() {
        let a = m2(1.0, 0.0, 0.0, 0.0);
        let at = apply_hermitian_function(&a, f64::atan).unwrap();
        assert_close(at[(0, 0)].re, std::f64::consts::FRAC_PI_4, 1e-14);
        assert_close(at[(1, 1)].re, 0.0, 1e-14);

        let p = m2(0.5, 0.5, 0.5, 0.5);
        let sq = apply_hermitian_function(&p, f64::sqrt).unwrap();
        assert!((sq - &p).norm() <= 1e-12);
    }

    #[test]
    fn functional_calculus_scalar_case() {
        let a = CMatrix::from_fn(1, 1, |_, _| c(1.0));
        let f = apply_hermitian_function(&a, |t| t / (1.0 + t * t).sqrt()).unwrap();
        assert_close(f[(0, 0)].re, 0.7071067811865476, 1e-15);
    }

    #[test]
    fn functional_calculus_rejects_log_of_zero() {
        let a = m2(1.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            apply_hermitian_function(&a, f64::ln),
            Err(Error::FunctionDomain { .. })
        ));
    }

    #[test]
    fn polar_of_unitary_is_identity_positive_part() {
        let r = std::f64::consts::FRAC_PI_3;
        let u = m2(r.cos(), -r.sin(), r.sin(), r.cos());
        let pf = polar_decompose(&u).unwrap();
        assert!((&pf.unitary - &u).norm() <= 1e-13);
        assert!((&pf.positive - CMatrix::identity(2, 2)).norm() <= 1e-13);
    }

    #[test]
    fn polar_reference_case() {
        // Oracle: U = A (A*A)^{-1/2} with A*A = [[1,2],[2,5]].
        let a = m2(1.0, 2.0, 0.0, -1.0);
        let gram = hermitize(&(a.adjoint() * &a));
        let inv_sqrt = apply_hermitian_function(&gram, |t| 1.0 / t.sqrt()).unwrap();
        let u_oracle = &a * inv_sqrt;
        let pf = polar_decompose(&a).unwrap();
        assert!((&pf.unitary - &u_oracle).norm() <= 1e-12);
        let s = 0.5f64.sqrt();
        let expected = m2(s, s, s, -s);
        assert!((&pf.unitary - &expected).norm() <= 1e-12);
        assert!((pf.unitary * pf.positive - &a).norm() <= 1e-12);
    }

    #[test]
    fn polar_of_positive_diagonal() {
        let a = m2(3.0, 0.0, 0.0, 5.0);
        let pf = polar_decompose(&a).unwrap();
        assert!((&pf.unitary - CMatrix::identity(2, 2)).norm() <= 1e-13);
        assert!((&pf.positive - &a).norm() <= 1e-13);
    }

    #[test]
    fn polar_rejects_singular() {
        let a = m2(1.0, 1.0, 0.0, 0.0);
        assert!(matches!(polar_decompose(&a), Err(Error::Singular { .. })));
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = principal_log_unitary(&CMatrix::identity(3, 3)).unwrap();
        assert!(l.norm() <= 1e-14);
    }

    #[test]
    fn log_of_scalar_phase() {
        let w = CMatrix::from_fn(1, 1, |_, _| Complex::from_polar(1.0, std::f64::consts::FRAC_PI_4));
        let l = principal_log_unitary(&w).unwrap();
        assert_close(l[(0, 0)].im, std::f64::consts::FRAC_PI_4, 1e-14);
        assert_close(l[(0, 0)].re, 0.0, 1e-14);
    }

    #[test]
    fn log_of_rotation_round_trips() {
        let r = std::f64::consts::FRAC_PI_4;
        let w = m2(r.cos(), -r.sin(), r.sin(), r.cos());
        let l = principal_log_unitary(&w).unwrap();
        let expected = m2(0.0, -r, r, 0.0);
        assert!((&l - &expected).norm() <= 1e-13);
        // exponentiate back: L = iH with H Hermitian
        let h = &l * Complex::new(0.0, -1.0);
        let back = exp_i_hermitian(&hermitize(&h)).unwrap();
        assert!((back - &w).norm() <= 1e-13);
    }

    #[test]
    fn log_rejects_spectrum_at_minus_one() {
        let w = m2(-1.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            principal_log_unitary(&w),
            Err(Error::BranchCut { .. })
        ));
    }

    #[test]
    fn log_rejects_non_unitary() {
        let a = m2(2.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            principal_log_unitary(&a),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn singular_values_of_rectangular() {
        let a = CMatrix::from_fn(2, 1, |i, _| if i == 0 { c(1.0) } else { c(0.0) });
        let sv = singular_values(&a).unwrap();
        assert_eq!(sv.len(), 1);
        assert_close(sv[0], 1.0, 1e-14);
    }

    #[test]
    fn matrix_json_round_trip() {
        let a = CMatrix::from_fn(2, 3, |i, j| Complex::new(i as f64 + 0.25, j as f64 - 1.5));
        let s = matrix_to_json(&a);
        let b = matrix_from_json(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_json_rejects_bad_length() {
        let s = r#"{"rows":2,"cols":2,"data":[[1.0,0.0]]}"#;
        assert!(matrix_from_json(s).is_err());
    }
}
