//! Geodesics of the projection manifold attached to an idempotent.
//!
//! For a validated idempotent E the projections P = P_{R(E)} and Q = P_{R(E*)}
//! sit at distance < 1, so a unique minimal geodesic δ(t) = e^{itX} P e^{-itX}
//! joins them. This module computes the exponent X (two independent routes),
//! points of the geodesic, the matched projection m(E) (the orthogonal
//! projection nearest to E), the Davis symmetry, the polar retraction of
//! reflections onto symmetries, and the Finsler geometry of the retraction's
//! fibers. The headline identity checked throughout:
//!
//!   m(E) = δ(1/2) = (1 + polar-unitary(2E-1)) / 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idempotent::{proj_tol, BlockForm, Idempotent, OrthogonalProjection, DEFAULT_RANK_TOL};
use crate::matcore::{
    c, hermitian_eig_unchecked, hermitian_eigenvalues_unchecked, hermitize, operator_norm,
    polar_decompose, unitary_cayley_eig, CMatrix, C64, SpectralDecomposition,
};

/// Relative tolerance for accepting C as a reflection (C² = 1).
pub const REFLECTION_TOL: f64 = 1e-8;
/// ||P-Q|| must stay below 1 by this margin for the Davis construction.
pub const GEOMETRY_MARGIN: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Exponent and geodesic
// ---------------------------------------------------------------------------

/// Hermitian generator X of the geodesic δ(t) = e^{itX} P e^{-itX}, with
/// ||X|| < π/2 and X codiagonal against R(E) ⊕ R(E)⊥.
#[derive(Debug, Clone)]
pub struct GeodesicExponent {
    x: CMatrix,
    base: OrthogonalProjection,
    eig: SpectralDecomposition,
    norm: f64,
    codiag_residual: f64,
}

impl GeodesicExponent {
    fn from_eig(eig: SpectralDecomposition, base: OrthogonalProjection) -> Result<Self> {
        let x = eig.reconstruct();
        let norm = eig.eigenvalues.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
        if norm >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Geometry(format!(
                "exponent norm {norm} reached π/2: endpoints not at distance < 1"
            )));
        }
        let n = base.dim();
        let pm = base.matrix();
        let pc = base.complement();
        let diag = (pm * &x * pm).norm() + (pc.matrix() * &x * pc.matrix()).norm();
        if diag > 1e-6 * n as f64 * norm.max(1.0) {
            return Err(Error::Geometry(format!(
                "exponent failed codiagonality: residual {diag:.3e}"
            )));
        }
        Ok(GeodesicExponent {
            x,
            base,
            eig,
            norm,
            codiag_residual: diag,
        })
    }

    fn from_matrix(x: CMatrix, base: OrthogonalProjection) -> Result<Self> {
        let eig = hermitian_eig_unchecked(&hermitize(&x));
        Self::from_eig(eig, base)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.x
    }

    /// δ(0) = P_{R(E)}.
    pub fn base(&self) -> &OrthogonalProjection {
        &self.base
    }

    /// ||X|| = arctan ||B||.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn codiag_residual(&self) -> f64 {
        self.codiag_residual
    }

    /// e^{itX}.
    pub fn unitary_at(&self, t: f64) -> CMatrix {
        self.eig.apply_complex(|lambda| C64::from_polar(1.0, t * lambda))
    }

    /// δ(t) = e^{itX} P e^{-itX}.
    pub fn point(&self, t: f64) -> Result<OrthogonalProjection> {
        let u = self.unitary_at(t);
        let m = &u * self.base.matrix() * u.adjoint();
        OrthogonalProjection::try_new(m, proj_tol(self.base.dim()))
    }
}

pub(crate) fn exponent_from_projections(
    p: OrthogonalProjection,
    q: &OrthogonalProjection,
) -> Result<GeodesicExponent> {
    // e^{2iX} = (2Q-1)(2P-1); the Cayley generator K of that unitary gives
    // X = -arctan(K) on the same eigenvectors, principal branch built in.
    let w = q.symmetry() * p.symmetry();
    let se_k = unitary_cayley_eig(&w)?;
    let n = se_k.eigenvalues.len();
    let mut vals: Vec<f64> = se_k.eigenvalues.iter().map(|&t| -t.atan()).collect();
    vals.reverse();
    let mut cols: Vec<nalgebra::DVector<C64>> =
        (0..n).map(|j| se_k.eigenvectors.column(j).clone_owned()).collect();
    cols.reverse();
    let eig = SpectralDecomposition {
        eigenvalues: vals,
        eigenvectors: CMatrix::from_columns(&cols),
    };
    GeodesicExponent::from_eig(eig, p)
}

/// Exponent of the geodesic from P_{R(E)} to P_{R(E*)}, through the global
/// unitary logarithm of (2Q-1)(2P-1).
pub fn exponent(e: &Idempotent) -> Result<GeodesicExponent> {
    let p = e.range_projection()?;
    let q = e.corange_projection()?;
    exponent_from_projections(p, &q)
}

/// Same exponent assembled blockwise from the canonical form:
/// X = 0 ⊕ 0 ⊕ [[0, i·arctan(R)·D], [-i·D*·arctan(R), 0]].
///
/// Independent of the logarithm route; the two must agree.
pub fn exponent_block_formula(e: &Idempotent) -> Result<GeodesicExponent> {
    let form = e.cpr_canonical_form(DEFAULT_RANK_TOL)?;
    let s = form.generic_dim();
    let n = e.dim();
    let x = if s == 0 {
        CMatrix::zeros(n, n)
    } else {
        let atan_r = hermitian_eig_unchecked(&form.r).apply(f64::atan);
        let t34 = atan_r * &form.d * C64::i();
        let zero = CMatrix::zeros(s, s);
        form.assemble(0.0, 0.0, &zero, &t34, &t34.adjoint(), &zero)
    };
    GeodesicExponent::from_matrix(x, e.range_projection()?)
}

/// δ(t) for the geodesic attached to E. t is unrestricted.
pub fn geodesic_point(e: &Idempotent, t: f64) -> Result<OrthogonalProjection> {
    exponent(e)?.point(t)
}

/// Closed-form midpoint δ(1/2) from the canonical form: the symmetry
/// 2δ(1/2)-1 equals 1 ⊕ -1 ⊕ [[F, RFD], [D*RF, -D*FD]] with F = (1+R²)^{-1/2}.
pub fn midpoint_closed_form(e: &Idempotent) -> Result<OrthogonalProjection> {
    let bf = e.block_form()?;
    midpoint_from_block(e, &bf)
}

pub(crate) fn midpoint_from_block(e: &Idempotent, bf: &BlockForm) -> Result<OrthogonalProjection> {
    let form = e.cpr_from_block(bf, DEFAULT_RANK_TOL)?;
    let s = form.generic_dim();
    let n = e.dim();
    let sym = if s == 0 {
        form.assemble(1.0, -1.0, &CMatrix::zeros(0, 0), &CMatrix::zeros(0, 0), &CMatrix::zeros(0, 0), &CMatrix::zeros(0, 0))
    } else {
        let se_r = hermitian_eig_unchecked(&form.r);
        let f = se_r.apply(|t| 1.0 / (1.0 + t * t).sqrt());
        let rf = se_r.apply(|t| t / (1.0 + t * t).sqrt());
        let b34 = &rf * &form.d;
        let b44 = form.d.adjoint() * &f * &form.d * c(-1.0);
        form.assemble(1.0, -1.0, &f, &b34, &b34.adjoint(), &b44)
    };
    let m = (sym + CMatrix::identity(n, n)) * c(0.5);
    OrthogonalProjection::try_new(m, proj_tol(n).max(10.0 * e.idem_residual()))
}

// ---------------------------------------------------------------------------
// Matched projection
// ---------------------------------------------------------------------------

/// The orthogonal projection closest in operator norm to its source
/// idempotent.
#[derive(Debug, Clone)]
pub struct MatchedProjection {
    m: OrthogonalProjection,
    source: Idempotent,
}

impl MatchedProjection {
    pub fn projection(&self) -> &OrthogonalProjection {
        &self.m
    }

    pub fn matrix(&self) -> &CMatrix {
        self.m.matrix()
    }

    pub fn source(&self) -> &Idempotent {
        &self.source
    }

    pub fn into_projection(self) -> OrthogonalProjection {
        self.m
    }
}

/// m(E), assembled in the block basis of E:
/// m = (1/2)[[(T+1)T^{-1}, T^{-1}B], [B*T^{-1}, B*(T(T+1))^{-1}B]] with
/// T = (1+BB*)^{1/2}.
pub fn matched_projection(e: &Idempotent) -> Result<MatchedProjection> {
    let bf = e.block_form()?;
    matched_from_block(e, &bf)
}

pub(crate) fn matched_from_block(e: &Idempotent, bf: &BlockForm) -> Result<MatchedProjection> {
    let b = &bf.b;
    let (r, k) = (b.nrows(), b.ncols());
    let n = r + k;
    let se = hermitian_eig_unchecked(&hermitize(&(b * b.adjoint())));
    let m11 = se.apply(|t| {
        let s = (1.0 + t).sqrt();
        0.5 * (s + 1.0) / s
    });
    let t_inv = se.apply(|t| 1.0 / (1.0 + t).sqrt());
    let m12 = &t_inv * b * c(0.5);
    let g = se.apply(|t| {
        let s = (1.0 + t).sqrt();
        1.0 / (s * (s + 1.0))
    });
    let m22 = b.adjoint() * &g * b * c(0.5);

    let mut coords = CMatrix::zeros(n, n);
    coords.view_mut((0, 0), (r, r)).copy_from(&m11);
    coords.view_mut((0, r), (r, k)).copy_from(&m12);
    coords.view_mut((r, 0), (k, r)).copy_from(&m12.adjoint());
    coords.view_mut((r, r), (k, k)).copy_from(&m22);

    let mut basis = CMatrix::zeros(n, n);
    basis.view_mut((0, 0), (n, r)).copy_from(&bf.range_basis);
    basis.view_mut((0, r), (n, k)).copy_from(&bf.complement_basis);
    let ambient = &basis * coords * basis.adjoint();

    let m = OrthogonalProjection::try_new(ambient, proj_tol(n).max(10.0 * e.idem_residual()))?;
    if m.rank() != e.rank() {
        return Err(Error::Geometry(format!(
            "matched projection rank {} does not match idempotent rank {}",
            m.rank(),
            e.rank()
        )));
    }
    Ok(MatchedProjection {
        m,
        source: e.clone(),
    })
}

// ---------------------------------------------------------------------------
// Davis symmetry and the polar retraction
// ---------------------------------------------------------------------------

/// Davis symmetry V_d = D^{-1/2}(P+Q-1), D = 1-(P-Q)².
///
/// Since (P+Q-1)² = 1-(P-Q)², this is exactly the sign of the Hermitian
/// operator N = P+Q-1, computed spectrally. It anticommutes with P-Q.
pub fn davis_symmetry(p: &OrthogonalProjection, q: &OrthogonalProjection) -> Result<CMatrix> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidInput("projection dimensions differ".into()));
    }
    let n = p.dim();
    let nmat = hermitize(&(p.matrix() + q.matrix() - CMatrix::identity(n, n)));
    let se = hermitian_eig_unchecked(&nmat);
    let min_abs = se.eigenvalues.iter().fold(f64::INFINITY, |m, &t| m.min(t.abs()));
    // min |eig(N)| = (1 - ||P-Q||²)^{1/2}; gate ||P-Q|| < 1 - GEOMETRY_MARGIN.
    let gate = (2.0 * GEOMETRY_MARGIN).sqrt() * 0.999;
    if n > 0 && min_abs <= gate {
        let norm_diff = (1.0 - min_abs * min_abs).max(0.0).sqrt();
        return Err(Error::Geometry(format!(
            "||P-Q|| = {norm_diff} is too close to 1 for the Davis symmetry"
        )));
    }
    Ok(se.apply(|t| if t >= 0.0 { 1.0 } else { -1.0 }))
}

/// The same symmetry through reflections: the unitary polar factor of C + C*
/// for C = 2E-1.
pub fn davis_via_reflection(e: &Idempotent) -> Result<CMatrix> {
    let cr = reflection_of(e);
    let sum = cr.adjoint() + cr;
    Ok(polar_decompose(&sum)?.unitary)
}

/// 2E - 1.
pub fn reflection_of(e: &Idempotent) -> CMatrix {
    let n = e.dim();
    e.matrix() * c(2.0) - CMatrix::identity(n, n)
}

fn check_reflection(c_mat: &CMatrix) -> Result<f64> {
    crate::matcore::ensure_finite(c_mat)?;
    if c_mat.nrows() != c_mat.ncols() {
        return Err(Error::InvalidInput("reflection must be square".into()));
    }
    let n = c_mat.nrows();
    let norm = operator_norm(c_mat)?;
    let residual = operator_norm(&(c_mat * c_mat - CMatrix::identity(n, n)))?;
    let tol = REFLECTION_TOL * (1.0 + norm * norm);
    if residual > tol {
        return Err(Error::NotReflection { residual, tol });
    }
    Ok(norm)
}

/// π(C) = C|C|^{-1}: the retraction of reflections onto symmetries via the
/// unitary polar factor.
pub fn retraction_pi(c_mat: &CMatrix) -> Result<CMatrix> {
    check_reflection(c_mat)?;
    let pf = polar_decompose(c_mat)?;
    // the unitary factor of a reflection is a symmetry; tighten Hermitianity
    Ok(hermitize(&pf.unitary))
}

/// Finsler tangent norm |X|_C = || |C|^{1/2} X |C|^{-1/2} ||.
pub fn finsler_norm(c_mat: &CMatrix, x: &CMatrix) -> Result<f64> {
    check_reflection(c_mat)?;
    if x.nrows() != c_mat.nrows() || x.ncols() != c_mat.ncols() {
        return Err(Error::InvalidInput("tangent vector has wrong shape".into()));
    }
    let gram = hermitize(&(c_mat.adjoint() * c_mat));
    let se = hermitian_eig_unchecked(&gram);
    let min = se.eigenvalues.first().copied().unwrap_or(0.0);
    let max = se.eigenvalues.last().copied().unwrap_or(0.0);
    if !(min > crate::matcore::INV_TOL * crate::matcore::INV_TOL * max) {
        return Err(Error::Singular {
            min_sv: min.max(0.0).sqrt(),
            threshold: crate::matcore::INV_TOL * max.sqrt(),
        });
    }
    let w = se.apply(|t| t.powf(0.25)); // |C|^{1/2}
    let w_inv = se.apply(|t| t.powf(-0.25));
    operator_norm(&(w * x * w_inv))
}

/// Fiber geodesic C(t) = π(C)·|C|^t; C(0) = π(C), C(1) = C, C(-1) = C*.
pub fn fiber_geodesic(c_mat: &CMatrix, t: f64) -> Result<CMatrix> {
    check_reflection(c_mat)?;
    let pf = polar_decompose(c_mat)?;
    let se = hermitian_eig_unchecked(&pf.positive);
    let powered = se.apply(|s| s.max(f64::MIN_POSITIVE).powf(t));
    Ok(hermitize(&pf.unitary) * powered)
}

/// Finsler distance along the fiber from E to m(E): || log |2E-1| ||.
pub fn fiber_distance(e: &Idempotent) -> Result<f64> {
    let cr = reflection_of(e);
    let gram = hermitize(&(cr.adjoint() * &cr));
    let ev = hermitian_eigenvalues_unchecked(&gram);
    let max = ev.last().copied().unwrap_or(0.0);
    let min = ev.first().copied().unwrap_or(0.0);
    if !(min > 0.0) {
        return Err(Error::Singular {
            min_sv: 0.0,
            threshold: crate::matcore::INV_TOL * max.sqrt(),
        });
    }
    Ok(ev.iter().fold(0.0f64, |m, &t| m.max((0.5 * t.ln()).abs())))
}

// ---------------------------------------------------------------------------
// Distances and reports
// ---------------------------------------------------------------------------

/// Distances between E, its range projection and m(E).
#[derive(Debug, Clone, Copy)]
pub struct MatchedDistances {
    /// ||E - m(E)||; equals (||E|| - 1 + (||E||²-1)^{1/2})/2.
    pub norm_e_m: f64,
    /// ||P_{R(E)} - m(E)||; equals sin(dist_p_m).
    pub norm_p_m: f64,
    /// Geodesic distance arctan(||B||)/2 from P_{R(E)} to m(E).
    pub dist_p_m: f64,
}

pub fn matched_distances(e: &Idempotent) -> Result<MatchedDistances> {
    let bf = e.block_form()?;
    let m = matched_from_block(e, &bf)?;
    let norm_e_m = operator_norm(&(e.matrix() - m.matrix()))?;
    let p = e.range_projection()?;
    let diff = hermitize(&(p.matrix() - m.matrix()));
    let norm_p_m = hermitian_eigenvalues_unchecked(&diff)
        .iter()
        .fold(0.0f64, |acc, &t| acc.max(t.abs()));
    let norm_b = operator_norm(&bf.b)?;
    Ok(MatchedDistances {
        norm_e_m,
        norm_p_m,
        dist_p_m: 0.5 * norm_b.atan(),
    })
}

/// Flat record of the coincidence evidence for one idempotent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: usize,
    #[serde(rename = "norm_B")]
    pub norm_b: f64,
    pub norm_diff: f64,
    /// max over the two midpoint routes: ||m - δ(1/2)|| and
    /// ||m - closed-form midpoint||.
    pub residual_m_vs_midpoint: f64,
    pub residual_m_vs_pi: f64,
    pub residual_m_vs_davis: f64,
    #[serde(rename = "dist_E_to_mE")]
    pub dist_e_to_m: f64,
    #[serde(rename = "norm_E_minus_mE")]
    pub norm_e_minus_m: f64,
    pub spectrum: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_target: Option<f64>,
}

impl AnalysisReport {
    /// The largest of the three coincidence residuals.
    pub fn max_residual(&self) -> f64 {
        self.residual_m_vs_midpoint
            .max(self.residual_m_vs_pi)
            .max(self.residual_m_vs_davis)
    }
}

fn hermitian_diff_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = hermitize(&(a - b));
    hermitian_eigenvalues_unchecked(&d)
        .iter()
        .fold(0.0f64, |m, &t| m.max(t.abs()))
}

/// Compute every identity the theory promises for one idempotent and report
/// the residuals: m(E) against both midpoint routes, against the polar
/// retraction of 2E-1, and against the Davis symmetry, plus distances and the
/// difference spectrum.
pub fn coincidence_report(e: &Idempotent) -> Result<AnalysisReport> {
    let n = e.dim();
    let p = e.range_projection()?;
    let q = e.corange_projection()?;
    let bf = e.block_form()?;
    let norm_b = operator_norm(&bf.b)?;

    let m = matched_from_block(e, &bf)?;
    let x = exponent_from_projections(p.clone(), &q)?;
    let delta_half = x.point(0.5)?;
    let mid_cf = midpoint_from_block(e, &bf)?;

    let r_mid = hermitian_diff_norm(m.matrix(), delta_half.matrix())
        .max(hermitian_diff_norm(m.matrix(), mid_cf.matrix()));

    let m_sym = m.projection().symmetry();
    let pi_c = retraction_pi(&reflection_of(e))?;
    let r_pi = hermitian_diff_norm(&m_sym, &pi_c);

    let vd = davis_symmetry(&p, &q)?;
    let r_davis = hermitian_diff_norm(&m_sym, &vd);

    let diff = hermitize(&(p.matrix() - q.matrix()));
    let spectrum = hermitian_eigenvalues_unchecked(&diff);
    let norm_diff = spectrum.iter().fold(0.0f64, |acc, &t| acc.max(t.abs()));

    let dist_e_to_m = fiber_distance(e)?;
    let norm_e_minus_m = operator_norm(&(e.matrix() - m.matrix()))?;

    Ok(AnalysisReport {
        n,
        norm_b,
        norm_diff,
        residual_m_vs_midpoint: r_mid,
        residual_m_vs_pi: r_pi,
        residual_m_vs_davis: r_davis,
        dist_e_to_m,
        norm_e_minus_m,
        spectrum,
        seed: None,
        norm_target: None,
    })
}

/// Residuals of the naturality identities of the matched projection.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NaturalityResiduals {
    /// ||m(E*) - m(E)||.
    pub adjoint: f64,
    /// ||m(1-E) - (1 - m(E))||.
    pub complement: f64,
    /// ||m(UEU*) - U m(E) U*||.
    pub unitary_conjugation: f64,
}

impl NaturalityResiduals {
    pub fn max(&self) -> f64 {
        self.adjoint.max(self.complement).max(self.unitary_conjugation)
    }
}

pub fn naturality_check(e: &Idempotent, u: &CMatrix) -> Result<NaturalityResiduals> {
    let n = e.dim();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::InvalidInput("unitary has wrong dimension".into()));
    }
    let u_resid = (u.adjoint() * u - CMatrix::identity(n, n)).norm();
    if u_resid > 1e-8 * n as f64 {
        return Err(Error::NotUnitary { residual: u_resid });
    }

    let m = matched_projection(e)?;
    let m_adj = matched_projection(&e.adjoint_idempotent())?;
    let adjoint = hermitian_diff_norm(m_adj.matrix(), m.matrix());

    let m_compl = matched_projection(&e.complement())?;
    let complement_target = m.projection().complement();
    let complement = hermitian_diff_norm(m_compl.matrix(), complement_target.matrix());

    let e_conj = e.conjugate(u)?;
    let m_conj = matched_projection(&e_conj)?;
    let target = u * m.matrix() * u.adjoint();
    let unitary_conjugation = hermitian_diff_norm(m_conj.matrix(), &target);

    Ok(NaturalityResiduals {
        adjoint,
        complement,
        unitary_conjugation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idempotent::{haar_unitary, random_idempotent, DEFAULT_IDEM_TOL};

    fn m2(a: f64, b: f64, c_: f64, d: f64) -> CMatrix {
        CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(a),
            (0, 1) => c(b),
            (1, 0) => c(c_),
            _ => c(d),
        })
    }

    fn oblique_unit() -> Idempotent {
        Idempotent::validate(m2(1.0, 1.0, 0.0, 0.0), DEFAULT_IDEM_TOL).unwrap()
    }

    fn hermitian_projection() -> Idempotent {
        Idempotent::validate(m2(0.5, 0.5, 0.5, 0.5), DEFAULT_IDEM_TOL).unwrap()
    }

    fn assert_close(x: f64, y: f64, tol: f64) {
        assert!((x - y).abs() <= tol, "expected {y}, got {x} (tol {tol})");
    }

    #[test]
    fn exponent_of_hermitian_is_zero() {
        let x = exponent(&hermitian_projection()).unwrap();
        assert!(x.matrix().norm() <= 1e-12);
        assert!(x.norm() <= 1e-12);
    }

    #[test]
    fn exponent_reference_case() {
        let x = exponent(&oblique_unit()).unwrap();
        let pi4 = std::f64::consts::FRAC_PI_4;
        let expected = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, pi4),
            (1, 0) => C64::new(0.0, -pi4),
            _ => c(0.0),
        });
        assert!((x.matrix() - &expected).norm() <= 1e-12);
        assert_close(x.norm(), pi4, 1e-13);
        // endpoint: e^{iX} P e^{-iX} = Q
        let e = oblique_unit();
        let q = e.corange_projection().unwrap();
        let endpoint = x.point(1.0).unwrap();
        assert!((endpoint.matrix() - q.matrix()).norm() <= 1e-12);
    }

    #[test]
    fn exponent_norm_is_arctan_norm_b() {
        for seed in 0..3u64 {
            let e = random_idempotent(3, 3, 2.0, seed).unwrap();
            let x = exponent(&e).unwrap();
            assert_close(x.norm(), 2.0f64.atan(), 1e-10);
            assert!(x.codiag_residual() <= 1e-10 * e.dim() as f64);
        }
    }

    #[test]
    fn exponent_block_formula_agrees_with_log_route() {
        let x = exponent_block_formula(&hermitian_projection()).unwrap();
        assert!(x.matrix().norm() <= 1e-12);

        let e = oblique_unit();
        let x1 = exponent(&e).unwrap();
        let x2 = exponent_block_formula(&e).unwrap();
        assert!((x1.matrix() - x2.matrix()).norm() <= 1e-12);

        let e = random_idempotent(4, 4, 1.5, 7).unwrap();
        let x1 = exponent(&e).unwrap();
        let x2 = exponent_block_formula(&e).unwrap();
        assert!((x1.matrix() - x2.matrix()).norm() <= 1e-8);
    }

    #[test]
    fn geodesic_endpoints_and_midpoint() {
        let e = oblique_unit();
        let p = e.range_projection().unwrap();
        let q = e.corange_projection().unwrap();
        let d0 = geodesic_point(&e, 0.0).unwrap();
        assert!((d0.matrix() - p.matrix()).norm() <= 1e-12);
        let d1 = geodesic_point(&e, 1.0).unwrap();
        assert!((d1.matrix() - q.matrix()).norm() <= 1e-12);

        let pi8 = std::f64::consts::FRAC_PI_8;
        let (cs, sn) = (pi8.cos(), pi8.sin());
        let expected = m2(cs * cs, cs * sn, cs * sn, sn * sn);
        let dh = geodesic_point(&e, 0.5).unwrap();
        assert!((dh.matrix() - &expected).norm() <= 1e-12);
    }

    #[test]
    fn midpoint_closed_form_matches_geodesic() {
        let p = hermitian_projection();
        let mid = midpoint_closed_form(&p).unwrap();
        assert!((mid.matrix() - p.matrix()).norm() <= 1e-12);

        let e = oblique_unit();
        let mid = midpoint_closed_form(&e).unwrap();
        let pi8 = std::f64::consts::FRAC_PI_8;
        let (cs, sn) = (pi8.cos(), pi8.sin());
        let expected = m2(cs * cs, cs * sn, cs * sn, sn * sn);
        assert!((mid.matrix() - &expected).norm() <= 1e-12);

        let e = random_idempotent(4, 4, 3.0, 21).unwrap();
        let mid = midpoint_closed_form(&e).unwrap();
        let dh = geodesic_point(&e, 0.5).unwrap();
        assert!((mid.matrix() - dh.matrix()).norm() <= 1e-8);
    }

    #[test]
    fn matched_projection_reference_case() {
        let p = hermitian_projection();
        let m = matched_projection(&p).unwrap();
        assert!((m.matrix() - p.matrix()).norm() <= 1e-12);

        let e = oblique_unit();
        let m = matched_projection(&e).unwrap();
        let pi8 = std::f64::consts::FRAC_PI_8;
        let (cs, sn) = (pi8.cos(), pi8.sin());
        let expected = m2(cs * cs, cs * sn, cs * sn, sn * sn);
        assert!((m.matrix() - &expected).norm() <= 1e-12);
        // trace 1, i.e. rank one
        assert_eq!(m.projection().rank(), 1);
    }

    #[test]
    fn matched_distance_formula() {
        for seed in [2u64, 5, 8] {
            let e = random_idempotent(3, 2, 1.7, seed).unwrap();
            let m = matched_projection(&e).unwrap();
            let norm_e = operator_norm(e.matrix()).unwrap();
            let expected = 0.5 * (norm_e - 1.0 + (norm_e * norm_e - 1.0).sqrt());
            let got = operator_norm(&(e.matrix() - m.matrix())).unwrap();
            assert_close(got, expected, 1e-10);
        }
    }

    #[test]
    fn davis_symmetry_reference_cases() {
        let p = OrthogonalProjection::try_new(m2(1.0, 0.0, 0.0, 0.0), proj_tol(2)).unwrap();
        let vd = davis_symmetry(&p, &p).unwrap();
        assert!((vd - p.symmetry()).norm() <= 1e-13);

        let q = OrthogonalProjection::try_new(m2(0.5, 0.5, 0.5, 0.5), proj_tol(2)).unwrap();
        let vd = davis_symmetry(&p, &q).unwrap();
        let s = 0.5f64.sqrt();
        assert!((&vd - m2(s, s, s, -s)).norm() <= 1e-13);
        // flips the difference
        let a = p.matrix() - q.matrix();
        assert!((&vd * &a * &vd + &a).norm() <= 1e-12);
    }

    #[test]
    fn davis_matches_midpoint_symmetry() {
        let e = random_idempotent(3, 3, 2.0, 17).unwrap();
        let p = e.range_projection().unwrap();
        let q = e.corange_projection().unwrap();
        let vd = davis_symmetry(&p, &q).unwrap();
        let mid = midpoint_closed_form(&e).unwrap();
        assert!((vd - mid.symmetry()).norm() <= 1e-9);
    }

    #[test]
    fn davis_via_reflection_matches() {
        let p = hermitian_projection();
        let vd = davis_via_reflection(&p).unwrap();
        assert!((&vd - reflection_of(&p)).norm() <= 1e-12);

        let e = oblique_unit();
        let vd = davis_via_reflection(&e).unwrap();
        let s = 0.5f64.sqrt();
        assert!((&vd - m2(s, s, s, -s)).norm() <= 1e-12);

        let e = random_idempotent(8, 8, 4.0, 3).unwrap();
        let p = e.range_projection().unwrap();
        let q = e.corange_projection().unwrap();
        let v1 = davis_via_reflection(&e).unwrap();
        let v2 = davis_symmetry(&p, &q).unwrap();
        assert!((v1 - v2).norm() <= 1e-9);
    }

    #[test]
    fn retraction_reference_cases() {
        let s = hermitian_projection().range_projection().unwrap().symmetry();
        let pi_s = retraction_pi(&s).unwrap();
        assert!((&pi_s - &s).norm() <= 1e-12);

        let cr = m2(1.0, 2.0, 0.0, -1.0);
        let pi_c = retraction_pi(&cr).unwrap();
        let r = 0.5f64.sqrt();
        assert!((&pi_c - m2(r, r, r, -r)).norm() <= 1e-12);
    }

    #[test]
    fn retraction_rejects_non_reflection() {
        let a = m2(1.0, 0.0, 0.0, 0.5);
        assert!(matches!(retraction_pi(&a), Err(Error::NotReflection { .. })));
    }

    #[test]
    fn retraction_midpoint_identity() {
        // (π(C)+1)/2 = m((C+1)/2)
        for seed in [1u64, 9] {
            let e = random_idempotent(3, 3, 2.5, seed).unwrap();
            let cr = reflection_of(&e);
            let pi_c = retraction_pi(&cr).unwrap();
            let lhs = (pi_c + CMatrix::identity(6, 6)) * c(0.5);
            let m = matched_projection(&e).unwrap();
            assert!((lhs - m.matrix()).norm() <= 1e-9);
        }
    }

    #[test]
    fn finsler_norm_reference_cases() {
        let s = m2(1.0, 0.0, 0.0, -1.0);
        let x = m2(0.0, 2.0, 2.0, 0.0);
        assert_close(finsler_norm(&s, &x).unwrap(), 2.0, 1e-12);
        // homogeneity
        let e = random_idempotent(2, 2, 1.5, 4).unwrap();
        let cr = reflection_of(&e);
        let x = CMatrix::from_fn(4, 4, |i, j| c((i + 2 * j) as f64 / 7.0));
        let n1 = finsler_norm(&cr, &x).unwrap();
        let n3 = finsler_norm(&cr, &(&x * c(-3.0))).unwrap();
        assert_close(n3, 3.0 * n1, 1e-10);
    }

    #[test]
    fn finsler_adjoint_isometry() {
        let e = random_idempotent(2, 3, 2.0, 12).unwrap();
        let cr = reflection_of(&e);
        let w = haar_unitary(5, 77);
        // tangent vectors anticommute with the reflection
        let x = (&w - &cr * &w * &cr) * c(0.5);
        let lhs = finsler_norm(&cr.adjoint(), &x.adjoint()).unwrap();
        let rhs = finsler_norm(&cr, &x).unwrap();
        assert_close(lhs, rhs, 1e-10);
    }

    #[test]
    fn fiber_geodesic_endpoints() {
        let e = random_idempotent(2, 2, 1.2, 6).unwrap();
        let cr = reflection_of(&e);
        let pi_c = retraction_pi(&cr).unwrap();
        let c0 = fiber_geodesic(&cr, 0.0).unwrap();
        assert!((&c0 - &pi_c).norm() <= 1e-11);
        let c1 = fiber_geodesic(&cr, 1.0).unwrap();
        assert!((&c1 - &cr).norm() <= 1e-11);
        let cm1 = fiber_geodesic(&cr, -1.0).unwrap();
        assert!((&cm1 - cr.adjoint()).norm() <= 1e-11);
    }

    #[test]
    fn fiber_distance_reference() {
        assert!(fiber_distance(&hermitian_projection()).unwrap() <= 1e-12);
        let d = fiber_distance(&oblique_unit()).unwrap();
        assert_close(d, 0.8813735870195430, 1e-14);
        assert_close(d, (1.0 + 2f64.sqrt()).ln(), 1e-14);
        // symmetric in E and E*
        let e = random_idempotent(3, 2, 2.2, 13).unwrap();
        let d1 = fiber_distance(&e).unwrap();
        let d2 = fiber_distance(&e.adjoint_idempotent()).unwrap();
        assert_close(d1, d2, 1e-11);
    }

    #[test]
    fn matched_distances_reference() {
        let p = hermitian_projection();
        let d = matched_distances(&p).unwrap();
        assert!(d.norm_e_m <= 1e-12 && d.norm_p_m <= 1e-12 && d.dist_p_m <= 1e-12);

        let e = oblique_unit();
        let d = matched_distances(&e).unwrap();
        assert_close(d.norm_e_m, 0.5f64.sqrt(), 1e-12);
        assert_close(d.dist_p_m, std::f64::consts::FRAC_PI_8, 1e-13);
        assert_close(d.norm_p_m, std::f64::consts::FRAC_PI_8.sin(), 1e-12);
    }

    #[test]
    fn coincidence_report_reference_cases() {
        let rep = coincidence_report(&hermitian_projection()).unwrap();
        assert!(rep.max_residual() <= 1e-13);
        assert_close(rep.norm_b, 0.0, 1e-12);

        let rep = coincidence_report(&oblique_unit()).unwrap();
        assert!(rep.max_residual() <= 1e-12);
        assert_close(rep.norm_diff, 0.7071067811865476, 1e-13);
        assert_close(rep.dist_e_to_m, (1.0 + 2f64.sqrt()).ln(), 1e-12);
        assert_close(rep.norm_e_minus_m, 0.5f64.sqrt(), 1e-12);

        let e = random_idempotent(8, 8, 5.0, 33).unwrap();
        let rep = coincidence_report(&e).unwrap();
        assert!(rep.max_residual() <= 1e-8 * 16.0);
    }

    #[test]
    fn analysis_report_serializes_with_exact_field_names() {
        let rep = coincidence_report(&oblique_unit()).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        for key in [
            "\"n\"",
            "\"norm_B\"",
            "\"norm_diff\"",
            "\"residual_m_vs_midpoint\"",
            "\"residual_m_vs_pi\"",
            "\"residual_m_vs_davis\"",
            "\"dist_E_to_mE\"",
            "\"norm_E_minus_mE\"",
            "\"spectrum\"",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        assert!(!json.contains("seed"));
    }

    #[test]
    fn naturality_reference_cases() {
        let p = hermitian_projection();
        let id = CMatrix::identity(2, 2);
        let r = naturality_check(&p, &id).unwrap();
        assert!(r.max() <= 1e-12);

        let e = oblique_unit();
        let u = haar_unitary(2, 99);
        let r = naturality_check(&e, &u).unwrap();
        assert!(r.max() <= 1e-10);

        // complement ranks
        let m = matched_projection(&e).unwrap();
        let mc = matched_projection(&e.complement()).unwrap();
        assert_eq!(mc.projection().rank(), e.dim() - m.projection().rank());
    }

    #[test]
    fn naturality_rejects_non_unitary() {
        let e = oblique_unit();
        let bad = m2(1.0, 0.0, 0.0, 2.0);
        assert!(matches!(
            naturality_check(&e, &bad),
            Err(Error::NotUnitary { .. })
        ));
    }
}
