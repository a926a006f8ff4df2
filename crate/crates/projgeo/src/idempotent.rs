//! Idempotents (oblique projections) and orthogonal projections.
//!
//! An idempotent E (E² = E) written against R(E) ⊕ R(E)⊥ has the block form
//! [[1, B], [0, 0]]; the operator B: R(E)⊥ → R(E) governs the whole geometry.
//! This module validates idempotents, recovers B, computes the range and
//! corange projections E(E+E*-1)^{-1} and E*(E+E*-1)^{-1}, the spectrum of
//! their difference, the canonical form 1 ⊕ 0 ⊕ [[1, RD], [0, 0]] with R
//! Hermitian negative and D unitary, and the Halmos model of two subspaces.

use nalgebra::DVector;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    c, hermitian_eig_unchecked, hermitian_eigenvalues_unchecked, hermitize, mat_serde,
    operator_norm, CMatrix, C64, INV_TOL,
};

/// Default relative tolerance for the idempotency residual ||E²-E||.
pub const DEFAULT_IDEM_TOL: f64 = 1e-10;
/// Default relative tolerance for spectral rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Margin below 1 at which ||P+Q-1|| counts as strictly contractive.
pub const DIRECT_SUM_TOL: f64 = 1e-10;

/// Dimension-scaled tolerance for validating orthogonal projections.
pub fn proj_tol(n: usize) -> f64 {
    1e-10 * n.max(1) as f64
}

// ---------------------------------------------------------------------------
// Orthogonal projections
// ---------------------------------------------------------------------------

/// A validated Hermitian idempotent.
#[derive(Debug, Clone)]
pub struct OrthogonalProjection {
    matrix: CMatrix,
    rank: usize,
}

impl OrthogonalProjection {
    /// Validate a candidate projection.
    ///
    /// Residuals up to `tol` are accepted as-is; residuals up to `10*tol` are
    /// repaired by rounding eigenvalues to {0, 1}; anything larger is an
    /// error, so numerical drift stays visible instead of being absorbed.
    pub fn try_new(m: CMatrix, tol: f64) -> Result<Self> {
        crate::matcore::ensure_finite(&m)?;
        if m.nrows() != m.ncols() {
            return Err(Error::NotProjection {
                detail: format!("not square: {}x{}", m.nrows(), m.ncols()),
            });
        }
        let herm_resid = (&m - m.adjoint()).norm();
        let idem_resid = (&m * &m - &m).norm();
        let resid = herm_resid.max(idem_resid);
        if resid <= tol {
            let matrix = hermitize(&m);
            let rank = trace_rank(&matrix)?;
            return Ok(OrthogonalProjection { matrix, rank });
        }
        if resid <= 10.0 * tol {
            let se = hermitian_eig_unchecked(&hermitize(&m));
            let rounded = se.apply(|t| if t > 0.5 { 1.0 } else { 0.0 });
            let rank = se.eigenvalues.iter().filter(|&&t| t > 0.5).count();
            return Ok(OrthogonalProjection {
                matrix: rounded,
                rank,
            });
        }
        Err(Error::NotProjection {
            detail: format!(
                "residual {resid:.3e} exceeds 10x tolerance {:.3e}",
                10.0 * tol
            ),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The complementary projection 1 - P.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        OrthogonalProjection {
            matrix: CMatrix::identity(n, n) - &self.matrix,
            rank: n - self.rank,
        }
    }

    /// The associated symmetry 2P - 1.
    pub fn symmetry(&self) -> CMatrix {
        let n = self.dim();
        &self.matrix * c(2.0) - CMatrix::identity(n, n)
    }
}

fn trace_rank(m: &CMatrix) -> Result<usize> {
    let t = m.trace().re;
    let r = t.round();
    if (t - r).abs() > 0.01 || r < -0.5 {
        return Err(Error::NotProjection {
            detail: format!("trace {t} is not close to an integer"),
        });
    }
    Ok(r as usize)
}

// ---------------------------------------------------------------------------
// Idempotents
// ---------------------------------------------------------------------------

/// A validated idempotent: ||E²-E|| <= tol·(1+||E||²), with E+E*-1 invertible.
#[derive(Debug, Clone)]
pub struct Idempotent {
    matrix: CMatrix,
    idem_residual: f64,
}

impl Idempotent {
    /// Validate an arbitrary square matrix as an idempotent.
    pub fn validate(matrix: CMatrix, tol: f64) -> Result<Self> {
        crate::matcore::ensure_finite(&matrix)?;
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "idempotent must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let norm_e = operator_norm(&matrix)?;
        let residual = operator_norm(&(&matrix * &matrix - &matrix))?;
        let bound = tol * (1.0 + norm_e * norm_e);
        if residual > bound {
            return Err(Error::NotIdempotent {
                residual,
                tol: bound,
            });
        }
        // E+E*-1 is invertible for every true idempotent; a failure here means
        // the input is too far from idempotent for the formulas downstream.
        let m = sum_symmetry(&matrix);
        let ev = hermitian_eigenvalues_unchecked(&m);
        let max_abs = ev.iter().fold(0.0f64, |a, &t| a.max(t.abs()));
        let min_abs = ev.iter().fold(f64::INFINITY, |a, &t| a.min(t.abs()));
        if !(min_abs > INV_TOL * max_abs.max(1.0)) {
            return Err(Error::Degenerate {
                min_abs_eig: min_abs,
            });
        }
        Ok(Idempotent {
            matrix,
            idem_residual: residual,
        })
    }

    /// Assemble [[I_r, B], [0, 0]], which is idempotent by construction.
    pub fn from_block(r: usize, k: usize, b: &CMatrix) -> Result<Self> {
        if b.nrows() != r || b.ncols() != k {
            return Err(Error::InvalidInput(format!(
                "block shape mismatch: expected {}x{}, got {}x{}",
                r,
                k,
                b.nrows(),
                b.ncols()
            )));
        }
        crate::matcore::ensure_finite(b)?;
        let n = r + k;
        let mut e = CMatrix::zeros(n, n);
        e.view_mut((0, 0), (r, r)).copy_from(&CMatrix::identity(r, r));
        e.view_mut((0, r), (r, k)).copy_from(b);
        // E² = E holds exactly: the only products involve the identity block.
        Ok(Idempotent {
            matrix: e,
            idem_residual: 0.0,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn idem_residual(&self) -> f64 {
        self.idem_residual
    }

    /// Rank, read off the trace (trace of an idempotent equals its rank).
    pub fn rank(&self) -> usize {
        self.matrix.trace().re.round().max(0.0) as usize
    }

    /// E*, an idempotent with the same residual.
    pub fn adjoint_idempotent(&self) -> Self {
        Idempotent {
            matrix: self.matrix.adjoint(),
            idem_residual: self.idem_residual,
        }
    }

    /// 1 - E; (1-E)² - (1-E) = E² - E, so the residual carries over.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        Idempotent {
            matrix: CMatrix::identity(n, n) - &self.matrix,
            idem_residual: self.idem_residual,
        }
    }

    /// U E U* for unitary U.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        let n = self.dim();
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::InvalidInput("conjugating unitary has wrong size".into()));
        }
        let resid = (u.adjoint() * u - CMatrix::identity(n, n)).norm();
        if resid > 1e-8 * n as f64 {
            return Err(Error::NotUnitary { residual: resid });
        }
        Ok(Idempotent {
            matrix: u * &self.matrix * u.adjoint(),
            idem_residual: self.idem_residual,
        })
    }

    /// P_{R(E)} = E (E+E*-1)^{-1}.
    pub fn range_projection(&self) -> Result<OrthogonalProjection> {
        let inv = self.sum_symmetry_inverse()?;
        OrthogonalProjection::try_new(&self.matrix * inv, self.projection_tol())
    }

    /// P_{R(E*)} = E* (E+E*-1)^{-1}.
    pub fn corange_projection(&self) -> Result<OrthogonalProjection> {
        let inv = self.sum_symmetry_inverse()?;
        OrthogonalProjection::try_new(self.matrix.adjoint() * inv, self.projection_tol())
    }

    fn projection_tol(&self) -> f64 {
        // Validation residuals of derived projections grow with the residual
        // of the source idempotent (relevant for truncated models).
        proj_tol(self.dim()).max(10.0 * self.idem_residual)
    }

    fn sum_symmetry_inverse(&self) -> Result<CMatrix> {
        let m = sum_symmetry(&self.matrix);
        m.lu().try_inverse().ok_or(Error::Degenerate { min_abs_eig: 0.0 })
    }

    /// Recover the block form: orthonormal bases of R(E) and R(E)⊥ plus the
    /// operator B in those coordinates.
    ///
    /// Basis columns come from the eigenvectors of the range projection,
    /// ordered by descending eigenvalue, each column's phase fixed so its
    /// first significant component is real positive; round trips are
    /// deterministic.
    pub fn block_form(&self) -> Result<BlockForm> {
        let p = self.range_projection()?;
        let se = hermitian_eig_unchecked(p.matrix());
        let n = self.dim();
        let rank = p.rank();
        // ascending order: complement eigenvectors first
        let mut cols: Vec<DVector<C64>> = (0..n).map(|j| se.eigenvectors.column(j).clone_owned()).collect();
        cols.reverse();
        for col in cols.iter_mut() {
            phase_fix(col);
        }
        let range_basis = CMatrix::from_columns(&cols[..rank]);
        let complement_basis = if rank < n {
            CMatrix::from_columns(&cols[rank..])
        } else {
            CMatrix::zeros(n, 0)
        };
        let b = range_basis.adjoint() * &self.matrix * &complement_basis;
        Ok(BlockForm {
            range_basis,
            complement_basis,
            b,
        })
    }

    /// Eigenvalues of P_{R(E)} - P_{R(E*)}, ascending.
    ///
    /// Up to the zero eigenvalues contributed by N(B) and N(B*), this multiset
    /// equals {± σ/(1+σ²)^{1/2}} over the singular values σ of B.
    pub fn difference_spectrum(&self) -> Result<Vec<f64>> {
        let p = self.range_projection()?;
        let q = self.corange_projection()?;
        let a = hermitize(&(p.matrix() - q.matrix()));
        Ok(hermitian_eigenvalues_unchecked(&a))
    }

    /// ||P_{R(E)} - P_{R(E*)}|| together with its closed form in ||B|| and the
    /// geodesic distance arcsin of it.
    pub fn projection_distance(&self) -> Result<ProjectionDistance> {
        let spectrum = self.difference_spectrum()?;
        let norm_diff = spectrum.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
        let bf = self.block_form()?;
        let norm_b = operator_norm(&bf.b)?;
        let predicted = norm_b / (1.0 + norm_b * norm_b).sqrt();
        Ok(ProjectionDistance {
            norm_diff,
            predicted,
            geodesic_distance: norm_diff.clamp(0.0, 1.0).asin(),
        })
    }

    /// Canonical decomposition H₁ ⊕ H₂ ⊕ H₃ ⊕ H₄ in which E is
    /// 1 ⊕ 0 ⊕ [[1, RD], [0, 0]] with R = -(B₀B₀*)^{1/2} negative Hermitian
    /// and D unitary. H₁ = N(B*) inside R(E), H₂ = N(B) inside R(E)⊥, and
    /// H₃, H₄ carry the generic part.
    pub fn cpr_canonical_form(&self, rank_tol: f64) -> Result<CprCanonicalForm> {
        let bf = self.block_form()?;
        self.cpr_from_block(&bf, rank_tol)
    }

    pub(crate) fn cpr_from_block(&self, bf: &BlockForm, rank_tol: f64) -> Result<CprCanonicalForm> {
        let (r_dim, k_dim) = (bf.b.nrows(), bf.b.ncols());
        let n = self.dim();
        let smax = operator_norm(&bf.b)?;
        let norm_e = operator_norm(&self.matrix)?;

        if smax <= 1e-13 * (1.0 + norm_e) {
            // Hermitian case: no generic part at all.
            return Ok(CprCanonicalForm {
                h1_basis: bf.range_basis,
                h2_basis: bf.complement_basis,
                h3_basis: CMatrix::zeros(n, 0),
                h4_basis: CMatrix::zeros(n, 0),
                r: CMatrix::zeros(0, 0),
                d: CMatrix::zeros(0, 0),
            });
        }

        let se_v = hermitian_eig_unchecked(&hermitize(&(bf.b.adjoint() * &bf.b)));
        let se_w = hermitian_eig_unchecked(&hermitize(&(&bf.b * bf.b.adjoint())));
        let sigmas_v: Vec<f64> = se_v.eigenvalues.iter().map(|&t| t.max(0.0).sqrt()).collect();
        let sigmas_w: Vec<f64> = se_w.eigenvalues.iter().map(|&t| t.max(0.0).sqrt()).collect();
        let mut s = 0usize;
        for &sv in &sigmas_v {
            if classify_positive(sv, rank_tol, smax)? {
                s += 1;
            }
        }
        let mut s_w = 0usize;
        for &sw in &sigmas_w {
            if classify_positive(sw, rank_tol, smax)? {
                s_w += 1;
            }
        }
        if s != s_w {
            return Err(Error::Geometry(format!(
                "inconsistent numerical rank of B: {s} from B*B, {s_w} from BB*"
            )));
        }

        // positive singular values descending; nulls keep their ascending order
        let v_pos_cols: Vec<DVector<C64>> = (0..s)
            .map(|j| se_v.eigenvectors.column(k_dim - 1 - j).clone_owned())
            .collect();
        let v_null_cols: Vec<DVector<C64>> = (0..k_dim - s)
            .map(|j| se_v.eigenvectors.column(j).clone_owned())
            .collect();
        let w_null_cols: Vec<DVector<C64>> = (0..r_dim - s)
            .map(|j| se_w.eigenvectors.column(j).clone_owned())
            .collect();
        let v_pos = CMatrix::from_columns(&v_pos_cols);
        let w_pos_cols: Vec<DVector<C64>> = (0..s)
            .map(|j| {
                let sigma = sigmas_v[k_dim - 1 - j];
                let w = &bf.b * v_pos.column(j);
                w / c(sigma)
            })
            .collect();
        let w_pos = CMatrix::from_columns(&w_pos_cols);

        let b0 = w_pos.adjoint() * &bf.b * &v_pos;
        let se_b0 = hermitian_eig_unchecked(&hermitize(&(&b0 * b0.adjoint())));
        let r_op = se_b0.apply(|t| -t.max(0.0).sqrt());
        let r_inv = se_b0.apply(|t| -1.0 / t.max(f64::MIN_POSITIVE).sqrt());
        let d_op = r_inv * &b0;
        let d_resid = (d_op.adjoint() * &d_op - CMatrix::identity(s, s)).norm();
        if d_resid > 1e-6 * s as f64 {
            return Err(Error::Geometry(format!(
                "canonical isometry failed unitarity check: residual {d_resid:.3e}"
            )));
        }

        let h1_basis = if r_dim > s {
            &bf.range_basis * CMatrix::from_columns(&w_null_cols)
        } else {
            CMatrix::zeros(n, 0)
        };
        let h2_basis = if k_dim > s {
            &bf.complement_basis * CMatrix::from_columns(&v_null_cols)
        } else {
            CMatrix::zeros(n, 0)
        };
        let h3_basis = &bf.range_basis * &w_pos;
        let h4_basis = &bf.complement_basis * &v_pos;

        Ok(CprCanonicalForm {
            h1_basis,
            h2_basis,
            h3_basis,
            h4_basis,
            r: r_op,
            d: d_op,
        })
    }
}

/// Hermitized E + E* - 1.
fn sum_symmetry(e: &CMatrix) -> CMatrix {
    let n = e.nrows();
    hermitize(&(e + e.adjoint() - CMatrix::identity(n, n)))
}

fn phase_fix(col: &mut DVector<C64>) {
    let max_abs = col.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max_abs == 0.0 {
        return;
    }
    if let Some(z) = col.iter().find(|z| z.norm() > 1e-8 * max_abs).copied() {
        let phase = z / c(z.norm());
        let correction = phase.conj();
        for v in col.iter_mut() {
            *v *= correction;
        }
    }
}

/// Zero / positive decision for a magnitude `value` at scale `scale`, with an
/// ambiguity band (rank_tol/10, rank_tol*10)·scale in which no guess is made.
fn classify_positive(value: f64, rank_tol: f64, scale: f64) -> Result<bool> {
    let lo = 0.1 * rank_tol * scale;
    let hi = 10.0 * rank_tol * scale;
    if value <= lo {
        Ok(false)
    } else if value >= hi {
        Ok(true)
    } else {
        Err(Error::ToleranceBand { value, lo, hi })
    }
}

/// Is `value` at `target` (within band), away from it, or ambiguous?
fn classify_at(value: f64, target: f64, rank_tol: f64) -> Result<bool> {
    let d = (value - target).abs();
    let lo = 0.1 * rank_tol;
    let hi = 10.0 * rank_tol;
    if d <= lo {
        Ok(true)
    } else if d >= hi {
        Ok(false)
    } else {
        Err(Error::ToleranceBand { value: d, lo, hi })
    }
}

/// Orthonormal bases of R(E) and R(E)⊥ plus B in those coordinates.
#[derive(Debug, Clone)]
pub struct BlockForm {
    pub range_basis: CMatrix,
    pub complement_basis: CMatrix,
    pub b: CMatrix,
}

impl BlockForm {
    /// [range_basis | complement_basis] · [[I, B], [0, 0]] · [·]*.
    pub fn reassemble(&self) -> CMatrix {
        let p_part = &self.range_basis * self.range_basis.adjoint();
        let b_part = &self.range_basis * &self.b * self.complement_basis.adjoint();
        p_part + b_part
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectionDistance {
    /// ||P_{R(E)} - P_{R(E*)}||, computed spectrally.
    pub norm_diff: f64,
    /// ||B|| / (1 + ||B||²)^{1/2}.
    pub predicted: f64,
    /// arcsin of norm_diff.
    pub geodesic_distance: f64,
}

/// Canonical form data: E = 1 ⊕ 0 ⊕ [[1, RD], [0, 0]] against the four bases.
#[derive(Debug, Clone, Serialize)]
pub struct CprCanonicalForm {
    #[serde(with = "mat_serde")]
    pub h1_basis: CMatrix,
    #[serde(with = "mat_serde")]
    pub h2_basis: CMatrix,
    #[serde(with = "mat_serde")]
    pub h3_basis: CMatrix,
    #[serde(with = "mat_serde")]
    pub h4_basis: CMatrix,
    #[serde(rename = "R", with = "mat_serde")]
    pub r: CMatrix,
    #[serde(rename = "D", with = "mat_serde")]
    pub d: CMatrix,
}

impl CprCanonicalForm {
    pub fn generic_dim(&self) -> usize {
        self.r.nrows()
    }

    /// Map a 2x2-blocked operator on H₃ ⊕ H₄ plus scalars on H₁, H₂ back to
    /// ambient coordinates.
    pub fn assemble(
        &self,
        on_h1: f64,
        on_h2: f64,
        block33: &CMatrix,
        block34: &CMatrix,
        block43: &CMatrix,
        block44: &CMatrix,
    ) -> CMatrix {
        let n = self.h1_basis.nrows();
        let mut out = CMatrix::zeros(n, n);
        if self.h1_basis.ncols() > 0 && on_h1 != 0.0 {
            out += &self.h1_basis * self.h1_basis.adjoint() * c(on_h1);
        }
        if self.h2_basis.ncols() > 0 && on_h2 != 0.0 {
            out += &self.h2_basis * self.h2_basis.adjoint() * c(on_h2);
        }
        if self.generic_dim() > 0 {
            out += &self.h3_basis * block33 * self.h3_basis.adjoint();
            out += &self.h3_basis * block34 * self.h4_basis.adjoint();
            out += &self.h4_basis * block43 * self.h3_basis.adjoint();
            out += &self.h4_basis * block44 * self.h4_basis.adjoint();
        }
        out
    }

    /// Rebuild E from the canonical data.
    pub fn reassemble(&self) -> CMatrix {
        let s = self.generic_dim();
        let id = CMatrix::identity(s, s);
        let rd = &self.r * &self.d;
        let zero = CMatrix::zeros(s, s);
        self.assemble(1.0, 0.0, &id, &rd, &zero, &zero)
    }
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex::new(randn(rng), randn(rng)) * c(std::f64::consts::FRAC_1_SQRT_2)
    })
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of the R diagonal folded back into Q.
pub fn haar_unitary_from_rng(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let phases: Vec<C64> = (0..n)
        .map(|i| {
            let d = r[(i, i)];
            if d.norm() == 0.0 {
                c(1.0)
            } else {
                d / c(d.norm())
            }
        })
        .collect();
    let mut u = q;
    for (j, phase) in phases.iter().enumerate() {
        for z in u.column_mut(j).iter_mut() {
            *z *= *phase;
        }
    }
    u
}

pub fn haar_unitary(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary_from_rng(n, &mut rng)
}

/// Haar-conjugated rank-`rank` orthogonal projection.
pub fn random_projection_from_rng(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> OrthogonalProjection {
    let u = haar_unitary_from_rng(n, rng);
    let cols: Vec<DVector<C64>> = (0..rank).map(|j| u.column(j).clone_owned()).collect();
    let matrix = if rank == 0 {
        CMatrix::zeros(n, n)
    } else {
        let v = CMatrix::from_columns(&cols);
        hermitize(&(&v * v.adjoint()))
    };
    OrthogonalProjection { matrix, rank }
}

/// Seeded random idempotent U [[I, B], [0, 0]] U* with ||B|| = `target_norm_b`
/// and U Haar-distributed. Deterministic per seed.
pub fn random_idempotent(r: usize, k: usize, target_norm_b: f64, seed: u64) -> Result<Idempotent> {
    if r == 0 || k == 0 {
        return Err(Error::InvalidInput("block dimensions must be positive".into()));
    }
    if !(target_norm_b >= 0.0) || !target_norm_b.is_finite() {
        return Err(Error::InvalidInput(format!(
            "target norm of B must be a finite non-negative real, got {target_norm_b}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = if target_norm_b == 0.0 {
        CMatrix::zeros(r, k)
    } else {
        let g = gaussian_matrix(r, k, &mut rng);
        let norm = operator_norm(&g)?;
        &g * c(target_norm_b / norm)
    };
    let f = Idempotent::from_block(r, k, &b)?;
    let u = haar_unitary_from_rng(r + k, &mut rng);
    let matrix = &u * f.matrix() * u.adjoint();
    Idempotent::validate(matrix, DEFAULT_IDEM_TOL)
}

// ---------------------------------------------------------------------------
// Two-projection geometry
// ---------------------------------------------------------------------------

/// Indicators for the Buckholtz equivalence: S ∔ T = H  ⇔  ||P+Q-1|| < 1
/// ⇔  P-Q invertible.
#[derive(Debug, Clone, Copy)]
pub struct BuckholtzReport {
    pub direct_sum: bool,
    pub norm_pq_minus_one: f64,
    pub min_sv_p_minus_q: f64,
}

pub fn buckholtz_check(p: &OrthogonalProjection, q: &OrthogonalProjection) -> Result<BuckholtzReport> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidInput("projection dimensions differ".into()));
    }
    let n = p.dim();
    let sum = hermitize(&(p.matrix() + q.matrix() - CMatrix::identity(n, n)));
    let norm_pq_minus_one = hermitian_eigenvalues_unchecked(&sum)
        .iter()
        .fold(0.0f64, |m, &t| m.max(t.abs()));
    let diff = hermitize(&(p.matrix() - q.matrix()));
    let min_sv_p_minus_q = hermitian_eigenvalues_unchecked(&diff)
        .iter()
        .fold(f64::INFINITY, |m, &t| m.min(t.abs()));
    Ok(BuckholtzReport {
        direct_sum: norm_pq_minus_one < 1.0 - DIRECT_SUM_TOL,
        norm_pq_minus_one,
        min_sv_p_minus_q: if n == 0 { 0.0 } else { min_sv_p_minus_q },
    })
}

/// Halmos model of a pair of projections: intersection dimensions plus the
/// generic part carried unitarily onto L × L where P = [[1,0],[0,0]] and
/// Q = [[C², CS],[CS, S²]].
#[derive(Debug, Clone, Serialize)]
pub struct HalmosDecomposition {
    pub dim_both: usize,
    pub dim_p_only: usize,
    pub dim_q_only: usize,
    pub dim_neither: usize,
    /// Co-isometry of shape 2g×n mapping the generic part onto L × L
    /// coordinates (rows 0..g are the L-copy inside R(P), rows g..2g the
    /// complementary copy).
    #[serde(with = "mat_serde")]
    pub generic_iso: CMatrix,
    /// Principal angles, ascending, strictly inside (0, π/2).
    pub angles: Vec<f64>,
}

pub fn halmos_decomposition(
    p: &OrthogonalProjection,
    q: &OrthogonalProjection,
    rank_tol: f64,
) -> Result<HalmosDecomposition> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidInput("projection dimensions differ".into()));
    }
    let n = p.dim();
    let pm = p.matrix();
    let qm = q.matrix();

    let se_sum = hermitian_eig_unchecked(&hermitize(&(pm + qm)));
    let se_diff = hermitian_eig_unchecked(&hermitize(&(pm - qm)));

    let mut fixed_cols: Vec<DVector<C64>> = Vec::new();
    let (mut dim_both, mut dim_neither, mut dim_p_only, mut dim_q_only) = (0, 0, 0, 0);
    for (i, &lambda) in se_sum.eigenvalues.iter().enumerate() {
        if classify_at(lambda, 2.0, rank_tol)? {
            dim_both += 1;
            fixed_cols.push(se_sum.eigenvectors.column(i).clone_owned());
        } else if classify_at(lambda, 0.0, rank_tol)? {
            dim_neither += 1;
            fixed_cols.push(se_sum.eigenvectors.column(i).clone_owned());
        }
    }
    for (i, &mu) in se_diff.eigenvalues.iter().enumerate() {
        if classify_at(mu, 1.0, rank_tol)? {
            dim_p_only += 1;
            fixed_cols.push(se_diff.eigenvectors.column(i).clone_owned());
        } else if classify_at(mu, -1.0, rank_tol)? {
            dim_q_only += 1;
            fixed_cols.push(se_diff.eigenvectors.column(i).clone_owned());
        }
    }

    // Generic part: orthogonal complement of the four fixed blocks.
    let mut fixed_proj = CMatrix::zeros(n, n);
    for v in &fixed_cols {
        fixed_proj += v * v.adjoint();
    }
    let p0 = CMatrix::identity(n, n) - fixed_proj;
    let se0 = hermitian_eig_unchecked(&hermitize(&p0));
    let mut generic_cols: Vec<DVector<C64>> = Vec::new();
    for (i, &lambda) in se0.eigenvalues.iter().enumerate() {
        if classify_at(lambda, 1.0, rank_tol)? {
            generic_cols.push(se0.eigenvectors.column(i).clone_owned());
        } else if !classify_at(lambda, 0.0, rank_tol)? {
            return Err(Error::Geometry(format!(
                "generic-part projector has eigenvalue {lambda} away from 0 and 1"
            )));
        }
    }
    let g2 = generic_cols.len();
    if dim_both + dim_p_only + dim_q_only + dim_neither + g2 != n {
        return Err(Error::Geometry(
            "subspace dimensions do not add up to the ambient dimension".into(),
        ));
    }

    if g2 == 0 {
        return Ok(HalmosDecomposition {
            dim_both,
            dim_p_only,
            dim_q_only,
            dim_neither,
            generic_iso: CMatrix::zeros(0, n),
            angles: Vec::new(),
        });
    }

    let w = CMatrix::from_columns(&generic_cols);
    let p_hat = hermitize(&(w.adjoint() * pm * &w));
    let q_hat = hermitize(&(w.adjoint() * qm * &w));
    let se_p = hermitian_eig_unchecked(&p_hat);
    let mut f1_cols: Vec<DVector<C64>> = Vec::new();
    let mut f2_cols: Vec<DVector<C64>> = Vec::new();
    for (i, &lambda) in se_p.eigenvalues.iter().enumerate() {
        if classify_at(lambda, 1.0, rank_tol)? {
            f1_cols.push(se_p.eigenvectors.column(i).clone_owned());
        } else if classify_at(lambda, 0.0, rank_tol)? {
            f2_cols.push(se_p.eigenvectors.column(i).clone_owned());
        } else {
            return Err(Error::Geometry(format!(
                "compressed projection has eigenvalue {lambda} away from 0 and 1"
            )));
        }
    }
    if f1_cols.len() != f2_cols.len() {
        return Err(Error::Geometry(format!(
            "generic part is lopsided: {} vs {} dimensions",
            f1_cols.len(),
            f2_cols.len()
        )));
    }
    let g = f1_cols.len();
    let f1 = CMatrix::from_columns(&f1_cols);
    let f2 = CMatrix::from_columns(&f2_cols);

    let h = hermitize(&(f1.adjoint() * &q_hat * &f1)); // C² on the L-copy
    let se_h = hermitian_eig_unchecked(&h);
    for &lambda in &se_h.eigenvalues {
        if classify_at(lambda, 0.0, rank_tol)? || classify_at(lambda, 1.0, rank_tol)? {
            return Err(Error::Geometry(format!(
                "generic angle collapsed: cos² = {lambda}"
            )));
        }
    }

    // Rotate the complementary copy so the off-diagonal block becomes CS.
    let q21 = f2.adjoint() * &q_hat * &f1;
    let sc_inv = se_h.apply(|t| 1.0 / (t.max(0.0) * (1.0 - t).max(0.0)).sqrt());
    let u_rot = &q21 * sc_inv;
    let u_resid = (u_rot.adjoint() * &u_rot - CMatrix::identity(g, g)).norm();
    if u_resid > 1e-6 * g as f64 {
        return Err(Error::Geometry(format!(
            "generic-part rotation failed unitarity: residual {u_resid:.3e}"
        )));
    }
    // polish to exact unitarity
    let gram = hermitian_eig_unchecked(&hermitize(&(u_rot.adjoint() * &u_rot)));
    let u_rot = &u_rot * gram.apply(|t| 1.0 / t.max(f64::MIN_POSITIVE).sqrt());

    let a1 = &w * &f1;
    let a2 = &w * &f2 * &u_rot;
    let mut iso = CMatrix::zeros(2 * g, n);
    iso.view_mut((0, 0), (g, n)).copy_from(&a1.adjoint());
    iso.view_mut((g, 0), (g, n)).copy_from(&a2.adjoint());

    let mut angles: Vec<f64> = se_h
        .eigenvalues
        .iter()
        .map(|&t| t.clamp(0.0, 1.0).sqrt().acos())
        .collect();
    angles.sort_by(f64::total_cmp);

    Ok(HalmosDecomposition {
        dim_both,
        dim_p_only,
        dim_q_only,
        dim_neither,
        generic_iso: iso,
        angles,
    })
}
