//! Recovery maps B → B⊗C: the virtual recovery map built from the block
//! matrices, the closed-form W-state Choi matrix, and the Petz channel.
//!
//! Conventions (fixed project-wide):
//! - superoperator form: `superop · vec(X) = vec(map(X))` with column-stacking;
//! - Choi form: `J = Σ_ab |a⟩⟨b|_in ⊗ map(|a⟩⟨b|)` (input ⊗ output order),
//!   so `map(X) = Σ_ab X_ab · (⟨a|_in ⊗ I) J (|b⟩_in ⊗ I)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{block_system, is_vqmc_from_system};
use crate::numerics::{
    herm_eigvals, kron, partial_trace, pinv, psd_sqrt, unvec, vec_mat, ComplexMatrix, C64,
    TAU_HERM_REL, TAU_PSD,
};
use crate::states::TripartiteState;

/// HP / TP / CP flags of a map, computed from its Choi matrix.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MapFlags {
    pub hermitian_preserving: bool,
    pub trace_preserving: bool,
    pub completely_positive: bool,
}

/// A linear map B → B⊗C in both superoperator and Choi form.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Shape out_dim² × in_dim².
    pub superop: ComplexMatrix,
    /// Shape (in_dim·out_dim)², basis order input ⊗ output.
    pub choi: ComplexMatrix,
    pub flags: MapFlags,
}

/// Choi matrix from the superoperator form.
pub fn choi_from_superop(superop: &ComplexMatrix, in_dim: usize, out_dim: usize) -> ComplexMatrix {
    let n = in_dim * out_dim;
    let mut choi = ComplexMatrix::zeros(n, n);
    for a in 0..in_dim {
        for b in 0..in_dim {
            // vec(|a⟩⟨b|) is the unit vector at b·in_dim + a
            let img = superop.column(b * in_dim + a);
            let block = unvec(&img, out_dim, out_dim).expect("shape");
            for r in 0..out_dim {
                for s in 0..out_dim {
                    choi[(a * out_dim + r, b * out_dim + s)] = block[(r, s)];
                }
            }
        }
    }
    choi
}

/// Superoperator from the Choi form.
pub fn superop_from_choi(choi: &ComplexMatrix, in_dim: usize, out_dim: usize) -> ComplexMatrix {
    let mut superop = ComplexMatrix::zeros(out_dim * out_dim, in_dim * in_dim);
    for a in 0..in_dim {
        for b in 0..in_dim {
            let block = ComplexMatrix::from_fn(out_dim, out_dim, |r, s| {
                choi[(a * out_dim + r, b * out_dim + s)]
            });
            superop.set_column(b * in_dim + a, &vec_mat(&block));
        }
    }
    superop
}

/// Recompute HP/TP/CP flags from a Choi matrix.
pub fn flags_from_choi(choi: &ComplexMatrix, in_dim: usize, out_dim: usize) -> Result<MapFlags> {
    let hermitian = choi.is_hermitian(TAU_HERM_REL);
    // TP ⇔ tr_out(J) = I_in
    let marginal = partial_trace(choi, &[in_dim, out_dim], &[1])?;
    let tp = marginal
        .sub(&ComplexMatrix::identity(in_dim))
        .frobenius_norm()
        <= 1e-9 * (in_dim as f64).sqrt().max(1.0);
    let cp = if hermitian {
        let sym = choi
            .add(&choi.dagger())
            .scale_re(0.5);
        herm_eigvals(&sym)?.first().copied().unwrap_or(0.0) >= -TAU_PSD
    } else {
        false
    };
    Ok(MapFlags {
        hermitian_preserving: hermitian,
        trace_preserving: tp,
        completely_positive: cp,
    })
}

impl LinearMap {
    pub fn from_superop(superop: ComplexMatrix, in_dim: usize, out_dim: usize) -> Result<Self> {
        if superop.rows() != out_dim * out_dim || superop.cols() != in_dim * in_dim {
            return Err(Error::DimensionMismatch(format!(
                "superoperator is {}×{}, expected {}×{}",
                superop.rows(),
                superop.cols(),
                out_dim * out_dim,
                in_dim * in_dim
            )));
        }
        let choi = choi_from_superop(&superop, in_dim, out_dim);
        let flags = flags_from_choi(&choi, in_dim, out_dim)?;
        Ok(Self {
            in_dim,
            out_dim,
            superop,
            choi,
            flags,
        })
    }

    pub fn from_choi(choi: ComplexMatrix, in_dim: usize, out_dim: usize) -> Result<Self> {
        let n = in_dim * out_dim;
        if choi.rows() != n || choi.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix is {}×{}, expected {n}×{n}",
                choi.rows(),
                choi.cols()
            )));
        }
        let superop = superop_from_choi(&choi, in_dim, out_dim);
        let flags = flags_from_choi(&choi, in_dim, out_dim)?;
        Ok(Self {
            in_dim,
            out_dim,
            superop,
            choi,
            flags,
        })
    }

    /// JSON artifact: Choi matrix split into real/imaginary parts plus dims
    /// and flags.
    pub fn to_json(&self) -> serde_json::Value {
        let n = self.choi.rows();
        let re: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| self.choi[(i, j)].re).collect())
            .collect();
        let im: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| self.choi[(i, j)].im).collect())
            .collect();
        serde_json::json!({
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
            "choi_re": re,
            "choi_im": im,
            "flags": self.flags,
        })
    }
}

/// Apply a map to `x`, which lives on the input space directly or on
/// A ⊗ input, in which case an identity wire on A is inserted.
pub fn apply_map(map: &LinearMap, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !x.is_square() || x.rows() % map.in_dim != 0 {
        return Err(Error::DimensionMismatch(format!(
            "input is {}×{}, map input dimension is {}",
            x.rows(),
            x.cols(),
            map.in_dim
        )));
    }
    let d_a = x.rows() / map.in_dim;
    if d_a == 1 {
        let out = map.superop.matvec(&vec_mat(x));
        return unvec(&out, map.out_dim, map.out_dim);
    }
    let n_out = d_a * map.out_dim;
    let mut out = ComplexMatrix::zeros(n_out, n_out);
    for i in 0..d_a {
        for j in 0..d_a {
            let block = ComplexMatrix::from_fn(map.in_dim, map.in_dim, |r, s| {
                x[(i * map.in_dim + r, j * map.in_dim + s)]
            });
            let mapped = unvec(
                &map.superop.matvec(&vec_mat(&block)),
                map.out_dim,
                map.out_dim,
            )?;
            for r in 0..map.out_dim {
                for s in 0..map.out_dim {
                    out[(i * map.out_dim + r, j * map.out_dim + s)] = mapped[(r, s)];
                }
            }
        }
    }
    Ok(out)
}

/// Construct the virtual recovery map of a VQMC.
///
/// On the image of Rec_B the map inverts tr_C (via the pseudoinverse of the
/// block matrices); on the orthogonal complement it acts as
/// M ↦ tr(M)/(d_B d_C) · I_BC, which keeps the total map trace-preserving.
pub fn build_virtual_recovery(state: &TripartiteState, rank_tol: f64) -> Result<LinearMap> {
    let sys = block_system(state);
    let verdict = is_vqmc_from_system(&sys, rank_tol)?;
    if !verdict.is_vqmc {
        return Err(Error::NotRecoverable { verdict });
    }
    let d_b = state.dims.d_b;
    let d_c = state.dims.d_c;
    let dbc = d_b * d_c;

    let pinv_b = pinv(&sys.mat_b, rank_tol)?;
    // inversion part: vec(σ) ↦ mat_bc · pinv(mat_b) · vec(σ)
    let invert = sys.mat_bc.matmul(&pinv_b);
    // projector onto im(Rec_B) in the vectorized picture
    let proj_im = sys.mat_b.matmul(&pinv_b);

    // complement part: σ ↦ tr((Id − Π)σ)/(d_B d_C) · I_BC
    let trace_row = vec_mat(&ComplexMatrix::identity(d_b)); // ⟨vec(I_B), ·⟩ = tr
    let vec_id_bc = vec_mat(&ComplexMatrix::identity(dbc));
    let mut complement = ComplexMatrix::zeros(dbc * dbc, d_b * d_b);
    for col in 0..d_b * d_b {
        // (Id − Π) e_col
        let mut residual: Vec<C64> = (0..d_b * d_b)
            .map(|r| {
                let delta = if r == col { 1.0 } else { 0.0 };
                C64::new(delta, 0.0) - proj_im[(r, col)]
            })
            .collect();
        // trace functional on the residual
        let t: C64 = trace_row
            .iter()
            .zip(residual.drain(..))
            .map(|(a, b)| a.conj() * b)
            .sum();
        let scale = t / (dbc as f64);
        for r in 0..dbc * dbc {
            complement[(r, col)] = vec_id_bc[r] * scale;
        }
    }

    let superop = invert.add(&complement);
    LinearMap::from_superop(superop, d_b, dbc)
}

/// Closed-form Choi matrix of a virtual recovery map for the generalized W
/// state |W_{α0,α1}⟩, assembled from the BC blocks Q_BC^{(ij)}:
///
/// J = |0⟩⟨0| ⊗ Q^{(11)}/(1−α0−α1)
///   + |0⟩⟨1| ⊗ Q^{(10)}/√(α1(1−α0−α1))
///   + |1⟩⟨0| ⊗ Q^{(01)}/√(α1(1−α0−α1))
///   + |1⟩⟨1| ⊗ [(1−α0−α1)Q^{(00)} − α0 Q^{(11)}]/(α1(1−α0−α1)).
///
/// (Both off-diagonal coefficients carry α1; that is forced by R(Q_B^{(01)})
/// = Q_BC^{(01)} together with Q_B^{(01)} = √(α1(1−α0−α1))·|1⟩⟨0|, and by
/// Hermiticity of J.)
pub fn w_choi_formula(alpha0: f64, alpha1: f64) -> Result<LinearMap> {
    let rest = 1.0 - alpha0 - alpha1;
    if alpha0 <= 0.0 || alpha1 <= 0.0 || rest <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "the closed-form Choi matrix needs α0, α1, 1−α0−α1 all positive, got ({alpha0}, {alpha1})"
        )));
    }
    let state = crate::states::w_state(alpha0, alpha1)?;
    let q = |i: usize, j: usize| crate::markov::a_block(&state.rho, 2, i, j);

    let mut choi = ComplexMatrix::zeros(8, 8);
    let mut add_block = |a: usize, b: usize, m: &ComplexMatrix| {
        for r in 0..4 {
            for s in 0..4 {
                choi[(a * 4 + r, b * 4 + s)] += m[(r, s)];
            }
        }
    };
    let off = 1.0 / (alpha1 * rest).sqrt();
    add_block(0, 0, &q(1, 1).scale_re(1.0 / rest));
    add_block(0, 1, &q(1, 0).scale_re(off));
    add_block(1, 0, &q(0, 1).scale_re(off));
    add_block(
        1,
        1,
        &q(0, 0)
            .scale_re(rest)
            .sub(&q(1, 1).scale_re(alpha0))
            .scale_re(1.0 / (alpha1 * rest)),
    );
    LinearMap::from_choi(choi, 2, 4)
}

/// Petz recovery map X ↦ ρ_BC^{1/2} (ρ_B^{−1/2} X ρ_B^{−1/2} ⊗ I_C) ρ_BC^{1/2},
/// with pseudo-inverse square roots on the support of ρ_B.
pub fn petz_map(rho_bc: &ComplexMatrix, d_b: usize, d_c: usize) -> Result<LinearMap> {
    if rho_bc.rows() != d_b * d_c {
        return Err(Error::DimensionMismatch(format!(
            "ρ_BC is {}×{}, expected {}×{}",
            rho_bc.rows(),
            rho_bc.cols(),
            d_b * d_c,
            d_b * d_c
        )));
    }
    let rho_b = partial_trace(rho_bc, &[d_b, d_c], &[1])?;
    let sqrt_bc = psd_sqrt(rho_bc)?;
    let sqrt_b = psd_sqrt(&rho_b)?;
    let inv_sqrt_b = pinv(&sqrt_b, 1e-10)?;
    let dbc = d_b * d_c;
    let mut superop = ComplexMatrix::zeros(dbc * dbc, d_b * d_b);
    for a in 0..d_b {
        for b in 0..d_b {
            let mut e = ComplexMatrix::zeros(d_b, d_b);
            e[(a, b)] = C64::new(1.0, 0.0);
            let middle = inv_sqrt_b.matmul(&e).matmul(&inv_sqrt_b);
            let lifted = kron(&middle, &ComplexMatrix::identity(d_c));
            let out = sqrt_bc.matmul(&lifted).matmul(&sqrt_bc);
            superop.set_column(b * d_b + a, &vec_mat(&out));
        }
    }
    LinearMap::from_superop(superop, d_b, dbc)
}

/// Recompute the HP/TP/CP flags of a map from its Choi matrix.
pub fn check_flags(map: &LinearMap) -> Result<MapFlags> {
    flags_from_choi(&map.choi, map.in_dim, map.out_dim)
}

/// Trace-norm residual ‖(id_A ⊗ R)(ρ_AB) − ρ_ABC‖₁ of a candidate recovery
/// map for a state.
pub fn recovery_residual(map: &LinearMap, state: &TripartiteState) -> Result<f64> {
    let recovered = apply_map(map, &state.rho_ab())?;
    crate::numerics::trace_norm(&recovered.sub(&state.rho))
}
