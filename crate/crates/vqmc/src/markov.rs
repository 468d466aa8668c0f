//! Block-matrix construction and the virtual-Markov-chain decision procedure.
//!
//! For ρ_ABC = Σ_ij |i⟩⟨j|_A ⊗ Q_BC^{(ij)}, the block matrix Rec_B has
//! vec(Q_B^{(ij)}) as its columns (Rec_BC analogously). The state admits a
//! virtual (HPTP) recovery map B → BC exactly when ker Rec_B ⊆ ker Rec_BC;
//! since tr_C ∘ Rec_BC = Rec_B forces the reverse inclusion, the test
//! reduces to rank equality.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{
    numerical_rank, partial_trace, svd, unvec, vec_mat, ComplexMatrix, DimSplit, C64,
    DEFAULT_RANK_TOL,
};
use crate::states::TripartiteState;

/// The matricized block maps Rec_B and Rec_BC of a tripartite state.
#[derive(Debug, Clone)]
pub struct BlockMatrixSystem {
    /// Shape d_B² × d_A²; column (i·d_A + j) is vec(Q_B^{(ij)}).
    pub mat_b: ComplexMatrix,
    /// Shape (d_B·d_C)² × d_A²; column (i·d_A + j) is vec(Q_BC^{(ij)}).
    pub mat_bc: ComplexMatrix,
    pub dims: DimSplit,
}

/// Extract Q^{(ij)} = ⟨i|_A ρ |j⟩_A from a matrix on A ⊗ rest.
pub fn a_block(rho: &ComplexMatrix, d_a: usize, i: usize, j: usize) -> ComplexMatrix {
    let d_rest = rho.rows() / d_a;
    ComplexMatrix::from_fn(d_rest, d_rest, |r, s| rho[(i * d_rest + r, j * d_rest + s)])
}

/// Build the block-matrix system of a state.
pub fn block_system(state: &TripartiteState) -> BlockMatrixSystem {
    let d = state.dims;
    let rho_ab = state.rho_ab();
    let db2 = d.d_b * d.d_b;
    let dbc = d.d_b * d.d_c;
    let mut mat_b = ComplexMatrix::zeros(db2, d.d_a * d.d_a);
    let mut mat_bc = ComplexMatrix::zeros(dbc * dbc, d.d_a * d.d_a);
    for i in 0..d.d_a {
        for j in 0..d.d_a {
            let col = i * d.d_a + j;
            mat_b.set_column(col, &vec_mat(&a_block(&rho_ab, d.d_a, i, j)));
            mat_bc.set_column(col, &vec_mat(&a_block(&state.rho, d.d_a, i, j)));
        }
    }
    BlockMatrixSystem {
        mat_b,
        mat_bc,
        dims: d,
    }
}

impl BlockMatrixSystem {
    /// ‖tr_C(column of mat_bc) − column of mat_b‖ summed: the compatibility
    /// defect of the identity tr_C ∘ Rec_BC = Rec_B.
    pub fn trace_compatibility_defect(&self) -> f64 {
        let d = self.dims;
        let dbc = d.d_b * d.d_c;
        let mut worst = 0.0f64;
        for col in 0..d.d_a * d.d_a {
            let q_bc = unvec(&self.mat_bc.column(col), dbc, dbc).expect("shape");
            let traced = partial_trace(&q_bc, &[d.d_b, d.d_c], &[1]).expect("dims");
            let q_b = unvec(&self.mat_b.column(col), d.d_b, d.d_b).expect("shape");
            worst = worst.max(traced.sub(&q_b).frobenius_norm());
        }
        worst
    }

    /// max_ij ‖Q^{(ij)†} − Q^{(ji)}‖_F over the B blocks.
    pub fn hermiticity_pairing_defect(&self) -> f64 {
        let d = self.dims;
        let mut worst = 0.0f64;
        for i in 0..d.d_a {
            for j in 0..d.d_a {
                let qij = unvec(&self.mat_b.column(i * d.d_a + j), d.d_b, d.d_b).expect("shape");
                let qji = unvec(&self.mat_b.column(j * d.d_a + i), d.d_b, d.d_b).expect("shape");
                worst = worst.max(qij.dagger().sub(&qji).frobenius_norm());
            }
        }
        worst
    }
}

/// Outcome of the rank-equality criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VqmcVerdict {
    pub is_vqmc: bool,
    pub rank_b: usize,
    pub rank_bc: usize,
    pub kernel_dim_b: usize,
    pub kernel_dim_bc: usize,
    /// How far the singular values sit from the rank cutoff
    /// (rank_tol·σ_max), as a ratio: min over both block matrices of
    /// σ_kept/cutoff and cutoff/σ_dropped. Values near 1 flag a
    /// tolerance-sensitive rank decision; infinite for exact ranks.
    pub singular_gap: f64,
    pub rank_tol: f64,
}

fn rank_and_gap(singulars: &[f64], rank_tol: f64) -> (usize, f64) {
    let rank = numerical_rank(singulars, rank_tol);
    let s_max = singulars.first().copied().unwrap_or(0.0);
    if s_max <= 0.0 {
        return (rank, f64::INFINITY);
    }
    let cutoff = rank_tol * s_max;
    let mut gap = f64::INFINITY;
    if rank > 0 {
        gap = gap.min(singulars[rank - 1] / cutoff);
    }
    if let Some(&dropped) = singulars.get(rank) {
        if dropped > 0.0 {
            gap = gap.min(cutoff / dropped);
        }
    }
    (rank, gap)
}

/// Orthonormal basis of the numerical null space of `mat`.
pub fn kernel_basis(mat: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let n = mat.cols();
    if mat.rows() == 0 {
        return Ok(ComplexMatrix::identity(n));
    }
    let (_, s, v) = svd(mat)?;
    let rank = numerical_rank(&s, rank_tol);
    // columns rank..k of V, plus the (n − k) coordinates SVD never produced
    let k = s.len();
    let dim = n - rank;
    let mut basis = ComplexMatrix::zeros(n, dim);
    for (out, r) in (rank..k).enumerate() {
        basis.set_column(out, &v.column(r));
    }
    // thin SVD on a tall matrix yields k = n, so the loop covers everything;
    // for wide matrices k = rows < n and the remaining null directions are
    // not produced — complete via Gram–Schmidt against V's columns.
    if k < n {
        let mut have = k - rank;
        let mut candidates: Vec<Vec<C64>> = Vec::new();
        for e in 0..n {
            let mut col = vec![C64::new(0.0, 0.0); n];
            col[e] = C64::new(1.0, 0.0);
            candidates.push(col);
        }
        for cand in candidates {
            if have == dim {
                break;
            }
            let mut w = cand;
            // orthogonalize against all of V and already-found basis columns
            let project = |w: &mut Vec<C64>, col: &[C64]| {
                let ip: C64 = col.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
                for (wi, ci) in w.iter_mut().zip(col) {
                    *wi -= ip * ci;
                }
            };
            for r in 0..rank {
                project(&mut w, &v.column(r));
            }
            for r in rank..k {
                project(&mut w, &v.column(r));
            }
            for r in 0..have {
                project(&mut w, &basis.column(r));
            }
            let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-8 {
                let w: Vec<C64> = w.iter().map(|z| z / norm).collect();
                basis.set_column(have, &w);
                have += 1;
            }
        }
    }
    Ok(basis)
}

/// Decide whether a state is a virtual quantum Markov chain.
pub fn is_vqmc(state: &TripartiteState, rank_tol: f64) -> Result<VqmcVerdict> {
    let sys = block_system(state);
    is_vqmc_from_system(&sys, rank_tol)
}

/// Same decision from a prebuilt block system.
pub fn is_vqmc_from_system(sys: &BlockMatrixSystem, rank_tol: f64) -> Result<VqmcVerdict> {
    let (_, s_b, _) = svd(&sys.mat_b)?;
    let (_, s_bc, _) = svd(&sys.mat_bc)?;
    let (rank_b, gap_b) = rank_and_gap(&s_b, rank_tol);
    let (rank_bc, gap_bc) = rank_and_gap(&s_bc, rank_tol);
    let cols = sys.mat_b.cols();
    Ok(VqmcVerdict {
        is_vqmc: rank_b == rank_bc,
        rank_b,
        rank_bc,
        kernel_dim_b: cols - rank_b,
        kernel_dim_bc: cols - rank_bc,
        singular_gap: gap_b.min(gap_bc),
        rank_tol,
    })
}

/// Decide whether a state is an (exact) quantum Markov chain via its
/// conditional mutual information: I(A:C|B) ≤ tol.
pub fn is_qmc(state: &TripartiteState, tol: f64) -> Result<bool> {
    let report = crate::analysis::cmi(state)?;
    Ok(report.cmi <= tol)
}

/// Default tolerance for [`is_qmc`].
pub const QMC_CMI_TOL: f64 = 1e-8;

/// Convenience wrapper with default tolerance.
pub fn is_vqmc_default(state: &TripartiteState) -> Result<VqmcVerdict> {
    is_vqmc(state, DEFAULT_RANK_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kron;
    use crate::states::*;

    #[test]
    fn ghz_block_columns_vanish() {
        let sys = block_system(&ghz_state());
        // columns (0,1) and (1,0) of mat_b are zero
        for col in [1usize, 2] {
            let norm: f64 = sys.mat_b.column(col).iter().map(|z| z.norm_sqr()).sum();
            assert!(norm < 1e-28);
        }
        assert!(sys.trace_compatibility_defect() < 1e-12);
        assert!(sys.hermiticity_pairing_defect() < 1e-12);
    }

    #[test]
    fn w_blocks_full_rank() {
        let sys = block_system(&w_symmetric());
        let (_, s, _) = svd(&sys.mat_b).unwrap();
        assert_eq!(numerical_rank(&s, DEFAULT_RANK_TOL), 4);
    }

    #[test]
    fn product_state_columns_proportional() {
        let s = random_qmc(&[(1, 2)], 2, 2, 3).unwrap();
        let sys = block_system(&s);
        // all columns of mat_b proportional to vec(ρ_B): rank 1
        let (_, sv, _) = svd(&sys.mat_b).unwrap();
        assert_eq!(numerical_rank(&sv, DEFAULT_RANK_TOL), 1);
    }

    #[test]
    fn kernel_basis_cases() {
        let full = ComplexMatrix::identity(4);
        assert_eq!(kernel_basis(&full, 1e-10).unwrap().cols(), 0);
        let zero = ComplexMatrix::zeros(3, 5);
        let b = kernel_basis(&zero, 1e-10).unwrap();
        assert_eq!(b.cols(), 5);
        // orthonormal
        let g = b.dagger().matmul(&b);
        assert!(g.sub(&ComplexMatrix::identity(5)).frobenius_norm() < 1e-10);

        // GHZ mat_b kernel supported on columns (0,1), (1,0)
        let sys = block_system(&ghz_state());
        let kb = kernel_basis(&sys.mat_b, 1e-10).unwrap();
        assert_eq!(kb.cols(), 2);
        let prod = sys.mat_b.matmul(&kb);
        assert!(prod.frobenius_norm() < 1e-10);
        for r in 0..kb.cols() {
            let col = kb.column(r);
            assert!(col[0].norm() < 1e-10 && col[3].norm() < 1e-10);
        }
    }

    #[test]
    fn named_example_verdicts() {
        assert!(is_vqmc_default(&w_symmetric()).unwrap().is_vqmc);
        assert!(is_vqmc_default(&w_state(0.2, 0.5).unwrap()).unwrap().is_vqmc);
        assert!(!is_vqmc_default(&ghz_state()).unwrap().is_vqmc);
        assert!(is_vqmc_default(&named_state("s1").unwrap()).unwrap().is_vqmc);
        assert!(is_vqmc_default(&named_state("s2").unwrap()).unwrap().is_vqmc);
        assert!(!is_vqmc_default(&named_state("rho_s").unwrap()).unwrap().is_vqmc);
        assert!(!is_vqmc_default(&named_state("psi1").unwrap()).unwrap().is_vqmc);
        assert!(is_vqmc_default(&named_state("psi2").unwrap()).unwrap().is_vqmc);
    }

    #[test]
    fn gw_transition() {
        let p_star = 7.0 - 3.0 * 5f64.sqrt();
        assert!(!is_vqmc_default(&ghz_w_mix(p_star).unwrap()).unwrap().is_vqmc);
        for p in [0.1, 0.5, 0.9] {
            assert!(is_vqmc_default(&ghz_w_mix(p).unwrap()).unwrap().is_vqmc, "p={p}");
        }
        assert!(!is_vqmc_default(&ghz_w_mix(1.0).unwrap()).unwrap().is_vqmc);
    }

    #[test]
    fn rank_inequality_and_verdict_consistency() {
        for seed in 0..20 {
            let s = random_state(DimSplit::new(2, 2, 2).unwrap(), 4, seed).unwrap();
            let v = is_vqmc_default(&s).unwrap();
            assert!(v.rank_bc >= v.rank_b);
            assert_eq!(v.is_vqmc, v.rank_b == v.rank_bc);
            assert_eq!(v.kernel_dim_b, 4 - v.rank_b);
        }
    }

    #[test]
    fn qmc_detection() {
        let q = random_qmc(&[(1, 2), (2, 1)], 2, 2, 17).unwrap();
        assert!(is_qmc(&q, QMC_CMI_TOL).unwrap());
        assert!(!is_qmc(&ghz_state(), QMC_CMI_TOL).unwrap());
        // product state ρ_A ⊗ ρ_B ⊗ ρ_C
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        use rand::SeedableRng;
        let a = random_density(&mut rng, 2, 2).unwrap();
        let b = random_density(&mut rng, 2, 2).unwrap();
        let c = random_density(&mut rng, 2, 2).unwrap();
        let s = TripartiteState::new(kron(&kron(&a, &b), &c), DimSplit::new(2, 2, 2).unwrap())
            .unwrap();
        assert!(is_qmc(&s, QMC_CMI_TOL).unwrap());
    }
}
