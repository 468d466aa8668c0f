//! Entropic and fidelity diagnostics: von Neumann entropy, conditional
//! mutual information, fidelity, and the Fawzi–Renner recoverability bound.
//!
//! All entropies are in bits (base-2 logarithms).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{herm_eigvals, partial_trace, psd_sqrt, ComplexMatrix, TAU_PSD};
use crate::states::TripartiteState;

/// Eigenvalues below this threshold are excluded from entropy sums.
const ENTROPY_EIG_CUTOFF: f64 = 1e-12;

/// All marginal entropies of a tripartite state plus I(A:C|B).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyReport {
    pub s_a: f64,
    pub s_b: f64,
    pub s_ab: f64,
    pub s_bc: f64,
    pub s_abc: f64,
    /// I(A:C|B) = S(AB) + S(BC) − S(B) − S(ABC), in bits.
    pub cmi: f64,
}

/// Von Neumann entropy −Σ λ log₂ λ of a density matrix.
pub fn von_neumann_entropy(rho: &ComplexMatrix) -> Result<f64> {
    let vals = herm_eigvals(rho)?;
    let min_eig = vals.first().copied().unwrap_or(0.0);
    if min_eig < -TAU_PSD {
        return Err(Error::NotPositiveSemidefinite {
            min_eig,
            tol: TAU_PSD,
        });
    }
    Ok(vals
        .iter()
        .filter(|&&l| l > ENTROPY_EIG_CUTOFF)
        .map(|&l| -l * l.log2())
        .sum())
}

/// Conditional mutual information I(A:C|B) with all ingredient entropies.
pub fn cmi(state: &TripartiteState) -> Result<EntropyReport> {
    let dims = state.dims.as_vec();
    let s_a = von_neumann_entropy(&partial_trace(&state.rho, &dims, &[1, 2])?)?;
    let s_b = von_neumann_entropy(&state.rho_b())?;
    let s_ab = von_neumann_entropy(&state.rho_ab())?;
    let s_bc = von_neumann_entropy(&state.rho_bc())?;
    let s_abc = von_neumann_entropy(&state.rho)?;
    Ok(EntropyReport {
        s_a,
        s_b,
        s_ab,
        s_bc,
        s_abc,
        cmi: s_ab + s_bc - s_b - s_abc,
    })
}

/// Uhlmann fidelity F(ρ, σ) = (tr √(√ρ σ √ρ))².
pub fn fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let sr = psd_sqrt(rho)?;
    let inner = sr.matmul(sigma).matmul(&sr);
    // inner is PSD up to roundoff; its square root's trace is Σ √λ
    let vals = herm_eigvals(&inner.require_hermitian()?)?;
    // clip noise-level eigenvalues: √(1e-17) would otherwise pollute the sum
    let vmax = vals.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = 1e-14 * vmax.max(1e-300);
    let root_sum: f64 = vals
        .iter()
        .filter(|&&l| l > cutoff)
        .map(|&l| l.sqrt())
        .sum();
    Ok(root_sum * root_sum)
}

/// The Fawzi–Renner inequality I(A:C|B) ≥ −log₂ F(ρ_ABC, R_Petz(ρ_AB)),
/// checked with the plain Petz map as the concrete recovery channel.
///
/// The inequality is guaranteed for *some* channel (a rotated Petz average);
/// the plain Petz map is diagnostic. `holds` uses slack 1e-8.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FawziRennerReport {
    pub lhs_cmi: f64,
    pub rhs_neg_log_fidelity: f64,
    pub fidelity: f64,
    pub holds: bool,
}

pub fn fawzi_renner_check(state: &TripartiteState) -> Result<FawziRennerReport> {
    let report = cmi(state)?;
    let petz = crate::recovery::petz_map(&state.rho_bc(), state.dims.d_b, state.dims.d_c)?;
    let recovered = crate::recovery::apply_map(&petz, &state.rho_ab())?;
    // Petz can lose trace off the support of ρ_B; renormalize for fidelity
    // diagnostics only (never silently inside the map itself).
    let tr = recovered.trace().re;
    let recovered = if tr > 1e-12 {
        recovered.scale_re(1.0 / tr)
    } else {
        recovered
    };
    let f = fidelity(&state.rho, &recovered)?.clamp(0.0, 1.0 + 1e-9);
    let rhs = -f.min(1.0).max(1e-300).log2();
    Ok(FawziRennerReport {
        lhs_cmi: report.cmi,
        rhs_neg_log_fidelity: rhs,
        fidelity: f,
        holds: report.cmi >= rhs - 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{herm_eig, kron, DimSplit, C64};
    use crate::states::*;

    #[test]
    fn entropy_basics() {
        let pure = ComplexMatrix::outer(
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        );
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        assert!((von_neumann_entropy(&ComplexMatrix::identity(2).scale_re(0.5)).unwrap() - 1.0).abs() < 1e-12);
        let d = ComplexMatrix::from_real(2, 2, &[0.75, 0.0, 0.0, 0.25]).unwrap();
        // −(3/4)log(3/4) − (1/4)log(1/4) = 2 − (3/4)log₂3
        let expect = 2.0 - 0.75 * 3f64.log2();
        assert!((von_neumann_entropy(&d).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn cmi_examples() {
        let r1 = cmi(&named_state("psi1").unwrap()).unwrap();
        let r2 = cmi(&named_state("psi2").unwrap()).unwrap();
        assert!((r1.cmi - 0.55).abs() < 0.01);
        assert!((r2.cmi - 0.55).abs() < 0.01);
        assert!((r1.cmi - r2.cmi).abs() < 1e-6);
        // identity of the report
        assert!((r1.cmi - (r1.s_ab + r1.s_bc - r1.s_b - r1.s_abc)).abs() < 1e-10);
        // GHZ: I(A:C|B) = 1 bit
        let g = cmi(&ghz_state()).unwrap();
        assert!((g.cmi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cmi_vanishes_for_qmc() {
        for seed in [1, 2, 3] {
            let q = random_qmc(&[(1, 2), (2, 1)], 2, 2, seed).unwrap();
            assert!(cmi(&q).unwrap().cmi.abs() < 1e-8);
        }
    }

    #[test]
    fn strong_subadditivity_samples() {
        for seed in 0..20 {
            let s = random_state(DimSplit::new(2, 2, 2).unwrap(), 8, seed).unwrap();
            assert!(cmi(&s).unwrap().cmi >= -1e-8);
        }
    }

    #[test]
    fn entropy_local_unitary_invariance() {
        let s = random_state(DimSplit::new(2, 2, 2).unwrap(), 5, 77).unwrap();
        // unitary from eigenvectors of a random Hermitian
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha8Rng::seed_from_u64(8)
        };
        let h = random_density(&mut rng, 2, 2).unwrap();
        let (_, u) = herm_eig(&h).unwrap();
        let big = kron(&kron(&u, &ComplexMatrix::identity(2)), &ComplexMatrix::identity(2));
        let rotated = TripartiteState::new(
            big.matmul(&s.rho).matmul(&big.dagger()),
            s.dims,
        )
        .unwrap();
        let a = cmi(&s).unwrap();
        let b = cmi(&rotated).unwrap();
        for (x, y) in [
            (a.s_a, b.s_a),
            (a.s_b, b.s_b),
            (a.s_ab, b.s_ab),
            (a.s_bc, b.s_bc),
            (a.s_abc, b.s_abc),
        ] {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn fidelity_cases() {
        let s = random_state(DimSplit::new(2, 2, 1).unwrap(), 3, 5).unwrap();
        assert!((fidelity(&s.rho, &s.rho).unwrap() - 1.0).abs() < 1e-9);

        let zero = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let one = ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(fidelity(&zero, &one).unwrap() < 1e-12);
        let half = ComplexMatrix::identity(2).scale_re(0.5);
        assert!((fidelity(&zero, &half).unwrap() - 0.5).abs() < 1e-10);
        // symmetry
        let t = random_state(DimSplit::new(2, 2, 1).unwrap(), 4, 6).unwrap();
        let f1 = fidelity(&s.rho, &t.rho).unwrap();
        let f2 = fidelity(&t.rho, &s.rho).unwrap();
        assert!((f1 - f2).abs() < 1e-10);
    }
}
