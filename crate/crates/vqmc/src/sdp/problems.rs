//! The concrete semidefinite programs of the toolkit:
//!
//! - **sampling overhead**: the minimal γ = c₁ + c₂ such that the virtual
//!   recovery map decomposes as R = c₁·R⁺ − c₂·R⁻ with R± completely
//!   positive and trace-non-increasing proportional to channels, expressed
//!   through Choi matrices J₁, J₂ ⪰ 0 with tr_out J_i = c_i·I_in and the
//!   recovery identity (id_A ⊗ R)(ρ_AB) = ρ_ABC;
//! - **approximate recoverability**: the smallest trace-norm surrogate
//!   ε/2 = min tr S over S, T ⪰ 0 with T = S − ρ_ABC + (id_A ⊗ R_J)(ρ_AB)
//!   and J the Choi matrix of a trace-preserving map, either Hermitian-
//!   preserving (J free Hermitian) or a channel (J ⪰ 0);
//! - **additivity**: overhead of a tensor pair versus the sum of parts.
//!
//! Complex Hermitian SDP data is passed to the real solver by the standard
//! realification H ↦ [[Re H, −Im H], [Im H, Re H]]; constraint and objective
//! matrices carry an extra factor 1/2 so that real inner products against
//! realified variables reproduce the complex Hilbert–Schmidt pairing
//! exactly, and primal blocks fold back via
//! X = (X₁₁ + X₂₂)/2 + i·(X₂₁ − X₁₂)/2.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::markov::{a_block, is_vqmc};
use crate::numerics::{ComplexMatrix, C64, DEFAULT_RANK_TOL};
use crate::recovery::LinearMap;
use crate::sdp::solver::{
    self, Constraint, SdpOptions, SdpProblem, SdpStatus, SdpSolution, SparseSym,
};
use crate::states::TripartiteState;

/// One element of the orthonormal Hermitian basis, stored as the sparse
/// entries of the full matrix (one diagonal entry, or a conjugate pair).
#[derive(Debug, Clone)]
pub struct HermBasisElem {
    pub entries: Vec<(usize, usize, C64)>,
}

impl HermBasisElem {
    /// tr(H·ρ) for Hermitian ρ (real by symmetry).
    pub fn pair(&self, rho: &ComplexMatrix) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| (v * rho[(c, r)]).re)
            .sum()
    }

    pub fn trace(&self) -> f64 {
        self.entries
            .iter()
            .filter(|&&(r, c, _)| r == c)
            .map(|&(_, _, v)| v.re)
            .sum()
    }

    pub fn add_into(&self, target: &mut ComplexMatrix, scale: f64) {
        for &(r, c, v) in &self.entries {
            target[(r, c)] += v * scale;
        }
    }
}

/// Orthonormal Hermitian basis of n×n matrices under the Hilbert–Schmidt
/// inner product: E_rr, (E_rc + E_cr)/√2, i(E_rc − E_cr)/√2 for r < c.
pub fn hermitian_basis(n: usize) -> Vec<HermBasisElem> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in r..n {
            if r == c {
                out.push(HermBasisElem {
                    entries: vec![(r, r, C64::new(1.0, 0.0))],
                });
            } else {
                out.push(HermBasisElem {
                    entries: vec![(r, c, C64::new(s, 0.0)), (c, r, C64::new(s, 0.0))],
                });
                out.push(HermBasisElem {
                    entries: vec![(r, c, C64::new(0.0, s)), (c, r, C64::new(0.0, -s))],
                });
            }
        }
    }
    out
}

/// Sparse complex Hermitian matrix accumulated entry-wise before
/// realification.
type ComplexEntries = HashMap<(usize, usize), C64>;

/// Realified constraint matrix with the 1/2 pairing factor:
/// ⟨realify(H)/2, realify(X)⟩ = Re tr(H† X).
pub(crate) fn realify_half(entries: &ComplexEntries, n: usize) -> SparseSym {
    let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
    for (&(r, c), &v) in entries {
        let (x, y) = (0.5 * v.re, 0.5 * v.im);
        for (rr, cc, val) in [
            (r, c, x),
            (r + n, c + n, x),
            (r + n, c, y),
            (r, c + n, -y),
        ] {
            if val != 0.0 {
                *acc.entry((rr, cc)).or_insert(0.0) += val;
            }
        }
    }
    // the realified matrix is symmetric; keep upper-triangular representatives
    let mut out: Vec<(usize, usize, f64)> = acc
        .into_iter()
        .filter(|&((r, c), v)| r <= c && v.abs() > 1e-300)
        .map(|((r, c), v)| (r, c, v))
        .collect();
    out.sort_unstable_by_key(|&(r, c, _)| (r, c));
    SparseSym { entries: out }
}

/// Fold a realified primal block back to a complex Hermitian matrix.
pub fn fold_block(x: &Array2<f64>) -> ComplexMatrix {
    let n = x.nrows() / 2;
    ComplexMatrix::from_fn(n, n, |i, j| {
        C64::new(
            0.5 * (x[[i, j]] + x[[i + n, j + n]]),
            0.5 * (x[[i + n, j]] - x[[i, j + n]]),
        )
    })
}

fn negate(s: &SparseSym) -> SparseSym {
    SparseSym {
        entries: s.entries.iter().map(|&(r, c, v)| (r, c, -v)).collect(),
    }
}

/// The AB blocks Q_B^{(ij)} = ⟨i|_A ρ_AB |j⟩_A, indexed [i][j].
fn ab_blocks(state: &TripartiteState) -> Vec<Vec<ComplexMatrix>> {
    let rho_ab = state.rho_ab();
    let d_a = state.dims.d_a;
    (0..d_a)
        .map(|i| (0..d_a).map(|j| a_block(&rho_ab, d_a, i, j)).collect())
        .collect()
}

/// Adjoint of J ↦ (id_A ⊗ R_J)(ρ_AB) with respect to the Hilbert–Schmidt
/// pairing: K ↦ Σ_ij conj(Q_B^{(ij)}) ⊗ ⟨i|_A K |j⟩_A, a Hermitian operator
/// on the Choi space B_in ⊗ (BC)_out whenever K is Hermitian.
pub fn recovery_constraint_adjoint(state: &TripartiteState, k: &ComplexMatrix) -> ComplexMatrix {
    let d_a = state.dims.d_a;
    let d_b = state.dims.d_b;
    let dbc = d_b * state.dims.d_c;
    let qb = ab_blocks(state);
    let mut out = ComplexMatrix::zeros(d_b * dbc, d_b * dbc);
    for i in 0..d_a {
        for j in 0..d_a {
            let kij = a_block(k, d_a, i, j);
            let q = &qb[i][j];
            for br in 0..d_b {
                for bc in 0..d_b {
                    let w = q[(br, bc)].conj();
                    if w.norm_sqr() == 0.0 {
                        continue;
                    }
                    for p in 0..dbc {
                        for q2 in 0..dbc {
                            out[(br * dbc + p, bc * dbc + q2)] += w * kij[(p, q2)];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Sparse complex entries of Σ_ij conj(Q_B^{(ij)}) ⊗ H_k^{(ij)} for a basis
/// element H_k on ABC (at most 2·d_B² entries).
fn adjoint_entries(
    h_k: &HermBasisElem,
    qb: &[Vec<ComplexMatrix>],
    d_b: usize,
    dbc: usize,
) -> ComplexEntries {
    let mut g: ComplexEntries = HashMap::new();
    for &(p_full, q_full, v) in &h_k.entries {
        let (i, p) = (p_full / dbc, p_full % dbc);
        let (j, q) = (q_full / dbc, q_full % dbc);
        let block = &qb[i][j];
        for br in 0..d_b {
            for bc in 0..d_b {
                let w = block[(br, bc)].conj() * v;
                if w.norm_sqr() > 0.0 {
                    *g.entry((br * dbc + p, bc * dbc + q))
                        .or_insert(C64::new(0.0, 0.0)) += w;
                }
            }
        }
    }
    g
}

/// Sparse complex entries of H_m ⊗ I_out on the Choi space.
fn marginal_entries(h_m: &HermBasisElem, d_out: usize) -> ComplexEntries {
    let mut g: ComplexEntries = HashMap::new();
    for &(r, c, v) in &h_m.entries {
        for o in 0..d_out {
            g.insert((r * d_out + o, c * d_out + o), v);
        }
    }
    g
}

/// Trace of (H_m ⊗ I_out)·H_f with H_f given sparsely.
fn marginal_pair(g: &ComplexEntries, h_f: &HermBasisElem) -> f64 {
    h_f.entries
        .iter()
        .map(|&(r, c, v)| match g.get(&(c, r)) {
            Some(&w) => (w * v).re,
            None => 0.0,
        })
        .sum()
}

/// Result of the sampling-overhead program.
#[derive(Debug, Clone)]
pub struct OverheadResult {
    /// γ = c₁ + c₂, the optimal objective value.
    pub gamma: f64,
    /// ν = log₂ γ, the virtual-recovery sampling cost exponent.
    pub nu: f64,
    pub c1: f64,
    pub c2: f64,
    /// Choi data of the positive part (marginal c₁·I_B).
    pub j1: LinearMap,
    /// Choi data of the negative part (marginal c₂·I_B).
    pub j2: LinearMap,
    /// Dual certificate on ABC with tr(K·ρ) equal to the dual value.
    pub dual_k: ComplexMatrix,
    /// Dual certificate on B with tr M ≤ 1 and M ⊗ I ⪰ Φ*(K).
    pub dual_m: ComplexMatrix,
    /// Dual certificate on B with tr N ≤ 1 and N ⊗ I ⪰ −Φ*(K).
    pub dual_n: ComplexMatrix,
    pub gap: f64,
    pub iterations: usize,
}

fn build_overhead_problem(
    state: &TripartiteState,
) -> (SdpProblem, Vec<HermBasisElem>, Vec<HermBasisElem>) {
    let d_b = state.dims.d_b;
    let dbc = d_b * state.dims.d_c;
    let n_abc = state.dims.total();
    let n_j = d_b * dbc;
    let qb = ab_blocks(state);
    let basis_abc = hermitian_basis(n_abc);
    let basis_b = hermitian_basis(d_b);

    // blocks: 0 = J1 (realified), 1 = J2 (realified), 2 = c1, 3 = c2
    let mut problem = SdpProblem {
        block_dims: vec![2 * n_j, 2 * n_j, 1, 1],
        objective: vec![
            (2, SparseSym { entries: vec![(0, 0, 1.0)] }),
            (3, SparseSym { entries: vec![(0, 0, 1.0)] }),
        ],
        free_objective: vec![],
        free_dim: 0,
        constraints: Vec::new(),
        b: Vec::new(),
    };

    // recovery identity, one equation per Hermitian basis element of ABC:
    // ⟨G_k, J1⟩ − ⟨G_k, J2⟩ = tr(H_k ρ)
    for h_k in &basis_abc {
        let g = adjoint_entries(h_k, &qb, d_b, dbc);
        let sparse = realify_half(&g, n_j);
        let neg = negate(&sparse);
        problem.constraints.push(Constraint {
            blocks: vec![(0, sparse), (1, neg)],
            free: vec![],
        });
        problem.b.push(h_k.pair(&state.rho));
    }
    // marginals: ⟨H_m ⊗ I, J_i⟩ − c_i·tr(H_m) = 0
    for (block, c_block) in [(0usize, 2usize), (1, 3)] {
        for h_m in &basis_b {
            let g = marginal_entries(h_m, dbc);
            problem.constraints.push(Constraint {
                blocks: vec![
                    (block, realify_half(&g, n_j)),
                    (c_block, SparseSym { entries: vec![(0, 0, -h_m.trace())] }),
                ],
                free: vec![],
            });
            problem.b.push(0.0);
        }
    }
    (problem, basis_abc, basis_b)
}

/// Minimize the virtual-recovery sampling overhead γ = c₁ + c₂ over all
/// decompositions of a recovery map into two CP parts with identity-
/// proportional marginals. Fails with [`Error::Infeasible`] when the state
/// is not a virtual quantum Markov chain.
pub fn sampling_overhead(state: &TripartiteState, options: &SdpOptions) -> Result<OverheadResult> {
    let verdict = is_vqmc(state, DEFAULT_RANK_TOL)?;
    if !verdict.is_vqmc {
        return Err(Error::Infeasible(format!(
            "no recovery map exists: rank of the B block system is {} but the BC system has rank {}",
            verdict.rank_b, verdict.rank_bc
        )));
    }
    let (problem, basis_abc, basis_b) = build_overhead_problem(state);
    let inconsistency = solver::linear_inconsistency(&problem)?;
    if inconsistency > 1e-6 {
        return Err(Error::Infeasible(format!(
            "recovery equations are linearly inconsistent (relative residual {inconsistency:.3e})"
        )));
    }
    let sol = solver::solve(&problem, options)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(Error::Infeasible(
                "interior-point iteration certified primal infeasibility".into(),
            ))
        }
        status => {
            return Err(Error::SolverFailure {
                status,
                gap: sol.gap,
            })
        }
    }
    overhead_from_solution(state, &sol, &basis_abc, &basis_b)
}

fn overhead_from_solution(
    state: &TripartiteState,
    sol: &SdpSolution,
    basis_abc: &[HermBasisElem],
    basis_b: &[HermBasisElem],
) -> Result<OverheadResult> {
    let d_b = state.dims.d_b;
    let dbc = d_b * state.dims.d_c;
    let c1 = sol.blocks[2][[0, 0]];
    let c2 = sol.blocks[3][[0, 0]];
    let gamma = c1 + c2;
    let j1 = LinearMap::from_choi(fold_block(&sol.blocks[0]), d_b, dbc)?;
    let j2 = LinearMap::from_choi(fold_block(&sol.blocks[1]), d_b, dbc)?;

    let n_abc = state.dims.total();
    let mut dual_k = ComplexMatrix::zeros(n_abc, n_abc);
    for (k, h_k) in basis_abc.iter().enumerate() {
        h_k.add_into(&mut dual_k, sol.y[k]);
    }
    let m_count = basis_b.len();
    let mut dual_m = ComplexMatrix::zeros(d_b, d_b);
    let mut dual_n = ComplexMatrix::zeros(d_b, d_b);
    for (m, h_m) in basis_b.iter().enumerate() {
        h_m.add_into(&mut dual_m, -sol.y[basis_abc.len() + m]);
        h_m.add_into(&mut dual_n, -sol.y[basis_abc.len() + m_count + m]);
    }
    Ok(OverheadResult {
        gamma,
        nu: gamma.max(f64::MIN_POSITIVE).log2(),
        c1,
        c2,
        j1,
        j2,
        dual_k,
        dual_m,
        dual_n,
        gap: sol.gap,
        iterations: sol.iterations,
    })
}

/// Which class of trace-preserving maps the approximate-recoverability
/// program optimizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxMode {
    /// Hermitian-preserving trace-preserving maps (free Hermitian Choi).
    Hptp,
    /// Channels (PSD Choi).
    Cptp,
}

/// Result of the approximate-recoverability program.
#[derive(Debug, Clone)]
pub struct ApproxResult {
    /// Optimal value of min tr S (half the trace-norm surrogate).
    pub sdp_value: f64,
    /// ε = 2·sdp_value, the reported approximation error.
    pub eps: f64,
    /// The optimizing map B → BC.
    pub map: LinearMap,
    pub mode: ApproxMode,
    pub gap: f64,
    pub iterations: usize,
}

/// Minimize tr S over S, T ⪰ 0 and trace-preserving J with
/// T = S − ρ_ABC + (id_A ⊗ R_J)(ρ_AB); the optimum bounds the trace-norm
/// error of the best recovery in the chosen class by ε = 2·tr S.
pub fn approx_recoverability(
    state: &TripartiteState,
    mode: ApproxMode,
    options: &SdpOptions,
) -> Result<ApproxResult> {
    let d_b = state.dims.d_b;
    let dbc = d_b * state.dims.d_c;
    let n_abc = state.dims.total();
    let n_j = d_b * dbc;
    let qb = ab_blocks(state);
    let basis_abc = hermitian_basis(n_abc);
    let basis_b = hermitian_basis(d_b);
    let basis_j = hermitian_basis(n_j);

    // blocks: 0 = S (realified), 1 = T (realified), [2 = J when CPTP]
    let mut block_dims = vec![2 * n_abc, 2 * n_abc];
    if mode == ApproxMode::Cptp {
        block_dims.push(2 * n_j);
    }
    let tr_s = SparseSym {
        entries: (0..2 * n_abc).map(|d| (d, d, 0.5)).collect(),
    };
    let mut problem = SdpProblem {
        block_dims,
        objective: vec![(0, tr_s)],
        free_objective: if mode == ApproxMode::Hptp {
            vec![0.0; basis_j.len()]
        } else {
            vec![]
        },
        free_dim: if mode == ApproxMode::Hptp {
            basis_j.len()
        } else {
            0
        },
        constraints: Vec::new(),
        b: Vec::new(),
    };

    // linking: ⟨H_k, T⟩ − ⟨H_k, S⟩ − ⟨G_k, J⟩ = −tr(H_k ρ)
    for h_k in &basis_abc {
        let mut h_entries: ComplexEntries = HashMap::new();
        for &(r, c, v) in &h_k.entries {
            h_entries.insert((r, c), v);
        }
        let h_sparse = realify_half(&h_entries, n_abc);
        let g = adjoint_entries(h_k, &qb, d_b, dbc);
        let mut con = Constraint {
            blocks: vec![(0, negate(&h_sparse)), (1, h_sparse)],
            free: vec![],
        };
        match mode {
            ApproxMode::Cptp => con.blocks.push((2, negate(&realify_half(&g, n_j)))),
            ApproxMode::Hptp => {
                for (f, h_f) in basis_j.iter().enumerate() {
                    let coef = marginal_pair(&g, h_f);
                    if coef.abs() > 1e-300 {
                        con.free.push((f, -coef));
                    }
                }
            }
        }
        problem.constraints.push(con);
        problem.b.push(-h_k.pair(&state.rho));
    }
    // trace preservation of J: ⟨H_m ⊗ I, J⟩ = tr(H_m)
    for h_m in &basis_b {
        let g = marginal_entries(h_m, dbc);
        let mut con = Constraint::default();
        match mode {
            ApproxMode::Cptp => con.blocks.push((2, realify_half(&g, n_j))),
            ApproxMode::Hptp => {
                for (f, h_f) in basis_j.iter().enumerate() {
                    let coef = marginal_pair(&g, h_f);
                    if coef.abs() > 1e-300 {
                        con.free.push((f, coef));
                    }
                }
            }
        }
        problem.constraints.push(con);
        problem.b.push(h_m.trace());
    }

    let sol = solver::solve(&problem, options)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::SolverFailure {
            status: sol.status,
            gap: sol.gap,
        });
    }
    let choi = match mode {
        ApproxMode::Cptp => fold_block(&sol.blocks[2]),
        ApproxMode::Hptp => {
            let mut j = ComplexMatrix::zeros(n_j, n_j);
            for (f, h_f) in basis_j.iter().enumerate() {
                h_f.add_into(&mut j, sol.free_values[f]);
            }
            j
        }
    };
    let value = sol.primal_value;
    Ok(ApproxResult {
        sdp_value: value,
        eps: 2.0 * value,
        map: LinearMap::from_choi(choi, d_b, dbc)?,
        mode,
        gap: sol.gap,
        iterations: sol.iterations,
    })
}

/// Sampling overhead of a tensor pair compared with the sum of the parts.
#[derive(Debug, Clone)]
pub struct AdditivityReport {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_joint: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu_joint: f64,
    /// ν_joint − (ν₁ + ν₂); additivity means this vanishes.
    pub defect: f64,
}

/// Solve the overhead program for two states and their tensor product and
/// report the additivity defect of the cost exponent ν = log₂ γ.
pub fn additivity_check(
    state1: &TripartiteState,
    state2: &TripartiteState,
    options: &SdpOptions,
) -> Result<AdditivityReport> {
    let r1 = sampling_overhead(state1, options)?;
    let r2 = sampling_overhead(state2, options)?;
    let joint = state1.tensor(state2)?;
    let rj = sampling_overhead(&joint, options)?;
    Ok(AdditivityReport {
        gamma1: r1.gamma,
        gamma2: r2.gamma,
        gamma_joint: rj.gamma,
        nu1: r1.nu,
        nu2: r2.nu,
        nu_joint: rj.nu,
        defect: rj.nu - (r1.nu + r2.nu),
    })
}
