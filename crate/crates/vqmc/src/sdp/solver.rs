//! A self-contained primal-dual interior-point solver for semidefinite
//! programs in standard form over block-diagonal real symmetric PSD cones,
//! with optional free (unconstrained sign) scalar variables eliminated in a
//! presolve step.
//!
//! Primal:  min ⟨C, X⟩ + c_f·f   s.t.  ⟨A_i, X⟩ + (F f)_i = b_i,  X ⪰ 0
//! Dual:    max b·y              s.t.  C − Σ_i y_i A_i ⪰ 0,  Fᵀy = c_f
//!
//! The search direction is the HKM (XZ-linearized) direction with Mehrotra
//! predictor-corrector; the Schur complement system is solved by Cholesky
//! with escalating diagonal regularization so that linearly dependent
//! constraints do not abort the solve.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Cholesky, Eigh, SolveTriangular, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse symmetric matrix: entries (r, c, v) with r ≤ c; the value applies
/// to both (r,c) and (c,r).
#[derive(Debug, Clone, Default)]
pub struct SparseSym {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    /// ⟨A, M⟩ for a general (not necessarily symmetric) dense M, treating A
    /// as the full symmetric matrix.
    fn inner_general(&self, m: &Array2<f64>) -> f64 {
        let mut acc = 0.0;
        for &(r, c, v) in &self.entries {
            if r == c {
                acc += v * m[[r, r]];
            } else {
                acc += v * (m[[r, c]] + m[[c, r]]);
            }
        }
        acc
    }

    /// ⟨A, S⟩ for symmetric dense S.
    pub(crate) fn inner_sym(&self, s: &Array2<f64>) -> f64 {
        let mut acc = 0.0;
        for &(r, c, v) in &self.entries {
            acc += if r == c { v * s[[r, r]] } else { 2.0 * v * s[[r, c]] };
        }
        acc
    }

    pub(crate) fn add_into(&self, target: &mut Array2<f64>, scale: f64) {
        for &(r, c, v) in &self.entries {
            target[[r, c]] += scale * v;
            if r != c {
                target[[c, r]] += scale * v;
            }
        }
    }

    fn frobenius_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum()
    }

    /// Distinct column indices touched (entries appear at (r,c) and (c,r)).
    fn touched_cols(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .entries
            .iter()
            .flat_map(|&(r, c, _)| [r, c])
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

/// One equality constraint: per-block sparse symmetric coefficient matrices
/// plus coefficients on the free variables.
#[derive(Debug, Clone, Default)]
pub struct Constraint {
    /// (block index, coefficient matrix) pairs; blocks not listed are zero.
    pub blocks: Vec<(usize, SparseSym)>,
    /// (free variable index, coefficient) pairs.
    pub free: Vec<(usize, f64)>,
}

/// Standard-form SDP data.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    /// Dimensions of the PSD blocks.
    pub block_dims: Vec<usize>,
    /// Objective: per-block sparse symmetric cost matrices.
    pub objective: Vec<(usize, SparseSym)>,
    /// Objective coefficients of the free variables.
    pub free_objective: Vec<f64>,
    pub free_dim: usize,
    pub constraints: Vec<Constraint>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Dual objective beyond which the problem is declared infeasible.
    pub divergence_threshold: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            feas_tol: 1e-7,
            max_iter: 200,
            divergence_threshold: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Relative duality gap |p − d| / (1 + |p| + |d|).
    pub gap: f64,
    /// Primal PSD block values (dense symmetric, row-major).
    pub blocks: Vec<Array2<f64>>,
    /// Recovered free-variable values.
    pub free_values: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Check whether the equality constraints are linearly consistent, ignoring
/// the cone constraint: b must lie in the range of the constraint Gram
/// matrix G_ij = ⟨A_i, A_j⟩ + F Fᵀ. Returns the relative inconsistency.
pub fn linear_inconsistency(problem: &SdpProblem) -> Result<f64> {
    let m = problem.constraints.len();
    let mut gram = Array2::<f64>::zeros((m, m));
    // assemble per block: densify each constraint once, take sparse inner
    // products against all earlier constraints
    for (bi, &dim) in problem.block_dims.iter().enumerate() {
        let touching: Vec<(usize, &SparseSym)> = problem
            .constraints
            .iter()
            .enumerate()
            .filter_map(|(i, con)| {
                con.blocks
                    .iter()
                    .find(|(b, _)| *b == bi)
                    .map(|(_, s)| (i, s))
            })
            .collect();
        let mut dense = Array2::<f64>::zeros((dim, dim));
        for (jj, &(j, a_j)) in touching.iter().enumerate() {
            dense.fill(0.0);
            a_j.add_into(&mut dense, 1.0);
            for &(i, a_i) in touching.iter().take(jj + 1) {
                let v = a_i.inner_sym(&dense);
                gram[[i, j]] += v;
                if i != j {
                    gram[[j, i]] += v;
                }
            }
        }
    }
    for j in 0..m {
        for &(fi, fv) in &problem.constraints[j].free {
            for i in 0..=j {
                for &(fi2, fv2) in &problem.constraints[i].free {
                    if fi == fi2 {
                        gram[[i, j]] += fv * fv2;
                        if i != j {
                            gram[[j, i]] += fv * fv2;
                        }
                    }
                }
            }
        }
    }
    let scale = (0..m).map(|i| gram[[i, i]]).sum::<f64>().max(1e-300) / m as f64;
    let eps = 1e-12 * scale;
    for i in 0..m {
        gram[[i, i]] += eps;
    }
    let b = Array1::from_vec(problem.b.clone());
    let chol = gram
        .cholesky(UPLO::Lower)
        .map_err(|e| Error::Backend(format!("consistency Cholesky failed: {e}")))?;
    // solve L Lᵀ λ = b
    let t = chol
        .solve_triangular(UPLO::Lower, ndarray_linalg::Diag::NonUnit, &b)
        .map_err(|e| Error::Backend(e.to_string()))?;
    let lam = chol
        .t()
        .to_owned()
        .solve_triangular(UPLO::Upper, ndarray_linalg::Diag::NonUnit, &t)
        .map_err(|e| Error::Backend(e.to_string()))?;
    for i in 0..m {
        gram[[i, i]] -= eps;
    }
    let resid = &b - &gram.dot(&lam);
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(resid.iter().map(|x| x * x).sum::<f64>().sqrt() / (1.0 + b_norm))
}

/// Result of eliminating free variables: the reduced PSD-only problem plus
/// the data needed to reconstruct the free values from a reduced solution.
struct FreeElimination {
    reduced: SdpProblem,
    /// Maps reduced-constraint index to rows of the original system:
    /// reduced constraint j is Σ_i u_perp[(i, j)]·(original constraint i).
    u_perp: Array2<f64>,
    /// f = recover_mat · (b − A(X)) over the original constraints.
    recover: Array2<f64>,
    /// Constant added to the reduced objective value.
    objective_shift: f64,
    unbounded: bool,
}

fn eliminate_free(problem: &SdpProblem) -> Result<FreeElimination> {
    let m = problem.constraints.len();
    let k = problem.free_dim;
    let mut f_mat = Array2::<f64>::zeros((m, k));
    for (i, con) in problem.constraints.iter().enumerate() {
        for &(fi, fv) in &con.free {
            f_mat[[i, fi]] += fv;
        }
    }
    use ndarray_linalg::SVD;
    let (u, s, vt) = f_mat
        .svd(true, true)
        .map_err(|e| Error::Backend(e.to_string()))?;
    let u = u.expect("U requested");
    let vt = vt.expect("Vᵀ requested");
    let s_max = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&x| x > 1e-12 * s_max.max(1.0)).count();

    // Unboundedness: c_f must be orthogonal to null(F), i.e. representable
    // in the row space of F.
    let c_f = Array1::from_vec(problem.free_objective.clone());
    let mut c_row = Array1::<f64>::zeros(k);
    for r in 0..rank {
        let vr = vt.row(r);
        let coef: f64 = vr.dot(&c_f);
        for j in 0..k {
            c_row[j] += coef * vr[j];
        }
    }
    let null_part = (&c_f - &c_row).iter().map(|x| x * x).sum::<f64>().sqrt();
    let unbounded = null_part > 1e-9 * (1.0 + c_f.iter().map(|x| x * x).sum::<f64>().sqrt());

    // recover: f = V_r Σ^{-1} U_rᵀ (b − A(X))   (minimum-norm choice)
    let mut recover = Array2::<f64>::zeros((k, m));
    for r in 0..rank {
        let inv = 1.0 / s[r];
        for j in 0..k {
            let vj = vt[[r, j]] * inv;
            for i in 0..m {
                recover[[j, i]] += vj * u[[i, r]];
            }
        }
    }

    // w = U_r Σ^{-1} V_rᵀ c_f: objective correction C̃ = C − Σ_i w_i A_i,
    // shift = wᵀ b... derived from c_fᵀ f = c_fᵀ V_r Σ^{-1} U_rᵀ (b − A(X)).
    let w = {
        let mut w = Array1::<f64>::zeros(m);
        for r in 0..rank {
            let coef: f64 = vt.row(r).dot(&c_f) / s[r];
            for i in 0..m {
                w[i] += coef * u[[i, r]];
            }
        }
        w
    };
    let objective_shift: f64 = w.dot(&Array1::from_vec(problem.b.clone()));

    // reduced constraints: rows of U beyond the rank span the left null
    // space of F; project the equality system onto them.
    let m_red = m - rank;
    let mut u_perp = Array2::<f64>::zeros((m, m_red));
    for j in 0..m_red {
        for i in 0..m {
            u_perp[[i, j]] = u[[i, rank + j]];
        }
    }
    // thin SVD of an m×k matrix with k < m yields U with k columns; the
    // remaining left-null directions must be completed by Gram–Schmidt.
    let u_cols = u.ncols();
    if u_cols < m {
        let mut filled = u_cols.saturating_sub(rank);
        let mut basis: Vec<Array1<f64>> = (0..rank)
            .map(|r| u.column(r).to_owned())
            .chain((0..filled).map(|j| u_perp.column(j).to_owned()))
            .collect();
        for e in 0..m {
            if filled == m_red {
                break;
            }
            let mut cand = Array1::<f64>::zeros(m);
            cand[e] = 1.0;
            for bvec in &basis {
                let ip = bvec.dot(&cand);
                cand = &cand - &(bvec * ip);
            }
            let norm = cand.dot(&cand).sqrt();
            if norm > 1e-8 {
                let cand = cand / norm;
                for i in 0..m {
                    u_perp[[i, filled]] = cand[i];
                }
                basis.push(cand);
                filled += 1;
            }
        }
    }

    // Build the reduced problem: constraints are dense combinations of the
    // originals; accumulate per block into dense symmetric scratch and
    // convert back to the sparse representation.
    let mut reduced = SdpProblem {
        block_dims: problem.block_dims.clone(),
        objective: problem.objective.clone(),
        free_objective: vec![],
        free_dim: 0,
        constraints: Vec::with_capacity(m_red),
        b: Vec::with_capacity(m_red),
    };
    // objective correction C̃ = C − Σ_i w_i A_i
    {
        let mut per_block: Vec<Array2<f64>> = problem
            .block_dims
            .iter()
            .map(|&d| Array2::zeros((d, d)))
            .collect();
        let mut touched = vec![false; problem.block_dims.len()];
        for (bi, s) in &problem.objective {
            s.add_into(&mut per_block[*bi], 1.0);
            touched[*bi] = true;
        }
        for (i, con) in problem.constraints.iter().enumerate() {
            if w[i] == 0.0 {
                continue;
            }
            for (bi, s) in &con.blocks {
                s.add_into(&mut per_block[*bi], -w[i]);
                touched[*bi] = true;
            }
        }
        reduced.objective = per_block
            .iter()
            .enumerate()
            .filter(|(bi, _)| touched[*bi])
            .map(|(bi, mat)| (bi, dense_to_sparse(mat)))
            .collect();
    }
    for j in 0..m_red {
        let mut per_block: Vec<Array2<f64>> = problem
            .block_dims
            .iter()
            .map(|&d| Array2::zeros((d, d)))
            .collect();
        let mut touched = vec![false; problem.block_dims.len()];
        let mut rhs = 0.0;
        for (i, con) in problem.constraints.iter().enumerate() {
            let coef = u_perp[[i, j]];
            if coef.abs() < 1e-300 {
                continue;
            }
            rhs += coef * problem.b[i];
            for (bi, s) in &con.blocks {
                s.add_into(&mut per_block[*bi], coef);
                touched[*bi] = true;
            }
        }
        let blocks = per_block
            .iter()
            .enumerate()
            .filter(|(bi, _)| touched[*bi])
            .map(|(bi, mat)| (bi, dense_to_sparse(mat)))
            .collect();
        reduced.constraints.push(Constraint {
            blocks,
            free: vec![],
        });
        reduced.b.push(rhs);
    }
    Ok(FreeElimination {
        reduced,
        u_perp,
        recover,
        objective_shift,
        unbounded,
    })
}

pub(crate) fn dense_to_sparse(mat: &Array2<f64>) -> SparseSym {
    let n = mat.nrows();
    let mut entries = Vec::new();
    for r in 0..n {
        for c in r..n {
            let v = 0.5 * (mat[[r, c]] + mat[[c, r]]);
            if v.abs() > 1e-300 {
                entries.push((r, c, v));
            }
        }
    }
    SparseSym { entries }
}

/// Solve a standard-form SDP.
pub fn solve(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution> {
    if problem.free_dim > 0 {
        let elim = eliminate_free(problem)?;
        if elim.unbounded {
            return Ok(SdpSolution {
                status: SdpStatus::Unbounded,
                primal_value: f64::NEG_INFINITY,
                dual_value: f64::NEG_INFINITY,
                gap: f64::INFINITY,
                blocks: vec![],
                free_values: vec![],
                y: vec![],
                iterations: 0,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
            });
        }
        let mut sol = solve_psd_only(&elim.reduced, options)?;
        if sol.status == SdpStatus::Optimal || sol.status == SdpStatus::MaxIter {
            // recover free values: f = recover · (b − A(X))
            let m = problem.constraints.len();
            let mut slack = Array1::<f64>::zeros(m);
            for (i, con) in problem.constraints.iter().enumerate() {
                let mut ax = 0.0;
                for (bi, s) in &con.blocks {
                    ax += s.inner_sym(&sol.blocks[*bi]);
                }
                slack[i] = problem.b[i] - ax;
            }
            let f = elim.recover.dot(&slack);
            let cf_term: f64 = problem
                .free_objective
                .iter()
                .zip(f.iter())
                .map(|(c, v)| c * v)
                .sum();
            // primal value in the original problem: ⟨C,X⟩ + c_f·f,
            // recomputed directly from the recovered point
            let mut pobj = cf_term;
            for (bi, s) in &problem.objective {
                pobj += s.inner_sym(&sol.blocks[*bi]);
            }
            // dual value of the original equals reduced dual + shift
            sol.dual_value += elim.objective_shift;
            sol.primal_value = pobj;
            sol.gap = (sol.primal_value - sol.dual_value).abs()
                / (1.0 + sol.primal_value.abs() + sol.dual_value.abs());
            sol.free_values = f.to_vec();
            // lift y back: y_orig = U_perp · y_red + (dual of eliminated
            // rows chosen to meet Fᵀy = c_f exactly via min-norm)
            let y_red = Array1::from_vec(sol.y.clone());
            let mut y_full = elim.u_perp.dot(&y_red);
            // add U_r Σ^{-1} V_rᵀ c_f component (the w vector)
            {
                // recompute w as in elimination (recover is V_rΣ^{-1}U_rᵀ,
                // so wᵀ = c_fᵀ·recover)
                let cf = Array1::from_vec(problem.free_objective.clone());
                let w = elim.recover.t().dot(&cf);
                y_full = &y_full + &w;
            }
            sol.y = y_full.to_vec();
        }
        return Ok(sol);
    }
    solve_psd_only(problem, options)
}

fn block_identity(dims: &[usize], scale: f64) -> Vec<Array2<f64>> {
    dims.iter()
        .map(|&d| Array2::eye(d) * scale)
        .collect()
}

/// ⟨X, Z⟩ over all blocks.
fn inner_blocks(x: &[Array2<f64>], z: &[Array2<f64>]) -> f64 {
    x.iter()
        .zip(z)
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

/// Maximum step α ∈ (0, 1] with X + α ΔX ⪰ 0, via λ_min(L⁻¹ ΔX L⁻ᵀ).
fn max_step(x: &[Array2<f64>], dx: &[Array2<f64>]) -> Result<f64> {
    let mut alpha: f64 = 1.0;
    for (xb, dxb) in x.iter().zip(dx) {
        let n = xb.nrows();
        if n == 0 {
            continue;
        }
        let l = xb
            .cholesky(UPLO::Lower)
            .map_err(|e| Error::Backend(format!("step Cholesky: {e}")))?;
        // S = L⁻¹ ΔX L⁻ᵀ
        let t = l
            .solve_triangular(UPLO::Lower, ndarray_linalg::Diag::NonUnit, dxb)
            .map_err(|e| Error::Backend(e.to_string()))?;
        let s = l
            .solve_triangular(UPLO::Lower, ndarray_linalg::Diag::NonUnit, &t.t().to_owned())
            .map_err(|e| Error::Backend(e.to_string()))?;
        let sym = (&s + &s.t()) * 0.5;
        let (vals, _) = sym
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Backend(e.to_string()))?;
        let min = vals.first().copied().unwrap_or(0.0);
        if min < 0.0 {
            alpha = alpha.min(-1.0 / min);
        }
    }
    Ok(alpha)
}

fn solve_psd_only(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution> {
    let m = problem.constraints.len();
    let dims = &problem.block_dims;
    let n_total: usize = dims.iter().sum();

    // data norms for scaled initial points
    let b_norm = problem.b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let c_norm = problem
        .objective
        .iter()
        .map(|(_, s)| s.frobenius_sq())
        .sum::<f64>()
        .sqrt();
    let a_norm = problem
        .constraints
        .iter()
        .map(|c| c.blocks.iter().map(|(_, s)| s.frobenius_sq()).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    let xi = (1.0 + b_norm.max(a_norm)) * (n_total as f64).sqrt().max(1.0);
    let eta = (1.0 + c_norm.max(a_norm)).max(1.0);

    let mut x = block_identity(dims, xi.max(1.0));
    let mut z = block_identity(dims, eta);
    let mut y = vec![0.0; m];

    let mut best_stall = f64::INFINITY;
    let mut stall_count = 0usize;

    for iter in 0..options.max_iter {
        // residuals
        let mut rp = vec![0.0; m]; // b − A(X)
        for (i, con) in problem.constraints.iter().enumerate() {
            let mut ax = 0.0;
            for (bi, s) in &con.blocks {
                ax += s.inner_sym(&x[*bi]);
            }
            rp[i] = problem.b[i] - ax;
        }
        // Rd = C − Aᵀy − Z, per block dense
        let mut rd: Vec<Array2<f64>> = z.iter().map(|zb| -zb).collect();
        for (bi, s) in &problem.objective {
            s.add_into(&mut rd[*bi], 1.0);
        }
        for (i, con) in problem.constraints.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for (bi, s) in &con.blocks {
                s.add_into(&mut rd[*bi], -y[i]);
            }
        }

        let pobj: f64 = problem
            .objective
            .iter()
            .map(|(bi, s)| s.inner_sym(&x[*bi]))
            .sum();
        let dobj: f64 = problem.b.iter().zip(&y).map(|(bv, yv)| bv * yv).sum();
        let mu = inner_blocks(&x, &z) / n_total.max(1) as f64;
        let rp_norm = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + b_norm);
        let rd_norm = rd
            .iter()
            .map(|mat| mat.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
            / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

        if gap <= options.gap_tol && rp_norm <= options.feas_tol && rd_norm <= options.feas_tol {
            return Ok(SdpSolution {
                status: SdpStatus::Optimal,
                primal_value: pobj,
                dual_value: dobj,
                gap,
                blocks: x,
                free_values: vec![],
                y,
                iterations: iter,
                primal_residual: rp_norm,
                dual_residual: rd_norm,
            });
        }
        if dobj > options.divergence_threshold && rd_norm <= 1e-5 {
            return Ok(finished(SdpStatus::Infeasible, pobj, dobj, gap, x, y, iter, rp_norm, rd_norm));
        }
        if pobj < -options.divergence_threshold && rp_norm <= 1e-5 {
            return Ok(finished(SdpStatus::Unbounded, pobj, dobj, gap, x, y, iter, rp_norm, rd_norm));
        }
        // stall detection
        let progress = gap + rp_norm + rd_norm;
        if progress < best_stall * 0.999 {
            best_stall = progress;
            stall_count = 0;
        } else {
            stall_count += 1;
            if stall_count > 30 {
                // no progress: report divergence heuristics or give up
                let status = if dobj > 1e3 * (1.0 + b_norm) && rp_norm > options.feas_tol {
                    SdpStatus::Infeasible
                } else {
                    SdpStatus::MaxIter
                };
                return Ok(finished(status, pobj, dobj, gap, x, y, iter, rp_norm, rd_norm));
            }
        }

        // Z factorizations and inverses per block
        let mut z_inv: Vec<Array2<f64>> = Vec::with_capacity(dims.len());
        for zb in &z {
            let l = zb
                .cholesky(UPLO::Lower)
                .map_err(|e| Error::Backend(format!("Z Cholesky: {e}")))?;
            let n = zb.nrows();
            let eye = Array2::<f64>::eye(n);
            let t = l
                .solve_triangular(UPLO::Lower, ndarray_linalg::Diag::NonUnit, &eye)
                .map_err(|e| Error::Backend(e.to_string()))?;
            // Z⁻¹ = L⁻ᵀ L⁻¹
            z_inv.push(t.t().dot(&t));
        }

        // Schur matrix B_ij = Σ_blocks ⟨A_i, X A_j Z⁻¹⟩ (symmetric PD)
        let mut schur = Array2::<f64>::zeros((m, m));
        for (bi, &dim) in dims.iter().enumerate() {
            // constraints touching this block
            let touching: Vec<(usize, &SparseSym)> = problem
                .constraints
                .iter()
                .enumerate()
                .filter_map(|(i, con)| {
                    con.blocks
                        .iter()
                        .find(|(b, _)| *b == bi)
                        .map(|(_, s)| (i, s))
                })
                .collect();
            if touching.is_empty() {
                continue;
            }
            let xb = &x[bi];
            let zib = &z_inv[bi];
            for (jj, &(j, a_j)) in touching.iter().enumerate() {
                // M_j = X A_j Z⁻¹ assembled column-sparse:
                // (X A_j)[:, c] = Σ_r A_j[r, c] X[:, r]; only columns c
                // touched by A_j are nonzero, then multiply by Z⁻¹.
                let cols = a_j.touched_cols();
                let mut xa = Array2::<f64>::zeros((dim, cols.len()));
                for &(r, c, v) in &a_j.entries {
                    // entry contributes at column c (from row r) and, if
                    // off-diagonal, at column r (from row c)
                    let ci = cols.binary_search(&c).unwrap();
                    for t in 0..dim {
                        xa[[t, ci]] += v * xb[[t, r]];
                    }
                    if r != c {
                        let ri = cols.binary_search(&r).unwrap();
                        for t in 0..dim {
                            xa[[t, ri]] += v * xb[[t, c]];
                        }
                    }
                }
                // M_j = xa · Z⁻¹[cols, :]
                let mut m_j = Array2::<f64>::zeros((dim, dim));
                for (ci, &c) in cols.iter().enumerate() {
                    for t in 0..dim {
                        let w = xa[[t, ci]];
                        if w == 0.0 {
                            continue;
                        }
                        for s in 0..dim {
                            m_j[[t, s]] += w * zib[[c, s]];
                        }
                    }
                }
                for &(i, a_i) in touching.iter().take(jj + 1) {
                    let v = a_i.inner_general(&m_j);
                    if i <= j {
                        schur[[i, j]] += v;
                        if i != j {
                            schur[[j, i]] += v;
                        }
                    } else {
                        schur[[j, i]] += v;
                        schur[[i, j]] += v;
                    }
                }
            }
        }
        // symmetrize (roundoff) and factor with escalating jitter
        let schur = (&schur + &schur.t()) * 0.5;
        let trace_scale = (0..m).map(|i| schur[[i, i]]).sum::<f64>().max(1e-300) / m.max(1) as f64;
        let mut chol = None;
        for &jit in &[0.0, 1e-12, 1e-10, 1e-8] {
            let mut s = schur.clone();
            for i in 0..m {
                s[[i, i]] += jit * trace_scale;
            }
            if let Ok(l) = s.cholesky(UPLO::Lower) {
                chol = Some(l);
                break;
            }
        }
        let chol = chol.ok_or_else(|| Error::Backend("Schur factorization failed".into()))?;
        let solve_schur = |rhs: &Array1<f64>| -> Result<Array1<f64>> {
            let t = chol
                .solve_triangular(UPLO::Lower, ndarray_linalg::Diag::NonUnit, rhs)
                .map_err(|e| Error::Backend(e.to_string()))?;
            chol.t()
                .to_owned()
                .solve_triangular(UPLO::Upper, ndarray_linalg::Diag::NonUnit, &t)
                .map_err(|e| Error::Backend(e.to_string()))
        };

        // direction for a given centering term R_c (per block)
        let direction = |r_c: &[Array2<f64>],
                         solve_schur: &dyn Fn(&Array1<f64>) -> Result<Array1<f64>>|
         -> Result<(Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<f64>)> {
            // rhs_i = rp_i − ⟨A_i, (R_c − X·Rd)·Z⁻¹⟩
            let mut rhs = Array1::<f64>::zeros(m);
            let mut base: Vec<Array2<f64>> = Vec::with_capacity(dims.len());
            for bi in 0..dims.len() {
                // (R_c − X·Rd)·Z⁻¹
                let t = &r_c[bi] - &x[bi].dot(&rd[bi]);
                base.push(t.dot(&z_inv[bi]));
            }
            for (i, con) in problem.constraints.iter().enumerate() {
                let mut acc = rp[i];
                for (bi, s) in &con.blocks {
                    acc -= s.inner_general(&base[*bi]);
                }
                rhs[i] = acc;
            }
            let dy = solve_schur(&rhs)?;
            // ΔZ = Rd − Σ dy_i A_i
            let mut dz: Vec<Array2<f64>> = rd.clone();
            for (i, con) in problem.constraints.iter().enumerate() {
                if dy[i] == 0.0 {
                    continue;
                }
                for (bi, s) in &con.blocks {
                    s.add_into(&mut dz[*bi], -dy[i]);
                }
            }
            // ΔX = (R_c − X ΔZ) Z⁻¹, symmetrized
            let mut dx: Vec<Array2<f64>> = Vec::with_capacity(dims.len());
            for bi in 0..dims.len() {
                let t = (&r_c[bi] - &x[bi].dot(&dz[bi])).dot(&z_inv[bi]);
                dx.push((&t + &t.t()) * 0.5);
            }
            Ok((dx, dz, dy.to_vec()))
        };

        // predictor (affine): R_c = −X Z
        let r_c_aff: Vec<Array2<f64>> = (0..dims.len()).map(|bi| -x[bi].dot(&z[bi])).collect();
        let (dx_aff, dz_aff, _) = direction(&r_c_aff, &solve_schur)?;
        let ap = max_step(&x, &dx_aff)?;
        let ad = max_step(&z, &dz_aff)?;
        let mu_aff = {
            let xn: Vec<Array2<f64>> = x
                .iter()
                .zip(&dx_aff)
                .map(|(a, d)| a + &(d * (0.98 * ap).min(1.0)))
                .collect();
            let zn: Vec<Array2<f64>> = z
                .iter()
                .zip(&dz_aff)
                .map(|(a, d)| a + &(d * (0.98 * ad).min(1.0)))
                .collect();
            inner_blocks(&xn, &zn) / n_total.max(1) as f64
        };
        let sigma = ((mu_aff / mu).powi(3)).clamp(1e-6, 0.999);

        // corrector: R_c = σμI − XZ − ΔX_aff ΔZ_aff
        let r_c: Vec<Array2<f64>> = (0..dims.len())
            .map(|bi| {
                let mut t = -x[bi].dot(&z[bi]) - dx_aff[bi].dot(&dz_aff[bi]);
                let n = dims[bi];
                for d in 0..n {
                    t[[d, d]] += sigma * mu;
                }
                t
            })
            .collect();
        let (dx, dz, dy) = direction(&r_c, &solve_schur)?;
        let tau = if iter < 5 { 0.9 } else { 0.98 };
        let ap = (tau * max_step(&x, &dx)?).min(1.0);
        let ad = (tau * max_step(&z, &dz)?).min(1.0);

        for bi in 0..dims.len() {
            x[bi] = &x[bi] + &(&dx[bi] * ap);
            z[bi] = &z[bi] + &(&dz[bi] * ad);
            // re-symmetrize to fight drift
            x[bi] = (&x[bi] + &x[bi].t()) * 0.5;
            z[bi] = (&z[bi] + &z[bi].t()) * 0.5;
        }
        for i in 0..m {
            y[i] += ad * dy[i];
        }
    }

    // max_iter exhausted: report final residuals
    let pobj: f64 = problem
        .objective
        .iter()
        .map(|(bi, s)| s.inner_sym(&x[*bi]))
        .sum();
    let dobj: f64 = problem.b.iter().zip(&y).map(|(bv, yv)| bv * yv).sum();
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    Ok(finished(
        SdpStatus::MaxIter,
        pobj,
        dobj,
        gap,
        x,
        y,
        options.max_iter,
        f64::NAN,
        f64::NAN,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finished(
    status: SdpStatus,
    pobj: f64,
    dobj: f64,
    gap: f64,
    x: Vec<Array2<f64>>,
    y: Vec<f64>,
    iterations: usize,
    rp: f64,
    rd: f64,
) -> SdpSolution {
    SdpSolution {
        status,
        primal_value: pobj,
        dual_value: dobj,
        gap,
        blocks: x,
        free_values: vec![],
        y,
        iterations,
        primal_residual: rp,
        dual_residual: rd,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(r: usize, c: usize, v: f64) -> SparseSym {
        SparseSym {
            entries: vec![(r, c, v)],
        }
    }

    #[test]
    fn min_trace_with_corner_fixed() {
        // min tr(X), X ⪰ 0, X₁₁ = 1 → 1
        let problem = SdpProblem {
            block_dims: vec![2],
            objective: vec![(0, SparseSym { entries: vec![(0, 0, 1.0), (1, 1, 1.0)] })],
            free_objective: vec![],
            free_dim: 0,
            constraints: vec![Constraint {
                blocks: vec![(0, entry(0, 0, 1.0))],
                free: vec![],
            }],
            b: vec![1.0],
        };
        let sol = solve(&problem, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-6);
        assert!(sol.gap < 1e-6);
    }

    #[test]
    fn min_eigenvalue_problem() {
        // min ⟨C,X⟩ s.t. tr X = 1, X ⪰ 0 → λ_min(C)
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let n = 4;
        let mut c = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = rng.gen::<f64>() - 0.5;
                c[[i, j]] = v;
                c[[j, i]] = v;
            }
        }
        let (vals, _) = c.eigh(UPLO::Lower).unwrap();
        let c_sparse = dense_to_sparse(&c);
        let mut tr = SparseSym::default();
        for i in 0..n {
            tr.entries.push((i, i, 1.0));
        }
        let problem = SdpProblem {
            block_dims: vec![n],
            objective: vec![(0, c_sparse)],
            free_objective: vec![],
            free_dim: 0,
            constraints: vec![Constraint {
                blocks: vec![(0, tr)],
                free: vec![],
            }],
            b: vec![1.0],
        };
        let sol = solve(&problem, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_value - vals[0]).abs() < 1e-6);
    }

    #[test]
    fn infeasible_trace() {
        // tr X = −1, X ⪰ 0 infeasible
        let mut tr = SparseSym::default();
        for i in 0..2 {
            tr.entries.push((i, i, 1.0));
        }
        let problem = SdpProblem {
            block_dims: vec![2],
            objective: vec![(0, SparseSym { entries: vec![(0, 0, 1.0), (1, 1, 1.0)] })],
            free_objective: vec![],
            free_dim: 0,
            constraints: vec![Constraint {
                blocks: vec![(0, tr)],
                free: vec![],
            }],
            b: vec![-1.0],
        };
        let sol = solve(&problem, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn free_variable_elimination() {
        // min tr X s.t. X₁₁ + f = 2, f = 1 (two constraints), X ⪰ 0
        // ⇒ X₁₁ = 1, optimum tr X = 1 at X = diag(1, 0)
        let problem = SdpProblem {
            block_dims: vec![2],
            objective: vec![(0, SparseSym { entries: vec![(0, 0, 1.0), (1, 1, 1.0)] })],
            free_objective: vec![0.0],
            free_dim: 1,
            constraints: vec![
                Constraint {
                    blocks: vec![(0, entry(0, 0, 1.0))],
                    free: vec![(0, 1.0)],
                },
                Constraint {
                    blocks: vec![],
                    free: vec![(0, 1.0)],
                },
            ],
            b: vec![2.0, 1.0],
        };
        let sol = solve(&problem, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-6, "{}", sol.primal_value);
        assert!((sol.free_values[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_objective_unbounded() {
        // min f with f unconstrained → unbounded
        let problem = SdpProblem {
            block_dims: vec![1],
            objective: vec![],
            free_objective: vec![1.0],
            free_dim: 1,
            constraints: vec![Constraint {
                blocks: vec![(0, entry(0, 0, 1.0))],
                free: vec![],
            }],
            b: vec![1.0],
        };
        let sol = solve(&problem, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Unbounded);
    }

    #[test]
    fn consistency_check() {
        // x₁ = 1 and x₁ = 2 (same diagonal entry) is inconsistent
        let problem = SdpProblem {
            block_dims: vec![1],
            objective: vec![],
            free_objective: vec![],
            free_dim: 0,
            constraints: vec![
                Constraint {
                    blocks: vec![(0, entry(0, 0, 1.0))],
                    free: vec![],
                },
                Constraint {
                    blocks: vec![(0, entry(0, 0, 1.0))],
                    free: vec![],
                },
            ],
            b: vec![1.0, 2.0],
        };
        assert!(linear_inconsistency(&problem).unwrap() > 1e-2);
        let consistent = SdpProblem {
            b: vec![1.0, 1.0],
            ..problem
        };
        assert!(linear_inconsistency(&consistent).unwrap() < 1e-8);
    }
}
