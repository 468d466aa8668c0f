//! Constructors for tripartite states: the named example states plus seeded
//! random generators for property tests.
//!
//! Ket ordering: |abc⟩ has subsystem A as the slowest index, so the flat
//! index is a·d_B·d_C + b·d_C + c.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{kron, ComplexMatrix, DimSplit, C64, TAU_PSD};

/// A density matrix annotated with its (d_A, d_B, d_C) split.
#[derive(Debug, Clone)]
pub struct TripartiteState {
    pub rho: ComplexMatrix,
    pub dims: DimSplit,
}

impl TripartiteState {
    /// Validate Hermiticity, positivity (within `TAU_PSD`), unit trace
    /// (within 1e-10), and the dimension product.
    pub fn new(rho: ComplexMatrix, dims: DimSplit) -> Result<Self> {
        if !rho.is_square() || rho.rows() != dims.total() {
            return Err(Error::DimensionMismatch(format!(
                "state is {}×{}, dims ({},{},{}) require {}",
                rho.rows(),
                rho.cols(),
                dims.d_a,
                dims.d_b,
                dims.d_c,
                dims.total()
            )));
        }
        let rho = rho.require_hermitian()?;
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "state trace is {:.12} + {:.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let min_eig = crate::numerics::herm_eigvals(&rho)?
            .first()
            .copied()
            .unwrap_or(0.0);
        if min_eig < -TAU_PSD {
            return Err(Error::NotPositiveSemidefinite {
                min_eig,
                tol: TAU_PSD,
            });
        }
        Ok(Self { rho, dims })
    }

    /// Reduced state ρ_AB.
    pub fn rho_ab(&self) -> ComplexMatrix {
        crate::numerics::partial_trace(&self.rho, &self.dims.as_vec(), &[2])
            .expect("dims validated")
    }

    /// Reduced state ρ_BC.
    pub fn rho_bc(&self) -> ComplexMatrix {
        crate::numerics::partial_trace(&self.rho, &self.dims.as_vec(), &[0])
            .expect("dims validated")
    }

    /// Reduced state ρ_B.
    pub fn rho_b(&self) -> ComplexMatrix {
        crate::numerics::partial_trace(&self.rho, &self.dims.as_vec(), &[0, 2])
            .expect("dims validated")
    }

    /// Tensor product with merged subsystems: A = A₁A₂, B = B₁B₂, C = C₁C₂.
    pub fn tensor(&self, other: &TripartiteState) -> Result<TripartiteState> {
        let d1 = self.dims;
        let d2 = other.dims;
        let raw = kron(&self.rho, &other.rho);
        // raw ordering: A₁B₁C₁A₂B₂C₂ → regroup to A₁A₂B₁B₂C₁C₂.
        let dims6 = vec![d1.d_a, d1.d_b, d1.d_c, d2.d_a, d2.d_b, d2.d_c];
        let merged = crate::numerics::permute_systems(&raw, &dims6, &[0, 3, 1, 4, 2, 5])?;
        TripartiteState::new(
            merged,
            DimSplit::new(d1.d_a * d2.d_a, d1.d_b * d2.d_b, d1.d_c * d2.d_c)?,
        )
    }
}

fn pure_state(amplitudes: &[C64], dims: DimSplit) -> Result<TripartiteState> {
    let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("zero state vector".into()));
    }
    let v: Vec<C64> = amplitudes.iter().map(|z| z / norm).collect();
    TripartiteState::new(ComplexMatrix::outer(&v, &v), dims)
}

fn qubit3(amps: &[(usize, f64)]) -> Result<TripartiteState> {
    let mut v = vec![C64::new(0.0, 0.0); 8];
    for &(idx, a) in amps {
        v[idx] = C64::new(a, 0.0);
    }
    pure_state(&v, DimSplit::new(2, 2, 2)?)
}

/// Generalized W state |W_{α0,α1}⟩ = √α0|001⟩ + √α1|010⟩ + √(1−α0−α1)|100⟩.
pub fn w_state(alpha0: f64, alpha1: f64) -> Result<TripartiteState> {
    if alpha0 < 0.0 || alpha1 < 0.0 || alpha0 + alpha1 > 1.0 + 1e-15 {
        return Err(Error::InvalidParameter(format!(
            "W-state parameters must satisfy α0, α1 ≥ 0 and α0+α1 ≤ 1, got ({}, {})",
            alpha0, alpha1
        )));
    }
    let rest = (1.0 - alpha0 - alpha1).max(0.0);
    qubit3(&[
        (0b001, alpha0.sqrt()),
        (0b010, alpha1.sqrt()),
        (0b100, rest.sqrt()),
    ])
}

/// Symmetric W state (α0 = α1 = 1/3).
pub fn w_symmetric() -> TripartiteState {
    w_state(1.0 / 3.0, 1.0 / 3.0).expect("valid parameters")
}

/// GHZ state (|000⟩ + |111⟩)/√2.
pub fn ghz_state() -> TripartiteState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    qubit3(&[(0b000, r), (0b111, r)]).expect("valid amplitudes")
}

/// Depolarized state (1−p)·ρ + p·I/d.
pub fn depolarize(state: &TripartiteState, p: f64) -> Result<TripartiteState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "noise rate must lie in [0, 1], got {}",
            p
        )));
    }
    let d = state.dims.total();
    let mixed = ComplexMatrix::identity(d).scale_re(p / d as f64);
    TripartiteState::new(state.rho.scale_re(1.0 - p).add(&mixed), state.dims)
}

/// GW(p) = p·|GHZ⟩⟨GHZ| + (1−p)·|W⟩⟨W| with the symmetric W state.
pub fn ghz_w_mix(p: f64) -> Result<TripartiteState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "mixing parameter must lie in [0, 1], got {}",
            p
        )));
    }
    let g = ghz_state();
    let w = w_symmetric();
    TripartiteState::new(g.rho.scale_re(p).add(&w.rho.scale_re(1.0 - p)), g.dims)
}

/// Named example states:
/// - `s1` = ½(|001⟩+|100⟩+|110⟩+|111⟩), `s2` = ½(|000⟩+|011⟩+|101⟩+|111⟩),
///   `rho_s` = their equal mixture (the non-convexity witness);
/// - `psi1` = (|010⟩+|101⟩+|110⟩)/√3, `psi2` = (|010⟩+|011⟩+|100⟩)/√3 (equal
///   conditional mutual information, opposite verdicts).
pub fn named_state(name: &str) -> Result<TripartiteState> {
    let h = 0.5;
    let t = 1.0 / 3f64.sqrt();
    match name {
        "s1" => qubit3(&[(0b001, h), (0b100, h), (0b110, h), (0b111, h)]),
        "s2" => qubit3(&[(0b000, h), (0b011, h), (0b101, h), (0b111, h)]),
        "rho_s" => {
            let s1 = named_state("s1")?;
            let s2 = named_state("s2")?;
            TripartiteState::new(s1.rho.add(&s2.rho).scale_re(0.5), s1.dims)
        }
        "psi1" => qubit3(&[(0b010, t), (0b101, t), (0b110, t)]),
        "psi2" => qubit3(&[(0b010, t), (0b011, t), (0b100, t)]),
        other => Err(Error::UnknownState(other.to_string())),
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        )
    })
}

/// Random density matrix ρ = GG†/tr(GG†) with complex Gaussian G of shape
/// d × rank.
pub fn random_density(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> Result<ComplexMatrix> {
    if rank == 0 || rank > d {
        return Err(Error::InvalidParameter(format!(
            "rank must lie in 1..={}, got {}",
            d, rank
        )));
    }
    let g = gaussian_matrix(rng, d, rank);
    let p = g.matmul(&g.dagger());
    let tr = p.trace().re;
    Ok(p.scale_re(1.0 / tr))
}

/// Random probability vector from normalized uniform weights.
fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    use rand::Rng;
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-6).collect();
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

/// Random tripartite state of the given rank, deterministic in `seed`.
pub fn random_state(dims: DimSplit, rank: usize, seed: u64) -> Result<TripartiteState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_density(&mut rng, dims.total(), rank)?;
    TripartiteState::new(rho, dims)
}

/// Random state classical on C: ρ = Σ_k p_k ρ_AB^{(k)} ⊗ |k⟩⟨k|_C.
pub fn random_classical_on_c(dims: DimSplit, seed: u64) -> Result<TripartiteState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_ab = dims.d_a * dims.d_b;
    let p = random_distribution(&mut rng, dims.d_c);
    let mut rho = ComplexMatrix::zeros(dims.total(), dims.total());
    for (k, &pk) in p.iter().enumerate() {
        let block = random_density(&mut rng, d_ab, d_ab)?;
        let mut proj = ComplexMatrix::zeros(dims.d_c, dims.d_c);
        proj[(k, k)] = C64::new(1.0, 0.0);
        // reorder (AB)⊗C into A⊗B⊗C — already consistent since C is fastest
        rho = rho.add(&kron(&block, &proj).scale_re(pk));
    }
    TripartiteState::new(rho, dims)
}

/// Random quantum Markov chain built from the direct-sum structure
/// ρ = ⊕_t q_t ρ_{A bL}^{(t)} ⊗ ρ_{bR C}^{(t)}, where B = ⊕_t bL_t ⊗ bR_t.
///
/// `blocks` lists (d_bL, d_bR) per direct summand; weights are drawn from the
/// seed. Requires Σ_t d_bL·d_bR = d_B.
pub fn random_qmc(
    blocks: &[(usize, usize)],
    d_a: usize,
    d_c: usize,
    seed: u64,
) -> Result<TripartiteState> {
    let d_b: usize = blocks.iter().map(|&(l, r)| l * r).sum();
    if d_b == 0 || blocks.iter().any(|&(l, r)| l == 0 || r == 0) {
        return Err(Error::InvalidParameter(
            "every QMC block needs positive dimensions".into(),
        ));
    }
    let dims = DimSplit::new(d_a, d_b, d_c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_distribution(&mut rng, blocks.len());
    let n = dims.total();
    let mut rho = ComplexMatrix::zeros(n, n);
    let mut offset = 0;
    for (t, &(dl, dr)) in blocks.iter().enumerate() {
        let left = random_density(&mut rng, d_a * dl, d_a * dl)?;
        let right = random_density(&mut rng, dr * d_c, dr * d_c)?;
        // Embed q_t · left_{A bL} ⊗ right_{bR C} at B-offset `offset`.
        for a in 0..d_a {
            for a2 in 0..d_a {
                for bl in 0..dl {
                    for bl2 in 0..dl {
                        let lv = left[(a * dl + bl, a2 * dl + bl2)] * q[t];
                        if lv.norm_sqr() == 0.0 {
                            continue;
                        }
                        for br in 0..dr {
                            for br2 in 0..dr {
                                for c in 0..d_c {
                                    for c2 in 0..d_c {
                                        let rv = right[(br * d_c + c, br2 * d_c + c2)];
                                        let b = offset + bl * dr + br;
                                        let b2 = offset + bl2 * dr + br2;
                                        let i = (a * d_b + b) * d_c + c;
                                        let j = (a2 * d_b + b2) * d_c + c2;
                                        rho[(i, j)] += lv * rv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        offset += dl * dr;
    }
    TripartiteState::new(rho, dims)
}

/// Random classical Markov chain: diagonal state with p_{ijk} = p_i·T1(j|i)·T2(k|j).
pub fn random_classical_mc(dims: DimSplit, seed: u64) -> Result<TripartiteState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_a = random_distribution(&mut rng, dims.d_a);
    let t1: Vec<Vec<f64>> = (0..dims.d_a)
        .map(|_| random_distribution(&mut rng, dims.d_b))
        .collect();
    let t2: Vec<Vec<f64>> = (0..dims.d_b)
        .map(|_| random_distribution(&mut rng, dims.d_c))
        .collect();
    let mut diag = Vec::with_capacity(dims.total());
    for i in 0..dims.d_a {
        for j in 0..dims.d_b {
            for k in 0..dims.d_c {
                diag.push(C64::new(p_a[i] * t1[i][j] * t2[j][k], 0.0));
            }
        }
    }
    TripartiteState::new(ComplexMatrix::diag(&diag), dims)
}

/// JSON state specification consumed by the CLI: either a named family with
/// parameters or a dense matrix given by real and imaginary parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Family {
        family: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Dense {
        dims: [usize; 3],
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Vec<Vec<f64>>,
    },
}

impl StateSpec {
    pub fn build(&self) -> Result<TripartiteState> {
        match self {
            StateSpec::Family { family, params } => state_from_family(family, params),
            StateSpec::Dense { dims, re, im } => {
                let split = DimSplit::new(dims[0], dims[1], dims[2])?;
                let n = split.total();
                if re.len() != n || re.iter().any(|row| row.len() != n) {
                    return Err(Error::DimensionMismatch(format!(
                        "`re` must be a {n}×{n} matrix"
                    )));
                }
                if !im.is_empty() && (im.len() != n || im.iter().any(|row| row.len() != n)) {
                    return Err(Error::DimensionMismatch(format!(
                        "`im` must be empty or a {n}×{n} matrix"
                    )));
                }
                let rho = ComplexMatrix::from_fn(n, n, |i, j| {
                    C64::new(re[i][j], if im.is_empty() { 0.0 } else { im[i][j] })
                });
                TripartiteState::new(rho, split)
            }
        }
    }
}

/// Resolve a family name plus parameter map to a state.
///
/// Families: `w` (alpha0, alpha1; default 1/3 each), `ghz`, `gw` (p),
/// `w_dep` (p), `ghz_dep` (p), `s1`, `s2`, `rho_s`, `psi1`, `psi2`,
/// `qmc` (seed; a seeded random quantum Markov chain on (2,4,2)).
pub fn state_from_family(family: &str, params: &BTreeMap<String, f64>) -> Result<TripartiteState> {
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
    match family {
        "w" => w_state(get("alpha0", 1.0 / 3.0), get("alpha1", 1.0 / 3.0)),
        "ghz" => Ok(ghz_state()),
        "gw" => ghz_w_mix(get("p", 0.5)),
        "w_dep" => depolarize(&w_symmetric(), get("p", 0.0)),
        "ghz_dep" => depolarize(&ghz_state(), get("p", 0.0)),
        "qmc" => random_qmc(&[(1, 2), (2, 1)], 2, 2, get("seed", 0.0) as u64),
        name @ ("s1" | "s2" | "rho_s" | "psi1" | "psi2") => named_state(name),
        other => Err(Error::UnknownState(other.to_string())),
    }
}
