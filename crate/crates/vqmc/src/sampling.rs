//! Quasiprobability sampling of a virtual recovery: draw one of the two CP
//! parts with probability c_i/γ, evolve, measure the observable in its
//! eigenbasis, and sign-correct the outcome by ±γ.
//!
//! Channels are simulated by exact density-matrix evolution plus Born-rule
//! eigenvalue sampling; no Kraus/trajectory unravelling. Shots are
//! independent RNG streams (one stream per shot index), so per-shot records
//! are reproducible regardless of batching.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{herm_eig, herm_eigvals, kron, partial_trace, ComplexMatrix, C64};
use crate::recovery::{apply_map, LinearMap};
use crate::sdp::OverheadResult;
use crate::states::TripartiteState;

/// Born probabilities more negative than this abort the run; smaller
/// negative values are clipped to zero (solver slack on the Choi blocks).
pub const BORN_CLIP_TOL: f64 = 1e-8;

/// Tolerance for the CPTP validation of the normalized channels; dividing a
/// Choi block by a small c_i amplifies solver slack, so this is looser than
/// the solver's own feasibility tolerance.
const CHANNEL_TOL: f64 = 1e-3;

/// Coefficients below this fraction of γ degenerate into a single-channel
/// plan (their Choi block is solver noise, not a channel).
const DEGENERATE_C: f64 = 1e-5;

/// A fully specified quasiprobability sampling experiment.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    /// Normalized channels N_i with Choi J_i/c_i (one entry when a
    /// coefficient vanishes).
    pub channels: Vec<LinearMap>,
    /// Selection probabilities c_i/γ, summing to one.
    pub probs: Vec<f64>,
    /// Outcome signs, +1 for the first channel and −1 for the second.
    pub signs: Vec<f64>,
    /// γ = c₁ + c₂.
    pub gamma: f64,
    /// Hermitian observable on ABC.
    pub observable: ComplexMatrix,
    pub shots: usize,
    pub seed: u64,
}

/// One sampled shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_index: usize,
    /// Index into the plan's channel list.
    pub channel: usize,
    /// Measured eigenvalue of the observable.
    pub eigenvalue: f64,
    /// sign·γ·eigenvalue, the term entering the mean.
    pub signed_contribution: f64,
}

/// Estimate, spread, and the raw per-shot data of one run.
#[derive(Debug, Clone)]
pub struct SamplingOutcome {
    pub estimate: f64,
    pub stderr: f64,
    pub records: Vec<ShotRecord>,
}

/// Spectral norm ‖O‖∞ of a Hermitian matrix.
fn spectral_norm(o: &ComplexMatrix) -> Result<f64> {
    let vals = herm_eigvals(o)?;
    Ok(vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())))
}

/// Build a sampling plan from an overhead decomposition.
///
/// The shot count follows Hoeffding's inequality with outcomes rescaled to
/// [−1, 1] by the spectral norm of the observable:
/// shots = ⌈2·γ²·‖O‖∞²·ln(2/δ)/ε²⌉.
pub fn make_plan(
    result: &OverheadResult,
    observable: &ComplexMatrix,
    eps: f64,
    delta: f64,
    seed: u64,
) -> Result<SamplingPlan> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let observable = observable.require_hermitian()?;
    let norm = spectral_norm(&observable)?;
    let gamma = result.gamma;
    let shots = (2.0 * gamma * gamma * norm * norm * (2.0 / delta).ln() / (eps * eps)).ceil();
    if !shots.is_finite() || shots < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "shot count {shots} is not representable"
        )));
    }
    let shots = shots as usize;

    let mut channels = Vec::new();
    let mut probs = Vec::new();
    let mut signs = Vec::new();
    for (j, c, sign) in [(&result.j1, result.c1, 1.0), (&result.j2, result.c2, -1.0)] {
        if c <= DEGENERATE_C * gamma {
            continue;
        }
        let normalized = LinearMap::from_choi(j.choi.scale_re(1.0 / c), j.in_dim, j.out_dim)?;
        validate_channel(&normalized)?;
        channels.push(normalized);
        probs.push(c / gamma);
        signs.push(sign);
    }
    if channels.is_empty() {
        return Err(Error::InvalidParameter(
            "both decomposition coefficients vanish".into(),
        ));
    }
    // renormalize in case one coefficient degenerated away
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(SamplingPlan {
        channels,
        probs,
        signs,
        gamma,
        observable,
        shots,
        seed,
    })
}

/// Normalized channels must be CPTP up to solver slack.
fn validate_channel(map: &LinearMap) -> Result<()> {
    let marginal = partial_trace(&map.choi, &[map.in_dim, map.out_dim], &[1])?;
    let tp_defect = marginal
        .sub(&ComplexMatrix::identity(map.in_dim))
        .frobenius_norm();
    if tp_defect > CHANNEL_TOL * (map.in_dim as f64).sqrt().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "normalized channel is not trace-preserving (defect {tp_defect:.3e})"
        )));
    }
    let sym = map.choi.add(&map.choi.dagger()).scale_re(0.5);
    let min_eig = herm_eigvals(&sym)?.first().copied().unwrap_or(0.0);
    if min_eig < -CHANNEL_TOL {
        return Err(Error::NotPositiveSemidefinite {
            min_eig,
            tol: CHANNEL_TOL,
        });
    }
    Ok(())
}

/// Execute a plan against ρ_AB (the C-traced target state).
///
/// Each shot draws a channel i with probability c_i/γ, evolves ρ_AB through
/// id_A ⊗ N_i, samples an eigenvalue of the observable with Born
/// probability, and records sign_i·γ·λ. The estimator mean equals
/// tr(O·ρ_ABC) in expectation when the decomposition is feasible.
pub fn run(plan: &SamplingPlan, rho_ab: &ComplexMatrix) -> Result<SamplingOutcome> {
    let (eigvals, eigvecs) = herm_eig(&plan.observable)?;
    let n = plan.observable.rows();

    // per-channel Born distributions over the observable eigenbasis
    let mut born: Vec<Vec<f64>> = Vec::with_capacity(plan.channels.len());
    for map in &plan.channels {
        let sigma = apply_map(map, rho_ab)?;
        if sigma.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "evolved state is {}×{} but the observable is {}×{}",
                sigma.rows(),
                sigma.cols(),
                n,
                n
            )));
        }
        let mut probs = Vec::with_capacity(n);
        for k in 0..n {
            let v = eigvecs.column(k);
            let sv = sigma.matvec(&v);
            let p: C64 = v.iter().zip(sv.iter()).map(|(a, b)| a.conj() * b).sum();
            let p = p.re;
            if p < -BORN_CLIP_TOL || p > 1.0 + BORN_CLIP_TOL {
                return Err(Error::BornProbability {
                    p,
                    tol: BORN_CLIP_TOL,
                });
            }
            probs.push(p.clamp(0.0, 1.0));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::BornProbability {
                p: total,
                tol: 1e-6,
            });
        }
        for p in &mut probs {
            *p /= total;
        }
        born.push(probs);
    }

    let mut records = Vec::with_capacity(plan.shots);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for shot in 0..plan.shots {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(shot as u64);
        let channel = sample_index(&mut rng, &plan.probs);
        let k = sample_index(&mut rng, &born[channel]);
        let value = plan.signs[channel] * plan.gamma * eigvals[k];
        sum += value;
        sum_sq += value * value;
        records.push(ShotRecord {
            shot_index: shot,
            channel,
            eigenvalue: eigvals[k],
            signed_contribution: value,
        });
    }
    let shots = plan.shots.max(1) as f64;
    let estimate = sum / shots;
    let variance = ((sum_sq / shots) - estimate * estimate).max(0.0);
    let stderr = if plan.shots > 1 {
        (variance * shots / (shots - 1.0)).sqrt() / shots.sqrt()
    } else {
        f64::INFINITY
    };
    Ok(SamplingOutcome {
        estimate,
        stderr,
        records,
    })
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Reference oracle tr(O·ρ_ABC) for the sampler.
pub fn exact_expectation(state: &TripartiteState, observable: &ComplexMatrix) -> Result<f64> {
    let n = state.dims.total();
    if observable.rows() != n || observable.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "observable is {}×{} but the state has dimension {n}",
            observable.rows(),
            observable.cols()
        )));
    }
    Ok(observable.matmul(&state.rho).trace().re)
}

/// Observable from a Pauli string over {I, X, Y, Z}, one letter per qubit,
/// e.g. "ZZZ" on three qubits.
pub fn pauli_observable(spec: &str) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::identity(1);
    for ch in spec.chars() {
        let factor = match ch.to_ascii_uppercase() {
            'I' => ComplexMatrix::identity(2),
            'X' => ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])?,
            'Y' => {
                let mut m = ComplexMatrix::zeros(2, 2);
                m[(0, 1)] = C64::new(0.0, -1.0);
                m[(1, 0)] = C64::new(0.0, 1.0);
                m
            }
            'Z' => ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown Pauli letter '{other}' in \"{spec}\""
                )))
            }
        };
        out = kron(&out, &factor);
    }
    Ok(out)
}

/// Per-shot records as CSV with a header row.
pub fn records_to_csv(records: &[ShotRecord]) -> String {
    let mut out = String::from("shot_index,channel,eigenvalue,signed_contribution\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.17e},{:.17e}\n",
            r.shot_index, r.channel, r.eigenvalue, r.signed_contribution
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{sampling_overhead, SdpOptions};
    use crate::states::{ghz_state, random_qmc, w_symmetric};

    fn w_plan(eps: f64, delta: f64, seed: u64) -> (SamplingPlan, TripartiteState) {
        let s = w_symmetric();
        let r = sampling_overhead(&s, &SdpOptions::default()).unwrap();
        let o = pauli_observable("ZZZ").unwrap();
        (make_plan(&r, &o, eps, delta, seed).unwrap(), s)
    }

    #[test]
    fn hoeffding_shot_counts() {
        let q = random_qmc(&[(1, 1), (1, 1)], 2, 2, 11).unwrap();
        let r = sampling_overhead(&q, &SdpOptions::default()).unwrap();
        let o = pauli_observable("ZZZ").unwrap();
        // γ=1, ‖O‖∞=1, eps=0.1, δ=0.05 → ceil(2·ln 40/0.01) = 738
        let plan = make_plan(&r, &o, 0.1, 0.05, 0).unwrap();
        assert_eq!(plan.shots, 738);
        // quadratic in 1/eps: ceil(2·ln 40/0.0025) = 2952
        let plan_half = make_plan(&r, &o, 0.05, 0.05, 0).unwrap();
        assert_eq!(plan_half.shots, 2952);
        // quadratic in γ: γ(W)=3 → ceil(18·ln 40/0.01) = 6640
        let (plan_w, _) = w_plan(0.1, 0.05, 0);
        assert_eq!(plan_w.shots, 6640);
        assert!((plan_w.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_values() {
        let w = w_symmetric();
        let zzz = pauli_observable("ZZZ").unwrap();
        // every W branch has exactly one excitation → ZZZ eigenvalue −1
        assert!((exact_expectation(&w, &zzz).unwrap() + 1.0).abs() < 1e-12);
        let ghz = ghz_state();
        assert!(exact_expectation(&ghz, &zzz).unwrap().abs() < 1e-12);
        let id = pauli_observable("III").unwrap();
        assert!((exact_expectation(&w, &id).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_observable_is_exact_every_shot() {
        let q = random_qmc(&[(1, 1), (1, 1)], 2, 2, 3).unwrap();
        let r = sampling_overhead(&q, &SdpOptions::default()).unwrap();
        let id = pauli_observable("III").unwrap();
        let mut plan = make_plan(&r, &id, 0.25, 0.1, 7).unwrap();
        plan.shots = 64;
        let out = run(&plan, &q.rho_ab()).unwrap();
        // γ = 1 up to solver precision, and every shot contributes exactly γ
        assert!((out.estimate - 1.0).abs() < 1e-5);
        assert!(out.stderr < 1e-12);
        for rec in &out.records {
            assert!((rec.signed_contribution - out.estimate).abs() < 1e-12);
        }
    }

    #[test]
    fn w_estimate_within_eps() {
        let (plan, s) = w_plan(0.05, 0.01, 42);
        let out = run(&plan, &s.rho_ab()).unwrap();
        let exact = exact_expectation(&s, &plan.observable).unwrap();
        assert!(
            (out.estimate - exact).abs() <= 0.05,
            "estimate {} vs {}",
            out.estimate,
            exact
        );
        // bounded-outcome variance: per-shot values lie in ±γ‖O‖∞
        for rec in &out.records {
            assert!(rec.signed_contribution.abs() <= plan.gamma + 1e-9);
        }
    }

    #[test]
    fn determinism_and_csv() {
        let (mut plan, s) = w_plan(0.3, 0.1, 5);
        plan.shots = 200;
        let a = run(&plan, &s.rho_ab()).unwrap();
        let b = run(&plan, &s.rho_ab()).unwrap();
        assert_eq!(a.records, b.records);
        let csv = records_to_csv(&a.records);
        assert!(csv.starts_with("shot_index,channel,eigenvalue,signed_contribution\n"));
        assert_eq!(csv.lines().count(), 201);
        // a different seed changes the draw sequence
        plan.seed = 6;
        let c = run(&plan, &s.rho_ab()).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn pauli_strings() {
        let z = pauli_observable("Z").unwrap();
        assert!((z[(0, 0)].re - 1.0).abs() < 1e-15 && (z[(1, 1)].re + 1.0).abs() < 1e-15);
        let xyz = pauli_observable("XYZ").unwrap();
        assert_eq!(xyz.rows(), 8);
        assert!(xyz.hermiticity_violation() < 1e-15);
        // X⊗Y⊗Z squared is the identity
        let sq = xyz.matmul(&xyz);
        assert!(sq.sub(&ComplexMatrix::identity(8)).frobenius_norm() < 1e-12);
        assert!(pauli_observable("ZQZ").is_err());
    }

    #[test]
    fn plan_rejects_bad_parameters() {
        let q = random_qmc(&[(1, 1), (1, 1)], 2, 2, 11).unwrap();
        let r = sampling_overhead(&q, &SdpOptions::default()).unwrap();
        let o = pauli_observable("ZZZ").unwrap();
        assert!(make_plan(&r, &o, 0.0, 0.05, 0).is_err());
        assert!(make_plan(&r, &o, 0.1, 1.5, 0).is_err());
        let skew = ComplexMatrix::from_fn(8, 8, |i, j| C64::new(i as f64 - j as f64, 1.0));
        assert!(make_plan(&r, &skew, 0.1, 0.05, 0).is_err());
    }
}
