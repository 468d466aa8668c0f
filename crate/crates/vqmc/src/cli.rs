//! Command-line surface: every quantity the library computes is reachable as
//! machine-readable JSON or CSV.
//!
//! Exit codes: 0 — success / positive verdict; 1 — negative verdict (not a
//! virtual quantum Markov chain, infeasible program); 2 — usage or runtime
//! error.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis;
use crate::error::{Error, Result};
use crate::markov;
use crate::numerics::{ComplexMatrix, DEFAULT_RANK_TOL};
use crate::recovery;
use crate::sampling;
use crate::sdp::{self, ApproxMode, SdpOptions};
use crate::states::{depolarize, ghz_state, ghz_w_mix, w_symmetric, StateSpec, TripartiteState};

/// Singular values within this factor of the rank cutoff trigger a
/// borderline-rank warning.
const GAP_WARNING: f64 = 1e6;

#[derive(Debug, Parser)]
#[command(
    name = "vqmc",
    version,
    about = "Numerical toolkit for virtual quantum Markov chains",
    long_about = "Decide virtual recoverability of tripartite states, construct recovery \
                  maps, optimize sampling overhead and approximate recoverability by \
                  semidefinite programming, and simulate the quasiprobability sampling \
                  protocol."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether a state is a virtual quantum Markov chain
    Check {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Rank tolerance relative to the largest singular value
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
    },
    /// Minimize the sampling overhead γ = c₁ + c₂ of virtual recovery
    Overhead {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Minimize the approximation error of recovery by a trace-preserving map
    Approx {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Class of maps to optimize over
        #[arg(long, value_enum, default_value_t = Mode::Hptp)]
        mode: Mode,
    },
    /// Tabulate a quantity along a one-parameter state family
    Sweep {
        /// Sweep family: w_depolarized_overhead, gw_mix_overhead, or
        /// ghz_depolarized_eps
        #[arg(long)]
        family: String,
        /// Parameter grid START:STOP:N (N ≥ 2 points, inclusive)
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Estimate tr(O·ρ) by quasiprobability sampling of the recovery
    Sample {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Observable as a Pauli string over {I,X,Y,Z}, e.g. ZZZ
        #[arg(long, default_value = "ZZZ")]
        observable: String,
        /// Observable as a dense matrix JSON file ({"re": [[...]], "im": [[...]]})
        #[arg(long, conflicts_with = "observable")]
        observable_file: Option<PathBuf>,
        /// Target additive error of the estimate
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Target failure probability
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// RNG seed (one independent stream per shot)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-shot records as CSV to this path
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Construct the virtual recovery map and serialize its Choi matrix
    Recover {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Rank tolerance relative to the largest singular value
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
    },
}

#[derive(Debug, Args)]
struct StateArgs {
    /// Named state family (w, ghz, gw, w_dep, ghz_dep, qmc, s1, s2, rho_s,
    /// psi1, psi2)
    #[arg(long)]
    family: Option<String>,
    /// Family parameter as key=value; repeatable
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
    /// Shorthand for --param p=VALUE
    #[arg(long)]
    p: Option<f64>,
    /// JSON state file (named family or dense matrix)
    #[arg(long, conflicts_with = "family")]
    state: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Hptp,
    Cptp,
}

impl From<Mode> for ApproxMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Hptp => ApproxMode::Hptp,
            Mode::Cptp => ApproxMode::Cptp,
        }
    }
}

/// Entry point: parse arguments, dispatch, and map errors to exit codes.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e @ (Error::NotRecoverable { .. } | Error::Infeasible(_))) => {
            eprintln!("{e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Check { state, output, tol } => cmd_check(&state, &output, tol),
        Command::Overhead { state, output } => cmd_overhead(&state, &output),
        Command::Approx {
            state,
            output,
            mode,
        } => cmd_approx(&state, &output, mode.into()),
        Command::Sweep {
            family,
            grid,
            output,
        } => cmd_sweep(&family, &grid, &output),
        Command::Sample {
            state,
            output,
            observable,
            observable_file,
            eps,
            delta,
            seed,
            records,
        } => cmd_sample(
            &state,
            &output,
            &observable,
            observable_file.as_deref(),
            eps,
            delta,
            seed,
            records.as_deref(),
        ),
        Command::Recover { state, output, tol } => cmd_recover(&state, &output, tol),
    }
}

fn resolve_state(args: &StateArgs) -> Result<TripartiteState> {
    if let Some(path) = &args.state {
        let text = std::fs::read_to_string(path)?;
        let spec: StateSpec = serde_json::from_str(&text)?;
        return spec.build();
    }
    let family = args.family.as_deref().ok_or_else(|| {
        Error::InvalidParameter("provide --family NAME or --state FILE".into())
    })?;
    let mut params: BTreeMap<String, f64> = BTreeMap::new();
    for kv in &args.params {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("--param expects key=value, got `{kv}`"))
        })?;
        let v: f64 = v.parse().map_err(|_| {
            Error::InvalidParameter(format!("--param {k}: `{v}` is not a number"))
        })?;
        params.insert(k.trim().to_string(), v);
    }
    if let Some(p) = args.p {
        params.insert("p".into(), p);
    }
    StateSpec::Family {
        family: family.to_string(),
        params,
    }
    .build()
}

/// 17 significant digits, the round-trip-exact width for f64.
fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn emit(output: &OutputArgs, content: &str) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, content)?,
        None => println!("{content}"),
    }
    Ok(())
}

fn emit_json(output: &OutputArgs, value: &serde_json::Value) -> Result<()> {
    emit(output, &serde_json::to_string_pretty(value)?)
}

fn warn_on_small_gap(gap: f64) {
    if gap.is_finite() && gap < GAP_WARNING {
        eprintln!(
            "warning: singular-value gap {gap:.3e} is below {GAP_WARNING:.0e}; \
             the rank decision is borderline — consider adjusting --tol"
        );
    }
}

fn cmd_check(state_args: &StateArgs, output: &OutputArgs, tol: f64) -> Result<i32> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("--tol must be positive".into()));
    }
    let state = resolve_state(state_args)?;
    let verdict = markov::is_vqmc(&state, tol)?;
    let entropy = analysis::cmi(&state)?;
    let qmc = markov::is_qmc(&state, markov::QMC_CMI_TOL)?;
    warn_on_small_gap(verdict.singular_gap);
    match output.format {
        Format::Json => emit_json(
            output,
            &json!({
                "verdict": verdict,
                "is_qmc": qmc,
                "entropies": entropy,
            }),
        )?,
        Format::Csv => {
            let mut s = String::from(
                "is_vqmc,is_qmc,rank_b,rank_bc,kernel_dim_b,kernel_dim_bc,singular_gap,cmi\n",
            );
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                verdict.is_vqmc,
                qmc,
                verdict.rank_b,
                verdict.rank_bc,
                verdict.kernel_dim_b,
                verdict.kernel_dim_bc,
                fmt(verdict.singular_gap),
                fmt(entropy.cmi),
            ));
            emit(output, &s)?;
        }
    }
    Ok(if verdict.is_vqmc { 0 } else { 1 })
}

fn matrix_json(m: &ComplexMatrix) -> serde_json::Value {
    let re: Vec<Vec<f64>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)].re).collect())
        .collect();
    let im: Vec<Vec<f64>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)].im).collect())
        .collect();
    json!({ "re": re, "im": im })
}

fn cmd_overhead(state_args: &StateArgs, output: &OutputArgs) -> Result<i32> {
    let state = resolve_state(state_args)?;
    let result = match sdp::sampling_overhead(&state, &SdpOptions::default()) {
        Ok(r) => r,
        Err(Error::Infeasible(msg)) => {
            // cross-check the verdict so the message names the cause
            let verdict = markov::is_vqmc(&state, DEFAULT_RANK_TOL)?;
            return Err(Error::Infeasible(format!(
                "{msg}; not a VQMC: {}",
                !verdict.is_vqmc
            )));
        }
        Err(e) => return Err(e),
    };
    match output.format {
        Format::Json => emit_json(
            output,
            &json!({
                "gamma": result.gamma,
                "nu": result.nu,
                "c1": result.c1,
                "c2": result.c2,
                "gap": result.gap,
                "iterations": result.iterations,
                "j1": result.j1.to_json(),
                "j2": result.j2.to_json(),
                "dual_certificates": {
                    "k": matrix_json(&result.dual_k),
                    "m": matrix_json(&result.dual_m),
                    "n": matrix_json(&result.dual_n),
                    "dual_value": result.dual_k.hs_inner(&state.rho).re,
                },
            }),
        )?,
        Format::Csv => {
            let mut s = String::from("gamma,nu,c1,c2,gap,iterations\n");
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt(result.gamma),
                fmt(result.nu),
                fmt(result.c1),
                fmt(result.c2),
                fmt(result.gap),
                result.iterations,
            ));
            emit(output, &s)?;
        }
    }
    Ok(0)
}

fn cmd_approx(state_args: &StateArgs, output: &OutputArgs, mode: ApproxMode) -> Result<i32> {
    let state = resolve_state(state_args)?;
    let result = sdp::approx_recoverability(&state, mode, &SdpOptions::default())?;
    let mode_name = match mode {
        ApproxMode::Hptp => "hptp",
        ApproxMode::Cptp => "cptp",
    };
    match output.format {
        Format::Json => emit_json(
            output,
            &json!({
                "mode": mode_name,
                "sdp_value": result.sdp_value,
                "eps": result.eps,
                "gap": result.gap,
                "iterations": result.iterations,
                "map": result.map.to_json(),
            }),
        )?,
        Format::Csv => {
            let mut s = String::from("mode,sdp_value,eps,gap,iterations\n");
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                mode_name,
                fmt(result.sdp_value),
                fmt(result.eps),
                fmt(result.gap),
                result.iterations,
            ));
            emit(output, &s)?;
        }
    }
    Ok(0)
}

fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "--grid expects START:STOP:N, got `{grid}`"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad grid start `{}`", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad grid stop `{}`", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad grid count `{}`", parts[2])))?;
    if n < 2 {
        return Err(Error::InvalidParameter(
            "--grid needs at least 2 points".into(),
        ));
    }
    Ok((0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect())
}

enum SweepRow {
    Overhead { p: f64, gamma: Option<f64>, status: String },
    Eps {
        p: f64,
        eps_hptp: Option<f64>,
        eps_cptp: Option<f64>,
        status: String,
    },
}

fn cmd_sweep(family: &str, grid: &str, output: &OutputArgs) -> Result<i32> {
    let points = parse_grid(grid)?;
    let opts = SdpOptions::default();
    let mut rows = Vec::with_capacity(points.len());
    for &p in &points {
        let row = match family {
            "w_depolarized_overhead" | "gw_mix_overhead" => {
                let state = if family == "w_depolarized_overhead" {
                    depolarize(&w_symmetric(), p)
                } else {
                    ghz_w_mix(p)
                };
                match state.and_then(|s| sdp::sampling_overhead(&s, &opts)) {
                    Ok(r) => SweepRow::Overhead {
                        p,
                        gamma: Some(r.gamma),
                        status: "optimal".into(),
                    },
                    Err(Error::Infeasible(_)) | Err(Error::NotRecoverable { .. }) => {
                        SweepRow::Overhead {
                            p,
                            gamma: None,
                            status: "infeasible".into(),
                        }
                    }
                    Err(e) => SweepRow::Overhead {
                        p,
                        gamma: None,
                        status: format!("error: {e}"),
                    },
                }
            }
            "ghz_depolarized_eps" => {
                let solve = |mode| {
                    depolarize(&ghz_state(), p)
                        .and_then(|s| sdp::approx_recoverability(&s, mode, &opts))
                };
                let h = solve(ApproxMode::Hptp);
                let c = solve(ApproxMode::Cptp);
                let status = match (&h, &c) {
                    (Ok(_), Ok(_)) => "optimal".into(),
                    (Err(e), _) | (_, Err(e)) => format!("error: {e}"),
                };
                SweepRow::Eps {
                    p,
                    eps_hptp: h.ok().map(|r| r.eps),
                    eps_cptp: c.ok().map(|r| r.eps),
                    status,
                }
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown sweep family `{other}`; expected w_depolarized_overhead, \
                     gw_mix_overhead, or ghz_depolarized_eps"
                )))
            }
        };
        rows.push(row);
    }

    let opt_fmt = |v: &Option<f64>| v.map(fmt).unwrap_or_else(|| "inf".into());
    let opt_json = |v: &Option<f64>| match v {
        Some(x) => json!(x),
        None => json!("inf"),
    };
    match output.format {
        Format::Csv => {
            let mut s = String::new();
            match rows.first() {
                Some(SweepRow::Overhead { .. }) | None => s.push_str("p,gamma,status\n"),
                Some(SweepRow::Eps { .. }) => s.push_str("p,eps_hptp,eps_cptp,status\n"),
            }
            for row in &rows {
                match row {
                    SweepRow::Overhead { p, gamma, status } => {
                        s.push_str(&format!("{},{},{status}\n", fmt(*p), opt_fmt(gamma)))
                    }
                    SweepRow::Eps {
                        p,
                        eps_hptp,
                        eps_cptp,
                        status,
                    } => s.push_str(&format!(
                        "{},{},{},{status}\n",
                        fmt(*p),
                        opt_fmt(eps_hptp),
                        opt_fmt(eps_cptp)
                    )),
                }
            }
            emit(output, &s)?;
        }
        Format::Json => {
            let arr: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| match row {
                    SweepRow::Overhead { p, gamma, status } => json!({
                        "p": p, "gamma": opt_json(gamma), "status": status,
                    }),
                    SweepRow::Eps {
                        p,
                        eps_hptp,
                        eps_cptp,
                        status,
                    } => json!({
                        "p": p,
                        "eps_hptp": opt_json(eps_hptp),
                        "eps_cptp": opt_json(eps_cptp),
                        "status": status,
                    }),
                })
                .collect();
            emit_json(output, &json!({ "family": family, "rows": arr }))?;
        }
    }
    Ok(0)
}

fn load_observable(
    pauli: &str,
    file: Option<&std::path::Path>,
    dim: usize,
) -> Result<ComplexMatrix> {
    let obs = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let re: Vec<Vec<f64>> = serde_json::from_value(
                v.get("re")
                    .cloned()
                    .ok_or_else(|| Error::InvalidParameter("observable file needs `re`".into()))?,
            )?;
            let im: Vec<Vec<f64>> = match v.get("im") {
                Some(x) => serde_json::from_value(x.clone())?,
                None => vec![vec![0.0; re.len()]; re.len()],
            };
            let n = re.len();
            ComplexMatrix::from_fn(n, n, |i, j| {
                crate::numerics::C64::new(re[i][j], im[i][j])
            })
        }
        None => sampling::pauli_observable(pauli)?,
    };
    if obs.rows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "observable is {}×{} but the state has dimension {dim}",
            obs.rows(),
            obs.cols()
        )));
    }
    Ok(obs)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    state_args: &StateArgs,
    output: &OutputArgs,
    pauli: &str,
    obs_file: Option<&std::path::Path>,
    eps: f64,
    delta: f64,
    seed: u64,
    records_path: Option<&std::path::Path>,
) -> Result<i32> {
    let state = resolve_state(state_args)?;
    let observable = load_observable(pauli, obs_file, state.dims.total())?;
    let overhead = sdp::sampling_overhead(&state, &SdpOptions::default())?;
    let plan = sampling::make_plan(&overhead, &observable, eps, delta, seed)?;
    let outcome = sampling::run(&plan, &state.rho_ab())?;
    let exact = sampling::exact_expectation(&state, &observable)?;
    if let Some(path) = records_path {
        std::fs::write(path, sampling::records_to_csv(&outcome.records))?;
    }
    match output.format {
        Format::Json => emit_json(
            output,
            &json!({
                "gamma": plan.gamma,
                "shots": plan.shots,
                "probs": plan.probs,
                "signs": plan.signs,
                "eps": eps,
                "delta": delta,
                "seed": seed,
                "estimate": outcome.estimate,
                "stderr": outcome.stderr,
                "exact": exact,
                "abs_error": (outcome.estimate - exact).abs(),
            }),
        )?,
        Format::Csv => {
            let mut s = String::from("gamma,shots,estimate,stderr,exact,abs_error\n");
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt(plan.gamma),
                plan.shots,
                fmt(outcome.estimate),
                fmt(outcome.stderr),
                fmt(exact),
                fmt((outcome.estimate - exact).abs()),
            ));
            emit(output, &s)?;
        }
    }
    Ok(0)
}

fn cmd_recover(state_args: &StateArgs, output: &OutputArgs, tol: f64) -> Result<i32> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("--tol must be positive".into()));
    }
    let state = resolve_state(state_args)?;
    let map = recovery::build_virtual_recovery(&state, tol)?;
    let residual = recovery::recovery_residual(&map, &state)?;
    match output.format {
        Format::Json => emit_json(
            output,
            &json!({
                "residual": residual,
                "flags": map.flags,
                "map": map.to_json(),
            }),
        )?,
        Format::Csv => {
            let mut s =
                String::from("residual,hermitian_preserving,trace_preserving,completely_positive\n");
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt(residual),
                map.flags.hermitian_preserving,
                map.flags.trace_preserving,
                map.flags.completely_positive,
            ));
            emit(output, &s)?;
        }
    }
    Ok(0)
}
