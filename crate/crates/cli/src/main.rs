//! `olsen`: command-line front end for the olsen-gspt library.
//!
//! Every subcommand accepts `--json` (machine-readable report with a
//! `schema_version` field) and `--out FILE` (tabular output as CSV with 17
//! significant digits). Exit codes: 0 success, 1 numerical failure, 2 usage error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector4;
use serde_json::{json, Value};

use olsen::blowup::{classify_approach, equilibria_chart1, phase_grid};
use olsen::candidates::{intersect_windows, mu_window_scan, solve_candidate, CandidateOrbit};
use olsen::config::{ParamFile, Preset, ResolvedParams};
use olsen::integrate::{integrate, IntegratorConfig, Method};
use olsen::loops::{landing_point, loop_extrema, loop_polyline, LoopSpec, LOOP_SAMPLES};
use olsen::manifolds::{
    branch_expansions, c20_point, classify_point, exact_branches, l2_fold, ExclusionBall, DEFAULT_UPSILON,
};
use olsen::model::{classify_regime, FastSystem, OriginalSystem, ScaledSystem, DEFAULT_REGIME_THRESHOLD};
use olsen::returnmap::{
    epsilon_sweep, find_periodic_orbit, lemma_checks, orbit_polyline, strictly_decreasing, OrbitOptions, SectionKind, DEFAULT_K, DEFAULT_RHO,
};
use olsen::transcritical::{
    canard_exit, check_tc_genericity, classify_passage, fast_linearization, jump_exit, observe_exit, PassageCase,
};

mod verify;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "olsen", version, about = "Slow-fast geometry of the Olsen peroxidase-oxidase model")]
struct Cli {
    #[command(flatten)]
    params: ParamArgs,

    /// Emit a JSON report on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Write tabular output (CSV) to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ParamArgs {
    /// Named parameter set.
    #[arg(long, global = true, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Parameter file (TOML, or JSON by extension).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, global = true)]
    mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true, global = true)]
    alpha: Option<f64>,
    #[arg(long = "eps-b", allow_negative_numbers = true, global = true)]
    eps_b: Option<f64>,
    #[arg(long, allow_negative_numbers = true, global = true)]
    eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true, global = true)]
    xi: Option<f64>,
    #[arg(long, allow_negative_numbers = true, global = true)]
    delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true, global = true)]
    kappa: Option<f64>,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: olsen::Error| e.to_string())
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CaseArg {
    Canard,
    Jump,
}

impl From<CaseArg> for PassageCase {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Canard => PassageCase::Canard,
            CaseArg::Jump => PassageCase::Jump,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SystemArg {
    Original,
    Scaled,
    Fast,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Show resolved parameters and the eps_b / eps^2 regime.
    Params,
    /// Integrate one of the three model systems.
    Simulate {
        #[arg(long, value_enum, default_value = "scaled")]
        system: SystemArg,
        /// Initial state `a,b,x,y` in the chosen system's coordinates.
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',', required = true)]
        init: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        t_end: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-9)]
        rtol: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-12)]
        atol: f64,
        #[arg(long, allow_negative_numbers = true)]
        max_step: Option<f64>,
        /// Use the explicit Dormand-Prince method instead of the stiff solver.
        #[arg(long)]
        explicit: bool,
    },
    /// Critical manifold of the second chart.
    Manifold {
        #[command(subcommand)]
        what: ManifoldCmd,
    },
    /// Chart-1 blow-up analysis on a leaf `(a1, b1)`.
    Blowup {
        #[command(subcommand)]
        what: BlowupCmd,
    },
    /// Transcritical passage near `b2 = xi`.
    Tc {
        #[command(subcommand)]
        what: TcCmd,
    },
    /// A large loop of the slow flow on C0.
    Loop {
        #[arg(long, allow_negative_numbers = true)]
        alpha1: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta1: f64,
        #[arg(long, default_value_t = LOOP_SAMPLES)]
        samples: usize,
    },
    /// Singular candidate orbit.
    Candidate {
        #[arg(long, value_enum)]
        case: CaseArg,
    },
    /// Periodic orbit by the Poincare return map.
    Returnmap {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_RHO)]
        rho: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_K)]
        k: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-10)]
        rtol: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1e-13)]
        atol: f64,
        /// Also report the slow-map lemma checks at these rho values.
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',')]
        lemma_rho: Vec<f64>,
    },
    /// Run the property suite; nonzero exit on any failure.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: verify::Suite,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Parameter sweeps.
    Sweep {
        #[command(subcommand)]
        what: SweepCmd,
    },
}

#[derive(Subcommand, Debug)]
enum ManifoldCmd {
    /// Sample C2,0 over x2 at fixed b2.
    Sample {
        #[arg(long, allow_negative_numbers = true)]
        b2: f64,
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',', default_value = "0,2")]
        x2_range: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Branches over a base point: exact roots, delta-expansions, fold and tags.
    Branches {
        #[arg(long, allow_negative_numbers = true)]
        a2: f64,
        #[arg(long, allow_negative_numbers = true)]
        b2: f64,
    },
}

#[derive(Subcommand, Debug)]
enum BlowupCmd {
    /// Equilibria p1, p2, p3 and their kinds.
    Equilibria {
        #[arg(long, allow_negative_numbers = true)]
        a1: f64,
        #[arg(long, allow_negative_numbers = true)]
        b1: f64,
    },
    /// Vector field of `(y1, eps1)` on a grid.
    Phase {
        #[arg(long, allow_negative_numbers = true)]
        a1: f64,
        #[arg(long, allow_negative_numbers = true)]
        b1: f64,
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',', default_value = "0,3")]
        y1_range: Vec<f64>,
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',', default_value = "0,1")]
        eps1_range: Vec<f64>,
        #[arg(long, default_value_t = 21)]
        n: usize,
    },
}

#[derive(Subcommand, Debug)]
enum TcCmd {
    /// Canard or jump classification, lambda_tc and genericity at base `a0`.
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        a0: f64,
    },
    /// Exit point after the passage, from the delay formulas; `--simulate`
    /// also integrates the full system.
    Delay {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long, allow_negative_numbers = true)]
        alpha0: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta0: f64,
        #[arg(long)]
        simulate: bool,
    },
}

#[derive(Subcommand, Debug)]
enum SweepCmd {
    /// Periodic orbits over a list of eps values.
    Eps {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',', default_value = "0.12,0.08,0.05,0.035")]
        values: Vec<f64>,
    },
    /// Windows of mu with a feasible candidate.
    Mu {
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',', default_value = "1.0,2.0")]
        range: Vec<f64>,
        #[arg(long, default_value_t = 101)]
        n: usize,
    },
    /// Passage classification over delta / eps^2 values.
    Delta {
        #[arg(long, allow_negative_numbers = true)]
        a0: f64,
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',', default_value = "0,0.5,1,2,5")]
        delta_hat: Vec<f64>,
    },
}

/// Bad input that should map to exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn arity(v: &[f64], n: usize, flag: &str) -> Result<()> {
    if v.len() != n {
        return Err(usage(format!("{flag} takes {n} comma-separated values, got {}", v.len())));
    }
    Ok(())
}

struct Output {
    report: Value,
    csv: Option<String>,
    ok: bool,
}

impl Output {
    fn new(report: Value) -> Self {
        Self { report, csv: None, ok: true }
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn resolve(p: &ParamArgs) -> Result<ResolvedParams> {
    let mut r = match (p.preset, &p.config) {
        (Some(_), Some(_)) => return Err(usage("give either --preset or --config, not both")),
        (Some(pr), None) => ParamFile { preset: Some(pr), ..Default::default() }.resolve()?,
        (None, Some(path)) => ParamFile::load(path).and_then(|f| f.resolve()).map_err(|e| usage(e.to_string()))?,
        (None, None) => return Err(usage("a parameter source is required: --preset NAME or --config FILE")),
    };
    let s = &mut r.scaled;
    for (slot, v) in [
        (&mut s.mu, p.mu),
        (&mut s.alpha, p.alpha),
        (&mut s.eps_b, p.eps_b),
        (&mut s.eps, p.eps),
        (&mut s.xi, p.xi),
        (&mut s.delta, p.delta),
        (&mut s.kappa, p.kappa),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    s.validate().map_err(|e| usage(e.to_string()))?;
    Ok(r)
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv_rows(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        let line: Vec<String> = r.into_iter().map(num).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

fn case_name(c: PassageCase) -> &'static str {
    match c {
        PassageCase::Canard => "canard",
        PassageCase::Jump => "jump",
    }
}

fn candidate_json(c: &CandidateOrbit) -> Value {
    json!({
        "case": case_name(c.case),
        "mu": c.mu,
        "corners": {
            "alpha0": c.alpha0, "beta0": c.beta0,
            "alpha1": c.alpha1, "beta1": c.beta1,
            "alpha2": c.alpha2, "beta2": c.beta2,
        },
        "closure_residual": c.closure_residual,
    })
}

fn cmd_params(r: &ResolvedParams) -> Result<Output> {
    let regime = classify_regime(&r.scaled, DEFAULT_REGIME_THRESHOLD)?;
    Ok(Output::new(json!({
        "scaled": r.scaled,
        "eps2": r.scaled.eps2(),
        "delta_hat": r.scaled.delta_hat(),
        "original": r.original,
        "regime": regime,
    })))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    r: &ResolvedParams,
    system: SystemArg,
    init: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
    max_step: Option<f64>,
    explicit: bool,
) -> Result<Output> {
    let mut cfg = IntegratorConfig::default().with_tolerances(rtol, atol);
    if explicit {
        cfg.method = Method::ExplicitAdaptive;
    }
    if let Some(h) = max_step {
        cfg.max_step = h;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if !(t_end > 0.0) {
        return Err(usage("--t-end must be positive"));
    }
    arity(init, 4, "--init")?;
    let y0 = Vector4::new(init[0], init[1], init[2], init[3]);
    let (traj, names) = match system {
        SystemArg::Original => {
            let p = r.original.ok_or_else(|| usage("--system original needs a preset or file with rate constants"))?;
            (integrate(&OriginalSystem(p), y0, 0.0, t_end, &cfg)?, ["A", "B", "X", "Y"])
        }
        SystemArg::Scaled => (integrate(&ScaledSystem(r.scaled), y0, 0.0, t_end, &cfg)?, ["a2", "b2", "x2", "y2"]),
        SystemArg::Fast => (integrate(&FastSystem(r.scaled), y0, 0.0, t_end, &cfg)?, ["a", "b", "x", "y"]),
    };
    let (t, last) = traj.last();
    let report = json!({
        "system": format!("{system:?}").to_lowercase(),
        "columns": ["t", names[0], names[1], names[2], names[3]],
        "steps": traj.stats,
        "t_end": t,
        "final_state": [last[0], last[1], last[2], last[3]],
    });
    Ok(Output::new(report).with_csv(traj.to_csv(&names)))
}

fn cmd_manifold(r: &ResolvedParams, what: &ManifoldCmd) -> Result<Output> {
    let sp = &r.scaled;
    match what {
        ManifoldCmd::Sample { b2, x2_range, n } => {
            arity(x2_range, 2, "--x2-range")?;
            let n = (*n).max(2);
            let rows: Vec<Vec<f64>> = (0..n)
                .filter_map(|i| {
                    let x2 = x2_range[0] + (x2_range[1] - x2_range[0]) * i as f64 / (n - 1) as f64;
                    c20_point(*b2, x2, sp).ok().map(|(a2, y2)| vec![*b2, x2, a2, y2])
                })
                .collect();
            let report = json!({"b2": b2, "points": rows.len(), "columns": ["b2", "x2", "a2", "y2"]});
            Ok(Output::new(report).with_csv(csv_rows("b2,x2,a2,y2", rows)))
        }
        ManifoldCmd::Branches { a2, b2 } => {
            let ball = ExclusionBall::new(sp.xi, DEFAULT_UPSILON)?;
            let exact: Vec<Value> = exact_branches(*a2, *b2, sp)
                .into_iter()
                .map(|(x2, y2)| {
                    let tag = classify_point(*a2, *b2, x2, sp, &ball).ok();
                    json!({"x2": x2, "y2": y2, "branch": tag})
                })
                .collect();
            let expansions = branch_expansions(*a2, *b2, sp.delta, sp).ok();
            Ok(Output::new(json!({
                "a2": a2, "b2": b2,
                "exact": exact,
                "expansions": expansions,
                "fold_l2": l2_fold(*a2, *b2, sp.xi).ok(),
            })))
        }
    }
}

fn cmd_blowup(r: &ResolvedParams, what: &BlowupCmd) -> Result<Output> {
    let sp = &r.scaled;
    match what {
        BlowupCmd::Equilibria { a1, b1 } => {
            let eq = equilibria_chart1(*a1, *b1, sp)?;
            let ball = ExclusionBall::new(sp.xi, DEFAULT_UPSILON)?;
            Ok(Output::new(json!({
                "a1": a1, "b1": b1,
                "p1": eq[0], "p2": eq[1], "p3": eq[2],
                "approach_case": classify_approach(*a1, *b1, sp, &ball),
            })))
        }
        BlowupCmd::Phase { a1, b1, y1_range, eps1_range, n } => {
            arity(y1_range, 2, "--y1-range")?;
            arity(eps1_range, 2, "--eps1-range")?;
            let g = phase_grid(*a1, *b1, sp, (y1_range[0], y1_range[1]), (eps1_range[0], eps1_range[1]), *n);
            let report = json!({"a1": a1, "b1": b1, "points": g.len(), "columns": ["y1", "eps1", "dy1", "deps1"]});
            Ok(Output::new(report).with_csv(csv_rows("y1,eps1,dy1,deps1", g.into_iter().map(|p| p.to_vec()))))
        }
    }
}

fn cmd_tc(r: &ResolvedParams, what: &TcCmd) -> Result<Output> {
    let sp = &r.scaled;
    match what {
        TcCmd::Classify { a0 } => {
            let c = classify_passage(*a0, sp)?;
            let g = check_tc_genericity(*a0, sp)?;
            let fl = fast_linearization(*a0, sp.xi * 0.99, sp).ok();
            Ok(Output::new(json!({
                "a0": a0,
                "case": case_name(c.case),
                "lambda_tc": c.lambda_tc,
                "delta_hat": c.delta_hat,
                "genericity": g,
                "fast_linearization_below_xi": fl,
            })))
        }
        TcCmd::Delay { case, alpha0, beta0, simulate } => {
            let case = PassageCase::from(*case);
            let d = match case {
                PassageCase::Canard => canard_exit(*alpha0, *beta0, sp)?,
                PassageCase::Jump => jump_exit(*alpha0, *beta0, sp)?,
            };
            let mut report = json!({"case": case_name(case), "formula": d});
            if *simulate {
                let cfg = IntegratorConfig::default().with_tolerances(1e-10, 1e-22);
                let (x, y) = match case {
                    PassageCase::Canard => {
                        let x0 = (-1.0 / sp.eps).exp();
                        (x0, x0 * x0 / (1.0 + alpha0 * beta0))
                    }
                    PassageCase::Jump => branch_expansions(*alpha0, *beta0, sp.delta, sp)?.attracting,
                };
                let threshold = if case == PassageCase::Canard { 1e-2 } else { 1.0 };
                let o = observe_exit(sp, Vector4::new(*alpha0, *beta0, x, y), threshold, 50.0, &cfg)?;
                report["simulated"] = json!(o);
            }
            Ok(Output::new(report))
        }
    }
}

fn cmd_loop(r: &ResolvedParams, alpha1: f64, beta1: f64, samples: usize) -> Result<Output> {
    let spec = LoopSpec::new(alpha1, beta1, r.scaled.kappa, r.scaled.eps_b).map_err(|e| usage(e.to_string()))?;
    let a2 = landing_point(&spec)?;
    let (a_plus, a_minus) = loop_extrema(&spec);
    let pts = loop_polyline(&spec, samples)?;
    let report = json!({
        "alpha1": alpha1, "beta1": beta1,
        "alpha2": a2, "beta2": spec.eps_b * a2 + spec.k1(),
        "a_plus": a_plus, "a_minus": a_minus,
        "columns": ["a", "b", "y"],
    });
    Ok(Output::new(report).with_csv(csv_rows("a,b,y", pts.into_iter().map(|p| p.to_vec()))))
}

fn cmd_candidate(r: &ResolvedParams, case: CaseArg) -> Result<Output> {
    let sp = r.scaled;
    let mu = sp.mu;
    let case = PassageCase::from(case);
    match solve_candidate(case, &sp, mu)? {
        Some(c) => {
            let mut rows: Vec<Vec<f64>> = c.slow_segment.iter().map(|p| vec![0.0, p[0], p[1], 0.0]).collect();
            rows.extend(c.loop_points.iter().map(|p| vec![1.0, p[0], p[1], p[2]]));
            Ok(Output::new(candidate_json(&c)).with_csv(csv_rows("piece,a2,b2,y", rows)))
        }
        None => {
            let mut o = Output::new(json!({"case": case_name(case), "mu": mu, "candidate": null}));
            o.ok = false;
            Ok(o)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_returnmap(
    r: &ResolvedParams,
    case: CaseArg,
    rho: f64,
    k: f64,
    rtol: f64,
    atol: f64,
    lemma_rho: &[f64],
) -> Result<Output> {
    let (mu, eps) = (r.scaled.mu, r.scaled.eps);
    let case = PassageCase::from(case);
    let cfg = IntegratorConfig::default().with_tolerances(rtol, atol);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let opts = OrbitOptions { rho, k, ..OrbitOptions::default() };
    let res = find_periodic_orbit(&r.scaled, mu, case, eps, &cfg, &opts)?;
    let s = olsen::returnmap::case_params(&r.scaled, mu, case, eps, &opts);
    let orbit = orbit_polyline(Vector4::from(res.fixed_point), res.period, &s, &cfg)?;
    let mut report = json!({
        "result": res,
        "period_tau": res.period_tau(),
        "stable": res.is_stable(),
        "section": match res.section { SectionKind::Sigma0 => "sigma0", SectionKind::Sigma2 => "sigma2" },
    });
    if !lemma_rho.is_empty() {
        report["lemmas"] = json!(lemma_checks(&r.scaled, mu, case, lemma_rho)?);
    }
    let csv = csv_rows("a2,b2,x2,y2", orbit.iter().map(|v| vec![v[0], v[1], v[2], v[3]]));
    let mut o = Output::new(report).with_csv(csv);
    o.ok = res.is_stable();
    Ok(o)
}

fn cmd_sweep(r: &ResolvedParams, what: &SweepCmd) -> Result<Output> {
    let sp = &r.scaled;
    match what {
        SweepCmd::Eps { case, values } => {
            let mu = sp.mu;
            let case = PassageCase::from(*case);
            let cfg = IntegratorConfig::default().with_tolerances(1e-10, 1e-13);
            let res = epsilon_sweep(sp, mu, case, values, &cfg, &OrbitOptions::default());
            let mut rows = Vec::new();
            let mut table = Vec::new();
            let mut dh = Vec::new();
            for (e, o) in values.iter().zip(res) {
                match o {
                    Ok(o) => {
                        let m = o.multiplier_moduli.iter().cloned().fold(0.0, f64::max);
                        rows.push(vec![*e, o.period, m, o.hausdorff_to_candidate, o.departure_b2]);
                        dh.push(o.hausdorff_to_candidate);
                        table.push(json!({"eps": e, "result": o}));
                    }
                    Err(err) => table.push(json!({"eps": e, "error": err.to_string()})),
                }
            }
            let all = dh.len() == values.len();
            let report = json!({
                "case": case_name(case), "mu": mu, "table": table,
                "hausdorff_strictly_decreasing": all && strictly_decreasing(&dh),
            });
            let mut o = Output::new(report).with_csv(csv_rows("eps,period,max_multiplier,hausdorff,departure_b2", rows));
            o.ok = all;
            Ok(o)
        }
        SweepCmd::Mu { range, n } => {
            arity(range, 2, "--range")?;
            let c = mu_window_scan(PassageCase::Canard, sp, (range[0], range[1]), *n).map_err(|e| usage(e.to_string()))?;
            let j = mu_window_scan(PassageCase::Jump, sp, (range[0], range[1]), *n)?;
            let both = intersect_windows(&c, &j);
            Ok(Output::new(json!({"canard": c, "jump": j, "intersection": both})))
        }
        SweepCmd::Delta { a0, delta_hat } => {
            let mut rows = Vec::new();
            let mut table = Vec::new();
            for &dh in delta_hat {
                let s = sp.with_delta(dh * sp.eps2());
                let c = classify_passage(*a0, &s)?;
                rows.push(vec![dh, c.lambda_tc, if c.case == PassageCase::Canard { 0.0 } else { 1.0 }]);
                table.push(json!({"delta_hat": dh, "case": case_name(c.case), "lambda_tc": c.lambda_tc}));
            }
            Ok(Output::new(json!({"a0": a0, "table": table})).with_csv(csv_rows("delta_hat,lambda_tc,jump", rows)))
        }
    }
}

fn print_text(v: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                match x {
                    Value::Object(_) | Value::Array(_) if !is_flat(x) => {
                        let _ = writeln!(out, "{pad}{k}:");
                        print_text(x, indent + 2, out);
                    }
                    _ => {
                        let _ = writeln!(out, "{pad}{k}: {}", inline(x));
                    }
                }
            }
        }
        Value::Array(a) => {
            for x in a {
                let _ = writeln!(out, "{pad}-");
                print_text(x, indent + 2, out);
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", inline(other));
        }
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(|x| !x.is_object() && (!x.is_array() || is_flat(x))),
        _ => false,
    }
}

fn inline(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let name = match &cli.command {
        Command::Params => "params",
        Command::Simulate { .. } => "simulate",
        Command::Manifold { .. } => "manifold",
        Command::Blowup { .. } => "blowup",
        Command::Tc { .. } => "tc",
        Command::Loop { .. } => "loop",
        Command::Candidate { .. } => "candidate",
        Command::Returnmap { .. } => "returnmap",
        Command::Verify { .. } => "verify",
        Command::Sweep { .. } => "sweep",
    };
    let out = match &cli.command {
        Command::Verify { suite, seed } => verify::run(*suite, *seed),
        cmd => {
            let r = resolve(&cli.params)?;
            match cmd {
                Command::Params => cmd_params(&r)?,
                Command::Simulate { system, init, t_end, rtol, atol, max_step, explicit } => {
                    cmd_simulate(&r, *system, init, *t_end, *rtol, *atol, *max_step, *explicit)?
                }
                Command::Manifold { what } => cmd_manifold(&r, what)?,
                Command::Blowup { what } => cmd_blowup(&r, what)?,
                Command::Tc { what } => cmd_tc(&r, what)?,
                Command::Loop { alpha1, beta1, samples } => cmd_loop(&r, *alpha1, *beta1, *samples)?,
                Command::Candidate { case } => cmd_candidate(&r, *case)?,
                Command::Returnmap { case, rho, k, rtol, atol, lemma_rho } => {
                    cmd_returnmap(&r, *case, *rho, *k, *rtol, *atol, lemma_rho)?
                }
                Command::Sweep { what } => cmd_sweep(&r, what)?,
                Command::Verify { .. } => unreachable!(),
            }
        }
    };

    if let Some(path) = &cli.out {
        let body = match &out.csv {
            Some(c) => c.clone(),
            None => serde_json::to_string_pretty(&out.report)? + "\n",
        };
        std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    if cli.json {
        let mut doc = json!({"schema_version": SCHEMA_VERSION, "command": name, "ok": out.ok});
        if let (Value::Object(d), Value::Object(r)) = (&mut doc, out.report) {
            d.extend(r);
        }
        emit(&(serde_json::to_string_pretty(&doc)? + "\n"))?;
    } else if let (Some(c), None) = (&out.csv, &cli.out) {
        emit(c)?;
    } else {
        let mut s = String::new();
        print_text(&out.report, 0, &mut s);
        emit(&s)?;
    }
    Ok(out.ok)
}

/// Write to stdout, treating a closed pipe (`olsen ... | head`) as success.
fn emit(s: &str) -> Result<()> {
    use std::io::Write as _;
    let mut h = std::io::stdout().lock();
    match h.write_all(s.as_bytes()).and_then(|_| h.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
