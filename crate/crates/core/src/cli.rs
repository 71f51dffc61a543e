//! The `prp` command line: one instance file in, one JSON report out.
//!
//! Exit codes: 0 positive verdict or successful computation, 1 negative
//! verdict, 2 undecided, 3 input or schema error.

use clap::{Parser, ValueEnum};
use num_traits::Zero;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::cohomology::{
    cone_prp_certificate, cone_relative_certificate, tangent_prp_space, tangent_relative, Cocycle1, DeformationContext,
    FEASIBILITY_RTOL,
};
use crate::error::Error;
use crate::instance::{parse_instance, parse_weights_file, Instance};
use crate::json::{matrix_to_json, rational_to_json, stable_f64};
use crate::linalg::{CMatrix, CONTAINMENT_TOL, RANK_RTOL};
use crate::metric::{solve_metric, SolveOutcome, SolverOptions};
use crate::quiver::{check_locus, encode, export_json, induced_weight, king_semistable, KingStatus};
use crate::rep_pair::{deligne_simpson_certificate, validate, RELATOR_TOL};
use crate::rhd::{deligne_residue, extension_degree, flag_residues, verify_monodromy, MONODROMY_TOL};
use crate::stability::{mumford_weight, polystable, semistable, witness_subgroup, StabilityStatus};
use crate::subspaces::SearchBudget;

pub const EXIT_POSITIVE: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_UNDECIDED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Residual histories in reports keep at most this many evenly spaced entries.
const HISTORY_SAMPLES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Validate,
    Tangent,
    Cone,
    Stability,
    QuiverExport,
    King,
    MetricSolve,
    Rhd,
    DeligneSimpson,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::Tangent => "tangent",
            Self::Cone => "cone",
            Self::Stability => "stability",
            Self::QuiverExport => "quiver-export",
            Self::King => "king",
            Self::MetricSolve => "metric-solve",
            Self::Rhd => "rhd",
            Self::DeligneSimpson => "deligne-simpson",
        }
    }

    pub const ALL: [Command; 9] = [
        Self::Validate,
        Self::Tangent,
        Self::Cone,
        Self::Stability,
        Self::QuiverExport,
        Self::King,
        Self::MetricSolve,
        Self::Rhd,
        Self::DeligneSimpson,
    ];
}

#[derive(Debug, Parser)]
#[command(name = "prp", version, about = "Parabolic representation pairs: validation, deformations, stability, metrics and residues")]
struct Args {
    command: Command,
    /// Instance JSON file.
    #[arg(long)]
    instance: String,
    /// Weights JSON file, overriding weights in the instance.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convergence tolerance for metric-solve.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Compact machine-readable output (the default).
    #[arg(long, conflicts_with = "pretty")]
    json: bool,
    /// Indented output.
    #[arg(long)]
    pretty: bool,
}

/// Everything a command needs besides the files themselves.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: u64,
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
}

struct Outcome {
    code: i32,
    result: Value,
}

fn outcome(code: i32, result: Value) -> Outcome {
    Outcome { code, result }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_UNDECIDED,
        Error::NotInvariant(_) | Error::Precondition(_) | Error::FormulaViolation { .. } | Error::Locus { .. } => {
            EXIT_NEGATIVE
        }
        _ => EXIT_INPUT,
    }
}

fn error_json(e: &Error) -> Value {
    match e {
        Error::Schema { path, message } => json!({"kind": "schema", "path": path, "message": message}),
        other => json!({"kind": "error", "message": other.to_string()}),
    }
}

fn digest(instance: &[u8], weights: Option<&[u8]>) -> String {
    let mut h = Sha256::new();
    h.update(instance);
    if let Some(w) = weights {
        h.update([0u8]);
        h.update(w);
    }
    hex::encode(h.finalize())
}

/// Rounds every non-integral number so reports do not depend on the last bits.
fn stabilize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => stable_f64(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => Value::Array(a.into_iter().map(stabilize).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, stabilize(v))).collect()),
        other => other,
    }
}

fn cocycle_json(inst: &Instance, x: &Cocycle1) -> Value {
    let gens = inst.pair.presentation().generators();
    let mut m = Map::new();
    for (g, v) in gens.iter().zip(&x.values) {
        m.insert(g.to_string(), matrix_to_json(v));
    }
    Value::Object(m)
}

fn subspace_json(q: &CMatrix) -> Value {
    json!({"dim": q.ncols(), "basis": matrix_to_json(q)})
}

fn sampled_history(h: &[f64]) -> Value {
    let step = h.len().div_ceil(HISTORY_SAMPLES).max(1);
    let mut out: Vec<Value> = h.iter().step_by(step).map(|&x| json!(x)).collect();
    if (h.len() - 1) % step != 0 {
        out.push(json!(h[h.len() - 1]));
    }
    Value::Array(out)
}

fn run_validate(inst: &Instance) -> Outcome {
    let rep = validate(&inst.pair);
    let code = if rep.valid { EXIT_POSITIVE } else { EXIT_NEGATIVE };
    outcome(
        code,
        json!({
            "verdict": if rep.valid { "valid" } else { "invalid" },
            "valid": rep.valid,
            "relator_residual": rep.relator_residual,
            "memberships": rep.memberships,
        }),
    )
}

fn invalid(inst: &Instance) -> Option<Outcome> {
    let rep = validate(&inst.pair);
    (!rep.valid).then(|| {
        outcome(
            EXIT_NEGATIVE,
            json!({"verdict": "invalid", "relator_residual": rep.relator_residual, "memberships": rep.memberships}),
        )
    })
}

fn run_tangent(inst: &Instance) -> crate::Result<Outcome> {
    if let Some(o) = invalid(inst) {
        return Ok(o);
    }
    let ctx = DeformationContext::new(&inst.pair)?;
    let t = tangent_prp_space(&ctx);
    let rel = tangent_relative(&ctx);
    let s = &rel.summary;
    let basis: Vec<Value> = t
        .basis
        .iter()
        .map(|v| {
            json!({
                "cocycle": cocycle_json(inst, &v.cocycle),
                "flag_displacements": v.flag_displacements.iter().map(matrix_to_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    let code = if t.matches_formula { EXIT_POSITIVE } else { EXIT_NEGATIVE };
    Ok(outcome(
        code,
        json!({
            "dimension": t.dimension,
            "predicted": t.predicted,
            "matches_formula": t.matches_formula,
            "basis": basis,
            "relative": {
                "dimension": s.dimension,
                "predicted": s.predicted,
                "generic": s.generic,
                "literal_f": s.literal_f.iter().map(rational_to_json).collect::<Vec<_>>(),
                "literal_prediction": rational_to_json(&s.literal_prediction),
                "literal_is_integral": s.literal_is_integral,
            },
        }),
    ))
}

fn run_cone(inst: &Instance) -> crate::Result<Outcome> {
    if let Some(o) = invalid(inst) {
        return Ok(o);
    }
    let ctx = DeformationContext::new(&inst.pair)?;
    let t = tangent_prp_space(&ctx);
    let mut prp = Vec::with_capacity(t.basis.len());
    for v in &t.basis {
        let c = cone_prp_certificate(&ctx, v)?;
        prp.push(json!({"feasible": c.feasible, "residual": c.residual, "rhs_norm": c.rhs_norm}));
    }
    let rel = tangent_relative(&ctx);
    let mut relative = Vec::with_capacity(rel.basis.len());
    for x in &rel.basis {
        let c = cone_relative_certificate(&ctx, x)?;
        relative.push(json!({"feasible": c.feasible, "residual": c.residual, "rhs_norm": c.rhs_norm}));
    }
    let all = prp.iter().chain(&relative).all(|c| c["feasible"] == json!(true));
    Ok(outcome(
        if all { EXIT_POSITIVE } else { EXIT_NEGATIVE },
        json!({
            "all_in_cone": all,
            "tangent_basis": prp,
            "relative_basis": relative,
            "feasibility_rtol": FEASIBILITY_RTOL,
        }),
    ))
}

fn run_stability(inst: &Instance, budget: &SearchBudget) -> crate::Result<Outcome> {
    if let Some(o) = invalid(inst) {
        return Ok(o);
    }
    let wp = inst.weighted()?;
    let v = semistable(&wp, budget)?;
    let mut result = json!({
        "degree": rational_to_json(&wp.degree()),
        "slope": rational_to_json(&v.slope),
        "lattice_status": v.lattice_status,
        "subspaces_checked": v.subspaces_checked,
        "witness": v.witness.as_ref().map(subspace_json),
        "witness_slope": v.witness_slope.as_ref().map(rational_to_json),
    });
    let (status, code) = match v.status {
        StabilityStatus::Unstable => {
            let lambda = witness_subgroup(&v)?.expect("unstable verdicts carry a witness");
            result["witness_mumford_weight"] = rational_to_json(&mumford_weight(&wp, &lambda)?);
            result["polystable"] = json!(false);
            (StabilityStatus::Unstable, EXIT_NEGATIVE)
        }
        StabilityStatus::Undecided => (StabilityStatus::Undecided, EXIT_UNDECIDED),
        _ => {
            let p = polystable(&wp, budget)?;
            result["polystable"] = json!(p.polystable);
            result["summand_dims"] = json!(p.summands.iter().map(|s| s.ncols()).collect::<Vec<_>>());
            let code = if p.status == StabilityStatus::Undecided { EXIT_UNDECIDED } else { EXIT_POSITIVE };
            (p.status, code)
        }
    };
    result["status"] = json!(status.as_str());
    result["semistable"] = json!(v.status.is_semistable());
    Ok(outcome(code, result))
}

fn run_quiver_export(inst: &Instance) -> crate::Result<Outcome> {
    let x = encode(&inst.pair)?;
    let w = match &inst.weights {
        Some(ws) => Some(induced_weight(ws, &inst.pair.flag_types())?),
        None => None,
    };
    let mut result = export_json(&x, w.as_ref());
    match check_locus(&x) {
        Ok(()) => {
            result["locus"] = json!({"ok": true});
            Ok(outcome(EXIT_POSITIVE, result))
        }
        Err(Error::Locus { invariant, detail }) => {
            result["locus"] = json!({"ok": false, "invariant": invariant, "detail": detail});
            Ok(outcome(EXIT_NEGATIVE, result))
        }
        Err(e) => Err(e),
    }
}

fn run_king(inst: &Instance, budget: &SearchBudget) -> crate::Result<Outcome> {
    if let Some(o) = invalid(inst) {
        return Ok(o);
    }
    let wp = inst.weighted()?;
    let x = encode(&wp.pair)?;
    let w = induced_weight(&wp.weights, &wp.pair.flag_types())?;
    let v = king_semistable(&x, &w, budget)?;
    let (ints, scale) = w.integral();
    let mut warnings = Vec::new();
    if !v.total_pairing.is_zero() {
        warnings.push("total pairing of the vertex weights is nonzero");
    }
    let code = match v.status {
        KingStatus::Stable | KingStatus::Semistable => EXIT_POSITIVE,
        KingStatus::Unstable => EXIT_NEGATIVE,
        KingStatus::Undecided => EXIT_UNDECIDED,
    };
    Ok(outcome(
        code,
        json!({
            "status": v.status.as_str(),
            "vertex_weights": w.0.iter().map(rational_to_json).collect::<Vec<_>>(),
            "integral_weights": {"scale": scale, "weights": ints},
            "dims": x.dims.0,
            "witness_dims": v.witness.as_ref().map(|s| s.dims()),
            "witness_pairing": v.witness_pairing.as_ref().map(rational_to_json),
            "lattice_status": v.lattice_status,
            "subrepresentations_checked": v.subrepresentations_checked,
            "total_pairing": rational_to_json(&v.total_pairing),
            "warnings": warnings,
        }),
    ))
}

fn run_metric(inst: &Instance, opts: &RunOptions) -> crate::Result<Outcome> {
    if let Some(o) = invalid(inst) {
        return Ok(o);
    }
    let wp = inst.weighted()?;
    let mut so = SolverOptions::default();
    if let Some(t) = opts.tol.or(inst.solver.tol) {
        so.tol = t;
    }
    if let Some(n) = opts.max_steps.or(inst.solver.max_steps) {
        so.max_steps = n;
    }
    so.initial_metric = inst.solver.initial_metric.clone();
    let mut warnings = Vec::new();
    if !wp.degree().is_zero() {
        warnings.push("weighted degree is nonzero");
    }
    let out = solve_metric(&wp, &so)?;
    Ok(match out {
        SolveOutcome::Converged(s) => outcome(
            EXIT_POSITIVE,
            json!({
                "converged": true,
                "steps": s.step_count,
                "total_norm": s.total_norm,
                "restricted_norm": s.restricted_norm,
                "max_trace_defect": s.max_trace_defect,
                "h": matrix_to_json(s.h.gram()),
                "residual_history": sampled_history(&s.residual_history),
                "tol": so.tol,
                "max_steps": so.max_steps,
                "warnings": warnings,
            }),
        ),
        SolveOutcome::Diverged(c) => outcome(
            EXIT_NEGATIVE,
            json!({
                "converged": false,
                "reason": c.reason,
                "steps": c.step_count,
                "best_norm": c.best_norm,
                "condition_number": c.condition_number,
                "max_trace_defect": c.max_trace_defect,
                "best_h": matrix_to_json(c.best.central.gram()),
                "residual_history": sampled_history(&c.residual_history),
                "tol": so.tol,
                "max_steps": so.max_steps,
                "warnings": warnings,
            }),
        ),
    })
}

fn run_rhd(inst: &Instance) -> crate::Result<Outcome> {
    let mut punctures = Vec::new();
    let mut all = Vec::new();
    let mut verified = true;
    for i in 0..inst.pair.presentation().punctures {
        let m = inst.pair.gamma(i);
        let data = deligne_residue(m)?;
        let ok = verify_monodromy(&data, m)?;
        verified &= ok;
        let levels = flag_residues(m, &inst.pair.flags()[i]).map(|ls| ls.iter().map(|d| d.to_json()).collect::<Vec<_>>());
        punctures.push(json!({
            "puncture": i + 1,
            "residue_data": data.to_json(),
            "verified": ok,
            "flag_levels": levels.ok(),
        }));
        all.push(data);
    }
    Ok(outcome(
        if verified { EXIT_POSITIVE } else { EXIT_NEGATIVE },
        json!({"punctures": punctures, "extension_degree": extension_degree(&all), "verified": verified}),
    ))
}

fn run_deligne_simpson(inst: &Instance, budget: &SearchBudget) -> crate::Result<Outcome> {
    if inst.pair.presentation().genus != 0 {
        return Err(Error::Schema { path: "$/genus".into(), message: "the Deligne–Simpson check needs genus 0".into() });
    }
    let mats: Vec<CMatrix> = (0..inst.pair.presentation().punctures).map(|i| inst.pair.gamma(i).clone()).collect();
    let cert = deligne_simpson_certificate(&mats, inst.pair.flags(), budget)?;
    let mut result = serde_json::to_value(&cert).expect("certificate serializes");
    result["verdict"] = json!(if cert.solution { "solution" } else { "not a solution" });
    let refuted = !cert.failed_memberships.is_empty()
        || cert.product_residual >= RELATOR_TOL
        || !cert.invariant_dims.is_empty();
    let code = if cert.solution {
        EXIT_POSITIVE
    } else if refuted {
        EXIT_NEGATIVE
    } else {
        EXIT_UNDECIDED
    };
    Ok(outcome(code, result))
}

fn dispatch(cmd: Command, inst: &Instance, opts: &RunOptions) -> crate::Result<Outcome> {
    let budget = SearchBudget::with_seed(opts.seed);
    match cmd {
        Command::Validate => Ok(run_validate(inst)),
        Command::Tangent => run_tangent(inst),
        Command::Cone => run_cone(inst),
        Command::Stability => run_stability(inst, &budget),
        Command::QuiverExport => run_quiver_export(inst),
        Command::King => run_king(inst, &budget),
        Command::MetricSolve => run_metric(inst, opts),
        Command::Rhd => run_rhd(inst),
        Command::DeligneSimpson => run_deligne_simpson(inst, &budget),
    }
}

fn provenance(opts: &RunOptions) -> Value {
    let defaults = SolverOptions::default();
    json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "seed": opts.seed,
        "tolerances": {
            "relator": RELATOR_TOL,
            "rank_rtol": RANK_RTOL,
            "containment": CONTAINMENT_TOL,
            "monodromy": MONODROMY_TOL,
            "metric_tol": opts.tol.unwrap_or(defaults.tol),
            "metric_max_steps": opts.max_steps.unwrap_or(defaults.max_steps),
        },
    })
}

/// Runs one command on instance (and optional weights) text; returns the exit code and the report.
pub fn run_on_text(cmd: Command, instance: &str, weights: Option<&str>, opts: &RunOptions) -> (i32, Value) {
    let digest = digest(instance.as_bytes(), weights.map(str::as_bytes));
    let parsed = parse_instance(instance).and_then(|mut inst| {
        if let Some(w) = weights {
            inst.weights = Some(parse_weights_file(w, inst.pair.presentation().punctures)?);
            inst.weighted()?;
        }
        Ok(inst)
    });
    let mut opts = opts.clone();
    let (code, result, error) = match parsed {
        Err(e) => (error_code(&e), Value::Null, Some(error_json(&e))),
        Ok(inst) => {
            if let Some(seed) = inst.solver.seed {
                if opts.seed == 0 {
                    opts.seed = seed;
                }
            }
            match dispatch(cmd, &inst, &opts) {
                Ok(o) => (o.code, o.result, None),
                Err(e) => (error_code(&e), Value::Null, Some(error_json(&e))),
            }
        }
    };
    let mut report = json!({
        "command": cmd.name(),
        "inputs_digest": digest,
        "result": result,
        "provenance": provenance(&opts),
    });
    if let Some(e) = error {
        report["error"] = e;
    }
    (code, stabilize(report))
}

fn render(report: &Value, pretty: bool) -> String {
    if pretty {
        serde_json::to_string_pretty(report).expect("report serializes")
    } else {
        serde_json::to_string(report).expect("report serializes")
    }
}

/// Parses argv (including the program name) and runs the command.
pub fn run_command<I, T>(argv: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_POSITIVE };
            return (code, e.to_string());
        }
    };
    let opts = RunOptions { seed: args.seed, tol: args.tol, max_steps: args.max_steps };
    let read = |p: &str, field: &str| {
        std::fs::read_to_string(p).map_err(|e| json!({"kind": "io", "path": field, "message": format!("{p}: {e}")}))
    };
    let instance = match read(&args.instance, "--instance") {
        Ok(t) => t,
        Err(e) => return (EXIT_INPUT, render(&json!({"command": args.command.name(), "error": e}), args.pretty)),
    };
    let weights = match args.weights.as_deref().map(|p| read(p, "--weights")).transpose() {
        Ok(w) => w,
        Err(e) => return (EXIT_INPUT, render(&json!({"command": args.command.name(), "error": e}), args.pretty)),
    };
    let (code, report) = run_on_text(args.command, &instance, weights.as_deref(), &opts);
    (code, render(&report, args.pretty))
}
