use std::sync::Arc;

use approxgroup::growth::{ball_sizes, dyadic_scale, gap_detect, gap_threshold, growth_certificate, scale_radius};
use approxgroup::progression::{coset_nilprogression_fit, FitCaps};
use approxgroup::resid::{residual_structure, residual_torsion_structure};
use approxgroup::setcalc::{build_set, product_set, ApproxCertificate};
use approxgroup::structure::chain::{dimension_chain, torsion_structure, ChainCertificate};
use approxgroup::structure::nilpotent_structure_with;
use approxgroup::{certify_approx, make_context, symmetrize, Error, Group, GroupCtx, GroupRef, Result, SymSet};
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const SCHEMA: &str = "approxgroup-lab/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Hypothesis,
    Bug,
    Error,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Hypothesis => "hypothesis",
            Status::Bug => "bug",
            Status::Error => "error",
        }
    }
}

/// Result of a command before it is wrapped into a report.
struct Done {
    result: Value,
    verified: bool,
    status: Status,
    message: Option<String>,
}

impl Done {
    fn ok(result: Value, verified: bool) -> Self {
        Done { result, verified, status: Status::Ok, message: None }
    }
}

pub struct Outcome {
    pub report: Value,
    pub exit: i32,
}

pub fn exit_code(status: Status, verified: bool) -> i32 {
    match status {
        Status::Ok if verified => 0,
        Status::Ok | Status::Bug => 3,
        Status::Hypothesis => 2,
        Status::Error => 1,
    }
}

fn classify(e: &Error) -> Status {
    match e {
        Error::Hypothesis(_) => Status::Hypothesis,
        Error::Bug(_) => Status::Bug,
        _ => Status::Error,
    }
}

/// Runs one command and builds its report. Never panics on bad input.
pub fn run(cfg: &RunConfig) -> Outcome {
    let verbose = cfg.verbose.unwrap_or(0);
    let (command, input, done) = match prepare(cfg) {
        Ok((cmd, input)) => {
            let done = execute(cmd, cfg, verbose).unwrap_or_else(|e| Done {
                result: Value::Null,
                verified: false,
                status: classify(&e),
                message: Some(e.to_string()),
            });
            (cmd.to_string(), input, done)
        }
        Err(e) => (
            cfg.command.clone().unwrap_or_default(),
            Value::Null,
            Done { result: Value::Null, verified: false, status: Status::Error, message: Some(e.to_string()) },
        ),
    };
    let exit = exit_code(done.status, done.verified);
    let mut report = json!({
        "schema": SCHEMA,
        "command": command,
        "input": input,
        "result": done.result,
        "verified": done.verified,
        "status": done.status.label(),
        "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    });
    if let Some(m) = done.message {
        report["message"] = Value::String(m);
    }
    Outcome { report, exit }
}

fn prepare(cfg: &RunConfig) -> Result<(&str, Value)> {
    let cmd = cfg.check()?;
    let input = if cmd == "verify" { json!({ "report": cfg.report }) } else { cfg.embedded()? };
    Ok((cmd, input))
}

fn context(cfg: &RunConfig) -> Result<(GroupCtx, GroupRef)> {
    let ctx = make_context(&cfg.group_spec()?)?;
    Ok((ctx.clone(), Arc::new(ctx)))
}

fn required_set(cfg: &RunConfig, ctx: &GroupCtx) -> Result<SymSet> {
    let spec = cfg.set_spec()?.ok_or_else(|| Error::Malformed("--set is required".into()))?;
    build_set(ctx, &spec)
}

fn caps(cfg: &RunConfig) -> FitCaps {
    let d = FitCaps::default();
    FitCaps {
        rank_cap: cfg.rank_cap.unwrap_or(d.rank_cap),
        exp_cap: cfg.exp_cap.unwrap_or(d.exp_cap),
        ..d
    }
}

fn execute(cmd: &str, cfg: &RunConfig, verbose: u8) -> Result<Done> {
    let log = |msg: &str| {
        if verbose > 0 {
            eprintln!("[{cmd}] {msg}");
        }
    };
    if cmd == "verify" {
        return verify(cfg, verbose);
    }
    let (ctx, g) = context(cfg)?;
    log(&format!("group {}", ctx.describe()));
    match cmd {
        "doubling" => {
            let a = required_set(cfg, &ctx)?;
            let a2 = product_set(&a, 2)?.len();
            let a3 = product_set(&a, 3)?.len();
            let cert = certify_approx(&a)?;
            let verified = cert.verify().is_ok();
            Ok(Done::ok(
                json!({
                    "size": a.len(),
                    "A2": a2,
                    "A3": a3,
                    "doubling": cert.to_json()["doubling"],
                    "tripling": cert.to_json()["tripling"],
                    "certificate": cert.to_json(),
                }),
                verified,
            ))
        }
        "certify" => {
            let a = required_set(cfg, &ctx)?;
            let cert = certify_approx(&a)?;
            log(&format!("|A| = {}, K = {}", a.len(), cert.k));
            cert.verify()?;
            Ok(Done::ok(cert.to_json(), true))
        }
        "decompose" => {
            let a = required_set(cfg, &ctx)?;
            let chain = dimension_chain(&a)?;
            log(&format!("k = {}", chain.k));
            Ok(Done::ok(chain.to_json(), chain.all_verified()))
        }
        "structure" => {
            let a = required_set(cfg, &ctx)?;
            if ctx.order().is_some() {
                let s = nilpotent_structure_with(&a, caps(cfg))?;
                Ok(Done::ok(s.to_json(), s.all_verified()))
            } else {
                let fam = cfg.family(&ctx)?;
                let l = residual_structure(&a, &fam)?;
                log(&format!("quotient {}", l.pi.label));
                Ok(Done::ok(l.to_json(), l.all_verified()))
            }
        }
        "progression" => {
            let a = required_set(cfg, &ctx)?;
            if ctx.order().is_some() {
                let s = nilpotent_structure_with(&a, caps(cfg))?;
                let p = coset_nilprogression_fit(&a, &s)?;
                Ok(Done::ok(json!({ "structure": s.to_json(), "progression": p.to_json() }), s.all_verified()))
            } else {
                let fam = cfg.family(&ctx)?;
                let l = residual_structure(&a, &fam)?;
                let p = coset_nilprogression_fit(&l.quotient.base, &l.quotient)?;
                Ok(Done::ok(
                    json!({ "quotient": l.pi.label, "structure": l.to_json(), "progression": p.to_json() }),
                    l.all_verified(),
                ))
            }
        }
        "torsion" => {
            let a = required_set(cfg, &ctx)?;
            let r = cfg.r.ok_or_else(|| Error::Malformed("--r is required".into()))?;
            if ctx.order().is_some() {
                let t = torsion_structure(&a, r)?;
                Ok(Done::ok(t.to_json(), t.chain.all_verified() && t.within_bounds()))
            } else {
                let fam = cfg.family(&ctx)?;
                let t = residual_torsion_structure(&a, r, &fam)?;
                Ok(Done::ok(t.to_json(), t.all_verified()))
            }
        }
        "growth" => growth(cfg, &ctx, &g, &log),
        _ => unreachable!("command checked"),
    }
}

fn growth(cfg: &RunConfig, ctx: &GroupCtx, g: &GroupRef, log: &dyn Fn(&str)) -> Result<Done> {
    let n = cfg.n.ok_or_else(|| Error::Malformed("--n is required".into()))?;
    let c = cfg.c.unwrap_or(1.0);
    let alpha = cfg.alpha.unwrap_or(approxgroup::growth::DEFAULT_ALPHA);
    let s = match cfg.set_spec()? {
        Some(spec) => build_set(ctx, &spec)?,
        None => symmetrize(g, &g.generators())?,
    };
    let mut report = ball_sizes(&s, n);
    if report.partial {
        return Err(Error::CapExceeded { what: "ball sizes".into(), reached: report.n_max(), cap: g.cap() });
    }
    let threshold = gap_threshold(n, c);
    let detected = gap_detect(&report, c).contains(&n);
    log(&format!("|S^{n}| = {}, threshold {threshold:.3}", report.sizes[n]));
    let mut result = json!({
        "n": n,
        "c": c,
        "alpha": alpha,
        "size_n": report.sizes[n],
        "threshold": threshold,
        "detected": detected,
        "detected_at": gap_detect(&report, c),
    });
    if let Some(path) = &cfg.csv {
        std::fs::write(path, report.to_csv(c)).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    }
    if !detected {
        result["report"] = report.to_json();
        return Ok(Done {
            result,
            verified: true,
            status: Status::Hypothesis,
            message: Some("gap not detected".into()),
        });
    }
    let need = scale_radius(n).max(n);
    report = ball_sizes(&s, need);
    result["report"] = report.to_json();
    match dyadic_scale(&report, n, c, alpha) {
        Ok(scale) => result["scale"] = serde_json::to_value(scale).expect("scale serializes"),
        Err(e) if classify(&e) == Status::Hypothesis => {
            result["scale"] = Value::Null;
            return Ok(Done { result, verified: true, status: Status::Hypothesis, message: Some(e.to_string()) });
        }
        Err(e) => return Err(e),
    }
    if cfg.certify.unwrap_or(false) {
        let fam = cfg.family(ctx)?;
        let cert = growth_certificate(&s, n, c, alpha, &fam)?;
        let verified = cert.structure.as_ref().is_none_or(|l| l.all_verified());
        result["certificate"] = cert.to_json();
        return Ok(Done::ok(result, verified));
    }
    Ok(Done::ok(result, true))
}

/// Re-checks a saved report. Set and chain certificates are parsed back and
/// verified from scratch; other commands are rerun on the embedded input and
/// must reproduce the stored result exactly.
fn verify(cfg: &RunConfig, verbose: u8) -> Result<Done> {
    let path = cfg.report.as_ref().ok_or_else(|| Error::Malformed("--report is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    let saved: Value = serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("report: {e}")))?;
    if saved.get("schema").and_then(Value::as_str) != Some(SCHEMA) {
        return Err(Error::Malformed(format!("report schema is not {SCHEMA}")));
    }
    let mut original: RunConfig = serde_json::from_value(saved["input"].clone())
        .map_err(|e| Error::Malformed(format!("report input: {e}")))?;
    original.verbose = Some(verbose);
    let cmd = original.check()?.to_string();
    if cmd == "verify" {
        return Err(Error::Malformed("cannot verify a verify report".into()));
    }
    let result = &saved["result"];
    let (method, reproduced) = match cmd.as_str() {
        "certify" if saved["status"] == "ok" => {
            let (ctx, _) = context(&original)?;
            let a = required_set(&original, &ctx)?;
            let cert = ApproxCertificate::from_json(&ctx, &a, result)?;
            cert.verify()?;
            ("reload", true)
        }
        "decompose" if saved["status"] == "ok" => {
            let (ctx, _) = context(&original)?;
            let a = required_set(&original, &ctx)?;
            let chain = ChainCertificate::from_json(&ctx, &a, result)?;
            ("reload", chain.all_verified())
        }
        _ => {
            let again = run(&original).report;
            let same = ["result", "verified", "status", "message"].iter().all(|k| again.get(*k) == saved.get(*k));
            ("recompute", same)
        }
    };
    let done = json!({ "command": cmd, "method": method, "reproduced": reproduced });
    if !reproduced {
        return Ok(Done {
            result: done,
            verified: false,
            status: Status::Bug,
            message: Some("report did not re-verify".into()),
        });
    }
    Ok(Done::ok(done, true))
}
