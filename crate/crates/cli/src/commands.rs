use std::fmt::Write as _;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use timecomp_core::criteria::{check_simple_criterion, render_text, LimitKind, Overall};
use timecomp_core::dynamics::{
    distance_to_orbit, find_limit_cycle, integrate_compactified, trace_integral, CycleOptions, FrozenField,
    Termination, Trajectory,
};
use timecomp_core::transform::{validate_hypotheses, CheckVerdict, HypothesisReport, TransformKind};
use timecomp_core::{check_ck, Boundary, CompactifiedField, CompactifyError, PeriodicOrbit, SmoothnessVerdict};

use crate::config::RunConfig;
use crate::output::OutputDir;

/// Process outcome, mapped onto the exit-code contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Usage,
    Negative,
    Inconclusive,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Usage => 1,
            Outcome::Negative => 2,
            Outcome::Inconclusive => 3,
        }
    }

    fn of(overall: &Overall) -> Self {
        match overall {
            Overall::CkExtensionHolds => Outcome::Pass,
            Overall::FailsAt { .. } => Outcome::Negative,
            Overall::InconclusiveAt { .. } => Outcome::Inconclusive,
        }
    }

    fn of_check(v: &CheckVerdict) -> Self {
        match v {
            CheckVerdict::Pass => Outcome::Pass,
            CheckVerdict::Fail(_) => Outcome::Negative,
            CheckVerdict::Inconclusive(_) => Outcome::Inconclusive,
        }
    }

    /// The worse of two outcomes: negative beats inconclusive beats pass.
    fn and(self, other: Outcome) -> Outcome {
        let rank = |o: Outcome| match o {
            Outcome::Pass => 0,
            Outcome::Inconclusive => 1,
            Outcome::Negative => 2,
            Outcome::Usage => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

fn hypotheses_text(h: &HypothesisReport) -> String {
    format!(
        "hypotheses:\n  smoothness: {}\n  monotonicity: {}\n  limits: {}\n  decay: {}\n",
        h.smoothness, h.monotonicity, h.limits, h.decay
    )
}

/// `check`: hypotheses, the `C^k` verdict and, for `Φ_m`, the simple criterion.
pub fn cmd_check(cfg: &RunConfig, out: &OutputDir) -> Result<Outcome> {
    cfg.validate()?;
    let sys = cfg.system_spec()?;
    let tr = cfg.transform_spec()?;
    let k = cfg.analysis.k;
    let opts = cfg.probe_options();

    let hyp = validate_hypotheses(&tr, k, &opts);
    let verdict = check_ck(&sys, &tr, k, &opts)?;
    let mut text = hypotheses_text(&hyp);
    text.push_str(&render_text(&verdict));
    let mut outcome = Outcome::of(&verdict.overall);

    let mut simple_json = serde_json::Value::Null;
    if let TransformKind::PhiM(p) = tr.kind() {
        let (simple, realized) = check_simple_criterion(&sys, p.m, k, &opts)?;
        text.push_str("\nsimple criterion:\n");
        text.push_str(&render_text(&simple));
        // the criterion certifies the extension through the spliced transform
        if simple.holds() {
            outcome = Outcome::Pass;
        }
        simple_json = json!({
            "verdict": simple,
            "realizing_transform": realized.as_ref().and_then(|t| t.pieces()),
        });
    }
    outcome = outcome.and(Outcome::of_check(&hyp.smoothness)).and(Outcome::of_check(&hyp.monotonicity));
    if !matches!(tr.kind(), TransformKind::PhiM(_)) {
        outcome = outcome.and(Outcome::of_check(&hyp.limits));
    }
    let _ = writeln!(text, "exit status: {}", outcome.code());

    out.write("check.txt", &text)?;
    let doc = json!({
        "hypotheses": hyp,
        "verdict": verdict,
        "simple_criterion": simple_json,
        "exit_status": outcome.code(),
    });
    out.write("check.json", &serde_json::to_string_pretty(&doc)?)?;
    print!("{text}");
    Ok(outcome)
}

fn build_field(cfg: &RunConfig, force: bool) -> Result<std::result::Result<CompactifiedField, CompactifyError>> {
    cfg.validate()?;
    let sys = cfg.system_spec()?;
    let tr = cfg.transform_spec()?;
    let k = cfg.analysis.k;
    let opts = cfg.probe_options();
    let force = force || cfg.simulate.force;
    let built = match (cfg.transform.t_plus, cfg.transform.t_minus) {
        (Some(_), None) => CompactifiedField::build_one_sided(&sys, &tr, k, Boundary::Plus, force, &opts),
        (None, Some(_)) => CompactifiedField::build_one_sided(&sys, &tr, k, Boundary::Minus, force, &opts),
        _ => CompactifiedField::build(&sys, &tr, k, force, &opts),
    };
    Ok(built)
}

fn refused(e: &CompactifyError) -> Outcome {
    eprintln!("field build refused: {e}");
    match e {
        CompactifyError::Refused { .. } => Outcome::Negative,
        _ => Outcome::Usage,
    }
}

fn run_batch(field: &CompactifiedField, cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    let n = field.system().state_dim();
    cfg.simulate
        .initial
        .par_iter()
        .map(|row| {
            integrate_compactified(field, &row[..n], row[n], cfg.simulate.span, cfg.simulate.tol)
                .with_context(|| format!("initial condition {row:?}"))
        })
        .collect()
}

fn write_trajectories(out: &OutputDir, trajs: &[Trajectory]) -> Result<Vec<serde_json::Value>> {
    trajs
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            let name = format!("trajectory_{i:03}.csv");
            out.write(&name, &tr.to_csv())?;
            Ok(json!({
                "file": name,
                "initial": tr.states[0],
                "final": tr.final_state(),
                "final_time": tr.final_time(),
                "termination": tr.termination,
                "saturated_at": tr.saturated_at,
                "accepted_steps": tr.accepted_steps,
                "rejected_steps": tr.rejected_steps,
            }))
        })
        .collect()
}

/// `simulate`: integrates every configured initial condition.
pub fn cmd_simulate(cfg: &RunConfig, out: &OutputDir, force: bool) -> Result<Outcome> {
    let field = match build_field(cfg, force)? {
        Ok(f) => f,
        Err(e) => return Ok(refused(&e)),
    };
    let trajs = run_batch(&field, cfg)?;
    let entries = write_trajectories(out, &trajs)?;
    let manifest = json!({
        "field": field.describe(),
        "span": cfg.simulate.span,
        "tol": cfg.simulate.tol,
        "trajectories": entries,
    });
    out.write("manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    let failed: Vec<usize> = trajs
        .iter()
        .enumerate()
        .filter(|(_, t)| matches!(t.termination, Termination::StepFailure(_)))
        .map(|(i, _)| i)
        .collect();
    println!("wrote {} trajectories to {}", trajs.len(), out.root().display());
    if field.forced() {
        println!("warning: the field was forced over a verdict that does not hold");
    }
    if !failed.is_empty() {
        eprintln!("step failure in trajectories {failed:?}");
        return Ok(Outcome::Usage);
    }
    Ok(Outcome::Pass)
}

fn locate_cycle(field: &CompactifiedField, cfg: &RunConfig) -> Result<(Boundary, PeriodicOrbit)> {
    let c = cfg.cycle.as_ref().context("the configuration has no [cycle] block")?;
    let side: Boundary = c.side.into();
    let mut opts = CycleOptions::default();
    if let Some(t) = c.transient {
        opts.transient = t;
    }
    let orbit = find_limit_cycle(field, side, &c.seed, c.normal.as_deref(), &opts)?;
    Ok((side, orbit))
}

fn cycle_summary(field: &CompactifiedField, side: Boundary, orbit: &PeriodicOrbit) -> Result<serde_json::Value> {
    let frozen = FrozenField {
        system: field.system(),
        mu: field.forcing_limit(side).context("no forcing limit on this side")?.to_vec(),
    };
    let liouville = trace_integral(&frozen, orbit)?.exp();
    let product: f64 = orbit
        .normal_multipliers
        .iter()
        .fold(orbit.trivial_multiplier, |acc, z| acc * z)
        .re;
    Ok(json!({
        "side": side,
        "anchor": orbit.anchor,
        "period": orbit.period,
        "residual": orbit.residual,
        "floquet_multipliers": orbit.floquet_multipliers(),
        "normal_multipliers": orbit.normal_multipliers,
        "trivial_multiplier": orbit.trivial_multiplier,
        "center_multiplier": orbit.center_multiplier,
        "normally_stable": orbit.normally_stable(),
        "multiplier_product": product,
        "liouville_exp_trace_integral": liouville,
        "max_abs_x1": orbit.max_amplitude(0),
    }))
}

/// `find-cycle`: the periodic orbit of a limit system.
pub fn cmd_find_cycle(cfg: &RunConfig, out: &OutputDir, force: bool) -> Result<Outcome> {
    let field = match build_field(cfg, force)? {
        Ok(f) => f,
        Err(e) => return Ok(refused(&e)),
    };
    let (side, orbit) = match locate_cycle(&field, cfg) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("{e:#}");
            return Ok(Outcome::Negative);
        }
    };
    out.write("cycle.csv", &orbit.to_csv())?;
    let summary = cycle_summary(&field, side, &orbit)?;
    out.write("cycle.json", &serde_json::to_string_pretty(&summary)?)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(Outcome::Pass)
}

#[derive(Debug, Clone, Serialize)]
pub struct StageResult {
    pub stage: String,
    pub outcome: Option<Outcome>,
    pub detail: String,
}

struct Stages {
    list: Vec<StageResult>,
    stopped: Option<Outcome>,
}

impl Stages {
    fn record(&mut self, stage: &str, outcome: Outcome, detail: String) -> bool {
        self.list.push(StageResult {
            stage: stage.into(),
            outcome: Some(outcome),
            detail,
        });
        if outcome != Outcome::Pass && self.stopped.is_none() {
            self.stopped = Some(outcome);
        }
        self.stopped.is_none()
    }

    fn skip(&mut self, stage: &str) {
        self.list.push(StageResult {
            stage: stage.into(),
            outcome: None,
            detail: "skipped".into(),
        });
    }
}

fn compare_limits(v: &SmoothnessVerdict, expected: &[Vec<f64>], tol: f64) -> (Outcome, String) {
    let mut msgs = Vec::new();
    let mut outcome = Outcome::Pass;
    for o in &v.per_order {
        let Some(row) = expected.get(o.n - 1) else { continue };
        for (which, p) in o.gating() {
            let idx = match which.kind {
                LimitKind::G => 0,
                LimitKind::Mu(i) => i + 1,
                LimitKind::GViaH => continue,
            };
            let Some(&want) = row.get(idx) else { continue };
            match p.value() {
                Some(got) if (got - want).abs() <= tol => {
                    msgs.push(format!("n={} {which}: {got:.8} (expected {want})", o.n))
                }
                Some(got) => {
                    outcome = outcome.and(Outcome::Negative);
                    msgs.push(format!("n={} {which}: {got:.8} differs from {want} by more than {tol:e}", o.n));
                }
                None => {
                    outcome = outcome.and(Outcome::Inconclusive);
                    msgs.push(format!("n={} {which}: {}", o.n, p.verdict));
                }
            }
        }
    }
    (outcome, msgs.join("; "))
}

/// `verify-example`: the full pipeline, stage by stage.
pub fn cmd_verify_example(cfg: &RunConfig, out: &OutputDir, force: bool) -> Result<Outcome> {
    cfg.validate()?;
    let sys = cfg.system_spec()?;
    let tr = cfg.transform_spec()?;
    let k = cfg.analysis.k;
    let opts = cfg.probe_options();
    let verify = cfg.verify.clone().unwrap_or(crate::config::VerifyBlock {
        expected_limits: Vec::new(),
        limit_tolerance: 1e-4,
        distance_threshold: 1e-3,
    });
    let mut st = Stages {
        list: Vec::new(),
        stopped: None,
    };
    let names = ["hypotheses", "ck-check", "field-build", "limit-cycle", "integration", "distance"];

    let hyp = validate_hypotheses(&tr, k, &opts);
    let hyp_outcome = Outcome::of_check(&hyp.smoothness)
        .and(Outcome::of_check(&hyp.monotonicity))
        .and(Outcome::of_check(&hyp.limits))
        .and(Outcome::of_check(&hyp.decay));
    let mut go = st.record(names[0], hyp_outcome, hypotheses_text(&hyp).trim_end().replace('\n', "; "));

    let mut field = None;
    if go {
        let verdict = check_ck(&sys, &tr, k, &opts)?;
        let (lim_outcome, lim_detail) = compare_limits(&verdict, &verify.expected_limits, verify.limit_tolerance);
        out.write("verify_check.txt", &render_text(&verdict))?;
        go = st.record(
            names[1],
            Outcome::of(&verdict.overall).and(lim_outcome),
            format!("{:?}; {lim_detail}", verdict.overall),
        );
    }
    if go {
        match build_field(cfg, force)? {
            Ok(f) => {
                go = st.record(names[2], Outcome::Pass, format!("forced = {}", f.forced()));
                field = Some(f);
            }
            Err(e) => go = st.record(names[2], Outcome::Negative, e.to_string()),
        }
    }
    let mut cycle = None;
    if go {
        let f = field.as_ref().expect("built");
        match locate_cycle(f, cfg) {
            Ok((side, orbit)) => {
                let summary = cycle_summary(f, side, &orbit)?;
                out.write("cycle.csv", &orbit.to_csv())?;
                out.write("cycle.json", &serde_json::to_string_pretty(&summary)?)?;
                let ok = if orbit.normally_stable() {
                    Outcome::Pass
                } else {
                    Outcome::Negative
                };
                go = st.record(
                    names[3],
                    ok,
                    format!(
                        "period {:.6}, multipliers {:?}",
                        orbit.period,
                        orbit.floquet_multipliers().iter().map(|z| z.re).collect::<Vec<_>>()
                    ),
                );
                cycle = Some(orbit);
            }
            Err(e) => go = st.record(names[3], Outcome::Negative, format!("{e:#}")),
        }
    }
    let mut trajs = Vec::new();
    if go {
        let f = field.as_ref().expect("built");
        trajs = run_batch(f, cfg)?;
        write_trajectories(out, &trajs)?;
        let bad = trajs.iter().filter(|t| t.termination != Termination::SpanEnd).count();
        go = st.record(
            names[4],
            if bad == 0 { Outcome::Pass } else { Outcome::Negative },
            format!("{} trajectories, {bad} ended early", trajs.len()),
        );
    }
    if go {
        let orbit = cycle.as_ref().expect("located");
        let n = sys.state_dim();
        let mut msgs = Vec::new();
        let mut outcome = Outcome::Pass;
        for (i, t) in trajs.iter().enumerate() {
            let x0 = &t.states[0][..n];
            if x0.iter().all(|v| *v == 0.0) {
                let drift = t.states.iter().map(|y| y[..n].iter().map(|v| v.abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
                if drift > 1e-12 {
                    outcome = Outcome::Negative;
                }
                msgs.push(format!("#{i} origin: max |x| = {drift:e}"));
                continue;
            }
            let d = distance_to_orbit(t, orbit, 0.0);
            match settling_time(&d, verify.distance_threshold) {
                Some(ts) => msgs.push(format!("#{i} below {:e} from t = {ts:.1}", verify.distance_threshold)),
                None => {
                    outcome = Outcome::Negative;
                    msgs.push(format!("#{i} does not settle below {:e}", verify.distance_threshold));
                }
            }
        }
        st.record(names[5], outcome, msgs.join("; "));
    }
    for name in names.iter().skip(st.list.len()) {
        st.skip(name);
    }
    let overall = st.stopped.unwrap_or(Outcome::Pass);
    let mut text = String::new();
    for s in &st.list {
        let status = match s.outcome {
            Some(Outcome::Pass) => "PASS",
            Some(Outcome::Inconclusive) => "INCONCLUSIVE",
            Some(_) => "FAIL",
            None => "SKIPPED",
        };
        let _ = writeln!(text, "[{status}] {}: {}", s.stage, s.detail);
    }
    if let Some(failed) = st.list.iter().find(|s| matches!(s.outcome, Some(o) if o != Outcome::Pass)) {
        let _ = writeln!(text, "stopped at stage {}", failed.stage);
    }
    let _ = writeln!(text, "exit status: {}", overall.code());
    out.write("summary.txt", &text)?;
    out.write(
        "summary.json",
        &serde_json::to_string_pretty(&json!({"stages": st.list, "exit_status": overall.code()}))?,
    )?;
    print!("{text}");
    Ok(overall)
}

/// First sample time after which every distance stays below `threshold`.
pub fn settling_time(d: &[(f64, f64)], threshold: f64) -> Option<f64> {
    let first = match d.iter().rposition(|(_, v)| *v >= threshold) {
        Some(last_above) => last_above + 1,
        None => 0,
    };
    d.get(first).map(|(t, _)| *t)
}

/// `emit-plots`: trajectories, the cycle, and a gnuplot script over them.
pub fn cmd_emit_plots(cfg: &RunConfig, out: &OutputDir, force: bool) -> Result<Outcome> {
    let field = match build_field(cfg, force)? {
        Ok(f) => f,
        Err(e) => return Ok(refused(&e)),
    };
    let trajs = run_batch(&field, cfg)?;
    write_trajectories(out, &trajs)?;
    let have_cycle = match cfg.cycle.as_ref().map(|_| locate_cycle(&field, cfg)) {
        Some(Ok((_, orbit))) => {
            out.write("cycle.csv", &orbit.to_csv())?;
            true
        }
        Some(Err(e)) => {
            eprintln!("no cycle for the plot: {e:#}");
            false
        }
        None => false,
    };
    let n = field.system().state_dim();
    let script = gnuplot_script(trajs.len(), n, have_cycle);
    out.write("plots.gp", &script)?;
    println!("wrote plots.gp and {} trajectories to {}", trajs.len(), out.root().display());
    Ok(Outcome::Pass)
}

fn gnuplot_script(count: usize, n: usize, cycle: bool) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot -p plots.gp\nset datafile separator ','\nset key off\n");
    s.push_str("set terminal pngcairo size 1200,900\n");
    if n >= 2 {
        s.push_str("set output 'phase.png'\nset xlabel 'x1'\nset ylabel 'x2'\nplot \\\n");
        let mut lines: Vec<String> = (0..count)
            .map(|i| format!("  'trajectory_{i:03}.csv' using 2:3 with lines lw 1"))
            .collect();
        if cycle {
            lines.push("  'cycle.csv' using 2:3 with lines lw 3 lc rgb 'black'".into());
        }
        s.push_str(&lines.join(", \\\n"));
        s.push('\n');
        s.push_str("set output 'extended.png'\nset zlabel 's'\nsplot \\\n");
        let lines: Vec<String> = (0..count)
            .map(|i| format!("  'trajectory_{i:03}.csv' using 2:3:{} with lines", n + 2))
            .collect();
        s.push_str(&lines.join(", \\\n"));
        s.push('\n');
    }
    s.push_str("set output 's_clock.png'\nset xlabel 't'\nset ylabel 's'\nset logscale x\nplot \\\n");
    let lines: Vec<String> = (0..count)
        .map(|i| format!("  'trajectory_{i:03}.csv' using ($1+1):{} with lines", n + 2))
        .collect();
    s.push_str(&lines.join(", \\\n"));
    s.push('\n');
    s
}
