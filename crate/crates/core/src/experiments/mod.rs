//! Experiment commands: phase analysis, nested simulation, the `r` sweep,
//! trap census, simplicity series and oracle self-tests.
//!
//! Every command validates its config before computing, writes the resolved
//! config and a seed manifest next to its CSV tables, and ends with
//! `summary.json`. Replicas run on the rayon pool; results are collected in
//! task order, so thread count never changes an output value.

pub mod config;
pub mod oracle;
pub mod output;

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bias::BiasDistribution;
use crate::error::{Error, Result};
use crate::families::{canonical, figure2_base, figure2_child};
use crate::phase::{classify, example13_root, simplicity_series, solve_root, PhaseReport, SeriesHint, ROOT_TOL};
use crate::regeneration::{regenerations, trap_events_multi, trap_scaling, RegenerationRecord};
use crate::rng::{PURPOSE_CHECK, PURPOSE_FIXTURE, PURPOSE_WALK};
use crate::stats::{median, z_for};
use crate::trace::WalkPath;
use crate::walk::{base_root, nested_simulate, simulate_level0, velocity_estimate, NestedRun, SimulationConfig};

use config::{ExperimentConfig, Family, Kind};
use output::{fmt_f64, fmt_vec, OutputDir, SeedManifest};

/// Process exit status of a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Ok = 0,
    Validation = 1,
    OracleFailure = 2,
    BudgetExhausted = 3,
}

/// Maps an error to its exit status.
pub fn status_for(err: &Error) -> Status {
    match err {
        Error::BudgetExhausted { .. } => Status::BudgetExhausted,
        _ => Status::Validation,
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub summary: Value,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

/// Runs `kind` with `cfg`, writing outputs under `out`.
pub fn run(kind: Kind, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    if let Some(k) = cfg.kind {
        if k != kind {
            return Err(Error::Config(format!(
                "config kind {} does not match subcommand {}",
                k.name(),
                kind.name()
            )));
        }
    }
    cfg.validate()?;
    let mut resolved = cfg.clone();
    resolved.kind = Some(kind);
    let dir = OutputDir::create(out)?;
    dir.write_config(&resolved)?;
    let outcome = match kind {
        Kind::Analyze => cmd_analyze(&resolved, &dir)?,
        Kind::Simulate => cmd_simulate(&resolved, &dir)?,
        Kind::SweepR => cmd_sweep_r(&resolved, &dir)?,
        Kind::TrapCensus => cmd_trap_census(&resolved, &dir)?,
        Kind::Simplicity => cmd_simplicity(&resolved, &dir)?,
        Kind::OracleTest => cmd_oracle_test(&resolved, &dir)?,
    };
    let mut summary = outcome.summary.clone();
    summary["kind"] = json!(kind.name());
    summary["status"] = json!(outcome.status as i32);
    dir.write_summary(&summary)?;
    Ok(Outcome { summary, ..outcome })
}

// ---------------------------------------------------------------- analyze

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeRecord {
    pub label: String,
    pub report: PhaseReport,
    /// Closed-form root for canonical pairs.
    pub closed_form_t: Option<f64>,
    /// Ballistic according to `k_i(γ_i − 1) < min(k_i, k_0)(γ_0 − 1)`.
    pub inequality_ballistic: Option<bool>,
}

pub const CANONICAL_GAMMAS: [f64; 4] = [1.1, 1.5, 2.0, 3.0];

/// Phase records for the configured pairs or grid.
pub fn analyze_records(cfg: &ExperimentConfig) -> Result<Vec<AnalyzeRecord>> {
    let tol = cfg.analyze.critical_tol;
    let mut out = Vec::new();
    match cfg.analyze.grid.as_str() {
        "canonical-grid" => {
            for d in 2..=4 {
                for k0 in 1..=d {
                    for ki in 1..=d {
                        for &g0 in &CANONICAL_GAMMAS {
                            for &gi in &CANONICAL_GAMMAS {
                                let report = classify(&canonical(d, k0, g0)?, &canonical(d, ki, gi)?, tol)?;
                                let lhs = ki as f64 * (gi - 1.0);
                                let rhs = ki.min(k0) as f64 * (g0 - 1.0);
                                out.push(AnalyzeRecord {
                                    label: format!("d={d} k0={k0} ki={ki} gamma0={g0} gammai={gi}"),
                                    report,
                                    closed_form_t: Some(example13_root(d, k0, ki, g0, gi)?),
                                    inequality_ballistic: (lhs != rhs).then_some(lhs < rhs),
                                });
                            }
                        }
                    }
                }
            }
        }
        "figure2-grid" => {
            let p0 = figure2_base();
            for &r in &cfg.analyze.r_values {
                out.push(AnalyzeRecord {
                    label: format!("r={r}"),
                    report: classify(&p0, &figure2_child(r)?, tol)?,
                    closed_form_t: None,
                    inequality_ballistic: None,
                });
            }
        }
        _ => {
            let seq = cfg.bias.resolve()?;
            for (i, pi) in seq.iter().enumerate().skip(1) {
                out.push(AnalyzeRecord {
                    label: format!("level {i}"),
                    report: classify(&seq[0], pi, tol)?,
                    closed_form_t: None,
                    inequality_ballistic: None,
                });
            }
        }
    }
    Ok(out)
}

fn cmd_analyze(cfg: &ExperimentConfig, dir: &OutputDir) -> Result<Outcome> {
    let records = analyze_records(cfg)?;
    dir.write_manifest(&SeedManifest::new(cfg.seed))?;
    let mut header: Vec<String> = vec!["label".into()];
    if let Some(r) = records.first() {
        header.extend(r.report.to_records().into_iter().map(|(k, _)| k));
    }
    header.push("closed_form_t".into());
    header.push("inequality_ballistic".into());
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![r.label.clone()];
            row.extend(r.report.to_records().into_iter().map(|(_, v)| v));
            row.push(r.closed_form_t.map(fmt_f64).unwrap_or_else(|| "NA".into()));
            row.push(r.inequality_ballistic.map(|b| b.to_string()).unwrap_or_else(|| "NA".into()));
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.write_csv("analyze.csv", &header_refs, &rows)?;

    let mut lines = Vec::new();
    for r in &records {
        lines.push(format!("[{}]", r.label));
        lines.extend(r.report.to_records().into_iter().map(|(k, v)| format!("{k}={v}")));
    }
    let mismatches = records
        .iter()
        .filter(|r| match r.inequality_ballistic {
            Some(b) => b != (r.report.phase == crate::phase::Phase::Ballistic),
            None => false,
        })
        .count();
    let max_root_error = records
        .iter()
        .filter_map(|r| Some((r.closed_form_t? - r.report.t?).abs()))
        .fold(0.0, f64::max);
    // In the `figure2` family β = r, so the critical r is α.
    let critical_r = (cfg.analyze.grid == "figure2-grid")
        .then(|| records.iter().find_map(|r| r.report.alpha))
        .flatten();
    if let Some(a) = critical_r {
        lines.push(format!("critical r (beta = alpha) = {a}"));
    }
    let summary = json!({
        "records": records.len(),
        "phases": records.iter().map(|r| json!({"label": r.label, "phase": r.report.phase.to_string(), "alpha": r.report.alpha, "beta": r.report.beta, "t": r.report.t})).collect::<Vec<_>>(),
        "inequality_mismatches": mismatches,
        "max_closed_form_root_error": max_root_error,
        "critical_r": critical_r,
    });
    Ok(Outcome {
        status: Status::Ok,
        summary,
        lines,
    })
}

// ---------------------------------------------------------------- simulate

/// Builds the simulator config for `replica` from the simulate section.
pub fn simulation_config(
    cfg: &ExperimentConfig,
    biases: Vec<BiasDistribution>,
    budgets: Vec<u64>,
    replica: u64,
) -> Result<SimulationConfig> {
    let mut sim = SimulationConfig::new(biases, budgets, cfg.seed)?;
    if let Some(h) = cfg.simulate.h_la {
        sim.h_la = h;
    }
    sim.eps_trunc = cfg.simulate.eps_trunc;
    sim.eps_total = cfg.simulate.eps_total;
    sim.mode = cfg.simulate.mode;
    sim.audit_kernel = cfg.simulate.audit_kernel;
    sim.replica = replica;
    sim.validate()?;
    Ok(sim)
}

/// Runs `replicas` independent nested simulations in parallel, in replica order.
pub fn run_replicas(template: &SimulationConfig, replicas: u64) -> Vec<Result<NestedRun>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut c = template.clone();
            c.replica = r;
            nested_simulate(&c)
        })
        .collect()
}

fn cmd_simulate(cfg: &ExperimentConfig, dir: &OutputDir) -> Result<Outcome> {
    let biases = cfg.bias.resolve()?;
    let budgets = cfg.simulate.budgets.clone();
    let template = simulation_config(cfg, biases.clone(), budgets, 0)?;
    let levels = biases.len();
    let mut manifest = SeedManifest::new(cfg.seed);
    for r in 0..cfg.replicas {
        for l in 0..levels {
            manifest.add(format!("replica {r} level {l}"), PURPOSE_WALK, r, l as u8);
        }
    }
    dir.write_manifest(&manifest)?;
    let runs = run_replicas(&template, cfg.replicas);
    let drift0 = biases[0].drift().0;
    let header = [
        "replica",
        "level",
        "steps",
        "vertices",
        "edges",
        "endpoint",
        "velocity",
        "v_e1",
        "angle_to_drift0_deg",
        "regenerations",
        "stopped_at_frontier",
    ];
    let mut rows = Vec::new();
    let mut cp_rows = Vec::new();
    let mut replicas = Vec::new();
    let mut exhausted = Vec::new();
    let mut nesting_ok = true;
    let mut unsettled = 0;
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        if let Some((level, steps)) = run.exhausted {
            exhausted.push(json!({"replica": r, "level": level, "steps": steps}));
        }
        nesting_ok &= run.nesting_holds();
        unsettled += run.unsettled_consultations;
        for (l, lr) in run.levels.iter().enumerate() {
            let v = velocity_estimate(&lr.path, cfg.simulate.burn_in, Some(&drift0)).ok();
            rows.push(vec![
                r.to_string(),
                l.to_string(),
                lr.path.len().to_string(),
                lr.graph.vertex_count().to_string(),
                lr.graph.edge_count().to_string(),
                lr.path.endpoint().to_string(),
                v.as_ref().map(|v| fmt_vec(&v.velocity)).unwrap_or_else(|| "NA".into()),
                v.as_ref().map(|v| fmt_f64(v.velocity[0])).unwrap_or_else(|| "NA".into()),
                v.as_ref().and_then(|v| v.angle_deg).map(fmt_f64).unwrap_or_else(|| "NA".into()),
                lr.regenerations.len().to_string(),
                lr.stopped_at_frontier.to_string(),
            ]);
            if cfg.simulate.dump_traces {
                let f = std::fs::File::create(dir.path(&format!("trace_r{r}_l{l}.bin")))?;
                lr.graph.dump(std::io::BufWriter::new(f))?;
            }
        }
        let deepest = run.deepest();
        for &n in &cfg.simulate.checkpoints {
            if n as usize <= deepest.path.len() {
                let v = velocity_estimate(&deepest.path.prefix(n as usize), cfg.simulate.burn_in, Some(&drift0))?;
                cp_rows.push(vec![r.to_string(), n.to_string(), fmt_vec(&v.velocity), fmt_f64(v.velocity[0])]);
            }
        }
        replicas.push(json!({
            "replica": r,
            "certifications": run.certifications.len(),
            "total_error_budget": run.total_error_budget,
            "within_eps_total": run.total_error_budget <= run.eps_total,
            "nesting_holds": run.nesting_holds(),
        }));
    }
    dir.write_csv("simulate.csv", &header, &rows)?;
    if !cfg.simulate.checkpoints.is_empty() {
        dir.write_csv("checkpoints.csv", &["replica", "n", "velocity", "v_e1"], &cp_rows)?;
    }
    let status = if exhausted.is_empty() {
        Status::Ok
    } else {
        Status::BudgetExhausted
    };
    let lines = rows.iter().map(|r| r.join(",")).collect();
    Ok(Outcome {
        status,
        summary: json!({
            "replicas": replicas,
            "nesting_holds": nesting_ok,
            "unsettled_consultations": unsettled,
            "budget_exhausted": exhausted,
        }),
        lines,
    })
}

// ---------------------------------------------------------------- sweep-r

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub replica: u64,
    pub n: u64,
    pub v_e1: f64,
    pub ci_half_width: f64,
    pub angle_deg: Option<f64>,
    pub parent_steps: usize,
    /// Whether the child trace is a subgraph of the parent trace.
    pub nested: bool,
}

/// Half-width of a batch-means interval for the mean `e_1` increment over `moves`.
pub fn batch_means_half_width(path: &WalkPath, from: usize, to: usize, batches: usize, confidence: f64) -> f64 {
    let len = (to - from) / batches;
    if len == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let seg = &path.moves()[from + b * len..from + (b + 1) * len];
            seg.iter().filter(|d| d.axis() == 0).map(|d| d.sign() as f64).sum::<f64>() / len as f64
        })
        .collect();
    let m = crate::stats::mean(&means);
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    z_for(confidence) * (var / batches as f64).sqrt()
}

/// Nested `figure2` run at `r` for one replica, reported at each checkpoint.
pub fn sweep_point(cfg: &ExperimentConfig, r: f64, replica: u64) -> Result<Vec<SweepRow>> {
    let s = &cfg.sweep;
    let biases = vec![figure2_base(), figure2_child(r)?];
    let drift0 = biases[0].drift().0;
    let sim = simulation_config(cfg, biases, vec![s.parent_cap, s.child_steps], replica)?;
    let run = nested_simulate(&sim)?;
    run.check_complete()?;
    let child = &run.levels[1].path;
    let nested = run.nesting_holds();
    s.checkpoints
        .iter()
        .map(|&n| {
            let prefix = child.prefix(n as usize);
            let v = velocity_estimate(&prefix, s.burn_in, Some(&drift0))?;
            Ok(SweepRow {
                r,
                replica,
                n,
                v_e1: v.velocity[0],
                ci_half_width: batch_means_half_width(&prefix, v.from, v.to, s.batches, s.confidence),
                angle_deg: v.angle_deg,
                parent_steps: run.levels[0].path.len(),
                nested,
            })
        })
        .collect()
}

fn cmd_sweep_r(cfg: &ExperimentConfig, dir: &OutputDir) -> Result<Outcome> {
    let s = &cfg.sweep;
    let p0 = figure2_base();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for &r in &s.r_values {
        let report = figure2_child(r).and_then(|pi| classify(&p0, &pi, crate::phase::CRITICAL_TOL));
        match report {
            Ok(rep) if rep.condition1.holds() => accepted.push((r, rep)),
            Ok(rep) => rejected.push(json!({"r": r, "beta": rep.beta, "diagnostics": rep.condition1.diagnostics})),
            Err(e) => rejected.push(json!({"r": r, "diagnostics": [e.to_string()]})),
        }
    }
    let mut manifest = SeedManifest::new(cfg.seed);
    for r in 0..cfg.replicas {
        manifest.add(format!("replica {r} level 0"), PURPOSE_WALK, r, 0);
        manifest.add(format!("replica {r} level 1"), PURPOSE_WALK, r, 1);
    }
    dir.write_manifest(&manifest)?;
    let tasks: Vec<(f64, u64)> = accepted.iter().flat_map(|(r, _)| (0..cfg.replicas).map(move |k| (*r, k))).collect();
    let results: Vec<(f64, u64, Result<Vec<SweepRow>>)> = tasks.par_iter().map(|&(r, k)| (r, k, sweep_point(cfg, r, k))).collect();
    let mut rows = Vec::new();
    let mut exhausted = Vec::new();
    let mut all: Vec<SweepRow> = Vec::new();
    for (r, k, res) in results {
        match res {
            Ok(v) => all.extend(v),
            Err(Error::BudgetExhausted { level, steps }) => {
                exhausted.push(json!({"r": r, "replica": k, "level": level, "steps": steps}));
                rows.push(vec![
                    fmt_f64(r),
                    k.to_string(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    "budget-exhausted".into(),
                ]);
            }
            Err(e) => return Err(e),
        }
    }
    for row in &all {
        rows.push(vec![
            fmt_f64(row.r),
            row.replica.to_string(),
            fmt_f64(row.v_e1),
            fmt_f64(row.ci_half_width),
            row.n.to_string(),
            row.angle_deg.map(fmt_f64).unwrap_or_else(|| "NA".into()),
            row.parent_steps.to_string(),
            row.nested.to_string(),
            "ok".into(),
        ]);
    }
    dir.write_csv(
        "sweep.csv",
        &[
            "r",
            "replica",
            "v_e1",
            "ci_half_width",
            "steps",
            "angle_deg",
            "parent_steps",
            "nested",
            "status",
        ],
        &rows,
    )?;
    let mut points = Vec::new();
    let mut lines = Vec::new();
    for (r, rep) in &accepted {
        let medians: Vec<(u64, f64)> = s
            .checkpoints
            .iter()
            .map(|&n| {
                let v: Vec<f64> = all.iter().filter(|x| x.r == *r && x.n == n).map(|x| x.v_e1).collect();
                (n, if v.is_empty() { f64::NAN } else { median(&v) })
            })
            .collect();
        let decreasing = medians.windows(2).all(|w| w[1].1 < w[0].1);
        lines.push(format!(
            "r={r} phase={} medians={}",
            rep.phase,
            medians.iter().map(|(n, m)| format!("{n}:{m:.5}")).collect::<Vec<_>>().join(" ")
        ));
        points.push(json!({
            "r": r,
            "phase": rep.phase.to_string(),
            "alpha": rep.alpha,
            "beta": rep.beta,
            "median_v_e1": medians.iter().map(|(n, m)| json!({"n": n, "median": m})).collect::<Vec<_>>(),
            "median_decreasing_in_n": decreasing,
        }));
    }
    for r in &rejected {
        lines.push(format!("rejected {r}"));
    }
    Ok(Outcome {
        status: if exhausted.is_empty() {
            Status::Ok
        } else {
            Status::BudgetExhausted
        },
        summary: json!({"points": points, "rejected": rejected, "budget_exhausted": exhausted}),
        lines,
    })
}

// ---------------------------------------------------------------- trap-census

#[derive(Clone, Debug, Serialize)]
pub struct TrapFrequency {
    pub h: i64,
    pub blocks: usize,
    pub traps: usize,
    pub frequency: f64,
    /// `−log P̂ / h`.
    pub rate: f64,
}

/// Pooled trap frequencies over base-walk replicas, in trap direction `ell`.
pub fn trap_frequencies(
    ensemble: &[(WalkPath, RegenerationRecord)],
    ell: &[f64],
    heights: &[i64],
) -> Result<(Vec<TrapFrequency>, Vec<Vec<(usize, usize)>>)> {
    let per: Vec<Vec<(usize, usize)>> = ensemble
        .par_iter()
        .map(|(path, rec)| {
            Ok(trap_events_multi(path, rec, ell, heights)?
                .into_iter()
                .map(|c| (c.blocks.len(), c.count()))
                .collect())
        })
        .collect::<Result<_>>()?;
    let pooled = heights
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let blocks: usize = per.iter().map(|v| v[k].0).sum();
            let traps: usize = per.iter().map(|v| v[k].1).sum();
            let frequency = traps as f64 / blocks.max(1) as f64;
            TrapFrequency {
                h,
                blocks,
                traps,
                frequency,
                rate: -frequency.ln() / h as f64,
            }
        })
        .collect();
    Ok((pooled, per))
}

/// Base walks with offline regeneration records in direction `e_1`.
pub fn base_ensemble(p0: &BiasDistribution, steps: u64, h_la: f64, seed: u64, replicas: u64) -> Vec<(WalkPath, RegenerationRecord)> {
    let mut e1 = vec![0.0; p0.dim()];
    e1[0] = 1.0;
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::rng::walk_stream(seed, r, 0);
            let path = simulate_level0(p0, steps as usize, &mut rng);
            let rec = regenerations(&path, &e1, h_la);
            (path, rec)
        })
        .collect()
}

fn cmd_trap_census(cfg: &ExperimentConfig, dir: &OutputDir) -> Result<Outcome> {
    let seq = cfg.bias.resolve()?;
    let (p0, pi) = (&seq[0], &seq[1]);
    let lo = pi.log_odds()?;
    let ell = lo.require_unit()?.to_vec();
    let t = solve_root(p0, &ell, ROOT_TOL)?;
    let t0 = base_root(p0)?;
    let h_la = cfg.trap.h_la.unwrap_or(40.0 / t0);
    let mut manifest = SeedManifest::new(cfg.seed);
    for r in 0..cfg.replicas {
        manifest.add(format!("base walk replica {r}"), PURPOSE_WALK, r, 0);
    }
    dir.write_manifest(&manifest)?;
    let ensemble = base_ensemble(p0, cfg.trap.steps, h_la, cfg.seed, cfg.replicas);
    let (pooled, per) = trap_frequencies(&ensemble, &ell, &cfg.trap.heights)?;
    let mut rows = Vec::new();
    for (r, v) in per.iter().enumerate() {
        for (k, &(blocks, traps)) in v.iter().enumerate() {
            rows.push(vec![
                r.to_string(),
                cfg.trap.heights[k].to_string(),
                blocks.to_string(),
                traps.to_string(),
                fmt_f64(traps as f64 / blocks.max(1) as f64),
            ]);
        }
    }
    dir.write_csv("trap_census.csv", &["replica", "h", "blocks", "traps", "frequency"], &rows)?;
    let scaling = match trap_scaling(&ensemble, &ell, cfg.trap.n, cfg.trap.epsilon, t) {
        Ok(s) => {
            let srows: Vec<Vec<String>> = s
                .counts
                .iter()
                .enumerate()
                .map(|(r, c)| {
                    vec![
                        r.to_string(),
                        s.n.to_string(),
                        fmt_f64(s.epsilon),
                        s.h.to_string(),
                        c.to_string(),
                        fmt_f64(s.threshold),
                    ]
                })
                .collect();
            dir.write_csv("trap_scaling.csv", &["replica", "n", "epsilon", "h", "count", "threshold"], &srows)?;
            serde_json::to_value(&s)?
        }
        Err(e @ Error::InsufficientBlocks { .. }) => json!({"error": e.to_string()}),
        Err(e) => return Err(e),
    };
    let lines = pooled
        .iter()
        .map(|p| {
            format!(
                "h={} blocks={} traps={} frequency={:.6} rate={:.4} (t={t:.4})",
                p.h, p.blocks, p.traps, p.frequency, p.rate
            )
        })
        .collect();
    Ok(Outcome {
        status: Status::Ok,
        summary: json!({
            "t": t,
            "ell": ell,
            "h_la": h_la,
            "regenerations_per_replica": ensemble.iter().map(|e| e.1.len()).collect::<Vec<_>>(),
            "pooled": pooled,
            "scaling": scaling,
        }),
        lines,
    })
}

// ---------------------------------------------------------------- simplicity

#[derive(Clone, Debug, Serialize)]
pub struct SimplicityOutcome {
    pub verdict: String,
    pub reports: Vec<(String, crate::phase::SeriesReport)>,
    /// `ε_i / (2(1 − ε_i))` dominates every term, for the trap-drift family.
    pub bound_holds: Option<bool>,
}

pub const VERDICT_A: &str = "(a) applies: simple path a.s.";
pub const VERDICT_B: &str = "(b) sum finite over tested c";
pub const VERDICT_NONE: &str = "inconclusive";

pub fn simplicity(cfg: &ExperimentConfig) -> Result<SimplicityOutcome> {
    let seq = cfg.bias.resolve()?;
    let (p0, children) = (&seq[0], &seq[1..]);
    let mut reports = Vec::new();
    for d in &cfg.simplicity.directions {
        let e = config::parse_direction(d)?;
        for &c in &cfg.simplicity.c_values {
            reports.push((d.clone(), simplicity_series(children, p0, e, c, children.len())?));
        }
    }
    let bound_holds = (cfg.bias.family == Family::TrapDrift).then(|| {
        reports.iter().all(|(_, rep)| {
            rep.terms.iter().enumerate().all(|(i, &term)| {
                let eps = 0.5f64.powi(i as i32 + 1);
                term <= eps / (2.0 * (1.0 - eps)) * (1.0 + 1e-12)
            })
        })
    });
    let verdict = if cfg.simplicity.repeated {
        VERDICT_A
    } else if !reports.is_empty() && reports.iter().all(|(_, r)| r.hint == SeriesHint::LikelySummable) {
        VERDICT_B
    } else {
        VERDICT_NONE
    };
    Ok(SimplicityOutcome {
        verdict: verdict.to_string(),
        reports,
        bound_holds,
    })
}

fn cmd_simplicity(cfg: &ExperimentConfig, dir: &OutputDir) -> Result<Outcome> {
    let res = simplicity(cfg)?;
    dir.write_manifest(&SeedManifest::new(cfg.seed))?;
    let mut rows = Vec::new();
    for (d, rep) in &res.reports {
        for (i, (t, s)) in rep.terms.iter().zip(&rep.partial_sums).enumerate() {
            rows.push(vec![d.clone(), fmt_f64(rep.c), (i + 1).to_string(), fmt_f64(*t), fmt_f64(*s)]);
        }
    }
    dir.write_csv("simplicity.csv", &["direction", "c", "i", "term", "partial_sum"], &rows)?;
    let mut lines: Vec<String> = res
        .reports
        .iter()
        .map(|(d, r)| {
            format!(
                "e={d} c={} sum={:.6e} tail_ratio={:?} hint={:?}",
                r.c,
                r.sum(),
                r.tail_ratio,
                r.hint
            )
        })
        .collect();
    lines.push(res.verdict.clone());
    Ok(Outcome {
        status: Status::Ok,
        summary: json!({
            "verdict": res.verdict,
            "bound_holds": res.bound_holds,
            "series": res.reports.iter().map(|(d, r)| json!({"direction": d, "c": r.c, "sum": r.sum(), "tail_ratio": r.tail_ratio, "hint": r.hint})).collect::<Vec<_>>(),
        }),
        lines,
    })
}

// ---------------------------------------------------------------- oracle-test

fn cmd_oracle_test(cfg: &ExperimentConfig, dir: &OutputDir) -> Result<Outcome> {
    let report = oracle::run_oracle(&cfg.oracle, cfg.seed)?;
    let mut manifest = SeedManifest::new(cfg.seed);
    for i in 0..cfg.oracle.fixtures as u64 {
        manifest.add(format!("hit_before Monte Carlo, fixture {i}"), PURPOSE_CHECK, i, 1);
    }
    for h in [2u64, 3, 4] {
        manifest.add(format!("geometric returns, depth {h}"), PURPOSE_CHECK, h, 2);
    }
    manifest.add("negative control", PURPOSE_CHECK, 0, 3);
    manifest.add("kernel audit level 0", PURPOSE_WALK, 0, 0);
    manifest.add("kernel audit level 1", PURPOSE_WALK, 0, 1);
    for i in 0..cfg.oracle.fixtures as u64 {
        manifest.add(format!("fixture {i}, keyed by {:#x}", oracle::FIXTURE_SEED), PURPOSE_FIXTURE, i, 0);
    }
    dir.write_manifest(&manifest)?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), if c.passed { "pass" } else { "FAIL" }.into(), c.detail.clone()])
        .collect();
    dir.write_csv("oracle.csv", &["check", "result", "detail"], &rows)?;
    let lines = rows.iter().map(|r| format!("{:4} {} ({})", r[1], r[0], r[2])).collect();
    let failures: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    Ok(Outcome {
        status: if report.passed() { Status::Ok } else { Status::OracleFailure },
        summary: json!({
            "checks": report.checks.len(),
            "passed": report.passed(),
            "failures": failures,
            "exact_values": report.exact_values,
        }),
        lines,
    })
}
