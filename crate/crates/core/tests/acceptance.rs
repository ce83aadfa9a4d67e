//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! lines always reach the output; exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;

use tracewalk::bias::BiasDistribution;
use tracewalk::experiments::config::{ExperimentConfig, Family, Kind};
use tracewalk::experiments::oracle::run_oracle;
use tracewalk::experiments::{analyze_records, base_ensemble, run_replicas, simulation_config, sweep_point, trap_frequencies, SweepRow};
use tracewalk::families::{canonical, figure2_base, figure2_child};
use tracewalk::lattice::LatticePoint;
use tracewalk::phase::{phi, solve_root, ROOT_TOL};
use tracewalk::regeneration::cut_points;
use tracewalk::rng::{stream, PURPOSE_CHECK};
use tracewalk::stats::median;
use tracewalk::trace::WalkPath;
use tracewalk::walk::{backtrack_census, base_root, nested_simulate, simulate_level0, velocity_estimate, NestedRun, SimulationConfig};

const SEED: u64 = 2024;
const REPLICAS: u64 = 10;
const STEPS: u64 = 1_000_000;
const PARENT_CAP: u64 = 50_000_000;
const GAMMAS: [f64; 4] = [1.1, 1.5, 2.0, 3.0];

type Verdict = (bool, String);

/// `√k_i · log(1 + min(k_0, k_i)(γ_0 − 1)/k_i)`.
fn closed_form_root(k0: usize, ki: usize, g0: f64) -> f64 {
    let kmin = k0.min(ki) as f64;
    (ki as f64).sqrt() * (1.0 + kmin * (g0 - 1.0) / ki as f64).ln()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in 2..=4 {
        for k0 in 1..=d {
            for ki in 1..=d {
                for &g0 in &GAMMAS {
                    for &gi in &GAMMAS {
                        let p0 = canonical(d, k0, g0).unwrap();
                        let pi = canonical(d, ki, gi).unwrap();
                        let ell = pi.log_odds().unwrap().require_unit().unwrap().to_vec();
                        let t = solve_root(&p0, &ell, ROOT_TOL).unwrap();
                        worst = worst.max((t - closed_form_root(k0, ki, g0)).abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-10 && secs < 1.0,
        format!("{cases} pairs, max |t - closed form| = {worst:.2e} (<= 1e-10), {secs:.3} s (< 1 s)"),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::defaults(Kind::Analyze);
    cfg.analyze.grid = "figure2-grid".into();
    let records = analyze_records(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    // r = 1 is the symmetric child: no direction, no root.
    let biased: Vec<_> = records.iter().filter(|r| r.report.ell.is_some()).collect();
    let worst = biased
        .iter()
        .map(|r| r.report.t.map_or(f64::INFINITY, |t| (t - 2f64.ln()).abs()))
        .fold(0.0, f64::max);
    let alpha_ok = biased.iter().all(|r| r.report.alpha.is_some_and(|a| (a - 2.0).abs() <= 1e-9));
    (
        biased.len() + 1 >= records.len() && worst <= 1e-10 && alpha_ok && secs < 1.0,
        format!(
            "{} values of r with a drift direction, max |t - log 2| = {worst:.2e}, alpha = 2: {alpha_ok}, {secs:.3} s (< 1 s)",
            biased.len()
        ),
    )
}

fn sweep(r: f64, checkpoints: Vec<u64>) -> Vec<SweepRow> {
    let mut cfg = ExperimentConfig::defaults(Kind::SweepR);
    cfg.seed = SEED;
    cfg.sweep.child_steps = STEPS;
    cfg.sweep.parent_cap = PARENT_CAP;
    cfg.sweep.checkpoints = checkpoints;
    (0..REPLICAS)
        .into_par_iter()
        .map(|k| sweep_point(&cfg, r, k).unwrap())
        .flatten()
        .collect()
}

fn criterion_3(rows: &[SweepRow]) -> Verdict {
    let v: Vec<f64> = rows.iter().map(|r| r.v_e1).collect();
    let angles: Vec<f64> = rows.iter().map(|r| r.angle_deg.unwrap_or(f64::NAN)).collect();
    let ok = rows.len() == REPLICAS as usize && v.iter().all(|&x| x > 0.05) && angles.iter().all(|&a| a < 5.0);
    (
        ok,
        format!(
            "v.e1 in [{:.4}, {:.4}] (need > 0.05), angle to drift in [{:.2}, {:.2}] deg (need < 5)",
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            angles.iter().copied().fold(f64::INFINITY, f64::min),
            angles.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
    )
}

fn criterion_4(rows: &[SweepRow]) -> Verdict {
    let medians: Vec<(u64, f64)> = [10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| {
            let v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.v_e1).collect();
            (n, median(&v))
        })
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1].1 < w[0].1);
    let last = medians[2].1;
    (
        decreasing && last < 0.02,
        format!(
            "medians {} (strictly decreasing: {decreasing}; need < 0.02 at 1e6)",
            medians.iter().map(|(n, m)| format!("n={n}: {m:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_5() -> Verdict {
    let census = backtrack_census(&figure2_base(), &[1.0, 0.0], 100_000, 2_000, 8, SEED, 0.99).unwrap();
    let bad: Vec<usize> = census.violations().into_iter().filter(|&h| h >= 1).collect();
    let worst = (1..=8).map(|h| census.estimates[h] / census.bounds[h]).fold(0.0, f64::max);
    (
        bad.is_empty(),
        format!(
            "1e5 walks of 2000 steps, depths 1..8: largest estimate/bound {worst:.3}, depths with Wilson 99% lower limit above 2^-h: {bad:?}"
        ),
    )
}

fn criterion_6() -> (Verdict, bool) {
    let cfg = ExperimentConfig::defaults(Kind::OracleTest);
    let report = run_oracle(&cfg.oracle, SEED).unwrap();
    let failed: Vec<String> = report.failures().map(|c| c.name.clone()).collect();
    let nested = report
        .checks
        .iter()
        .find(|c| c.name == "nested traces are decreasing")
        .is_some_and(|c| c.passed);
    (
        (
            failed.is_empty(),
            format!(
                "{} checks ({} hit_before fixtures, {} edge deletions, series/parallel at 1e-12); failed: {failed:?}",
                report.checks.len(),
                cfg.oracle.fixtures,
                cfg.oracle.deletions
            ),
        ),
        nested,
    )
}

fn criterion_7() -> Verdict {
    let mut pairs: Vec<(BiasDistribution, Vec<f64>)> = vec![(figure2_base(), vec![1.0, 0.0])];
    for d in 2..=4 {
        for k in 1..=d {
            for &g in &GAMMAS {
                let pi = canonical(d, k, g).unwrap();
                let ell = pi.log_odds().unwrap().require_unit().unwrap().to_vec();
                for &g0 in &GAMMAS {
                    pairs.push((canonical(d, (k % d) + 1, g0).unwrap(), ell.clone()));
                }
            }
        }
    }
    let mut exact = true;
    let mut worst_fd: f64 = 0.0;
    let mut worst_convex = f64::INFINITY;
    let h = 1e-5;
    for (p0, ell) in &pairs {
        exact &= phi(p0, ell, 0.0) == 1.0;
        let fd = (phi(p0, ell, h) - phi(p0, ell, -h)) / (2.0 * h);
        worst_fd = worst_fd.max((fd + p0.drift().dot(ell)).abs());
        let step = 0.01;
        for k in -300..300 {
            let t = k as f64 * step;
            let second = phi(p0, ell, t - step) + phi(p0, ell, t + step) - 2.0 * phi(p0, ell, t);
            worst_convex = worst_convex.min(second);
        }
    }
    (
        exact && worst_fd <= 1e-6 && worst_convex >= -1e-9,
        format!(
            "{} pairs: phi(0) == 1 exactly: {exact}; max |phi'(0) + drift.ell| = {worst_fd:.2e}; min second difference on [-3, 3] = {worst_convex:.2e}",
            pairs.len()
        ),
    )
}

fn wrong_way_runs(family: Family) -> Vec<NestedRun> {
    let mut cfg = ExperimentConfig::defaults(Kind::Simulate);
    cfg.seed = SEED;
    cfg.bias.family = family;
    let biases = cfg.bias.resolve().unwrap();
    let template = simulation_config(&cfg, biases, vec![PARENT_CAP, STEPS], 0).unwrap();
    run_replicas(&template, REPLICAS)
        .into_iter()
        .map(|r| {
            let run = r.unwrap();
            run.check_complete().unwrap();
            run
        })
        .collect()
}

fn criterion_8(plain: &[NestedRun], rotated: &[NestedRun]) -> Verdict {
    let speeds: Vec<f64> = plain
        .iter()
        .map(|r| velocity_estimate(&r.deepest().path, 0.2, None).unwrap().speed)
        .collect();
    let mut cfg = ExperimentConfig::defaults(Kind::Simulate);
    cfg.bias.family = Family::WrongWayRotated;
    let delta0_rot = cfg.bias.resolve().unwrap()[0].drift().0;
    let along: Vec<f64> = rotated
        .iter()
        .map(|r| {
            let v = velocity_estimate(&r.deepest().path, 0.2, None).unwrap().velocity;
            v.iter().zip(&delta0_rot).map(|(a, b)| a * b).sum()
        })
        .collect();
    let recurrent = speeds.iter().all(|&s| s < 0.01);
    let positive = along.iter().filter(|&&x| x > 0.0).count();
    (
        recurrent && positive == REPLICAS as usize,
        format!(
            "first: max |v| = {:.2e} (need < 0.01); rotated: v.drift0 > 0 in {positive}/{REPLICAS} replicas, values [{}]",
            speeds.iter().copied().fold(0.0, f64::max),
            along.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_9(sweeps: &[&[SweepRow]], runs: &[&[NestedRun]], oracle_nested: bool) -> Verdict {
    // A three-level run on top of the two-level runs above.
    let deep = nested_simulate(
        &SimulationConfig::new(
            vec![figure2_base(), figure2_child(1.5).unwrap(), figure2_child(1.2).unwrap()],
            vec![PARENT_CAP, PARENT_CAP, 200_000],
            SEED,
        )
        .unwrap(),
    )
    .unwrap();
    let sweep_rows: Vec<&SweepRow> = sweeps.iter().flat_map(|s| s.iter()).collect();
    let sweep_runs: HashSet<(u64, u64)> = sweep_rows.iter().map(|r| (r.r.to_bits(), r.replica)).collect();
    let nested_runs: Vec<&NestedRun> = runs.iter().flat_map(|r| r.iter()).chain(std::iter::once(&deep)).collect();
    let ok = sweep_rows.iter().all(|r| r.nested) && nested_runs.iter().all(|r| r.nesting_holds()) && oracle_nested;
    (
        ok,
        format!(
            "{} sweep runs, {} simulate runs (one with three levels) and the oracle kernel run: every child trace inside its parent",
            sweep_runs.len(),
            nested_runs.len()
        ),
    )
}

fn brute_force_cut_points(path: &WalkPath) -> Vec<usize> {
    let pts: Vec<LatticePoint> = path.points().collect();
    let mut past: HashSet<&LatticePoint> = HashSet::new();
    let mut out = Vec::new();
    for n in 0..pts.len() {
        past.insert(&pts[n]);
        if pts[n + 1..].iter().all(|p| !past.contains(p)) {
            out.push(n);
        }
    }
    out
}

fn criterion_10() -> Verdict {
    let p0 = figure2_base();
    let t0 = base_root(&p0).unwrap();
    let ell = figure2_child(2.0).unwrap().log_odds().unwrap().require_unit().unwrap().to_vec();
    let t1 = solve_root(&p0, &ell, ROOT_TOL).unwrap();
    let ensemble = base_ensemble(&p0, STEPS, 40.0 / t0, SEED, REPLICAS);
    let (pooled, _) = trap_frequencies(&ensemble, &ell, &[3]).unwrap();
    let f = &pooled[0];
    let rate_ok = f.blocks >= 100_000 && f.rate <= t1 + 0.3;
    let mut paths = Vec::new();
    for (k, &n) in [10usize, 100, 1_000, 10_000].iter().enumerate() {
        for (j, p) in [figure2_base(), figure2_child(2.4).unwrap(), canonical(2, 1, 1.1).unwrap()]
            .iter()
            .enumerate()
        {
            let mut rng = stream(SEED, PURPOSE_CHECK, (k * 3 + j) as u64, 4);
            paths.push(simulate_level0(p, n, &mut rng));
        }
    }
    let mismatched = paths.iter().filter(|p| cut_points(p) != brute_force_cut_points(p)).count();
    (
        rate_ok && mismatched == 0,
        format!(
            "{} blocks, {} with a depth-3 trap, -log P/3 = {:.4} (need <= t = {t1:.4} + 0.3); cut points agree with brute force on {}/{} paths",
            f.blocks,
            f.traps,
            f.rate,
            paths.len() - mismatched,
            paths.len()
        ),
    )
}

fn report(n: u8, v: &Verdict, failures: &mut Vec<u8>) {
    println!("criterion {n}: {} {}", if v.0 { "PASS" } else { "FAIL" }, v.1);
    if !v.0 {
        failures.push(n);
    }
}

fn main() {
    let mut failures = Vec::new();
    report(1, &criterion_1(), &mut failures);
    report(2, &criterion_2(), &mut failures);
    let ballistic = sweep(1.5, vec![STEPS]);
    report(3, &criterion_3(&ballistic), &mut failures);
    let sub = sweep(2.4, vec![10_000, 100_000, STEPS]);
    report(4, &criterion_4(&sub), &mut failures);
    report(5, &criterion_5(), &mut failures);
    let (c6, oracle_nested) = criterion_6();
    report(6, &c6, &mut failures);
    report(7, &criterion_7(), &mut failures);
    let plain = wrong_way_runs(Family::WrongWay);
    let rotated = wrong_way_runs(Family::WrongWayRotated);
    report(8, &criterion_8(&plain, &rotated), &mut failures);
    report(
        9,
        &criterion_9(&[&ballistic, &sub], &[&plain, &rotated], oracle_nested),
        &mut failures,
    );
    report(10, &criterion_10(), &mut failures);
    println!("acceptance: {} of 10 criteria pass", 10 - failures.len());
    if !failures.is_empty() {
        println!("failing criteria: {failures:?}");
        std::process::exit(1);
    }
}
