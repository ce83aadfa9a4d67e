//! Regeneration blocks of simulated walks: independence of successive blocks
//! and common levels across a nested stack.

use std::collections::BTreeSet;

use tracewalk::families::{figure2_base, figure2_child};
use tracewalk::regeneration::{regenerations, uber_levels};
use tracewalk::rng::walk_stream;
use tracewalk::stats::lag1_autocorrelation;
use tracewalk::trace::WalkPath;
use tracewalk::walk::{nested_simulate, simulate_level0, SimulationConfig};

/// Levels `L > 0` reached for the first time at some `k` with `X_m·e1 ≥ L` for all `m ≥ k`.
fn brute_force_levels(path: &WalkPath) -> BTreeSet<i64> {
    let levels = path.levels();
    let mut out = BTreeSet::new();
    let mut max = i64::MIN;
    for k in 0..levels.len() {
        if levels[k] > max {
            max = levels[k];
            if levels[k] > 0 && levels[k..].iter().all(|&v| v >= levels[k]) {
                out.insert(levels[k]);
            }
        }
    }
    out
}

#[test]
fn successive_blocks_are_uncorrelated() {
    let path = simulate_level0(&figure2_base(), 1_000_000, &mut walk_stream(31, 0, 0));
    let rec = regenerations(&path, &[1.0, 0.0], 0.0);
    let durations: Vec<f64> = rec.times.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let gaps = rec.level_gaps();
    let m = durations.len() as f64;
    assert!(m > 50_000.0, "{m} blocks");
    // Four standard errors of a null lag-1 autocorrelation.
    let limit = 4.0 / m.sqrt();
    let rd = lag1_autocorrelation(&durations);
    let rg = lag1_autocorrelation(&gaps);
    assert!(rd.abs() < limit, "durations: {rd} vs {limit}");
    assert!(rg.abs() < limit, "level gaps: {rg} vs {limit}");
}

#[test]
fn uber_levels_are_regeneration_levels_of_every_walk() {
    let cfg = SimulationConfig::new(
        vec![figure2_base(), figure2_child(1.5).unwrap(), figure2_child(1.2).unwrap()],
        vec![50_000_000, 50_000_000, 100_000],
        5,
    )
    .unwrap();
    let run = nested_simulate(&cfg).unwrap();
    run.check_complete().unwrap();
    let paths: Vec<WalkPath> = run.levels.iter().map(|l| l.path.clone()).collect();
    let records: Vec<_> = paths.iter().map(|p| regenerations(p, &[1.0, 0.0], 0.0)).collect();
    let uber = uber_levels(&records, &paths).unwrap();
    let mut expected = brute_force_levels(&paths[0]);
    for p in &paths[1..] {
        let own = brute_force_levels(p);
        expected.retain(|l| own.contains(l));
    }
    assert!(!uber.levels.is_empty());
    assert_eq!(uber.levels, expected.into_iter().collect::<Vec<_>>());
    let last = paths.last().unwrap();
    for (l, x) in uber.levels.iter().zip(&uber.points) {
        assert_eq!(x.coords()[0], *l);
        assert!(last.points().any(|p| &p == x));
    }
}
