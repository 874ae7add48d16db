//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs::File;
use std::path::Path;
use std::time::{Duration, Instant};

use chp::analysis::{self, load_scenario, Scenario};
use chp::checks::{self, instances, InstanceShape, SuiteOutcome};
use chp::pricing::clear;
use chp::strategic::{check_supermodularity, power_report, truthful_profits};
use chp::{coalition_power, economic_dispatch, market_power_index, restricted_cost, Market, TAU};

const SEED: u64 = 42;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TAU * a.abs().max(b.abs()).max(1.0)
}

fn all_close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y))
}

fn scenario(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name);
    load_scenario(File::open(path).unwrap()).unwrap()
}

// ---------- independent oracles ----------

fn cost(s: f64, v: f64, g: f64) -> f64 {
    if g > 0.0 {
        s + v * g
    } else {
        0.0
    }
}

/// Minimum cost by enumerating every vertex of the feasible set: each
/// generator is off or full, except at most one running strictly inside
/// `(0, G)`.
fn enumerated_cost(s: &[f64], v: &[f64], cap: f64, y: f64, excluded: &[usize]) -> Option<f64> {
    let n = s.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        if excluded.iter().any(|&e| mask & (1 << e) != 0) {
            continue;
        }
        let full = mask.count_ones() as f64 * cap;
        let base: f64 = (0..n)
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| cost(s[k], v[k], cap))
            .sum();
        let rest = y - full;
        let mut consider = |c: f64| best = Some(best.map_or(c, |b: f64| b.min(c)));
        if rest.abs() <= 1e-9 * cap {
            consider(base);
        } else if rest > 0.0 && rest < cap {
            for k in (0..n).filter(|&k| mask & (1 << k) == 0 && !excluded.contains(&k)) {
                consider(base + cost(s[k], v[k], rest));
            }
        }
    }
    best
}

const Z_STEPS: usize = 10_000;

/// `max_z p z - f(z)` over a grid on `[0, G]`, with the largest maximiser.
fn profit_scan(s: f64, v: f64, cap: f64, p: f64) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    for k in 0..=Z_STEPS {
        let z = cap * k as f64 / Z_STEPS as f64;
        let profit = p * z - cost(s, v, z);
        if profit >= best.0 - 1e-12 {
            best = (profit.max(best.0), z);
        }
    }
    best
}

/// Smallest price at which desired supply covers the load, by bisection on
/// the grid-scanned supply.
fn price_scan(s: &[f64], v: &[f64], cap: f64, y: f64) -> f64 {
    let supply = |p: f64| -> f64 {
        (0..s.len())
            .map(|k| profit_scan(s[k], v[k], cap, p).1)
            .sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while supply(hi) < y - 1e-9 {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if supply(mid) >= y - 1e-9 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

// ---------- criteria ----------

struct Line {
    passed: bool,
    detail: String,
}

fn suite_detail(s: &SuiteOutcome) -> String {
    let mut d = format!("{} {}/{}", s.name, s.passed, s.passed + s.failed);
    if let Some(f) = &s.first_failure {
        d.push_str(&format!(" (first failure: {f})"));
    }
    d
}

fn criterion_1() -> Line {
    let start = Instant::now();
    let (cap, y) = (10.0, 15.0);
    let s = [10.0; 4];
    let v = [1.0, 2.0, 3.0, 4.0];
    let market = Market::from_costs(cap, &s, &v).unwrap();

    let c = enumerated_cost(&s, &v, cap, y, &[]).unwrap();
    let p = price_scan(&s, &v, cap, y);
    let d = economic_dispatch(&market, y, &[], None).unwrap();
    let uplift_oracle: Vec<f64> = (0..4)
        .map(|k| {
            profit_scan(s[k], v[k], cap, p).0 - (p * d.outputs[k] - cost(s[k], v[k], d.outputs[k]))
        })
        .collect();
    let benchmark_oracle: Vec<f64> = (0..4).map(|k| profit_scan(s[k], v[k], cap, p).0).collect();
    let power_oracle: Vec<f64> = (0..4)
        .map(|k| enumerated_cost(&s, &v, cap, y, &[k]).unwrap() - c - benchmark_oracle[k])
        .collect();
    let pair_oracle = enumerated_cost(&s, &v, cap, y, &[0, 1]).unwrap()
        - c
        - benchmark_oracle[0]
        - benchmark_oracle[1];

    let r = clear(&market, y, None).unwrap();
    let bench = truthful_profits(&market, y).unwrap();
    let power: Vec<f64> = (0..4)
        .map(|k| market_power_index(&market, y, k).unwrap())
        .collect();
    let pair = coalition_power(&market, y, &[0, 1]).unwrap().power.unwrap();

    let checks = [
        ("dispatch", all_close(&d.outputs, &[10.0, 5.0, 0.0, 0.0])),
        ("cost", close(d.total_cost, 40.0) && close(d.total_cost, c)),
        ("price", close(r.price, 3.0) && close(r.price, p)),
        (
            "uplift",
            all_close(&r.uplifts, &[0.0, 5.0, 0.0, 0.0]) && all_close(&r.uplifts, &uplift_oracle),
        ),
        (
            "benchmark",
            all_close(&bench, &[10.0, 0.0, 0.0, 0.0]) && all_close(&bench, &benchmark_oracle),
        ),
        (
            "power",
            all_close(&power, &[5.0, 5.0, 0.0, 0.0]) && all_close(&power, &power_oracle),
        ),
        ("pair", close(pair, 20.0) && close(pair, pair_oracle)),
    ];
    let elapsed = start.elapsed();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect();
    let passed = failed.is_empty() && elapsed < Duration::from_secs(1);
    Line {
        passed,
        detail: if failed.is_empty() {
            format!("worked market matches oracles in {elapsed:.2?}")
        } else {
            format!("mismatch in {failed:?} ({elapsed:.2?})")
        },
    }
}

fn criterion_2() -> Line {
    let start = Instant::now();
    let suite = checks::dispatch_equivalence(SEED, 500);
    let elapsed = start.elapsed();
    let insts = instances(SEED, 1, 500, &InstanceShape::default());
    let independent = insts
        .iter()
        .filter(|inst| {
            let m = &inst.market;
            let s: Vec<f64> = m.generators().iter().map(|g| g.startup_cost).collect();
            let v: Vec<f64> = m.generators().iter().map(|g| g.variable_cost).collect();
            let fast = economic_dispatch(m, inst.demand, &[], None)
                .unwrap()
                .total_cost;
            enumerated_cost(&s, &v, m.capacity(), inst.demand, &[]).is_some_and(|c| close(c, fast))
        })
        .count();
    Line {
        passed: suite.ok() && independent == insts.len() && elapsed < Duration::from_secs(10),
        detail: format!(
            "{}; independent enumeration {}/{}; {elapsed:.2?}",
            suite_detail(&suite),
            independent,
            insts.len()
        ),
    }
}

fn criterion_3() -> Line {
    let suite = checks::uplift_minimality(SEED, 200, 100);
    Line {
        passed: suite.ok(),
        detail: suite_detail(&suite),
    }
}

fn criterion_4() -> Line {
    let suite = checks::increment_bounds(SEED, 500);
    Line {
        passed: suite.ok(),
        detail: suite_detail(&suite),
    }
}

fn criterion_5() -> Line {
    let increments = checks::exclusion_increments(SEED, 500);
    let pairs = checks::supermodularity(SEED, 500);
    let rts = scenario("rts96-like.json");
    let m = &rts.market;
    let n = m.len();
    let (mut checked, mut violations) = (0usize, 0usize);
    for y in rts.loads() {
        violations += check_supermodularity(m, y).unwrap().len();
        if y > (n - 2) as f64 * m.capacity() {
            continue;
        }
        let c = restricted_cost(m, y, &[]).unwrap();
        let single: Vec<f64> = (0..n)
            .map(|i| restricted_cost(m, y, &[i]).unwrap())
            .collect();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let lhs = restricted_cost(m, y, &[i, j]).unwrap() - single[j];
                let rhs = single[i] - c;
                checked += 1;
                if lhs < rhs - TAU * lhs.abs().max(rhs.abs()).max(1.0) {
                    violations += 1;
                }
            }
        }
    }
    Line {
        passed: increments.ok() && pairs.ok() && violations == 0,
        detail: format!(
            "{}; {}; rts96-like: {violations} violations over {checked} ordered pairs and all loads",
            suite_detail(&increments),
            suite_detail(&pairs)
        ),
    }
}

fn criterion_6() -> Line {
    let sweep = checks::oracle_bounds(SEED, 200, 1e-3);
    let worked = Market::from_costs(10.0, &[10.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let report = power_report(&worked, 15.0, Some(1e-3)).unwrap();
    let strict_first = !report.equality_flags[0];
    Line {
        passed: sweep.bounds.ok() && sweep.under_reporting.ok() && strict_first,
        detail: format!(
            "{}; {}; equality rate {:.6} ({}/{}); worked market flags G1 as strict: {strict_first}",
            suite_detail(&sweep.bounds),
            suite_detail(&sweep.under_reporting),
            sweep.equality_rate(),
            sweep.equal,
            sweep.generators_checked
        ),
    }
}

fn criterion_7() -> Line {
    let rts = scenario("rts96-like.json");
    let start = Instant::now();
    let report = analysis::sweep_with_workers(&rts, 1).unwrap();
    let elapsed = start.elapsed();
    let pct: Vec<f64> = report.by_size.iter().map(|a| a.pct_with_power).collect();
    let mean: Vec<f64> = report.by_size.iter().map(|a| a.mean_power).collect();
    let fit = report.mean_power_fit.unwrap();
    let shape_ok = rts.market.len() == 24 && rts.max_coalition == 6 && report.by_size.len() == 6;
    let passed = shape_ok
        && elapsed < Duration::from_secs(300)
        && analysis::non_decreasing(&pct)
        && analysis::non_decreasing(&mean)
        && fit.slope > 0.0;
    Line {
        passed,
        detail: format!(
            "{} rows single-threaded in {elapsed:.2?}; pct_with_power {pct:.3?}; mean_power {mean:.1?}; slope {:.3}, R^2 {:.4}",
            report.rows.len(),
            fit.slope,
            fit.r_squared
        ),
    }
}

fn run_cli(args: &[&str], workers: usize) -> (i32, Vec<u8>) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .unwrap();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = pool.install(|| chp::cli::run(args.iter().copied(), &mut out, &mut err));
    (code, out)
}

fn criterion_8() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let by_size = dir.path().join("sweep_by_size.csv");
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/rts96-like.json");
    let args = [
        "chp",
        "sweep",
        "--scenario",
        data.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ];

    let mut sweeps = Vec::new();
    for workers in [1, 4, 4] {
        let (code, stdout) = run_cli(&args, workers);
        sweeps.push((
            code,
            stdout,
            std::fs::read(&csv).unwrap(),
            std::fs::read(&by_size).unwrap(),
        ));
    }
    let sweep_same = sweeps.iter().all(|r| r.0 == 0 && *r == sweeps[0]);

    let check_args = ["chp", "check", "--seed", "42"];
    let checks: Vec<(i32, Vec<u8>)> = [1, 4, 4].iter().map(|&w| run_cli(&check_args, w)).collect();
    let check_same = checks.iter().all(|r| *r == checks[0]);

    Line {
        passed: sweep_same && check_same,
        detail: format!(
            "sweep identical across 1/4/4 workers: {sweep_same} ({} CSV bytes); check --seed 42 identical: {check_same} (exit {})",
            sweeps[0].2.len(),
            checks[0].0
        ),
    }
}

fn main() {
    let criteria: [(u32, fn() -> Line); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut failed = Vec::new();
    for (k, f) in criteria {
        let line = f();
        println!(
            "criterion {k}: {} - {}",
            if line.passed { "PASS" } else { "FAIL" },
            line.detail
        );
        if !line.passed {
            failed.push(k);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 8 criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
