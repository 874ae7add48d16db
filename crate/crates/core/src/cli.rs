//! The `chp` command line.
//!
//! ```text
//! chp <verb> --scenario <path> [--load <spec>] [--exclude i,j,...] [--max-size k]
//!     [--oracle] [--grid-step d] [--trials N] [--seed S] [--out <path>]
//! ```
//!
//! Exit codes: 0 success, 1 domain / infeasibility / failed checks, 2 usage.
//! Errors print one line on stderr prefixed with a code such as `E_INFEASIBLE`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, load_scenario, Scenario};
use crate::checks;
use crate::dispatch::economic_dispatch;
use crate::error::ChpError;
use crate::pricing::clear;
use crate::strategic::{check_supermodularity, coalition_power, power_report};

#[derive(Debug, Parser)]
#[command(
    name = "chp",
    about = "Market power under convex hull pricing",
    version
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Economic dispatch, optionally with generators excluded.
    Dispatch(Opts),
    /// Convex hull price and uplift payments.
    Price(Opts),
    /// Benchmark profits and market power per generator.
    Power(Opts),
    /// Coalition power at one load.
    Coalitions(Opts),
    /// Load-by-size coalition sweep.
    Sweep(Opts),
    /// Randomized property suites.
    Check(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// A single load in MW, or `min:max:step`.
    #[arg(long)]
    load: Option<String>,
    /// Comma-separated 1-based generator indices.
    #[arg(long)]
    exclude: Option<String>,
    #[arg(long = "max-size")]
    max_size: Option<usize>,
    /// Run the best-response oracle next to the closed form.
    #[arg(long)]
    oracle: bool,
    #[arg(long = "grid-step", default_value_t = 1e-3)]
    grid_step: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Domain(ChpError),
    Check(String),
}

impl From<ChpError> for Failure {
    fn from(e: ChpError) -> Self {
        match e {
            ChpError::IndexOutOfRange { .. } => Failure::Usage(e.to_string()),
            e => Failure::Domain(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(e.into())
    }
}

type CliResult = std::result::Result<(), Failure>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum LoadSpec {
    Single(f64),
    Range { min: f64, max: f64, step: f64 },
}

fn parse_load(spec: &str) -> std::result::Result<LoadSpec, Failure> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::Usage(format!("invalid load `{spec}`")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [one] => Ok(LoadSpec::Single(num(one)?)),
        [a, b, c] => Ok(LoadSpec::Range {
            min: num(a)?,
            max: num(b)?,
            step: num(c)?,
        }),
        _ => Err(Failure::Usage(format!(
            "invalid load `{spec}`: expected a value or min:max:step"
        ))),
    }
}

fn parse_indices(spec: &str, n: usize) -> std::result::Result<Vec<usize>, Failure> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let k: usize = s
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("invalid generator index `{s}`")))?;
            if k == 0 || k > n {
                return Err(Failure::Usage(format!(
                    "generator index {k} out of range 1..={n}"
                )));
            }
            Ok(k - 1)
        })
        .collect()
}

fn read_scenario(path: Option<&Path>) -> std::result::Result<Scenario, Failure> {
    let path = path.ok_or_else(|| Failure::Usage("--scenario <path> is required".into()))?;
    let file = File::open(path)
        .map_err(|e| Failure::Usage(format!("cannot open scenario {}: {e}", path.display())))?;
    Ok(load_scenario(file)?)
}

fn single_load(opts: &Opts, scenario: &Scenario) -> std::result::Result<f64, Failure> {
    match opts.load.as_deref().map(parse_load).transpose()? {
        Some(LoadSpec::Single(y)) => Ok(y),
        Some(LoadSpec::Range { .. }) => Err(Failure::Usage(
            "this verb needs a single --load value, not a range".into(),
        )),
        None if scenario.load_min == scenario.load_max => Ok(scenario.load_min),
        None => Err(Failure::Usage(
            "--load is required when the scenario spans several loads".into(),
        )),
    }
}

fn write_output(opts: &Opts, stdout: &mut dyn Write, text: &str, csv: Option<&str>) -> CliResult {
    stdout.write_all(text.as_bytes())?;
    if let (Some(path), Some(csv)) = (&opts.out, csv) {
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn run_dispatch(opts: &Opts, stdout: &mut dyn Write) -> CliResult {
    let s = read_scenario(opts.scenario.as_deref())?;
    let y = single_load(opts, &s)?;
    let m = &s.market;
    let excluded = match &opts.exclude {
        Some(spec) => parse_indices(spec, m.len())?,
        None => Vec::new(),
    };
    let d = economic_dispatch(m, y, &excluded, None)?;
    let mut text = format!(
        "scenario: {}\nload: {} MW (m = {}, x = {} MW)\n",
        s.label,
        f6(y),
        d.split.marginal_index,
        f6(d.split.partial_output)
    );
    if !excluded.is_empty() {
        let ext: Vec<String> = excluded.iter().map(|k| (k + 1).to_string()).collect();
        text.push_str(&format!("excluded: {}\n", ext.join(",")));
    }
    text.push_str(&format!(
        "{:>4}  {:<12} {:>14} {:>14}\n",
        "gen", "name", "output_mw", "cost"
    ));
    let mut csv = String::from("generator,name,output_mw,cost\n");
    for (k, (&o, c)) in d.outputs.iter().zip(m.generators()).enumerate() {
        let name = &m.names()[k];
        text.push_str(&format!(
            "{:>4}  {:<12} {:>14} {:>14}\n",
            k + 1,
            name,
            f6(o),
            f6(c.cost_at(o))
        ));
        csv.push_str(&format!(
            "{},{},{},{}\n",
            k + 1,
            name,
            f6(o),
            f6(c.cost_at(o))
        ));
    }
    text.push_str(&format!("total cost: {}\n", f6(d.total_cost)));
    write_output(opts, stdout, &text, Some(&csv))
}

fn run_price(opts: &Opts, stdout: &mut dyn Write) -> CliResult {
    let s = read_scenario(opts.scenario.as_deref())?;
    let y = single_load(opts, &s)?;
    let m = &s.market;
    let r = clear(m, y, None)?;
    let mut text = format!(
        "scenario: {}\nload: {} MW\nprice: {}\n",
        s.label,
        f6(y),
        f6(r.price)
    );
    if y == 0.0 {
        text.push_str("note: zero demand, price is the conventional 0\n");
    }
    text.push_str(&format!(
        "{:>4}  {:<12} {:>14} {:>14} {:>14} {:>14}\n",
        "gen", "name", "desired_mw", "dispatch_mw", "max_profit", "uplift"
    ));
    let mut csv = String::from("generator,name,desired_mw,dispatch_mw,max_profit,uplift\n");
    for k in 0..m.len() {
        let cells = [
            f6(r.desired_outputs[k]),
            f6(r.dispatch.outputs[k]),
            f6(r.max_profits[k]),
            f6(r.uplifts[k]),
        ];
        text.push_str(&format!(
            "{:>4}  {:<12} {:>14} {:>14} {:>14} {:>14}\n",
            k + 1,
            m.names()[k],
            cells[0],
            cells[1],
            cells[2],
            cells[3]
        ));
        csv.push_str(&format!("{},{},{}\n", k + 1, m.names()[k], cells.join(",")));
    }
    text.push_str(&format!("total uplift: {}\n", f6(r.total_uplift)));
    write_output(opts, stdout, &text, Some(&csv))
}

fn run_power(opts: &Opts, stdout: &mut dyn Write) -> CliResult {
    let s = read_scenario(opts.scenario.as_deref())?;
    let y = single_load(opts, &s)?;
    let m = &s.market;
    let r = power_report(m, y, opts.oracle.then_some(opts.grid_step))?;
    let opt = |v: Option<f64>| v.map_or_else(|| "infeasible".to_string(), f6);
    let mut text = format!("scenario: {}\nload: {} MW\n", s.label, f6(y));
    let mut csv = String::from("generator,name,benchmark_profit,market_power");
    if opts.oracle {
        text.push_str(&format!(
            "{:>4}  {:<12} {:>14} {:>14} {:>14} {:>9} {:>12} {:>6}\n",
            "gen", "name", "P", "M", "oracle_gain", "attained", "arg_v", "equal"
        ));
        csv.push_str(",oracle_gain,attained,arg_v,equal\n");
    } else {
        text.push_str(&format!(
            "{:>4}  {:<12} {:>14} {:>14}\n",
            "gen", "name", "P", "M"
        ));
        csv.push('\n');
    }
    for k in 0..m.len() {
        let (p, mi) = (f6(r.benchmark_profits[k]), opt(r.closed_form_power[k]));
        match &r.oracle_power {
            Some(o) => {
                let o = o[k];
                let eq = r.equality_flags[k];
                text.push_str(&format!(
                    "{:>4}  {:<12} {:>14} {:>14} {:>14} {:>9} {:>12} {:>6}\n",
                    k + 1,
                    m.names()[k],
                    p,
                    mi,
                    f6(o.additional_gain),
                    o.attained,
                    f6(o.arg_v),
                    eq
                ));
                csv.push_str(&format!(
                    "{},{},{p},{mi},{},{},{},{eq}\n",
                    k + 1,
                    m.names()[k],
                    f6(o.additional_gain),
                    o.attained,
                    f6(o.arg_v)
                ));
            }
            None => {
                text.push_str(&format!(
                    "{:>4}  {:<12} {:>14} {:>14}\n",
                    k + 1,
                    m.names()[k],
                    p,
                    mi
                ));
                csv.push_str(&format!("{},{},{p},{mi}\n", k + 1, m.names()[k]));
            }
        }
    }
    if let Some(rate) = r.equality_rate() {
        text.push_str(&format!(
            "closed-form / oracle equality rate: {}\n",
            f6(rate)
        ));
    }
    write_output(opts, stdout, &text, Some(&csv))
}

fn run_coalitions(opts: &Opts, stdout: &mut dyn Write) -> CliResult {
    let s = read_scenario(opts.scenario.as_deref())?;
    let y = single_load(opts, &s)?;
    let m = &s.market;
    let mut text = format!("scenario: {}\nload: {} MW\n", s.label, f6(y));
    if let Some(spec) = &opts.exclude {
        let members = parse_indices(spec, m.len())?;
        let r = coalition_power(m, y, &members)?;
        let ext: Vec<String> = r.members.iter().map(|k| (k + 1).to_string()).collect();
        text.push_str(&format!("coalition: {}\n", ext.join(",")));
        match r.power {
            Some(p) => text.push_str(&format!("feasible: true\npower: {}\n", f6(p))),
            None => text.push_str("feasible: false\n"),
        }
        return write_output(opts, stdout, &text, None);
    }
    let max_size = opts.max_size.unwrap_or(s.max_coalition);
    let report = analysis::sweep_loads(m, &[y], max_size)?;
    text.push_str(&format!(
        "{:>5} {:>12} {:>12} {:>10} {:>14} {:>14} {:>14}\n",
        "size", "coalitions", "with_power", "pct", "mean", "mean_holders", "max"
    ));
    for r in &report.rows {
        text.push_str(&format!(
            "{:>5} {:>12} {:>12} {:>10} {:>14} {:>14} {:>14}\n",
            r.coalition_size,
            r.n_coalitions,
            r.n_with_power,
            f6(r.pct_with_power),
            f6(r.mean_power),
            f6(r.mean_power_over_powerholders),
            f6(r.max_power)
        ));
    }
    let violations = check_supermodularity(m, y)?;
    text.push_str(&format!(
        "pair supermodularity violations: {}\n",
        violations.len()
    ));
    let mut csv = Vec::new();
    analysis::write_rows_csv(&report.rows, &mut csv)?;
    write_output(opts, stdout, &text, Some(&String::from_utf8_lossy(&csv)))
}

fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

fn run_sweep(opts: &Opts, stdout: &mut dyn Write) -> CliResult {
    let s = read_scenario(opts.scenario.as_deref())?;
    let loads = match opts.load.as_deref().map(parse_load).transpose()? {
        None => s.loads(),
        Some(LoadSpec::Single(y)) => vec![y],
        Some(LoadSpec::Range { min, max, step }) => {
            if !(step > 0.0 && min <= max) {
                return Err(Failure::Usage(format!(
                    "invalid load range {min}:{max}:{step}"
                )));
            }
            analysis::load_grid(min, max, step)
        }
    };
    let max_size = opts.max_size.unwrap_or(s.max_coalition);
    let report = analysis::sweep_loads(&s.market, &loads, max_size)?;

    let mut text = format!(
        "scenario: {}\nloads: {} ({} to {} MW), coalition sizes 1..={max_size}, rows: {}\n",
        s.label,
        loads.len(),
        loads.first().copied().map_or_else(String::new, f6),
        loads.last().copied().map_or_else(String::new, f6),
        report.rows.len()
    );
    text.push_str(&format!(
        "{:>5} {:>12} {:>12} {:>10} {:>14} {:>14} {:>14}\n",
        "size", "coalitions", "with_power", "pct", "mean", "mean_holders", "max"
    ));
    for a in &report.by_size {
        text.push_str(&format!(
            "{:>5} {:>12} {:>12} {:>10} {:>14} {:>14} {:>14}\n",
            a.coalition_size,
            a.n_coalitions,
            a.n_with_power,
            f6(a.pct_with_power),
            f6(a.mean_power),
            f6(a.mean_power_over_powerholders),
            f6(a.max_power)
        ));
    }
    let pct: Vec<f64> = report.by_size.iter().map(|a| a.pct_with_power).collect();
    let mean: Vec<f64> = report.by_size.iter().map(|a| a.mean_power).collect();
    text.push_str(&format!(
        "pct_with_power non-decreasing in size: {}\nmean_power non-decreasing in size: {}\n",
        analysis::non_decreasing(&pct),
        analysis::non_decreasing(&mean)
    ));
    if let Some(fit) = report.mean_power_fit {
        text.push_str(&format!(
            "mean_power ~ size: slope {} intercept {} r2 {}\n",
            f6(fit.slope),
            f6(fit.intercept),
            f6(fit.r_squared)
        ));
    }

    match &opts.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            analysis::write_rows_csv(&report.rows, &mut w)?;
            w.flush()?;
            let by_size = sibling_path(path, "_by_size");
            let mut w = BufWriter::new(File::create(&by_size)?);
            analysis::write_size_csv(&report.by_size, &mut w)?;
            w.flush()?;
            text.push_str(&format!(
                "wrote {} and {}\n",
                path.display(),
                by_size.display()
            ));
            stdout.write_all(text.as_bytes())?;
        }
        None => {
            stdout.write_all(text.as_bytes())?;
            analysis::write_rows_csv(&report.rows, &mut *stdout)?;
        }
    }
    Ok(())
}

fn run_check(opts: &Opts, stdout: &mut dyn Write) -> CliResult {
    let (seed, trials) = (opts.seed, opts.trials);
    let mut suites = vec![
        checks::dispatch_equivalence(seed, trials),
        checks::uplift_minimality(seed, trials, 100),
        checks::increment_bounds(seed, trials),
        checks::exclusion_increments(seed, trials),
        checks::supermodularity(seed, trials),
        checks::index_nonnegative(seed, trials),
    ];
    let oracle = checks::oracle_bounds(seed, trials, opts.grid_step);
    suites.push(oracle.bounds.clone());
    suites.push(oracle.under_reporting.clone());

    let mut text = format!("seed {seed}, {trials} trials per suite\n");
    if opts.scenario.is_some() {
        let s = read_scenario(opts.scenario.as_deref())?;
        let results = s
            .loads()
            .into_iter()
            .map(|y| match check_supermodularity(&s.market, y) {
                Ok(v) if v.is_empty() => Ok(()),
                Ok(v) => Err(format!("load {y}: {} violations", v.len())),
                Err(e) => Err(e.to_string()),
            })
            .collect::<Vec<_>>();
        let failed = results.iter().filter(|r| r.is_err()).count();
        suites.push(checks::SuiteOutcome {
            name: "scenario-supermodularity",
            passed: results.len() - failed,
            failed,
            first_failure: results.into_iter().find_map(|r| r.err()),
        });
    }
    for suite in &suites {
        text.push_str(&format!(
            "{} {:<30} {}/{}\n",
            if suite.ok() { "PASS" } else { "FAIL" },
            suite.name,
            suite.passed,
            suite.passed + suite.failed
        ));
        if let Some(f) = &suite.first_failure {
            text.push_str(&format!("     first failure: {f}\n"));
        }
    }
    text.push_str(&format!(
        "closed-form / oracle equality rate: {} ({} of {} generators)\n",
        f6(oracle.equality_rate()),
        oracle.equal,
        oracle.generators_checked
    ));
    write_output(opts, stdout, &text, None)?;
    let failed = suites.iter().filter(|s| !s.ok()).count();
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} property suite(s) failed")));
    }
    Ok(())
}

/// Parse `argv` (including the program name), run the verb, and return the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "E_USAGE: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    let result = match &cli.verb {
        Verb::Dispatch(o) => run_dispatch(o, stdout),
        Verb::Price(o) => run_price(o, stdout),
        Verb::Power(o) => run_power(o, stdout),
        Verb::Coalitions(o) => run_coalitions(o, stdout),
        Verb::Sweep(o) => run_sweep(o, stdout),
        Verb::Check(o) => run_check(o, stdout),
    };
    let _ = stdout.flush();
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "E_USAGE: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(stderr, "{}: {e}", e.code());
            1
        }
        Err(Failure::Check(msg)) => {
            let _ = writeln!(stderr, "E_CHECK: {msg}");
            1
        }
    }
}
