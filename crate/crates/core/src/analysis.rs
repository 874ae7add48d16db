//! Scenario files, load sweeps and coalition statistics.
//!
//! A sweep walks a grid of loads and, for each coalition size, enumerates every
//! coalition of that size, computes its closed-form market power and
//! aggregates the result into one [`SweepRow`].

use std::io::{Read, Write};

use itertools::Itertools;
use rayon::prelude::*;
use serde::Deserialize;

use crate::dispatch::restricted_cost;
use crate::error::{ChpError, Result};
use crate::model::{approx_le, GeneratorCost, Market, TAU};
use crate::strategic::truthful_profits;

/// Largest number of coalitions [`coalition_stats`] enumerates for one size.
pub const MAX_COALITIONS: u128 = 10_000_000;

/// Header of the per-load CSV.
pub const CSV_HEADER: &str =
    "load_mw,coalition_size,n_coalitions,n_with_power,pct_with_power,mean_power,mean_power_powerholders,max_power";

/// Header of the per-size aggregate CSV.
pub const SIZE_CSV_HEADER: &str =
    "coalition_size,n_coalitions,n_with_power,pct_with_power,mean_power,mean_power_powerholders,max_power";

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub market: Market,
    pub load_min: f64,
    pub load_max: f64,
    pub load_step: f64,
    pub max_coalition: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    label: String,
    capacity_mw: f64,
    generators: Vec<GeneratorEntry>,
    load_min_mw: f64,
    load_max_mw: f64,
    load_step_mw: f64,
    max_coalition: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorEntry {
    name: String,
    startup_cost: f64,
    variable_cost: f64,
    /// Optional; must equal the shared capacity when present.
    #[serde(default)]
    capacity_mw: Option<f64>,
}

impl Scenario {
    pub fn new(
        label: impl Into<String>,
        market: Market,
        load_min: f64,
        load_max: f64,
        load_step: f64,
        max_coalition: usize,
    ) -> Result<Self> {
        let s = Self {
            label: label.into(),
            market,
            load_min,
            load_max,
            load_step,
            max_coalition,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let n = self.market.len();
        if !(self.load_min.is_finite() && self.load_max.is_finite() && self.load_min >= 0.0) {
            return Err(ChpError::Config(format!(
                "loads must be finite and non-negative, got {}..{}",
                self.load_min, self.load_max
            )));
        }
        if self.load_min > self.load_max {
            return Err(ChpError::Config(format!(
                "load_min_mw {} exceeds load_max_mw {}",
                self.load_min, self.load_max
            )));
        }
        if !(self.load_step.is_finite() && self.load_step > 0.0) {
            return Err(ChpError::Config(format!(
                "load_step_mw must be positive, got {}",
                self.load_step
            )));
        }
        if self.max_coalition > n {
            return Err(ChpError::Config(format!(
                "max_coalition {} exceeds the {n} generators",
                self.max_coalition
            )));
        }
        let remaining = (n - self.max_coalition) as f64 * self.market.capacity();
        if !approx_le(self.load_max, remaining) {
            return Err(ChpError::Config(format!(
                "without {} generators only {remaining} MW remain, below load_max_mw {}",
                self.max_coalition, self.load_max
            )));
        }
        Ok(())
    }

    /// `load_min, load_min + step, ...` up to and including `load_max`.
    pub fn loads(&self) -> Vec<f64> {
        load_grid(self.load_min, self.load_max, self.load_step)
    }
}

pub fn load_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let mut loads = Vec::new();
    let mut k = 0usize;
    loop {
        let load = min + k as f64 * step;
        if load > max + TAU * max.abs().max(1.0) {
            break;
        }
        loads.push(load.min(max));
        k += 1;
    }
    loads
}

/// Parse and validate a scenario document.
pub fn load_scenario(mut source: impl Read) -> Result<Scenario> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| ChpError::Schema(e.to_string()))?;
    let mut generators = Vec::with_capacity(file.generators.len());
    let mut names = Vec::with_capacity(file.generators.len());
    for (k, g) in file.generators.into_iter().enumerate() {
        if let Some(cap) = g.capacity_mw {
            if cap != file.capacity_mw {
                return Err(ChpError::Config(format!(
                    "generator {} ({}) has capacity_mw {cap}, but every generator must share capacity_mw {}",
                    k + 1,
                    g.name,
                    file.capacity_mw
                )));
            }
        }
        generators.push(
            GeneratorCost::new(g.startup_cost, g.variable_cost)
                .map_err(|e| ChpError::Config(format!("generator {} ({}): {e}", k + 1, g.name)))?,
        );
        names.push(g.name);
    }
    let market = Market::with_names(file.capacity_mw, generators, names)
        .map_err(|e| ChpError::Config(e.to_string()))?;
    Scenario::new(
        file.label,
        market,
        file.load_min_mw,
        file.load_max_mw,
        file.load_step_mw,
        file.max_coalition,
    )
}

/// Coalition statistics at one load for one coalition size.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub load: f64,
    pub coalition_size: usize,
    pub n_coalitions: usize,
    pub n_with_power: usize,
    pub pct_with_power: f64,
    pub mean_power: f64,
    pub mean_power_over_powerholders: f64,
    pub max_power: f64,
}

/// Running totals behind a [`SweepRow`] or [`SizeAggregate`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    count: usize,
    with_power: usize,
    total: f64,
    total_holders: f64,
    max: f64,
}

impl Tally {
    fn add(&mut self, power: f64) {
        if self.count == 0 || power > self.max {
            self.max = power;
        }
        self.count += 1;
        self.total += power;
        if power > TAU {
            self.with_power += 1;
            self.total_holders += power;
        }
    }

    fn merge(&mut self, other: &Tally) {
        if other.count > 0 && (self.count == 0 || other.max > self.max) {
            self.max = other.max;
        }
        self.count += other.count;
        self.with_power += other.with_power;
        self.total += other.total;
        self.total_holders += other.total_holders;
    }

    fn ratios(&self) -> (f64, f64, f64) {
        let per = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
        (
            per(self.with_power as f64, self.count),
            per(self.total, self.count),
            per(self.total_holders, self.with_power),
        )
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn tally(market: &Market, demand: f64, size: usize) -> Result<Tally> {
    if size == 0 {
        return Err(ChpError::Domain("coalition size must be at least 1".into()));
    }
    let n = market.len();
    let count = binomial(n, size);
    if count > MAX_COALITIONS {
        return Err(ChpError::TooLarge(format!(
            "C({n}, {size}) = {count} coalitions exceeds the bound {MAX_COALITIONS}"
        )));
    }
    let mut t = Tally::default();
    if size > n || !approx_le(demand, (n - size) as f64 * market.capacity()) {
        return Ok(t);
    }
    let base = restricted_cost(market, demand, &[])?;
    let profits = truthful_profits(market, demand)?;
    let coalitions: Vec<Vec<usize>> = (0..n).combinations(size).collect();
    let powers = coalitions
        .par_iter()
        .map(|members| {
            let rent: f64 = members.iter().map(|&k| profits[k]).sum();
            Ok(restricted_cost(market, demand, members)? - base - rent)
        })
        .collect::<Result<Vec<f64>>>()?;
    for p in powers {
        t.add(p);
    }
    Ok(t)
}

fn row_from(load: f64, size: usize, t: &Tally) -> SweepRow {
    let (pct, mean, mean_holders) = t.ratios();
    SweepRow {
        load,
        coalition_size: size,
        n_coalitions: t.count,
        n_with_power: t.with_power,
        pct_with_power: pct,
        mean_power: mean,
        mean_power_over_powerholders: mean_holders,
        max_power: if t.count == 0 { 0.0 } else { t.max },
    }
}

/// Enumerate every coalition of `size` generators at `demand`, skipping those
/// whose removal leaves demand uncovered, and summarise their power.
pub fn coalition_stats(market: &Market, demand: f64, size: usize) -> Result<SweepRow> {
    Ok(row_from(demand, size, &tally(market, demand, size)?))
}

/// Coalition statistics for one size pooled over every load of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeAggregate {
    pub coalition_size: usize,
    pub n_coalitions: usize,
    pub n_with_power: usize,
    pub pct_with_power: f64,
    pub mean_power: f64,
    pub mean_power_over_powerholders: f64,
    pub max_power: f64,
}

/// Least-squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Load-major, then coalition size.
    pub rows: Vec<SweepRow>,
    pub by_size: Vec<SizeAggregate>,
    /// Pooled mean power against coalition size.
    pub mean_power_fit: Option<LinearFit>,
}

/// Run the full load-by-size sweep on the global thread pool.
pub fn sweep(scenario: &Scenario) -> Result<SweepReport> {
    sweep_loads(&scenario.market, &scenario.loads(), scenario.max_coalition)
}

/// [`sweep`] on a dedicated pool of `workers` threads.
pub fn sweep_with_workers(scenario: &Scenario, workers: usize) -> Result<SweepReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ChpError::Io(e.to_string()))?;
    pool.install(|| sweep(scenario))
}

/// Sweep an explicit list of loads for coalition sizes `1..=max_size`.
pub fn sweep_loads(market: &Market, loads: &[f64], max_size: usize) -> Result<SweepReport> {
    let tallies: Vec<Vec<Tally>> = loads
        .par_iter()
        .map(|&load| {
            (1..=max_size)
                .map(|size| tally(market, load, size))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(loads.len() * max_size);
    let mut pooled = vec![Tally::default(); max_size];
    for (&load, per_size) in loads.iter().zip(&tallies) {
        for (s, t) in per_size.iter().enumerate() {
            rows.push(row_from(load, s + 1, t));
            pooled[s].merge(t);
        }
    }
    let by_size: Vec<SizeAggregate> = pooled
        .iter()
        .enumerate()
        .map(|(s, t)| {
            let (pct, mean, mean_holders) = t.ratios();
            SizeAggregate {
                coalition_size: s + 1,
                n_coalitions: t.count,
                n_with_power: t.with_power,
                pct_with_power: pct,
                mean_power: mean,
                mean_power_over_powerholders: mean_holders,
                max_power: if t.count == 0 { 0.0 } else { t.max },
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = by_size
        .iter()
        .filter(|a| a.n_coalitions > 0)
        .map(|a| (a.coalition_size as f64, a.mean_power))
        .collect();
    Ok(SweepReport {
        rows,
        by_size,
        mean_power_fit: linear_fit(&points),
    })
}

/// `true` when every value is at least its predecessor, up to tolerance.
pub fn non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| approx_le(w[0], w[1]))
}

pub fn write_rows_csv(rows: &[SweepRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{:.6},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.load,
            r.coalition_size,
            r.n_coalitions,
            r.n_with_power,
            r.pct_with_power,
            r.mean_power,
            r.mean_power_over_powerholders,
            r.max_power
        )?;
    }
    Ok(())
}

pub fn write_size_csv(rows: &[SizeAggregate], mut out: impl Write) -> Result<()> {
    writeln!(out, "{SIZE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.coalition_size,
            r.n_coalitions,
            r.n_with_power,
            r.pct_with_power,
            r.mean_power,
            r.mean_power_over_powerholders,
            r.max_power
        )?;
    }
    Ok(())
}
