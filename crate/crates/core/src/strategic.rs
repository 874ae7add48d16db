//! Strategic bidding under convex hull pricing.
//!
//! A deviating generator may only misreport its variable cost. Its profit is
//! the price-taking profit of the generator it pretends to be, plus the
//! difference between reported and true cost of whatever the operator
//! dispatches it at. The closed-form market power index compares the system
//! cost with and without the generator against its truthful rent; the
//! best-response oracles search the report space directly.

use rayon::prelude::*;

use crate::dispatch::{economic_dispatch, restricted_cost, structural_candidates, DispatchResult};
use crate::error::{ChpError, Result};
use crate::model::{approx_eq, tol, BidProfile, Market};
use crate::pricing::convex_hull_price;

/// `m`-th smallest full-capacity cost under `bids`, or `None` for zero demand.
fn marginal_full_cost(
    market: &Market,
    demand: f64,
    bids: Option<&BidProfile>,
) -> Result<Option<f64>> {
    let g = market.capacity();
    let split = crate::dispatch::marginal_split(demand, g, market.len())?;
    if split.marginal_index == 0 {
        return Ok(None);
    }
    let mut full: Vec<f64> = market
        .cost_profile(bids)
        .iter()
        .map(|c| c.cost_at(g))
        .collect();
    let (_, &mut mth, _) = full.select_nth_unstable_by(split.marginal_index - 1, f64::total_cmp);
    Ok(Some(mth))
}

/// Benchmark profit under truthful bidding: `{f_m(G) - f_i(G)}^+`.
pub fn truthful_profit(market: &Market, demand: f64, generator: usize) -> Result<f64> {
    let own = market.generator(generator)?.cost_at(market.capacity());
    Ok(marginal_full_cost(market, demand, None)?
        .map(|mth| (mth - own).max(0.0))
        .unwrap_or(0.0))
}

/// Benchmark profits of every generator.
pub fn truthful_profits(market: &Market, demand: f64) -> Result<Vec<f64>> {
    let g = market.capacity();
    let mth = marginal_full_cost(market, demand, None)?;
    Ok(market
        .generators()
        .iter()
        .map(|c| mth.map_or(0.0, |m| (m - c.cost_at(g)).max(0.0)))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategicOutcome {
    pub deviator: usize,
    pub reported_v: f64,
    /// Convex hull price computed on the reported costs.
    pub price: f64,
    /// Operator dispatch computed on the reported costs.
    pub dispatch: DispatchResult,
    /// True profit of the deviator.
    pub profit: f64,
    /// Price-taking profit of the pretended cost function at the new price.
    pub bid_profit: f64,
    /// Reported minus true cost of the dispatched output.
    pub cost_guise: f64,
}

struct Evaluated {
    price: f64,
    dispatch: DispatchResult,
    /// Per-member (bid_profit, cost_guise).
    parts: Vec<(f64, f64)>,
}

fn evaluate_reports(
    market: &Market,
    demand: f64,
    bids: &BidProfile,
    members: &[usize],
) -> Result<Evaluated> {
    let g = market.capacity();
    let price = convex_hull_price(market, demand, Some(bids))?.price;
    let mth = marginal_full_cost(market, demand, Some(bids))?;
    let dispatch = economic_dispatch(market, demand, &[], Some(bids))?;
    let parts = members
        .iter()
        .map(|&k| {
            let truth = market.generators()[k];
            let reported = truth.with_variable_cost(bids.reported_variable_costs()[k]);
            let bid_profit = mth.map_or(0.0, |m| (m - reported.cost_at(g)).max(0.0));
            let out = dispatch.outputs[k];
            (bid_profit, reported.cost_at(out) - truth.cost_at(out))
        })
        .collect();
    Ok(Evaluated {
        price,
        dispatch,
        parts,
    })
}

/// Profit of generator `generator` when it reports `reported_v` and everyone
/// else is truthful.
pub fn strategic_profit(
    market: &Market,
    demand: f64,
    generator: usize,
    reported_v: f64,
) -> Result<StrategicOutcome> {
    let bids = BidProfile::deviate(market, generator, reported_v)?;
    let e = evaluate_reports(market, demand, &bids, &[generator])?;
    let (bid_profit, cost_guise) = e.parts[0];
    Ok(StrategicOutcome {
        deviator: generator,
        reported_v,
        price: e.price,
        dispatch: e.dispatch,
        profit: bid_profit + cost_guise,
        bid_profit,
        cost_guise,
    })
}

/// Summed true profit of a set of colluding generators, each reporting its
/// own variable cost while everyone else is truthful.
pub fn coalition_profit(market: &Market, demand: f64, reports: &[(usize, f64)]) -> Result<f64> {
    let mut bids = BidProfile::truthful(market);
    for &(k, v) in reports {
        bids = bids.with_report(market, k, v)?;
    }
    let members: Vec<usize> = reports.iter().map(|&(k, _)| k).collect();
    let e = evaluate_reports(market, demand, &bids, &members)?;
    Ok(e.parts.iter().map(|(a, b)| a + b).sum())
}

/// Result of a one-dimensional best-response search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    /// Largest deviator profit found.
    pub sup_profit: f64,
    /// Report achieving it.
    pub arg_v: f64,
    /// `false` when the profit only approaches its supremum next to a
    /// breakpoint where it then drops.
    pub attained: bool,
}

/// Reports at which the operator's ranking, partial-slot choice or candidate
/// comparison changes as `generator` varies its variable cost.
pub fn report_breakpoints(market: &Market, demand: f64, generator: usize) -> Result<Vec<f64>> {
    let own = *market.generator(generator)?;
    let g = market.capacity();
    let split = crate::dispatch::marginal_split(demand, g, market.len())?;
    let x = split.partial_output;
    let mut points = Vec::new();
    for (k, c) in market.generators().iter().enumerate() {
        if k == generator {
            continue;
        }
        points.push((c.cost_at(g) - own.startup_cost) / g);
        if x > 0.0 && x < g {
            points.push((c.cost_at(x) - own.startup_cost) / x);
        }
        points.push(c.variable_cost);
    }
    points.retain(|p| p.is_finite() && *p >= 0.0);
    sort_dedup(&mut points);

    // Between consecutive structural breakpoints both candidate costs are
    // linear in the report; solve for where they cross.
    if x > 0.0 && x < g && split.marginal_index >= 2 {
        let gap_at = |v: f64| -> Result<Option<f64>> {
            let bids = BidProfile::deviate(market, generator, v)?;
            let c = structural_candidates(market, demand, &[], Some(&bids))?;
            Ok(c.demote.zip(c.outsider).map(|(a, b)| a - b))
        };
        let mut bounds = vec![0.0];
        bounds.extend(points.iter().copied().filter(|&p| p > 0.0));
        let mut crossings = Vec::new();
        for (w, &lo) in bounds.iter().enumerate() {
            let hi = bounds.get(w + 1).copied();
            let (t1, t2) = match hi {
                Some(hi) if hi - lo > 0.0 => (lo + (hi - lo) / 3.0, lo + 2.0 * (hi - lo) / 3.0),
                Some(_) => continue,
                None => (lo + 1.0, lo + 2.0),
            };
            if let (Some(d1), Some(d2)) = (gap_at(t1)?, gap_at(t2)?) {
                if d1 != d2 {
                    let root = t1 - d1 * (t2 - t1) / (d2 - d1);
                    if root >= lo && hi.is_none_or(|hi| root <= hi) {
                        crossings.push(root);
                    }
                }
            }
        }
        points.extend(crossings);
        sort_dedup(&mut points);
    }
    Ok(points)
}

fn sort_dedup(points: &mut Vec<f64>) {
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| approx_eq(*a, *b));
}

fn uniform_grid(top: f64, step: f64) -> impl Iterator<Item = f64> {
    let count = (top / step).ceil() as usize;
    (0..=count).map(move |t| t as f64 * step)
}

/// Candidate reports for `generator`: its true cost, every breakpoint and its
/// neighbours at distance `step`, and a uniform grid over
/// `[0, max_k f_k(G) / G + 1]`.
fn report_candidates(
    market: &Market,
    demand: f64,
    generator: usize,
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = market.capacity();
    let breakpoints = report_breakpoints(market, demand, generator)?;
    let top = market
        .generators()
        .iter()
        .map(|c| c.cost_at(g) / g)
        .fold(0.0, f64::max)
        + 1.0;
    let mut candidates = vec![market.generators()[generator].variable_cost];
    for &b in &breakpoints {
        candidates.extend([b - step, b, b + step].into_iter().filter(|&v| v >= 0.0));
    }
    candidates.extend(uniform_grid(top, step));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    Ok((candidates, breakpoints))
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(ChpError::Domain(format!(
            "grid step must be positive, got {step}"
        )))
    }
}

/// Search the deviator's report space for its best profit.
///
/// Among equally profitable reports the truthful one is preferred, then the
/// highest report.
pub fn best_response_oracle(
    market: &Market,
    demand: f64,
    generator: usize,
    grid_step: f64,
) -> Result<BestResponse> {
    check_step(grid_step)?;
    market.check_index(generator)?;
    let (candidates, breakpoints) = report_candidates(market, demand, generator, grid_step)?;
    let profit = |v: f64| strategic_profit(market, demand, generator, v).map(|o| o.profit);
    let profits: Vec<f64> = candidates
        .par_iter()
        .map(|&v| profit(v))
        .collect::<Result<_>>()?;

    let best = profits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let truthful_v = market.generators()[generator].variable_cost;
    let near_best = |p: f64| p >= best - tol(p, best);
    let truthful_profit = profit(truthful_v)?;
    let arg_v = if near_best(truthful_profit) {
        truthful_v
    } else {
        candidates
            .iter()
            .zip(&profits)
            .filter(|(_, &p)| near_best(p))
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let sup_profit = if arg_v == truthful_v {
        truthful_profit.max(best)
    } else {
        best
    };

    // Approached, not attained: the best sample sits one step beside a
    // breakpoint, profit is still rising towards it and drops at it.
    let mut attained = true;
    for &b in &breakpoints {
        for dir in [-1.0, 1.0] {
            if approx_eq(arg_v, b + dir * grid_step) {
                let at_b = profit(b)?;
                let further = arg_v + dir * grid_step;
                let rising = further < 0.0 || profit(further)? < sup_profit - tol(sup_profit, 0.0);
                if at_b < sup_profit - tol(sup_profit, at_b) && rising {
                    attained = false;
                }
            }
        }
    }
    Ok(BestResponse {
        sup_profit,
        arg_v,
        attained,
    })
}

/// Dispatch targets for the case-wise supremum bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTarget {
    Idle,
    Partial,
    Full,
}

/// Closed-form bound on the deviator's profit restricted to ending up idle,
/// at the partial output `x`, or at full capacity.
pub fn case_supremum(
    market: &Market,
    demand: f64,
    generator: usize,
    target: CaseTarget,
) -> Result<f64> {
    let own = *market.generator(generator)?;
    let g = market.capacity();
    let split = crate::dispatch::marginal_split(demand, g, market.len())?;
    let (m, x) = (split.marginal_index, split.partial_output);
    let excl = [generator];
    match target {
        CaseTarget::Idle => Ok(0.0),
        CaseTarget::Partial => {
            if m == 0 {
                return Ok(0.0);
            }
            let full = restricted_cost(market, demand, &excl)?;
            let base = restricted_cost(market, (m - 1) as f64 * g, &excl)?;
            Ok(full - base - own.cost_at(x))
        }
        CaseTarget::Full => {
            let rest = demand - g;
            if rest < -tol(demand, g) {
                return Err(ChpError::Domain(format!(
                    "demand {demand} MW is below one unit of capacity; no full-output dispatch exists"
                )));
            }
            let full = restricted_cost(market, demand, &excl)?;
            let base = restricted_cost(market, rest.max(0.0), &excl)?;
            Ok(full - base - own.cost_at(g))
        }
    }
}

/// Closed-form market power `c^{i}(y) - c(y) - P_i`.
pub fn market_power_index(market: &Market, demand: f64, generator: usize) -> Result<f64> {
    let without = restricted_cost(market, demand, &[generator])?;
    let with = restricted_cost(market, demand, &[])?;
    Ok(without - with - truthful_profit(market, demand, generator)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionReport {
    pub members: Vec<usize>,
    /// `c^A(y) - c(y) - sum P_i`; `None` when the rest cannot cover demand.
    pub power: Option<f64>,
    pub feasible: bool,
}

fn normalize_members(market: &Market, members: &[usize]) -> Result<Vec<usize>> {
    if members.is_empty() {
        return Err(ChpError::Domain(
            "a coalition needs at least one member".into(),
        ));
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &k in &sorted {
        market.check_index(k)?;
    }
    Ok(sorted)
}

/// Closed-form power of a colluding set; any size.
pub fn coalition_power(market: &Market, demand: f64, members: &[usize]) -> Result<CoalitionReport> {
    let members = normalize_members(market, members)?;
    let remaining = (market.len() - members.len()) as f64 * market.capacity();
    let feasible = crate::model::approx_le(demand, remaining);
    if !feasible {
        return Ok(CoalitionReport {
            members,
            power: None,
            feasible,
        });
    }
    let profits = truthful_profits(market, demand)?;
    let rent: f64 = members.iter().map(|&k| profits[k]).sum();
    let power =
        restricted_cost(market, demand, &members)? - restricted_cost(market, demand, &[])? - rent;
    Ok(CoalitionReport {
        members,
        power: Some(power),
        feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupermodularityViolation {
    pub i: usize,
    pub j: usize,
    pub pair_power: f64,
    pub single_sum: f64,
    /// `M(i) + M(j) - M(i u j)`, positive for a violation.
    pub gap: f64,
}

/// Every feasible pair with `M(i u j) < M(i) + M(j)`; expected to be empty.
pub fn check_supermodularity(
    market: &Market,
    demand: f64,
) -> Result<Vec<SupermodularityViolation>> {
    let n = market.len();
    if n < 2 || !crate::model::approx_le(demand, (n - 2) as f64 * market.capacity()) {
        return Ok(Vec::new());
    }
    let base = restricted_cost(market, demand, &[])?;
    let profits = truthful_profits(market, demand)?;
    let single: Vec<f64> = (0..n)
        .map(|i| Ok(restricted_cost(market, demand, &[i])? - base - profits[i]))
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let pair_power =
                restricted_cost(market, demand, &[i, j])? - base - profits[i] - profits[j];
            let single_sum = single[i] + single[j];
            if pair_power < single_sum - tol(pair_power, single_sum) {
                violations.push(SupermodularityViolation {
                    i,
                    j,
                    pair_power,
                    single_sum,
                    gap: single_sum - pair_power,
                });
            }
        }
    }
    Ok(violations)
}

/// `M(A u B) - M(A) - M(B)` for disjoint sets, or `None` if any of the three
/// exclusions is infeasible. A diagnostic only; no sign is guaranteed.
pub fn set_supermodularity_gap(
    market: &Market,
    demand: f64,
    a: &[usize],
    b: &[usize],
) -> Result<Option<f64>> {
    if a.iter().any(|k| b.contains(k)) {
        return Err(ChpError::Domain("coalitions must be disjoint".into()));
    }
    let union: Vec<usize> = a.iter().chain(b).copied().collect();
    let (pa, pb, pu) = (
        coalition_power(market, demand, a)?.power,
        coalition_power(market, demand, b)?.power,
        coalition_power(market, demand, &union)?.power,
    );
    Ok(match (pa, pb, pu) {
        (Some(pa), Some(pb), Some(pu)) => Some(pu - pa - pb),
        _ => None,
    })
}

/// Joint search over both members' reports; returns the best additional
/// profit of the pair over `P_i + P_j`.
pub fn pair_best_response_oracle(
    market: &Market,
    demand: f64,
    i: usize,
    j: usize,
    grid_step: f64,
) -> Result<f64> {
    check_step(grid_step)?;
    market.check_index(i)?;
    market.check_index(j)?;
    if i == j {
        return Err(ChpError::Domain(
            "a pair needs two distinct generators".into(),
        ));
    }
    let (ci, _) = report_candidates(market, demand, i, grid_step)?;
    let (cj, _) = report_candidates(market, demand, j, grid_step)?;
    let best = ci
        .par_iter()
        .map(|&vi| {
            cj.iter().try_fold(f64::NEG_INFINITY, |acc, &vj| {
                coalition_profit(market, demand, &[(i, vi), (j, vj)]).map(|p| acc.max(p))
            })
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let rent = truthful_profit(market, demand, i)? + truthful_profit(market, demand, j)?;
    Ok(best - rent)
}

/// One generator's best-response result next to its benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGain {
    pub sup_profit: f64,
    /// `sup_profit - P_i`.
    pub additional_gain: f64,
    pub attained: bool,
    pub arg_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub demand: f64,
    pub benchmark_profits: Vec<f64>,
    /// `None` where removing the generator leaves demand uncovered.
    pub closed_form_power: Vec<Option<f64>>,
    pub oracle_power: Option<Vec<OracleGain>>,
    /// Closed form and oracle agree within `G * grid_step`; empty without oracle.
    pub equality_flags: Vec<bool>,
}

impl PowerReport {
    /// Fraction of generators whose closed form matches the oracle.
    pub fn equality_rate(&self) -> Option<f64> {
        (!self.equality_flags.is_empty()).then(|| {
            self.equality_flags.iter().filter(|&&f| f).count() as f64
                / self.equality_flags.len() as f64
        })
    }
}

/// Benchmark profits and closed-form power for every generator, plus the
/// best-response oracle when `oracle_step` is given.
pub fn power_report(market: &Market, demand: f64, oracle_step: Option<f64>) -> Result<PowerReport> {
    let benchmark_profits = truthful_profits(market, demand)?;
    let closed_form_power = (0..market.len())
        .map(|i| match market_power_index(market, demand, i) {
            Ok(v) => Ok(Some(v)),
            Err(ChpError::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let (oracle_power, equality_flags) = match oracle_step {
        None => (None, Vec::new()),
        Some(step) => {
            let gains = (0..market.len())
                .map(|i| {
                    let br = best_response_oracle(market, demand, i, step)?;
                    Ok(OracleGain {
                        sup_profit: br.sup_profit,
                        additional_gain: br.sup_profit - benchmark_profits[i],
                        attained: br.attained,
                        arg_v: br.arg_v,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let slack = market.capacity() * step;
            let flags = gains
                .iter()
                .zip(&closed_form_power)
                .map(|(o, m)| {
                    m.is_some_and(|m| {
                        (o.additional_gain - m).abs() <= slack + tol(o.additional_gain, m)
                    })
                })
                .collect();
            (Some(gains), flags)
        }
    };
    Ok(PowerReport {
        demand,
        benchmark_profits,
        closed_form_power,
        oracle_power,
        equality_flags,
    })
}
