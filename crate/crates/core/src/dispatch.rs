//! Non-convex economic dispatch `c(y)` and its restricted form `c^A(y)`.
//!
//! With equal capacities some optimal dispatch always has `m - 1` generators
//! at `G`, one at the partial output `x`, and the rest idle. The solver only
//! has to decide who takes the partial slot: either the costliest-per-MW
//! member of the first `m - 1` in merit order (with generator `m` filling in
//! at `G`), or the cheapest outsider at `x`.

use itertools::Itertools;

use crate::error::{ChpError, Result};
use crate::model::{cmp_with_ties, tie_key, tol, BidProfile, GeneratorCost, MarginalSplit, Market};

/// Largest number of participating generators [`dispatch_oracle`] will enumerate.
pub const ORACLE_MAX_GENERATORS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    /// Output of every generator in MW, each one of `0`, `x` or `G`.
    pub outputs: Vec<f64>,
    /// Cost of `outputs` under the cost profile the dispatch was solved with.
    pub total_cost: f64,
    pub split: MarginalSplit,
    /// Generators barred from producing, ascending.
    pub excluded: Vec<usize>,
    /// Generator holding the partial slot; `None` when `x == G` or demand is zero.
    pub x_holder: Option<usize>,
}

/// `(m, x)` for a demand: `m = ceil(y / G)` and `x = y - (m - 1) G` in `(0, G]`.
///
/// Demand within rounding distance of a multiple of `G` snaps to `x = G`.
pub fn marginal_split(demand: f64, capacity: f64, available: usize) -> Result<MarginalSplit> {
    if !capacity.is_finite() || capacity <= 0.0 {
        return Err(ChpError::Domain(format!(
            "capacity must be positive, got {capacity}"
        )));
    }
    if demand.is_nan() || demand < 0.0 {
        return Err(ChpError::Domain(format!(
            "demand must be non-negative, got {demand}"
        )));
    }
    let available_mw = capacity * available as f64;
    if demand > available_mw + tol(demand, available_mw) {
        return Err(ChpError::infeasible(demand, available_mw));
    }
    if demand == 0.0 {
        return Ok(MarginalSplit {
            marginal_index: 0,
            partial_output: 0.0,
        });
    }
    let ratio = demand / capacity;
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() <= 1e-12 * ratio.max(1.0) {
        return Ok(MarginalSplit {
            marginal_index: (nearest as usize).min(available),
            partial_output: capacity,
        });
    }
    let m = (ratio.ceil() as usize).clamp(1, available.max(1));
    let x = demand - (m - 1) as f64 * capacity;
    Ok(MarginalSplit {
        marginal_index: m,
        partial_output: x.clamp(0.0, capacity),
    })
}

fn excluded_mask(market: &Market, excluded: &[usize]) -> Result<(Vec<bool>, Vec<usize>)> {
    let mut mask = vec![false; market.len()];
    for &k in excluded {
        market.check_index(k)?;
        mask[k] = true;
    }
    let list = (0..market.len()).filter(|&k| mask[k]).collect();
    Ok((mask, list))
}

/// Costs of the two structural candidates compared by [`economic_dispatch`].
///
/// `demote` is the first `m` in merit order with the highest-variable-cost
/// member of the first `m - 1` moved to the partial slot; `outsider` keeps the
/// first `m - 1` at `G` and gives the partial slot to the cheapest remaining
/// generator. `demote` is absent when `m < 2`; both are absent when `x == G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralCandidates {
    pub demote: Option<f64>,
    pub outsider: Option<f64>,
}

struct Solved {
    result: DispatchResult,
    candidates: StructuralCandidates,
}

fn solve(
    market: &Market,
    demand: f64,
    excluded: &[usize],
    bids: Option<&BidProfile>,
) -> Result<Solved> {
    market.check_bids(bids)?;
    let (mask, excluded) = excluded_mask(market, excluded)?;
    let costs: Vec<GeneratorCost> = market.cost_profile(bids);
    let g = market.capacity();
    let n = market.len();
    let split = marginal_split(demand, g, n - excluded.len())?;
    let (m, x) = (split.marginal_index, split.partial_output);

    let mut outputs = vec![0.0; n];
    let none = StructuralCandidates {
        demote: None,
        outsider: None,
    };
    if m == 0 {
        return Ok(Solved {
            result: DispatchResult {
                outputs,
                total_cost: 0.0,
                split,
                excluded,
                x_holder: None,
            },
            candidates: none,
        });
    }

    let full: Vec<f64> = costs.iter().map(|c| c.cost_at(g)).collect();
    let mut ranked: Vec<usize> = (0..n).filter(|&k| !mask[k]).collect();
    ranked.sort_by(|&a, &b| cmp_with_ties((full[a], a), (full[b], b), bids));

    if x >= g {
        for &k in &ranked[..m] {
            outputs[k] = g;
        }
        let total_cost = ranked[..m].iter().map(|&k| full[k]).sum();
        return Ok(Solved {
            result: DispatchResult {
                outputs,
                total_cost,
                split,
                excluded,
                x_holder: None,
            },
            candidates: none,
        });
    }

    let head_cost: f64 = ranked[..m - 1].iter().map(|&k| full[k]).sum();

    // Outsider at x.
    let q = *ranked[m - 1..]
        .iter()
        .min_by(|&&a, &&b| cmp_with_ties((costs[a].cost_at(x), a), (costs[b].cost_at(x), b), bids))
        .expect("at least one generator outside the first m - 1");
    let outsider_cost = head_cost + costs[q].cost_at(x);

    // Demote the highest variable cost among the first m - 1.
    let demote = (m >= 2).then(|| {
        let p = *ranked[..m - 1]
            .iter()
            .max_by(|&&a, &&b| {
                costs[a]
                    .variable_cost
                    .total_cmp(&costs[b].variable_cost)
                    .then_with(|| tie_key(bids, b).cmp(&tie_key(bids, a)))
            })
            .expect("m >= 2");
        let cost = head_cost - full[p] + costs[p].cost_at(x) + full[ranked[m - 1]];
        (p, cost)
    });

    let candidates = StructuralCandidates {
        demote: demote.map(|(_, c)| c),
        outsider: Some(outsider_cost),
    };
    let result = match demote {
        Some((p, cost)) if cost < outsider_cost - tol(cost, outsider_cost) => {
            for &k in &ranked[..m] {
                outputs[k] = g;
            }
            outputs[p] = x;
            DispatchResult {
                outputs,
                total_cost: cost,
                split,
                excluded,
                x_holder: Some(p),
            }
        }
        _ => {
            for &k in &ranked[..m - 1] {
                outputs[k] = g;
            }
            outputs[q] = x;
            DispatchResult {
                outputs,
                total_cost: outsider_cost,
                split,
                excluded,
                x_holder: Some(q),
            }
        }
    };
    Ok(Solved { result, candidates })
}

/// Cost-optimal dispatch of `demand` with the generators in `excluded` barred.
///
/// Costs are the reported ones when `bids` is given. Between equally cheap
/// structural candidates the outsider candidate wins; remaining ties go to the
/// lower index (deviators in `bids` lose ties).
pub fn economic_dispatch(
    market: &Market,
    demand: f64,
    excluded: &[usize],
    bids: Option<&BidProfile>,
) -> Result<DispatchResult> {
    solve(market, demand, excluded, bids).map(|s| s.result)
}

/// Costs of both structural candidates at `demand`; used to locate the bids
/// at which the operator switches between them.
pub fn structural_candidates(
    market: &Market,
    demand: f64,
    excluded: &[usize],
    bids: Option<&BidProfile>,
) -> Result<StructuralCandidates> {
    solve(market, demand, excluded, bids).map(|s| s.candidates)
}

/// Restricted system cost `c^A(y)`; `c(y)` when `excluded` is empty.
pub fn restricted_cost(market: &Market, demand: f64, excluded: &[usize]) -> Result<f64> {
    economic_dispatch(market, demand, excluded, None).map(|d| d.total_cost)
}

/// Exhaustive reference solver.
///
/// Tries every way to put `m - 1` generators at `G` and one at `x` (every
/// `m`-subset at `G` when `x == G`) and keeps the cheapest. Exact cost ties are
/// broken by enumeration order (partial-slot holder by index, then the
/// full-output set lexicographically), which can differ from
/// [`economic_dispatch`] only when several assignments cost the same.
pub fn dispatch_oracle(
    market: &Market,
    demand: f64,
    excluded: &[usize],
    bids: Option<&BidProfile>,
) -> Result<DispatchResult> {
    market.check_bids(bids)?;
    let (mask, excluded) = excluded_mask(market, excluded)?;
    let n = market.len();
    let available: Vec<usize> = (0..n).filter(|&k| !mask[k]).collect();
    if available.len() > ORACLE_MAX_GENERATORS {
        return Err(ChpError::TooLarge(format!(
            "dispatch oracle enumerates at most {ORACLE_MAX_GENERATORS} generators, got {}",
            available.len()
        )));
    }
    let g = market.capacity();
    let split = marginal_split(demand, g, available.len())?;
    let (m, x) = (split.marginal_index, split.partial_output);
    let costs = market.cost_profile(bids);
    let assignment_cost =
        |outputs: &[f64]| -> f64 { outputs.iter().zip(&costs).map(|(&o, c)| c.cost_at(o)).sum() };

    let mut best: Option<(f64, Vec<f64>, Option<usize>)> = None;
    let mut consider = |outputs: Vec<f64>, holder: Option<usize>| {
        let cost = assignment_cost(&outputs);
        let better = match &best {
            None => true,
            Some((b, _, _)) => cost < *b - tol(cost, *b),
        };
        if better {
            best = Some((cost, outputs, holder));
        }
    };

    if m == 0 {
        consider(vec![0.0; n], None);
    } else if x >= g {
        for set in available.iter().copied().combinations(m) {
            let mut outputs = vec![0.0; n];
            for k in set {
                outputs[k] = g;
            }
            consider(outputs, None);
        }
    } else {
        for &holder in &available {
            let rest: Vec<usize> = available.iter().copied().filter(|&k| k != holder).collect();
            for set in rest.into_iter().combinations(m - 1) {
                let mut outputs = vec![0.0; n];
                for k in set {
                    outputs[k] = g;
                }
                outputs[holder] = x;
                consider(outputs, Some(holder));
            }
        }
    }

    let (total_cost, outputs, x_holder) = best.expect("at least one assignment");
    Ok(DispatchResult {
        outputs,
        total_cost,
        split,
        excluded,
        x_holder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> Market {
        Market::from_costs(10.0, &[10.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn split_examples() {
        let s = marginal_split(15.0, 10.0, 4).unwrap();
        assert_eq!((s.marginal_index, s.partial_output), (2, 5.0));
        let s = marginal_split(20.0, 10.0, 4).unwrap();
        assert_eq!((s.marginal_index, s.partial_output), (2, 10.0));
        let s = marginal_split(0.0, 10.0, 4).unwrap();
        assert_eq!((s.marginal_index, s.partial_output), (0, 0.0));
        assert!(matches!(
            marginal_split(41.0, 10.0, 4),
            Err(ChpError::Infeasible { .. })
        ));
        assert!(matches!(
            marginal_split(-1.0, 10.0, 4),
            Err(ChpError::Domain(_))
        ));
    }

    #[test]
    fn split_snaps_float_multiples() {
        let y = 0.1 + 0.2; // 0.30000000000000004
        let s = marginal_split(y, 0.1, 4).unwrap();
        assert_eq!(s.marginal_index, 3);
        assert_eq!(s.partial_output, 0.1);
    }

    #[test]
    fn worked_market_dispatch() {
        let m = worked();
        let d = economic_dispatch(&m, 15.0, &[], None).unwrap();
        assert_eq!(d.outputs, vec![10.0, 5.0, 0.0, 0.0]);
        assert_eq!(d.total_cost, 40.0);
        assert_eq!(d.x_holder, Some(1));

        let d = economic_dispatch(&m, 15.0, &[0], None).unwrap();
        assert_eq!(d.outputs, vec![0.0, 10.0, 5.0, 0.0]);
        assert_eq!(d.total_cost, 55.0);
        assert_eq!(d.excluded, vec![0]);
    }

    #[test]
    fn empty_and_full_dispatch() {
        let m = worked();
        let d = economic_dispatch(&m, 0.0, &[], None).unwrap();
        assert_eq!(d.outputs, vec![0.0; 4]);
        assert_eq!(d.total_cost, 0.0);
        let d = economic_dispatch(&m, 40.0, &[], None).unwrap();
        assert_eq!(d.outputs, vec![10.0; 4]);
        assert_eq!(d.total_cost, 140.0);
        assert_eq!(d.x_holder, None);
    }

    #[test]
    fn demote_candidate_wins_when_outsiders_are_expensive() {
        // Generator 1 has a big variable cost but cheap startup; generator 2
        // has a huge startup. At y = 15 shifting generator 1 to x is cheaper
        // than starting anyone else.
        let m = Market::from_costs(10.0, &[0.0, 100.0, 200.0], &[5.0, 0.0, 0.0]).unwrap();
        let d = economic_dispatch(&m, 15.0, &[], None).unwrap();
        let o = dispatch_oracle(&m, 15.0, &[], None).unwrap();
        assert_eq!(d.x_holder, Some(0));
        assert_eq!(d.outputs, vec![5.0, 10.0, 0.0]);
        assert_eq!(d.total_cost, o.total_cost);
    }

    #[test]
    fn infeasible_carries_shortfall() {
        let m = worked();
        match economic_dispatch(&m, 35.0, &[0], None) {
            Err(ChpError::Infeasible { shortfall, .. }) => assert!((shortfall - 5.0).abs() < 1e-12),
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert!(economic_dispatch(&m, 30.0, &[0], None).is_ok());
    }

    #[test]
    fn oracle_three_generators() {
        let m = Market::from_costs(10.0, &[10.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        let o = dispatch_oracle(&m, 15.0, &[], None).unwrap();
        assert_eq!(o.total_cost, 40.0);
        assert_eq!(o.outputs, vec![10.0, 5.0, 0.0]);
        let full = dispatch_oracle(&m, 30.0, &[], None).unwrap();
        assert_eq!(full, economic_dispatch(&m, 30.0, &[], None).unwrap());
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let m = Market::from_costs(1.0, &[1.0; 13], &[1.0; 13]).unwrap();
        assert!(matches!(
            dispatch_oracle(&m, 3.0, &[], None),
            Err(ChpError::TooLarge(_))
        ));
        assert!(dispatch_oracle(&m, 3.0, &[0], None).is_ok());
    }

    #[test]
    fn dispatch_uses_reported_costs() {
        let m = worked();
        let bids = BidProfile::deviate(&m, 1, 2.9).unwrap();
        let d = economic_dispatch(&m, 15.0, &[], Some(&bids)).unwrap();
        assert_eq!(d.outputs, vec![10.0, 5.0, 0.0, 0.0]);
        assert!((d.total_cost - 44.5).abs() < 1e-12);
    }
}
