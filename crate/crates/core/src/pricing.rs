//! Convex hull price, price-taking profits and uplift payments.
//!
//! For step costs a generator facing price `p` either wants to produce its full
//! capacity or nothing, so the price minimising total uplift is the `m`-th
//! smallest average cost `f(G) / G`.

use crate::dispatch::{economic_dispatch, DispatchResult};
use crate::error::{ChpError, Result};
use crate::model::{approx_le, tol, BidProfile, GeneratorCost, Market};

/// Perturbation applied on both sides of every average-cost kink when scanning
/// total uplift.
pub const KINK_EPSILON: f64 = 1e-6;

/// Largest output maximising `p z - f(z)` over `z` in `[0, G]`: `G` once the
/// full-capacity profit is non-negative, zero otherwise.
pub fn desired_output(cost: &GeneratorCost, price: f64, capacity: f64) -> f64 {
    let full = cost.cost_at(capacity);
    if approx_le(full, price * capacity) {
        capacity
    } else {
        0.0
    }
}

/// Best profit available to a price taker: `max(0, p G - f(G))`.
pub fn max_profit(cost: &GeneratorCost, price: f64, capacity: f64) -> f64 {
    (price * capacity - cost.cost_at(capacity)).max(0.0)
}

/// A clearing price together with whether demand was degenerate (zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingPrice {
    pub price: f64,
    /// Set when demand is zero and the price is the conventional `0`.
    pub degenerate: bool,
}

/// `m`-th smallest (reported) average cost `f(G) / G` with `m = ceil(y / G)`.
pub fn convex_hull_price(
    market: &Market,
    demand: f64,
    bids: Option<&BidProfile>,
) -> Result<ClearingPrice> {
    market.check_bids(bids)?;
    let g = market.capacity();
    let split = crate::dispatch::marginal_split(demand, g, market.len())?;
    if split.marginal_index == 0 {
        return Ok(ClearingPrice {
            price: 0.0,
            degenerate: true,
        });
    }
    let mut full: Vec<f64> = market
        .cost_profile(bids)
        .iter()
        .map(|c| c.cost_at(g))
        .collect();
    let k = split.marginal_index - 1;
    let (_, &mut mth, _) = full.select_nth_unstable_by(k, f64::total_cmp);
    Ok(ClearingPrice {
        price: mth / g,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceResult {
    pub price: f64,
    pub desired_outputs: Vec<f64>,
    pub max_profits: Vec<f64>,
    pub uplifts: Vec<f64>,
    pub total_uplift: f64,
    /// Dispatch the uplifts were settled against.
    pub dispatch: DispatchResult,
}

/// Settle uplift payments at `price` against an already computed dispatch.
///
/// `costs` must be the profile the dispatch was solved with.
pub fn settle(
    costs: &[GeneratorCost],
    capacity: f64,
    price: f64,
    dispatch: DispatchResult,
) -> PriceResult {
    let n = costs.len();
    let mut desired_outputs = Vec::with_capacity(n);
    let mut max_profits = Vec::with_capacity(n);
    let mut uplifts = Vec::with_capacity(n);
    for (c, &g) in costs.iter().zip(&dispatch.outputs) {
        let best = max_profit(c, price, capacity);
        desired_outputs.push(desired_output(c, price, capacity));
        max_profits.push(best);
        uplifts.push(best - (price * g - c.cost_at(g)));
    }
    let total_uplift = uplifts.iter().sum();
    PriceResult {
        price,
        desired_outputs,
        max_profits,
        uplifts,
        total_uplift,
        dispatch,
    }
}

/// Dispatch `demand` on the (reported) costs and settle uplifts at `price`.
pub fn uplift(
    market: &Market,
    demand: f64,
    price: f64,
    bids: Option<&BidProfile>,
) -> Result<PriceResult> {
    if !price.is_finite() || price < 0.0 {
        return Err(ChpError::Domain(format!(
            "price must be finite and non-negative, got {price}"
        )));
    }
    let dispatch = economic_dispatch(market, demand, &[], bids)?;
    Ok(settle(
        &market.cost_profile(bids),
        market.capacity(),
        price,
        dispatch,
    ))
}

/// Clear the market: convex hull price plus uplifts at that price.
pub fn clear(market: &Market, demand: f64, bids: Option<&BidProfile>) -> Result<PriceResult> {
    let p = convex_hull_price(market, demand, bids)?;
    uplift(market, demand, p.price, bids)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalityVerdict {
    pub holds: bool,
    /// Largest amount by which uplift at `p*` exceeds uplift at a scanned price.
    pub worst_gap: f64,
    pub scanned: usize,
}

/// Scan total uplift over kink-adjacent prices and a uniform grid and confirm
/// none beats the convex hull price.
pub fn verify_uplift_minimality(
    market: &Market,
    demand: f64,
    grid_points: usize,
) -> Result<MinimalityVerdict> {
    if grid_points == 0 {
        return Err(ChpError::Domain("grid_points must be at least 1".into()));
    }
    let dispatch = economic_dispatch(market, demand, &[], None)?;
    let costs = market.generators();
    let g = market.capacity();
    let p_star = convex_hull_price(market, demand, None)?.price;
    let total_at = |p: f64| settle(costs, g, p, dispatch.clone()).total_uplift;
    let at_star = total_at(p_star);

    let kinks: Vec<f64> = costs.iter().map(|c| c.cost_at(g) / g).collect();
    let top = kinks.iter().copied().fold(0.0, f64::max) + 1.0;
    let mut candidates: Vec<f64> = kinks
        .iter()
        .flat_map(|&k| [k - KINK_EPSILON, k, k + KINK_EPSILON])
        .filter(|&p| p >= 0.0)
        .collect();
    let steps = grid_points.max(2) - 1;
    candidates.extend((0..grid_points).map(|t| top * t as f64 / steps as f64));

    let mut worst_gap = f64::NEG_INFINITY;
    let mut holds = true;
    for &p in &candidates {
        let other = total_at(p);
        worst_gap = worst_gap.max(at_star - other);
        if at_star > other + tol(at_star, other) {
            holds = false;
        }
    }
    Ok(MinimalityVerdict {
        holds,
        worst_gap,
        scanned: candidates.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> Market {
        Market::from_costs(10.0, &[10.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn desired_output_cases() {
        let c = GeneratorCost::new(10.0, 2.0).unwrap();
        // p = f(G) / G: indifferent between 0 and G, the supremum is G.
        assert_eq!(desired_output(&c, 3.0, 10.0), 10.0);
        assert_eq!(desired_output(&c, 3.5, 10.0), 10.0);
        assert_eq!(desired_output(&c, 0.0, 10.0), 0.0);
        // Float round-off at the threshold still resolves to G.
        let c = GeneratorCost::new(1.0, 0.1).unwrap();
        assert_eq!(desired_output(&c, c.cost_at(3.0) / 3.0, 3.0), 3.0);
    }

    #[test]
    fn max_profit_cases() {
        let profit = |s, v| max_profit(&GeneratorCost::new(s, v).unwrap(), 3.0, 10.0);
        assert_eq!(profit(10.0, 1.0), 10.0);
        // Indifference point: f(G) = p G.
        assert_eq!(profit(10.0, 2.0), 0.0);
        assert_eq!(profit(10.0, 3.0), 0.0);
    }

    #[test]
    fn price_examples() {
        let m = worked();
        assert_eq!(convex_hull_price(&m, 15.0, None).unwrap().price, 3.0);
        assert_eq!(convex_hull_price(&m, 10.0, None).unwrap().price, 2.0);
        assert_eq!(convex_hull_price(&m, 40.0, None).unwrap().price, 5.0);
        let zero = convex_hull_price(&m, 0.0, None).unwrap();
        assert!(zero.degenerate);
        assert_eq!(zero.price, 0.0);
        assert!(matches!(
            convex_hull_price(&m, 41.0, None),
            Err(ChpError::Infeasible { .. })
        ));
    }

    #[test]
    fn uplift_examples() {
        let m = worked();
        let r = uplift(&m, 15.0, 3.0, None).unwrap();
        assert_eq!(r.uplifts, vec![0.0, 5.0, 0.0, 0.0]);
        assert_eq!(r.total_uplift, 5.0);
        assert_eq!(r.desired_outputs, vec![10.0, 10.0, 0.0, 0.0]);

        let r = uplift(&m, 0.0, 0.0, None).unwrap();
        assert!(r.uplifts.iter().all(|&u| u == 0.0));

        let r = uplift(&m, 40.0, 100.0, None).unwrap();
        assert!(r.uplifts.iter().all(|&u| u.abs() < 1e-9));
    }

    #[test]
    fn minimality_on_worked_and_single_generator_markets() {
        assert!(
            verify_uplift_minimality(&worked(), 15.0, 100)
                .unwrap()
                .holds
        );
        let single = Market::from_costs(7.0, &[3.0], &[2.5]).unwrap();
        for y in [0.5, 3.5, 7.0] {
            assert!(verify_uplift_minimality(&single, y, 50).unwrap().holds);
        }
        assert!(verify_uplift_minimality(&worked(), 15.0, 0).is_err());
    }
}
