//! Market-power analysis for convex hull pricing in an equal-capacity pool.
//!
//! The crate clears the non-convex dispatch problem, computes convex hull
//! prices and uplift payments, evaluates strategic misreporting of variable
//! costs, and quantifies the market power of single generators and
//! coalitions. Every closed form has a brute-force counterpart
//! ([`dispatch::dispatch_oracle`], [`pricing::verify_uplift_minimality`],
//! [`strategic::best_response_oracle`]) for cross-checking.

pub mod analysis;
pub mod checks;
pub mod cli;
pub mod dispatch;
pub mod error;
pub mod model;
pub mod pricing;
pub mod strategic;

pub use dispatch::{
    dispatch_oracle, economic_dispatch, marginal_split, restricted_cost, DispatchResult,
};
pub use error::{ChpError, Result};
pub use model::{
    evaluate_cost, merit_order, BidProfile, GeneratorCost, MarginalSplit, Market, TAU,
};
pub use pricing::{convex_hull_price, uplift, PriceResult};
pub use strategic::{
    best_response_oracle, coalition_power, market_power_index, strategic_profit, truthful_profit,
    CoalitionReport, PowerReport, StrategicOutcome,
};
