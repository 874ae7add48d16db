//! Generators, markets and bid profiles.
//!
//! Every generator in a [`Market`] shares one capacity `G`. A generator's cost
//! is a step function: nothing when idle, a startup charge plus a linear
//! variable cost once it produces anything. Generator identity is positional
//! (`0..n` internally, `1..n` in user-facing output).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{ChpError, Result};

/// Absolute comparison tolerance, scaled by the magnitude of the compared values.
pub const TAU: f64 = 1e-9;

/// Tolerance used when comparing `a` and `b`.
#[inline]
pub fn tol(a: f64, b: f64) -> f64 {
    TAU * 1f64.max(a.abs()).max(b.abs())
}

/// `a <= b` up to the scaled tolerance.
#[inline]
pub fn approx_le(a: f64, b: f64) -> bool {
    a <= b + tol(a, b)
}

#[inline]
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= tol(a, b)
}

/// Startup-plus-linear generation cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCost {
    pub startup_cost: f64,
    pub variable_cost: f64,
}

impl GeneratorCost {
    pub fn new(startup_cost: f64, variable_cost: f64) -> Result<Self> {
        if !startup_cost.is_finite() || startup_cost < 0.0 {
            return Err(ChpError::Domain(format!(
                "startup cost must be finite and non-negative, got {startup_cost}"
            )));
        }
        if !variable_cost.is_finite() || variable_cost < 0.0 {
            return Err(ChpError::Domain(format!(
                "variable cost must be finite and non-negative, got {variable_cost}"
            )));
        }
        Ok(Self {
            startup_cost,
            variable_cost,
        })
    }

    /// Cost of producing `output` MW: zero when idle, `s + v * output` otherwise.
    pub fn evaluate(&self, output: f64) -> Result<f64> {
        if output.is_nan() || output < 0.0 {
            return Err(ChpError::Domain(format!(
                "output must be non-negative, got {output}"
            )));
        }
        Ok(self.cost_at(output))
    }

    /// Unchecked variant of [`evaluate`](Self::evaluate); non-positive outputs cost nothing.
    #[inline]
    pub fn cost_at(&self, output: f64) -> f64 {
        if output > 0.0 {
            self.startup_cost + self.variable_cost * output
        } else {
            0.0
        }
    }

    /// Same startup cost, different variable cost.
    pub fn with_variable_cost(&self, variable_cost: f64) -> Self {
        Self {
            startup_cost: self.startup_cost,
            variable_cost,
        }
    }
}

/// Free-function form of [`GeneratorCost::evaluate`].
pub fn evaluate_cost(cost: &GeneratorCost, output: f64) -> Result<f64> {
    cost.evaluate(output)
}

/// An electricity pool of `n` generators sharing the capacity `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    capacity: f64,
    generators: Vec<GeneratorCost>,
    names: Vec<String>,
}

impl Market {
    pub fn new(capacity: f64, generators: Vec<GeneratorCost>) -> Result<Self> {
        let names = (1..=generators.len()).map(|i| format!("G{i}")).collect();
        Self::with_names(capacity, generators, names)
    }

    pub fn with_names(
        capacity: f64,
        generators: Vec<GeneratorCost>,
        names: Vec<String>,
    ) -> Result<Self> {
        if !capacity.is_finite() || capacity <= 0.0 {
            return Err(ChpError::Domain(format!(
                "capacity must be positive, got {capacity}"
            )));
        }
        if generators.is_empty() {
            return Err(ChpError::Domain(
                "a market needs at least one generator".into(),
            ));
        }
        if names.len() != generators.len() {
            return Err(ChpError::Domain(format!(
                "{} names given for {} generators",
                names.len(),
                generators.len()
            )));
        }
        for g in &generators {
            GeneratorCost::new(g.startup_cost, g.variable_cost)?;
        }
        Ok(Self {
            capacity,
            generators,
            names,
        })
    }

    /// Convenience constructor from parallel startup / variable cost slices.
    pub fn from_costs(capacity: f64, startup: &[f64], variable: &[f64]) -> Result<Self> {
        if startup.len() != variable.len() {
            return Err(ChpError::Domain(format!(
                "{} startup costs but {} variable costs",
                startup.len(),
                variable.len()
            )));
        }
        let generators = startup
            .iter()
            .zip(variable)
            .map(|(&s, &v)| GeneratorCost::new(s, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(capacity, generators)
    }

    #[inline]
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[GeneratorCost] {
        &self.generators
    }

    pub fn generator(&self, index: usize) -> Result<&GeneratorCost> {
        self.generators.get(index).ok_or(ChpError::IndexOutOfRange {
            index,
            n: self.len(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Total installed capacity `n * G`.
    pub fn total_capacity(&self) -> f64 {
        self.capacity * self.len() as f64
    }

    /// The market with generator `index` removed.
    pub fn without(&self, index: usize) -> Result<Market> {
        self.generator(index)?;
        let mut generators = self.generators.clone();
        let mut names = self.names.clone();
        generators.remove(index);
        names.remove(index);
        Market::with_names(self.capacity, generators, names)
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        self.generator(index).map(|_| ())
    }

    pub(crate) fn check_bids(&self, bids: Option<&BidProfile>) -> Result<()> {
        match bids {
            Some(b) if b.len() != self.len() => Err(ChpError::Domain(format!(
                "bid profile has {} entries for {} generators",
                b.len(),
                self.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Cost functions as the operator sees them: reported variable costs when
    /// `bids` is given, true costs otherwise.
    pub fn cost_profile(&self, bids: Option<&BidProfile>) -> Vec<GeneratorCost> {
        match bids {
            None => self.generators.clone(),
            Some(b) => self
                .generators
                .iter()
                .zip(&b.reported_variable_costs)
                .map(|(g, &v)| g.with_variable_cost(v))
                .collect(),
        }
    }
}

/// Reported variable costs, one per generator. Startup costs are never altered.
///
/// Generators listed as deviators lose every tie in the operator's ordering:
/// among equal costs the truthful generators come first, then deviators, each
/// group by ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct BidProfile {
    reported_variable_costs: Vec<f64>,
    deviators: Vec<usize>,
}

impl BidProfile {
    /// Everyone reports their true variable cost.
    pub fn truthful(market: &Market) -> Self {
        Self {
            reported_variable_costs: market.generators.iter().map(|g| g.variable_cost).collect(),
            deviators: Vec::new(),
        }
    }

    /// Generator `index` reports `reported_v`; all others are truthful.
    pub fn deviate(market: &Market, index: usize, reported_v: f64) -> Result<Self> {
        Self::truthful(market).with_report(market, index, reported_v)
    }

    /// Replace one generator's report and mark it as a deviator.
    pub fn with_report(mut self, market: &Market, index: usize, reported_v: f64) -> Result<Self> {
        market.check_index(index)?;
        if !reported_v.is_finite() || reported_v < 0.0 {
            return Err(ChpError::Domain(format!(
                "reported variable cost must be finite and non-negative, got {reported_v}"
            )));
        }
        self.reported_variable_costs[index] = reported_v;
        if let Err(pos) = self.deviators.binary_search(&index) {
            self.deviators.insert(pos, index);
        }
        Ok(self)
    }

    pub fn reported_variable_costs(&self) -> &[f64] {
        &self.reported_variable_costs
    }

    pub fn deviators(&self) -> &[usize] {
        &self.deviators
    }

    pub fn len(&self) -> usize {
        self.reported_variable_costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reported_variable_costs.is_empty()
    }

    #[inline]
    pub(crate) fn is_deviator(&self, index: usize) -> bool {
        self.deviators.binary_search(&index).is_ok()
    }
}

/// Decomposition of a demand into `m - 1` full blocks and one partial block of `x` MW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalSplit {
    pub marginal_index: usize,
    pub partial_output: f64,
}

/// Tie-break key: truthful generators before deviators, then ascending index.
#[inline]
pub(crate) fn tie_key(bids: Option<&BidProfile>, index: usize) -> (bool, usize) {
    (bids.is_some_and(|b| b.is_deviator(index)), index)
}

/// Ascending by value, ties by [`tie_key`].
#[inline]
pub(crate) fn cmp_with_ties(
    a: (f64, usize),
    b: (f64, usize),
    bids: Option<&BidProfile>,
) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| tie_key(bids, a.1).cmp(&tie_key(bids, b.1)))
}

/// Generator indices sorted ascending by full-capacity cost `f(G)`, using
/// reported costs when `bids` is given. Ties go to the lower index.
pub fn merit_order(market: &Market, bids: Option<&BidProfile>) -> Result<Vec<usize>> {
    market.check_bids(bids)?;
    let g = market.capacity();
    let full: Vec<f64> = market
        .cost_profile(bids)
        .iter()
        .map(|c| c.cost_at(g))
        .collect();
    let mut order: Vec<usize> = (0..market.len()).collect();
    order.sort_by(|&a, &b| cmp_with_ties((full[a], a), (full[b], b), bids));
    Ok(order)
}
