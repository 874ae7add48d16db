//! Seeded randomized property suites.
//!
//! Each suite draws its own instances from a ChaCha stream derived from the
//! caller's seed, so results do not depend on which other suites run or on
//! the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dispatch::{dispatch_oracle, economic_dispatch, restricted_cost};
use crate::error::Result;
use crate::model::{approx_eq, approx_le, merit_order, tol, Market, TAU};
use crate::pricing::verify_uplift_minimality;
use crate::strategic::{
    best_response_oracle, check_supermodularity, market_power_index, truthful_profit,
};

/// Ranges random instances are drawn from.
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub min_generators: usize,
    pub max_generators: usize,
    pub max_startup: f64,
    pub max_variable: f64,
    pub min_capacity: f64,
    pub max_capacity: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            min_generators: 1,
            max_generators: 6,
            max_startup: 100.0,
            max_variable: 10.0,
            min_capacity: 10.0,
            max_capacity: 100.0,
        }
    }
}

impl InstanceShape {
    pub fn with_generators(mut self, min: usize, max: usize) -> Self {
        self.min_generators = min;
        self.max_generators = max;
        self
    }
}

/// A market and a demand in `(0, nG]`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub market: Market,
    pub demand: f64,
}

pub fn random_instance(rng: &mut impl Rng, shape: &InstanceShape) -> Instance {
    let n = rng.gen_range(shape.min_generators..=shape.max_generators);
    let capacity = rng.gen_range(shape.min_capacity..=shape.max_capacity);
    let startup: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.0..=shape.max_startup))
        .collect();
    let variable: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(0.0..=shape.max_variable))
        .collect();
    let market = Market::from_costs(capacity, &startup, &variable).expect("ranges are valid");
    // (0, nG]
    let demand = market.total_capacity() * (1.0 - rng.gen::<f64>());
    Instance { market, demand }
}

/// `trials` instances from an independent stream keyed by `seed` and `salt`.
pub fn instances(seed: u64, salt: u64, trials: usize, shape: &InstanceShape) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..trials)
        .map(|_| random_instance(&mut rng, shape))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// First failure, if any.
    pub first_failure: Option<String>,
}

impl SuiteOutcome {
    fn from_results(name: &'static str, results: Vec<std::result::Result<(), String>>) -> Self {
        let failed = results.iter().filter(|r| r.is_err()).count();
        Self {
            name,
            passed: results.len() - failed,
            failed,
            first_failure: results.into_iter().find_map(|r| r.err()),
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

fn run_suite(
    name: &'static str,
    instances: &[Instance],
    check: impl Fn(&Instance) -> std::result::Result<(), String> + Sync + Send,
) -> SuiteOutcome {
    let results = instances.par_iter().map(check).collect();
    SuiteOutcome::from_results(name, results)
}

fn describe(inst: &Instance) -> String {
    let costs: Vec<String> = inst
        .market
        .generators()
        .iter()
        .map(|c| format!("({:.6},{:.6})", c.startup_cost, c.variable_cost))
        .collect();
    format!(
        "G={:.6} y={:.6} costs=[{}]",
        inst.market.capacity(),
        inst.demand,
        costs.join(",")
    )
}

fn err_str(e: crate::ChpError) -> String {
    e.to_string()
}

/// Structural solver against exhaustive enumeration, plus the shape of the
/// dispatch: outputs in `{0, x, G}`, balance, and the rank/output mapping.
pub fn dispatch_equivalence(seed: u64, trials: usize) -> SuiteOutcome {
    let insts = instances(seed, 1, trials, &InstanceShape::default());
    run_suite("dispatch-oracle-equivalence", &insts, |inst| {
        let (m, y) = (&inst.market, inst.demand);
        let fast = economic_dispatch(m, y, &[], None).map_err(err_str)?;
        let slow = dispatch_oracle(m, y, &[], None).map_err(err_str)?;
        if !approx_eq(fast.total_cost, slow.total_cost) {
            return Err(format!(
                "cost {} vs oracle {} on {}",
                fast.total_cost,
                slow.total_cost,
                describe(inst)
            ));
        }
        dispatch_shape(m, y, &fast).map_err(|e| format!("{e} on {}", describe(inst)))
    })
}

/// Outputs in `{0, x, G}`, balance, and the rank-to-output mapping for a
/// truthful unrestricted dispatch.
pub fn dispatch_shape(
    market: &Market,
    demand: f64,
    d: &crate::DispatchResult,
) -> std::result::Result<(), String> {
    let g = market.capacity();
    let (m, x) = (d.split.marginal_index, d.split.partial_output);
    let total: f64 = d.outputs.iter().sum();
    if !approx_eq(total, demand) {
        return Err(format!("outputs sum to {total}, demand {demand}"));
    }
    if d.outputs.iter().any(|&o| o != 0.0 && o != x && o != g) {
        return Err(format!("output outside {{0, x, G}}: {:?}", d.outputs));
    }
    let order = merit_order(market, None).map_err(err_str)?;
    for (pos, &k) in order.iter().enumerate() {
        let rank = pos + 1;
        let o = d.outputs[k];
        let ok = match rank.cmp(&m) {
            std::cmp::Ordering::Less => o == x || o == g,
            std::cmp::Ordering::Greater => o == 0.0 || o == x,
            std::cmp::Ordering::Equal => true,
        } && (o != 0.0 || rank >= m)
            && (o != g || rank <= m);
        if !ok {
            return Err(format!(
                "rank {rank} generator {k} has output {o} (m={m}, x={x})"
            ));
        }
    }
    Ok(())
}

/// Total uplift at the convex hull price never exceeds that at any scanned price.
pub fn uplift_minimality(seed: u64, trials: usize, grid_points: usize) -> SuiteOutcome {
    let insts = instances(seed, 2, trials, &InstanceShape::default());
    run_suite("uplift-minimality", &insts, |inst| {
        let v =
            verify_uplift_minimality(&inst.market, inst.demand, grid_points).map_err(err_str)?;
        if v.holds {
            Ok(())
        } else {
            Err(format!("worst gap {} on {}", v.worst_gap, describe(inst)))
        }
    })
}

/// `f^(m-1)(G) <= c(y) - c(y - G) <= f^(m)(G)` for `y > G`.
pub fn increment_bounds(seed: u64, trials: usize) -> SuiteOutcome {
    let shape = InstanceShape::default().with_generators(2, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3u64.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let insts: Vec<Instance> = (0..trials)
        .map(|_| {
            let mut inst = random_instance(&mut rng, &shape);
            let g = inst.market.capacity();
            // (G, nG]
            inst.demand = g + (inst.market.total_capacity() - g) * (1.0 - rng.gen::<f64>());
            inst
        })
        .collect();
    run_suite("increment-bounds", &insts, |inst| {
        let (m, y, g) = (&inst.market, inst.demand, inst.market.capacity());
        let step = restricted_cost(m, y, &[]).map_err(err_str)?
            - restricted_cost(m, y - g, &[]).map_err(err_str)?;
        let mut full: Vec<f64> = m.generators().iter().map(|c| c.cost_at(g)).collect();
        full.sort_by(f64::total_cmp);
        let split = crate::marginal_split(y, g, m.len()).map_err(err_str)?;
        let k = split.marginal_index;
        let (lo, hi) = (full[k - 2], full[k - 1]);
        if approx_le(lo, step) && approx_le(step, hi) {
            Ok(())
        } else {
            Err(format!(
                "{lo} <= {step} <= {hi} fails on {}",
                describe(inst)
            ))
        }
    })
}

/// `c^{i,j}(y) - c^{j}(y) >= c^{i}(y) - c(y)` over all feasible ordered pairs.
pub fn exclusion_increments(seed: u64, trials: usize) -> SuiteOutcome {
    let insts = instances(
        seed,
        4,
        trials,
        &InstanceShape::default().with_generators(2, 8),
    );
    run_suite("exclusion-increments", &insts, |inst| {
        let (m, y) = (&inst.market, inst.demand);
        let n = m.len();
        if !approx_le(y, (n - 2) as f64 * m.capacity()) {
            return Ok(());
        }
        let c = restricted_cost(m, y, &[]).map_err(err_str)?;
        let single: Vec<f64> = (0..n)
            .map(|i| restricted_cost(m, y, &[i]))
            .collect::<Result<_>>()
            .map_err(err_str)?;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let cij = restricted_cost(m, y, &[i, j]).map_err(err_str)?;
                let (lhs, rhs) = (cij - single[j], single[i] - c);
                if lhs < rhs - tol(lhs, rhs) {
                    return Err(format!(
                        "pair ({i},{j}): {lhs} < {rhs} on {}",
                        describe(inst)
                    ));
                }
            }
        }
        Ok(())
    })
}

/// No feasible pair violates `M(i u j) >= M(i) + M(j)`.
pub fn supermodularity(seed: u64, trials: usize) -> SuiteOutcome {
    let insts = instances(
        seed,
        5,
        trials,
        &InstanceShape::default().with_generators(2, 8),
    );
    run_suite("pair-supermodularity", &insts, |inst| {
        let v = check_supermodularity(&inst.market, inst.demand).map_err(err_str)?;
        match v.first() {
            None => Ok(()),
            Some(v) => Err(format!(
                "pair ({},{}) gap {} on {}",
                v.i,
                v.j,
                v.gap,
                describe(inst)
            )),
        }
    })
}

/// Closed-form index never negative.
pub fn index_nonnegative(seed: u64, trials: usize) -> SuiteOutcome {
    let insts = instances(
        seed,
        6,
        trials,
        &InstanceShape::default().with_generators(2, 8),
    );
    run_suite("index-nonnegative", &insts, |inst| {
        let (m, y) = (&inst.market, inst.demand);
        if !approx_le(y, (m.len() - 1) as f64 * m.capacity()) {
            return Ok(());
        }
        for i in 0..m.len() {
            let idx = market_power_index(m, y, i).map_err(err_str)?;
            if idx < -TAU * idx.abs().max(1.0) {
                return Err(format!("M({i}) = {idx} on {}", describe(inst)));
            }
        }
        Ok(())
    })
}

/// Best-response oracle results on the random instances of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSweep {
    /// Oracle gain within `[-tau, M(i) + G * step]`.
    pub bounds: SuiteOutcome,
    /// Best report is never below the true cost by more than one step.
    pub under_reporting: SuiteOutcome,
    pub generators_checked: usize,
    /// Generators whose oracle gain matches the closed form within `G * step`.
    pub equal: usize,
}

impl OracleSweep {
    pub fn equality_rate(&self) -> f64 {
        if self.generators_checked == 0 {
            1.0
        } else {
            self.equal as f64 / self.generators_checked as f64
        }
    }
}

pub fn oracle_bounds(seed: u64, trials: usize, grid_step: f64) -> OracleSweep {
    let insts = instances(
        seed,
        7,
        trials,
        &InstanceShape::default().with_generators(2, 6),
    );
    type Row = (
        std::result::Result<(), String>,
        std::result::Result<(), String>,
        usize,
        usize,
    );
    let rows: Vec<Row> = insts
        .par_iter()
        .map(|inst| {
            let (m, y) = (&inst.market, inst.demand);
            let slack = m.capacity() * grid_step;
            let mut bound = Ok(());
            let mut under = Ok(());
            let (mut checked, mut equal) = (0, 0);
            if !approx_le(y, (m.len() - 1) as f64 * m.capacity()) {
                return (bound, under, checked, equal);
            }
            for i in 0..m.len() {
                let res = (|| -> Result<(f64, f64, f64)> {
                    let br = best_response_oracle(m, y, i, grid_step)?;
                    let gain = br.sup_profit - truthful_profit(m, y, i)?;
                    Ok((gain, market_power_index(m, y, i)?, br.arg_v))
                })();
                let (gain, index, arg_v) = match res {
                    Ok(r) => r,
                    Err(e) => {
                        bound = Err(e.to_string());
                        continue;
                    }
                };
                checked += 1;
                if (gain - index).abs() <= slack + tol(gain, index) {
                    equal += 1;
                }
                if bound.is_ok()
                    && (gain < -tol(gain, 0.0) || gain > index + slack + tol(gain, index))
                {
                    bound = Err(format!(
                        "generator {i}: gain {gain} outside [0, {index} + {slack}] on {}",
                        describe(inst)
                    ));
                }
                let v = m.generators()[i].variable_cost;
                if under.is_ok() && arg_v < v - grid_step - tol(arg_v, v) {
                    under = Err(format!(
                        "generator {i}: best report {arg_v} < v {v} on {}",
                        describe(inst)
                    ));
                }
            }
            (bound, under, checked, equal)
        })
        .collect();
    let generators_checked = rows.iter().map(|r| r.2).sum();
    let equal = rows.iter().map(|r| r.3).sum();
    let (bounds, under): (Vec<_>, Vec<_>) = rows.into_iter().map(|r| (r.0, r.1)).unzip();
    OracleSweep {
        bounds: SuiteOutcome::from_results("oracle-bounds", bounds),
        under_reporting: SuiteOutcome::from_results("under-reporting", under),
        generators_checked,
        equal,
    }
}
