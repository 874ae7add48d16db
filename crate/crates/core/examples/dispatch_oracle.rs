// Structural dispatch against exhaustive enumeration on random markets.

use chp::checks::{instances, InstanceShape};
use chp::{dispatch_oracle, economic_dispatch};

fn main() -> chp::Result<()> {
    let shape = InstanceShape::default();
    let mut worst: f64 = 0.0;
    let batch = instances(7, 0, 200, &shape);
    for inst in &batch {
        let fast = economic_dispatch(&inst.market, inst.demand, &[], None)?;
        let slow = dispatch_oracle(&inst.market, inst.demand, &[], None)?;
        worst = worst.max((fast.total_cost - slow.total_cost).abs());
    }
    println!(
        "{} instances, largest cost difference {worst:.3e}",
        batch.len()
    );

    let inst = &batch[0];
    let d = economic_dispatch(&inst.market, inst.demand, &[], None)?;
    println!(
        "first instance: n = {}, G = {:.3}, y = {:.3}, m = {}, x = {:.3}, outputs {:?}",
        inst.market.len(),
        inst.market.capacity(),
        inst.demand,
        d.split.marginal_index,
        d.split.partial_output,
        d.outputs
    );
    Ok(())
}
