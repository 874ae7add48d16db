// Coalition power, feasibility and pairwise supermodularity.

use chp::analysis::coalition_stats;
use chp::strategic::check_supermodularity;
use chp::{coalition_power, Market};

fn main() -> chp::Result<()> {
    let market = Market::from_costs(10.0, &[10.0; 4], &[1.0, 2.0, 3.0, 4.0])?;
    let demand = 15.0;

    for members in [vec![0, 1], vec![2, 3], vec![0, 2], vec![0, 1, 2]] {
        let r = coalition_power(&market, demand, &members)?;
        println!(
            "{:?}: feasible {}, power {:?}",
            members, r.feasible, r.power
        );
    }

    for size in 1..=2 {
        let row = coalition_stats(&market, demand, size)?;
        println!(
            "size {size}: {} of {} coalitions hold power, mean {:.3}, max {:.3}",
            row.n_with_power, row.n_coalitions, row.mean_power, row.max_power
        );
    }

    let violations = check_supermodularity(&market, demand)?;
    println!("pair supermodularity violations: {}", violations.len());
    Ok(())
}
