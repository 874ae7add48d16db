// Dispatch, price, uplift and market power on the four-generator market.

use chp::pricing::clear;
use chp::strategic::{coalition_power, market_power_index, strategic_profit, truthful_profits};
use chp::{economic_dispatch, Market};

fn main() -> chp::Result<()> {
    let market = Market::from_costs(10.0, &[10.0; 4], &[1.0, 2.0, 3.0, 4.0])?;
    let demand = 15.0;

    let d = economic_dispatch(&market, demand, &[], None)?;
    println!("dispatch {:?}, cost {}", d.outputs, d.total_cost);

    let without_first = economic_dispatch(&market, demand, &[0], None)?;
    println!(
        "without G1 {:?}, cost {}",
        without_first.outputs, without_first.total_cost
    );

    let r = clear(&market, demand, None)?;
    println!(
        "price {}, uplifts {:?}, total {}",
        r.price, r.uplifts, r.total_uplift
    );

    let p = truthful_profits(&market, demand)?;
    println!("benchmark profits {p:?}");
    for i in 0..market.len() {
        println!(
            "M(G{}) = {}",
            i + 1,
            market_power_index(&market, demand, i)?
        );
    }

    let dev = strategic_profit(&market, demand, 1, 2.9)?;
    println!(
        "G2 reporting 2.9: price {}, output {}, profit {}",
        dev.price, dev.dispatch.outputs[1], dev.profit
    );

    let pair = coalition_power(&market, demand, &[0, 1])?;
    println!("M(G1,G2) = {:?}", pair.power);
    Ok(())
}
