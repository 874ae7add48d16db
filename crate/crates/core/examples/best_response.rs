// Best-response search over reported costs compared with the closed-form index.

use chp::strategic::{power_report, strategic_profit};
use chp::{best_response_oracle, Market};

fn main() -> chp::Result<()> {
    let market = Market::from_costs(10.0, &[10.0; 4], &[1.0, 2.0, 3.0, 4.0])?;
    let demand = 15.0;

    for v in [2.0, 2.5, 2.9, 2.99, 3.0, 3.5] {
        let out = strategic_profit(&market, demand, 1, v)?;
        println!(
            "G2 reports {v:5.2}: output {:5.2}, profit {:6.3}",
            out.dispatch.outputs[1], out.profit
        );
    }

    let br = best_response_oracle(&market, demand, 1, 1e-3)?;
    println!(
        "G2 sup profit {:.4} near v = {:.4}, attained: {}",
        br.sup_profit, br.arg_v, br.attained
    );

    let r = power_report(&market, demand, Some(1e-3))?;
    for (i, (m, eq)) in r
        .closed_form_power
        .iter()
        .zip(&r.equality_flags)
        .enumerate()
    {
        println!("G{}: closed form {:?}, matches oracle: {eq}", i + 1, m);
    }
    println!("equality rate {:.2}", r.equality_rate().unwrap_or(f64::NAN));
    Ok(())
}
