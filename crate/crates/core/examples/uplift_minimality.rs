// Total uplift as a function of the price, minimised at the hull price.

use chp::pricing::verify_uplift_minimality;
use chp::{convex_hull_price, uplift, Market};

fn main() -> chp::Result<()> {
    let market = Market::from_costs(10.0, &[10.0; 4], &[1.0, 2.0, 3.0, 4.0])?;
    let demand = 15.0;
    let p_star = convex_hull_price(&market, demand, None)?.price;

    for k in 0..=12 {
        let p = 1.5 + 0.25 * k as f64;
        let total = uplift(&market, demand, p, None)?.total_uplift;
        let mark = if (p - p_star).abs() < 1e-12 {
            "  <- p*"
        } else {
            ""
        };
        println!("p = {p:5.2}  total uplift {total:8.3}{mark}");
    }

    let v = verify_uplift_minimality(&market, demand, 100)?;
    println!(
        "minimal at p* = {p_star}: {} ({} prices scanned)",
        v.holds, v.scanned
    );
    Ok(())
}
