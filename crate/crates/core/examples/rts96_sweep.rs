// Coalition sweep over the 24-unit scenario, aggregated by coalition size.

use std::fs::File;

use chp::analysis::{load_scenario, sweep, write_size_csv};

fn main() -> chp::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/rts96-like.json");
    let scenario = load_scenario(File::open(path)?)?;
    let report = sweep(&scenario)?;
    println!(
        "{} rows over {} loads",
        report.rows.len(),
        scenario.loads().len()
    );
    let mut table = Vec::new();
    write_size_csv(&report.by_size, &mut table)?;
    print!("{}", String::from_utf8_lossy(&table));
    if let Some(fit) = report.mean_power_fit {
        println!(
            "mean power per added member {:.2} (r2 {:.3})",
            fit.slope, fit.r_squared
        );
    }
    Ok(())
}
