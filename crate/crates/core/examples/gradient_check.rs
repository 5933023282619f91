//! Finite-difference verification of the three training objectives.
//!
//!     cargo run --example gradient_check -- [seed]

use usdn::gradcheck_suite::{run, SuiteConfig};

fn main() -> usdn::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    let config = SuiteConfig {
        seed,
        ..SuiteConfig::default()
    };
    println!(
        "c={} pixels={} L={} l={} step={:e} tolerance={:e}",
        config.c, config.pixels, config.bands, config.msi_bands, config.options.step, config.options.tolerance
    );
    for report in run(&config)? {
        print!("{report}");
    }
    Ok(())
}
