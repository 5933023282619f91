//! Histogram of the trained multispectral representation, the quantity
//! `usdn inspect --repr` exports.
//!
//!     cargo run --release --example representation_histogram -- [iters]

use usdn::cli::histogram;
use usdn::data::{synth_generate, SynthSpec};
use usdn::trainer::{run_pipeline, RunConfig};

fn main() -> usdn::Result<()> {
    let iters = std::env::args().nth(1).map_or(1500, |s| s.parse().expect("iterations"));
    let scene = synth_generate(&SynthSpec::default())?;
    let config = RunConfig {
        hsi_iters: iters,
        msi_iters: iters,
        ..RunConfig::default()
    };
    let out = run_pipeline(&scene.lr_hsi, &scene.hr_msi, &scene.response, &config, None)?;
    let bins = 10;
    let counts = histogram(&out.s_m, bins);
    let peak = *counts.iter().max().unwrap_or(&1) as f64;
    for (k, n) in counts.iter().enumerate() {
        let bar = "#".repeat((50.0 * *n as f64 / peak).round() as usize);
        println!("[{:.1}, {:.1}) {n:7} {bar}", k as f64 / bins as f64, (k + 1) as f64 / bins as f64);
    }
    Ok(())
}
