//! The full method against its two ablations on one synthetic scene:
//! a plain autoencoder (no stick breaking, no entropy term) and the
//! Dirichlet-net without angle steps.
//!
//!     cargo run --release --example ablation -- [iters] [seeds]

use usdn::data::{synth_generate, SynthSpec};
use usdn::networks::RepresentationKind;
use usdn::trainer::{run_pipeline, RunConfig};

fn main() -> usdn::Result<()> {
    let mut args = std::env::args().skip(1);
    let iters: usize = args.next().map_or(2000, |s| s.parse().expect("iterations"));
    let seeds: u64 = args.next().map_or(1, |s| s.parse().expect("seed count"));
    let scene = synth_generate(&SynthSpec::default())?;

    let full = RunConfig {
        hsi_iters: iters,
        msi_iters: iters,
        ..RunConfig::default()
    };
    let variants = [
        ("sparse Dirichlet-net", full.clone()),
        (
            "autoencoder",
            RunConfig {
                representation: RepresentationKind::Linear,
                lambda: 0.0,
                ..full.clone()
            },
        ),
        (
            "no angle steps",
            RunConfig {
                angle_steps: false,
                ..full
            },
        ),
    ];
    for (name, base) in variants {
        let (mut rmse, mut sam) = (0.0, 0.0);
        for seed in 0..seeds {
            let config = RunConfig { seed, ..base.clone() };
            let out = run_pipeline(&scene.lr_hsi, &scene.hr_msi, &scene.response, &config, Some(&scene.hr_hsi))?;
            let m = out.metrics.expect("reference given");
            rmse += m.rmse_8bit / seeds as f64;
            sam += m.sam_degrees / seeds as f64;
        }
        println!("{name:>22}: RMSE {rmse:8.3} (8-bit)  SAM {sam:7.3} deg");
    }
    Ok(())
}
