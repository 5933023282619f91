//! Generates a synthetic scene, fuses its low-resolution hyperspectral cube
//! with the high-resolution multispectral cube, and scores the result.
//!
//!     cargo run --release --example synth_and_fuse -- [hsi_iters] [msi_iters]

use std::time::Instant;

use usdn::data::{synth_generate, SynthSpec};
use usdn::trainer::{run_pipeline, RunConfig};

fn main() -> usdn::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("iteration count"));
    let mut config = RunConfig::default();
    if let Some(n) = args.next() {
        config.hsi_iters = n;
    }
    if let Some(n) = args.next() {
        config.msi_iters = n;
    }

    let scene = synth_generate(&SynthSpec::default())?;
    println!(
        "scene: HR {:?}, LR {:?}, MSI {:?}",
        scene.hr_hsi.dims(),
        scene.lr_hsi.dims(),
        scene.hr_msi.dims()
    );

    let start = Instant::now();
    let out = run_pipeline(&scene.lr_hsi, &scene.hr_msi, &scene.response, &config, Some(&scene.hr_hsi))?;
    let elapsed = start.elapsed();

    let last_h = out.hsi_trace.records.last().unwrap();
    let last_m = out.msi_trace.records.last().unwrap();
    println!("hsi phase: final reconstruction loss {:.6}", last_h.loss_recon);
    println!("msi phase: final reconstruction loss {:.6}", last_m.loss_recon);
    println!("{}", out.metrics.unwrap());
    println!("elapsed {:.1}s", elapsed.as_secs_f64());
    Ok(())
}
