//! Trains only the hyperspectral network on a high-resolution synthetic
//! cube and reports how well its decoder basis and abundances explain the
//! data.

use usdn::data::{synth_generate, unfold, SynthSpec};
use usdn::networks::CoupledNets;
use usdn::stickbreak::SimplexStats;
use usdn::trainer::{train_hsi, RunConfig};

fn main() -> usdn::Result<()> {
    let scene = synth_generate(&SynthSpec {
        width: 16,
        height: 16,
        ratio: 4,
        ..SynthSpec::default()
    })?;
    let y = unfold(&scene.hr_hsi);
    let config = RunConfig {
        hsi_iters: std::env::args().nth(1).map_or(5000, |s| s.parse().expect("iterations")),
        ..RunConfig::default()
    };
    let mut nets = CoupledNets::new(&config.network_spec(y.ncols(), 3), config.seed)?;
    let out = train_hsi(&mut nets, &y, &config)?;

    for r in out.trace.records.iter().filter(|r| r.step % 1000 == 0) {
        let rms = (2.0 * r.loss_recon / y.len() as f64).sqrt();
        println!("step {:6}: per-entry RMS {rms:.5}, entropy {:.4}", r.step, r.loss_entropy);
    }
    let phi = nets.extract_basis();
    println!("learned basis {:?}, true endmembers {:?}", phi.dim(), scene.phi_true.dim());
    let stats = SimplexStats::of(&out.s_h);
    println!("abundances: mean row sum {:.12}, min entry {:.2e}", stats.mean_row_sum, stats.min_entry);
    Ok(())
}
