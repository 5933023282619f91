//! Round trip through the on-disk formats: HSC1 cubes, response CSV,
//! checkpoints and a PNG band slice.

use usdn::data::io::{export_band_png, load_checkpoint, save_checkpoint};
use usdn::data::{load_cube, save_cube, synth_generate, SpectralResponse, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("usdn_cube_io");
    std::fs::create_dir_all(&dir)?;
    let scene = synth_generate(&SynthSpec {
        width: 32,
        height: 32,
        ..SynthSpec::default()
    })?;

    let path = dir.join("hr.hsc");
    save_cube(&scene.hr_hsi, &path)?;
    let loaded = load_cube(&path)?;
    let worst = loaded
        .cube
        .as_slice()
        .iter()
        .zip(scene.hr_hsi.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("cube {:?}: max round-trip error {worst:.1e} (single precision)", loaded.cube.dims());

    let rpath = dir.join("response.csv");
    scene.response.save(&rpath)?;
    let r = SpectralResponse::load(&rpath)?;
    println!("response {} x {}, column sums {:?}", r.bands_in(), r.bands_out(), r.matrix().sum_axis(ndarray::Axis(0)).to_vec());

    let cpath = dir.join("truth.hsck");
    save_checkpoint(&[("phi_true".into(), scene.phi_true.clone())], &cpath)?;
    for (name, m) in load_checkpoint(&cpath)? {
        println!("checkpoint section {name}: {:?}", m.dim());
    }

    let png = dir.join("band15.png");
    export_band_png(&scene.hr_hsi, 15, &png)?;
    println!("band 15 written to {}", png.display());
    Ok(())
}
