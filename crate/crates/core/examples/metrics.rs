//! RMSE and SAM of a few simple estimates against a synthetic reference.

use usdn::data::{fold, synth_generate, unfold, ImageCube, SynthSpec};
use usdn::losses::duplicate_upsample;
use usdn::metrics::EvalReport;

fn main() -> usdn::Result<()> {
    let spec = SynthSpec::default();
    let scene = synth_generate(&spec)?;
    let reference = &scene.hr_hsi;
    let (w, h) = (scene.lr_hsi.width(), scene.lr_hsi.height());

    let nearest = fold(&duplicate_upsample(&unfold(&scene.lr_hsi), w, h, spec.ratio)?, spec.width, spec.height)?;
    let brighter = ImageCube::new(
        spec.width,
        spec.height,
        spec.bands,
        reference.as_slice().iter().map(|v| v * 1.5).collect(),
    )?;
    let offset = ImageCube::new(
        spec.width,
        spec.height,
        spec.bands,
        reference.as_slice().iter().map(|v| v + 0.1).collect(),
    )?;

    for (name, est) in [("reference", reference), ("nearest upsample", &nearest), ("x1.5", &brighter), ("+0.1", &offset)] {
        let r = EvalReport::compute(est, reference)?;
        println!("{name:>17}: {r}");
    }
    Ok(())
}
