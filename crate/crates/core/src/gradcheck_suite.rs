//! Finite-difference checks of the three training objectives on a small
//! random instance. Backs the `check-grad` command.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{finite_diff_check, GradCheckOptions, GradCheckReport, Tape};
use crate::error::Result;
use crate::losses::{angle_objective, duplicate_upsample, hsi_objective, msi_objective, LossWeights};
use crate::networks::{CoupledNets, NetworkSpec, DECODER_PREFIX, HSI_PREFIX, MSI_PREFIX};

/// Size of the random instance and the check settings.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    pub c: usize,
    /// High-resolution pixel count; the low-resolution grid is
    /// `pixels / 4` pixels at ratio 2.
    pub pixels: usize,
    pub bands: usize,
    pub msi_bands: usize,
    /// Weights large enough that every term contributes to the gradient.
    pub weights: LossWeights,
    pub options: GradCheckOptions,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            c: 5,
            pixels: 20,
            bands: 31,
            msi_bands: 3,
            weights: LossWeights {
                lambda: 0.1,
                mu: 0.01,
            },
            options: GradCheckOptions::default(),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(0.0..1.0))
}

/// Checks the HSI, MSI and angle objectives; one report each.
pub fn run(config: &SuiteConfig) -> Result<Vec<GradCheckReport>> {
    assert!(config.pixels.is_multiple_of(4), "pixel count must allow a 2x upsampling");
    let mut spec = NetworkSpec::new(config.bands, config.msi_bands);
    spec.hsi.c = config.c;
    spec.msi.c = config.c;
    let nets = CoupledNets::new(&spec, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);

    let lr_pixels = config.pixels / 4;
    let y_h = uniform(&mut rng, lr_pixels, config.bands);
    let y_m = uniform(&mut rng, config.pixels, config.msi_bands);
    let response = uniform(&mut rng, config.bands, config.msi_bands);
    let phi_m = nets.msi_basis(&response)?;
    let weights = config.weights;

    let mut reports = Vec::new();

    let mut store = nets.store.clone();
    let ids: Vec<_> = store
        .with_prefix(HSI_PREFIX)
        .chain(store.with_prefix(DECODER_PREFIX))
        .collect();
    reports.push(finite_diff_check(
        "hsi objective",
        |t, p| {
            let f = nets.hsi_forward_with(p, t, &y_h)?;
            Ok(hsi_objective(t, f.input, f.y_hat, f.encoder.s, &f.decoder_weights, weights)?.total)
        },
        &mut store,
        Some(&ids),
        config.options,
    )?);

    let mut store = nets.store.clone();
    let ids: Vec<_> = store.with_prefix(MSI_PREFIX).collect();
    reports.push(finite_diff_check(
        "msi objective",
        |t, p| {
            let f = nets.msi_forward_with(p, t, &y_m, &phi_m)?;
            Ok(msi_objective(t, f.input, f.y_hat, f.encoder.s, weights)?.total)
        },
        &mut store,
        Some(&ids),
        config.options,
    )?);

    // HSI representation on a (pixels/4) x 1 grid, duplicated at ratio 2
    let mut tape = Tape::new();
    let s_h_value = nets.hsi_forward(&mut tape, &y_h)?.encoder.s;
    let s_h = tape.data(s_h_value).clone();
    let s_h_up = duplicate_upsample(&s_h, lr_pixels, 1, 2)?;
    let mut store = nets.store.clone();
    reports.push(finite_diff_check(
        "angle objective",
        |t, p| {
            let f = nets.msi_forward_with(p, t, &y_m, &phi_m)?;
            angle_objective(t, &s_h_up, f.encoder.s)
        },
        &mut store,
        Some(&ids),
        config.options,
    )?);

    Ok(reports)
}
