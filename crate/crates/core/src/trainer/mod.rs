//! Three-step alternating optimization.
//!
//! 1. Train the HSI encoder and the shared decoder on the low-resolution
//!    cube.
//! 2. Freeze the decoder and train the MSI encoder on the high-resolution
//!    multispectral cube.
//! 3. Every `angle_period`-th MSI iteration minimizes the angle between the
//!    upsampled HSI representation and the MSI representation instead.
//!
//! All gradients are full-batch and every phase is single-threaded, so a
//! run is bitwise reproducible from its seed.

mod config;
mod optim;
mod trace;

use ndarray::Array2;

pub use config::RunConfig;
pub use optim::Adam;
pub use trace::{StepKind, TraceRecord, TrainTrace};

use crate::data::{fold, unfold, ImageCube, SpectralResponse};
use crate::diffcore::Tape;
use crate::error::{Error, Result};
use crate::losses::{angle_objective, duplicate_upsample, hsi_objective, msi_objective, upsample_factor};
use crate::metrics::EvalReport;
use crate::networks::{fuse, CoupledNets, DECODER_PREFIX, HSI_PREFIX, MSI_PREFIX};
use crate::stickbreak::SimplexStats;

struct EarlyStop {
    tol: Option<f64>,
    window: usize,
    history: Vec<f64>,
}

impl EarlyStop {
    fn new(config: &RunConfig) -> Self {
        Self {
            tol: config.early_stop_tol,
            window: config.early_stop_window,
            history: Vec::new(),
        }
    }

    /// Records an objective value; true when the phase should stop.
    fn observe(&mut self, value: f64) -> bool {
        let Some(tol) = self.tol else { return false };
        self.history.push(value);
        let n = self.history.len();
        n > self.window && self.history[n - 1 - self.window] - value < tol
    }
}

fn record(step: usize, kind: StepKind, objective: f64, recon: f64, entropy: f64, angle: Option<f64>, s: &Array2<f64>) -> TraceRecord {
    let stats = SimplexStats::of(s);
    TraceRecord {
        step,
        kind,
        objective,
        loss_recon: recon,
        loss_entropy: entropy,
        loss_angle: angle,
        rowsum_mean: stats.mean_row_sum,
        rowsum_max_dev: stats.max_row_sum_deviation,
        min_entry: stats.min_entry,
    }
}

/// Result of the HSI phase.
#[derive(Clone, Debug)]
pub struct HsiOutcome {
    /// Representation of the low-resolution pixels after the last update.
    pub s_h: Array2<f64>,
    pub trace: TrainTrace,
}

/// Minimizes the HSI objective over the HSI encoder and the decoder.
pub fn train_hsi(nets: &mut CoupledNets, y_h: &Array2<f64>, config: &RunConfig) -> Result<HsiOutcome> {
    config.validate()?;
    let weights = config.weights();
    let mut ids = nets.ids_with_prefix(HSI_PREFIX);
    ids.extend(nets.ids_with_prefix(DECODER_PREFIX));
    let mut opt = Adam::new(&nets.store, ids, config.learning_rate);
    let mut stop = EarlyStop::new(config);
    let mut trace = TrainTrace::default();

    for step in 1..=config.hsi_iters {
        nets.store.zero_grad();
        let mut tape = Tape::new();
        let fwd = nets.hsi_forward(&mut tape, y_h)?;
        let terms = hsi_objective(
            &mut tape,
            fwd.input,
            fwd.y_hat,
            fwd.encoder.s,
            &fwd.decoder_weights,
            weights,
        )?;
        let objective = tape.scalar(terms.total);
        trace.push(record(
            step,
            StepKind::Reconstruction,
            objective,
            tape.scalar(terms.reconstruction),
            tape.scalar(terms.entropy),
            None,
            tape.data(fwd.encoder.s),
        ));
        if !objective.is_finite() {
            return Err(Error::Diverged {
                phase: "hsi",
                step,
                trace: Box::new(trace),
            });
        }
        tape.backward(terms.total)?;
        tape.accumulate_param_grads(&mut nets.store);
        opt.step(&mut nets.store)?;
        if stop.observe(objective) {
            log::info!("hsi phase stopped early at step {step}");
            break;
        }
    }

    let mut tape = Tape::new();
    let fwd = nets.hsi_forward(&mut tape, y_h)?;
    Ok(HsiOutcome {
        s_h: tape.data(fwd.encoder.s).clone(),
        trace,
    })
}

/// Result of the MSI phase.
#[derive(Clone, Debug)]
pub struct MsiOutcome {
    pub s_m: Array2<f64>,
    pub trace: TrainTrace,
}

/// Minimizes the MSI objective over the MSI encoder, with an angle step on
/// every `angle_period`-th iteration. The decoder and HSI encoder are not
/// touched; `s_h_upsampled` is a constant target.
///
/// Reconstruction and angle steps keep separate moment estimates.
pub fn train_msi(
    nets: &mut CoupledNets,
    y_m: &Array2<f64>,
    s_h_upsampled: &Array2<f64>,
    response: &Array2<f64>,
    config: &RunConfig,
) -> Result<MsiOutcome> {
    config.validate()?;
    if s_h_upsampled.nrows() != y_m.nrows() {
        return Err(Error::shape("train_msi", s_h_upsampled.dim(), y_m.dim()));
    }
    let weights = config.weights();
    let phi_m = nets.msi_basis(response)?;
    let ids = nets.ids_with_prefix(MSI_PREFIX);
    let mut recon_opt = Adam::new(&nets.store, ids.clone(), config.learning_rate);
    let mut angle_opt = Adam::new(&nets.store, ids, config.learning_rate);
    let mut stop = EarlyStop::new(config);
    let mut trace = TrainTrace::default();

    for step in 1..=config.msi_iters {
        let angle = config.angle_steps && step % config.angle_period == 0;
        nets.store.zero_grad();
        let mut tape = Tape::new();
        let fwd = nets.msi_forward_with_basis(&mut tape, y_m, &phi_m)?;
        let terms = msi_objective(&mut tape, fwd.input, fwd.y_hat, fwd.encoder.s, weights)?;
        let (target, kind, angle_value) = if angle {
            let a = angle_objective(&mut tape, s_h_upsampled, fwd.encoder.s)?;
            (a, StepKind::Angle, Some(tape.scalar(a)))
        } else {
            (terms.total, StepKind::Reconstruction, None)
        };
        let objective = tape.scalar(target);
        trace.push(record(
            step,
            kind,
            objective,
            tape.scalar(terms.reconstruction),
            tape.scalar(terms.entropy),
            angle_value,
            tape.data(fwd.encoder.s),
        ));
        if !objective.is_finite() {
            return Err(Error::Diverged {
                phase: "msi",
                step,
                trace: Box::new(trace),
            });
        }
        tape.backward(target)?;
        tape.accumulate_param_grads(&mut nets.store);
        if angle {
            angle_opt.step(&mut nets.store)?;
        } else {
            recon_opt.step(&mut nets.store)?;
            if stop.observe(objective) {
                log::info!("msi phase stopped early at step {step}");
                break;
            }
        }
    }

    let mut tape = Tape::new();
    let fwd = nets.msi_forward_with_basis(&mut tape, y_m, &phi_m)?;
    Ok(MsiOutcome {
        s_m: tape.data(fwd.encoder.s).clone(),
        trace,
    })
}

/// Everything produced by [`run_pipeline`].
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// Fused high-resolution hyperspectral cube, clamped to [0, 1].
    pub fused: ImageCube,
    pub nets: CoupledNets,
    pub s_h: Array2<f64>,
    pub s_m: Array2<f64>,
    pub phi_h: Array2<f64>,
    pub hsi_trace: TrainTrace,
    pub msi_trace: TrainTrace,
    pub metrics: Option<EvalReport>,
}

impl PipelineOutput {
    /// Named matrices for a checkpoint: every parameter, then the learned
    /// basis and both representations.
    pub fn checkpoint_sections(&self) -> Vec<(String, Array2<f64>)> {
        let store = &self.nets.store;
        let mut out: Vec<(String, Array2<f64>)> = store
            .ids()
            .map(|id| (store.name(id).to_string(), store.value(id).clone()))
            .collect();
        out.push(("phi_h".into(), self.phi_h.clone()));
        out.push(("s_h".into(), self.s_h.clone()));
        out.push(("s_m".into(), self.s_m.clone()));
        out
    }
}

/// Checks cube and response shapes; returns the spatial ratio.
pub fn validate_inputs(
    hsi: &ImageCube,
    msi: &ImageCube,
    response: &SpectralResponse,
    reference: Option<&ImageCube>,
) -> Result<usize> {
    let factor = upsample_factor((hsi.width(), hsi.height()), (msi.width(), msi.height()))?;
    if response.matrix().dim() != (hsi.bands(), msi.bands()) {
        return Err(Error::Config(format!(
            "response is {:?} but cubes have {} and {} bands",
            response.matrix().dim(),
            hsi.bands(),
            msi.bands()
        )));
    }
    if let Some(r) = reference {
        if r.dims() != (msi.width(), msi.height(), hsi.bands()) {
            return Err(Error::Config(format!(
                "reference cube {:?} does not match the fused output",
                r.dims()
            )));
        }
    }
    Ok(factor)
}

/// Unfold, train both networks, fuse, fold and clamp. Metrics are computed
/// when a reference cube is supplied.
pub fn run_pipeline(
    hsi: &ImageCube,
    msi: &ImageCube,
    response: &SpectralResponse,
    config: &RunConfig,
    reference: Option<&ImageCube>,
) -> Result<PipelineOutput> {
    config.validate()?;
    let factor = validate_inputs(hsi, msi, response, reference)?;
    let spec = config.network_spec(hsi.bands(), msi.bands());
    let mut nets = CoupledNets::new(&spec, config.seed)?;

    let y_h = unfold(hsi);
    let y_m = unfold(msi);
    let hsi_out = train_hsi(&mut nets, &y_h, config)?;
    let s_h_up = duplicate_upsample(&hsi_out.s_h, hsi.width(), hsi.height(), factor)?;
    let msi_out = train_msi(&mut nets, &y_m, &s_h_up, response.matrix(), config)?;

    let phi_h = nets.extract_basis();
    let x = fuse(&msi_out.s_m, &phi_h)?;
    let mut fused = fold(&x, msi.width(), msi.height())?;
    fused.clamp_unit();
    let metrics = reference.map(|r| EvalReport::compute(&fused, r)).transpose()?;
    Ok(PipelineOutput {
        fused,
        nets,
        s_h: hsi_out.s_h,
        s_m: msi_out.s_m,
        phi_h,
        hsi_trace: hsi_out.trace,
        msi_trace: msi_out.trace,
        metrics,
    })
}
