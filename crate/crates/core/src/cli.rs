//! The `usdn` command line: `synth`, `fuse`, `eval`, `check-grad` and
//! `inspect`.
//!
//! Every command that writes a directory also writes `manifest.txt` with the
//! resolved settings and SHA-256 checksums of its inputs. The manifest's
//! timestamp line is the only output that differs between identical runs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::data::io::{export_band_png, load_checkpoint, matrix_to_csv, save_checkpoint};
use crate::data::{load_cube, save_cube, synth_generate, ImageCube, SpectralResponse, SynthSpec};
use crate::error::{Error, Result};
use crate::gradcheck_suite::{self, SuiteConfig};
use crate::losses::entropy_rows;
use crate::metrics::EvalReport;
use crate::trainer::{run_pipeline, validate_inputs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "usdn", version, about = "Unsupervised hyperspectral/multispectral fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene and its ground-truth factors.
    Synth(SynthArgs),
    /// Fuse a low-resolution HSI with a high-resolution MSI.
    Fuse(FuseArgs),
    /// Score an estimated cube against a reference.
    Eval(EvalArgs),
    /// Finite-difference check of every training objective.
    CheckGrad(CheckGradArgs),
    /// Export a band as PNG or a representation histogram as CSV.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// key = value scene settings; defaults are used when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed from the `--spec` file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra `key=value` overrides, applied after the `--spec` file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub hsi: PathBuf,
    #[arg(long)]
    pub msi: PathBuf,
    /// L × l response CSV.
    #[arg(long)]
    pub response: PathBuf,
    /// key = value run settings; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Reference HR HSI; adds metrics.csv to the outputs.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long, requires_all = ["band", "png"], conflicts_with = "repr")]
    pub cube: Option<PathBuf>,
    #[arg(long)]
    pub band: Option<usize>,
    #[arg(long)]
    pub png: Option<PathBuf>,
    /// Checkpoint written by `fuse`.
    #[arg(long, requires = "hist")]
    pub repr: Option<PathBuf>,
    #[arg(long)]
    pub hist: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad configuration or inputs, 3 for a numerical abort, 1 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Shape { .. } | Error::Format { .. } => 2,
        Error::Numerical(_) | Error::Diverged { .. } => 3,
        _ => 1,
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval(a),
        Command::CheckGrad(a) => check_grad(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn split_override(kv: &str) -> Result<(&str, &str)> {
    kv.split_once('=')
        .map(|(k, v)| (k.trim(), v))
        .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))
}

fn load_input(path: &Path) -> Result<ImageCube> {
    let loaded = load_cube(path)?;
    if loaded.clamped > 0 {
        eprintln!(
            "warning: {} values in {} clamped to [0, 1]",
            loaded.clamped,
            path.display()
        );
    }
    Ok(loaded.cube)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn manifest(command: &str, settings: &str, inputs: &[&Path]) -> Result<String> {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut m = format!(
        "command = {command}\nversion = {}\ntimestamp = {now}\n\n[settings]\n{settings}",
        env!("CARGO_PKG_VERSION")
    );
    if !inputs.is_empty() {
        m.push_str("\n[inputs]\n");
        for p in inputs {
            let _ = writeln!(m, "{} = sha256:{}", p.display(), sha256_file(p)?);
        }
    }
    Ok(m)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::default();
    let mut inputs = Vec::new();
    if let Some(p) = &a.spec {
        spec.apply_kv(&read_text(p)?)?;
        inputs.push(p.as_path());
    }
    for kv in &a.overrides {
        let (k, v) = split_override(kv)?;
        spec.set(k, v)?;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let scene = synth_generate(&spec)?;

    create_dir(&a.out)?;
    save_cube(&scene.hr_hsi, &a.out.join("hr_hsi.hsc"))?;
    save_cube(&scene.lr_hsi, &a.out.join("lr_hsi.hsc"))?;
    save_cube(&scene.hr_msi, &a.out.join("hr_msi.hsc"))?;
    scene.response.save(&a.out.join("response.csv"))?;
    write_text(&a.out.join("phi_true.csv"), &matrix_to_csv(&scene.phi_true))?;
    save_checkpoint(
        &[
            ("phi_true".to_string(), scene.phi_true.clone()),
            ("s_true".to_string(), scene.s_true.clone()),
        ],
        &a.out.join("truth.hsck"),
    )?;
    write_text(
        &a.out.join("manifest.txt"),
        &manifest("synth", &spec.to_kv(), &inputs)?,
    )?;
    println!(
        "wrote {}x{}x{} scene (ratio {}) to {}",
        spec.width,
        spec.height,
        spec.bands,
        spec.ratio,
        a.out.display()
    );
    Ok(())
}

fn fuse(a: FuseArgs) -> Result<()> {
    let mut config = RunConfig::default();
    let mut inputs = vec![a.hsi.as_path(), a.msi.as_path(), a.response.as_path()];
    if let Some(p) = &a.config {
        config.apply_kv(&read_text(p)?)?;
        inputs.push(p.as_path());
    }
    for kv in &a.overrides {
        let (k, v) = split_override(kv)?;
        config.set(k, v)?;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;

    let hsi = load_input(&a.hsi)?;
    let msi = load_input(&a.msi)?;
    let response = SpectralResponse::load(&a.response)?;
    let reference = a.reference.as_deref().map(load_input).transpose()?;
    if let Some(r) = &a.reference {
        inputs.push(r.as_path());
    }
    // Nothing is written unless the inputs are consistent.
    validate_inputs(&hsi, &msi, &response, reference.as_ref())?;
    let manifest_text = manifest("fuse", &config.to_kv(), &inputs)?;

    let result = run_pipeline(&hsi, &msi, &response, &config, reference.as_ref());
    create_dir(&a.out)?;
    write_text(&a.out.join("manifest.txt"), &manifest_text)?;
    let out = match result {
        Ok(out) => out,
        Err(Error::Diverged { phase, step, trace }) => {
            let name = format!("trace_{phase}.csv");
            write_text(&a.out.join(&name), &trace.to_csv(config.log_every))?;
            return Err(Error::Diverged { phase, step, trace });
        }
        Err(e) => return Err(e),
    };

    save_cube(&out.fused, &a.out.join("fused.hsc"))?;
    write_text(
        &a.out.join("trace_hsi.csv"),
        &out.hsi_trace.to_csv(config.log_every),
    )?;
    write_text(
        &a.out.join("trace_msi.csv"),
        &out.msi_trace.to_csv(config.log_every),
    )?;
    write_text(&a.out.join("basis.csv"), &matrix_to_csv(&out.phi_h))?;
    save_checkpoint(&out.checkpoint_sections(), &a.out.join("checkpoint.hsck"))?;
    if let Some(report) = &out.metrics {
        write_text(&a.out.join("metrics.csv"), &report.to_csv())?;
        println!("{report}");
    }
    println!("wrote fused {:?} cube to {}", out.fused.dims(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let est = load_input(&a.est)?;
    let reference = load_input(&a.reference)?;
    let report = EvalReport::compute(&est, &reference)?;
    write_text(&a.out, &report.to_csv())?;
    println!("{report}");
    Ok(())
}

fn check_grad(a: CheckGradArgs) -> Result<()> {
    let config = SuiteConfig {
        seed: a.seed,
        ..SuiteConfig::default()
    };
    let reports = gradcheck_suite::run(&config)?;
    let text: String = reports.iter().map(ToString::to_string).collect();
    print!("{text}");
    if let Some(p) = &a.out {
        write_text(p, &text)?;
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(Error::Numerical(format!(
            "{failed} of {} gradient checks failed",
            reports.len()
        )));
    }
    Ok(())
}

/// Histogram of representation entries over [0, 1] in `bins` equal bins.
pub fn histogram(values: &Array2<f64>, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        let k = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

fn inspect(a: InspectArgs) -> Result<()> {
    if let (Some(cube), Some(band), Some(png)) = (&a.cube, a.band, &a.png) {
        let c = load_input(cube)?;
        export_band_png(&c, band, png)?;
        println!("band {band} of {} written to {}", cube.display(), png.display());
        return Ok(());
    }
    let (Some(repr), Some(hist)) = (&a.repr, &a.hist) else {
        return Err(Error::Config(
            "inspect needs --cube/--band/--png or --repr/--hist".into(),
        ));
    };
    if a.bins == 0 {
        return Err(Error::Config("--bins must be positive".into()));
    }
    let sections = load_checkpoint(repr)?;
    let s_m = sections
        .into_iter()
        .find(|(name, _)| name == "s_m")
        .map(|(_, m)| m)
        .ok_or_else(|| Error::Config(format!("{} has no s_m section", repr.display())))?;

    let counts = histogram(&s_m, a.bins);
    let mut csv = String::from("bin_lo,bin_hi,count\n");
    for (k, n) in counts.iter().enumerate() {
        let lo = k as f64 / a.bins as f64;
        let hi = (k + 1) as f64 / a.bins as f64;
        let _ = writeln!(csv, "{lo:.4},{hi:.4},{n}");
    }
    write_text(hist, &csv)?;

    let rows = s_m.nrows().max(1) as f64;
    let active = s_m.iter().filter(|&&v| v > 1e-3).count() as f64 / rows;
    let entropy = entropy_rows(&s_m, 1.0).mean().unwrap_or(0.0);
    println!(
        "s_m: {} x {}, mean active entries per row (> 1e-3) {active:.3}, mean entropy {entropy:.4}",
        s_m.nrows(),
        s_m.ncols()
    );
    Ok(())
}
