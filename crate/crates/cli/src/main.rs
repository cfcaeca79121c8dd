use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coordmlp::experiments::{run, Arch, ExperimentConfig, ExperimentId, Overrides, Report, Setting, Sweep};
use coordmlp::Error;

#[derive(Parser)]
#[command(name = "coordmlp", version, about = "Coordinate-network spectrum experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic spectra of a two-neuron Gaussian network.
    ToyFig2(Common),
    /// Sine networks on a two-band wave.
    #[command(alias = "wave")]
    WaveFig4(Common),
    /// Images with a dense left half and a sparse right half.
    ImageUneven(Common),
    /// Images under uniform sparse sampling.
    ImageSparse(Common),
    /// Output spectra across depth and bandwidth.
    SpectrumDepth(Common),
    /// Gradient-magnitude maps of fitted images.
    DerivativeMaps(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults to the built-in config of the command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to one architecture (gaussian, sine, rff).
    #[arg(long)]
    arch: Option<Arch>,
    /// Number of affine layers, output included.
    #[arg(long)]
    depth: Option<usize>,
    /// Gaussian or RFF bandwidth of the high-bandwidth setting.
    #[arg(long)]
    sigma: Option<f64>,
    /// Sine frequency scale of the high-bandwidth setting.
    #[arg(long)]
    a: Option<f64>,
    /// Regularization weight.
    #[arg(long)]
    eps: Option<f64>,
    /// Sampling rate of the training set.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

impl Command {
    fn split(self) -> (ExperimentId, Common) {
        match self {
            Command::ToyFig2(c) => (ExperimentId::ToyFig2, c),
            Command::WaveFig4(c) => (ExperimentId::WaveFig4, c),
            Command::ImageUneven(c) => (ExperimentId::ImageUneven, c),
            Command::ImageSparse(c) => (ExperimentId::ImageSparse, c),
            Command::SpectrumDepth(c) => (ExperimentId::SpectrumDepth, c),
            Command::DerivativeMaps(c) => (ExperimentId::DerivativeMaps, c),
        }
    }
}

fn load(id: ExperimentId, c: &Common) -> coordmlp::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::builtin(id)?,
    };
    if cfg.experiment != id {
        return Err(Error::Config(format!(
            "config is for {}, not {id}",
            cfg.experiment
        )));
    }
    cfg.resolve_paths(&std::env::current_dir()?);
    cfg.apply(&Overrides {
        seed: c.seed,
        arch: c.arch,
        depth: c.depth,
        sigma: c.sigma,
        a: c.a,
        eps: c.eps,
        rate: c.rate,
        steps: c.steps,
    })?;
    Ok(cfg)
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.2}"))
}

fn print_report(report: &Report) {
    match report {
        Report::Toy(r) => {
            for p in &r.panels {
                println!(
                    "{:<10} sigma {:<5} low {:.4} high {:.4}",
                    p.name, p.sigma, p.low_fraction, p.high_fraction
                );
            }
            println!("orderings hold: {}", r.all_hold());
        }
        Report::Wave(r) => {
            for s in &r.runs {
                println!(
                    "{:<12} T {:.2} L {} R {}",
                    s.setting.to_string(),
                    s.t_psnr,
                    fmt(s.l_psnr),
                    fmt(s.r_psnr)
                );
            }
        }
        Report::Uneven(r) => {
            for s in &r.runs {
                println!(
                    "{:<10} {:<9} {:<12} T {:.2} L {} R {}",
                    s.input,
                    s.arch.to_string(),
                    s.setting.to_string(),
                    s.t_psnr,
                    fmt(s.l_psnr),
                    fmt(s.r_psnr)
                );
            }
        }
        Report::Sparse(r) => {
            for s in &r.summary {
                println!(
                    "{:<9} images {} unregularized {:.2} regularized {:.2}",
                    s.arch.to_string(),
                    s.images,
                    s.unregularized,
                    s.regularized
                );
            }
        }
        Report::Depth(r) => {
            for sweep in [Sweep::Depth, Sweep::Hyperparameter] {
                for run in r.series(sweep) {
                    println!(
                        "depth {} k {:<6} low {:.4} T {:.2}",
                        run.depth, run.k, run.low_fraction, run.t_psnr
                    );
                }
            }
        }
        Report::Derivative(r) => {
            for setting in Setting::ALL {
                if let Some(g) = r.mean_gradient(setting) {
                    println!("{:<12} mean |grad| {g:.3}", setting.to_string());
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let (id, common) = Cli::parse().command.split();
    let result = load(id, &common).and_then(|cfg| run(&cfg, &common.out));
    match result {
        Ok(report) => {
            print_report(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
