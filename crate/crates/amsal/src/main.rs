use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use amsal::config::{PipelineConfig, KEYS};
use amsal::core::synthetic::{generate_latent, generate_two_factor, LatentSpec, TwoFactorSpec};
use amsal::core::Matrix;
use amsal::error::{Error, Result};
use amsal::format::{save_ids, save_matrix_as, MatrixFormat};
use amsal::pipeline::{format_report, run_align, run_erase, run_eval};
use amsal::{run_pipeline, thread_count};

#[derive(Parser)]
#[command(name = "amsal", version, about = "Align unaligned guarded records to inputs and erase them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted dataset with its true alignment and a pipeline config.
    Synth(SynthArgs),
    /// Recover the alignment between inputs and guarded records.
    Align(ConfigArgs),
    /// Fit an eraser on an alignment and write the erased inputs.
    Erase(ConfigArgs),
    /// Report task, fairness and alignment metrics.
    Eval(ConfigArgs),
    /// Align, erase and evaluate in one run.
    Pipeline(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Latent-state mixture with a multi-dimensional guarded attribute.
    Latent,
    /// Independent binary task and guarded labels.
    TwoFactor,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "latent")]
    kind: SynthKind,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    /// Guarded dimension (latent only).
    #[arg(long, default_value_t = 2)]
    d_prime: usize,
    /// Number of latent states (latent only).
    #[arg(long, default_value_t = 2)]
    states: usize,
    /// Norm of each state's mean direction (latent only).
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.5)]
    y_prior: f64,
    #[arg(long, default_value_t = 0.5)]
    z_prior: f64,
    #[arg(long, default_value_t = 3.0)]
    y_separation: f64,
    #[arg(long, default_value_t = 3.0)]
    z_separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bin")]
    format: MatrixFormat,
    #[arg(long)]
    out: PathBuf,
}

/// Every pipeline key is also a flag; flags override the config file.
#[derive(Args)]
struct ConfigArgs {
    /// key = value file; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    z: Option<String>,
    #[arg(long, value_name = "records|samples")]
    z_mode: Option<String>,
    /// Comma-separated record priors.
    #[arg(long)]
    priors: Option<String>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long, value_name = "classification|regression")]
    task: Option<String>,
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    truth: Option<String>,
    #[arg(long)]
    groups: Option<String>,
    #[arg(long)]
    assignment: Option<String>,
    #[arg(long)]
    eraser: Option<String>,
    #[arg(long, value_name = "amsal|kmeans")]
    aligner: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    slack: Option<String>,
    #[arg(long, value_name = "full|K")]
    score_k: Option<String>,
    #[arg(long, value_name = "unsupervised|partial")]
    selection: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, value_name = "sal|inlp")]
    backend: Option<String>,
    #[arg(long, value_name = "auto|R")]
    rank: Option<String>,
    #[arg(long)]
    inlp_rounds: Option<String>,
    #[arg(long)]
    reduced: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    #[arg(long, value_name = "bin|csv")]
    format: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> [(&'static str, &Option<String>); 25] {
        [
            ("x", &self.x),
            ("z", &self.z),
            ("z_mode", &self.z_mode),
            ("priors", &self.priors),
            ("y", &self.y),
            ("task", &self.task),
            ("labels", &self.labels),
            ("truth", &self.truth),
            ("groups", &self.groups),
            ("assignment", &self.assignment),
            ("eraser", &self.eraser),
            ("aligner", &self.aligner),
            ("iterations", &self.iterations),
            ("seeds", &self.seeds),
            ("slack", &self.slack),
            ("score_k", &self.score_k),
            ("selection", &self.selection),
            ("seed", &self.seed),
            ("backend", &self.backend),
            ("rank", &self.rank),
            ("inlp_rounds", &self.inlp_rounds),
            ("reduced", &self.reduced),
            ("test_fraction", &self.test_fraction),
            ("format", &self.format),
            ("out", &self.out),
        ]
    }

    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for (key, value) in self.overrides() {
            debug_assert!(KEYS.contains(&key));
            if let Some(v) = value {
                cfg.set(key, v, Path::new(""), 0)?;
            }
        }
        Ok(cfg)
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io { path: args.out.clone(), source: e })?;
    let ext = args.format.extension();
    let (x_name, z_name) = (format!("x.{ext}"), format!("z.{ext}"));
    let mut conf = format!("x = {x_name}\nz = {z_name}\ntruth = truth.csv\nseed = {}\nout = run\n", args.seed);
    match args.kind {
        SynthKind::Latent => {
            let spec = LatentSpec::new(
                args.n,
                args.d,
                args.d_prime,
                vec![1.0 / args.states as f64; args.states],
                args.separation,
                args.noise,
                args.noise,
                args.seed,
            );
            let data = generate_latent(&spec)?;
            save_matrix_as(&data.x, &args.out.join(&x_name), args.format)?;
            save_matrix_as(&data.state_z, &args.out.join(&z_name), args.format)?;
            save_ids(&data.h, "record", &args.out.join("truth.csv"))?;
            conf.push_str(&format!("priors = {}\n", join(&data.priors)));
        }
        SynthKind::TwoFactor => {
            let spec = TwoFactorSpec {
                n: args.n,
                d: args.d,
                y_prior: args.y_prior,
                z_prior: args.z_prior,
                y_separation: args.y_separation,
                z_separation: args.z_separation,
                noise: args.noise,
                rng_seed: args.seed,
            };
            let data = generate_two_factor(&spec)?;
            save_matrix_as(&data.x, &args.out.join(&x_name), args.format)?;
            save_matrix_as(&Matrix::identity(2), &args.out.join(&z_name), args.format)?;
            save_ids(&data.z, "record", &args.out.join("truth.csv"))?;
            save_ids(&data.y, "label", &args.out.join("y.csv"))?;
            conf.push_str(&format!("priors = {}\ny = y.csv\n", join(&[1.0 - data.z_prior, data.z_prior])));
        }
    }
    std::fs::write(args.out.join("pipeline.conf"), conf).map_err(|e| Error::Io { path: args.out.join("pipeline.conf"), source: e })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|p| format!("{p:?}")).collect::<Vec<_>>().join(", ")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => synth(&args),
        Command::Align(args) => {
            let cfg = args.resolve()?;
            let a = run_align(&cfg, thread_count()?)?;
            if let Some(r) = &a.amsal {
                println!("seed={}\niteration={}\nobjective={:?}", r.seed, r.iteration, r.objective);
            }
            Ok(())
        }
        Command::Erase(args) => {
            let eraser = run_erase(&args.resolve()?)?;
            println!("input_dim={}\noutput_dim={}", eraser.dim(), eraser.output_dim());
            Ok(())
        }
        Command::Eval(args) => {
            print!("{}", format_report(&run_eval(&args.resolve()?)?));
            Ok(())
        }
        Command::Pipeline(args) => {
            let out = run_pipeline(&args.resolve()?, thread_count()?)?;
            print!("{}", format_report(&out.report));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amsal: error[{}]: {e}", e.kind());
            ExitCode::from(match e {
                Error::Config { .. } | Error::Invalid(_) => 2,
                _ => 1,
            })
        }
    }
}
