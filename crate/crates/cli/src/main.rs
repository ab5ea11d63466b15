//! `wsrgan`: train, run and inspect the speech enhancement models.

mod stream;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wsrgan_core::accounting::{count_params, rtf_bench, FootprintReport};
use wsrgan_core::discriminator::Discriminator;
use wsrgan_core::generator::Generator;
use wsrgan_core::io::{load_weights, read_wav, save_weights, write_wav, AudioClip, RunConfig, WeightArchive};
use wsrgan_core::training::{make_synthetic_dataset, train, ExternalScorer, QualityOracle, SiSnrProxy};
use wsrgan_core::Result;

#[derive(Parser)]
#[command(name = "wsrgan", version, about = "Causal time-domain speech enhancement")]
struct Cli {
    /// Seed for weight initialization, data and benchmark input.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the synthetic corpus and write a weight archive.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides train.iterations.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Enhance a 16 kHz WAV file.
    Denoise {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enhance raw little-endian PCM16 from stdin to stdout.
    Stream {
        #[arg(long)]
        weights: PathBuf,
        /// Chunk length; rounded up to the model's alignment.
        #[arg(long, default_value_t = 16)]
        chunk_ms: u64,
    },
    /// Real-time factor of offline inference.
    Bench {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
    },
    /// Print parameter and MAC counts for a configuration.
    Inspect {
        #[arg(long)]
        config: PathBuf,
    },
}

fn oracle_for(cfg: &RunConfig) -> Result<Box<dyn QualityOracle>> {
    Ok(match &cfg.oracle_command {
        Some(cmd) => Box::new(ExternalScorer::from_command_line(cmd)?),
        None => Box::new(SiSnrProxy),
    })
}

fn cmd_train(config: PathBuf, out: PathBuf, iterations: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut cfg = RunConfig::from_file(&config)?;
    if let Some(n) = iterations {
        cfg.train.iterations = n;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let seed = cfg.train.seed;
    let data = make_synthetic_dataset(cfg.data.pairs, cfg.data.clip_len, cfg.data.seed)?;
    let mut gen = Generator::<f32>::new(cfg.generator.clone(), seed)?;
    let mut disc = Discriminator::<f32>::new(cfg.discriminator.clone(), seed.wrapping_add(1))?;
    let oracle = oracle_for(&cfg)?;
    eprintln!(
        "training {} iterations, {} generator parameters, oracle: {}",
        cfg.train.iterations,
        gen.num_params(),
        oracle.name()
    );
    let snapshot = cfg.clone();
    let mut save = |step: usize, g: &Generator<f32>, d: &Discriminator<f32>| {
        log::info!("checkpoint at step {step} -> {}", out.display());
        save_weights(&WeightArchive::from_models(&snapshot, g, Some(d)), &out)
    };
    let history = train(&mut gen, &mut disc, &data, &cfg.train, oracle.as_ref(), &mut save)?;
    if cfg.train.iterations == 0 {
        save(0, &gen, &disc)?;
    }
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        eprintln!(
            "generator loss {:.4} -> {:.4}, discriminator loss {:.4} -> {:.4}",
            first.g_loss, last.g_loss, first.d_loss, last.d_loss
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_denoise(weights: PathBuf, input: PathBuf, out: PathBuf) -> Result<()> {
    let models = load_weights(&weights)?.into_models()?;
    let clip = read_wav(&input)?;
    let enhanced = if clip.samples.is_empty() {
        Vec::new()
    } else {
        models.generator.enhance_waveform(&clip.samples)?
    };
    write_wav(&out, &AudioClip::new(enhanced))?;
    Ok(())
}

fn cmd_bench(weights: PathBuf, runs: usize, seconds: f64, seed: u64) -> Result<()> {
    let models = load_weights(&weights)?.into_models()?;
    let r = rtf_bench(&models.generator, runs, seconds, seed)?;
    print!("{}", r.to_text());
    Ok(())
}

fn summary(r: &FootprintReport) -> String {
    format!(
        "summary\t{}\tparams={}\tmacs_per_s={:.0}\t({:.3} M params, {:.3} GMACs/s)\n",
        r.model,
        r.total_params,
        r.macs_per_second(),
        r.total_params as f64 / 1e6,
        r.macs_per_second() / 1e9
    )
}

fn cmd_inspect(config: PathBuf) -> Result<()> {
    let cfg = RunConfig::from_file(&config)?;
    let g = count_params(&cfg.generator)?;
    let d = count_params(&cfg.discriminator)?;
    let both = g.combine(&d, "generator+discriminator");
    print!("{}\n{}\n{}{}", g.to_text(), d.to_text(), summary(&g), summary(&both));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out, iterations } => cmd_train(config, out, iterations, cli.seed),
        Command::Denoise { weights, input, out } => cmd_denoise(weights, input, out),
        Command::Stream { weights, chunk_ms } => stream::run(&weights, chunk_ms),
        Command::Bench { weights, runs, seconds } => cmd_bench(weights, runs, seconds, cli.seed.unwrap_or(0)),
        Command::Inspect { config } => cmd_inspect(config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
