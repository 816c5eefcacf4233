use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use aliif::harness::{self, parse_list, OutputSize};
use aliif::{synth, Error, Result};
use clap::{ArgGroup, Parser, Subcommand};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "aliif", version, about = "Arbitrary-scale super-resolution with adaptive local implicit image functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a `key = value` config file.
    Train { config: PathBuf },

    /// Upscale one PNG with a trained checkpoint.
    #[command(group(ArgGroup::new("target").required(true).args(["scale", "size"])))]
    Upscale {
        checkpoint: PathBuf,
        input: PathBuf,
        output: PathBuf,
        /// Scale factor, any positive real.
        #[arg(long, allow_negative_numbers = true)]
        scale: Option<f64>,
        /// Exact output size as HxW.
        #[arg(long)]
        size: Option<String>,
    },

    /// Score bicubic and each checkpoint on a directory of HR PNGs.
    Eval {
        /// Checkpoints followed by the dataset directory.
        #[arg(required = true, num_args = 1..)]
        paths: Vec<PathBuf>,
        /// Comma-separated scales.
        #[arg(long, default_value = "2,3,4")]
        scales: String,
        #[arg(long)]
        ssim: bool,
        /// Write the report CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },

    /// Train one model per K and report PSNR against K.
    AblateK {
        config: PathBuf,
        #[arg(long, default_value = "1,2,4")]
        k_list: String,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Write a seeded set of synthetic training textures.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 32)]
        min_side: usize,
        #[arg(long, default_value_t = 64)]
        max_side: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Usage(_) => 2,
        Error::EmptyDataset(_) => 3,
        Error::Checksum { .. } | Error::Checkpoint(_) => 4,
        _ => 1,
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Io { path: p.clone(), source: e })?),
        None => Box::new(std::io::stdout()),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { config } => {
            let s = harness::cmd_train(&config)?;
            println!("checkpoint {} (checksum {:016x})", s.checkpoint.display(), s.checksum);
            println!("manifest   {}", s.manifest.display());
            println!("loss log   {}", s.loss_csv.display());
            println!("final loss {:.6}", s.final_loss);
        }
        Command::Upscale { checkpoint, input, output, scale, size } => {
            let target = match (scale, size) {
                (Some(s), None) => OutputSize::Scale(s),
                (None, Some(s)) => s.parse()?,
                _ => return Err(Error::Usage("give exactly one of --scale or --size".into())),
            };
            let (h, w) = harness::cmd_upscale(&checkpoint, &input, target, &output)?;
            println!("wrote {} ({h}x{w})", output.display());
        }
        Command::Eval { mut paths, scales, ssim, csv } => {
            let dir = paths.pop().expect("clap requires one path");
            let scales = parse_list::<f64>("scales", &scales)?;
            let report = harness::cmd_eval(&paths, &dir, &scales, ssim)?;
            eprint!("{}", report.table());
            report.write_csv(open_out(&csv)?)?;
            if report.all_failed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::AblateK { config, k_list, out } => {
            let ks = parse_list::<usize>("k-list", &k_list)?;
            let rows = harness::cmd_ablate_k(&config, &ks)?;
            for r in &rows {
                match (&r.psnr, &r.error) {
                    (Some(p), None) => eprintln!("K={:<3} ×{}: {p:.3} dB", r.k, r.scale),
                    (_, e) => eprintln!("K={:<3} ×{}: failed: {}", r.k, r.scale, e.as_deref().unwrap_or("")),
                }
            }
            harness::write_ablation_csv(&rows, open_out(&out)?)?;
        }
        Command::Synth { dir, count, min_side, max_side, seed } => {
            if min_side == 0 || min_side > max_side {
                return Err(Error::Usage(format!("bad side range {min_side}..{max_side}")));
            }
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            for (i, im) in synth::toy_set(count, min_side, max_side, seed)?.iter().enumerate() {
                im.save_png(dir.join(format!("toy{i:03}.png")))?;
            }
            println!("wrote {count} images to {}", dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
