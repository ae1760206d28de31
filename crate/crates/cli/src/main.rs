use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edgepress::edges::CannyConfig;
use edgepress::harness::{cmd_bd, cmd_compress, cmd_decompress, cmd_evaluate, cmd_sweep, cmd_train, BdOutcome};
use edgepress::Error;

#[derive(Parser)]
#[command(name = "edgepress", version, about = "Edge-aware learned pre/post-processing around baseline JPEG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model pair from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Encode an image to a baseline JPEG latent plus a JSON sidecar.
    Compress {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a PGM from a compressed JPEG and its sidecar.
    Decompress {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-image metrics of a directory of images, plus their mean.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = CannyConfig::default().sigma)]
        canny_sigma: f64,
        #[arg(long, default_value_t = CannyConfig::default().low)]
        canny_low: f64,
        #[arg(long, default_value_t = CannyConfig::default().high)]
        canny_high: f64,
    },
    /// BD-PSNR and BD-rate of one curve CSV against another.
    Bd {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train or reload a model per (mode, qf) and write R-D curves.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cmd: Command) -> edgepress::Result<()> {
    match cmd {
        Command::Train { config } => {
            let leg = cmd_train(&config)?;
            if let Some(e) = leg.checkpoint.optim.as_ref().and_then(|o| o.log.last()) {
                println!("epoch {} loss_o {:.6} loss_r {:.6}", e.epoch, e.loss_o, e.loss_r);
            }
            println!("checkpoint {}", leg.checkpoint_path.display());
            println!("log {}", leg.log_path.display());
        }
        Command::Compress { ckpt, input, out } => {
            let s = cmd_compress(&ckpt, &input, &out)?;
            let bytes = std::fs::metadata(&out)?.len();
            let [h, w] = s.original_dims;
            println!(
                "{} {}x{} qf {} {} bytes {:.4} bpp",
                s.mode,
                h,
                w,
                s.qf,
                bytes,
                bytes as f64 * 8.0 / (h * w) as f64
            );
        }
        Command::Decompress { ckpt, input, out } => {
            let img = cmd_decompress(&ckpt, &input, &out)?;
            println!("{}x{} -> {}", img.height(), img.width(), out.display());
        }
        Command::Evaluate {
            ckpt,
            data,
            out,
            canny_sigma,
            canny_low,
            canny_high,
        } => {
            let canny = CannyConfig {
                sigma: canny_sigma,
                low: canny_low,
                high: canny_high,
            };
            canny.validate()?;
            let e = cmd_evaluate(&ckpt, &data, &out, &canny)?;
            let m = e.mean;
            println!(
                "{} images: bpp {:.4} psnr {:.3} ssim {:.4} msssim {:.4} psnrb {:.3} miou {:.4}",
                e.rows.len(),
                m.bpp,
                m.psnr,
                m.ssim,
                m.msssim,
                m.psnrb,
                m.miou
            );
        }
        Command::Bd { reference, test, out } => {
            let r = cmd_bd(&reference, &test, &out)?;
            println!("{}: BD-PSNR {:.4} dB, BD-rate {:.3} %", r.pair, r.bd_psnr_db, r.bd_rate_percent);
        }
        Command::Sweep { config } => {
            let s = cmd_sweep(&config)?;
            for p in &s.curve_paths {
                println!("curve {}", p.display());
            }
            for b in &s.bd {
                match b {
                    BdOutcome::Report(r) => {
                        println!("{}: BD-PSNR {:.4} dB, BD-rate {:.3} %", r.pair, r.bd_psnr_db, r.bd_rate_percent)
                    }
                    BdOutcome::Failed { pair, error } => println!("{pair}: {error}"),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Refused(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
