use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use convertible_cli::{commands, exit_code, ConvertOptions, EncodeOptions};
use convertible_codes::ConversionParams;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ccodes", version, about = "Encode files into MDS stripes and convert them between code parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a file into stripes of an [n, k] code.
    Encode {
        input: PathBuf,
        #[arg(long, visible_alias = "ni")]
        n: usize,
        #[arg(long, visible_alias = "ki")]
        k: usize,
        #[arg(long, default_value_t = 8)]
        field_bits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Symbols per node file.
        #[arg(long)]
        chunk_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a stripe directory to [nf, kf] stripes.
    Convert {
        dir: PathBuf,
        #[arg(long)]
        nf: usize,
        #[arg(long)]
        kf: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plan_out: Option<PathBuf>,
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Re-encode everything if no access-optimal final code is found.
        #[arg(long)]
        allow_default: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reassemble the original file.
    Decode {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every stripe against its parities.
    Verify { dir: PathBuf },
    /// Print the access report of a conversion without touching files.
    Plan {
        #[arg(long)]
        ni: usize,
        #[arg(long)]
        ki: usize,
        #[arg(long)]
        nf: usize,
        #[arg(long)]
        kf: usize,
        #[arg(long, default_value_t = 8)]
        field_bits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode { input, n, k, field_bits, seed, chunk_size, out } => {
            let m = commands::encode(&input, &out, &EncodeOptions { n, k, field_bits, seed, chunk_size })?;
            println!("encoded {} bytes into {} stripes of [{}, {}]", m.payload_len, m.stripes, m.n, m.k);
        }
        Command::Convert { dir, nf, kf, out, plan_out, report_out, allow_default, seed } => {
            let opts = ConvertOptions { n_f: nf, k_f: kf, seed, allow_default };
            let outcome = commands::convert(&dir, &out, &opts)?;
            if let Some(p) = plan_out {
                write_json(&p, &outcome.plan)?;
            }
            if let Some(p) = report_out {
                write_json(&p, &outcome.report)?;
            }
            println!("{}", serde_json::to_string_pretty(&outcome.report)?);
        }
        Command::Decode { dir, out } => {
            let len = commands::decode(&dir, &out)?;
            println!("decoded {len} bytes");
        }
        Command::Verify { dir } => {
            let r = commands::verify(&dir)?;
            println!("ok: {} stripes, {} nodes", r.stripes, r.nodes);
        }
        Command::Plan { ni, ki, nf, kf, field_bits, seed, plan_out } => {
            let params = ConversionParams::new(ni, ki, nf, kf)?;
            let (doc, audit) = commands::plan_only(&params, field_bits, seed)?;
            if let Some(p) = plan_out {
                write_json(&p, &doc)?;
            }
            println!("{}", serde_json::to_string_pretty(&audit)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
