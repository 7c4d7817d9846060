use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kvshare_core::ModelGeometry;

mod commands;
mod verify;

/// Build, inspect and verify shared compressed KV pools.
#[derive(Debug, Parser)]
#[command(name = "kvshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a PKVD dump (or a synthetic one) into a PKVP pool snapshot.
    Compress {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decode every layer of a PKVP snapshot into a PKVD dump.
    Decompress {
        /// PKVP snapshot.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 32, value_parser = decode_bits)]
        decode_bits: u32,
    },
    /// Write a seeded Gaussian PKVD dump.
    Synth {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check a snapshot against the dump it was built from.
    Verify {
        /// PKVD dump.
        #[arg(long)]
        input: PathBuf,
        /// PKVP snapshot.
        #[arg(long)]
        pool: PathBuf,
        /// Concurrent reader counts; the largest is used for the bit-equality run.
        #[arg(long, value_delimiter = ',', default_value = "15")]
        agents: Vec<usize>,
        #[arg(long, default_value_t = 16, value_parser = decode_bits)]
        decode_bits: u32,
    },
    /// Print the memory table for shared-pool vs per-agent caches.
    Simulate {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, value_delimiter = ',', default_value = "3,5,10,15")]
        agents: Vec<usize>,
        /// Context lengths; defaults to --seq-len.
        #[arg(long, value_delimiter = ',')]
        tokens: Vec<usize>,
        #[arg(long)]
        csv: bool,
    },
    /// Time pool build and concurrent decompression.
    Bench {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        agents: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long, default_value_t = 16, value_parser = decode_bits)]
        decode_bits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: bool,
    },
    /// Train a Lloyd-Max codebook on seeded N(0, 1) samples.
    Lloyd {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 3)]
        bits: u8,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, Args)]
struct GeometryArgs {
    #[arg(long, default_value_t = 32)]
    layers: usize,
    #[arg(long, default_value_t = 8)]
    kv_heads: usize,
    #[arg(long, default_value_t = 128)]
    head_dim: usize,
    #[arg(long, default_value_t = 1024)]
    seq_len: usize,
    #[arg(long, default_value_t = 16)]
    baseline_bits: u32,
}

impl GeometryArgs {
    fn geometry(&self) -> kvshare_core::Result<ModelGeometry> {
        ModelGeometry::new(
            self.layers,
            1,
            self.kv_heads,
            self.seq_len,
            self.head_dim,
            self.baseline_bits,
        )
    }
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// PKVD dump to read.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    input: Option<PathBuf>,
    /// Generate a Gaussian dump from the geometry flags instead of reading one.
    #[arg(long)]
    synthetic: bool,
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Seed for synthetic data and the sign diagonal.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PoolArgs {
    /// Store value indices packed 8 per 3 bytes.
    #[arg(long)]
    packed: bool,
    /// Apply a seeded random sign flip before the value rotation.
    #[arg(long)]
    sign_diagonal: bool,
}

fn decode_bits(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(b @ (16 | 32)) => Ok(b),
        _ => Err(format!("expected 16 or 32, got {s}")),
    }
}

/// Exit status contract: 0 success, 1 verification failure, 2 usage or
/// format error.
enum Status {
    Ok,
    VerificationFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
