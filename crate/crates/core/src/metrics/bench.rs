//! Wall-clock timings of pool build and concurrent decompression.
//! Informational only.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::geometry::ModelGeometry;
use crate::pool::{attach_agent, build_pool, SharedPool};
use crate::synth::synth_gaussian_dump;

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub geometry: ModelGeometry,
    pub agents: usize,
    pub repetitions: usize,
    pub decode_bits: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub agents: usize,
    pub repetitions: usize,
    pub build: Duration,
    /// Mean time for one agent to decompress one layer (K and V), measured
    /// with no other readers running.
    pub per_layer_decode: Duration,
    /// Wall time of each repetition in which every agent decompresses every
    /// layer concurrently.
    pub concurrent_runs: Vec<Duration>,
    /// Decompressed bytes (f32 image) per concurrent repetition.
    pub bytes_per_run: u64,
}

impl BenchSummary {
    /// Decompressed bytes per second across all agents, from the fastest run.
    pub fn aggregate_throughput(&self) -> f64 {
        let best = self
            .concurrent_runs
            .iter()
            .min()
            .copied()
            .unwrap_or_default()
            .as_secs_f64();
        if best == 0.0 {
            return 0.0;
        }
        self.bytes_per_run as f64 / best
    }
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchSummary> {
    if config.repetitions == 0 {
        return Err(Error::InvalidArgument(
            "repetitions must be at least 1".into(),
        ));
    }
    if config.agents == 0 {
        return Err(Error::InvalidArgument("agents must be at least 1".into()));
    }
    let dump = synth_gaussian_dump(&config.geometry, config.seed)?;
    let start = Instant::now();
    let pool = build_pool(&dump)?;
    let build = start.elapsed();
    drop(dump);
    bench_pool(
        &pool,
        config.agents,
        config.repetitions,
        config.decode_bits,
        build,
    )
}

/// Times reads against an existing pool. `build` is recorded as given.
pub fn bench_pool(
    pool: &Arc<SharedPool>,
    agents: usize,
    repetitions: usize,
    decode_bits: u32,
    build: Duration,
) -> Result<BenchSummary> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument(
            "repetitions must be at least 1".into(),
        ));
    }
    let g = *pool.geometry();
    let n = g.elements_per_tensor();

    let view = attach_agent(pool, decode_bits)?;
    let mut k = vec![0f32; n];
    let mut v = vec![0f32; n];
    let start = Instant::now();
    for _ in 0..repetitions {
        for layer in 0..g.num_layers {
            view.get_kv_for_layer_into(layer, &mut k, &mut v)?;
        }
    }
    let per_layer_decode = start.elapsed() / (repetitions * g.num_layers) as u32;

    let views = (0..agents)
        .map(|_| attach_agent(pool, decode_bits))
        .collect::<Result<Vec<_>>>()?;
    let mut concurrent_runs = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        thread::scope(|s| -> Result<()> {
            let handles: Vec<_> = views
                .iter()
                .map(|view| {
                    s.spawn(move || -> Result<()> {
                        let mut k = vec![0f32; n];
                        let mut v = vec![0f32; n];
                        for layer in 0..g.num_layers {
                            view.get_kv_for_layer_into(layer, &mut k, &mut v)?;
                        }
                        Ok(())
                    })
                })
                .collect();
            for h in handles {
                h.join().expect("reader thread panicked")?;
            }
            Ok(())
        })?;
        concurrent_runs.push(start.elapsed());
    }

    Ok(BenchSummary {
        agents,
        repetitions,
        build,
        per_layer_decode,
        concurrent_runs,
        bytes_per_run: (agents * g.num_layers * 2 * n * 4) as u64,
    })
}
