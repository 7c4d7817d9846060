use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use kvshare_core::metrics::{bench_pool, render_csv, render_text, CompressionReport};
use kvshare_core::quant::GAUSSIAN_3BIT_CENTROIDS;
use kvshare_core::{
    attach_agent, build_pool_with, compression_ratio, distortion_report, gaussian_samples,
    lloyd_max_train, memory_table, read_dump, read_snapshot, synth_gaussian_dump, write_dump,
    write_snapshot, KvDump, KvLayer, PoolConfig,
};

use crate::{Command, PoolArgs, SourceArgs, Status};

pub(crate) fn run(command: Command) -> Result<Status> {
    match command {
        Command::Compress {
            source,
            pool,
            output,
        } => compress(&source, &pool, &output),
        Command::Decompress {
            input,
            output,
            decode_bits,
        } => decompress(&input, &output, decode_bits),
        Command::Synth {
            geometry,
            seed,
            output,
        } => {
            let g = geometry.geometry()?;
            let dump = synth_gaussian_dump(&g, seed)?;
            write_dump(&dump, &output).with_context(|| format!("writing {}", output.display()))?;
            println!(
                "wrote {} ({} layers, {} elements)",
                output.display(),
                g.num_layers,
                g.total_elements()
            );
            Ok(Status::Ok)
        }
        Command::Verify {
            input,
            pool,
            agents,
            decode_bits,
        } => crate::verify::verify(&input, &pool, &agents, decode_bits),
        Command::Simulate {
            geometry,
            agents,
            tokens,
            csv,
        } => {
            if agents.is_empty() {
                bail!("--agents must list at least one count");
            }
            let g = geometry.geometry()?;
            let tokens = if tokens.is_empty() {
                vec![g.seq_len]
            } else {
                tokens
            };
            let ratio = compression_ratio(8, 3, g.baseline_bits)?.value();
            let mut rows = Vec::new();
            for t in tokens {
                rows.extend(memory_table(&g.with_seq_len(t), &agents, ratio)?);
            }
            print!(
                "{}",
                if csv {
                    render_csv(&rows)
                } else {
                    render_text(&rows)
                }
            );
            Ok(Status::Ok)
        }
        Command::Bench {
            geometry,
            agents,
            repetitions,
            decode_bits,
            seed,
            csv,
        } => {
            if agents.is_empty() {
                bail!("--agents must list at least one count");
            }
            let g = geometry.geometry()?;
            let dump = synth_gaussian_dump(&g, seed)?;
            let start = std::time::Instant::now();
            let pool = build_pool_with(&dump, PoolConfig::default())?;
            let build = start.elapsed();
            drop(dump);
            if csv {
                println!("agents,build_s,layer_decode_ms,best_run_s,throughput_mb_s");
            } else {
                println!("build {:.3}s", build.as_secs_f64());
                println!(
                    "{:>7} {:>16} {:>12} {:>16}",
                    "agents", "layer decode ms", "best run s", "throughput MB/s"
                );
            }
            for n in agents {
                let s = bench_pool(&pool, n, repetitions, decode_bits, build)?;
                let best = s
                    .concurrent_runs
                    .iter()
                    .min()
                    .copied()
                    .unwrap_or(Duration::ZERO);
                let mbs = s.aggregate_throughput() / 1e6;
                let layer_ms = s.per_layer_decode.as_secs_f64() * 1e3;
                if csv {
                    println!(
                        "{n},{:.6},{layer_ms:.4},{:.6},{mbs:.1}",
                        build.as_secs_f64(),
                        best.as_secs_f64()
                    );
                } else {
                    println!(
                        "{n:>7} {layer_ms:>16.3} {:>12.3} {mbs:>16.1}",
                        best.as_secs_f64()
                    );
                }
            }
            Ok(Status::Ok)
        }
        Command::Lloyd {
            samples,
            bits,
            max_iters,
            tol,
            seed,
        } => {
            let data = gaussian_samples(samples, seed);
            let out = lloyd_max_train(&data, bits, max_iters, tol)?;
            println!(
                "{} iterations, converged {}, empty-cell repairs {}, mse {:.6}",
                out.iterations, out.converged, out.empty_cell_repairs, out.distortion
            );
            let table = (bits == 3).then_some(GAUSSIAN_3BIT_CENTROIDS);
            for (i, c) in out.centroids.iter().enumerate() {
                match table {
                    Some(t) => println!(
                        "{i:>3} {c:>10.5} {:>10.5} {:>+9.5}",
                        t[i],
                        c - f64::from(t[i])
                    ),
                    None => println!("{i:>3} {c:>10.5}"),
                }
            }
            Ok(Status::Ok)
        }
    }
}

fn compress(source: &SourceArgs, args: &PoolArgs, output: &Path) -> Result<Status> {
    let dump = match &source.input {
        Some(path) => read_dump(path).with_context(|| format!("reading {}", path.display()))?,
        None => synth_gaussian_dump(&source.geometry.geometry()?, source.seed)?,
    };
    let mut config = PoolConfig::default();
    config.value.packed = args.packed;
    config.value.sign_seed = args.sign_diagonal.then_some(source.seed);
    let pool = build_pool_with(&dump, config)?;
    write_snapshot(&pool, output).with_context(|| format!("writing {}", output.display()))?;
    let report = distortion_report(&dump, &pool)?;
    println!("wrote {}", output.display());
    print_report(&report);
    Ok(Status::Ok)
}

pub(crate) fn print_report(r: &CompressionReport) {
    println!(
        "bits K/V/baseline {}/{}/{}  logical ratio {:.2}  physical ratio {:.3}",
        r.k_bits, r.v_bits, r.baseline_bits, r.logical_ratio, r.physical_ratio
    );
    println!(
        "baseline bytes {}  pool bytes {}",
        r.baseline_bytes, r.pool_bytes
    );
    if r.layers.is_empty() {
        return;
    }
    println!(
        "{:>5} {:>12} {:>14} {:>12} {:>12}",
        "layer", "k scale", "k max err", "k mse", "v nmse"
    );
    for l in &r.layers {
        println!(
            "{:>5} {:>12.6e} {:>14.6e} {:>12.4e} {:>12.6}",
            l.layer, l.k_scale, l.k_max_abs_error, l.k_mse, l.v_normalized_mse
        );
    }
    println!(
        "mean v nmse {:.6} (bound {:.6})",
        r.mean_v_normalized_mse(),
        r.v_bound
    );
}

fn decompress(input: &Path, output: &Path, decode_bits: u32) -> Result<Status> {
    let pool = std::sync::Arc::new(
        read_snapshot(input).with_context(|| format!("reading {}", input.display()))?,
    );
    let view = attach_agent(&pool, decode_bits)?;
    let layers = (0..pool.geometry().num_layers)
        .map(|i| view.get_kv_for_layer(i).map(|(k, v)| KvLayer { k, v }))
        .collect::<kvshare_core::Result<Vec<_>>>()?;
    let dump = KvDump::new(*pool.geometry(), layers)?;
    write_dump(&dump, output).with_context(|| format!("writing {}", output.display()))?;
    println!(
        "wrote {} ({} layers, decoded at {} bits)",
        output.display(),
        pool.geometry().num_layers,
        decode_bits
    );
    Ok(Status::Ok)
}
