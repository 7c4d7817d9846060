//! Compression ratios, memory tables, distortion statistics, perplexity
//! arithmetic and throughput timing.

pub mod bench;
pub mod distortion;
pub mod memory;
pub mod ppl;
pub mod ratio;

pub use bench::{bench_pool, run_bench, BenchConfig, BenchSummary};
pub use distortion::{distortion_report, CompressionReport, LayerDistortion};
pub use memory::{memory_table, reduction_percent, render_csv, render_text, MemoryRow};
pub use ppl::{ppl_delta, PplDelta};
pub use ratio::{compression_ratio, CompressionRatio};
