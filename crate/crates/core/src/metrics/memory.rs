//! KV memory of N private full-precision caches versus one shared pool.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::ModelGeometry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryRow {
    pub agents: usize,
    pub tokens: usize,
    /// N private caches at the baseline precision.
    pub baseline_bytes: u64,
    /// One pool: a single private cache divided by the compression ratio.
    pub pool_bytes: u64,
    pub reduction_percent: f64,
}

/// 100 · (1 - 1/(agents · ratio)).
pub fn reduction_percent(agents: usize, ratio: f64) -> f64 {
    100.0 * (1.0 - 1.0 / (agents as f64 * ratio))
}

pub fn memory_table(
    geometry: &ModelGeometry,
    agent_counts: &[usize],
    ratio: f64,
) -> Result<Vec<MemoryRow>> {
    geometry.validate()?;
    if !(ratio.is_finite() && ratio > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio must exceed 1, got {ratio}"
        )));
    }
    if let Some(&bad) = agent_counts.iter().find(|&&n| n == 0) {
        return Err(Error::InvalidArgument(format!(
            "agent count {bad} must be at least 1"
        )));
    }
    let per_agent = geometry.baseline_bytes();
    let pool_bytes = (per_agent as f64 / ratio).round() as u64;
    Ok(agent_counts
        .iter()
        .map(|&agents| MemoryRow {
            agents,
            tokens: geometry.seq_len,
            baseline_bytes: per_agent * agents as u64,
            pool_bytes,
            reduction_percent: reduction_percent(agents, ratio),
        })
        .collect())
}

fn gb(bytes: u64) -> f64 {
    bytes as f64 / 1e9
}

/// Aligned text table, sizes in decimal GB.
pub fn render_text(rows: &[MemoryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>7} {:>8} {:>16} {:>12} {:>10}",
        "agents", "tokens", "without pool", "with pool", "reduction"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>7} {:>8} {:>13.3} GB {:>9.3} GB {:>9.1}%",
            r.agents,
            r.tokens,
            gb(r.baseline_bytes),
            gb(r.pool_bytes),
            r.reduction_percent
        );
    }
    out
}

pub fn render_csv(rows: &[MemoryRow]) -> String {
    let mut out = String::from("agents,tokens,baseline_bytes,pool_bytes,reduction_percent\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4}",
            r.agents, r.tokens, r.baseline_bytes, r.pool_bytes, r.reduction_percent
        );
    }
    out
}
