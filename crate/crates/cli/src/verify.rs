use std::path::Path;
use std::sync::Arc;
use std::thread;

use anyhow::{bail, Context, Result};
use kvshare_core::pool::TranscriptEntry;
use kvshare_core::{
    attach_agent, build_pool_with, distortion_report, read_dump, read_snapshot, SharedPool,
};

use crate::Status;

/// Layer-by-layer transcript; a layer that fails to decode is reported as an
/// error string instead of aborting the walk.
fn transcript(pool: &Arc<SharedPool>, bits: u32) -> Result<Vec<Result<TranscriptEntry, String>>> {
    let view = attach_agent(pool, bits)?;
    let n = pool.geometry().elements_per_tensor();
    let mut k = vec![0f32; n];
    let mut v = vec![0f32; n];
    Ok((0..pool.geometry().num_layers)
        .map(|i| {
            view.layer_entry(i, &mut k, &mut v)
                .map_err(|e| e.to_string())
        })
        .collect())
}

pub(crate) fn verify(
    dump_path: &Path,
    pool_path: &Path,
    agents: &[usize],
    bits: u32,
) -> Result<Status> {
    if agents.is_empty() || agents.contains(&0) {
        bail!("--agents must list counts of at least 1");
    }
    let dump = read_dump(dump_path).with_context(|| format!("reading {}", dump_path.display()))?;
    let pool = Arc::new(
        read_snapshot(pool_path).with_context(|| format!("reading {}", pool_path.display()))?,
    );
    if dump.geometry() != pool.geometry() {
        bail!(
            "geometry mismatch: dump {:?}, pool {:?}",
            dump.geometry(),
            pool.geometry()
        );
    }

    let mut failures: Vec<String> = Vec::new();

    // Recompressing the dump with the pool's settings must reproduce it.
    let reference = build_pool_with(&dump, pool.config())?;
    let expected = transcript(&reference, bits)?;
    let observed = transcript(&pool, bits)?;
    let mut decodable = true;
    for (i, (want, got)) in expected.iter().zip(&observed).enumerate() {
        let want = want
            .as_ref()
            .map_err(|e| anyhow::anyhow!("reference layer {i}: {e}"))?;
        match got {
            Err(e) => {
                decodable = false;
                failures.push(format!("layer {i}: {e}"));
            }
            Ok(got) => {
                if got.k_checksum != want.k_checksum {
                    failures.push(format!("checksum mismatch in layer {i} K"));
                }
                if got.v_checksum != want.v_checksum {
                    failures.push(format!("checksum mismatch in layer {i} V"));
                }
            }
        }
    }
    report("recompression checksums", &failures);

    let before = failures.len();
    let readers = agents.iter().copied().max().unwrap_or(1);
    if decodable {
        let single: Vec<TranscriptEntry> = observed
            .into_iter()
            .map(|e| e.expect("decodable"))
            .collect();
        let views = (0..readers)
            .map(|_| attach_agent(&pool, bits))
            .collect::<kvshare_core::Result<Vec<_>>>()?;
        let results: Vec<_> = thread::scope(|s| {
            let handles: Vec<_> = views
                .iter()
                .map(|v| s.spawn(move || v.inject_all()))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("reader panicked"))
                .collect()
        });
        for (view, r) in views.iter().zip(results) {
            match r {
                Ok(t) if t.entries == single => {}
                Ok(_) => failures.push(format!("agent {} read a different sequence", view.id().0)),
                Err(e) => failures.push(format!("agent {}: {e}", view.id().0)),
            }
        }
    } else {
        failures.push("concurrent readers skipped: pool does not decode".into());
    }
    report(
        &format!("{readers} concurrent readers"),
        &failures[before..],
    );

    let before = failures.len();
    if decodable {
        let r = distortion_report(&dump, &pool)?;
        for l in &r.layers {
            if !l.k_within_bound() {
                failures.push(format!(
                    "layer {} K error {:.3e} exceeds half step {:.3e}",
                    l.layer,
                    l.k_max_abs_error,
                    f64::from(l.k_scale) / 2.0
                ));
            }
        }
        for layer in r.v_bound_violations() {
            failures.push(format!(
                "layer {layer} V normalized mse {:.5} exceeds {:.5}",
                r.layers[layer].v_normalized_mse, r.v_bound
            ));
        }
    } else {
        failures.push("fidelity skipped: pool does not decode".into());
    }
    report("fidelity bounds", &failures[before..]);

    let before = failures.len();
    let bytes = pool.payload_bytes();
    if bytes != reference.payload_bytes() {
        failures.push(format!(
            "pool payload {bytes} bytes, recompression {} bytes",
            reference.payload_bytes()
        ));
    }
    let mut held = Vec::new();
    for &n in agents {
        while held.len() < n {
            held.push(attach_agent(&pool, bits)?);
        }
        if pool.payload_bytes() != bytes {
            failures.push(format!(
                "payload changed to {} bytes at {n} agents",
                pool.payload_bytes()
            ));
        }
    }
    report("pool size invariance", &failures[before..]);

    if failures.is_empty() {
        println!("verify: ok");
        Ok(Status::Ok)
    } else {
        println!("verify: {} failed checks", failures.len());
        Ok(Status::VerificationFailed)
    }
}

fn report(check: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("PASS {check}");
    } else {
        println!("FAIL {check}");
        for f in failures {
            println!("  {f}");
        }
    }
}
