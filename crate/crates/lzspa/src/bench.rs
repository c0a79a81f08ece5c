//! Throughput and latency measurements backing the scaling claims. All
//! assertions downstream use ratios rather than wall-clock, except for one
//! loose per-sample generation ceiling.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::generation::{generate, GenConfig};
use crate::transform::Lz78Spa;
use crate::types::{Alphabet, Sequence, Symbol};

/// Identifies the machine a report came from.
pub fn hardware_fingerprint() -> String {
    format!(
        "{}-{}-{}cpus",
        std::env::consts::OS,
        std::env::consts::ARCH,
        std::thread::available_parallelism().map_or(0, |n| n.get())
    )
}

#[derive(Debug, Clone)]
pub struct ThroughputRow {
    pub n: usize,
    pub seconds: f64,
    pub symbols_per_sec: f64,
    pub node_count: usize,
    pub nodes_per_n_over_log2n: f64,
    /// Bytes of a serialized model as a memory proxy.
    pub model_bytes: usize,
}

#[derive(Debug, Clone)]
pub struct ThroughputReport {
    pub hardware: String,
    pub rows: Vec<ThroughputRow>,
}

/// Order-1 Markov binary data with the given flip rate. Lower rates give
/// smaller trees, which keeps large-scale timing cache-resident.
pub fn synthetic_corpus(n: usize, flip: f64, seed: u64) -> Sequence {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut tokens: Vec<Symbol> = Vec::with_capacity(n);
    let mut cur: Symbol = 0;
    for _ in 0..n {
        tokens.push(cur);
        if rng.random::<f64>() < flip {
            cur ^= 1;
        }
    }
    Sequence::new(Alphabet::new(2).unwrap(), tokens).unwrap()
}

/// Trains a fresh model per corpus size and reports timing plus tree
/// growth. Each measurement is the median of `repeats` runs.
pub fn bench_train_throughput(
    sizes: &[usize],
    flip: f64,
    repeats: usize,
    seed: u64,
) -> Result<ThroughputReport> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let corpus = synthetic_corpus(n, flip, seed);
        let mut times = Vec::with_capacity(repeats);
        let mut keep: Option<Lz78Spa> = None;
        for _ in 0..repeats.max(1) {
            let mut model = Lz78Spa::new_dirichlet(corpus.alphabet(), 0.5)?;
            let start = Instant::now();
            model.train(std::slice::from_ref(&corpus), 1)?;
            times.push(start.elapsed().as_secs_f64());
            keep = Some(model);
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let seconds = times[times.len() / 2];
        let model = keep.expect("at least one run");
        let report = model.complexity_report();
        rows.push(ThroughputRow {
            n,
            seconds,
            symbols_per_sec: n as f64 / seconds,
            node_count: report.node_count,
            nodes_per_n_over_log2n: report.nodes_per_n_over_log2n,
            model_bytes: model.to_bytes().len(),
        });
    }
    Ok(ThroughputReport {
        hardware: hardware_fingerprint(),
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct GenerationLatencyRow {
    pub train_symbols: usize,
    pub node_count: usize,
    pub top_k: u32,
    pub seconds_per_sample: f64,
    pub seconds_per_symbol: f64,
}

#[derive(Debug, Clone)]
pub struct GenerationLatencyReport {
    pub hardware: String,
    pub sample_len: usize,
    pub rows: Vec<GenerationLatencyRow>,
}

/// Measures 256-symbol sample generation across model sizes and top-k
/// settings. Per-symbol cost is dominated by one O(A) distribution build,
/// so it should be flat in model size.
pub fn bench_generation_latency(
    train_sizes: &[usize],
    flip: f64,
    top_ks: &[u32],
    samples: usize,
    seed: u64,
) -> Result<GenerationLatencyReport> {
    let sample_len = 256usize;
    let mut rows = Vec::new();
    for &n in train_sizes {
        let corpus = synthetic_corpus(n, flip, seed);
        let mut model = Lz78Spa::new_dirichlet(corpus.alphabet(), 0.5)?;
        model.train(std::slice::from_ref(&corpus), 1)?;
        model.freeze();
        let node_count = model.tree().node_count();
        for &top_k in top_ks {
            let mut cfg = GenConfig::new(sample_len);
            cfg.temperature = 0.8;
            cfg.top_k = top_k;
            cfg.min_context = 64;
            // Warm pass, then timed passes.
            generate(&model, &cfg)?;
            let start = Instant::now();
            for i in 0..samples.max(1) {
                cfg.rng_seed = i as u64;
                generate(&model, &cfg)?;
            }
            let total = start.elapsed().as_secs_f64();
            let per_sample = total / samples.max(1) as f64;
            rows.push(GenerationLatencyRow {
                train_symbols: n,
                node_count,
                top_k,
                seconds_per_sample: per_sample,
                seconds_per_symbol: per_sample / sample_len as f64,
            });
        }
    }
    Ok(GenerationLatencyReport {
        hardware: hardware_fingerprint(),
        sample_len,
        rows,
    })
}
