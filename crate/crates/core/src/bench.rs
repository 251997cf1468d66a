//! Ratio and throughput measurements in the shape of a codec comparison
//! table: one row per configuration with ratio, pack speed and unpack speed.
//!
//! Corpora are generated outside the timed region. Each row runs at least
//! three repetitions, reports medians, and checks that every repetition
//! round-trips exactly.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::corpus::{gen_corpus, Corpus};
use crate::error::{Error, Result};
use crate::pipeline::{run_pack, run_unpack, PipelineConfig};

pub const MIN_REPETITIONS: usize = 3;

const BENCH_KEY: [u8; 16] = *b"bench-key-000000";
const BENCH_NONCE: [u8; 8] = *b"benchnon";

#[derive(Debug, Clone, Serialize)]
pub struct StageBreakdown {
    /// Compression busy throughput, MB/s.
    pub compress_mbps: f64,
    /// Encryption busy throughput summed over workers, MB/s.
    pub encrypt_mbps: f64,
    pub decompress_mbps: f64,
    pub decrypt_mbps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub corpus: Corpus,
    pub workers: usize,
    pub chunk_size: usize,
    /// Plaintext bytes over frame bytes.
    pub ratio: f64,
    /// Median plaintext MB/s (10^6 bytes per second).
    pub pack_mbps: f64,
    pub unpack_mbps: f64,
    pub repetitions: usize,
    pub stages: StageBreakdown,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub environment: String,
    pub rows: Vec<BenchRow>,
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn mbps(bytes: usize, t: Duration) -> f64 {
    if t.is_zero() {
        return f64::INFINITY;
    }
    bytes as f64 / t.as_secs_f64() / 1e6
}

/// Compares written bytes against the expected plaintext without buffering.
struct VerifySink<'a> {
    expected: &'a [u8],
    pos: usize,
    mismatch: Option<usize>,
}

impl Write for VerifySink<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if self.mismatch.is_none() {
            let end = self.pos + buf.len();
            match self.expected.get(self.pos..end) {
                Some(exp) if exp == buf => {}
                Some(exp) => {
                    let at = exp.iter().zip(buf).position(|(a, b)| a != b).unwrap_or(0);
                    self.mismatch = Some(self.pos + at);
                }
                None => self.mismatch = Some(self.expected.len()),
            }
        }
        self.pos += buf.len();
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Benchmarks one configuration on one corpus.
pub fn run_bench(corpus: &Corpus, cfg: &PipelineConfig, repetitions: usize) -> Result<BenchRow> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::Config(format!(
            "at least {MIN_REPETITIONS} repetitions are required"
        )));
    }
    let data = gen_corpus(corpus)?;
    let cfg = cfg.clone().with_nonce(BENCH_NONCE);

    let mut pack_times = Vec::new();
    let mut unpack_times = Vec::new();
    let mut compress = Vec::new();
    let mut encrypt = Vec::new();
    let mut decompress = Vec::new();
    let mut decrypt = Vec::new();
    let mut frame = Vec::with_capacity(data.len() + data.len() / 64 + 64);
    for rep in 0..repetitions {
        frame.clear();
        let t0 = Instant::now();
        let packed = run_pack(&data[..], &BENCH_KEY, &cfg, &mut frame)?;
        pack_times.push(t0.elapsed());

        let mut sink = VerifySink {
            expected: &data,
            pos: 0,
            mismatch: None,
        };
        let t0 = Instant::now();
        let unpacked = run_unpack(&frame[..], &BENCH_KEY, &cfg, &mut sink)?;
        unpack_times.push(t0.elapsed());
        if let Some(at) = sink.mismatch {
            return Err(Error::BenchIntegrity(format!(
                "repetition {rep}: output differs from input at byte {at}"
            )));
        }
        if sink.pos != data.len() {
            return Err(Error::BenchIntegrity(format!(
                "repetition {rep}: produced {} bytes, expected {}",
                sink.pos,
                data.len()
            )));
        }
        compress.push(packed.codec.busy_throughput() / 1e6);
        encrypt.push(packed.cipher.busy_throughput() / 1e6);
        decompress.push(unpacked.codec.busy_throughput() / 1e6);
        decrypt.push(unpacked.cipher.busy_throughput() / 1e6);
    }
    let med = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };

    Ok(BenchRow {
        name: format!("lzae {} w={}", corpus.kind.name(), cfg.workers),
        corpus: *corpus,
        workers: cfg.workers,
        chunk_size: cfg.chunk_size,
        ratio: if frame.is_empty() {
            1.0
        } else {
            data.len() as f64 / frame.len() as f64
        },
        pack_mbps: mbps(data.len(), median(pack_times)),
        unpack_mbps: mbps(data.len(), median(unpack_times)),
        repetitions,
        stages: StageBreakdown {
            compress_mbps: med(compress),
            encrypt_mbps: med(encrypt),
            decompress_mbps: med(decompress),
            decrypt_mbps: med(decrypt),
        },
    })
}

/// Free-text description of the machine, e.g. CPU model and core count.
pub fn environment_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{cpu}, {cores} hardware thread(s), {}", std::env::consts::OS)
}

impl BenchReport {
    pub fn new(rows: Vec<BenchRow>) -> Self {
        Self {
            environment: environment_note(),
            rows,
        }
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        out.push_str(&format!(
            "{:<name_w$}  {:>7}  {:>14}  {:>14}  {:>10}  {:>10}  {:>10}  {:>10}\n",
            "Name", "Ratio", "C. speed MB/s", "D. speed MB/s", "comp MB/s", "enc MB/s", "decomp MB/s", "dec MB/s"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<name_w$}  {:>7.3}  {:>14.1}  {:>14.1}  {:>10.1}  {:>10.1}  {:>10.1}  {:>10.1}\n",
                r.name,
                r.ratio,
                r.pack_mbps,
                r.unpack_mbps,
                r.stages.compress_mbps,
                r.stages.encrypt_mbps,
                r.stages.decompress_mbps,
                r.stages.decrypt_mbps,
            ));
        }
        out.push_str(&format!("environment: {}\n", self.environment));
        out
    }

    /// One JSON record per row.
    pub fn to_json_lines(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                let mut v = serde_json::to_value(r).expect("rows serialize");
                v["environment"] = serde_json::Value::String(self.environment.clone());
                v.to_string() + "\n"
            })
            .collect()
    }
}
