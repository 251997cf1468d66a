//! Overlapped compress/encrypt and decrypt/decompress.
//!
//! Forward: one compressor thread feeds a bounded FIFO; `workers` cipher
//! threads encrypt blocks at index-derived counter bases; the calling thread
//! restores index order and writes the frame. Reverse mirrors it: a reader
//! thread feeds decrypt workers, the calling thread decompresses in order.
//!
//! In-flight blocks (read but not yet written) are capped at
//! `queue_capacity + workers` by a credit channel the writer refills.

mod pack;
mod reorder;
mod unpack;

use std::fmt;
use std::io::{self, Read};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender};
use serde::Serialize;

use crate::error::{Error, Stage};
use crate::frame::{BlockSize, BlockUnit, FrameFlags};
use crate::lz_block::DEFAULT_TABLE_SIZE;

pub use pack::run_pack;
pub use reorder::ReorderBuffer;
pub use unpack::run_unpack;

pub const DEFAULT_CHUNK_SIZE: usize = 4 << 20;
pub const MAX_DEFAULT_WORKERS: usize = 8;

/// Hardware parallelism, capped at [`MAX_DEFAULT_WORKERS`].
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .clamp(1, MAX_DEFAULT_WORKERS)
}

/// Artificial per-block stage cost, for tests and benchmarks.
#[derive(Clone)]
pub enum Delay {
    Fixed(Duration),
    PerIndex(Arc<dyn Fn(u64) -> Duration + Send + Sync>),
}

impl Delay {
    pub fn per_index(f: impl Fn(u64) -> Duration + Send + Sync + 'static) -> Self {
        Delay::PerIndex(Arc::new(f))
    }

    fn duration(&self, index: u64) -> Duration {
        match self {
            Delay::Fixed(d) => *d,
            Delay::PerIndex(f) => f(index),
        }
    }
}

impl fmt::Debug for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Fixed(d) => write!(f, "Fixed({d:?})"),
            Delay::PerIndex(_) => f.write_str("PerIndex(..)"),
        }
    }
}

fn apply_delay(delay: &Option<Delay>, index: u64) {
    if let Some(d) = delay {
        let d = d.duration(index);
        if !d.is_zero() {
            std::thread::sleep(d);
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Plaintext bytes per frame block; at most `block_size.bytes()`.
    pub chunk_size: usize,
    /// Maximum block size recorded in the frame; fixes the counter spacing.
    pub block_size: BlockSize,
    pub workers: usize,
    /// Capacity of the queue between the sequential stage and the workers.
    pub queue_capacity: usize,
    pub flags: FrameFlags,
    pub table_size: usize,
    /// Frame nonce; drawn from the OS when `None`.
    pub nonce: Option<[u8; 8]>,
    /// Extra cost per block in the compress (pack) or decompress (unpack) stage.
    pub codec_delay: Option<Delay>,
    /// Extra cost per block in the cipher stage.
    pub cipher_delay: Option<Delay>,
    pub record_events: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let workers = default_workers();
        Self {
            chunk_size: DEFAULT_CHUNK_SIZE,
            block_size: BlockSize::default(),
            workers,
            queue_capacity: 2 * workers,
            flags: FrameFlags::default(),
            table_size: DEFAULT_TABLE_SIZE,
            nonce: None,
            codec_delay: None,
            cipher_delay: None,
            record_events: false,
        }
    }
}

impl PipelineConfig {
    /// Sets the worker count and resets the queue capacity to twice that.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self.queue_capacity = 2 * workers;
        self
    }

    pub fn with_queue_capacity(mut self, queue_capacity: usize) -> Self {
        self.queue_capacity = queue_capacity;
        self
    }

    /// Sets the chunk size and picks the smallest block size holding it.
    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        if let Some(bs) = BlockSize::fitting(chunk_size) {
            self.block_size = bs;
        }
        self
    }

    pub fn with_nonce(mut self, nonce: [u8; 8]) -> Self {
        self.nonce = Some(nonce);
        self
    }

    pub fn with_flags(mut self, flags: FrameFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn max_in_flight(&self) -> usize {
        self.queue_capacity + self.workers
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.chunk_size == 0 {
            return bad("chunk size must be at least 1".into());
        }
        if self.chunk_size > self.block_size.bytes() {
            return bad(format!(
                "chunk size {} exceeds the maximum block size {}",
                self.chunk_size,
                self.block_size.bytes()
            ));
        }
        if self.workers == 0 {
            return bad("at least one worker is required".into());
        }
        if self.queue_capacity == 0 {
            return bad("queue capacity must be at least 1".into());
        }
        crate::lz_block::MatchTable::new(self.table_size)?;
        Ok(())
    }
}

/// Counters for one pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageCounters {
    pub bytes_in: u64,
    pub bytes_out: u64,
    /// Time spent working, summed over the stage's threads.
    pub busy_time: Duration,
    /// First start to last finish.
    pub wall_time: Duration,
}

impl StageCounters {
    fn merge(&mut self, other: &StageCounters) {
        self.bytes_in += other.bytes_in;
        self.bytes_out += other.bytes_out;
        self.busy_time += other.busy_time;
        self.wall_time = self.wall_time.max(other.wall_time);
    }

    /// Input bytes per second of busy time.
    pub fn busy_throughput(&self) -> f64 {
        per_second(self.bytes_in, self.busy_time)
    }
}

fn per_second(bytes: u64, t: Duration) -> f64 {
    if t.is_zero() {
        0.0
    } else {
        bytes as f64 / t.as_secs_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Pack,
    Unpack,
}

/// Per-block stage timestamps, relative to the pipeline start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEvent {
    pub index: u64,
    /// Compressed (pack) or decompressed (unpack).
    pub codec_at: Duration,
    /// Encrypted (pack) or decrypted (unpack).
    pub cipher_at: Duration,
    pub written_at: Duration,
}

impl BlockEvent {
    /// One line-delimited JSON record, named after the direction's stages.
    pub fn to_json_line(&self, direction: Direction) -> String {
        let us = |d: Duration| d.as_micros() as u64;
        let value = match direction {
            Direction::Pack => serde_json::json!({
                "index": self.index,
                "compressed_at_us": us(self.codec_at),
                "encrypted_at_us": us(self.cipher_at),
                "written_at_us": us(self.written_at),
            }),
            Direction::Unpack => serde_json::json!({
                "index": self.index,
                "decrypted_at_us": us(self.cipher_at),
                "decompressed_at_us": us(self.codec_at),
                "written_at_us": us(self.written_at),
            }),
        };
        value.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub direction: Direction,
    /// Compression (pack) or decompression (unpack).
    pub codec: StageCounters,
    /// Encryption (pack) or decryption (unpack).
    pub cipher: StageCounters,
    /// Plaintext bytes consumed (pack) or produced (unpack).
    pub plain_bytes: u64,
    /// Total frame bytes written (pack) or read (unpack).
    pub frame_bytes: u64,
    pub blocks: u64,
    pub wall_time: Duration,
    /// Most blocks simultaneously read but not yet written.
    pub peak_in_flight: usize,
    /// Most blocks simultaneously waiting for or inside the cipher stage.
    pub peak_cipher_backlog: usize,
    pub events: Vec<BlockEvent>,
}

impl StageStats {
    fn new(direction: Direction) -> Self {
        Self {
            direction,
            codec: StageCounters::default(),
            cipher: StageCounters::default(),
            plain_bytes: 0,
            frame_bytes: 0,
            blocks: 0,
            wall_time: Duration::ZERO,
            peak_in_flight: 0,
            peak_cipher_backlog: 0,
            events: Vec::new(),
        }
    }

    /// Plaintext bytes over compressed payload bytes; 1.0 when empty.
    pub fn compression_ratio(&self) -> f64 {
        let (plain, packed) = match self.direction {
            Direction::Pack => (self.codec.bytes_in, self.codec.bytes_out),
            Direction::Unpack => (self.codec.bytes_out, self.codec.bytes_in),
        };
        if packed == 0 {
            1.0
        } else {
            plain as f64 / packed as f64
        }
    }

    /// Codec stage throughput over its wall time, plaintext bytes per second.
    pub fn codec_throughput(&self) -> f64 {
        per_second(self.plain_bytes, self.codec.wall_time)
    }

    pub fn cipher_throughput(&self) -> f64 {
        per_second(self.cipher.bytes_in, self.cipher.wall_time)
    }

    /// Plaintext bytes per second of total wall time.
    pub fn end_to_end_throughput(&self) -> f64 {
        per_second(self.plain_bytes, self.wall_time)
    }

    /// Human-readable summary for verbose CLI output.
    pub fn summary(&self) -> String {
        let mbs = |v: f64| v / 1e6;
        format!(
            "{:?}: {} plaintext bytes, {} frame bytes, {} blocks, ratio {:.3}, \
             codec {:.1} MB/s (busy {:.1} ms), cipher {:.1} MB/s (busy {:.1} ms), \
             end-to-end {:.1} MB/s in {:.1} ms, peak in-flight {}",
            self.direction,
            self.plain_bytes,
            self.frame_bytes,
            self.blocks,
            self.compression_ratio(),
            mbs(self.codec_throughput()),
            self.codec.busy_time.as_secs_f64() * 1e3,
            mbs(self.cipher_throughput()),
            self.cipher.busy_time.as_secs_f64() * 1e3,
            mbs(self.end_to_end_throughput()),
            self.wall_time.as_secs_f64() * 1e3,
            self.peak_in_flight,
        )
    }
}

/// Splits a byte stream into consecutive plaintext blocks of `chunk_size`
/// bytes (the last may be shorter, never empty).
pub struct ChunkSource<R> {
    input: R,
    chunk_size: usize,
    next_index: u64,
    done: bool,
}

pub fn chunk_source<R: Read>(input: R, chunk_size: usize) -> ChunkSource<R> {
    assert!(chunk_size >= 1, "chunk size must be at least 1");
    ChunkSource {
        input,
        chunk_size,
        next_index: 0,
        done: false,
    }
}

impl<R: Read> Iterator for ChunkSource<R> {
    type Item = io::Result<BlockUnit>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut buf = vec![0u8; self.chunk_size];
        let mut filled = 0;
        while filled < buf.len() {
            match self.input.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        if filled < buf.len() {
            self.done = true;
        }
        if filled == 0 {
            return None;
        }
        buf.truncate(filled);
        let index = self.next_index;
        self.next_index += 1;
        Some(Ok(BlockUnit {
            index,
            plain_len: Some(filled),
            payload: buf,
            is_compressed: false,
            block_checksum: None,
        }))
    }
}

/// Keeps the first error raised by any stage and broadcasts cancellation.
struct ErrorLatch {
    tripped: AtomicBool,
    first: Mutex<Option<Error>>,
    cancel_tx: Mutex<Option<Sender<()>>>,
    cancel_rx: Receiver<()>,
}

impl ErrorLatch {
    fn new() -> Self {
        let (tx, rx) = crossbeam_channel::bounded(0);
        Self {
            tripped: AtomicBool::new(false),
            first: Mutex::new(None),
            cancel_tx: Mutex::new(Some(tx)),
            cancel_rx: rx,
        }
    }

    fn set(&self, err: Error) {
        let mut slot = self.first.lock().unwrap_or_else(|p| p.into_inner());
        if slot.is_none() {
            *slot = Some(err);
        }
        self.tripped.store(true, Ordering::Release);
        // Disconnecting wakes every stage blocked in `recv`/`send`.
        self.cancel_tx.lock().unwrap_or_else(|p| p.into_inner()).take();
    }

    fn is_set(&self) -> bool {
        self.tripped.load(Ordering::Acquire)
    }

    fn take(&self) -> Option<Error> {
        self.first.lock().unwrap_or_else(|p| p.into_inner()).take()
    }

    /// Blocking receive that gives up once the pipeline is cancelled.
    fn recv<T>(&self, rx: &Receiver<T>) -> Option<T> {
        crossbeam_channel::select! {
            recv(rx) -> msg => msg.ok(),
            recv(self.cancel_rx) -> _ => None,
        }
    }

    /// Blocking send; false if the receiver is gone or the pipeline is cancelled.
    fn send<T>(&self, tx: &Sender<T>, msg: T) -> bool {
        crossbeam_channel::select! {
            send(tx, msg) -> res => res.is_ok(),
            recv(self.cancel_rx) -> _ => false,
        }
    }
}

/// Records a panic of the owning stage thread in the latch.
struct PanicGuard<'a> {
    latch: &'a ErrorLatch,
    stage: Stage,
}

impl Drop for PanicGuard<'_> {
    fn drop(&mut self) {
        if std::thread::panicking() {
            self.latch.set(Error::WorkerPanic(self.stage));
        }
    }
}

/// Current and peak count of something.
#[derive(Default)]
struct Gauge {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl Gauge {
    fn inc(&self) {
        let now = self.current.fetch_add(1, Ordering::AcqRel) + 1;
        self.peak.fetch_max(now, Ordering::AcqRel);
    }

    fn dec(&self) {
        self.current.fetch_sub(1, Ordering::AcqRel);
    }

    fn peak(&self) -> usize {
        self.peak.load(Ordering::Acquire)
    }
}

pub(crate) fn random_nonce() -> Result<[u8; 8], Error> {
    let mut nonce = [0u8; 8];
    getrandom::fill(&mut nonce).map_err(|e| {
        Error::io(
            Stage::Encrypt,
            io::Error::other(format!("no OS randomness for the nonce: {e}")),
        )
    })?;
    Ok(nonce)
}
