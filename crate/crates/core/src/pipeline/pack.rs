use std::io::{Read, Write};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender};

use super::{
    apply_delay, chunk_source, random_nonce, BlockEvent, Direction, ErrorLatch, Gauge, PanicGuard,
    PipelineConfig, ReorderBuffer, StageCounters, StageStats,
};
use crate::aes::{expand_key, KeySchedule};
use crate::checksum::{xxh32, ContentHasher};
use crate::ctr::{counter_base, xcrypt_in_place};
use crate::error::{Error, Result, Stage};
use crate::frame::{BlockUnit, FrameDescriptor, FrameWriter};
use crate::lz_block::compress_block;

/// A block in flight, compressed-or-raw before the cipher, ciphertext after.
struct Work {
    block: BlockUnit,
    compressed_at: Duration,
    encrypted_at: Duration,
}

struct Produced {
    counters: StageCounters,
    blocks: u64,
    content_checksum: u32,
}

/// State shared by all stage threads of one run.
struct Shared<'a> {
    cfg: &'a PipelineConfig,
    desc: FrameDescriptor,
    ks: KeySchedule,
    latch: ErrorLatch,
    backlog: Gauge,
    in_flight: Gauge,
    start: Instant,
}

/// Compresses and encrypts `input` into a complete frame on `sink`.
///
/// The frame bytes depend only on the input, key, nonce, chunk size, block
/// size and checksum flags; worker count and queue capacity only change
/// timing. On error `sink` may hold a partial frame.
pub fn run_pack<R, W>(input: R, key: &[u8], cfg: &PipelineConfig, sink: W) -> Result<StageStats>
where
    R: Read + Send,
    W: Write,
{
    cfg.validate()?;
    let ks = expand_key(key)?;
    let nonce = match cfg.nonce {
        Some(n) => n,
        None => random_nonce()?,
    };
    let shared = Shared {
        cfg,
        desc: FrameDescriptor::new(cfg.flags, cfg.block_size, nonce),
        ks,
        latch: ErrorLatch::new(),
        backlog: Gauge::default(),
        in_flight: Gauge::default(),
        start: Instant::now(),
    };
    let sh = &shared;

    let (work_tx, work_rx) = bounded::<Work>(cfg.queue_capacity);
    let (done_tx, done_rx) = bounded::<Work>(cfg.max_in_flight());
    let (credit_tx, credit_rx) = bounded::<()>(cfg.max_in_flight());
    for _ in 0..cfg.max_in_flight() {
        credit_tx.send(()).expect("credit channel holds every credit");
    }

    let mut stats = StageStats::new(Direction::Pack);
    let (writer, produced, cipher) = thread::scope(|s| {
        let producer = s.spawn(move || compress_stage(sh, input, work_tx, credit_rx));
        let workers: Vec<_> = (0..cfg.workers)
            .map(|_| {
                let (rx, tx) = (work_rx.clone(), done_tx.clone());
                s.spawn(move || encrypt_stage(sh, rx, tx))
            })
            .collect();
        drop(work_rx);
        drop(done_tx);

        let writer = write_stage(sh, sink, done_rx, credit_tx, &mut stats);

        let mut cipher = StageCounters::default();
        for w in workers {
            if let Ok(c) = w.join() {
                cipher.merge(&c);
            }
        }
        let produced = producer.join().ok();
        (writer, produced, cipher)
    });

    if let Some(e) = shared.latch.take() {
        return Err(e);
    }
    let (Some(writer), Some(produced)) = (writer, produced) else {
        return Err(Error::WorkerPanic(Stage::Compress));
    };
    assert_eq!(produced.blocks, stats.blocks);

    let content = cfg.flags.content_checksum.then_some(produced.content_checksum);
    let trailer = 4 + if content.is_some() { 4 } else { 0 };
    let frame_bytes = writer.bytes_written() + trailer;
    writer.finish(content)?;

    stats.codec = produced.counters;
    stats.cipher = cipher;
    stats.plain_bytes = produced.counters.bytes_in;
    stats.frame_bytes = frame_bytes;
    stats.wall_time = shared.start.elapsed();
    stats.peak_in_flight = shared.in_flight.peak();
    stats.peak_cipher_backlog = shared.backlog.peak();
    Ok(stats)
}

fn compress_stage<R: Read>(
    sh: &Shared<'_>,
    input: R,
    work_tx: Sender<Work>,
    credits: Receiver<()>,
) -> Produced {
    let _guard = PanicGuard {
        latch: &sh.latch,
        stage: Stage::Compress,
    };
    let mut counters = StageCounters::default();
    let mut hasher = ContentHasher::new();
    let mut blocks = 0;
    let mut chunks = chunk_source(input, sh.cfg.chunk_size);
    let began = sh.start.elapsed();

    while sh.latch.recv(&credits).is_some() {
        let chunk = match chunks.next() {
            None => break,
            Some(Ok(c)) => c,
            Some(Err(e)) => {
                sh.latch.set(Error::io(Stage::Read, e));
                break;
            }
        };
        sh.in_flight.inc();
        let t0 = Instant::now();
        let index = chunk.index;
        apply_delay(&sh.cfg.codec_delay, index);
        let plain = chunk.payload;
        hasher.update(&plain);
        let packed = match compress_block(&plain, sh.cfg.table_size) {
            Ok(p) => p,
            Err(e) => {
                sh.latch.set(Error::in_block(Stage::Compress, index, e));
                break;
            }
        };
        let plain_len = plain.len();
        // Stored raw unless compression actually saves space.
        let (payload, is_compressed) = if packed.len() >= plain_len {
            (plain, false)
        } else {
            (packed, true)
        };
        counters.busy_time += t0.elapsed();
        counters.bytes_in += plain_len as u64;
        counters.bytes_out += payload.len() as u64;

        sh.backlog.inc();
        let work = Work {
            block: BlockUnit {
                index,
                payload,
                is_compressed,
                plain_len: Some(plain_len),
                block_checksum: None,
            },
            compressed_at: sh.start.elapsed(),
            encrypted_at: Duration::ZERO,
        };
        if !sh.latch.send(&work_tx, work) {
            break;
        }
        blocks += 1;
    }
    counters.wall_time = sh.start.elapsed() - began;
    Produced {
        counters,
        blocks,
        content_checksum: hasher.digest(),
    }
}

fn encrypt_stage(sh: &Shared<'_>, rx: Receiver<Work>, tx: Sender<Work>) -> StageCounters {
    let _guard = PanicGuard {
        latch: &sh.latch,
        stage: Stage::Encrypt,
    };
    let mut counters = StageCounters::default();
    let began = sh.start.elapsed();
    let max_block = sh.desc.max_block_size() as u64;
    while let Some(mut work) = sh.latch.recv(&rx) {
        let t0 = Instant::now();
        let index = work.block.index;
        apply_delay(&sh.cfg.cipher_delay, index);
        let sealed = counter_base(index, max_block).and_then(|base| {
            xcrypt_in_place(&mut work.block.payload, &sh.ks, &sh.desc.nonce, base)
        });
        if let Err(e) = sealed {
            sh.latch.set(Error::in_block(Stage::Encrypt, index, e));
            break;
        }
        if sh.desc.flags.block_checksums {
            work.block.block_checksum = Some(xxh32(&work.block.payload));
        }
        let n = work.block.payload.len() as u64;
        counters.bytes_in += n;
        counters.bytes_out += n;
        counters.busy_time += t0.elapsed();
        sh.backlog.dec();
        work.encrypted_at = sh.start.elapsed();
        if !sh.latch.send(&tx, work) {
            break;
        }
    }
    counters.wall_time = sh.start.elapsed() - began;
    counters
}

/// Restores index order and writes blocks. Returns `None` once the pipeline
/// has failed; the error is in the latch.
fn write_stage<W: Write>(
    sh: &Shared<'_>,
    sink: W,
    done_rx: Receiver<Work>,
    credits: Sender<()>,
    stats: &mut StageStats,
) -> Option<FrameWriter<W>> {
    let fail = |e: Error| {
        sh.latch.set(e);
        None
    };
    let mut writer = match FrameWriter::new(sink, sh.desc) {
        Ok(w) => w,
        Err(e) => return fail(e),
    };
    let mut reorder = ReorderBuffer::new();
    while let Some(work) = sh.latch.recv(&done_rx) {
        reorder.insert(work.block.index, work);
        while let Some(ready) = reorder.pop_ready() {
            if let Err(e) = writer.write_block(&ready.block) {
                return fail(e);
            }
            sh.in_flight.dec();
            let _ = credits.send(());
            stats.blocks += 1;
            if sh.cfg.record_events {
                stats.events.push(BlockEvent {
                    index: ready.block.index,
                    codec_at: ready.compressed_at,
                    cipher_at: ready.encrypted_at,
                    written_at: sh.start.elapsed(),
                });
            }
        }
    }
    (!sh.latch.is_set()).then_some(writer)
}
