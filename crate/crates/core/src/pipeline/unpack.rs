use std::io::{Read, Write};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender};

use super::{
    apply_delay, BlockEvent, Direction, ErrorLatch, Gauge, PanicGuard, PipelineConfig,
    ReorderBuffer, StageCounters, StageStats,
};
use crate::aes::{expand_key, KeySchedule};
use crate::checksum::{xxh32, ContentHasher};
use crate::ctr::{counter_base, xcrypt_in_place};
use crate::error::{Error, Result, Stage};
use crate::frame::{BlockUnit, FrameDescriptor, FrameReader};
use crate::lz_block::decompress_into;

struct Work {
    block: BlockUnit,
    decrypted_at: Duration,
}

struct Scanned {
    blocks: u64,
    frame_bytes: u64,
    stored_content_checksum: Option<u32>,
}

struct Shared<'a> {
    cfg: &'a PipelineConfig,
    desc: FrameDescriptor,
    ks: KeySchedule,
    latch: ErrorLatch,
    backlog: Gauge,
    in_flight: Gauge,
    start: Instant,
}

/// Decrypts and decompresses a frame from `source`, writing the plaintext to
/// `sink`.
///
/// Nothing past the 16-byte header is read until that header has been
/// verified. A wrong key is reported as [`Error::ProbableKeyMismatch`]; with
/// content checksums on, wrong plaintext is never reported as success. On
/// error `sink` may already hold a prefix of the output.
pub fn run_unpack<R, W>(source: R, key: &[u8], cfg: &PipelineConfig, mut sink: W) -> Result<StageStats>
where
    R: Read + Send,
    W: Write,
{
    if cfg.workers == 0 || cfg.queue_capacity == 0 {
        return Err(Error::Config("workers and queue capacity must be at least 1".into()));
    }
    let ks = expand_key(key)?;
    let reader = FrameReader::new(source)?.verify_block_checksums(false);
    let shared = Shared {
        cfg,
        desc: *reader.descriptor(),
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

    let mut stats = StageStats::new(Direction::Unpack);
    let (hasher, scanned, cipher) = thread::scope(|s| {
        let scanner = s.spawn(move || read_stage(sh, reader, work_tx, credit_rx));
        let workers: Vec<_> = (0..cfg.workers)
            .map(|_| {
                let (rx, tx) = (work_rx.clone(), done_tx.clone());
                s.spawn(move || decrypt_stage(sh, rx, tx))
            })
            .collect();
        drop(work_rx);
        drop(done_tx);

        let hasher = decompress_stage(sh, &mut sink, done_rx, credit_tx, &mut stats);

        let mut cipher = StageCounters::default();
        for w in workers {
            if let Ok(c) = w.join() {
                cipher.merge(&c);
            }
        }
        (hasher, scanner.join().ok(), cipher)
    });

    if let Some(e) = shared.latch.take() {
        return Err(e);
    }
    let (Some(hasher), Some(scanned)) = (hasher, scanned) else {
        return Err(Error::WorkerPanic(Stage::Read));
    };
    assert_eq!(scanned.blocks, stats.blocks);

    if let Some(stored) = scanned.stored_content_checksum {
        let computed = hasher.digest();
        if stored != computed {
            return Err(key_mismatch(
                sh,
                Stage::Decompress,
                None,
                format!("content checksum mismatch: stored {stored:#010x}, computed {computed:#010x}"),
            ));
        }
    }
    sink.flush().map_err(|e| Error::io(Stage::Write, e))?;

    stats.cipher = cipher;
    stats.plain_bytes = stats.codec.bytes_out;
    stats.frame_bytes = scanned.frame_bytes;
    stats.wall_time = shared.start.elapsed();
    stats.peak_in_flight = shared.in_flight.peak();
    stats.peak_cipher_backlog = shared.backlog.peak();
    Ok(stats)
}

fn key_mismatch(sh: &Shared<'_>, stage: Stage, index: Option<u64>, detail: String) -> Error {
    let detail = if sh.desc.flags.block_checksums {
        detail
    } else {
        format!("{detail}; frame has no block checksums, so the payload may also be corrupt")
    };
    Error::ProbableKeyMismatch {
        stage,
        index,
        detail,
    }
}

fn read_stage<R: Read>(
    sh: &Shared<'_>,
    mut reader: FrameReader<R>,
    work_tx: Sender<Work>,
    credits: Receiver<()>,
) -> Scanned {
    let _guard = PanicGuard {
        latch: &sh.latch,
        stage: Stage::Read,
    };
    let mut blocks = 0;
    while sh.latch.recv(&credits).is_some() {
        let block = match reader.next_block() {
            Ok(Some(b)) => b,
            Ok(None) => break,
            Err(e) => {
                sh.latch.set(e);
                break;
            }
        };
        sh.in_flight.inc();
        sh.backlog.inc();
        let work = Work {
            block,
            decrypted_at: Duration::ZERO,
        };
        if !sh.latch.send(&work_tx, work) {
            break;
        }
        blocks += 1;
    }
    Scanned {
        blocks,
        frame_bytes: reader.offset(),
        stored_content_checksum: reader.stored_content_checksum(),
    }
}

fn decrypt_stage(sh: &Shared<'_>, rx: Receiver<Work>, tx: Sender<Work>) -> StageCounters {
    let _guard = PanicGuard {
        latch: &sh.latch,
        stage: Stage::Decrypt,
    };
    let mut counters = StageCounters::default();
    let began = sh.start.elapsed();
    let max_block = sh.desc.max_block_size() as u64;
    while let Some(mut work) = sh.latch.recv(&rx) {
        let t0 = Instant::now();
        let index = work.block.index;
        if let Some(stored) = work.block.block_checksum {
            let computed = xxh32(&work.block.payload);
            if stored != computed {
                sh.latch.set(Error::BlockChecksum {
                    index,
                    stored,
                    computed,
                });
                break;
            }
        }
        apply_delay(&sh.cfg.cipher_delay, index);
        let opened = counter_base(index, max_block).and_then(|base| {
            xcrypt_in_place(&mut work.block.payload, &sh.ks, &sh.desc.nonce, base)
        });
        if let Err(e) = opened {
            sh.latch.set(Error::in_block(Stage::Decrypt, index, e));
            break;
        }
        let n = work.block.payload.len() as u64;
        counters.bytes_in += n;
        counters.bytes_out += n;
        counters.busy_time += t0.elapsed();
        sh.backlog.dec();
        work.decrypted_at = sh.start.elapsed();
        if !sh.latch.send(&tx, work) {
            break;
        }
    }
    counters.wall_time = sh.start.elapsed() - began;
    counters
}

/// Decompresses decrypted blocks in index order and writes the plaintext.
fn decompress_stage<W: Write>(
    sh: &Shared<'_>,
    sink: &mut W,
    done_rx: Receiver<Work>,
    credits: Sender<()>,
    stats: &mut StageStats,
) -> Option<ContentHasher> {
    let fail = |e: Error| {
        sh.latch.set(e);
        None
    };
    let max_block = sh.desc.max_block_size();
    let mut hasher = ContentHasher::new();
    let mut reorder = ReorderBuffer::new();
    let mut plain = Vec::new();
    let began = sh.start.elapsed();

    while let Some(work) = sh.latch.recv(&done_rx) {
        reorder.insert(work.block.index, work);
        while let Some(ready) = reorder.pop_ready() {
            let index = ready.block.index;
            let t0 = Instant::now();
            apply_delay(&sh.cfg.codec_delay, index);
            let payload = &ready.block.payload;
            let data: &[u8] = if ready.block.is_compressed {
                plain.clear();
                if let Err(e) = decompress_into(payload, max_block, &mut plain) {
                    return fail(key_mismatch(
                        sh,
                        Stage::Decompress,
                        Some(index),
                        format!("decrypted block does not decompress: {e}"),
                    ));
                }
                &plain
            } else {
                payload
            };
            hasher.update(data);
            stats.codec.busy_time += t0.elapsed();
            stats.codec.bytes_in += payload.len() as u64;
            stats.codec.bytes_out += data.len() as u64;
            if let Err(e) = sink.write_all(data) {
                return fail(Error::io(Stage::Write, e));
            }
            sh.in_flight.dec();
            let _ = credits.send(());
            stats.blocks += 1;
            if sh.cfg.record_events {
                let now = sh.start.elapsed();
                stats.events.push(BlockEvent {
                    index,
                    codec_at: now,
                    cipher_at: ready.decrypted_at,
                    written_at: now,
                });
            }
        }
    }
    stats.codec.wall_time = sh.start.elapsed() - began;
    (!sh.latch.is_set()).then_some(hasher)
}
