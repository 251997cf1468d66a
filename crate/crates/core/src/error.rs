use std::fmt;
use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Read,
    Compress,
    Encrypt,
    Write,
    Decrypt,
    Decompress,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Read => "read",
            Stage::Compress => "compress",
            Stage::Encrypt => "encrypt",
            Stage::Write => "write",
            Stage::Decrypt => "decrypt",
            Stage::Decompress => "decompress",
        })
    }
}

/// What exactly is wrong with a malformed LZ4 block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Malformed {
    /// Input ended in the middle of a sequence.
    Truncated,
    /// A match with offset 0.
    ZeroOffset,
    /// A match reaching back before the start of the output.
    OffsetBeyondOutput { offset: usize, produced: usize },
    /// Decoding would produce more than the caller allowed.
    OutputOverflow { limit: usize },
    /// The block ended right after a match instead of a literals-only sequence.
    MissingTerminalLiterals,
}

impl fmt::Display for Malformed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Malformed::Truncated => f.write_str("truncated sequence"),
            Malformed::ZeroOffset => f.write_str("match offset 0"),
            Malformed::OffsetBeyondOutput { offset, produced } => {
                write!(f, "match offset {offset} exceeds {produced} produced bytes")
            }
            Malformed::OutputOverflow { limit } => {
                write!(f, "output exceeds limit of {limit} bytes")
            }
            Malformed::MissingTerminalLiterals => {
                f.write_str("block ends with a match instead of literals")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input of {len} bytes exceeds the maximum of {max}")]
    InputTooLarge { len: u64, max: u64 },

    #[error("invalid key length: expected 16 bytes, got {0}")]
    KeyLength(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed block at byte {pos}: {kind}")]
    MalformedBlock { pos: usize, kind: Malformed },

    #[error("not an LZAE frame (magic {found:02x?})")]
    NotOurFormat { found: [u8; 4] },

    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u8),

    #[error("corrupt frame header: check byte {found:#04x}, expected {expected:#04x}")]
    CorruptHeader { expected: u8, found: u8 },

    #[error("reserved descriptor flag bits set: {0:#04x}")]
    ReservedFlags(u8),

    #[error("unknown block size code {0}")]
    UnknownBlockSize(u8),

    #[error("invalid block length {len} (limit {max})")]
    BlockLength { len: u64, max: u64 },

    #[error("frame truncated at byte offset {offset} while reading {what}")]
    Truncated { offset: u64, what: &'static str },

    #[error("frame ends at byte offset {offset} without an end-of-stream marker")]
    MissingEndOfStream { offset: u64 },

    #[error("checksum mismatch in block {index}: stored {stored:#010x}, computed {computed:#010x}")]
    BlockChecksum {
        index: u64,
        stored: u32,
        computed: u32,
    },

    #[error("block {index} out of order (expected {expected})")]
    OutOfOrder { index: u64, expected: u64 },

    #[error("frame too large for the 64-bit counter space")]
    FrameTooLarge,

    #[error("probable key mismatch ({stage} stage{}): {detail}", block_suffix(*.index))]
    ProbableKeyMismatch {
        stage: Stage,
        index: Option<u64>,
        detail: String,
    },

    #[error("{stage} stage, block {index}: {source}")]
    InBlock {
        stage: Stage,
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error in {stage} stage: {source}")]
    Io {
        stage: Stage,
        #[source]
        source: io::Error,
    },

    #[error("benchmark integrity failure: {0}")]
    BenchIntegrity(String),

    #[error("worker thread panicked in {0} stage")]
    WorkerPanic(Stage),
}

fn block_suffix(index: Option<u64>) -> String {
    index.map(|i| format!(", block {i}")).unwrap_or_default()
}

impl Error {
    pub(crate) fn io(stage: Stage, source: io::Error) -> Self {
        Error::Io { stage, source }
    }

    pub(crate) fn in_block(stage: Stage, index: u64, source: Error) -> Self {
        Error::InBlock {
            stage,
            index,
            source: Box::new(source),
        }
    }

    /// Block index the error concerns, if any.
    pub fn block_index(&self) -> Option<u64> {
        match self {
            Error::BlockChecksum { index, .. }
            | Error::OutOfOrder { index, .. }
            | Error::InBlock { index, .. } => Some(*index),
            Error::ProbableKeyMismatch { index, .. } => *index,
            _ => None,
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 1 usage, 2 format or corruption, 3 probable key mismatch, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::KeyLength(_) | Error::Config(_) | Error::InputTooLarge { .. } => 1,
            Error::ProbableKeyMismatch { .. } => 3,
            Error::Io { .. } => 4,
            Error::InBlock { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
