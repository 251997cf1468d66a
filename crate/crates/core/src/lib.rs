//! Compress-then-encrypt streaming codec.
//!
//! Plaintext is cut into blocks, each compressed in the LZ4 block format and
//! encrypted with AES-128 in counter mode at a counter base derived from the
//! block index. Compression and encryption run overlapped: while the
//! compressor works on block `n + 1`, cipher workers are already encrypting
//! block `n`. Unpacking mirrors this with decryption ahead of decompression.
//!
//! ```
//! use lzae::pipeline::{run_pack, run_unpack, PipelineConfig};
//!
//! let key = [7u8; 16];
//! let cfg = PipelineConfig::default().with_chunk_size(1 << 16);
//! let input = b"hello hello hello hello hello hello".repeat(100);
//!
//! let mut frame = Vec::new();
//! run_pack(&input[..], &key, &cfg, &mut frame).unwrap();
//! let mut plain = Vec::new();
//! run_unpack(&frame[..], &key, &cfg, &mut plain).unwrap();
//! assert_eq!(plain, input);
//! ```

pub mod aes;
pub mod bench;
pub mod checksum;
pub mod corpus;
pub mod ctr;
mod error;
pub mod frame;
pub mod lz_block;
pub mod pipeline;
pub mod selftest;

pub use error::{Error, Malformed, Result, Stage};
