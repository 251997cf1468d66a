//! The LZAE container.
//!
//! ```text
//! magic "LZAE" (4) | descriptor (12) | block* | 00 00 00 00 | content checksum (0 or 4)
//! descriptor = version (1) | flags (1) | block size code (1) | nonce (8) | header check (1)
//! block      = header u32 LE (length, top bit = stored raw) | payload | block checksum (0 or 4)
//! ```
//!
//! Headers travel in the clear; payloads are ciphertext. Block checksums
//! cover the ciphertext, the content checksum covers the original plaintext.
//! All checksums are xxHash32 with seed 0. The header check is the low byte
//! of the checksum of the 11 descriptor bytes before it.

use std::io::{self, Read, Write};

use crate::checksum::xxh32;
use crate::ctr::NONCE_LEN;
use crate::error::{Error, Result, Stage};

pub const MAGIC: [u8; 4] = *b"LZAE";
pub const VERSION: u8 = 1;
pub const DESCRIPTOR_LEN: usize = 12;
pub const HEADER_LEN: usize = MAGIC.len() + DESCRIPTOR_LEN;
pub const END_OF_STREAM: [u8; 4] = [0; 4];

const RAW_FLAG: u32 = 1 << 31;
const FLAG_BLOCK_CHECKSUMS: u8 = 0x01;
const FLAG_CONTENT_CHECKSUM: u8 = 0x02;

/// Maximum frame block size, stored as a one-byte code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum BlockSize {
    Kib64,
    Kib256,
    Mib1,
    #[default]
    Mib4,
    Mib8,
}

impl BlockSize {
    pub const ALL: [BlockSize; 5] = [
        BlockSize::Kib64,
        BlockSize::Kib256,
        BlockSize::Mib1,
        BlockSize::Mib4,
        BlockSize::Mib8,
    ];

    pub fn bytes(self) -> usize {
        match self {
            BlockSize::Kib64 => 64 << 10,
            BlockSize::Kib256 => 256 << 10,
            BlockSize::Mib1 => 1 << 20,
            BlockSize::Mib4 => 4 << 20,
            BlockSize::Mib8 => 8 << 20,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or(Error::UnknownBlockSize(code))
    }

    /// Smallest size that holds `chunk_size` bytes.
    pub fn fitting(chunk_size: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.bytes() >= chunk_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameFlags {
    pub block_checksums: bool,
    pub content_checksum: bool,
}

impl Default for FrameFlags {
    fn default() -> Self {
        Self {
            block_checksums: true,
            content_checksum: true,
        }
    }
}

impl FrameFlags {
    pub const NONE: FrameFlags = FrameFlags {
        block_checksums: false,
        content_checksum: false,
    };

    fn to_byte(self) -> u8 {
        let mut b = 0;
        if self.block_checksums {
            b |= FLAG_BLOCK_CHECKSUMS;
        }
        if self.content_checksum {
            b |= FLAG_CONTENT_CHECKSUM;
        }
        b
    }

    fn from_byte(b: u8) -> Result<Self> {
        if b & !(FLAG_BLOCK_CHECKSUMS | FLAG_CONTENT_CHECKSUM) != 0 {
            return Err(Error::ReservedFlags(b));
        }
        Ok(Self {
            block_checksums: b & FLAG_BLOCK_CHECKSUMS != 0,
            content_checksum: b & FLAG_CONTENT_CHECKSUM != 0,
        })
    }
}

/// Parsed stream descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameDescriptor {
    pub version: u8,
    pub flags: FrameFlags,
    pub block_size: BlockSize,
    pub nonce: [u8; NONCE_LEN],
}

impl FrameDescriptor {
    pub fn new(flags: FrameFlags, block_size: BlockSize, nonce: [u8; NONCE_LEN]) -> Self {
        Self {
            version: VERSION,
            flags,
            block_size,
            nonce,
        }
    }

    fn body(&self) -> [u8; DESCRIPTOR_LEN - 1] {
        let mut b = [0u8; DESCRIPTOR_LEN - 1];
        b[0] = self.version;
        b[1] = self.flags.to_byte();
        b[2] = self.block_size.code();
        b[3..].copy_from_slice(&self.nonce);
        b
    }

    pub fn header_check(&self) -> u8 {
        xxh32(&self.body()) as u8
    }

    pub fn max_block_size(&self) -> usize {
        self.block_size.bytes()
    }
}

pub fn encode_descriptor(d: &FrameDescriptor) -> [u8; HEADER_LEN] {
    let mut out = [0u8; HEADER_LEN];
    out[..4].copy_from_slice(&MAGIC);
    out[4..HEADER_LEN - 1].copy_from_slice(&d.body());
    out[HEADER_LEN - 1] = d.header_check();
    out
}

pub fn decode_descriptor(bytes: &[u8]) -> Result<FrameDescriptor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            offset: bytes.len() as u64,
            what: "frame header",
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::NotOurFormat { found: magic });
    }
    let body = &bytes[4..HEADER_LEN - 1];
    let found = bytes[HEADER_LEN - 1];
    let expected = xxh32(body) as u8;
    if found != expected {
        return Err(Error::CorruptHeader { expected, found });
    }
    if body[0] != VERSION {
        return Err(Error::UnsupportedVersion(body[0]));
    }
    Ok(FrameDescriptor {
        version: body[0],
        flags: FrameFlags::from_byte(body[1])?,
        block_size: BlockSize::from_code(body[2])?,
        nonce: body[3..].try_into().unwrap(),
    })
}

pub fn encode_block_header(wire_len: usize, is_compressed: bool, max_block_size: usize) -> Result<[u8; 4]> {
    if wire_len == 0 || wire_len > max_block_size || wire_len >= RAW_FLAG as usize {
        return Err(Error::BlockLength {
            len: wire_len as u64,
            max: max_block_size as u64,
        });
    }
    let mut v = wire_len as u32;
    if !is_compressed {
        v |= RAW_FLAG;
    }
    Ok(v.to_le_bytes())
}

/// `None` for the end-of-stream marker, else `(wire_len, is_compressed)`.
pub fn decode_block_header(bytes: [u8; 4]) -> Option<(usize, bool)> {
    let v = u32::from_le_bytes(bytes);
    if v == 0 {
        return None;
    }
    Some(((v & !RAW_FLAG) as usize, v & RAW_FLAG == 0))
}

/// One frame block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockUnit {
    pub index: u64,
    /// Ciphertext on the wire; compressed-or-raw plaintext inside the pipeline.
    pub payload: Vec<u8>,
    pub is_compressed: bool,
    /// Plaintext length. Not transmitted, so `None` for blocks read off the wire.
    pub plain_len: Option<usize>,
    /// Checksum of the wire payload, when the frame carries block checksums.
    pub block_checksum: Option<u32>,
}

/// Writes a frame incrementally. Blocks must arrive in index order.
pub struct FrameWriter<W: Write> {
    sink: W,
    desc: FrameDescriptor,
    next_index: u64,
    written: u64,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(mut sink: W, desc: FrameDescriptor) -> Result<Self> {
        sink.write_all(&encode_descriptor(&desc))
            .map_err(|e| Error::io(Stage::Write, e))?;
        Ok(Self {
            sink,
            desc,
            next_index: 0,
            written: HEADER_LEN as u64,
        })
    }

    pub fn descriptor(&self) -> &FrameDescriptor {
        &self.desc
    }

    pub fn bytes_written(&self) -> u64 {
        self.written
    }

    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.sink
            .write_all(bytes)
            .map_err(|e| Error::io(Stage::Write, e))?;
        self.written += bytes.len() as u64;
        Ok(())
    }

    /// Appends a block; computes the block checksum if the frame wants one
    /// and the block does not carry it already.
    pub fn write_block(&mut self, block: &BlockUnit) -> Result<()> {
        if block.index != self.next_index {
            return Err(Error::OutOfOrder {
                index: block.index,
                expected: self.next_index,
            });
        }
        let header = encode_block_header(
            block.payload.len(),
            block.is_compressed,
            self.desc.max_block_size(),
        )
        .map_err(|e| Error::in_block(Stage::Write, block.index, e))?;
        self.put(&header)?;
        self.put(&block.payload)?;
        if self.desc.flags.block_checksums {
            let sum = block.block_checksum.unwrap_or_else(|| xxh32(&block.payload));
            self.put(&sum.to_le_bytes())?;
        }
        self.next_index += 1;
        Ok(())
    }

    /// Writes the end-of-stream marker and the content checksum, returning
    /// the sink.
    pub fn finish(mut self, content_checksum: Option<u32>) -> Result<W> {
        self.put(&END_OF_STREAM)?;
        match (self.desc.flags.content_checksum, content_checksum) {
            (true, Some(sum)) => self.put(&sum.to_le_bytes())?,
            (true, None) => {
                return Err(Error::Config("frame requires a content checksum".into()));
            }
            (false, _) => {}
        }
        self.sink.flush().map_err(|e| Error::io(Stage::Write, e))?;
        Ok(self.sink)
    }
}

/// Writes a complete frame from in-order blocks.
pub fn write_frame<W: Write>(
    sink: W,
    desc: FrameDescriptor,
    blocks: impl IntoIterator<Item = BlockUnit>,
    content_checksum: Option<u32>,
) -> Result<W> {
    let mut w = FrameWriter::new(sink, desc)?;
    for b in blocks {
        w.write_block(&b)?;
    }
    w.finish(content_checksum)
}

/// Fills `buf` as far as possible; returns bytes read (short only at EOF).
fn read_full(source: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Pull-based frame parser.
///
/// Construction consumes and verifies the whole 16-byte header; no block is
/// produced before that succeeds.
pub struct FrameReader<R: Read> {
    source: R,
    desc: FrameDescriptor,
    offset: u64,
    next_index: u64,
    verify: bool,
    finished: bool,
    content_checksum: Option<u32>,
}

impl<R: Read> FrameReader<R> {
    pub fn new(mut source: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        let n = read_full(&mut source, &mut header).map_err(|e| Error::io(Stage::Read, e))?;
        if n >= 4 && header[..4] != MAGIC {
            return Err(Error::NotOurFormat {
                found: header[..4].try_into().unwrap(),
            });
        }
        if n < HEADER_LEN {
            return Err(Error::Truncated {
                offset: n as u64,
                what: "frame header",
            });
        }
        let desc = decode_descriptor(&header)?;
        Ok(Self {
            source,
            desc,
            offset: HEADER_LEN as u64,
            next_index: 0,
            verify: true,
            finished: false,
            content_checksum: None,
        })
    }

    /// Whether `next_block` verifies block checksums itself (default true).
    /// Turned off when checksums are verified elsewhere, e.g. in parallel.
    pub fn verify_block_checksums(mut self, verify: bool) -> Self {
        self.verify = verify;
        self
    }

    pub fn descriptor(&self) -> &FrameDescriptor {
        &self.desc
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Content checksum stored after the end-of-stream marker, once reached.
    pub fn stored_content_checksum(&self) -> Option<u32> {
        self.content_checksum
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn take(&mut self, buf: &mut [u8]) -> Result<usize> {
        let n = read_full(&mut self.source, buf).map_err(|e| Error::io(Stage::Read, e))?;
        self.offset += n as u64;
        Ok(n)
    }

    fn take_exact(&mut self, buf: &mut [u8], what: &'static str) -> Result<()> {
        if self.take(buf)? < buf.len() {
            return Err(Error::Truncated {
                offset: self.offset,
                what,
            });
        }
        Ok(())
    }

    /// Next block, or `None` after the end-of-stream marker.
    pub fn next_block(&mut self) -> Result<Option<BlockUnit>> {
        if self.finished {
            return Ok(None);
        }
        let mut header = [0u8; 4];
        match self.take(&mut header)? {
            0 => return Err(Error::MissingEndOfStream { offset: self.offset }),
            4 => {}
            _ => {
                return Err(Error::Truncated {
                    offset: self.offset,
                    what: "block header",
                })
            }
        }
        let Some((len, is_compressed)) = decode_block_header(header) else {
            if self.desc.flags.content_checksum {
                let mut sum = [0u8; 4];
                self.take_exact(&mut sum, "content checksum")?;
                self.content_checksum = Some(u32::from_le_bytes(sum));
            }
            self.finished = true;
            return Ok(None);
        };
        let index = self.next_index;
        let max = self.desc.max_block_size();
        if len > max {
            return Err(Error::in_block(
                Stage::Read,
                index,
                Error::BlockLength {
                    len: len as u64,
                    max: max as u64,
                },
            ));
        }
        let mut payload = vec![0u8; len];
        self.take_exact(&mut payload, "block payload")?;
        let block_checksum = if self.desc.flags.block_checksums {
            let mut sum = [0u8; 4];
            self.take_exact(&mut sum, "block checksum")?;
            let stored = u32::from_le_bytes(sum);
            if self.verify {
                let computed = xxh32(&payload);
                if computed != stored {
                    return Err(Error::BlockChecksum {
                        index,
                        stored,
                        computed,
                    });
                }
            }
            Some(stored)
        } else {
            None
        };
        self.next_index += 1;
        Ok(Some(BlockUnit {
            index,
            payload,
            is_compressed,
            plain_len: (!is_compressed).then_some(len),
            block_checksum,
        }))
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<BlockUnit>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_block() {
            Ok(Some(b)) => Some(Ok(b)),
            Ok(None) => None,
            Err(e) => {
                self.finished = true;
                Some(Err(e))
            }
        }
    }
}

/// A fully parsed frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFrame {
    pub descriptor: FrameDescriptor,
    pub blocks: Vec<BlockUnit>,
    pub content_checksum: Option<u32>,
}

/// Reads and verifies a whole frame.
pub fn read_frame<R: Read>(source: R) -> Result<ParsedFrame> {
    let mut reader = FrameReader::new(source)?;
    let mut blocks = Vec::new();
    while let Some(b) = reader.next_block()? {
        blocks.push(b);
    }
    Ok(ParsedFrame {
        descriptor: reader.desc,
        blocks,
        content_checksum: reader.content_checksum,
    })
}
