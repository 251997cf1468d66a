//! LZ4 block format codec.
//!
//! A block is a run of sequences. Each sequence is a token byte (high nibble:
//! literal count, low nibble: match length minus 4, 15 meaning "more length
//! bytes follow"), optional literal-length extension bytes, the literals, a
//! 2-byte little-endian match offset, and optional match-length extension
//! bytes. The last sequence carries literals only.
//!
//! The compressor is a greedy single-pass matcher over a 4-byte hash table.
//! Like the reference LZ4 encoder, the last 5 bytes are always literals and
//! no match starts within 12 bytes of the end.

pub mod reference;

use crate::error::{Error, Malformed, Result};

/// Shortest match the format can express.
pub const MIN_MATCH: usize = 4;
/// Largest back-reference distance.
pub const MAX_OFFSET: usize = 65_535;
/// Trailing bytes that must be encoded as literals.
pub const LAST_LITERALS: usize = 5;
/// A match may not start within this many bytes of the end.
pub const MF_LIMIT: usize = 12;
/// Inputs shorter than this are stored as a single literal run.
pub const MIN_INPUT_FOR_MATCH: usize = MF_LIMIT + 1;
/// Largest block the codec accepts.
pub const MAX_INPUT: usize = i32::MAX as usize;
/// Default match-table size in entries.
pub const DEFAULT_TABLE_SIZE: usize = 4096;
/// Smallest accepted match-table size.
pub const MIN_TABLE_SIZE: usize = 256;

const EMPTY_SLOT: u32 = u32::MAX;
// Misses before the scan step grows by one byte.
const SKIP_TRIGGER: u32 = 6;

/// Upper bound on `compress_block` output for `n` input bytes.
pub fn worst_case_bound(n: usize) -> usize {
    n + n / 255 + 16
}

/// Hash-indexed table of the most recent position for each 4-byte window.
///
/// Only affects which matches are found, never what the block decodes to.
#[derive(Debug)]
pub struct MatchTable {
    slots: Vec<u32>,
    shift: u32,
}

impl MatchTable {
    pub fn new(size: usize) -> Result<Self> {
        if !size.is_power_of_two() || size < MIN_TABLE_SIZE {
            return Err(Error::Config(format!(
                "match table size must be a power of two >= {MIN_TABLE_SIZE}, got {size}"
            )));
        }
        if size > 1 << 24 {
            return Err(Error::Config(format!("match table size {size} is too large")));
        }
        Ok(Self {
            slots: vec![EMPTY_SLOT; size],
            shift: 32 - size.trailing_zeros(),
        })
    }

    #[inline]
    fn slot(&self, word: u32) -> usize {
        (word.wrapping_mul(2_654_435_761) >> self.shift) as usize
    }

    /// Stores `pos` for `word` and returns the position it replaced.
    #[inline]
    fn swap(&mut self, word: u32, pos: usize) -> Option<usize> {
        let slot = self.slot(word);
        let prev = std::mem::replace(&mut self.slots[slot], pos as u32);
        (prev != EMPTY_SLOT).then_some(prev as usize)
    }

    #[inline]
    fn insert(&mut self, word: u32, pos: usize) {
        let slot = self.slot(word);
        self.slots[slot] = pos as u32;
    }
}

#[inline]
fn read_u32(buf: &[u8], pos: usize) -> u32 {
    u32::from_le_bytes(buf[pos..pos + 4].try_into().unwrap())
}

/// Length of the common run of `buf[a..]` and `buf[b..]`, not reaching `limit`.
#[inline]
fn common_len(buf: &[u8], mut a: usize, mut b: usize, limit: usize) -> usize {
    let start = b;
    while b + 8 <= limit {
        let x = u64::from_le_bytes(buf[a..a + 8].try_into().unwrap());
        let y = u64::from_le_bytes(buf[b..b + 8].try_into().unwrap());
        let diff = x ^ y;
        if diff != 0 {
            return b - start + (diff.trailing_zeros() / 8) as usize;
        }
        a += 8;
        b += 8;
    }
    while b < limit && buf[a] == buf[b] {
        a += 1;
        b += 1;
    }
    b - start
}

fn push_length(out: &mut Vec<u8>, mut rest: usize) {
    while rest >= 255 {
        out.push(255);
        rest -= 255;
    }
    out.push(rest as u8);
}

fn emit_sequence(out: &mut Vec<u8>, literals: &[u8], offset: usize, match_len: usize) {
    let lit = literals.len();
    let ml = match_len - MIN_MATCH;
    out.push(((lit.min(15) as u8) << 4) | ml.min(15) as u8);
    if lit >= 15 {
        push_length(out, lit - 15);
    }
    out.extend_from_slice(literals);
    out.extend_from_slice(&(offset as u16).to_le_bytes());
    if ml >= 15 {
        push_length(out, ml - 15);
    }
}

fn emit_last_literals(out: &mut Vec<u8>, literals: &[u8]) {
    let lit = literals.len();
    out.push((lit.min(15) as u8) << 4);
    if lit >= 15 {
        push_length(out, lit - 15);
    }
    out.extend_from_slice(literals);
}

/// Compresses `input` into a single LZ4 block.
///
/// Empty input yields an empty block. The output is deterministic for a given
/// `(input, table_size)` and never exceeds [`worst_case_bound`].
pub fn compress_block(input: &[u8], table_size: usize) -> Result<Vec<u8>> {
    if input.len() > MAX_INPUT {
        return Err(Error::InputTooLarge {
            len: input.len() as u64,
            max: MAX_INPUT as u64,
        });
    }
    let mut table = MatchTable::new(table_size)?;
    let mut out = Vec::with_capacity(worst_case_bound(input.len()));
    compress_with_table(input, &mut table, &mut out);
    Ok(out)
}

fn compress_with_table(input: &[u8], table: &mut MatchTable, out: &mut Vec<u8>) {
    let len = input.len();
    if len == 0 {
        return;
    }
    if len < MIN_INPUT_FOR_MATCH {
        emit_last_literals(out, input);
        return;
    }

    let last_match_start = len - MF_LIMIT;
    let match_end_limit = len - LAST_LITERALS;
    let mut anchor = 0;
    let mut pos = 0;
    let mut misses = 0u32;

    while pos <= last_match_start {
        let word = read_u32(input, pos);
        let candidate = table.swap(word, pos);
        let found = candidate
            .filter(|&c| pos - c <= MAX_OFFSET && read_u32(input, c) == word);
        let Some(cand) = found else {
            misses += 1;
            pos += 1 + (misses >> SKIP_TRIGGER) as usize;
            continue;
        };

        // Extend backwards into the pending literal run.
        let (mut start, mut from) = (pos, cand);
        while start > anchor && from > 0 && input[start - 1] == input[from - 1] {
            start -= 1;
            from -= 1;
        }
        let forward = MIN_MATCH + common_len(input, cand + MIN_MATCH, pos + MIN_MATCH, match_end_limit);
        let match_len = pos + forward - start;

        emit_sequence(out, &input[anchor..start], pos - cand, match_len);

        pos = start + match_len;
        anchor = pos;
        misses = 0;
        if pos - 2 <= last_match_start {
            table.insert(read_u32(input, pos - 2), pos - 2);
        }
    }

    emit_last_literals(out, &input[anchor..]);
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    #[inline]
    fn byte(&mut self) -> Result<u8> {
        match self.buf.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => Err(Error::MalformedBlock {
                pos: self.pos,
                kind: Malformed::Truncated,
            }),
        }
    }

    #[inline]
    fn length(&mut self, nibble: u8) -> Result<usize> {
        let mut len = nibble as usize;
        if nibble == 15 {
            loop {
                let b = self.byte()?;
                len += b as usize;
                if b != 255 {
                    break;
                }
            }
        }
        Ok(len)
    }
}

/// Decompresses one LZ4 block, refusing to produce more than `max_output`
/// bytes.
pub fn decompress_block(input: &[u8], max_output: usize) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    decompress_into(input, max_output, &mut out)?;
    Ok(out)
}

/// Like [`decompress_block`] but appends to `out`.
///
/// Back-references may only reach bytes produced by this block.
pub fn decompress_into(input: &[u8], max_output: usize, out: &mut Vec<u8>) -> Result<()> {
    let base = out.len();
    let mut op = base;
    let result = decode(input, max_output, out, &mut op);
    out.truncate(op);
    result
}

/// Scratch room kept past the write cursor so short copies can move a fixed
/// 16 bytes and let the excess be overwritten later.
const SLACK: usize = 32;
const WILD: usize = 16;

/// Grows `out` (zero-filled, geometrically) so `n` bytes plus slack fit at
/// `op`; false when `n` more bytes would pass `max_output`.
#[inline]
fn make_room(out: &mut Vec<u8>, base: usize, op: usize, n: usize, max_output: usize) -> bool {
    if op - base + n > max_output {
        return false;
    }
    let needed = op + n + SLACK;
    if needed > out.len() {
        let grown = (out.len() - base).saturating_mul(2).max(needed - base).max(4096);
        out.resize(base + grown.min(max_output + SLACK), 0);
    }
    true
}

#[inline]
fn copy16(out: &mut [u8], from: usize, to: usize) {
    let chunk: [u8; WILD] = out[from..from + WILD].try_into().unwrap();
    out[to..to + WILD].copy_from_slice(&chunk);
}

fn decode(input: &[u8], max_output: usize, out: &mut Vec<u8>, op: &mut usize) -> Result<()> {
    let base = *op;
    let mut cur = Cursor { buf: input, pos: 0 };
    let malformed = |pos, kind| Error::MalformedBlock { pos, kind };
    let overflow = |pos| malformed(pos, Malformed::OutputOverflow { limit: max_output });

    while cur.pos < input.len() {
        let token_pos = cur.pos;
        let token = cur.byte()?;

        let lit = cur.length(token >> 4)?;
        let lit_end = cur.pos.checked_add(lit).filter(|&e| e <= input.len());
        let Some(lit_end) = lit_end else {
            return Err(malformed(input.len(), Malformed::Truncated));
        };
        if !make_room(out, base, *op, lit, max_output) {
            return Err(overflow(cur.pos));
        }
        if lit <= WILD && cur.pos + WILD <= input.len() {
            out[*op..*op + WILD].copy_from_slice(&input[cur.pos..cur.pos + WILD]);
        } else {
            out[*op..*op + lit].copy_from_slice(&input[cur.pos..lit_end]);
        }
        *op += lit;
        cur.pos = lit_end;

        if cur.pos == input.len() {
            return Ok(());
        }

        let offset_pos = cur.pos;
        let offset = u16::from_le_bytes([cur.byte()?, cur.byte()?]) as usize;
        if offset == 0 {
            return Err(malformed(offset_pos, Malformed::ZeroOffset));
        }
        let produced = *op - base;
        if offset > produced {
            return Err(malformed(offset_pos, Malformed::OffsetBeyondOutput { offset, produced }));
        }
        let len = cur.length(token & 0x0f)? + MIN_MATCH;
        if !make_room(out, base, *op, len, max_output) {
            return Err(overflow(token_pos));
        }
        copy_match(out, *op, offset, len);
        *op += len;

        if cur.pos == input.len() {
            return Err(malformed(cur.pos, Malformed::MissingTerminalLiterals));
        }
    }
    Ok(())
}

/// Writes `len` bytes at `op` copied from `offset` back, allowing overlap.
/// May scribble up to 15 bytes past `op + len`.
#[inline]
fn copy_match(out: &mut [u8], op: usize, offset: usize, len: usize) {
    let start = op - offset;
    if offset >= WILD {
        // Each 16-byte source chunk ends at or before the bytes written so far.
        let mut k = 0;
        while k < len {
            copy16(out, start + k, op + k);
            k += WILD;
        }
    } else if offset == 1 {
        let b = out[start];
        out[op..op + len].fill(b);
    } else {
        // Repeating pattern of period `offset`: copy whole periods, each
        // copy doubling the span available to the next.
        let mut done = 0;
        while done < len {
            let chunk = (len - done).min(offset + done);
            out.copy_within(start..start + chunk, op + done);
            done += chunk;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_formula() {
        assert_eq!(worst_case_bound(0), 16);
        assert_eq!(worst_case_bound(255), 272);
        assert_eq!(worst_case_bound(1_000_000), 1_003_937);
    }

    #[test]
    fn empty_round_trip() {
        assert!(compress_block(b"", DEFAULT_TABLE_SIZE).unwrap().is_empty());
        assert!(decompress_block(b"", 0).unwrap().is_empty());
    }

    #[test]
    fn zeros_compress_small() {
        let input = vec![0u8; 1024];
        let block = compress_block(&input, DEFAULT_TABLE_SIZE).unwrap();
        assert!(block.len() <= 24, "{} bytes", block.len());
        assert_eq!(decompress_block(&block, 1024).unwrap(), input);
    }

    #[test]
    fn short_inputs_are_literal_runs() {
        for n in 1..MIN_INPUT_FOR_MATCH {
            let input = vec![7u8; n];
            let block = compress_block(&input, DEFAULT_TABLE_SIZE).unwrap();
            assert_eq!(block[0] >> 4, n as u8);
            assert_eq!(block.len(), n + 1);
        }
    }

    #[test]
    fn last_five_bytes_are_literals() {
        let input = vec![b'a'; 100];
        let block = compress_block(&input, DEFAULT_TABLE_SIZE).unwrap();
        assert_eq!(&block[block.len() - 5..], b"aaaaa");
        assert_eq!(block[block.len() - 6], 0x50);
    }

    #[test]
    fn rejects_bad_table_size() {
        assert!(matches!(compress_block(b"x", 100), Err(Error::Config(_))));
        assert!(matches!(compress_block(b"x", 128), Err(Error::Config(_))));
        assert!(compress_block(b"x", 256).is_ok());
    }

    #[test]
    fn zero_offset_rejected() {
        // one literal, then a match with offset 0, then terminal literals
        let block = [0x10, b'a', 0x00, 0x00, 0x10, b'b'];
        let err = decompress_block(&block, 100).unwrap_err();
        assert!(matches!(
            err,
            Error::MalformedBlock { pos: 2, kind: Malformed::ZeroOffset }
        ));
    }

    #[test]
    fn offset_beyond_output_rejected() {
        let block = [0x10, b'a', 0x02, 0x00, 0x10, b'b'];
        let err = decompress_block(&block, 100).unwrap_err();
        assert!(matches!(
            err,
            Error::MalformedBlock {
                pos: 2,
                kind: Malformed::OffsetBeyondOutput { offset: 2, produced: 1 }
            }
        ));
    }

    #[test]
    fn truncated_literals_rejected() {
        let err = decompress_block(&[0x40, b'a', b'b'], 100).unwrap_err();
        assert!(matches!(err, Error::MalformedBlock { kind: Malformed::Truncated, .. }));
        let err = decompress_block(&[0xf0], 100).unwrap_err();
        assert!(matches!(err, Error::MalformedBlock { pos: 1, kind: Malformed::Truncated }));
        let err = decompress_block(&[0x10, b'a', 0x01], 100).unwrap_err();
        assert!(matches!(err, Error::MalformedBlock { pos: 3, kind: Malformed::Truncated }));
    }

    #[test]
    fn output_limit_enforced() {
        let input = vec![3u8; 500];
        let block = compress_block(&input, DEFAULT_TABLE_SIZE).unwrap();
        let err = decompress_block(&block, 499).unwrap_err();
        assert!(matches!(
            err,
            Error::MalformedBlock { kind: Malformed::OutputOverflow { limit: 499 }, .. }
        ));
        assert!(matches!(
            decompress_block(&[0x30, 1, 2, 3], 2),
            Err(Error::MalformedBlock { kind: Malformed::OutputOverflow { .. }, .. })
        ));
    }

    #[test]
    fn trailing_match_rejected() {
        let block = [0x10, b'a', 0x01, 0x00];
        assert!(matches!(
            decompress_block(&block, 100),
            Err(Error::MalformedBlock { pos: 4, kind: Malformed::MissingTerminalLiterals })
        ));
    }

    #[test]
    fn overlapping_copy_periods() {
        for period in (1..20).chain([31, 32, 33, 100]) {
            for len in [4, 15, 16, 17, 37, 300] {
                let mut out: Vec<u8> = (0..period as u8).collect();
                out.resize(period + len + SLACK, 0xee);
                copy_match(&mut out, period, period, len);
                out.truncate(period + len);
                let expect: Vec<u8> = (0..period + len).map(|i| (i % period) as u8).collect();
                assert_eq!(out, expect, "period {period} len {len}");
            }
        }
    }

    #[test]
    fn table_size_does_not_change_meaning() {
        let input: Vec<u8> = (0..20_000u32).map(|i| ((i * 7) % 251 ^ (i / 97)) as u8).collect();
        for size in [256, 4096, 65536] {
            let block = compress_block(&input, size).unwrap();
            assert_eq!(decompress_block(&block, input.len()).unwrap(), input);
        }
    }
}
