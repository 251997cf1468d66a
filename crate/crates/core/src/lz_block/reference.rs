//! Slow, obviously-correct reference codec used as a test oracle.
//!
//! Shares no code with the fast path: blocks are built as explicit
//! [`Sequence`] lists with exhaustive longest-match search, and decoded one
//! byte at a time.

use super::{LAST_LITERALS, MAX_OFFSET, MF_LIMIT, MIN_INPUT_FOR_MATCH, MIN_MATCH};

/// One LZ4 sequence: a literal run optionally followed by a back-reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub literals: Vec<u8>,
    /// `(offset, length)`; `None` only for the final sequence.
    pub matched: Option<(usize, usize)>,
}

/// Longest-match exhaustive compressor. Quadratic; keep inputs small.
pub fn reference_compress_naive(input: &[u8]) -> Vec<u8> {
    encode_sequences(&find_sequences(input))
}

/// Parses `input` into sequences using exhaustive search.
pub fn find_sequences(input: &[u8]) -> Vec<Sequence> {
    let n = input.len();
    if n == 0 {
        return Vec::new();
    }
    let mut seqs = Vec::new();
    let mut literals = Vec::new();
    let mut i = 0;
    if n >= MIN_INPUT_FOR_MATCH {
        let end_limit = n - LAST_LITERALS;
        while i + MF_LIMIT <= n {
            let mut best = (0, 0);
            let lowest = i.saturating_sub(MAX_OFFSET);
            for j in lowest..i {
                let mut len = 0;
                while i + len < end_limit && input[j + len] == input[i + len] {
                    len += 1;
                }
                if len >= best.1 && len >= MIN_MATCH {
                    best = (i - j, len);
                }
            }
            if best.1 >= MIN_MATCH {
                seqs.push(Sequence {
                    literals: std::mem::take(&mut literals),
                    matched: Some(best),
                });
                i += best.1;
            } else {
                literals.push(input[i]);
                i += 1;
            }
        }
    }
    literals.extend_from_slice(&input[i..]);
    seqs.push(Sequence {
        literals,
        matched: None,
    });
    seqs
}

fn write_len_ext(out: &mut Vec<u8>, len: usize) {
    if len < 15 {
        return;
    }
    let mut rest = len - 15;
    loop {
        let b = rest.min(255);
        out.push(b as u8);
        rest -= b;
        if b < 255 {
            break;
        }
    }
}

/// Serializes sequences in the LZ4 block layout.
pub fn encode_sequences(seqs: &[Sequence]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in seqs {
        let lit_nib = s.literals.len().min(15) as u8;
        let ml_nib = s.matched.map_or(0, |(_, l)| (l - MIN_MATCH).min(15)) as u8;
        out.push(lit_nib << 4 | ml_nib);
        write_len_ext(&mut out, s.literals.len());
        out.extend_from_slice(&s.literals);
        if let Some((offset, len)) = s.matched {
            out.push((offset & 0xff) as u8);
            out.push((offset >> 8) as u8);
            write_len_ext(&mut out, len - MIN_MATCH);
        }
    }
    out
}

/// Byte-at-a-time decoder. Returns `None` for anything malformed.
pub fn reference_decompress_naive(block: &[u8]) -> Option<Vec<u8>> {
    let mut out = Vec::new();
    let mut i = 0;
    let read_len = |i: &mut usize, nibble: usize| -> Option<usize> {
        let mut len = nibble;
        if nibble == 15 {
            loop {
                let b = *block.get(*i)?;
                *i += 1;
                len += b as usize;
                if b != 255 {
                    break;
                }
            }
        }
        Some(len)
    };
    while i < block.len() {
        let token = block[i] as usize;
        i += 1;
        let lit = read_len(&mut i, token >> 4)?;
        for _ in 0..lit {
            out.push(*block.get(i)?);
            i += 1;
        }
        if i == block.len() {
            return Some(out);
        }
        let offset = *block.get(i)? as usize | (*block.get(i + 1)? as usize) << 8;
        i += 2;
        let len = read_len(&mut i, token & 15)? + MIN_MATCH;
        if offset == 0 || offset > out.len() {
            return None;
        }
        for _ in 0..len {
            out.push(out[out.len() - offset]);
        }
    }
    // empty block, or one ending on a match
    block.is_empty().then_some(out)
}
