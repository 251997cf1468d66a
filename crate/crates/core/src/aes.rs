//! AES-128 forward cipher (FIPS-197).
//!
//! Only encryption is provided; counter mode never needs the inverse
//! cipher. Table lookups are not constant-time.

use crate::error::{Error, Result};

pub const BLOCK_LEN: usize = 16;
pub const KEY_LEN: usize = 16;
const ROUNDS: usize = 10;

/// One 128-bit cipher block.
pub type CipherBlock = [u8; BLOCK_LEN];

#[rustfmt::skip]
const SBOX_TABLE: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

#[cfg(not(feature = "fault-sbox"))]
pub(crate) const SBOX: [u8; 256] = SBOX_TABLE;

#[cfg(feature = "fault-sbox")]
pub(crate) const SBOX: [u8; 256] = {
    let mut t = SBOX_TABLE;
    t[0x00] ^= 0x01;
    t
};

const RCON: [u8; ROUNDS] = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36];

/// Expanded AES-128 key: 11 round keys of 16 bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct KeySchedule {
    round_keys: [[u8; BLOCK_LEN]; ROUNDS + 1],
    /// The same keys as little-endian column words.
    words: [[u32; 4]; ROUNDS + 1],
}

impl std::fmt::Debug for KeySchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("KeySchedule(..)")
    }
}

impl KeySchedule {
    pub fn new(key: &[u8; KEY_LEN]) -> Self {
        let mut words = [[0u8; 4]; 4 * (ROUNDS + 1)];
        for (w, chunk) in words.iter_mut().zip(key.chunks_exact(4)) {
            w.copy_from_slice(chunk);
        }
        for i in 4..words.len() {
            let mut temp = words[i - 1];
            if i % 4 == 0 {
                temp.rotate_left(1);
                for b in &mut temp {
                    *b = SBOX[*b as usize];
                }
                temp[0] ^= RCON[i / 4 - 1];
            }
            for j in 0..4 {
                words[i][j] = words[i - 4][j] ^ temp[j];
            }
        }
        let mut round_keys = [[0u8; BLOCK_LEN]; ROUNDS + 1];
        for (rk, ws) in round_keys.iter_mut().zip(words.chunks_exact(4)) {
            for (dst, w) in rk.chunks_exact_mut(4).zip(ws) {
                dst.copy_from_slice(w);
            }
        }
        let words = round_keys.map(|rk| core::array::from_fn(|c| column(&rk, c)));
        Self { round_keys, words }
    }

    pub fn round_keys(&self) -> &[[u8; BLOCK_LEN]; ROUNDS + 1] {
        &self.round_keys
    }
}

/// Expands a 16-byte key, rejecting any other length.
pub fn expand_key(key: &[u8]) -> Result<KeySchedule> {
    let key: &[u8; KEY_LEN] = key.try_into().map_err(|_| Error::KeyLength(key.len()))?;
    Ok(KeySchedule::new(key))
}

#[cfg(test)]
fn xtime(b: u8) -> u8 {
    (b << 1) ^ (((b as i8) >> 7) as u8 & 0x1b)
}

/// `xtime` applied to each byte of a word.
#[inline(always)]
fn xtime4(w: u32) -> u32 {
    ((w & 0x7f7f_7f7f) << 1) ^ (((w >> 7) & 0x0101_0101) * 0x1b)
}

/// Column `c` of a column-major block as a little-endian word, so byte `r`
/// of the word is row `r`.
#[inline(always)]
fn column(b: &CipherBlock, c: usize) -> u32 {
    u32::from_le_bytes([b[4 * c], b[4 * c + 1], b[4 * c + 2], b[4 * c + 3]])
}

#[inline(always)]
fn sbox(w: u32, row: u32) -> u32 {
    (SBOX[(w >> (8 * row)) as u8 as usize] as u32) << (8 * row)
}

/// SubBytes and ShiftRows in one pass: row `r` of output column `c` comes
/// from input column `c + r`.
#[inline(always)]
fn sub_shift(s: &[u32; 4]) -> [u32; 4] {
    core::array::from_fn(|c| {
        sbox(s[c], 0) | sbox(s[(c + 1) % 4], 1) | sbox(s[(c + 2) % 4], 2) | sbox(s[(c + 3) % 4], 3)
    })
}

#[inline(always)]
fn mix_column(w: u32) -> u32 {
    // Byte r of `pairs` is a[r] ^ a[r + 1].
    let pairs = w ^ w.rotate_right(8);
    let all = pairs ^ pairs.rotate_right(16);
    w ^ all ^ xtime4(pairs)
}

/// Encrypts one block.
pub fn encrypt_block(plain: &CipherBlock, ks: &KeySchedule) -> CipherBlock {
    let rk = &ks.words;
    let mut s: [u32; 4] = core::array::from_fn(|c| column(plain, c) ^ rk[0][c]);
    for round_key in &rk[1..ROUNDS] {
        let t = sub_shift(&s);
        s = core::array::from_fn(|c| mix_column(t[c]) ^ round_key[c]);
    }
    let t = sub_shift(&s);
    let mut out = [0u8; BLOCK_LEN];
    for c in 0..4 {
        out[4 * c..4 * c + 4].copy_from_slice(&(t[c] ^ rk[ROUNDS][c]).to_le_bytes());
    }
    out
}
