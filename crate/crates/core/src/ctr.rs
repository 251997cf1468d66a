//! Counter-mode keystream over AES-128.
//!
//! Every frame block gets a counter base derived from its index alone, so any
//! worker can encrypt any block without knowing about the others.

use crate::aes::{encrypt_block, CipherBlock, KeySchedule, BLOCK_LEN};
use crate::error::{Error, Result};

pub const NONCE_LEN: usize = 8;

/// Nonce plus 64-bit counter, laid out as `nonce || counter_be`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonceCounter {
    pub nonce: [u8; NONCE_LEN],
    pub counter: u64,
}

impl NonceCounter {
    pub fn new(nonce: [u8; NONCE_LEN], counter: u64) -> Self {
        Self { nonce, counter }
    }

    pub fn counter_block(&self) -> CipherBlock {
        counter_block(self)
    }
}

pub fn counter_block(nc: &NonceCounter) -> CipherBlock {
    let mut block = [0u8; BLOCK_LEN];
    block[..NONCE_LEN].copy_from_slice(&nc.nonce);
    block[NONCE_LEN..].copy_from_slice(&nc.counter.to_be_bytes());
    block
}

/// First counter value of frame block `block_index`.
pub fn counter_base(block_index: u64, max_block_size: u64) -> Result<u64> {
    assert!(max_block_size % BLOCK_LEN as u64 == 0, "block size must be a multiple of 16");
    block_index
        .checked_mul(max_block_size / BLOCK_LEN as u64)
        .ok_or(Error::FrameTooLarge)
}

/// Number of keystream blocks needed for `len` bytes.
pub fn blocks_for(len: usize) -> u64 {
    len.div_ceil(BLOCK_LEN) as u64
}

/// XORs `data` in place with the keystream starting at counter `base`.
pub fn xcrypt_in_place(data: &mut [u8], ks: &KeySchedule, nonce: &[u8; NONCE_LEN], base: u64) -> Result<()> {
    let needed = blocks_for(data.len());
    if needed > 0 && base.checked_add(needed - 1).is_none() {
        return Err(Error::FrameTooLarge);
    }
    let mut nc = NonceCounter::new(*nonce, base);
    for chunk in data.chunks_mut(BLOCK_LEN) {
        let keystream = encrypt_block(&nc.counter_block(), ks);
        if let Ok(full) = <&mut [u8; BLOCK_LEN]>::try_from(&mut *chunk) {
            *full = (u128::from_ne_bytes(*full) ^ u128::from_ne_bytes(keystream)).to_ne_bytes();
        } else {
            for (d, k) in chunk.iter_mut().zip(keystream.iter()) {
                *d ^= k;
            }
        }
        nc.counter = nc.counter.wrapping_add(1);
    }
    Ok(())
}

/// Encrypts or decrypts `payload`; the operation is its own inverse.
pub fn xcrypt(payload: &[u8], ks: &KeySchedule, nonce: &[u8; NONCE_LEN], base: u64) -> Result<Vec<u8>> {
    let mut out = payload.to_vec();
    xcrypt_in_place(&mut out, ks, nonce, base)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_block_layout() {
        assert_eq!(counter_block(&NonceCounter::new([0; 8], 0)), [0; 16]);
        let mut one = [0; 16];
        one[15] = 1;
        assert_eq!(counter_block(&NonceCounter::new([0; 8], 1)), one);
        assert_eq!(
            counter_block(&NonceCounter::new([1, 2, 3, 4, 5, 6, 7, 8], 256)),
            [1, 2, 3, 4, 5, 6, 7, 8, 0, 0, 0, 0, 0, 0, 1, 0]
        );
    }

    #[test]
    fn counter_bases() {
        assert_eq!(counter_base(0, 4 << 20).unwrap(), 0);
        assert_eq!(counter_base(1, 4 << 20).unwrap(), 262_144);
        assert_eq!(counter_base(3, 65_536).unwrap(), 12_288);
        assert!(matches!(counter_base(u64::MAX / 2, 65_536), Err(Error::FrameTooLarge)));
    }

    #[test]
    fn empty_payload() {
        let ks = KeySchedule::new(&[9; 16]);
        assert!(xcrypt(&[], &ks, &[0; 8], u64::MAX).unwrap().is_empty());
    }

    #[test]
    fn counter_overflow() {
        let ks = KeySchedule::new(&[9; 16]);
        assert!(xcrypt(&[0; 16], &ks, &[0; 8], u64::MAX).is_ok());
        assert!(matches!(xcrypt(&[0; 17], &ks, &[0; 8], u64::MAX), Err(Error::FrameTooLarge)));
    }

    #[test]
    fn single_block_matches_cipher() {
        let ks = KeySchedule::new(&[0x42; 16]);
        let nonce = [7, 6, 5, 4, 3, 2, 1, 0];
        let p: Vec<u8> = (0..16).collect();
        let ks_block = encrypt_block(&counter_block(&NonceCounter::new(nonce, 99)), &ks);
        let expect: Vec<u8> = p.iter().zip(ks_block).map(|(a, b)| a ^ b).collect();
        assert_eq!(xcrypt(&p, &ks, &nonce, 99).unwrap(), expect);
    }
}
