#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inputs built from runs, back-references, noise and text, so the matcher
/// sees overlapping copies, long literals and far offsets.
pub fn structured_input(seed: u64, len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let room = len - out.len();
        let piece = 1 + (rng.next_u32() as usize % room.min(4096));
        match rng.next_u32() % 4 {
            0 => {
                let b = rng.next_u32() as u8;
                out.extend(std::iter::repeat_n(b, piece));
            }
            1 if !out.is_empty() => {
                let back = 1 + rng.next_u32() as usize % out.len().min(70_000);
                let start = out.len() - back;
                for i in 0..piece {
                    out.push(out[start + i]);
                }
            }
            2 => {
                let mut noise = vec![0; piece];
                rng.fill_bytes(&mut noise);
                out.extend_from_slice(&noise);
            }
            _ => {
                let words: [&[u8]; 6] = [b"the ", b"harbour ", b"boats ", b"went ", b"out. ", b"\n"];
                while out.len() < len && piece > 0 {
                    out.extend_from_slice(words[rng.next_u32() as usize % words.len()]);
                    if rng.next_u32() % 8 == 0 {
                        break;
                    }
                }
            }
        }
    }
    out.truncate(len);
    out
}

pub fn random_bytes(seed: u64, len: usize) -> Vec<u8> {
    let mut v = vec![0; len];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut v);
    v
}

pub fn random_key(seed: u64) -> [u8; 16] {
    random_bytes(seed, 16).try_into().unwrap()
}
