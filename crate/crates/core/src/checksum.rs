//! xxHash32 (seed 0), the checksum used for blocks, headers and content.

use xxhash_rust::xxh32::Xxh32;

/// xxHash32 of the empty string with seed 0.
pub const EMPTY_XXH32: u32 = 0x02cc_5d05;

pub fn xxh32(data: &[u8]) -> u32 {
    xxhash_rust::xxh32::xxh32(data, 0)
}

/// Incremental content checksum.
#[derive(Clone)]
pub struct ContentHasher(Xxh32);

impl ContentHasher {
    pub fn new() -> Self {
        Self(Xxh32::new(0))
    }

    pub fn update(&mut self, data: &[u8]) {
        self.0.update(data);
    }

    pub fn digest(&self) -> u32 {
        self.0.digest()
    }
}

impl Default for ContentHasher {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(xxh32(b""), EMPTY_XXH32);
        assert_eq!(xxh32(b"a"), 0x550d_7456);
        assert_eq!(xxh32(b"abc"), 0x32d1_53ff);
    }

    #[test]
    fn incremental_matches_one_shot() {
        let data: Vec<u8> = (0..1000u32).map(|i| (i * 31) as u8).collect();
        let mut h = ContentHasher::new();
        for part in data.chunks(7) {
            h.update(part);
        }
        assert_eq!(h.digest(), xxh32(&data));
    }
}
