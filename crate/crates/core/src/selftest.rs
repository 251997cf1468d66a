//! Built-in sanity checks for a freshly built binary.

use crate::aes::{encrypt_block, KeySchedule};
use crate::checksum::{xxh32, EMPTY_XXH32};
use crate::frame::{decode_descriptor, encode_descriptor, BlockSize, FrameDescriptor, FrameFlags};
use crate::pipeline::{run_pack, run_unpack, PipelineConfig};

pub type CheckFn = fn() -> std::result::Result<(), String>;

/// A named check; `run` returns a reason on failure.
#[derive(Clone, Copy)]
pub struct Check {
    pub name: &'static str,
    pub run: CheckFn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub check: &'static str,
    pub reason: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "selftest failed: {}: {}", self.check, self.reason)
    }
}

pub const CHECKS: [Check; 4] = [
    Check {
        name: "aes-128 known answer",
        run: aes_kat,
    },
    Check {
        name: "frame descriptor round trip",
        run: descriptor_round_trip,
    },
    Check {
        name: "xxh32 constants",
        run: checksum_constants,
    },
    Check {
        name: "1 MiB pack/unpack round trip",
        run: pipeline_round_trip,
    },
];

fn aes_kat() -> Result<(), String> {
    let key: [u8; 16] = core::array::from_fn(|i| i as u8);
    let plain: [u8; 16] = core::array::from_fn(|i| (i as u8) << 4 | i as u8);
    let expected = [
        0x69, 0xc4, 0xe0, 0xd8, 0x6a, 0x7b, 0x04, 0x30, 0xd8, 0xcd, 0xb7, 0x80, 0x70, 0xb4, 0xc5, 0x5a,
    ];
    let got = encrypt_block(&plain, &KeySchedule::new(&key));
    if got == expected {
        Ok(())
    } else {
        Err(format!("ciphertext {got:02x?}, expected {expected:02x?}"))
    }
}

fn descriptor_round_trip() -> Result<(), String> {
    for size in BlockSize::ALL {
        for flags in [FrameFlags::default(), FrameFlags::NONE] {
            let d = FrameDescriptor::new(flags, size, *b"\x01\x23\x45\x67\x89\xab\xcd\xef");
            let back = decode_descriptor(&encode_descriptor(&d)).map_err(|e| e.to_string())?;
            if back != d {
                return Err(format!("{d:?} decoded as {back:?}"));
            }
        }
    }
    Ok(())
}

fn checksum_constants() -> Result<(), String> {
    for (input, want) in [(&b""[..], EMPTY_XXH32), (b"a", 0x550d_7456), (b"abc", 0x32d1_53ff)] {
        let got = xxh32(input);
        if got != want {
            return Err(format!("xxh32({input:?}) = {got:#010x}, expected {want:#010x}"));
        }
    }
    Ok(())
}

fn pipeline_round_trip() -> Result<(), String> {
    let input: Vec<u8> = (0u32..1 << 20).map(|i| (i.wrapping_mul(i) >> 7) as u8 & 0x3f).collect();
    let key = *b"selftest-key-016";
    let cfg = PipelineConfig::default()
        .with_chunk_size(256 << 10)
        .with_workers(2)
        .with_nonce(*b"selftest");
    let mut frame = Vec::new();
    run_pack(&input[..], &key, &cfg, &mut frame).map_err(|e| format!("pack: {e}"))?;
    let mut back = Vec::new();
    run_unpack(&frame[..], &key, &cfg, &mut back).map_err(|e| format!("unpack: {e}"))?;
    if back != input {
        return Err("unpacked bytes differ from input".into());
    }
    Ok(())
}

/// Runs `checks` in order, writing one `ok <name>` line per passing check to
/// `report`, and stops at the first failure.
pub fn run_checks(checks: &[Check], report: &mut impl std::io::Write) -> Result<(), Failure> {
    for c in checks {
        match (c.run)() {
            Ok(()) => {
                let _ = writeln!(report, "ok {}", c.name);
            }
            Err(reason) => {
                return Err(Failure {
                    check: c.name,
                    reason,
                })
            }
        }
    }
    Ok(())
}

pub fn run_all(report: &mut impl std::io::Write) -> Result<(), Failure> {
    run_checks(&CHECKS, report)
}
