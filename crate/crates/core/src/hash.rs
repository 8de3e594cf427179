//! SHA-256 helpers for parameter snapshots and architecture fingerprints.

use sha2::{Digest, Sha256};

pub type Digest32 = [u8; 32];

/// Hashes a sequence of `f64` slices by their exact bit patterns.
pub fn hash_f64_blocks<'a>(blocks: impl IntoIterator<Item = &'a [f64]>) -> Digest32 {
    let mut h = Sha256::new();
    for block in blocks {
        h.update((block.len() as u64).to_le_bytes());
        for v in block {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().into()
}

pub fn hash_bytes(bytes: &[u8]) -> Digest32 {
    Sha256::digest(bytes).into()
}

/// Lower-case hex rendering of a digest.
pub fn to_hex(d: &Digest32) -> alloc::string::String {
    use core::fmt::Write;
    let mut s = alloc::string::String::with_capacity(64);
    for b in d {
        let _ = write!(s, "{b:02x}");
    }
    s
}
