//! Deterministic child random streams.
//!
//! Every randomized step draws from a stream keyed by the master seed plus a
//! list of labels (repetition index, stage name, sizes). Keys are hashed with
//! SHA-256 so unrelated stages never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// One component of a stream key.
#[derive(Debug, Clone, Copy)]
pub enum Part<'a> {
    Tag(&'a str),
    Num(u64),
}

impl From<&'static str> for Part<'static> {
    fn from(s: &'static str) -> Self {
        Part::Tag(s)
    }
}

impl From<u64> for Part<'_> {
    fn from(v: u64) -> Self {
        Part::Num(v)
    }
}

impl From<usize> for Part<'_> {
    fn from(v: usize) -> Self {
        Part::Num(v as u64)
    }
}

pub fn derive_bytes(master_seed: u64, parts: &[Part<'_>]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"latentbench/stream/v1");
    h.update(master_seed.to_le_bytes());
    for part in parts {
        match part {
            Part::Tag(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Part::Num(v) => {
                h.update([1u8]);
                h.update(v.to_le_bytes());
            }
        }
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

/// A child seed, for APIs that take a plain `u64`.
pub fn derive_seed(master_seed: u64, parts: &[Part<'_>]) -> u64 {
    let b = derive_bytes(master_seed, parts);
    u64::from_le_bytes(b[..8].try_into().unwrap())
}

pub fn stream(master_seed: u64, parts: &[Part<'_>]) -> Rng {
    Rng::from_seed(derive_bytes(master_seed, parts))
}
