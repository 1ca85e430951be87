//! Per-image random streams and stable id hashing.
//!
//! Every image draws from its own ChaCha8 stream keyed by a 64-bit FNV-1a
//! hash of `(global_seed, image_id)`, so results do not depend on worker
//! count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ImageRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(chunks: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for chunk in chunks {
        for &b in *chunk {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// FNV-1a over the little-endian seed bytes followed by the UTF-8 id bytes.
pub fn image_key(global_seed: u64, image_id: &str) -> u64 {
    fnv1a64(&[&global_seed.to_le_bytes(), image_id.as_bytes()])
}

pub fn derive_rng(global_seed: u64, image_id: &str) -> ImageRng {
    rng_from_key(image_key(global_seed, image_id))
}

pub fn rng_from_key(key: u64) -> ImageRng {
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&(key ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// SplitMix64 finalizer; spreads FNV output over the high bits.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Position of an image id in `[0, 1)`, independent of seed and input order.
pub fn split_position(image_id: &str) -> f64 {
    let h = mix64(fnv1a64(&[b"split\0", image_id.as_bytes()]));
    (h >> 11) as f64 / (1u64 << 53) as f64
}
