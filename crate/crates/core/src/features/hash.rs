//! Stable feature hashing.
//!
//! A feature string `family=value` is hashed with 64-bit FNV-1a; the high
//! half is xor-folded into the low half and the result masked to
//! `hash_bits`. The scheme is identified by [`HASH_SCHEME`] and recorded in
//! every model bundle, so indices stay valid across builds and platforms.

pub const HASH_SCHEME: &str = "fnv1a64-fold32-v1";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hashes the parts as if they were concatenated, without allocating.
#[inline]
pub fn fnv1a64_parts(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

#[inline]
pub fn fold_mask(h: u64, bits: u32) -> u32 {
    let folded = (h ^ (h >> 32)) as u32;
    if bits >= 32 {
        folded
    } else {
        folded & ((1u32 << bits) - 1)
    }
}

/// Index of the feature `family=value` in a `2^bits` table.
pub fn feature_index(family: &str, value: &str, bits: u32) -> u32 {
    fold_mask(
        fnv1a64_parts(&[family.as_bytes(), b"=", value.as_bytes()]),
        bits,
    )
}

/// Re-hashes an existing index together with a label-pair tag.
pub fn conjoin(index: u32, tag: u32, bits: u32) -> u32 {
    let mut bytes = [0u8; 8];
    bytes[..4].copy_from_slice(&index.to_le_bytes());
    bytes[4..].copy_from_slice(&tag.to_le_bytes());
    fold_mask(fnv1a64(&bytes), bits)
}
