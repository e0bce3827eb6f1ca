//! Stable seed derivation: one master seed fans out into per-purpose seeds
//! keyed by a label, so adding a consumer never perturbs existing streams.

use sha2::{Digest, Sha256};

/// Derive a child seed from `master` and a purpose label. Stable across
/// platforms and releases (pure SHA-256, no `DefaultHasher`).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
