//! Content hashes for configurations and reports.

use crate::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

/// Hex SHA-256 of the compact JSON form of `value`.
///
/// `serde_json` keeps struct fields in declaration order and object keys
/// sorted (no `preserve_order` feature), so equal values hash equally.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    Ok(out)
}
