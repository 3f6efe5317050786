use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the value's JSON encoding.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

/// Independent 64-bit seed for a purpose named by `tags`.
pub fn derive_seed(tags: &[&str], seed: u64) -> u64 {
    let mut h = Sha256::new();
    for t in tags {
        h.update(t.as_bytes());
        h.update([0u8]);
    }
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_separate_purposes() {
        assert_eq!(derive_seed(&["data"], 3), derive_seed(&["data"], 3));
        assert_ne!(derive_seed(&["data"], 3), derive_seed(&["data"], 4));
        assert_ne!(derive_seed(&["data"], 3), derive_seed(&["observation"], 3));
        assert_ne!(derive_seed(&["ab", "c"], 0), derive_seed(&["a", "bc"], 0));
    }

    #[test]
    fn hash_tracks_content() {
        assert_eq!(content_hash(&[1.0, 2.0]).unwrap(), content_hash(&[1.0, 2.0]).unwrap());
        assert_ne!(content_hash(&[1.0, 2.0]).unwrap(), content_hash(&[1.0, 2.5]).unwrap());
        assert_eq!(content_hash(&()).unwrap().len(), 64);
    }
}
