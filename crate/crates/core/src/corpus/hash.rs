//! 64-bit FNV-1a over UTF-8 bytes.

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn text_hash64(text: &str) -> u64 {
    fnv1a(text.as_bytes())
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET_BASIS, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use rand::Rng;

    use super::*;

    #[test]
    fn empty_input_is_offset_basis() {
        assert_eq!(text_hash64(""), FNV_OFFSET_BASIS);
    }

    #[test]
    fn published_test_vectors() {
        // Reference values from the FNV authors' test suite.
        assert_eq!(text_hash64("a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(text_hash64("foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn deterministic() {
        let t = "Déjà vu 42";
        assert_eq!(text_hash64(t), text_hash64(t));
    }

    #[test]
    fn no_collisions_on_random_strings() {
        let mut rng = crate::rng::seeded(17);
        let mut texts = HashSet::new();
        while texts.len() < 10_000 {
            let s: String = (0..100).map(|_| rng.gen_range('a'..='z')).collect();
            texts.insert(s);
        }
        let hashes: HashSet<u64> = texts.iter().map(|t| text_hash64(t)).collect();
        assert_eq!(hashes.len(), texts.len());
    }
}
