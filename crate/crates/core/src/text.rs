//! Tokenization and hashing shared by the embedder, the mock generator and
//! the text-overlap metrics.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Lowercases ASCII letters and splits on every byte that is not an ASCII
/// letter or digit. Non-ASCII bytes therefore act as separators, which keeps
/// the token stream byte-exact across platforms and locales.
pub fn tokenize(text: &str) -> Vec<String> {
    text.as_bytes()
        .split(|b| !b.is_ascii_alphanumeric())
        .filter(|chunk| !chunk.is_empty())
        .map(|chunk| {
            chunk
                .iter()
                .map(|b| char::from(b.to_ascii_lowercase()))
                .collect()
        })
        .collect()
}

/// Byte-preserving lowercase used for substring matching.
pub(crate) fn lower(text: &str) -> String {
    text.to_ascii_lowercase()
}
