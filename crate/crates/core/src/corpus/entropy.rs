//! Compression-ratio entropy filter.

use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::Compression;

use super::{Document, FilterDecision, Verdict};
use crate::error::{Error, Result};

/// zlib-wrapped deflate at level 9 compressed length over raw UTF-8 length.
pub fn compression_ratio(text: &str) -> Result<f64> {
    if text.is_empty() {
        return Err(Error::EmptyInput("compression_ratio requires non-empty text"));
    }
    let raw = text.as_bytes();
    let mut encoder = ZlibEncoder::new(Vec::with_capacity(raw.len() / 2 + 16), Compression::best());
    encoder.write_all(raw).map_err(|e| Error::io("<deflate>", e))?;
    let compressed = encoder.finish().map_err(|e| Error::io("<deflate>", e))?;
    Ok(compressed.len() as f64 / raw.len() as f64)
}

/// Nearest-rank quantile of an ascending slice: the value at 1-based rank
/// `ceil(q * n)`, clamped to `[1, n]`.
pub fn nearest_rank_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Marks documents whose compression ratio falls outside the batch's
/// `[low_quantile, high_quantile]` band as `drop_entropy`.
pub fn entropy_filter(
    docs: &[Document],
    low_quantile: f64,
    high_quantile: f64,
) -> Result<Vec<FilterDecision>> {
    if !(0.0..=1.0).contains(&low_quantile)
        || !(0.0..=1.0).contains(&high_quantile)
        || low_quantile >= high_quantile
    {
        return Err(Error::InvalidArgument(format!(
            "quantile band must satisfy 0 <= low < high <= 1, got ({low_quantile}, {high_quantile})"
        )));
    }
    if docs.is_empty() {
        return Err(Error::EmptyInput("entropy_filter batch is empty"));
    }
    let ratios = docs
        .iter()
        .map(|d| compression_ratio(&d.text))
        .collect::<Result<Vec<_>>>()?;
    Ok(band_decisions(docs, &ratios, low_quantile, high_quantile))
}

pub(super) fn band_decisions(
    docs: &[Document],
    ratios: &[f64],
    low_quantile: f64,
    high_quantile: f64,
) -> Vec<FilterDecision> {
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = nearest_rank_quantile(&sorted, low_quantile);
    let hi = nearest_rank_quantile(&sorted, high_quantile);
    docs.iter()
        .zip(ratios)
        .map(|(doc, &r)| {
            if r < lo || r > hi {
                FilterDecision::drop(&doc.id, Verdict::DropEntropy, r)
            } else {
                FilterDecision::keep(&doc.id)
            }
        })
        .collect()
}

/// Renders random bytes as valid UTF-8 with a flat byte histogram: a byte
/// below 0x80 becomes a printable ASCII char, anything else consumes a second
/// byte and becomes a two-byte code point.
#[cfg(test)]
pub(crate) fn render_random_bytes(bytes: &[u8]) -> String {
    let mut out = String::new();
    let mut it = bytes.iter();
    while let Some(&b) = it.next() {
        if b < 0x80 {
            out.push(char::from(0x20 + b % 95));
        } else if let Some(&b2) = it.next() {
            let cp = 0x80 + ((u32::from(b & 0x7f) << 8) | u32::from(b2)) % 0x780;
            out.push(char::from_u32(cp).expect("two-byte range is valid"));
        }
    }
    out
}
