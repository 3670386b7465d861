use crate::error::{Error, Result};

pub const SINGLE_LIMIT: usize = 160;
pub const MULTIPART_LIMIT: usize = 153;

const BASIC: &str = "@£$¥èéùìòÇ\nØø\rÅåΔ_ΦΓΛΩΠΨΣΘΞÆæßÉ !\"#¤%&'()*+,-./0123456789:;<=>?\
¡ABCDEFGHIJKLMNOPQRSTUVWXYZÄÖÑÜ§¿abcdefghijklmnopqrstuvwxyzäöñüà";
const EXTENSION: &str = "\x0c^{}\\[~]|€";

/// Septets needed to encode `c`, or `None` outside GSM-7.
pub fn septets(c: char) -> Option<usize> {
    if BASIC.contains(c) {
        Some(1)
    } else if EXTENSION.contains(c) {
        Some(2)
    } else {
        None
    }
}

/// Total encoded length in septets.
pub fn septet_len(text: &str) -> Result<usize> {
    text.chars()
        .map(|c| septets(c).ok_or(Error::UnsupportedCharset(c)))
        .sum()
}

/// Splits `text` into SMS segments. Lengths are in GSM-7 septets, so an
/// extension character counts twice and is never split across segments.
pub fn segment_message(text: &str) -> Result<Vec<String>> {
    if text.is_empty() {
        return Err(Error::EmptyMessage);
    }
    let total = septet_len(text)?;
    if total <= SINGLE_LIMIT {
        return Ok(vec![text.to_string()]);
    }
    let mut segments = Vec::with_capacity(total.div_ceil(MULTIPART_LIMIT));
    let mut current = String::new();
    let mut used = 0;
    for c in text.chars() {
        let w = septets(c).expect("validated above");
        if used + w > MULTIPART_LIMIT {
            segments.push(std::mem::take(&mut current));
            used = 0;
        }
        current.push(c);
        used += w;
    }
    segments.push(current);
    Ok(segments)
}
