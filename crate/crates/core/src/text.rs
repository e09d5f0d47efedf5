use alloc::string::String;

/// Whitespace-token count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Seconds with millisecond precision, e.g. `12.000`.
pub fn fmt_seconds(t: f64) -> String {
    alloc::format!("{:.3}", t)
}
