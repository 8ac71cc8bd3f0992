//! The standard tokenizer shared by embedding, BM25 and generation.

/// Lowercases, splits on non-alphanumeric characters and drops empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
