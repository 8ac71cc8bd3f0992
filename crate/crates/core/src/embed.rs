//! Item embedding storage and text embedding providers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use xxhash_rust::xxh64::xxh64;

use crate::error::{Error, Result};
use crate::ingest::ItemCatalog;
use crate::text::tokenize;

pub const BINARY_MAGIC: &[u8; 4] = b"GREC";

/// Dense `len x dim` row-major matrix; row `i` belongs to canonical item `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn from_rows(dim: usize, rows: Vec<Vec<f32>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: row.len(),
                    context: format!("row {i}"),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("row {i}")));
            }
            data.extend(row);
        }
        Ok(EmbeddingMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f32> {
        self.data.chunks(self.dim)
    }

    /// Copy with every non-zero row scaled to unit L2 norm.
    pub fn normalized(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.dim) {
            normalize_in_place(row);
        }
        EmbeddingMatrix {
            dim: self.dim,
            data,
        }
    }

    /// `GREC`, u32 dim, then rows of little-endian f32 in catalog order.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.data.len() * 4);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn to_tsv(&self, catalog: &ItemCatalog) -> String {
        let mut out = String::new();
        for (i, row) in self.rows().enumerate() {
            out.push_str(catalog.id(i));
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn normalize_in_place(v: &mut [f32]) {
    let norm = v
        .iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
}

/// Loads a binary (`GREC` magic) or TSV embedding file aligned to `catalog`.
pub fn load_embeddings(path: &Path, catalog: &ItemCatalog) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(&bytes, catalog)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| {
            Error::Invalid(format!(
                "{} is neither GREC binary nor UTF-8 TSV",
                path.display()
            ))
        })?;
        parse_tsv(&text, path, catalog)
    }
}

fn parse_binary(bytes: &[u8], catalog: &ItemCatalog) -> Result<EmbeddingMatrix> {
    if bytes.len() < 8 {
        return Err(Error::Invalid("truncated GREC header".into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::Invalid("GREC header has dimension 0".into()));
    }
    let body = &bytes[8..];
    let expected = catalog.len() * dim * 4;
    if body.len() != expected {
        let rows = body.len() as f64 / (dim * 4) as f64;
        return Err(Error::DimMismatch {
            expected: catalog.len(),
            actual: rows as usize,
            context: format!(
                "GREC body holds {rows} rows of dim {dim}, catalog has {}",
                catalog.len()
            ),
        });
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(catalog.id(pos / dim).to_owned()));
    }
    Ok(EmbeddingMatrix { dim, data })
}

fn parse_tsv(text: &str, path: &Path, catalog: &ItemCatalog) -> Result<EmbeddingMatrix> {
    let mut dim = None;
    let mut rows: Vec<Option<Vec<f32>>> = vec![None; catalog.len()];
    let mut extra = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().trim();
        let values = fields
            .map(|f| f.trim().parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        let d = *dim.get_or_insert(values.len());
        if d == 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: "row has no values".into(),
            });
        }
        if values.len() != d {
            return Err(Error::DimMismatch {
                expected: d,
                actual: values.len(),
                context: format!("item {id:?}"),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(id.to_owned()));
        }
        let Some(i) = catalog.index_of(id) else {
            extra += 1;
            continue;
        };
        if rows[i].replace(values).is_some() {
            return Err(Error::DuplicateItem(id.to_owned()));
        }
    }
    if extra > 0 {
        log::warn!(
            "{}: ignored {extra} rows for items outside the catalog",
            path.display()
        );
    }
    let missing: Vec<String> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .map(|(i, _)| catalog.id(i).to_owned())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings {
            count: missing.len(),
            examples: missing.into_iter().take(10).collect(),
        });
    }
    let dim = dim.unwrap_or(0);
    EmbeddingMatrix::from_rows(dim, rows.into_iter().flatten().collect())
}

/// Maps a token sequence to a fixed-dimension vector. Implementations must
/// be deterministic and safe to call concurrently.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, tokens: &[String]) -> Result<Vec<f32>>;
}

/// Signed feature hashing of tokens, averaged over the token count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid(
                "hash embedding dimension must be >= 1".into(),
            ));
        }
        Ok(HashEmbedder { dim, seed })
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<f32>> {
        Ok(hash_embed_tokens(tokens, self.dim, self.seed))
    }
}

/// Tokenizes `text` and hashes it with [`hash_embed_tokens`].
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Vec<f32> {
    hash_embed_tokens(&tokenize(text), dim, seed)
}

pub fn hash_embed_tokens(tokens: &[String], dim: usize, seed: u64) -> Vec<f32> {
    let mut acc = vec![0i32; dim];
    for tok in tokens {
        let h = xxh64(tok.as_bytes(), seed);
        let slot = (h % dim as u64) as usize;
        acc[slot] += if h >> 63 == 0 { 1 } else { -1 };
    }
    let n = tokens.len().max(1) as f32;
    acc.into_iter().map(|v| v as f32 / n).collect()
}

/// Looks vectors up by the exact space-joined token string. Useful for
/// importing embeddings computed elsewhere for generated texts.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f32>>,
}

impl TableEmbedder {
    pub fn new(dim: usize) -> Self {
        TableEmbedder {
            dim,
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, text: &str, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
                context: format!("text {text:?}"),
            });
        }
        self.table.insert(tokenize(text).join(" "), vector);
        Ok(())
    }
}

impl EmbeddingProvider for TableEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<f32>> {
        let key = tokens.join(" ");
        self.table
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::Invalid(format!("no embedding for text {key:?}")))
    }
}

/// Embeds every catalog title with `provider`, in canonical order.
pub fn embed_catalog(
    catalog: &ItemCatalog,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingMatrix> {
    let dim = provider.dim();
    let mut rows = Vec::with_capacity(catalog.len());
    for (i, title) in catalog.titles().iter().enumerate() {
        let row = provider
            .embed(&tokenize(title))
            .map_err(|e| Error::Invalid(format!("embedding item {:?}: {e}", catalog.id(i))))?;
        rows.push(row);
    }
    EmbeddingMatrix::from_rows(dim, rows)
}
