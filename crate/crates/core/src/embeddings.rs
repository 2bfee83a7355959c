//! Word vectors in the plain-text `word v1 v2 ...` layout (fastText/word2vec
//! `.vec` files), stored unit-normalized.

use std::collections::HashMap;
use std::io::BufRead;

use log::warn;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding file contains no valid vectors ({skipped} lines skipped)")]
    Empty { skipped: usize },
    #[error("failed to read embeddings: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    skipped: usize,
}

impl EmbeddingTable {
    /// Parses an optional `count dim` header followed by one vector per line.
    ///
    /// Lines with the wrong arity, unparsable numbers or zero norm are skipped
    /// and counted. Later duplicates of a word are ignored.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut table = EmbeddingTable::default();
        let mut declared_dim = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if lineno == 0 && fields.len() == 2 {
                if let (Ok(_), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    declared_dim = Some(dim);
                    continue;
                }
            }
            let values: Option<Vec<f32>> = fields[1..].iter().map(|v| v.parse().ok()).collect();
            let dim = *declared_dim.get_or_insert(fields.len() - 1);
            match values {
                Some(v) if v.len() == dim && dim > 0 => {
                    if !table.push(fields[0], v) {
                        table.skipped += 1;
                    }
                }
                _ => table.skipped += 1,
            }
        }
        if table.skipped > 0 {
            warn!("skipped {} malformed embedding lines", table.skipped);
        }
        if table.index.is_empty() {
            return Err(EmbeddingError::Empty { skipped: table.skipped });
        }
        Ok(table)
    }

    /// Builds a table from in-memory vectors; zero-norm or wrong-length
    /// vectors are skipped.
    pub fn from_vectors<'a, I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, Vec<f32>)>,
    {
        let mut table = EmbeddingTable::default();
        for (word, v) in entries {
            if table.dim == 0 {
                table.dim = v.len();
            }
            if v.len() != table.dim || !table.push(word, v) {
                table.skipped += 1;
            }
        }
        table
    }

    fn push(&mut self, word: &str, mut v: Vec<f32>) -> bool {
        let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return false;
        }
        if self.index.contains_key(word) {
            return true;
        }
        for x in &mut v {
            *x = (*x as f64 / norm) as f32;
        }
        self.dim = v.len();
        self.index.insert(word.to_string(), self.index.len());
        self.vectors.extend_from_slice(&v);
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped
    }

    /// Unit vector for `word` (exact key match).
    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }
}
