use std::collections::HashMap;
use std::io::BufRead;

use log::warn;
use ndarray::Array2;

use super::EmbedError;

/// Static word vectors keyed by surface form.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    zeros: Vec<f32>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Self {
        WordVectors {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
            zeros: vec![0.0; dim],
        }
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

    /// Insert a vector. Returns false (and keeps the old one) if the
    /// surface is already present.
    pub fn insert(&mut self, surface: &str, vector: &[f32]) -> Result<bool, EmbedError> {
        if vector.len() != self.dim {
            return Err(EmbedError::DimMismatch {
                line: 0,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.index.contains_key(surface) {
            return Ok(false);
        }
        self.index.insert(surface.to_string(), self.index.len());
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    /// Exact match, then lowercase.
    pub fn get(&self, surface: &str) -> Option<&[f32]> {
        let row = self
            .index
            .get(surface)
            .or_else(|| self.index.get(&surface.to_lowercase()))?;
        Some(&self.data[row * self.dim..(row + 1) * self.dim])
    }

    /// Like [`get`](Self::get), but unknown surfaces map to the zero vector.
    pub fn lookup(&self, surface: &str) -> &[f32] {
        self.get(surface).unwrap_or(&self.zeros)
    }

    /// One row per surface, widened to f64.
    pub fn features<S: AsRef<str>>(&self, surfaces: &[S]) -> Array2<f64> {
        let mut x = Array2::zeros((surfaces.len(), self.dim));
        for (mut row, surface) in x.rows_mut().into_iter().zip(surfaces) {
            for (dst, &src) in row.iter_mut().zip(self.lookup(surface.as_ref())) {
                *dst = f64::from(src);
            }
        }
        x
    }
}

/// Read GloVe text format: a surface followed by `dim` space-separated
/// floats per line. With `expected_dim` unset the width of the first line
/// is used. Blank lines are skipped; duplicate surfaces keep the first
/// occurrence.
pub fn load_glove<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<WordVectors, EmbedError> {
    let mut vectors: Option<WordVectors> = expected_dim.map(WordVectors::new);
    let mut buf = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let surface = parts.next().unwrap_or_default();
        buf.clear();
        for part in parts {
            let value: f32 = part.parse().map_err(|_| EmbedError::Parse {
                line: line_no,
                reason: format!("`{part}` is not a number"),
            })?;
            buf.push(value);
        }
        let wv = vectors.get_or_insert_with(|| WordVectors::new(buf.len()));
        if buf.len() != wv.dim || wv.dim == 0 {
            return Err(EmbedError::DimMismatch {
                line: line_no,
                expected: wv.dim,
                found: buf.len(),
            });
        }
        if !wv.insert(surface, &buf)? {
            warn!("line {line_no}: duplicate surface `{surface}` ignored");
        }
    }
    Ok(vectors.unwrap_or_else(|| WordVectors::new(0)))
}
