//! Embedding spaces: storage, lookup with out-of-vocabulary fallback, the
//! whitespace-separated text format, and cosine similarity.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::ZeroVector);
    }
    let c = dot / (nu.sqrt() * nv.sqrt());
    Ok(c.max(-T::one()).min(T::one()))
}

pub fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Where an embedding space came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceMetadata {
    /// Producing algorithm, e.g. `sgns`, `decontext` or `imported`.
    pub algorithm: String,
    /// Description of the training data or context dataset.
    pub source: String,
}

impl SpaceMetadata {
    pub fn new(algorithm: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            source: source.into(),
        }
    }
}

/// A vocabulary of tokens mapped to rows of a dense `|V| × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace<T> {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<T>,
    dim: usize,
    metadata: SpaceMetadata,
}

/// How a query token was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    CaseFold,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LookupResult<'a, T> {
    Found {
        vector: &'a [T],
        /// Token under which the vector is stored.
        matched: &'a str,
        fallback: Option<Fallback>,
    },
    Oov {
        token: String,
        attempted: Fallback,
    },
}

impl<'a, T> LookupResult<'a, T> {
    pub fn vector(&self) -> Option<&'a [T]> {
        match self {
            LookupResult::Found { vector, .. } => Some(vector),
            LookupResult::Oov { .. } => None,
        }
    }

    pub fn is_oov(&self) -> bool {
        matches!(self, LookupResult::Oov { .. })
    }
}

impl<T: Scalar> EmbeddingSpace<T> {
    /// Build from tokens and a row-major matrix.
    pub fn new(
        tokens: Vec<String>,
        data: Vec<T>,
        dim: usize,
        metadata: SpaceMetadata,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dimension must be positive".into()));
        }
        if data.len() != tokens.len() * dim {
            return Err(Error::InvalidInput(format!(
                "matrix has {} values, expected {} tokens × {dim}",
                data.len(),
                tokens.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in vector of {:?}",
                tokens[pos / dim]
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidInput(format!(
                    "token {t:?} is empty or contains whitespace"
                )));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            index,
            data,
            dim,
            metadata,
        })
    }

    /// Build from `(token, vector)` rows.
    pub fn from_rows<I, S>(rows: I, metadata: SpaceMetadata) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: Into<String>,
    {
        let mut tokens = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (token, vector) in rows {
            let d = *dim.get_or_insert(vector.len());
            if vector.len() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: vector.len(),
                });
            }
            tokens.push(token.into());
            data.extend(vector);
        }
        Self::new(tokens, data, dim.unwrap_or(0), metadata)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn metadata(&self) -> &SpaceMetadata {
        &self.metadata
    }

    pub fn set_metadata(&mut self, metadata: SpaceMetadata) {
        self.metadata = metadata;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[T]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.tokens
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(t, v)| (t.as_str(), v))
    }

    /// Exact match, then the lowercased form, then an OOV marker.
    pub fn lookup(&self, token: &str) -> LookupResult<'_, T> {
        if let Some(&i) = self.index.get(token) {
            return LookupResult::Found {
                vector: self.row(i),
                matched: &self.tokens[i],
                fallback: None,
            };
        }
        let folded = token.to_lowercase();
        if let Some(&i) = self.index.get(&folded) {
            log::debug!("lookup {token:?} resolved by case folding to {folded:?}");
            return LookupResult::Found {
                vector: self.row(i),
                matched: &self.tokens[i],
                fallback: Some(Fallback::CaseFold),
            };
        }
        log::debug!("lookup {token:?} is out of vocabulary");
        LookupResult::Oov {
            token: token.to_owned(),
            attempted: Fallback::CaseFold,
        }
    }

    /// Apply `f` to every row, e.g. for rescaling experiments.
    pub fn map_rows(&self, mut f: impl FnMut(usize, &mut [T])) -> Result<Self> {
        let mut data = self.data.clone();
        for (i, row) in data.chunks_exact_mut(self.dim).enumerate() {
            f(i, row);
        }
        Self::new(self.tokens.clone(), data, self.dim, self.metadata.clone())
    }

    /// Write the `"<count> <dim>"` header followed by one `token v1 … vd` line
    /// per token. Values use the shortest representation that parses back to
    /// the same number.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        let mut line = String::new();
        for (token, vector) in self.rows() {
            line.clear();
            line.push_str(token);
            for v in vector {
                use std::fmt::Write as _;
                let _ = write!(line, " {v}");
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_text<R: BufRead>(reader: R, metadata: SpaceMetadata) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::record(1, e.to_string()))?,
            None => return Err(Error::record(1, "missing header")),
        };
        let mut fields = header.split_whitespace();
        let parse_header = |f: Option<&str>| -> Result<usize> {
            f.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::record(1, format!("invalid header {header:?}")))
        };
        let count = parse_header(fields.next())?;
        let dim = parse_header(fields.next())?;
        if fields.next().is_some() || dim == 0 {
            return Err(Error::record(1, format!("invalid header {header:?}")));
        }

        let mut tokens = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        let mut seen = HashMap::with_capacity(count);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::record(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a field");
            let start = data.len();
            for field in fields {
                let v: T = field
                    .parse()
                    .map_err(|_| Error::record(lineno, format!("invalid number {field:?}")))?;
                if !v.is_finite() {
                    return Err(Error::record(lineno, format!("non-finite value {field:?}")));
                }
                data.push(v);
            }
            let found = data.len() - start;
            if found != dim {
                return Err(Error::record(
                    lineno,
                    format!("{token:?} has {found} values, header declares {dim}"),
                ));
            }
            if seen.insert(token.to_owned(), lineno).is_some() {
                return Err(Error::record(lineno, format!("duplicate token {token:?}")));
            }
            tokens.push(token.to_owned());
        }
        if tokens.len() != count {
            return Err(Error::InvalidInput(format!(
                "header declares {count} tokens, found {}",
                tokens.len()
            )));
        }
        Self::new(tokens, data, dim, metadata)
    }

    pub fn load_text(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(
            BufReader::new(file),
            SpaceMetadata::new("imported", path.display().to_string()),
        )
    }
}
