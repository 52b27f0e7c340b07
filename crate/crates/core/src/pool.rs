//! Decontextualized embeddings: per-token means over a stream of contextual
//! vectors.
//!
//! Stream files start with a `DECTX <dim> <model-tag>` header followed by one
//! record per token occurrence, `token<TAB>v1 v2 … vd`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingSpace, SpaceMetadata};
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

pub const STREAM_MAGIC: &str = "DECTX";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub dim: usize,
    pub model: String,
}

impl StreamHeader {
    pub fn parse(line: &str) -> Result<Self> {
        let mut parts = line.trim_end_matches(['\r', '\n']).splitn(3, ' ');
        let bad = || Error::record(1, format!("invalid stream header {line:?}"));
        if parts.next() != Some(STREAM_MAGIC) {
            return Err(bad());
        }
        let dim: usize = parts.next().and_then(|d| d.parse().ok()).ok_or_else(bad)?;
        let model = parts.next().unwrap_or("").trim().to_owned();
        if dim == 0 || model.is_empty() {
            return Err(bad());
        }
        Ok(StreamHeader { dim, model })
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{STREAM_MAGIC} {} {}", self.dim, self.model)
    }
}

/// Parse one record line into `(token, vector)`.
pub fn parse_record<T: Scalar>(line: &str, dim: usize) -> std::result::Result<(&str, Vec<T>), String> {
    let (token, values) = line
        .split_once('\t')
        .ok_or_else(|| "missing tab between token and vector".to_owned())?;
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err(format!("invalid token {token:?}"));
    }
    let mut vector = Vec::with_capacity(dim);
    for field in values.split(' ').filter(|f| !f.is_empty()) {
        let v: T = field.parse().map_err(|_| format!("invalid number {field:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite value {field:?}"));
        }
        vector.push(v);
    }
    if vector.len() != dim {
        return Err(format!("{} values, header declares {dim}", vector.len()));
    }
    Ok((token, vector))
}

/// Append one record line.
pub fn write_record<W: Write, T: Scalar>(mut out: W, token: &str, vector: &[T]) -> std::io::Result<()> {
    let values: Vec<String> = vector.iter().map(|v| v.to_string()).collect();
    writeln!(out, "{token}\t{}", values.join(" "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamIssue {
    /// 1-based line number in the file.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamReport {
    pub records: usize,
    pub distinct_tokens: usize,
    pub dim: usize,
    pub model: String,
    pub errors: Vec<StreamIssue>,
}

impl StreamReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Check every record of a stream; only an unreadable header is an error.
pub fn validate_stream(path: &Path) -> Result<StreamReport> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    validate_reader(BufReader::new(file))
}

pub fn validate_reader<R: BufRead>(reader: R) -> Result<StreamReport> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(Ok(line)) => StreamHeader::parse(&line)?,
        Some(Err(e)) => return Err(Error::record(1, e.to_string())),
        None => return Err(Error::record(1, "missing stream header")),
    };
    let mut records = 0;
    let mut tokens = HashSet::new();
    let mut errors = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                errors.push(StreamIssue { line: lineno, message: e.to_string() });
                continue;
            }
        };
        if line.is_empty() {
            continue;
        }
        match parse_record::<f64>(&line, header.dim) {
            Ok((token, _)) => {
                records += 1;
                if !tokens.contains(token) {
                    tokens.insert(token.to_owned());
                }
            }
            Err(message) => errors.push(StreamIssue { line: lineno, message }),
        }
    }
    Ok(StreamReport {
        records,
        distinct_tokens: tokens.len(),
        dim: header.dim,
        model: header.model,
        errors,
    })
}

/// Sum-then-divide accumulator for one token.
#[derive(Debug, Clone)]
struct TokenSum<T> {
    sums: Vec<CompensatedSum<T>>,
    count: u64,
    first: Vec<T>,
    /// Every record so far equals `first`; the mean is then `first` exactly.
    uniform: bool,
}

impl<T: Scalar> TokenSum<T> {
    fn new(vector: &[T]) -> Self {
        let mut sums = vec![CompensatedSum::new(); vector.len()];
        sums.iter_mut().zip(vector).for_each(|(s, &v)| s.add(v));
        Self { sums, count: 1, first: vector.to_vec(), uniform: true }
    }

    fn add(&mut self, vector: &[T]) {
        self.sums.iter_mut().zip(vector).for_each(|(s, &v)| s.add(v));
        self.count += 1;
        self.uniform &= self.first == vector;
    }

    fn merge(&mut self, other: &Self) {
        self.sums.iter_mut().zip(&other.sums).for_each(|(s, o)| s.merge(o));
        self.count += other.count;
        self.uniform &= other.uniform && self.first == other.first;
    }

    fn mean(&self) -> Vec<T> {
        if self.uniform {
            return self.first.clone();
        }
        let n = T::of(self.count as f64);
        self.sums.iter().map(|s| s.value() / n).collect()
    }
}

/// Running per-token vector sums; mergeable across shards.
#[derive(Debug, Clone)]
pub struct PoolAccumulator<T> {
    dim: usize,
    tokens: HashMap<String, TokenSum<T>>,
}

impl<T: Scalar> PoolAccumulator<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, tokens: HashMap::new() }
    }

    pub fn add(&mut self, token: &str, vector: &[T]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: vector.len() });
        }
        if let Some(pos) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite component {pos} in record for {token:?}"
            )));
        }
        match self.tokens.get_mut(token) {
            Some(acc) => acc.add(vector),
            None => {
                self.tokens.insert(token.to_owned(), TokenSum::new(vector));
            }
        }
        Ok(())
    }

    /// Fold another shard into this one.
    pub fn merge(&mut self, other: PoolAccumulator<T>) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: other.dim });
        }
        for (token, acc) in other.tokens {
            match self.tokens.get_mut(&token) {
                Some(mine) => mine.merge(&acc),
                None => {
                    self.tokens.insert(token, acc);
                }
            }
        }
        Ok(())
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.tokens.get(token).map(|t| t.count)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Mean vector per token, tokens in lexicographic order.
    pub fn finish(self, metadata: SpaceMetadata) -> Result<EmbeddingSpace<T>> {
        if self.tokens.is_empty() {
            return Err(Error::InvalidInput("cannot pool an empty stream".into()));
        }
        let sorted: BTreeMap<String, TokenSum<T>> = self.tokens.into_iter().collect();
        EmbeddingSpace::from_rows(sorted.into_iter().map(|(t, acc)| (t, acc.mean())), metadata)
    }
}

/// Single-pass running mean, `m ← m + (x − m) / n`. Kept as an independent
/// route to the same result as [`PoolAccumulator`].
#[derive(Debug, Clone)]
pub struct RunningMean<T> {
    dim: usize,
    tokens: HashMap<String, (Vec<T>, u64)>,
}

impl<T: Scalar> RunningMean<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, tokens: HashMap::new() }
    }

    pub fn add(&mut self, token: &str, vector: &[T]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: vector.len() });
        }
        let (mean, n) = self
            .tokens
            .entry(token.to_owned())
            .or_insert_with(|| (vec![T::zero(); vector.len()], 0));
        *n += 1;
        let inv = T::one() / T::of(*n as f64);
        for (m, &x) in mean.iter_mut().zip(vector) {
            *m += (x - *m) * inv;
        }
        Ok(())
    }

    pub fn finish(self, metadata: SpaceMetadata) -> Result<EmbeddingSpace<T>> {
        if self.tokens.is_empty() {
            return Err(Error::InvalidInput("cannot pool an empty stream".into()));
        }
        let sorted: BTreeMap<String, (Vec<T>, u64)> = self.tokens.into_iter().collect();
        EmbeddingSpace::from_rows(sorted.into_iter().map(|(t, (m, _))| (t, m)), metadata)
    }
}

fn stream_metadata(header: &StreamHeader, source: &str) -> SpaceMetadata {
    SpaceMetadata::new("decontext", format!("model={} context={source}", header.model))
}

/// Pool a stream read from `reader`. Every record must be valid.
pub fn pool_reader<T: Scalar, R: BufRead>(reader: R, source: &str) -> Result<EmbeddingSpace<T>> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => StreamHeader::parse(&line.map_err(|e| Error::record(1, e.to_string()))?)?,
        None => return Err(Error::record(1, "missing stream header")),
    };
    let mut acc = PoolAccumulator::new(header.dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::record(lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let (token, vector) =
            parse_record::<T>(&line, header.dim).map_err(|m| Error::record(lineno, m))?;
        acc.add(token, &vector)?;
    }
    acc.finish(stream_metadata(&header, source))
}

pub fn pool_file<T: Scalar>(path: &Path) -> Result<EmbeddingSpace<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    pool_reader(BufReader::new(file), &path.display().to_string())
}

/// Pool in-memory records, sharded by token hash across rayon workers.
pub fn pool_records<T: Scalar>(
    header: &StreamHeader,
    records: &[(String, Vec<T>)],
    shards: usize,
) -> Result<EmbeddingSpace<T>> {
    use std::hash::{BuildHasher, BuildHasherDefault, DefaultHasher};
    let shards = shards.max(1);
    let hasher = BuildHasherDefault::<DefaultHasher>::default();
    let parts: Vec<PoolAccumulator<T>> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut acc = PoolAccumulator::new(header.dim);
            for (token, vector) in records {
                if hasher.hash_one(token) as usize % shards == shard {
                    acc.add(token, vector)?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = PoolAccumulator::new(header.dim);
    for part in parts {
        total.merge(part)?;
    }
    total.finish(stream_metadata(header, "in-memory records"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(body: &str) -> String {
        format!("DECTX 2 test-model layer=-1\n{body}")
    }

    #[test]
    fn header_parsing() {
        let h = StreamHeader::parse("DECTX 768 bert-base-uncased layer=-1").unwrap();
        assert_eq!(h.dim, 768);
        assert_eq!(h.model, "bert-base-uncased layer=-1");
        assert!(StreamHeader::parse("DECTX x m").is_err());
        assert!(StreamHeader::parse("VEC 3 m").is_err());
        assert!(StreamHeader::parse("DECTX 3").is_err());
    }

    #[test]
    fn validation_counts_and_errors() {
        let ok = validate_reader(stream("a\t1 2\nb\t3 4\na\t0 0\n").as_bytes()).unwrap();
        assert_eq!((ok.records, ok.distinct_tokens, ok.dim), (3, 2, 2));
        assert!(ok.is_valid());

        let bad = "DECTX 4 m\nx\t1 2 3 4\ny\t1 2 3 4 5\n";
        let r = validate_reader(bad.as_bytes()).unwrap();
        assert_eq!(r.records, 1);
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].line, 3);

        let empty = validate_reader("DECTX 4 m\n".as_bytes()).unwrap();
        assert_eq!(empty.records, 0);
        assert!(empty.is_valid());

        assert!(validate_reader("garbage\n".as_bytes()).is_err());
        assert!(validate_reader("".as_bytes()).is_err());
    }

    #[test]
    fn pooling_examples() {
        let s: EmbeddingSpace<f64> = pool_reader(stream("x\t1 2\n").as_bytes(), "t").unwrap();
        assert_eq!(s.get("x").unwrap(), [1.0, 2.0]);

        let s: EmbeddingSpace<f64> =
            pool_reader(stream("x\t1 0\nx\t0 1\ny\t2 2\n").as_bytes(), "t").unwrap();
        assert_eq!(s.get("x").unwrap(), [0.5, 0.5]);
        assert!(s.lookup("z").is_oov());
        assert!(s.metadata().source.contains("test-model"));
    }

    #[test]
    fn pooling_errors() {
        assert!(pool_reader::<f64, _>(stream("").as_bytes(), "t").is_err());
        assert!(matches!(
            pool_reader::<f64, _>(stream("x\t1 2 3\n").as_bytes(), "t"),
            Err(Error::Record { line: 2, .. })
        ));
        let mut acc = PoolAccumulator::<f64>::new(2);
        assert!(acc.add("x", &[1.0]).is_err());
        assert!(acc.merge(PoolAccumulator::new(3)).is_err());
    }

    #[test]
    fn tokens_are_case_sensitive() {
        let s: EmbeddingSpace<f64> =
            pool_reader(stream("Cat\t1 0\ncat\t0 1\n").as_bytes(), "t").unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn write_then_parse_record() {
        let mut buf = Vec::new();
        write_record(&mut buf, "tok", &[0.1f64, -2.5e-7]).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let (t, v) = parse_record::<f64>(line.trim_end(), 2).unwrap();
        assert_eq!(t, "tok");
        assert_eq!(v, [0.1, -2.5e-7]);
    }
}
