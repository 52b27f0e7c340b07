//! Article collections: ingestion, slicing by orientation and year,
//! tokenization and vocabulary construction.

mod article;
mod tokenize;
mod vocab;

pub use article::{parse_year, Article, Orientation, SubLabel};
pub use tokenize::{tokenize, TokenizeConfig};
pub use vocab::{VocabPolicy, Vocabulary, UNK};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use article::{ArticleRecord, DateField};

/// File name of the normalized article list inside a corpus directory.
pub const ARTICLES_FILE: &str = "articles.jsonl";
pub const REPORT_FILE: &str = "ingest_report.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ErrorMode {
    /// Abort on the first malformed record.
    FailFast,
    /// Skip malformed records and list them in the report.
    #[default]
    SkipAndReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub loaded: usize,
    pub rejected: usize,
    /// Articles kept without a year, whether the date was missing or unparseable.
    pub no_date: usize,
    pub unparseable_dates: usize,
    /// Articles whose text exactly matches an earlier article.
    pub duplicate_texts: usize,
    pub errors: Vec<RecordError>,
}

/// An immutable, ordered collection of articles with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    articles: Vec<Article>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_articles(articles: Vec<Article>) -> Result<Self> {
        let mut index = HashMap::with_capacity(articles.len());
        for (i, a) in articles.iter().enumerate() {
            a.validate()?;
            if index.insert(a.id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate article id {:?}", a.id)));
            }
        }
        Ok(Corpus { articles, index })
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.index.get(id).map(|&i| &self.articles[i])
    }

    /// Number of articles with an exact-text duplicate earlier in the corpus.
    pub fn duplicate_text_count(&self) -> usize {
        let mut seen = HashSet::with_capacity(self.articles.len());
        self.articles
            .iter()
            .filter(|a| !seen.insert(a.text.as_str()))
            .count()
    }

    /// Article counts per orientation and year; `None` collects undated articles.
    pub fn year_counts(&self) -> BTreeMap<Orientation, BTreeMap<Option<i32>, usize>> {
        let mut table: BTreeMap<Orientation, BTreeMap<Option<i32>, usize>> = BTreeMap::new();
        for a in &self.articles {
            *table.entry(a.orientation).or_default().entry(a.year).or_default() += 1;
        }
        table
    }

    pub fn dated_count(&self) -> usize {
        self.articles.iter().filter(|a| a.year.is_some()).count()
    }

    /// Every article exactly once, in corpus order.
    pub fn all(&self) -> CorpusView<'_> {
        self.slice(&SliceFilter::default())
    }

    pub fn slice(&self, filter: &SliceFilter) -> CorpusView<'_> {
        let indices = self
            .articles
            .iter()
            .enumerate()
            .filter(|(_, a)| filter.matches(a))
            .map(|(i, _)| i)
            .collect();
        CorpusView {
            corpus: self,
            indices,
            filter: filter.clone(),
        }
    }

    /// Write the normalized corpus as `articles.jsonl` (plus the report, if
    /// given) into `dir`.
    pub fn save_dir(&self, dir: &Path, report: Option<&IngestReport>) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(ARTICLES_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for a in &self.articles {
            let record = NormalizedRecord {
                id: &a.id,
                text: &a.text,
                outlet: &a.outlet,
                orientation: a.orientation.as_str(),
                sub_label: a.sub_label.map(SubLabel::as_str),
                date: a.year.map(|y| format!("{y:04}")),
                language: &a.language,
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        if let Some(report) = report {
            let path = dir.join(REPORT_FILE);
            let json = serde_json::to_string_pretty(report)?;
            fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Load a corpus from an article file or a directory holding `articles.jsonl`.
    pub fn open(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join(ARTICLES_FILE)
        } else {
            path.to_path_buf()
        };
        let (corpus, _) = ingest(&file, ErrorMode::FailFast)?;
        Ok(corpus)
    }
}

#[derive(Serialize)]
struct NormalizedRecord<'a> {
    id: &'a str,
    text: &'a str,
    outlet: &'a str,
    orientation: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    sub_label: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    date: Option<String>,
    language: &'a str,
}

/// Load line-delimited article records.
pub fn ingest(path: &Path, mode: ErrorMode) -> Result<(Corpus, IngestReport)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ingest_str(&content, mode)
}

pub fn ingest_str(content: &str, mode: ErrorMode) -> Result<(Corpus, IngestReport)> {
    let lines: Vec<(usize, &str)> = content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let parsed: Vec<(usize, Result<(Article, DateField)>)> = lines
        .par_iter()
        .map(|&(line, text)| {
            let result = serde_json::from_str::<ArticleRecord>(text)
                .map_err(|e| Error::record(line, e.to_string()))
                .and_then(|rec| rec.into_article(line));
            (line, result)
        })
        .collect();

    let mut report = IngestReport::default();
    let mut articles = Vec::with_capacity(parsed.len());
    let mut index = HashMap::with_capacity(parsed.len());
    for (line, result) in parsed {
        let result = result.and_then(|(article, date)| {
            if index.contains_key(&article.id) {
                Err(Error::record(line, format!("duplicate article id {:?}", article.id)))
            } else {
                Ok((article, date))
            }
        });
        match result {
            Ok((article, date)) => {
                match date {
                    DateField::Year(_) => {}
                    DateField::Missing => report.no_date += 1,
                    DateField::Unparseable => {
                        report.no_date += 1;
                        report.unparseable_dates += 1;
                    }
                }
                index.insert(article.id.clone(), articles.len());
                articles.push(article);
            }
            Err(err) => {
                if mode == ErrorMode::FailFast {
                    return Err(err);
                }
                let message = match &err {
                    Error::Record { message, .. } => message.clone(),
                    other => other.to_string(),
                };
                report.errors.push(RecordError { line, message });
                report.rejected += 1;
            }
        }
    }
    report.loaded = articles.len();
    let corpus = Corpus { articles, index };
    report.duplicate_texts = corpus.duplicate_text_count();
    Ok((corpus, report))
}

/// Orientation and year restrictions for a view. `None` means unrestricted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SliceFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientations: Option<BTreeSet<Orientation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub years: Option<BTreeSet<i32>>,
}

impl SliceFilter {
    pub fn new(
        orientations: impl IntoIterator<Item = Orientation>,
        years: impl IntoIterator<Item = i32>,
    ) -> Self {
        let orientations: BTreeSet<_> = orientations.into_iter().collect();
        let years: BTreeSet<_> = years.into_iter().collect();
        SliceFilter {
            orientations: (!orientations.is_empty()).then_some(orientations),
            years: (!years.is_empty()).then_some(years),
        }
    }

    pub fn orientation(orientation: Orientation) -> Self {
        Self::new([orientation], [])
    }

    /// Articles without a year never match a filter that restricts years.
    pub fn matches(&self, article: &Article) -> bool {
        let orientation_ok = self
            .orientations
            .as_ref()
            .is_none_or(|set| set.contains(&article.orientation));
        let year_ok = match (&self.years, article.year) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(set), Some(y)) => set.contains(&y),
        };
        orientation_ok && year_ok
    }
}

impl fmt::Display for SliceFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(o) = &self.orientations {
            let names: Vec<_> = o.iter().map(|o| o.as_str()).collect();
            parts.push(format!("orientation={}", names.join("|")));
        }
        if let Some(y) = &self.years {
            let years: Vec<_> = y.iter().map(|y| y.to_string()).collect();
            parts.push(format!("year={}", years.join("|")));
        }
        if parts.is_empty() {
            f.write_str("all")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// Parses `all`, or comma-separated `orientation=a|b` and `year=2010..2012|2015`
/// clauses.
impl FromStr for SliceFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut filter = SliceFilter::default();
        if s.is_empty() || s == "all" {
            return Ok(filter);
        }
        for clause in s.split(',') {
            let (key, value) = clause.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("slice clause {clause:?} is not key=value"))
            })?;
            match key.trim() {
                "orientation" => {
                    let set = value
                        .split('|')
                        .map(str::parse)
                        .collect::<Result<BTreeSet<Orientation>>>()?;
                    filter.orientations = Some(set);
                }
                "year" => {
                    let mut set = BTreeSet::new();
                    for part in value.split('|') {
                        let parse = |y: &str| {
                            y.trim().parse::<i32>().map_err(|_| {
                                Error::InvalidInput(format!("invalid year {y:?}"))
                            })
                        };
                        match part.split_once("..") {
                            Some((from, to)) => set.extend(parse(from)?..=parse(to)?),
                            None => {
                                set.insert(parse(part)?);
                            }
                        }
                    }
                    filter.years = Some(set);
                }
                other => {
                    return Err(Error::InvalidInput(format!("unknown slice key {other:?}")))
                }
            }
        }
        Ok(filter)
    }
}

/// An ordered, duplicate-free selection of articles from a parent corpus.
#[derive(Debug, Clone)]
pub struct CorpusView<'a> {
    corpus: &'a Corpus,
    indices: Vec<usize>,
    filter: SliceFilter,
}

impl<'a> CorpusView<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn filter(&self) -> &SliceFilter {
        &self.filter
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn articles(&self) -> impl Iterator<Item = &'a Article> + '_ {
        self.indices.iter().map(|&i| &self.corpus.articles[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = &'a str> + '_ {
        self.articles().map(|a| a.id.as_str())
    }

    /// Tokenized sentences of every article, in view order.
    pub fn sentences(&self, config: &TokenizeConfig) -> Vec<Vec<String>> {
        self.indices
            .par_iter()
            .map(|&i| tokenize(&self.corpus.articles[i].text, config))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    pub fn token_counts(&self, config: &TokenizeConfig) -> HashMap<String, u64> {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for sentence in self.sentences(config) {
            for token in sentence {
                *counts.entry(token).or_default() += 1;
            }
        }
        counts
    }

    /// Stable digest of the filter and the selected article ids.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.filter.to_string().as_bytes());
        for id in self.ids() {
            hasher.update([0u8]);
            hasher.update(id.as_bytes());
        }
        hex_digest(hasher)
    }

    /// Write one pre-tokenized sentence per line.
    pub fn export_sentences(&self, path: &Path, config: &TokenizeConfig) -> Result<usize> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let sentences = self.sentences(config);
        for s in &sentences {
            writeln!(out, "{}", s.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(sentences.len())
    }
}

pub(crate) fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Build a vocabulary over every token the tokenizer emits for `view`.
pub fn build_vocab(
    view: &CorpusView<'_>,
    policy: VocabPolicy,
    config: &TokenizeConfig,
) -> Result<Vocabulary> {
    if view.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build a vocabulary from an empty view".into(),
        ));
    }
    Vocabulary::from_counts(view.token_counts(config), policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(id: usize, orientation: Orientation, year: Option<i32>) -> Article {
        Article::new(format!("a{id}"), format!("text {id}."), "o", orientation, year).unwrap()
    }

    #[test]
    fn minimal_record() {
        let (c, r) =
            ingest_str(r#"{"text":"a b","outlet":"x","orientation":"left"}"#, ErrorMode::FailFast)
                .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.articles()[0].orientation, Orientation::Liberal);
        assert_eq!(r.loaded, 1);
        assert_eq!(r.no_date, 1);
    }

    #[test]
    fn unparseable_date_goes_to_no_date_bucket() {
        let input = r#"{"id":"1","text":"x","orientation":"neutral","date":"not-a-date"}
{"id":"2","text":"y","orientation":"neutral","date":"2012-05-01"}"#;
        let (c, r) = ingest_str(input, ErrorMode::FailFast).unwrap();
        assert_eq!(c.get("1").unwrap().year, None);
        assert_eq!(c.get("2").unwrap().year, Some(2012));
        assert_eq!(r.no_date, 1);
        assert_eq!(r.unparseable_dates, 1);
        assert_eq!(c.year_counts()[&Orientation::Neutral][&None], 1);
    }

    #[test]
    fn empty_input_is_an_empty_corpus() {
        let (c, r) = ingest_str("", ErrorMode::FailFast).unwrap();
        assert!(c.is_empty());
        assert_eq!(r, IngestReport::default());
    }

    #[test]
    fn malformed_lines_fail_fast_or_are_reported() {
        let input = "{\"text\":\"ok\",\"orientation\":\"left\"}\n{bad json\n{\"text\":\"x\",\"orientation\":\"sideways\"}\n";
        match ingest_str(input, ErrorMode::FailFast) {
            Err(Error::Record { line: 2, .. }) => {}
            other => panic!("expected record error at line 2, got {other:?}"),
        }
        let (c, r) = ingest_str(input, ErrorMode::SkipAndReport).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(r.rejected, 2);
        let lines: Vec<_> = r.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, [2, 3]);
    }

    #[test]
    fn duplicate_ids_are_rejected_and_texts_counted() {
        let input = r#"{"id":"1","text":"same","orientation":"left"}
{"id":"1","text":"other","orientation":"left"}
{"id":"2","text":"same","orientation":"right"}"#;
        let (c, r) = ingest_str(input, ErrorMode::SkipAndReport).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(r.rejected, 1);
        assert_eq!(r.duplicate_texts, 1);
    }

    #[test]
    fn orientation_slice_counts() {
        let mut articles = Vec::new();
        for i in 0..10 {
            let o = match i {
                0..=2 => Orientation::Conservative,
                3..=5 => Orientation::Neutral,
                _ => Orientation::Liberal,
            };
            articles.push(article(i, o, Some(2010 + i as i32 % 3)));
        }
        let corpus = Corpus::from_articles(articles).unwrap();
        let cons = corpus.slice(&SliceFilter::orientation(Orientation::Conservative));
        assert_eq!(cons.len(), 3);
        assert!(corpus.slice(&SliceFilter::new([], [1990])).is_empty());
        assert_eq!(corpus.all().len(), 10);
    }

    #[test]
    fn year_filter_excludes_undated() {
        let corpus = Corpus::from_articles(vec![
            article(0, Orientation::Liberal, None),
            article(1, Orientation::Liberal, Some(2015)),
        ])
        .unwrap();
        let ids: Vec<_> = corpus.slice(&SliceFilter::new([], [2015])).ids().collect();
        assert_eq!(ids, ["a1"]);
    }

    #[test]
    fn filter_syntax_round_trips() {
        let f: SliceFilter = "orientation=liberal|conservative,year=2010..2012|2015"
            .parse()
            .unwrap();
        assert_eq!(f.years.as_ref().unwrap().len(), 4);
        assert_eq!(f.to_string(), "orientation=liberal|conservative,year=2010|2011|2012|2015");
        assert_eq!(f.to_string().parse::<SliceFilter>().unwrap(), f);
        assert_eq!("all".parse::<SliceFilter>().unwrap(), SliceFilter::default());
        assert!("colour=red".parse::<SliceFilter>().is_err());
    }

    #[test]
    fn vocab_counts_match_tokenizer_output() {
        let corpus = Corpus::from_articles(vec![
            Article::new("1", "The cat sat. The dog ran!", "o", Orientation::Liberal, None).unwrap(),
            Article::new("2", "A cat, a hat.", "o", Orientation::Liberal, None).unwrap(),
        ])
        .unwrap();
        let cfg = TokenizeConfig::default();
        let view = corpus.all();
        let vocab = build_vocab(&view, VocabPolicy::MinCount(2), &cfg).unwrap();
        let emitted: usize = view.sentences(&cfg).iter().map(Vec::len).sum();
        assert_eq!(vocab.total() as usize, emitted);
        assert_eq!(vocab.tokens(), [UNK, "a", "cat", "the"]);
        assert_eq!(build_vocab(&view, VocabPolicy::MinCount(2), &cfg).unwrap(), vocab);
    }

    #[test]
    fn empty_view_has_no_vocabulary() {
        let corpus = Corpus::default();
        assert!(build_vocab(&corpus.all(), VocabPolicy::default(), &TokenizeConfig::default())
            .is_err());
    }

    #[test]
    fn save_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::from_articles(vec![
            article(0, Orientation::Liberal, None),
            article(1, Orientation::Conservative, Some(2020))
                .with_sub_label(SubLabel::Right)
                .unwrap(),
        ])
        .unwrap();
        corpus.save_dir(dir.path(), None).unwrap();
        let back = Corpus::open(dir.path()).unwrap();
        assert_eq!(back.articles(), corpus.articles());
    }
}
