//! Offline corpus loading, source-level bias classification and pool
//! building.
//!
//! Corpus files hold one JSON object per line:
//!
//! ```text
//! {"id":"a1","title":"...","url":"https://...","source_domain":"example.com","rating":12.5,"published_at":"2018-05-01T12:00:00Z"}
//! ```
//!
//! `rating` is optional and defaults to 0. Bias mapping files are CSV with a
//! required `source_domain,type_name` header; lines starting with `#` are
//! comments, and an optional `# bias-map-version: 1` comment pins the format.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use balanced_news_core::{Article, Pools, TypeIndex, TypeLabels};
use chrono::DateTime;
use serde::{Deserialize, Serialize};

pub const BIAS_MAP_VERSION: u32 = 1;
const VERSION_PREFIX: &str = "bias-map-version:";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("bias map: {0}")]
    BiasMap(String),
    #[error("bias map line {line}: type {name:?} is not one of the configured types")]
    UnknownType { name: String, line: u64 },
    #[error("bias map line {line}: duplicate domain {domain:?}")]
    DuplicateDomain { domain: String, line: u64 },
    #[error("unsupported bias map version {0}")]
    UnsupportedVersion(String),
}

/// An article as read from the corpus, before classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub title: String,
    pub url: String,
    pub source_domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    pub published_at: String,
}

impl CorpusRecord {
    fn validate(&self) -> Result<i64, String> {
        for (field, value) in [
            ("id", &self.id),
            ("title", &self.title),
            ("url", &self.url),
            ("source_domain", &self.source_domain),
        ] {
            if value.trim().is_empty() {
                return Err(format!("empty {field}"));
            }
        }
        if let Some(r) = self.rating {
            if !r.is_finite() || r < 0.0 {
                return Err(format!("rating must be a non-negative number, got {r}"));
            }
        }
        DateTime::parse_from_rfc3339(&self.published_at)
            .map(|ts| ts.timestamp())
            .map_err(|e| format!("published_at {:?}: {e}", self.published_at))
    }
}

/// A skipped input line and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineWarning {
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for LineWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub records: Vec<CorpusRecord>,
    pub malformed: Vec<LineWarning>,
}

impl LoadedCorpus {
    /// Non-blank lines seen.
    pub fn loaded(&self) -> usize {
        self.records.len() + self.malformed.len()
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus, IngestError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(file).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses line-delimited records. Blank lines are ignored; lines that fail
/// to parse or validate (including repeated ids) are skipped and reported.
pub fn parse_corpus(reader: impl Read) -> io::Result<LoadedCorpus> {
    let mut out = LoadedCorpus::default();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<CorpusRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|record| record.validate().map(|_| record))
            .and_then(|record| {
                if ids.insert(record.id.clone()) {
                    Ok(record)
                } else {
                    Err(format!("duplicate id {:?}", record.id))
                }
            });
        match parsed {
            Ok(record) => out.records.push(record),
            Err(reason) => out.malformed.push(LineWarning {
                line: line_no,
                reason,
            }),
        }
    }
    Ok(out)
}

/// Lowercases, drops any `scheme://`, anything after the host, and one
/// leading `www.`.
pub fn normalize_domain(raw: &str) -> String {
    let lower = raw.trim().to_ascii_lowercase();
    let without_scheme = lower.split_once("://").map_or(lower.as_str(), |(_, rest)| rest);
    let host = without_scheme.split('/').next().unwrap_or_default();
    host.strip_prefix("www.").unwrap_or(host).to_string()
}

/// Static snapshot of source-level bias ratings: normalized domain to type.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BiasMapping {
    entries: BTreeMap<String, TypeIndex>,
}

impl BiasMapping {
    pub fn load(path: impl AsRef<Path>, labels: &TypeLabels) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, labels)
    }

    pub fn parse(text: &str, labels: &TypeLabels) -> Result<Self, IngestError> {
        for line in text.lines() {
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                if let Some(version) = comment.trim().strip_prefix(VERSION_PREFIX) {
                    let version = version.trim();
                    if version.parse::<u32>().ok() != Some(BIAS_MAP_VERSION) {
                        return Err(IngestError::UnsupportedVersion(version.to_string()));
                    }
                }
            }
        }

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| IngestError::BiasMap(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "source_domain" || &headers[1] != "type_name" {
            return Err(IngestError::BiasMap(format!(
                "expected header `source_domain,type_name`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut entries = BTreeMap::new();
        for row in reader.records() {
            let row = row.map_err(|e| IngestError::BiasMap(e.to_string()))?;
            let line = row.position().map_or(0, |p| p.line());
            let domain = normalize_domain(&row[0]);
            let name = &row[1];
            let index = labels.index_of(name).ok_or_else(|| IngestError::UnknownType {
                name: name.to_string(),
                line,
            })?;
            if domain.is_empty() {
                return Err(IngestError::BiasMap(format!("line {line}: empty domain")));
            }
            if entries.insert(domain.clone(), index).is_some() {
                return Err(IngestError::DuplicateDomain { domain, line });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, TypeIndex)>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|(d, t)| (normalize_domain(&d), t))
                .collect(),
        }
    }

    pub fn lookup(&self, source_domain: &str) -> Option<TypeIndex> {
        self.entries.get(&normalize_domain(source_domain)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Types a record from its source domain. `None` when the domain is not
/// mapped or the record does not validate.
pub fn classify(record: &CorpusRecord, map: &BiasMapping) -> Option<Article> {
    let type_index = map.lookup(&record.source_domain)?;
    let published_at = record.validate().ok()?;
    Some(Article {
        id: record.id.clone(),
        title: record.title.clone(),
        url: record.url.clone(),
        source_domain: normalize_domain(&record.source_domain),
        type_index,
        rating: record.rating.unwrap_or(0.0),
        published_at,
    })
}

/// One popularity-ordered pool per type.
pub fn build_pools(labels: &TypeLabels, articles: impl IntoIterator<Item = Article>) -> Pools {
    Pools::from_articles(labels.len(), articles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct IngestSummary {
    pub loaded: usize,
    pub classified: usize,
    pub skipped_unmapped: usize,
    pub skipped_malformed: usize,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "loaded={} classified={} skipped_unmapped={} skipped_malformed={}",
            self.loaded, self.classified, self.skipped_unmapped, self.skipped_malformed
        )
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub pools: Pools,
    pub summary: IngestSummary,
    pub malformed: Vec<LineWarning>,
    /// Unmapped domain to number of skipped records.
    pub unmapped: BTreeMap<String, usize>,
}

pub fn classify_corpus(corpus: LoadedCorpus, map: &BiasMapping, labels: &TypeLabels) -> Ingested {
    let loaded = corpus.loaded();
    let mut unmapped = BTreeMap::new();
    let mut articles = Vec::with_capacity(corpus.records.len());
    for record in &corpus.records {
        match classify(record, map) {
            Some(article) => articles.push(article),
            None => *unmapped.entry(normalize_domain(&record.source_domain)).or_insert(0) += 1,
        }
    }
    let summary = IngestSummary {
        loaded,
        classified: articles.len(),
        skipped_unmapped: unmapped.values().sum(),
        skipped_malformed: corpus.malformed.len(),
    };
    Ingested {
        pools: build_pools(labels, articles),
        summary,
        malformed: corpus.malformed,
        unmapped,
    }
}

/// Loads the corpus and bias map and builds pools.
pub fn ingest(
    corpus_path: impl AsRef<Path>,
    bias_map_path: impl AsRef<Path>,
    labels: &TypeLabels,
) -> Result<Ingested, IngestError> {
    let map = BiasMapping::load(bias_map_path, labels)?;
    let corpus = load_corpus(corpus_path)?;
    Ok(classify_corpus(corpus, &map, labels))
}

/// Deterministic stand-in corpus: `per_type` articles for each type, with
/// strictly decreasing popularity. Content depends only on the type's
/// position, so reordering the labels reorders the pools and nothing else.
pub fn synthetic_pools(labels: &TypeLabels, per_type: usize) -> Pools {
    let articles = labels.indices().flat_map(|g| {
        let name = labels.name(g).unwrap_or_default().to_string();
        (0..per_type).map(move |i| Article {
            id: format!("{name}-{i:05}"),
            title: format!("{name} story {i}"),
            url: format!("https://{name}.example/story/{i}"),
            source_domain: format!("{name}.example"),
            type_index: g,
            rating: (per_type - i) as f64,
            published_at: 1_525_132_800 - 60 * i as i64,
        })
    });
    Pools::from_articles(labels.len(), articles)
}

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("no live source configured")]
    Unconfigured,
    #[error("source transport error: {0}")]
    Transport(String),
}

/// A live article search backend.
pub trait LiveSource {
    fn search(&self, query: &str) -> Result<Vec<CorpusRecord>, SourceError>;
}

/// Offline source: case-insensitive substring match on titles.
#[derive(Debug, Clone, Default)]
pub struct StubSource {
    records: Vec<CorpusRecord>,
}

impl StubSource {
    pub fn new(records: Vec<CorpusRecord>) -> Self {
        Self { records }
    }
}

impl LiveSource for StubSource {
    fn search(&self, query: &str) -> Result<Vec<CorpusRecord>, SourceError> {
        let needle = query.to_lowercase();
        Ok(self
            .records
            .iter()
            .filter(|r| r.title.to_lowercase().contains(&needle))
            .cloned()
            .collect())
    }
}

pub fn fetch_live(query: &str, source: Option<&dyn LiveSource>) -> Result<Vec<CorpusRecord>, SourceError> {
    source.ok_or(SourceError::Unconfigured)?.search(query)
}
