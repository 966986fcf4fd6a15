//! Product catalog and review store ingestion.
//!
//! Both inputs are line-delimited JSON. Metadata lines carry
//! `id, title, category_path, brand, os, memory, color, price, also_viewed,
//! description`; review lines carry `id, product_id, text, rating,
//! normalized_text`. Optional keys may be absent.

mod normalize;

pub(crate) use normalize::is_sentence_final;
pub use normalize::normalize_text;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::split_sentences;

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("review {review_id:?} references unknown product {product_id:?}")]
    UnknownProduct { review_id: String, product_id: String },
    #[error("snapshot schema version {found} is not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

/// The four product fields the information-search stage may filter on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchableField {
    Brand,
    Os,
    Memory,
    Color,
}

impl SearchableField {
    /// Fixed question order of the search stage.
    pub const ALL: [SearchableField; 4] = [Self::Brand, Self::Os, Self::Memory, Self::Color];

    pub fn name(self) -> &'static str {
        match self {
            Self::Brand => "brand",
            Self::Os => "os",
            Self::Memory => "memory",
            Self::Color => "color",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub category_path: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub os: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default)]
    pub also_viewed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Product {
    pub fn searchable(&self, field: SearchableField) -> Option<&str> {
        match field {
            SearchableField::Brand => self.brand.as_deref(),
            SearchableField::Os => self.os.as_deref(),
            SearchableField::Memory => self.memory.as_deref(),
            SearchableField::Color => self.color.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub product_id: String,
    pub raw_text: String,
    pub normalized_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<u8>,
}

/// Half-open interval of character (not byte) offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub review_id: String,
    pub ordinal: usize,
    pub span: CharSpan,
    pub text: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Abort on the first malformed record instead of skipping it.
    pub strict: bool,
}

/// Counters collected while reading one input file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub lines_read: usize,
    pub accepted: usize,
    /// `(line, reason)` of every skipped malformed record.
    pub malformed: Vec<(usize, String)>,
    pub self_references_dropped: usize,
    /// `(line, review id)` of reviews whose product is not in the catalog.
    pub orphans: Vec<(usize, String)>,
}

/// Immutable product catalog keyed by product id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProductCatalog {
    products: BTreeMap<String, Product>,
}

impl ProductCatalog {
    /// Builds a catalog, enforcing unique ids and dropping self references
    /// from `also_viewed`. Returns the number of dropped self references.
    pub fn from_products(products: Vec<Product>) -> Result<(Self, usize), CorpusError> {
        let mut map = BTreeMap::new();
        let mut dropped = 0;
        for (i, mut product) in products.into_iter().enumerate() {
            let before = product.also_viewed.len();
            let own = product.id.clone();
            product.also_viewed.retain(|id| *id != own);
            dropped += before - product.also_viewed.len();
            if map.contains_key(&product.id) {
                return Err(CorpusError::DuplicateId { id: product.id, line: i + 1 });
            }
            map.insert(product.id.clone(), product);
        }
        Ok((ProductCatalog { products: map }, dropped))
    }

    pub fn get(&self, id: &str) -> Option<&Product> {
        self.products.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.products.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    /// Products in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Product> {
        self.products.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.products.keys().map(String::as_str)
    }

    /// `also_viewed` of `id`, restricted to products present in the catalog.
    pub fn also_viewed_in_catalog(&self, id: &str) -> BTreeSet<&str> {
        self.get(id)
            .map(|p| p.also_viewed.iter().map(String::as_str).filter(|v| self.contains(v)).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredReview {
    pub review: Review,
    pub sentences: Vec<Sentence>,
}

/// Reviews with their segmented sentences, keyed by review id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReviewStore {
    reviews: BTreeMap<String, StoredReview>,
    by_product: BTreeMap<String, Vec<String>>,
}

impl ReviewStore {
    /// Builds a store from already-normalized reviews. Every review must
    /// reference a catalog product and review ids must be unique.
    pub fn from_reviews(catalog: &ProductCatalog, reviews: Vec<Review>) -> Result<Self, CorpusError> {
        let mut store = ReviewStore::default();
        for (i, review) in reviews.into_iter().enumerate() {
            if !catalog.contains(&review.product_id) {
                return Err(CorpusError::UnknownProduct { review_id: review.id, product_id: review.product_id });
            }
            store.insert(review, i + 1)?;
        }
        Ok(store)
    }

    fn insert(&mut self, review: Review, line: usize) -> Result<(), CorpusError> {
        if self.reviews.contains_key(&review.id) {
            return Err(CorpusError::DuplicateId { id: review.id, line });
        }
        let sentences = split_sentences(&review);
        self.by_product.entry(review.product_id.clone()).or_default().push(review.id.clone());
        self.reviews.insert(review.id.clone(), StoredReview { review, sentences });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn get(&self, review_id: &str) -> Option<&StoredReview> {
        self.reviews.get(review_id)
    }

    pub fn sentence(&self, review_id: &str, ordinal: usize) -> Option<&Sentence> {
        self.reviews.get(review_id)?.sentences.get(ordinal)
    }

    pub fn product_of(&self, review_id: &str) -> Option<&str> {
        self.reviews.get(review_id).map(|r| r.review.product_id.as_str())
    }

    /// Reviews in ascending review-id order.
    pub fn iter(&self) -> impl Iterator<Item = &StoredReview> {
        self.reviews.values()
    }

    pub fn reviews_of(&self, product_id: &str) -> &[String] {
        self.by_product.get(product_id).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaRecord {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    category_path: Vec<String>,
    brand: Option<String>,
    os: Option<String>,
    memory: Option<String>,
    color: Option<String>,
    price: Option<f64>,
    #[serde(default)]
    also_viewed: Vec<String>,
    description: Option<String>,
}

impl MetaRecord {
    fn into_product(self) -> Result<Product, String> {
        if self.id.trim().is_empty() {
            return Err("empty product id".into());
        }
        if let Some(price) = self.price {
            if !price.is_finite() || price < 0.0 {
                return Err(format!("invalid price {price}"));
            }
        }
        Ok(Product {
            id: self.id,
            title: self.title,
            category_path: self.category_path,
            brand: self.brand,
            os: self.os,
            memory: self.memory,
            color: self.color,
            price: self.price,
            also_viewed: self.also_viewed,
            description: self.description,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReviewRecord {
    id: String,
    product_id: String,
    text: String,
    rating: Option<i64>,
    normalized_text: Option<String>,
}

impl ReviewRecord {
    fn into_review(self) -> Result<Review, String> {
        if self.id.trim().is_empty() {
            return Err("empty review id".into());
        }
        let rating = match self.rating {
            None => None,
            Some(r @ 1..=5) => Some(r as u8),
            Some(r) => return Err(format!("rating {r} outside 1..=5")),
        };
        let normalized_text = self.normalized_text.unwrap_or_else(|| normalize_text(&self.text));
        Ok(Review { id: self.id, product_id: self.product_id, raw_text: self.text, normalized_text, rating })
    }
}

/// Iterates non-blank lines as `(1-based line number, text)`.
pub(crate) fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Handles a malformed record according to `options`: an error in strict
/// mode, a report entry otherwise.
pub(crate) fn reject(
    report: &mut IngestReport,
    options: IngestOptions,
    line: usize,
    reason: String,
) -> Result<(), CorpusError> {
    if options.strict {
        return Err(CorpusError::MalformedRecord { line, reason });
    }
    report.malformed.push((line, reason));
    Ok(())
}

pub fn ingest_metadata(path: &Path, options: IngestOptions) -> Result<(ProductCatalog, IngestReport), CorpusError> {
    let mut report = IngestReport::default();
    let mut products = BTreeMap::new();
    for (line, text) in read_lines(path)? {
        report.lines_read += 1;
        let parsed =
            serde_json::from_str::<MetaRecord>(&text).map_err(|e| e.to_string()).and_then(MetaRecord::into_product);
        let mut product = match parsed {
            Ok(p) => p,
            Err(reason) => {
                reject(&mut report, options, line, reason)?;
                continue;
            }
        };
        if products.contains_key(&product.id) {
            return Err(CorpusError::DuplicateId { id: product.id, line });
        }
        let before = product.also_viewed.len();
        let own = product.id.clone();
        product.also_viewed.retain(|id| *id != own);
        report.self_references_dropped += before - product.also_viewed.len();
        report.accepted += 1;
        products.insert(product.id.clone(), product);
    }
    Ok((ProductCatalog { products }, report))
}

pub fn ingest_reviews(
    path: &Path,
    catalog: &ProductCatalog,
    options: IngestOptions,
) -> Result<(ReviewStore, IngestReport), CorpusError> {
    let mut report = IngestReport::default();
    let mut store = ReviewStore::default();
    for (line, text) in read_lines(path)? {
        report.lines_read += 1;
        let parsed =
            serde_json::from_str::<ReviewRecord>(&text).map_err(|e| e.to_string()).and_then(ReviewRecord::into_review);
        let review = match parsed {
            Ok(r) => r,
            Err(reason) => {
                reject(&mut report, options, line, reason)?;
                continue;
            }
        };
        if !catalog.contains(&review.product_id) {
            report.orphans.push((line, review.id));
            continue;
        }
        store.insert(review, line)?;
        report.accepted += 1;
    }
    Ok((store, report))
}

/// Serialized form of an ingested corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSnapshot {
    pub schema_version: u32,
    pub products: Vec<Product>,
    pub reviews: Vec<Review>,
}

impl CorpusSnapshot {
    pub fn from_parts(catalog: &ProductCatalog, store: &ReviewStore) -> Self {
        CorpusSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            products: catalog.iter().cloned().collect(),
            reviews: store.iter().map(|r| r.review.clone()).collect(),
        }
    }

    pub fn into_parts(self) -> Result<(ProductCatalog, ReviewStore), CorpusError> {
        if self.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(CorpusError::SnapshotVersion { found: self.schema_version, expected: SNAPSHOT_SCHEMA_VERSION });
        }
        let (catalog, _) = ProductCatalog::from_products(self.products)?;
        let store = ReviewStore::from_reviews(&catalog, self.reviews)?;
        Ok((catalog, store))
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer(&mut writer, self).map_err(|e| CorpusError::io(path, e.into()))?;
        writer.write_all(b"\n").and_then(|_| writer.flush()).map_err(|e| CorpusError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| CorpusError::MalformedRecord { line: e.line(), reason: e.to_string() })
    }
}
