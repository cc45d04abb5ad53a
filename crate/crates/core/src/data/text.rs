use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GraftError, Result};

/// Text source. The order fixes the gate and attribution column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    News,
    Reddit,
    Policy,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::News, Source::Reddit, Source::Policy];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Source::News => "news",
            Source::Reddit => "reddit",
            Source::Policy => "policy",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = GraftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "news" => Ok(Source::News),
            "reddit" => Ok(Source::Reddit),
            "policy" => Ok(Source::Policy),
            other => Err(GraftError::Input(format!("unknown source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegionTag {
    National,
    Region(String),
}

impl RegionTag {
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("NATIONAL") {
            RegionTag::National
        } else {
            RegionTag::Region(s.to_string())
        }
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionTag::National => f.write_str("NATIONAL"),
            RegionTag::Region(r) => f.write_str(r),
        }
    }
}

/// One document after embedding. Relevance defaults to 1, which makes both
/// aggregation rules uniform.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentRecord {
    pub source: Source,
    pub region: RegionTag,
    pub publish_date: NaiveDate,
    pub relevance: f64,
    embedding: Vec<f64>,
}

impl DocumentRecord {
    /// Unit-normalizes `embedding` (already-unit vectors are kept bit-exact). Zero or non-finite vectors and negative
    /// relevance are input errors.
    pub fn new(
        source: Source,
        region: RegionTag,
        publish_date: NaiveDate,
        relevance: f64,
        embedding: Vec<f64>,
    ) -> Result<Self> {
        if !(relevance >= 0.0 && relevance.is_finite()) {
            return Err(GraftError::Input(format!("relevance must be finite and ≥ 0, got {relevance}")));
        }
        if embedding.is_empty() || embedding.iter().any(|v| !v.is_finite()) {
            return Err(GraftError::Input("embedding must be nonempty and finite".into()));
        }
        let norm = embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(GraftError::Input("zero embedding".into()));
        }
        let embedding = if (norm - 1.0).abs() < 1e-12 {
            embedding
        } else {
            embedding.into_iter().map(|v| v / norm).collect()
        };
        Ok(Self {
            source,
            region,
            publish_date,
            relevance,
            embedding,
        })
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub fn dim(&self) -> usize {
        self.embedding.len()
    }
}

/// Deterministic signed feature hashing into `dim` buckets, L2-normalized.
/// Returns `None` when there is no signal (no tokens, or all collisions
/// cancel), which callers record as mask 0.
pub fn encode_document_fallback(tokens: &[&str], dim: usize) -> Result<Option<Vec<f64>>> {
    if dim == 0 {
        return Err(GraftError::Config("embedding dim must be ≥ 1".into()));
    }
    let mut v = vec![0.0; dim];
    for tok in tokens {
        let h = Sha256::digest(tok.as_bytes());
        let bucket = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) % dim as u64;
        let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[bucket as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(None);
    }
    Ok(Some(v.into_iter().map(|x| x / norm).collect()))
}

/// Splits a unified embedding into `n` equal contiguous slices of width
/// `floor(len / n)`; the remainder is dropped.
pub fn evenly_slice(v: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    let w = v.len() / n.max(1);
    if n == 0 || w == 0 {
        return Err(GraftError::Dimension(format!("cannot slice {} dims into {n} parts", v.len())));
    }
    Ok((0..n).map(|i| v[i * w..(i + 1) * w].to_vec()).collect())
}

/// One `(source, region, day)` memory entry. `vector` is all zeros when
/// `mask` is false and must not be read as signal.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyEntry {
    pub vector: Vec<f64>,
    pub mask: bool,
}

impl DailyEntry {
    pub fn empty(dim: usize) -> Self {
        Self {
            vector: vec![0.0; dim],
            mask: false,
        }
    }

    /// The vector if the mask is set.
    pub fn signal(&self) -> Option<&[f64]> {
        self.mask.then_some(self.vector.as_slice())
    }
}

fn weighted_sum(docs: &[&DocumentRecord], weights: &[f64]) -> Vec<f64> {
    let dim = docs[0].dim();
    let mut x = vec![0.0; dim];
    for (d, w) in docs.iter().zip(weights) {
        for (xi, e) in x.iter_mut().zip(d.embedding()) {
            *xi += w * e;
        }
    }
    x
}

fn check_dims(docs: &[&DocumentRecord], dim: usize) -> Result<()> {
    match docs.iter().find(|d| d.dim() != dim) {
        Some(d) => Err(GraftError::Dimension(format!(
            "document embedding has {} dims, store uses {dim}",
            d.dim()
        ))),
        None => Ok(()),
    }
}

/// Same-day aggregation with softmax-normalized relevance weights.
pub fn aggregate_daily(docs: &[&DocumentRecord], dim: usize) -> Result<DailyEntry> {
    if docs.is_empty() {
        return Ok(DailyEntry::empty(dim));
    }
    check_dims(docs, dim)?;
    if let Some(d) = docs.iter().find(|d| d.relevance < 0.0) {
        return Err(GraftError::Input(format!("negative relevance {}", d.relevance)));
    }
    let m = docs.iter().map(|d| d.relevance).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = docs.iter().map(|d| (d.relevance - m).exp()).collect();
    let z: f64 = e.iter().sum();
    let w: Vec<f64> = e.iter().map(|v| v / z).collect();
    Ok(DailyEntry {
        vector: weighted_sum(docs, &w),
        mask: true,
    })
}

/// Exponential validity decay for policy documents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecay {
    /// Per-day decay factor in (0, 1].
    pub rho: f64,
    /// Documents older than this many days never contribute.
    pub horizon_days: i64,
    /// Contributions whose decay factor falls below this are dropped.
    pub min_factor: f64,
}

impl Default for PolicyDecay {
    fn default() -> Self {
        Self {
            rho: 0.97,
            horizon_days: 60,
            min_factor: 1e-4,
        }
    }
}

impl PolicyDecay {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(GraftError::Config(format!("policy decay rho {} outside (0, 1]", self.rho)));
        }
        if self.horizon_days < 0 {
            return Err(GraftError::Config("policy horizon must be ≥ 0 days".into()));
        }
        Ok(())
    }
}

/// Policy memory on `day`: weights `∝ relevance · ρ^age`, normalized. If every
/// contributing document has zero relevance the weights fall back to the
/// decay factors alone.
pub fn aggregate_policy(
    docs: &[&DocumentRecord],
    day: NaiveDate,
    decay: &PolicyDecay,
    dim: usize,
) -> Result<DailyEntry> {
    decay.validate()?;
    check_dims(docs, dim)?;
    if let Some(d) = docs.iter().find(|d| d.publish_date > day) {
        return Err(GraftError::Input(format!(
            "policy document published {} after aggregation day {day}",
            d.publish_date
        )));
    }
    let mut live = Vec::new();
    let mut factors = Vec::new();
    for d in docs {
        let age = (day - d.publish_date).num_days();
        let f = decay.rho.powi(age as i32);
        if age <= decay.horizon_days && f >= decay.min_factor {
            live.push(*d);
            factors.push(f);
        }
    }
    if live.is_empty() {
        return Ok(DailyEntry::empty(dim));
    }
    let mut w: Vec<f64> = live.iter().zip(&factors).map(|(d, f)| d.relevance * f).collect();
    if w.iter().sum::<f64>() == 0.0 {
        w = factors;
    }
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    Ok(DailyEntry {
        vector: weighted_sum(&live, &w),
        mask: true,
    })
}

/// Regions a document is routed to, or `None` for an unknown tag.
pub fn map_region(doc: &DocumentRecord, regions: &[String]) -> Option<Vec<String>> {
    match &doc.region {
        RegionTag::National => Some(regions.to_vec()),
        RegionTag::Region(r) if regions.contains(r) => Some(vec![r.clone()]),
        RegionTag::Region(_) => None,
    }
}

/// Masked daily memories keyed by `(source, region, day)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MemoryStore {
    dim: usize,
    entries: BTreeMap<(Source, String, NaiveDate), DailyEntry>,
}

impl MemoryStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, source: Source, region: &str, day: NaiveDate, entry: DailyEntry) -> Result<()> {
        if entry.vector.len() != self.dim {
            return Err(GraftError::Dimension(format!(
                "entry has {} dims, store uses {}",
                entry.vector.len(),
                self.dim
            )));
        }
        self.entries.insert((source, region.to_string(), day), entry);
        Ok(())
    }

    pub fn get(&self, source: Source, region: &str, day: NaiveDate) -> Option<&DailyEntry> {
        self.entries.get(&(source, region.to_string(), day))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Source, String, NaiveDate), &DailyEntry)> {
        self.entries.iter()
    }

    /// Removes every entry of `source`.
    pub fn drop_source(&mut self, source: Source) {
        self.entries.retain(|k, _| k.0 != source);
    }
}

/// The day's vector for each of the 48 slots; `None` slots are mask 0.
/// Every `Some` is the same borrow of the stored vector.
pub fn broadcast_to_halfhour<'a>(
    store: &'a MemoryStore,
    source: Source,
    region: &str,
    day: NaiveDate,
) -> [Option<&'a [f64]>; super::SLOTS_PER_DAY] {
    let v = store.get(source, region, day).and_then(DailyEntry::signal);
    [v; super::SLOTS_PER_DAY]
}

/// Builds one entry per `(source, region, day)` for every region/day in
/// `calendar`. Returns the store and the documents whose region tag is unknown.
pub fn build_memory_store(
    docs: &[DocumentRecord],
    calendar: &BTreeMap<String, Vec<NaiveDate>>,
    decay: &PolicyDecay,
    dim: usize,
) -> Result<(MemoryStore, Vec<DocumentRecord>)> {
    decay.validate()?;
    let regions: Vec<String> = calendar.keys().cloned().collect();
    let mut quarantine = Vec::new();
    let mut routed: BTreeMap<(Source, String), Vec<&DocumentRecord>> = BTreeMap::new();
    for d in docs {
        if d.dim() != dim {
            return Err(GraftError::Dimension(format!("document has {} dims, expected {dim}", d.dim())));
        }
        match map_region(d, &regions) {
            Some(rs) => {
                for r in rs {
                    routed.entry((d.source, r)).or_default().push(d);
                }
            }
            None => quarantine.push(d.clone()),
        }
    }

    let mut store = MemoryStore::new(dim);
    for (region, days) in calendar {
        for source in Source::ALL {
            let mut pool = routed.remove(&(source, region.clone())).unwrap_or_default();
            pool.sort_by_key(|d| d.publish_date);
            for &day in days {
                let entry = match source {
                    Source::Policy => {
                        let end = pool.partition_point(|d| d.publish_date <= day);
                        aggregate_policy(&pool[..end], day, decay, dim)?
                    }
                    _ => {
                        let lo = pool.partition_point(|d| d.publish_date < day);
                        let hi = pool.partition_point(|d| d.publish_date <= day);
                        aggregate_daily(&pool[lo..hi], dim)?
                    }
                };
                store.insert(source, region, day, entry)?;
            }
        }
    }
    Ok((store, quarantine))
}

/// Reads `source,region,publish_date,relevance,dim,values...`. An empty
/// relevance field means 1.
pub fn read_embeddings_csv(path: &Path) -> Result<Vec<DocumentRecord>> {
    let schema = |line: usize, message: String| GraftError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if head.len() < 6 || head[..5] != ["source", "region", "publish_date", "relevance", "dim"] {
        return Err(schema(1, "expected header source,region,publish_date,relevance,dim,values...".into()));
    }
    let mut out = Vec::new();
    let mut dims = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() < 6 {
            return Err(schema(line, "too few fields".into()));
        }
        let source: Source = rec[0].parse().map_err(|e: GraftError| schema(line, e.to_string()))?;
        let date = NaiveDate::parse_from_str(&rec[2], "%Y-%m-%d")
            .map_err(|e| schema(line, format!("bad date {:?}: {e}", &rec[2])))?;
        let relevance = if rec[3].is_empty() {
            1.0
        } else {
            rec[3].parse().map_err(|_| schema(line, format!("bad relevance {:?}", &rec[3])))?
        };
        let dim: usize = rec[4].parse().map_err(|_| schema(line, format!("bad dim {:?}", &rec[4])))?;
        if rec.len() != 5 + dim {
            return Err(schema(line, format!("dim {dim} but {} values", rec.len() - 5)));
        }
        let values = rec
            .iter()
            .skip(5)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| schema(line, format!("bad value: {e}")))?;
        dims.insert(dim);
        let doc = DocumentRecord::new(source, RegionTag::parse(&rec[1]), date, relevance, values)
            .map_err(|e| schema(line, e.to_string()))?;
        out.push(doc);
    }
    if dims.len() > 1 {
        return Err(schema(1, format!("mixed embedding dims {dims:?}")));
    }
    Ok(out)
}

pub fn write_embeddings_csv(docs: &[DocumentRecord], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    w.write_record(["source", "region", "publish_date", "relevance", "dim", "values"])?;
    for d in docs {
        let mut row = vec![
            d.source.to_string(),
            d.region.to_string(),
            d.publish_date.format("%Y-%m-%d").to_string(),
            d.relevance.to_string(),
            d.dim().to_string(),
        ];
        row.extend(d.embedding().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `source,region,date,mask,values...`.
pub fn write_memory_csv(store: &MemoryStore, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    let mut head = vec!["source".to_string(), "region".into(), "date".into(), "mask".into()];
    head.extend((0..store.dim()).map(|i| format!("v{i}")));
    w.write_record(&head)?;
    for ((s, r, d), e) in store.iter() {
        let mut row = vec![s.to_string(), r.clone(), d.format("%Y-%m-%d").to_string(), u8::from(e.mask).to_string()];
        row.extend(e.vector.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_memory_csv(path: &Path) -> Result<MemoryStore> {
    let schema = |line: usize, message: String| GraftError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let dim = rdr.headers()?.len().saturating_sub(4);
    let mut store = MemoryStore::new(dim);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let source: Source = rec[0].parse().map_err(|e: GraftError| schema(line, e.to_string()))?;
        let day = NaiveDate::parse_from_str(&rec[2], "%Y-%m-%d").map_err(|e| schema(line, e.to_string()))?;
        let mask = match &rec[3] {
            "0" => false,
            "1" => true,
            m => return Err(schema(line, format!("bad mask {m:?}"))),
        };
        let vector = rec
            .iter()
            .skip(4)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| schema(line, e.to_string()))?;
        store
            .insert(source, &rec[1], day, DailyEntry { vector, mask })
            .map_err(|e| schema(line, e.to_string()))?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 5, d).unwrap()
    }

    fn doc(source: Source, region: &str, d: u32, rel: f64, e: Vec<f64>) -> DocumentRecord {
        DocumentRecord::new(source, RegionTag::parse(region), day(d), rel, e).unwrap()
    }

    #[test]
    fn fallback_encoder_fixtures() {
        let a = encode_document_fallback(&["heat", "wave", "warning"], 64).unwrap().unwrap();
        let b = encode_document_fallback(&["heat", "wave", "warning"], 64).unwrap().unwrap();
        assert_eq!(a, b);
        assert!((a.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
        let c = encode_document_fallback(&["grid", "outage", "notice"], 64).unwrap().unwrap();
        let cos: f64 = a.iter().zip(&c).map(|(x, y)| x * y).sum();
        assert!(cos < 0.99);
        assert_eq!(encode_document_fallback(&[], 64).unwrap(), None);
        assert!(encode_document_fallback(&["x"], 0).is_err());
    }

    #[test]
    fn daily_aggregation_fixtures() {
        let u = doc(Source::News, "NSW", 1, 1.0, vec![1.0, 0.0]);
        let v = doc(Source::News, "NSW", 1, 1.0, vec![0.0, 1.0]);
        let one = aggregate_daily(&[&u], 2).unwrap();
        assert_eq!(one.vector, u.embedding());
        let two = aggregate_daily(&[&u, &v], 2).unwrap();
        assert_eq!(two.vector, vec![0.5, 0.5]);
        let none = aggregate_daily(&[], 2).unwrap();
        assert!(!none.mask);
        assert!(none.signal().is_none());
    }

    #[test]
    fn negative_relevance_is_rejected() {
        let err = DocumentRecord::new(Source::News, RegionTag::National, day(1), -0.5, vec![1.0]);
        assert!(matches!(err, Err(GraftError::Input(_))));
    }

    #[test]
    fn policy_decay_fixtures() {
        let d0 = doc(Source::Policy, "VIC", 3, 1.0, vec![1.0, 0.0]);
        let d1 = doc(Source::Policy, "VIC", 2, 1.0, vec![0.0, 1.0]);
        let decay = PolicyDecay {
            rho: 0.5,
            ..PolicyDecay::default()
        };
        let e = aggregate_policy(&[&d0, &d1], day(3), &decay, 2).unwrap();
        assert!((e.vector[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((e.vector[1] - 1.0 / 3.0).abs() < 1e-12);

        let flat = PolicyDecay { rho: 1.0, ..decay };
        let e = aggregate_policy(&[&d0, &d1], day(3), &flat, 2).unwrap();
        assert_eq!(e.vector, vec![0.5, 0.5]);

        for rho in [0.1, 0.97, 1.0] {
            let e = aggregate_policy(&[&d0], day(3), &PolicyDecay { rho, ..decay }, 2).unwrap();
            assert_eq!(e.vector, d0.embedding());
        }
        for rho in [0.0, 1.5, -1.0] {
            let bad = PolicyDecay { rho, ..decay };
            assert!(matches!(aggregate_policy(&[&d0], day(3), &bad, 2), Err(GraftError::Config(_))));
        }
        assert!(aggregate_policy(&[&d0], day(2), &decay, 2).is_err());
    }

    #[test]
    fn policy_outside_horizon_is_masked() {
        let d0 = doc(Source::Policy, "VIC", 1, 1.0, vec![1.0]);
        let decay = PolicyDecay {
            horizon_days: 3,
            ..PolicyDecay::default()
        };
        assert!(aggregate_policy(&[&d0], day(4), &decay, 1).unwrap().mask);
        assert!(!aggregate_policy(&[&d0], day(5), &decay, 1).unwrap().mask);
    }

    #[test]
    fn routing_fixtures() {
        let regions: Vec<String> = ["NSW", "QLD", "SA", "TAS", "VIC"].map(String::from).to_vec();
        let nat = doc(Source::News, "NATIONAL", 1, 1.0, vec![0.6, 0.8]);
        assert_eq!(map_region(&nat, &regions).unwrap().len(), 5);
        let st = doc(Source::News, "SA", 1, 1.0, vec![0.6, 0.8]);
        assert_eq!(map_region(&st, &regions).unwrap(), vec!["SA".to_string()]);
        let unk = doc(Source::News, "WA", 1, 1.0, vec![0.6, 0.8]);
        assert!(map_region(&unk, &regions).is_none());

        let cal: BTreeMap<String, Vec<NaiveDate>> = regions.iter().map(|r| (r.clone(), vec![day(1)])).collect();
        let (store, q) = build_memory_store(&[nat.clone(), unk], &cal, &PolicyDecay::default(), 2).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(store.len(), 5 * 3);
        for r in &regions {
            assert_eq!(store.get(Source::News, r, day(1)).unwrap().vector, nat.embedding());
            assert!(!store.get(Source::Reddit, r, day(1)).unwrap().mask);
        }
    }

    #[test]
    fn broadcast_shares_one_vector() {
        let mut store = MemoryStore::new(2);
        store
            .insert(Source::News, "NSW", day(1), DailyEntry { vector: vec![0.6, 0.8], mask: true })
            .unwrap();
        store.insert(Source::News, "NSW", day(2), DailyEntry::empty(2)).unwrap();
        let before = store.clone();
        let slots = broadcast_to_halfhour(&store, Source::News, "NSW", day(1));
        let first = slots[0].unwrap().as_ptr();
        assert!(slots.iter().all(|s| s.unwrap().as_ptr() == first));
        assert!(broadcast_to_halfhour(&store, Source::News, "NSW", day(2)).iter().all(Option::is_none));
        assert!(broadcast_to_halfhour(&store, Source::News, "NSW", day(9)).iter().all(Option::is_none));
        assert_eq!(store, before);
    }

    #[test]
    fn memory_and_embedding_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let docs = vec![
            doc(Source::News, "NATIONAL", 1, 0.3, vec![0.1, 0.7, -0.2]),
            doc(Source::Policy, "VIC", 2, 1.0, vec![1.0 / 3.0, 0.5, 0.25]),
        ];
        let p = dir.path().join("emb.csv");
        write_embeddings_csv(&docs, &p).unwrap();
        assert_eq!(read_embeddings_csv(&p).unwrap(), docs);

        let cal: BTreeMap<String, Vec<NaiveDate>> =
            [("VIC".to_string(), vec![day(1), day(2), day(3)])].into_iter().collect();
        let (store, _) = build_memory_store(&docs, &cal, &PolicyDecay::default(), 3).unwrap();
        let m = dir.path().join("mem.csv");
        write_memory_csv(&store, &m).unwrap();
        assert_eq!(read_memory_csv(&m).unwrap(), store);
    }

    #[test]
    fn unified_embedding_slices() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let parts = evenly_slice(&v, 3).unwrap();
        assert_eq!(parts, vec![vec![0.0, 1.0, 2.0], vec![3.0, 4.0, 5.0], vec![6.0, 7.0, 8.0]]);
        assert!(evenly_slice(&v[..2], 3).is_err());
    }
}
