//! Level-II depth files: parsing, and aggregation into one-second snapshots.
//!
//! Input is UTF-8 CSV with header `ts_ns,venue,side,price,size`, side `B` or
//! `A`, optionally gzip-compressed (`.gz` extension). Each record declares the
//! size a venue shows at a price; within a second the last declaration per
//! `(venue, side, price)` wins, then venues are summed price by price.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use thiserror::Error;

use crate::book::{BookError, BookSnapshot, Level, Side};

/// Fixed-point resolution of parsed prices: 1e-9 currency units.
pub const PRICE_SCALE: i64 = 1_000_000_000;
const PRICE_DECIMALS: usize = 9;

pub const DEPTH_HEADER: [&str; 5] = ["ts_ns", "venue", "side", "price", "size"];

const NS_PER_SECOND: i64 = 1_000_000_000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: expected `ts_ns,venue,side,price,size`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}, column {column}: {reason}")]
    ParseError { line: u64, column: &'static str, reason: String },
    #[error("record at ts_ns={ts_ns} precedes second {current} already emitted")]
    UnsortedInput { ts_ns: i64, current: i64 },
    #[error("crossed book at t={0}")]
    CrossedBook(i64),
    #[error("tick size must be finite and > 0")]
    InvalidTick,
    #[error(transparent)]
    Book(BookError),
}

impl From<BookError> for IngestError {
    fn from(e: BookError) -> Self {
        match e {
            BookError::CrossedBook(t) => IngestError::CrossedBook(t),
            other => IngestError::Book(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRecord {
    pub ts_ns: i64,
    pub venue: String,
    pub side: Side,
    /// Price in units of `1 / PRICE_SCALE`.
    pub price_units: i64,
    pub size: f64,
}

impl DepthRecord {
    pub fn price(&self) -> f64 {
        units_to_price(self.price_units)
    }

    /// Epoch second the record belongs to.
    pub fn second(&self) -> i64 {
        self.ts_ns.div_euclid(NS_PER_SECOND)
    }
}

pub fn units_to_price(units: i64) -> f64 {
    // split keeps integer prices exact
    let whole = units.div_euclid(PRICE_SCALE) as f64;
    let frac = units.rem_euclid(PRICE_SCALE) as f64 / PRICE_SCALE as f64;
    whole + frac
}

/// Parses a positive decimal string exactly into `1e-9` units.
pub fn parse_price(s: &str) -> Result<i64, String> {
    let s = s.trim();
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return Err("empty price".into());
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("price {s:?} is not a plain positive decimal"));
    }
    if frac.len() > PRICE_DECIMALS {
        return Err(format!("price {s:?} has more than {PRICE_DECIMALS} decimals"));
    }
    let int_units: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| format!("price {s:?} out of range"))? };
    let mut frac_units: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| "bad fraction".to_string())? };
    for _ in frac.len()..PRICE_DECIMALS {
        frac_units *= 10;
    }
    let units = int_units
        .checked_mul(PRICE_SCALE)
        .and_then(|v| v.checked_add(frac_units))
        .ok_or_else(|| format!("price {s:?} out of range"))?;
    if units <= 0 {
        return Err("price must be > 0".into());
    }
    Ok(units)
}

fn parse_record(rec: &csv::StringRecord, line: u64) -> Result<DepthRecord, IngestError> {
    let err = |column: &'static str, reason: String| IngestError::ParseError { line, column, reason };
    if rec.len() != 5 {
        return Err(err("*", format!("expected 5 fields, found {}", rec.len())));
    }
    let ts_ns: i64 = rec[0].trim().parse().map_err(|_| err("ts_ns", format!("{:?} is not an integer", &rec[0])))?;
    if ts_ns <= 0 {
        return Err(err("ts_ns", "timestamp must be > 0".into()));
    }
    let venue = rec[1].trim();
    if venue.is_empty() {
        return Err(err("venue", "empty venue".into()));
    }
    let side = match rec[2].trim() {
        "B" => Side::Bid,
        "A" => Side::Ask,
        other => return Err(err("side", format!("{other:?} is not B or A"))),
    };
    let price_units = parse_price(&rec[3]).map_err(|r| err("price", r))?;
    let size: f64 = rec[4].trim().parse().map_err(|_| err("size", format!("{:?} is not a number", &rec[4])))?;
    if !size.is_finite() || size < 0.0 {
        return Err(err("size", format!("size {size} must be finite and >= 0")));
    }
    Ok(DepthRecord { ts_ns, venue: venue.to_string(), side, price_units, size })
}

/// Streaming record reader.
pub struct DepthReader {
    inner: csv::Reader<Box<dyn Read>>,
    record: csv::StringRecord,
}

impl Iterator for DepthReader {
    type Item = Result<DepthRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.inner.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) => {
                let line = self.record.position().map(|p| p.line()).unwrap_or(0);
                Some(parse_record(&self.record, line))
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Some(Err(IngestError::ParseError { line, column: "*", reason: e.to_string() }))
            }
        }
    }
}

/// Reads depth records from any byte source.
pub fn read_depth<R: Read + 'static>(source: R) -> Result<DepthReader, IngestError> {
    let mut inner = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(Box::new(source) as Box<dyn Read>);
    let header = inner.headers().map_err(|e| IngestError::BadHeader(e.to_string()))?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != DEPTH_HEADER {
        return Err(IngestError::BadHeader(found.join(",")));
    }
    Ok(DepthReader { inner, record: csv::StringRecord::new() })
}

/// Opens a depth file, decompressing when the name ends in `.gz`.
pub fn read_depth_csv(path: impl AsRef<Path>) -> Result<DepthReader, IngestError> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    let gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    if gz {
        read_depth(MultiGzDecoder::new(file))
    } else {
        read_depth(file)
    }
}

type Bucket = BTreeMap<(Side, i64, String), f64>;

/// Groups a sorted record stream into per-second snapshots.
pub struct SnapshotStream<I> {
    records: I,
    tick_size: f64,
    second: Option<i64>,
    bucket: Bucket,
    done: bool,
}

impl<I> SnapshotStream<I>
where
    I: Iterator<Item = Result<DepthRecord, IngestError>>,
{
    pub fn new(records: I, tick_size: f64) -> Result<Self, IngestError> {
        if !tick_size.is_finite() || tick_size <= 0.0 {
            return Err(IngestError::InvalidTick);
        }
        Ok(Self { records, tick_size, second: None, bucket: BTreeMap::new(), done: false })
    }

    fn flush(&mut self, second: i64) -> Result<BookSnapshot<f64>, IngestError> {
        let mut agg: BTreeMap<(Side, i64), f64> = BTreeMap::new();
        for ((side, price, _venue), size) in std::mem::take(&mut self.bucket) {
            *agg.entry((side, price)).or_insert(0.0) += size;
        }
        let mut bids = Vec::new();
        let mut asks = Vec::new();
        for ((side, price), size) in agg {
            if size == 0.0 {
                continue;
            }
            let lvl = Level::new(units_to_price(price), size);
            match side {
                Side::Bid => bids.push(lvl),
                Side::Ask => asks.push(lvl),
            }
        }
        Ok(BookSnapshot::new(second, bids, asks, self.tick_size)?)
    }
}

impl<I> Iterator for SnapshotStream<I>
where
    I: Iterator<Item = Result<DepthRecord, IngestError>>,
{
    type Item = Result<BookSnapshot<f64>, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            match self.records.next() {
                None => {
                    self.done = true;
                    return self.second.take().map(|s| self.flush(s));
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                Some(Ok(rec)) => {
                    let sec = rec.second();
                    let key = (rec.side, rec.price_units, rec.venue);
                    match self.second {
                        Some(cur) if sec < cur => {
                            self.done = true;
                            return Some(Err(IngestError::UnsortedInput { ts_ns: rec.ts_ns, current: cur }));
                        }
                        Some(cur) if sec > cur => {
                            let snap = self.flush(cur);
                            self.second = Some(sec);
                            self.bucket.insert(key, rec.size);
                            if snap.is_err() {
                                self.done = true;
                            }
                            return Some(snap);
                        }
                        _ => {
                            self.second = Some(sec);
                            self.bucket.insert(key, rec.size);
                        }
                    }
                }
            }
        }
    }
}

/// Collects all snapshots; stops at the first error.
pub fn build_snapshots<I>(records: I, tick_size: f64) -> Result<Vec<BookSnapshot<f64>>, IngestError>
where
    I: IntoIterator<Item = Result<DepthRecord, IngestError>>,
{
    SnapshotStream::new(records.into_iter(), tick_size)?.collect()
}
