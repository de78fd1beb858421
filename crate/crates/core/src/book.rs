//! Order-book geometry: snapshots, mid price, tick binning, cumulative
//! liquidity and window averages.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::RelationalGraph;
use crate::scalar::Real;
use crate::spectral::Projection;

/// Default number of tick bins retained from the mid.
pub const DEFAULT_K: usize = 50;
/// Default number of snapshots per averaging window.
pub const DEFAULT_T: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BookError {
    #[error("crossed book at t={0}: best bid >= best ask")]
    CrossedBook(i64),
    #[error("{side} side of snapshot t={timestamp} is empty")]
    EmptySide { side: Side, timestamp: i64 },
    #[error("invalid level at t={timestamp}: {reason}")]
    InvalidLevel { timestamp: i64, reason: String },
    #[error("tick size must be finite and > 0")]
    InvalidTick,
    #[error("projection coordinates are all equal")]
    DegenerateProjection,
    #[error("profiles mix bid and ask sides")]
    MixedSides,
    #[error("profiles have different lengths ({0} vs {1})")]
    MixedK(usize, usize),
    #[error("no profiles to average")]
    EmptyWindow,
    #[error("K must be >= 1")]
    InvalidK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bid" | "B" => Ok(Side::Bid),
            "ask" | "A" => Ok(Side::Ask),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

/// Visible size at one price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level<T> {
    pub price: T,
    pub size: T,
}

impl<T> Level<T> {
    pub fn new(price: T, size: T) -> Self {
        Self { price, size }
    }
}

/// One observation instant after venue aggregation. Bids are stored
/// best-first (descending), asks best-first (ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct BookSnapshot<T> {
    timestamp: i64,
    bids: Vec<Level<T>>,
    asks: Vec<Level<T>>,
    tick_size: T,
}

impl<T: Real> BookSnapshot<T> {
    /// Validates and orders the levels. Levels may arrive in any order but
    /// each side must have distinct prices; a crossed or locked book is rejected.
    pub fn new(timestamp: i64, mut bids: Vec<Level<T>>, mut asks: Vec<Level<T>>, tick_size: T) -> Result<Self, BookError> {
        if !tick_size.is_finite() || tick_size <= T::zero() {
            return Err(BookError::InvalidTick);
        }
        for lvl in bids.iter().chain(&asks) {
            if !lvl.price.is_finite() {
                return Err(BookError::InvalidLevel { timestamp, reason: "non-finite price".into() });
            }
            if !lvl.size.is_finite() || lvl.size < T::zero() {
                return Err(BookError::InvalidLevel { timestamp, reason: format!("size {} is not >= 0", lvl.size) });
            }
        }
        bids.sort_by(|a, b| b.price.partial_cmp(&a.price).unwrap_or(Ordering::Equal));
        asks.sort_by(|a, b| a.price.partial_cmp(&b.price).unwrap_or(Ordering::Equal));
        for side in [&bids, &asks] {
            if side.windows(2).any(|w| w[0].price == w[1].price) {
                return Err(BookError::InvalidLevel { timestamp, reason: "duplicate price on one side".into() });
            }
        }
        if let (Some(b), Some(a)) = (bids.first(), asks.first()) {
            if b.price >= a.price {
                return Err(BookError::CrossedBook(timestamp));
            }
        }
        Ok(Self { timestamp, bids, asks, tick_size })
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn tick_size(&self) -> T {
        self.tick_size
    }

    pub fn bids(&self) -> &[Level<T>] {
        &self.bids
    }

    pub fn asks(&self) -> &[Level<T>] {
        &self.asks
    }

    pub fn side(&self, side: Side) -> &[Level<T>] {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    pub fn best_bid(&self) -> Option<T> {
        self.bids.first().map(|l| l.price)
    }

    pub fn best_ask(&self) -> Option<T> {
        self.asks.first().map(|l| l.price)
    }

    pub fn total_size(&self, side: Side) -> T {
        self.side(side).iter().map(|l| l.size).sum()
    }
}

/// `(best bid + best ask) / 2`.
pub fn mid_price<T: Real>(snap: &BookSnapshot<T>) -> Result<T, BookError> {
    let bid = snap.best_bid().ok_or(BookError::EmptySide { side: Side::Bid, timestamp: snap.timestamp })?;
    let ask = snap.best_ask().ok_or(BookError::EmptySide { side: Side::Ask, timestamp: snap.timestamp })?;
    Ok((bid + ask) * T::lit(0.5))
}

/// Mid defined by the signed-imbalance argmin: the point minimising
/// `|liquidity below − liquidity above|` over the visible book, with a level
/// sitting exactly on the candidate counted half on each side. Diagnostic
/// only; binning always uses [`mid_price`].
pub fn imbalance_mid<T: Real>(snap: &BookSnapshot<T>) -> Option<T> {
    let mut levels: Vec<Level<T>> = snap.bids.iter().chain(&snap.asks).copied().collect();
    if levels.is_empty() {
        return None;
    }
    levels.sort_by(|a, b| a.price.partial_cmp(&b.price).unwrap_or(Ordering::Equal));
    let total: T = levels.iter().map(|l| l.size).sum();
    let mut below = T::zero();
    let mut best: Option<(T, T)> = None;
    let mut consider = |point: T, imbalance: T| {
        let score = imbalance.abs();
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, point));
        }
    };
    for (k, lvl) in levels.iter().enumerate() {
        // on the atom
        let above = total - below - lvl.size;
        consider(lvl.price, below - above);
        below = below + lvl.size;
        // in the open gap to the next level
        if let Some(next) = levels.get(k + 1) {
            consider((lvl.price + next.price) * T::lit(0.5), below - (total - below));
        }
    }
    best.map(|(_, p)| p)
}

/// Distance-from-mid in ticks, mapped to an integer bin.
///
/// Fractional distances round half-to-even. Exact half-tick distances, which
/// occur whenever the mid sits between two grid prices, round away from the
/// mid so that the best quotes land in bin 1.
pub fn tick_bin<T: Real>(distance_in_ticks: T) -> usize {
    let d = distance_in_ticks.abs();
    let floor = d.floor();
    let frac = d - floor;
    let half = T::lit(0.5);
    let x = if (frac - half).abs() <= T::lit(1e-9) {
        floor + T::one()
    } else if frac < half {
        floor
    } else {
        floor + T::one()
    };
    x.to_usize().unwrap_or(usize::MAX)
}

/// Binned one-sided liquidity `q(x)`, `x = 1..=K` (stored at index `x-1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SideProfile<T> {
    pub side: Side,
    pub q: Vec<T>,
}

impl<T: Real> SideProfile<T> {
    pub fn zeros(side: Side, k: usize) -> Self {
        Self { side, q: vec![T::zero(); k] }
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    pub fn total(&self) -> T {
        self.q.iter().copied().sum()
    }
}

/// Running sum `S(x) = Σ_{u<=x} q(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeProfile<T> {
    pub side: Side,
    pub s: Vec<T>,
}

impl<T: Real> CumulativeProfile<T> {
    pub fn k(&self) -> usize {
        self.s.len()
    }

    /// First differences, recovering `q` with `S(0) = 0`.
    pub fn increments(&self) -> SideProfile<T> {
        let mut prev = T::zero();
        let q = self
            .s
            .iter()
            .map(|&s| {
                let d = s - prev;
                prev = s;
                d
            })
            .collect();
        SideProfile { side: self.side, q }
    }
}

/// Bins one side of a snapshot into `K` tick bins from the mid. Levels landing
/// in bin 0 or beyond `K`, and zero-size levels, are dropped. An empty side
/// gives an all-zero profile; the opposite side must be present to define the mid.
pub fn bin_side<T: Real>(snap: &BookSnapshot<T>, side: Side, k: usize) -> Result<SideProfile<T>, BookError> {
    if k == 0 {
        return Err(BookError::InvalidK);
    }
    let mut profile = SideProfile::zeros(side, k);
    if snap.side(side).is_empty() {
        return Ok(profile);
    }
    let mid = mid_price(snap)?;
    for lvl in snap.side(side) {
        if lvl.size == T::zero() {
            continue;
        }
        let x = tick_bin((lvl.price - mid) / snap.tick_size);
        if (1..=k).contains(&x) {
            profile.q[x - 1] = profile.q[x - 1] + lvl.size;
        }
    }
    Ok(profile)
}

pub fn cumulate<T: Real>(q: &SideProfile<T>) -> CumulativeProfile<T> {
    let mut acc = T::zero();
    let s = q
        .q
        .iter()
        .map(|&v| {
            acc = acc + v;
            acc
        })
        .collect();
    CumulativeProfile { side: q.side, s }
}

fn check_window(items: impl Iterator<Item = (Side, usize)>) -> Result<(Side, usize), BookError> {
    let mut first: Option<(Side, usize)> = None;
    for (side, k) in items {
        match first {
            None => first = Some((side, k)),
            Some((s0, k0)) => {
                if s0 != side {
                    return Err(BookError::MixedSides);
                }
                if k0 != k {
                    return Err(BookError::MixedK(k0, k));
                }
            }
        }
    }
    first.ok_or(BookError::EmptyWindow)
}

fn elementwise_mean<'a, T: Real>(rows: impl Iterator<Item = &'a [T]> + Clone, k: usize) -> Vec<T> {
    let count = rows.clone().count();
    let mut acc = vec![T::zero(); k];
    for row in rows {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a = *a + v;
        }
    }
    let inv = T::from_count(count).recip();
    acc.into_iter().map(|a| a * inv).collect()
}

/// Snapshot-wise mean `S̄(x) = (1/T) Σ_t S^(t)(x)` over one window.
pub fn window_average<T: Real>(profiles: &[CumulativeProfile<T>]) -> Result<CumulativeProfile<T>, BookError> {
    let (side, k) = check_window(profiles.iter().map(|p| (p.side, p.k())))?;
    let s = elementwise_mean(profiles.iter().map(|p| p.s.as_slice()), k);
    Ok(CumulativeProfile { side, s })
}

/// Snapshot-wise mean of differential profiles `Q̄(x)`.
pub fn average_profiles<T: Real>(profiles: &[SideProfile<T>]) -> Result<SideProfile<T>, BookError> {
    let (side, k) = check_window(profiles.iter().map(|p| (p.side, p.k())))?;
    let q = elementwise_mean(profiles.iter().map(|p| p.q.as_slice()), k);
    Ok(SideProfile { side, q })
}

/// Maximal runs of zero increments of `S` (with `S(0) = 0`) of length at
/// least `min_run`, as `(start, length)`: `S` is flat from bin `start`
/// through bin `start + length`.
pub fn detect_plateau<T: Real>(s: &CumulativeProfile<T>, min_run: usize) -> Vec<(usize, usize)> {
    let inc = s.increments();
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, &d) in inc.q.iter().enumerate() {
        // increment at bin x = idx + 1 is S(x) - S(x-1)
        if d == T::zero() {
            start.get_or_insert(idx);
        } else if let Some(st) = start.take() {
            if idx - st >= min_run.max(1) {
                runs.push((st, idx - st));
            }
        }
    }
    if let Some(st) = start {
        let len = inc.q.len() - st;
        if len >= min_run.max(1) {
            runs.push((st, len));
        }
    }
    runs
}

/// How projected vertices translate into visible size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeRule {
    /// Every vertex shows size 1.
    #[default]
    Unit,
    /// A vertex shows its degree.
    Degree,
}

impl SizeRule {
    pub fn as_str(self) -> &'static str {
        match self {
            SizeRule::Unit => "unit",
            SizeRule::Degree => "degree",
        }
    }
}

impl FromStr for SizeRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit" => Ok(SizeRule::Unit),
            "degree" => Ok(SizeRule::Degree),
            other => Err(format!("unknown size rule {other:?} (expected unit or degree)")),
        }
    }
}

/// Splits sorted coordinates at the gap minimising the weighted imbalance
/// `|W_below − W_above|`. Ties prefer the gap with nonnegative imbalance,
/// then the lowest gap. Returns the index `k` of the first coordinate above.
fn balance_split<T: Real>(sorted: &[(T, T)]) -> Option<usize> {
    let total: T = sorted.iter().map(|&(_, w)| w).sum();
    let mut below = T::zero();
    let mut best: Option<(T, bool, usize)> = None;
    for k in 1..sorted.len() {
        below = below + sorted[k - 1].1;
        if sorted[k - 1].0 == sorted[k].0 {
            continue;
        }
        let signed = below - (total - below);
        let score = signed.abs();
        let nonneg = signed >= T::zero();
        let better = match best {
            None => true,
            Some((s, nn, _)) => score < s || (score == s && nonneg && !nn),
        };
        if better {
            best = Some((score, nonneg, k));
        }
    }
    best.map(|(_, _, k)| k)
}

/// Synthetic snapshot from a projection: vertices below the balance split
/// quote bids at their coordinate, vertices above quote asks. The mid is the
/// midpoint of the two coordinates bracketing the split, so [`mid_price`] of
/// the result reproduces it exactly. Vertices sharing a coordinate aggregate.
pub fn projection_to_snapshot<T: Real>(
    p: &Projection<T>,
    g: &RelationalGraph,
    tick_size: T,
    rule: SizeRule,
    timestamp: i64,
) -> Result<BookSnapshot<T>, BookError> {
    let weights: Vec<T> = match rule {
        SizeRule::Unit => vec![T::one(); p.coords.len()],
        SizeRule::Degree => g.degrees().iter().map(|&d| T::from_count(d as usize)).collect(),
    };
    coords_to_snapshot(&p.coords, &weights, tick_size, timestamp)
}

/// Coordinate/weight form of [`projection_to_snapshot`].
pub fn coords_to_snapshot<T: Real>(coords: &[T], weights: &[T], tick_size: T, timestamp: i64) -> Result<BookSnapshot<T>, BookError> {
    let mut sorted: Vec<(T, T)> = coords.iter().copied().zip(weights.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let split = balance_split(&sorted).ok_or(BookError::DegenerateProjection)?;
    let aggregate = |slice: &[(T, T)]| {
        let mut out: Vec<Level<T>> = Vec::new();
        for &(price, size) in slice {
            match out.last_mut() {
                Some(l) if l.price == price => l.size = l.size + size,
                _ => out.push(Level::new(price, size)),
            }
        }
        out
    };
    let bids = aggregate(&sorted[..split]);
    let asks = aggregate(&sorted[split..]);
    BookSnapshot::new(timestamp, bids, asks, tick_size)
}

/// `x,q,S` CSV for one side of one window.
pub fn profile_csv<T: Real>(q: &SideProfile<T>, s: &CumulativeProfile<T>) -> String {
    let mut out = String::from("x,q,S\n");
    for (i, (qv, sv)) in q.q.iter().zip(&s.s).enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, qv.as_f64(), sv.as_f64());
    }
    out
}

/// Output file name for a window profile.
pub fn profile_file_name(asset: &str, side: Side, window_start: i64) -> String {
    format!("{asset}_{}_{window_start}.csv", side.as_str())
}
