//! Hand-computed expectations for the depth fixtures.

use liqgeom::book::{self, BookSnapshot, Side};
use liqgeom::ingest::{build_snapshots, parse_price, read_depth, units_to_price, IngestError};

pub const MULTI_VENUE: &str = include_str!("../fixtures/multi_venue.csv");
pub const CROSSED: &str = include_str!("../fixtures/crossed.csv");

fn p(s: &str) -> f64 {
    units_to_price(parse_price(s).unwrap())
}

struct Expected {
    ts: i64,
    bids: Vec<(f64, f64)>,
    asks: Vec<(f64, f64)>,
    mid: f64,
    q_bid: [f64; 5],
    s_bid: [f64; 5],
    q_ask: [f64; 5],
    s_ask: [f64; 5],
}

/// Worked by hand from `multi_venue.csv` with tick 0.01 and K = 5.
fn expected() -> Vec<Expected> {
    vec![
        // venues summed at 99.98 (NSDQ overwritten 100 → 120, + ARCA 50) and 100.02;
        // zero-size 100.05 dropped
        Expected {
            ts: 1000,
            bids: vec![(p("99.97"), 200.0), (p("99.98"), 170.0)],
            asks: vec![(p("100.02"), 100.0), (p("100.03"), 40.0)],
            mid: 100.0,
            q_bid: [0.0, 170.0, 200.0, 0.0, 0.0],
            s_bid: [0.0, 170.0, 370.0, 370.0, 370.0],
            q_ask: [0.0, 100.0, 40.0, 0.0, 0.0],
            s_ask: [0.0, 100.0, 140.0, 140.0, 140.0],
        },
        // nothing carries over between seconds; ARCA 100.00 withdrawn to 0
        Expected {
            ts: 1001,
            bids: vec![(p("99.99"), 10.0)],
            asks: vec![(p("100.01"), 7.0)],
            mid: 100.0,
            q_bid: [10.0, 0.0, 0.0, 0.0, 0.0],
            s_bid: [10.0, 10.0, 10.0, 10.0, 10.0],
            q_ask: [7.0, 0.0, 0.0, 0.0, 0.0],
            s_ask: [7.0, 7.0, 7.0, 7.0, 7.0],
        },
        // 3-tick spread: mid 100.005, half-tick distances round away from the mid
        Expected {
            ts: 1002,
            bids: vec![(p("99.96"), 6.0), (p("99.99"), 3.0)],
            asks: vec![(p("100.02"), 4.0), (p("100.04"), 4.0)],
            mid: 100.005,
            q_bid: [0.0, 3.0, 0.0, 0.0, 6.0],
            s_bid: [0.0, 3.0, 3.0, 3.0, 9.0],
            q_ask: [0.0, 4.0, 0.0, 4.0, 0.0],
            s_ask: [0.0, 4.0, 4.0, 8.0, 8.0],
        },
    ]
}

fn levels(snap: &BookSnapshot<f64>, side: Side) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = snap.side(side).iter().map(|l| (l.price, l.size)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Compares snapshots built from `multi_venue.csv` against the hand computation.
pub fn check_multi_venue(snaps: &[BookSnapshot<f64>]) -> Result<(), String> {
    let want = expected();
    ensure!(snaps.len() == want.len(), "{} snapshots, want {}", snaps.len(), want.len());
    for (snap, e) in snaps.iter().zip(&want) {
        let t = e.ts;
        ensure!(snap.timestamp() == t, "timestamp {} vs {t}", snap.timestamp());
        ensure!(levels(snap, Side::Bid) == e.bids, "t={t}: bids {:?}", levels(snap, Side::Bid));
        ensure!(levels(snap, Side::Ask) == e.asks, "t={t}: asks {:?}", levels(snap, Side::Ask));
        let mid = book::mid_price(snap).map_err(|e| e.to_string())?;
        ensure!(mid == (snap.best_bid().unwrap() + snap.best_ask().unwrap()) / 2.0, "t={t}: mid {mid}");
        ensure!((mid - e.mid).abs() < 1e-12, "t={t}: mid {mid} vs {}", e.mid);
        let qb = book::bin_side(snap, Side::Bid, 5).map_err(|e| e.to_string())?;
        let qa = book::bin_side(snap, Side::Ask, 5).map_err(|e| e.to_string())?;
        ensure!(qb.q == e.q_bid, "t={t}: bid q {:?}", qb.q);
        ensure!(qa.q == e.q_ask, "t={t}: ask q {:?}", qa.q);
        ensure!(book::cumulate(&qb).s == e.s_bid, "t={t}: bid S");
        ensure!(book::cumulate(&qa).s == e.s_ask, "t={t}: ask S");
    }
    Ok(())
}

pub fn snapshots_from(text: &str) -> Result<Vec<BookSnapshot<f64>>, IngestError> {
    build_snapshots(read_depth(std::io::Cursor::new(text.as_bytes().to_vec()))?, 0.01)
}

/// Both golden checks: the multi-venue fixture reproduces the hand
/// computation and the crossed fixture is rejected naming second 1001.
pub fn check_fixtures() -> Result<(), String> {
    check_multi_venue(&snapshots_from(MULTI_VENUE).map_err(|e| e.to_string())?)?;
    match snapshots_from(CROSSED) {
        Err(IngestError::CrossedBook(1001)) => Ok(()),
        other => Err(format!("crossed fixture: {other:?}")),
    }
}
