use liqgeom::book::*;
use proptest::prelude::*;

const TICK: f64 = 0.25;

type Levels = Vec<(u32, f64)>;

/// Random two-sided book on a 0.25 grid (exact in binary) around `centre`.
fn book_strategy() -> impl Strategy<Value = (Levels, Levels)> {
    let side = prop::collection::btree_map(1u32..60, 0.5f64..100.0, 1..20)
        .prop_map(|m| m.into_iter().collect::<Vec<_>>());
    (side.clone(), side)
}

fn snapshot(centre: i64, bids: &[(u32, f64)], asks: &[(u32, f64)], scale: f64) -> BookSnapshot<f64> {
    let c = centre as f64 * TICK;
    BookSnapshot::new(
        0,
        bids.iter().map(|&(d, s)| Level::new(c - d as f64 * TICK, s * scale)).collect(),
        asks.iter().map(|&(d, s)| Level::new(c + d as f64 * TICK, s * scale)).collect(),
        TICK,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn profiles_are_invariant_under_price_shifts(
        (bids, asks) in book_strategy(),
        centre in 400i64..800,
        shift in -300i64..300,
    ) {
        let a = snapshot(centre, &bids, &asks, 1.0);
        let b = snapshot(centre + shift, &bids, &asks, 1.0);
        for side in [Side::Bid, Side::Ask] {
            prop_assert_eq!(bin_side(&a, side, 50).unwrap(), bin_side(&b, side, 50).unwrap());
        }
        prop_assert!((mid_price(&b).unwrap() - mid_price(&a).unwrap() - shift as f64 * TICK).abs() < 1e-9);
    }

    #[test]
    fn profiles_scale_with_sizes((bids, asks) in book_strategy(), k in 0u32..8) {
        let c = 2f64.powi(k as i32);
        let a = snapshot(500, &bids, &asks, 1.0);
        let b = snapshot(500, &bids, &asks, c);
        for side in [Side::Bid, Side::Ask] {
            let qa = bin_side(&a, side, 50).unwrap();
            let qb = bin_side(&b, side, 50).unwrap();
            prop_assert!(qa.q.iter().zip(&qb.q).all(|(x, y)| x * c == *y));
        }
    }

    #[test]
    fn binning_conserves_in_range_liquidity((bids, asks) in book_strategy(), k in 1usize..80) {
        let snap = snapshot(500, &bids, &asks, 1.0);
        // the spread is bid_d + ask_d ticks, so distance from the mid is d + (a1 - b1)/2
        for side in [Side::Bid, Side::Ask] {
            let q = bin_side(&snap, side, k).unwrap();
            let s = cumulate(&q);
            prop_assert!(s.s.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!((s.s[k - 1] - q.total()).abs() < 1e-9);
            prop_assert!(q.total() <= snap.total_size(side) + 1e-9);
            let back = s.increments();
            prop_assert!(back.q.iter().zip(&q.q).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn coordinate_books_are_gauge_invariant(
        coords in prop::collection::vec(-1.0f64..1.0, 4..200),
        shift in -2.0f64..2.0,
        e in -4i32..4,
    ) {
        // mean shift and power-of-two rescaling of coordinates and tick
        let w = vec![1.0; coords.len()];
        let tick = 0.01;
        let scale = 2f64.powi(e);
        let moved: Vec<f64> = coords.iter().map(|c| c * scale + shift).collect();
        let (Ok(a), Ok(b)) = (
            coords_to_snapshot(&coords, &w, tick, 0),
            coords_to_snapshot(&moved, &w, tick * scale, 0),
        ) else {
            return Ok(());
        };
        for side in [Side::Bid, Side::Ask] {
            let qa = bin_side(&a, side, 30).unwrap();
            let qb = bin_side(&b, side, 30).unwrap();
            // shifts can move a level across a bin edge only within rounding
            let diff: f64 = qa.q.iter().zip(&qb.q).map(|(x, y)| (x - y).abs()).sum();
            prop_assert!(diff <= 2.0, "{:?} vs {:?}", qa.q, qb.q);
        }
        prop_assert_eq!(a.bids().len() + a.asks().len(), b.bids().len() + b.asks().len());
    }

    #[test]
    fn window_average_is_elementwise_mean(rows in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 6), 1..12)) {
        let qs: Vec<SideProfile<f64>> = rows.iter().map(|r| SideProfile { side: Side::Ask, q: r.clone() }).collect();
        let cums: Vec<_> = qs.iter().map(cumulate).collect();
        let avg = window_average(&cums).unwrap();
        let q_avg = average_profiles(&qs).unwrap();
        // averaging commutes with cumulation
        let c = cumulate(&q_avg);
        prop_assert!(avg.s.iter().zip(&c.s).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}

#[test]
fn crossed_and_locked_books_are_rejected() {
    let crossed = BookSnapshot::new(7, vec![Level::new(101.0, 1.0)], vec![Level::new(100.0, 1.0)], 0.5);
    assert!(matches!(crossed, Err(BookError::CrossedBook(7))));
    let locked = BookSnapshot::new(8, vec![Level::new(100.0, 1.0)], vec![Level::new(100.0, 1.0)], 0.5);
    assert!(matches!(locked, Err(BookError::CrossedBook(8))));
}

#[test]
fn mixed_windows_are_rejected() {
    let a = SideProfile::<f64>::zeros(Side::Bid, 5);
    let b = SideProfile::<f64>::zeros(Side::Ask, 5);
    let c = SideProfile::<f64>::zeros(Side::Bid, 6);
    assert!(matches!(average_profiles(&[a.clone(), b]), Err(BookError::MixedSides)));
    assert!(matches!(average_profiles(&[a, c]), Err(BookError::MixedK(5, 6))));
    assert!(matches!(average_profiles::<f64>(&[]), Err(BookError::EmptyWindow)));
}

#[test]
fn tick_binning_rules() {
    assert_eq!(tick_bin(0.4), 0);
    assert_eq!(tick_bin(1.2), 1);
    assert_eq!(tick_bin(-2.7), 3);
    // exact half ticks go away from the mid
    assert_eq!(tick_bin(0.5), 1);
    assert_eq!(tick_bin(1.5), 2);
    assert_eq!(tick_bin(-2.5), 3);
}
