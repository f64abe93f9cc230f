mod common;

use coopsteer::data::{make_windows, split_train_val, WindowSpec};
use common::brute_force_anchors;
use proptest::prelude::*;

#[test]
fn make_windows_matches_brute_force_exhaustively() {
    let mut combos = 0;
    for n in 0..=50 {
        for x in 0..=6 {
            for dt in 0..=20 {
                let got: Vec<usize> = make_windows(n, x, dt).iter().map(|w| w.anchor).collect();
                assert_eq!(got, brute_force_anchors(n, x, dt), "N={n} x={x} dt={dt}");
                for w in make_windows(n, x, dt) {
                    assert_eq!((w.x, w.dt), (x, dt));
                    assert!(w.fits(n));
                }
                combos += 1;
            }
        }
    }
    assert_eq!(combos, 51 * 7 * 21);
}

#[test]
fn window_count_formula() {
    for n in 1..=50usize {
        for x in 1..=6usize {
            for dt in 0..=20usize {
                let expected = (n + 2).saturating_sub(dt + 2 * x);
                assert_eq!(make_windows(n, x, dt).len(), expected);
            }
        }
    }
}

#[test]
fn frame_indices_of_a_window() {
    let w = WindowSpec::new(5, 3, 4);
    assert_eq!(w.ego_indices().collect::<Vec<_>>(), vec![3, 4, 5]);
    assert_eq!(w.lead_indices().collect::<Vec<_>>(), vec![9, 10, 11]);
    assert!(w.fits(12));
    assert!(!w.fits(11));
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 0usize..400, fraction in 0.05f64..0.95, seed in any::<u64>()) {
        let windows = make_windows(n, 2, 3);
        prop_assume!(!windows.is_empty());
        let (train, val) = split_train_val(&windows, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), windows.len());
        let mut all: Vec<usize> = train.iter().chain(&val).map(|w| w.anchor).collect();
        all.sort_unstable();
        prop_assert_eq!(all, windows.iter().map(|w| w.anchor).collect::<Vec<_>>());
        let again = split_train_val(&windows, fraction, seed).unwrap();
        prop_assert_eq!(again, (train, val));
    }

    #[test]
    fn windows_are_contiguous_and_in_range(n in 0usize..300, x in 1usize..10, dt in 0usize..40) {
        let ws = make_windows(n, x, dt);
        for pair in ws.windows(2) {
            prop_assert_eq!(pair[1].anchor, pair[0].anchor + 1);
        }
        for w in &ws {
            prop_assert!(w.ego_indices().start + x - 1 == w.anchor);
            prop_assert!(w.lead_indices().end <= n);
        }
    }
}
