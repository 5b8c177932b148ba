use std::collections::BTreeSet;

use proptest::prelude::*;
use trajmc::data::{
    derive_velocities, fit_normalizer, sliding_window_augment, split_dataset, RawTrack, TrackPoint,
    TrajectorySample,
};

fn track_from(points: Vec<(f64, f64)>, id: i64) -> RawTrack {
    RawTrack {
        pedestrian_id: id,
        samples: points
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| TrackPoint { frame: 10 * i as i64, x, y })
            .collect(),
    }
}

fn brute_windows(len: usize, t: usize, f: usize, stride: usize) -> usize {
    let mut n = 0;
    let mut start = 0;
    while start + t + f <= len {
        n += 1;
        start += stride;
    }
    n
}

proptest! {
    #[test]
    fn window_count_matches_enumeration(
        len in 0usize..60, t in 1usize..10, f in 1usize..14, stride in 1usize..4,
    ) {
        let track = track_from((0..len).map(|i| (i as f64 * 0.3, 0.0)).collect(), 1);
        let w = sliding_window_augment(&track, 0.4, t, f, stride).unwrap();
        prop_assert_eq!(w.len(), brute_windows(len, t, f, stride));
        if stride == 1 {
            prop_assert_eq!(w.len(), (len + 1).saturating_sub(t + f));
        }
        for s in &w {
            prop_assert_eq!(s.history.len(), t);
            prop_assert_eq!(s.future.len(), f);
        }
    }

    #[test]
    fn velocities_telescope_back_to_positions(
        pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..40),
        dt in 0.05f64..2.0,
    ) {
        let track = track_from(pts, 2);
        let vel = derive_velocities(&track, dt).unwrap();
        let (mut x, mut y) = (track.samples[0].x, track.samples[0].y);
        for (p, v) in track.samples.iter().zip(&vel).skip(1) {
            x += v[0] * dt;
            y += v[1] * dt;
            prop_assert!((x - p.x).abs() < 1e-9 && (y - p.y).abs() < 1e-9);
        }
        prop_assert_eq!(vel[0], vel[1]);
    }

    #[test]
    fn split_never_leaks(
        lens in prop::collection::vec(20usize..40, 2..30),
        frac in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let samples: Vec<TrajectorySample> = lens
            .iter()
            .enumerate()
            .flat_map(|(id, &len)| {
                let track = track_from((0..len).map(|i| (i as f64, id as f64)).collect(), id as i64);
                sliding_window_augment(&track, 0.4, 8, 12, 1).unwrap()
            })
            .collect();
        let (train, test) = split_dataset(&samples, frac, seed).unwrap();
        let a: BTreeSet<_> = train.iter().map(|s| s.source_id).collect();
        let b: BTreeSet<_> = test.iter().map(|s| s.source_id).collect();
        prop_assert!(a.is_disjoint(&b));
        prop_assert_eq!(train.len() + test.len(), samples.len());
        let mut union: Vec<_> = train.iter().chain(&test).map(|s| (s.source_id, s.window_index)).collect();
        union.sort();
        let mut all: Vec<_> = samples.iter().map(|s| (s.source_id, s.window_index)).collect();
        all.sort();
        prop_assert_eq!(union, all);
        prop_assert_eq!(split_dataset(&samples, frac, seed).unwrap(), (train, test));
    }

    #[test]
    fn normalizer_round_trip(
        rows in prop::collection::vec(prop::array::uniform4(-100.0f64..100.0), 3..50),
    ) {
        let samples: Vec<TrajectorySample> = rows
            .chunks(3)
            .filter(|c| c.len() == 3)
            .map(|c| TrajectorySample { history: c[..1].to_vec(), future: c[1..].to_vec(), source_id: 0, window_index: 0 })
            .collect();
        let stats = fit_normalizer(&samples).unwrap();
        for s in &samples {
            let back = stats.invert(&stats.apply(s));
            for (a, b) in back.history.iter().chain(&back.future).zip(s.history.iter().chain(&s.future)) {
                for k in 0..4 {
                    prop_assert!((a[k] - b[k]).abs() <= 1e-12 * b[k].abs().max(1.0));
                }
            }
        }
    }
}
