use std::f64::consts::PI;

use proptest::prelude::*;

use tvh::attacks::{self, AttackKind, AttackSpec};
use tvh::boost::{self, hinge_loss, objective, train_on_differences};
use tvh::dtw::{self, CostMatrix, MatchTable};
use tvh::eval::{error_rates, roc, ScoredPair};
use tvh::flow::{self, FlowHashConfig, FlowParams};
use tvh::frame_hash::{dct2, frame_hash, FrameHashSeries};
use tvh::store::{self, Fingerprint, HashRecord};
use tvh::synthetic::{moving_texture, SyntheticSpec};
use tvh::video::{self, Fps, IngestConfig};
use tvh::{Frame, VideoTensor};

fn frame_strategy(h: usize, w: usize) -> impl Strategy<Value = Frame> {
    prop::collection::vec(0.0f64..1.0, h * w).prop_map(move |d| Frame::new(h, w, d))
}

fn cost_strategy() -> impl Strategy<Value = CostMatrix> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(n, m)| {
        prop::collection::vec(prop::collection::vec(0.0f64..10.0, m), n)
            .prop_map(|rows| CostMatrix::from_rows(rows).unwrap())
    })
}

/// Minimum path cost by exhaustive enumeration, summed in path order.
fn brute_force_dtw(c: &CostMatrix) -> f64 {
    fn walk(c: &CostMatrix, i: usize, j: usize, acc: f64, best: &mut f64) {
        if (i, j) == (c.rows() - 1, c.cols() - 1) {
            *best = best.min(acc);
            return;
        }
        if i + 1 < c.rows() && j + 1 < c.cols() {
            walk(c, i + 1, j + 1, c.get(i + 1, j + 1) + acc, best);
        }
        if i + 1 < c.rows() {
            walk(c, i + 1, j, c.get(i + 1, j) + acc, best);
        }
        if j + 1 < c.cols() {
            walk(c, i, j + 1, c.get(i, j + 1) + acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(c, 0, 0, c.get(0, 0), &mut best);
    best
}

fn naive_dct(f: &Frame) -> Frame {
    let (h, w) = f.dims();
    let scale = |k: usize, n: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    Frame::from_fn(h, w, |k, l| {
        let mut s = 0.0;
        for m in 0..h {
            for n in 0..w {
                s += f.get(m, n)
                    * (PI * (2 * m + 1) as f64 * k as f64 / (2 * h) as f64).cos()
                    * (PI * (2 * n + 1) as f64 * l as f64 / (2 * w) as f64).cos();
            }
        }
        scale(k, h) * scale(l, w) * s
    })
}

fn small_flow_config() -> FlowHashConfig {
    FlowHashConfig { flow: FlowParams { iterations: 60, ..FlowParams::default() }, ..FlowHashConfig::default() }
}

fn small_video(seed: u64, frames: usize, phase_length: (usize, usize)) -> VideoTensor {
    let spec = SyntheticSpec { height: 16, width: 16, frames, phase_length, ..SyntheticSpec::default() };
    moving_texture(&spec, seed, format!("v{seed}")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dtw_matches_exhaustive_search(c in cost_strategy()) {
        let path = dtw::dtw(&c);
        prop_assert_eq!(path.total_cost, brute_force_dtw(&c));
        prop_assert!(path.is_legal(c.rows(), c.cols()));
        let along: f64 = path.points.iter().map(|&(i, j)| c.get(i, j)).sum();
        prop_assert!((along - path.total_cost).abs() <= 1e-9 * (1.0 + along));
        prop_assert!(path.total_cost >= 0.0);
    }

    #[test]
    fn dtw_is_zero_iff_a_zero_path_exists(mask in prop::collection::vec(any::<bool>(), 16)) {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| if mask[i * 4 + j] { 0.0 } else { 1.0 }).collect()).collect();
        let c = CostMatrix::from_rows(rows).unwrap();
        prop_assert_eq!(dtw::dtw(&c).total_cost == 0.0, brute_force_dtw(&c) == 0.0);
    }

    #[test]
    fn dct_matches_naive_sum(f in frame_strategy(8, 8)) {
        let fast = dct2(&f).unwrap();
        prop_assert!(fast.max_abs_diff(&naive_dct(&f)) < 1e-9);
    }

    #[test]
    fn frame_hash_ignores_brightness_offset(f in frame_strategy(12, 10), c in -2.0f64..2.0) {
        let a = frame_hash(&f).unwrap();
        let b = frame_hash(&f.map(|p| p + c)).unwrap();
        prop_assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    }

    #[test]
    fn frame_hash_is_linear(f in frame_strategy(9, 11), s in -3.0f64..3.0) {
        let a = frame_hash(&f).unwrap();
        let b = frame_hash(&f.map(|p| s * p)).unwrap();
        prop_assert!((s * a[0] - b[0]).abs() < 1e-9 && (s * a[1] - b[1]).abs() < 1e-9);
    }

    #[test]
    fn horizontal_flip_negates_horizontal_coefficient(f in frame_strategy(8, 13)) {
        let (h, w) = f.dims();
        let flipped = Frame::from_fn(h, w, |r, c| f.get(r, w - 1 - c));
        let a = frame_hash(&f).unwrap();
        let b = frame_hash(&flipped).unwrap();
        prop_assert!((a[0] + b[0]).abs() < 1e-9);
        prop_assert!((a[1] - b[1]).abs() < 1e-9);
    }

    #[test]
    fn hash_equals_first_ac_dct_coefficients(f in frame_strategy(8, 8)) {
        let d = dct2(&f).unwrap();
        let h = frame_hash(&f).unwrap();
        prop_assert!((h[0] - d.get(0, 1)).abs() < 1e-9 && (h[1] - d.get(1, 0)).abs() < 1e-9);
    }

    #[test]
    fn raw_round_trip_is_exact(
        len in 1usize..5,
        h in 1usize..9,
        w in 1usize..9,
        pixels in prop::collection::vec(any::<u8>(), 8 * 8 * 5),
        num in 1u32..60,
        den in 1u32..4,
    ) {
        let frames: Vec<Frame> = (0..len)
            .map(|k| Frame::from_fn(h, w, |r, c| pixels[k * 64 + r * 8 + c] as f64 / 255.0))
            .collect();
        let v = VideoTensor::new(frames, Fps::new(num, den), "").unwrap();
        let bytes = video::encode_raw(&v).unwrap();
        let back = video::decode_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &v);
        prop_assert_eq!(video::decode_bytes(&bytes).unwrap(), back);
    }

    #[test]
    fn identity_table_synchronizes_to_itself(seed in 0u64..1000, len in 1usize..8) {
        let v = small_video(seed, len, (2, 4));
        prop_assert_eq!(dtw::synchronize(&v, &MatchTable::identity(len), len).unwrap(), v);
    }

    #[test]
    fn store_round_trip_is_exact(
        coeffs in prop::collection::vec(prop::array::uniform2(any::<f64>().prop_filter("finite", |x| x.is_finite())), 1..20),
        flow in prop::collection::vec(0.0f64..1.0, 16),
        ids in prop::collection::btree_set("[a-z]{1,6}", 1..5),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.tvhs");
        for id in &ids {
            let record = HashRecord {
                source_id: id.clone(),
                frame_hashes: FrameHashSeries::new(coeffs.clone()),
                flow_hash: flow::FlowHash::new(flow.clone(), 8),
                config_fingerprint: Fingerprint::of("p"),
            };
            store::put(&record, &path).unwrap();
            prop_assert_eq!(store::get(id, &path).unwrap(), record);
        }
        let listed = store::list(&path).unwrap();
        prop_assert_eq!(listed, ids.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn roc_is_monotone_and_transform_invariant(
        d in prop::collection::vec((0.0f64..5.0, any::<bool>()), 2..60),
    ) {
        let mut pairs: Vec<ScoredPair> = d.iter().map(|&(x, m)| ScoredPair::new(x, if m { boost::Label::Matching } else { boost::Label::Nonmatching })).collect();
        pairs.push(ScoredPair::new(1.0, boost::Label::Matching));
        pairs.push(ScoredPair::new(1.0, boost::Label::Nonmatching));
        let curve = roc(&pairs).unwrap();
        for w in curve.points.windows(2) {
            prop_assert!(w[0].tau <= w[1].tau);
            prop_assert!(w[1].p_m <= w[0].p_m);
            prop_assert!(w[1].p_fa >= w[0].p_fa);
        }
        let moved: Vec<ScoredPair> = pairs.iter().map(|p| ScoredPair::new(2.0 * p.distance + 1.0, p.label)).collect();
        prop_assert!((roc(&moved).unwrap().auc - curve.auc).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&curve.auc));

        let matching = pairs.iter().filter(|p| p.label == boost::Label::Matching).count() as f64;
        let nonmatching = pairs.len() as f64 - matching;
        for &(tau, _) in &d {
            let (p_m, p_fa) = error_rates(&pairs, tau).unwrap();
            let accepted = pairs.iter().filter(|p| p.label == boost::Label::Matching && p.distance < tau).count() as f64;
            let rejected = pairs.iter().filter(|p| p.label == boost::Label::Nonmatching && p.distance >= tau).count() as f64;
            prop_assert!((p_m * matching + accepted - matching).abs() < 1e-9);
            prop_assert!((p_fa * nonmatching + rejected - nonmatching).abs() < 1e-9);
        }
    }

    #[test]
    fn intensity_remap_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let spec = AttackSpec::new(AttackKind::Spatial);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(spec.remap(lo) <= spec.remap(hi));
        prop_assert!((0.0..=1.0).contains(&spec.remap(lo)));
    }

    #[test]
    fn temporal_attack_keeps_survivors_bit_exact(seed in any::<u64>(), len in 4usize..16) {
        let v = small_video(seed % 97, len, (2, 5));
        let spec = AttackSpec::new(AttackKind::Temporal).with_seed(seed);
        let out = attacks::apply(&v, &spec).unwrap();
        prop_assert_eq!(&out, &attacks::apply(&v, &spec).unwrap());
        let keep = out.survivors(len);
        prop_assert_eq!(keep.len(), out.video.len());
        for (k, &i) in keep.iter().enumerate() {
            prop_assert_eq!(out.video.frame(k), v.frame(i));
        }
        prop_assert!(out.dropped.windows(2).all(|w| w[0] < w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn boost_beats_every_grid_point(
        diffs in prop::collection::vec(prop::array::uniform2(-3.0f64..3.0), 1..12),
    ) {
        let eps = boost::DEFAULT_EPS;
        let model = train_on_differences(&diffs, eps).unwrap();
        prop_assert!(model.alpha1 >= 0.0 && model.alpha2 >= 0.0);
        let best = objective(&diffs, [model.alpha1, model.alpha2], eps);
        for a in 0..=200 {
            for b in 0..=200 {
                let grid = objective(&diffs, [a as f64 * 0.05, b as f64 * 0.05], eps);
                prop_assert!(best <= grid + 1e-6, "grid point ({a}, {b}) beats the trained weights");
            }
        }
    }

    #[test]
    fn boost_orders_separable_triplets_and_scales(
        truth in prop::array::uniform2(0.1f64..2.0),
        raw in prop::collection::vec(prop::array::uniform2(-2.0f64..2.0), 2..15),
        c in 0.1f64..10.0,
    ) {
        // shift each difference so that truth . d <= -1
        let diffs: Vec<[f64; 2]> = raw
            .iter()
            .map(|d| {
                let s = truth[0] * d[0] + truth[1] * d[1];
                let shift = if s > -1.0 { (s + 1.0) / (truth[0] + truth[1]) } else { 0.0 };
                [d[0] - shift, d[1] - shift]
            })
            .collect();
        let model = train_on_differences(&diffs, boost::DEFAULT_EPS).unwrap();
        let ordered = |a: [f64; 2]| diffs.iter().filter(|d| a[0] * d[0] + a[1] * d[1] < 0.0).count();
        let boosted = ordered([model.alpha1, model.alpha2]);
        prop_assert!(boosted >= ordered([1.0, 0.0]).max(ordered([0.0, 1.0])));
        prop_assert!(model.train_loss.abs() < 1e-9);

        let scaled: Vec<[f64; 2]> = diffs.iter().map(|d| [c * d[0], c * d[1]]).collect();
        let rescaled = train_on_differences(&scaled, boost::DEFAULT_EPS).unwrap();
        prop_assert!((rescaled.train_loss - model.train_loss).abs() < 1e-9);
        prop_assert!((hinge_loss(&scaled, [model.alpha1 / c, model.alpha2 / c]) - model.train_loss).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn flow_hash_is_unit_norm_and_non_negative(seed in 0u64..10_000) {
        let cfg = small_flow_config();
        let h = flow::flow_hash(&small_video(seed, 27, (3, 6)), &cfg).unwrap();
        prop_assert_eq!(h.len(), cfg.hash_len());
        prop_assert!((h.norm() - 1.0).abs() <= 1e-9);
        prop_assert!(h.values().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn histograms_conserve_flow_magnitude(seed in 0u64..10_000) {
        let cfg = small_flow_config();
        let v = small_video(seed, 18, (3, 6));
        let hists = flow::transition_histograms(&v, &cfg).unwrap();
        let (j, _) = cfg.segmentation(v.len()).unwrap();
        let tiris = flow::frame_average(&v, j).unwrap();
        for (k, hist) in hists.iter().enumerate() {
            let field = flow::optical_flow(&tiris.images[k], &tiris.images[k + 1], &cfg.flow).unwrap();
            let total = field.total_magnitude();
            prop_assert!((hist.iter().sum::<f64>() - total).abs() <= 1e-9 * (1.0 + total));
        }
    }

    #[test]
    fn reversing_directed_motion_changes_the_hash(seed in 0u64..10_000) {
        let cfg = small_flow_config();
        let v = small_video(seed, 27, (100, 100));
        let fwd = flow::flow_hash(&v, &cfg).unwrap();
        let back = flow::flow_hash(&v.reversed(), &cfg).unwrap();
        prop_assert!(boost::d_fh(&fwd, &back).unwrap() > 0.1);
    }

    #[test]
    fn dropping_a_frame_moves_the_average_by_at_most_one_jth(seed in 0u64..10_000, j in 2usize..7, drop in 0usize..7) {
        let v = small_video(seed, 2 * j, (2, 4));
        let drop = drop % j;
        let keep: Vec<usize> = (0..j).filter(|&k| k != drop).collect();
        let tiris = flow::frame_average(&v, j).unwrap();
        let mean = |idx: &[usize]| {
            let mut acc = Frame::filled(v.height(), v.width(), 0.0);
            for &k in idx {
                for (a, x) in acc.data_mut().iter_mut().zip(v.frame(k).data()) {
                    *a += x;
                }
            }
            acc.map(|a| a / idx.len() as f64)
        };
        let all: Vec<usize> = (0..j).collect();
        let spread = all
            .iter()
            .flat_map(|&a| all.iter().map(move |&b| (a, b)))
            .map(|(a, b)| v.frame(a).max_abs_diff(v.frame(b)))
            .fold(0.0, f64::max);
        prop_assert!(tiris.images[0].max_abs_diff(&mean(&all)) < 1e-12);
        prop_assert!(tiris.images[0].max_abs_diff(&mean(&keep)) <= spread / j as f64 + 1e-12);
    }
}

#[test]
fn ingesting_normalized_raw_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { frames: 5, ..SyntheticSpec::default() };
    let v = moving_texture(&spec, 3, "clip").unwrap();
    let path = dir.path().join("clip.tvh");
    video::write_raw(&v, &path).unwrap();
    let once = video::ingest(&path, &IngestConfig::default()).unwrap();
    assert_eq!(once, v);
    video::write_raw(&once, &path).unwrap();
    assert_eq!(video::ingest(&path, &IngestConfig::default()).unwrap(), once);
}
