use std::collections::HashMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stvq_core::hull::{
    aggregate_curve, analyze, convex_hull_quality, dominates, pareto_filter, t_half_width, RdCurve, RdPoint,
};
use stvq_core::ladder::{generate_content, CodecDriver, SyntheticCodec, TemporalLevel};
use stvq_core::manifest::Manifest;
use stvq_core::metrics::Metric;
use stvq_core::scores::compute_dmos;
use stvq_core::stats::{mean, special::ln_gamma};
use stvq_core::synth::{full_playlists, psnr_to_quality, score_study, synthetic_clip, SceneParams, SubjectPanel};

fn points() -> impl Strategy<Value = Vec<RdPoint>> {
    // a coarse lattice so equal bitrates and equal qualities both occur
    prop::collection::vec((1u32..40, 0u32..40), 1..50)
        .prop_map(|v| v.into_iter().map(|(b, q)| RdPoint::new(b as f64 * 1e5, q as f64)).collect())
}

fn key(p: &RdPoint) -> (u64, u64) {
    (p.bitrate.to_bits(), p.quality.to_bits())
}

fn sorted_keys(pts: &[RdPoint]) -> Vec<(u64, u64)> {
    let mut k: Vec<_> = pts.iter().map(key).collect();
    k.sort_unstable();
    k
}

fn pareto_oracle(pts: &[RdPoint]) -> Vec<RdPoint> {
    pts.iter()
        .filter(|p| {
            !pts.iter().any(|q| {
                q.bitrate <= p.bitrate && q.quality >= p.quality && (q.bitrate < p.bitrate || q.quality > p.quality)
            })
        })
        .cloned()
        .collect()
}

fn on_or_below(p: &RdPoint, a: &RdPoint, b: &RdPoint) -> bool {
    let t = (p.bitrate - a.bitrate) / (b.bitrate - a.bitrate);
    p.quality <= a.quality + t * (b.quality - a.quality) + 1e-9
}

/// Smallest subset of the front, endpoints included, whose polyline is on
/// or above every front point. Found by trying all subsets.
fn hull_oracle(pts: &[RdPoint]) -> Vec<(u64, u64)> {
    let mut front = pareto_oracle(pts);
    front.sort_by(|a, b| a.bitrate.total_cmp(&b.bitrate));
    front.dedup_by(|a, b| a.bitrate == b.bitrate);
    if front.len() <= 2 {
        return front.iter().map(key).collect();
    }
    let inner = front.len() - 2;
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << inner) {
        let mut idx = vec![0];
        idx.extend((0..inner).filter(|i| mask & (1 << i) != 0).map(|i| i + 1));
        idx.push(front.len() - 1);
        let covers = front.iter().all(|p| {
            idx.windows(2).any(|w| {
                let (a, b) = (&front[w[0]], &front[w[1]]);
                p.bitrate >= a.bitrate && p.bitrate <= b.bitrate && on_or_below(p, a, b)
            })
        });
        if covers && best.as_ref().is_none_or(|b| idx.len() < b.len()) {
            best = Some(idx);
        }
    }
    best.unwrap().into_iter().map(|i| key(&front[i])).collect()
}

fn t_quantile_oracle(p: f64, nu: f64) -> f64 {
    let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln();
    let pdf = |t: f64| (c - (nu + 1.0) / 2.0 * (1.0 + t * t / nu).ln()).exp();
    let cdf = |x: f64| {
        let n = 4000;
        let h = x / n as f64;
        let mut s = pdf(0.0) + pdf(x);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * pdf(k as f64 * h);
        }
        0.5 + s * h / 3.0
    };
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn t_interval_half_width() {
    // thirty values with sample std exactly 13.62
    let base: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
    let (m, s) = (mean(&base), stvq_core::stats::sample_std(&base));
    let values: Vec<f64> = base.iter().map(|v| 50.0 + (v - m) / s * 13.62).collect();
    let want = t_quantile_oracle(0.975, 29.0) * 13.62 / 30f64.sqrt();
    let got = t_half_width(&values);
    assert!((got - want).abs() < 1e-2, "{got} vs {want}");
    assert!((got - 5.086).abs() < 1e-2, "{got}");
}

#[test]
fn fast_motion_favours_full_rate() {
    // A fast pan makes frame-averaged interpolation visibly wrong.
    let scene = SceneParams {
        detail: 30.0,
        structure: 50.0,
        motion: (5.0, 2.5),
        color: 30.0,
        seed: 21,
    };
    // extra penalty for judder on top of the interpolation error
    let judder = 0.4 * (scene.motion.0.hypot(scene.motion.1));
    let driver = CodecDriver::Synthetic(SyntheticCodec::default());
    let qps: Vec<u8> = (22..=51).step_by(3).chain([51]).collect();
    let source = synthetic_clip(192, 108, 8, 60.0, &scene).unwrap();
    let generated = generate_content("pan", &source, &driver, &qps).unwrap();
    let mut entries = Vec::new();
    let mut quality = HashMap::new();
    for (entry, clip) in generated.stimuli {
        let psnr = mean(&Metric::Psnr.frames(&source, &clip).unwrap());
        let mut q = psnr_to_quality(psnr, 20.0, 50.0);
        if !entry.is_reference && entry.temporal == TemporalLevel::Half {
            q = (q - judder).max(0.0);
        }
        quality.insert(entry.stimulus_id.clone(), q);
        entries.push(entry);
    }
    let manifest = Manifest::new(entries).unwrap();
    let matrix = SubjectPanel::generate(24, 0, 2.0, 22)
        .simulate(&full_playlists(&manifest, 24), &manifest, &quality, 23)
        .unwrap();
    let dmos = compute_dmos(&matrix).unwrap().scores;
    let a = analyze(&dmos, &manifest, Some("pan"), 64).unwrap();
    let mut checked = 0;
    for curve in a.curves.iter().filter(|c| c.label.ends_with("half")) {
        for p in &curve.points {
            if let Some((q, _, _)) = a.spatial_hull.interpolate(p.bitrate) {
                assert!(q > p.quality, "{} at {:.0} bps: hull {q:.2} vs {:.2}", curve.label, p.bitrate, p.quality);
                checked += 1;
            }
        }
    }
    assert!(checked >= 10, "only {checked} comparable points");
    assert!(a.best_config_per_level().values().all(|c| c.temporal == TemporalLevel::Full));
}

fn curve_key(c: &RdCurve) -> Vec<(u64, u64, u64)> {
    c.points
        .iter()
        .map(|p| (p.bitrate.to_bits(), p.quality.to_bits(), p.ci_half_width.to_bits()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pareto_matches_pairwise_scan(pts in points()) {
        let fast = pareto_filter(&pts);
        prop_assert_eq!(sorted_keys(&fast), sorted_keys(&pareto_oracle(&pts)));
        prop_assert!(fast.windows(2).all(|w| w[0].bitrate <= w[1].bitrate));
        // idempotent
        prop_assert_eq!(sorted_keys(&pareto_filter(&fast)), sorted_keys(&fast));
    }

    #[test]
    fn hull_matches_subset_search(pts in points(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample = pts.clone();
        sample.shuffle(&mut rng);
        sample.truncate(10);
        if sample.len() > 1 && sample.iter().all(|p| p.bitrate == sample[0].bitrate) {
            return Ok(());
        }
        let hull = convex_hull_quality("h", &sample).unwrap();
        let got: Vec<_> = hull.points.iter().map(key).collect();
        prop_assert_eq!(got, hull_oracle(&sample));
    }

    #[test]
    fn hull_is_concave_and_undominated(pts in points()) {
        if pts.len() > 1 && pts.iter().all(|p| p.bitrate == pts[0].bitrate) {
            return Ok(());
        }
        let hull = convex_hull_quality("h", &pts).unwrap();
        let slopes: Vec<f64> = hull
            .points
            .windows(2)
            .map(|w| (w[1].quality - w[0].quality) / (w[1].bitrate - w[0].bitrate))
            .collect();
        prop_assert!(slopes.iter().all(|&s| s > 0.0));
        prop_assert!(slopes.windows(2).all(|w| w[0] > w[1]));
        for h in &hull.points {
            prop_assert!(!pts.iter().any(|p| dominates(p, h)));
        }
    }

    #[test]
    fn larger_pool_hull_never_lower(pts in points(), extra in points()) {
        let small = convex_hull_quality("s", &pts);
        let mut all = pts.clone();
        all.extend(extra);
        let (Ok(small), Ok(big)) = (small, convex_hull_quality("b", &all)) else {
            return Ok(());
        };
        for p in &small.points {
            if let Some((q, _, _)) = big.interpolate(p.bitrate) {
                prop_assert!(q >= p.quality - 1e-9);
            }
        }
    }

    #[test]
    fn aggregation_ignores_entry_order(seed in any::<u64>()) {
        let (mut m, q) = score_study(4, 64, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for e in m.entries.iter_mut().filter(|e| !e.is_reference) {
            e.achieved_bitrate = Some(1e6 / e.target_level.unwrap() as f64 * (1.0 + (e.qp.unwrap() % 3) as f64));
        }
        let matrix = SubjectPanel::generate(8, 0, 2.0, seed)
            .simulate(&full_playlists(&m, 8), &m, &q, seed + 1)
            .unwrap();
        let dmos = compute_dmos(&matrix).unwrap().scores;
        let mut shuffled = m.clone();
        shuffled.entries.shuffle(&mut rng);
        let a = aggregate_curve("a", &dmos, &m, |_| true).unwrap();
        let b = aggregate_curve("a", &dmos, &shuffled, |_| true).unwrap();
        let (ka, kb) = (curve_key(&a), curve_key(&b));
        prop_assert_eq!(ka.len(), kb.len());
        for (x, y) in a.points.iter().zip(&b.points) {
            prop_assert!((x.bitrate - y.bitrate).abs() <= 1e-9 * x.bitrate);
            prop_assert!((x.quality - y.quality).abs() <= 1e-9);
            prop_assert!((x.ci_half_width - y.ci_half_width).abs() <= 1e-9);
        }
    }
}
