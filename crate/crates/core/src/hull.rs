//! Rate-quality curves per space-time configuration, Pareto filtering,
//! upper convex hulls, and pointwise comparison of curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{SpaceTimeConfig, SpatialLevel, TemporalLevel};
use crate::manifest::{Manifest, ManifestEntry};
use crate::scores::OpinionScores;
use crate::stats;

pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// bits per second
    pub bitrate: f64,
    /// `100 - mean DMOS`
    pub quality: f64,
    pub n: usize,
    pub ci_half_width: f64,
    /// `n == 1`, so no interval could be formed
    #[serde(default)]
    pub single_sample: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SpaceTimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
}

impl RdPoint {
    pub fn new(bitrate: f64, quality: f64) -> Self {
        RdPoint {
            bitrate,
            quality,
            n: 1,
            ci_half_width: 0.0,
            single_sample: true,
            config: None,
            level: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdCurve {
    pub label: String,
    /// strictly increasing bitrate
    pub points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn min_bitrate(&self) -> f64 {
        self.points.first().map_or(f64::NAN, |p| p.bitrate)
    }

    pub fn max_bitrate(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.bitrate)
    }

    /// Piecewise-linear (quality, ci, nearest-vertex index) at `bitrate`, or
    /// `None` outside the curve's range.
    pub fn interpolate(&self, bitrate: f64) -> Option<(f64, f64, usize)> {
        let pts = &self.points;
        if pts.is_empty() || bitrate < pts[0].bitrate || bitrate > pts[pts.len() - 1].bitrate {
            return None;
        }
        if pts.len() == 1 {
            return Some((pts[0].quality, pts[0].ci_half_width, 0));
        }
        let k = pts.windows(2).position(|w| bitrate <= w[1].bitrate).unwrap_or(pts.len() - 2);
        let (a, b) = (&pts[k], &pts[k + 1]);
        let t = (bitrate - a.bitrate) / (b.bitrate - a.bitrate);
        let near = if t <= 0.5 { k } else { k + 1 };
        Some((
            a.quality + t * (b.quality - a.quality),
            a.ci_half_width + t * (b.ci_half_width - a.ci_half_width),
            near,
        ))
    }
}

/// Student-t half width of the 95% interval of the mean.
pub fn t_half_width(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let t = stats::special::t_quantile(0.5 + CI_LEVEL / 2.0, (n - 1) as f64);
    t * stats::sample_std(values) / (n as f64).sqrt()
}

/// One point per target level over the entries accepted by `filter`:
/// mean achieved bitrate and `100 - mean DMOS`, with a t-interval over the
/// per-video DMOS. Levels that land on the same mean bitrate are pooled.
pub fn aggregate_curve(
    label: &str,
    scores: &OpinionScores,
    manifest: &Manifest,
    filter: impl Fn(&ManifestEntry) -> bool,
) -> Result<RdCurve> {
    let dmos = scores.as_map();
    let mut by_level: BTreeMap<u8, (Vec<f64>, Vec<f64>, Vec<SpaceTimeConfig>)> = BTreeMap::new();
    for e in manifest.distorted().filter(|e| filter(e)) {
        let (Some(level), Some(rate), Some(&d)) = (e.target_level, e.achieved_bitrate, dmos.get(e.stimulus_id.as_str())) else {
            continue;
        };
        let slot = by_level.entry(level).or_default();
        slot.0.push(rate);
        slot.1.push(d);
        slot.2.push(e.config());
    }
    if by_level.is_empty() {
        return Err(Error::InvalidArgument(format!("no scored stimuli match curve {label}")));
    }
    let mut groups: Vec<(f64, Vec<f64>, Option<SpaceTimeConfig>, Option<u8>)> = by_level
        .into_iter()
        .map(|(level, (rates, ds, configs))| {
            let config = configs.iter().all(|c| *c == configs[0]).then_some(configs[0]);
            (stats::mean(&rates), ds, config, Some(level))
        })
        .collect();
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, Vec<f64>, Option<SpaceTimeConfig>, Option<u8>)> = Vec::new();
    for g in groups {
        match merged.last_mut() {
            Some(last) if last.0 == g.0 => {
                last.1.extend(g.1);
                if last.2 != g.2 {
                    last.2 = None;
                }
                last.3 = None;
            }
            _ => merged.push(g),
        }
    }
    let points = merged
        .into_iter()
        .map(|(bitrate, ds, config, level)| {
            let quality = 100.0 - stats::mean(&ds);
            let ci_half_width = t_half_width(&ds);
            RdPoint {
                bitrate,
                quality,
                n: ds.len(),
                ci_half_width,
                single_sample: ds.len() == 1,
                config,
                level,
            }
        })
        .collect();
    Ok(RdCurve {
        label: label.to_string(),
        points,
    })
}

/// Whether `q` dominates `p`.
pub fn dominates(q: &RdPoint, p: &RdPoint) -> bool {
    q.bitrate <= p.bitrate && q.quality >= p.quality && (q.bitrate < p.bitrate || q.quality > p.quality)
}

/// Drops every point dominated by another (no more bitrate, no less
/// quality, one strictly better). Output sorted by bitrate.
pub fn pareto_filter(points: &[RdPoint]) -> Vec<RdPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.bitrate.total_cmp(&b.bitrate).then(b.quality.total_cmp(&a.quality)));
    let mut out: Vec<RdPoint> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        // All points sharing this bitrate: only the top quality survives.
        let mut j = i;
        while j < sorted.len() && sorted[j].bitrate == sorted[i].bitrate {
            j += 1;
        }
        let top = sorted[i].quality;
        if top > best {
            out.extend(sorted[i..j].iter().filter(|p| p.quality == top).cloned());
            best = top;
        }
        i = j;
    }
    out
}

fn cross(o: &RdPoint, a: &RdPoint, b: &RdPoint) -> f64 {
    (a.bitrate - o.bitrate) * (b.quality - o.quality) - (a.quality - o.quality) * (b.bitrate - o.bitrate)
}

/// Upper convex hull in (bitrate, quality) over the non-dominated points.
pub fn convex_hull_quality(label: &str, points: &[RdPoint]) -> Result<RdCurve> {
    if points.is_empty() {
        return Err(Error::DegenerateRd("no points".into()));
    }
    if points.len() > 1 && points.iter().all(|p| p.bitrate == points[0].bitrate) {
        return Err(Error::DegenerateRd("all points share one bitrate".into()));
    }
    let front = pareto_filter(points);
    let mut hull: Vec<RdPoint> = Vec::with_capacity(front.len());
    for p in front {
        if hull.last().is_some_and(|l| l.bitrate == p.bitrate) {
            continue;
        }
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(RdCurve {
        label: label.to_string(),
        points: hull,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub bitrate: f64,
    pub quality: Vec<f64>,
    pub ci_half_width: Vec<f64>,
    /// index of the highest curve
    pub best: usize,
    /// all curves equal at this bitrate
    pub equal: bool,
    /// best curve's interval clears every other curve's interval
    pub separated: bool,
    /// configuration of the nearest vertex, per curve
    pub nearest_config: Vec<Option<SpaceTimeConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub labels: Vec<String>,
    pub rows: Vec<GridRow>,
    pub warnings: Vec<String>,
}

impl DominanceReport {
    /// Whether curve quality is non-increasing in the listed order at every
    /// grid point, within `tol`.
    pub fn ordered(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.quality.windows(2).all(|w| w[0] + tol >= w[1]))
    }
}

/// Evaluates all curves on `grid_points` evenly spaced bitrates over their
/// common range.
pub fn compare_curves(curves: &[&RdCurve], grid_points: usize) -> DominanceReport {
    let labels = curves.iter().map(|c| c.label.clone()).collect();
    let lo = curves.iter().map(|c| c.min_bitrate()).fold(f64::NEG_INFINITY, f64::max);
    let hi = curves.iter().map(|c| c.max_bitrate()).fold(f64::INFINITY, f64::min);
    if curves.is_empty() || !(lo <= hi) {
        return DominanceReport {
            labels,
            rows: Vec::new(),
            warnings: vec!["curves have no common bitrate range".into()],
        };
    }
    let n = grid_points.max(1);
    let rows = (0..n)
        .map(|k| {
            let bitrate = if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
            let vals: Vec<(f64, f64, usize)> = curves
                .iter()
                .map(|c| c.interpolate(bitrate).expect("inside common range"))
                .collect();
            let quality: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let ci: Vec<f64> = vals.iter().map(|v| v.1).collect();
            let best = (0..quality.len())
                .max_by(|&a, &b| quality[a].total_cmp(&quality[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            let equal = quality.iter().all(|q| (q - quality[0]).abs() <= 1e-12);
            let separated = !equal
                && (0..quality.len())
                    .filter(|&i| i != best)
                    .all(|i| quality[best] - ci[best] > quality[i] + ci[i]);
            GridRow {
                bitrate,
                nearest_config: curves
                    .iter()
                    .zip(&vals)
                    .map(|(c, v)| c.points[v.2].config)
                    .collect(),
                quality,
                ci_half_width: ci,
                best,
                equal,
                separated,
            }
        })
        .collect();
    DominanceReport {
        labels,
        rows,
        warnings: Vec::new(),
    }
}

/// Which configurations enter a hull.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HullSet {
    /// full frame rate, all resolutions
    Spatial,
    /// all eight configurations
    Spacetime,
}

impl HullSet {
    pub fn includes(self, c: SpaceTimeConfig) -> bool {
        match self {
            HullSet::Spatial => c.temporal == TemporalLevel::Full,
            HullSet::Spacetime => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullAnalysis {
    /// `None` for the database-wide analysis
    pub content: Option<String>,
    pub curves: Vec<RdCurve>,
    pub spatial_hull: RdCurve,
    pub spacetime_hull: RdCurve,
    pub fixed: RdCurve,
    /// space-time hull vs spatial hull vs fixed full-resolution curve
    pub comparison: DominanceReport,
}

impl HullAnalysis {
    pub fn hull(&self, set: HullSet) -> &RdCurve {
        match set {
            HullSet::Spatial => &self.spatial_hull,
            HullSet::Spacetime => &self.spacetime_hull,
        }
    }

    /// The configuration with the highest quality at each target level.
    pub fn best_config_per_level(&self) -> BTreeMap<u8, SpaceTimeConfig> {
        let mut best: BTreeMap<u8, (f64, SpaceTimeConfig)> = BTreeMap::new();
        for p in self.curves.iter().flat_map(|c| &c.points) {
            let (Some(level), Some(config)) = (p.level, p.config) else {
                continue;
            };
            if best.get(&level).is_none_or(|(q, _)| p.quality > *q) {
                best.insert(level, (p.quality, config));
            }
        }
        best.into_iter().map(|(l, (_, c))| (l, c)).collect()
    }
}

/// Per-configuration curves, both hulls, and the three-way comparison, over
/// the whole database or one content.
pub fn analyze(
    scores: &OpinionScores,
    manifest: &Manifest,
    content: Option<&str>,
    grid_points: usize,
) -> Result<HullAnalysis> {
    let in_scope = |e: &ManifestEntry| content.is_none_or(|c| e.content == c);
    let mut curves = Vec::new();
    for config in SpaceTimeConfig::all() {
        if !manifest.distorted().any(|e| in_scope(e) && e.config() == config) {
            continue;
        }
        curves.push(aggregate_curve(&config.to_string(), scores, manifest, |e| {
            in_scope(e) && e.config() == config
        })?);
    }
    let pool = |set: HullSet| -> Vec<RdPoint> {
        curves
            .iter()
            .flat_map(|c| c.points.iter())
            .filter(|p| p.config.is_some_and(|c| set.includes(c)))
            .cloned()
            .collect()
    };
    let spatial_hull = convex_hull_quality("spatial hull", &pool(HullSet::Spatial))?;
    let spacetime_hull = convex_hull_quality("space-time hull", &pool(HullSet::Spacetime))?;
    let full = SpaceTimeConfig::new(SpatialLevel::P2160, TemporalLevel::Full).to_string();
    let fixed = curves
        .iter()
        .find(|c| c.label == full)
        .cloned()
        .ok_or_else(|| Error::DegenerateRd("no full-resolution, full-rate stimuli".into()))?;
    let comparison = compare_curves(&[&spacetime_hull, &spatial_hull, &fixed], grid_points);
    Ok(HullAnalysis {
        content: content.map(str::to_string),
        curves,
        spatial_hull,
        spacetime_hull,
        fixed,
        comparison,
    })
}
