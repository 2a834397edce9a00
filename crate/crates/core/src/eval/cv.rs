//! Content-wise cross-validation of an RBF-kernel regressor over model
//! features.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svr::{distance_matrix, train, MinMaxScaler, SvrParams};
use super::{correlations, EvalResult, Stratum};
use crate::error::{Error, Result};
use crate::ladder::SpaceTimeConfig;
use crate::stats;

/// Hyperparameter grid searched by inner content-wise validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrGrid {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl Default for SvrGrid {
    /// `C = 2^-5, 2^-1, ..., 2^15`, `gamma = 2^-15, 2^-11, ..., 2^1`,
    /// `epsilon in {0.1, 1}`.
    fn default() -> Self {
        SvrGrid {
            c: (-5..=15).step_by(4).map(|e| 2f64.powi(e)).collect(),
            gamma: (-15..=3).step_by(4).map(|e| 2f64.powi(e)).collect(),
            epsilon: vec![0.1, 1.0],
        }
    }
}

impl SvrGrid {
    pub fn points(&self) -> Vec<SvrParams> {
        let mut out = Vec::new();
        for &c in &self.c {
            for &gamma in &self.gamma {
                for &epsilon in &self.epsilon {
                    out.push(SvrParams { c, gamma, epsilon });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub iterations: usize,
    pub seed: u64,
    pub grid: SvrGrid,
    pub inner_folds: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            iterations: 1000,
            seed: 0,
            grid: SvrGrid::default(),
            inner_folds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvIteration {
    pub iteration: usize,
    pub train_contents: Vec<String>,
    pub test_contents: Vec<String>,
    pub params: SvrParams,
    /// Test-set results per stratum in [`Stratum::ORDER`] (`None` where
    /// undefined).
    pub results: Vec<Option<EvalResult>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary4 {
    pub srcc: f64,
    pub krcc: f64,
    pub plcc: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub stratum: String,
    pub median: Summary4,
    pub std: Summary4,
    /// iterations in which the stratum was defined
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub strata: Vec<StratumSummary>,
    pub iterations: Vec<CvIteration>,
}

impl CvSummary {
    pub fn overall(&self) -> Option<&StratumSummary> {
        self.strata.iter().find(|s| s.stratum == Stratum::All.label())
    }
}

/// Shuffles the distinct contents and deals them into `folds` folds.
pub fn content_folds(contents: &[String], folds: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let mut unique: Vec<String> = contents.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    unique.shuffle(rng);
    let mut out = vec![Vec::new(); folds];
    for (i, c) in unique.into_iter().enumerate() {
        out[i % folds].push(c);
    }
    out
}

fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

/// The train/test content split used by `iteration`.
pub fn split_for_iteration(contents: &[String], cfg: &CvConfig, iteration: usize) -> (Vec<String>, Vec<String>) {
    let mut rng = iteration_rng(cfg.seed, iteration);
    let folds = content_folds(contents, cfg.folds, &mut rng);
    let test = folds[0].clone();
    let train = folds[1..].concat();
    (train, test)
}

fn scaled(features: &[Vec<f64>], train: &[usize]) -> MinMaxScaler {
    let rows: Vec<&[f64]> = train.iter().map(|&i| features[i].as_slice()).collect();
    MinMaxScaler::fit(&rows)
}

/// Picks the grid point with the lowest pooled squared error over an inner
/// content-wise split of the training contents.
fn select_params(
    features: &[Vec<f64>],
    targets: &[f64],
    contents: &[String],
    train_contents: &[String],
    cfg: &CvConfig,
    rng: &mut ChaCha8Rng,
) -> SvrParams {
    let grid = cfg.grid.points();
    if grid.len() == 1 {
        return grid[0];
    }
    let inner = content_folds(train_contents, cfg.inner_folds.min(train_contents.len()), rng);
    let mut sse = vec![0.0; grid.len()];
    for held in &inner {
        let fit_idx: Vec<usize> = (0..contents.len())
            .filter(|&i| train_contents.contains(&contents[i]) && !held.contains(&contents[i]))
            .collect();
        let val_idx: Vec<usize> = (0..contents.len()).filter(|&i| held.contains(&contents[i])).collect();
        if fit_idx.is_empty() || val_idx.is_empty() {
            continue;
        }
        let scaler = scaled(features, &fit_idx);
        let x: Vec<Vec<f64>> = fit_idx.iter().map(|&i| scaler.transform(&features[i])).collect();
        let y: Vec<f64> = fit_idx.iter().map(|&i| targets[i]).collect();
        let xv: Vec<Vec<f64>> = val_idx.iter().map(|&i| scaler.transform(&features[i])).collect();
        let d = distance_matrix(&x);
        for (g, &p) in grid.iter().enumerate() {
            let model = train(&x, &y, p, Some(&d));
            sse[g] += xv
                .iter()
                .zip(&val_idx)
                .map(|(r, &i)| (model.predict(r) - targets[i]).powi(2))
                .sum::<f64>();
        }
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| sse[a].total_cmp(&sse[b]))
        .unwrap_or(0);
    grid[best]
}

fn run_iteration(
    features: &[Vec<f64>],
    targets: &[f64],
    contents: &[String],
    configs: Option<&[SpaceTimeConfig]>,
    cfg: &CvConfig,
    iteration: usize,
) -> CvIteration {
    let mut rng = iteration_rng(cfg.seed, iteration);
    let folds = content_folds(contents, cfg.folds, &mut rng);
    let test_contents = folds[0].clone();
    let train_contents = folds[1..].concat();
    let params = select_params(features, targets, contents, &train_contents, cfg, &mut rng);

    let train_idx: Vec<usize> = (0..contents.len()).filter(|&i| train_contents.contains(&contents[i])).collect();
    let test_idx: Vec<usize> = (0..contents.len()).filter(|&i| test_contents.contains(&contents[i])).collect();
    let scaler = scaled(features, &train_idx);
    let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| scaler.transform(&features[i])).collect();
    let y: Vec<f64> = train_idx.iter().map(|&i| targets[i]).collect();
    let model = train(&x, &y, params, None);
    let pred: Vec<f64> = test_idx.iter().map(|&i| model.predict(&scaler.transform(&features[i]))).collect();

    let results = Stratum::ORDER
        .iter()
        .map(|&s| {
            let (p, t): (Vec<f64>, Vec<f64>) = test_idx
                .iter()
                .zip(&pred)
                .filter(|(&i, _)| configs.map_or(s == Stratum::All, |c| s.contains(c[i])))
                .map(|(&i, &p)| (p, targets[i]))
                .unzip();
            correlations(&p, &t).ok()
        })
        .collect();
    CvIteration {
        iteration,
        train_contents,
        test_contents,
        params,
        results,
    }
}

/// Repeated content-wise hold-out: each iteration tests on one random fold
/// of contents and trains on the rest. `configs`, when given, adds
/// per-stratum results; otherwise only the overall stratum is filled.
pub fn contentwise_cv(
    features: &[Vec<f64>],
    targets: &[f64],
    contents: &[String],
    configs: Option<&[SpaceTimeConfig]>,
    cfg: &CvConfig,
) -> Result<CvSummary> {
    let n = features.len();
    if targets.len() != n || contents.len() != n || configs.is_some_and(|c| c.len() != n) {
        return Err(Error::InvalidArgument("features, targets and labels must align".into()));
    }
    let unique = contents.iter().collect::<BTreeSet<_>>().len();
    if cfg.folds < 2 || unique < cfg.folds {
        return Err(Error::Config(format!(
            "{} folds over {unique} contents leaves a fold without content",
            cfg.folds
        )));
    }
    if unique < 5 {
        return Err(Error::Config(format!("cross-validation needs at least 5 contents, got {unique}")));
    }
    if cfg.iterations == 0 || cfg.grid.points().is_empty() {
        return Err(Error::Config("empty iteration count or grid".into()));
    }
    if let Some(k) = features.first().map(|f| f.len()) {
        if features.iter().any(|f| f.len() != k) {
            return Err(Error::InvalidArgument("ragged feature rows".into()));
        }
    }

    let iterations: Vec<CvIteration> = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| run_iteration(features, targets, contents, configs, cfg, it))
        .collect();

    let strata = Stratum::ORDER
        .iter()
        .enumerate()
        .filter_map(|(k, s)| {
            let rs: Vec<&EvalResult> = iterations.iter().filter_map(|it| it.results[k].as_ref()).collect();
            if rs.is_empty() {
                return None;
            }
            let col = |f: fn(&EvalResult) -> f64| -> (f64, f64) {
                let v: Vec<f64> = rs.iter().map(|r| f(r)).collect();
                let sd = if v.len() > 1 { stats::sample_std(&v) } else { 0.0 };
                (stats::median(&v), sd)
            };
            let (srcc, krcc, plcc, rmse) = (col(|r| r.srcc), col(|r| r.krcc), col(|r| r.plcc), col(|r| r.rmse));
            Some(StratumSummary {
                stratum: s.label().to_string(),
                median: Summary4 {
                    srcc: srcc.0,
                    krcc: krcc.0,
                    plcc: plcc.0,
                    rmse: rmse.0,
                },
                std: Summary4 {
                    srcc: srcc.1,
                    krcc: krcc.1,
                    plcc: plcc.1,
                    rmse: rmse.1,
                },
                count: rs.len(),
            })
        })
        .collect();
    Ok(CvSummary { strata, iterations })
}
