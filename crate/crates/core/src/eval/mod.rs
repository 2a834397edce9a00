//! Quality-model benchmarking: logistic linearization, SRCC/KRCC/PLCC/RMSE,
//! residual F-tests, per-stratum tables and content-wise cross-validation.

pub mod cv;
pub mod logistic;
pub mod svr;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use cv::{content_folds, contentwise_cv, split_for_iteration, CvConfig, CvIteration, CvSummary, StratumSummary, Summary4, SvrGrid};
pub use logistic::{fit_logistic, logistic, LogisticFit};
pub use svr::{MinMaxScaler, SvrModel, SvrParams};

use crate::error::{Error, Result};
use crate::ladder::{SpaceTimeConfig, SpatialLevel, TemporalLevel};
use crate::manifest::Manifest;
use crate::scores::OpinionScores;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub srcc: f64,
    pub krcc: f64,
    pub plcc: f64,
    pub rmse: f64,
    pub n: usize,
    /// PLCC and RMSE were computed after a logistic fit (otherwise on the raw
    /// predictions).
    pub mapped: bool,
    pub converged: bool,
}

/// SRCC and KRCC on raw predictions; PLCC and RMSE after logistic mapping.
pub fn correlations(pred: &[f64], truth: &[f64]) -> Result<EvalResult> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < 3 {
        return Err(Error::Undefined(format!(
            "correlations need at least 3 points, got {}",
            pred.len()
        )));
    }
    let srcc = stats::spearman(pred, truth)?;
    let krcc = stats::kendall_tau_b(pred, truth)?;
    let (mapped_pred, mapped, converged) = match fit_logistic(pred, truth) {
        Ok(fit) => (fit.map(pred), true, fit.converged),
        Err(_) => (pred.to_vec(), false, false),
    };
    let plcc = stats::pearson(&mapped_pred, truth)?;
    Ok(EvalResult {
        srcc,
        krcc,
        plcc,
        rmse: stats::rmse(&mapped_pred, truth),
        n: pred.len(),
        mapped,
        converged,
    })
}

/// `truth - Q(pred)` after the logistic mapping.
pub fn logistic_residuals(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    let fit = fit_logistic(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(&p, &t)| t - fit.eval(p)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FVerdict {
    Equivalent,
    ABetter,
    BBetter,
}

impl FVerdict {
    /// Cell symbol from A's point of view.
    pub fn symbol(self) -> char {
        match self {
            FVerdict::Equivalent => '-',
            FVerdict::ABetter => '1',
            FVerdict::BBetter => '0',
        }
    }
}

pub const F_TEST_CONFIDENCE: f64 = 0.95;

/// Two-sided variance-ratio test on residuals.
pub fn f_test(residuals_a: &[f64], residuals_b: &[f64]) -> Result<FVerdict> {
    let (na, nb) = (residuals_a.len(), residuals_b.len());
    if na < 2 || nb < 2 {
        return Err(Error::InvalidArgument(format!(
            "F-test needs at least 2 residuals per model, got {na} and {nb}"
        )));
    }
    let va = stats::sample_variance(residuals_a);
    let vb = stats::sample_variance(residuals_b);
    let verdict = match (va == 0.0, vb == 0.0) {
        (true, true) => FVerdict::Equivalent,
        (true, false) => FVerdict::ABetter,
        (false, true) => FVerdict::BBetter,
        (false, false) => {
            let cdf = stats::special::f_cdf(va / vb, (na - 1) as f64, (nb - 1) as f64);
            let alpha = (1.0 - F_TEST_CONFIDENCE) / 2.0;
            if cdf < alpha {
                FVerdict::ABetter
            } else if cdf > 1.0 - alpha {
                FVerdict::BBetter
            } else {
                FVerdict::Equivalent
            }
        }
    };
    Ok(verdict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Half,
    Full,
    Spatial(SpatialLevel),
    All,
}

impl Stratum {
    /// Column order of the stratified tables and significance cells.
    pub const ORDER: [Stratum; 7] = [
        Stratum::Half,
        Stratum::Full,
        Stratum::Spatial(SpatialLevel::P540),
        Stratum::Spatial(SpatialLevel::P720),
        Stratum::Spatial(SpatialLevel::P1080),
        Stratum::Spatial(SpatialLevel::P2160),
        Stratum::All,
    ];

    pub fn contains(self, config: SpaceTimeConfig) -> bool {
        match self {
            Stratum::Half => config.temporal == TemporalLevel::Half,
            Stratum::Full => config.temporal == TemporalLevel::Full,
            Stratum::Spatial(s) => config.spatial == s,
            Stratum::All => true,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stratum::Half => "half",
            Stratum::Full => "full",
            Stratum::Spatial(s) => s.label(),
            Stratum::All => "all",
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Full-reference models are judged against DMOS, no-reference models
/// against MOS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    Fr,
    Nr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub name: String,
    pub class: ModelClass,
    pub scores: BTreeMap<String, f64>,
}

/// Aligned (prediction, truth) pairs of one model inside one stratum.
fn stratum_pairs(
    model: &ModelScores,
    stratum: Stratum,
    manifest: &Manifest,
    dmos: &OpinionScores,
    mos: &OpinionScores,
) -> (Vec<f64>, Vec<f64>) {
    let truth = match model.class {
        ModelClass::Fr => dmos.as_map(),
        ModelClass::Nr => mos.as_map(),
    };
    manifest
        .distorted()
        .filter(|e| stratum.contains(e.config()))
        .filter_map(|e| {
            let p = model.scores.get(&e.stimulus_id)?;
            let t = truth.get(e.stimulus_id.as_str())?;
            Some((*p, *t))
        })
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BestFlags {
    pub srcc: bool,
    pub krcc: bool,
    pub plcc: bool,
    pub rmse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub result: EvalResult,
    pub best: BestFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub class: ModelClass,
    /// One entry per stratum in [`Stratum::ORDER`].
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub strata: Vec<String>,
    pub rows: Vec<ModelRow>,
    pub warnings: Vec<String>,
}

/// Indices of the two best values (`higher` selects the direction), ties
/// broken by row order.
pub fn two_best(values: &[Option<f64>], higher: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (values[a].unwrap(), values[b].unwrap());
        if higher { y.total_cmp(&x) } else { x.total_cmp(&y) }
    });
    idx.truncate(2);
    idx
}

/// Per-stratum correlations for each model. Rank correlations are reported
/// with their sign; the two-best flags rank correlations by magnitude and
/// RMSE by smallest value.
pub fn stratified_report(
    models: &[ModelScores],
    manifest: &Manifest,
    dmos: &OpinionScores,
    mos: &OpinionScores,
) -> StratifiedReport {
    let mut warnings = Vec::new();
    let mut rows: Vec<ModelRow> = models
        .iter()
        .map(|m| ModelRow {
            model: m.name.clone(),
            class: m.class,
            cells: Stratum::ORDER
                .iter()
                .map(|&s| {
                    let (p, t) = stratum_pairs(m, s, manifest, dmos, mos);
                    match correlations(&p, &t) {
                        Ok(result) => Some(Cell {
                            result,
                            best: BestFlags::default(),
                        }),
                        Err(e) => {
                            warnings.push(format!("{} / {s}: omitted ({e})", m.name));
                            None
                        }
                    }
                })
                .collect(),
        })
        .collect();
    for col in 0..Stratum::ORDER.len() {
        let column = |f: fn(&EvalResult) -> f64| -> Vec<Option<f64>> {
            rows.iter()
                .map(|r| r.cells[col].as_ref().map(|c| f(&c.result)))
                .collect()
        };
        let srcc = two_best(&column(|r| r.srcc.abs()), true);
        let krcc = two_best(&column(|r| r.krcc.abs()), true);
        let plcc = two_best(&column(|r| r.plcc.abs()), true);
        let rmse = two_best(&column(|r| r.rmse), false);
        for (i, row) in rows.iter_mut().enumerate() {
            if let Some(cell) = row.cells[col].as_mut() {
                cell.best = BestFlags {
                    srcc: srcc.contains(&i),
                    krcc: krcc.contains(&i),
                    plcc: plcc.contains(&i),
                    rmse: rmse.contains(&i),
                };
            }
        }
    }
    StratifiedReport {
        strata: Stratum::ORDER.iter().map(|s| s.label().to_string()).collect(),
        rows,
        warnings,
    }
}

/// Pairwise F-test verdicts. `cells[a][b]` holds one symbol per stratum in
/// [`Stratum::ORDER`]: `1` row model better, `0` worse, `-` equivalent or
/// not testable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub models: Vec<String>,
    pub strata: Vec<String>,
    pub cells: Vec<Vec<String>>,
}

pub fn significance_matrix(
    models: &[ModelScores],
    manifest: &Manifest,
    dmos: &OpinionScores,
    mos: &OpinionScores,
) -> SignificanceMatrix {
    let residuals: Vec<Vec<Option<Vec<f64>>>> = models
        .iter()
        .map(|m| {
            Stratum::ORDER
                .iter()
                .map(|&s| {
                    let (p, t) = stratum_pairs(m, s, manifest, dmos, mos);
                    logistic_residuals(&p, &t).ok()
                })
                .collect()
        })
        .collect();
    let cells = (0..models.len())
        .map(|a| {
            (0..models.len())
                .map(|b| {
                    (0..Stratum::ORDER.len())
                        .map(|s| match (&residuals[a][s], &residuals[b][s]) {
                            (Some(ra), Some(rb)) if a != b => {
                                f_test(ra, rb).map_or('-', FVerdict::symbol)
                            }
                            _ => '-',
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    SignificanceMatrix {
        models: models.iter().map(|m| m.name.clone()).collect(),
        strata: Stratum::ORDER.iter().map(|s| s.label().to_string()).collect(),
        cells,
    }
}

/// `median (std)` with four decimals.
pub fn format_median_std(median: f64, std: f64) -> String {
    format!("{median:.4} ({std:.4})")
}
