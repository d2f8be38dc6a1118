//! Patient-level nonparametric bootstrap confidence intervals.
//!
//! Each replicate resamples `n` patients with replacement (covariate
//! histories travel with their patients) and re-runs the full estimation
//! pipeline — including the hazard-model refit for the model-based method.
//! Pointwise percentile intervals are taken over the successful replicates;
//! replicates on which the estimator fails (for example from degenerate
//! weights in an unlucky resample) are excluded and counted, and the run
//! aborts when more than a fifth of them fail.
//!
//! Replicate index keys the resampling randomness, so results are identical
//! across thread counts and execution order.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use rand::Rng;

use crate::cohort::{ObservedPatient, TimeGrid};
use crate::error::{Error, Result};
use crate::estimators::{ccif_censoring, ccif_competing, ccif_exclusion, EstimateCurve};
use crate::ipcw::{ipcw_model_estimate, CovariateHistory};
use crate::lifetable::LifeTable;
use crate::rng::{CounterRng, DrawKind, StreamArm};

/// Counterfactual cumulative-incidence estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcifMethod {
    /// Treat onset as explainable censoring; unconditional nonparametric
    /// product-limit weights.
    Censoring,
    /// Drop ever-infected patients and rescale by a constant factor.
    Exclusion,
    /// Treat onset as a competing event; landmark ratio.
    Competing,
    /// Conditional model-based weights from a pooled discrete-time logistic
    /// hazard fit on the covariate history.
    Ipcw,
}

impl CcifMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CcifMethod::Censoring => "censoring",
            CcifMethod::Exclusion => "exclusion",
            CcifMethod::Competing => "competing",
            CcifMethod::Ipcw => "ipcw",
        }
    }
}

/// Run one counterfactual estimator end to end.
///
/// The model-based method refits the onset-hazard model on the given cohort;
/// it requires a covariate history (possibly with zero covariate columns,
/// which reduces it to the unconditional censoring estimator).
pub fn estimate_ccif(
    method: CcifMethod,
    cohort: &[ObservedPatient],
    covariates: Option<&CovariateHistory>,
    grid: &TimeGrid,
) -> Result<EstimateCurve> {
    match method {
        CcifMethod::Censoring => ccif_censoring(&LifeTable::from_three_state(cohort, grid)),
        CcifMethod::Exclusion => ccif_exclusion(&LifeTable::from_three_state(cohort, grid)),
        CcifMethod::Competing => ccif_competing(&LifeTable::from_three_state(cohort, grid)),
        CcifMethod::Ipcw => {
            let covariates = covariates.ok_or_else(|| Error::MethodDataMismatch {
                method: "ipcw".into(),
                missing: "a per-day covariate history (covariates.csv)".into(),
            })?;
            ipcw_model_estimate(cohort, covariates, grid).map(|(_, curve)| curve)
        }
    }
}

/// Bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of replicates.
    pub replicates: u64,
    /// Two-sided coverage level of the percentile interval.
    pub level: f64,
    /// Master seed for the resampling streams.
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        BootstrapConfig {
            replicates: 500,
            level: 0.95,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidConfig(
                "bootstrap needs at least 2 replicates".into(),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bootstrap level must lie strictly between 0 and 1, got {}",
                self.level
            )));
        }
        Ok(())
    }
}

/// Resampled patient indices of one replicate.
fn replicate_indices(seed: u64, replicate: u64, n: usize) -> Vec<usize> {
    let mut rng = CounterRng::for_draw(
        seed,
        StreamArm::Bootstrap,
        replicate,
        0,
        DrawKind::BootstrapIndex,
    );
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Linear-interpolation sample quantile (the common "type 7" definition) of
/// already-sorted values.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Percentile confidence bands for an arbitrary curve-valued estimator.
///
/// `estimator` is called once on the original sample (its error propagates)
/// and once per resampled replicate. Returns the original curve with
/// pointwise percentile bands attached.
pub fn bootstrap_ci_with<F>(
    n_patients: usize,
    config: &BootstrapConfig,
    estimator: F,
) -> Result<EstimateCurve>
where
    F: Fn(&[usize]) -> Result<EstimateCurve> + Sync,
{
    config.validate()?;
    if n_patients == 0 {
        return Err(Error::InvalidInput(
            "cannot bootstrap an empty cohort".into(),
        ));
    }
    let identity: Vec<usize> = (0..n_patients).collect();
    let mut point = estimator(&identity)?;

    let run = |r: u64| estimator(&replicate_indices(config.seed, r, n_patients));
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<EstimateCurve>> =
        (0..config.replicates).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<EstimateCurve>> = (0..config.replicates).map(run).collect();

    let total = outcomes.len();
    let mut curves = Vec::with_capacity(total);
    let mut first_failure: Option<String> = None;
    for outcome in outcomes {
        match outcome {
            Ok(curve) => curves.push(curve.values),
            Err(e) => {
                if first_failure.is_none() {
                    first_failure = Some(e.to_string());
                }
            }
        }
    }
    let failed = total - curves.len();
    if failed * 5 > total {
        return Err(Error::BootstrapFailures {
            failed,
            total,
            percent: (failed * 100 / total) as u32,
            first: first_failure.unwrap_or_default(),
        });
    }

    let days = point.values.len();
    let alpha = (1.0 - config.level) / 2.0;
    let mut lower = Vec::with_capacity(days);
    let mut upper = Vec::with_capacity(days);
    let mut column = Vec::with_capacity(curves.len());
    for t in 0..days {
        column.clear();
        column.extend(curves.iter().map(|c| c[t]));
        column.sort_by(|a, b| a.partial_cmp(b).expect("curve values are comparable"));
        lower.push(sorted_quantile(&column, alpha));
        upper.push(sorted_quantile(&column, 1.0 - alpha));
    }
    point.ci_lower = Some(lower);
    point.ci_upper = Some(upper);
    Ok(point)
}

/// Percentile confidence bands for a counterfactual incidence method.
pub fn bootstrap_ci(
    method: CcifMethod,
    cohort: &[ObservedPatient],
    covariates: Option<&CovariateHistory>,
    grid: &TimeGrid,
    config: &BootstrapConfig,
) -> Result<EstimateCurve> {
    bootstrap_ci_with(cohort.len(), config, |indices| {
        let resampled: Vec<ObservedPatient> = indices.iter().map(|&i| cohort[i].clone()).collect();
        let recovariates = covariates.map(|c| c.select(indices));
        estimate_ccif(method, &resampled, recovariates.as_ref(), grid)
    })
}
