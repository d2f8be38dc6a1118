//! Covariate-conditional inverse-probability-of-censoring weights.
//!
//! The unconditional censoring estimator is only valid when infection onset
//! strikes at random; with a time-dependent confounder the required weights
//! become patient-specific. The onset hazard is modeled on person-days with a
//! pooled discrete-time logistic regression
//! `h_ij = expit(b0 + b' x_i(j-1))` (covariates lagged one day), fitted by
//! Newton–Raphson. Patient `i`'s weight through day `j` is
//! `W_ij = prod_{j'<=j} (1 - h_ij')^-1`; the starred variant `W*_ij` is zeroed
//! from the onset day onward. The weighted Aalen–Johansen estimator then
//! replaces every count in the censoring product-limit form with its
//! `W`-weighted version.
//!
//! A nonparametric mode replaces the model with per-stratum daily onset
//! fractions; with a single stratum it reduces the whole machinery exactly to
//! the unconditional censoring estimator, which the identity suites exploit.

use serde::Serialize;

use crate::cohort::{ObservedPatient, ThreeStateOutcome, TimeGrid};
use crate::error::{Error, Result};
use crate::estimators::{CurveKind, EstimateCurve};
use crate::field::Field;

/// Coefficient magnitude beyond which a non-vanishing gradient is treated as
/// perfect separation.
const SEPARATION_LIMIT: f64 = 30.0;
/// Convergence criterion: max-norm of the score vector.
const GRADIENT_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100;
const MAX_STEP_HALVINGS: usize = 20;
/// Largest Newton decrement treated as converged. A decrement `delta` leaves
/// at most `sqrt(delta)` standard errors of coefficient movement.
const NEWTON_DECREMENT_TOLERANCE: f64 = 1e-9;

/// Daily covariate values per patient, row `d` measured at the end of day `d`
/// (so day-`j` hazards condition on row `j - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateHistory {
    names: Vec<String>,
    /// `rows[i][d]` = covariate vector of patient `i` at day `d`; rows are
    /// contiguous from day 0.
    rows: Vec<Vec<Vec<f64>>>,
}

impl CovariateHistory {
    pub fn new(names: Vec<String>, rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let width = names.len();
        for (i, patient_rows) in rows.iter().enumerate() {
            for (d, row) in patient_rows.iter().enumerate() {
                if row.len() != width {
                    return Err(Error::InvalidInput(format!(
                        "covariate row for patient index {i} day {d} has {} values, expected {width}",
                        row.len()
                    )));
                }
            }
        }
        Ok(CovariateHistory { names, rows })
    }

    /// History with no covariates: every lookup succeeds with an empty slice.
    pub fn empty(n: usize) -> Self {
        CovariateHistory {
            names: Vec::new(),
            rows: vec![Vec::new(); n],
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_patients(&self) -> usize {
        self.rows.len()
    }

    pub fn days_recorded(&self, patient: usize) -> usize {
        self.rows[patient].len()
    }

    /// Covariate vector of `patient` at `day`, `None` when not recorded.
    pub fn value(&self, patient: usize, day: u32) -> Option<&[f64]> {
        if self.names.is_empty() {
            return Some(&[]);
        }
        self.rows
            .get(patient)
            .and_then(|r| r.get(day as usize))
            .map(Vec::as_slice)
    }

    /// Rows for a resampled cohort given by patient indices.
    pub fn select(&self, indices: &[usize]) -> Self {
        CovariateHistory {
            names: self.names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// One at-risk patient-day of the onset hazard model.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonDay {
    /// Index into the cohort.
    pub patient: usize,
    /// Day `j >= 1` the row describes.
    pub day: u32,
    /// Whether the infection onset happened at day `j`.
    pub onset: bool,
    /// Lagged covariates `x(j-1)`.
    pub covariates: Vec<f64>,
}

/// Expand a cohort into at-risk person-days `j = 1..=min(exit, J)` with
/// lagged covariates.
///
/// Day-0 onsets cannot enter the lagged model and are rejected; route such
/// cohorts through the nonparametric weights instead.
pub fn expand_person_days(
    cohort: &[ObservedPatient],
    covariates: &CovariateHistory,
    grid: &TimeGrid,
) -> Result<Vec<PersonDay>> {
    let horizon = grid.horizon();
    let mut rows = Vec::new();
    for (i, obs) in cohort.iter().enumerate() {
        if obs.outcome == ThreeStateOutcome::InfectionOnset(0) {
            return Err(Error::InvalidRecord {
                patient_id: obs.patient_id.clone(),
                reason: "infection onset at day 0 cannot enter the lagged discrete-hazard \
                         model; use nonparametric weights"
                    .into(),
            });
        }
        let end = obs.outcome.t_tilde().unwrap_or(horizon).min(horizon);
        for j in 1..=end {
            let x = covariates
                .value(i, j - 1)
                .ok_or_else(|| Error::MissingCovariateRow {
                    patient_id: obs.patient_id.clone(),
                    day: j - 1,
                })?;
            rows.push(PersonDay {
                patient: i,
                day: j,
                onset: obs.outcome == ThreeStateOutcome::InfectionOnset(j),
                covariates: x.to_vec(),
            });
        }
    }
    Ok(rows)
}

/// Numerically stable `log(1 + exp(eta))`.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Numerically stable logistic function.
pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn linear_predictor(beta: &[f64], covariates: &[f64]) -> f64 {
    let mut eta = beta[0];
    for (b, x) in beta[1..].iter().zip(covariates) {
        eta += b * x;
    }
    eta
}

/// Bernoulli log-likelihood of the person-day data at `beta`
/// (intercept first). Summation runs in the fixed input order, so results do
/// not depend on thread count.
pub fn log_likelihood(rows: &[PersonDay], beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for row in rows {
        let eta = linear_predictor(beta, &row.covariates);
        ll += if row.onset { eta } else { 0.0 } - softplus(eta);
    }
    ll
}

/// Score vector of the log-likelihood at `beta`.
pub fn score(rows: &[PersonDay], beta: &[f64]) -> Vec<f64> {
    let p = beta.len();
    let mut grad = vec![0.0; p];
    for row in rows {
        let eta = linear_predictor(beta, &row.covariates);
        let resid = (row.onset as u8 as f64) - expit(eta);
        grad[0] += resid;
        for (g, x) in grad[1..].iter_mut().zip(&row.covariates) {
            *g += resid * x;
        }
    }
    grad
}

/// Observed information (negative Hessian), dense symmetric `p x p`.
fn information(rows: &[PersonDay], beta: &[f64]) -> Vec<Vec<f64>> {
    let p = beta.len();
    let mut info = vec![vec![0.0; p]; p];
    let mut x = vec![0.0; p];
    for row in rows {
        let eta = linear_predictor(beta, &row.covariates);
        let mu = expit(eta);
        let w = mu * (1.0 - mu);
        x[0] = 1.0;
        x[1..].copy_from_slice(&row.covariates);
        for a in 0..p {
            let wa = w * x[a];
            for b in a..p {
                info[a][b] += wa * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[a][b] = info[b][a];
        }
    }
    info
}

/// Solve `A x = b` for symmetric positive-definite `A` via Cholesky.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let p = b.len();
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::SingularInformation(format!(
                        "information matrix is not positive definite (pivot {sum:.3e} at row {i})"
                    )));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut sum = y[i];
        for k in i + 1..p {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Ok(x)
}

/// Fitted pooled discrete-time logistic onset-hazard model.
#[derive(Debug, Clone, Serialize)]
pub struct HazardFit {
    /// `["intercept", covariate names...]`.
    pub coefficient_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Square roots of the inverse-information diagonal.
    pub standard_errors: Vec<f64>,
    pub iterations: usize,
    pub max_gradient: f64,
    pub log_likelihood: f64,
    pub person_days: usize,
    pub events: u64,
}

impl HazardFit {
    /// Fitted onset hazard for one lagged covariate vector.
    pub fn hazard(&self, covariates: &[f64]) -> f64 {
        expit(linear_predictor(&self.coefficients, covariates))
    }
}

/// Fit the onset hazard by Newton–Raphson with step halving: start at
/// `beta = 0`, stop when the score max-norm falls below `1e-10` or (after
/// taking one last full step) when the Newton decrement falls below `1e-9`,
/// fail with `separation-detected` when a coefficient passes 30 in magnitude
/// while the gradient has not vanished, and with `no-convergence` when
/// neither stopping rule is met.
pub fn fit_discrete_hazard(rows: &[PersonDay], covariate_names: &[String]) -> Result<HazardFit> {
    let k = covariate_names.len();
    for row in rows {
        if row.covariates.len() != k {
            return Err(Error::InvalidInput(format!(
                "person-day for patient index {} day {} has {} covariates, expected {k}",
                row.patient,
                row.day,
                row.covariates.len()
            )));
        }
    }
    let events = rows.iter().filter(|r| r.onset).count() as u64;
    if events == 0 {
        return Err(Error::NoEvents);
    }

    let p = k + 1;
    let mut names = Vec::with_capacity(p);
    names.push("intercept".to_string());
    names.extend_from_slice(covariate_names);

    let mut beta = vec![0.0; p];
    let mut ll = log_likelihood(rows, &beta);
    let mut max_grad = f64::INFINITY;
    let mut converged = None;
    for iter in 0..MAX_ITERATIONS {
        let grad = score(rows, &beta);
        max_grad = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if let Some(idx) = beta.iter().position(|b| b.abs() > SEPARATION_LIMIT) {
            if max_grad > 1e-6 {
                return Err(Error::SeparationDetected {
                    coefficient: names[idx].clone(),
                    value: beta[idx],
                    limit: SEPARATION_LIMIT,
                });
            }
        }
        if max_grad <= GRADIENT_TOLERANCE {
            converged = Some(iter);
            break;
        }

        let info = information(rows, &beta);
        let direction = cholesky_solve(&info, &grad)?;
        // The Newton decrement `grad . direction` bounds the remaining
        // log-likelihood improvement (and the remaining coefficient movement
        // in standard-error units). On large row counts the log-likelihood
        // plateaus in floating point before the score max-norm target, so a
        // negligible decrement also counts as converged — after taking this
        // last full step, which quadratic convergence puts essentially at the
        // optimum (square of an already negligible distance).
        let decrement: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        if decrement.abs() <= NEWTON_DECREMENT_TOLERANCE {
            beta = beta.iter().zip(&direction).map(|(b, d)| b + d).collect();
            ll = log_likelihood(rows, &beta);
            max_grad = score(rows, &beta)
                .iter()
                .fold(0.0f64, |m, g| m.max(g.abs()));
            converged = Some(iter + 1);
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_STEP_HALVINGS {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(&direction)
                .map(|(b, d)| b + step * d)
                .collect();
            let candidate_ll = log_likelihood(rows, &candidate);
            if candidate_ll >= ll {
                beta = candidate;
                ll = candidate_ll;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: iter + 1,
                max_gradient: max_grad,
            });
        }
    }
    let Some(iterations) = converged else {
        return Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            max_gradient: max_grad,
        });
    };
    let info = information(rows, &beta);
    let standard_errors = invert_diagonal(&info)?;
    Ok(HazardFit {
        coefficient_names: names,
        coefficients: beta,
        standard_errors,
        iterations,
        max_gradient: max_grad,
        log_likelihood: ll,
        person_days: rows.len(),
        events,
    })
}

/// Standard errors from the inverse information: solve for each unit vector.
fn invert_diagonal(info: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = info.len();
    let mut out = Vec::with_capacity(p);
    for i in 0..p {
        let mut e = vec![0.0; p];
        e[i] = 1.0;
        let col = cholesky_solve(info, &e)?;
        out.push(col[i].sqrt());
    }
    Ok(out)
}

/// Analytic score versus central finite differences of the log-likelihood.
#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `|analytic - numeric| / max(1, |analytic|, |numeric|)` per coordinate.
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Check the analytic score at `beta` against central finite differences with
/// per-coordinate step `1e-6 * (1 + |beta_k|)` and relative tolerance `1e-5`.
pub fn gradient_check(rows: &[PersonDay], beta: &[f64]) -> GradientCheck {
    let tolerance = 1e-5;
    let analytic = score(rows, beta);
    let mut numeric = Vec::with_capacity(beta.len());
    for k in 0..beta.len() {
        let h = 1e-6 * (1.0 + beta[k].abs());
        let mut plus = beta.to_vec();
        plus[k] += h;
        let mut minus = beta.to_vec();
        minus[k] -= h;
        numeric.push((log_likelihood(rows, &plus) - log_likelihood(rows, &minus)) / (2.0 * h));
    }
    let relative_errors: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / 1.0f64.max(a.abs()).max(n.abs()))
        .collect();
    let max_relative_error = relative_errors.iter().fold(0.0f64, |m, e| m.max(*e));
    GradientCheck {
        analytic,
        numeric,
        relative_errors,
        max_relative_error,
        tolerance,
        pass: max_relative_error <= tolerance,
    }
}

/// Per-patient cumulative censoring weights.
///
/// `weight(i, j) = prod_{j'<=min(j, exit_i)} (1 - h_ij')^-1` and
/// `weight_star(i, j)` additionally zeroes every day from the patient's onset
/// day onward. Weights are nondecreasing in `j` and at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalWeights<T> {
    horizon: u32,
    onset_day: Vec<Option<u32>>,
    /// Cumulative products per patient for days `0..=end_i`.
    cum: Vec<Vec<T>>,
    /// First day with an exhausted hazard cell (`h = 1`), from which the
    /// unstarred weight is undefined (infinite). That can only happen at the
    /// patient's own onset day, and no estimator consumes such a weight.
    undefined_from: Vec<Option<u32>>,
}

impl<T: Field> ConditionalWeights<T> {
    /// Build cumulative weights from per-patient daily hazards
    /// `hazards[i][j]` for `j = 0..=min(exit_i, J)`.
    pub fn from_hazards(
        cohort: &[ObservedPatient],
        grid: &TimeGrid,
        hazards: &[Vec<T>],
    ) -> Result<Self> {
        if hazards.len() != cohort.len() {
            return Err(Error::InvalidInput(
                "hazards and cohort patient counts differ".into(),
            ));
        }
        let mut cum = Vec::with_capacity(cohort.len());
        let mut onset_day = Vec::with_capacity(cohort.len());
        let mut undefined_from = Vec::with_capacity(cohort.len());
        for (i, obs) in cohort.iter().enumerate() {
            let onset = match obs.outcome {
                ThreeStateOutcome::InfectionOnset(d) => Some(d),
                _ => None,
            };
            onset_day.push(onset);
            let mut acc = T::one();
            let mut row = Vec::with_capacity(hazards[i].len());
            let mut undefined = None;
            for (j, h) in hazards[i].iter().enumerate() {
                let keep = T::one() - h.clone();
                if keep.is_zero() {
                    // Exhausted cell: only reachable at this patient's onset
                    // day; the weight there is undefined but never consumed.
                    debug_assert_eq!(onset, Some(j as u32));
                    undefined = Some(j as u32);
                    break;
                }
                acc = acc / keep;
                row.push(acc.clone());
            }
            cum.push(row);
            undefined_from.push(undefined);
        }
        Ok(ConditionalWeights {
            horizon: grid.horizon(),
            onset_day,
            cum,
            undefined_from,
        })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn onset_day(&self, patient: usize) -> Option<u32> {
        self.onset_day[patient]
    }

    /// `W_ij`; constant once the patient's hazard history ends.
    ///
    /// Panics if asked for a weight past an exhausted hazard cell — such
    /// weights are undefined and consuming one is a logic error.
    pub fn weight(&self, patient: usize, day: u32) -> T {
        if let Some(from) = self.undefined_from[patient] {
            assert!(
                day < from,
                "weight for patient {patient} is undefined from day {from} (exhausted hazard cell)"
            );
        }
        let row = &self.cum[patient];
        if row.is_empty() {
            // No hazard history (exit at day 0) — weight never moved off 1.
            return T::one();
        }
        let idx = (day as usize).min(row.len() - 1);
        row[idx].clone()
    }

    /// `W*_ij`: zero from the onset day onward.
    pub fn weight_star(&self, patient: usize, day: u32) -> T {
        match self.onset_day[patient] {
            Some(onset) if day >= onset => T::zero(),
            _ => self.weight(patient, day),
        }
    }
}

/// Hazards for [`ConditionalWeights`] from a fitted model: day 0 carries
/// hazard zero (no admission-day onsets in the lagged model), days
/// `1..=min(exit, J)` use the lagged covariates.
pub fn model_hazards(
    fit: &HazardFit,
    cohort: &[ObservedPatient],
    covariates: &CovariateHistory,
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    let horizon = grid.horizon();
    let mut hazards = Vec::with_capacity(cohort.len());
    for (i, obs) in cohort.iter().enumerate() {
        let end = obs.outcome.t_tilde().unwrap_or(horizon).min(horizon);
        let mut row = Vec::with_capacity(end as usize + 1);
        row.push(0.0);
        for j in 1..=end {
            let x = covariates
                .value(i, j - 1)
                .ok_or_else(|| Error::MissingCovariateRow {
                    patient_id: obs.patient_id.clone(),
                    day: j - 1,
                })?;
            row.push(fit.hazard(x));
        }
        hazards.push(row);
    }
    Ok(hazards)
}

/// Nonparametric hazards: `h_ij` is the day-`j` onset fraction among at-risk
/// members of the patient's stratum. `strata[i]` is a dense stratum id.
///
/// Errors with `degenerate-cell` when an exhausted cell (onset fraction 1)
/// still has stratum members at risk on later days, whose weights would be
/// infinite.
pub fn nonparametric_hazards<T: Field>(
    cohort: &[ObservedPatient],
    strata: &[usize],
    grid: &TimeGrid,
) -> Result<Vec<Vec<T>>> {
    if strata.len() != cohort.len() {
        return Err(Error::InvalidInput(
            "strata and cohort patient counts differ".into(),
        ));
    }
    let n_strata = strata.iter().copied().max().map_or(1, |m| m + 1);
    let days = grid.len();
    let mut at_risk = vec![vec![0u64; days]; n_strata];
    let mut onsets = vec![vec![0u64; days]; n_strata];
    for (obs, &s) in cohort.iter().zip(strata) {
        let end = obs
            .outcome
            .t_tilde()
            .unwrap_or(grid.horizon())
            .min(grid.horizon());
        for j in 0..=end {
            at_risk[s][j as usize] += 1;
        }
        if let ThreeStateOutcome::InfectionOnset(d) = obs.outcome {
            if d <= grid.horizon() {
                onsets[s][d as usize] += 1;
            }
        }
    }
    // Exhausted cells must not be needed by any later at-risk member.
    for s in 0..n_strata {
        for j in 0..days {
            if onsets[s][j] > 0 && onsets[s][j] == at_risk[s][j] {
                let needed_later = cohort
                    .iter()
                    .zip(strata)
                    .any(|(obs, &s2)| s2 == s && obs.outcome.at_risk(j as u32 + 1));
                if needed_later {
                    return Err(Error::DegenerateCell {
                        day: j as u32,
                        stratum: s.to_string(),
                    });
                }
            }
        }
    }
    Ok(cohort
        .iter()
        .zip(strata)
        .map(|(obs, &s)| {
            let end = obs
                .outcome
                .t_tilde()
                .unwrap_or(grid.horizon())
                .min(grid.horizon());
            (0..=end)
                .map(|j| {
                    let r = at_risk[s][j as usize];
                    if r == 0 {
                        T::zero()
                    } else {
                        T::ratio(onsets[s][j as usize], r)
                    }
                })
                .collect()
        })
        .collect())
}

/// Weighted Aalen–Johansen estimator of the counterfactual cumulative
/// incidence of infection-free death: every life-table count is replaced by
/// its `W`-weighted version, with onsets censoring before tied terminal
/// events.
pub fn weighted_aj_values<T: Field>(
    cohort: &[ObservedPatient],
    weights: &ConditionalWeights<T>,
) -> Result<Vec<T>> {
    let horizon = weights.horizon();
    let days = horizon as usize + 1;
    let mut weighted_deaths = vec![T::zero(); days];
    let mut weighted_exits = vec![T::zero(); days]; // deaths + discharges
    let mut risk_mass = vec![T::zero(); days]; // post-censoring risk set
    for (i, obs) in cohort.iter().enumerate() {
        let exit = obs.outcome.t_tilde();
        let in_risk_through = match exit {
            Some(d) => d.min(horizon + 1).saturating_sub(1),
            None => horizon,
        };
        if exit.map_or(true, |d| d > 0) {
            for j in 0..=in_risk_through.min(horizon) {
                risk_mass[j as usize] = risk_mass[j as usize].clone() + weights.weight(i, j);
            }
        }
        match obs.outcome {
            ThreeStateOutcome::InfectionFreeDeath(d) if d <= horizon => {
                let w = weights.weight(i, d);
                risk_mass[d as usize] = risk_mass[d as usize].clone() + w.clone();
                weighted_exits[d as usize] = weighted_exits[d as usize].clone() + w.clone();
                weighted_deaths[d as usize] = weighted_deaths[d as usize].clone() + w;
            }
            ThreeStateOutcome::InfectionFreeDischarge(d) if d <= horizon => {
                let w = weights.weight(i, d);
                risk_mass[d as usize] = risk_mass[d as usize].clone() + w.clone();
                weighted_exits[d as usize] = weighted_exits[d as usize].clone() + w;
            }
            _ => {}
        }
    }

    let mut values = Vec::with_capacity(days);
    let mut cum = T::zero();
    let mut surv = T::one();
    for j in 0..days {
        if !weighted_deaths[j].is_zero() {
            if risk_mass[j].is_zero() {
                return Err(Error::EmptyWeightedRiskSet { day: j as u32 });
            }
            cum = cum + weighted_deaths[j].clone() / risk_mass[j].clone() * surv.clone();
        }
        if !risk_mass[j].is_zero() {
            surv = surv * (T::one() - weighted_exits[j].clone() / risk_mass[j].clone());
        }
        values.push(cum.clone());
    }
    Ok(values)
}

/// [`weighted_aj_values`] packaged as an `f64` curve.
pub fn weighted_aj(
    cohort: &[ObservedPatient],
    weights: &ConditionalWeights<f64>,
) -> Result<EstimateCurve> {
    let values = weighted_aj_values(cohort, weights)?;
    Ok(EstimateCurve::new(
        CurveKind::CcifIpcw,
        weights.horizon(),
        values,
    ))
}

/// Full model-based pipeline: expand person-days, fit the hazard model,
/// compute weights, and run the weighted Aalen–Johansen estimator.
pub fn ipcw_model_estimate(
    cohort: &[ObservedPatient],
    covariates: &CovariateHistory,
    grid: &TimeGrid,
) -> Result<(HazardFit, EstimateCurve)> {
    let rows = expand_person_days(cohort, covariates, grid)?;
    let fit = fit_discrete_hazard(&rows, covariates.names())?;
    let hazards = model_hazards(&fit, cohort, covariates, grid)?;
    let weights = ConditionalWeights::from_hazards(cohort, grid, &hazards)?;
    let curve = weighted_aj(cohort, &weights)?;
    Ok((fit, curve))
}
