//! Cumulative-incidence estimators and the attributable-fraction curve.
//!
//! All estimators work on daily life tables and are generic over
//! [`Field`](crate::field::Field), so each curve can be evaluated in `f64` or
//! in exact rational arithmetic.
//!
//! - [`factual_cif`]: Aalen–Johansen cumulative incidence of one exit kind
//!   among competing exits; with complete terminal events and no censoring it
//!   reduces to the empirical subdistribution function.
//! - [`ccif_censoring`]: counterfactual ("infection-free") cumulative
//!   incidence treating infection onset as censoring, in product-limit form;
//!   [`ccif_censoring_ecdf`] is the algebraically identical
//!   inverse-probability-of-censoring weighted ECDF form, kept as an
//!   independent implementation for cross-checks.
//! - [`ccif_exclusion`]: drops ever-infected patients and reweights the rest
//!   by the constant marginal factor `n / (n - total infected)`.
//! - [`ccif_competing`]: landmark reweighting by
//!   `(1 - cumulative onsets(t)/n)^-1`, the ratio of the naive death ECDF to
//!   the fraction not yet infected at `t`.
//! - [`paf_curve`]: population-attributable fraction
//!   `(factual - counterfactual) / factual`, `NaN`-marked where the factual
//!   incidence is zero.

use serde::{Deserialize, Serialize};

use crate::cohort::TerminalKind;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::lifetable::{EventColumn, LifeTable};

/// What a curve estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    FactualCif,
    CcifCensoring,
    CcifExclusion,
    CcifCompeting,
    CcifIpcw,
    /// Landmark ratio with inverse-probability-weighted numerator and
    /// denominator; coincides with `CcifCensoring` under nonparametric
    /// weights.
    CcifReweighted,
    Paf,
}

/// A daily curve on the grid `0..=horizon`, optionally with pointwise
/// percentile confidence bounds.
///
/// Cumulative-incidence kinds are nondecreasing and lie in `[0, 1]` (up to
/// floating-point rounding); attributable-fraction values may be negative and
/// are `NaN` wherever the factual incidence is zero (undefined marker).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCurve {
    pub kind: CurveKind,
    pub horizon: u32,
    /// `values[t]` for `t = 0..=horizon`.
    pub values: Vec<f64>,
    pub ci_lower: Option<Vec<f64>>,
    pub ci_upper: Option<Vec<f64>>,
}

impl EstimateCurve {
    pub fn new(kind: CurveKind, horizon: u32, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), horizon as usize + 1);
        EstimateCurve {
            kind,
            horizon,
            values,
            ci_lower: None,
            ci_upper: None,
        }
    }

    /// Value at day `t`.
    pub fn at(&self, day: u32) -> f64 {
        self.values[day as usize]
    }

    /// Check the cumulative-incidence shape constraints (tests/debugging).
    pub fn is_valid_cif(&self, tol: f64) -> bool {
        if self.kind == CurveKind::Paf {
            return true;
        }
        let mut prev = 0.0;
        for &v in &self.values {
            if !(v >= -tol && v <= 1.0 + tol) || v < prev - tol {
                return false;
            }
            prev = v;
        }
        true
    }
}

fn curve_from_values<T: Field>(
    kind: CurveKind,
    table: &LifeTable,
    values: Vec<T>,
) -> EstimateCurve {
    EstimateCurve::new(
        kind,
        table.horizon(),
        values.iter().map(Field::to_f64).collect(),
    )
}

/// Aalen–Johansen cumulative incidence of `kind` exits among all competing
/// exits in the table:
/// `F_k(t) = sum_{j<=t} (d_jk / r_j) * prod_{j'<j} (1 - d_j' / r_j')`.
///
/// With complete follow-up this equals the empirical subdistribution function
/// exactly.
pub fn factual_cif_values<T: Field>(table: &LifeTable, kind: EventColumn) -> Result<Vec<T>> {
    let mut values = Vec::with_capacity(table.horizon() as usize + 1);
    let mut cum = T::zero();
    let mut surv = T::one(); // prod_{j' < j} (1 - d_total / r)
    for j in table.days() {
        let at_risk = table.r(j);
        let events = table.d(j, kind);
        if events > 0 {
            if at_risk == 0 {
                return Err(Error::EmptyRiskSet { day: j });
            }
            cum = cum + T::ratio(events, at_risk) * surv.clone();
        }
        if at_risk > 0 {
            surv = surv * (T::one() - T::ratio(table.d_total(j), at_risk));
        }
        values.push(cum.clone());
    }
    Ok(values)
}

/// Counterfactual cumulative incidence of infection-free death treating
/// infection onset as censoring, product-limit (Aalen–Johansen) form:
/// the day-`j` increment is `d_j1 / (r_j - d_j3)` times the product over
/// `j' < j` of `1 - (d_j' - d_j'3) / (r_j' - d_j'3)`.
///
/// Onsets censor *before* tied terminal events, so same-day terminal events
/// stay in the post-censoring risk set `r_j - d_j3`.
pub fn ccif_censoring_values<T: Field>(table: &LifeTable) -> Result<Vec<T>> {
    let mut values = Vec::with_capacity(table.horizon() as usize + 1);
    let mut cum = T::zero();
    let mut surv = T::one();
    for j in table.days() {
        let risk = table.r(j) - table.infections(j);
        let deaths = table.deaths(j);
        if deaths > 0 {
            if risk == 0 {
                return Err(Error::EmptyRiskSet { day: j });
            }
            cum = cum + T::ratio(deaths, risk) * surv.clone();
        }
        if risk > 0 {
            let exits = table.deaths(j) + table.discharges(j);
            surv = surv * (T::one() - T::ratio(exits, risk));
        }
        values.push(cum.clone());
    }
    Ok(values)
}

/// The same estimand as [`ccif_censoring_values`] in weighted-ECDF form:
/// `n^-1 sum_{j<=t} d_j1 * W_j` with
/// `W_j = prod_{j'<=j} (1 - d_j'3 / r_j')^-1`.
///
/// Kept as an independent route for the algebraic-identity checks; the two
/// forms agree exactly in rational arithmetic.
pub fn ccif_censoring_ecdf_values<T: Field>(table: &LifeTable) -> Result<Vec<T>> {
    let n = table.n();
    let mut values = Vec::with_capacity(table.horizon() as usize + 1);
    let mut cum = T::zero();
    let mut weight = T::one(); // W_j, running
    let mut exhausted = false; // some earlier day had all at-risk patients infected
    for j in table.days() {
        let onsets = table.infections(j);
        if onsets > 0 {
            let at_risk = table.r(j);
            if onsets == at_risk {
                exhausted = true; // no one survives the onset day; weight is undefined beyond
            } else {
                weight = weight * T::ratio(at_risk, at_risk - onsets);
            }
        }
        let deaths = table.deaths(j);
        if deaths > 0 {
            if exhausted {
                return Err(Error::EmptyRiskSet { day: j });
            }
            cum = cum + T::ratio(deaths, n) * weight.clone();
        }
        values.push(cum.clone());
    }
    Ok(values)
}

/// Counterfactual cumulative incidence excluding ever-infected patients:
/// the naive ECDF of infection-free deaths inflated by the constant
/// `(1 - total_infected / n)^-1`.
pub fn ccif_exclusion_values<T: Field>(table: &LifeTable) -> Result<Vec<T>> {
    let n = table.n();
    let infected = table.total_infected();
    if infected >= n {
        return Err(Error::DegenerateWeight {
            day: None,
            reason: format!("all {n} patients acquired the infection; exclusion weight undefined"),
        });
    }
    let weight = T::ratio(n, n - infected);
    let mut values = Vec::with_capacity(table.horizon() as usize + 1);
    let mut cum = T::zero();
    for j in table.days() {
        let deaths = table.deaths(j);
        if deaths > 0 {
            cum = cum + T::ratio(deaths, n) * weight.clone();
        }
        values.push(cum.clone());
    }
    Ok(values)
}

/// Counterfactual cumulative incidence by landmark competing-risks
/// reweighting: `value[t] = (sum_{j<=t} d_j1 / n) / (1 - sum_{j<=t} d_j3 / n)`.
pub fn ccif_competing_values<T: Field>(table: &LifeTable) -> Result<Vec<T>> {
    let n = table.n();
    let mut values = Vec::with_capacity(table.horizon() as usize + 1);
    let mut cum_deaths = 0u64;
    let mut cum_onsets = 0u64;
    for j in table.days() {
        cum_deaths += table.deaths(j);
        cum_onsets += table.infections(j);
        if cum_onsets >= n {
            return Err(Error::DegenerateWeight {
                day: Some(j),
                reason: format!("all {n} patients infected by day {j}; landmark weight undefined"),
            });
        }
        values.push(T::ratio(cum_deaths, n) / (T::one() - T::ratio(cum_onsets, n)));
    }
    Ok(values)
}

/// Pointwise attributable fraction `(factual - counterfactual) / factual`,
/// `NaN` where the factual incidence is zero.
pub fn paf_values(factual: &[f64], counterfactual: &[f64]) -> Vec<f64> {
    debug_assert_eq!(factual.len(), counterfactual.len());
    factual
        .iter()
        .zip(counterfactual)
        .map(|(&f, &c)| if f == 0.0 { f64::NAN } else { (f - c) / f })
        .collect()
}

/// [`factual_cif_values`] packaged as an `f64` curve.
pub fn factual_cif(table: &LifeTable, kind: TerminalKind) -> Result<EstimateCurve> {
    let values = factual_cif_values::<f64>(table, kind.into())?;
    Ok(EstimateCurve::new(
        CurveKind::FactualCif,
        table.horizon(),
        values,
    ))
}

/// [`ccif_censoring_values`] packaged as an `f64` curve.
pub fn ccif_censoring(table: &LifeTable) -> Result<EstimateCurve> {
    Ok(curve_from_values(
        CurveKind::CcifCensoring,
        table,
        ccif_censoring_values::<f64>(table)?,
    ))
}

/// [`ccif_censoring_ecdf_values`] packaged as an `f64` curve.
pub fn ccif_censoring_ecdf(table: &LifeTable) -> Result<EstimateCurve> {
    Ok(curve_from_values(
        CurveKind::CcifCensoring,
        table,
        ccif_censoring_ecdf_values::<f64>(table)?,
    ))
}

/// [`ccif_exclusion_values`] packaged as an `f64` curve.
pub fn ccif_exclusion(table: &LifeTable) -> Result<EstimateCurve> {
    Ok(curve_from_values(
        CurveKind::CcifExclusion,
        table,
        ccif_exclusion_values::<f64>(table)?,
    ))
}

/// [`ccif_competing_values`] packaged as an `f64` curve.
pub fn ccif_competing(table: &LifeTable) -> Result<EstimateCurve> {
    Ok(curve_from_values(
        CurveKind::CcifCompeting,
        table,
        ccif_competing_values::<f64>(table)?,
    ))
}

/// Attributable-fraction curve from a factual and a counterfactual curve.
pub fn paf_curve(factual: &EstimateCurve, counterfactual: &EstimateCurve) -> Result<EstimateCurve> {
    if factual.kind != CurveKind::FactualCif {
        return Err(Error::InvalidInput(
            "paf needs a factual incidence curve".into(),
        ));
    }
    if counterfactual.kind == CurveKind::Paf || counterfactual.kind == CurveKind::FactualCif {
        return Err(Error::InvalidInput(
            "paf needs a counterfactual incidence curve".into(),
        ));
    }
    if factual.horizon != counterfactual.horizon {
        return Err(Error::InvalidInput(format!(
            "curve horizons differ: {} vs {}",
            factual.horizon, counterfactual.horizon
        )));
    }
    Ok(EstimateCurve::new(
        CurveKind::Paf,
        factual.horizon,
        paf_values(&factual.values, &counterfactual.values),
    ))
}
