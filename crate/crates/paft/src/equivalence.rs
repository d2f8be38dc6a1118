//! Cross-checks between independent constructions of the same estimands.
//!
//! Several quantities in this crate can be computed along two unrelated code
//! paths, and the results must agree algebraically:
//!
//! * State occupation probabilities of the progressive six-state model
//!   (no infection / infection-free death / infection-free discharge /
//!   infected / death after infection / discharge after infection), counted
//!   directly from fully followed-up patient records, collapse onto the
//!   three-absorbing-state occupation probabilities of the derived
//!   `(exit day, exit type)` data.
//! * The landmark ratio "infection-free deaths over everyone not yet
//!   infected or exited infection-free" equals the landmark estimator built
//!   from the life table.
//! * With nonparametric censoring weights, the starred-weight risk mass,
//!   inflated back by the product-limit survival factor, is conserved at the
//!   sample size on every day, which makes the weighted product-limit
//!   estimator collapse to a weighted empirical distribution function.
//! * Reweighting the landmark ratio's numerator and denominator with those
//!   same weights reproduces the censoring estimator exactly.
//!
//! These identities are exposed both as library functions and, through the
//! `check` subcommand, as a validation suite users can run on their own
//! datasets.

use serde::{Deserialize, Serialize};

use crate::cohort::{
    derive_cohort, ObservedPatient, PatientRecord, TerminalKind, ThreeStateOutcome, TimeGrid,
};
use crate::error::{Error, Result};
use crate::estimators::{ccif_censoring, ccif_competing, CurveKind, EstimateCurve};
use crate::field::Field;
use crate::ipcw::{nonparametric_hazards, ConditionalWeights};
use crate::lifetable::LifeTable;

/// Number of states in the progressive model (pre/post-infection split).
pub const SIX_STATES: usize = 6;
/// Number of states in the collapsed model (infection absorbs).
pub const FOUR_STATES: usize = 4;

/// Daily state-occupation counts for the six-state progressive model and the
/// collapsed four-state model, computed along independent routes: the former
/// from the full patient records, the latter from the derived three-state
/// outcomes (exit day, exit type).
///
/// With complete follow-up, occupation probabilities are plain state-count
/// fractions; every patient occupies exactly one state per day, so each row
/// of counts sums to the cohort size by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateOccupation {
    horizon: u32,
    n: u64,
    six: Vec<[u64; SIX_STATES]>,
    four: Vec<[u64; FOUR_STATES]>,
}

impl StateOccupation {
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Six-state occupation counts on day `day`.
    pub fn six_counts(&self, day: u32) -> &[u64; SIX_STATES] {
        &self.six[day as usize]
    }

    /// Four-state occupation counts on day `day`.
    pub fn four_counts(&self, day: u32) -> &[u64; FOUR_STATES] {
        &self.four[day as usize]
    }

    /// Six-state occupation probabilities on day `day`.
    pub fn six_probabilities(&self, day: u32) -> [f64; SIX_STATES] {
        self.six[day as usize].map(|c| c as f64 / self.n as f64)
    }

    /// Four-state occupation probabilities on day `day`.
    pub fn four_probabilities(&self, day: u32) -> [f64; FOUR_STATES] {
        self.four[day as usize].map(|c| c as f64 / self.n as f64)
    }
}

/// State of the six-state progressive model occupied at the end of day `t`.
/// Events on day `t` itself have already happened (day `t` covers the
/// interval ending at `t`), and a same-day infection-plus-exit passes through
/// the infected state first.
fn six_state_at(record: &PatientRecord, t: u32) -> usize {
    let infected = record.infection_day.is_some_and(|d| d <= t);
    let exited = record.terminal.as_ref().filter(|ev| ev.day <= t);
    match (infected, exited) {
        (false, None) => 0,
        (false, Some(ev)) => match ev.kind {
            TerminalKind::Death => 1,
            TerminalKind::Discharge => 2,
        },
        (true, None) => 3,
        (true, Some(ev)) => match ev.kind {
            TerminalKind::Death => 4,
            TerminalKind::Discharge => 5,
        },
    }
}

/// State of the collapsed model occupied at the end of day `t`, read off the
/// derived three-state outcome rather than the raw record.
fn four_state_at(outcome: &ThreeStateOutcome, t: u32) -> usize {
    match *outcome {
        ThreeStateOutcome::InfectionFreeDeath(d) if d <= t => 1,
        ThreeStateOutcome::InfectionFreeDischarge(d) if d <= t => 2,
        ThreeStateOutcome::InfectionOnset(d) if d <= t => 3,
        _ => 0,
    }
}

/// Count daily state occupation for both models.
///
/// Requires complete follow-up: every patient infected within the grid must
/// carry a post-onset terminal event or the still-in-hospital marker, since
/// the post-infection death/discharge states are unobservable otherwise.
pub fn occupation_six_state(records: &[PatientRecord], grid: &TimeGrid) -> Result<StateOccupation> {
    for record in records {
        record.validate()?;
        if record.infected_within(grid) && !record.has_post_onset_follow_up() {
            return Err(Error::MissingPostOnsetFollowUp {
                patient_id: record.patient_id.clone(),
                onset_day: record
                    .infection_day
                    .expect("infected record has an onset day"),
            });
        }
    }
    if records.is_empty() {
        return Err(Error::InvalidInput(
            "cannot count state occupation of an empty cohort".into(),
        ));
    }
    let observed = derive_cohort(records, grid)?;
    let days = grid.len();
    let mut six = vec![[0u64; SIX_STATES]; days];
    let mut four = vec![[0u64; FOUR_STATES]; days];
    for (record, obs) in records.iter().zip(&observed) {
        for t in 0..days {
            six[t][six_state_at(record, t as u32)] += 1;
            four[t][four_state_at(&obs.outcome, t as u32)] += 1;
        }
    }
    Ok(StateOccupation {
        horizon: grid.horizon(),
        n: records.len() as u64,
        six,
        four,
    })
}

/// Outcome of one algebraic identity evaluated over the whole grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// Stable kebab-case identity name.
    pub identity: String,
    /// What was compared with what.
    pub description: String,
    pub tolerance: f64,
    pub max_violation: f64,
    /// Day attaining the maximal violation (absent when no day was scanned).
    pub worst_day: Option<u32>,
    pub pass: bool,
}

impl IdentityCheck {
    /// Build a check from per-day violation magnitudes, recording the worst.
    pub fn from_violations(
        identity: &str,
        description: &str,
        tolerance: f64,
        violations: impl IntoIterator<Item = (u32, f64)>,
    ) -> Self {
        let mut max_violation = 0.0f64;
        let mut worst_day = None;
        for (day, violation) in violations {
            if worst_day.is_none() || violation > max_violation {
                max_violation = violation;
                worst_day = Some(day);
            }
        }
        IdentityCheck {
            identity: identity.to_string(),
            description: description.to_string(),
            tolerance,
            max_violation,
            worst_day,
            pass: max_violation <= tolerance,
        }
    }
}

/// Results of the full identity suite on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub horizon: u32,
    pub n_patients: usize,
    pub checks: Vec<IdentityCheck>,
    /// Identities whose data requirements the dataset does not meet
    /// (occupation checks without full post-onset follow-up).
    pub skipped: Vec<String>,
    /// True when every individual check passed.
    pub pass: bool,
}

impl IdentityReport {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

/// Both occupation matrices partition the cohort: rows sum to one.
pub fn occupation_rows_check(occ: &StateOccupation) -> IdentityCheck {
    let violations = (0..=occ.horizon()).map(|t| {
        let six: f64 = occ.six_probabilities(t).iter().sum();
        let four: f64 = occ.four_probabilities(t).iter().sum();
        (t, (six - 1.0).abs().max((four - 1.0).abs()))
    });
    IdentityCheck::from_violations(
        "occupation-rows-sum-to-one",
        "six-state and four-state daily occupation probabilities each sum to 1",
        1e-12,
        violations,
    )
}

/// The four-state model is the six-state model with the three post-infection
/// states collapsed into one: shared states agree and the collapsed state
/// carries the combined mass. Additionally, the landmark ratio
/// `P'_{01}(t) / (1 - P'_{03}(t))` computed from the occupation counts must
/// reproduce the life-table landmark estimator.
pub fn collapse_check(
    occ: &StateOccupation,
    competing: &EstimateCurve,
) -> Result<Vec<IdentityCheck>> {
    if competing.kind != CurveKind::CcifCompeting {
        return Err(Error::InvalidInput(
            "collapse check compares against a landmark (competing-exposure) curve".into(),
        ));
    }
    if competing.horizon != occ.horizon() {
        return Err(Error::InvalidInput(
            "occupation matrices and landmark curve cover different horizons".into(),
        ));
    }
    let collapse = (0..=occ.horizon()).map(|t| {
        let six = occ.six_probabilities(t);
        let four = occ.four_probabilities(t);
        let mut worst = 0.0f64;
        for k in 0..3 {
            worst = worst.max((four[k] - six[k]).abs());
        }
        worst = worst.max((four[3] - (six[3] + six[4] + six[5])).abs());
        (t, worst)
    });
    let ratio = (0..=occ.horizon())
        .map(|t| {
            let four = occ.four_probabilities(t);
            let kept = 1.0 - four[3];
            if kept == 0.0 {
                return Err(Error::DegenerateWeight {
                    day: Some(t),
                    reason: "every patient has an infection onset by this day".into(),
                });
            }
            Ok((t, (four[1] / kept - competing.at(t)).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        IdentityCheck::from_violations(
            "state-collapse",
            "four-state occupation equals six-state occupation with post-infection states merged",
            1e-12,
            collapse,
        ),
        IdentityCheck::from_violations(
            "collapse-ratio-equals-competing",
            "occupation ratio P'01/(1-P'03) equals the life-table landmark estimator",
            1e-12,
            ratio,
        ),
    ])
}

/// Starred-weight risk mass inflated back by the product-limit factor:
/// `gamma_j = r*_j / prod_{j'<j} (1 - d*_j' / r*_j')` where `r*` is the
/// starred-weight risk set and `d*` the starred-weight all-cause exits.
/// With nonparametric weights this is conserved at the sample size.
pub fn risk_mass_values<T: Field>(
    cohort: &[ObservedPatient],
    weights: &ConditionalWeights<T>,
) -> Result<Vec<T>> {
    let horizon = weights.horizon();
    let days = horizon as usize + 1;
    let mut risk = vec![T::zero(); days];
    let mut exits = vec![T::zero(); days];
    for (i, obs) in cohort.iter().enumerate() {
        for j in 0..days as u32 {
            if obs.outcome.at_risk(j) {
                risk[j as usize] = risk[j as usize].clone() + weights.weight_star(i, j);
            }
        }
        if let Some(t) = obs.outcome.t_tilde() {
            if t <= horizon {
                exits[t as usize] = exits[t as usize].clone() + weights.weight_star(i, t);
            }
        }
    }
    let mut values = Vec::with_capacity(days);
    let mut survival = T::one(); // prod_{j'<j} (1 - d*_j'/r*_j')
    for j in 0..days {
        if survival.is_zero() || risk[j].is_zero() {
            return Err(Error::EmptyWeightedRiskSet { day: j as u32 });
        }
        values.push(risk[j].clone() / survival.clone());
        survival = survival * (T::one() - exits[j].clone() / risk[j].clone());
    }
    Ok(values)
}

/// [`risk_mass_values`] packaged as a pass/fail check against the sample
/// size.
pub fn risk_mass_conservation(
    cohort: &[ObservedPatient],
    weights: &ConditionalWeights<f64>,
) -> Result<IdentityCheck> {
    let n = cohort.len() as f64;
    let values = risk_mass_values(cohort, weights)?;
    Ok(IdentityCheck::from_violations(
        "weighted-risk-mass-conservation",
        "starred-weight risk mass, inflated by the product-limit factor, stays at the sample size",
        1e-9,
        values
            .iter()
            .enumerate()
            .map(|(j, g)| (j as u32, (g - n).abs())),
    ))
}

/// Landmark ratio with inverse-probability-weighted numerator and
/// denominator:
/// `sum_{j<=t} d*_j1 / (sum_{j<=t} d*_j1 + sum_{j<=t} d*_j2 + r*_{t+1})`.
///
/// Returns `(curve values, denominators)` for `t = 0..=horizon`. The
/// denominator is the size of the reweighted pseudo-population in which
/// nobody has been infected by `t`; with nonparametric weights it equals the
/// sample size on every day and the curve coincides with the censoring
/// estimator.
pub fn reweighted_landmark_values<T: Field>(
    cohort: &[ObservedPatient],
    weights: &ConditionalWeights<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let horizon = weights.horizon();
    let days = horizon as usize + 1;
    let mut deaths = vec![T::zero(); days];
    let mut discharges = vec![T::zero(); days];
    // Starred-weight risk set evaluated one day past each landmark; the
    // weight is carried forward unchanged beyond a patient's recorded
    // history (no transfers can occur there).
    let mut next_risk = vec![T::zero(); days];
    for (i, obs) in cohort.iter().enumerate() {
        match obs.outcome {
            ThreeStateOutcome::InfectionFreeDeath(d) if d <= horizon => {
                let w = weights.weight_star(i, d);
                deaths[d as usize] = deaths[d as usize].clone() + w;
            }
            ThreeStateOutcome::InfectionFreeDischarge(d) if d <= horizon => {
                let w = weights.weight_star(i, d);
                discharges[d as usize] = discharges[d as usize].clone() + w;
            }
            _ => {}
        }
        for t in 0..days as u32 {
            if obs.outcome.at_risk(t + 1) {
                next_risk[t as usize] =
                    next_risk[t as usize].clone() + weights.weight_star(i, t + 1);
            }
        }
    }
    let mut curve = Vec::with_capacity(days);
    let mut denominators = Vec::with_capacity(days);
    let mut cum_deaths = T::zero();
    let mut cum_discharges = T::zero();
    for t in 0..days {
        cum_deaths = cum_deaths + deaths[t].clone();
        cum_discharges = cum_discharges + discharges[t].clone();
        let denominator = cum_deaths.clone() + cum_discharges.clone() + next_risk[t].clone();
        if denominator.is_zero() {
            return Err(Error::EmptyWeightedRiskSet { day: t as u32 });
        }
        curve.push(cum_deaths.clone() / denominator.clone());
        denominators.push(denominator);
    }
    Ok((curve, denominators))
}

/// [`reweighted_landmark_values`] packaged as an `f64` curve.
pub fn reweighted_landmark(
    cohort: &[ObservedPatient],
    weights: &ConditionalWeights<f64>,
) -> Result<EstimateCurve> {
    let (values, _) = reweighted_landmark_values(cohort, weights)?;
    Ok(EstimateCurve::new(
        CurveKind::CcifReweighted,
        weights.horizon(),
        values,
    ))
}

/// Run every identity on one dataset: occupation row sums, the state
/// collapse, the occupation-ratio/landmark agreement, weighted risk-mass
/// conservation, the reweighted-landmark denominator, and the
/// reweighted-landmark/censoring-estimator agreement.
///
/// The three occupation-based identities need post-onset follow-up for every
/// patient infected within the grid; when some of it is unrecorded they are
/// skipped (and listed in the report) rather than failed, since the
/// remaining identities are defined on the three-state data alone.
pub fn run_identity_suite(records: &[PatientRecord], grid: &TimeGrid) -> Result<IdentityReport> {
    let observed = derive_cohort(records, grid)?;
    let table = LifeTable::from_three_state(&observed, grid);
    let censoring = ccif_censoring(&table)?;
    let competing = ccif_competing(&table)?;

    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let full_follow_up = records
        .iter()
        .all(|r| !r.infected_within(grid) || r.has_post_onset_follow_up());
    if full_follow_up {
        let occ = occupation_six_state(records, grid)?;
        checks.push(occupation_rows_check(&occ));
        checks.extend(collapse_check(&occ, &competing)?);
    } else {
        skipped.extend(
            [
                "occupation-rows-sum-to-one",
                "state-collapse",
                "collapse-ratio-equals-competing",
            ]
            .map(String::from),
        );
    }

    let unstratified = vec![0usize; observed.len()];
    let hazards = nonparametric_hazards::<f64>(&observed, &unstratified, grid)?;
    let weights = ConditionalWeights::from_hazards(&observed, grid, &hazards)?;
    checks.push(risk_mass_conservation(&observed, &weights)?);

    let n = observed.len() as f64;
    let (reweighted, denominators) = reweighted_landmark_values::<f64>(&observed, &weights)?;
    checks.push(IdentityCheck::from_violations(
        "reweighted-denominator-is-sample-size",
        "the reweighted landmark pseudo-population has the original sample size on every day",
        1e-9,
        denominators
            .iter()
            .enumerate()
            .map(|(t, d)| (t as u32, (d - n).abs())),
    ));
    checks.push(IdentityCheck::from_violations(
        "reweighted-landmark-equals-censoring",
        "the reweighted landmark ratio reproduces the censoring estimator day by day",
        1e-9,
        reweighted
            .iter()
            .zip(&censoring.values)
            .enumerate()
            .map(|(t, (a, b))| (t as u32, (a - b).abs())),
    ));

    let pass = checks.iter().all(|c| c.pass);
    Ok(IdentityReport {
        horizon: grid.horizon(),
        n_patients: records.len(),
        checks,
        skipped,
        pass,
    })
}
