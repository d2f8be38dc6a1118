//! Patient-level data model on a daily time grid.
//!
//! Time is discrete: day `j` labels the interval `(t_{j-1}, t_j]` of a grid
//! `0 = t_0 < t_1 < ... < t_J`, so "death at day 3" means death in the third
//! interval. A patient is followed from admission (day 0) until the first of
//! in-hospital death, discharge, or infection onset; whatever happens after an
//! infection (the post-onset terminal event) is optional follow-up that only
//! the factual cumulative incidence and the multi-state oracles need.
//!
//! Ties within a day resolve infection-first: a patient recorded with
//! infection and terminal event on the same day counts as an infection onset
//! for the three-state view.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Daily evaluation grid `{0, 1, ..., horizon}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: u32,
}

impl TimeGrid {
    /// Grid with days `0..=horizon`; `horizon >= 1`.
    pub fn new(horizon: u32) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1 day".into()));
        }
        Ok(TimeGrid { horizon })
    }

    /// Largest day `J` on the grid.
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Number of grid days, `J + 1`.
    pub fn len(&self) -> usize {
        self.horizon as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Iterator over days `0..=J`.
    pub fn days(&self) -> impl Iterator<Item = u32> {
        0..=self.horizon
    }
}

/// Kind of terminal event ending the hospital stay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalKind {
    Death,
    Discharge,
}

impl TerminalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalKind::Death => "death",
            TerminalKind::Discharge => "discharge",
        }
    }
}

/// Terminal event (day and kind). Day and kind are only meaningful together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalEvent {
    pub day: u32,
    pub kind: TerminalKind,
}

/// One patient's raw follow-up record.
///
/// Invariants (checked by [`PatientRecord::validate`]):
/// - when both are present, `infection_day <= terminal.day`;
/// - exactly one of `terminal` present or `at_risk_beyond_horizon` — unless
///   `infection_day` is present, in which case both may be absent
///   (post-onset follow-up unrecorded).
///
/// Recorded days may exceed the evaluation horizon; such events simply fall
/// outside the grid and the patient counts as at risk through the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    /// Day of infection onset, if the patient ever acquired the infection.
    pub infection_day: Option<u32>,
    /// Terminal event ending the stay, if recorded.
    pub terminal: Option<TerminalEvent>,
    /// Known to still be in hospital beyond the last recorded day.
    pub at_risk_beyond_horizon: bool,
}

impl PatientRecord {
    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidRecord {
            patient_id: self.patient_id.clone(),
            reason: reason.into(),
        }
    }

    /// Check the record invariants (grid-independent).
    pub fn validate(&self) -> Result<()> {
        if self.patient_id.is_empty() {
            return Err(self.invalid("empty patient_id"));
        }
        if let (Some(onset), Some(term)) = (self.infection_day, self.terminal) {
            if onset > term.day {
                return Err(self.invalid(format!(
                    "infection_day {} after terminal day {}",
                    onset, term.day
                )));
            }
        }
        match (self.terminal.is_some(), self.at_risk_beyond_horizon) {
            (true, true) => {
                Err(self.invalid("terminal event recorded together with at-risk-beyond marker"))
            }
            (false, false) if self.infection_day.is_none() => Err(self.invalid(
                "no terminal event, no at-risk marker, and no infection day; outcome unknown",
            )),
            _ => Ok(()),
        }
    }

    /// Whether the infection occurred within the grid.
    pub fn infected_within(&self, grid: &TimeGrid) -> bool {
        self.infection_day.is_some_and(|d| d <= grid.horizon())
    }

    /// Whether post-onset follow-up is recorded (terminal event or at-risk
    /// marker) for an infected patient; vacuously true for the uninfected.
    pub fn has_post_onset_follow_up(&self) -> bool {
        self.infection_day.is_none() || self.terminal.is_some() || self.at_risk_beyond_horizon
    }
}

/// Observed three-state outcome `(t-tilde, eps-tilde)` within a grid: first of
/// infection-free death, infection-free discharge, or infection onset; or
/// still at risk beyond the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreeStateOutcome {
    InfectionFreeDeath(u32),
    InfectionFreeDischarge(u32),
    InfectionOnset(u32),
    /// No event within the grid; at risk through the horizon.
    AtRiskBeyondHorizon,
}

impl ThreeStateOutcome {
    /// Observed exit day, `None` when at risk beyond the horizon.
    pub fn t_tilde(&self) -> Option<u32> {
        match *self {
            ThreeStateOutcome::InfectionFreeDeath(d)
            | ThreeStateOutcome::InfectionFreeDischarge(d)
            | ThreeStateOutcome::InfectionOnset(d) => Some(d),
            ThreeStateOutcome::AtRiskBeyondHorizon => None,
        }
    }

    /// At risk at the start of day `j` (counted in the day-`j` risk set).
    pub fn at_risk(&self, day: u32) -> bool {
        self.t_tilde().map_or(true, |t| t >= day)
    }

    pub fn is_infection_onset(&self) -> bool {
        matches!(self, ThreeStateOutcome::InfectionOnset(_))
    }
}

/// One patient's derived three-state view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedPatient {
    pub patient_id: String,
    pub outcome: ThreeStateOutcome,
}

/// Derive the three-state view of a record on a grid.
///
/// Events recorded past the horizon fall off the grid: the patient is treated
/// as at risk beyond the horizon (and in particular as never infected within
/// it when the onset lies beyond `J`).
pub fn derive_observed(record: &PatientRecord, grid: &TimeGrid) -> Result<ObservedPatient> {
    record.validate()?;
    let horizon = grid.horizon();
    let onset = record.infection_day.filter(|&d| d <= horizon);
    let terminal = record.terminal.filter(|t| t.day <= horizon);
    let outcome = match (onset, terminal) {
        // Tie (onset day == terminal day) resolves infection-first.
        (Some(c), _) => ThreeStateOutcome::InfectionOnset(c),
        (None, Some(t)) => match t.kind {
            TerminalKind::Death => ThreeStateOutcome::InfectionFreeDeath(t.day),
            TerminalKind::Discharge => ThreeStateOutcome::InfectionFreeDischarge(t.day),
        },
        (None, None) => ThreeStateOutcome::AtRiskBeyondHorizon,
    };
    Ok(ObservedPatient {
        patient_id: record.patient_id.clone(),
        outcome,
    })
}

/// Derive the three-state view for a whole cohort, preserving order.
pub fn derive_cohort(records: &[PatientRecord], grid: &TimeGrid) -> Result<Vec<ObservedPatient>> {
    records.iter().map(|r| derive_observed(r, grid)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(
        id: &str,
        infection: Option<u32>,
        terminal: Option<(u32, TerminalKind)>,
        at_risk: bool,
    ) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            infection_day: infection,
            terminal: terminal.map(|(day, kind)| TerminalEvent { day, kind }),
            at_risk_beyond_horizon: at_risk,
        }
    }

    #[test]
    fn grid_requires_positive_horizon() {
        assert!(TimeGrid::new(0).is_err());
        assert_eq!(TimeGrid::new(6).unwrap().len(), 7);
    }

    #[test]
    fn validation_rejects_contradictions() {
        let r = record("x", Some(5), Some((3, TerminalKind::Death)), false);
        assert!(r.validate().is_err());
        let r = record("x", None, Some((3, TerminalKind::Death)), true);
        assert!(r.validate().is_err());
        let r = record("x", None, None, false);
        assert!(r.validate().is_err());
        // Unrecorded post-onset follow-up is allowed.
        let r = record("x", Some(2), None, false);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn derive_resolves_ties_infection_first() {
        let grid = TimeGrid::new(6).unwrap();
        let r = record("x", Some(3), Some((3, TerminalKind::Death)), false);
        let obs = derive_observed(&r, &grid).unwrap();
        assert_eq!(obs.outcome, ThreeStateOutcome::InfectionOnset(3));
    }

    #[test]
    fn derive_clips_events_beyond_horizon() {
        let grid = TimeGrid::new(6).unwrap();
        // Infection at day 7 with horizon 6: never exposed within the grid.
        let r = record("x", Some(7), Some((9, TerminalKind::Discharge)), false);
        let obs = derive_observed(&r, &grid).unwrap();
        assert_eq!(obs.outcome, ThreeStateOutcome::AtRiskBeyondHorizon);
        // Uninfected discharge past the horizon: at risk through the grid.
        let r = record("y", None, Some((8, TerminalKind::Discharge)), false);
        let obs = derive_observed(&r, &grid).unwrap();
        assert_eq!(obs.outcome, ThreeStateOutcome::AtRiskBeyondHorizon);
        // Infection within the grid keeps its onset even when terminal is beyond.
        let r = record("z", Some(4), Some((9, TerminalKind::Death)), false);
        let obs = derive_observed(&r, &grid).unwrap();
        assert_eq!(obs.outcome, ThreeStateOutcome::InfectionOnset(4));
    }

    #[test]
    fn at_risk_accounting() {
        let o = ThreeStateOutcome::InfectionFreeDeath(3);
        assert!(o.at_risk(3));
        assert!(!o.at_risk(4));
        assert!(ThreeStateOutcome::AtRiskBeyondHorizon.at_risk(100));
    }
}
