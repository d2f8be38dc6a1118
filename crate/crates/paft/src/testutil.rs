//! Shared unit-test fixtures: the six-patient worked example.
//!
//! Horizon 6 days. A dies at day 1; B dies at day 6; C acquires the infection
//! at day 2 (post-onset follow-up unrecorded); D dies at day 3; E acquires the
//! infection at day 4 (follow-up unrecorded); F is still in hospital beyond
//! the horizon. All weights and curves for this cohort are exactly
//! representable as small rationals, so tests compare cell for cell.

use crate::cohort::{
    derive_cohort, ObservedPatient, PatientRecord, TerminalEvent, TerminalKind, TimeGrid,
};

pub fn toy_grid() -> TimeGrid {
    TimeGrid::new(6).unwrap()
}

pub fn toy_records() -> Vec<PatientRecord> {
    let death = |id: &str, day: u32| PatientRecord {
        patient_id: id.into(),
        infection_day: None,
        terminal: Some(TerminalEvent {
            day,
            kind: TerminalKind::Death,
        }),
        at_risk_beyond_horizon: false,
    };
    let infected = |id: &str, day: u32| PatientRecord {
        patient_id: id.into(),
        infection_day: Some(day),
        terminal: None,
        at_risk_beyond_horizon: false,
    };
    vec![
        death("A", 1),
        death("B", 6),
        infected("C", 2),
        death("D", 3),
        infected("E", 4),
        PatientRecord {
            patient_id: "F".into(),
            infection_day: None,
            terminal: None,
            at_risk_beyond_horizon: true,
        },
    ]
}

pub fn toy_observed() -> Vec<ObservedPatient> {
    derive_cohort(&toy_records(), &toy_grid()).unwrap()
}

/// Per-patient weights of the censoring-reweighting ledger (rows A..F,
/// columns day 0..6).
pub const TOY_CENSORING_WEIGHTS: [[&str; 7]; 6] = [
    ["1", "1", "1", "1", "1", "1", "1"],
    ["1", "1", "5/4", "5/4", "15/8", "15/8", "15/8"],
    ["1", "1", "0", "0", "0", "0", "0"],
    ["1", "1", "5/4", "5/4", "5/4", "5/4", "5/4"],
    ["1", "1", "5/4", "5/4", "0", "0", "0"],
    ["1", "1", "5/4", "5/4", "15/8", "15/8", "15/8"],
];

/// Counterfactual cumulative incidence of death under censoring reweighting.
pub const TOY_CENSORING_CCIF: [&str; 7] = ["0", "1/6", "1/6", "3/8", "3/8", "3/8", "11/16"];

/// Per-day conditional onset odds `d3 / (r - d3)` used by the censoring ledger.
pub const TOY_CENSORING_ODDS: [&str; 7] = ["0", "0", "1/4", "0", "1/2", "0", "0"];

/// Per-patient weights of the exclusion ledger.
pub const TOY_EXCLUSION_WEIGHTS: [[&str; 7]; 6] = [
    ["3/2", "3/2", "3/2", "3/2", "3/2", "3/2", "3/2"],
    ["3/2", "3/2", "3/2", "3/2", "3/2", "3/2", "3/2"],
    ["0", "0", "0", "0", "0", "0", "0"],
    ["3/2", "3/2", "3/2", "3/2", "3/2", "3/2", "3/2"],
    ["0", "0", "0", "0", "0", "0", "0"],
    ["3/2", "3/2", "3/2", "3/2", "3/2", "3/2", "3/2"],
];

pub const TOY_EXCLUSION_CCIF: [&str; 7] = ["0", "1/4", "1/4", "1/2", "1/2", "1/2", "3/4"];

/// Marginal ever-infected odds row of the exclusion ledger (constant).
pub const TOY_EXCLUSION_ODDS: [&str; 7] = ["1/2", "1/2", "1/2", "1/2", "1/2", "1/2", "1/2"];

/// Per-patient weights of the landmark competing-risks ledger.
pub const TOY_COMPETING_WEIGHTS: [[&str; 7]; 6] = [
    ["1", "1", "6/5", "6/5", "3/2", "3/2", "3/2"],
    ["1", "1", "6/5", "6/5", "3/2", "3/2", "3/2"],
    ["1", "1", "0", "0", "0", "0", "0"],
    ["1", "1", "6/5", "6/5", "3/2", "3/2", "3/2"],
    ["1", "1", "6/5", "6/5", "0", "0", "0"],
    ["1", "1", "6/5", "6/5", "3/2", "3/2", "3/2"],
];

pub const TOY_COMPETING_CCIF: [&str; 7] = ["0", "1/6", "1/5", "2/5", "1/2", "1/2", "3/4"];

/// Marginal landmark odds row `cum_d3 / (n - cum_d3)` of the competing ledger.
pub const TOY_COMPETING_ODDS: [&str; 7] = ["0", "0", "1/5", "1/5", "1/2", "1/2", "1/2"];
