//! Shared fixtures for the integration-test targets: the six-patient worked
//! example with its exact weight and curve tables, and a randomized-cohort
//! generator for the algebraic-identity sweeps.

#![allow(dead_code)]

use paft::cohort::{
    derive_cohort, ObservedPatient, PatientRecord, TerminalEvent, TerminalKind, TimeGrid,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn toy_grid() -> TimeGrid {
    TimeGrid::new(6).unwrap()
}

/// The six-patient worked example (horizon 6): A dies at day 1, B dies at
/// day 6, C acquires the infection at day 2, D dies at day 3, E acquires the
/// infection at day 4, F is still in hospital beyond the horizon.
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

fn random_kind(rng: &mut StdRng) -> TerminalKind {
    if rng.gen_bool(0.5) {
        TerminalKind::Death
    } else {
        TerminalKind::Discharge
    }
}

fn random_patient(rng: &mut StdRng, index: usize, horizon: u32) -> PatientRecord {
    let patient_id = format!("p{index:03}");
    let roll: f64 = rng.gen();
    if roll < 0.40 {
        // Infected at day >= 1 (sometimes beyond the horizon), with a random
        // post-onset record: a terminal event (possibly tied to the onset day
        // or past the horizon), the still-in-hospital marker, or nothing
        // (post-onset follow-up unrecorded).
        let onset = rng.gen_range(1..=horizon + 2);
        let follow: f64 = rng.gen();
        let terminal = (follow < 0.5).then(|| TerminalEvent {
            day: onset + rng.gen_range(0..=3),
            kind: random_kind(rng),
        });
        let at_risk_beyond_horizon = terminal.is_none() && follow < 0.75;
        PatientRecord {
            patient_id,
            infection_day: Some(onset),
            terminal,
            at_risk_beyond_horizon,
        }
    } else if roll < 0.85 {
        // Never infected, terminal event anywhere on days 0..=horizon+2
        // (day-0 events and off-grid events both possible).
        PatientRecord {
            patient_id,
            infection_day: None,
            terminal: Some(TerminalEvent {
                day: rng.gen_range(0..=horizon + 2),
                kind: random_kind(rng),
            }),
            at_risk_beyond_horizon: false,
        }
    } else {
        // Never infected, still in hospital beyond the horizon.
        PatientRecord {
            patient_id,
            infection_day: None,
            terminal: None,
            at_risk_beyond_horizon: true,
        }
    }
}

/// Random small cohort (n <= 12, horizon <= 8) for the identity sweeps.
///
/// Shape guarantees, everything else randomized:
/// - patient 0 is never infected and still at risk beyond the horizon, so
///   every day keeps a positive never-infected risk set and all weight
///   schemes stay well defined;
/// - at least one infection onset falls strictly inside the grid and none on
///   day 0, so the pooled onset-hazard model has events to fit and accepts
///   the cohort (admission-day onsets cannot enter a lagged model);
/// - day-0 terminal events, onset/terminal ties, events past the horizon,
///   and unrecorded post-onset follow-up all occur across draws.
pub fn random_cohort(seed: u64) -> (Vec<PatientRecord>, TimeGrid) {
    let mut rng = StdRng::seed_from_u64(seed);
    let horizon = rng.gen_range(2..=8u32);
    let grid = TimeGrid::new(horizon).unwrap();
    let n = rng.gen_range(2..=12usize);
    let mut records = vec![PatientRecord {
        patient_id: "p000".into(),
        infection_day: None,
        terminal: None,
        at_risk_beyond_horizon: true,
    }];
    for i in 1..n {
        records.push(random_patient(&mut rng, i, horizon));
    }
    let has_in_grid_onset = records
        .iter()
        .any(|r| r.infection_day.is_some_and(|d| (1..=horizon).contains(&d)));
    if !has_in_grid_onset {
        let onset = rng.gen_range(1..=horizon);
        let terminal = rng.gen_bool(0.5).then(|| TerminalEvent {
            day: onset + rng.gen_range(0..=2),
            kind: random_kind(&mut rng),
        });
        records[1] = PatientRecord {
            patient_id: "p001".into(),
            infection_day: Some(onset),
            terminal,
            at_risk_beyond_horizon: false,
        };
    }
    for record in &records {
        record
            .validate()
            .expect("generator must produce valid records");
    }
    (records, grid)
}
