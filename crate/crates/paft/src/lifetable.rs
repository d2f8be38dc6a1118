//! Daily life tables: event counts and risk sets.
//!
//! For the observed three-state view, day `j` carries the counts
//! `d[j] = (infection-free deaths, infection-free discharges, infection
//! onsets)` and the risk set `r[j] = #{patients with exit day >= j}`; the
//! recursion `r[j+1] = r[j] - d_total[j]` holds by construction, with patients
//! at risk beyond the horizon never leaving the risk set. The same container
//! holds the factual two-state table on `(T, eps)` (terminal events for all
//! patients, infection column identically zero).

use crate::cohort::{ObservedPatient, PatientRecord, TerminalKind, ThreeStateOutcome, TimeGrid};
use crate::error::{Error, Result};

/// Column index of an event kind in a life table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventColumn {
    Death,
    Discharge,
    Infection,
}

impl EventColumn {
    fn idx(self) -> usize {
        match self {
            EventColumn::Death => 0,
            EventColumn::Discharge => 1,
            EventColumn::Infection => 2,
        }
    }
}

/// Event counts and risk sets on a daily grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifeTable {
    horizon: u32,
    n: u64,
    /// `d[j] = [deaths, discharges, infections]` at day `j`, `j = 0..=J`.
    d: Vec<[u64; 3]>,
    /// `r[j] = #{exit day >= j}`, `j = 0..=J+1`.
    r: Vec<u64>,
}

impl LifeTable {
    /// Build the three-state life table of a derived cohort.
    pub fn from_three_state(cohort: &[ObservedPatient], grid: &TimeGrid) -> Self {
        let days = grid.len();
        let mut d = vec![[0u64; 3]; days];
        for obs in cohort {
            match obs.outcome {
                ThreeStateOutcome::InfectionFreeDeath(day) => d[day as usize][0] += 1,
                ThreeStateOutcome::InfectionFreeDischarge(day) => d[day as usize][1] += 1,
                ThreeStateOutcome::InfectionOnset(day) => d[day as usize][2] += 1,
                ThreeStateOutcome::AtRiskBeyondHorizon => {}
            }
        }
        Self::from_daily_counts(d, cohort.len() as u64, grid.horizon())
    }

    /// Build the factual two-state life table on `(T, eps)`: terminal events
    /// for every patient regardless of infection status.
    ///
    /// Errors with `factual-cif-needs-terminal-events` when an infected
    /// patient has neither a recorded terminal event nor an at-risk marker.
    pub fn factual(records: &[PatientRecord], grid: &TimeGrid) -> Result<Self> {
        let days = grid.len();
        let mut d = vec![[0u64; 3]; days];
        for record in records {
            record.validate()?;
            match record.terminal {
                Some(term) => {
                    if term.day <= grid.horizon() {
                        d[term.day as usize][EventColumn::from(term.kind).idx()] += 1;
                    }
                }
                None => {
                    if !record.at_risk_beyond_horizon {
                        // validate() guarantees infection_day is present here.
                        return Err(Error::FactualCifNeedsTerminalEvents {
                            patient_id: record.patient_id.clone(),
                            onset_day: record.infection_day.unwrap_or_default(),
                        });
                    }
                }
            }
        }
        Ok(Self::from_daily_counts(
            d,
            records.len() as u64,
            grid.horizon(),
        ))
    }

    /// Derive risk sets from daily counts via the recursion.
    fn from_daily_counts(d: Vec<[u64; 3]>, n: u64, horizon: u32) -> Self {
        let mut r = Vec::with_capacity(d.len() + 1);
        let mut at_risk = n;
        for counts in &d {
            r.push(at_risk);
            let total = counts[0] + counts[1] + counts[2];
            debug_assert!(total <= at_risk, "more events than patients at risk");
            at_risk -= total;
        }
        r.push(at_risk);
        LifeTable { horizon, n, d, r }
    }

    /// Low-level constructor from aggregated data: daily counts and explicit
    /// risk sets (`r.len() == d.len() + 1`).
    ///
    /// Only shapes are validated; consistency problems (e.g. events on days
    /// with an empty risk set) surface later as estimator errors such as
    /// `empty-risk-set`. This supports published aggregated tables that may
    /// not expose patient-level recursion.
    pub fn from_parts(d: Vec<[u64; 3]>, r: Vec<u64>, n: u64, horizon: u32) -> Result<Self> {
        if d.len() != horizon as usize + 1 {
            return Err(Error::InvalidInput(format!(
                "life table needs {} daily count rows, got {}",
                horizon as usize + 1,
                d.len()
            )));
        }
        if r.len() != d.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "life table needs {} risk-set entries, got {}",
                d.len() + 1,
                r.len()
            )));
        }
        Ok(LifeTable { horizon, n, d, r })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Cohort size `n`.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Days `0..=J`.
    pub fn days(&self) -> impl Iterator<Item = u32> {
        0..=self.horizon
    }

    /// Event count of one kind at `day`.
    pub fn d(&self, day: u32, kind: EventColumn) -> u64 {
        self.d[day as usize][kind.idx()]
    }

    pub fn deaths(&self, day: u32) -> u64 {
        self.d(day, EventColumn::Death)
    }

    pub fn discharges(&self, day: u32) -> u64 {
        self.d(day, EventColumn::Discharge)
    }

    pub fn infections(&self, day: u32) -> u64 {
        self.d(day, EventColumn::Infection)
    }

    /// All events at `day`.
    pub fn d_total(&self, day: u32) -> u64 {
        let c = self.d[day as usize];
        c[0] + c[1] + c[2]
    }

    /// Risk set at the start of `day`; defined for `day <= J + 1`.
    pub fn r(&self, day: u32) -> u64 {
        self.r[day as usize]
    }

    /// Cumulative infections through `day`.
    pub fn cum_infections(&self, day: u32) -> u64 {
        (0..=day).map(|j| self.infections(j)).sum()
    }

    /// Total infections within the grid.
    pub fn total_infected(&self) -> u64 {
        self.cum_infections(self.horizon)
    }
}

impl From<TerminalKind> for EventColumn {
    fn from(kind: TerminalKind) -> Self {
        match kind {
            TerminalKind::Death => EventColumn::Death,
            TerminalKind::Discharge => EventColumn::Discharge,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{toy_grid, toy_observed, toy_records};

    #[test]
    fn toy_three_state_counts_and_risk_sets() {
        let grid = toy_grid();
        let table = LifeTable::from_three_state(&toy_observed(), &grid);
        assert_eq!(table.n(), 6);
        let expected_deaths = [0, 1, 0, 1, 0, 0, 1];
        let expected_infections = [0, 0, 1, 0, 1, 0, 0];
        let expected_r = [6, 6, 5, 4, 3, 2, 2];
        for j in 0..=6u32 {
            assert_eq!(
                table.deaths(j),
                expected_deaths[j as usize],
                "deaths day {j}"
            );
            assert_eq!(table.discharges(j), 0, "discharges day {j}");
            assert_eq!(
                table.infections(j),
                expected_infections[j as usize],
                "onsets day {j}"
            );
            assert_eq!(table.r(j), expected_r[j as usize], "risk set day {j}");
        }
        // Patient F never exits: still at risk past the horizon.
        assert_eq!(table.r(7), 1);
        assert_eq!(table.total_infected(), 2);
    }

    #[test]
    fn recursion_identity_holds() {
        let grid = toy_grid();
        let table = LifeTable::from_three_state(&toy_observed(), &grid);
        for j in grid.days() {
            assert_eq!(table.r(j + 1), table.r(j) - table.d_total(j));
        }
    }

    #[test]
    fn factual_errors_without_post_onset_follow_up() {
        let grid = toy_grid();
        let err = LifeTable::factual(&toy_records(), &grid).unwrap_err();
        assert_eq!(err.code(), "factual-cif-needs-terminal-events");
    }

    #[test]
    fn factual_counts_terminal_events_for_all() {
        let grid = toy_grid();
        let mut records = toy_records();
        // Complete the toy cohort: C dies at day 5 after onset, E discharged
        // at day 7 (beyond the horizon).
        records[2].terminal = Some(crate::cohort::TerminalEvent {
            day: 5,
            kind: TerminalKind::Death,
        });
        records[4].terminal = Some(crate::cohort::TerminalEvent {
            day: 7,
            kind: TerminalKind::Discharge,
        });
        let table = LifeTable::factual(&records, &grid).unwrap();
        assert_eq!(
            table.infections(2),
            0,
            "factual table has no infection column"
        );
        assert_eq!(table.deaths(5), 1);
        assert_eq!(
            table.r(7),
            2,
            "E (terminal beyond horizon) and F stay at risk"
        );
    }
}
