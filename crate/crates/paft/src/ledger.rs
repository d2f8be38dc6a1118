//! Per-patient per-day weight ledgers.
//!
//! Each counterfactual estimator is a weighted empirical distribution of
//! infection-free deaths; the ledger makes the implicit weights explicit so
//! that every reweighting step is auditable. A ledger is an `n x (J+1)`
//! matrix: `weight[i][j]` is patient `i`'s mass at day `j`, and every column
//! sums to `n` exactly (mass is transferred between patients, never created).
//!
//! - `censoring`: patients start with weight 1; when a patient acquires the
//!   infection at day `j`, their accumulated weight is split equally over the
//!   `r_j - d_j3` patients still in the post-censoring risk set (same-day
//!   terminal events included, since onsets censor first). Weights freeze at
//!   the terminal event.
//! - `exclusion`: ever-infected patients carry weight 0 from day 0; everyone
//!   else carries the constant `n / (n - total infected)` — one plus the
//!   marginal odds of ever acquiring the infection.
//! - `competing`: at landmark `t`, every patient uninfected through
//!   `min(t, own exit)` carries `(1 - cumulative onsets(t)/n)^-1`, infected
//!   patients carry 0 from their onset day. Weights keep growing after a
//!   patient's own terminal event as later onsets accrue.
//!
//! Cumulating `weight[i][t]` over infection-free deaths with exit day
//! `<= t` and dividing by `n` reproduces the corresponding estimator exactly.

use std::io::Write;

use num::BigRational;
use serde::{Deserialize, Serialize};

use crate::cohort::{ObservedPatient, ThreeStateOutcome, TimeGrid};
use crate::error::{Error, Result};
use crate::field::{render_exact, Field};
use crate::lifetable::LifeTable;

/// Which reweighting scheme a ledger tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Censoring,
    Exclusion,
    Competing,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Censoring => "censoring",
            Scheme::Exclusion => "exclusion",
            Scheme::Competing => "competing",
        }
    }
}

/// Status of one ledger cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    AtRisk,
    Dead,
    Discharged,
    CensoredInfected,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::AtRisk => "at-risk",
            CellStatus::Dead => "dead",
            CellStatus::Discharged => "discharged",
            CellStatus::CensoredInfected => "censored-infected",
        }
    }
}

/// Rendering of ledger cells in CSV exports.
pub trait LedgerCell: Field {
    fn render(&self) -> String;
}

impl LedgerCell for f64 {
    fn render(&self) -> String {
        crate::io::fmt_f64(*self)
    }
}

impl LedgerCell for BigRational {
    fn render(&self) -> String {
        render_exact(self)
    }
}

/// Explicit weight-transfer ledger for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightLedger<T> {
    scheme: Scheme,
    horizon: u32,
    patient_ids: Vec<String>,
    /// `weights[i][j]`, rows aligned with the cohort.
    weights: Vec<Vec<T>>,
    annotations: Vec<Vec<CellStatus>>,
    /// Per-day transfer odds summary row: conditional onset odds
    /// `d_j3 / (r_j - d_j3)` for `censoring`, marginal ever-infected odds for
    /// `exclusion`, cumulative landmark odds for `competing`.
    odds: Vec<T>,
}

impl<T: Field> WeightLedger<T> {
    /// Build the ledger of `scheme` for a derived cohort.
    pub fn build(cohort: &[ObservedPatient], grid: &TimeGrid, scheme: Scheme) -> Result<Self> {
        let table = LifeTable::from_three_state(cohort, grid);
        let annotations = annotate(cohort, grid);
        let patient_ids = cohort.iter().map(|p| p.patient_id.clone()).collect();
        let (weights, odds) = match scheme {
            Scheme::Censoring => censoring_weights(cohort, grid, &table)?,
            Scheme::Exclusion => exclusion_weights(cohort, grid, &table)?,
            Scheme::Competing => competing_weights(cohort, grid, &table)?,
        };
        Ok(WeightLedger {
            scheme,
            horizon: grid.horizon(),
            patient_ids,
            weights,
            annotations,
            odds,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn patient_ids(&self) -> &[String] {
        &self.patient_ids
    }

    pub fn weight(&self, patient: usize, day: u32) -> &T {
        &self.weights[patient][day as usize]
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn annotation(&self, patient: usize, day: u32) -> CellStatus {
        self.annotations[patient][day as usize]
    }

    pub fn transfer_odds(&self) -> &[T] {
        &self.odds
    }

    /// Column sum minus `n`: zero for every day when mass is conserved.
    pub fn conservation_defect(&self, day: u32) -> T {
        let mut sum = T::zero();
        for row in &self.weights {
            sum = sum + row[day as usize].clone();
        }
        sum - T::from_count(self.weights.len() as u64)
    }

    /// Reproduce the scheme's estimator from the ledger alone: cumulate the
    /// day-`t` weight of every infection-free death with exit day `<= t`.
    pub fn estimate(&self, cohort: &[ObservedPatient]) -> Result<Vec<T>> {
        if cohort.len() != self.weights.len() {
            return Err(Error::InvalidInput(
                "ledger and cohort have different patient counts".into(),
            ));
        }
        let n = T::from_count(cohort.len() as u64);
        let days = self.horizon as usize + 1;
        let mut values = Vec::with_capacity(days);
        for t in 0..days as u32 {
            let mut mass = T::zero();
            for (i, obs) in cohort.iter().enumerate() {
                if let ThreeStateOutcome::InfectionFreeDeath(day) = obs.outcome {
                    if day <= t {
                        mass = mass + self.weights[i][t as usize].clone();
                    }
                }
            }
            values.push(mass / n.clone());
        }
        Ok(values)
    }
}

impl<T: LedgerCell> WeightLedger<T> {
    /// Write the weight matrix as CSV: `patient_id,day_0,...,day_J` with one
    /// row per patient plus a trailing `transfer_odds` summary row.
    pub fn write_weights_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header(self.horizon))?;
        for (id, row) in self.patient_ids.iter().zip(&self.weights) {
            let mut record = vec![id.clone()];
            record.extend(row.iter().map(LedgerCell::render));
            w.write_record(&record)?;
        }
        let mut record = vec!["transfer_odds".to_string()];
        record.extend(self.odds.iter().map(LedgerCell::render));
        w.write_record(&record)?;
        w.flush()?;
        Ok(())
    }

    /// Write the annotation matrix as CSV, same shape as the weight matrix.
    pub fn write_annotations_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header(self.horizon))?;
        for (id, row) in self.patient_ids.iter().zip(&self.annotations) {
            let mut record = vec![id.clone()];
            record.extend(row.iter().map(|s| s.as_str().to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn header(horizon: u32) -> Vec<String> {
    let mut h = vec!["patient_id".to_string()];
    h.extend((0..=horizon).map(|j| format!("day_{j}")));
    h
}

fn annotate(cohort: &[ObservedPatient], grid: &TimeGrid) -> Vec<Vec<CellStatus>> {
    cohort
        .iter()
        .map(|obs| {
            grid.days()
                .map(|j| match obs.outcome {
                    ThreeStateOutcome::InfectionFreeDeath(d) if d <= j => CellStatus::Dead,
                    ThreeStateOutcome::InfectionFreeDischarge(d) if d <= j => {
                        CellStatus::Discharged
                    }
                    ThreeStateOutcome::InfectionOnset(d) if d <= j => CellStatus::CensoredInfected,
                    _ => CellStatus::AtRisk,
                })
                .collect()
        })
        .collect()
}

/// Censoring scheme: redistribute each onset's accumulated weight equally
/// over the same-day post-censoring risk set.
fn censoring_weights<T: Field>(
    cohort: &[ObservedPatient],
    grid: &TimeGrid,
    table: &LifeTable,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let n = cohort.len();
    let mut weights: Vec<Vec<T>> = vec![Vec::with_capacity(grid.len()); n];
    let mut current: Vec<T> = vec![T::one(); n];
    let mut odds = Vec::with_capacity(grid.len());
    for j in grid.days() {
        let onsets = table.infections(j);
        let survivors = table.r(j) - onsets;
        if onsets > 0 {
            if survivors == 0 {
                return Err(Error::DegenerateWeight {
                    day: Some(j),
                    reason: format!(
                        "onset weight at day {j} has no surviving risk-set member to carry it"
                    ),
                });
            }
            let mut pool = T::zero();
            for (i, obs) in cohort.iter().enumerate() {
                if obs.outcome == ThreeStateOutcome::InfectionOnset(j) {
                    pool = pool + current[i].clone();
                    current[i] = T::zero();
                }
            }
            let share = pool / T::from_count(survivors);
            for (i, obs) in cohort.iter().enumerate() {
                if obs.outcome.at_risk(j) && obs.outcome != ThreeStateOutcome::InfectionOnset(j) {
                    current[i] = current[i].clone() + share.clone();
                }
            }
            odds.push(T::ratio(onsets, survivors));
        } else {
            odds.push(T::zero());
        }
        for (i, w) in current.iter().enumerate() {
            weights[i].push(w.clone());
        }
    }
    Ok((weights, odds))
}

/// Exclusion scheme: infected rows zero throughout, the rest carry
/// `1 + odds(ever infected)` from day 0.
fn exclusion_weights<T: Field>(
    cohort: &[ObservedPatient],
    grid: &TimeGrid,
    table: &LifeTable,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let n = table.n();
    let infected = table.total_infected();
    if infected >= n {
        return Err(Error::DegenerateWeight {
            day: None,
            reason: format!("all {n} patients acquired the infection; exclusion weight undefined"),
        });
    }
    let weight = T::ratio(n, n - infected);
    let odds_value = T::ratio(infected, n - infected);
    let weights = cohort
        .iter()
        .map(|obs| {
            let w = if obs.outcome.is_infection_onset() {
                T::zero()
            } else {
                weight.clone()
            };
            vec![w; grid.len()]
        })
        .collect();
    Ok((weights, vec![odds_value; grid.len()]))
}

/// Competing scheme: landmark weight `(1 - cum onsets(t)/n)^-1` for everyone
/// uninfected through `min(t, own exit)`.
fn competing_weights<T: Field>(
    cohort: &[ObservedPatient],
    grid: &TimeGrid,
    table: &LifeTable,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let n = table.n();
    let mut day_weight = Vec::with_capacity(grid.len());
    let mut odds = Vec::with_capacity(grid.len());
    let mut cum_onsets = 0u64;
    for t in grid.days() {
        cum_onsets += table.infections(t);
        if cum_onsets >= n {
            return Err(Error::DegenerateWeight {
                day: Some(t),
                reason: format!("all {n} patients infected by day {t}; landmark weight undefined"),
            });
        }
        day_weight.push(T::ratio(n, n - cum_onsets));
        odds.push(T::ratio(cum_onsets, n - cum_onsets));
    }
    let weights = cohort
        .iter()
        .map(|obs| {
            grid.days()
                .map(|t| match obs.outcome {
                    ThreeStateOutcome::InfectionOnset(d) if d <= t => T::zero(),
                    _ => day_weight[t as usize].clone(),
                })
                .collect()
        })
        .collect();
    Ok((weights, odds))
}

/// One onset's contribution to a decomposed censoring weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferSummand<T> {
    /// Onset day the mass came from.
    pub source_day: u32,
    /// Conditional onset odds at the source day.
    pub odds: T,
    /// Amplification factor applied to the odds in this form.
    pub amplification: T,
    /// `odds * amplification`.
    pub contribution: T,
}

/// The censoring weight `W_j` written three algebraically equal ways.
///
/// - `product_form`: `prod_{j'<=j} (1 - d_j'3 / r_j')^-1`;
/// - `backward`: `1 + sum` over onset days `j' <= j` of the odds at `j'`
///   amplified by the weight already accumulated *before* `j'`
///   (`prod_{j''<j'} (1 + odds_j'')`) — mass received at `j'` and carried
///   forward unchanged;
/// - `forward`: `1 + sum` over onset days `j' <= j` of the odds at `j'`
///   amplified by all *later* transfers through `j`
///   (`prod_{j'<j''<=j} (1 + odds_j'')`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightDecomposition<T> {
    pub day: u32,
    pub product_form: T,
    pub backward: Vec<TransferSummand<T>>,
    pub forward: Vec<TransferSummand<T>>,
    pub backward_total: T,
    pub forward_total: T,
}

/// Decompose the censoring weight at `day` into per-onset-day transfers.
pub fn decompose_weight<T: Field>(table: &LifeTable, day: u32) -> Result<WeightDecomposition<T>> {
    // Conditional odds per day; None marks an undefined cell (all at risk
    // infected) which poisons every later weight.
    let mut odds: Vec<Option<T>> = Vec::with_capacity(day as usize + 1);
    for j in 0..=day {
        let onsets = table.infections(j);
        if onsets == 0 {
            odds.push(Some(T::zero()));
        } else {
            let survivors = table.r(j) - onsets;
            if survivors == 0 {
                return Err(Error::DegenerateWeight {
                    day: Some(j),
                    reason: format!("onset odds undefined at day {j}: no survivors"),
                });
            }
            odds.push(Some(T::ratio(onsets, survivors)));
        }
    }
    let odds: Vec<T> = odds.into_iter().map(Option::unwrap).collect();

    let mut product_form = T::one();
    for o in &odds {
        product_form = product_form * (T::one() + o.clone());
    }

    // prefix[j] = prod_{j'' < j} (1 + odds_j''); suffix[j] = prod_{j'' > j, <= day}.
    let len = odds.len();
    let mut prefix = vec![T::one(); len];
    for j in 1..len {
        prefix[j] = prefix[j - 1].clone() * (T::one() + odds[j - 1].clone());
    }
    let mut suffix = vec![T::one(); len];
    for j in (0..len - 1).rev() {
        suffix[j] = suffix[j + 1].clone() * (T::one() + odds[j + 1].clone());
    }

    let mut backward = Vec::new();
    let mut forward = Vec::new();
    let mut backward_total = T::one();
    let mut forward_total = T::one();
    for (j, o) in odds.iter().enumerate() {
        if o.is_zero() {
            continue;
        }
        let b = TransferSummand {
            source_day: j as u32,
            odds: o.clone(),
            amplification: prefix[j].clone(),
            contribution: o.clone() * prefix[j].clone(),
        };
        backward_total = backward_total + b.contribution.clone();
        backward.push(b);
        let f = TransferSummand {
            source_day: j as u32,
            odds: o.clone(),
            amplification: suffix[j].clone(),
            contribution: o.clone() * suffix[j].clone(),
        };
        forward_total = forward_total + f.contribution.clone();
        forward.push(f);
    }

    Ok(WeightDecomposition {
        day,
        product_form,
        backward,
        forward,
        backward_total,
        forward_total,
    })
}
