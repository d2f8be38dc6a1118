//! Synthetic cohorts with a time-dependent severity process that confounds
//! infection and the terminal events, plus Monte-Carlo counterfactual ground
//! truth obtained by switching the infection hazard off.
//!
//! Data-generating process, per patient and day:
//!
//! * Admission (day 0) draws a baseline severity `L_0 ~ Normal(mean, sd)`.
//! * Each later day first updates severity,
//!   `L_j = rho * L_{j-1} + noise_sd * eps_j + shift * [onset < j]`,
//!   so an infection moves severity from the day after onset;
//! * then draws the day's events in tie-break order — infection onset first
//!   (if still uninfected), then death, then discharge — each from a
//!   logistic hazard. The infection hazard conditions on the lagged severity
//!   `L_{j-1}` and the lagged day index `j-1`, exactly the covariate pair
//!   the discrete-hazard weight model is fit on, so model-based weights are
//!   correctly specified on simulated data. Death and discharge hazards
//!   condition on `L_{j-1}` and the current infection status (a same-day
//!   onset already counts, mirroring the infection-first tie-break).
//!
//! All randomness is drawn through keyed counter-based generators
//! ([`crate::rng::CounterRng`]), so output is identical across thread counts.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::cohort::{PatientRecord, TerminalEvent, TerminalKind};
use crate::error::{Error, Result};
use crate::ipcw::{expit, CovariateHistory};
use crate::rng::{CounterRng, DrawKind, StreamArm};

/// Baseline severity distribution at admission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSeverity {
    pub mean: f64,
    pub sd: f64,
}

/// First-order autoregressive dynamics of the daily severity process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfounderDynamics {
    /// Multiplier on yesterday's severity.
    pub autoregression: f64,
    /// Scale of the daily Gaussian innovation.
    pub noise_sd: f64,
    /// Added to severity on every day after an infection onset.
    pub post_infection_shift: f64,
}

/// Logistic hazard of infection onset on day `j`:
/// `expit(intercept + severity * L + day_slope * (j - 1))`.
///
/// The day term is a time trend in the baseline onset hazard (a negative
/// slope concentrates onsets early in the stay). It enters through the
/// lagged day index so that a discrete-hazard model fit on the lagged
/// `(severity, day)` covariate pair is exactly correctly specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureHazard {
    pub intercept: f64,
    pub severity: f64,
    pub day_slope: f64,
}

/// Logistic cause-specific hazard of a terminal event on day `j`:
/// `expit(intercept + severity * L + infected * A + day_slope * (j - 1))`.
///
/// The day term lets the baseline hazard trend over the stay (for example a
/// discharge hazard that starts low and rises as patients stabilise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalHazard {
    pub intercept: f64,
    pub severity: f64,
    pub infected: f64,
    pub day_slope: f64,
}

/// Full description of one simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Cohort size.
    pub n: u64,
    /// Last day of the study window.
    pub horizon: u32,
    /// Master seed; every draw is keyed from it.
    pub seed: u64,
    pub baseline: BaselineSeverity,
    pub confounder: ConfounderDynamics,
    pub infection_hazard: ExposureHazard,
    pub death_hazard: TerminalHazard,
    pub discharge_hazard: TerminalHazard,
}

impl ScenarioConfig {
    /// Default scenario: severity drives both the infection hazard and the
    /// terminal-event hazards, so naive estimators are biased; infection
    /// itself is harmful (raises the death hazard, delays discharge).
    ///
    /// Severity is a stationary standard-normal autoregression
    /// (`noise_sd = sqrt(1 - 0.95^2)`), so confounding stays strong over the
    /// whole stay. The time trends shape when each bias shows up: onsets are
    /// front-loaded (negative infection day slope) while death and discharge
    /// hazards rise over the stay, so most terminal events land after the
    /// onset window has closed. With that timing the constant-factor
    /// estimator overshoots from the first days (it reweights early deaths by
    /// the full end-of-study onset share), the landmark estimator tracks it
    /// from above the onset-as-censoring curve, and both end the follow-up
    /// clearly above it.
    pub fn confounded() -> Self {
        ScenarioConfig {
            n: 5_000,
            horizon: 30,
            seed: 20_260_815,
            baseline: BaselineSeverity { mean: 0.0, sd: 1.0 },
            confounder: ConfounderDynamics {
                autoregression: 0.95,
                noise_sd: (1.0f64 - 0.95 * 0.95).sqrt(),
                post_infection_shift: 0.5,
            },
            infection_hazard: ExposureHazard {
                intercept: -2.2,
                severity: 0.6,
                day_slope: -0.1,
            },
            death_hazard: TerminalHazard {
                intercept: -5.0,
                severity: 0.6,
                infected: 1.0,
                day_slope: 0.08,
            },
            discharge_hazard: TerminalHazard {
                intercept: -3.0,
                severity: -1.0,
                infected: -0.5,
                day_slope: 0.08,
            },
        }
    }

    /// Same process with the severity link into the infection hazard cut:
    /// onsets arrive at random, so even the unconditional censoring
    /// estimator is consistent. Infection remains harmful.
    pub fn no_confounding() -> Self {
        let mut config = Self::confounded();
        config.infection_hazard.severity = 0.0;
        config
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig(
                "cohort size must be at least 1".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "horizon must be at least 1 day".into(),
            ));
        }
        let finite = [
            ("baseline.mean", self.baseline.mean),
            ("baseline.sd", self.baseline.sd),
            ("confounder.autoregression", self.confounder.autoregression),
            ("confounder.noise_sd", self.confounder.noise_sd),
            (
                "confounder.post_infection_shift",
                self.confounder.post_infection_shift,
            ),
            (
                "infection_hazard.intercept",
                self.infection_hazard.intercept,
            ),
            ("infection_hazard.severity", self.infection_hazard.severity),
            (
                "infection_hazard.day_slope",
                self.infection_hazard.day_slope,
            ),
            ("death_hazard.intercept", self.death_hazard.intercept),
            ("death_hazard.severity", self.death_hazard.severity),
            ("death_hazard.infected", self.death_hazard.infected),
            ("death_hazard.day_slope", self.death_hazard.day_slope),
            (
                "discharge_hazard.intercept",
                self.discharge_hazard.intercept,
            ),
            ("discharge_hazard.severity", self.discharge_hazard.severity),
            ("discharge_hazard.infected", self.discharge_hazard.infected),
            (
                "discharge_hazard.day_slope",
                self.discharge_hazard.day_slope,
            ),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite, got {value}"
                )));
            }
        }
        if self.baseline.sd < 0.0 {
            return Err(Error::InvalidConfig(
                "baseline.sd must be nonnegative".into(),
            ));
        }
        if self.confounder.noise_sd < 0.0 {
            return Err(Error::InvalidConfig(
                "confounder.noise_sd must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario configs serialize to TOML")
    }
}

/// A simulated cohort: full patient records (with post-onset follow-up) and
/// the daily severity history of every patient while in hospital.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedCohort {
    pub records: Vec<PatientRecord>,
    pub covariates: CovariateHistory,
}

/// Monte-Carlo counterfactual cumulative incidence of death under the
/// infection-free regime, with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub horizon: u32,
    pub replicates: u64,
    pub patients_per_replicate: u64,
    /// `values[t]` = Pr(death by day t | infection hazard removed).
    pub values: Vec<f64>,
    /// Binomial standard error of each value over all simulated patients.
    pub se: Vec<f64>,
}

impl GroundTruth {
    pub fn total_patients(&self) -> u64 {
        self.replicates * self.patients_per_replicate
    }
}

fn normal_draw(seed: u64, arm: StreamArm, unit: u64, day: u32, kind: DrawKind) -> f64 {
    CounterRng::for_draw(seed, arm, unit, day, kind).sample(StandardNormal)
}

fn uniform_draw(seed: u64, arm: StreamArm, unit: u64, day: u32, kind: DrawKind) -> f64 {
    CounterRng::for_draw(seed, arm, unit, day, kind).gen()
}

struct Trajectory {
    onset: Option<u32>,
    terminal: Option<TerminalEvent>,
    /// Severity rows for days `0..=min(exit day, horizon)`.
    severity: Vec<f64>,
}

/// One patient's path through the process. `arm` keys the random streams;
/// the infection hazard only acts on the observed arm.
fn simulate_patient(config: &ScenarioConfig, arm: StreamArm, unit: u64) -> Trajectory {
    let seed = config.seed;
    let infection_active = arm == StreamArm::Observed;
    let mut severity = Vec::with_capacity(config.horizon as usize + 1);
    let mut lagged = config.baseline.mean
        + config.baseline.sd * normal_draw(seed, arm, unit, 0, DrawKind::Baseline);
    severity.push(lagged);
    let mut onset: Option<u32> = None;
    let mut terminal: Option<TerminalEvent> = None;
    for day in 1..=config.horizon {
        let innovation = normal_draw(seed, arm, unit, day, DrawKind::ConfounderNoise);
        let shift = if onset.is_some_and(|o| o < day) {
            config.confounder.post_infection_shift
        } else {
            0.0
        };
        let current = config.confounder.autoregression * lagged
            + config.confounder.noise_sd * innovation
            + shift;
        severity.push(current);

        if infection_active && onset.is_none() {
            let hazard = expit(
                config.infection_hazard.intercept
                    + config.infection_hazard.severity * lagged
                    + config.infection_hazard.day_slope * f64::from(day - 1),
            );
            if uniform_draw(seed, arm, unit, day, DrawKind::InfectionOnset) < hazard {
                onset = Some(day);
            }
        }
        let infected = if onset.is_some() { 1.0 } else { 0.0 };
        let death_hazard = expit(terminal_eta(&config.death_hazard, lagged, infected, day));
        if uniform_draw(seed, arm, unit, day, DrawKind::Death) < death_hazard {
            terminal = Some(TerminalEvent {
                day,
                kind: TerminalKind::Death,
            });
            break;
        }
        let discharge_hazard = expit(terminal_eta(
            &config.discharge_hazard,
            lagged,
            infected,
            day,
        ));
        if uniform_draw(seed, arm, unit, day, DrawKind::Discharge) < discharge_hazard {
            terminal = Some(TerminalEvent {
                day,
                kind: TerminalKind::Discharge,
            });
            break;
        }
        lagged = current;
    }
    Trajectory {
        onset,
        terminal,
        severity,
    }
}

fn terminal_eta(hazard: &TerminalHazard, lagged: f64, infected: f64, day: u32) -> f64 {
    hazard.intercept
        + hazard.severity * lagged
        + hazard.infected * infected
        + hazard.day_slope * f64::from(day - 1)
}

/// Simulate the observed cohort: records carry complete post-onset
/// follow-up, and severity histories cover every in-hospital day.
pub fn simulate_cohort(config: &ScenarioConfig) -> Result<SimulatedCohort> {
    config.validate()?;
    let run = |i: u64| {
        let trajectory = simulate_patient(config, StreamArm::Observed, i);
        let record = PatientRecord {
            patient_id: format!("p{i:06}"),
            infection_day: trajectory.onset,
            terminal: trajectory.terminal,
            at_risk_beyond_horizon: trajectory.terminal.is_none(),
        };
        (record, trajectory.severity)
    };
    #[cfg(feature = "parallel")]
    let patients: Vec<(PatientRecord, Vec<f64>)> = (0..config.n).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let patients: Vec<(PatientRecord, Vec<f64>)> = (0..config.n).map(run).collect();

    let mut records = Vec::with_capacity(patients.len());
    let mut rows = Vec::with_capacity(patients.len());
    for (record, severity) in patients {
        records.push(record);
        rows.push(
            severity
                .into_iter()
                .enumerate()
                .map(|(day, l)| vec![l, day as f64])
                .collect(),
        );
    }
    let covariates = CovariateHistory::new(vec!["severity".to_string(), "day".to_string()], rows)?;
    Ok(SimulatedCohort {
        records,
        covariates,
    })
}

/// Per-day cumulative death counts of one infection-free replicate.
fn infection_free_deaths(config: &ScenarioConfig, replicate: u64) -> Vec<u64> {
    let mut deaths = vec![0u64; config.horizon as usize + 1];
    for i in 0..config.n {
        let unit = replicate * config.n + i;
        let trajectory = simulate_patient(config, StreamArm::InfectionFree, unit);
        if let Some(TerminalEvent {
            day,
            kind: TerminalKind::Death,
        }) = trajectory.terminal
        {
            deaths[day as usize] += 1;
        }
    }
    let mut cum = 0u64;
    for count in &mut deaths {
        cum += *count;
        *count = cum;
    }
    deaths
}

/// Monte-Carlo estimate of the counterfactual death cumulative incidence:
/// the same population process with the infection hazard forced to zero
/// (severity dynamics unchanged; the post-onset shift never fires).
///
/// Replicates are independent cohorts of `config.n` patients; the estimate
/// pools all of them, and its standard error is binomial in the pooled count.
pub fn monte_carlo_truth(config: &ScenarioConfig, replicates: u64) -> Result<GroundTruth> {
    config.validate()?;
    if replicates == 0 {
        return Err(Error::InvalidConfig(
            "at least one replicate is required".into(),
        ));
    }
    let fold = |a: Vec<u64>, b: Vec<u64>| -> Vec<u64> {
        a.into_iter().zip(b).map(|(x, y)| x + y).collect()
    };
    let zero = vec![0u64; config.horizon as usize + 1];
    #[cfg(feature = "parallel")]
    let pooled: Vec<u64> = (0..replicates)
        .into_par_iter()
        .map(|r| infection_free_deaths(config, r))
        .reduce(|| zero.clone(), fold);
    #[cfg(not(feature = "parallel"))]
    let pooled: Vec<u64> = (0..replicates)
        .map(|r| infection_free_deaths(config, r))
        .fold(zero, fold);

    let total = (replicates * config.n) as f64;
    let values: Vec<f64> = pooled.iter().map(|&c| c as f64 / total).collect();
    let se: Vec<f64> = values
        .iter()
        .map(|&p| (p * (1.0 - p) / total).sqrt())
        .collect();
    Ok(GroundTruth {
        horizon: config.horizon,
        replicates,
        patients_per_replicate: config.n,
        values,
        se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::TimeGrid;
    use crate::estimators::factual_cif;
    use crate::lifetable::LifeTable;

    #[test]
    fn presets_validate_and_round_trip() {
        for config in [
            ScenarioConfig::confounded(),
            ScenarioConfig::no_confounding(),
        ] {
            config.validate().unwrap();
            let toml_text = config.to_toml();
            assert_eq!(ScenarioConfig::from_toml(&toml_text).unwrap(), config);
            let json_text = serde_json::to_string(&config).unwrap();
            assert_eq!(ScenarioConfig::from_json(&json_text).unwrap(), config);
        }
    }

    #[test]
    fn shipped_scenario_files_stay_in_sync_with_presets() {
        let confounded = include_str!("../scenarios/confounded.toml");
        let no_confounding = include_str!("../scenarios/no_confounding.toml");
        assert_eq!(confounded, ScenarioConfig::confounded().to_toml());
        assert_eq!(no_confounding, ScenarioConfig::no_confounding().to_toml());
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut config = ScenarioConfig::confounded();
        config.n = 0;
        assert!(config.validate().is_err());
        let mut config = ScenarioConfig::confounded();
        config.baseline.sd = -1.0;
        assert!(config.validate().is_err());
        let mut config = ScenarioConfig::confounded();
        config.death_hazard.severity = f64::NAN;
        assert!(config.validate().is_err());
        let mut config = ScenarioConfig::confounded();
        config.infection_hazard.day_slope = f64::INFINITY;
        assert!(config.validate().is_err());
        assert!(ScenarioConfig::from_toml("n = 1").is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let mut config = ScenarioConfig::confounded();
        config.n = 200;
        let a = simulate_cohort(&config).unwrap();
        let b = simulate_cohort(&config).unwrap();
        assert_eq!(a, b);
        let truth_a = monte_carlo_truth(&config, 3).unwrap();
        let truth_b = monte_carlo_truth(&config, 3).unwrap();
        assert_eq!(truth_a, truth_b);

        let mut reseeded = config.clone();
        reseeded.seed += 1;
        assert_ne!(simulate_cohort(&reseeded).unwrap(), a);
    }

    #[test]
    fn suppressed_infection_hazard_gives_zero_onsets() {
        let mut config = ScenarioConfig::confounded();
        config.n = 500;
        config.infection_hazard.intercept = -50.0;
        config.infection_hazard.severity = 0.0;
        let cohort = simulate_cohort(&config).unwrap();
        assert!(cohort.records.iter().all(|r| r.infection_day.is_none()));
    }

    #[test]
    fn records_and_covariates_are_consistent() {
        let mut config = ScenarioConfig::confounded();
        config.n = 400;
        let cohort = simulate_cohort(&config).unwrap();
        assert_eq!(
            cohort.covariates.names(),
            ["severity".to_string(), "day".to_string()]
        );
        let mut onsets = 0;
        let mut deaths = 0;
        let mut still_in = 0;
        for (i, record) in cohort.records.iter().enumerate() {
            record.validate().unwrap();
            assert!(record.has_post_onset_follow_up());
            let expected_days = match &record.terminal {
                Some(ev) => ev.day.min(config.horizon) as usize + 1,
                None => config.horizon as usize + 1,
            };
            assert_eq!(cohort.covariates.days_recorded(i), expected_days);
            for d in 0..expected_days {
                let row = cohort.covariates.value(i, d as u32).unwrap();
                assert_eq!(row[1], d as f64);
            }
            onsets += usize::from(record.infection_day.is_some());
            deaths += usize::from(
                record
                    .terminal
                    .as_ref()
                    .is_some_and(|ev| ev.kind == TerminalKind::Death),
            );
            still_in += usize::from(record.at_risk_beyond_horizon);
        }
        // The default scenario produces a healthy mix of outcomes.
        assert!(onsets > 20, "onsets {onsets}");
        assert!(deaths > 20, "deaths {deaths}");
        assert!(still_in > 0, "still_in {still_in}");
    }

    #[test]
    fn severity_follows_autoregression_and_post_onset_shift() {
        // With autoregression 0, no noise, and baseline mean 3, severity is
        // 3 on day 0, then 0 until the day after onset, then exactly the
        // shift from there on.
        let config = ScenarioConfig {
            n: 40,
            horizon: 8,
            seed: 11,
            baseline: BaselineSeverity { mean: 3.0, sd: 0.0 },
            confounder: ConfounderDynamics {
                autoregression: 0.0,
                noise_sd: 0.0,
                post_infection_shift: 7.0,
            },
            // Near-certain onset on day 1; nobody ever exits.
            infection_hazard: ExposureHazard {
                intercept: 5.0,
                severity: 0.0,
                day_slope: 0.0,
            },
            death_hazard: TerminalHazard {
                intercept: -50.0,
                severity: 0.0,
                infected: 0.0,
                day_slope: 0.0,
            },
            discharge_hazard: TerminalHazard {
                intercept: -50.0,
                severity: 0.0,
                infected: 0.0,
                day_slope: 0.0,
            },
        };
        let cohort = simulate_cohort(&config).unwrap();
        let infected = cohort
            .records
            .iter()
            .position(|r| r.infection_day == Some(1))
            .expect("day-1 onset is near-certain");
        let rows: Vec<f64> = (0..=config.horizon)
            .map(|d| cohort.covariates.value(infected, d).unwrap()[0])
            .collect();
        assert_eq!(rows[0], 3.0);
        assert_eq!(rows[1], 0.0); // updated before the day-1 onset
        assert!(rows[2..].iter().all(|&l| l == 7.0));
    }

    #[test]
    fn truth_curve_is_monotone_with_positive_se() {
        let mut config = ScenarioConfig::confounded();
        config.n = 2_000;
        let truth = monte_carlo_truth(&config, 5).unwrap();
        assert_eq!(truth.total_patients(), 10_000);
        assert_eq!(truth.values.len(), config.horizon as usize + 1);
        let mut prev = 0.0;
        for (&v, &s) in truth.values.iter().zip(&truth.se) {
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev);
            if v > 0.0 && v < 1.0 {
                assert!(s > 0.0);
            }
            prev = v;
        }
        assert!(truth.values[config.horizon as usize] > 0.05);
    }

    #[test]
    fn harmful_infection_pushes_factual_incidence_above_truth() {
        // The default scenario makes infection raise the death hazard, so
        // the factual death incidence must exceed the infection-free truth
        // by more than Monte-Carlo noise at the horizon.
        let mut config = ScenarioConfig::confounded();
        config.n = 4_000;
        let grid = TimeGrid::new(config.horizon).unwrap();
        let cohort = simulate_cohort(&config).unwrap();
        let table = LifeTable::factual(&cohort.records, &grid).unwrap();
        let factual = factual_cif(&table, TerminalKind::Death).unwrap();
        let truth = monte_carlo_truth(&config, 5).unwrap();
        let j = config.horizon;
        let gap = factual.at(j) - truth.values[j as usize];
        let noise =
            (factual.at(j) * (1.0 - factual.at(j)) / config.n as f64).sqrt() + truth.se[j as usize];
        assert!(gap > 4.0 * noise, "gap {gap}, noise {noise}");
    }
}
