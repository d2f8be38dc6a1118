//! Discrete-time competing-risks estimation of the population-attributable
//! fraction (PAF) of a terminal event due to a time-dependent exposure.
//!
//! The motivating application is hospital-acquired infection (HAI): patients
//! are observed on a daily grid until death in hospital, discharge, or HAI
//! onset, whichever comes first. Acquiring the infection is treated as a
//! censoring event for the counterfactual ("infection-free") cumulative
//! incidence of death, and the PAF at day `t` compares the factual cumulative
//! incidence of death with that counterfactual.
//!
//! The crate provides:
//!
//! - [`cohort`]: patient-level data model, the derived three-state view
//!   (death / discharge / exposure onset), and daily life tables;
//! - [`estimators`]: the factual Aalen–Johansen cumulative incidence and three
//!   counterfactual estimators (censoring, exclusion, landmark competing-risks
//!   reweighting), plus the PAF curve;
//! - [`ledger`]: per-patient per-day weight ledgers that make every estimator's
//!   implicit weight transfers explicit and auditable;
//! - [`ipcw`]: covariate-conditional inverse-probability-of-censoring weights
//!   from a pooled discrete-time logistic hazard model, and the weighted
//!   Aalen–Johansen estimator;
//! - [`equivalence`]: independent multi-state occupation oracles and algebraic
//!   identity checks tying the estimators together;
//! - [`simulate`]: a confounded-cohort simulator with Monte-Carlo
//!   counterfactual ground truth;
//! - [`bootstrap`]: patient-level resampling percentile confidence intervals;
//! - [`io`] / [`manifest`]: CSV interchange and reproducible run manifests.
//!
//! Estimator cores are generic over [`field::Field`], so every curve can be
//! evaluated both in `f64` and in exact rational arithmetic.

pub mod bootstrap;
pub mod cohort;
pub mod equivalence;
pub mod error;
pub mod estimators;
pub mod field;
pub mod io;
pub mod ipcw;
pub mod ledger;
pub mod lifetable;
pub mod manifest;
pub mod rng;
pub mod simulate;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
