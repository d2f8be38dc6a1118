//! Crate-wide error type.
//!
//! Every failure carries a stable kebab-case code (the first token of the
//! message) so callers and scripts can match on behaviour rather than on
//! wording. Errors are split into two broad classes for process exit codes:
//! input/validation problems and numerical/degeneracy problems.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A patient record violates the data-model invariants.
    #[error("invalid-record: patient {patient_id}: {reason}")]
    InvalidRecord { patient_id: String, reason: String },

    /// A CSV input could not be parsed or violates the interchange contract.
    #[error("invalid-input: {0}")]
    InvalidInput(String),

    /// Two rows share a patient identifier.
    #[error("duplicate-patient: patient {patient_id} appears more than once (line {line})")]
    DuplicatePatient { patient_id: String, line: u64 },

    /// A requested method needs data the input does not carry.
    #[error("method-data-mismatch: method {method} requires {missing}")]
    MethodDataMismatch { method: String, missing: String },

    /// The factual cumulative incidence needs a terminal event (or an
    /// explicit at-risk marker) for every patient.
    #[error(
        "factual-cif-needs-terminal-events: patient {patient_id} has infection onset at day \
         {onset_day} but no recorded terminal event or at-risk marker"
    )]
    FactualCifNeedsTerminalEvents { patient_id: String, onset_day: u32 },

    /// The multi-state occupation oracle needs post-onset follow-up.
    #[error(
        "missing-post-onset-follow-up: patient {patient_id} has infection onset at day \
         {onset_day} but no recorded post-onset terminal event or at-risk marker"
    )]
    MissingPostOnsetFollowUp { patient_id: String, onset_day: u32 },

    /// A reweighting scheme's weight is undefined (division by zero mass).
    #[error("degenerate-weight: {reason}{}", fmt_day(.day))]
    DegenerateWeight { day: Option<u32>, reason: String },

    /// Terminal events occur on a day whose risk set is empty.
    #[error("empty-risk-set: day {day} has terminal events but an empty risk set")]
    EmptyRiskSet { day: u32 },

    /// The weighted risk set vanished while weighted events remain.
    #[error("empty-weighted-risk-set: day {day} has weighted terminal events but zero weighted risk set")]
    EmptyWeightedRiskSet { day: u32 },

    /// Monotone likelihood: a hazard-model coefficient diverged.
    #[error(
        "separation-detected: coefficient {coefficient} diverged (|{value:.3}| > {limit}) with \
         non-vanishing gradient; the infection indicator is perfectly separable"
    )]
    SeparationDetected {
        coefficient: String,
        value: f64,
        limit: f64,
    },

    /// The observed information matrix is singular or not positive definite.
    #[error("singular-information: {0}")]
    SingularInformation(String),

    /// The hazard model was asked to fit data containing no onset events.
    #[error("no-events: the person-day data contain no infection onsets")]
    NoEvents,

    /// Newton–Raphson failed to converge within the iteration budget.
    #[error(
        "no-convergence: hazard model did not converge after {iterations} iterations \
         (max |gradient| {max_gradient:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        max_gradient: f64,
    },

    /// A nonparametric hazard cell is exhausted but still needed.
    #[error(
        "degenerate-cell: stratum {stratum} at day {day} has onset hazard 1 but later \
         at-risk members whose weights would be infinite"
    )]
    DegenerateCell { day: u32, stratum: String },

    /// Covariate history is missing a required (patient, day) row.
    #[error("missing-covariate-row: patient {patient_id} lacks a covariate row for day {day}")]
    MissingCovariateRow { patient_id: String, day: u32 },

    /// Too many bootstrap replicates failed to produce an estimate.
    #[error(
        "bootstrap-failures: {failed} of {total} bootstrap replicates failed \
         (more than {percent}% allowed); first failure: {first}"
    )]
    BootstrapFailures {
        failed: usize,
        total: usize,
        percent: u32,
        first: String,
    },

    /// An identity-check suite found a violated identity.
    #[error("identity-check-failed: {failed} of {total} identities violated their tolerance")]
    IdentityCheckFailed { failed: usize, total: usize },

    /// Underlying I/O failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// CSV-level failure (quoting, column counts, ...).
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    /// Configuration file failure.
    #[error("invalid-config: {0}")]
    InvalidConfig(String),
}

fn fmt_day(day: &Option<u32>) -> String {
    match day {
        Some(d) => format!(" (day {d})"),
        None => String::new(),
    }
}

impl Error {
    /// Process exit code class: 1 = input/validation, 2 = numerical/degeneracy,
    /// 3 = identity-check failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidRecord { .. }
            | Error::InvalidInput(_)
            | Error::DuplicatePatient { .. }
            | Error::MethodDataMismatch { .. }
            | Error::FactualCifNeedsTerminalEvents { .. }
            | Error::MissingPostOnsetFollowUp { .. }
            | Error::MissingCovariateRow { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::InvalidConfig(_) => 1,
            Error::DegenerateWeight { .. }
            | Error::EmptyRiskSet { .. }
            | Error::EmptyWeightedRiskSet { .. }
            | Error::SeparationDetected { .. }
            | Error::SingularInformation(_)
            | Error::NoEvents
            | Error::NoConvergence { .. }
            | Error::DegenerateCell { .. }
            | Error::BootstrapFailures { .. } => 2,
            Error::IdentityCheckFailed { .. } => 3,
        }
    }

    /// Stable machine-readable code (first token of the display message).
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidRecord { .. } => "invalid-record",
            Error::InvalidInput(_) => "invalid-input",
            Error::DuplicatePatient { .. } => "duplicate-patient",
            Error::MethodDataMismatch { .. } => "method-data-mismatch",
            Error::FactualCifNeedsTerminalEvents { .. } => "factual-cif-needs-terminal-events",
            Error::MissingPostOnsetFollowUp { .. } => "missing-post-onset-follow-up",
            Error::DegenerateWeight { .. } => "degenerate-weight",
            Error::EmptyRiskSet { .. } => "empty-risk-set",
            Error::EmptyWeightedRiskSet { .. } => "empty-weighted-risk-set",
            Error::SeparationDetected { .. } => "separation-detected",
            Error::SingularInformation(_) => "singular-information",
            Error::NoEvents => "no-events",
            Error::NoConvergence { .. } => "no-convergence",
            Error::DegenerateCell { .. } => "degenerate-cell",
            Error::MissingCovariateRow { .. } => "missing-covariate-row",
            Error::BootstrapFailures { .. } => "bootstrap-failures",
            Error::IdentityCheckFailed { .. } => "identity-check-failed",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::InvalidConfig(_) => "invalid-config",
        }
    }
}
