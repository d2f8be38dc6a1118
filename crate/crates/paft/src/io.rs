//! CSV interchange for cohorts, covariate histories, and result curves.
//!
//! Patient files are long one-row-per-patient tables; covariate files are
//! long one-row-per-patient-day tables. Columns are matched by header name,
//! unknown columns are rejected, and empty cells mean "absent". All
//! floating-point output uses 17 significant digits so that written values
//! round-trip to the exact same `f64`; undefined values render as `NA`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::cohort::{PatientRecord, TerminalEvent, TerminalKind};
use crate::error::{Error, Result};
use crate::estimators::EstimateCurve;
use crate::ipcw::CovariateHistory;
use crate::simulate::GroundTruth;

/// Render a float with 17 significant digits (`NA` for NaN), enough for the
/// bit pattern to survive a write/parse round trip.
pub fn fmt_f64(value: f64) -> String {
    if value.is_nan() {
        return "NA".into();
    }
    format!("{value:.16e}")
}

const PATIENT_COLUMNS: [&str; 5] = [
    "patient_id",
    "infection_day",
    "terminal_day",
    "terminal_type",
    "at_risk_beyond_horizon",
];

struct PatientHeader {
    patient_id: usize,
    infection_day: Option<usize>,
    terminal_day: usize,
    terminal_type: usize,
    at_risk: Option<usize>,
}

fn patient_header(headers: &csv::StringRecord) -> Result<PatientHeader> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        if !PATIENT_COLUMNS.contains(&name) {
            return Err(Error::InvalidInput(format!(
                "unknown patients.csv column `{name}`"
            )));
        }
        if index.insert(name, i).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate patients.csv column `{name}`"
            )));
        }
    }
    let require = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("patients.csv misses column `{name}`")))
    };
    Ok(PatientHeader {
        patient_id: require("patient_id")?,
        infection_day: index.get("infection_day").copied(),
        terminal_day: require("terminal_day")?,
        terminal_type: require("terminal_type")?,
        at_risk: index.get("at_risk_beyond_horizon").copied(),
    })
}

fn cell<'a>(row: &'a csv::StringRecord, idx: usize) -> &'a str {
    row.get(idx).unwrap_or("").trim()
}

fn parse_day(text: &str, patient_id: &str, column: &str) -> Result<u32> {
    text.parse().map_err(|_| Error::InvalidRecord {
        patient_id: patient_id.into(),
        reason: format!("{column} `{text}` is not a non-negative integer day"),
    })
}

/// A parsed patient table, remembering which optional columns the file had
/// (method entry points validate their input requirements against this).
#[derive(Debug, Clone, PartialEq)]
pub struct PatientTable {
    pub records: Vec<PatientRecord>,
    /// Whether the file carried infection onset timing at all.
    pub has_infection_day: bool,
}

/// Read a patient table.
///
/// Required columns: `patient_id`, `terminal_day`, `terminal_type`; optional:
/// `infection_day` and `at_risk_beyond_horizon` (`true`/`false`/`1`/`0`).
/// When the at-risk column is absent or a cell is empty, the marker is
/// inferred: a patient with neither terminal event nor infection is taken to
/// be still in hospital beyond the last recorded day.
pub fn read_patients_csv<R: Read>(reader: R) -> Result<PatientTable> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = patient_header(csv.headers()?)?;
    let mut records = Vec::new();
    let mut seen: HashMap<String, ()> = HashMap::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let patient_id = cell(&row, header.patient_id).to_string();
        if patient_id.is_empty() {
            return Err(Error::InvalidInput(format!(
                "empty patient_id on line {line}"
            )));
        }
        if seen.insert(patient_id.clone(), ()).is_some() {
            return Err(Error::DuplicatePatient { patient_id, line });
        }

        let infection_text = header.infection_day.map_or("", |i| cell(&row, i));
        let infection_day = if infection_text.is_empty() {
            None
        } else {
            Some(parse_day(infection_text, &patient_id, "infection_day")?)
        };

        let day_text = cell(&row, header.terminal_day);
        let type_text = cell(&row, header.terminal_type);
        let terminal = match (day_text.is_empty(), type_text.is_empty()) {
            (true, true) => None,
            (false, false) => {
                let day = parse_day(day_text, &patient_id, "terminal_day")?;
                let kind = match type_text {
                    "death" => TerminalKind::Death,
                    "discharge" => TerminalKind::Discharge,
                    other => {
                        return Err(Error::InvalidRecord {
                            patient_id,
                            reason: format!(
                                "terminal_type `{other}` is neither `death` nor `discharge`"
                            ),
                        })
                    }
                };
                Some(TerminalEvent { day, kind })
            }
            _ => {
                return Err(Error::InvalidRecord {
                    patient_id,
                    reason: "terminal_day and terminal_type must be both present or both empty"
                        .into(),
                })
            }
        };

        let at_risk_text = header.at_risk.map_or("", |i| cell(&row, i));
        let at_risk_beyond_horizon = match at_risk_text {
            "" => terminal.is_none() && infection_day.is_none(),
            "true" | "1" => true,
            "false" | "0" => false,
            other => {
                return Err(Error::InvalidRecord {
                    patient_id,
                    reason: format!("at_risk_beyond_horizon `{other}` is not a boolean"),
                })
            }
        };

        let record = PatientRecord {
            patient_id,
            infection_day,
            terminal,
            at_risk_beyond_horizon,
        };
        record.validate()?;
        records.push(record);
    }
    Ok(PatientTable {
        records,
        has_infection_day: header.infection_day.is_some(),
    })
}

/// Write a patient table with all five columns.
pub fn write_patients_csv<W: Write>(records: &[PatientRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PATIENT_COLUMNS)?;
    for r in records {
        w.write_record([
            r.patient_id.clone(),
            r.infection_day.map_or(String::new(), |d| d.to_string()),
            r.terminal.map_or(String::new(), |t| t.day.to_string()),
            r.terminal.map_or("", |t| t.kind.as_str()).to_string(),
            String::from(if r.at_risk_beyond_horizon {
                "true"
            } else {
                "false"
            }),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a long-format covariate table (`patient_id,day,<covariate...>`).
///
/// Every row must name a patient from `records`; per-patient days must be
/// contiguous from 0. Patients without any rows get an empty history (which
/// the model-based estimator will reject if it needs their values).
pub fn read_covariates_csv<R: Read>(
    reader: R,
    records: &[PatientRecord],
) -> Result<CovariateHistory> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let mut fields = headers.iter();
    if fields.next() != Some("patient_id") || fields.next() != Some("day") {
        return Err(Error::InvalidInput(
            "covariates.csv must start with columns `patient_id,day`".into(),
        ));
    }
    let names: Vec<String> = fields.map(str::to_string).collect();
    if let Some(dup) = names
        .iter()
        .enumerate()
        .find(|(i, n)| names[..*i].contains(n))
    {
        return Err(Error::InvalidInput(format!(
            "duplicate covariate column `{}`",
            dup.1
        )));
    }

    let index: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.patient_id.as_str(), i))
        .collect();
    let mut sparse: Vec<HashMap<u32, Vec<f64>>> = vec![HashMap::new(); records.len()];
    for row in csv.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let id = cell(&row, 0);
        let Some(&patient) = index.get(id) else {
            return Err(Error::InvalidInput(format!(
                "covariates.csv line {line} names unknown patient `{id}`"
            )));
        };
        let day = parse_day(cell(&row, 1), id, "day")?;
        let mut values = Vec::with_capacity(names.len());
        for (k, name) in names.iter().enumerate() {
            let text = cell(&row, k + 2);
            let value: f64 = text.parse().map_err(|_| Error::InvalidRecord {
                patient_id: id.into(),
                reason: format!("covariate {name} at day {day}: `{text}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::InvalidRecord {
                    patient_id: id.into(),
                    reason: format!("covariate {name} at day {day} is not finite"),
                });
            }
            values.push(value);
        }
        if sparse[patient].insert(day, values).is_some() {
            return Err(Error::InvalidRecord {
                patient_id: id.into(),
                reason: format!("duplicate covariate row for day {day}"),
            });
        }
    }

    let mut rows = Vec::with_capacity(records.len());
    for (patient, mut days) in sparse.into_iter().enumerate() {
        let mut history = Vec::with_capacity(days.len());
        for day in 0..days.len() as u32 {
            match days.remove(&day) {
                Some(values) => history.push(values),
                None => {
                    return Err(Error::MissingCovariateRow {
                        patient_id: records[patient].patient_id.clone(),
                        day,
                    })
                }
            }
        }
        rows.push(history);
    }
    CovariateHistory::new(names, rows)
}

/// Write a covariate history in long format, rows ordered by patient then day.
pub fn write_covariates_csv<W: Write>(
    history: &CovariateHistory,
    patient_ids: &[String],
    out: W,
) -> Result<()> {
    if patient_ids.len() != history.n_patients() {
        return Err(Error::InvalidInput(
            "covariate history and patient id list have different lengths".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["patient_id".to_string(), "day".to_string()];
    header.extend(history.names().iter().cloned());
    w.write_record(&header)?;
    for (i, id) in patient_ids.iter().enumerate() {
        for day in 0..history.days_recorded(i) as u32 {
            let values = history.value(i, day).expect("recorded day");
            let mut record = vec![id.clone(), day.to_string()];
            record.extend(values.iter().map(|v| fmt_f64(*v)));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write the result curves: `day,cif_factual,ccif,paf[,ci_lower,ci_upper]`.
///
/// The factual column (and the PAF, which needs it) may be absent — follow-up
/// was incomplete — leaving `day,ccif[,ci_lower,ci_upper]`. Interval columns
/// appear when the counterfactual curve carries bootstrap bands.
pub fn write_curves_csv<W: Write>(
    out: W,
    factual: Option<&EstimateCurve>,
    ccif: &EstimateCurve,
    paf: Option<&EstimateCurve>,
) -> Result<()> {
    if paf.is_some() && factual.is_none() {
        return Err(Error::InvalidInput(
            "a PAF curve cannot be written without the factual curve it compares against".into(),
        ));
    }
    let days = ccif.values.len();
    for other in [factual, paf].into_iter().flatten() {
        if other.values.len() != days {
            return Err(Error::InvalidInput(
                "curves cover different horizons".into(),
            ));
        }
    }
    let bands = match (&ccif.ci_lower, &ccif.ci_upper) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        _ => None,
    };

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["day"];
    if factual.is_some() {
        header.push("cif_factual");
    }
    header.push("ccif");
    if paf.is_some() {
        header.push("paf");
    }
    if bands.is_some() {
        header.push("ci_lower");
        header.push("ci_upper");
    }
    w.write_record(&header)?;

    for t in 0..days {
        let mut record = vec![t.to_string()];
        if let Some(f) = factual {
            record.push(fmt_f64(f.values[t]));
        }
        record.push(fmt_f64(ccif.values[t]));
        if let Some(p) = paf {
            record.push(fmt_f64(p.values[t]));
        }
        if let Some((lo, hi)) = bands {
            record.push(fmt_f64(lo[t]));
            record.push(fmt_f64(hi[t]));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a Monte-Carlo ground-truth curve: `day,truth,se`.
pub fn write_truth_csv<W: Write>(truth: &GroundTruth, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "truth", "se"])?;
    for t in 0..truth.values.len() {
        w.write_record([
            t.to_string(),
            fmt_f64(truth.values[t]),
            fmt_f64(truth.se[t]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

/// Read a patient table from a file path.
pub fn read_patients_file(path: &Path) -> Result<PatientTable> {
    read_patients_csv(open(path)?)
}

/// Read a covariate table from a file path.
pub fn read_covariates_file(path: &Path, records: &[PatientRecord]) -> Result<CovariateHistory> {
    read_covariates_csv(open(path)?, records)
}

/// Create a file for writing, with the path in any error.
pub fn create_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::CurveKind;
    use crate::testutil::*;

    const TOY_CSV: &str = "\
patient_id,infection_day,terminal_day,terminal_type
A,,1,death
B,,6,death
C,2,,
D,,3,death
E,4,,
F,,,
";

    #[test]
    fn float_formatting_round_trips_and_marks_nan() {
        assert_eq!(fmt_f64(f64::NAN), "NA");
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        for v in [
            0.1,
            1.0 / 3.0,
            2.0_f64.powi(-40) * 1.37,
            123456789.123456789,
            1e-300,
        ] {
            let text = fmt_f64(v);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{text}");
        }
    }

    #[test]
    fn toy_cohort_parses_from_minimal_schema() {
        let table = read_patients_csv(TOY_CSV.as_bytes()).unwrap();
        assert_eq!(table.records, toy_records());
        assert!(table.has_infection_day);
        // F has no event and no explicit marker: inferred still-in-hospital.
        assert!(table.records[5].at_risk_beyond_horizon);
        // C is infected without recorded follow-up: not marked at risk.
        assert!(!table.records[2].at_risk_beyond_horizon);
    }

    #[test]
    fn infection_day_column_is_optional_and_its_absence_is_reported() {
        let text = "\
patient_id,terminal_day,terminal_type
A,1,death
B,,
";
        let table = read_patients_csv(text.as_bytes()).unwrap();
        assert!(!table.has_infection_day);
        assert_eq!(table.records[0].infection_day, None);
        assert!(table.records[1].at_risk_beyond_horizon);
    }

    #[test]
    fn write_read_round_trip_preserves_records() {
        let mut buffer = Vec::new();
        write_patients_csv(&toy_records(), &mut buffer).unwrap();
        let back = read_patients_csv(buffer.as_slice()).unwrap();
        assert_eq!(back.records, toy_records());
    }

    #[test]
    fn explicit_at_risk_column_is_honored() {
        let text = "\
patient_id,infection_day,terminal_day,terminal_type,at_risk_beyond_horizon
G,3,,,true
H,,,,1
";
        let records = read_patients_csv(text.as_bytes()).unwrap().records;
        assert!(records[0].at_risk_beyond_horizon);
        assert!(records[1].at_risk_beyond_horizon);
        let bad = "\
patient_id,infection_day,terminal_day,terminal_type,at_risk_beyond_horizon
G,3,,,maybe
";
        assert!(read_patients_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn duplicate_patients_are_rejected_with_line_number() {
        let text = "\
patient_id,infection_day,terminal_day,terminal_type
A,,1,death
A,,2,death
";
        match read_patients_csv(text.as_bytes()).unwrap_err() {
            Error::DuplicatePatient { patient_id, line } => {
                assert_eq!(patient_id, "A");
                assert_eq!(line, 3);
            }
            other => panic!("expected duplicate-patient, got {other}"),
        }
    }

    #[test]
    fn malformed_tables_are_rejected() {
        // Unknown column.
        let text = "patient_id,age,terminal_day,terminal_type\nA,5,1,death\n";
        assert!(matches!(
            read_patients_csv(text.as_bytes()).unwrap_err(),
            Error::InvalidInput(_)
        ));
        // Missing required column.
        let text = "patient_id,infection_day,terminal_day\nA,,1\n";
        assert!(read_patients_csv(text.as_bytes()).is_err());
        // Terminal day without type.
        let text = "patient_id,infection_day,terminal_day,terminal_type\nA,,1,\n";
        assert!(matches!(
            read_patients_csv(text.as_bytes()).unwrap_err(),
            Error::InvalidRecord { .. }
        ));
        // Unknown terminal type.
        let text = "patient_id,infection_day,terminal_day,terminal_type\nA,,1,transfer\n";
        assert!(read_patients_csv(text.as_bytes()).is_err());
        // Garbage day.
        let text = "patient_id,infection_day,terminal_day,terminal_type\nA,x,1,death\n";
        assert!(read_patients_csv(text.as_bytes()).is_err());
        // A header-only table is valid and empty (callers needing patients
        // reject it themselves).
        let text = "patient_id,infection_day,terminal_day,terminal_type\n";
        assert!(read_patients_csv(text.as_bytes())
            .unwrap()
            .records
            .is_empty());
        // Contradictory record (terminal event plus at-risk marker).
        let text = "\
patient_id,infection_day,terminal_day,terminal_type,at_risk_beyond_horizon
A,,1,death,true
";
        assert!(matches!(
            read_patients_csv(text.as_bytes()).unwrap_err(),
            Error::InvalidRecord { .. }
        ));
    }

    #[test]
    fn covariates_round_trip_in_long_format() {
        let records = toy_records();
        let text = "\
patient_id,day,sev,age
A,0,1.5,70
A,1,-0.25,70
B,0,0.125,41
";
        let history = read_covariates_csv(text.as_bytes(), &records).unwrap();
        assert_eq!(history.names(), ["sev", "age"]);
        assert_eq!(history.days_recorded(0), 2);
        assert_eq!(history.value(0, 1).unwrap(), [-0.25, 70.0]);
        assert_eq!(history.days_recorded(2), 0);

        let ids: Vec<String> = records.iter().map(|r| r.patient_id.clone()).collect();
        let mut buffer = Vec::new();
        write_covariates_csv(&history, &ids, &mut buffer).unwrap();
        let back = read_covariates_csv(buffer.as_slice(), &records).unwrap();
        assert_eq!(back.names(), history.names());
        for i in 0..records.len() {
            assert_eq!(back.days_recorded(i), history.days_recorded(i));
            for day in 0..history.days_recorded(i) as u32 {
                assert_eq!(back.value(i, day), history.value(i, day));
            }
        }
    }

    #[test]
    fn covariate_tables_are_validated() {
        let records = toy_records();
        // Unknown patient.
        let text = "patient_id,day,sev\nZ,0,1.0\n";
        assert!(read_covariates_csv(text.as_bytes(), &records).is_err());
        // Duplicate day.
        let text = "patient_id,day,sev\nA,0,1.0\nA,0,2.0\n";
        assert!(read_covariates_csv(text.as_bytes(), &records).is_err());
        // Gap in days.
        let text = "patient_id,day,sev\nA,0,1.0\nA,2,2.0\n";
        assert!(matches!(
            read_covariates_csv(text.as_bytes(), &records).unwrap_err(),
            Error::MissingCovariateRow { day: 1, .. }
        ));
        // Days not starting at 0.
        let text = "patient_id,day,sev\nA,1,1.0\n";
        assert!(read_covariates_csv(text.as_bytes(), &records).is_err());
        // Non-finite value.
        let text = "patient_id,day,sev\nA,0,inf\n";
        assert!(read_covariates_csv(text.as_bytes(), &records).is_err());
        // Wrong leading columns.
        let text = "id,day,sev\nA,0,1.0\n";
        assert!(read_covariates_csv(text.as_bytes(), &records).is_err());
        // Duplicate covariate name.
        let text = "patient_id,day,sev,sev\nA,0,1.0,2.0\n";
        assert!(read_covariates_csv(text.as_bytes(), &records).is_err());
    }

    #[test]
    fn curve_table_layout_tracks_available_columns() {
        let factual = EstimateCurve::new(CurveKind::FactualCif, 2, vec![0.0, 0.25, 0.5]);
        let mut ccif = EstimateCurve::new(CurveKind::CcifCensoring, 2, vec![0.0, 0.25, 0.25]);
        let paf = EstimateCurve::new(CurveKind::Paf, 2, vec![f64::NAN, 0.0, 0.5]);

        let mut buffer = Vec::new();
        write_curves_csv(&mut buffer, Some(&factual), &ccif, Some(&paf)).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.starts_with("day,cif_factual,ccif,paf\n"));
        assert!(text.contains("\n0,0.0000000000000000e0,0.0000000000000000e0,NA\n"));

        ccif.ci_lower = Some(vec![0.0, 0.0, 0.0]);
        ccif.ci_upper = Some(vec![0.0, 0.5, 0.5]);
        let mut buffer = Vec::new();
        write_curves_csv(&mut buffer, None, &ccif, None).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.starts_with("day,ccif,ci_lower,ci_upper\n"));
        assert_eq!(text.lines().count(), 4);

        // PAF without factual is a caller bug.
        let mut buffer = Vec::new();
        assert!(write_curves_csv(&mut buffer, None, &ccif, Some(&paf)).is_err());
    }

    #[test]
    fn truth_table_has_day_truth_se_columns() {
        let truth = GroundTruth {
            horizon: 1,
            replicates: 2,
            patients_per_replicate: 2,
            values: vec![0.0, 0.25],
            se: vec![0.0, 0.125],
        };
        let mut buffer = Vec::new();
        write_truth_csv(&truth, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(
            text,
            "day,truth,se\n0,0.0000000000000000e0,0.0000000000000000e0\n\
             1,2.5000000000000000e-1,1.2500000000000000e-1\n"
        );
    }
}
