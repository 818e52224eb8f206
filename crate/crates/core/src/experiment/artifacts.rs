//! CSV and key=value files passed from aggregation to reporting.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::report::Provenance;
use super::ExperimentError;
use crate::label_models::{fit_dawid_skene, fit_generative_model, flyingsquid_params, Estimator, PosteriorLabels};
use crate::prompting::Temperature;
use crate::votes::io::DataError;
use crate::votes::{EvaluationResult, VoteMatrix};

fn csv_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Data(DataError::Csv(e))
}

/// `item_id,p_positive,hard_label`.
pub fn write_posteriors_csv<W: Write>(
    writer: W,
    matrix: &VoteMatrix,
    posteriors: &PosteriorLabels,
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["item_id", "p_positive", "hard_label"]).map_err(csv_err)?;
    for ((id, p), hard) in matrix.item_ids().iter().zip(posteriors.probs()).zip(posteriors.harden()) {
        w.write_record([id.clone(), format!("{p:.6}"), hard.value().to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Fits `estimator` once and returns its posteriors with its parameters as
/// `(source_id, param, value)` rows. Whole-model parameters use source id `*`.
pub fn fit_with_params(
    estimator: &Estimator,
    matrix: &VoteMatrix,
) -> Result<(PosteriorLabels, Vec<(String, String, f64)>), ExperimentError> {
    use crate::label_models::LabelModel;

    let ids = matrix.source_ids();
    let per_source = |name: &str, values: &[f64]| -> Vec<(String, String, f64)> {
        ids.iter().zip(values).map(|(id, v)| (id.clone(), name.to_string(), *v)).collect()
    };
    let whole = |name: &str, v: f64| ("*".to_string(), name.to_string(), v);
    Ok(match estimator {
        Estimator::Majority => (estimator.predict(matrix)?, Vec::new()),
        Estimator::DawidSkene(cfg) => {
            let fit = fit_dawid_skene(matrix, cfg)?;
            let mut rows = per_source("sensitivity", &fit.params.sensitivity);
            rows.extend(per_source("specificity", &fit.params.specificity));
            rows.push(whole("prior", fit.params.prior));
            (fit.posteriors, rows)
        }
        Estimator::FlyingSquid { min_moment } => {
            let params = flyingsquid_params(matrix, *min_moment)?;
            let mut rows = per_source("correlation", params.correlations());
            rows.extend(per_source("accuracy", &params.accuracies()));
            rows.push(whole("class_balance", params.class_balance()));
            (estimator.predict(matrix)?, rows)
        }
        Estimator::Generative(cfg) => {
            let fit = fit_generative_model(matrix, cfg)?;
            let mut rows = per_source("theta", &fit.thetas);
            rows.extend(per_source("accuracy", &fit.params.accuracies()));
            rows.push(whole("class_balance", fit.params.class_balance()));
            (fit.posteriors, rows)
        }
    })
}

/// `source_id,param,value`.
pub fn write_params_csv<W: Write>(writer: W, rows: &[(String, String, f64)]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source_id", "param", "value"]).map_err(csv_err)?;
    for (source, param, value) in rows {
        w.write_record([source.clone(), param.clone(), format!("{value:.6}")]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Accuracy of one run (one source of a temperature's matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAccuracy {
    pub temperature: Temperature,
    pub run_index: u32,
    pub correct: usize,
    pub total: usize,
}

impl RunAccuracy {
    pub fn result(&self) -> EvaluationResult {
        EvaluationResult::new(self.correct, self.total)
    }
}

#[derive(Serialize, Deserialize)]
struct RunAccuracyRow {
    temperature: String,
    run_index: u32,
    correct: usize,
    total: usize,
    accuracy_percent: String,
}

/// `temperature,run_index,correct,total,accuracy_percent`.
pub fn write_run_accuracy_csv<W: Write>(writer: W, rows: &[RunAccuracy]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(RunAccuracyRow {
            temperature: r.temperature.to_string(),
            run_index: r.run_index,
            correct: r.correct,
            total: r.total,
            accuracy_percent: r.result().percent().to_string(),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn check_counts(correct: usize, total: usize, line: usize) -> Result<(), ExperimentError> {
    if correct > total {
        return Err(ExperimentError::Invalid(format!("line {line}: correct {correct} exceeds total {total}")));
    }
    Ok(())
}

fn parse_temperature(s: &str) -> Result<Temperature, ExperimentError> {
    Ok(s.parse::<Temperature>()?)
}

pub fn read_run_accuracy_csv<R: Read>(reader: R) -> Result<Vec<RunAccuracy>, ExperimentError> {
    let mut out = Vec::new();
    for (i, row) in csv::Reader::from_reader(reader).deserialize::<RunAccuracyRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        check_counts(row.correct, row.total, i + 2)?;
        out.push(RunAccuracy {
            temperature: parse_temperature(&row.temperature)?,
            run_index: row.run_index,
            correct: row.correct,
            total: row.total,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct GridRow {
    model: String,
    temperature: String,
    correct: usize,
    total: usize,
    accuracy_percent: String,
}

/// `model,temperature,correct,total,accuracy_percent`, one row per cell.
pub fn write_grid_csv<W: Write>(writer: W, grid: &super::GridResult) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    for (model, row) in grid.models.iter().zip(&grid.cells) {
        for (t, cell) in grid.temperatures.iter().zip(row) {
            w.serialize(GridRow {
                model: model.clone(),
                temperature: t.to_string(),
                correct: cell.correct,
                total: cell.total,
                accuracy_percent: cell.percent().to_string(),
            })
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_grid_csv`]. Every model must have a cell for every
/// temperature.
pub fn read_grid_csv<R: Read>(reader: R) -> Result<super::GridResult, ExperimentError> {
    let mut models: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, Temperature), EvaluationResult> = BTreeMap::new();
    for (i, row) in csv::Reader::from_reader(reader).deserialize::<GridRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        check_counts(row.correct, row.total, i + 2)?;
        let m = match models.iter().position(|x| *x == row.model) {
            Some(m) => m,
            None => {
                models.push(row.model.clone());
                models.len() - 1
            }
        };
        let t = parse_temperature(&row.temperature)?;
        if cells.insert((m, t), EvaluationResult::new(row.correct, row.total)).is_some() {
            return Err(ExperimentError::Invalid(format!("duplicate grid cell {} at {t}", row.model)));
        }
    }
    let mut temperatures: Vec<Temperature> = cells.keys().map(|(_, t)| *t).collect();
    temperatures.sort();
    temperatures.dedup();
    let mut grid = Vec::with_capacity(models.len());
    for (m, name) in models.iter().enumerate() {
        let row = temperatures
            .iter()
            .map(|t| {
                cells.get(&(m, *t)).copied().ok_or_else(|| ExperimentError::Invalid(format!("grid has no cell {name} at {t}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        grid.push(row);
    }
    Ok(super::GridResult::from_cells(models, temperatures, grid))
}

/// Accuracy of one source subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetAccuracy {
    pub k: usize,
    pub sources: Vec<String>,
    pub correct: usize,
    pub total: usize,
}

#[derive(Serialize, Deserialize)]
struct SubsetRow {
    k: usize,
    sources: String,
    correct: usize,
    total: usize,
    accuracy_percent: String,
}

/// `k,sources,correct,total,accuracy_percent` with sources joined by `;`.
pub fn write_combinations_csv<W: Write>(writer: W, rows: &[SubsetAccuracy]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(SubsetRow {
            k: r.k,
            sources: r.sources.join(";"),
            correct: r.correct,
            total: r.total,
            accuracy_percent: EvaluationResult::new(r.correct, r.total).percent().to_string(),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_combinations_csv<R: Read>(reader: R) -> Result<Vec<SubsetAccuracy>, ExperimentError> {
    let mut out = Vec::new();
    for (i, row) in csv::Reader::from_reader(reader).deserialize::<SubsetRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        check_counts(row.correct, row.total, i + 2)?;
        let sources: Vec<String> = row.sources.split(';').map(str::to_string).collect();
        if sources.len() != row.k {
            return Err(ExperimentError::Invalid(format!("line {}: k = {} but {} sources", i + 2, row.k, sources.len())));
        }
        out.push(SubsetAccuracy { k: row.k, sources, correct: row.correct, total: row.total });
    }
    Ok(out)
}

/// One `key=value` per line, in insertion order.
pub fn write_meta<W: Write>(mut writer: W, meta: &Provenance) -> Result<(), ExperimentError> {
    for (k, v) in &meta.entries {
        writeln!(writer, "{k}={v}")?;
    }
    Ok(())
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_meta<R: BufRead>(reader: R) -> Result<Provenance, ExperimentError> {
    let mut meta = Provenance::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ExperimentError::Invalid(format!("line {}: expected key=value", i + 1)))?;
        meta.push(k.trim(), v.trim());
    }
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::GridResult;

    #[test]
    fn grid_round_trip() {
        let t = Temperature::decile_grid();
        let cells = vec![
            t.iter().enumerate().map(|(i, _)| EvaluationResult::new(70 + i, 109)).collect(),
            t.iter().enumerate().map(|(i, _)| EvaluationResult::new(80 - i, 109)).collect(),
        ];
        let grid = GridResult::from_cells(vec!["majority".into(), "generative".into()], t, cells);
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &grid).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("model,temperature,correct,total,accuracy_percent\nmajority,0.1,70,109,64.22\n"));
        assert_eq!(read_grid_csv(&buf[..]).unwrap(), grid);
    }

    #[test]
    fn incomplete_grid_rejected() {
        let text = "model,temperature,correct,total,accuracy_percent\na,0.1,1,2,50.00\nb,0.2,1,2,50.00\n";
        assert!(matches!(read_grid_csv(text.as_bytes()), Err(ExperimentError::Invalid(_))));
    }

    #[test]
    fn run_accuracy_and_combinations_round_trip() {
        let t = Temperature::new(0.5).unwrap();
        let runs = vec![RunAccuracy { temperature: t, run_index: 3, correct: 77, total: 109 }];
        let mut buf = Vec::new();
        write_run_accuracy_csv(&mut buf, &runs).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "temperature,run_index,correct,total,accuracy_percent\n0.5,3,77,109,70.64\n");
        assert_eq!(read_run_accuracy_csv(&buf[..]).unwrap(), runs);

        let subs = vec![SubsetAccuracy { k: 2, sources: vec!["t0.5-r0".into(), "t0.5-r3".into()], correct: 83, total: 109 }];
        let mut buf = Vec::new();
        write_combinations_csv(&mut buf, &subs).unwrap();
        assert_eq!(read_combinations_csv(&buf[..]).unwrap(), subs);
        let bad = "k,sources,correct,total,accuracy_percent\n3,a;b,1,2,50.00\n";
        assert!(read_combinations_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn meta_round_trip() {
        let mut meta = Provenance::default();
        meta.push("model_name", "m");
        meta.push("seed", "0");
        let mut buf = Vec::new();
        write_meta(&mut buf, &meta).unwrap();
        assert_eq!(buf, b"model_name=m\nseed=0\n");
        assert_eq!(read_meta(&b"# c\n\nmodel_name = m\nseed=0\n"[..]).unwrap(), meta);
        assert!(read_meta(&b"novalue\n"[..]).is_err());
    }

    #[test]
    fn posteriors_format() {
        let m = VoteMatrix::from_rows(&[vec![1, 1], vec![-1, 1], vec![-1, -1]]).unwrap();
        let p = crate::label_models::majority_vote(&m);
        let mut buf = Vec::new();
        write_posteriors_csv(&mut buf, &m, &p).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "item_id,p_positive,hard_label\ni0,1.000000,1\ni1,0.500000,1\ni2,0.000000,-1\n"
        );
    }
}
