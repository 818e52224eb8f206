use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::combos::CombinationStats;
use super::grid::GridResult;
use super::stats::{RunStats, StatsRow};
use super::ExperimentError;
use crate::label_models::{Estimator, FitConfig};
use crate::votes::Percent;

/// Ordered `key=value` facts describing how the numbers were produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub provenance: Provenance,
    pub run_stats: RunStats,
    pub grid: GridResult,
    /// Estimator used for the subset study.
    pub combination_model: String,
    pub combos: Vec<CombinationStats>,
}

const STAT_NAMES: [&str; 5] = ["max", "min", "max-min", "avg", "median"];

fn title(name: &str) -> String {
    Estimator::from_name(name, &FitConfig::default()).map_or_else(|_| name.to_string(), |e| e.title().to_string())
}

fn md_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    out.push('|');
    for c in cells {
        let _ = write!(out, " {c} |");
    }
    out.push('\n');
}

fn md_header(out: &mut String, cells: Vec<String>) {
    let n = cells.len();
    md_row(out, cells);
    md_row(out, std::iter::once("---".to_string()).chain(std::iter::repeat_n("---:".to_string(), n - 1)));
}

fn stat_cells(rows: &[&StatsRow], stat: usize) -> Vec<String> {
    rows.iter().map(|r| r.percents()[stat].to_string()).collect()
}

fn render_markdown(report: &Report) -> String {
    let mut out = String::from("# Consolidation report\n\n");
    for (k, v) in &report.provenance.entries {
        let _ = writeln!(out, "- {k}: {v}");
    }
    if report.combos.is_empty() {
        out.push_str("- subset combinations: none computed, section omitted\n");
    }

    out.push_str("\n## Accuracy of single runs (%)\n\n");
    let temps: Vec<String> = report.run_stats.keys().map(|t| t.to_string()).collect();
    let rows: Vec<&StatsRow> = report.run_stats.values().collect();
    md_header(&mut out, std::iter::once("Stat \\ Temp".to_string()).chain(temps).collect());
    for (i, name) in STAT_NAMES.iter().enumerate() {
        md_row(&mut out, std::iter::once(name.to_string()).chain(stat_cells(&rows, i)));
    }
    md_row(&mut out, std::iter::once("runs".to_string()).chain(rows.iter().map(|r| r.count.to_string())));

    out.push_str("\n## Label models on all runs (%)\n\n");
    let g = &report.grid;
    md_header(
        &mut out,
        std::iter::once("LModel \\ Temp".to_string())
            .chain(g.temperatures.iter().map(|t| t.to_string()))
            .chain(std::iter::once("AVG".to_string()))
            .collect(),
    );
    for ((name, row), avg) in g.models.iter().zip(&g.cells).zip(&g.row_avg) {
        md_row(
            &mut out,
            std::iter::once(title(name))
                .chain(row.iter().map(|c| c.percent().to_string()))
                .chain(std::iter::once(Percent(*avg).to_string())),
        );
    }
    md_row(
        &mut out,
        std::iter::once("AVG".to_string())
            .chain(g.col_avg.iter().map(|a| Percent(*a).to_string()))
            .chain(std::iter::once(String::new())),
    );

    if !report.combos.is_empty() {
        let _ = write!(out, "\n## {} on source subsets (%)\n\n", title(&report.combination_model));
        let rows: Vec<&StatsRow> = report.combos.iter().map(|c| &c.stats).collect();
        md_header(
            &mut out,
            std::iter::once("# sources".to_string()).chain(report.combos.iter().map(|c| c.k.to_string())).collect(),
        );
        for (i, name) in STAT_NAMES.iter().enumerate() {
            md_row(&mut out, std::iter::once(name.to_string()).chain(stat_cells(&rows, i)));
        }
        md_row(&mut out, std::iter::once("subsets".to_string()).chain(report.combos.iter().map(|c| c.subsets.to_string())));
    }
    out
}

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Vec<u8>, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| ExperimentError::Data(e.into());
    w.write_record(&header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| ExperimentError::Io(e.into_error()))
}

fn stats_fields(r: &StatsRow) -> Vec<String> {
    r.percents().iter().map(ToString::to_string).collect()
}

const STAT_COLUMNS: [&str; 5] = ["max", "min", "max_minus_min", "avg", "median"];

/// Writes `report.md`, `table2.csv`, `table3.csv` and, when there are
/// subset results, `table4.csv` into `dir`. Without subset results a stale
/// `table4.csv` is removed. Returns the paths written.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(&str, Vec<u8>)> = vec![("report.md", render_markdown(report).into_bytes())];

    let header2 = ["temperature", "runs"].into_iter().chain(STAT_COLUMNS).map(String::from).collect();
    let rows2 = report
        .run_stats
        .iter()
        .map(|(t, r)| [t.to_string(), r.count.to_string()].into_iter().chain(stats_fields(r)).collect())
        .collect();
    files.push(("table2.csv", csv_bytes(header2, rows2)?));

    let g = &report.grid;
    let header3 = std::iter::once("model".to_string())
        .chain(g.temperatures.iter().map(|t| t.to_string()))
        .chain(std::iter::once("AVG".to_string()))
        .collect();
    let mut rows3: Vec<Vec<String>> = g
        .models
        .iter()
        .zip(&g.cells)
        .zip(&g.row_avg)
        .map(|((m, row), avg)| {
            std::iter::once(m.clone())
                .chain(row.iter().map(|c| c.percent().to_string()))
                .chain(std::iter::once(Percent(*avg).to_string()))
                .collect()
        })
        .collect();
    rows3.push(
        std::iter::once("AVG".to_string())
            .chain(g.col_avg.iter().map(|a| Percent(*a).to_string()))
            .chain(std::iter::once(String::new()))
            .collect(),
    );
    files.push(("table3.csv", csv_bytes(header3, rows3)?));

    let table4 = dir.join("table4.csv");
    if report.combos.is_empty() {
        if table4.exists() {
            fs::remove_file(&table4)?;
        }
    } else {
        let header4 = ["k", "subsets"].into_iter().chain(STAT_COLUMNS).map(String::from).collect();
        let rows4 = report
            .combos
            .iter()
            .map(|c| [c.k.to_string(), c.subsets.to_string()].into_iter().chain(stats_fields(&c.stats)).collect())
            .collect();
        files.push(("table4.csv", csv_bytes(header4, rows4)?));
    }

    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::experiment::stats_row;
    use crate::prompting::Temperature;
    use crate::votes::{EvaluationResult, Fraction};

    fn sample(with_combos: bool) -> Report {
        let temps: Vec<Temperature> = Temperature::decile_grid().into_iter().take(2).collect();
        let f = |k| Fraction::new(k, 109);
        let run_stats: RunStats = BTreeMap::from([
            (temps[0], stats_row(&[f(80), f(75), f(77)]).unwrap()),
            (temps[1], stats_row(&[f(78), f(79)]).unwrap()),
        ]);
        let e = |k| EvaluationResult::new(k, 109);
        let grid = GridResult::from_cells(
            vec!["majority".into(), "generative".into()],
            temps,
            vec![vec![e(79), e(80)], vec![e(81), e(83)]],
        );
        let combos = if with_combos {
            vec![CombinationStats { k: 2, subsets: 3, stats: stats_row(&[f(70), f(71), f(75)]).unwrap() }]
        } else {
            Vec::new()
        };
        let mut provenance = Provenance::default();
        provenance.push("model_name", "stub");
        Report { provenance, run_stats, grid, combination_model: "generative".into(), combos }
    }

    #[test]
    fn byte_identical_reruns() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&sample(true), dir.path()).unwrap();
        let first: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
        emit_report(&sample(true), dir.path()).unwrap();
        let second: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        assert_eq!(paths.len(), 4);
        let t2 = fs::read_to_string(dir.path().join("table2.csv")).unwrap();
        assert!(t2.contains("0.1,3,73.39,68.81,4.59,"));
        let t3 = fs::read_to_string(dir.path().join("table3.csv")).unwrap();
        assert!(t3.starts_with("model,0.1,0.2,AVG\nmajority,72.48,73.39,72.94\n"));
        let md = fs::read_to_string(dir.path().join("report.md")).unwrap();
        assert!(md.contains("| Generative model | 74.31 | 76.15 | 75.23 |"));
    }

    #[test]
    fn empty_combos_omitted_and_noted() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&sample(true), dir.path()).unwrap();
        let paths = emit_report(&sample(false), dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(!dir.path().join("table4.csv").exists());
        let md = fs::read_to_string(dir.path().join("report.md")).unwrap();
        assert!(md.contains("section omitted"));
        assert!(!md.contains("on source subsets"));
    }

    #[test]
    fn unwritable_destination() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        assert!(matches!(emit_report(&sample(false), &file), Err(ExperimentError::Io(_))));
    }
}
