//! Report directories: results.csv, summary.json, config.toml and the
//! JSON-lines record files, with reading back and merging.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::experiment::{columns, results, table, Outcome, RecordLine, State};
use crate::LabError;

pub const SCHEMA_VERSION: u32 = 1;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const SHELLS_FILE: &str = "shells.jsonl";
pub const TRACES_FILE: &str = "traces.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    /// Master seeds of the pooled runs, sorted.
    pub seeds: Vec<u64>,
    pub replicas: u64,
    pub censored_fraction: f64,
    pub censor_limit: f64,
    pub censored_beyond_limit: bool,
    pub results: Value,
    pub state: State,
}

#[derive(Clone, Debug)]
pub struct Report {
    /// Echoed config; after a merge it carries the smallest master seed.
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub state: State,
    pub records: Vec<RecordLine>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> LabError + '_ {
    move |source| LabError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, msg: impl ToString) -> LabError {
    LabError::Report {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    }
}

impl Report {
    pub fn from_outcome(config: ExperimentConfig, outcome: Outcome) -> Self {
        let mut records = outcome.records;
        records.sort();
        Report {
            seeds: vec![config.master_seed],
            config,
            state: outcome.state,
            records,
        }
    }

    pub fn censored_fraction(&self) -> f64 {
        self.state.censored_fraction()
    }

    pub fn censored_beyond_limit(&self) -> bool {
        self.censored_fraction() > self.config.thresholds.censor_limit
    }

    pub fn summary(&self) -> Summary {
        Summary {
            schema_version: SCHEMA_VERSION,
            experiment: self.state.name().to_string(),
            seeds: self.seeds.clone(),
            replicas: self.state.replicas(),
            censored_fraction: self.censored_fraction(),
            censor_limit: self.config.thresholds.censor_limit,
            censored_beyond_limit: self.censored_beyond_limit(),
            results: results(&self.state, &self.config),
            state: self.state.clone(),
        }
    }

    pub fn csv(&self) -> Result<String, LabError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let run = |e: csv::Error| LabError::Run(e.to_string());
        w.write_record(columns(self.state.name())).map_err(run)?;
        for row in table(&self.state, &self.config) {
            w.write_record(&row).map_err(run)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Run(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let put = |name: &str, text: &str| -> Result<(), LabError> {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io_err(&path))
        };
        put(RESULTS_FILE, &self.csv()?)?;
        let mut summary = serde_json::to_string_pretty(&self.summary()).map_err(|e| LabError::Run(e.to_string()))?;
        summary.push('\n');
        put(SUMMARY_FILE, &summary)?;
        put(CONFIG_FILE, &self.config.to_toml()?)?;
        if matches!(self.state, State::Shells(_)) {
            write_lines(&dir.join(SHELLS_FILE), self.records.iter().map(|r| r.json.as_str()))?;
        }
        if let Some(lines) = self.state.trace_lines() {
            write_lines(&dir.join(TRACES_FILE), lines.iter().map(String::as_str))?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, LabError> {
        let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
        let path = dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let summary: Summary = serde_json::from_str(&text).map_err(|e| malformed(&path, e))?;
        if summary.schema_version != SCHEMA_VERSION {
            return Err(malformed(&path, format!("schema_version {} is not {SCHEMA_VERSION}", summary.schema_version)));
        }
        if summary.experiment != config.experiment.name() {
            return Err(malformed(&path, "summary and config name different experiments"));
        }
        let mut records = Vec::new();
        let shells = dir.join(SHELLS_FILE);
        if matches!(summary.state, State::Shells(_)) && shells.exists() {
            let text = fs::read_to_string(&shells).map_err(io_err(&shells))?;
            for line in text.lines().filter(|l| !l.is_empty()) {
                let v: Value = serde_json::from_str(line).map_err(|e| malformed(&shells, e))?;
                let key = |k: &str| v[k].as_u64().ok_or_else(|| malformed(&shells, format!("record without {k}")));
                records.push(RecordLine {
                    key: (key("master_seed")?, key("replica")?, key("index")?),
                    json: line.to_string(),
                });
            }
        }
        Ok(Report {
            config,
            seeds: summary.seeds,
            state: summary.state,
            records,
        })
    }

    /// Pool `other` into `self`. The configs must agree except for the
    /// master seed.
    pub fn merge(&mut self, other: &Report) -> Result<(), LabError> {
        if self.config.with_seed(0) != other.config.with_seed(0) {
            return Err(LabError::ConfigMismatch("configs differ beyond master_seed".into()));
        }
        self.state.merge(&other.state)?;
        self.seeds.extend_from_slice(&other.seeds);
        self.seeds.sort_unstable();
        self.config.master_seed = self.seeds[0];
        self.records.extend(other.records.iter().cloned());
        self.records.sort();
        Ok(())
    }
}

fn write_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> Result<(), LabError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for l in lines {
        writeln!(f, "{l}").map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))
}

/// Fold reports left to right.
pub fn merge_reports(reports: &[Report]) -> Result<Report, LabError> {
    let (first, rest) = reports.split_first().ok_or_else(|| LabError::Config("nothing to merge".into()))?;
    let mut acc = first.clone();
    for r in rest {
        acc.merge(r)?;
    }
    Ok(acc)
}

pub fn merge_dirs(dirs: &[PathBuf]) -> Result<Report, LabError> {
    let reports = dirs.iter().map(|d| Report::read(d)).collect::<Result<Vec<_>, _>>()?;
    merge_reports(&reports)
}
