//! CSV time series: training records in, relative deviations out.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context as _};
use ndo_core::training::trailing_moving_average;
use ndo_core::IterationRecord;

use crate::config::ConfigError;

pub fn records_header(n_sites: usize) -> Vec<String> {
    let mut h: Vec<String> = ["iter", "cost", "acc_rate", "mz"].map(String::from).into();
    h.extend((1..=n_sites).map(|i| format!("n{i}")));
    h
}

/// Streams training records to disk, flushing every row so a long run can be
/// watched while it progresses.
pub struct RecordWriter {
    inner: csv::Writer<File>,
    n_sites: usize,
}

impl RecordWriter {
    pub fn create(path: &Path, n_sites: usize) -> anyhow::Result<Self> {
        let mut inner = csv::Writer::from_path(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        inner.write_record(records_header(n_sites))?;
        inner.flush()?;
        Ok(Self { inner, n_sites })
    }

    pub fn write(&mut self, r: &IterationRecord<f64>) -> csv::Result<()> {
        debug_assert_eq!(r.site_excited_population.len(), self.n_sites);
        let mut row = vec![
            r.iteration.to_string(),
            r.cost_estimate.to_string(),
            r.acceptance_rate.to_string(),
            r.magnetization_z.to_string(),
        ];
        row.extend(r.site_excited_population.iter().map(f64::to_string));
        self.inner.write_record(&row)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// A training CSV read back into columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSeries {
    pub iter: Vec<usize>,
    pub cost: Vec<f64>,
    pub acc_rate: Vec<f64>,
    pub mz: Vec<f64>,
    /// `populations[i][t]` for site `i`.
    pub populations: Vec<Vec<f64>>,
}

impl TrainingSeries {
    pub fn n_sites(&self) -> usize {
        self.populations.len()
    }
}

fn schema_error(path: &Path, msg: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(format!("{}: {msg}", path.display())).into()
}

pub fn read_records(path: &Path) -> anyhow::Result<TrainingSeries> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let header = rdr.headers()?.clone();
    let n = header.len().saturating_sub(4);
    let expected = records_header(n);
    if n == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(schema_error(
            path,
            format!("header must be `{}`, found `{}`", records_header(n.max(1)).join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut s = TrainingSeries {
        populations: vec![Vec::new(); n],
        ..Default::default()
    };
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let num = |k: usize| -> anyhow::Result<f64> {
            row[k].trim().parse::<f64>().map_err(|e| {
                schema_error(path, format!("row {}: column `{}`: {e}", line + 1, &expected[k]))
            })
        };
        s.iter.push(
            row[0]
                .trim()
                .parse()
                .map_err(|e| schema_error(path, format!("row {}: iter: {e}", line + 1)))?,
        );
        s.cost.push(num(1)?);
        s.acc_rate.push(num(2)?);
        s.mz.push(num(3)?);
        for i in 0..n {
            s.populations[i].push(num(4 + i)?);
        }
    }
    if s.iter.is_empty() {
        return Err(schema_error(path, "no records"));
    }
    Ok(s)
}

/// Per-site relative deviation `(n_i - b_i) / b_i` and its trailing moving
/// average, for every iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationTable {
    pub iter: Vec<usize>,
    /// `raw[i][t]`
    pub raw: Vec<Vec<f64>>,
    pub smoothed: Vec<Vec<f64>>,
}

pub fn deviation_table(
    series: &TrainingSeries,
    benchmark: &[f64],
    window: usize,
) -> anyhow::Result<DeviationTable> {
    if benchmark.len() != series.n_sites() {
        bail!(ConfigError(format!(
            "records have {} sites but the oracle has {}",
            series.n_sites(),
            benchmark.len()
        )));
    }
    if let Some(i) = benchmark.iter().position(|&b| !(b.abs() > 0.0)) {
        bail!(ConfigError(format!("oracle population of site {} is zero", i + 1)));
    }
    let raw: Vec<Vec<f64>> = series
        .populations
        .iter()
        .zip(benchmark)
        .map(|(col, &b)| col.iter().map(|&x| (x - b) / b).collect())
        .collect();
    let smoothed = raw.iter().map(|d| trailing_moving_average(d, window)).collect();
    Ok(DeviationTable {
        iter: series.iter.clone(),
        raw,
        smoothed,
    })
}

impl DeviationTable {
    pub fn header(&self) -> Vec<String> {
        let n = self.raw.len();
        let mut h = vec!["iter".to_string()];
        h.extend((1..=n).map(|i| format!("d{i}")));
        h.extend((1..=n).map(|i| format!("sd{i}")));
        h.push("max_abs_d".into());
        h.push("max_abs_sd".into());
        h
    }

    fn max_abs(cols: &[Vec<f64>], t: usize) -> f64 {
        cols.iter().fold(0.0, |m, c| m.max(c[t].abs()))
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(self.header())?;
        for (t, it) in self.iter.iter().enumerate() {
            let mut row = vec![it.to_string()];
            row.extend(self.raw.iter().map(|c| c[t].to_string()));
            row.extend(self.smoothed.iter().map(|c| c[t].to_string()));
            row.push(Self::max_abs(&self.raw, t).to_string());
            row.push(Self::max_abs(&self.smoothed, t).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `max_i |sd_i|` at the last iteration.
    pub fn final_max_abs_smoothed(&self) -> f64 {
        Self::max_abs(&self.smoothed, self.iter.len() - 1)
    }
}
