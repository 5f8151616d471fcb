//! Result rows and their CSV form.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::LabError;

pub const CSV_HEADER: [&str; 8] = ["label", "params", "metric", "value", "stderr", "trials", "seed", "config_hash"];

/// One measured or computed quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    /// Experiment or lemma family, e.g. `stab_sweep` or `gramian_lower_bound`.
    pub label: String,
    /// Named parameters in emission order.
    pub params: Vec<(String, f64)>,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    /// Seed that regenerates this row on its own.
    pub seed: u64,
}

impl Row {
    pub fn new(label: &str, params: &[(&str, f64)], metric: &str, value: f64) -> Self {
        Self {
            label: label.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            metric: metric.to_string(),
            value,
            stderr: 0.0,
            trials: 0,
            seed: 0,
        }
    }

    pub fn stats(mut self, stderr: f64, trials: u64) -> Self {
        self.stderr = stderr;
        self.trials = trials;
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<Row>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    pub fn metric<'a>(&'a self, label: &'a str, metric: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.label == label && r.metric == metric)
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        let plain = format!("{v}");
        let sci = format!("{v:e}");
        if sci.len() < plain.len() { sci } else { plain }
    }
}

fn fmt_params(params: &[(String, f64)]) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={}", fmt_f64(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_params(text: &str) -> Result<Vec<(String, f64)>, LabError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| LabError::Parse(format!("parameter `{kv}` is not key=value")))?;
            Ok((k.to_string(), parse_f64(v)?))
        })
        .collect()
}

fn parse_f64(text: &str) -> Result<f64, LabError> {
    text.parse::<f64>()
        .map_err(|_| LabError::Parse(format!("`{text}` is not a number")))
}

fn parse_u64(text: &str) -> Result<u64, LabError> {
    text.parse::<u64>()
        .map_err(|_| LabError::Parse(format!("`{text}` is not an unsigned integer")))
}

pub fn write_csv_to<W: Write>(result: &ExperimentResult, w: W) -> Result<(), LabError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in &result.rows {
        out.write_record([
            r.label.clone(),
            fmt_params(&r.params),
            r.metric.clone(),
            fmt_f64(r.value),
            fmt_f64(r.stderr),
            r.trials.to_string(),
            r.seed.to_string(),
            result.provenance.config_hash.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(result: &ExperimentResult, path: &Path) -> Result<(), LabError> {
    write_csv_to(result, File::create(path)?)
}

pub fn csv_bytes(result: &ExperimentResult) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv_to(result, &mut buf).expect("writing to memory cannot fail");
    buf
}

/// Rows and config hash of a CSV produced by [`write_csv`]. The base seed is
/// not stored in the file, so the returned provenance carries seed 0.
pub fn read_csv_from<R: Read>(r: R) -> Result<ExperimentResult, LabError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(LabError::Parse(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    let mut hash = String::new();
    for rec in rd.records() {
        let rec = rec?;
        rows.push(Row {
            label: rec[0].to_string(),
            params: parse_params(&rec[1])?,
            metric: rec[2].to_string(),
            value: parse_f64(&rec[3])?,
            stderr: parse_f64(&rec[4])?,
            trials: parse_u64(&rec[5])?,
            seed: parse_u64(&rec[6])?,
        });
        hash = rec[7].to_string();
    }
    Ok(ExperimentResult {
        rows,
        provenance: Provenance {
            config_hash: hash,
            seed: 0,
        },
    })
}

pub fn read_csv(path: &Path) -> Result<ExperimentResult, LabError> {
    read_csv_from(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentResult {
        ExperimentResult {
            rows: vec![
                Row::new("stab_sweep", &[("n", 3.0), ("mu", 0.1)], "success_s1", 0.25)
                    .stats(0.0433, 100)
                    .seeded(u64::MAX),
                Row::new("bounds", &[], "n_min", 1e-300),
                Row::new("bounds", &[("x", -0.0)], "odd", f64::INFINITY),
            ],
            provenance: Provenance {
                config_hash: "ab".repeat(32),
                seed: 0,
            },
        }
    }

    #[test]
    fn shortest_round_trip_text() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 151274042534.55252, 2.5e21, -0.0, 5e-324] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(1e-300), "1e-300");
        assert_eq!(fmt_f64(3.0), "3");
    }

    #[test]
    fn csv_round_trip() {
        let res = sample();
        let back = read_csv_from(csv_bytes(&res).as_slice()).unwrap();
        assert_eq!(back, res);
    }

    #[test]
    fn empty_result_is_header_only() {
        let res = ExperimentResult {
            rows: vec![],
            provenance: Provenance {
                config_hash: String::new(),
                seed: 0,
            },
        };
        let text = String::from_utf8(csv_bytes(&res)).unwrap();
        assert_eq!(text, "label,params,metric,value,stderr,trials,seed,config_hash\n");
    }

    #[test]
    fn bytes_are_stable() {
        assert_eq!(csv_bytes(&sample()), csv_bytes(&sample()));
    }
}
