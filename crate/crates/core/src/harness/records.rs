use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::perturb::NoiseKind;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 27] = [
    "family",
    "n",
    "k_param",
    "k1",
    "k2",
    "d_i",
    "d_a",
    "N",
    "k",
    "method",
    "alpha",
    "epsilon_lpca",
    "distortion",
    "sigma2",
    "noise_kind",
    "seed",
    "agg_mean",
    "agg_median",
    "agg_mode",
    "agg_mom",
    "agg_mem",
    "delta_mean",
    "defined_count",
    "trace",
    "vdi",
    "r2",
    "wall_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RecordFormat::Csv),
            "jsonl" => Ok(RecordFormat::Jsonl),
            _ => Err(Error::invalid(format!("unknown record format {s:?}"))),
        }
    }
}

/// One benchmark cell: coordinates, aggregates and covariance statistics.
///
/// Missing values are `None`; they are empty CSV fields and JSON `null`.
/// `error` is only carried by JSONL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub schema_version: u32,
    pub family: String,
    pub n: usize,
    pub k_param: usize,
    pub k1: usize,
    pub k2: usize,
    pub d_i: Option<f64>,
    pub d_a: usize,
    #[serde(rename = "N")]
    pub n_points: usize,
    pub k: usize,
    pub method: String,
    pub alpha: Option<f64>,
    pub epsilon_lpca: Option<f64>,
    pub distortion: String,
    pub sigma2: Option<f64>,
    pub noise_kind: Option<NoiseKind>,
    pub seed: u64,
    pub agg_mean: Option<f64>,
    pub agg_median: Option<f64>,
    pub agg_mode: Option<f64>,
    pub agg_mom: Option<f64>,
    pub agg_mem: Option<f64>,
    pub delta_mean: Option<f64>,
    pub defined_count: usize,
    pub trace: Option<f64>,
    pub vdi: Option<f64>,
    pub r2: Option<f64>,
    pub wall_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn parse<T: FromStr>(field: &str, name: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Format(format!("bad value {field:?} in column {name}")))
}

fn parse_opt<T: FromStr>(field: &str, name: &str) -> Result<Option<T>> {
    if field.is_empty() { Ok(None) } else { parse(field, name).map(Some) }
}

impl BenchmarkRecord {
    /// Relative error of each aggregate, in `Aggregates` order.
    pub fn deltas(&self) -> [Option<f64>; 5] {
        let d_i = self.d_i;
        [self.agg_mean, self.agg_median, self.agg_mode, self.agg_mom, self.agg_mem]
            .map(|a| match (a, d_i) {
                (Some(a), Some(d)) if d > 0.0 => Some(a / d - 1.0),
                _ => None,
            })
    }

    /// SHA-256 over the coordinate columns; identifies a cell across runs.
    pub fn coordinate_digest(&self) -> String {
        let fields = self.csv_fields();
        let mut h = Sha256::new();
        for f in &fields[..16] {
            h.update(f.as_bytes());
            h.update([0x1f]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.family.clone(),
            self.n.to_string(),
            self.k_param.to_string(),
            self.k1.to_string(),
            self.k2.to_string(),
            opt(&self.d_i),
            self.d_a.to_string(),
            self.n_points.to_string(),
            self.k.to_string(),
            self.method.clone(),
            opt(&self.alpha),
            opt(&self.epsilon_lpca),
            self.distortion.clone(),
            opt(&self.sigma2),
            opt(&self.noise_kind),
            self.seed.to_string(),
            opt(&self.agg_mean),
            opt(&self.agg_median),
            opt(&self.agg_mode),
            opt(&self.agg_mom),
            opt(&self.agg_mem),
            opt(&self.delta_mean),
            self.defined_count.to_string(),
            opt(&self.trace),
            opt(&self.vdi),
            opt(&self.r2),
            opt(&self.wall_ms),
        ]
    }

    pub fn from_csv_fields(f: &csv::StringRecord) -> Result<Self> {
        if f.len() != CSV_HEADER.len() {
            return Err(Error::Format(format!("expected {} columns, got {}", CSV_HEADER.len(), f.len())));
        }
        let g = |i: usize| &f[i];
        Ok(BenchmarkRecord {
            schema_version: SCHEMA_VERSION,
            family: g(0).to_owned(),
            n: parse(g(1), CSV_HEADER[1])?,
            k_param: parse(g(2), CSV_HEADER[2])?,
            k1: parse(g(3), CSV_HEADER[3])?,
            k2: parse(g(4), CSV_HEADER[4])?,
            d_i: parse_opt(g(5), CSV_HEADER[5])?,
            d_a: parse(g(6), CSV_HEADER[6])?,
            n_points: parse(g(7), CSV_HEADER[7])?,
            k: parse(g(8), CSV_HEADER[8])?,
            method: g(9).to_owned(),
            alpha: parse_opt(g(10), CSV_HEADER[10])?,
            epsilon_lpca: parse_opt(g(11), CSV_HEADER[11])?,
            distortion: g(12).to_owned(),
            sigma2: parse_opt(g(13), CSV_HEADER[13])?,
            noise_kind: parse_opt(g(14), CSV_HEADER[14])?,
            seed: parse(g(15), CSV_HEADER[15])?,
            agg_mean: parse_opt(g(16), CSV_HEADER[16])?,
            agg_median: parse_opt(g(17), CSV_HEADER[17])?,
            agg_mode: parse_opt(g(18), CSV_HEADER[18])?,
            agg_mom: parse_opt(g(19), CSV_HEADER[19])?,
            agg_mem: parse_opt(g(20), CSV_HEADER[20])?,
            delta_mean: parse_opt(g(21), CSV_HEADER[21])?,
            defined_count: parse(g(22), CSV_HEADER[22])?,
            trace: parse_opt(g(23), CSV_HEADER[23])?,
            vdi: parse_opt(g(24), CSV_HEADER[24])?,
            r2: parse_opt(g(25), CSV_HEADER[25])?,
            wall_ms: parse_opt(g(26), CSV_HEADER[26])?,
            error: None,
        })
    }
}

/// Write records to `path`, appending when `append` is set. A CSV header is
/// written only when the file is new or empty.
pub fn write_records(path: &Path, format: RecordFormat, records: &[BenchmarkRecord], append: bool) -> Result<()> {
    let fresh = !append || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).write(true).append(append).truncate(!append).open(path)?;
    match format {
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_writer(file);
            if fresh {
                w.write_record(CSV_HEADER)?;
            }
            for r in records {
                w.write_record(r.csv_fields())?;
            }
            w.flush()?;
        }
        RecordFormat::Jsonl => {
            let mut w = BufWriter::new(file);
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Records to a string, header included for CSV.
pub fn records_to_string(format: RecordFormat, records: &[BenchmarkRecord]) -> Result<String> {
    let mut buf = Vec::new();
    match format {
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(CSV_HEADER)?;
            for r in records {
                w.write_record(r.csv_fields())?;
            }
            w.flush()?;
        }
        RecordFormat::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut buf, r)?;
                buf.push(b'\n');
            }
        }
    }
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_records(path: &Path, format: RecordFormat) -> Result<Vec<BenchmarkRecord>> {
    match format {
        RecordFormat::Csv => {
            let mut r = csv::Reader::from_path(path)?;
            let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
            if header != CSV_HEADER {
                return Err(Error::Format("CSV header does not match the record schema".into()));
            }
            r.records().map(|row| BenchmarkRecord::from_csv_fields(&row?)).collect()
        }
        RecordFormat::Jsonl => BufReader::new(fs::File::open(path)?)
            .lines()
            .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
            .map(|l| {
                let rec: BenchmarkRecord = serde_json::from_str(&l?)?;
                if rec.schema_version != SCHEMA_VERSION {
                    return Err(Error::Format(format!("unsupported schema version {}", rec.schema_version)));
                }
                Ok(rec)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_record() -> BenchmarkRecord {
        BenchmarkRecord {
            schema_version: SCHEMA_VERSION,
            family: "gr_vec".into(),
            n: 5,
            k_param: 2,
            k1: 0,
            k2: 0,
            d_i: Some(6.0),
            d_a: 10,
            n_points: 1000,
            k: 100,
            method: "twonn".into(),
            alpha: Some(0.1),
            epsilon_lpca: None,
            distortion: "noise".into(),
            sigma2: Some(1e-7),
            noise_kind: Some(NoiseKind::Uncorrelated),
            seed: 7,
            agg_mean: Some(5.912345678901234),
            agg_median: Some(5.8),
            agg_mode: Some(6.0),
            agg_mom: None,
            agg_mem: Some(0.1 + 0.2),
            delta_mean: Some(-0.014609053516461),
            defined_count: 998,
            trace: Some(1.0),
            vdi: Some(3.0e-300),
            r2: Some(0.25),
            wall_ms: None,
            error: None,
        }
    }

    #[test]
    fn header_matches_fields() {
        assert_eq!(sample_record().csv_fields().len(), CSV_HEADER.len());
    }

    #[test]
    fn csv_and_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![sample_record(), BenchmarkRecord { seed: 8, wall_ms: Some(12.5), ..sample_record() }];
        for (name, fmt) in [("a.csv", RecordFormat::Csv), ("a.jsonl", RecordFormat::Jsonl)] {
            let p = dir.path().join(name);
            write_records(&p, fmt, &recs, false).unwrap();
            assert_eq!(read_records(&p, fmt).unwrap(), recs);
        }
    }

    #[test]
    fn jsonl_uses_null_and_keeps_errors() {
        let rec = BenchmarkRecord { error: Some("bad".into()), ..sample_record() };
        let s = records_to_string(RecordFormat::Jsonl, std::slice::from_ref(&rec)).unwrap();
        assert!(s.contains("\"agg_mom\":null"));
        assert!(s.contains("\"N\":1000"));
        let back: BenchmarkRecord = serde_json::from_str(s.trim()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn append_writes_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_records(&p, RecordFormat::Csv, &[sample_record()], true).unwrap();
        write_records(&p, RecordFormat::Csv, &[sample_record()], true).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.matches("family,").count(), 1);
        assert_eq!(read_records(&p, RecordFormat::Csv).unwrap().len(), 2);
    }

    #[test]
    fn digest_ignores_results() {
        let a = sample_record();
        let b = BenchmarkRecord { agg_mean: Some(1.0), wall_ms: Some(3.0), ..sample_record() };
        let c = BenchmarkRecord { seed: 9, ..sample_record() };
        assert_eq!(a.coordinate_digest(), b.coordinate_digest());
        assert_ne!(a.coordinate_digest(), c.coordinate_digest());
    }

    #[test]
    fn deltas_per_aggregate() {
        let d = sample_record().deltas();
        assert!((d[1].unwrap() - (5.8 / 6.0 - 1.0)).abs() < 1e-15);
        assert_eq!(d[2], Some(0.0));
        assert_eq!(d[3], None);
    }

    proptest! {
        #[test]
        fn float_columns_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL, seed in any::<u64>()) {
            let rec = BenchmarkRecord { agg_mean: Some(x), vdi: Some(x), seed, ..sample_record() };
            let csv_text = records_to_string(RecordFormat::Csv, std::slice::from_ref(&rec)).unwrap();
            let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
            let row = rdr.records().next().unwrap().unwrap();
            prop_assert_eq!(BenchmarkRecord::from_csv_fields(&row).unwrap(), rec.clone());
            let json = serde_json::to_string(&rec).unwrap();
            prop_assert_eq!(serde_json::from_str::<BenchmarkRecord>(&json).unwrap(), rec);
        }
    }
}
