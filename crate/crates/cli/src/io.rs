//! On-disk artifacts: diagnostics CSV, binary field dumps and run summaries.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use snpair_core::diagnostics::DiagnosticsRecord;
use snpair_core::SimError;

use crate::error::{CliError, Result};

pub const BASE_COLUMNS: [&str; 16] = [
    "t", "norm", "E_total", "E_kin", "E_pair", "E_self1", "E_self2", "S_vN", "S_L", "lambda1", "lambda2", "lambda3",
    "dx_mean", "d_rel", "PR1", "PR2",
];
pub const NEGATIVITY_COLUMNS: [&str; 3] = ["neg1", "neg2", "neg_rel"];

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    }
}

/// Streams validated diagnostics rows to a CSV file.
pub struct RecordWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
    negativity: bool,
}

impl RecordWriter {
    pub fn create(path: &Path, negativity: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
        if negativity {
            header.extend(NEGATIVITY_COLUMNS);
        }
        inner.write_record(&header).map_err(|e| csv_error(path, e))?;
        Ok(Self { path: path.to_path_buf(), inner, negativity })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        r.validate().map_err(|e| match e {
            SimError::InvalidParameter(m) => CliError::Numerical(SimError::InvalidParameter(m)),
            other => CliError::Numerical(other),
        })?;
        let e = &r.energy;
        let mut row = vec![
            r.t, r.norm, e.e_total, e.e_kin, e.e_pair, e.e_self1, e.e_self2, r.s_vn, r.s_l, r.lambdas[0], r.lambdas[1],
            r.lambdas[2], r.dx_mean, r.d_rel, r.pr1, r.pr2,
        ];
        if self.negativity {
            let n = r.negativity.ok_or_else(|| {
                CliError::Numerical(SimError::InvalidParameter(format!("record at t = {} lacks negativities", r.t)))
            })?;
            row.extend([n.neg1, n.neg2, n.neg_rel]);
        }
        self.inner.serialize(row).map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Full Schmidt spectra, one row per sample, padded with zeros to `N` columns.
pub struct SpectrumWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
    width: usize,
}

impl SpectrumWriter {
    pub fn create(path: &Path, width: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=width).map(|k| format!("lambda{k}")));
        inner.write_record(&header).map_err(|e| csv_error(path, e))?;
        Ok(Self { path: path.to_path_buf(), inner, width })
    }

    pub fn write(&mut self, t: f64, spectrum: &[f64]) -> Result<()> {
        let mut row = vec![t];
        row.extend(spectrum.iter().copied().chain(std::iter::repeat(0.0)).take(self.width));
        self.inner.serialize(row).map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// A numeric CSV table held column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
        let mut columns = vec![Vec::new(); header.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            for (col, field) in columns.iter_mut().zip(rec.iter()) {
                let v = if field.is_empty() {
                    f64::NAN
                } else {
                    field.parse().map_err(|_| CliError::format(path, format!("row {}: '{field}' is not a number", line + 2)))?
                };
                col.push(v);
            }
        }
        Ok(Self { header, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

const FIELD_MAGIC: &[u8; 4] = b"SN2B";
const PROFILE_MAGIC: &[u8; 4] = b"SN1B";
const FORMAT_VERSION: u8 = 1;

/// Contents of a field-dump file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub n: usize,
    pub length: f64,
    pub t: f64,
    /// Single-particle profile (`N` values) rather than a two-body field.
    pub profile: bool,
    /// `N^2` values, first index slowest, for two-body fields; `N` for profiles.
    pub values: Vec<Complex64>,
}

impl FieldDump {
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n + j]
    }
}

fn write_dump(path: &Path, magic: &[u8; 4], n: usize, length: f64, t: f64, values: &[Complex64]) -> Result<()> {
    let n32 = u32::try_from(n).map_err(|_| CliError::format(path, format!("N = {n} does not fit the header")))?;
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| CliError::io(path, e));
    put(magic)?;
    put(&[FORMAT_VERSION])?;
    put(&n32.to_le_bytes())?;
    put(&length.to_le_bytes())?;
    put(&t.to_le_bytes())?;
    for z in values {
        put(&z.re.to_le_bytes())?;
        put(&z.im.to_le_bytes())?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Write an `N x N` complex field.
pub fn write_field(path: &Path, n: usize, length: f64, t: f64, values: &[Complex64]) -> Result<()> {
    if values.len() != n * n {
        return Err(CliError::format(path, format!("field has {} values, expected {}", values.len(), n * n)));
    }
    write_dump(path, FIELD_MAGIC, n, length, t, values)
}

/// Write an `N x N` real map, stored with zero imaginary parts.
pub fn write_real_field(path: &Path, n: usize, length: f64, t: f64, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let values: Vec<Complex64> = values.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    write_field(path, n, length, t, &values)
}

/// Write a single-particle profile of `N` values.
pub fn write_profile(path: &Path, length: f64, t: f64, values: &[Complex64]) -> Result<()> {
    write_dump(path, PROFILE_MAGIC, values.len(), length, t, values)
}

pub fn read_dump(path: &Path) -> Result<FieldDump> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes).map_err(|e| CliError::io(path, e))?;
    const HEADER: usize = 4 + 1 + 4 + 8 + 8;
    if bytes.len() < HEADER {
        return Err(CliError::format(path, "truncated header"));
    }
    let magic = &bytes[..4];
    let profile = match magic {
        m if m == FIELD_MAGIC => false,
        m if m == PROFILE_MAGIC => true,
        _ => return Err(CliError::format(path, "not a field dump (bad magic)")),
    };
    if bytes[4] != FORMAT_VERSION {
        return Err(CliError::format(path, format!("unsupported version {}", bytes[4])));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let n = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let length = f64_at(9);
    let t = f64_at(17);
    let count = if profile { n } else { n * n };
    if bytes.len() != HEADER + 16 * count {
        return Err(CliError::format(path, format!("payload is {} bytes, expected {}", bytes.len() - HEADER, 16 * count)));
    }
    let values = (0..count).map(|k| Complex64::new(f64_at(HEADER + 16 * k), f64_at(HEADER + 16 * k + 8))).collect();
    Ok(FieldDump { n, length, t, profile, values })
}

/// File name stem for a dump at time `t`.
pub fn dump_name(prefix: &str, t: f64) -> String {
    format!("{prefix}_t{t:08.3}.sn2b")
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: String,
    pub kind: String,
    pub profile: String,
    pub masses: [f64; 2],
    pub samples: usize,
    pub peak_s_vn: f64,
    pub t_peak: f64,
    pub final_t: f64,
    pub final_s_vn: f64,
    pub final_dx_mean: f64,
    pub final_d_rel: f64,
    pub initial_energy: f64,
    pub max_rel_energy_drift: f64,
    pub max_norm_drift: f64,
    pub overlap: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub omegas: Option<[f64; 2]>,
}

/// Largest sampled entropy and its time among rows with `t <= window`.
pub fn peak_entropy(records: &[DiagnosticsRecord], window: f64) -> Option<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.t <= window + 1e-9)
        .fold(None, |best: Option<(f64, f64)>, r| match best {
            Some((s, _)) if s >= r.s_vn => best,
            _ => Some((r.s_vn, r.t)),
        })
}

impl RunSummary {
    pub fn from_records(records: &[DiagnosticsRecord]) -> Option<Self> {
        let first = records.first()?;
        let last = records.last()?;
        let (peak_s_vn, t_peak) = peak_entropy(records, f64::INFINITY)?;
        let e0 = first.energy.e_total;
        let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
        let max_rel_energy_drift = records.iter().map(|r| (r.energy.e_total - e0).abs() / scale).fold(0.0, f64::max);
        let max_norm_drift = records.iter().map(|r| (r.norm - first.norm).abs()).fold(0.0, f64::max);
        Some(Self {
            solver: String::new(),
            kind: String::new(),
            profile: String::new(),
            masses: [0.0; 2],
            samples: records.len(),
            peak_s_vn,
            t_peak,
            final_t: last.t,
            final_s_vn: last.s_vn,
            final_dx_mean: last.dx_mean,
            final_d_rel: last.d_rel,
            initial_energy: e0,
            max_rel_energy_drift,
            max_norm_drift,
            overlap: [0.0; 2],
            omegas: None,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use snpair_core::EnergyBreakdown;

    fn record(t: f64, s_vn: f64, e: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            s_vn,
            s_l: 0.1,
            lambdas: [0.9, 0.1, 0.0],
            spectrum: None,
            energy: EnergyBreakdown::new(e, 0.0, 0.0, 0.0, 1.0),
            norm: 1.0,
            dx_mean: 6.0,
            d_rel: 6.1,
            pr1: 2.0,
            pr2: 2.0,
            negativity: None,
        }
    }

    #[test]
    fn summary_picks_the_first_maximum() {
        let rows = [record(0.0, 0.0, -1.0), record(1.0, 0.5, -1.001), record(2.0, 0.5, -0.999), record(3.0, 0.2, -1.0)];
        let s = RunSummary::from_records(&rows).unwrap();
        assert_eq!((s.peak_s_vn, s.t_peak), (0.5, 1.0));
        assert!((s.max_rel_energy_drift - 1e-3).abs() < 1e-12);
        assert_eq!(peak_entropy(&rows, 0.5), Some((0.0, 0.0)));
    }

    #[test]
    fn csv_rows_round_trip_and_are_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut w = RecordWriter::create(&path, false).unwrap();
        let r = record(0.1, 1.0 / 3.0, -0.1234567890123);
        w.write(&r).unwrap();
        let mut bad = r.clone();
        bad.s_l = 1.5;
        assert!(matches!(w.write(&bad), Err(CliError::Numerical(_))));
        w.finish().unwrap();
        let table = Table::read(&path).unwrap();
        assert_eq!(table.header, BASE_COLUMNS);
        assert_eq!(table.rows(), 1);
        assert_eq!(table.column("S_vN").unwrap()[0], 1.0 / 3.0);
        assert_eq!(table.column("E_total").unwrap()[0], -0.1234567890123);
        assert!(table.column("neg1").is_none());
    }

    #[test]
    fn negativity_columns_need_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = RecordWriter::create(&dir.path().join("n.csv"), true).unwrap();
        assert!(w.write(&record(0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn dumps_reject_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.sn2b");
        write_field(&path, 2, 3.0, 0.5, &[Complex64::new(1.0, -1.0); 4]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"SN2B\x01");
        assert_eq!(bytes.len(), 25 + 64);
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_dump(&path), Err(CliError::Format { .. })));
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(read_dump(&path).is_err());
        assert!(write_field(&path, 3, 1.0, 0.0, &[Complex64::default(); 4]).is_err());
    }

    #[test]
    fn dump_names_sort_by_time() {
        assert_eq!(dump_name("psi", 0.0), "psi_t0000.000.sn2b");
        assert!(dump_name("psi", 9.5) < dump_name("psi", 10.0));
    }

    proptest! {
        #[test]
        fn field_dumps_round_trip(
            n in 1usize..9,
            length in 1.0..100.0f64,
            t in 0.0..1e3f64,
            seed in prop::collection::vec(-1e3..1e3f64, 128),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let values: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(seed[2 * k % 128], seed[(2 * k + 1) % 128])).collect();
            let path = dir.path().join("f.sn2b");
            write_field(&path, n, length, t, &values).unwrap();
            let back = read_dump(&path).unwrap();
            prop_assert_eq!(back, FieldDump { n, length, t, profile: false, values: values.clone() });

            let profile = &values[..n];
            let p = dir.path().join("p.sn2b");
            write_profile(&p, length, t, profile).unwrap();
            let back = read_dump(&p).unwrap();
            prop_assert!(back.profile);
            prop_assert_eq!(back.values.as_slice(), profile);
        }
    }
}
