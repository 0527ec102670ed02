//! Dataset ingestion: CSV tables of signal strengths and a synthetic
//! cellular-signal generator.

use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Csv(PathBuf),
    Synthetic { seed: u64 },
    InMemory,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Csv(p) => write!(f, "csv:{}", p.display()),
            Provenance::Synthetic { seed } => write!(f, "synthetic(seed={seed})"),
            Provenance::InMemory => f.write_str("in-memory"),
        }
    }
}

/// Rows of `c` features, every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Array2<f64>,
    provenance: Provenance,
}

impl Dataset {
    /// Wraps rows that are already scaled to `[0, 1]`.
    pub fn from_rows(rows: Array2<f64>, provenance: Provenance) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if let Some(v) = rows.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("dataset value {v} outside [0, 1]")));
        }
        Ok(Self { rows, provenance })
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    /// Feature count.
    pub fn c(&self) -> usize {
        self.rows.ncols()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            rows: self.rows.select(Axis(0), indices),
            provenance: self.provenance.clone(),
        })
    }

    /// Splits off the last `count` rows: `(head, tail)`.
    pub fn split_tail(&self, count: usize) -> Result<(Dataset, Dataset)> {
        if count == 0 || count >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot hold out {count} of {} rows",
                self.len()
            )));
        }
        let cut = self.len() - count;
        let head: Vec<usize> = (0..cut).collect();
        let tail: Vec<usize> = (cut..self.len()).collect();
        Ok((self.select(&head)?, self.select(&tail)?))
    }

    /// Writes the rows as headerless CSV with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for row in self.rows.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Loads a numeric CSV table and min-max scales each column to `[0, 1]`.
///
/// Constant columns become 0.5. Row numbers in errors are 1-based file
/// lines, counting the header when present.
pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            row: 0,
            message: e.to_string(),
        })?;

    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::Csv {
            row: line,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Csv {
                    row: line,
                    message: format!("expected {w} columns, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                row: line,
                message: format!("column {}: cannot parse {cell:?} as a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row: line,
                    message: format!("column {}: non-finite value", col + 1),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or(Error::EmptyDataset)?;
    let mut table = Array2::from_shape_vec((rows, width), values)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    scale_columns(&mut table);
    Dataset::from_rows(table, Provenance::Csv(path.to_path_buf()))
}

fn scale_columns(table: &mut Array2<f64>) {
    for mut col in table.columns_mut() {
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if span > 0.0 {
            col.mapv_inplace(|v| ((v - lo) / span).clamp(0.0, 1.0));
        } else {
            col.fill(0.5);
        }
    }
}

/// Width of a station's signal footprint in the unit square.
const FOOTPRINT_SIGMA: f64 = 0.0588;
const BACKGROUND_NOISE: f64 = 0.03;

/// Simulated received-signal strengths from `c` stations.
///
/// Stations sit on a square grid covering the unit square. Each sample
/// places a receiver uniformly at random and draws a transmit power in
/// `[0.6, 1]`; station `i` reads `power · exp(−d²/(2σ²))` plus small
/// background noise, clipped to `[0, 1]`. With σ ≈ 0.059 about 5% of the
/// stations read above 0.1.
pub fn synthetic_cellular<R: Rng + ?Sized>(samples: usize, c: usize, rng: &mut R) -> Result<Dataset> {
    synthetic_with_provenance(samples, c, rng, Provenance::InMemory)
}

/// [`synthetic_cellular`] driven by a fresh generator seeded with `seed`.
pub fn synthetic_cellular_seeded(samples: usize, c: usize, seed: u64) -> Result<Dataset> {
    let mut rng = crate::rng_from_seed(seed);
    synthetic_with_provenance(samples, c, &mut rng, Provenance::Synthetic { seed })
}

fn synthetic_with_provenance<R: Rng + ?Sized>(
    samples: usize,
    c: usize,
    rng: &mut R,
    provenance: Provenance,
) -> Result<Dataset> {
    if samples == 0 {
        return Err(Error::EmptyDataset);
    }
    if c < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 stations, got {c}")));
    }
    let side = (c as f64).sqrt().ceil() as usize;
    let spacing = 1.0 / (side - 1).max(1) as f64;
    let stations: Vec<(f64, f64)> = (0..c)
        .map(|i| ((i % side) as f64 * spacing, (i / side) as f64 * spacing))
        .collect();
    let two_sigma_sq = 2.0 * FOOTPRINT_SIGMA * FOOTPRINT_SIGMA;

    let mut rows = Array2::zeros((samples, c));
    for mut row in rows.rows_mut() {
        let (px, py) = (rng.gen::<f64>(), rng.gen::<f64>());
        let power = rng.gen_range(0.6..1.0);
        for (v, &(sx, sy)) in row.iter_mut().zip(&stations) {
            let d2 = (px - sx).powi(2) + (py - sy).powi(2);
            let noise = rng.gen::<f64>() * BACKGROUND_NOISE;
            *v = (power * (-d2 / two_sigma_sq).exp() + noise).clamp(0.0, 1.0);
        }
    }
    Dataset::from_rows(rows, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn scales_columns() {
        let f = write_temp("1,2\n3,4\n5,6\n");
        let ds = load_csv(f.path(), false).unwrap();
        assert_eq!(ds.rows(), &ndarray::array![[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]]);
        assert_eq!(ds.c(), 2);

        let f = write_temp("a,b\n1,2\n3,4\n5,6\n");
        let with_header = load_csv(f.path(), true).unwrap();
        assert_eq!(with_header.rows(), ds.rows());
    }

    #[test]
    fn constant_column_is_half() {
        let f = write_temp("1,7\n2,7\n");
        let ds = load_csv(f.path(), false).unwrap();
        assert_eq!(ds.rows().column(1).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn ragged_and_bad_cells() {
        let f = write_temp("1,2\n3,4,5\n");
        match load_csv(f.path(), false) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_temp("h1,h2\n1,2\n3,x\n");
        match load_csv(f.path(), true) {
            Err(Error::Csv { row, message }) => {
                assert_eq!(row, 3);
                assert!(message.contains("column 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = write_temp("");
        assert!(matches!(load_csv(f.path(), false), Err(Error::EmptyDataset)));
    }

    #[test]
    fn reloading_scaled_output_is_stable() {
        let f = write_temp("3,10,1\n9,20,1\n4,12,1\n");
        let ds = load_csv(f.path(), false).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        ds.write_csv(out.path()).unwrap();
        let again = load_csv(out.path(), false).unwrap();
        for (a, b) in ds.rows().iter().zip(again.rows().iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn synthetic_is_sparse_bounded_and_deterministic() {
        let ds = synthetic_cellular_seeded(200, 361, 5).unwrap();
        assert_eq!(ds.c(), 361);
        assert!(ds.rows().iter().all(|v| (0.0..=1.0).contains(v)));
        for row in ds.rows().rows() {
            let quiet = row.iter().filter(|&&v| v < 0.1).count();
            assert!(quiet as f64 >= 0.9 * 361.0, "only {quiet} quiet stations");
            assert!(row.iter().any(|&v| v > 0.3), "no station hears the receiver");
        }
        assert_eq!(ds, synthetic_cellular_seeded(200, 361, 5).unwrap());
        assert_ne!(ds.rows(), synthetic_cellular_seeded(200, 361, 6).unwrap().rows());
        assert!(synthetic_cellular_seeded(0, 10, 1).is_err());
        assert!(synthetic_cellular_seeded(5, 1, 1).is_err());
    }

    #[test]
    fn split_and_select() {
        let ds = synthetic_cellular_seeded(10, 9, 1).unwrap();
        let (head, tail) = ds.split_tail(3).unwrap();
        assert_eq!((head.len(), tail.len()), (7, 3));
        assert_eq!(tail.rows().row(0), ds.rows().row(7));
        assert!(ds.split_tail(10).is_err());
        assert!(ds.select(&[]).is_err());
    }
}
