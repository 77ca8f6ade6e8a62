//! Output file formats: benchmark and scaling CSV tables, numeric matrix
//! CSV, and the JSON plan file consumed by `extract`.
//!
//! Every CSV writer re-parses what it just serialized and compares before
//! anything reaches disk, so an emitted table that cannot round-trip is a
//! hard error rather than a silently corrupt artifact. Floats survive
//! exactly because rows are printed in shortest round-trip notation.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ernot::semidual::GibbsPlan;
use ernot::{DiscreteMeasure, ManifoldKind, Mat};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// One benchmark metrics row: a (benchmark, seed, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCsvRow {
    pub benchmark: String,
    pub seed: u64,
    pub method: String,
    pub manifold: String,
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub plan_kl: f64,
    pub conditional_w1: f64,
    pub map_l2: f64,
    pub endpoint_error: f64,
}

/// One scaling-study row: wall-clock seconds and the analytic working-set
/// bytes for a (manifold, N, method) cell. Rows whose predicted working
/// set exceeds the memory budget carry `feasible = false` and zero time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCsvRow {
    pub manifold: String,
    pub n: usize,
    pub method: String,
    pub seconds: f64,
    pub bytes: u64,
    pub feasible: bool,
}

/// Serialize rows to CSV text (with a header line).
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).context("serializing CSV row")?;
    }
    let bytes = w.into_inner().context("flushing CSV writer")?;
    String::from_utf8(bytes).context("CSV text is not UTF-8")
}

/// Parse CSV text produced by [`rows_to_csv`].
pub fn rows_from_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.context("parsing CSV row"))
        .collect()
}

/// Write rows to `path`, verifying first that the serialized text parses
/// back into exactly the same rows.
pub fn write_csv<T>(path: &Path, rows: &[T]) -> Result<()>
where
    T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug,
{
    let text = rows_to_csv(rows)?;
    let reparsed: Vec<T> = rows_from_csv(&text)?;
    if reparsed.len() != rows.len() {
        bail!(
            "CSV round-trip lost rows: wrote {}, read {}",
            rows.len(),
            reparsed.len()
        );
    }
    for (k, (a, b)) in rows.iter().zip(&reparsed).enumerate() {
        if a != b {
            bail!("CSV round-trip mismatch at row {k}: wrote {a:?}, read {b:?}");
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Read a typed CSV table from `path`.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    rows_from_csv(&text)
}

/// Serialize a numeric matrix as header-free CSV.
pub fn matrix_to_csv(mat: &Mat) -> String {
    // Display for f64 prints the shortest representation that re-parses
    // to the same bits, so the round-trip below is exact.
    let mut out = String::new();
    for i in 0..mat.rows() {
        for (j, v) in mat.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

/// Parse a header-free numeric CSV matrix; every row must be equally long.
pub fn matrix_from_csv(text: &str) -> Result<Mat> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0usize;
        for cell in line.split(',') {
            let v: f64 = cell
                .trim()
                .parse()
                .with_context(|| format!("matrix CSV line {}: bad number {cell:?}", lineno + 1))?;
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => bail!(
                "matrix CSV line {} has {count} columns, expected {c}",
                lineno + 1
            ),
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| anyhow!("matrix CSV is empty"))?;
    Ok(Mat::from_vec(rows, cols, data))
}

/// Write a matrix CSV with a round-trip check.
pub fn write_matrix_csv(path: &Path, mat: &Mat) -> Result<()> {
    let text = matrix_to_csv(mat);
    let back = matrix_from_csv(&text)?;
    if back.rows() != mat.rows() || back.cols() != mat.cols() || back.data() != mat.data() {
        bail!("matrix CSV round-trip mismatch");
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Read a matrix CSV from `path`.
pub fn read_matrix_csv(path: &Path) -> Result<Mat> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    matrix_from_csv(&text)
}

/// A transport plan with enough geometry to extract maps from it later:
/// the JSON artifact written by `sinkhorn --bench ... --out` and read by
/// `extract --plan`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanFile {
    pub manifold: String,
    pub epsilon: f64,
    pub row_marginal: Vec<f64>,
    pub target_weights: Vec<f64>,
    /// Target atoms in flat ambient coordinates.
    pub target_atoms: Vec<Vec<f64>>,
    /// Row-major plan entries.
    pub matrix: Vec<Vec<f64>>,
}

impl PlanFile {
    pub fn from_plan(plan: &GibbsPlan) -> Self {
        let m = plan.matrix();
        PlanFile {
            manifold: plan.col_support().kind().tag().to_string(),
            epsilon: plan.epsilon(),
            row_marginal: plan.row_marginal().to_vec(),
            target_weights: plan.col_support().weights().to_vec(),
            target_atoms: plan
                .col_support()
                .atoms()
                .iter()
                .map(|p| p.to_flat())
                .collect(),
            matrix: (0..m.rows()).map(|i| m.row(i).to_vec()).collect(),
        }
    }

    /// Rebuild the validated plan (projects atoms, re-checks marginals).
    pub fn into_plan(self) -> Result<GibbsPlan> {
        let kind = ManifoldKind::from_tag(&self.manifold)
            .ok_or_else(|| anyhow!("unknown manifold tag {:?}", self.manifold))?;
        let atoms = self
            .target_atoms
            .iter()
            .enumerate()
            .map(|(j, raw)| {
                ernot::geometry::project(kind, raw)
                    .map_err(|e| anyhow!("target atom {j}: {e}"))
            })
            .collect::<Result<Vec<_>>>()?;
        let target = DiscreteMeasure::new(atoms, self.target_weights)
            .map_err(|e| anyhow!("target support: {e}"))?;
        let rows = self.matrix.len();
        if rows == 0 {
            bail!("plan matrix is empty");
        }
        let cols = self.matrix[0].len();
        let mut data = Vec::with_capacity(rows * cols);
        for (i, row) in self.matrix.iter().enumerate() {
            if row.len() != cols {
                bail!("plan row {i} has {} entries, expected {cols}", row.len());
            }
            data.extend_from_slice(row);
        }
        let mat = Mat::from_vec(rows, cols, data);
        GibbsPlan::new(mat, self.row_marginal, target, self.epsilon)
            .map_err(|e| anyhow!("plan validation: {e}"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).context("serializing plan JSON")?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_rows_round_trip_exactly() {
        let rows = vec![
            BenchCsvRow {
                benchmark: "s2".into(),
                seed: 7,
                method: "ernot".into(),
                manifold: "s2".into(),
                n: 200,
                m: 200,
                epsilon: 0.123456789012345e-2,
                plan_kl: f64::MIN_POSITIVE,
                conditional_w1: 1.0 / 3.0,
                map_l2: 2.0_f64.sqrt(),
                endpoint_error: 0.0,
            },
            BenchCsvRow {
                benchmark: "h2".into(),
                seed: u64::MAX,
                method: "tangent_space".into(),
                manifold: "h2".into(),
                n: 3,
                m: 5,
                epsilon: 1e308,
                plan_kl: 4.9e-324,
                conditional_w1: 0.1 + 0.2,
                map_l2: 1.0,
                endpoint_error: 1e-17,
            },
        ];
        let text = rows_to_csv(&rows).unwrap();
        let back: Vec<BenchCsvRow> = rows_from_csv(&text).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn scaling_rows_round_trip_exactly() {
        let rows = vec![
            ScalingCsvRow {
                manifold: "s2".into(),
                n: 4096,
                method: "neural".into(),
                seconds: 24.125,
                bytes: 11_534_336,
                feasible: true,
            },
            ScalingCsvRow {
                manifold: "spd3".into(),
                n: 32768,
                method: "sinkhorn".into(),
                seconds: 0.0,
                bytes: 17_179_869_184,
                feasible: false,
            },
        ];
        let text = rows_to_csv(&rows).unwrap();
        let back: Vec<ScalingCsvRow> = rows_from_csv(&text).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn matrix_csv_round_trips_and_rejects_ragged_input() {
        let m = Mat::from_vec(2, 3, vec![1.0, 0.5, -2.25e-8, 3.0, 1e300, 0.1 + 0.2]);
        let text = matrix_to_csv(&m);
        let back = matrix_from_csv(&text).unwrap();
        assert_eq!(m.data(), back.data());
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("").is_err());
    }
}
