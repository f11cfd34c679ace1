//! CSV reading and writing. Numbers are written with 17 significant digits
//! so that every `f64` round-trips exactly.

use std::path::Path;

use fsir::metrics::RocCurve;
use fsir::{LabeledDataset, Matrix, Slicing};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Fsir(#[from] fsir::FsirError),
}

/// `f64` with 17 significant digits, `.` decimal point, no grouping.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Writes `header` then `rows`, creating parent directories.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush()?;
    Ok(())
}

/// A numeric table read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    /// Column-major: `columns[j][i]`.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|j| self.columns[j].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

pub fn read_table(path: &Path) -> Result<Table, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        for (j, field) in rec.iter().enumerate() {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|_| format_err(path, format!("row {}: `{field}` is not a number", line + 2)))?;
            columns[j].push(v);
        }
    }
    Ok(Table { header, columns })
}

/// Covariate matrix and response of a data file; all non-response,
/// non-excluded columns are covariates, in file order.
pub fn read_dataset(
    path: &Path,
    response: &str,
    exclude: &[&str],
) -> Result<(Matrix, Vec<f64>, Vec<String>), IoError> {
    let t = read_table(path)?;
    let y = t
        .column(response)
        .ok_or_else(|| format_err(path, format!("no response column `{response}`")))?
        .to_vec();
    let cov: Vec<usize> = (0..t.header.len())
        .filter(|&j| t.header[j] != response && !exclude.contains(&t.header[j].as_str()))
        .collect();
    if cov.is_empty() {
        return Err(format_err(path, "no covariate columns"));
    }
    let x = Matrix::from_fn(t.rows(), cov.len(), |i, j| t.columns[cov[j]][i]);
    let names = cov.iter().map(|&j| t.header[j].clone()).collect();
    Ok((x, y, names))
}

/// A 0/1 response becomes two classes, anything else is sliced into `h`.
pub fn to_labeled(x: Matrix, y: Vec<f64>, h: usize, slicing: &Slicing) -> Result<LabeledDataset, IoError> {
    if y.iter().all(|&v| v == 0.0 || v == 1.0) {
        Ok(LabeledDataset::from_binary(x, y)?)
    } else {
        Ok(LabeledDataset::from_continuous(x, y, h, slicing)?)
    }
}

/// Covariates `x1..xp` followed by `y`.
pub fn write_dataset(path: &Path, x: &Matrix, y: &[f64]) -> Result<(), IoError> {
    let mut header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..x.nrows())
        .map(|i| {
            let mut r: Vec<String> = x.row(i).iter().map(|&v| fmt_num(v)).collect();
            r.push(fmt_num(y[i]));
            r
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// One row per matrix row, columns named `{prefix}1..`.
pub fn write_matrix(path: &Path, m: &Matrix, prefix: &str) -> Result<(), IoError> {
    let header: Vec<String> = (1..=m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = m
        .row_iter()
        .map(|r| r.iter().map(|&v| fmt_num(v)).collect())
        .collect();
    write_rows(path, &header, &rows)
}

pub fn write_roc(path: &Path, roc: &RocCurve) -> Result<(), IoError> {
    let rows: Vec<Vec<String>> = roc.points.iter().map(|&(f, t)| vec![fmt_num(f), fmt_num(t)]).collect();
    write_rows(path, &["fpr", "tpr"], &rows)
}

pub fn read_roc(path: &Path) -> Result<RocCurve, IoError> {
    let t = read_table(path)?;
    let (Some(f), Some(tp)) = (t.column("fpr"), t.column("tpr")) else {
        return Err(format_err(path, "expected fpr and tpr columns"));
    };
    let points: Vec<(f64, f64)> = f.iter().copied().zip(tp.iter().copied()).collect();
    let auc = RocCurve::trapezoid(&points);
    Ok(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, f64::MIN_POSITIVE] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
        assert!(!fmt_num(1234567.0).contains(','));
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let x = Matrix::from_row_slice(3, 2, &[0.1, -2.5, 1.0 / 3.0, 4.0, 5.5, 6.25]);
        let y = vec![0.5, -1.25, 2.0];
        write_dataset(&path, &x, &y).unwrap();
        let (x2, y2, names) = read_dataset(&path, "y", &[]).unwrap();
        assert_eq!(x2, x);
        assert_eq!(y2, y);
        assert_eq!(names, vec!["x1", "x2"]);
        assert!(read_dataset(&path, "z", &[]).is_err());
    }

    #[test]
    fn roc_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roc.csv");
        let roc = fsir::metrics::roc_curve(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false]).unwrap();
        write_roc(&path, &roc).unwrap();
        let back = read_roc(&path).unwrap();
        assert_eq!(back, roc);
    }

    #[test]
    fn rejects_non_numeric() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x1,y\n1,abc\n").unwrap();
        assert!(read_table(&path).is_err());
    }
}
