//! Bundled fixtures and CSV ingestion.
//!
//! CSV dialect: comma separated, `.` decimal point, UTF-8, with an optional
//! single header row that is recognised by containing a non-numeric field.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{covariance_from_data, CovarianceMatrix, DataMatrix, MatrixKind};

/// A named matrix with variable labels.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub matrix: CovarianceMatrix,
    pub variable_names: Vec<String>,
    pub provenance: String,
}

impl Fixture {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Fixture keys accepted by [`fixture`].
pub const FIXTURE_KEYS: &[&str] = &["zou", "zou-analytic", "pitprops"];

/// Looks up a bundled fixture by key. `synthetic:<p>:<seed>` yields a random
/// correlation matrix from [`synthetic_correlation`].
pub fn fixture(key: &str) -> Result<Fixture> {
    match key {
        "zou" => Ok(zou_table1()),
        "zou-analytic" => Ok(zou_analytic()),
        "pitprops" => Ok(pitprops()),
        other => {
            let mut parts = other.split(':');
            if parts.next() == Some("synthetic") {
                let p = parts.next().and_then(|s| s.parse::<usize>().ok());
                let seed = parts.next().map_or(Some(0), |s| s.parse::<u64>().ok());
                if let (Some(p), Some(seed), None) = (p, seed, parts.next()) {
                    if p >= 1 {
                        return Ok(synthetic_correlation(p, seed));
                    }
                }
            }
            Err(Error::UnknownFixture(other.to_string()))
        }
    }
}

fn numbered_names(prefix: &str, p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("{prefix}{i}")).collect()
}

/// Zou's synthetic correlations as tabulated, to three decimals.
///
/// This matrix is indefinite (smallest eigenvalue about -0.028), so it is
/// returned as a plain matrix; [`zou_table1`] is the usable fixture.
pub fn zou_table1_printed() -> DMatrix<f64> {
    zou_blocks(0.948)
}

fn zou_blocks(r_910: f64) -> DMatrix<f64> {
    let block = |i: usize| match i {
        0..=3 => 0,
        4..=7 => 1,
        _ => 2,
    };
    DMatrix::from_fn(10, 10, |i, j| {
        if i == j {
            return 1.0;
        }
        match (block(i), block(j)) {
            (0, 0) => 0.996,
            (1, 1) => 0.997,
            (2, 2) => r_910,
            (0, 1) | (1, 0) => 0.0,
            (0, 2) | (2, 0) => -0.3,
            _ => 0.95,
        }
    })
}

/// Zou's synthetic correlation matrix (10 variables in three blocks).
///
/// All entries are the tabulated ones except `corr(x9, x10)`, which is set
/// to 0.996, the value implied by the generating model (see
/// [`zou_analytic`]); with the tabulated 0.948 the matrix is not positive
/// semidefinite.
pub fn zou_table1() -> Fixture {
    Fixture {
        name: "zou".into(),
        matrix: CovarianceMatrix::correlation(zou_blocks(0.996))
            .expect("zou table is a valid correlation matrix"),
        variable_names: numbered_names("x", 10),
        provenance: "Zou, Hastie & Tibshirani (2006) synthetic example, tabulated correlations \
                     with corr(x9, x10) from the generating model"
            .into(),
    }
}

/// Population covariance of Zou's generating model:
/// `V1 ~ N(0,290)`, `V2 ~ N(0,300)`, `V3 = -0.3 V1 + 0.925 V2 + ε`,
/// `X1..4 = V1 + ε_i`, `X5..8 = V2 + ε_i`, `X9,10 = V3 + ε_i`, unit-variance noise.
///
/// The implied `corr(X9, X10)` is about 0.996, not the tabulated 0.948.
pub fn zou_analytic() -> Fixture {
    let p = 10;
    let var_v1 = 290.0;
    let var_v2 = 300.0;
    let var_v3 = 0.09 * var_v1 + 0.925_f64.powi(2) * var_v2 + 1.0;
    let cov_v1_v3 = -0.3 * var_v1;
    let cov_v2_v3 = 0.925 * var_v2;
    let block = |i: usize| match i {
        0..=3 => 0,
        4..=7 => 1,
        _ => 2,
    };
    let latent = [
        [var_v1, 0.0, cov_v1_v3],
        [0.0, var_v2, cov_v2_v3],
        [cov_v1_v3, cov_v2_v3, var_v3],
    ];
    let m = DMatrix::from_fn(p, p, |i, j| {
        let base = latent[block(i)][block(j)];
        if i == j {
            base + 1.0
        } else {
            base
        }
    });
    Fixture {
        name: "zou-analytic".into(),
        matrix: CovarianceMatrix::covariance(m).expect("analytic covariance is PSD"),
        variable_names: numbered_names("x", p),
        provenance: "Zou, Hastie & Tibshirani (2006) generating model, population covariance"
            .into(),
    }
}

const PITPROPS: [[f64; 13]; 13] = [
    [1.000, 0.954, 0.364, 0.342, -0.129, 0.313, 0.496, 0.424, 0.592, 0.545, 0.084, -0.019, 0.134],
    [0.954, 1.000, 0.297, 0.284, -0.118, 0.291, 0.503, 0.419, 0.648, 0.569, 0.076, -0.036, 0.144],
    [0.364, 0.297, 1.000, 0.882, -0.148, 0.153, -0.029, -0.054, 0.125, -0.081, 0.162, 0.220, 0.126],
    [0.342, 0.284, 0.882, 1.000, 0.220, 0.381, 0.174, -0.059, 0.137, -0.014, 0.097, 0.169, 0.015],
    [-0.129, -0.118, -0.148, 0.220, 1.000, 0.364, 0.296, 0.004, -0.039, 0.037, -0.091, -0.145, -0.208],
    [0.313, 0.291, 0.153, 0.381, 0.364, 1.000, 0.813, 0.090, 0.211, 0.274, -0.036, 0.024, -0.329],
    [0.496, 0.503, -0.029, 0.174, 0.296, 0.813, 1.000, 0.372, 0.465, 0.679, -0.113, -0.232, -0.424],
    [0.424, 0.419, -0.054, -0.059, 0.004, 0.090, 0.372, 1.000, 0.482, 0.557, 0.061, -0.357, -0.202],
    [0.592, 0.648, 0.125, 0.137, -0.039, 0.211, 0.465, 0.482, 1.000, 0.526, 0.085, -0.127, -0.076],
    [0.545, 0.569, -0.081, -0.014, 0.037, 0.274, 0.679, 0.557, 0.526, 1.000, -0.319, -0.368, -0.291],
    [0.084, 0.076, 0.162, 0.097, -0.091, -0.036, -0.113, 0.061, 0.085, -0.319, 1.000, 0.029, 0.007],
    [-0.019, -0.036, 0.220, 0.169, -0.145, 0.024, -0.232, -0.357, -0.127, -0.368, 0.029, 1.000, 0.184],
    [0.134, 0.144, 0.126, 0.015, -0.208, -0.329, -0.424, -0.202, -0.076, -0.291, 0.007, 0.184, 1.000],
];

const PITPROPS_NAMES: [&str; 13] = [
    "topdiam", "length", "moist", "testsg", "ovensg", "ringtop", "ringbut", "bowmax", "bowdist",
    "whorls", "clear", "knots", "diaknot",
];

/// Jeffers' (1967) correlation matrix of thirteen pitprop measurements.
pub fn pitprops() -> Fixture {
    let m = DMatrix::from_fn(13, 13, |i, j| PITPROPS[i][j]);
    Fixture {
        name: "pitprops".into(),
        matrix: CovarianceMatrix::correlation(m).expect("pitprops is a valid correlation matrix"),
        variable_names: PITPROPS_NAMES.iter().map(|s| s.to_string()).collect(),
        provenance: "Jeffers, J. (1967). Two case studies in the application of principal \
                     component analysis. Applied Statistics 16, 225-236"
            .into(),
    }
}

/// Random full-rank correlation matrix: standardized Gram matrix of a
/// `p × (p + 10)` Gaussian factor, seeded.
pub fn synthetic_correlation(p: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = p + 10;
    let g: DMatrix<f64> = DMatrix::from_fn(p, k, |_, _| StandardNormal.sample(&mut rng));
    let cov = CovarianceMatrix::covariance(&g * g.transpose() / k as f64)
        .expect("gram matrix is PSD");
    Fixture {
        name: format!("synthetic:{p}:{seed}"),
        matrix: cov.to_correlation().expect("gaussian columns have variance"),
        variable_names: numbered_names("v", p),
        provenance: format!("seeded random correlation matrix (p = {p}, seed = {seed})"),
    }
}

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn parse_table(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        if k == 0 && parsed.iter().any(|r| r.is_err()) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::Parse {
                    line,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                });
            }
        }
        width = Some(record.len());
        let mut row = Vec::with_capacity(record.len());
        for (c, (value, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match value {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::Parse {
                        line,
                        column: c + 1,
                        message: format!("`{raw}` is not a finite number"),
                    })
                }
            }
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn read_text(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    Ok(text)
}

/// Parses a square covariance or correlation matrix from CSV text.
/// Returns the matrix and the header labels, if any.
pub fn parse_matrix_csv(text: &str, kind: MatrixKind) -> Result<(CovarianceMatrix, Option<Vec<String>>)> {
    let table = parse_table(text)?;
    let p = table.rows.len();
    if p == 0 {
        return Err(Error::EmptyData);
    }
    for (k, row) in table.rows.iter().enumerate() {
        if row.len() != p {
            return Err(Error::Parse {
                line: k + 1 + usize::from(table.header.is_some()),
                column: row.len().min(p) + 1,
                message: format!("matrix must be square ({p} rows, {} columns)", row.len()),
            });
        }
    }
    let m = DMatrix::from_fn(p, p, |i, j| table.rows[i][j]);
    Ok((CovarianceMatrix::new(m, kind)?, table.header))
}

/// Parses an `n × p` data table from CSV text.
pub fn parse_data_csv(text: &str) -> Result<DataMatrix> {
    let table = parse_table(text)?;
    let n = table.rows.len();
    let p = table.rows.first().map_or(0, Vec::len);
    if n == 0 || p == 0 {
        return Err(Error::EmptyData);
    }
    let values = DMatrix::from_fn(n, p, |i, j| table.rows[i][j]);
    DataMatrix::new(values, table.header)
}

/// Reads a square matrix CSV file.
pub fn read_matrix_csv(path: impl AsRef<Path>, kind: MatrixKind) -> Result<CovarianceMatrix> {
    Ok(parse_matrix_csv(&read_text(path.as_ref())?, kind)?.0)
}

/// Reads an observations CSV file and forms its covariance (or correlation,
/// when `standardize`) matrix.
pub fn read_data_csv(path: impl AsRef<Path>, standardize: bool) -> Result<CovarianceMatrix> {
    let data = parse_data_csv(&read_text(path.as_ref())?)?;
    covariance_from_data(&data, standardize)
}

/// Writes a matrix as CSV with a header row. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_matrix_csv<W: Write>(out: W, m: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    writer.write_record(names).map_err(io)?;
    for i in 0..m.nrows() {
        writer
            .write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}
