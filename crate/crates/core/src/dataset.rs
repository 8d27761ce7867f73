//! Regression datasets: LIBSVM/CSV ingestion, a seeded synthetic generator,
//! and column standardization.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{col_norms_sq, OpCounter, SparseColumnMatrix};

/// Design matrix plus response. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: SparseColumnMatrix,
    y: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: SparseColumnMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "response has {} entries but X has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        Ok(Dataset {
            x,
            y,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.ncols() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} columns",
                names.len(),
                self.x.ncols()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn x(&self) -> &SparseColumnMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn into_parts(self) -> (SparseColumnMatrix, Vec<f64>) {
        (self.x, self.y)
    }
}

/// Parses LIBSVM/SVMLight text: `<label> <idx>:<val> ...` with 1-based,
/// strictly increasing indices. `#` starts a comment; `qid:` tokens are
/// ignored. `num_features` fixes `p` (must cover every index seen).
pub fn parse_libsvm<R: BufRead>(reader: R, num_features: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid label '{label_tok}'"),
        })?;
        let mut row = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("malformed token '{tok}', expected <index>:<value>"),
            })?;
            if idx_s == "qid" {
                continue;
            }
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid feature index '{idx_s}'"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid feature value '{val_s}'"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based; found 0".into(),
                });
            }
            if idx <= prev {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature index {idx} does not increase (previous {prev})"),
                });
            }
            if let Some(p) = num_features {
                if idx > p {
                    return Err(Error::Dimension(format!(
                        "line {lineno}: feature index {idx} exceeds --num-features {p}"
                    )));
                }
            }
            prev = idx;
            max_index = max_index.max(idx);
            if val != 0.0 {
                row.push((idx - 1, val));
            }
        }
        labels.push(label);
        rows.push(row);
    }

    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = num_features.unwrap_or(max_index);
    let x = SparseColumnMatrix::from_rows(p, &rows)?;
    Dataset::new(x, labels)
}

/// Writes LIBSVM text. Values use shortest round-trip formatting, so
/// re-parsing reproduces the dataset exactly.
pub fn write_libsvm<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    for (row, label) in ds.x.to_rows().iter().zip(&ds.y) {
        write!(out, "{label}")?;
        for &(j, v) in row {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parses CSV with a header row; the last column is the response.
pub fn parse_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "CSV needs at least one feature column and a response column".into(),
        });
    }
    let p = headers.len() - 1;
    let names: Vec<String> = headers.iter().take(p).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let mut row = Vec::new();
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid number '{field}' in column {}", j + 1),
            })?;
            if j == p {
                y.push(v);
            } else if v != 0.0 {
                row.push((j, v));
            }
        }
        rows.push(row);
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let x = SparseColumnMatrix::from_rows(p, &rows)?;
    Dataset::new(x, y)?.with_feature_names(names)
}

/// Parameters of the synthetic linear model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m_train: usize,
    pub m_test: usize,
    pub p: usize,
    pub n_informative: usize,
    pub noise_sd: f64,
    pub coef_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_informative > self.p {
            return Err(Error::Contract(format!(
                "n_informative {} exceeds p {}",
                self.n_informative, self.p
            )));
        }
        if self.m_train == 0 || self.m_test == 0 || self.p == 0 {
            return Err(Error::Contract("m_train, m_test and p must be >= 1".into()));
        }
        if !(self.noise_sd >= 0.0) || !(self.coef_scale > 0.0) {
            return Err(Error::Contract(
                "noise_sd must be >= 0 and coef_scale > 0".into(),
            ));
        }
        Ok(())
    }
}

pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
    pub true_coef: Vec<f64>,
}

/// Dense Gaussian design, `n_informative` coefficients drawn from
/// `coef_scale * U(0, 1]` on uniformly chosen features, additive Gaussian
/// noise. ChaCha8 stream seeded from `spec.seed`: coefficients first, then
/// training rows, then test rows.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut true_coef = vec![0.0; spec.p];
    let mut support = sample(&mut rng, spec.p, spec.n_informative).into_vec();
    support.sort_unstable();
    for j in support {
        true_coef[j] = spec.coef_scale * (1.0 - rng.random::<f64>());
    }
    let train = draw_rows(&mut rng, spec.m_train, &true_coef, spec.noise_sd)?;
    let test = draw_rows(&mut rng, spec.m_test, &true_coef, spec.noise_sd)?;
    Ok(SyntheticData {
        train,
        test,
        true_coef,
    })
}

fn draw_rows(rng: &mut ChaCha8Rng, m: usize, coef: &[f64], noise_sd: f64) -> Result<Dataset> {
    let p = coef.len();
    let mut columns = vec![vec![0.0; m]; p];
    let mut y = vec![0.0; m];
    for (r, yr) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, col) in columns.iter_mut().enumerate() {
            let v: f64 = rng.sample(StandardNormal);
            col[r] = v;
            acc += v * coef[j];
        }
        let noise: f64 = rng.sample(StandardNormal);
        *yr = acc + noise_sd * noise;
    }
    Dataset::new(SparseColumnMatrix::from_dense_columns(m, &columns), y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizeMode {
    /// Scale columns to unit norm and center `y`; keeps sparsity.
    UnitNormColumns,
    /// Center every column, then scale to unit norm. Densifies the matrix.
    CenterAndUnitNorm,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationReport {
    pub mode: StandardizeMode,
    pub y_mean: f64,
    /// Zero unless columns were centered.
    pub column_means: Vec<f64>,
    /// Norms after centering, before scaling.
    pub column_norms: Vec<f64>,
    /// Columns with zero norm; left untouched.
    pub zero_columns: Vec<usize>,
}

impl StandardizationReport {
    /// Applies the recorded (training) transform to another dataset, e.g.
    /// a test split.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_features() != self.column_norms.len() {
            return Err(Error::Dimension(format!(
                "dataset has {} features, transform expects {}",
                ds.n_features(),
                self.column_norms.len()
            )));
        }
        if self.mode == StandardizeMode::None {
            return Ok(ds.clone());
        }
        let x = transform_columns(ds.x(), &self.column_means, &self.column_norms);
        let y = ds.y().iter().map(|v| v - self.y_mean).collect();
        let mut out = Dataset::new(x, y)?;
        out.feature_names = ds.feature_names.clone();
        Ok(out)
    }
}

fn transform_columns(x: &SparseColumnMatrix, means: &[f64], norms: &[f64]) -> SparseColumnMatrix {
    let m = x.nrows();
    let columns = x
        .columns()
        .enumerate()
        .map(|(j, c)| {
            let scale = if norms[j] > 0.0 { 1.0 / norms[j] } else { 1.0 };
            if means[j] == 0.0 {
                c.iter().map(|(r, v)| (r, v * scale)).collect()
            } else {
                // transient dense column: O(m) extra memory per column
                let mut dense = vec![-means[j]; m];
                for (r, v) in c.iter() {
                    dense[r] += v;
                }
                dense
                    .into_iter()
                    .enumerate()
                    .map(|(r, v)| (r, v * scale))
                    .collect()
            }
        })
        .collect();
    SparseColumnMatrix::from_columns(m, columns).expect("transform preserves structure")
}

/// Standardizes a dataset. `center_and_unit_norm` materializes one dense
/// column at a time (O(m) scratch) and produces a dense matrix, so it costs
/// O(m p) memory on sparse inputs.
pub fn standardize(ds: &Dataset, mode: StandardizeMode) -> (Dataset, StandardizationReport) {
    let m = ds.n_samples();
    let p = ds.n_features();
    let mut column_means = vec![0.0; p];
    if mode == StandardizeMode::CenterAndUnitNorm {
        for (j, c) in ds.x().columns().enumerate() {
            column_means[j] = c.values.iter().sum::<f64>() / m as f64;
        }
    }
    let column_norms: Vec<f64> = if mode == StandardizeMode::CenterAndUnitNorm {
        ds.x()
            .columns()
            .enumerate()
            .map(|(j, c)| {
                let mu = column_means[j];
                // entries off the support contribute (0 - mu)^2 each
                let stored: f64 = c.values.iter().map(|v| (v - mu) * (v - mu)).sum();
                let implicit = (m - c.nnz()) as f64 * mu * mu;
                (stored + implicit).sqrt()
            })
            .collect()
    } else {
        col_norms_sq(ds.x(), &mut OpCounter::new())
            .into_iter()
            .map(f64::sqrt)
            .collect()
    };
    let zero_columns = column_norms
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0.0)
        .map(|(j, _)| j)
        .collect();
    let y_mean = if mode == StandardizeMode::None {
        0.0
    } else {
        ds.y().iter().sum::<f64>() / m as f64
    };
    let report = StandardizationReport {
        mode,
        y_mean,
        column_means,
        column_norms,
        zero_columns,
    };
    let out = report.apply(ds).expect("dimensions match by construction");
    (out, report)
}
