//! JSON model files and CSV tables.

use std::io::Write;
use std::path::Path;

use lsmm::generator::CanonicalForm;
use lsmm::{Mat, PolyMap, ReducedModel, Row, Vector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

/// Complex matrix as separate real and imaginary row-major parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Polynomial output map in the graded monomial basis of the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFile {
    pub nvars: usize,
    pub degree: usize,
    pub coeffs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Delta")]
    pub delta: Option<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "T")]
    pub t: Option<ComplexMatrix>,
    /// Output map of a nonlinear model; `H` is then its linear part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<PolyFile>,
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("matrix rows have unequal lengths".into());
    }
    Ok(Mat::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flatten().copied(),
    ))
}

impl ModelFile {
    pub fn new(model: &ReducedModel, form: Option<&CanonicalForm>) -> Self {
        ModelFile {
            f: rows_of(&model.f),
            g: model.g.iter().copied().collect(),
            h: model.h.iter().copied().collect(),
            p: rows_of(&model.p),
            delta: model.delta.as_ref().map(|d| d.iter().copied().collect()),
            q: model.q.as_ref().map(rows_of),
            t: form.map(|f| ComplexMatrix {
                re: rows_of(&f.t.map(|z| z.re)),
                im: rows_of(&f.t.map(|z| z.im)),
            }),
            kappa: None,
        }
    }

    pub fn with_kappa(mut self, kappa: &PolyMap) -> Self {
        self.kappa = Some(PolyFile {
            nvars: kappa.nvars(),
            degree: kappa.degree(),
            coeffs: rows_of(&kappa.coeffs),
        });
        self
    }

    pub fn model(&self) -> Result<ReducedModel, CliError> {
        let bad = |e: String| CliError::Config(format!("model file: {e}"));
        let f = mat_from_rows(&self.f).map_err(bad)?;
        let r = f.nrows();
        if !f.is_square() || self.g.len() != r || self.h.len() != r {
            return Err(bad(format!(
                "F {}x{}, G {}, H {}",
                f.nrows(),
                f.ncols(),
                self.g.len(),
                self.h.len()
            )));
        }
        Ok(ReducedModel {
            f,
            g: Vector::from_vec(self.g.clone()),
            h: Row::from_vec(self.h.clone()),
            p: mat_from_rows(&self.p).map_err(bad)?,
            delta: self.delta.clone().map(Vector::from_vec),
            q: self
                .q
                .as_deref()
                .map(mat_from_rows)
                .transpose()
                .map_err(bad)?,
            spectrum_clash: false,
        })
    }

    pub fn kappa(&self) -> Result<Option<PolyMap>, CliError> {
        let Some(k) = &self.kappa else {
            return Ok(None);
        };
        let mut map = PolyMap::zeros(k.nvars, 1, k.degree)?;
        let coeffs = mat_from_rows(&k.coeffs).map_err(CliError::Config)?;
        if coeffs.shape() != map.coeffs.shape() {
            return Err(CliError::Config(format!(
                "kappa has {} coefficients, expected {}",
                coeffs.ncols(),
                map.coeffs.ncols()
            )));
        }
        map.coeffs = coeffs;
        Ok(Some(map))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot encode JSON: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Comma-separated table with a header row and 17 significant digits.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}
