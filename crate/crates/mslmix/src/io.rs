//! File ingestion and serialization: delimited data files, parameter files,
//! fit reports, study configurations, and contour-grid export.
//!
//! All files are deterministic given their inputs. Floating-point values are
//! written in Rust's shortest round-trip decimal form, so report → file →
//! report is the identity bit-for-bit. Component labels are 1-based in every
//! file; library indices stay 0-based.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::em::{EmConfig, FitResult};
use crate::error::{Error, Result};
use crate::inference::parameter_names;
use crate::linalg::{vech_indices, ScatterMatrix};
use crate::mixture::MixtureParams;
use crate::sim::{SimStudySummary, StudyConfig};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A parsed data file: the selected numeric columns plus provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Names of the selected columns, in selection order.
    pub names: Vec<String>,
    pub data: DataMatrix,
    /// Path the data was read from.
    pub source: String,
}

/// Reads a delimited text file with a mandatory header row and extracts the
/// named columns as numbers.
///
/// Comma is the delimiter; LF and CRLF line endings parse identically, and
/// columns not selected (for example a label column) are ignored. Parse
/// failures name the data row (1-based, header excluded) and column.
pub fn read_dataset(path: &Path, columns: &[String]) -> Result<Dataset> {
    if columns.is_empty() {
        return Err(Error::Data("at least one column must be selected".into()));
    }
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let mut indices = Vec::with_capacity(columns.len());
    for name in columns {
        let hits: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| *h == name)
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [i] => indices.push(*i),
            [] => {
                return Err(Error::Data(format!(
                    "{}: no column named {name:?}; available: {}",
                    path.display(),
                    headers.iter().collect::<Vec<_>>().join(", ")
                )))
            }
            _ => {
                return Err(Error::Data(format!(
                    "{}: column name {name:?} is ambiguous ({} occurrences)",
                    path.display(),
                    hits.len()
                )))
            }
        }
    }
    let mut rows = Vec::new();
    for (j, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(indices.len());
        for (&i, name) in indices.iter().zip(columns) {
            let field = record.get(i).ok_or_else(|| {
                Error::Data(format!(
                    "{}: row {} has no column {name:?}",
                    path.display(),
                    j + 1
                ))
            })?;
            let value: f64 = field.parse().map_err(|_| {
                Error::Data(format!(
                    "{}: row {}, column {name:?}: cannot parse {field:?} as a number",
                    path.display(),
                    j + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Data(format!(
                    "{}: row {}, column {name:?}: non-finite value",
                    path.display(),
                    j + 1
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    let data = DataMatrix::from_vecs(rows)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(Dataset {
        names: columns.to_vec(),
        data,
        source: path.display().to_string(),
    })
}

/// One component's parameters as stored in files: location, full symmetric
/// scale matrix (rows), skewness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBlock {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
}

/// The parameter block shared by parameter files and fit reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub weights: Vec<f64>,
    pub components: Vec<ComponentBlock>,
}

impl ParamsFile {
    pub fn from_mixture(theta: &MixtureParams) -> Self {
        let components = (0..theta.g())
            .map(|i| {
                let c = theta.component(i);
                let p = c.mu().len();
                let m = c.sigma().matrix();
                ComponentBlock {
                    mu: c.mu().as_slice().to_vec(),
                    sigma: (0..p)
                        .map(|r| (0..p).map(|col| m[(r, col)]).collect())
                        .collect(),
                    gamma: c.gamma().as_slice().to_vec(),
                }
            })
            .collect();
        ParamsFile {
            weights: theta.weights().to_vec(),
            components,
        }
    }

    /// Validates the block and builds the mixture. All violations are data
    /// errors naming the offending field with 0-based array indices.
    pub fn to_mixture(&self) -> Result<MixtureParams> {
        if self.components.is_empty() {
            return Err(Error::Data("components: must not be empty".into()));
        }
        if self.weights.len() != self.components.len() {
            return Err(Error::Data(format!(
                "weights: {} entries but {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        let p = self.components[0].mu.len();
        let mut comps = Vec::with_capacity(self.components.len());
        for (i, block) in self.components.iter().enumerate() {
            if block.mu.is_empty() || block.mu.len() != p {
                return Err(Error::Data(format!(
                    "components[{i}].mu: expected {p} entries, got {}",
                    block.mu.len()
                )));
            }
            if block.gamma.len() != p {
                return Err(Error::Data(format!(
                    "components[{i}].gamma: expected {p} entries, got {}",
                    block.gamma.len()
                )));
            }
            if block.sigma.len() != p || block.sigma.iter().any(|row| row.len() != p) {
                return Err(Error::Data(format!(
                    "components[{i}].sigma: expected a {p}x{p} matrix"
                )));
            }
            let sigma = DMatrix::from_fn(p, p, |r, c| block.sigma[r][c]);
            let sigma = ScatterMatrix::new(sigma)
                .map_err(|e| Error::Data(format!("components[{i}].sigma: {e}")))?;
            let comp = crate::msl::MslParams::new(
                DVector::from_row_slice(&block.mu),
                sigma,
                DVector::from_row_slice(&block.gamma),
            )
            .map_err(|e| Error::Data(format!("components[{i}]: {e}")))?;
            comps.push(comp);
        }
        MixtureParams::new(self.weights.clone(), comps)
            .map_err(|e| Error::Data(format!("weights: {e}")))
    }
}

/// Standard errors as reported: one value per free parameter, in the
/// documented packed order, plus the information matrix's reciprocal
/// condition number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeBlock {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub rcond: f64,
}

/// A complete fit, serialized. Labels are 1-based; `data_min`/`data_max`
/// record the per-column data range so contour export needs no re-read of
/// the data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub source: String,
    pub columns: Vec<String>,
    pub n: usize,
    pub p: usize,
    pub config: EmConfig,
    pub params: ParamsFile,
    pub converged: bool,
    pub iterations: usize,
    /// Which restart produced the reported fit (0-based).
    pub restart_index: usize,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub aic: f64,
    pub bic: f64,
    pub se: Option<SeBlock>,
    pub labels: Vec<usize>,
    pub data_min: Vec<f64>,
    pub data_max: Vec<f64>,
}

impl FitReport {
    pub fn new(
        dataset: &Dataset,
        config: &EmConfig,
        fit: &FitResult,
        se: Option<SeBlock>,
    ) -> Self {
        let p = dataset.data.dim();
        let mut data_min = vec![f64::INFINITY; p];
        let mut data_max = vec![f64::NEG_INFINITY; p];
        for row in dataset.data.iter() {
            for k in 0..p {
                data_min[k] = data_min[k].min(row[k]);
                data_max[k] = data_max[k].max(row[k]);
            }
        }
        FitReport {
            source: dataset.source.clone(),
            columns: dataset.names.clone(),
            n: dataset.data.n(),
            p,
            config: config.clone(),
            params: ParamsFile::from_mixture(&fit.theta),
            converged: fit.converged,
            iterations: fit.iterations,
            restart_index: fit.restart_index,
            loglik: fit.final_loglik(),
            loglik_trace: fit.loglik_trace.clone(),
            aic: fit.aic,
            bic: fit.bic,
            se,
            labels: fit.labels.iter().map(|&l| l + 1).collect(),
            data_min,
            data_max,
        }
    }
}

/// Builds the SE block from inference output, naming entries in packed order.
pub fn se_block(values: Vec<f64>, rcond: f64, g: usize, p: usize) -> SeBlock {
    SeBlock {
        names: parameter_names(g, p),
        values,
        rcond,
    }
}

pub fn write_report(path: &Path, report: &FitReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_report(path: &Path) -> Result<FitReport> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Reads mixture parameters from either a bare parameter file or a full fit
/// report (whose `params` block is then used).
pub fn read_params(path: &Path) -> Result<MixtureParams> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let block = if value.get("params").is_some() {
        value.get("params").unwrap().clone()
    } else {
        value
    };
    let params: ParamsFile = serde_json::from_value(block)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    params.to_mixture()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    writer.write_all(b"\n").map_err(|e| io_err(path, e))?;
    writer.flush().map_err(|e| io_err(path, e))
}

/// Writes observations as a delimited file, optionally with a trailing
/// 1-based `label` column.
pub fn write_data_csv(
    path: &Path,
    data: &DataMatrix,
    names: &[String],
    labels: Option<&[usize]>,
) -> Result<()> {
    assert_eq!(names.len(), data.dim(), "one name per column");
    if let Some(l) = labels {
        assert_eq!(l.len(), data.n(), "one label per row");
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = names.to_vec();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for (j, row) in data.iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        if let Some(l) = labels {
            rec.push(format!("{}", l[j] + 1));
        }
        w.write_record(&rec)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Study configuration as stored on disk. The generating parameters use the
/// shared parameter-block schema; `em` may be omitted (defaults apply, with
/// the component count taken from the generator) or given partially.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyFileConfig {
    pub theta_true: ParamsFile,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub em: Option<EmConfig>,
}

impl StudyFileConfig {
    pub fn resolve(&self) -> Result<StudyConfig> {
        let theta_true = self
            .theta_true
            .to_mixture()
            .map_err(|e| Error::Data(format!("theta_true.{e}")))?;
        let em = self
            .em
            .clone()
            .unwrap_or_else(|| EmConfig::new(theta_true.g()));
        let config = StudyConfig {
            theta_true,
            sample_sizes: self.sample_sizes.clone(),
            replicates: self.replicates,
            seed: self.seed,
            em,
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn read_study_config(path: &Path) -> Result<StudyConfig> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let parsed: StudyFileConfig = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parsed.resolve()
}

/// Writes the study summary as a table with one row per scalar parameter:
/// (n, component, parameter, true, mean, distance).
///
/// The distance cell carries the parameter block's mean Euclidean distance,
/// repeated for each coordinate of the block; for mixing weights it carries
/// the per-weight mean squared error instead.
pub fn write_study_summary_csv(path: &Path, summary: &SimStudySummary) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(["n", "component", "parameter", "true", "mean", "distance"])
        .map_err(fail)?;
    for size in &summary.sizes {
        let n = size.n.to_string();
        for (i, _) in size.weights_true.iter().enumerate() {
            w.write_record([
                n.clone(),
                (i + 1).to_string(),
                "pi".into(),
                format!("{}", size.weights_true[i]),
                format!("{}", size.weights_mean[i]),
                format!("{}", size.weights_mse[i]),
            ])
            .map_err(fail)?;
        }
        for (i, comp) in size.components.iter().enumerate() {
            let component = (i + 1).to_string();
            let p = comp.mu_true.len();
            for k in 0..p {
                w.write_record([
                    n.clone(),
                    component.clone(),
                    format!("mu[{}]", k + 1),
                    format!("{}", comp.mu_true[k]),
                    format!("{}", comp.mu_mean[k]),
                    format!("{}", comp.mu_distance),
                ])
                .map_err(fail)?;
            }
            for (idx, (r, c)) in vech_indices(p).into_iter().enumerate() {
                w.write_record([
                    n.clone(),
                    component.clone(),
                    format!("sigma[{},{}]", r + 1, c + 1),
                    format!("{}", comp.sigma_true[idx]),
                    format!("{}", comp.sigma_mean[idx]),
                    format!("{}", comp.sigma_distance),
                ])
                .map_err(fail)?;
            }
            for k in 0..p {
                w.write_record([
                    n.clone(),
                    component.clone(),
                    format!("gamma[{}]", k + 1),
                    format!("{}", comp.gamma_true[k]),
                    format!("{}", comp.gamma_mean[k]),
                    format!("{}", comp.gamma_distance),
                ])
                .map_err(fail)?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Evaluates the mixture density on a grid×grid lattice over the data
/// bounding box, each axis expanded on both sides by `margin` times its
/// range. Returns (x, y, density) rows, x varying slowest. Requires p = 2.
pub fn contour_rows(
    theta: &MixtureParams,
    data_min: &[f64],
    data_max: &[f64],
    grid: usize,
    margin: f64,
) -> Result<Vec<[f64; 3]>> {
    if theta.dim() != 2 || data_min.len() != 2 || data_max.len() != 2 {
        return Err(Error::Data(format!(
            "contour export requires 2 columns, got {}",
            theta.dim()
        )));
    }
    if grid < 2 {
        return Err(Error::Data("grid must be at least 2".into()));
    }
    if !(margin >= 0.0) {
        return Err(Error::Data("margin must be non-negative".into()));
    }
    let axis = |k: usize| -> (f64, f64) {
        let range = data_max[k] - data_min[k];
        // A constant column still gets a usable axis.
        let unit = if range > 0.0 { range } else { 1.0 };
        (data_min[k] - margin * unit, data_max[k] + margin * unit)
    };
    let (x0, x1) = axis(0);
    let (y0, y1) = axis(1);
    let step = (grid - 1) as f64;
    let mut rows = Vec::with_capacity(grid * grid);
    for ix in 0..grid {
        let x = x0 + (x1 - x0) * ix as f64 / step;
        for iy in 0..grid {
            let y = y0 + (y1 - y0) * iy as f64 / step;
            let density = theta.logpdf(&DVector::from_row_slice(&[x, y])).exp();
            rows.push([x, y, density]);
        }
    }
    Ok(rows)
}

pub fn write_contour_csv(path: &Path, rows: &[[f64; 3]]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["x", "y", "density"])
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v}")))
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em;
    use crate::sim::simulate_mixture;
    use approx::assert_relative_eq;
    use std::io::Write as _;

    fn design() -> MixtureParams {
        let comp = |mu: &[f64], sigma: &[f64], gamma: &[f64]| {
            crate::msl::MslParams::new(
                DVector::from_row_slice(mu),
                ScatterMatrix::new(DMatrix::from_row_slice(2, 2, sigma)).unwrap(),
                DVector::from_row_slice(gamma),
            )
            .unwrap()
        };
        MixtureParams::new(
            vec![0.6, 0.4],
            vec![
                comp(&[2.0, 2.0], &[1.5, 0.0, 0.0, 1.5], &[1.0, 1.0]),
                comp(&[-2.0, -2.0], &[1.5, 0.0, 0.0, 1.5], &[-1.0, -1.0]),
            ],
        )
        .unwrap()
    }

    fn write_tmp(content: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn dataset_parses_lf_and_crlf_identically_and_ignores_extra_columns() {
        let lf = write_tmp(b"a,b,label\n1.0,2.0,1\n3.5,-4.25,2\n");
        let crlf = write_tmp(b"a,b,label\r\n1.0,2.0,1\r\n3.5,-4.25,2\r\n");
        let cols = vec!["b".to_string(), "a".to_string()];
        let d1 = read_dataset(lf.path(), &cols).unwrap();
        let d2 = read_dataset(crlf.path(), &cols).unwrap();
        assert_eq!(d1.names, cols);
        assert_eq!(d1.data.n(), 2);
        // Selection order, not file order.
        assert_eq!(d1.data.row(1)[0], -4.25);
        assert_eq!(d1.data.row(1)[1], 3.5);
        for j in 0..2 {
            assert_eq!(d1.data.row(j), d2.data.row(j));
        }
    }

    #[test]
    fn dataset_errors_name_the_column_and_row() {
        let f = write_tmp(b"a,b\n1.0,2.0\n1.5,oops\n");
        let err = read_dataset(f.path(), &[String::from("b")]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("\"b\""), "{msg}");

        let err = read_dataset(f.path(), &[String::from("c")]).unwrap_err();
        assert!(err.to_string().contains("no column named \"c\""));

        let dup = write_tmp(b"a,a\n1.0,2.0\n");
        let err = read_dataset(dup.path(), &[String::from("a")]).unwrap_err();
        assert!(err.to_string().contains("ambiguous"));
    }

    #[test]
    fn params_round_trip_is_exact() {
        let theta = design();
        let block = ParamsFile::from_mixture(&theta);
        let back = block.to_mixture().unwrap();
        assert_eq!(back.weights(), theta.weights());
        for i in 0..2 {
            assert_eq!(back.component(i).mu(), theta.component(i).mu());
            assert_eq!(
                back.component(i).sigma().matrix(),
                theta.component(i).sigma().matrix()
            );
            assert_eq!(back.component(i).gamma(), theta.component(i).gamma());
        }
    }

    #[test]
    fn params_validation_names_the_field() {
        let mut bad = ParamsFile::from_mixture(&design());
        bad.components[1].sigma = vec![vec![1.0, 0.0]];
        let msg = bad.to_mixture().unwrap_err().to_string();
        assert!(msg.contains("components[1].sigma"), "{msg}");

        let mut bad = ParamsFile::from_mixture(&design());
        bad.weights = vec![0.9, 0.9];
        let msg = bad.to_mixture().unwrap_err().to_string();
        assert!(msg.contains("weights"), "{msg}");

        let mut bad = ParamsFile::from_mixture(&design());
        bad.components[0].sigma[0][1] = 5.0;
        let msg = bad.to_mixture().unwrap_err().to_string();
        assert!(msg.contains("components[0].sigma"), "{msg}");
    }

    #[test]
    fn report_round_trips_bit_for_bit() {
        let theta = design();
        let (data, _) = simulate_mixture(&theta, 60, 5);
        let dataset = Dataset {
            names: vec!["x1".into(), "x2".into()],
            data,
            source: "memory".into(),
        };
        let mut config = EmConfig::new(2);
        config.restarts = 2;
        let fit = em::fit(&dataset.data, &config).unwrap();
        let se = Some(se_block(vec![0.1; 15], 1e-3, 2, 2));
        let report = FitReport::new(&dataset, &config, &fit, se);
        assert!(report.labels.iter().all(|&l| l == 1 || l == 2));

        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_report(tmp.path(), &report).unwrap();
        let back = read_report(tmp.path()).unwrap();
        assert_eq!(back, report);

        // Writing the reread report again is byte-identical.
        let tmp2 = tempfile::NamedTempFile::new().unwrap();
        write_report(tmp2.path(), &back).unwrap();
        assert_eq!(
            std::fs::read(tmp.path()).unwrap(),
            std::fs::read(tmp2.path()).unwrap()
        );
    }

    #[test]
    fn read_params_accepts_bare_block_and_full_report() {
        let theta = design();
        let block = ParamsFile::from_mixture(&theta);
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_json(tmp.path(), &block).unwrap();
        let from_block = read_params(tmp.path()).unwrap();
        assert_eq!(from_block.weights(), theta.weights());

        let (data, _) = simulate_mixture(&theta, 60, 5);
        let dataset = Dataset {
            names: vec!["x1".into(), "x2".into()],
            data,
            source: "memory".into(),
        };
        let mut config = EmConfig::new(2);
        config.restarts = 1;
        let fit = em::fit(&dataset.data, &config).unwrap();
        let report = FitReport::new(&dataset, &config, &fit, None);
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_report(tmp.path(), &report).unwrap();
        let from_report = read_params(tmp.path()).unwrap();
        assert_eq!(from_report.weights(), fit.theta.weights());
    }

    #[test]
    fn study_config_defaults_apply() {
        let block = ParamsFile::from_mixture(&design());
        let json = serde_json::json!({
            "theta_true": block,
            "sample_sizes": [500, 1000],
            "replicates": 3,
        });
        let f = write_tmp(serde_json::to_string(&json).unwrap().as_bytes());
        let config = read_study_config(f.path()).unwrap();
        assert_eq!(config.seed, 0);
        assert_eq!(config.em.g, 2);
        assert_eq!(config.em.restarts, 40);
        assert_relative_eq!(config.em.tol, 1e-6);

        // Partial em section: unspecified fields take defaults.
        let json = serde_json::json!({
            "theta_true": block,
            "sample_sizes": [500],
            "replicates": 1,
            "seed": 7,
            "em": {"g": 2, "restarts": 4},
        });
        let f = write_tmp(serde_json::to_string(&json).unwrap().as_bytes());
        let config = read_study_config(f.path()).unwrap();
        assert_eq!((config.seed, config.em.restarts), (7, 4));
        assert_eq!(config.em.max_iter, 2000);

        // g disagreeing with the generator is rejected.
        let json = serde_json::json!({
            "theta_true": block,
            "sample_sizes": [500],
            "replicates": 1,
            "em": {"g": 3},
        });
        let f = write_tmp(serde_json::to_string(&json).unwrap().as_bytes());
        assert!(read_study_config(f.path()).is_err());
    }

    #[test]
    fn summary_table_has_one_row_per_scalar_parameter() {
        let config = StudyConfig {
            theta_true: design(),
            sample_sizes: vec![250],
            replicates: 1,
            seed: 3,
            em: {
                let mut c = EmConfig::new(2);
                c.restarts = 2;
                c
            },
        };
        let summary = crate::sim::run_study(&config).unwrap();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_study_summary_csv(tmp.path(), &summary).unwrap();
        let text = std::fs::read_to_string(tmp.path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,component,parameter,true,mean,distance");
        // 2 weights + 2 components × (2 mu + 3 sigma + 2 gamma) scalars.
        assert_eq!(lines.len(), 1 + 2 + 2 * 7);
        assert!(lines[1].starts_with("250,1,pi,0.6,"));
        // Bracketed names carry a comma, so the writer quotes them.
        assert!(lines.iter().any(|l| l.contains("\"sigma[2,1]\",0,")));
    }

    #[test]
    fn contour_grid_matches_pointwise_density_and_normalizes() {
        let theta = design();
        let rows = contour_rows(&theta, &[-2.0, -2.0], &[2.0, 2.0], 2, 0.5).unwrap();
        assert_eq!(rows.len(), 4);
        // Corners of the expanded box, x slowest.
        assert_eq!(rows[0][0], -4.0);
        assert_eq!(rows[0][1], -4.0);
        assert_eq!(rows[3][0], 4.0);
        assert_eq!(rows[3][1], 4.0);
        for row in &rows {
            let expect = theta
                .logpdf(&DVector::from_row_slice(&[row[0], row[1]]))
                .exp();
            assert_eq!(row[2], expect);
        }

        // Riemann sum over a wide box captures nearly all mass.
        let grid = 80;
        let rows = contour_rows(&theta, &[-8.0, -8.0], &[11.0, 11.0], grid, 1.0).unwrap();
        let step = (11.0 - (-8.0) + 2.0 * 19.0) / (grid as f64 - 1.0);
        let total: f64 = rows.iter().map(|r| r[2]).sum::<f64>() * step * step;
        assert!((total - 1.0).abs() < 0.1, "Riemann total {total}");

        assert!(contour_rows(&theta, &[0.0], &[1.0], 2, 0.1).is_err());
        assert!(contour_rows(&theta, &[0.0, 0.0], &[1.0, 1.0], 1, 0.1).is_err());
    }
}
