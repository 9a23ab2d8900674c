//! File formats: binary sample matrices, JSON models, CSV histories.

use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::barycentric::{Axis, BarycentricModel, Chart, HistoryEntry, SampleGrid};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, PNorm, C64};
use crate::pqr::{Communication, Diagnostics, ExtensionSet, Merge};
use crate::qr_aaa::{ColumnScaling, TolMode};

pub const MATRIX_MAGIC: &[u8; 4] = b"SVAA";
pub const MATRIX_VERSION: u32 = 1;
pub const MODEL_FORMAT: &str = "ratbary-model";
pub const MODEL_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Samples `F(Z)` together with their grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub grid: SampleGrid,
    pub matrix: CMatrix,
    pub labels: Option<Vec<String>>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated matrix file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length does not fit in memory".into()))
    }

    fn complex(&mut self, n: usize) -> Result<Vec<C64>> {
        let bytes = n
            .checked_mul(16)
            .ok_or_else(|| Error::Format("block size overflows".into()))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    }
}

fn put_complex(out: &mut Vec<u8>, values: &[C64]) {
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

impl MatrixFile {
    pub fn new(grid: SampleGrid, matrix: CMatrix) -> Result<Self> {
        if grid.len() != matrix.rows() {
            return Err(Error::Parameter(format!(
                "grid has {} points but the matrix has {} rows",
                grid.len(),
                matrix.rows()
            )));
        }
        Ok(Self {
            grid,
            matrix,
            labels: None,
        })
    }

    /// Layout: magic, version (u32), grid block, matrix block, label block.
    /// Integers are little-endian u64 unless noted, complex values are
    /// `(re, im)` pairs of little-endian doubles.
    ///
    /// The grid block is the point count, an axis tag byte (0 none,
    /// 1 real, 2 imaginary; a tagged block carries the segment ends `a, b`)
    /// and the points. The matrix block is `|Z|`, `N` and the entries in
    /// column-major order. The label block is a flag byte, then for each
    /// column a u32 byte length and UTF-8 text.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (rows, cols) = self.matrix.shape();
        let mut out = Vec::with_capacity(64 + 16 * (rows * cols + rows));
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid.len() as u64).to_le_bytes());
        match self.grid.chart() {
            None => out.push(0),
            Some(c) => {
                out.push(match c.axis {
                    Axis::Real => 1,
                    Axis::Imag => 2,
                });
                out.extend_from_slice(&c.a.to_le_bytes());
                out.extend_from_slice(&c.b.to_le_bytes());
            }
        }
        put_complex(&mut out, self.grid.points());
        out.extend_from_slice(&(rows as u64).to_le_bytes());
        out.extend_from_slice(&(cols as u64).to_le_bytes());
        put_complex(&mut out, self.matrix.as_slice());
        match &self.labels {
            None => out.push(0),
            Some(labels) => {
                out.push(1);
                for l in labels {
                    out.extend_from_slice(&(l.len() as u32).to_le_bytes());
                    out.extend_from_slice(l.as_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MATRIX_MAGIC {
            return Err(Error::Format("not a matrix file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != MATRIX_VERSION {
            return Err(Error::Format(format!("unsupported matrix file version {version}")));
        }
        let count = r.len()?;
        let chart = match r.u8()? {
            0 => None,
            t @ (1 | 2) => {
                let axis = if t == 1 { Axis::Real } else { Axis::Imag };
                let (a, b) = (r.f64()?, r.f64()?);
                Some(Chart::new(a, b, axis).map_err(|e| Error::Format(e.to_string()))?)
            }
            t => return Err(Error::Format(format!("unknown axis tag {t}"))),
        };
        let points = r.complex(count)?;
        let grid = match chart {
            None => SampleGrid::new(points)?,
            Some(c) => SampleGrid::with_chart(points, c)?,
        };
        let rows = r.len()?;
        let cols = r.len()?;
        if rows != count {
            return Err(Error::Format(format!(
                "matrix has {rows} rows but the grid has {count} points"
            )));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
        let data = r.complex(n)?;
        let matrix = CMatrix::from_col_major(rows, cols, data)?;
        let labels = match r.u8()? {
            0 => None,
            1 => {
                let mut v = Vec::with_capacity(cols);
                for _ in 0..cols {
                    let len = r.u32()? as usize;
                    let s = std::str::from_utf8(r.take(len)?)
                        .map_err(|_| Error::Format("column label is not UTF-8".into()))?;
                    v.push(s.to_owned());
                }
                Some(v)
            }
            t => return Err(Error::Format(format!("bad label flag {t}"))),
        };
        if r.pos != buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the matrix payload",
                buf.len() - r.pos
            )));
        }
        Ok(Self { grid, matrix, labels })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}

/// Non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`, since
/// JSON has no literal for them.
pub(crate) mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                o => Err(serde::de::Error::custom(format!("not a number: {o}"))),
            },
        }
    }

    pub mod opt {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            x.map(W).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sv,
    Qr,
    Pqr,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sv" => Ok(Method::Sv),
            "qr" => Ok(Method::Qr),
            "pqr" => Ok(Method::Pqr),
            o => Err(Error::Parameter(format!("unknown method `{o}`"))),
        }
    }
}

/// One line of the residual history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub m: usize,
    #[serde(with = "float")]
    pub res_m: f64,
    pub argmax_index: Option<usize>,
    pub stage: String,
}

impl HistoryRow {
    pub fn from_entries(entries: &[HistoryEntry], stage: &str) -> Vec<HistoryRow> {
        entries
            .iter()
            .enumerate()
            .map(|(it, h)| HistoryRow {
                iteration: it,
                m: h.m,
                res_m: h.residual,
                argmax_index: h.index,
                stage: stage.to_owned(),
            })
            .collect()
    }
}

pub fn history_csv(rows: &[HistoryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "m", "res_m", "argmax_index", "stage"])?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.m.to_string(),
            format!("{:e}", r.res_m),
            r.argmax_index.map_or(String::new(), |i| i.to_string()),
            r.stage.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_history_csv(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).ok_or_else(|| Error::Format("short history row".into()));
        let bad = |_| Error::Format("malformed history row".into());
        let idx = field(3)?;
        rows.push(HistoryRow {
            iteration: field(0)?.parse().map_err(bad)?,
            m: field(1)?.parse().map_err(bad)?,
            res_m: field(2)?
                .parse()
                .map_err(|_| Error::Format("malformed residual".into()))?,
            argmax_index: if idx.is_empty() {
                None
            } else {
                Some(idx.parse().map_err(bad)?)
            },
            stage: field(4)?.to_owned(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshots {
    pub rows: usize,
    pub cols: usize,
    /// Column-major little-endian complex doubles.
    pub data: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub method: Method,
    #[serde(with = "float")]
    pub tol: f64,
    pub tol_mode: TolMode,
    pub p_norm: PNorm,
    pub seed: u64,
    pub partitions: usize,
    pub rank: Option<usize>,
    pub merge: Option<Merge>,
    pub extension: Option<ExtensionSet>,
    pub history: Vec<HistoryRow>,
    pub communication: Option<Communication>,
    pub diagnostics: Option<Diagnostics>,
}

/// A model as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub supports: Vec<[f64; 2]>,
    pub weights: Vec<[f64; 2]>,
    pub support_indices: Vec<usize>,
    pub snapshots: Snapshots,
    pub scaling: ColumnScaling,
    pub converged: bool,
    pub exhausted: bool,
    pub metadata: ModelMetadata,
}

fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn unpairs(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

impl ModelFile {
    pub fn new(model: &BarycentricModel, scaling: ColumnScaling, metadata: ModelMetadata) -> Result<Self> {
        if scaling.ncols() != model.ncols() {
            return Err(Error::Parameter(format!(
                "scaling has {} columns but the model has {}",
                scaling.ncols(),
                model.ncols()
            )));
        }
        let mut raw = Vec::with_capacity(16 * model.snapshots.as_slice().len());
        put_complex(&mut raw, model.snapshots.as_slice());
        Ok(Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            supports: pairs(&model.supports),
            weights: pairs(&model.weights),
            support_indices: model.support_indices.clone(),
            snapshots: Snapshots {
                rows: model.snapshots.rows(),
                cols: model.snapshots.cols(),
                data: B64.encode(raw),
            },
            scaling,
            converged: model.converged,
            exhausted: model.exhausted,
            metadata,
        })
    }

    /// Rebuilds the evaluable model, checking the stored invariants.
    pub fn model(&self) -> Result<BarycentricModel> {
        let raw = B64
            .decode(&self.snapshots.data)
            .map_err(|e| Error::Format(format!("snapshots are not base64: {e}")))?;
        let (rows, cols) = (self.snapshots.rows, self.snapshots.cols);
        if Some(raw.len()) != rows.checked_mul(cols).and_then(|n| n.checked_mul(16)) {
            return Err(Error::Format(format!(
                "snapshot payload has {} bytes, expected {rows}x{cols} complex values",
                raw.len()
            )));
        }
        let mut r = Reader { buf: &raw, pos: 0 };
        let snaps = CMatrix::from_col_major(rows, cols, r.complex(rows * cols)?)?;
        let weights = unpairs(&self.weights);
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Format(format!("weights have 2-norm {norm}, expected 1")));
        }
        let mut model = BarycentricModel::new(unpairs(&self.supports), weights, snaps, self.support_indices.clone())
            .map_err(|e| Error::Format(e.to_string()))?;
        model.converged = self.converged;
        model.exhausted = self.exhausted;
        model.history = self
            .metadata
            .history
            .iter()
            .map(|h| HistoryEntry {
                m: h.m,
                residual: h.res_m,
                index: h.argmax_index,
            })
            .collect();
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let file: ModelFile = serde_json::from_slice(buf)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        file.model()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MatrixFile {
        let grid = SampleGrid::segment(-2.0, 3.0, 7, Axis::Imag).unwrap();
        let m = CMatrix::from_fn(7, 3, |i, j| C64::new(i as f64 / 3.0, -(j as f64) * 0.1 + 1e-300));
        MatrixFile::new(grid, m).unwrap()
    }

    #[test]
    fn matrix_file_round_trip() {
        let mut f = sample();
        let b = f.to_bytes();
        assert_eq!(&b[..4], b"SVAA");
        let g = MatrixFile::from_bytes(&b).unwrap();
        assert_eq!(g, f);
        assert_eq!(g.to_bytes(), b);

        f.labels = Some(vec!["a".into(), "β".into(), String::new()]);
        let b = f.to_bytes();
        assert_eq!(MatrixFile::from_bytes(&b).unwrap(), f);
    }

    #[test]
    fn matrix_file_rejects_inconsistent_payloads() {
        let b = sample().to_bytes();
        assert!(MatrixFile::from_bytes(&b[..b.len() - 1]).is_err());
        let mut longer = b.clone();
        longer.push(0);
        assert!(MatrixFile::from_bytes(&longer).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(MatrixFile::from_bytes(&bad), Err(Error::Format(_))));
        // claim one more column than is stored
        let off = 4 + 4 + 8 + 1 + 16 + 7 * 16 + 8;
        let mut wide = b;
        wide[off] += 1;
        assert!(MatrixFile::from_bytes(&wide).is_err());
    }

    fn model_file() -> ModelFile {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut model = BarycentricModel::new(
            vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(s, 0.0), C64::new(-s, 0.0)],
            CMatrix::from_rows(&[vec![C64::new(-1.0, 0.1)], vec![C64::new(1.0, 1.0 / 3.0)]]).unwrap(),
            vec![0, 4],
        )
        .unwrap();
        model.history = vec![HistoryEntry {
            m: 2,
            residual: 1e-17,
            index: None,
        }];
        let meta = ModelMetadata {
            method: Method::Sv,
            tol: 1e-8,
            tol_mode: TolMode::Practical,
            p_norm: PNorm::Inf,
            seed: 3,
            partitions: 1,
            rank: None,
            merge: None,
            extension: None,
            history: HistoryRow::from_entries(&model.history, "final"),
            communication: None,
            diagnostics: Some(Diagnostics {
                node_polynomial_max: f64::INFINITY,
                b_bound: None,
                linearized_bound: Some(0.1),
                full_grid_rel_error: f64::NAN,
                full_grid_residual: 0.0,
            }),
        };
        ModelFile::new(
            &model,
            ColumnScaling {
                d: vec![1.0],
                zero_columns: vec![],
            },
            meta,
        )
        .unwrap()
    }

    #[test]
    fn model_file_round_trip_is_byte_exact() {
        let f = model_file();
        let b = f.to_bytes().unwrap();
        let g = ModelFile::from_bytes(&b).unwrap();
        assert_eq!(g.to_bytes().unwrap(), b);
        let m = g.model().unwrap();
        assert_eq!(m.snapshots[(1, 0)], C64::new(1.0, 1.0 / 3.0));
        assert!(g.metadata.diagnostics.unwrap().full_grid_rel_error.is_nan());
    }

    #[test]
    fn model_file_checks_weights_on_load() {
        let mut f = model_file();
        f.weights[0][0] *= 1.001;
        let b = serde_json::to_vec(&f).unwrap();
        assert!(matches!(ModelFile::from_bytes(&b), Err(Error::Format(_))));
    }

    #[test]
    fn history_csv_round_trip() {
        let rows = vec![
            HistoryRow {
                iteration: 0,
                m: 0,
                res_m: 0.1 + 0.2,
                argmax_index: Some(7),
                stage: "0".into(),
            },
            HistoryRow {
                iteration: 1,
                m: 1,
                res_m: 3e-300,
                argmax_index: None,
                stage: "final".into(),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        write_atomic(&p, &history_csv(&rows).unwrap()).unwrap();
        assert_eq!(read_history_csv(&p).unwrap(), rows);
    }
}
