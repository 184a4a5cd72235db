//! Dataset containers, file I/O and synthetic generators.
//!
//! A dataset is a directory with `manifest.json`, one data file per view
//! (raw little-endian f64, column-major, or CSV), and an optional
//! `labels.txt` with one integer per line.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use crate::topology::{FactorSet, TopologyGraph};

pub const LABELS_FILE: &str = "labels.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewEncoding {
    /// Raw little-endian f64, column-major.
    F64le,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ViewEntry {
    file: String,
    rows: usize,
    cols: usize,
    encoding: ViewEncoding,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetManifest {
    name: String,
    k: usize,
    /// Sample count shared by every view.
    i: usize,
    /// View count.
    v: usize,
    views: Vec<ViewEntry>,
}

/// Feature matrices (features x samples) for each view, plus optional
/// ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    pub k: usize,
    pub views: Vec<DMatrix<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    pub fn n_samples(&self) -> usize {
        self.views.first().map_or(0, |x| x.ncols())
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::InvalidArgument("dataset has no views".into()));
        }
        let samples = self.n_samples();
        for (v, x) in self.views.iter().enumerate() {
            if x.ncols() != samples {
                return Err(Error::ShapeMismatch(format!(
                    "view {v} has {} samples, expected {samples}",
                    x.ncols()
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != samples {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {samples} samples",
                    labels.len()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= self.k) {
                return Err(Error::LabelRange(format!(
                    "label {bad} outside [0, {})",
                    self.k
                )));
            }
        }
        Ok(())
    }
}

fn write_matrix_f64le<W: Write>(m: &DMatrix<f64>, w: &mut W) -> Result<()> {
    for &x in m.as_slice() {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn read_matrix_f64le<R: Read>(rows: usize, cols: usize, r: &mut R) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(r.read_f64::<LittleEndian>()?);
    }
    Ok(DMatrix::from_vec(rows, cols, data))
}

fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, w: &mut W) -> Result<()> {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.17e}", m[(r, c)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn read_matrix_csv(rows: usize, cols: usize, text: &str) -> Result<DMatrix<f64>> {
    let mut data = vec![0.0; rows * cols];
    let mut row_count = 0;
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        row_count += 1;
        if r >= rows {
            return Err(Error::ShapeMismatch(format!(
                "csv has more than {rows} rows"
            )));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::ShapeMismatch(format!(
                "csv row {r} has {} fields, expected {cols}",
                fields.len()
            )));
        }
        for (c, field) in fields.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|e| {
                Error::Malformed(format!("csv value '{field}' at ({r},{c}): {e}"))
            })?;
            data[r + c * rows] = value;
        }
    }
    if row_count != rows {
        return Err(Error::ShapeMismatch(format!(
            "csv has {row_count} rows, expected {rows}"
        )));
    }
    Ok(DMatrix::from_vec(rows, cols, data))
}

/// Writes a dataset directory: manifest, per-view files, labels.
pub fn save_dataset(
    ds: &MultiViewDataset,
    dir: impl AsRef<Path>,
    encoding: ViewEncoding,
) -> Result<()> {
    ds.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (v, x) in ds.views.iter().enumerate() {
        let ext = match encoding {
            ViewEncoding::F64le => "bin",
            ViewEncoding::Csv => "csv",
        };
        let file = format!("view_{v}.{ext}");
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(&file))?);
        match encoding {
            ViewEncoding::F64le => write_matrix_f64le(x, &mut w)?,
            ViewEncoding::Csv => write_matrix_csv(x, &mut w)?,
        }
        entries.push(ViewEntry {
            file,
            rows: x.nrows(),
            cols: x.ncols(),
            encoding,
        });
    }
    let manifest = DatasetManifest {
        name: ds.name.clone(),
        k: ds.k,
        i: ds.n_samples(),
        v: ds.n_views(),
        views: entries,
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    if let Some(labels) = &ds.labels {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        std::fs::write(dir.join(LABELS_FILE), text)?;
    }
    Ok(())
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let dir = dir.as_ref();
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))
        .map_err(|e| Error::ManifestParse(format!("cannot read manifest: {e}")))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::ManifestParse(format!("bad manifest: {e}")))?;
    if manifest.views.len() != manifest.v {
        return Err(Error::ManifestParse(format!(
            "manifest lists {} views but declares v = {}",
            manifest.views.len(),
            manifest.v
        )));
    }
    let mut views = Vec::with_capacity(manifest.views.len());
    for entry in &manifest.views {
        if entry.cols != manifest.i {
            return Err(Error::ShapeMismatch(format!(
                "view '{}' declares {} columns, manifest samples = {}",
                entry.file, entry.cols, manifest.i
            )));
        }
        let path = dir.join(&entry.file);
        let m = match entry.encoding {
            ViewEncoding::F64le => {
                let bytes = std::fs::metadata(&path)?.len() as usize;
                if bytes != entry.rows * entry.cols * 8 {
                    return Err(Error::ShapeMismatch(format!(
                        "view '{}' is {} bytes, expected {}",
                        entry.file,
                        bytes,
                        entry.rows * entry.cols * 8
                    )));
                }
                let mut r = std::io::BufReader::new(std::fs::File::open(&path)?);
                read_matrix_f64le(entry.rows, entry.cols, &mut r)?
            }
            ViewEncoding::Csv => {
                let text = std::fs::read_to_string(&path)?;
                read_matrix_csv(entry.rows, entry.cols, &text)?
            }
        };
        views.push(m);
    }
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        let file = std::io::BufReader::new(std::fs::File::open(&labels_path)?);
        let mut labels = Vec::new();
        for line in file.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let l: usize = trimmed
                .parse()
                .map_err(|e| Error::Malformed(format!("bad label '{trimmed}': {e}")))?;
            labels.push(l);
        }
        Some(labels)
    } else {
        None
    };
    let ds = MultiViewDataset {
        name: manifest.name,
        k: manifest.k,
        views,
        labels,
    };
    ds.validate()?;
    Ok(ds)
}

/// Parameters of the synthetic multi-view generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub per_cluster: usize,
    pub views: usize,
    pub subspace_dim: usize,
    pub noise_sigma: f64,
    /// Per-view feature dimensions; when absent every view gets
    /// `k * subspace_dim + 2 * subspace_dim`.
    pub feature_dims: Option<Vec<usize>>,
    pub seed: u64,
}

/// Random orthonormal basis via Gram-Schmidt on Gaussian columns.
fn random_basis(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    let qr = raw.qr();
    let q = qr.q();
    q.columns(0, cols).into_owned()
}

/// Union-of-subspaces data: per view, one random orthonormal basis per
/// cluster; samples are basis times Gaussian coefficients plus noise.
/// Samples are ordered cluster-major and labels attached.
pub fn gen_synthetic_multiview(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    if spec.k == 0 || spec.per_cluster == 0 || spec.views == 0 || spec.subspace_dim == 0 {
        return Err(Error::InvalidArgument(
            "k, per_cluster, views and subspace_dim must be positive".into(),
        ));
    }
    let default_dim = spec.k * spec.subspace_dim + 2 * spec.subspace_dim;
    let dims: Vec<usize> = match &spec.feature_dims {
        Some(d) => {
            if d.len() != spec.views {
                return Err(Error::InvalidArgument(format!(
                    "{} feature dims for {} views",
                    d.len(),
                    spec.views
                )));
            }
            d.clone()
        }
        None => vec![default_dim; spec.views],
    };
    if let Some(&bad) = dims.iter().find(|&&c| c < spec.subspace_dim) {
        return Err(Error::InvalidArgument(format!(
            "subspace_dim {} exceeds feature dim {bad}",
            spec.subspace_dim
        )));
    }
    let samples = spec.k * spec.per_cluster;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut views = Vec::with_capacity(spec.views);
    for &c_v in &dims {
        let bases: Vec<DMatrix<f64>> = (0..spec.k)
            .map(|_| random_basis(c_v, spec.subspace_dim, &mut rng))
            .collect();
        let mut x = DMatrix::zeros(c_v, samples);
        for cluster in 0..spec.k {
            for s in 0..spec.per_cluster {
                let col = cluster * spec.per_cluster + s;
                let coeff = DMatrix::from_fn(spec.subspace_dim, 1, |_, _| {
                    rng.sample::<f64, _>(StandardNormal)
                });
                let mut sample = &bases[cluster] * coeff;
                for r in 0..c_v {
                    sample[(r, 0)] += spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                }
                x.set_column(col, &sample.column(0));
            }
        }
        views.push(x);
    }
    let labels = (0..samples).map(|s| s / spec.per_cluster).collect();
    let ds = MultiViewDataset {
        name: format!("synthetic-k{}-s{}", spec.k, spec.seed),
        k: spec.k,
        views,
        labels: Some(labels),
    };
    ds.validate()?;
    Ok(ds)
}

/// Random network with standard-normal factor entries and its contraction;
/// the oracle pair for recovery tests.
pub fn gen_planted_network(topo: &TopologyGraph, seed: u64) -> Result<(DenseTensor, FactorSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = FactorSet::random(topo.clone(), &mut rng);
    let tensor = factors.contract()?;
    Ok((tensor, factors))
}

/// Smooth synthetic RGB image as an (height, width, 3) tensor in [0, 1]:
/// a seeded mixture of low-frequency waves and Gaussian bumps, compressible
/// by low-rank methods the way photographs are.
pub fn gen_smooth_image(height: usize, width: usize, seed: u64) -> Result<DenseTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_waves = 6;
    let waves: Vec<(f64, f64, f64, f64)> = (0..n_waves)
        .map(|_| {
            (
                rng.random_range(0.5..3.0),  // fy
                rng.random_range(0.5..3.0),  // fx
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.2..1.0),  // amplitude
            )
        })
        .collect();
    let channel_mix: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.2..1.0),
                rng.random_range(0.2..1.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut t = DenseTensor::zeros(vec![height, width, 3])?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in 0..3 {
        let (gain, warp, shift) = channel_mix[c];
        for w in 0..width {
            for h in 0..height {
                let y = h as f64 / height as f64;
                let x = w as f64 / width as f64;
                let mut value = 0.0;
                for &(fy, fx, phase, amp) in &waves {
                    value += amp
                        * (std::f64::consts::TAU * (fy * y * warp + fx * x) + phase + shift)
                            .sin();
                }
                let value = gain * value;
                lo = lo.min(value);
                hi = hi.max(value);
                t.set(&[h, w, c], value);
            }
        }
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let data: Vec<f64> = t.data().iter().map(|&v| (v - lo) / span).collect();
    DenseTensor::new(vec![height, width, 3], data)
}

/// Reads a P6 (8-bit binary) PPM into an (height, width, 3) tensor scaled
/// to [0, 1].
fn read_ppm(bytes: &[u8]) -> Result<DenseTensor> {
    struct Cursor<'a> {
        bytes: &'a [u8],
        pos: usize,
    }
    impl<'a> Cursor<'a> {
        fn token(&mut self) -> Result<&'a [u8]> {
            // Skip whitespace and comment lines.
            loop {
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = self.pos;
            while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(Error::Malformed("truncated ppm header".into()));
            }
            Ok(&self.bytes[start..self.pos])
        }
        fn number(&mut self) -> Result<usize> {
            let tok = self.token()?;
            std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Malformed("bad number in ppm header".into()))
        }
    }
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token()?;
    if magic != b"P6" {
        return Err(Error::UnsupportedFormat(
            "only binary P6 ppm images are supported".into(),
        ));
    }
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "only 8-bit ppm supported, maxval {maxval}"
        )));
    }
    cur.pos += 1; // single whitespace after maxval
    let need = width * height * 3;
    let pixel_data = &bytes[cur.pos..];
    if pixel_data.len() < need {
        return Err(Error::Malformed(format!(
            "ppm pixel data truncated: {} of {need} bytes",
            pixel_data.len()
        )));
    }
    let mut t = DenseTensor::zeros(vec![height, width, 3])?;
    for h in 0..height {
        for w in 0..width {
            for c in 0..3 {
                let byte = pixel_data[(h * width + w) * 3 + c];
                t.set(&[h, w, c], byte as f64 / 255.0);
            }
        }
    }
    Ok(t)
}

/// Loads an image tensor from a raw tensor file or a P6 PPM, optionally
/// reshaping it (PPM values are scaled to [0, 1]; raw tensors load as
/// stored).
pub fn load_image_tensor(
    path: impl AsRef<Path>,
    reshape_to: Option<&[usize]>,
) -> Result<DenseTensor> {
    let bytes = std::fs::read(path)?;
    let t = if bytes.starts_with(crate::tensor::TENSOR_MAGIC) {
        DenseTensor::read_from(&mut bytes.as_slice())?
    } else if bytes.starts_with(b"P6") {
        read_ppm(&bytes)?
    } else {
        return Err(Error::UnsupportedFormat(
            "expected a raw tensor file or a P6 ppm image".into(),
        ));
    };
    match reshape_to {
        Some(shape) => t.reshape(shape.to_vec()),
        None => Ok(t),
    }
}
