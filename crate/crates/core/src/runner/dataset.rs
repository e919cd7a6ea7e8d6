//! Dataset ingestion: CSV matrices, directories of binary PGM images, and a
//! seeded generator for planted hierarchical mixtures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deep::LayerStack;
use crate::error::{Error, Result};
use crate::eval::LabelVector;
use crate::matrix::DenseMatrix;
use crate::shallow::SmoothingSpec;

/// Data matrix with samples as columns, plus optional labels and image geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub x: DenseMatrix,
    pub labels: Option<LabelVector>,
    /// `(height, width)` when columns are flattened images.
    pub image_shape: Option<(usize, usize)>,
}

impl DatasetBundle {
    pub fn new(
        x: DenseMatrix,
        labels: Option<LabelVector>,
        image_shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        if !x.is_nonnegative() {
            return Err(Error::Domain("data matrix has negative entries".into()));
        }
        if let Some(l) = &labels {
            if l.len() != x.cols() {
                return Err(Error::Domain(format!(
                    "{} labels for {} samples",
                    l.len(),
                    x.cols()
                )));
            }
        }
        if let Some((h, w)) = image_shape {
            if h * w != x.rows() {
                return Err(Error::Domain(format!(
                    "image shape {h}x{w} does not match {} features",
                    x.rows()
                )));
            }
        }
        Ok(Self {
            x,
            labels,
            image_shape,
        })
    }
}

/// Seeded planted mixture `X = Z₁S₁⋯Z_mS_mH_m + noise`.
///
/// Column `j` of `H_m` belongs to cluster `j mod k` (`k = r_m`): that row gets a
/// weight in `[0.5, 1.5)`, every other row `background · U[0, 1)`. Factor
/// entries are `U[0, 1)` and are zeroed with probability `sparsity`. Noise adds
/// `noise · mean(X) · U[0, 1)` to every entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub p: usize,
    pub n: usize,
    pub dims: Vec<usize>,
    pub theta: f64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub background: f64,
    #[serde(default)]
    pub sparsity: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(p: usize, n: usize, dims: Vec<usize>, theta: f64, seed: u64) -> Self {
        Self {
            p,
            n,
            dims,
            theta,
            noise: 0.0,
            background: 0.0,
            sparsity: 0.0,
            seed,
        }
    }

    pub fn clusters(&self) -> usize {
        self.dims.last().copied().unwrap_or(0)
    }
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Csv {
        matrix: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
    },
    Pgm {
        dir: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

pub fn load_dataset(source: &DatasetSource) -> Result<DatasetBundle> {
    match source {
        DatasetSource::Csv { matrix, labels } => {
            let x = read_csv_matrix(matrix)?;
            let labels = labels.as_deref().map(read_labels).transpose()?;
            DatasetBundle::new(x, labels, None)
        }
        DatasetSource::Pgm { dir, labels } => {
            let (x, shape) = read_pgm_dir(dir)?;
            let labels = labels.as_deref().map(read_labels).transpose()?;
            DatasetBundle::new(x, labels, Some(shape))
        }
        DatasetSource::Synthetic(spec) => Ok(generate_synthetic(spec)?.0),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Comma-separated, no header; rows are features, columns are samples.
pub fn read_csv_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| {
                    Error::format(path, format!("line {}: `{}`: {e}", lineno + 1, field.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::format(
                    path,
                    format!("line {} has {} fields, expected {}", lineno + 1, row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    let m = DenseMatrix::from_rows(&rows).map_err(|e| Error::format(path, e.to_string()))?;
    if !m.is_finite() {
        return Err(Error::Domain(format!("{}: non-finite values", path.display())));
    }
    if !m.is_nonnegative() {
        return Err(Error::Domain(format!("{}: negative values", path.display())));
    }
    Ok(m)
}

/// Writes with shortest round-trip float formatting.
pub fn write_csv_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:?}").expect("writing to a String");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One nonnegative integer per line.
pub fn read_labels(path: &Path) -> Result<LabelVector> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()
        .map(LabelVector::new)
}

pub fn write_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    let mut out = String::new();
    for l in labels.as_slice() {
        writeln!(out, "{l}").expect("writing to a String");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.pixels[row * self.width + col] = v;
    }
}

/// Binary P5 image with values scaled to `[0, 1]` by its maxval.
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let magic = next_token(&bytes, &mut pos);
    if magic.as_deref() != Some("P5") {
        return Err(Error::format(path, "not a binary PGM (P5)"));
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        *slot = next_token(&bytes, &mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format(path, format!("bad {name}")))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::format(path, "invalid PGM header values"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bpp;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::format(path, "truncated raster"))?;
    let values = if bpp == 1 {
        raster.iter().map(|&b| b as f64 / maxval as f64).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval as f64)
            .collect()
    };
    Ok(PgmImage {
        width,
        height,
        values,
    })
}

/// Writes binary P5 with maxval 255.
pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Every `*.pgm` in `dir`, in file-name order, one image per column. Each image
/// is flattened column-major, so pixel `(row, col)` lands at `col · height + row`.
pub fn read_pgm_dir(dir: &Path) -> Result<(DenseMatrix, (usize, usize))> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, "no .pgm files"));
    }
    let mut shape = None;
    let mut columns = Vec::with_capacity(files.len());
    for f in &files {
        let img = read_pgm(f)?;
        match shape {
            None => shape = Some((img.height, img.width)),
            Some(s) if s != (img.height, img.width) => {
                return Err(Error::format(
                    f,
                    format!(
                        "image is {}x{}, expected {}x{}",
                        img.height, img.width, s.0, s.1
                    ),
                ))
            }
            _ => {}
        }
        let mut col = Vec::with_capacity(img.values.len());
        for c in 0..img.width {
            for r in 0..img.height {
                col.push(img.values[r * img.width + c]);
            }
        }
        columns.push(col);
    }
    let (h, w) = shape.expect("at least one image");
    let n = columns.len();
    let x = DenseMatrix::from_fn(h * w, n, |i, j| columns[j][i]);
    Ok((x, (h, w)))
}

/// Generates the bundle and the planted factors it was built from.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(DatasetBundle, LayerStack)> {
    if spec.dims.is_empty() {
        return Err(Error::Config("synthetic generator needs at least one layer".into()));
    }
    if spec.p == 0 || spec.n == 0 || spec.dims.contains(&0) {
        return Err(Error::Config("synthetic dimensions must be positive".into()));
    }
    if !(0.0..1.0).contains(&spec.sparsity) || spec.noise < 0.0 || spec.background < 0.0 {
        return Err(Error::Config(
            "synthetic noise/background must be nonnegative and sparsity in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut z = Vec::with_capacity(spec.dims.len());
    let mut smoothing = Vec::with_capacity(spec.dims.len());
    let mut rows = spec.p;
    for &r in &spec.dims {
        let factor = DenseMatrix::from_fn(rows, r, |_, _| {
            let v: f64 = rng.random_range(0.0..1.0);
            if spec.sparsity > 0.0 && rng.random_range(0.0..1.0) < spec.sparsity {
                0.0
            } else {
                v
            }
        });
        z.push(factor);
        smoothing.push(SmoothingSpec::new(spec.theta, r).map_err(|e| Error::Config(e.to_string()))?);
        rows = r;
    }
    let k = spec.clusters();
    let labels: Vec<usize> = (0..spec.n).map(|j| j % k).collect();
    let h_top = DenseMatrix::from_fn(k, spec.n, |i, j| {
        if i == labels[j] {
            rng.random_range(0.5..1.5)
        } else if spec.background > 0.0 {
            spec.background * rng.random_range(0.0..1.0)
        } else {
            0.0
        }
    });
    let stack = LayerStack::new(z, smoothing, h_top)?;
    let clean = stack.reconstruct()?;
    let x = if spec.noise > 0.0 {
        let amp = spec.noise * clean.mean();
        let noise = DenseMatrix::from_fn(clean.rows(), clean.cols(), |_, _| {
            amp * rng.random_range(0.0..1.0)
        });
        clean.add(&noise)?
    } else {
        clean
    };
    let bundle = DatasetBundle::new(x, Some(LabelVector::new(labels)), None)?;
    Ok((bundle, stack))
}
