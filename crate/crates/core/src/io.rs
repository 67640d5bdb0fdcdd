//! Text formats for scenes, matrices, fields, spectra and indicator maps.
//!
//! Floating point values are written with 17 significant digits, which
//! round-trips every `f64`. Matrix and grid indices are 0-based.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use faer::Mat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::directions::DirectionGrid;
use crate::error::{Error, Result};
use crate::forward::TotalField;
use crate::monotonicity::{EigCountReport, IndicatorMap, ShrinkResult};
use crate::operators::{CirclePoint, FarFieldMatrix};
use crate::scene::{Point, RasterGrid, Scene, Shape, ShapeKind};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name =
        path.file_name().ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io { path: path.to_path_buf(), source: e }
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_matrix(f: &FarFieldMatrix) -> String {
    let n = f.len();
    let mut s = String::with_capacity(64 * n * n);
    writeln!(s, "{n},{}", num(f.wavenumber)).unwrap();
    for l in 0..n {
        for m in 0..n {
            let v = f.matrix[(l, m)];
            writeln!(s, "{l},{m},{},{}", num(v.re), num(v.im)).unwrap();
        }
    }
    s
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, raw: &str, what: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| parse_err(path, line, format!("cannot parse {what} from {:?}", raw.trim())))
}

/// Parses the `N,k` header and `l,m,re,im` rows; every entry must appear exactly once.
pub fn parse_matrix(text: &str, path: &Path) -> Result<FarFieldMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty matrix file"))?;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 2 {
        return Err(parse_err(path, hline, "expected header \"N,k\""));
    }
    let n: usize = field(path, hline, parts[0], "N")?;
    let k: f64 = field(path, hline, parts[1], "k")?;
    let grid = DirectionGrid::new(n).map_err(|e| parse_err(path, hline, e.to_string()))?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(parse_err(path, hline, format!("wavenumber must be positive, got {k}")));
    }
    let mut matrix = Mat::<Complex64>::zeros(n, n);
    let mut seen = vec![false; n * n];
    let mut last = hline;
    for (line, row) in lines {
        last = line;
        let parts: Vec<&str> = row.split(',').collect();
        if parts.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 fields \"l,m,re,im\", found {}", parts.len())));
        }
        let l: usize = field(path, line, parts[0], "row index")?;
        let m: usize = field(path, line, parts[1], "column index")?;
        if l >= n || m >= n {
            return Err(parse_err(path, line, format!("index ({l},{m}) outside a {n}x{n} matrix")));
        }
        if std::mem::replace(&mut seen[l * n + m], true) {
            return Err(parse_err(path, line, format!("entry ({l},{m}) appears twice")));
        }
        let re: f64 = field(path, line, parts[2], "real part")?;
        let im: f64 = field(path, line, parts[3], "imaginary part")?;
        if !re.is_finite() || !im.is_finite() {
            return Err(parse_err(path, line, "non-finite entry"));
        }
        matrix[(l, m)] = Complex64::new(re, im);
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(parse_err(path, last, format!("entry ({},{}) is missing", i / n, i % n)));
    }
    FarFieldMatrix::new(matrix, k, grid)
}

pub fn write_matrix(path: &Path, f: &FarFieldMatrix) -> Result<()> {
    write_atomic(path, format_matrix(f).as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<FarFieldMatrix> {
    parse_matrix(&read_text(path)?, path)
}

pub fn format_total_field(u: &TotalField) -> String {
    let m = u.resolution;
    let mut s = String::from("row,col,re,im\n");
    for (i, v) in u.values.iter().enumerate() {
        writeln!(s, "{},{},{},{}", i / m, i % m, num(v.re), num(v.im)).unwrap();
    }
    s
}

pub fn format_spectrum(points: &[CirclePoint]) -> String {
    let mut s = String::from("index,re,im,circle_residual\n");
    for (i, p) in points.iter().enumerate() {
        writeln!(s, "{i},{},{},{}", num(p.eigenvalue.re), num(p.eigenvalue.im), num(p.residual)).unwrap();
    }
    s
}

pub fn format_real_spectrum(report: &EigCountReport) -> String {
    let mut s = String::from("index,eigenvalue\n");
    for (i, l) in report.eigenvalues.iter().enumerate() {
        writeln!(s, "{i},{}", num(*l)).unwrap();
    }
    s
}

pub fn format_indicator_csv(map: &IndicatorMap) -> String {
    let mut s = String::from("j,row,col,z_x,z_y,I\n");
    for (j, v) in map.values.iter().enumerate() {
        let (row, col) = map.grid.row_col(j);
        let z = map.grid.center(j);
        writeln!(s, "{j},{row},{col},{},{},{v}", num(z.x), num(z.y)).unwrap();
    }
    s
}

/// Plain PGM of row-major pixel values (row 0 at the bottom) with the top image
/// row at the largest `y`. The maximum gray value is the largest value (1 for an
/// all-zero map, since P2 requires a positive maximum).
pub fn format_pgm(per_axis: usize, values: &[usize]) -> String {
    let j1 = per_axis;
    let max = values.iter().copied().max().unwrap_or(0).max(1);
    let mut s = format!("P2\n{j1} {j1}\n{max}\n");
    for row in (0..j1).rev() {
        let line: Vec<String> = (0..j1).map(|col| values[row * j1 + col].to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn format_mask_csv(result: &ShrinkResult) -> String {
    let mut s = String::from("j,row,col,z_x,z_y,inside\n");
    for (j, m) in result.mask.iter().enumerate() {
        let (row, col) = result.grid.row_col(j);
        let z = result.grid.center(j);
        writeln!(s, "{j},{row},{col},{},{},{}", num(z.x), num(z.y), u8::from(*m)).unwrap();
    }
    s
}

/// Multiplies every entry by `1 + level z` with `z` standard complex Gaussian
/// (`E|z|^2 = 1`), drawn row-major from a ChaCha stream seeded with `seed`.
pub fn add_noise(f: &mut FarFieldMatrix, level: f64, seed: u64) -> Result<()> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidParameter(format!("noise level must lie in [0, 1), got {level}")));
    }
    if level == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = level / std::f64::consts::SQRT_2;
    let n = f.len();
    for l in 0..n {
        for m in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            f.matrix[(l, m)] *= Complex64::new(1.0 + scale * re, scale * im);
        }
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    k: f64,
    #[serde(rename = "R")]
    r: f64,
    shapes: Vec<ShapeSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ShapeSpec {
    Disc {
        center: [f64; 2],
        radius: f64,
        q: f64,
        #[serde(default)]
        name: Option<String>,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        #[serde(default)]
        rotation: f64,
        q: f64,
        #[serde(default)]
        name: Option<String>,
    },
    Kite {
        center: [f64; 2],
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        rotation: f64,
        q: f64,
        #[serde(default)]
        name: Option<String>,
    },
    Nut {
        center: [f64; 2],
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        rotation: f64,
        q: f64,
        #[serde(default)]
        name: Option<String>,
    },
    /// Contrast samples come from `file`, relative to the scene file.
    Raster {
        center: [f64; 2],
        halfwidth: f64,
        file: PathBuf,
        #[serde(default)]
        name: Option<String>,
    },
}

/// Parses a scene description; raster files are resolved against `base_dir`.
pub fn parse_scene(text: &str, path: &Path, base_dir: &Path) -> Result<Scene> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    let mut shapes = Vec::with_capacity(file.shapes.len());
    for spec in file.shapes {
        let p = |c: [f64; 2]| Point::new(c[0], c[1]);
        let (shape, name) = match spec {
            ShapeSpec::Disc { center, radius, q, name } => (Shape::disc(p(center), radius, q), name),
            ShapeSpec::Ellipse { center, semi_axes, rotation, q, name } => {
                (Shape::ellipse(p(center), semi_axes, rotation, q), name)
            }
            ShapeSpec::Kite { center, scale, rotation, q, name } => (Shape::kite(p(center), scale, rotation, q), name),
            ShapeSpec::Nut { center, scale, rotation, q, name } => (Shape::nut(p(center), scale, rotation, q), name),
            ShapeSpec::Raster { center, halfwidth, file, name } => {
                let grid = read_raster(&base_dir.join(file))?;
                let shape = Shape {
                    name: None,
                    kind: ShapeKind::Raster { halfwidth, grid },
                    center: p(center),
                    rotation: 0.0,
                    contrast: 0.0,
                };
                (shape, name)
            }
        };
        shapes.push(match name {
            Some(n) => shape.with_name(n),
            None => shape,
        });
    }
    Scene::new(shapes, file.k, file.r)
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scene(&read_text(path)?, path, base)
}

/// `M` lines of `M` comma-separated reals; line `i` holds grid row `i`
/// (row 0 at the bottom of the square).
pub fn parse_raster(text: &str, path: &Path) -> Result<RasterGrid> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line.split(',').map(|v| field(path, i + 1, v, "contrast value")).collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(path, i + 1, format!("row has {} values, expected {}", row.len(), first.len())));
            }
        }
        if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= -1.0)) {
            return Err(parse_err(path, i + 1, format!("contrast {v} must be finite and at least -1")));
        }
        rows.push(row);
    }
    let m = rows.len();
    if m < 1 || rows[0].len() != m {
        return Err(parse_err(
            path,
            m.max(1),
            format!("raster must be square, found {m} rows of {} values", rows.first().map_or(0, Vec::len)),
        ));
    }
    Ok(RasterGrid { resolution: m, values: rows.concat() })
}

pub fn read_raster(path: &Path) -> Result<RasterGrid> {
    parse_raster(&read_text(path)?, path)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub timings: Vec<StageTiming>,
    pub outputs: Vec<OutputRecord>,
}

/// Collects outputs of one run in a directory and records their checksums.
pub struct OutputDir {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, contents)?;
        self.outputs.push(OutputRecord { file: name.to_string(), sha256: sha256_hex(contents) });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn outputs(&self) -> &[OutputRecord] {
        &self.outputs
    }

    /// Writes `manifest.json` last.
    pub fn finish(self, command: &str, config: serde_json::Value, timings: Vec<StageTiming>) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            timings,
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.dir.join("manifest.json"), text.as_bytes())?;
        Ok(manifest)
    }
}
