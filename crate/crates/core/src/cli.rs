//! Command line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::directions::DirectionGrid;
use crate::error::{Error, Result};
use crate::forward::{mie_default_terms, mie_far_field, IncidentField, LippmannSchwinger, SolverConfig};
use crate::io::{self, OutputDir, StageTiming};
use crate::monotonicity::{
    count_signed_eigs, indicator_map, localize_density, shrink_reconstruct, SampleSet, Sign, Threshold, TwoSidedConfig,
    DEFAULT_DELTA,
};
use crate::operators::{circle_residuals, far_field_matrix_for_contrast, hermitian_part, FarFieldMatrix};
use crate::scene::{make_pixel_grid, rasterize, Point, Scene, ShapeKind};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MONOSCAT_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "monoscat", version, about = "Far field simulation and monotonicity-based support reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Simulate the far field matrix of a scene.
    Simulate(RunArgs),
    /// Indicator maps for every alpha.
    Reconstruct(RunArgs),
    /// Eigenvalues of F and Re F.
    Spectrum(RunArgs),
    /// Shrink the region of interest with the two-sided test.
    Shrink(RunArgs),
    /// Localized Herglotz densities for two discs B and D.
    Localize(LocalizeArgs),
    /// Mie-series far field matrix of a centered disc.
    Mie(RunArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    /// Scene description (JSON).
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Far field matrix to read instead of simulating.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Wavenumber; overrides the scene's.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub n_dirs: usize,
    /// Contrast grid cells per axis.
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    /// Half width of the region of interest; the scene's bounding radius by default.
    #[arg(long)]
    pub roi: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub pixels: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.1])]
    pub alpha: Vec<f64>,
    #[arg(long, default_value = "+1", allow_hyphen_values = true, value_parser = parse_sign)]
    #[serde(serialize_with = "serialize_sign")]
    pub sign: Sign,
    /// Absolute eigenvalue threshold.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Relative threshold, replacing --delta when given.
    #[arg(long)]
    pub delta_rel: Option<f64>,
    /// Upper bound of the two-sided test.
    #[arg(long, default_value_t = 4.0)]
    pub beta: f64,
    /// Tolerated eigenvalue violations in the two-sided test.
    #[arg(long, default_value_t = 0)]
    pub budget: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// GMRES relative tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Also write the total field for this incident direction index.
    #[arg(long)]
    pub export_field: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub k: f64,
    #[arg(long, default_value_t = 64)]
    pub n_dirs: usize,
    /// Disc B as `x,y,r`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b_disc: Vec<f64>,
    /// Disc D as `x,y,r`; omit for an unconstrained maximization.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub d_disc: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8])]
    pub eps: Vec<f64>,
    /// Minimum number of sample points per disc.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn parse_sign(s: &str) -> std::result::Result<Sign, String> {
    match s.trim() {
        "+1" | "1" | "+" => Ok(Sign::Positive),
        "-1" | "-" => Ok(Sign::Negative),
        other => Err(format!("sign must be +1 or -1, got {other:?}")),
    }
}

fn serialize_sign<S: serde::Serializer>(sign: &Sign, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_i8(sign.value() as i8)
}

impl RunArgs {
    fn threshold(&self) -> Threshold {
        match self.delta_rel {
            Some(r) => Threshold::Relative(r),
            None => Threshold::Absolute(self.delta),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_dirs < 2 || !self.n_dirs.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("--n-dirs must be even and at least 2, got {}", self.n_dirs)));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::InvalidParameter(format!("--noise must lie in [0, 1), got {}", self.noise)));
        }
        if !(self.delta >= 0.0) || self.delta_rel.is_some_and(|r| !(r >= 0.0)) {
            return Err(Error::InvalidParameter("thresholds must be nonnegative".into()));
        }
        if let Some(k) = self.k {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("--k must be positive, got {k}")));
            }
        }
        Ok(())
    }

    fn scene(&self) -> Result<Scene> {
        let path = self.scene.as_deref().ok_or_else(|| Error::InvalidParameter("--scene is required".into()))?;
        let mut scene = io::read_scene(path)?;
        if let Some(k) = self.k {
            scene.wavenumber = k;
        }
        Ok(scene)
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig { gmres_tolerance: self.tol, max_iterations: self.max_iter, ..SolverConfig::default() }
    }

    fn roi(&self, scene_radius: Option<f64>) -> Result<f64> {
        self.roi
            .or(scene_radius)
            .ok_or_else(|| Error::InvalidParameter("--roi is required when reading a matrix without a scene".into()))
    }
}

struct Run {
    out: OutputDir,
    timings: Vec<StageTiming>,
    clock: Instant,
}

impl Run {
    fn new(dir: &Path) -> Result<Self> {
        Ok(Self { out: OutputDir::create(dir)?, timings: Vec::new(), clock: Instant::now() })
    }

    fn stage(&mut self, name: &str) {
        self.timings.push(StageTiming { stage: name.to_string(), seconds: self.clock.elapsed().as_secs_f64() });
        self.clock = Instant::now();
    }
}

/// Simulated (and optionally noisy) data for the scene, or the matrix file.
fn load_or_simulate(args: &RunArgs, run: &mut Run) -> Result<(FarFieldMatrix, Option<Scene>)> {
    if let Some(path) = &args.matrix {
        let f = io::read_matrix(path)?;
        if f.len() != args.n_dirs {
            log::info!("using N = {} from {}", f.len(), path.display());
        }
        run.stage("read matrix");
        let scene = args.scene.as_ref().map(|_| args.scene()).transpose()?;
        return Ok((f, scene));
    }
    let scene = args.scene()?;
    let f = simulate(args, &scene, run)?;
    Ok((f, Some(scene)))
}

fn simulate(args: &RunArgs, scene: &Scene, run: &mut Run) -> Result<FarFieldMatrix> {
    let dirs = DirectionGrid::new(args.n_dirs)?;
    let q = rasterize(scene, scene.bounding_radius, args.grid)?;
    if (args.n_dirs as f64) < 2.0 * scene.wavenumber * scene.bounding_radius {
        log::warn!(
            "N = {} is below 2kR = {:.1}; the data do not resolve the scene",
            args.n_dirs,
            2.0 * scene.wavenumber * scene.bounding_radius
        );
    }
    let mut f = far_field_matrix_for_contrast(&q, scene.wavenumber, &dirs, &args.solver())?;
    run.stage("far field matrix");
    if let Some(m) = args.export_field {
        if m >= args.n_dirs {
            return Err(Error::InvalidParameter(format!("--export-field {m} is not a direction index")));
        }
        if !q.is_zero() {
            let op = LippmannSchwinger::new(&q, scene.wavenumber, &args.solver())?;
            let u = op.solve(&IncidentField::plane_wave(dirs.angle(m)), &args.solver())?;
            run.out.write(&format!("total_field_{m}.csv"), io::format_total_field(&u).as_bytes())?;
            run.stage("total field");
        }
    }
    io::add_noise(&mut f, args.noise, args.seed)?;
    Ok(f)
}

fn cmd_simulate(args: &RunArgs, run: &mut Run) -> Result<()> {
    let scene = args.scene()?;
    let f = simulate(args, &scene, run)?;
    run.out.write("far_field.csv", io::format_matrix(&f).as_bytes())?;
    Ok(())
}

fn cmd_reconstruct(args: &RunArgs, run: &mut Run) -> Result<()> {
    let (f, scene) = load_or_simulate(args, run)?;
    let roi = args.roi(scene.as_ref().map(|s| s.bounding_radius))?;
    let grid = make_pixel_grid(roi, args.pixels)?;
    let mut summary = Vec::new();
    for (i, &alpha) in args.alpha.iter().enumerate() {
        let map = indicator_map(&f, &grid, alpha, args.sign, args.threshold())?;
        run.out.write(&format!("indicator_{i}.csv"), io::format_indicator_csv(&map).as_bytes())?;
        run.out.write(&format!("indicator_{i}.pgm"), io::format_pgm(grid.per_axis, &map.values).as_bytes())?;
        summary.push(json!({
            "alpha": alpha,
            "baseline": map.baseline,
            "values": map.distinct_values(),
            "mean_significant": map.mean_significant(),
            "files": [format!("indicator_{i}.csv"), format!("indicator_{i}.pgm")],
        }));
        run.stage(&format!("indicator alpha={alpha}"));
    }
    run.out.write_json("summary.json", &json!({ "sign": args.sign.value() as i8, "maps": summary }))?;
    Ok(())
}

fn cmd_spectrum(args: &RunArgs, run: &mut Run) -> Result<()> {
    let (f, _) = load_or_simulate(args, run)?;
    let circle = circle_residuals(&f)?;
    let re = hermitian_part(&f.matrix);
    let signed = Mat::from_fn(f.len(), f.len(), |i, j| re[(i, j)] * args.sign.value());
    let report = count_signed_eigs(&signed, args.threshold())?;
    run.stage("eigenvalues");
    run.out.write("spectrum.csv", io::format_spectrum(&circle).as_bytes())?;
    run.out.write("spectrum_re.csv", io::format_real_spectrum(&report).as_bytes())?;
    let max_residual = circle.iter().map(|p| p.residual).fold(0.0, f64::max);
    let zero = f.matrix.col_iter().all(|c| c.iter().all(|v| *v == Complex64::default()));
    run.out.write_json(
        "summary.json",
        &json!({
            "max_circle_residual": max_residual,
            "note": if zero { "zero matrix: every eigenvalue is 0, which lies on the circle" } else { "" },
            "sign": args.sign.value() as i8,
            "delta": report.delta,
            "baseline": report.n_negative,
            "n_negative": report.n_negative,
            "n_positive": report.n_positive,
            "n_discarded": report.n_discarded,
        }),
    )?;
    Ok(())
}

fn cmd_shrink(args: &RunArgs, run: &mut Run) -> Result<()> {
    let (f, scene) = load_or_simulate(args, run)?;
    let roi = args.roi(scene.as_ref().map(|s| s.bounding_radius))?;
    let alpha = match args.alpha.as_slice() {
        [a] => *a,
        _ => return Err(Error::InvalidParameter("shrink takes a single --alpha".into())),
    };
    let cfg = TwoSidedConfig { alpha, beta: args.beta, threshold: args.threshold(), budget: args.budget };
    let result = shrink_reconstruct(&f, roi, args.pixels, &cfg)?;
    run.stage("shrink");
    let values: Vec<usize> = result.mask.iter().map(|&m| usize::from(m)).collect();
    run.out.write("mask.csv", io::format_mask_csv(&result).as_bytes())?;
    run.out.write("mask.pgm", io::format_pgm(result.grid.per_axis, &values).as_bytes())?;
    run.out.write_json(
        "summary.json",
        &json!({ "pixels_kept": values.iter().sum::<usize>(), "area": result.area(), "passes": result.passes }),
    )?;
    Ok(())
}

fn cmd_mie(args: &RunArgs, run: &mut Run) -> Result<()> {
    let scene = args.scene()?;
    let (radius, q) = match scene.shapes.as_slice() {
        [s] => match s.kind {
            ShapeKind::Disc { radius } if s.center.norm() == 0.0 => (radius, s.contrast),
            _ => return Err(Error::InvalidScene("mie needs a single disc centered at the origin".into())),
        },
        _ => return Err(Error::InvalidScene("mie needs a single disc centered at the origin".into())),
    };
    let dirs = DirectionGrid::new(args.n_dirs)?;
    let k = scene.wavenumber;
    let raw = mie_far_field(radius, q, k, &dirs, mie_default_terms(radius, q, k))?;
    let w = dirs.weight();
    let f = FarFieldMatrix::new(Mat::from_fn(dirs.len(), dirs.len(), |l, m| raw[(l, m)] * w), k, dirs)?;
    run.stage("mie series");
    run.out.write("far_field.csv", io::format_matrix(&f).as_bytes())?;
    Ok(())
}

fn disc_samples(spec: &[f64], min_points: usize, flag: &str) -> Result<SampleSet> {
    match spec {
        [] => Ok(SampleSet::empty()),
        [x, y, r] => SampleSet::disc(Point::new(*x, *y), *r, min_points),
        _ => Err(Error::InvalidParameter(format!("--{flag} takes x,y,r"))),
    }
}

fn cmd_localize(args: &LocalizeArgs, run: &mut Run) -> Result<()> {
    if args.b_disc.is_empty() {
        return Err(Error::InvalidParameter("--b-disc is required".into()));
    }
    let b = disc_samples(&args.b_disc, args.samples, "b-disc")?;
    let d = disc_samples(&args.d_disc, args.samples, "d-disc")?;
    let dirs = DirectionGrid::new(args.n_dirs)?;
    let result = localize_density(&b, &d, &dirs, args.k, &args.eps)?;
    run.stage("localize");
    let mut table = String::from("m,eps,eigenvalue,ratio\n");
    let mut densities = String::from("m,n,re,im\n");
    for (m, eps) in result.eps.iter().enumerate() {
        table.push_str(&format!("{m},{eps:.16e},{:.16e},{:.16e}\n", result.eigenvalues[m], result.ratios[m]));
        for (n, g) in result.densities[m].iter().enumerate() {
            densities.push_str(&format!("{m},{n},{:.16e},{:.16e}\n", g.re, g.im));
        }
    }
    run.out.write("localize.csv", table.as_bytes())?;
    run.out.write("densities.csv", densities.as_bytes())?;
    Ok(())
}

fn execute(command: &Command) -> Result<()> {
    let (name, out) = match command {
        Command::Simulate(a) => ("simulate", &a.out),
        Command::Reconstruct(a) => ("reconstruct", &a.out),
        Command::Spectrum(a) => ("spectrum", &a.out),
        Command::Shrink(a) => ("shrink", &a.out),
        Command::Mie(a) => ("mie", &a.out),
        Command::Localize(a) => ("localize", &a.out),
    };
    if let Command::Simulate(a)
    | Command::Reconstruct(a)
    | Command::Spectrum(a)
    | Command::Shrink(a)
    | Command::Mie(a) = command
    {
        a.validate()?;
    }
    let mut run = Run::new(out)?;
    match command {
        Command::Simulate(a) => cmd_simulate(a, &mut run)?,
        Command::Reconstruct(a) => cmd_reconstruct(a, &mut run)?,
        Command::Spectrum(a) => cmd_spectrum(a, &mut run)?,
        Command::Shrink(a) => cmd_shrink(a, &mut run)?,
        Command::Mie(a) => cmd_mie(a, &mut run)?,
        Command::Localize(a) => cmd_localize(a, &mut run)?,
    }
    let config = serde_json::to_value(command).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    run.out.finish(name, config, run.timings)?;
    Ok(())
}

/// Thread count from `MONOSCAT_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a pool of `threads` workers (the global pool if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome =
        threads_from_env().and_then(|threads| with_threads(threads, || execute(&cli.command))).and_then(|r| r);
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            }
        }
    }
}
