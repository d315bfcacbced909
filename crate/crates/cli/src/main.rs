//! `curvefield` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 no curve detected.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use curvefield::bench::{run_benchmark_with, splitmix64, HyperPoint, Method, NoiseLevel, SuiteConfig};
use curvefield::detector::{baseline_heatmap, baseline_segmentation, detect_curve, Detection, DetectorConfig};
use curvefield::io::{
    read_scalar, read_vector, read_volume, write_volume_with_seed, CurveDocument, PointCloudDocument, Volume,
};
use curvefield::metrics::{curve_metrics, DEFAULT_SAMPLE_STEP};
use curvefield::synth::{
    add_distractor, corrupt_closeness, fit_grid, make_curve, perturb_field, rasterize_curve, render_tube_volume,
    standard_specs, CurveSpec, DistractorMode, FIXTURE_OFFSET,
};
use curvefield::{attraction_field, closeness_map, distance_map, total_loss, Execution, Grid3, Spacing, Vec3};

#[derive(Parser)]
#[command(name = "curvefield", version, about = "Attraction-field curve detection in 3-D volumes")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic curve with its oracle field, closeness, mask and tube image.
    Synth(SynthArgs),
    /// Compute ground-truth field, closeness and distance maps for a curve.
    Gt(GtArgs),
    /// Evaluate the training loss of predicted maps against ground truth.
    Loss(LossArgs),
    /// Detect a curve from predicted maps.
    Infer(InferArgs),
    /// Compare two curves (HD, ASSD, Surface Dice).
    Eval(EvalArgs),
    /// Run the benchmark suite and write report, series, table and plots.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    Line,
    Arc,
    Helix,
    Cane,
    Sinusoid,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistractorArg {
    Att,
    Ours,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ours,
    Seg,
    Htmp,
}

#[derive(Args)]
struct SynthArgs {
    /// One of the standard shapes (shifted by a sub-voxel offset).
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    fixture: Option<FixtureName>,
    /// Curve spec as JSON, e.g. {"kind":"helix","radius":15,"pitch":30,"turns":2}.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    spacing: f64,
    #[arg(long, default_value_t = 12.0)]
    margin: f64,
    #[arg(long, default_value_t = 64)]
    max_per_axis: usize,
    /// Closeness radius R_c in mm.
    #[arg(long, default_value_t = 10.0)]
    rc: f64,
    /// Gaussian noise σ (mm) added to the field.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Probability of flipping each closeness voxel.
    #[arg(long, default_value_t = 0.0)]
    flip_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Radius of the bright tube in the rendered image.
    #[arg(long, default_value_t = 1.5)]
    tube_radius: f64,
    /// Second curve whose neighbourhood overrides the field.
    #[arg(long)]
    distractor: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    distractor_radius: f64,
    #[arg(long, value_enum, default_value_t = DistractorArg::Att)]
    distractor_mode: DistractorArg,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GtArgs {
    #[arg(long)]
    curve: PathBuf,
    /// Take the grid from this volume header.
    #[arg(long, conflicts_with_all = ["shape", "spacing", "origin"])]
    like: Option<PathBuf>,
    /// nx,ny,nz
    #[arg(long, value_delimiter = ',', required_unless_present = "like")]
    shape: Vec<usize>,
    /// sx,sy,sz in mm (or one value for isotropic spacing).
    #[arg(long, value_delimiter = ',', default_value = "2")]
    spacing: Vec<f64>,
    /// Center of voxel (0,0,0) in mm.
    #[arg(long, value_delimiter = ',', default_value = "0,0,0", allow_hyphen_values = true)]
    origin: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    rc: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long)]
    pred_field: PathBuf,
    #[arg(long)]
    gt_field: PathBuf,
    #[arg(long)]
    pred_closeness: PathBuf,
    #[arg(long)]
    gt_closeness: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    rc: f64,
    #[arg(long, default_value_t = 5.0)]
    rf: f64,
    /// Use the squared L2 norm in the field term.
    #[arg(long)]
    squared_field_loss: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectorFlags {
    /// Closeness threshold t.
    #[arg(long = "t", default_value_t = DetectorConfig::default().threshold)]
    t: f64,
    /// Field-norm threshold R_f in mm.
    #[arg(long, default_value_t = DetectorConfig::default().r_f)]
    rf: f64,
    #[arg(long, default_value_t = DetectorConfig::default().nms_radius)]
    nms_radius: f64,
    #[arg(long, default_value_t = DetectorConfig::default().isomap_k)]
    isomap_k: usize,
    #[arg(long, default_value_t = DetectorConfig::default().resample_step)]
    resample_step: f64,
}

impl DetectorFlags {
    fn config(&self) -> Result<DetectorConfig, CliError> {
        let config = DetectorConfig {
            threshold: self.t,
            r_f: self.rf,
            nms_radius: self.nms_radius,
            isomap_k: self.isomap_k,
            resample_step: self.resample_step,
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Args)]
struct InferArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Ours)]
    method: MethodArg,
    /// Predicted attraction field (ours).
    #[arg(long, required_if_eq("method", "ours"))]
    field: Option<PathBuf>,
    /// Predicted closeness (ours, htmp).
    #[arg(long, required_if_eq_any([("method", "ours"), ("method", "htmp")]))]
    closeness: Option<PathBuf>,
    /// Binary curve mask (seg).
    #[arg(long, required_if_eq("method", "seg"))]
    mask: Option<PathBuf>,
    /// Predicted distance heatmap (htmp).
    #[arg(long, required_if_eq("method", "htmp"))]
    distances: Option<PathBuf>,
    /// Heatmap distance threshold in mm (htmp).
    #[arg(long, default_value_t = 2.0)]
    tau: f64,
    #[command(flatten)]
    detector: DetectorFlags,
    /// Write the curve document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the thinned, ordered point cloud.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted curve document.
    #[arg(long)]
    pred: PathBuf,
    /// Reference curve document.
    #[arg(long)]
    truth: PathBuf,
    /// Surface Dice tolerances in mm.
    #[arg(long, value_delimiter = ',', default_value = "1,3")]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_STEP)]
    sample_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite configuration JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// R_c values for the sweep grid.
    #[arg(long, value_delimiter = ',')]
    rc: Vec<f64>,
    /// R_f values for the sweep grid.
    #[arg(long, value_delimiter = ',')]
    rf: Vec<f64>,
    /// Closeness thresholds for the sweep grid.
    #[arg(long = "t", value_delimiter = ',')]
    t: Vec<f64>,
    /// Field noise levels; each non-zero σ also flips closeness at --flip-rate.
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    flip_rate: f64,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    nms_radius: Option<f64>,
    #[arg(long)]
    isomap_k: Option<usize>,
    #[arg(long)]
    resample_step: Option<f64>,
    /// Run cells one at a time.
    #[arg(long)]
    sequential: bool,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
}

enum CliError {
    Usage(String),
    Core(curvefield::Error),
}

impl From<curvefield::Error> for CliError {
    fn from(e: curvefield::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn emit(value: &serde_json::Value, out: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn triple<T: Copy>(values: &[T], name: &str) -> CliResult<[T; 3]> {
    match values {
        [a, b, c] => Ok([*a, *b, *c]),
        [a] => Ok([*a; 3]),
        _ => Err(CliError::Usage(format!("--{name} takes 1 or 3 comma-separated values, got {}", values.len()))),
    }
}

fn synth(args: &SynthArgs) -> CliResult {
    let (spec, offset) = match (&args.fixture, &args.spec) {
        (Some(name), _) => {
            let wanted = name.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            let spec = standard_specs().into_iter().find(|s| s.name() == wanted).expect("every fixture name has a spec");
            (spec, Vec3::from(FIXTURE_OFFSET))
        }
        (None, Some(path)) => {
            let spec: CurveSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            (spec, Vec3::zeros())
        }
        (None, None) => return Err(CliError::Usage("either --fixture or --spec is required".into())),
    };
    let curve = make_curve(&spec)?.translated(offset);
    let grid = fit_grid(&curve, args.spacing, args.margin, args.max_per_axis)?;
    let exact = attraction_field(&grid, &curve);
    let mut closeness = closeness_map(&exact, args.rc)?;
    let mut field = exact.clone();
    if let Some(path) = &args.distractor {
        let other = CurveDocument::read(path)?.to_polyline()?;
        let mode = match args.distractor_mode {
            DistractorArg::Att => DistractorMode::Att,
            DistractorArg::Ours => DistractorMode::Ours,
        };
        (field, closeness) = add_distractor(&field, &closeness, &other, args.distractor_radius, mode)?;
    }
    let field = perturb_field(&field, args.sigma, splitmix64(args.seed ^ 1))?;
    let closeness = corrupt_closeness(&closeness, args.flip_rate, splitmix64(args.seed ^ 2))?;

    std::fs::create_dir_all(&args.out_dir)?;
    let seed = Some(args.seed);
    let volumes = [
        ("field.json", Volume::Vector(field)),
        ("closeness.json", Volume::Scalar(closeness)),
        ("distance.json", Volume::Scalar(distance_map(&exact))),
        ("mask.json", Volume::Scalar(rasterize_curve(&curve, &grid)?)),
        ("image.json", Volume::Scalar(render_tube_volume(&curve, args.tube_radius, &grid, args.spacing)?)),
    ];
    let mut files = Vec::new();
    for (name, volume) in &volumes {
        let path = args.out_dir.join(name);
        write_volume_with_seed(&path, volume, seed)?;
        files.push(path.display().to_string());
    }
    let mut doc = CurveDocument::from_polyline(
        &curve,
        format!("curvefield synth {} spacing={} sigma={} flip_rate={}", spec.name(), args.spacing, args.sigma, args.flip_rate),
    );
    doc.seed = seed;
    let curve_path = args.out_dir.join("curve.json");
    doc.write(&curve_path)?;
    files.push(curve_path.display().to_string());
    emit(
        &json!({
            "curve": spec.name(),
            "seed": args.seed,
            "shape": grid.shape(),
            "spacing": grid.spacing().as_array(),
            "origin": <[f64; 3]>::from(grid.origin()),
            "files": files,
        }),
        None,
    )
}

fn gt(args: &GtArgs) -> CliResult {
    let doc = CurveDocument::read(&args.curve)?;
    let curve = doc.to_polyline()?;
    let grid = match &args.like {
        Some(path) => read_volume(path)?.0.grid()?,
        None => {
            let [sx, sy, sz] = triple(&args.spacing, "spacing")?;
            let shape = triple(&args.shape, "shape")?;
            Grid3::new(shape, Spacing::new(sx, sy, sz)?, Vec3::from(triple(&args.origin, "origin")?))?
        }
    };
    let field = attraction_field(&grid, &curve);
    let closeness = closeness_map(&field, args.rc).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::create_dir_all(&args.out_dir)?;
    let mut files = Vec::new();
    let distances = distance_map(&field);
    for (name, volume) in [
        ("field.json", Volume::Vector(field)),
        ("closeness.json", Volume::Scalar(closeness)),
        ("distance.json", Volume::Scalar(distances)),
    ] {
        let path = args.out_dir.join(name);
        write_volume_with_seed(&path, &volume, doc.seed)?;
        files.push(path.display().to_string());
    }
    emit(&json!({ "shape": grid.shape(), "rc": args.rc, "files": files }), None)
}

fn loss(args: &LossArgs) -> CliResult {
    let report = total_loss(
        &read_vector(&args.pred_field)?,
        &read_vector(&args.gt_field)?,
        &read_scalar(&args.pred_closeness)?,
        &read_scalar(&args.gt_closeness)?,
        args.rc,
        args.rf,
        args.squared_field_loss,
    )?;
    emit(&serde_json::to_value(report)?, args.out.as_deref())
}

fn infer(args: &InferArgs) -> CliResult {
    let config = args.detector.config()?;
    if !(args.tau.is_finite() && args.tau > 0.0) {
        return Err(CliError::Usage(format!("--tau must be positive, got {}", args.tau)));
    }
    let required = |p: &Option<PathBuf>, flag: &str| {
        p.clone().ok_or_else(|| CliError::Usage(format!("--{flag} is required for this method")))
    };
    let (detection, seed, method): (Detection, Option<u64>, &str) = match args.method {
        MethodArg::Ours => {
            let (header, volume) = read_volume(required(&args.field, "field")?)?;
            let Volume::Vector(field) = volume else {
                return Err(curvefield::Error::UnsupportedFormat("--field must hold a 3-channel volume".into()).into());
            };
            let closeness = read_scalar(required(&args.closeness, "closeness")?)?;
            (detect_curve(&field, &closeness, &config)?, header.seed, "ours")
        }
        MethodArg::Seg => {
            let path = required(&args.mask, "mask")?;
            let seed = read_volume(&path)?.0.seed;
            (baseline_segmentation(&read_scalar(&path)?, &config)?, seed, "seg")
        }
        MethodArg::Htmp => {
            let path = required(&args.distances, "distances")?;
            let seed = read_volume(&path)?.0.seed;
            let closeness = read_scalar(required(&args.closeness, "closeness")?)?;
            (baseline_heatmap(&read_scalar(&path)?, &closeness, args.tau, &config)?, seed, "htmp")
        }
    };
    for w in detection.warnings() {
        log::warn!("{w}");
    }
    if let Some(path) = &args.points {
        PointCloudDocument::from_cloud(&detection.thinned, format!("curvefield infer {method} thinned points"))
            .write(path)?;
    }
    let mut doc = CurveDocument::from_polyline(
        &detection.curve,
        format!(
            "curvefield infer method={method} t={} R_f={} nms_radius={} isomap_k={} resample_step={} extracted={}",
            config.threshold, config.r_f, config.nms_radius, config.isomap_k, config.resample_step, detection.extracted
        ),
    );
    doc.warnings = detection.warnings();
    doc.seed = seed;
    match &args.out {
        Some(path) => doc.write(path)?,
        None => print!("{}", serde_json::to_string_pretty(&doc)? + "\n"),
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> CliResult {
    let pred = CurveDocument::read(&args.pred)?.to_polyline()?;
    let truth = CurveDocument::read(&args.truth)?.to_polyline()?;
    let report = curve_metrics(&pred, &truth, &args.thresholds, args.sample_step)?;
    emit(&serde_json::to_value(report)?, args.out.as_deref())
}

fn bench(args: &BenchArgs) -> CliResult {
    let mut config: SuiteConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => SuiteConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if !(args.rc.is_empty() && args.rf.is_empty() && args.t.is_empty()) {
        let base = config.hyper.first().copied().unwrap_or(HyperPoint { r_c: 10.0, r_f: 5.0, t: 0.5 });
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let (rc, rf, t) = (or(&args.rc, base.r_c), or(&args.rf, base.r_f), or(&args.t, base.t));
        config.hyper = t.iter().flat_map(|&t| SuiteConfig::sweep(&rc, &rf, t)).collect();
    }
    if !args.sigma.is_empty() {
        config.noise = args
            .sigma
            .iter()
            .map(|&sigma| NoiseLevel { sigma, flip_rate: if sigma > 0.0 { args.flip_rate } else { 0.0 } })
            .collect();
    }
    if let Some(r) = args.repeats {
        config.repeats = r;
    }
    if let Some(v) = args.nms_radius {
        config.detector.nms_radius = v;
    }
    if let Some(v) = args.isomap_k {
        config.detector.isomap_k = v;
    }
    if let Some(v) = args.resample_step {
        config.detector.resample_step = v;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let report = run_benchmark_with(&config, exec)?;
    for f in &report.failures {
        log::warn!("{} {} repeat {}: {}", f.fixture, f.method.name(), f.repeat, f.error);
    }
    let files: Vec<String> = report.write_to(&args.out_dir)?.iter().map(|p| p.display().to_string()).collect();
    let ours: Vec<_> = report
        .summary
        .iter()
        .filter(|r| r.method == Method::Ours)
        .map(|r| json!({ "sigma": r.sigma, "r_c": r.r_c, "r_f": r.r_f, "t": r.t, "assd": r.assd }))
        .collect();
    emit(
        &json!({
            "master_seed": report.master_seed,
            "rows": report.rows.len(),
            "failures": report.failures.len(),
            "ours_all_fixtures": ours,
            "files": files,
        }),
        None,
    )
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Gt(a) => gt(a),
        Command::Loss(a) => loss(a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                curvefield::Error::NoCurveDetected(_) => 3,
                _ => 2,
            })
        }
    }
}
