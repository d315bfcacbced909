//! Benchmark harness: oracle fixtures × noise × method × (R_c, R_f, t) grid.
//!
//! Each cell draws its seeds from the master seed and its own key, so cells
//! can run in any order or in parallel and the report stays byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::{baseline_heatmap, baseline_segmentation, detect_curve, DetectorConfig};
use crate::exec::{pairwise_sum, Execution};
use crate::geometry::Vec3;
use crate::groundtruth::{closeness_map, distance_map};
use crate::metrics::{curve_metrics, MetricReport, DEFAULT_SAMPLE_STEP, DEFAULT_THRESHOLDS};
use crate::synth::{
    corrupt_closeness, make_curve, perturb_field, perturb_scalar, rasterize_curve, standard_specs, CurveSpec,
    Fixture, FIXTURE_OFFSET,
};
use crate::{invalid, Result};

pub const REPORT_FORMAT: &str = "curvefield-bench/1";
pub const ALL_FIXTURES: &str = "all";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Attraction field + closeness through the full detector.
    Ours,
    /// Ideal one-voxel-wide segmentation mask.
    Seg,
    /// Thresholded distance heatmap.
    Htmp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Seg => "seg",
            Method::Htmp => "htmp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    /// Gaussian σ in mm, applied to field components and heatmap values.
    pub sigma: f64,
    /// Closeness flip probability.
    pub flip_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    pub r_c: f64,
    pub r_f: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    /// Curve specs; empty means the five standard shapes.
    pub fixtures: Vec<CurveSpec>,
    pub spacing: f64,
    pub margin: f64,
    pub max_per_axis: usize,
    pub noise: Vec<NoiseLevel>,
    pub methods: Vec<Method>,
    pub hyper: Vec<HyperPoint>,
    pub repeats: usize,
    pub master_seed: u64,
    /// NMS radius, Isomap k and resample step; `r_f` and `threshold` come from each hyper point.
    pub detector: DetectorConfig,
    pub heatmap_tau: f64,
    pub metric_step: f64,
    pub thresholds: Vec<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            fixtures: Vec::new(),
            spacing: 2.0,
            margin: 12.0,
            max_per_axis: 64,
            noise: vec![NoiseLevel { sigma: 0.0, flip_rate: 0.0 }, NoiseLevel { sigma: 0.5, flip_rate: 0.05 }],
            methods: vec![Method::Ours, Method::Seg, Method::Htmp],
            hyper: vec![HyperPoint { r_c: 10.0, r_f: 5.0, t: 0.5 }],
            repeats: 3,
            master_seed: 20_240_901,
            detector: DetectorConfig::default(),
            heatmap_tau: 2.0,
            metric_step: DEFAULT_SAMPLE_STEP,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

impl SuiteConfig {
    /// Full R_c × R_f grid at a single closeness threshold.
    pub fn sweep(r_c: &[f64], r_f: &[f64], t: f64) -> Vec<HyperPoint> {
        r_c.iter().flat_map(|&r_c| r_f.iter().map(move |&r_f| HyperPoint { r_c, r_f, t })).collect()
    }

    fn specs(&self) -> Vec<CurveSpec> {
        if self.fixtures.is_empty() {
            standard_specs()
        } else {
            self.fixtures.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise.is_empty() || self.methods.is_empty() || self.hyper.is_empty() || self.repeats == 0 {
            return Err(invalid("suite needs at least one noise level, method, hyper point and repeat"));
        }
        for n in &self.noise {
            if !(n.sigma.is_finite() && n.sigma >= 0.0) || !(0.0..=1.0).contains(&n.flip_rate) {
                return Err(invalid(format!("bad noise level {n:?}")));
            }
        }
        for h in &self.hyper {
            if !(h.r_c.is_finite() && h.r_c > 0.0) {
                return Err(invalid(format!("R_c must be positive, got {}", h.r_c)));
            }
            self.detector_for(h).validate()?;
        }
        if !(self.heatmap_tau.is_finite() && self.heatmap_tau > 0.0) {
            return Err(invalid(format!("heatmap tau must be positive, got {}", self.heatmap_tau)));
        }
        Ok(())
    }

    fn detector_for(&self, h: &HyperPoint) -> DetectorConfig {
        DetectorConfig { r_f: h.r_f, threshold: h.t, ..self.detector }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = pairwise_sum(values) / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
            (pairwise_sum(&sq) / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStat {
    pub tolerance: f64,
    pub stat: Option<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub fixture: String,
    pub method: Method,
    pub sigma: f64,
    pub flip_rate: f64,
    pub r_c: f64,
    pub r_f: f64,
    pub t: f64,
    pub runs: usize,
    pub failures: usize,
    pub hd: Option<Stat>,
    pub assd: Option<Stat>,
    pub sd: Vec<ThresholdStat>,
}

impl Row {
    pub fn sd_at(&self, tolerance: f64) -> Option<Stat> {
        self.sd.iter().find(|s| s.tolerance == tolerance).and_then(|s| s.stat)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub fixture: String,
    pub method: Method,
    pub sigma: f64,
    pub r_c: f64,
    pub r_f: f64,
    pub t: f64,
    pub repeat: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub format: String,
    pub master_seed: u64,
    pub config: SuiteConfig,
    pub rows: Vec<Row>,
    /// Same statistics pooled over every fixture, with `fixture` set to `"all"`.
    pub summary: Vec<Row>,
    pub failures: Vec<CellFailure>,
}

impl BenchReport {
    /// Looks up a row; `fixture == "all"` searches the pooled summary.
    pub fn find(&self, fixture: &str, method: Method, sigma: f64, r_c: f64, r_f: f64) -> Option<&Row> {
        let rows = if fixture == ALL_FIXTURES { &self.summary } else { &self.rows };
        rows.iter()
            .find(|r| r.fixture == fixture && r.method == method && r.sigma == sigma && r.r_c == r_c && r.r_f == r_f)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One line per row, one column per statistic.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fixture,method,sigma,flip_rate,r_c,r_f,t,runs,failures,hd_mean,hd_std,assd_mean,assd_std");
        for tol in &self.config.thresholds {
            let _ = write!(out, ",sd{tol}_mean,sd{tol}_std");
        }
        out.push('\n');
        let cell = |s: Option<Stat>| s.map_or(",".to_string(), |s| format!("{},{}", s.mean, s.std));
        for r in self.rows.iter().chain(&self.summary) {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.fixture,
                r.method.name(),
                r.sigma,
                r.flip_rate,
                r.r_c,
                r.r_f,
                r.t,
                r.runs,
                r.failures,
                cell(r.hd),
                cell(r.assd)
            );
            for tol in &self.config.thresholds {
                let _ = write!(out, ",{}", cell(r.sd_at(*tol)));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("Master seed: {}\n\n| fixture | method | σ | R_c | R_f | t | runs |", self.master_seed);
        for tol in &self.config.thresholds {
            let _ = write!(out, " SD-{tol} |");
        }
        out.push_str(" HD (mm) | ASSD (mm) |\n|---|---|---|---|---|---|---|");
        out.push_str(&"---|".repeat(self.config.thresholds.len() + 2));
        out.push('\n');
        let cell = |s: Option<Stat>, digits: usize| {
            s.map_or("n/a".to_string(), |s| format!("{:.d$} ± {:.d$}", s.mean, s.std, d = digits))
        };
        for r in self.rows.iter().chain(&self.summary) {
            let _ = write!(
                out,
                "| {} | {} | {} | {} | {} | {} | {}/{} |",
                r.fixture,
                r.method.name(),
                r.sigma,
                r.r_c,
                r.r_f,
                r.t,
                r.runs,
                r.runs + r.failures
            );
            for tol in &self.config.thresholds {
                let _ = write!(out, " {} |", cell(r.sd_at(*tol), 3));
            }
            let _ = writeln!(out, " {} | {} |", cell(r.hd, 2), cell(r.assd, 3));
        }
        out
    }

    /// Mean ASSD per hyper point, one series per (method, noise level), as SVG.
    pub fn assd_plot(&self, fixture: &str) -> String {
        const W: f64 = 640.0;
        const H: f64 = 360.0;
        const PAD: f64 = 48.0;
        let hyper = &self.config.hyper;
        let rows: Vec<&Row> = self.rows.iter().chain(&self.summary).filter(|r| r.fixture == fixture).collect();
        let y_max = rows.iter().filter_map(|r| r.assd.map(|s| s.mean)).fold(0.0, f64::max).max(1e-3) * 1.1;
        let x_of = |i: usize| {
            if hyper.len() < 2 {
                W / 2.0
            } else {
                PAD + (W - 2.0 * PAD) * i as f64 / (hyper.len() - 1) as f64
            }
        };
        let y_of = |v: f64| H - PAD - (H - 2.0 * PAD) * v / y_max;

        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
             <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{fixture}: mean ASSD (mm)</text>\n\
             <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y_max:.3}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>\n",
            W / 2.0,
            H - PAD,
            W - PAD,
            H - PAD,
            H - PAD,
            PAD - 4.0,
            PAD + 4.0,
            PAD - 4.0,
            H - PAD + 4.0,
        );
        for (i, h) in hyper.iter().enumerate() {
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}/{}/{}</text>",
                x_of(i),
                H - PAD + 16.0,
                h.r_c,
                h.r_f,
                h.t
            );
        }
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">R_c/R_f/t</text>", W / 2.0, H - 8.0);

        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
        let mut series = 0;
        for method in &self.config.methods {
            for noise in &self.config.noise {
                let pts: Vec<(f64, f64)> = hyper
                    .iter()
                    .enumerate()
                    .filter_map(|(i, h)| {
                        let row = rows.iter().find(|r| {
                            r.method == *method && r.sigma == noise.sigma && r.r_c == h.r_c && r.r_f == h.r_f && r.t == h.t
                        })?;
                        Some((x_of(i), y_of(row.assd?.mean)))
                    })
                    .collect();
                let color = COLORS[series % COLORS.len()];
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                let _ = writeln!(
                    svg,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                    path.join(" ")
                );
                for (x, y) in &pts {
                    let _ = writeln!(svg, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"2.5\" fill=\"{color}\"/>");
                }
                let _ = writeln!(
                    svg,
                    "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{} σ={}</text>",
                    W - PAD - 90.0,
                    PAD + 14.0 * series as f64,
                    method.name(),
                    noise.sigma
                );
                series += 1;
            }
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Writes `report.json`, `series.csv`, `table.md` and one `assd_<fixture>.svg` per fixture.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        put("report.json".into(), self.to_json()?)?;
        put("series.csv".into(), self.to_csv())?;
        put("table.md".into(), self.to_markdown())?;
        let mut fixtures: Vec<&str> = Vec::new();
        for r in self.rows.iter().chain(&self.summary) {
            if !fixtures.contains(&r.fixture.as_str()) {
                fixtures.push(&r.fixture);
            }
        }
        for f in fixtures {
            put(format!("assd_{f}.svg"), self.assd_plot(f))?;
        }
        Ok(written)
    }
}

/// SplitMix64 step; used to derive independent per-cell seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one noise realization; shared by all methods so they see the same corruption.
pub fn cell_seed(master: u64, fixture: usize, noise: usize, hyper: usize, repeat: usize) -> u64 {
    [fixture, noise, hyper, repeat].iter().fold(splitmix64(master), |s, &k| splitmix64(s ^ k as u64))
}

#[derive(Clone, Copy)]
struct Cell {
    fixture: usize,
    noise: usize,
    hyper: usize,
    method: usize,
    repeat: usize,
}

fn run_cell(config: &SuiteConfig, fixture: &Fixture, cell: &Cell, seed: u64) -> Result<MetricReport> {
    let noise = config.noise[cell.noise];
    let hyper = config.hyper[cell.hyper];
    let detector = config.detector_for(&hyper);
    let field_seed = splitmix64(seed ^ 1);
    let flip_seed = splitmix64(seed ^ 2);
    let detection = match config.methods[cell.method] {
        Method::Ours => {
            let closeness = corrupt_closeness(&closeness_map(&fixture.field, hyper.r_c)?, noise.flip_rate, flip_seed)?;
            let field = perturb_field(&fixture.field, noise.sigma, field_seed)?;
            detect_curve(&field, &closeness, &detector)?
        }
        Method::Seg => baseline_segmentation(&rasterize_curve(&fixture.curve, &fixture.grid)?, &detector)?,
        Method::Htmp => {
            let closeness = corrupt_closeness(&closeness_map(&fixture.field, hyper.r_c)?, noise.flip_rate, flip_seed)?;
            let distances = perturb_scalar(&distance_map(&fixture.field), noise.sigma, field_seed)?;
            baseline_heatmap(&distances, &closeness, config.heatmap_tau, &detector)?
        }
    };
    curve_metrics(&detection.curve, &fixture.curve, &config.thresholds, config.metric_step)
}

struct RowKey {
    method: Method,
    noise: NoiseLevel,
    hyper: HyperPoint,
}

impl RowKey {
    fn of(config: &SuiteConfig, c: &Cell) -> Self {
        Self { method: config.methods[c.method], noise: config.noise[c.noise], hyper: config.hyper[c.hyper] }
    }

    fn row(&self, fixture: &str, ok: &[&MetricReport], failures: usize, thresholds: &[f64]) -> Row {
        let collect = |f: &dyn Fn(&MetricReport) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        Row {
            fixture: fixture.to_string(),
            method: self.method,
            sigma: self.noise.sigma,
            flip_rate: self.noise.flip_rate,
            r_c: self.hyper.r_c,
            r_f: self.hyper.r_f,
            t: self.hyper.t,
            runs: ok.len(),
            failures,
            hd: collect(&|m| m.hd),
            assd: collect(&|m| m.assd),
            sd: thresholds
                .iter()
                .map(|&tol| ThresholdStat { tolerance: tol, stat: collect(&|m| m.sd_at(tol).unwrap_or(f64::NAN)) })
                .collect(),
        }
    }
}

pub fn build_fixtures(config: &SuiteConfig) -> Result<Vec<Fixture>> {
    config
        .specs()
        .iter()
        .map(|spec| {
            let curve = make_curve(spec)?.translated(Vec3::from(FIXTURE_OFFSET));
            Fixture::build(spec.name(), curve, config.spacing, config.margin, config.max_per_axis)
        })
        .collect()
}

pub fn run_benchmark(config: &SuiteConfig) -> Result<BenchReport> {
    run_benchmark_with(config, Execution::default())
}

/// Runs every cell; per-cell errors are recorded in the report, only
/// configuration and fixture construction errors abort the suite.
pub fn run_benchmark_with(config: &SuiteConfig, exec: Execution) -> Result<BenchReport> {
    config.validate()?;
    let fixtures = build_fixtures(config)?;

    let mut cells = Vec::new();
    for fixture in 0..fixtures.len() {
        for noise in 0..config.noise.len() {
            for hyper in 0..config.hyper.len() {
                for method in 0..config.methods.len() {
                    for repeat in 0..config.repeats {
                        cells.push(Cell { fixture, noise, hyper, method, repeat });
                    }
                }
            }
        }
    }
    let outcomes = exec.map(cells.len(), |i| {
        let c = &cells[i];
        let seed = cell_seed(config.master_seed, c.fixture, c.noise, c.hyper, c.repeat);
        (seed, run_cell(config, &fixtures[c.fixture], c, seed))
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    // Successful metrics per (noise, hyper, method), pooled over fixtures.
    let per_fixture = config.noise.len() * config.hyper.len() * config.methods.len();
    let mut pooled: Vec<(Vec<&MetricReport>, usize)> = vec![(Vec::new(), 0); per_fixture];
    for (group, chunk) in cells.chunks(config.repeats).zip(outcomes.chunks(config.repeats)) {
        let c = group[0];
        let key = RowKey::of(config, &c);
        let fixture = &fixtures[c.fixture].name;
        let mut ok = Vec::new();
        for (cell, (seed, outcome)) in group.iter().zip(chunk) {
            match outcome {
                Ok(m) => ok.push(m),
                Err(e) => failures.push(CellFailure {
                    fixture: fixture.clone(),
                    method: key.method,
                    sigma: key.noise.sigma,
                    r_c: key.hyper.r_c,
                    r_f: key.hyper.r_f,
                    t: key.hyper.t,
                    repeat: cell.repeat,
                    seed: *seed,
                    error: e.to_string(),
                }),
            }
        }
        let slot = (c.noise * config.hyper.len() + c.hyper) * config.methods.len() + c.method;
        pooled[slot].0.extend(&ok);
        pooled[slot].1 += config.repeats - ok.len();
        rows.push(key.row(fixture, &ok, config.repeats - ok.len(), &config.thresholds));
    }
    let summary = cells[..per_fixture * config.repeats]
        .chunks(config.repeats)
        .zip(&pooled)
        .map(|(group, (ok, failed))| RowKey::of(config, &group[0]).row(ALL_FIXTURES, ok, *failed, &config.thresholds))
        .collect();
    Ok(BenchReport {
        format: REPORT_FORMAT.to_string(),
        master_seed: config.master_seed,
        config: config.clone(),
        rows,
        summary,
        failures,
    })
}
