//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p curvefield --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curvefield::bench::{run_benchmark, Method, NoiseLevel, SuiteConfig, ALL_FIXTURES};
use curvefield::groundtruth::attraction_field_brute_force;
use curvefield::loss::BCE_EPSILON;
use curvefield::metrics::DEFAULT_THRESHOLDS;
use curvefield::synth::{
    add_distractor, corrupt_closeness, perturb_field, rasterize_curve, standard_fixtures, DistractorMode, Fixture,
};
use curvefield::*;

const SPACING: f64 = 2.0;
const R_C: f64 = 10.0;
const STEP: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn metrics(a: &Polyline, b: &Polyline) -> MetricReport {
    curve_metrics(a, b, &DEFAULT_THRESHOLDS, STEP).expect("metrics")
}

fn fixtures() -> Vec<Fixture> {
    standard_fixtures(SPACING).expect("standard fixtures")
}

fn oracle_round_trip() -> Outcome {
    let config = DetectorConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    let started = Instant::now();
    for spec_fixture in fixtures() {
        let t0 = Instant::now();
        // Rebuild inside the timer so field construction counts toward the budget.
        let f = Fixture::build(&spec_fixture.name, spec_fixture.curve.clone(), SPACING, 12.0, 64).unwrap();
        let closeness = f.closeness(R_C).unwrap();
        let m = detect_curve(&f.field, &closeness, &config).map(|d| metrics(&d.curve, &f.curve));
        let secs = t0.elapsed().as_secs_f64();
        let small = f.grid.shape().iter().all(|&n| n <= 64);
        match m {
            Ok(m) => {
                let sd1 = m.sd_at(1.0).unwrap();
                pass &= m.assd <= 0.1 && sd1 >= 0.99 && secs <= 60.0 && small;
                parts.push(format!("{} assd={:.4} sd1={:.4} {:.2}s", f.name, m.assd, sd1, secs));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{} error: {e}", f.name));
            }
        }
    }
    parts.push(format!("total {:.1}s", started.elapsed().as_secs_f64()));
    outcome(pass, parts.join("; "))
}

fn subpixel() -> Outcome {
    let config = DetectorConfig::default();
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for f in fixtures() {
        let closeness = f.closeness(R_C).unwrap();
        let mut fixture_worst = 0.0f64;
        for seed in 0..10u64 {
            let field = perturb_field(&f.field, 0.5, 1_000 + seed).unwrap();
            let flipped = corrupt_closeness(&closeness, 0.05, 2_000 + seed).unwrap();
            match detect_curve(&field, &flipped, &config) {
                Ok(d) => fixture_worst = fixture_worst.max(metrics(&d.curve, &f.curve).assd),
                Err(e) => errors.push(format!("{} seed {seed}: {e}", f.name)),
            }
        }
        worst = worst.max(fixture_worst);
    }
    let pass = errors.is_empty() && worst < 2.0;
    outcome(pass, format!("worst ASSD over 5 fixtures x 10 seeds = {worst:.3} mm; errors: {errors:?}"))
}

fn raster_limit() -> Outcome {
    let config = DetectorConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for f in fixtures().into_iter().filter(|f| f.name == "helix" || f.name == "cane") {
        let closeness = f.closeness(R_C).unwrap();
        let ours = metrics(&detect_curve(&f.field, &closeness, &config).unwrap().curve, &f.curve).assd;
        let mask = rasterize_curve(&f.curve, &f.grid).unwrap();
        let seg = metrics(&baseline_segmentation(&mask, &config).unwrap().curve, &f.curve).assd;
        let htmp = metrics(
            &baseline_heatmap(&distance_map(&f.field), &closeness, SPACING, &config).unwrap().curve,
            &f.curve,
        )
        .assd;
        pass &= seg >= 3.0 * ours && htmp >= 3.0 * ours;
        parts.push(format!(
            "{} ours={ours:.4} seg={seg:.3} ({:.1}x) htmp={htmp:.3} ({:.1}x)",
            f.name,
            seg / ours,
            htmp / ours
        ));
    }
    outcome(pass, parts.join("; "))
}

fn closeness_ablation() -> Outcome {
    let config = DetectorConfig::default();
    let truth = Polyline::new(vec![Vec3::new(0.37, 0.61, 0.23), Vec3::new(10.37, 6.61, 80.23)]).unwrap();
    // Parallel copy 16 mm away, beyond R_c = 10.
    let distractor = truth.translated(Vec3::new(16.0, 0.0, 0.0));
    let grid = Grid3::new([30, 22, 54], Spacing::isotropic(SPACING).unwrap(), Vec3::new(-12.0, -14.0, -12.0)).unwrap();
    let gap = curvefield::metrics::directed_distances(&distractor, &truth, STEP, Execution::default())
        .unwrap()
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    let field = attraction_field(&grid, &truth);
    let closeness = closeness_map(&field, R_C).unwrap();
    let (ours_field, ours_closeness) =
        add_distractor(&field, &closeness, &distractor, 5.0, DistractorMode::Ours).unwrap();
    let ours_assd = detect_curve(&ours_field, &ours_closeness, &config)
        .map(|d| metrics(&d.curve, &truth).assd)
        .unwrap_or(f64::INFINITY);

    let (att_field, _) = add_distractor(&field, &closeness, &distractor, 5.0, DistractorMode::Att).unwrap();
    let bypassed = ScalarField::filled(grid.clone(), 1.0);
    let cloud = extract_point_cloud(&att_field, &bypassed, &config).unwrap();
    let near = cloud.points().iter().filter(|p| project_to_polyline(p, &distractor).distance <= 1.0).count();

    let pass = gap > R_C && ours_assd < 2.0 && near >= 1;
    outcome(
        pass,
        format!("gap={gap:.2} mm; ours ASSD={ours_assd:.4} mm; att cloud has {near} of {} points within 1 mm of distractor", cloud.len()),
    )
}

fn random_field(grid: &Grid3, rng: &mut ChaCha8Rng, scale: f64) -> VectorField {
    let v = (0..grid.len())
        .map(|_| Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect();
    VectorField::new(grid.clone(), v).unwrap()
}

fn loss_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1055);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut perfect_worst = 0.0f64;
    let mut rotation_worst = 0.0f64;
    for case in 0..40 {
        let grid = Grid3::new(
            [4, 4, 4],
            Spacing::new(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)).unwrap(),
            Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
        )
        .unwrap();
        let gt = random_field(&grid, &mut rng, 6.0);
        let pred = random_field(&grid, &mut rng, 6.0);
        let (r_c, r_f) = (rng.random_range(4.0..10.0), rng.random_range(3.0..8.0));
        let squared = case % 2 == 1;
        let gt_c = closeness_map(&gt, r_c).unwrap();
        let pred_c = ScalarField::new(grid.clone(), (0..64).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let Ok(report) = total_loss(&pred, &gt, &pred_c, &gt_c, r_c, r_f, squared) else {
            continue;
        };
        cases += 1;

        let (mut fsum, mut fn_, mut nsum, mut nn, mut csum) = (0.0, 0, 0.0, 0, 0.0);
        for l in 0..grid.len() {
            let (p, g) = (pred.vectors()[l], gt.vectors()[l]);
            let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            let pn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let d = ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt();
            if gn <= r_f {
                fsum += if squared { d * d } else { d };
                fn_ += 1;
            }
            if gn <= r_c {
                nsum += (pn - gn).abs();
                nn += 1;
            }
            let c = if gn <= r_c { 1.0 } else { 0.0 };
            let q = pred_c.values()[l].clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            csum += -(c * q.ln() + (1.0 - c) * (1.0 - q).ln());
        }
        let expect = [fsum / fn_ as f64, csum / 64.0, nsum / nn as f64];
        let got = [report.field_loss, report.closeness_loss, report.norm_loss];
        for (e, g) in expect.iter().zip(got) {
            worst = worst.max((e - g).abs());
        }
        worst = worst.max((report.total - (got[0] + got[1] + got[2])).abs());

        let perfect = total_loss(&gt, &gt, &gt_c, &gt_c, r_c, r_f, squared).unwrap();
        perfect_worst = perfect_worst.max(perfect.total);

        // Quarter turns about z and half turns about x or y: norm-preserving
        // rotations, drawn independently per voxel.
        let rotated: Vec<Vec3> = gt
            .vectors()
            .iter()
            .map(|v| {
                let v = match rng.random_range(0..4) {
                    0 => *v,
                    1 => Vec3::new(-v.y, v.x, v.z),
                    2 => Vec3::new(-v.x, -v.y, v.z),
                    _ => Vec3::new(v.y, -v.x, v.z),
                };
                if rng.random_bool(0.5) {
                    Vec3::new(v.x, -v.y, -v.z)
                } else {
                    v
                }
            })
            .collect();
        let rotated = VectorField::new(grid.clone(), rotated).unwrap();
        rotation_worst = rotation_worst.max(norm_loss(&rotated, &gt, r_c).unwrap());
    }
    let pass = cases >= 20 && worst <= 1e-12 && perfect_worst <= 1e-6 && rotation_worst == 0.0;
    outcome(
        pass,
        format!("{cases} cases; max |lib - oracle| = {worst:.2e}; perfect total <= {perfect_worst:.2e}; rotated norm_loss max = {rotation_worst:e}"),
    )
}

fn random_curve(rng: &mut ChaCha8Rng) -> Polyline {
    let n = rng.random_range(2..12);
    let mut p = Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    let mut pts = vec![p];
    for _ in 1..n {
        p += Vec3::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        pts.push(p);
    }
    Polyline::from_points_dedup(pts).unwrap()
}

fn metric_suite() -> Outcome {
    let c = Polyline::new(vec![Vec3::zeros(), Vec3::new(10.0, 4.0, 0.0), Vec3::new(14.0, 12.0, 9.0)]).unwrap();
    let id = metrics(&c, &c);
    let id_ok = id.hd <= 1e-9 && id.assd <= 1e-9 && id.sd_at(1.0) == Some(1.0) && id.sd_at(3.0) == Some(1.0);

    let a = Polyline::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 50.0)]).unwrap();
    let b = a.translated(Vec3::new(2.0, 0.0, 0.0));
    let off = metrics(&a, &b);
    let off_ok = (off.hd - 2.0).abs() <= 1e-6
        && (off.assd - 2.0).abs() <= 1e-6
        && off.sd_at(1.0) == Some(0.0)
        && off.sd_at(3.0) == Some(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(0x3e7);
    let mut asym = 0;
    let mut order = 0;
    for _ in 0..100 {
        let (x, y) = (random_curve(&mut rng), random_curve(&mut rng));
        let (xy, yx) = (metrics(&x, &y), metrics(&y, &x));
        asym += usize::from(xy != yx);
        order += usize::from(xy.hd < xy.assd);
    }
    let pass = id_ok && off_ok && asym == 0 && order == 0;
    outcome(
        pass,
        format!(
            "identity ({:.1e}, {:.1e}, {:?}, {:?}); offset ({:.9}, {:.9}, {:?}, {:?}); 100 pairs: {asym} asymmetric, {order} with HD < ASSD",
            id.hd,
            id.assd,
            id.sd_at(1.0).unwrap(),
            id.sd_at(3.0).unwrap(),
            off.hd,
            off.assd,
            off.sd_at(1.0).unwrap(),
            off.sd_at(3.0).unwrap()
        ),
    )
}

fn sweep() -> Outcome {
    let config = SuiteConfig {
        noise: vec![NoiseLevel { sigma: 0.0, flip_rate: 0.0 }, NoiseLevel { sigma: 0.5, flip_rate: 0.05 }],
        hyper: SuiteConfig::sweep(&[5.0, 10.0, 20.0], &[5.0, 10.0, 20.0], 0.5),
        ..Default::default()
    };
    let first = run_benchmark(&config).unwrap();
    let second = run_benchmark(&config).unwrap();
    let identical = first.to_json().unwrap() == second.to_json().unwrap()
        && first.to_csv() == second.to_csv()
        && first.to_markdown() == second.to_markdown();

    let mut cells = 0;
    let mut below = 0;
    let mut margin = f64::INFINITY;
    let mut fixture_cells = 0;
    let mut fixture_below = 0;
    let fixture_names: Vec<String> = fixtures().into_iter().map(|f| f.name).collect();
    for h in &config.hyper {
        let assd = |fixture: &str, m, sigma| first.find(fixture, m, sigma, h.r_c, h.r_f).and_then(|r| r.assd).map(|s| s.mean);
        let best_baseline = |fixture: &str| {
            Some(assd(fixture, Method::Seg, 0.0)?.min(assd(fixture, Method::Htmp, 0.0)?))
        };
        cells += 1;
        if let (Some(ours), Some(base)) = (assd(ALL_FIXTURES, Method::Ours, 0.5), best_baseline(ALL_FIXTURES)) {
            below += usize::from(ours < base);
            margin = margin.min(base - ours);
        }
        for name in &fixture_names {
            fixture_cells += 1;
            if let (Some(ours), Some(base)) = (assd(name, Method::Ours, 0.5), best_baseline(name)) {
                fixture_below += usize::from(ours < base);
            }
        }
    }
    let pass = identical && first.failures.is_empty() && below == cells;
    outcome(
        pass,
        format!(
            "byte-identical={identical}; failures={}; {below}/{cells} (R_c, R_f) cells below both noiseless baselines (min margin {margin:.3} mm); per fixture {fixture_below}/{fixture_cells}",
            first.failures.len()
        ),
    )
}

fn acceleration_exact() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce1);
    let mut mismatched = 0;
    let mut voxels = 0;
    for _ in 0..20 {
        let shape = [rng.random_range(4..24), rng.random_range(4..24), rng.random_range(4..24)];
        let spacing =
            Spacing::new(rng.random_range(0.3..3.0), rng.random_range(0.3..3.0), rng.random_range(0.3..3.0)).unwrap();
        let origin = Vec3::new(rng.random_range(-20.0..0.0), rng.random_range(-20.0..0.0), rng.random_range(-20.0..0.0));
        let grid = Grid3::new(shape, spacing, origin).unwrap();
        let curve = random_curve(&mut rng);
        let fast = attraction_field(&grid, &curve);
        let slow = attraction_field_brute_force(&grid, &curve, Execution::default());
        voxels += grid.len();
        mismatched += fast
            .vectors()
            .iter()
            .zip(slow.vectors())
            .filter(|(a, b)| a.iter().zip(b.iter()).any(|(x, y)| x.to_bits() != y.to_bits()))
            .count();
    }
    outcome(mismatched == 0, format!("20 pairs, {voxels} voxels, {mismatched} differ bitwise"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("oracle round-trip", oracle_round_trip),
        ("subpixel accuracy under noise", subpixel),
        ("raster-limit contrast", raster_limit),
        ("closeness-head ablation", closeness_ablation),
        ("loss oracle suite", loss_suite),
        ("metric oracle suite", metric_suite),
        ("hyperparameter sweep", sweep),
        ("exact spatial acceleration", acceleration_exact),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t0 = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "[{}] {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
