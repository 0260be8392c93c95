//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion, and exits non-zero if any criterion fails.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use sphere_tmsm::bench::io::{latlon_to_unit, read_boundary_csv, unit_to_latlon};
use sphere_tmsm::bench::{
    benchmark_rows, replicate_dataset, run_benchmark, storm_report, summarize, BenchmarkRow,
    EventData, Experiment, ExperimentConfig, GeoEventRecord, Method, USA_OUTLINE_CSV,
};
use sphere_tmsm::boundary::{g_haversine, g_projected_euclidean};
use sphere_tmsm::estimator::ibp_refinement;
use sphere_tmsm::sampling::{sample_kent, sample_vmf};
use sphere_tmsm::{
    tmsm_objective, Boundary, ColatitudeSide, Dataset, GKind, KentParams, ModelParams, Scaling,
    SphericalCoord, UnitVector, VmfParams,
};

use common::*;

/// Collected sub-checks of one criterion.
#[derive(Default)]
struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.lines.push((ok, what.into()));
    }

    fn within(&mut self, start: Instant, limit: Duration) {
        let t = start.elapsed();
        self.check(
            t < limit,
            format!("runtime {:.1}s < {}s", t.as_secs_f64(), limit.as_secs()),
        );
    }
}

fn v3(v: &Vector3<f64>) -> V3 {
    [v.x, v.y, v.z]
}

fn unit(x: &V3) -> UnitVector {
    UnitVector::new(x[0], x[1], x[2]).unwrap()
}

fn hemisphere() -> Boundary {
    Boundary::colatitude(FRAC_PI_2, ColatitudeSide::Greater).unwrap()
}

fn equator_mu() -> UnitVector {
    SphericalCoord::new(FRAC_PI_2, PI).unwrap().to_euclidean()
}

fn means(
    rows: &[BenchmarkRow],
    method: Method,
    n: usize,
    f: fn(&BenchmarkRow) -> Option<f64>,
) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.n == n)
        .filter_map(f)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let b = hemisphere();
    let truth: ModelParams = VmfParams::new(equator_mu(), 6.0).unwrap().into();
    let model: ModelParams = VmfParams::new(
        SphericalCoord::new(FRAC_PI_2 + 0.4, PI - 0.5)
            .unwrap()
            .to_euclidean(),
        3.5,
    )
    .unwrap()
    .into();
    let checks = ibp_refinement(&model, &truth, &b, GKind::Haversine, &[100, 200, 400]).unwrap();
    let gaps: Vec<f64> = checks.iter().map(|c| c.gap).collect();
    let fine = checks[2];
    r.check(
        fine.gap < 1e-3,
        format!("Haversine gap {:.2e} < 1e-3 at 400x400", fine.gap),
    );
    r.check(
        gaps.windows(2).all(|w| w[1] < w[0]),
        format!(
            "gap decreases under refinement {:?}",
            gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>()
        ),
    );
    let unit_g = ibp_refinement(&model, &truth, &b, GKind::Unit, &[400]).unwrap()[0];
    r.check(
        unit_g.gap >= 10.0 * fine.gap,
        format!("g = 1 gap {:.2e} >= 10x compliant gap", unit_g.gap),
    );
    r.within(start, Duration::from_secs(30));
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    let mut rng = TestRng::new(2);
    let (mut score_err, mut jac_err, mut lap_err) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let (a, b) = rng.chart_point_between(0.2, PI - 0.2);
        let x = chart_point(a, b);
        let mu = unit(&chart_point(rng.range(0.0, PI), rng.range(0.0, 2.0 * PI)));
        let kappa = rng.range(0.5, 20.0);
        let (params, log_density): (ModelParams, Box<dyn Fn(&V3) -> f64>) = if i % 2 == 0 {
            let m = v3(&mu.vector());
            (
                VmfParams::new(mu, kappa).unwrap().into(),
                Box::new(move |y| vmf_log_density(&m, kappa, y)),
            )
        } else {
            let alpha = rng.range(0.0, 0.49) * kappa;
            let hint = Vector3::new(
                rng.range(-1.0, 1.0),
                rng.range(-1.0, 1.0),
                rng.range(-1.0, 1.0),
            );
            let k = KentParams::new(mu, &hint, kappa, alpha).unwrap();
            let frame = [
                v3(&k.mu.vector()),
                v3(&k.gamma1.vector()),
                v3(&k.gamma2.vector()),
            ];
            (
                k.into(),
                Box::new(move |y| kent_log_density(&frame, kappa, alpha, y)),
            )
        };
        let xu = unit(&x);
        let score = v3(&params.score(&xu));
        score_err = score_err.max(max_abs_diff(&score, &fd_gradient(&log_density, &x, 1e-5)));
        let hess = fd_hessian(&log_density, &x, 1e-3);
        let jac = params.score_jacobian(&xu);
        for (row, hrow) in hess.iter().enumerate() {
            for (col, h) in hrow.iter().enumerate() {
                jac_err = jac_err.max((jac[(row, col)] - h).abs());
            }
        }
        let lap = chart_laplacian(&log_density, a, b, 1e-4);
        lap_err = lap_err.max((params.laplacian_term(&xu) - lap).abs() / lap.abs().max(1.0));
    }
    r.check(
        score_err < 1e-6,
        format!("score max error {score_err:.1e} < 1e-6"),
    );
    r.check(
        jac_err < 1e-5,
        format!("score Jacobian max error {jac_err:.1e} < 1e-5"),
    );
    r.check(
        lap_err < 1e-4,
        format!("Laplace-Beltrami max error {lap_err:.1e} < 1e-4"),
    );

    // scaling functions on two constant-colatitude regions with closed forms:
    // geodesic g = |a − a0|, projected g = |sin a0 − sin a| after dropping x1
    let regions = [
        (FRAC_PI_2, ColatitudeSide::Greater),
        (1.1, ColatitudeSide::Less),
    ];
    let (mut hav_err, mut proj_err) = (0.0f64, 0.0f64);
    for (a0, side) in regions {
        let boundary = Boundary::colatitude(a0, side).unwrap();
        let (lo, hi) = match side {
            ColatitudeSide::Greater => (a0 + 0.02, PI - 0.2),
            ColatitudeSide::Less => (0.2, a0 - 0.02),
        };
        let hav = |y: &V3| {
            let a = normalize(y)[0].clamp(-1.0, 1.0).acos();
            (a - a0).abs()
        };
        let proj = |y: &V3| {
            let a = normalize(y)[0].clamp(-1.0, 1.0).acos();
            (a0.sin() - a.sin()).abs()
        };
        for _ in 0..100 {
            let (a, b) = rng.chart_point_between(lo, hi);
            let x = chart_point(a, b);
            let xu = unit(&x);
            let gh = g_haversine(&boundary, &xu);
            let gp = g_projected_euclidean(&boundary, &xu, 0).unwrap();
            let fh = fd_gradient(hav, &x, 1e-6);
            let fp = fd_gradient(proj, &x, 1e-6);
            hav_err = hav_err
                .max((gh.g - hav(&x)).abs())
                .max(max_abs_diff(&tangent(&x, &v3(&gh.grad)), &tangent(&x, &fh)));
            proj_err = proj_err
                .max((gp.g - proj(&x)).abs())
                .max(max_abs_diff(&tangent(&x, &v3(&gp.grad)), &tangent(&x, &fp)));
        }
    }
    r.check(
        hav_err < 1e-4,
        format!("Haversine g and gradient max error {hav_err:.1e} < 1e-4"),
    );
    r.check(
        proj_err < 1e-4,
        format!("projected g and gradient max error {proj_err:.1e} < 1e-4"),
    );
    r.within(start, Duration::from_secs(10));
}

fn criterion_3(r: &mut Report) {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        methods: vec![Method::TmsmHaversine, Method::TmsmProjected, Method::Mle],
        ..ExperimentConfig::new(Experiment::VmfKnownKappa)
    };
    assert_eq!(cfg.n_grid, [125, 250, 500, 1000, 2000]);
    assert_eq!(cfg.replicates, 64);
    let rows = benchmark_rows(&cfg).unwrap();
    r.check(
        rows.iter().all(|r| r.error.is_none()),
        "every replicate succeeded",
    );
    let rmse = |m, n| means(&rows, m, n, |r| r.rmse_embedding);
    let hav: Vec<f64> = cfg
        .n_grid
        .iter()
        .map(|&n| rmse(Method::TmsmHaversine, n))
        .collect();
    let proj: Vec<f64> = cfg
        .n_grid
        .iter()
        .map(|&n| rmse(Method::TmsmProjected, n))
        .collect();
    let mle: Vec<f64> = cfg.n_grid.iter().map(|&n| rmse(Method::Mle, n)).collect();
    r.check(
        hav.windows(2).all(|w| w[1] < w[0]),
        format!("(a) TMSM-Haversine RMSE strictly decreasing {hav:.4?}"),
    );
    r.check(
        hav.iter()
            .zip(&proj)
            .zip(&mle)
            .all(|((h, p), m)| h < m && p < m),
        format!("(b) TMSM below MLE {mle:.4?}"),
    );
    let rel: Vec<f64> = hav
        .iter()
        .zip(&proj)
        .map(|(h, p)| (h - p).abs() / h.min(*p))
        .collect();
    r.check(
        rel.iter().all(|&x| x <= 0.2),
        format!("(c) Haversine vs projected relative gap <= 20% {rel:.3?} (projected {proj:.4?})"),
    );
    r.within(start, Duration::from_secs(600));
}

fn criterion_4(r: &mut Report) {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        methods: vec![
            Method::TmsmHaversine,
            Method::TmsmProjected,
            Method::Truncsm,
        ],
        ..ExperimentConfig::new(Experiment::VmfUnknownKappa)
    };
    let rows = benchmark_rows(&cfg).unwrap();
    r.check(
        rows.iter().all(|r| r.error.is_none()),
        "every replicate succeeded",
    );
    let tm = means(&rows, Method::TmsmHaversine, 2000, |r| r.rmse_embedding);
    let tp = means(&rows, Method::TmsmProjected, 2000, |r| r.rmse_embedding);
    let ts = means(&rows, Method::Truncsm, 2000, |r| r.rmse_embedding);
    r.check(
        tm < ts && tp < ts,
        format!("n = 2000 RMSE: TMSM-Haversine {tm:.4}, TMSM-projected {tp:.4} < TruncSM {ts:.4}"),
    );
    let kerr: Vec<f64> = cfg
        .n_grid
        .iter()
        .map(|&n| means(&rows, Method::TmsmHaversine, n, |r| r.kappa_error))
        .collect();
    r.check(
        kerr.windows(2).all(|w| w[1] < w[0]),
        format!("TMSM |kappa - 6| decreasing {kerr:.3?}"),
    );
    r.within(start, Duration::from_secs(600));
}

fn criterion_5(r: &mut Report) {
    let cfg = ExperimentConfig {
        n_grid: vec![1000],
        methods: vec![Method::TmsmHaversine, Method::Mle],
        ..ExperimentConfig::new(Experiment::KentKnownShape)
    };
    let truth = cfg.truth.unwrap();
    assert_eq!((truth.kappa, truth.alpha), (10.0, 3.0));
    let rows = benchmark_rows(&cfg).unwrap();
    let err = |m: Method| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.method == m)
            .map(|r| r.geodesic_error_rad.expect("fit succeeded"))
            .collect()
    };
    let (tmsm, mle) = (err(Method::TmsmHaversine), err(Method::Mle));
    let wins = tmsm.iter().zip(&mle).filter(|(t, m)| t < m).count();
    r.check(
        wins * 100 >= 60 * tmsm.len(),
        format!(
            "TMSM nearer the truth in {wins}/{} replicates (>= 60%)",
            tmsm.len()
        ),
    );
}

fn criterion_6(r: &mut Report) {
    let mut unit_err = 0.0f64;
    for (i, kappa) in [1.0, 6.0, 10.0].into_iter().enumerate() {
        let mu = unit(&normalize(&[0.3, -0.5, 0.8]));
        let xs = sample_vmf(&VmfParams::new(mu, kappa).unwrap(), 100_000, 60 + i as u64);
        let sum: Vector3<f64> = xs.iter().map(|x| x.vector()).sum();
        let rbar = sum.norm() / xs.len() as f64;
        let expect = vmf_mean_resultant_length(kappa);
        r.check(
            (rbar - expect).abs() < 0.01,
            format!("vMF kappa = {kappa}: mean resultant {rbar:.4} vs {expect:.4}"),
        );
        unit_err = xs
            .iter()
            .map(|x| (x.norm() - 1.0).abs())
            .fold(unit_err, f64::max);
    }

    let mu = unit(&normalize(&[-0.2, 0.7, 0.4]));
    let kent = KentParams::new(mu, &Vector3::new(0.0, 0.0, 1.0), 10.0, 3.0).unwrap();
    let frame = [
        v3(&kent.mu.vector()),
        v3(&kent.gamma1.vector()),
        v3(&kent.gamma2.vector()),
    ];
    let (m1, m2) = quadrature_moments(|x| kent_log_density(&frame, 10.0, 3.0, x), 400);
    let xs = sample_kent(&kent, 100_000, 66).unwrap();
    let n = xs.len() as f64;
    let mut s1 = [0.0; 3];
    let mut s2 = [[0.0; 3]; 3];
    for x in &xs {
        for a in 0..3 {
            s1[a] += x[a] / n;
            for b in 0..3 {
                s2[a][b] += x[a] * x[b] / n;
            }
        }
    }
    let e1 = max_abs_diff(&s1, &m1);
    let e2 = (0..3)
        .map(|a| max_abs_diff(&s2[a], &m2[a]))
        .fold(0.0, f64::max);
    r.check(
        e1 < 0.01 && e2 < 0.01,
        format!("Kent (10, 3) moments vs quadrature: first {e1:.4}, second {e2:.4}"),
    );
    unit_err = xs
        .iter()
        .map(|x| (x.norm() - 1.0).abs())
        .fold(unit_err, f64::max);
    r.check(
        unit_err <= 1e-12,
        format!("unit norm error {unit_err:.1e} <= 1e-12"),
    );
}

fn criterion_7(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        n_grid: vec![100, 200],
        replicates: 4,
        seed: 77,
        methods: Method::ALL.to_vec(),
        ..ExperimentConfig::new(Experiment::VmfUnknownKappa)
    };
    let runs: Vec<_> = [(1, "a"), (1, "b"), (4, "c")]
        .into_iter()
        .map(|(workers, name)| {
            let cfg = ExperimentConfig {
                workers: Some(workers),
                out_dir: dir.path().join(name),
                ..base.clone()
            };
            let out = run_benchmark(&cfg).unwrap();
            (
                std::fs::read(out.csv_path).unwrap(),
                std::fs::read(out.summary_path).unwrap(),
            )
        })
        .collect();
    r.check(
        runs[0] == runs[1] && runs[0] == runs[2],
        "repeated runs and different worker counts give byte-identical CSV and JSON",
    );
    let rows = benchmark_rows(&base).unwrap();
    r.check(
        summarize(&base, &rows)
            == run_benchmark(&ExperimentConfig {
                out_dir: dir.path().join("d"),
                ..base.clone()
            })
            .unwrap()
            .summary,
        "summary recomputed from rows matches",
    );

    let mut rng = TestRng::new(7);
    let b = hemisphere();
    let scalings = [
        Scaling::new(GKind::Haversine, &b).unwrap(),
        Scaling::new(GKind::Projected, &b).unwrap(),
        Scaling::new(GKind::Unit, &b).unwrap(),
    ];
    let datasets: Vec<Dataset> = (0..20)
        .map(|_| {
            let pts = (0..25)
                .map(|_| {
                    let (a, bb) = rng.chart_point_between(FRAC_PI_2 + 1e-9, PI);
                    unit(&chart_point(a, bb))
                })
                .collect();
            Dataset::new(pts).unwrap()
        })
        .collect();
    let mut bad = 0;
    for i in 0..100_000 {
        let mu = unit(&chart_point(rng.range(0.0, PI), rng.range(0.0, 2.0 * PI)));
        let kappa = 10f64.powf(rng.range(-3.0, 3.0));
        let params: ModelParams = if i % 2 == 0 {
            VmfParams::new(mu, kappa).unwrap().into()
        } else {
            let hint = Vector3::new(
                rng.range(-1.0, 1.0),
                rng.range(-1.0, 1.0),
                rng.range(-1.0, 1.0),
            );
            match KentParams::new(mu, &hint, kappa, rng.range(0.0, 0.4999) * kappa) {
                Ok(k) => k.into(),
                Err(_) => VmfParams::new(mu, kappa).unwrap().into(),
            }
        };
        let t = tmsm_objective(&params, &datasets[i % datasets.len()], &scalings[i % 3]).unwrap();
        if ![t.inner_term, t.laplacian_term, t.gradient_g_term, t.total]
            .iter()
            .all(|v| v.is_finite())
        {
            bad += 1;
        }
    }
    r.check(
        bad == 0,
        format!("{bad} non-finite results in 100000 objective evaluations"),
    );
}

fn criterion_8(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("usa.csv");
    std::fs::write(&path, USA_OUTLINE_CSV).unwrap();
    let boundary = Boundary::polyline(read_boundary_csv(&path).unwrap(), 4096).unwrap();
    // storm centre over the Atlantic, east of the Carolinas
    let centre = latlon_to_unit(30.0, -72.0).unwrap();
    assert!(!boundary.contains(&centre));
    let truth: ModelParams = VmfParams::new(centre, 10.0).unwrap().into();
    let methods = [Method::Mle, Method::TmsmHaversine, Method::TmsmProjected];
    let (mut wins_h, mut wins_p) = (0, 0);
    for seed in 0..32u64 {
        let data = replicate_dataset(&truth, &boundary, 1000, seed).unwrap();
        let events = EventData {
            records: data
                .points()
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let (lat, lon) = unit_to_latlon(x);
                    GeoEventRecord {
                        id: i.to_string(),
                        lat,
                        lon,
                        timestamp: None,
                    }
                })
                .collect(),
            points: data.points().to_vec(),
            skipped: 0,
        };
        let report = storm_report(&events, &boundary, &methods, seed).unwrap();
        let err = |m| {
            report
                .estimate(m)
                .and_then(|e| e.direction())
                .map_or(f64::INFINITY, |d| d.angle_to(&centre))
        };
        let mle = err(Method::Mle);
        wins_h += usize::from(err(Method::TmsmHaversine) < mle);
        wins_p += usize::from(err(Method::TmsmProjected) < mle);
    }
    r.check(
        wins_h >= 24,
        format!("TMSM-Haversine nearer the truth than MLE in {wins_h}/32 runs (>= 24)"),
    );
    r.check(
        true,
        format!("TMSM-projected nearer in {wins_p}/32 runs (informational)"),
    );
}

fn main() {
    let criteria: [(&str, fn(&mut Report)); 8] = [
        ("1 integration-by-parts identity", criterion_1),
        ("2 derivative correctness", criterion_2),
        ("3 known-kappa vMF benchmark", criterion_3),
        ("4 unknown-kappa vMF benchmark", criterion_4),
        ("5 Kent benchmark", criterion_5),
        ("6 sampler fidelity", criterion_6),
        ("7 determinism and robustness", criterion_7),
        ("8 storm surrogate", criterion_8),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let mut report = Report::default();
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| run(&mut report)));
        if let Err(e) = outcome {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            report.check(false, format!("panicked: {msg}"));
        }
        let ok = !report.lines.is_empty() && report.lines.iter().all(|(ok, _)| *ok);
        failed += usize::from(!ok);
        println!(
            "criterion {name}: {} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for (ok, line) in &report.lines {
            println!("    [{}] {line}", if *ok { "ok" } else { "failed" });
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
