//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Lines go straight to stderr so they appear with or without
//! `--nocapture`. The test fails if any criterion fails.

use std::io::Write;
use std::time::Instant;

use qbell::cglmp;
use qbell::entgeo::{self, BoundaryKind, BoundarySpec};
use qbell::linalg::{hermitian_eigenvalues, CMat};
use qbell::optimize::{self, OptimizerConfig};
use qbell::par::Execution;
use qbell::qstate::{bell_projector, family_state, partial_transpose, Family};
use qbell::scan::{self, Axis, Format, Grid, Orthant, ScanJob, Slice, Task};
use qbell::uparam::{self, Form, ParamMatrix};
use qbell::verify;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: impl Into<String>) -> Outcome {
    Outcome { passed, summary: summary.into() }
}

fn line(text: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{text}");
}

fn criterion_1() -> Outcome {
    let report = verify::analytic_max(6, &OptimizerConfig::default()).unwrap();
    let worst = report.checks.iter().map(|c| (c.computed - c.expected).abs()).fold(0.0, f64::max);
    outcome(report.passed(), format!("d=2..6, worst |max I_d - closed form| = {worst:.2e} (tol 1e-5)"))
}

fn criterion_2() -> Outcome {
    let i2 = cglmp::cglmp_analytic_max(2).unwrap();
    let i1000 = cglmp::cglmp_analytic_max(1000).unwrap();
    let ok2 = (i2 - 2.82843).abs() <= 1e-5;
    let ok1000 = (i1000 - 2.96981).abs() <= 1e-4;
    outcome(
        ok2 && ok1000,
        format!(
            "I_2 = {i2:.6} (|d| {:.1e}, tol 1e-5); I_1000 = {i1000:.9} vs 2.96981 (|d| {:.1e}, tol 1e-4)",
            (i2 - 2.82843).abs(),
            (i1000 - 2.96981).abs()
        ),
    )
}

fn criterion_3() -> Outcome {
    let report = verify::local_bound(500, &OptimizerConfig::default().with_restarts(1)).unwrap();
    let product = report.checks.last().unwrap();
    outcome(
        report.passed(),
        format!("brute force = 2 for d=2,3,4; max over 500 product states = {:.12}", product.computed),
    )
}

fn criterion_4() -> Outcome {
    let nu =
        optimize::violation_boundary_nu(&bell_projector(3, 0, 0).unwrap(), 3, &OptimizerConfig::default()).unwrap();
    let expected = (6.0 * 3f64.sqrt() - 9.0) / 2.0;
    outcome((nu - expected).abs() <= 1e-4, format!("nu* = {nu:.10}, expected {expected:.10}"))
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let report = verify::horodecki(100, &OptimizerConfig::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let c = &report.checks[0];
    outcome(
        report.passed() && secs < 60.0,
        format!("100 states, worst |diff| = {:.2e} (tol 1e-5), {secs:.1} s", (c.computed - c.expected).abs()),
    )
}

/// Roots of `f` on `[lo, hi]` at each sign change of a 200-point sweep.
fn sweep_roots(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    let n = 200;
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut roots = Vec::new();
    for w in xs.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 || (fa > 0.0) == (fb > 0.0) {
            continue;
        }
        let sa = fa > 0.0;
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == sa {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

/// Interval of the first parameter where `point(a)` is a state. The
/// positivity conditions are affine in `a`.
fn positive_segment(family: Family, point: &dyn Fn(f64) -> Vec<f64>) -> (f64, f64) {
    let spec = BoundarySpec::new(family, BoundaryKind::Positivity);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..4 {
        let Ok(f0) = entgeo::boundary_value(&spec.component(i), &point(0.0)) else { break };
        let slope = entgeo::boundary_value(&spec.component(i), &point(1.0)).unwrap() - f0;
        if slope > 0.0 {
            lo = lo.max(-f0 / slope);
        } else if slope < 0.0 {
            hi = hi.min(-f0 / slope);
        }
    }
    (lo + 1e-9, hi - 1e-9)
}

fn criterion_6() -> Outcome {
    let sweeps: Vec<(Family, Vec<f64>)> = vec![
        (Family::TwoParam, vec![-0.05]),
        (Family::TwoParam, vec![0.1]),
        (Family::TwoParam, vec![0.0]),
        (Family::Line, vec![0.1, 0.05]),
        (Family::Line, vec![-0.05, 0.2]),
        (Family::Line, vec![0.2, 0.2]),
    ];
    let mut worst = 0.0f64;
    let mut crossings = 0;
    let mut mismatch = None;
    for (family, rest) in &sweeps {
        let point = |a: f64| {
            let mut p = vec![a];
            p.extend_from_slice(rest);
            p
        };
        let spec = BoundarySpec::new(*family, BoundaryKind::Ppt);
        let closed = |a: f64| entgeo::boundary_value(&spec, &point(a)).unwrap();
        let numeric = |a: f64| {
            let rho = family_state(*family, &point(a), 3).unwrap();
            hermitian_eigenvalues(partial_transpose(&rho, 3, 3).unwrap().matrix())[0]
        };
        let (lo, hi) = positive_segment(*family, &point);
        let (rc, rn) = (sweep_roots(&closed, lo, hi), sweep_roots(&numeric, lo, hi));
        if rc.len() != rn.len() || rc.is_empty() {
            mismatch = Some(format!("{family} {rest:?}: {} closed-form vs {} spectral crossings", rc.len(), rn.len()));
            continue;
        }
        crossings += rc.len();
        for (a, b) in rc.iter().zip(&rn) {
            worst = worst.max((a - b).abs());
        }
    }
    match mismatch {
        Some(m) => outcome(false, m),
        None => outcome(worst <= 1e-6, format!("{crossings} crossings in 6 sweeps over the positive segments, worst |d param| = {worst:.2e} (tol 1e-6)")),
    }
}

fn criterion_7() -> Outcome {
    let pts = verify::line_boundary_points(100, Orthant::Positive, &OptimizerConfig::default()).unwrap();
    let devs: Vec<f64> = pts.iter().map(|(_, b)| verify::sphere_deviation(b)).collect();
    let worst = devs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let bad = devs.iter().filter(|d| d.abs() >= 1e-3).count();
    outcome(
        pts.len() == 100 && worst < 1e-3,
        format!("{} positive boundary points, worst |dist - r| = {worst:.2e} (tol 1e-3), {bad} outside", pts.len()),
    )
}

fn criterion_8() -> Outcome {
    let pts = verify::line_boundary_points(100, Orthant::OneNegative, &OptimizerConfig::default()).unwrap();
    let closest: Vec<f64> = pts
        .iter()
        .map(|(_, b)| verify::plane_residuals(b).into_iter().map(f64::abs).fold(f64::INFINITY, f64::min))
        .collect();
    let worst = closest.iter().copied().fold(0.0, f64::max);
    let bad = closest.iter().filter(|r| **r > 1e-3).count();
    let tr = verify::fixture_trace().unwrap();
    let expected = 4.0 / (6.0 * 3f64.sqrt() - 9.0);
    let fixture_ok = (tr - expected).abs() <= 1e-6;
    outcome(
        bad == 0 && !pts.is_empty() && fixture_ok,
        format!(
            "{} one-negative boundary points, {bad} off every plane by > 1e-3 (worst {worst:.2e}); Tr(B P00) = {tr:.10} vs {expected:.10}",
            pts.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let points = verify::line_concurrence_points(0.02, &OptimizerConfig::default().with_restarts(3)).unwrap();
    let report = verify::line_concurrence_report(&points);
    let parts: Vec<String> =
        report.checks.iter().map(|c| format!("{}: {}", c.name, c.detail.clone().unwrap_or_default())).collect();
    outcome(report.passed(), format!("{} grid points; {}", points.len(), parts.join("; ")))
}

fn criterion_10() -> Outcome {
    let cfg = OptimizerConfig::default();
    let directions = [(1.0, 0.0), (0.8, 0.2), (0.5, 0.5), (0.2, 0.8), (0.0, 1.0)];
    let mut pts = Vec::new();
    for (a, b) in directions {
        let tau = family_state(Family::Line, &entgeo::equal_split(a, b), 3).unwrap();
        let nu = optimize::violation_boundary_nu(&tau, 3, &cfg).unwrap();
        let (ba, bb) = (nu * a, nu * b);
        let at =
            optimize::maximize_bell(&family_state(Family::Line, &entgeo::equal_split(ba, bb), 3).unwrap(), 3, &cfg)
                .unwrap();
        pts.push((ba, bb, at.value, entgeo::m_concurrence_line_analytic(ba, bb)));
    }
    let on_boundary: Vec<_> = pts.iter().filter(|p| (p.2 - 2.0).abs() <= 1e-4).collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..on_boundary.len() {
        for j in i + 1..on_boundary.len() {
            let gap = (on_boundary[i].3 - on_boundary[j].3).abs();
            if best.is_none_or(|b| gap > b.0) {
                best = Some((gap, i, j));
            }
        }
    }
    match best {
        Some((gap, i, j)) => {
            let (p, q) = (on_boundary[i], on_boundary[j]);
            outcome(
                gap > 0.05,
                format!(
                    "boundary points ({:.4}, {:.4}) and ({:.4}, {:.4}): I_3 = {:.6}, {:.6}; C_m^2 = {:.4}, {:.4}",
                    p.0, p.1, q.0, q.1, p.2, q.2, p.3, q.3
                ),
            )
        }
        None => outcome(false, format!("fewer than two boundary points with I_3 = 2 +- 1e-4: {pts:?}")),
    }
}

fn criterion_11() -> Outcome {
    let mut job = ScanJob::new(
        Family::Line,
        Grid::Rectilinear { axes: vec![Axis::new(-0.1, 0.9, 4), Axis::new(0.0, 0.8, 3)], slice: Slice::EqualSplit },
        vec![Task::Positivity, Task::Ppt, Task::Witness, Task::Cglmp, Task::Concurrence],
    );
    job.optimizer = OptimizerConfig::default().with_restarts(2).with_seed(42);
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, exec: Execution| {
        let path = dir.path().join(name);
        scan::run_and_write(&job, &path, Format::Csv, exec).unwrap();
        std::fs::read(&path).unwrap()
    };
    let (a, b, c) =
        (run("a.csv", Execution::Parallel), run("b.csv", Execution::Parallel), run("c.csv", Execution::Sequential));
    outcome(
        a == b && a == c,
        format!("3 reruns of a 12-point scan, {} bytes each, identical: {}", a.len(), a == b && a == c),
    )
}

fn criterion_12() -> Outcome {
    let mut worst_unitary = 0.0f64;
    let mut worst_block = 0.0f64;
    for d in 2..=8 {
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        let n = uparam::parameter_count(d, Form::Full);
        for _ in 0..1000 {
            let flat: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            let p = ParamMatrix::from_flat(d, Form::Full, &flat).unwrap();
            let u = uparam::composite_unitary(&p, Form::Full);
            let defect = (u.adjoint() * &u - CMat::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst_unitary = worst_unitary.max(defect);
            for m in 1..d {
                let g = uparam::group_product(&p, m);
                for i in 0..d {
                    for j in 0..d {
                        if (i < m) != (j < m) {
                            worst_block = worst_block.max(g[(i, j)].norm());
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst_unitary < 1e-12 && worst_block < 1e-12,
        format!("d=2..8 x 1000: max |U^dag U - 1| = {worst_unitary:.2e}, max invariant-block leak = {worst_block:.2e}"),
    )
}

#[test]
fn acceptance_criteria() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("analytic max reproduction", criterion_1),
        ("limit values", criterion_2),
        ("local bound", criterion_3),
        ("isotropic qutrit boundary", criterion_4),
        ("horodecki equivalence", criterion_5),
        ("ppt polynomial consistency", criterion_6),
        ("sphere fit", criterion_7),
        ("plane fit", criterion_8),
        ("line-state concurrence", criterion_9),
        ("non-monotonicity", criterion_10),
        ("determinism", criterion_11),
        ("unitarity and structure", criterion_12),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        line(&format!("criterion {:>2} {verdict} {name}: {} [{:.1} s]", i + 1, o.summary, t.elapsed().as_secs_f64()));
        if !o.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
