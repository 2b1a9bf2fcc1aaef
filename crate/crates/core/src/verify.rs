//! Verification suites: reference values recomputed from scratch and compared
//! against closed forms, with a printable report.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cglmp;
use crate::entgeo::{self, SPHERE_CENTER, SPHERE_RADIUS};
use crate::linalg::{self, kron};
use crate::optimize::{self, OptimizerConfig};
use crate::par;
use crate::qstate::{bell_projector, family_state, Family, Operator};
use crate::scan::{self, Grid, Orthant, ScanJob, Task};
use crate::{Error, Result};

/// Names accepted by [`run_suite`].
pub const SUITES: [&str; 5] = ["analytic-max", "local-bound", "horodecki", "line-concurrence", "sphere-fit"];

/// One compared quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

impl Check {
    /// `|computed - expected| <= tolerance`.
    pub fn close(name: impl Into<String>, expected: f64, computed: f64, tolerance: f64) -> Self {
        let passed = (computed - expected).abs() <= tolerance;
        Self { name: name.into(), expected, computed, tolerance, passed, detail: None }
    }

    /// `computed <= expected + tolerance`.
    pub fn at_most(name: impl Into<String>, expected: f64, computed: f64, tolerance: f64) -> Self {
        let passed = computed <= expected + tolerance;
        Self { name: name.into(), expected, computed, tolerance, passed, detail: None }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(suite: impl Into<String>) -> Self {
        Self { suite: suite.into(), checks: Vec::new() }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "suite: {}", self.suite)?;
        writeln!(f, "{:<width$}  {:>20}  {:>20}  {:>9}  result", "check", "expected", "computed", "tol")?;
        for c in &self.checks {
            write!(
                f,
                "{:<width$}  {:>20.12}  {:>20.12}  {:>9.1e}  {}",
                c.name,
                c.expected,
                c.computed,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            )?;
            if let Some(d) = &c.detail {
                write!(f, "  ({d})")?;
            }
            writeln!(f)?;
        }
        write!(f, "{} of {} checks passed", self.checks.len() - self.failures(), self.checks.len())
    }
}

/// Tunables for [`run_suite`]. Every field has a default matching the
/// acceptance thresholds.
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub optimizer: OptimizerConfig,
    pub dmax: usize,
    pub samples: usize,
    pub step: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { optimizer: OptimizerConfig::default(), dmax: 6, samples: 100, step: 0.02 }
    }
}

pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<Report> {
    let cfg = &opts.optimizer;
    match name {
        "analytic-max" => analytic_max(opts.dmax, cfg),
        "local-bound" => local_bound(opts.samples, cfg),
        "horodecki" => horodecki(opts.samples, cfg),
        "line-concurrence" => line_concurrence(opts.step, cfg),
        "sphere-fit" => sphere_fit(opts.samples, cfg),
        _ => Err(Error::Config(format!("unknown suite '{name}' (expected one of {})", SUITES.join(", ")))),
    }
}

pub const ANALYTIC_MAX_TOL: f64 = 1e-5;

/// Optimized `I_d` of `P_00` against the closed form, `d = 2..=dmax`.
pub fn analytic_max(dmax: usize, cfg: &OptimizerConfig) -> Result<Report> {
    if dmax < 2 {
        return Err(Error::InvalidDimension(dmax));
    }
    let mut report = Report::new("analytic-max");
    let rows = par::map_indexed(dmax - 1, |i| -> Result<Check> {
        let d = i + 2;
        let expected = cglmp::cglmp_analytic_max(d)?;
        let r = optimize::maximize_bell(&bell_projector(d, 0, 0)?, d, cfg)?;
        Ok(Check::close(format!("max I_{d}(P00)"), expected, r.value, ANALYTIC_MAX_TOL))
    });
    for row in rows {
        report.push(row?);
    }
    Ok(report)
}

pub const LOCAL_BOUND_TOL: f64 = 1e-6;
/// Roundoff in summing the `1 - 2k/(d-1)` weights.
pub const BRUTE_FORCE_TOL: f64 = 1e-12;

/// Brute-force local bound for `d = 2, 3, 4`, plus optimized `I_d` over
/// `samples` random pure product states (dimension cycling through 2, 3, 4).
pub fn local_bound(samples: usize, cfg: &OptimizerConfig) -> Result<Report> {
    let mut report = Report::new("local-bound");
    for d in 2..=cglmp::LOCAL_BOUND_MAX_D {
        report.push(Check::close(
            format!("brute force d={d}"),
            2.0,
            cglmp::local_bound_bruteforce(d)?,
            BRUTE_FORCE_TOL,
        ));
    }
    if samples == 0 {
        return Ok(report);
    }
    let values = par::map_indexed(samples, |i| -> Result<f64> {
        let d = 2 + i % 3;
        let mut rng = ChaCha8Rng::seed_from_u64(par::mix_seed(cfg.seed ^ 0x5eed_10ca, i as u64));
        let a = linalg::random_pure(d, &mut rng);
        let b = linalg::random_pure(d, &mut rng);
        let rho = Operator::new(linalg::projector(&kron_vec(&a, &b)));
        Ok(optimize::maximize_bell(&rho, d, &cfg.with_seed(par::mix_seed(cfg.seed, i as u64)))?.value)
    });
    let mut worst = (f64::NEG_INFINITY, 0);
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if v > worst.0 {
            worst = (v, i);
        }
    }
    report.push(
        Check::at_most(format!("max over {samples} product states"), 2.0, worst.0, LOCAL_BOUND_TOL)
            .with_detail(format!("worst sample {}, d={}", worst.1, 2 + worst.1 % 3)),
    );
    Ok(report)
}

fn kron_vec(a: &linalg::CVec, b: &linalg::CVec) -> linalg::CVec {
    let m = kron(
        &linalg::CMat::from_column_slice(a.len(), 1, a.as_slice()),
        &linalg::CMat::from_column_slice(b.len(), 1, b.as_slice()),
    );
    linalg::CVec::from_column_slice(m.as_slice())
}

pub const HORODECKI_TOL: f64 = 1e-5;

/// Random point of the tetrahedron: a Dirichlet(1,1,1,1) mixture of the
/// four vertices (the Bell states).
pub fn random_tetra_point<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    const VERTICES: [[f64; 3]; 4] = [[1.0, -1.0, 1.0], [1.0, 1.0, -1.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]];
    let w: Vec<f64> = (0..4).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let total: f64 = w.iter().sum();
    let mut c = [0.0; 3];
    for (wi, v) in w.iter().zip(&VERTICES) {
        for k in 0..3 {
            c[k] += wi / total * v[k];
        }
    }
    c
}

/// Optimized `I_2` against `2 sqrt(l1 + l2)` on `samples` random tetrahedron
/// states.
pub fn horodecki(samples: usize, cfg: &OptimizerConfig) -> Result<Report> {
    let mut report = Report::new("horodecki");
    let rows = par::map_indexed(samples, |i| -> Result<(f64, f64, [f64; 3])> {
        let mut rng = ChaCha8Rng::seed_from_u64(par::mix_seed(cfg.seed ^ 0x7e7a, i as u64));
        let c = random_tetra_point(&mut rng);
        let rho = family_state(Family::Tetra2, &c, 2)?;
        let got = optimize::maximize_bell(&rho, 2, &cfg.with_seed(par::mix_seed(cfg.seed, i as u64)))?.value;
        Ok((cglmp::chsh_horodecki_max(c[0], c[1], c[2]), got, c))
    });
    let mut worst: Option<(f64, f64, [f64; 3])> = None;
    for row in rows {
        let row = row?;
        if worst.is_none_or(|w| (row.1 - row.0).abs() > (w.1 - w.0).abs()) {
            worst = Some(row);
        }
    }
    if let Some((expected, computed, c)) = worst {
        report.push(
            Check::close(format!("worst of {samples} states"), expected, computed, HORODECKI_TOL)
                .with_detail(format!("c = ({:.4}, {:.4}, {:.4})", c[0], c[1], c[2])),
        );
    }
    Ok(report)
}

pub const LINE_CONCURRENCE_TOL: f64 = 1e-4;

/// Grid points `(a, b)` with step `step` inside the positivity triangle of
/// `rho_line(a, b/2, b/2)`, rows by `a`.
pub fn line_triangle_grid(step: f64) -> Vec<(f64, f64)> {
    let n = (1.5 / step).round() as i64;
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let (a, b) = (i as f64 * step, j as f64 * step);
            let eps = 1e-12;
            if 8.0 * a - b + 1.0 >= -eps && 3.5 * b - a + 1.0 >= -eps && 1.0 - a - b >= -eps {
                out.push((a, b));
            }
        }
    }
    out
}

/// One point of the line-concurrence comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcurrencePoint {
    pub alpha: f64,
    pub beta: f64,
    pub first_branch: bool,
    pub expected: f64,
    pub computed: f64,
}

/// Optimized `C_m^2` lower bound on the line slice against the closed form.
///
/// Every point first gets the identity start alone. Points that miss the
/// closed form by more than the tolerance are rerun with `cfg.restarts`
/// starts.
pub fn line_concurrence_points(step: f64, cfg: &OptimizerConfig) -> Result<Vec<ConcurrencePoint>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid step must lie in (0, 1], got {step}")));
    }
    let grid = line_triangle_grid(step);
    let single = cfg.with_restarts(1);
    par::map_indexed(grid.len(), |i| -> Result<ConcurrencePoint> {
        let (a, b) = grid[i];
        let rho = family_state(Family::Line, &entgeo::equal_split(a, b), 3)?;
        let expected = entgeo::m_concurrence_line_analytic(a, b);
        let mut computed = entgeo::m_concurrence_lower_bound(&rho, 3, &single)?.lower_bound;
        if (computed - expected).abs() > LINE_CONCURRENCE_TOL && cfg.restarts > 1 {
            let seeded = cfg.with_seed(par::mix_seed(cfg.seed, i as u64));
            computed = computed.max(entgeo::m_concurrence_lower_bound(&rho, 3, &seeded)?.lower_bound);
        }
        Ok(ConcurrencePoint { alpha: a, beta: b, first_branch: a >= 0.25 + b / 8.0, expected, computed })
    })
    .into_iter()
    .collect()
}

pub fn line_concurrence(step: f64, cfg: &OptimizerConfig) -> Result<Report> {
    let points = line_concurrence_points(step, cfg)?;
    Ok(line_concurrence_report(&points))
}

/// One summary row per branch: the worst point and the number of points
/// outside the tolerance.
pub fn line_concurrence_report(points: &[ConcurrencePoint]) -> Report {
    let mut report = Report::new("line-concurrence");
    for (first, label) in [(true, "first branch"), (false, "second branch")] {
        let rows: Vec<&ConcurrencePoint> = points.iter().filter(|p| p.first_branch == first).collect();
        let Some(worst) =
            rows.iter().max_by(|x, y| (x.computed - x.expected).abs().total_cmp(&(y.computed - y.expected).abs()))
        else {
            continue;
        };
        let bad = rows.iter().filter(|p| (p.computed - p.expected).abs() > LINE_CONCURRENCE_TOL).count();
        report.push(Check::close(label, worst.expected, worst.computed, LINE_CONCURRENCE_TOL).with_detail(format!(
            "worst at ({:.2}, {:.2}); {bad} of {} points outside tolerance",
            worst.alpha,
            worst.beta,
            rows.len()
        )));
    }
    report
}

pub const SPHERE_FIT_TOL: f64 = 1e-3;
pub const PLANE_FIT_TOL: f64 = 1e-3;
pub const FIXTURE_TOL: f64 = 1e-6;

/// CGLMP boundary points `nu* tau` of the LINE family along `count` directions
/// of the given orthant, with the point index of each.
pub fn line_boundary_points(count: usize, orthant: Orthant, cfg: &OptimizerConfig) -> Result<Vec<(usize, [f64; 3])>> {
    let mut job = ScanJob::new(Family::Line, Grid::Directions { count, orthant }, vec![Task::Cglmp]);
    job.optimizer = cfg.clone();
    let records = scan::run_scan(&job)?;
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if let Some(e) = r.error {
            return Err(Error::NumericalDegeneracy(format!("boundary point {}: {e}", r.index)));
        }
        if let Some(nu) = r.nu_star {
            out.push((r.index, [nu * r.point[0], nu * r.point[1], nu * r.point[2]]));
        }
    }
    Ok(out)
}

/// Signed distance of `b` from the sphere surface.
pub fn sphere_deviation(b: &[f64; 3]) -> f64 {
    b.iter().map(|x| (x - SPHERE_CENTER).powi(2)).sum::<f64>().sqrt() - SPHERE_RADIUS
}

/// Residuals of the three planes, each solved for one parameter.
pub fn plane_residuals(b: &[f64; 3]) -> [f64; 3] {
    let k = 6.0 * entgeo::SQRT3 - 9.0;
    [0.5 * (b[1] + b[2] + k) - b[0], 0.5 * (b[0] + b[2] + k) - b[1], 0.5 * (b[0] + b[1] + k) - b[2]]
}

/// `Tr(B P00)` for the standard settings at `d = 3`.
pub fn fixture_trace() -> Result<f64> {
    let b = cglmp::bell_operator_from_unitaries(3, &cglmp::standard_unitaries(3))?;
    let p = bell_projector(3, 0, 0)?;
    Ok(linalg::trace(&(b.matrix() * p.matrix())).re)
}

pub fn sphere_fit(samples: usize, cfg: &OptimizerConfig) -> Result<Report> {
    let mut report = Report::new("sphere-fit");
    let positive = line_boundary_points(samples, Orthant::Positive, cfg)?;
    if let Some((i, b)) =
        positive.iter().max_by(|x, y| sphere_deviation(&x.1).abs().total_cmp(&sphere_deviation(&y.1).abs()))
    {
        let bad = positive.iter().filter(|p| sphere_deviation(&p.1).abs() >= SPHERE_FIT_TOL).count();
        let dist = sphere_deviation(b) + SPHERE_RADIUS;
        report.push(Check::close("sphere radius", SPHERE_RADIUS, dist, SPHERE_FIT_TOL).with_detail(format!(
            "worst point {i} at ({:.4}, {:.4}, {:.4}); {bad} of {} outside",
            b[0],
            b[1],
            b[2],
            positive.len()
        )));
    }
    let negative = line_boundary_points(samples, Orthant::OneNegative, cfg)?;
    let closest = |b: &[f64; 3]| plane_residuals(b).into_iter().map(f64::abs).fold(f64::INFINITY, f64::min);
    if let Some((i, b)) = negative.iter().max_by(|x, y| closest(&x.1).total_cmp(&closest(&y.1))) {
        let bad = negative.iter().filter(|p| closest(&p.1) > PLANE_FIT_TOL).count();
        report.push(Check::close("closest plane residual", 0.0, closest(b), PLANE_FIT_TOL).with_detail(format!(
            "worst point {i} at ({:.4}, {:.4}, {:.4}); {bad} of {} outside",
            b[0],
            b[1],
            b[2],
            negative.len()
        )));
    }
    let k = 6.0 * entgeo::SQRT3 - 9.0;
    report.push(Check::close("Tr(B P00) standard settings", 4.0 / k, fixture_trace()?, FIXTURE_TOL));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_grid_size() {
        assert_eq!(line_triangle_grid(0.02).len(), 1910);
        assert!(line_triangle_grid(0.02).contains(&(0.0, 1.0)));
    }

    #[test]
    fn tetra_samples_are_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = random_tetra_point(&mut rng);
            assert!(family_state(Family::Tetra2, &c, 2).unwrap().min_eigenvalue() > -1e-12);
        }
    }

    #[test]
    fn fixture_value() {
        let k = 6.0 * entgeo::SQRT3 - 9.0;
        assert!((fixture_trace().unwrap() - 4.0 / k).abs() < 1e-12);
    }

    #[test]
    fn isotropic_point_on_sphere_and_plane() {
        let b = [entgeo::ISOTROPIC_VIOLATION_ALPHA, 0.0, 0.0];
        assert!(sphere_deviation(&b).abs() < 1e-10);
        assert!(plane_residuals(&b)[0].abs() < 1e-12);
    }

    #[test]
    fn small_suites_pass() {
        let cfg = OptimizerConfig::default().with_restarts(4);
        let r = analytic_max(3, &cfg).unwrap();
        assert!(r.passed(), "{r}");
        let r = horodecki(5, &cfg).unwrap();
        assert!(r.passed(), "{r}");
        let r = local_bound(6, &cfg.with_restarts(2)).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.to_string().contains("brute force d=4"));
    }

    #[test]
    fn report_rendering() {
        let mut r = Report::new("demo");
        r.push(Check::close("a", 1.0, 1.0 + 1e-9, 1e-6));
        r.push(Check::at_most("b", 2.0, 2.5, 1e-6).with_detail("too big"));
        assert!(!r.passed());
        assert_eq!(r.failures(), 1);
        let text = r.to_string();
        assert!(text.contains("PASS") && text.contains("FAIL") && text.contains("(too big)"));
        assert!(text.ends_with("1 of 2 checks passed"));
        assert!(run_suite("nope", &SuiteOptions::default()).is_err());
    }
}
