//! Nelder-Mead with restarts, maximization of `I_d` over measurement
//! settings, and the noise-scaling boundary solver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cglmp::{self, BellKernel, KernelScratch, MeasurementSettings};
use crate::par::{self, Execution};
use crate::qstate::{family_state, Family, Operator};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub f_tolerance: f64,
    pub x_tolerance: f64,
    pub seed: u64,
    /// Edge length of the initial simplex, in radians.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iterations: 1_000_000,
            f_tolerance: 1e-10,
            x_tolerance: 1e-10,
            seed: 0,
            initial_step: 0.4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.f_tolerance > 0.0 && self.x_tolerance > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::Config("initial_step must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_restarts(&self, restarts: usize) -> Self {
        Self { restarts, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Stopped on a tolerance rather than the iteration cap.
    pub converged: bool,
}

/// Simplex rebuilds around the incumbent after the first convergence.
const MAX_REBUILDS: usize = 5;

/// Minimize `objective` from `x0`.
///
/// Uses the dimension-adaptive coefficients of Gao and Han (which reduce to
/// the classic 1, 2, 1/2, 1/2 in two dimensions). A run stops once both the
/// spread of function values and the simplex diameter fall under their
/// tolerances; the simplex is then rebuilt around the best vertex and the
/// search resumed, and the result is accepted when a rebuild no longer
/// improves on it by more than `f_tolerance`.
pub fn nelder_mead<F>(objective: F, x0: &[f64], cfg: &OptimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    nelder_mead_with_stall(objective, x0, cfg, None)
}

/// As [`nelder_mead`], but a run also ends once the best vertex has not
/// improved by more than `f_tolerance` for `stall` iterations. Suited to
/// kinked objectives where the simplex keeps cycling around an optimum it
/// has already found.
pub fn nelder_mead_with_stall<F>(
    mut objective: F,
    x0: &[f64],
    cfg: &OptimizerConfig,
    stall: Option<usize>,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> Result<f64> {
        evaluations += 1;
        let v = objective(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::OptimizerAbort(v))
        }
    };
    if n == 0 {
        let f = eval(x0)?;
        return Ok(Minimum { x: vec![], f, iterations: 0, evaluations: 1, converged: true });
    }

    let nf = n as f64;
    let (alpha, beta, gamma, delta) =
        if n >= 3 { (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf) } else { (1.0, 2.0, 0.5, 0.5) };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0)?;
    let mut iterations = 0usize;
    let mut converged = false;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut xr = vec![0.0; n];
    let mut xe = vec![0.0; n];
    let mut xc = vec![0.0; n];

    for rebuild in 0..=MAX_REBUILDS {
        let start_f = best_f;
        simplex.clear();
        values.clear();
        simplex.push(best_x.clone());
        values.push(best_f);
        for i in 0..n {
            let mut v = best_x.clone();
            v[i] += cfg.initial_step;
            values.push(eval(&v)?);
            simplex.push(v);
        }

        let mut sum = vec![0.0; n];
        let mut since_sum = usize::MAX;
        let mut run_converged = false;
        let (mut mark_f, mut mark_it) = (f64::INFINITY, iterations);
        while iterations < cfg.max_iterations {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let (lo, hi, nh) = (order[0], order[n], order[n - 1]);
            if values[hi] - values[lo] <= cfg.f_tolerance && diameter(&simplex, lo) <= cfg.x_tolerance {
                run_converged = true;
                break;
            }
            if let Some(window) = stall {
                if values[lo] < mark_f - cfg.f_tolerance {
                    (mark_f, mark_it) = (values[lo], iterations);
                } else if iterations - mark_it >= window {
                    run_converged = true;
                    break;
                }
            }
            iterations += 1;

            // Running vertex sum, refreshed every n steps against drift.
            if since_sum >= n {
                sum.fill(0.0);
                for v in &simplex {
                    for (s, x) in sum.iter_mut().zip(v) {
                        *s += x;
                    }
                }
                since_sum = 0;
            }
            since_sum += 1;
            for j in 0..n {
                centroid[j] = (sum[j] - simplex[hi][j]) / nf;
            }

            let worst = &simplex[hi];
            for j in 0..n {
                xr[j] = centroid[j] + alpha * (centroid[j] - worst[j]);
            }
            let fr = eval(&xr)?;
            let accepted = if fr < values[lo] {
                for j in 0..n {
                    xe[j] = centroid[j] + beta * (xr[j] - centroid[j]);
                }
                let fe = eval(&xe)?;
                Some(if fe < fr { (&xe, fe) } else { (&xr, fr) })
            } else if fr < values[nh] {
                Some((&xr, fr))
            } else {
                // Outside contraction when the reflection beats the worst vertex.
                let outside = fr < values[hi];
                for j in 0..n {
                    xc[j] = if outside {
                        centroid[j] + gamma * (xr[j] - centroid[j])
                    } else {
                        centroid[j] - gamma * (centroid[j] - simplex[hi][j])
                    };
                }
                let fc = eval(&xc)?;
                ((outside && fc <= fr) || (!outside && fc < values[hi])).then_some((&xc, fc))
            };
            match accepted {
                Some((point, value)) => {
                    for j in 0..n {
                        sum[j] += point[j] - simplex[hi][j];
                    }
                    simplex[hi].copy_from_slice(point);
                    values[hi] = value;
                }
                None => {
                    let best = simplex[lo].clone();
                    for &i in &order[1..] {
                        for (v, b) in simplex[i].iter_mut().zip(&best) {
                            *v = b + delta * (*v - b);
                        }
                        values[i] = eval(&simplex[i])?;
                    }
                    since_sum = usize::MAX;
                }
            }
        }

        let lo = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("nonempty");
        if values[lo] < best_f {
            best_f = values[lo];
            best_x.copy_from_slice(&simplex[lo]);
        }
        if !run_converged {
            break;
        }
        if rebuild > 0 && start_f - best_f <= cfg.f_tolerance {
            converged = true;
            break;
        }
        if rebuild == MAX_REBUILDS {
            converged = true;
        }
    }

    Ok(Minimum { x: best_x, f: best_f, iterations, evaluations, converged })
}

/// Largest coordinate distance from vertex `lo` to any other vertex.
fn diameter(simplex: &[Vec<f64>], lo: usize) -> f64 {
    simplex
        .iter()
        .map(|v| v.iter().zip(&simplex[lo]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxBellResult {
    pub value: f64,
    pub settings: MeasurementSettings,
    pub restarts_used: usize,
    pub converged: bool,
    /// Best value after each restart; non-decreasing.
    pub history: Vec<f64>,
}

/// Maximize `I_d` over measurement settings.
///
/// Restart `i` starts from a point drawn uniformly from the canonical box
/// with seed `mix_seed(cfg.seed, i)`. Single-threaded.
///
/// The search runs on the raw angles. Folding rotations into `[0, pi/2]`
/// inside the objective would put kinks exactly where optima tend to sit
/// and slows convergence by an order of magnitude. The returned angles are
/// reduced modulo `2 pi` and reproduce `value` exactly.
pub fn maximize_bell(rho: &Operator, d: usize, cfg: &OptimizerConfig) -> Result<MaxBellResult> {
    cfg.validate()?;
    let kernel = BellKernel::new(rho, d)?;
    maximize_with_kernel(&kernel, cfg)
}

pub fn maximize_with_kernel(kernel: &BellKernel, cfg: &OptimizerConfig) -> Result<MaxBellResult> {
    let d = kernel.d();
    let mut scratch = KernelScratch::new(d);
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let mut history = Vec::with_capacity(cfg.restarts);
    for i in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(par::mix_seed(cfg.seed, i as u64));
        let x0 = cglmp::random_flat(d, &mut rng);
        let m = nelder_mead(|x| -kernel.evaluate_raw(x, &mut scratch), &x0, cfg)?;
        let value = -m.f;
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, m.x, m.converged));
        }
        history.push(best.as_ref().expect("set above").0);
    }
    let (value, x, converged) = best.expect("restarts >= 1");
    let settings = MeasurementSettings::from_flat(d, &wrap_angles(&x))?;
    Ok(MaxBellResult { value, settings, restarts_used: cfg.restarts, converged, history })
}

/// Reduce every angle into `[0, 2 pi)`. Both rotations and phases have
/// period `2 pi`, so the unitaries are unchanged.
pub fn wrap_angles(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| crate::uparam::wrap_phase(v)).collect()
}

/// Maximal value of `I_d` below which a state counts as having no violation
/// direction at all.
pub const NO_VIOLATION_FLOOR: f64 = 2e-12;

/// Noise weight `nu* = 2 / max I_d(tau)` at which `(1 - nu)/d^2 1 + nu tau`
/// reaches the local bound.
///
/// Rests on `Tr B = 0`, which makes `max I_d` of the mixture exactly
/// `nu max I_d(tau)`.
pub fn violation_boundary_nu(tau: &Operator, d: usize, cfg: &OptimizerConfig) -> Result<f64> {
    violation_boundary(tau, d, cfg).map(|(nu, _)| nu)
}

pub fn violation_boundary(tau: &Operator, d: usize, cfg: &OptimizerConfig) -> Result<(f64, MaxBellResult)> {
    let r = maximize_bell(tau, d, cfg)?;
    if r.value <= NO_VIOLATION_FLOOR {
        return Err(Error::NoViolationDirection(r.value));
    }
    Ok((2.0 / r.value, r))
}

/// Mixing parameter `t` in `[0, 1]` at which
/// `max I_d((1 - t) rho0 + t rho1) = 2`, for families not expressible as
/// uncolored-noise mixtures.
///
/// Requires `max I_d(rho0) < 2 < max I_d(rho1)`. Uses the Illinois variant of
/// regula falsi, so every step keeps a bracket; stops when the bracket is
/// narrower than `t_tol`.
pub fn boundary_on_segment(
    rho0: &Operator,
    rho1: &Operator,
    d: usize,
    cfg: &OptimizerConfig,
    t_tol: f64,
) -> Result<f64> {
    let n = d * d;
    if rho0.dim() != n || rho1.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rho0.dim().max(rho1.dim()) });
    }
    let g = |t: f64| -> Result<f64> {
        let m = rho0.matrix().scale(1.0 - t) + rho1.matrix().scale(t);
        Ok(maximize_bell(&Operator::new(m), d, cfg)?.value - 2.0)
    };
    let (mut a, mut b) = (0.0, 1.0);
    let (mut fa, mut fb) = (g(a)?, g(b)?);
    if fa >= 0.0 || fb <= 0.0 {
        return Err(Error::Config(format!(
            "segment does not bracket the local bound (I - 2 = {fa:.3e} at t=0, {fb:.3e} at t=1)"
        )));
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a <= t_tol {
            break;
        }
        let mut t = (a * fb - b * fa) / (fb - fa);
        if !(t > a && t < b) {
            t = 0.5 * (a + b);
        }
        let ft = g(t)?;
        if ft == 0.0 {
            return Ok(t);
        }
        if ft < 0.0 {
            a = t;
            fa = ft;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = t;
            fb = ft;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// One solved point of a violation-boundary scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub index: usize,
    /// Family parameters of the direction state `tau`.
    pub direction: Vec<f64>,
    pub nu: Option<f64>,
    /// Family parameters of the boundary state, `nu * direction`.
    pub point: Option<Vec<f64>>,
    pub max_value: Option<f64>,
    pub error: Option<String>,
}

/// Solve the violation boundary along every direction in `boundary_states`.
///
/// Point `i` uses seed `mix_seed(cfg.seed, i)`, so the output does not depend
/// on how points are scheduled.
pub fn scan_boundary(
    family: Family,
    boundary_states: &[Vec<f64>],
    d: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<BoundaryPoint>> {
    scan_boundary_with(Execution::default(), family, boundary_states, d, cfg)
}

pub fn scan_boundary_with(
    exec: Execution,
    family: Family,
    boundary_states: &[Vec<f64>],
    d: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<BoundaryPoint>> {
    cfg.validate()?;
    if !family.scales_with_noise() {
        return Err(Error::Config(format!("family {family} needs the segment solver")));
    }
    Ok(par::map_indexed_with(exec, boundary_states.len(), |i| {
        let direction = boundary_states[i].clone();
        let local = cfg.with_seed(par::mix_seed(cfg.seed, i as u64));
        let solved = family_state(family, &direction, d).and_then(|tau| violation_boundary(&tau, d, &local));
        match solved {
            Ok((nu, r)) => BoundaryPoint {
                index: i,
                point: Some(direction.iter().map(|p| nu * p).collect()),
                direction,
                nu: Some(nu),
                max_value: Some(r.value),
                error: None,
            },
            Err(e) => BoundaryPoint {
                index: i,
                direction,
                nu: None,
                point: None,
                max_value: match &e {
                    Error::NoViolationDirection(v) => Some(*v),
                    _ => None,
                },
                error: Some(e.to_string()),
            },
        }
    }))
}
