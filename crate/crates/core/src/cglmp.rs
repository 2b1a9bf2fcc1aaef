//! The CGLMP quantity `I_d` for two settings per side.
//!
//! Settings index: `a` in `{0, 1}` is Alice's `A_1, A_2`, `b` in `{0, 1}` is
//! Bob's `B_1, B_2`; outcomes are `0..d`. The eigenvector `|x>` of an
//! observable is column `x` of its reduced composite unitary.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat, C64, ZERO};
use crate::qstate::Operator;
use crate::uparam::{self, Form, ParamMatrix};
use crate::{Error, Result};

/// Probabilities below this are a broken unitary, not noise.
pub const NEGATIVE_PROBABILITY_TOL: f64 = 1e-12;

/// The four observables `A_1, A_2, B_1, B_2`, each a reduced-form
/// parameter matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub d: usize,
    pub a1: ParamMatrix,
    pub a2: ParamMatrix,
    pub b1: ParamMatrix,
    pub b2: ParamMatrix,
}

impl MeasurementSettings {
    pub fn new(a1: ParamMatrix, a2: ParamMatrix, b1: ParamMatrix, b2: ParamMatrix) -> Result<Self> {
        let d = a1.d();
        for p in [&a2, &b1, &b2] {
            if p.d() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.d() });
            }
        }
        Ok(Self { d, a1, a2, b1, b2 })
    }

    /// Computational basis on every side.
    pub fn identity(d: usize) -> Result<Self> {
        let z = ParamMatrix::zeros(d)?;
        Self::new(z.clone(), z.clone(), z.clone(), z)
    }

    /// Length of the flat vector: `4 (d^2 - d)`.
    pub fn flat_len(d: usize) -> usize {
        4 * uparam::parameter_count(d, Form::Reduced)
    }

    /// Concatenated reduced parameters of `A_1, A_2, B_1, B_2`.
    pub fn to_flat(&self) -> Vec<f64> {
        [&self.a1, &self.a2, &self.b1, &self.b2].iter().flat_map(|p| p.to_flat(Form::Reduced)).collect()
    }

    pub fn from_flat(d: usize, flat: &[f64]) -> Result<Self> {
        let n = uparam::parameter_count(d, Form::Reduced);
        if flat.len() != 4 * n {
            return Err(Error::DimensionMismatch { expected: 4 * n, got: flat.len() });
        }
        let p = |i: usize| ParamMatrix::from_flat(d, Form::Reduced, &flat[i * n..(i + 1) * n]);
        Self::new(p(0)?, p(1)?, p(2)?, p(3)?)
    }

    /// Uniform draw from the canonical box: rotations in `[0, pi/2]`, phases
    /// in `[0, 2 pi]`.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self> {
        let flat = random_flat(d, rng);
        Self::from_flat(d, &flat)
    }

    pub fn canonical(&self) -> Self {
        Self {
            d: self.d,
            a1: uparam::canonicalize(&self.a1),
            a2: uparam::canonicalize(&self.a2),
            b1: uparam::canonicalize(&self.b1),
            b2: uparam::canonicalize(&self.b2),
        }
    }

    /// Unitaries `[U_{A1}, U_{A2}, U_{B1}, U_{B2}]`.
    pub fn unitaries(&self) -> [CMat; 4] {
        [&self.a1, &self.a2, &self.b1, &self.b2].map(|p| uparam::composite_unitary(p, Form::Reduced))
    }
}

/// Random flat settings vector in the canonical box.
pub fn random_flat<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let per = uparam::parameter_count(d, Form::Reduced);
    (0..4 * per)
        .map(|i| {
            if (i % per).is_multiple_of(2) {
                rng.random_range(0.0..std::f64::consts::FRAC_PI_2)
            } else {
                rng.random_range(0.0..std::f64::consts::TAU)
            }
        })
        .collect()
}

/// `P(A_a = x, B_b = y)` for all `a, b, x, y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointProbabilityTable {
    pub d: usize,
    /// Row-major `[a][b][x][y]`.
    pub probs: Vec<f64>,
}

impl JointProbabilityTable {
    pub fn zeros(d: usize) -> Self {
        Self { d, probs: vec![0.0; 4 * d * d] }
    }

    fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((a * 2 + b) * self.d + x) * self.d + y
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.probs[self.index(a, b, x, y)]
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, v: f64) {
        let i = self.index(a, b, x, y);
        self.probs[i] = v;
    }

    pub fn slice_sum(&self, a: usize, b: usize) -> f64 {
        let d = self.d;
        (0..d * d).map(|i| self.get(a, b, i / d, i % d)).sum()
    }

    /// `P(A_a = (B_b + k) mod d) = sum_j P(A_a = (j + k) mod d, B_b = j)`.
    pub fn alice_shifted(&self, a: usize, b: usize, k: i64) -> f64 {
        let d = self.d as i64;
        (0..d).map(|j| self.get(a, b, (j + k).rem_euclid(d) as usize, j as usize)).sum()
    }

    /// `P(B_b = (A_a + k) mod d) = sum_j P(A_a = j, B_b = (j + k) mod d)`.
    pub fn bob_shifted(&self, a: usize, b: usize, k: i64) -> f64 {
        let d = self.d as i64;
        (0..d).map(|j| self.get(a, b, j as usize, (j + k).rem_euclid(d) as usize)).sum()
    }
}

fn check_state(rho: &Operator, d: usize) -> Result<()> {
    if rho.dim() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, got: rho.dim() });
    }
    if !rho.is_hermitian() {
        return Err(Error::NotHermitian(linalg::hermiticity_defect(rho.matrix())));
    }
    Ok(())
}

/// `P(A_a = x, B_b = y) = Tr(|x><x| (x) |y><y| rho)`, evaluated directly.
pub fn joint_probabilities(rho: &Operator, s: &MeasurementSettings) -> Result<JointProbabilityTable> {
    let d = s.d;
    check_state(rho, d)?;
    let us = s.unitaries();
    let m = rho.matrix();
    let mut table = JointProbabilityTable::zeros(d);
    let mut w = vec![ZERO; d * d];
    for a in 0..2 {
        for b in 0..2 {
            let (ua, ub) = (&us[a], &us[2 + b]);
            for x in 0..d {
                for y in 0..d {
                    for i in 0..d {
                        for j in 0..d {
                            w[i * d + j] = ua[(i, x)] * ub[(j, y)];
                        }
                    }
                    let mut acc = ZERO;
                    for r in 0..d * d {
                        let mut row = ZERO;
                        for c in 0..d * d {
                            row += m[(r, c)] * w[c];
                        }
                        acc += w[r].conj() * row;
                    }
                    if acc.re < -NEGATIVE_PROBABILITY_TOL {
                        return Err(Error::NegativeProbability { a, b, x, y, value: acc.re });
                    }
                    table.set(a, b, x, y, acc.re);
                }
            }
        }
    }
    Ok(table)
}

fn prefactor(d: usize, k: usize) -> f64 {
    1.0 - 2.0 * k as f64 / (d as f64 - 1.0)
}

/// `I_d` from a probability table, term by term.
pub fn cglmp_from_table(t: &JointProbabilityTable) -> f64 {
    let d = t.d;
    let (a1, a2, b1, b2) = (0, 1, 0, 1);
    let mut total = 0.0;
    for k in 0..d / 2 {
        let ki = k as i64;
        let plus = t.alice_shifted(a1, b1, ki)
            + t.bob_shifted(a2, b1, ki + 1)
            + t.alice_shifted(a2, b2, ki)
            + t.bob_shifted(a1, b2, ki);
        let minus = t.alice_shifted(a1, b1, -ki - 1)
            + t.bob_shifted(a2, b1, -ki)
            + t.alice_shifted(a2, b2, -ki - 1)
            + t.bob_shifted(a1, b2, -ki - 1);
        total += prefactor(d, k) * (plus - minus);
    }
    total
}

pub fn cglmp_value(rho: &Operator, s: &MeasurementSettings) -> Result<f64> {
    Ok(cglmp_from_table(&joint_probabilities(rho, s)?))
}

/// Weight of each joint outcome in `I_d`: `I_d = sum_{a,b,x,y} w_ab[x][y] P(A_a=x, B_b=y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    pub d: usize,
    /// Indexed `[a * 2 + b][x * d + y]`.
    pub coef: [Vec<f64>; 4],
}

impl CoefficientTable {
    pub fn new(d: usize) -> Self {
        let mut coef: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; d * d]);
        let add = |table: &mut Vec<f64>, x: usize, y: usize, v: f64| table[x * d + y] += v;
        let md = |v: usize| v % d;
        for k in 0..d / 2 {
            let c = prefactor(d, k);
            for j in 0..d {
                // (A1, B1): +[A1 = B1 + k], -[A1 = B1 - k - 1]
                add(&mut coef[0], md(j + k), j, c);
                add(&mut coef[0], md(j + d - k - 1), j, -c);
                // (A2, B1): +[B1 = A2 + k + 1], -[B1 = A2 - k]
                add(&mut coef[2], j, md(j + k + 1), c);
                add(&mut coef[2], j, md(j + d - k), -c);
                // (A2, B2): +[A2 = B2 + k], -[A2 = B2 - k - 1]
                add(&mut coef[3], md(j + k), j, c);
                add(&mut coef[3], md(j + d - k - 1), j, -c);
                // (A1, B2): +[B2 = A1 + k], -[B2 = A1 - k - 1]
                add(&mut coef[1], j, md(j + k), c);
                add(&mut coef[1], j, md(j + d - k - 1), -c);
            }
        }
        Self { d, coef }
    }

    pub fn weight(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coef[a * 2 + b][x * self.d + y]
    }

    pub fn apply(&self, t: &JointProbabilityTable) -> f64 {
        let d = self.d;
        let mut acc = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..d {
                    for y in 0..d {
                        acc += self.weight(a, b, x, y) * t.get(a, b, x, y);
                    }
                }
            }
        }
        acc
    }
}

/// Hermitian operator with `I_d = Tr(B rho)` for fixed settings.
#[derive(Clone, Debug, Serialize)]
pub struct BellOperator {
    pub d: usize,
    pub matrix: Operator,
    pub settings: MeasurementSettings,
}

impl BellOperator {
    pub fn expectation(&self, rho: &Operator) -> f64 {
        self.matrix.trace_product(rho).re
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.matrix.eigenvalues().last().expect("nonempty")
    }
}

/// Assemble `B = sum w_ab[x][y] |x_a><x_a| (x) |y_b><y_b|`.
pub fn bell_operator(s: &MeasurementSettings) -> BellOperator {
    let matrix = bell_matrix(s.d, &s.unitaries());
    BellOperator { d: s.d, matrix, settings: s.clone() }
}

/// Bell operator for arbitrary measurement bases, given as unitaries whose
/// columns are the outcome vectors, ordered `[A1, A2, B1, B2]`.
pub fn bell_operator_from_unitaries(d: usize, us: &[CMat; 4]) -> Result<Operator> {
    for u in us {
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: u.nrows().max(u.ncols()) });
        }
    }
    Ok(bell_matrix(d, us))
}

/// Outcome bases of the original CGLMP construction: column `x` of setting
/// `a` is `d^{-1/2} sum_j w^{j (x + a/2)} |j>` for Alice and
/// `d^{-1/2} sum_j w^{j (-y + (-1)^b / 4)} |j>` for Bob (`w = e^{2 pi i/d}`).
pub fn standard_unitaries(d: usize) -> [CMat; 4] {
    let norm = (d as f64).sqrt().recip();
    let basis = |sign: f64, shift: f64| {
        CMat::from_fn(d, d, |j, x| C64::from_polar(norm, 2.0 * PI * j as f64 * (sign * x as f64 + shift) / d as f64))
    };
    [basis(1.0, 0.0), basis(1.0, 0.5), basis(-1.0, 0.25), basis(-1.0, -0.25)]
}

fn bell_matrix(d: usize, us: &[CMat; 4]) -> Operator {
    let table = CoefficientTable::new(d);
    let mut b = CMat::zeros(d * d, d * d);
    for a in 0..2 {
        for bb in 0..2 {
            let u = linalg::kron(&us[a], &us[2 + bb]);
            let diag = nalgebra::DVector::from_iterator(d * d, table.coef[a * 2 + bb].iter().map(|&w| C64::from(w)));
            b += &u * CMat::from_diagonal(&diag) * u.adjoint();
        }
    }
    Operator::new(b)
}

/// Value of `I_d` attained by the maximally entangled state with the
/// standard optimal settings:
///
/// `(2/d^2) sum_{k=0}^{[d/2]-1} (1 - 2k/(d-1)) [1/sin^2(pi(k+1/4)/d) - 1/sin^2(-pi(k+3/4)/d)]`.
///
/// Best known, not proven optimal.
pub fn cglmp_analytic_max(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let df = d as f64;
    let sum: f64 = (0..d / 2)
        .map(|k| {
            let kf = k as f64;
            let s1 = (PI * (kf + 0.25) / df).sin();
            let s2 = (-PI * (kf + 0.75) / df).sin();
            prefactor(d, k) * (1.0 / (s1 * s1) - 1.0 / (s2 * s2))
        })
        .sum();
    Ok(2.0 / (df * df) * sum)
}

/// Default size guard of [`local_bound_bruteforce`].
pub const LOCAL_BOUND_MAX_D: usize = 4;

/// Maximum of `I_d` over the `d^4` deterministic local strategies.
pub fn local_bound_bruteforce(d: usize) -> Result<f64> {
    local_bound_bruteforce_limited(d, LOCAL_BOUND_MAX_D)
}

pub fn local_bound_bruteforce_limited(d: usize, limit: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if d > limit {
        return Err(Error::SizeGuard { d, limit });
    }
    let table = CoefficientTable::new(d);
    let mut best = f64::NEG_INFINITY;
    for strategy in 0..d.pow(4) {
        let (x1, x2, y1, y2) = (strategy % d, strategy / d % d, strategy / (d * d) % d, strategy / (d * d * d));
        let xs = [x1, x2];
        let ys = [y1, y2];
        let mut v = 0.0;
        for (a, &x) in xs.iter().enumerate() {
            for (b, &y) in ys.iter().enumerate() {
                v += table.weight(a, b, x, y);
            }
        }
        best = best.max(v);
    }
    Ok(best)
}

/// Closed-form CHSH maximum `2 sqrt(l1 + l2)` for a two-qubit state with
/// diagonal correlation matrix `diag(c1, c2, c3)`; `l1, l2` are the two
/// largest of `c_i^2`.
pub fn chsh_horodecki_max(c1: f64, c2: f64, c3: f64) -> f64 {
    let mut u = [c1 * c1, c2 * c2, c3 * c3];
    u.sort_by(|a, b| b.total_cmp(a));
    2.0 * (u[0] + u[1]).sqrt()
}

/// Pre-processed state for fast repeated evaluation of `I_d` under varying
/// settings.
///
/// The state is stored as `shift * 1 + sum_k w_k |v_k><v_k|`, with `shift`
/// the most degenerate eigenvalue. Since every Bell operator is traceless the
/// identity part never contributes to `I_d`, so only the remaining (often
/// few) eigenvectors are propagated. Each `|v_k>` is kept as a `d x d`
/// coefficient matrix `M` with `<x (x) y|v> = (U_a^dag M conj(U_b))[x, y]`.
#[derive(Clone, Debug)]
pub struct BellKernel {
    d: usize,
    shift: f64,
    components: Vec<(f64, Vec<C64>)>,
    table: CoefficientTable,
}

/// Scratch buffers for [`BellKernel`]; one per thread.
#[derive(Clone, Debug)]
pub struct KernelScratch {
    flat: Vec<f64>,
    unitaries: [Vec<C64>; 4],
    adjoints: [Vec<C64>; 4],
    y: [Vec<C64>; 2],
    z: Vec<f64>,
}

impl KernelScratch {
    pub fn new(d: usize) -> Self {
        Self {
            flat: vec![0.0; MeasurementSettings::flat_len(d)],
            unitaries: std::array::from_fn(|_| vec![ZERO; d * d]),
            adjoints: std::array::from_fn(|_| vec![ZERO; d * d]),
            y: std::array::from_fn(|_| vec![ZERO; d * d]),
            z: vec![0.0; d * d],
        }
    }
}

impl BellKernel {
    pub fn new(rho: &Operator, d: usize) -> Result<Self> {
        check_state(rho, d)?;
        let (shift, components) = linalg::shifted_low_rank(rho.matrix());
        Ok(Self { d, shift, components, table: CoefficientTable::new(d) })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of eigenvectors propagated per evaluation.
    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn flat_len(&self) -> usize {
        MeasurementSettings::flat_len(self.d)
    }

    fn build(&self, flat: &[f64], scratch: &mut KernelScratch, canonical: bool) {
        let d = self.d;
        let per = uparam::parameter_count(d, Form::Reduced);
        scratch.flat.copy_from_slice(flat);
        for (i, u) in scratch.unitaries.iter_mut().enumerate() {
            let params = &mut scratch.flat[i * per..(i + 1) * per];
            if canonical {
                uparam::canonicalize_flat(d, Form::Reduced, params);
            }
            uparam::build_unitary(d, Form::Reduced, params, u);
        }
    }

    /// `sum_k w_k |<x_a (x) y_b|v_k>|^2` accumulated into `out[a*2+b][x*d+y]`
    /// (without the identity shift), or folded directly into `I_d` when
    /// `out` is `None`.
    fn accumulate(&self, scratch: &mut KernelScratch, mut out: Option<&mut [Vec<f64>; 4]>) -> f64 {
        let d = self.d;
        let mut value = 0.0;
        let KernelScratch { unitaries, adjoints, y, z, .. } = scratch;
        for (u, h) in unitaries.iter().zip(adjoints.iter_mut()) {
            for r in 0..d {
                for c in 0..d {
                    h[c * d + r] = u[r * d + c].conj();
                }
            }
        }
        for (w, m) in &self.components {
            // Y_a = U_a^dag M
            for a in 0..2 {
                let (h, ya) = (&adjoints[a], &mut y[a]);
                ya.fill(ZERO);
                for x in 0..d {
                    let row = &mut ya[x * d..(x + 1) * d];
                    for (s, &c) in h[x * d..(x + 1) * d].iter().enumerate() {
                        for (o, &mv) in row.iter_mut().zip(&m[s * d..(s + 1) * d]) {
                            *o += c * mv;
                        }
                    }
                }
            }
            // <x_a y_b|v> = (Y_a conj(U_b))[x, y]
            for a in 0..2 {
                for b in 0..2 {
                    let h = &adjoints[2 + b];
                    for x in 0..d {
                        let yrow = &y[a][x * d..(x + 1) * d];
                        for yy in 0..d {
                            let mut acc = ZERO;
                            for (&p, &q) in yrow.iter().zip(&h[yy * d..(yy + 1) * d]) {
                                acc += p * q;
                            }
                            z[x * d + yy] = acc.norm_sqr();
                        }
                    }
                    match out.as_deref_mut() {
                        Some(o) => o[a * 2 + b].iter_mut().zip(z.iter()).for_each(|(o, p)| *o += w * p),
                        None => {
                            let slice: f64 = self.table.coef[a * 2 + b].iter().zip(z.iter()).map(|(c, p)| c * p).sum();
                            value += w * slice;
                        }
                    }
                }
            }
        }
        value
    }

    /// `I_d` at flat (possibly out-of-box) settings; parameters are
    /// canonicalized first.
    pub fn evaluate(&self, flat: &[f64], scratch: &mut KernelScratch) -> f64 {
        self.build(flat, scratch, true);
        self.accumulate(scratch, None)
    }

    /// `I_d` with the parameters used exactly as given.
    pub fn evaluate_raw(&self, flat: &[f64], scratch: &mut KernelScratch) -> f64 {
        self.build(flat, scratch, false);
        self.accumulate(scratch, None)
    }

    /// Joint probabilities via the kernel path.
    pub fn probabilities(&self, flat: &[f64]) -> JointProbabilityTable {
        let d = self.d;
        let mut scratch = KernelScratch::new(d);
        self.build(flat, &mut scratch, true);
        let mut acc: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; d * d]);
        self.accumulate(&mut scratch, Some(&mut acc));
        let mut t = JointProbabilityTable::zeros(d);
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..d {
                    for y in 0..d {
                        t.set(a, b, x, y, acc[a * 2 + b][x * d + y] + self.shift);
                    }
                }
            }
        }
        t
    }
}
