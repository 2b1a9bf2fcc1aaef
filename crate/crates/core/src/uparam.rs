//! Composite parameterization of the unitary group.
//!
//! A unitary is the ordered product of `d(d-1)/2` two-level factors, one per
//! pair `m < n`, followed (in the full form) by `d` diagonal phases:
//!
//! ```text
//! U = [ prod_{m=0}^{d-2} prod_{n=m+1}^{d-1} F(m, n) ] * diag(e^{i l_00}, ..., e^{i l_{d-1,d-1}})
//! ```
//!
//! Products run left to right (`prod A_i = A_0 A_1 ... A_N`). The upper-right
//! entry `l_{m,n}` of the parameter matrix is the rotation angle of `F(m, n)`
//! and the lower-left entry `l_{n,m}` its relative phase. The reduced form
//! drops the diagonal block; it still reaches every orthonormal basis up to
//! column phases, which is all a projective measurement needs.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, C64, ONE, ZERO};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Full,
    Reduced,
}

/// `d^2` for the full form, `d^2 - d` for the reduced form.
pub fn parameter_count(d: usize, form: Form) -> usize {
    match form {
        Form::Full => d * d,
        Form::Reduced => d * d - d,
    }
}

/// Generator pair `(m, n)` with `m < n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorPair {
    pub m: usize,
    pub n: usize,
}

impl GeneratorPair {
    pub fn new(m: usize, n: usize, d: usize) -> Result<Self> {
        if m < n && n < d {
            Ok(Self { m, n })
        } else {
            Err(Error::IndexOrder { m, n, d })
        }
    }

    /// All pairs in product order: `(0,1), (0,2), ..., (0,d-1), (1,2), ...`.
    pub fn all(d: usize) -> impl Iterator<Item = GeneratorPair> {
        (0..d).flat_map(move |m| (m + 1..d).map(move |n| GeneratorPair { m, n }))
    }
}

/// `d x d` matrix of angles, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamMatrixDump", into = "ParamMatrixDump")]
pub struct ParamMatrix {
    d: usize,
    lambda: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamMatrixDump {
    d: usize,
    lambda: Vec<Vec<f64>>,
}

impl TryFrom<ParamMatrixDump> for ParamMatrix {
    type Error = String;

    fn try_from(dump: ParamMatrixDump) -> std::result::Result<Self, String> {
        let d = dump.d;
        if d < 2 || dump.lambda.len() != d || dump.lambda.iter().any(|row| row.len() != d) {
            return Err(format!("lambda must be a {d}x{d} matrix with d >= 2"));
        }
        Ok(ParamMatrix { d, lambda: dump.lambda.into_iter().flatten().collect() })
    }
}

impl From<ParamMatrix> for ParamMatrixDump {
    fn from(p: ParamMatrix) -> Self {
        ParamMatrixDump { d: p.d, lambda: p.lambda.chunks(p.d).map(<[f64]>::to_vec).collect() }
    }
}

impl ParamMatrix {
    pub fn zeros(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        Ok(Self { d, lambda: vec![0.0; d * d] })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        ParamMatrix::try_from(ParamMatrixDump { d, lambda: rows.to_vec() }).map_err(Error::Config)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.lambda[m * self.d + n]
    }

    pub fn set(&mut self, m: usize, n: usize, value: f64) {
        self.lambda[m * self.d + n] = value;
    }

    /// Pack into the flat layout used by the optimizers: per pair `(m, n)` in
    /// product order the rotation `l_{m,n}` then the phase `l_{n,m}`; the full
    /// form appends the diagonal phases.
    pub fn to_flat(&self, form: Form) -> Vec<f64> {
        let d = self.d;
        let mut out = Vec::with_capacity(parameter_count(d, form));
        for GeneratorPair { m, n } in GeneratorPair::all(d) {
            out.push(self.get(m, n));
            out.push(self.get(n, m));
        }
        if form == Form::Full {
            out.extend((0..d).map(|l| self.get(l, l)));
        }
        out
    }

    pub fn from_flat(d: usize, form: Form, flat: &[f64]) -> Result<Self> {
        let expected = parameter_count(d, form);
        if flat.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: flat.len() });
        }
        let mut p = Self::zeros(d)?;
        for (i, GeneratorPair { m, n }) in GeneratorPair::all(d).enumerate() {
            p.set(m, n, flat[2 * i]);
            p.set(n, m, flat[2 * i + 1]);
        }
        if form == Form::Full {
            let base = d * d - d;
            for l in 0..d {
                p.set(l, l, flat[base + l]);
            }
        }
        Ok(p)
    }

    /// True when rotations lie in `[0, pi/2]` and phases in `[0, 2 pi]`.
    pub fn in_canonical_range(&self) -> bool {
        let d = self.d;
        (0..d).all(|m| {
            (0..d).all(|n| {
                let v = self.get(m, n);
                if m < n {
                    (0.0..=FRAC_PI_2).contains(&v)
                } else {
                    (0.0..=TAU).contains(&v)
                }
            })
        })
    }
}

/// Reflect a rotation angle into `[0, pi/2]` with a period-`pi` triangle
/// wave. Continuous in its argument, so an objective composed with it stays
/// continuous.
pub fn fold_rotation(x: f64) -> f64 {
    let t = x.rem_euclid(PI);
    if t > FRAC_PI_2 {
        PI - t
    } else {
        t
    }
}

/// Wrap a phase into `[0, 2 pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let t = x.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Fold rotations and wrap phases. Idempotent.
pub fn canonicalize(p: &ParamMatrix) -> ParamMatrix {
    let d = p.d;
    let mut out = p.clone();
    for m in 0..d {
        for n in 0..d {
            let v = p.get(m, n);
            out.set(m, n, if m < n { fold_rotation(v) } else { wrap_phase(v) });
        }
    }
    out
}

/// Canonicalize a flat parameter vector in place (layout of
/// [`ParamMatrix::to_flat`]).
pub fn canonicalize_flat(d: usize, form: Form, flat: &mut [f64]) {
    let pairs = d * (d - 1) / 2;
    for i in 0..pairs {
        flat[2 * i] = fold_rotation(flat[2 * i]);
        flat[2 * i + 1] = wrap_phase(flat[2 * i + 1]);
    }
    if form == Form::Full {
        for v in &mut flat[2 * pairs..] {
            *v = wrap_phase(*v);
        }
    }
}

/// Two-level factor acting on `span{|m>, |n>}`:
///
/// ```text
/// cos(r)|n><n| + sin(r)|n><m| - e^{i phi} sin(r)|m><n| + e^{i phi} cos(r)|m><m| + sum_{k != m,n} |k><k|
/// ```
pub fn elementary_factor(d: usize, m: usize, n: usize, rot: f64, phase: f64) -> Result<CMat> {
    GeneratorPair::new(m, n, d)?;
    let (s, c) = rot.sin_cos();
    let e = C64::from_polar(1.0, phase);
    let mut f = CMat::identity(d, d);
    f[(m, m)] = e * c;
    f[(m, n)] = -e * s;
    f[(n, m)] = C64::from(s);
    f[(n, n)] = C64::from(c);
    Ok(f)
}

/// Full or reduced composite unitary. In the reduced form the diagonal of
/// `lambda` is ignored.
pub fn composite_unitary(p: &ParamMatrix, form: Form) -> CMat {
    let d = p.d;
    let mut buf = vec![ZERO; d * d];
    build_unitary(d, form, &p.to_flat(form), &mut buf);
    CMat::from_row_slice(d, d, &buf)
}

/// Ordered product `prod_{n=m+1}^{d-1} F(m, n)` for one fixed `m`.
pub fn group_product(p: &ParamMatrix, m: usize) -> CMat {
    let d = p.d;
    let mut u = CMat::identity(d, d);
    for n in m + 1..d {
        u *= elementary_factor(d, m, n, p.get(m, n), p.get(n, m)).expect("m < n < d");
    }
    u
}

/// Write the composite unitary for flat parameters `flat` into `out`
/// (row-major `d x d`). Parameters are used as given; callers that want the
/// canonical box fold them first.
///
/// The product is accumulated from the right, one factor at a time, as
/// updates of two rows. While group `m` is applied the rows involved are
/// zero left of column `m`, so each update touches only `d - m` columns.
pub fn build_unitary(d: usize, form: Form, flat: &[f64], out: &mut [C64]) {
    debug_assert_eq!(flat.len(), parameter_count(d, form));
    debug_assert_eq!(out.len(), d * d);
    out.fill(ZERO);
    let pairs = d * (d - 1) / 2;
    for l in 0..d {
        out[l * d + l] = match form {
            Form::Full => C64::from_polar(1.0, flat[2 * pairs + l]),
            Form::Reduced => ONE,
        };
    }
    // Pair index of (m, n) in product order.
    let pair_index = |m: usize, n: usize| m * (2 * d - m - 1) / 2 + (n - m - 1);
    for m in (0..d.saturating_sub(1)).rev() {
        for n in (m + 1..d).rev() {
            let i = pair_index(m, n);
            let (s, c) = flat[2 * i].sin_cos();
            let e = C64::from_polar(1.0, flat[2 * i + 1]);
            let (ec, es) = (e * c, e * s);
            for col in m..d {
                let vm = out[m * d + col];
                let vn = out[n * d + col];
                out[m * d + col] = ec * vm - es * vn;
                out[n * d + col] = vm * s + vn * c;
            }
        }
    }
}
