//! Density matrices of the magic simplex and the linear algebra around them.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};
use crate::{Error, Result};

/// Entrywise tolerance for the Hermiticity flag.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Minimum eigenvalue still counted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

/// Dense complex square matrix with a Hermiticity flag.
///
/// Houses density matrices, Bell operators, partial transposes and (with the
/// flag cleared) Weyl operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMat,
    hermitian: bool,
}

impl Operator {
    /// Wrap a square matrix, setting the flag when it is Hermitian to within
    /// [`HERMITIAN_TOL`].
    pub fn new(matrix: CMat) -> Self {
        assert!(matrix.is_square(), "operator must be square");
        let hermitian = linalg::hermiticity_defect(&matrix) <= HERMITIAN_TOL;
        Self { matrix, hermitian }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Hermitian, unit trace and positive semidefinite within the crate
    /// tolerances.
    pub fn is_density_matrix(&self) -> bool {
        self.hermitian && (self.trace() - ONE).norm() <= HERMITIAN_TOL && self.min_eigenvalue() >= -PSD_TOL
    }

    /// `Tr(self * other)` computed without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        assert_eq!(self.dim(), other.dim());
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * other.matrix[(j, i)];
            }
        }
        acc
    }

    pub fn scaled(&self, s: f64) -> Operator {
        Operator::new(self.matrix.scale(s))
    }

    /// Affine mixture `(1 - nu)/n * 1 + nu * self` with uncolored noise.
    pub fn with_noise(&self, nu: f64) -> Operator {
        let n = self.dim();
        let mut m = self.matrix.scale(nu);
        let w = (1.0 - nu) / n as f64;
        for i in 0..n {
            m[(i, i)] += w;
        }
        Operator::new(m)
    }
}

impl From<CMat> for Operator {
    fn from(matrix: CMat) -> Self {
        Operator::new(matrix)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixDump {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(self.matrix[(i, j)].re);
                im.push(self.matrix[(i, j)].im);
            }
        }
        MatrixDump { dim: n, re, im }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let dump = MatrixDump::deserialize(deserializer)?;
        let n = dump.dim;
        if n == 0 || dump.re.len() != n * n || dump.im.len() != n * n {
            return Err(serde::de::Error::custom(format!(
                "matrix dump needs dim > 0 and {} entries in both re and im",
                n * n
            )));
        }
        let m = CMat::from_fn(n, n, |i, j| C64::new(dump.re[i * n + j], dump.im[i * n + j]));
        Ok(Operator::new(m))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

fn reduce(i: i64, d: usize) -> usize {
    i.rem_euclid(d as i64) as usize
}

fn root_of_unity(d: usize, power: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * ((power % d) as f64) / d as f64)
}

/// Weyl operator `W_{k,l} = sum_s exp(2 pi i s k / d) |s><(s+l) mod d|`.
///
/// Indices are reduced mod `d`, so `W_{k+d,l} = W_{k,l}` exactly.
pub fn weyl_operator(d: usize, k: i64, l: i64) -> Result<Operator> {
    check_dim(d)?;
    let (k, l) = (reduce(k, d), reduce(l, d));
    let mut m = CMat::zeros(d, d);
    for s in 0..d {
        m[(s, (s + l) % d)] = root_of_unity(d, s * k);
    }
    Ok(Operator::new(m))
}

/// Coefficient vector of `|Omega_{k,l}> = (W_{k,l} x 1)|Omega_{0,0}>`,
/// i.e. `d^{-1/2} sum_s exp(2 pi i s k / d) |s>|s+l>`.
pub fn bell_vector(d: usize, k: i64, l: i64) -> Result<CVec> {
    check_dim(d)?;
    let (k, l) = (reduce(k, d), reduce(l, d));
    let norm = (d as f64).sqrt().recip();
    let mut v = CVec::zeros(d * d);
    for s in 0..d {
        v[s * d + (s + l) % d] = root_of_unity(d, s * k) * norm;
    }
    Ok(v)
}

/// Rank-one projector `P_{k,l}` onto the generalized Bell state.
pub fn bell_projector(d: usize, k: i64, l: i64) -> Result<Operator> {
    Ok(Operator::new(linalg::projector(&bell_vector(d, k, l)?)))
}

pub fn maximally_mixed(n: usize) -> Operator {
    Operator::new(linalg::identity(n).unscale(n as f64))
}

/// Weights `c_{k,l}` on the `d^2` Bell projectors, stored row-major in `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexCoordinates {
    d: usize,
    weights: Vec<f64>,
}

impl SimplexCoordinates {
    pub fn new(d: usize, weights: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        if weights.len() != d * d {
            return Err(Error::InvalidCoordinates(format!("expected {} weights, got {}", d * d, weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidCoordinates("non-finite weight".into()));
        }
        Ok(Self { d, weights })
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(d, vec![1.0 / (d * d) as f64; d * d])
    }

    pub fn vertex(d: usize, k: i64, l: i64) -> Result<Self> {
        let mut c = Self::new(d, vec![0.0; d * d])?;
        c.weights[reduce(k, d) * d + reduce(l, d)] = 1.0;
        Ok(c)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, k: i64, l: i64) -> f64 {
        self.weights[reduce(k, self.d) * self.d + reduce(l, self.d)]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Strict membership of the magic simplex: nonnegative weights summing
    /// to one.
    pub fn is_simplex_member(&self) -> bool {
        (self.total() - 1.0).abs() <= HERMITIAN_TOL && self.weights.iter().all(|&w| w >= 0.0)
    }
}

/// Bell-diagonal state `sum c_{k,l} P_{k,l}`.
///
/// Individual weights may be negative (the identity-mixed families use this);
/// only the total must equal one. The result is then Hermitian with unit trace
/// but not necessarily positive.
pub fn simplex_state(c: &SimplexCoordinates) -> Result<Operator> {
    let total = c.total();
    if (total - 1.0).abs() > HERMITIAN_TOL {
        return Err(Error::InvalidCoordinates(format!("weights sum to {total}, expected 1")));
    }
    let d = c.d;
    let mut m = CMat::zeros(d * d, d * d);
    for k in 0..d {
        for l in 0..d {
            let w = c.weights[k * d + l];
            if w == 0.0 {
                continue;
            }
            let v = bell_vector(d, k as i64, l as i64)?;
            m.ger(C64::from(w), &v, &v.conjugate(), ONE);
        }
    }
    Ok(Operator::new(m))
}

/// Affine map of the discrete phase space, `(k, l) = M (k', l') + (j, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpaceMap {
    pub m: i64,
    pub n: i64,
    pub p: i64,
    pub q: i64,
    pub j: i64,
    pub r: i64,
}

impl PhaseSpaceMap {
    pub fn identity() -> Self {
        Self { m: 1, n: 0, p: 0, q: 1, j: 0, r: 0 }
    }

    pub fn translation(j: i64, r: i64) -> Self {
        Self { j, r, ..Self::identity() }
    }

    pub fn det(&self) -> i64 {
        self.m * self.q - self.n * self.p
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let det = self.det().rem_euclid(d as i64);
        if det == 1 || det == d as i64 - 1 {
            Ok(())
        } else {
            Err(Error::SymmetryViolation { det, d })
        }
    }

    fn source(&self, k: usize, l: usize, d: usize) -> (usize, usize) {
        let (k, l) = (k as i64, l as i64);
        (reduce(self.m * k + self.n * l + self.j, d), reduce(self.p * k + self.q * l + self.r, d))
    }
}

/// Relabel simplex weights by a phase-space symmetry:
/// `c'_{k',l'} = c_{k,l}` with `(k,l) = M(k',l') + (j,r) mod d`.
pub fn phase_space_transform(c: &SimplexCoordinates, map: &PhaseSpaceMap) -> Result<SimplexCoordinates> {
    let d = c.d;
    map.validate(d)?;
    let mut out = vec![0.0; d * d];
    for kp in 0..d {
        for lp in 0..d {
            let (k, l) = map.source(kp, lp, d);
            out[kp * d + lp] = c.weights[k * d + l];
        }
    }
    SimplexCoordinates::new(d, out)
}

/// Named state families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `(1-a)/d^2 1 + a P_{0,0}`
    Isotropic,
    /// `(1-a-b)/9 1 + a P_{0,0} + b P_{0,1}`
    TwoParam,
    /// `(1-a-b-g)/9 1 + a P_{0,0} + b P_{0,1} + g P_{0,2}`
    Line,
    /// `(1-a-b-g)/9 1 + a P_{0,0} + b P_{0,1} + g P_{1,0}`
    Offline,
    /// Two-qubit `1/4 (1 + sum c_i s_i x s_i)`
    Tetra2,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Isotropic, Family::TwoParam, Family::Line, Family::Offline, Family::Tetra2];

    pub fn arity(self) -> usize {
        match self {
            Family::Isotropic => 1,
            Family::TwoParam => 2,
            Family::Line | Family::Offline | Family::Tetra2 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Isotropic => "isotropic",
            Family::TwoParam => "two_param",
            Family::Line => "line",
            Family::Offline => "offline",
            Family::Tetra2 => "tetra2",
        }
    }

    /// Fixed local dimension, or `None` when any `d >= 2` is accepted.
    pub fn fixed_dimension(self) -> Option<usize> {
        match self {
            Family::Isotropic => None,
            Family::TwoParam | Family::Line | Family::Offline => Some(3),
            Family::Tetra2 => Some(2),
        }
    }

    /// Dimension used when the caller does not choose one.
    pub fn default_dimension(self) -> usize {
        self.fixed_dimension().unwrap_or(3)
    }

    /// Bell projectors `(k, l)` weighted by the family parameters, for the
    /// identity-mixed families.
    fn projector_indices(self) -> &'static [(i64, i64)] {
        match self {
            Family::Isotropic => &[(0, 0)],
            Family::TwoParam => &[(0, 0), (0, 1)],
            Family::Line => &[(0, 0), (0, 1), (0, 2)],
            Family::Offline => &[(0, 0), (0, 1), (1, 0)],
            Family::Tetra2 => &[],
        }
    }

    /// Whether noise mixing scales the family parameters linearly, i.e. the
    /// state `(1-nu)/n 1 + nu rho(p)` equals `rho(nu p)`.
    pub fn scales_with_noise(self) -> bool {
        true
    }

    fn check(self, params: &[f64], d: usize) -> Result<()> {
        if params.len() != self.arity() {
            return Err(Error::ParameterCount { family: self.name(), expected: self.arity(), got: params.len() });
        }
        check_dim(d)?;
        match self.fixed_dimension() {
            Some(fixed) if fixed != d => Err(Error::DimensionMismatch { expected: fixed, got: d }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "isotropic" | "iso" => Ok(Family::Isotropic),
            "two_param" | "twoparam" | "two" => Ok(Family::TwoParam),
            "line" => Ok(Family::Line),
            "offline" | "off_line" => Ok(Family::Offline),
            "tetra2" | "tetra" | "tetrahedron" => Ok(Family::Tetra2),
            _ => Err(Error::Parse(format!("unknown family '{s}'"))),
        }
    }
}

/// Bell-basis weights of a family member.
///
/// For the qutrit families this is the uniform `(1 - sum p)/d^2` plus the
/// parameter on each named projector. For `Tetra2` the weight of the Bell
/// state with correlation signature `v` is `(1 + c.v)/4`.
pub fn family_coordinates(family: Family, params: &[f64], d: usize) -> Result<SimplexCoordinates> {
    family.check(params, d)?;
    if family == Family::Tetra2 {
        // Signatures of Phi+, Psi+, Phi-, Psi- in the (k, l) layout of d = 2.
        const SIG: [[f64; 3]; 4] = [[1.0, -1.0, 1.0], [1.0, 1.0, -1.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]];
        let w = SIG.iter().map(|s| 0.25 * (1.0 + s[0] * params[0] + s[1] * params[1] + s[2] * params[2])).collect();
        return SimplexCoordinates::new(2, w);
    }
    let base = (1.0 - params.iter().sum::<f64>()) / (d * d) as f64;
    let mut w = vec![base; d * d];
    for (&(k, l), &p) in family.projector_indices().iter().zip(params) {
        w[reduce(k, d) * d + reduce(l, d)] += p;
    }
    SimplexCoordinates::new(d, w)
}

fn pauli(i: usize) -> CMat {
    let z = ZERO;
    let o = ONE;
    let im = C64::new(0.0, 1.0);
    match i {
        1 => CMat::from_row_slice(2, 2, &[z, o, o, z]),
        2 => CMat::from_row_slice(2, 2, &[z, -im, im, z]),
        3 => CMat::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => linalg::identity(2),
    }
}

/// Member of a named family. Positivity is not enforced; see
/// [`Operator::min_eigenvalue`].
pub fn family_state(family: Family, params: &[f64], d: usize) -> Result<Operator> {
    family.check(params, d)?;
    match family {
        Family::Tetra2 => {
            let mut m = linalg::kron(&pauli(0), &pauli(0));
            for (i, &c) in params.iter().enumerate() {
                let s = pauli(i + 1);
                m += linalg::kron(&s, &s).scale(c);
            }
            Ok(Operator::new(m.scale(0.25)))
        }
        _ => {
            let mut m = linalg::identity(d * d).scale((1.0 - params.iter().sum::<f64>()) / (d * d) as f64);
            for (&(k, l), &p) in family.projector_indices().iter().zip(params) {
                let v = bell_vector(d, k, l)?;
                m.ger(C64::from(p), &v, &v.conjugate(), ONE);
            }
            Ok(Operator::new(m))
        }
    }
}

fn check_bipartite(rho: &Operator, da: usize, db: usize) -> Result<()> {
    if da == 0 || db == 0 || rho.dim() != da * db {
        return Err(Error::DimensionMismatch { expected: da * db, got: rho.dim() });
    }
    Ok(())
}

/// Transpose on the second tensor factor.
pub fn partial_transpose(rho: &Operator, da: usize, db: usize) -> Result<Operator> {
    check_bipartite(rho, da, db)?;
    let src = rho.matrix();
    let n = da * db;
    let m = CMat::from_fn(n, n, |row, col| {
        let (i, j) = (row / db, row % db);
        let (k, l) = (col / db, col % db);
        src[(i * db + l, k * db + j)]
    });
    Ok(Operator::new(m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    A,
    B,
}

/// Reduced state of the kept party.
pub fn partial_trace(rho: &Operator, da: usize, db: usize, keep: Party) -> Result<Operator> {
    check_bipartite(rho, da, db)?;
    let src = rho.matrix();
    let m = match keep {
        Party::A => CMat::from_fn(da, da, |i, k| (0..db).map(|j| src[(i * db + j, k * db + j)]).sum()),
        Party::B => CMat::from_fn(db, db, |j, l| (0..da).map(|i| src[(i * db + j, i * db + l)]).sum()),
    };
    Ok(Operator::new(m))
}
