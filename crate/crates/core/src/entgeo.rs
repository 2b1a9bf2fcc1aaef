//! Entanglement geometry of the named families: PPT, closed-form region
//! boundaries, classification, and the m-concurrence.
//!
//! Every closed-form boundary is exposed as a signed function that vanishes
//! on the boundary and is positive strictly inside the property region
//! (positive, PPT, separable, or CGLMP non-violating).
//!
//! | family      | kind        | components (positive inside)                                   |
//! |-------------|-------------|----------------------------------------------------------------|
//! | isotropic   | positivity  | `1 + (d^2 - 1) a`, `1 - a`                                     |
//! | isotropic   | ppt         | `1 + (d - 1) a`, `1 - (d + 1) a`                               |
//! | two_param   | positivity  | `8a - b + 1`, `8b - a + 1`, `1 - a - b`                        |
//! | two_param   | ppt         | `-(8a^2 + 8b^2 - 11ab + 2a + 2b - 1)`                          |
//! | two_param   | witness     | `b+ - b` for `4a^2 - 5a + 40b^2 + (17a - 14)b + 1`, and mirror |
//! | line        | positivity  | `8a - b - g + 1` (and permutations), `1 - a - b - g`           |
//! | line        | ppt         | `-(8a^2 + 8b^2 + 8g^2 + 2a + 2b + 2g - 11ab - 11ag - 11bg - 1)` |
//! | line        | witness     | `a+ - a` for `40a^2 + a(17b + 17g - 14) + 4b^2 + g(4g - 5) - b(19g + 5) + 1`, and permutations |
//! | line        | sphere      | `r^2 - |p - c(1,1,1)|^2`                                       |
//! | line        | plane       | `(a + b + 6 sqrt3 - 9)/2 - g` (and permutations)               |
//! | tetra2      | positivity  | `1 + s.c` for the four Bell signatures `s`                     |
//! | tetra2      | ppt         | as positivity with `c_2 -> -c_2`                               |
//! | tetra2      | octahedron  | `1 - |c_1| - |c_2| - |c_3|`                                    |
//! | tetra2      | cylinder    | `1 - c_j^2 - c_k^2` for the three axes                         |
//!
//! Witness components: a witness conic is quadratic in one distinguished
//! parameter `x` (the one carrying the coefficient 40). The optimal witness
//! detects entanglement for `x` beyond the larger root `x+` of that
//! quadratic, so the component is `x+ - x`, or `+inf` where the conic has
//! no real point on that line. The two-parameter family is the line family
//! at `g = 0` for the witness, sphere and plane boundaries.

use std::cell::RefCell;

use nalgebra::{Matrix4, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cglmp;
use crate::linalg::{self, CVec, C64, ZERO};
use crate::optimize::{self, nelder_mead_with_stall, OptimizerConfig};
use crate::par;
use crate::qstate::{self, family_state, Family, Operator, Party, PSD_TOL};
use crate::uparam::{self, Form, ParamMatrix};
use crate::{Error, Result};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Isotropic weight above which the qutrit CGLMP inequality is violated,
/// `(6 sqrt3 - 9)/2`.
pub const ISOTROPIC_VIOLATION_ALPHA: f64 = (6.0 * SQRT3 - 9.0) / 2.0;
/// Coordinate of the conjectured sphere's center on the diagonal
/// `a = b = g`.
pub const SPHERE_CENTER: f64 = (-361.0 + 186.0 * SQRT3) / 156.0;
pub const SPHERE_RADIUS: f64 = (413.0 * SQRT3 - 558.0) / 156.0;

/// Tolerance on `min eig(rho^{T_B})` for PPT.
pub const PPT_TOL: f64 = 1e-10;
/// Negative eigenvalues of a concurrence block above this are clipped.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Iterations per parameter without improvement before a concurrence
/// search run is considered settled.
const STALL_PER_PARAMETER: usize = 50;

/// Returns `(ppt, min eig(rho^{T_B}))`.
pub fn is_ppt(rho: &Operator, da: usize, db: usize) -> Result<(bool, f64)> {
    let m = qstate::partial_transpose(rho, da, db)?.min_eigenvalue();
    Ok((m >= -PPT_TOL, m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Positivity,
    Ppt,
    Witness,
    CglmpSphere,
    CglmpPlane,
    Octahedron,
    Cylinder,
}

impl BoundaryKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Positivity => "positivity",
            BoundaryKind::Ppt => "ppt",
            BoundaryKind::Witness => "witness",
            BoundaryKind::CglmpSphere => "cglmp_sphere",
            BoundaryKind::CglmpPlane => "cglmp_plane",
            BoundaryKind::Octahedron => "octahedron",
            BoundaryKind::Cylinder => "cylinder",
        }
    }
}

impl std::str::FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        [
            BoundaryKind::Positivity,
            BoundaryKind::Ppt,
            BoundaryKind::Witness,
            BoundaryKind::CglmpSphere,
            BoundaryKind::CglmpPlane,
            BoundaryKind::Octahedron,
            BoundaryKind::Cylinder,
        ]
        .into_iter()
        .find(|k| k.name() == norm)
        .ok_or_else(|| Error::Parse(format!("unknown boundary kind '{s}'")))
    }
}

/// A named closed-form boundary. With `component = None` the value is the
/// minimum over all components, i.e. the margin of the whole region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub family: Family,
    pub kind: BoundaryKind,
    /// Local dimension; only the isotropic family depends on it.
    pub d: usize,
    pub component: Option<usize>,
}

impl BoundarySpec {
    pub fn new(family: Family, kind: BoundaryKind) -> Self {
        Self { family, kind, d: family.default_dimension(), component: None }
    }

    pub fn with_dimension(self, d: usize) -> Self {
        Self { d, ..self }
    }

    pub fn component(self, i: usize) -> Self {
        Self { component: Some(i), ..self }
    }
}

/// Margin `x+ - x` for the quadratic `40 x^2 + b x + c` in `x`.
fn witness_margin(x: f64, b: f64, c: f64) -> f64 {
    let disc = b * b - 160.0 * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    (-b + disc.sqrt()) / 80.0 - x
}

/// Line-family witness with distinguished parameter `x`.
fn line_witness(x: f64, y: f64, z: f64) -> f64 {
    let b = 17.0 * (y + z) - 14.0;
    let c = 4.0 * y * y + 4.0 * z * z - 19.0 * y * z - 5.0 * y - 5.0 * z + 1.0;
    witness_margin(x, b, c)
}

/// Raw line-family witness polynomial in its printed form.
pub fn line_witness_polynomial(a: f64, b: f64, g: f64) -> f64 {
    40.0 * a * a + a * (17.0 * b + 17.0 * g - 14.0) + 4.0 * b * b + g * (4.0 * g - 5.0) - b * (19.0 * g + 5.0) + 1.0
}

pub fn two_param_ppt_polynomial(a: f64, b: f64) -> f64 {
    8.0 * a * a + 8.0 * b * b - 11.0 * b * a + 2.0 * a + 2.0 * b - 1.0
}

pub fn line_ppt_polynomial(a: f64, b: f64, g: f64) -> f64 {
    8.0 * (a * a + b * b + g * g) + 2.0 * (a + b + g) - 11.0 * (a * b + a * g + b * g) - 1.0
}

fn sphere(p: [f64; 3]) -> f64 {
    let dist2: f64 = p.iter().map(|v| (v - SPHERE_CENTER).powi(2)).sum();
    SPHERE_RADIUS * SPHERE_RADIUS - dist2
}

fn planes(p: [f64; 3]) -> Vec<f64> {
    let [a, b, g] = p;
    let h = |x: f64, y: f64, z: f64| 0.5 * (x + y + 6.0 * SQRT3 - 9.0) - z;
    vec![h(b, g, a), h(a, g, b), h(a, b, g)]
}

const TETRA_SIGNATURES: [[f64; 3]; 4] = [[1.0, -1.0, 1.0], [1.0, 1.0, -1.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]];

fn components(spec: &BoundarySpec, p: &[f64]) -> Result<Vec<f64>> {
    use BoundaryKind as K;
    use Family as F;
    let unknown = || Error::UnknownBoundary { family: spec.family.name(), kind: spec.kind.name() };
    // Line-like coordinates; the two-parameter family is the line at g = 0.
    let line = || match spec.family {
        F::TwoParam => [p[0], p[1], 0.0],
        _ => [p[0], p[1], p[2]],
    };
    let v = match (spec.family, spec.kind) {
        (F::Isotropic, K::Positivity) => {
            let (a, n) = (p[0], (spec.d * spec.d) as f64);
            vec![1.0 + (n - 1.0) * a, 1.0 - a]
        }
        (F::Isotropic, K::Ppt) => {
            let (a, d) = (p[0], spec.d as f64);
            vec![1.0 + (d - 1.0) * a, 1.0 - (d + 1.0) * a]
        }
        (F::TwoParam, K::Positivity) => {
            let (a, b) = (p[0], p[1]);
            vec![8.0 * a - b + 1.0, 8.0 * b - a + 1.0, 1.0 - a - b]
        }
        (F::Line | F::Offline, K::Positivity) => {
            let (a, b, g) = (p[0], p[1], p[2]);
            vec![8.0 * a - b - g + 1.0, 8.0 * b - a - g + 1.0, 8.0 * g - a - b + 1.0, 1.0 - a - b - g]
        }
        (F::TwoParam, K::Ppt) => vec![-two_param_ppt_polynomial(p[0], p[1])],
        (F::Line, K::Ppt) => vec![-line_ppt_polynomial(p[0], p[1], p[2])],
        (F::TwoParam, K::Witness) => {
            let (a, b) = (p[0], p[1]);
            vec![line_witness(b, a, 0.0), line_witness(a, b, 0.0)]
        }
        (F::Line, K::Witness) => {
            let (a, b, g) = (p[0], p[1], p[2]);
            vec![line_witness(a, b, g), line_witness(b, a, g), line_witness(g, a, b)]
        }
        (F::Line | F::TwoParam, K::CglmpSphere) => vec![sphere(line())],
        (F::Line | F::TwoParam, K::CglmpPlane) => {
            let all = planes(line());
            match spec.family {
                // With g pinned at zero the g-plane is not a boundary of the slice.
                F::TwoParam => all[..2].to_vec(),
                _ => all,
            }
        }
        (F::Tetra2, K::Positivity) => {
            TETRA_SIGNATURES.iter().map(|s| 1.0 + s[0] * p[0] + s[1] * p[1] + s[2] * p[2]).collect()
        }
        (F::Tetra2, K::Ppt) => TETRA_SIGNATURES.iter().map(|s| 1.0 + s[0] * p[0] - s[1] * p[1] + s[2] * p[2]).collect(),
        (F::Tetra2, K::Octahedron) => vec![1.0 - p[0].abs() - p[1].abs() - p[2].abs()],
        (F::Tetra2, K::Cylinder) => {
            let s: Vec<f64> = p.iter().map(|c| c * c).collect();
            vec![1.0 - s[1] - s[2], 1.0 - s[0] - s[2], 1.0 - s[0] - s[1]]
        }
        _ => return Err(unknown()),
    };
    Ok(v)
}

/// Signed value of a closed-form boundary at `point` (family parameters).
pub fn boundary_value(spec: &BoundarySpec, point: &[f64]) -> Result<f64> {
    if point.len() != spec.family.arity() {
        return Err(Error::ParameterCount {
            family: spec.family.name(),
            expected: spec.family.arity(),
            got: point.len(),
        });
    }
    let v = components(spec, point)?;
    match spec.component {
        Some(i) => v.get(i).copied().ok_or_else(|| {
            Error::Config(format!("{} {} has {} component(s), asked for {i}", spec.family, spec.kind.name(), v.len()))
        }),
        None => Ok(v.into_iter().fold(f64::INFINITY, f64::min)),
    }
}

/// Closed-form separability margin, where one exists: PPT alone for the
/// families where PPT is sufficient, the witness margin for the qutrit
/// families that have one. Positive for separable states.
pub fn separability_margin(family: Family, point: &[f64], d: usize) -> Result<Option<f64>> {
    let spec = |kind| BoundarySpec::new(family, kind).with_dimension(d);
    match family {
        Family::Tetra2 => boundary_value(&spec(BoundaryKind::Octahedron), point).map(Some),
        Family::Isotropic => boundary_value(&spec(BoundaryKind::Ppt), point).map(Some),
        Family::TwoParam | Family::Line => {
            let ppt = boundary_value(&spec(BoundaryKind::Ppt), point)?;
            let w = boundary_value(&spec(BoundaryKind::Witness), point)?;
            Ok(Some(ppt.min(w)))
        }
        Family::Offline => Ok(None),
    }
}

/// Closed-form CGLMP non-violation margin, where one exists. Positive for
/// states that do not violate. For the line families this is the
/// conjectured sphere cut by the planes.
pub fn cglmp_margin_closed_form(family: Family, point: &[f64], d: usize) -> Result<Option<f64>> {
    let spec = |kind| BoundarySpec::new(family, kind).with_dimension(d);
    match family {
        Family::Tetra2 => boundary_value(&spec(BoundaryKind::Cylinder), point).map(Some),
        Family::Isotropic => Ok(Some(2.0 / cglmp::cglmp_analytic_max(d)? - point[0])),
        Family::TwoParam | Family::Line => {
            let s = boundary_value(&spec(BoundaryKind::CglmpSphere), point)?;
            let p = boundary_value(&spec(BoundaryKind::CglmpPlane), point)?;
            Ok(Some(s.min(p)))
        }
        Family::Offline => Ok(None),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessVerdict {
    Separable,
    Entangled,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub family: Family,
    pub point: Vec<f64>,
    pub positive: bool,
    pub min_eigenvalue: f64,
    pub ppt: bool,
    pub ppt_min_eigenvalue: f64,
    pub witness_separable: WitnessVerdict,
    pub bound_entangled: bool,
    /// `None` for non-positive points or when the optimizer failed.
    pub cglmp_violating: Option<bool>,
    /// `max I_d - 2`.
    pub cglmp_margin: Option<f64>,
    pub cglmp_error: Option<String>,
}

/// Classify a family member at the family's default dimension.
pub fn classify(family: Family, point: &[f64], cfg: &OptimizerConfig) -> Result<Classification> {
    classify_in(family, point, family.default_dimension(), cfg)
}

pub fn classify_in(family: Family, point: &[f64], d: usize, cfg: &OptimizerConfig) -> Result<Classification> {
    let rho = family_state(family, point, d)?;
    let min_eigenvalue = rho.min_eigenvalue();
    let positive = min_eigenvalue >= -PSD_TOL;
    let (ppt, ppt_min_eigenvalue) = is_ppt(&rho, d, d)?;

    let witness_separable = if !positive {
        WitnessVerdict::NotApplicable
    } else {
        match separability_margin(family, point, d)? {
            None => WitnessVerdict::NotApplicable,
            Some(_) if !ppt => WitnessVerdict::Entangled,
            Some(m) if m < 0.0 => WitnessVerdict::Entangled,
            Some(_) => WitnessVerdict::Separable,
        }
    };
    let bound_entangled = positive && ppt && witness_separable == WitnessVerdict::Entangled;

    let (cglmp_violating, cglmp_margin, cglmp_error) = if positive {
        match optimize::maximize_bell(&rho, d, cfg) {
            Ok(r) => (Some(r.value > 2.0), Some(r.value - 2.0), None),
            Err(e) if e.is_input_error() => return Err(e),
            Err(e) => (None, None, Some(e.to_string())),
        }
    } else {
        (None, None, None)
    };

    Ok(Classification {
        family,
        point: point.to_vec(),
        positive,
        min_eigenvalue,
        ppt,
        ppt_min_eigenvalue,
        witness_separable,
        bound_entangled,
        cglmp_violating,
        cglmp_margin,
        cglmp_error,
    })
}

/// Pairs `k < l` of a `d`-level system.
fn level_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|k| (k + 1..d).map(move |l| (k, l))).collect()
}

/// `C_m^2` of a pure state: the sum over all level pairs `(k_A < l_A)`,
/// `(k_B < l_B)` of `|<psi| s_y (x) s_y |psi*>|^2`, with `s_y` the
/// antisymmetric generator on the pair. Equals `2 (1 - Tr rho_A^2)`.
pub fn m_concurrence_pure(psi: &CVec, d: usize) -> Result<f64> {
    if psi.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, got: psi.len() });
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Unnormalized(norm));
    }
    let at = |i: usize, j: usize| psi[i * d + j];
    let pairs = level_pairs(d);
    let mut total = 0.0;
    for &(ka, la) in &pairs {
        for &(kb, lb) in &pairs {
            // <psi| s_y(ka,la) (x) s_y(kb,lb) |psi*> = -2 (psi_{ka kb} psi_{la lb} - psi_{ka lb} psi_{la kb})^*...
            // up to a phase, whose modulus is all that matters.
            let v = at(ka, kb) * at(la, lb) - at(ka, lb) * at(la, kb);
            total += 4.0 * v.norm_sqr();
        }
    }
    Ok(total)
}

/// `2 (1 - Tr rho_A^2)` for a pure state; the linear-entropy route.
pub fn m_concurrence_pure_linear_entropy(psi: &CVec, d: usize) -> Result<f64> {
    let rho = Operator::new(linalg::projector(psi));
    let ra = qstate::partial_trace(&rho, d, d, Party::A)?;
    let purity = ra.trace_product(&ra).re;
    Ok(2.0 * (1.0 - purity))
}

/// `sigma_y (x) sigma_y` on the basis `|kk'>, |kl'>, |lk'>, |ll'>`.
fn sy_sy() -> Matrix4<C64> {
    let o = C64::new(1.0, 0.0);
    let z = ZERO;
    Matrix4::new(z, z, z, -o, z, z, o, z, z, o, z, z, -o, z, z, z)
}

/// `X = max(0, 2 max x - sum x)` for one `4 x 4` block `G`, where `x` are
/// the square roots of the eigenvalues of `G s G* s`.
///
/// Evaluated through the Hermitian factorization `G = L L^dag`: the `x` are
/// the singular values of `L^T s L`.
fn block_x(g: &Matrix4<C64>) -> Result<f64> {
    let mut eig = SymmetricEigen::new(*g);
    if eig.eigenvalues.min() < -DEGENERACY_TOL {
        let sym = (g + g.adjoint()) * C64::new(0.5, 0.0);
        eig = SymmetricEigen::new(sym);
        let m = eig.eigenvalues.min();
        if m < -DEGENERACY_TOL {
            return Err(Error::NumericalDegeneracy(format!("block eigenvalue {m:e} below -{DEGENERACY_TOL:e}")));
        }
    }
    let mut l = eig.eigenvectors;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    let n = l.transpose() * sy_sy() * l;
    let x = n.singular_values();
    let max = x.iter().copied().fold(0.0, f64::max);
    let sum: f64 = x.iter().sum();
    Ok((2.0 * max - sum).max(0.0))
}

/// State prepared for repeated evaluation of the X bound under local
/// unitaries; same low-rank split as the Bell kernel.
struct ConcurrenceKernel {
    d: usize,
    shift: f64,
    components: Vec<(f64, Vec<C64>)>,
    pairs: Vec<(usize, usize)>,
}

struct ConcurrenceScratch {
    ua: Vec<C64>,
    ub: Vec<C64>,
    tmp: Vec<C64>,
    rotated: Vec<Vec<C64>>,
}

impl ConcurrenceKernel {
    fn new(rho: &Operator, d: usize) -> Result<Self> {
        if rho.dim() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: rho.dim() });
        }
        if !rho.is_hermitian() {
            return Err(Error::NotHermitian(linalg::hermiticity_defect(rho.matrix())));
        }
        let (shift, components) = linalg::shifted_low_rank(rho.matrix());
        Ok(Self { d, shift, components, pairs: level_pairs(d) })
    }

    fn scratch(&self) -> ConcurrenceScratch {
        let n = self.d * self.d;
        ConcurrenceScratch {
            ua: vec![ZERO; n],
            ub: vec![ZERO; n],
            tmp: vec![ZERO; n],
            rotated: vec![vec![ZERO; n]; self.components.len()],
        }
    }

    /// Sum of `X^2` over all blocks of `(U_A (x) U_B)^dag rho (U_A (x) U_B)`.
    /// `flat` holds the reduced parameters of `U_A` then `U_B`, used as given.
    fn evaluate(&self, flat: &[f64], s: &mut ConcurrenceScratch) -> Result<f64> {
        let d = self.d;
        let per = uparam::parameter_count(d, Form::Reduced);
        uparam::build_unitary(d, Form::Reduced, &flat[..per], &mut s.ua);
        uparam::build_unitary(d, Form::Reduced, &flat[per..], &mut s.ub);
        // Each component vector as a d x d matrix M -> U_A^dag M conj(U_B).
        for ((_, v), out) in self.components.iter().zip(s.rotated.iter_mut()) {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = ZERO;
                    for k in 0..d {
                        acc += s.ua[k * d + i].conj() * v[k * d + j];
                    }
                    s.tmp[i * d + j] = acc;
                }
            }
            for i in 0..d {
                for j in 0..d {
                    let mut acc = ZERO;
                    for k in 0..d {
                        acc += s.tmp[i * d + k] * s.ub[k * d + j].conj();
                    }
                    out[i * d + j] = acc;
                }
            }
        }
        self.sum_x2(&s.rotated)
    }

    fn sum_x2(&self, rotated: &[Vec<C64>]) -> Result<f64> {
        let d = self.d;
        let mut total = 0.0;
        for &(ka, la) in &self.pairs {
            for &(kb, lb) in &self.pairs {
                let idx = [ka * d + kb, ka * d + lb, la * d + kb, la * d + lb];
                let mut g = Matrix4::<C64>::from_diagonal_element(C64::from(self.shift));
                for ((w, _), v) in self.components.iter().zip(rotated) {
                    let u = [v[idx[0]], v[idx[1]], v[idx[2]], v[idx[3]]];
                    for r in 0..4 {
                        for c in 0..4 {
                            g[(r, c)] += u[r] * u[c].conj() * *w;
                        }
                    }
                }
                let x = block_x(&g)?;
                total += x * x;
            }
        }
        Ok(total)
    }
}

/// X-quantity bound `sum X^2` on `C_m^2` in the given basis.
pub fn m_concurrence_x_bound(rho: &Operator, d: usize) -> Result<f64> {
    let k = ConcurrenceKernel::new(rho, d)?;
    let rotated: Vec<Vec<C64>> = k.components.iter().map(|(_, v)| v.clone()).collect();
    k.sum_x2(&rotated)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceResult {
    /// Best `sum X^2` over the local unitaries tried.
    pub lower_bound: f64,
    /// `sum X^2` in the input basis.
    pub raw_bound: f64,
    /// Reduced parameters of `U_A`; the state is rotated by its adjoint.
    pub ua: ParamMatrix,
    pub ub: ParamMatrix,
}

/// Lower bound on `C_m^2` maximized over local unitaries `U_A (x) U_B`
/// (`2 (d^2 - d)` reduced parameters).
///
/// The rotated state is `(U_A (x) U_B)^dag rho (U_A (x) U_B)`. The reduced
/// form leaves column phases free, and those drop out of the X bound on
/// this side only.
///
/// The first start is the identity, so `lower_bound >= raw_bound`; further
/// starts are drawn from the canonical box with seeds
/// `mix_seed(cfg.seed, i)`.
pub fn m_concurrence_lower_bound(rho: &Operator, d: usize, cfg: &OptimizerConfig) -> Result<ConcurrenceResult> {
    cfg.validate()?;
    let kernel = ConcurrenceKernel::new(rho, d)?;
    let per = uparam::parameter_count(d, Form::Reduced);
    let scratch = RefCell::new(kernel.scratch());
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let objective = |x: &[f64]| match kernel.evaluate(x, &mut scratch.borrow_mut()) {
        Ok(v) => -v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };

    let zero = vec![0.0; 2 * per];
    let raw_bound = -objective(&zero);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let (mut best, mut best_x) = (raw_bound, zero.clone());
    for i in 0..cfg.restarts {
        let x0 = if i == 0 {
            zero.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(par::mix_seed(cfg.seed, i as u64));
            let mut x = cglmp::random_flat(d, &mut rng);
            x.truncate(2 * per);
            x
        };
        let m = nelder_mead_with_stall(objective, &x0, cfg, Some(STALL_PER_PARAMETER * 2 * per));
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let m = m?;
        if -m.f > best {
            best = -m.f;
            best_x = m.x;
        }
    }
    let wrapped = optimize::wrap_angles(&best_x);
    Ok(ConcurrenceResult {
        lower_bound: best,
        raw_bound,
        ua: ParamMatrix::from_flat(d, Form::Reduced, &wrapped[..per])?,
        ub: ParamMatrix::from_flat(d, Form::Reduced, &wrapped[per..])?,
    })
}

/// Closed form of `C_m^2` on the slice `rho_line(a, b/2, b/2)`.
pub fn m_concurrence_line_analytic(alpha: f64, beta: f64) -> f64 {
    if alpha >= 0.25 + beta / 8.0 {
        (8.0 * alpha - beta - 2.0).max(0.0).powi(2) / 27.0
    } else {
        2.0 * (5.0 * beta - 4.0 * alpha - 2.0).max(0.0).powi(2) / 27.0
    }
}

/// Parameters of `rho_line(a, b/2, b/2)`.
pub fn equal_split(alpha: f64, beta: f64) -> [f64; 3] {
    [alpha, beta / 2.0, beta / 2.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_pure, random_unitary};
    use crate::qstate::{bell_projector, bell_vector, maximally_mixed};
    use rand::Rng;

    fn phi_plus() -> CVec {
        let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
        CVec::from_vec(vec![h, ZERO, ZERO, h])
    }

    fn cfg(restarts: usize) -> OptimizerConfig {
        OptimizerConfig { restarts, ..Default::default() }
    }

    #[test]
    fn ppt_examples() {
        let (ok, m) = is_ppt(&maximally_mixed(9), 3, 3).unwrap();
        assert!(ok && (m - 1.0 / 9.0).abs() < 1e-12);
        let (ok, m) = is_ppt(&bell_projector(3, 0, 0).unwrap(), 3, 3).unwrap();
        assert!(!ok && (m + 1.0 / 3.0).abs() < 1e-10);
        let iso = family_state(Family::Isotropic, &[0.25], 3).unwrap();
        assert!(is_ppt(&iso, 3, 3).unwrap().1.abs() < 1e-10);
    }

    #[test]
    fn boundary_examples() {
        let two = BoundarySpec::new(Family::TwoParam, BoundaryKind::Ppt);
        assert!(boundary_value(&two, &[0.25, 0.0]).unwrap().abs() < 1e-12);
        let line = BoundarySpec::new(Family::Line, BoundaryKind::Ppt);
        assert!(boundary_value(&line, &[1.0 / 3.0; 3]).unwrap().abs() < 1e-12);
        let plane = BoundarySpec::new(Family::Line, BoundaryKind::CglmpPlane).component(0);
        assert!(boundary_value(&plane, &[ISOTROPIC_VIOLATION_ALPHA, 0.0, 0.0]).unwrap().abs() < 1e-12);
        let plane_g = BoundarySpec::new(Family::Line, BoundaryKind::CglmpPlane).component(2);
        assert!((boundary_value(&plane_g, &[0.0, 0.0, 0.0]).unwrap() - 0.696_152_422_706_632).abs() < 1e-12);
        let s = BoundarySpec::new(Family::Line, BoundaryKind::CglmpSphere);
        assert!(boundary_value(&s, &[ISOTROPIC_VIOLATION_ALPHA, 0.0, 0.0]).unwrap().abs() < 1e-10);
        assert!(boundary_value(&s, &[0.0, 0.0, 0.0]).unwrap() > 0.0);
        assert!(matches!(
            boundary_value(&BoundarySpec::new(Family::Offline, BoundaryKind::Ppt), &[0.0; 3]),
            Err(Error::UnknownBoundary { .. })
        ));
        assert!(boundary_value(&two, &[0.1]).is_err());
    }

    #[test]
    fn line_ppt_on_diagonal_is_negative_square() {
        for i in 0..=400 {
            let a = -1.0 / 6.0 + i as f64 * (0.5 / 400.0);
            let v = line_ppt_polynomial(a, a, a);
            assert!((v + (3.0 * a - 1.0).powi(2)).abs() < 1e-12);
            assert!(v <= 1e-15);
        }
    }

    #[test]
    fn positivity_matches_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for family in Family::ALL {
            let spec = BoundarySpec::new(family, BoundaryKind::Positivity);
            let d = family.default_dimension();
            for _ in 0..200 {
                let p: Vec<f64> = (0..family.arity()).map(|_| rng.random_range(-0.6..1.0)).collect();
                let g = boundary_value(&spec, &p).unwrap();
                let m = family_state(family, &p, d).unwrap().min_eigenvalue();
                if g.abs() > 1e-9 {
                    assert_eq!(g > 0.0, m > 0.0, "{family} {p:?}: {g} vs {m}");
                }
            }
        }
    }

    #[test]
    fn ppt_closed_forms_match_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for family in [Family::Isotropic, Family::TwoParam, Family::Line, Family::Tetra2] {
            let spec = BoundarySpec::new(family, BoundaryKind::Ppt);
            let pos = BoundarySpec::new(family, BoundaryKind::Positivity);
            let d = family.default_dimension();
            let mut checked = 0;
            while checked < 200 {
                let p: Vec<f64> = (0..family.arity()).map(|_| rng.random_range(-0.6..1.0)).collect();
                if boundary_value(&pos, &p).unwrap() < 0.0 {
                    continue;
                }
                checked += 1;
                let g = boundary_value(&spec, &p).unwrap();
                let (_, m) = is_ppt(&family_state(family, &p, d).unwrap(), d, d).unwrap();
                if g.abs() > 1e-9 {
                    assert_eq!(g > 0.0, m > 0.0, "{family} {p:?}: {g} vs {m}");
                }
            }
        }
    }

    #[test]
    fn witness_never_fires_on_nonnegative_ppt_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let line = |k| BoundarySpec::new(Family::Line, k);
        let mut n = 0;
        while n < 3000 {
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            if boundary_value(&line(BoundaryKind::Positivity), &p).unwrap() < 0.0
                || boundary_value(&line(BoundaryKind::Ppt), &p).unwrap() < 0.0
            {
                continue;
            }
            n += 1;
            assert!(boundary_value(&line(BoundaryKind::Witness), &p).unwrap() >= -1e-12, "{p:?}");
        }
    }

    #[test]
    fn witness_zero_set_is_the_printed_conic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = BoundarySpec::new(Family::Line, BoundaryKind::Witness).component(0);
        for _ in 0..100 {
            let (b, g) = (rng.random_range(-0.1..0.3), rng.random_range(-0.1..0.3));
            let m = boundary_value(&spec, &[0.0, b, g]).unwrap();
            if m.is_finite() {
                assert!(line_witness_polynomial(m, b, g).abs() < 1e-10);
            }
        }
        let two = BoundarySpec::new(Family::TwoParam, BoundaryKind::Witness).component(0);
        let (a, m) = (0.1, boundary_value(&two, &[0.1, 0.0]).unwrap());
        let printed = |a: f64, b: f64| 4.0 * a * a - 5.0 * a + 40.0 * b * b + (17.0 * a - 14.0) * b + 1.0;
        assert!(printed(a, m).abs() < 1e-12);
    }

    #[test]
    fn classify_examples() {
        let c = classify(Family::Isotropic, &[0.1], &cfg(3)).unwrap();
        assert!(c.positive && c.ppt && c.witness_separable == WitnessVerdict::Separable);
        assert_eq!(c.cglmp_violating, Some(false));
        let c = classify(Family::Isotropic, &[0.8], &cfg(5)).unwrap();
        assert_eq!(c.witness_separable, WitnessVerdict::Entangled);
        assert_eq!(c.cglmp_violating, Some(true));
        // Between the witness conic and the PPT ellipse.
        let c = classify(Family::TwoParam, &[0.2405, -0.05], &cfg(2)).unwrap();
        assert!(c.positive && c.ppt && c.bound_entangled, "{c:?}");
        let c = classify(Family::Offline, &[0.1, 0.1, 0.1], &cfg(2)).unwrap();
        assert_eq!(c.witness_separable, WitnessVerdict::NotApplicable);
        let c = classify(Family::Line, &[1.5, 0.0, 0.0], &cfg(2)).unwrap();
        assert!(!c.positive && c.cglmp_violating.is_none());
    }

    #[test]
    fn pure_concurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let omega = bell_vector(3, 0, 0).unwrap();
        assert!((m_concurrence_pure(&omega, 3).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        let a = random_pure(3, &mut rng);
        let b = random_pure(3, &mut rng);
        let product = CVec::from_iterator(9, (0..9).map(|i| a[i / 3] * b[i % 3]));
        assert!(m_concurrence_pure(&product, 3).unwrap().abs() < 1e-12);
        for d in [2, 3, 4] {
            for _ in 0..100 {
                let psi = random_pure(d * d, &mut rng);
                let via_pairs = m_concurrence_pure(&psi, d).unwrap();
                let via_entropy = m_concurrence_pure_linear_entropy(&psi, d).unwrap();
                assert!((via_pairs - via_entropy).abs() < 1e-12);
            }
        }
        assert!(matches!(m_concurrence_pure(&(omega.clone() * C64::from(2.0)), 3), Err(Error::Unnormalized(_))));
        // Qubits: C_m^2 is twice the squared Wootters concurrence.
        assert!((m_concurrence_pure(&phi_plus(), 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn x_bound_is_tight_on_pure_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let psi = random_pure(9, &mut rng);
            let rho = Operator::new(linalg::projector(&psi));
            let x = m_concurrence_x_bound(&rho, 3).unwrap();
            let p = m_concurrence_pure(&psi, 3).unwrap();
            assert!((x - p).abs() < 1e-10, "{x} {p}");
        }
    }

    #[test]
    fn qubit_x_bound_is_wootters() {
        // Werner state p |Phi+><Phi+| + (1-p) 1/4: concurrence max(0, (3p-1)/2).
        for p in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let rho = bell_projector(2, 0, 0).unwrap().with_noise(p);
            let c = ((3.0 * p - 1.0) / 2.0f64).max(0.0);
            assert!((m_concurrence_x_bound(&rho, 2).unwrap() - c * c).abs() < 1e-10);
        }
    }

    #[test]
    fn lower_bound_examples() {
        let r = m_concurrence_lower_bound(&maximally_mixed(9), 3, &cfg(2)).unwrap();
        assert!(r.lower_bound.abs() < 1e-12);
        let r = m_concurrence_lower_bound(&bell_projector(3, 0, 0).unwrap(), 3, &cfg(2)).unwrap();
        assert!((r.lower_bound - 4.0 / 3.0).abs() < 1e-10);
        let rho = family_state(Family::Line, &equal_split(0.0, 1.0), 3).unwrap();
        let r = m_concurrence_lower_bound(&rho, 3, &cfg(3)).unwrap();
        assert!((r.lower_bound - 2.0 / 3.0).abs() < 1e-4, "{r:?}");
        assert!(r.lower_bound >= r.raw_bound - 1e-12);
    }

    #[test]
    fn lower_bound_is_local_unitary_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = family_state(Family::Line, &equal_split(0.6, 0.2), 3).unwrap();
        let u = linalg::kron(&random_unitary(3, &mut rng), &random_unitary(3, &mut rng));
        let rotated = Operator::new(&u * rho.matrix() * u.adjoint());
        let a = m_concurrence_lower_bound(&rho, 3, &cfg(4)).unwrap().lower_bound;
        let b = m_concurrence_lower_bound(&rotated, 3, &cfg(4)).unwrap().lower_bound;
        assert!((a - m_concurrence_line_analytic(0.6, 0.2)).abs() < 1e-4);
        assert!((a - b).abs() < 1e-4, "{a} {b}");
    }

    #[test]
    fn zero_on_separable_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let mut m = linalg::CMat::zeros(9, 9);
            let k = rng.random_range(1..5);
            for _ in 0..k {
                let a = random_pure(3, &mut rng);
                let b = random_pure(3, &mut rng);
                let v = CVec::from_iterator(9, (0..9).map(|i| a[i / 3] * b[i % 3]));
                m += linalg::projector(&v).scale(1.0 / k as f64);
            }
            let r = m_concurrence_lower_bound(&Operator::new(m), 3, &cfg(2)).unwrap();
            assert!(r.lower_bound.abs() < 1e-8, "{}", r.lower_bound);
        }
    }

    #[test]
    fn analytic_line_examples() {
        assert!((m_concurrence_line_analytic(1.0, 0.0) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(m_concurrence_line_analytic(0.0, 0.0), 0.0);
        assert!((m_concurrence_line_analytic(0.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constants() {
        assert!((ISOTROPIC_VIOLATION_ALPHA - 0.696_152_422_706_632).abs() < 1e-15);
        assert!((2.0 / cglmp::cglmp_analytic_max(3).unwrap() - ISOTROPIC_VIOLATION_ALPHA).abs() < 1e-14);
        assert!((SQRT3 - 3f64.sqrt()).abs() < 1e-16);
    }
}
