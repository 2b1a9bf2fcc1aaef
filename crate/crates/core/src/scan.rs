//! Grid scans over a state family.
//!
//! A [`ScanJob`] names a family, a grid, and the quantities to compute at
//! every grid point. [`run_scan`] evaluates the points in parallel (see
//! [`crate::par`]) and returns one [`ScanRecord`] per point in grid order;
//! [`write_dataset`] writes the records as CSV or JSON together with a
//! `.meta.json` sidecar.
//!
//! Point `i` runs its optimizers with seed `mix_seed(optimizer.seed, i)`,
//! so a rerun with the same job produces the same bytes regardless of the
//! thread count.
//!
//! Job files are TOML or JSON with identical keys:
//!
//! ```toml
//! family = "line"
//! tasks = ["positivity", "ppt", "cglmp"]
//!
//! [grid]
//! kind = "directions"
//! count = 1000
//! orthant = "positive"
//!
//! [optimizer]
//! restarts = 20
//! seed = 7
//!
//! [output]
//! path = "line_boundary.csv"
//! format = "csv"
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::entgeo::{self, BoundaryKind, BoundarySpec};
use crate::optimize::{self, OptimizerConfig, NO_VIOLATION_FLOOR};
use crate::par::{self, Execution};
use crate::qstate::{family_state, Family, PSD_TOL};
use crate::{Error, Result};

/// Quantities a scan can compute at each point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Positivity,
    Ppt,
    Witness,
    Cglmp,
    Concurrence,
    Octahedron,
    Cylinder,
}

/// `points` equally spaced values from `min` to `max` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            return self.max;
        }
        self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64
    }
}

/// How rectilinear grid coordinates map to family parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slice {
    /// One axis per family parameter.
    #[default]
    Full,
    /// Two axes `(a, b)` mapped to the three-parameter point `(a, b/2, b/2)`.
    EqualSplit,
}

/// Which sign patterns a direction grid covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orthant {
    #[default]
    All,
    /// Every parameter strictly positive.
    Positive,
    /// Exactly one parameter negative, cycling through which one.
    OneNegative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    /// Cartesian product of axes, first axis slowest.
    Rectilinear {
        axes: Vec<Axis>,
        #[serde(default)]
        slice: Slice,
    },
    /// Unit directions in parameter space, each pushed out to the positivity
    /// boundary of the family. For one-parameter families there are at most
    /// two directions.
    Directions {
        count: usize,
        #[serde(default)]
        orthant: Orthant,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Parse(format!("unknown output format '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanJob {
    pub family: Family,
    /// Local dimension; defaults to the family's.
    #[serde(default)]
    pub d: Option<usize>,
    pub grid: Grid,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ScanJob {
    pub fn new(family: Family, grid: Grid, tasks: Vec<Task>) -> Self {
        Self { family, d: None, grid, tasks, optimizer: OptimizerConfig::default(), output: None }
    }

    pub fn dimension(&self) -> usize {
        self.d.unwrap_or_else(|| self.family.default_dimension())
    }

    pub fn has(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Load a job file; `.json` is read as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let job = match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::from_json_str(&text)?,
            _ => Self::from_toml_str(&text)?,
        };
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.optimizer.validate()?;
        let d = self.dimension();
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if let Some(fixed) = self.family.fixed_dimension() {
            if fixed != d {
                return Err(Error::DimensionMismatch { expected: fixed, got: d });
            }
        }
        if self.tasks.is_empty() {
            return bad("a scan needs at least one task".into());
        }
        for t in [Task::Octahedron, Task::Cylinder] {
            if self.has(t) && self.family != Family::Tetra2 {
                return bad(format!("task {t:?} applies to the tetra2 family only"));
            }
        }
        match &self.grid {
            Grid::Rectilinear { axes, slice } => {
                let want = match slice {
                    Slice::Full => self.family.arity(),
                    Slice::EqualSplit if self.family.arity() == 3 => 2,
                    Slice::EqualSplit => {
                        return bad(format!("equal_split needs a three-parameter family, not {}", self.family))
                    }
                };
                if axes.len() != want {
                    return bad(format!("{} grid needs {want} axes, got {}", self.family, axes.len()));
                }
                for (i, a) in axes.iter().enumerate() {
                    if a.points < 2 {
                        return bad(format!("axis {i} needs at least 2 points, got {}", a.points));
                    }
                    if !a.min.is_finite() || !a.max.is_finite() {
                        return bad(format!("axis {i} has a non-finite range"));
                    }
                }
            }
            Grid::Directions { count, .. } => {
                if *count == 0 {
                    return bad("direction grid needs count >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Family parameters of every grid point, in record order.
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        match &self.grid {
            Grid::Rectilinear { axes, slice } => {
                let total: usize = axes.iter().map(|a| a.points).product();
                let mut out = Vec::with_capacity(total);
                for flat in 0..total {
                    let mut rem = flat;
                    let mut coords = vec![0.0; axes.len()];
                    for (k, a) in axes.iter().enumerate().rev() {
                        coords[k] = a.value(rem % a.points);
                        rem /= a.points;
                    }
                    out.push(match slice {
                        Slice::Full => coords,
                        Slice::EqualSplit => entgeo::equal_split(coords[0], coords[1]).to_vec(),
                    });
                }
                Ok(out)
            }
            Grid::Directions { count, orthant } => {
                let spec = BoundarySpec::new(self.family, BoundaryKind::Positivity).with_dimension(self.dimension());
                directions(self.family.arity(), *count, *orthant)
                    .into_iter()
                    .map(|u| {
                        let t = positivity_reach(&spec, &u)?;
                        Ok(u.iter().map(|x| t * x).collect())
                    })
                    .collect()
            }
        }
    }
}

/// Largest `t` with `t u` on or inside the positivity region.
fn positivity_reach(spec: &BoundarySpec, u: &[f64]) -> Result<f64> {
    let origin = vec![0.0; u.len()];
    let mut reach = f64::INFINITY;
    let mut i = 0;
    while let Ok(at_u) = entgeo::boundary_value(&spec.component(i), u) {
        let at_0 = entgeo::boundary_value(&spec.component(i), &origin)?;
        let slope = at_u - at_0;
        if slope < 0.0 {
            reach = reach.min(-at_0 / slope);
        }
        i += 1;
    }
    if reach.is_finite() {
        Ok(reach)
    } else {
        Err(Error::Config(format!("direction {u:?} never leaves the positivity region")))
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Deterministic, roughly uniform unit directions.
fn directions(arity: usize, count: usize, orthant: Orthant) -> Vec<Vec<f64>> {
    use std::f64::consts::{FRAC_PI_2, TAU};
    let frac = |x: f64| x - x.floor();
    match arity {
        1 => {
            let all: &[f64] = match orthant {
                Orthant::All => &[1.0, -1.0],
                Orthant::Positive => &[1.0],
                Orthant::OneNegative => &[-1.0],
            };
            all.iter().take(count).map(|&s| vec![s]).collect()
        }
        2 => (0..count)
            .map(|i| {
                let t = (i as f64 + 0.5) / count as f64;
                let angle = match orthant {
                    Orthant::All => TAU * t,
                    Orthant::Positive => FRAC_PI_2 * t,
                    // Quadrants II and IV alternately.
                    Orthant::OneNegative => FRAC_PI_2 * (t + if i % 2 == 0 { 1.0 } else { 3.0 }),
                };
                vec![angle.cos(), angle.sin()]
            })
            .collect(),
        _ => (0..count)
            .map(|i| {
                let t = (i as f64 + 0.5) / count as f64;
                let spin = frac((i as f64 + 0.5) * GOLDEN);
                let (z, phi) = match orthant {
                    Orthant::All => (1.0 - 2.0 * t, TAU * spin),
                    _ => (t, FRAC_PI_2 * spin),
                };
                let r = (1.0 - z * z).max(0.0).sqrt();
                let mut u = vec![r * phi.cos(), r * phi.sin(), z];
                if orthant == Orthant::OneNegative {
                    u[i % 3] = -u[i % 3];
                }
                u
            })
            .collect(),
    }
}

/// Result at one grid point. Quantities not requested, or not defined for
/// the point, are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub index: usize,
    /// Family parameters.
    pub point: Vec<f64>,
    pub min_eig: Option<f64>,
    pub ppt_min_eig: Option<f64>,
    /// Witness margins `x+ - x`, one per component; `+inf` (JSON `null`)
    /// where a conic has no real point.
    pub witness: Option<Vec<f64>>,
    pub octahedron: Option<f64>,
    /// Smallest of the three cylinder margins.
    pub cylinder: Option<f64>,
    /// `max I_d`; skipped for non-positive points.
    pub max_i_d: Option<f64>,
    /// `2 / max I_d`, when the point has a violation direction.
    pub nu_star: Option<f64>,
    pub cm2_lb: Option<f64>,
    pub error: Option<String>,
}

impl ScanRecord {
    fn empty(index: usize, point: Vec<f64>) -> Self {
        Self {
            index,
            point,
            min_eig: None,
            ppt_min_eig: None,
            witness: None,
            octahedron: None,
            cylinder: None,
            max_i_d: None,
            nu_star: None,
            cm2_lb: None,
            error: None,
        }
    }

    /// The two values shown in the CSV `witness_*` columns: the first two
    /// witness components, or for tetra2 the octahedron and cylinder
    /// margins.
    pub fn witness_columns(&self) -> [Option<f64>; 2] {
        match &self.witness {
            Some(w) => [w.first().copied(), w.get(1).copied()],
            None => [self.octahedron, self.cylinder],
        }
    }
}

fn evaluate_point(job: &ScanJob, index: usize, point: Vec<f64>) -> ScanRecord {
    let mut rec = ScanRecord::empty(index, point);
    if let Err(e) = fill_record(job, &mut rec) {
        rec.error = Some(e.to_string());
    }
    rec
}

fn fill_record(job: &ScanJob, rec: &mut ScanRecord) -> Result<()> {
    let (family, d) = (job.family, job.dimension());
    let p = rec.point.clone();
    let rho = family_state(family, &p, d)?;
    let min_eig = rho.min_eigenvalue();
    let positive = min_eig >= -PSD_TOL;
    if job.has(Task::Positivity) {
        rec.min_eig = Some(min_eig);
    }
    if job.has(Task::Ppt) {
        rec.ppt_min_eig = Some(entgeo::is_ppt(&rho, d, d)?.1);
    }
    if job.has(Task::Witness) && matches!(family, Family::TwoParam | Family::Line) {
        let spec = BoundarySpec::new(family, BoundaryKind::Witness);
        let n = if family == Family::TwoParam { 2 } else { 3 };
        rec.witness = Some((0..n).map(|i| entgeo::boundary_value(&spec.component(i), &p)).collect::<Result<_>>()?);
    }
    if job.has(Task::Octahedron) {
        rec.octahedron = Some(entgeo::boundary_value(&BoundarySpec::new(family, BoundaryKind::Octahedron), &p)?);
    }
    if job.has(Task::Cylinder) {
        rec.cylinder = Some(entgeo::boundary_value(&BoundarySpec::new(family, BoundaryKind::Cylinder), &p)?);
    }
    if !positive {
        return Ok(());
    }
    let cfg = job.optimizer.with_seed(par::mix_seed(job.optimizer.seed, rec.index as u64));
    if job.has(Task::Cglmp) {
        let r = optimize::maximize_bell(&rho, d, &cfg)?;
        rec.max_i_d = Some(r.value);
        rec.nu_star = (r.value > NO_VIOLATION_FLOOR).then(|| 2.0 / r.value);
    }
    if job.has(Task::Concurrence) {
        rec.cm2_lb = Some(entgeo::m_concurrence_lower_bound(&rho, d, &cfg)?.lower_bound);
    }
    Ok(())
}

/// Evaluate every grid point of `job`, in grid order.
pub fn run_scan(job: &ScanJob) -> Result<Vec<ScanRecord>> {
    run_scan_with(Execution::default(), job)
}

pub fn run_scan_with(exec: Execution, job: &ScanJob) -> Result<Vec<ScanRecord>> {
    let points = job.points()?;
    Ok(par::map_indexed_with(exec, points.len(), |i| evaluate_point(job, i, points[i].clone())))
}

pub const CSV_HEADER: [&str; 11] = [
    "alpha",
    "beta",
    "gamma",
    "min_eig",
    "ppt_min_eig",
    "witness_1",
    "witness_2",
    "max_i_d",
    "nu_star",
    "cm2_lb",
    "error",
];

/// 17 significant digits; empty for `None`.
fn fmt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// CSV with the fixed [`CSV_HEADER`]. Family parameters fill the first
/// three columns in order (tetra2: `c1, c2, c3`).
pub fn write_csv<W: Write>(records: &[ScanRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        let [w1, w2] = r.witness_columns();
        let mut row: Vec<String> = (0..3).map(|i| fmt_num(r.point.get(i).copied())).collect();
        row.extend([r.min_eig, r.ppt_min_eig, w1, w2, r.max_i_d, r.nu_star, r.cm2_lb].into_iter().map(fmt_num));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[ScanRecord], out: W) -> Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, records)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Contents of the `.meta.json` sidecar.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub version: String,
    pub job: ScanJob,
    pub seed: u64,
    pub parallel: bool,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_time_seconds: f64,
    pub records: usize,
    pub failures: usize,
    pub output: PathBuf,
    pub format: Format,
    /// Set when the dataset could not be written.
    pub write_error: Option<String>,
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    output.with_file_name(name)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Run `job` and write its dataset to `path`, plus the sidecar. The sidecar
/// is attempted even when the dataset write fails.
pub fn run_and_write(job: &ScanJob, path: &Path, format: Format, exec: Execution) -> Result<ScanMetadata> {
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let records = run_scan_with(exec, job)?;
    let wall_time_seconds = clock.elapsed().as_secs_f64();
    let written = write_file(path, |w| match format {
        Format::Csv => write_csv(&records, w),
        Format::Json => write_json(&records, w),
    });
    let meta = ScanMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        job: job.clone(),
        seed: job.optimizer.seed,
        parallel: exec == Execution::Parallel && Execution::parallel_available(),
        threads: current_threads(exec),
        started_unix,
        wall_time_seconds,
        records: records.len(),
        failures: records.iter().filter(|r| r.error.is_some()).count(),
        output: path.to_path_buf(),
        format,
        write_error: written.as_ref().err().map(|e| e.to_string()),
    };
    let sidecar = write_file(&sidecar_path(path), |w| {
        serde_json::to_writer_pretty(&mut *w, &meta)?;
        w.write_all(b"\n")?;
        Ok(())
    });
    written?;
    sidecar?;
    Ok(meta)
}

fn current_threads(exec: Execution) -> usize {
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        return rayon::current_num_threads();
    }
    let _ = exec;
    1
}
