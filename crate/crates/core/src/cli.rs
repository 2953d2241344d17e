//! Experiment drivers behind the `maglab` binary.
//!
//! Each subcommand reads an [`ExperimentConfig`] (a flat TOML table of
//! `key = value` lines, overridable from the command line), validates it into
//! a typed parameter struct, runs independent jobs on the rayon pool and
//! returns rows in job order together with the embedded property checks.
//! Every row carries the seed, grid spacing, tolerance and
//! [`ARTIFACT_VERSION`](crate::ARTIFACT_VERSION).
//!
//! Config keys per subcommand:
//!
//! | subcommand   | keys |
//! |--------------|------|
//! | `averaging`  | `field` (`random`, `constant`, `linear`), `fields`, `seed`, `ells`, `samples`, `value`, `center` |
//! | `eig`        | `domain` (`unit-square`, `disk`, `square`), `radius`, `side`, `h`, `sigmas`, `field` (`constant`, `random`), `value`, `seed`, `lower`, `rho`, `tol` |
//! | `bulk-table` | `bs`, `r_list`, `tol` |
//! | `gl`         | `domain`, `radius`, `side`, `h`, `kappas`, `b`, `ell_exponent`, `field`, `value`, `seed`, `lower`, `g_table`, `tol` |
//! | `field-gen`  | `seed`, `cutoff`, `epsilon`, `lower`, `bbox`, `h` |

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bulk::{self, BulkTable, GInterpolant};
use crate::error::{Error, Result};
use crate::field::{averaging_gap, canonical_potential, potential_from_field};
use crate::geometry::{BBox, Cell, Domain, Point};
use crate::gl::{self, Thm13Record};
use crate::grid::{Grid, ScalarField, ScalarFunction, VectorField};
use crate::random::{FourierField, DEFAULT_CUTOFF, DEFAULT_EPSILON};
use crate::spectral::{self, GaussianProfile};
use crate::ARTIFACT_VERSION;

/// Process exit code when every embedded check passes.
pub const EXIT_PASS: i32 = 0;
/// Exit code when a run completed but a check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit code for invalid configurations and numerical failures.
pub const EXIT_ERROR: i32 = 2;

/// Absolute floor below which an averaging gap counts as machine zero.
pub const MACHINE_ZERO: f64 = 1e-20;

/// Flat key/value configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    table: toml::Table,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Format(format!("config: {e}")))?;
        if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(Error::Format(format!("config: `{k}` is a table; only flat keys are allowed")));
        }
        Ok(ExperimentConfig { table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets `key` from command-line text; the text is read as a TOML value
    /// and falls back to a plain string.
    pub fn set(&mut self, key: &str, text: &str) {
        let value = format!("v = {text}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(text.to_string()));
        self.table.insert(key.to_string(), value);
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(bad(k, format!("unknown key; expected one of {allowed:?}"))),
            None => Ok(()),
        }
    }

    fn number(key: &str, v: &toml::Value) -> Result<f64> {
        match v {
            toml::Value::Float(x) => Ok(*x),
            toml::Value::Integer(i) => Ok(*i as f64),
            _ => Err(bad(key, format!("expected a number, got {v}"))),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        self.table.get(key).map_or(Ok(default), |v| ExperimentConfig::number(key, v))
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.table.get(key) {
            None => Ok(default.to_vec()),
            Some(toml::Value::Array(items)) => items.iter().map(|v| ExperimentConfig::number(key, v)).collect(),
            Some(v) => Ok(vec![ExperimentConfig::number(key, v)?]),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.table.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(v) => Err(bad(key, format!("expected a nonnegative integer, got {v}"))),
        }
    }

    pub fn str(&self, key: &str, default: &str) -> Result<String> {
        match self.table.get(key) {
            None => Ok(default.to_string()),
            Some(toml::Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(bad(key, format!("expected a string, got {v}"))),
        }
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<String>> {
        self.table.get(key).map(|_| self.str(key, "")).transpose()
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.table.get(key).map(|v| ExperimentConfig::number(key, v)).transpose()
    }
}

/// One embedded property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, detail }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Exit code for a list of checks.
pub fn exit_code(checks: &[Check]) -> i32 {
    if checks.iter().all(|c| c.passed) {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn bad(key: &str, reason: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), reason: reason.into() }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, format!("must be positive, got {v}")))
    }
}

fn point(cfg: &ExperimentConfig, key: &str, default: Point) -> Result<Point> {
    match cfg.f64_list(key, &default)?.as_slice() {
        &[x, y] => Ok([x, y]),
        other => Err(bad(key, format!("expected two coordinates, got {other:?}"))),
    }
}

// ---------------------------------------------------------------------------
// Shared field and domain specifications.

/// Magnetic field used by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldSpec {
    Constant(f64),
    /// `B = 1 + x₁`.
    Linear,
    /// Seeded Fourier field, optionally shifted so that `B ≥ lower` on the run's bounding box.
    Random { seed: u64, lower: Option<f64> },
}

impl FieldSpec {
    fn from_config(cfg: &ExperimentConfig, default: &str) -> Result<Self> {
        match cfg.str("field", default)?.as_str() {
            "constant" => Ok(FieldSpec::Constant(cfg.f64("value", 1.0)?)),
            "linear" => Ok(FieldSpec::Linear),
            "random" => Ok(FieldSpec::Random { seed: cfg.u64("seed", 0)?, lower: cfg.opt_f64("lower")? }),
            other => Err(bad("field", format!("unknown field `{other}`"))),
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            FieldSpec::Random { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    /// Instantiates the field; random fields are shifted on `bbox`.
    pub fn build(&self, bbox: &BBox) -> Field {
        match *self {
            FieldSpec::Constant(c) => Field::Constant(c),
            FieldSpec::Linear => Field::Linear,
            FieldSpec::Random { seed, lower } => {
                let f = FourierField::with_seed(seed);
                Field::Random(match lower {
                    Some(c) => f.with_lower_bound(c, bbox),
                    None => f,
                })
            }
        }
    }
}

/// An instantiated [`FieldSpec`].
#[derive(Debug, Clone)]
pub enum Field {
    Constant(f64),
    Linear,
    Random(FourierField),
}

impl ScalarFunction for Field {
    fn eval(&self, p: Point) -> Option<f64> {
        match self {
            Field::Constant(c) => Some(*c),
            Field::Linear => Some(1.0 + p[0]),
            Field::Random(f) => f.eval(p),
        }
    }

    fn sample_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            Field::Random(f) => f.sample_values(grid),
            _ => grid.points().map(|p| self.eval(p).ok_or(Error::FieldSupport { x: p[0], y: p[1] })).collect(),
        }
    }

    fn ray_moment(&self, origin: Point, r: [f64; 2]) -> Result<f64> {
        match self {
            // ∫₀¹ s B(origin + s r) ds for polynomial B.
            Field::Constant(c) => Ok(0.5 * c),
            Field::Linear => Ok(0.5 * (1.0 + origin[0]) + r[0] / 3.0),
            Field::Random(f) => f.ray_moment(origin, r),
        }
    }
}

impl Field {
    /// Magnetic potential on `grid`; exact for constant fields.
    fn potential(&self, grid: Grid) -> Result<VectorField> {
        match self {
            Field::Constant(c) => Ok(VectorField::new(
                grid,
                grid.points()
                    .map(|p| {
                        let a = canonical_potential(p);
                        [c * a[0], c * a[1]]
                    })
                    .collect(),
            )),
            _ => potential_from_field(self, grid),
        }
    }
}

fn domain_from_config(cfg: &ExperimentConfig, h: f64) -> Result<Domain> {
    match cfg.str("domain", "unit-square")?.as_str() {
        "unit-square" => Domain::unit_square(h),
        "disk" => Domain::disk([0.0, 0.0], positive("radius", cfg.f64("radius", 1.0)?)?, h),
        "square" => {
            let half = 0.5 * positive("side", cfg.f64("side", 1.0)?)?;
            Domain::square(-half, half, -half, half, h)
        }
        other => Err(bad("domain", format!("unknown domain `{other}`"))),
    }
}

// ---------------------------------------------------------------------------
// averaging

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingParams {
    pub field: FieldSpec,
    /// Number of random fields (seeds `seed..seed + fields`); ignored for deterministic fields.
    pub fields: u64,
    pub ells: Vec<f64>,
    /// Quadrature midpoints per cell side; `h = ℓ / samples`.
    pub samples: usize,
    pub center: Point,
}

impl AveragingParams {
    pub const KEYS: &'static [&'static str] = &["field", "fields", "seed", "ells", "samples", "value", "center"];

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.check_keys(AveragingParams::KEYS)?;
        let ells = cfg.f64_list("ells", &[0.25, 0.125, 0.0625])?;
        for &l in &ells {
            positive("ells", l)?;
        }
        let samples = cfg.u64("samples", 128)? as usize;
        if samples < 2 {
            return Err(bad("samples", "need at least 2"));
        }
        Ok(AveragingParams {
            field: FieldSpec::from_config(cfg, "random")?,
            fields: cfg.u64("fields", 100)?.max(1),
            ells,
            samples,
            center: point(cfg, "center", [0.0, 0.0])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingRow {
    pub seed: Option<u64>,
    pub ell: f64,
    pub h: f64,
    pub b_av: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub remark_bound: f64,
    /// Allowed relative excess `10h`.
    pub tol: f64,
    pub version: String,
}

/// `∫_Q |A_new − A_av|²` against `8δ⁴‖∇B‖²` on square cells `Q_ℓ(center)`.
pub fn run_averaging(p: &AveragingParams) -> Result<(Vec<AveragingRow>, Vec<Check>)> {
    let specs: Vec<FieldSpec> = match &p.field {
        FieldSpec::Random { seed, lower } => (0..p.fields).map(|k| FieldSpec::Random { seed: seed + k, lower: *lower }).collect(),
        other => vec![other.clone()],
    };
    let jobs: Vec<(FieldSpec, f64)> = specs.iter().flat_map(|s| p.ells.iter().map(move |&l| (s.clone(), l))).collect();
    let rows = jobs
        .par_iter()
        .map(|(spec, ell)| {
            let cell = Cell::square(p.center, *ell);
            let field = spec.build(&cell.bbox());
            let gap = averaging_gap(&field, &cell, p.samples)?;
            let h = ell / p.samples as f64;
            Ok(AveragingRow {
                seed: spec.seed(),
                ell: *ell,
                h,
                b_av: gap.b_av,
                lhs: gap.lhs,
                rhs: gap.rhs,
                ratio: if gap.rhs > 0.0 { gap.lhs / gap.rhs } else { 0.0 },
                remark_bound: gap.remark_bound,
                tol: 10.0 * h,
                version: ARTIFACT_VERSION.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let bad = rows.iter().filter(|r| !(r.lhs <= r.rhs * (1.0 + r.tol) || r.lhs <= MACHINE_ZERO)).count();
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    checks.push(Check::new("averaging inequality", bad == 0, format!("{bad} of {} instances violate lhs ≤ rhs(1 + 10h); max ratio {worst:.4}", rows.len())));
    match p.field {
        FieldSpec::Constant(_) => {
            let max = rows.iter().map(|r| r.lhs).fold(0.0, f64::max);
            checks.push(Check::new("constant field exactness", max <= MACHINE_ZERO, format!("max lhs {max:.3e}")));
        }
        FieldSpec::Linear if p.center == [0.0, 0.0] => {
            let dev = rows.iter().map(|r| (r.lhs / r.ell.powi(6) / (7.0 / 3240.0) - 1.0).abs()).fold(0.0, f64::max);
            checks.push(Check::new("linear field closed form", dev <= 0.01, format!("max relative deviation from 7ℓ⁶/3240: {dev:.3e}")));
        }
        _ => {}
    }
    Ok((rows, checks))
}

// ---------------------------------------------------------------------------
// eig

#[derive(Debug, Clone)]
pub struct EigParams {
    pub domain: Domain,
    pub field: FieldSpec,
    pub sigmas: Vec<f64>,
    pub rho: f64,
    pub tol: f64,
}

impl EigParams {
    pub const KEYS: &'static [&'static str] = &["domain", "radius", "side", "h", "sigmas", "field", "value", "seed", "lower", "rho", "tol"];

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.check_keys(EigParams::KEYS)?;
        let h = positive("h", cfg.f64("h", 1.0 / 64.0)?)?;
        let sigmas = cfg.f64_list("sigmas", &[100.0, 200.0, 400.0])?;
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(bad("sigmas", "must be nonnegative"));
        }
        let rho = cfg.f64("rho", 3.0 / 8.0)?;
        if !(rho > 0.0 && rho < 0.5) {
            return Err(bad("rho", format!("must lie in (0, 1/2), got {rho}")));
        }
        Ok(EigParams {
            domain: domain_from_config(cfg, h)?,
            field: FieldSpec::from_config(cfg, "constant")?,
            sigmas,
            rho,
            tol: positive("tol", cfg.f64("tol", spectral::EIG_TOL)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigRow {
    pub seed: Option<u64>,
    pub sigma: f64,
    pub h: f64,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Essential infimum of `B` on the domain (grid surrogate).
    pub m0: f64,
    /// `λ / σ`.
    pub ratio: f64,
    /// Gaussian trial quotient; absent at `σ = 0`.
    pub upper: Option<f64>,
    pub tol: f64,
    pub version: String,
}

/// Lowest Dirichlet eigenvalue across `σ` with the Gaussian upper bound.
pub fn run_eig(p: &EigParams) -> Result<(Vec<EigRow>, Vec<Check>)> {
    let grid = Grid::for_domain(&p.domain);
    let field = p.field.build(&p.domain.outer.bbox());
    let b = ScalarField::sample_on_domain(&p.domain, &field)?;
    let m0 = crate::field::ess_inf(&b)?.value;
    let a = field.potential(grid)?;
    let rows = p
        .sigmas
        .par_iter()
        .map(|&sigma| {
            let op = spectral::assemble_on(&p.domain, grid, sigma, &a)?;
            let r = spectral::lowest_eigenvalue(&op, p.tol)?;
            let upper = if sigma > 0.0 {
                Some(spectral::thm12_upper(&op, &p.domain, &b, &a, p.rho, GaussianProfile::Stated)?.quotient)
            } else {
                None
            };
            Ok(EigRow {
                seed: p.field.seed(),
                sigma,
                h: grid.h,
                lambda: r.lambda,
                residual: r.residual,
                iterations: r.iterations,
                m0,
                ratio: if sigma > 0.0 { r.lambda / sigma } else { f64::NAN },
                upper,
                tol: p.tol,
                version: ARTIFACT_VERSION.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let bad = rows.iter().filter(|r| r.upper.is_some_and(|u| u < r.lambda)).count();
    checks.push(Check::new("gaussian upper bound", bad == 0, format!("{bad} rows with upper < λ")));
    let bad = rows.iter().filter(|r| r.sigma > 0.0 && r.lambda < r.m0 * r.sigma * (1.0 - 0.02)).count();
    checks.push(Check::new("diamagnetic lower bound", bad == 0, format!("{bad} rows with λ < 0.98 m₀σ")));
    let mut trend: Vec<&EigRow> = rows.iter().filter(|r| r.sigma > 0.0).collect();
    trend.sort_by(|x, y| x.sigma.total_cmp(&y.sigma));
    let monotone = trend.windows(2).all(|w| w[1].ratio <= w[0].ratio * (1.0 + 10.0 * p.tol));
    let ratios: Vec<String> = trend.iter().map(|r| format!("{:.5}", r.ratio)).collect();
    checks.push(Check::new("λ/σ nonincreasing", monotone, format!("ratios [{}]", ratios.join(", "))));
    Ok((rows, checks))
}

// ---------------------------------------------------------------------------
// bulk-table

#[derive(Debug, Clone, PartialEq)]
pub struct BulkParams {
    pub bs: Vec<f64>,
    pub r_list: Vec<f64>,
    pub tol: f64,
}

impl BulkParams {
    pub const KEYS: &'static [&'static str] = &["bs", "r_list", "tol"];

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.check_keys(BulkParams::KEYS)?;
        let bs = cfg.f64_list("bs", &bulk::default_b_grid())?;
        if bs.iter().any(|b| !(*b >= 0.0 && b.is_finite())) || bs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("bs", "must be nonnegative and increasing"));
        }
        Ok(BulkParams {
            bs,
            r_list: cfg.f64_list("r_list", &bulk::DEFAULT_R_LIST)?,
            tol: positive("tol", cfg.f64("tol", bulk::DEFAULT_TOL)?)?,
        })
    }
}

/// Noise allowance for the monotonicity and concavity checks on `g_est`.
pub const TABLE_NOISE: f64 = 1e-3;

/// Structural checks on a bulk table.
pub fn bulk_checks(table: &BulkTable) -> Vec<Check> {
    let mut checks = Vec::new();
    let sup = table.records.iter().map(|r| r.sup).fold(0.0, f64::max);
    checks.push(Check::new("minimizer bound", sup <= 1.0 + 1e-9, format!("max |u| = {sup:.12}")));
    let mut order = 0;
    for d in table.records.iter().filter(|r| r.boundary == bulk::Boundary::Dirichlet) {
        if let Some(n) = table.records.iter().find(|n| n.boundary == bulk::Boundary::Natural && n.b == d.b && n.r == d.r) {
            if d.energy < n.energy {
                order += 1;
            }
        }
    }
    checks.push(Check::new("dirichlet above natural", order == 0, format!("{order} pairs with m₀ < m")));
    let strong: Vec<_> = table.records.iter().filter(|r| r.boundary == bulk::Boundary::Dirichlet && r.b >= 1.0).collect();
    if !strong.is_empty() {
        let worst = strong.iter().map(|r| r.norm_l2.max(r.energy.abs())).fold(0.0, f64::max);
        checks.push(Check::new("m₀(b ≥ 1) = 0", worst <= 1e-6, format!("max of |m₀| and ‖u‖ over {} runs: {worst:.3e}", strong.len())));
    }
    let zero: Vec<_> = table.records.iter().filter(|r| r.boundary == bulk::Boundary::Dirichlet && r.b == 0.0).collect();
    if !zero.is_empty() {
        let worst = zero.iter().map(|r| (r.energy / (r.r * r.r) + 0.5).abs() * r.r).fold(0.0, f64::max);
        checks.push(Check::new("m₀(0, R)/R² → −½", worst <= 1.0, format!("max R·|m₀/R² + ½| = {worst:.4}")));
    }
    let est: Vec<_> = table.estimates.iter().filter(|e| e.b <= 1.0).collect();
    let range = est.iter().all(|e| e.g_est >= -0.5 - TABLE_NOISE && e.g_est <= TABLE_NOISE);
    checks.push(Check::new("−½ ≤ g_est ≤ 0", range, format!("{} estimates", est.len())));
    let drop = est.windows(2).map(|w| w[0].g_est - w[1].g_est).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new("g_est nondecreasing", drop <= TABLE_NOISE, format!("largest decrease {drop:.3e}")));
    let bend = est
        .windows(3)
        .map(|w| {
            // Second divided difference scaled to unit spacing.
            let (h1, h2) = (w[1].b - w[0].b, w[2].b - w[1].b);
            let s = (w[2].g_est - w[1].g_est) / h2 - (w[1].g_est - w[0].g_est) / h1;
            s * 0.5 * (h1 + h2)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new("g_est concave", bend <= TABLE_NOISE, format!("largest second difference {bend:.3e}")));
    checks
}

pub fn run_bulk(p: &BulkParams) -> Result<(BulkTable, Vec<Check>)> {
    let table = BulkTable::compute(&p.bs, &p.r_list, p.tol)?;
    let checks = bulk_checks(&table);
    Ok((table, checks))
}

// ---------------------------------------------------------------------------
// gl

#[derive(Debug, Clone)]
pub struct GlParams {
    pub domain: Domain,
    pub field: FieldSpec,
    pub kappas: Vec<f64>,
    pub b: f64,
    /// `ℓ = κ^{ell_exponent}`.
    pub ell_exponent: f64,
    pub g_table: PathBuf,
    pub tol: f64,
}

impl GlParams {
    pub const KEYS: &'static [&'static str] = &["domain", "radius", "side", "h", "kappas", "b", "ell_exponent", "field", "value", "seed", "lower", "g_table", "tol"];

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.check_keys(GlParams::KEYS)?;
        let h = positive("h", cfg.f64("h", 1.0 / 128.0)?)?;
        let kappas = cfg.f64_list("kappas", &[8.0, 16.0, 32.0])?;
        for &k in &kappas {
            positive("kappas", k)?;
        }
        let ell_exponent = cfg.f64("ell_exponent", -0.75)?;
        if !(ell_exponent < 0.0) {
            return Err(bad("ell_exponent", "must be negative so that ℓ → 0"));
        }
        let g_table = cfg.opt_str("g_table")?.ok_or_else(|| bad("g_table", "path to a bulk-table JSON summary is required"))?;
        Ok(GlParams {
            domain: domain_from_config(cfg, h)?,
            field: FieldSpec::from_config(cfg, "constant")?,
            kappas,
            b: positive("b", cfg.f64("b", 0.5)?)?,
            ell_exponent,
            g_table: PathBuf::from(g_table),
            tol: positive("tol", cfg.f64("tol", gl::GL_TOL)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlRow {
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub record: Thm13Record,
    pub tol: f64,
    pub version: String,
}

/// Comparison records for each `κ`, with the structural checks.
pub fn run_gl(p: &GlParams, g: &GInterpolant) -> Result<(Vec<GlRow>, Vec<Check>)> {
    let field = p.field.build(&p.domain.outer.bbox());
    let rows = p
        .kappas
        .par_iter()
        .map(|&kappa| {
            let ell = kappa.powf(p.ell_exponent);
            let (record, _) = gl::thm13_report(&field, kappa, p.b, ell, &p.domain, g, p.tol)?;
            Ok(GlRow { seed: p.field.seed(), record, tol: p.tol, version: ARTIFACT_VERSION.to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::for_domain(&p.domain);
    let b_min = grid.points().filter(|&x| p.domain.contains(x)).filter_map(|x| field.eval(x)).fold(f64::INFINITY, f64::min);
    Ok((rows.clone(), gl_checks(&rows, p.b * b_min >= 1.0, p.domain.area())))
}

/// Checks on GL comparison rows; `normal` marks the regime `bB ≥ 1` everywhere.
pub fn gl_checks(rows: &[GlRow], normal: bool, area: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    let res = rows.iter().map(|r| r.record.el_residuals.max() / r.tol).fold(0.0, f64::max);
    checks.push(Check::new("Euler-Lagrange residuals", res <= 10.0, format!("max residual / tol = {res:.3}")));
    let sup = rows.iter().map(|r| r.record.psi_linf).fold(0.0, f64::max);
    checks.push(Check::new("‖ψ‖∞ ≤ 1", sup <= 1.0 + 1e-6, format!("max ‖ψ‖∞ = {sup:.9}")));
    let bad = rows.iter().filter(|r| !(r.record.e_min <= r.record.e_trial && r.record.e_trial <= 0.0)).count();
    checks.push(Check::new("E_min ≤ E_trial ≤ 0", bad == 0, format!("{bad} violations")));
    if normal {
        let worst = rows.iter().map(|r| r.record.e_min.abs() / (r.record.kappa.powi(2) * area)).fold(0.0, f64::max);
        let asy = rows.iter().all(|r| r.record.e_asy == 0.0);
        checks.push(Check::new("normal regime", worst <= 0.05 && asy, format!("max |E_min|/(κ²|Ω|) = {worst:.3e}, E_asy all zero: {asy}")));
    } else if rows.len() >= 2 {
        let mut sorted: Vec<&GlRow> = rows.iter().collect();
        sorted.sort_by(|x, y| x.record.kappa.total_cmp(&y.record.kappa));
        let (first, last) = (sorted[0].record.normalized_gap, sorted[sorted.len() - 1].record.normalized_gap);
        let gaps: Vec<String> = sorted.iter().map(|r| format!("{:.4}", r.record.normalized_gap)).collect();
        checks.push(Check::new("normalized gap trend", last <= 1.5 * first, format!("gaps [{}]", gaps.join(", "))));
    }
    checks
}

// ---------------------------------------------------------------------------
// field-gen

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGenParams {
    pub seed: u64,
    pub cutoff: i32,
    pub epsilon: f64,
    pub lower: Option<f64>,
    pub bbox: BBox,
    pub h: f64,
}

impl FieldGenParams {
    pub const KEYS: &'static [&'static str] = &["seed", "cutoff", "epsilon", "lower", "bbox", "h"];

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.check_keys(FieldGenParams::KEYS)?;
        let bbox = match cfg.f64_list("bbox", &[0.0, 1.0, 0.0, 1.0])?.as_slice() {
            &[x0, x1, y0, y1] if x1 > x0 && y1 > y0 => BBox::new(x0, x1, y0, y1),
            other => return Err(bad("bbox", format!("expected [x_min, x_max, y_min, y_max], got {other:?}"))),
        };
        let cutoff = cfg.u64("cutoff", DEFAULT_CUTOFF as u64)?;
        if cutoff == 0 || cutoff > 1024 {
            return Err(bad("cutoff", "must lie in 1..=1024"));
        }
        Ok(FieldGenParams {
            seed: cfg.u64("seed", 0)?,
            cutoff: cutoff as i32,
            epsilon: positive("epsilon", cfg.f64("epsilon", DEFAULT_EPSILON)?)?,
            lower: cfg.opt_f64("lower")?,
            bbox,
            h: positive("h", cfg.f64("h", 1.0 / 128.0)?)?,
        })
    }
}

pub fn run_field_gen(p: &FieldGenParams) -> (FourierField, ScalarField) {
    let mut f = FourierField::new(p.seed, p.cutoff, p.epsilon);
    if let Some(c) = p.lower {
        f = f.with_lower_bound(c, &p.bbox);
    }
    let nx = (p.bbox.width() / p.h).round() as usize + 1;
    let ny = (p.bbox.height() / p.h).round() as usize + 1;
    let grid = Grid::new(nx, ny, p.bbox.x_min, p.bbox.y_min, p.h);
    let sample = f.sample(grid);
    (f, sample)
}

// ---------------------------------------------------------------------------
// Output

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_overrides() {
        let mut cfg = ExperimentConfig::parse("# comment\nells = [0.5, 0.25]\nfield = \"linear\"\nsamples = 64\n").unwrap();
        cfg.set("samples", "32");
        cfg.set("field", "constant");
        let p = AveragingParams::from_config(&cfg).unwrap();
        assert_eq!(p.ells, vec![0.5, 0.25]);
        assert_eq!(p.samples, 32);
        assert_eq!(p.field, FieldSpec::Constant(1.0));
    }

    #[test]
    fn config_rejects_unknown_and_nested_keys() {
        let cfg = ExperimentConfig::parse("sigmaz = 3").unwrap();
        assert!(EigParams::from_config(&cfg).is_err());
        assert!(ExperimentConfig::parse("[section]\na = 1").is_err());
        let cfg = ExperimentConfig::parse("rho = 0.7").unwrap();
        assert!(EigParams::from_config(&cfg).is_err());
        assert!(GlParams::from_config(&ExperimentConfig::default()).is_err());
    }

    #[test]
    fn constant_field_rows_are_zero() {
        let p = AveragingParams { field: FieldSpec::Constant(2.5), fields: 1, ells: vec![0.5, 0.25], samples: 32, center: [0.1, -0.2] };
        let (rows, checks) = run_averaging(&p).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.lhs <= MACHINE_ZERO && r.seed.is_none()));
        assert_eq!(exit_code(&checks), EXIT_PASS);
    }

    #[test]
    fn averaging_is_reproducible() {
        let p = AveragingParams { field: FieldSpec::Random { seed: 7, lower: None }, fields: 2, ells: vec![0.25], samples: 16, center: [0.0, 0.0] };
        let (a, _) = run_averaging(&p).unwrap();
        let (b, _) = run_averaging(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![Some(7), Some(8)]);
    }

    #[test]
    fn linear_ray_moment_is_exact() {
        let f = Field::Linear;
        let generic = |p: Point| 1.0 + p[0];
        let exact = f.ray_moment([0.3, -0.1], [0.4, 0.2]).unwrap();
        let numeric = generic.ray_moment([0.3, -0.1], [0.4, 0.2]).unwrap();
        assert!((exact - numeric).abs() < 1e-12);
    }

    #[test]
    fn field_gen_grid_covers_bbox() {
        let p = FieldGenParams { seed: 1, cutoff: 4, epsilon: 0.1, lower: Some(1.0), bbox: BBox::new(0.0, 1.0, 0.0, 0.5), h: 0.125 };
        let (f, s) = run_field_gen(&p);
        assert_eq!((s.grid.nx, s.grid.ny), (9, 5));
        assert!(s.values.iter().all(|&v| v >= 1.0));
        assert_eq!(f.seed, 1);
    }
}
