//! Experiment grids: method × ν × df × level sweeps, surrogate reference
//! caching and the CSV convergence table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{assemble, AssemblyOptions, DofMap, MethodConfig, MethodFamily};
use crate::mesh::{classify_boundary, mesh_size, unit_square_mesh, DistortionSpec, QuadMesh};
use crate::model::{
    cantilever_problem, manufactured_problem, square_plate_problem, BenchmarkProblem, BoundarySetup, ManufacturedField, MaterialParams,
    ReferencePolicy, TractionProfile,
};
use crate::postprocess::{
    displacement_error, jump_seminorm, rates, recover_stress, stress_error, ErrorReport, NodalStressField, ProjectionMass,
    ReferenceSolution, SurrogateReference,
};
use crate::solver::{solve, SolveOptions, DEFAULT_TOLERANCE};
use crate::{Error, Result};

/// Environment variable naming the surrogate cache directory.
pub const CACHE_DIR_ENV: &str = "QUADIP_CACHE_DIR";

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 19] = [
    "method",
    "theta",
    "edge_ngp",
    "k_mu",
    "k_lambda",
    "nu",
    "df",
    "seed",
    "level",
    "h",
    "ndofs",
    "disp_h1",
    "disp_l2",
    "stress_l2",
    "rate_h1",
    "rate_stress",
    "residual",
    "wall_ms",
    "status",
];

/// A method given either by id or by id plus penalty overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodEntry {
    Id(String),
    Custom {
        id: String,
        k_mu: Option<f64>,
        k_lambda: Option<f64>,
    },
}

impl MethodEntry {
    pub fn config(&self) -> Result<MethodConfig> {
        match self {
            MethodEntry::Id(id) => MethodConfig::parse(id),
            MethodEntry::Custom { id, k_mu, k_lambda } => {
                let base = MethodConfig::parse(id)?;
                let config = base.with_penalties(k_mu.unwrap_or(base.k_mu), k_lambda.unwrap_or(base.k_lambda));
                config.validate()?;
                Ok(config)
            }
        }
    }
}

fn default_field() -> String {
    "plate".into()
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_surrogate_offset() -> u32 {
    2
}

fn default_surrogate_method() -> String {
    "nipg-new".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// `manufactured`, `square_plate` or `cantilever`.
    pub problem: String,
    /// Manufactured field name; used only by `manufactured`.
    #[serde(default = "default_field")]
    pub field: String,
    #[serde(default)]
    pub boundary: BoundarySetup,
    #[serde(default)]
    pub traction: TractionProfile,
    pub methods: Vec<MethodEntry>,
    pub nu: Vec<f64>,
    pub df: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub move_boundary: bool,
    /// Inclusive `[first, last]` refinement levels.
    pub levels: [u32; 2],
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub projection: ProjectionMass,
    /// CSV destination; relative paths resolve against the spec file.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Surrogate level above the finest level of the grid.
    #[serde(default = "default_surrogate_offset")]
    pub surrogate_offset: u32,
    #[serde(default = "default_surrogate_method")]
    pub surrogate_method: String,
    /// Fill the `wall_ms` column. Off by default so output is byte-stable.
    #[serde(default)]
    pub record_timing: bool,
    /// Worker threads for grid cells; 0 or 1 runs sequentially.
    #[serde(default)]
    pub jobs: usize,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("method list is empty".into()));
        }
        if self.nu.is_empty() {
            return Err(Error::InvalidInput("nu list is empty".into()));
        }
        if self.df.is_empty() {
            return Err(Error::InvalidInput("df list is empty".into()));
        }
        if self.levels[0] > self.levels[1] {
            return Err(Error::InvalidInput(format!("level range {:?} is empty", self.levels)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::NonPositive {
                what: "tolerance",
                value: self.tolerance,
            });
        }
        for m in &self.methods {
            m.config()?;
        }
        MethodConfig::parse(&self.surrogate_method)?;
        for &df in &self.df {
            if !(0.0..1.0).contains(&df) {
                return Err(Error::InvalidInput(format!("distortion factor {df} outside [0, 1)")));
            }
        }
        for &nu in &self.nu {
            self.problem(nu)?;
        }
        Ok(())
    }

    pub fn problem(&self, nu: f64) -> Result<BenchmarkProblem> {
        build_problem(&self.problem, &self.field, self.boundary, self.traction, nu)
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        self.levels[0]..=self.levels[1]
    }
}

/// Problem by name. Manufactured problems use shear modulus 1.
pub fn build_problem(name: &str, field: &str, boundary: BoundarySetup, traction: TractionProfile, nu: f64) -> Result<BenchmarkProblem> {
    match name {
        "manufactured" => {
            let material = MaterialParams::from_shear_modulus(1.0, nu)?;
            let field = ManufacturedField::by_name(field, &material)?;
            Ok(manufactured_problem(material, field, boundary))
        }
        "square_plate" => square_plate_problem(nu),
        "cantilever" => cantilever_problem(nu, traction),
        other => Err(Error::InvalidInput(format!(
            "unknown problem '{other}' (expected manufactured, square_plate or cantilever)"
        ))),
    }
}

/// Distortion seed for one refinement level, so each level is perturbed
/// independently rather than inheriting a coarser mesh's perturbation.
pub fn level_seed(seed: u64, level: u32) -> u64 {
    let mut z = seed ^ (level as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub method: String,
    pub theta: i32,
    pub edge_ngp: usize,
    pub k_mu: f64,
    pub k_lambda: f64,
    pub nu: f64,
    pub df: f64,
    pub seed: u64,
    pub level: u32,
    pub h: f64,
    pub ndofs: usize,
    pub disp_h1: Option<f64>,
    pub disp_l2: Option<f64>,
    pub stress_l2: Option<f64>,
    pub rate_h1: Option<f64>,
    pub rate_stress: Option<f64>,
    pub residual: Option<f64>,
    pub wall_ms: Option<f64>,
    /// `ok` or `failed:<reason>`.
    pub status: String,
}

impl ConvergenceRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Result of one assembled and solved case.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub dofmap: DofMap,
    pub solution: Vec<f64>,
    pub stress: NodalStressField,
    pub residual: f64,
    /// Residual attainable in double precision; see [`crate::solver::rounding_floor`].
    pub rounding_floor: f64,
    pub errors: Option<ErrorReport>,
}

/// Assemble, solve, recover stress and, when a reference is given, measure errors.
pub fn run_case(
    mesh: &QuadMesh,
    problem: &BenchmarkProblem,
    config: &MethodConfig,
    solve_options: &SolveOptions,
    projection: ProjectionMass,
    reference: Option<&dyn ReferenceSolution>,
) -> Result<CaseResult> {
    let system = assemble(mesh, problem, config, &AssemblyOptions::default())?;
    let report = solve(&system, solve_options)?;
    let dofmap = system.dofmap;
    let stress = recover_stress(mesh, &problem.material, &report.solution, &dofmap, projection)?;
    let errors = match reference {
        None => None,
        Some(reference) => {
            let (disp_h1, disp_l2) = displacement_error(mesh, &dofmap, &report.solution, Some(reference))?;
            let stress_l2 = stress_error(mesh, &problem.material, &stress, Some(reference))?;
            let disp_jump = if dofmap.layout == crate::assembly::DofLayout::Discontinuous {
                jump_seminorm(mesh, &dofmap, &report.solution)?
            } else {
                0.0
            };
            Some(ErrorReport {
                disp_h1,
                disp_l2,
                disp_jump,
                stress_l2,
                mesh_size: mesh_size(mesh),
                ndofs: dofmap.n_dofs,
            })
        }
    };
    Ok(CaseResult {
        dofmap,
        solution: report.solution,
        stress,
        residual: report.relative_residual,
        rounding_floor: report.rounding_floor,
        errors,
    })
}

/// Options for building fine-mesh references.
#[derive(Debug, Clone)]
pub struct SurrogateOptions {
    pub level: u32,
    pub method: MethodConfig,
    pub cache_dir: Option<PathBuf>,
    pub tolerance: f64,
    pub projection: ProjectionMass,
}

fn cache_key(problem: &BenchmarkProblem, options: &SurrogateOptions) -> String {
    let text = format!(
        "{}|{:?}|{:?}|{:?}|{}|{}|{}|{}|{:?}",
        problem.name,
        problem.kind,
        problem.boundary,
        problem.material.poisson_ratio.to_bits(),
        problem.material.youngs_modulus.to_bits(),
        options.level,
        options.method.id(),
        options.method.k_mu.to_bits() ^ options.method.k_lambda.to_bits().rotate_left(1),
        options.projection,
    );
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn read_cached(path: &Path, n: usize) -> Option<Vec<f64>> {
    let text = std::fs::read_to_string(path).ok()?;
    let values: Vec<f64> = text.lines().map(str::parse).collect::<std::result::Result<_, _>>().ok()?;
    (values.len() == n).then_some(values)
}

/// Solve `problem` on an undistorted fine mesh. Solutions are cached by a
/// content hash of the problem and options when a cache directory is set.
pub fn surrogate_reference(problem: &BenchmarkProblem, options: &SurrogateOptions) -> Result<SurrogateReference> {
    let setup = problem.boundary;
    let mesh = classify_boundary(unit_square_mesh(options.level), move |p| setup.is_dirichlet(p))?;
    let dofmap = DofMap::for_config(&mesh, &options.method);
    let path = options
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("{}.txt", cache_key(problem, options))));
    let cached = path.as_deref().and_then(|p| read_cached(p, dofmap.n_dofs));
    let values = match cached {
        Some(values) => {
            log::debug!("surrogate cache hit for {} at level {}", problem.name, options.level);
            values
        }
        None => {
            log::info!(
                "solving surrogate for {} (nu = {}) at level {}",
                problem.name,
                problem.material.poisson_ratio,
                options.level
            );
            let system = assemble(&mesh, problem, &options.method, &AssemblyOptions::default())?;
            let solve_options = SolveOptions {
                tolerance: options.tolerance,
                ..SolveOptions::default()
            };
            let values = solve(&system, &solve_options)?.solution;
            if let Some(path) = &path {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                let mut text = String::with_capacity(values.len() * 24);
                for v in &values {
                    let _ = writeln!(text, "{v:?}");
                }
                std::fs::write(path, text)?;
            }
            values
        }
    };
    let stress = recover_stress(&mesh, &problem.material, &values, &dofmap, options.projection)?;
    Ok(SurrogateReference::new(mesh, dofmap, values, stress))
}

fn failure(error: &Error) -> String {
    let reason = match error {
        Error::DistortionRejected { .. } => "distortion_rejected",
        Error::SingularMatrix | Error::ToleranceNotReached { .. } => "solve_failed",
        Error::SingularMass => "singular_mass",
        Error::MissingExact => "missing_exact",
        _ => "error",
    };
    format!("failed:{reason}")
}

enum Reference {
    Exact(ManufacturedField),
    Surrogate(Box<SurrogateReference>),
    Failed(String),
}

impl Reference {
    fn as_dyn(&self) -> std::result::Result<&dyn ReferenceSolution, String> {
        match self {
            Reference::Exact(f) => Ok(f),
            Reference::Surrogate(s) => Ok(s.as_ref()),
            Reference::Failed(status) => Err(status.clone()),
        }
    }
}

fn spec_cache_dir(spec: &ExperimentSpec) -> Option<PathBuf> {
    spec.cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
}

/// Run every (method, ν, df, level) cell of the grid. Failures become rows
/// with a `failed:` status; they never abort the run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRecord>> {
    spec.validate()?;
    let methods: Vec<MethodConfig> = spec.methods.iter().map(MethodEntry::config).collect::<Result<_>>()?;
    let levels: Vec<u32> = spec.levels().collect();
    let problems: Vec<BenchmarkProblem> = spec.nu.iter().map(|&nu| spec.problem(nu)).collect::<Result<_>>()?;

    // One mesh per (df, level), shared by every method and ν.
    let base = &problems[0];
    let meshes: Vec<Vec<std::result::Result<QuadMesh, String>>> = spec
        .df
        .iter()
        .map(|&df| {
            levels
                .iter()
                .map(|&level| {
                    let distortion = DistortionSpec {
                        factor: df,
                        seed: level_seed(spec.seed, level),
                        move_boundary: spec.move_boundary,
                    };
                    base.mesh(level, &distortion).map_err(|e| {
                        log::warn!("mesh df = {df}, level = {level}: {e}");
                        failure(&e)
                    })
                })
                .collect()
        })
        .collect();

    let references: Vec<Reference> = problems
        .iter()
        .map(|problem| match (problem.reference_policy, problem.exact()) {
            (ReferencePolicy::Manufactured | ReferencePolicy::ClosedForm, Some(field)) => Reference::Exact(field),
            (ReferencePolicy::FineMeshSurrogate, _) => {
                let options = SurrogateOptions {
                    level: spec.levels[1] + spec.surrogate_offset,
                    method: MethodConfig::parse(&spec.surrogate_method).expect("validated"),
                    cache_dir: spec_cache_dir(spec),
                    tolerance: spec.tolerance,
                    projection: spec.projection,
                };
                match surrogate_reference(problem, &options) {
                    Ok(s) => Reference::Surrogate(Box::new(s)),
                    Err(e) => {
                        log::warn!("surrogate for nu = {}: {e}", problem.material.poisson_ratio);
                        Reference::Failed(failure(&e))
                    }
                }
            }
            _ => Reference::Failed(failure(&Error::MissingExact)),
        })
        .collect();

    let mut cells = Vec::new();
    for m in 0..methods.len() {
        for n in 0..problems.len() {
            for d in 0..spec.df.len() {
                for l in 0..levels.len() {
                    cells.push((m, n, d, l));
                }
            }
        }
    }
    let solve_options = SolveOptions {
        tolerance: spec.tolerance,
        ..SolveOptions::default()
    };
    let run_cell = |&(m, n, d, l): &(usize, usize, usize, usize)| -> ConvergenceRecord {
        let config = &methods[m];
        let problem = &problems[n];
        let mut record = ConvergenceRecord {
            method: config.id(),
            theta: config.theta,
            edge_ngp: config.edge_ngp,
            k_mu: config.k_mu,
            k_lambda: config.k_lambda,
            nu: spec.nu[n],
            df: spec.df[d],
            seed: spec.seed,
            level: levels[l],
            h: f64::NAN,
            ndofs: 0,
            disp_h1: None,
            disp_l2: None,
            stress_l2: None,
            rate_h1: None,
            rate_stress: None,
            residual: None,
            wall_ms: None,
            status: "ok".into(),
        };
        let mesh = match &meshes[d][l] {
            Ok(mesh) => mesh,
            Err(status) => {
                record.status = status.clone();
                return record;
            }
        };
        record.h = mesh_size(mesh);
        record.ndofs = crate::assembly::dof_count(mesh, config);
        let reference = match references[n].as_dyn() {
            Ok(r) => r,
            Err(status) => {
                record.status = status;
                return record;
            }
        };
        let start = Instant::now();
        match run_case(mesh, problem, config, &solve_options, spec.projection, Some(reference)) {
            Ok(result) => {
                let errors = result.errors.expect("reference given");
                log::debug!(
                    "{} nu = {} df = {} level = {}: h1 = {:e}, jump = {:e}",
                    record.method,
                    record.nu,
                    record.df,
                    record.level,
                    errors.disp_h1,
                    errors.disp_jump
                );
                record.disp_h1 = Some(errors.disp_h1);
                record.disp_l2 = Some(errors.disp_l2);
                record.stress_l2 = Some(errors.stress_l2);
                record.residual = Some(result.residual);
            }
            Err(e) => {
                log::warn!(
                    "{} nu = {} df = {} level = {}: {e}",
                    record.method,
                    record.nu,
                    record.df,
                    record.level
                );
                record.status = failure(&e);
            }
        }
        if spec.record_timing {
            record.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        record
    };
    let mut records: Vec<ConvergenceRecord> = if spec.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    } else {
        cells.iter().map(run_cell).collect()
    };
    fill_rates(&mut records);
    Ok(records)
}

fn pair_rate(h: (f64, f64), e: (Option<f64>, Option<f64>)) -> Option<f64> {
    match e {
        (Some(e0), Some(e1)) => rates(&[h.0, h.1], &[e0, e1]).ok().map(|r| r[0]),
        _ => None,
    }
}

/// Fill rate columns from the previous level of the same (method, ν, df) group.
pub fn fill_rates(records: &mut [ConvergenceRecord]) {
    for i in 1..records.len() {
        let (prev, cur) = (&records[i - 1], &records[i]);
        let same_group = prev.method == cur.method
            && prev.k_mu == cur.k_mu
            && prev.k_lambda == cur.k_lambda
            && prev.nu == cur.nu
            && prev.df == cur.df
            && prev.level + 1 == cur.level;
        let (rate_h1, rate_stress) = if same_group && prev.is_ok() && cur.is_ok() {
            (
                pair_rate((prev.h, cur.h), (prev.disp_h1, cur.disp_h1)),
                pair_rate((prev.h, cur.h), (prev.stress_l2, cur.stress_l2)),
            )
        } else {
            (None, None)
        };
        records[i].rate_h1 = rate_h1;
        records[i].rate_stress = rate_stress;
    }
}

/// Per level, the ratio of the largest to the smallest `disp_h1` across the
/// ν values present for `method` and `df`. Levels with fewer than two ν
/// values are skipped.
pub fn compare_uniformity(records: &[ConvergenceRecord], method: &str, df: f64) -> Result<Vec<(u32, f64)>> {
    let selected: Vec<&ConvergenceRecord> = records
        .iter()
        .filter(|r| r.method == method && r.df == df && r.is_ok() && r.disp_h1.is_some())
        .collect();
    let levels: BTreeSet<u32> = selected.iter().map(|r| r.level).collect();
    let mut out = Vec::new();
    for level in levels {
        let errors: Vec<f64> = selected.iter().filter(|r| r.level == level).filter_map(|r| r.disp_h1).collect();
        if errors.len() < 2 {
            continue;
        }
        let max = errors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = errors.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push((level, max / min));
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{method} at df = {df} has fewer than two nu values per level"
        )));
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[ConvergenceRecord], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<ConvergenceRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "unexpected CSV header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn csv_string(records: &[ConvergenceRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// Methods compared in the standard sweeps.
pub fn all_methods() -> Vec<MethodConfig> {
    let mut out = vec![MethodConfig::sg_q1(), MethodConfig::sg_q1_sri()];
    for ngp in [1, 2] {
        out.extend([MethodConfig::nipg(ngp), MethodConfig::sipg(ngp), MethodConfig::iipg(ngp)]);
    }
    debug_assert!(out.iter().filter(|m| m.family == MethodFamily::Ip).count() == 6);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(methods: &[&str]) -> ExperimentSpec {
        ExperimentSpec {
            problem: "manufactured".into(),
            field: "linear".into(),
            boundary: BoundarySetup::AllDirichlet,
            traction: TractionProfile::Tent,
            methods: methods.iter().map(|m| MethodEntry::Id(m.to_string())).collect(),
            nu: vec![0.3, 0.4999],
            df: vec![0.0, 0.2],
            seed: 7,
            move_boundary: false,
            levels: [1, 2],
            tolerance: 1e-10,
            projection: ProjectionMass::Consistent,
            output: None,
            cache_dir: None,
            surrogate_offset: 2,
            surrogate_method: "nipg-new".into(),
            record_timing: false,
            jobs: 0,
        }
    }

    #[test]
    fn empty_method_list_is_rejected() {
        assert!(matches!(spec(&[]).validate(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn grid_is_complete_and_ordered() {
        let records = run_experiment(&spec(&["sipg-new", "sg-q1"])).unwrap();
        assert_eq!(records.len(), 2 * 2 * 2 * 2);
        assert_eq!(records[0].method, "sipg-new");
        assert_eq!(records[8].method, "sg-q1");
        assert!(records.iter().all(|r| r.is_ok()));
        assert!(records[0].rate_h1.is_none());
        assert_eq!(records[1].level, 2);
    }

    #[test]
    fn parallel_rows_match_sequential() {
        let seq = run_experiment(&spec(&["nipg-new"])).unwrap();
        let mut s = spec(&["nipg-new"]);
        s.jobs = 3;
        let par = run_experiment(&s).unwrap();
        assert_eq!(csv_string(&seq).unwrap(), csv_string(&par).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let records = run_experiment(&spec(&["iipg-orig"])).unwrap();
        let text = csv_string(&records).unwrap();
        assert!(text.starts_with(&CSV_COLUMNS.join(",")));
        assert_eq!(read_csv(text.as_bytes()).unwrap(), records);
    }

    #[test]
    fn uniformity_ratio() {
        let mut records = run_experiment(&spec(&["nipg-new"])).unwrap();
        for r in &mut records {
            r.disp_h1 = Some(0.5);
        }
        let ratios = compare_uniformity(&records, "nipg-new", 0.0).unwrap();
        assert_eq!(ratios, vec![(1, 1.0), (2, 1.0)]);
        assert!(matches!(
            compare_uniformity(&records, "sg-q1", 0.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn spec_from_toml() {
        let text = r#"
            problem = "manufactured"
            field = "plate"
            methods = ["sg-q1", { id = "sipg-new", k_mu = 10.0, k_lambda = 50.0 }]
            nu = [0.3]
            df = [0.0]
            levels = [2, 3]
        "#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.methods[1].config().unwrap().k_lambda, 50.0);
        assert_eq!(spec.tolerance, DEFAULT_TOLERANCE);
        assert!(ExperimentSpec::from_toml("problem = \"x\"\nmethods = []\nnu = [0.3]\ndf = [0.0]\nlevels = [1, 2]").is_err());
    }

    #[test]
    fn level_seeds_differ() {
        assert_ne!(level_seed(1, 2), level_seed(1, 3));
        assert_eq!(level_seed(9, 4), level_seed(9, 4));
    }
}
