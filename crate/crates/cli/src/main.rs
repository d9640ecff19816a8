use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use quadip::assembly::MethodConfig;
use quadip::harness::{build_problem, fill_rates, level_seed, read_csv, run_case, run_experiment, write_csv, ExperimentSpec};
use quadip::mesh::{
    classify_boundary, distort, mesh_size, read_mesh, unit_square_mesh, write_mesh, BoundaryKind, DistortionSpec, QuadMesh,
};
use quadip::model::{BoundarySetup, TractionProfile};
use quadip::postprocess::{nodal_displacement, write_nodal_field, ProjectionMass, ReferenceSolution};
use quadip::solver::{SolveOptions, DEFAULT_TOLERANCE};

#[derive(Parser)]
#[command(
    name = "quadip",
    version,
    about = "Interior penalty DG and Galerkin solvers for near-incompressible plane-strain elasticity"
)]
struct Cli {
    /// Log at debug level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, distort or inspect mesh files.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Solve a single case and write nodal displacement and stress fields.
    Solve(SolveArgs),
    /// Run a convergence sweep described by a TOML file and write the CSV table.
    Converge(ConvergeArgs),
    /// Print the rate table of a convergence CSV.
    Rates { csv: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Boundary {
    AllDirichlet,
    LeftDirichlet,
}

impl From<Boundary> for BoundarySetup {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::AllDirichlet => BoundarySetup::AllDirichlet,
            Boundary::LeftDirichlet => BoundarySetup::LeftDirichlet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Traction {
    Tent,
    Ramp,
}

impl From<Traction> for TractionProfile {
    fn from(t: Traction) -> Self {
        match t {
            Traction::Tent => TractionProfile::Tent,
            Traction::Ramp => TractionProfile::Ramp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mass {
    Consistent,
    Lumped,
}

impl From<Mass> for ProjectionMass {
    fn from(m: Mass) -> Self {
        match m {
            Mass::Consistent => ProjectionMass::Consistent,
            Mass::Lumped => ProjectionMass::Lumped,
        }
    }
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Uniform unit-square mesh with 2^levels cells per side.
    Gen {
        #[arg(long)]
        levels: u32,
        #[arg(long, value_enum, default_value = "all-dirichlet")]
        boundary: Boundary,
        /// Output file; defaults to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Randomly perturb the vertices of a mesh file.
    Distort {
        input: PathBuf,
        #[arg(long)]
        df: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also slide boundary vertices along their edges.
        #[arg(long)]
        move_boundary: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print counts and size measures of a mesh file.
    Info { input: PathBuf },
}

#[derive(Args)]
struct SolveArgs {
    /// manufactured, square_plate or cantilever.
    #[arg(long, default_value = "square_plate")]
    problem: String,
    /// Manufactured field: linear, sine, divergence_free or plate.
    #[arg(long, default_value = "plate")]
    field: String,
    #[arg(long, value_enum, default_value = "all-dirichlet")]
    boundary: Boundary,
    #[arg(long, value_enum, default_value = "tent")]
    traction: Traction,
    /// Method id, e.g. sipg-new, nipg-orig, sg-q1, sg-q1-sri.
    #[arg(long, default_value = "sipg-new")]
    method: String,
    #[arg(long)]
    k_mu: Option<f64>,
    #[arg(long)]
    k_lambda: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    nu: f64,
    /// Refinement level of the generated mesh (ignored with --mesh).
    #[arg(long, default_value_t = 3)]
    level: u32,
    #[arg(long, default_value_t = 0.0)]
    df: f64,
    /// Base seed; the level seed is derived from it as in `converge`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solve on this mesh file instead of generating one.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, value_enum, default_value = "consistent")]
    projection: Mass,
    /// Directory for displacement.txt and stress.txt.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConvergeArgs {
    spec: PathBuf,
    /// CSV destination; overrides the spec. Without either, the table goes to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    record_timing: bool,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_mesh(path: &Path) -> Result<QuadMesh> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_mesh(&text).with_context(|| format!("parsing {}", path.display()))
}

fn mesh_command(cmd: MeshCommand) -> Result<()> {
    match cmd {
        MeshCommand::Gen { levels, boundary, output } => {
            let setup = BoundarySetup::from(boundary);
            let mesh = classify_boundary(unit_square_mesh(levels), move |p| setup.is_dirichlet(p))?;
            write_output(output.as_deref(), &write_mesh(&mesh)?)
        }
        MeshCommand::Distort {
            input,
            df,
            seed,
            move_boundary,
            output,
        } => {
            let mesh = load_mesh(&input)?;
            let spec = DistortionSpec {
                factor: df,
                seed,
                move_boundary,
            };
            write_output(output.as_deref(), &write_mesh(&distort(&mesh, &spec)?)?)
        }
        MeshCommand::Info { input } => {
            let mesh = load_mesh(&input)?;
            let dirichlet = mesh
                .boundary_edges()
                .filter(|(e, _)| mesh.marker(*e) == Some(BoundaryKind::Dirichlet))
                .count();
            let min_det = (0..mesh.num_cells())
                .flat_map(|c| mesh.cell_geometry(c).corner_determinants())
                .fold(f64::INFINITY, f64::min);
            println!("cells: {}", mesh.num_cells());
            println!("vertices: {}", mesh.num_vertices());
            println!("interior edges: {}", mesh.interior_edges().count());
            println!("boundary edges: {} ({dirichlet} Dirichlet)", mesh.boundary_edges().count());
            println!("h: {:.6e}", mesh_size(&mesh));
            println!("min corner Jacobian: {min_det:.6e}");
            Ok(())
        }
    }
}

fn solve_command(args: SolveArgs) -> Result<()> {
    let problem = build_problem(&args.problem, &args.field, args.boundary.into(), args.traction.into(), args.nu)?;
    let base = MethodConfig::parse(&args.method)?;
    let config = base.with_penalties(args.k_mu.unwrap_or(base.k_mu), args.k_lambda.unwrap_or(base.k_lambda));
    config.validate()?;
    let mesh = match &args.mesh {
        Some(path) => load_mesh(path)?,
        None => problem.mesh(args.level, &DistortionSpec::new(args.df, level_seed(args.seed, args.level)))?,
    };
    let exact = problem.exact();
    let options = SolveOptions {
        tolerance: args.tolerance,
        ..SolveOptions::default()
    };
    let reference = exact.as_ref().map(|f| f as &dyn ReferenceSolution);
    let result = run_case(&mesh, &problem, &config, &options, args.projection.into(), reference)?;
    log::info!(
        "{} on {} cells ({} dofs): relative residual {:.3e}",
        config.id(),
        mesh.num_cells(),
        result.dofmap.n_dofs,
        result.residual
    );
    if let Some(e) = &result.errors {
        log::info!(
            "disp_h1 {:.6e}, disp_l2 {:.6e}, stress_l2 {:.6e}",
            e.disp_h1,
            e.disp_l2,
            e.stress_l2
        );
    }
    fs::create_dir_all(&args.out_dir)?;
    let disp = nodal_displacement(&mesh, &result.dofmap, &result.solution);
    fs::write(args.out_dir.join("displacement.txt"), write_nodal_field("displacement", &disp))?;
    fs::write(args.out_dir.join("stress.txt"), write_nodal_field("stress", &result.stress.values))?;
    if result.residual > args.tolerance {
        log::warn!(
            "residual {:.3e} exceeds the tolerance but is within the double-precision floor {:.3e}",
            result.residual,
            result.rounding_floor
        );
    }
    println!("residual {:.3e}", result.residual);
    println!("rounding floor {:.3e}", result.rounding_floor);
    println!("wrote {}", args.out_dir.display());
    Ok(())
}

fn converge_command(args: ConvergeArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec = ExperimentSpec::from_toml(&text).with_context(|| format!("parsing {}", args.spec.display()))?;
    if let Some(jobs) = args.jobs {
        spec.jobs = jobs;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(dir) = args.cache_dir {
        spec.cache_dir = Some(dir);
    }
    if let Some(tol) = args.tolerance {
        spec.tolerance = tol;
    }
    spec.record_timing |= args.record_timing;
    spec.validate()?;
    let output = args.output.or_else(|| {
        spec.output
            .as_ref()
            .map(|p| args.spec.parent().map_or_else(|| p.clone(), |dir| dir.join(p)))
    });
    let records = run_experiment(&spec)?;
    let mut buf = Vec::new();
    write_csv(&records, &mut buf)?;
    write_output(output.as_deref(), std::str::from_utf8(&buf)?)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::error!("{failed} of {} rows failed", records.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn opt(v: Option<f64>, precision: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.precision$e}"))
}

fn rates_command(path: &Path) -> Result<ExitCode> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut records = read_csv(file)?;
    if records.is_empty() {
        bail!("{} has no rows", path.display());
    }
    fill_rates(&mut records);
    println!(
        "{:<12} {:>8} {:>5} {:>5} {:>11} {:>11} {:>7} {:>11} {:>7}  status",
        "method", "nu", "df", "level", "h", "disp_h1", "rate", "stress_l2", "rate"
    );
    for r in &records {
        println!(
            "{:<12} {:>8} {:>5} {:>5} {:>11.4e} {:>11} {:>7} {:>11} {:>7}  {}",
            r.method,
            r.nu,
            r.df,
            r.level,
            r.h,
            opt(r.disp_h1, 4),
            r.rate_h1.map_or_else(|| "-".into(), |x| format!("{x:.3}")),
            opt(r.stress_l2, 4),
            r.rate_stress.map_or_else(|| "-".into(), |x| format!("{x:.3}")),
            r.status
        );
    }
    Ok(if records.iter().all(|r| r.is_ok()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Mesh(cmd) => mesh_command(cmd).map(|_| ExitCode::SUCCESS),
        Command::Solve(args) => solve_command(args).map(|_| ExitCode::SUCCESS),
        Command::Converge(args) => converge_command(args),
        Command::Rates { csv } => rates_command(&csv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
