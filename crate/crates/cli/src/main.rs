use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use hopfion::ansatz1d::{
    amn_energy_formula, amn_profile_minimize, bound_value, vav_minimize, ProfileDomain,
    ProfileSolution,
};
use hopfion::energy::{energy_report, EnergyReport};
use hopfion::field::{
    init_amn, init_baby_s2, init_baby_t2, init_t2_skyrmion, init_t3_vav, init_vav_s2s1, perturb,
    Field,
};
use hopfion::geometry::{build_geometry, ManifoldSpec};
use hopfion::io::{
    load_field, save_field, write_curve_csv, write_json, write_trace_csv, RunReport,
    FORMAT_VERSION, MAGIC, REPORT_SCHEMA_VERSION,
};
use hopfion::optimize::{relax, RelaxConfig};
use hopfion::topology::{
    degree_2d, hopf_charge_t3, linking_charge, preimage, ChargeReport, Projection,
};
use hopfion::{HopfError, ManifoldKind, Vec3};

/// Generic target values for charges measured by preimage linking.
const LINK_VALUES: [Vec3<f64>; 2] = [[0.48, 0.6, 0.64], [-0.36, 0.1, -0.93]];

const EXIT_USAGE: u8 = 2;
const EXIT_TOPOLOGY: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hopfion",
    about = "Strong-coupling Hopf solitons and baby skyrmions on compact domains"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an initial field.
    Init(InitArgs),
    /// Minimize the energy with a phased-out regularization.
    Relax(RelaxArgs),
    /// Topological charge of a field.
    Charge(InputArgs),
    /// Energy breakdown of a field.
    Energy(EnergyArgs),
    /// Preimage curves of one target value.
    Preimage(PreimageArgs),
    /// One-dimensional reduced models.
    #[command(subcommand)]
    Profile(ProfileCommand),
    /// Topological energy bound.
    Bound(BoundArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Ansatz {
    Amn,
    Vav,
    T3vav,
    BabyS2,
    BabyT2,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ProfileKind {
    Optimal,
    Linear,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, value_parser = parse_manifold)]
    manifold: ManifoldKind,
    /// Sites along every axis.
    #[arg(long, conflicts_with = "dims")]
    size: Option<usize>,
    /// Sites per axis, comma separated.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    ansatz: Ansatz,
    #[arg(long, default_value_t = 1)]
    m: u32,
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Two-sphere radius (s2xs1).
    #[arg(long = "L")]
    sphere_radius: Option<f64>,
    /// Torus period scale factors, comma separated.
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<f64>>,
    /// Vortex–antivortex pairs (t3vav).
    #[arg(long, default_value_t = 1)]
    pairs: u32,
    /// Degree of a baby skyrmion field. On t2, degree 2 is the
    /// constant-density solution and other degrees a compact skyrmion.
    #[arg(long)]
    q: Option<u32>,
    /// Radius of the compact t2 skyrmion.
    #[arg(long = "radius", default_value_t = 1.5)]
    skyrmion_radius: f64,
    /// Radial or polar profile of amn and vav fields.
    #[arg(long, value_enum, default_value_t = ProfileKind::Optimal)]
    profile: ProfileKind,
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RelaxArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    beta_decay: Option<f64>,
    /// Stages including the final unregularized one.
    #[arg(long)]
    beta_stages: Option<usize>,
    /// Iteration cap of each regularized stage.
    #[arg(long)]
    stage_iters: Option<usize>,
    /// Iteration cap of the final stage.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Gradient tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(short, long)]
    input: PathBuf,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectArg {
    Coords,
    Stereo,
}

#[derive(Args)]
struct PreimageArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Target point on the sphere, normalized on use.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    value: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ProjectArg::Coords)]
    project: ProjectArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ProfileCommand {
    /// Vortex–antivortex profile on S²×S¹.
    Vav {
        /// Sphere radius, or `auto` to minimize over it.
        #[arg(long = "L", default_value = "auto")]
        radius: String,
        #[arg(long, default_value_t = 400)]
        n_theta: usize,
    },
    /// Doubly symmetric profile on S³.
    Amn {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 512)]
        n_r: usize,
    },
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_parser = parse_manifold)]
    manifold: ManifoldKind,
    #[arg(long = "Q", allow_hyphen_values = true)]
    charge: i64,
}

fn parse_manifold(s: &str) -> std::result::Result<ManifoldKind, String> {
    ManifoldKind::parse(s).ok_or_else(|| format!("unknown manifold {s:?} (s3, t3, s2xs1, s2, t2)"))
}

fn version() -> &'static str {
    let v = format!(
        "{} (field format {MAGIC} v{FORMAT_VERSION}, report schema v{REPORT_SCHEMA_VERSION})",
        env!("CARGO_PKG_VERSION")
    );
    Box::leak(v.into_boxed_str())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let matches = Cli::command().version(version()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let outcome = match cli.command {
        Command::Init(a) => cmd_init(a),
        Command::Relax(a) => cmd_relax(a),
        Command::Charge(a) => cmd_charge(a),
        Command::Energy(a) => cmd_energy(a),
        Command::Preimage(a) => cmd_preimage(a),
        Command::Profile(p) => cmd_profile(p),
        Command::Bound(a) => cmd_bound(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(h) = cause.downcast_ref::<HopfError>() {
            return match h {
                HopfError::AlgebraicallyEssential { .. }
                | HopfError::CrossSectionDisagreement { .. }
                | HopfError::OpenCrossSection(_)
                | HopfError::IllConditionedPlaquette { .. }
                | HopfError::BoundaryViolation(_)
                | HopfError::Preimage(_) => EXIT_TOPOLOGY,
                HopfError::NonConvergence(_) => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    write_json(value, std::io::stdout().lock())?;
    Ok(())
}

fn load(path: &Path) -> Result<Field<f64>> {
    load_field(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn build_spec(a: &InitArgs) -> Result<ManifoldSpec<f64>> {
    let kind = a.manifold;
    let dims = match (&a.dims, a.size) {
        (Some(d), _) => d.clone(),
        (None, Some(n)) => vec![n; kind.ndim()],
        (None, None) => bail!(HopfError::InvalidArgument(
            "one of --size or --dims is required".into()
        )),
    };
    let spec = match kind {
        ManifoldKind::S2xS1 => {
            let l = a.sphere_radius.ok_or_else(|| {
                HopfError::InvalidArgument("s2xs1 needs the sphere radius --L".into())
            })?;
            ManifoldSpec::s2xs1(&dims, l)?
        }
        ManifoldKind::T3 | ManifoldKind::T2 => match &a.periods {
            Some(p) => ManifoldSpec::torus(&dims, p)?,
            None => ManifoldSpec::new(kind, &dims)?,
        },
        _ => ManifoldSpec::new(kind, &dims)?,
    };
    if a.sphere_radius.is_some() && kind != ManifoldKind::S2xS1 {
        bail!(HopfError::InvalidArgument(
            "--L applies to s2xs1 only".into()
        ));
    }
    if a.periods.is_some() && !kind.is_torus() {
        bail!(HopfError::InvalidArgument(
            "--periods applies to tori only".into()
        ));
    }
    Ok(spec)
}

fn cmd_init(a: InitArgs) -> Result<u8> {
    let spec = build_spec(&a)?;
    let kind = spec.kind;
    let mismatch =
        |name: &str| HopfError::InvalidArgument(format!("ansatz {name} is not defined on {kind}"));
    let field = match a.ansatz {
        Ansatz::Amn => {
            if kind != ManifoldKind::S3 {
                bail!(mismatch("amn"));
            }
            let profile = match a.profile {
                ProfileKind::Optimal => Some(amn_profile_minimize(a.m, a.n, 512)?),
                ProfileKind::Linear => None,
            };
            init_amn(&spec, a.m, a.n, profile.as_ref())?
        }
        Ansatz::Vav => {
            if kind != ManifoldKind::S2xS1 {
                bail!(mismatch("vav"));
            }
            let l = spec.radius.expect("s2xs1 spec has a radius");
            let profile = match a.profile {
                ProfileKind::Optimal => vav_minimize(400, Some(l))?,
                ProfileKind::Linear => ProfileSolution::linear(ProfileDomain::Polar, 400),
            };
            init_vav_s2s1(&spec, &profile)?
        }
        Ansatz::T3vav => {
            if kind != ManifoldKind::T3 {
                bail!(mismatch("t3vav"));
            }
            init_t3_vav(&spec, a.pairs)?
        }
        Ansatz::BabyS2 => {
            if kind != ManifoldKind::S2 {
                bail!(mismatch("baby-s2"));
            }
            init_baby_s2(&spec, a.q.unwrap_or(1))?
        }
        Ansatz::BabyT2 => {
            if kind != ManifoldKind::T2 {
                bail!(mismatch("baby-t2"));
            }
            match a.q.unwrap_or(2) {
                2 => init_baby_t2(&spec)?,
                q => init_t2_skyrmion(&spec, q, a.skyrmion_radius)?,
            }
        }
    };
    let field = if a.perturb > 0.0 {
        perturb(&field, a.perturb, a.seed)?
    } else {
        field
    };
    save_field(&field, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    info!("wrote {} ({} sites)", a.output.display(), field.len());
    Ok(0)
}

/// Charge by the method that suits the manifold.
fn measure_charge(field: &Field<f64>) -> Result<(ChargeReport<f64>, &'static str)> {
    Ok(match field.spec.kind {
        ManifoldKind::S2 | ManifoldKind::T2 => (degree_2d(field)?, "degree"),
        ManifoldKind::T3 => (hopf_charge_t3(field)?, "spectral"),
        ManifoldKind::S3 | ManifoldKind::S2xS1 => (
            linking_charge(field, LINK_VALUES[0], LINK_VALUES[1])?,
            "linking",
        ),
    })
}

fn directional(report: &EnergyReport<f64>) -> (f64, Option<f64>, Option<f64>) {
    let d = &report.directional;
    (d[0], d.get(1).copied(), d.get(2).copied())
}

fn cmd_relax(a: RelaxArgs) -> Result<u8> {
    let field = load(&a.input)?;
    let defaults = RelaxConfig::<f64>::default();
    let config = RelaxConfig {
        beta0: a.beta0.unwrap_or(defaults.beta0),
        beta_decay: a.beta_decay.unwrap_or(defaults.beta_decay),
        beta_stages: a.beta_stages.unwrap_or(defaults.beta_stages),
        stage_iters: a.stage_iters.unwrap_or(defaults.stage_iters),
        max_iters: a.max_iters.unwrap_or(defaults.max_iters),
        grad_tol: a.tol.unwrap_or(defaults.grad_tol),
        ..defaults
    };
    config.validate()?;
    let geom = build_geometry(&field.spec)?;
    let start = Instant::now();
    let result = relax(&field, &geom, &config)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    save_field(&result.field, &a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    if let Some(path) = &a.trace {
        write_trace_csv(&result.trace, create(path)?)?;
    }

    let charge = if result.discontinuous {
        None
    } else {
        match measure_charge(&result.field) {
            Ok((c, _)) => Some(c),
            Err(e) => {
                warn!("charge unavailable: {e}");
                None
            }
        }
    };
    let kind = field.spec.kind;
    let e4 = result.report.e4;
    let (e_x, e_y, e_z) = directional(&result.report);
    let report = RunReport {
        manifold: kind,
        dims: field.spec.dims.clone(),
        q: charge.as_ref().map(|c| c.q),
        q_numeric: charge.as_ref().map(|c| c.q_numeric),
        residual: charge.as_ref().map(|c| c.residual),
        e4,
        e2: result.report.e2,
        beta_final: 0.0,
        e_over_bound: charge
            .as_ref()
            .filter(|c| c.q != 0)
            .map(|c| e4 / bound_value::<f64>(kind, c.q)),
        e_x,
        e_y,
        e_z,
        kappa: result.report.kappa,
        converged: result.converged,
        discontinuous: result.discontinuous,
        iterations: result.iterations,
        wall_seconds,
    };
    match &a.report {
        Some(path) => write_json(&report, create(path)?)?,
        None => write_json(&report, std::io::stdout().lock())?,
    }
    Ok(if result.discontinuous {
        EXIT_TOPOLOGY
    } else if !result.converged {
        EXIT_NUMERICAL
    } else {
        0
    })
}

fn cmd_charge(a: InputArgs) -> Result<u8> {
    let field = load(&a.input)?;
    let (c, method) = measure_charge(&field)?;
    print_json(&json!({
        "manifold": field.spec.kind,
        "method": method,
        "Q": c.q,
        "Q_numeric": c.q_numeric,
        "residual": c.residual,
        "net_fluxes": c.net_fluxes,
        "trusted": c.trusted(),
    }))?;
    Ok(0)
}

fn cmd_energy(a: EnergyArgs) -> Result<u8> {
    let field = load(&a.input)?;
    let geom = build_geometry(&field.spec)?;
    let r = energy_report(&field, &geom, a.beta)?;
    let (lo, hi) = r.density_range();
    let (e_x, e_y, e_z) = directional(&r);
    print_json(&json!({
        "manifold": field.spec.kind,
        "dims": field.spec.dims,
        "E4": r.e4,
        "E2": r.e2,
        "beta": r.beta,
        "E_total": r.e_total,
        "E_x": e_x,
        "E_y": e_y,
        "E_z": e_z,
        "kappa": r.kappa,
        "density_min": lo,
        "density_max": hi,
    }))?;
    Ok(0)
}

fn cmd_preimage(a: PreimageArgs) -> Result<u8> {
    let field = load(&a.input)?;
    let value: Vec3<f64> = match a.value.as_slice() {
        &[x, y, z] => [x, y, z],
        _ => bail!(HopfError::InvalidArgument(
            "--value takes three components x,y,z".into()
        )),
    };
    let norm = value.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        bail!(HopfError::InvalidArgument(
            "--value must be a nonzero vector".into()
        ));
    }
    let value = value.map(|x| x / norm);
    let projection = match a.project {
        ProjectArg::Coords => Projection::Coordinates,
        ProjectArg::Stereo => Projection::Stereographic,
    };
    let curve = preimage(&field, value, projection)?;
    if let Some(path) = &a.output {
        write_curve_csv(&curve, create(path)?)?;
    }
    let components: Vec<_> = curve
        .components
        .iter()
        .map(|c| json!({ "vertices": c.points.len(), "winding": c.winding }))
        .collect();
    print_json(&json!({
        "value": value,
        "components": components,
        "open_components": curve.open_components,
    }))?;
    Ok(0)
}

fn cmd_profile(p: ProfileCommand) -> Result<u8> {
    match p {
        ProfileCommand::Vav { radius, n_theta } => {
            let l = match radius.as_str() {
                "auto" => None,
                s => Some(s.parse::<f64>().map_err(|_| {
                    anyhow!(HopfError::InvalidArgument(format!(
                        "--L takes a number or auto, got {s:?}"
                    )))
                })?),
            };
            let sol = vav_minimize::<f64>(n_theta, l)?;
            let l = sol.radius.expect("polar profiles carry a radius");
            print_json(&json!({
                "profile": "vav",
                "L": l,
                "energy": sol.energy,
                "E_over_bound": sol.energy / 2.0,
            }))?;
        }
        ProfileCommand::Amn { m, n, n_r } => {
            let sol = amn_profile_minimize::<f64>(m, n, n_r)?;
            let q = (m * n) as f64;
            print_json(&json!({
                "profile": "amn",
                "m": m,
                "n": n,
                "energy": sol.energy,
                "formula": amn_energy_formula::<f64>(m, n),
                "E_over_bound": sol.energy / q,
            }))?;
        }
    }
    Ok(0)
}

fn cmd_bound(a: BoundArgs) -> Result<u8> {
    print_json(&json!({
        "manifold": a.manifold,
        "Q": a.charge,
        "bound": bound_value::<f64>(a.manifold, a.charge),
    }))?;
    Ok(0)
}
