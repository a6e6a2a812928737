use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neural_parts::config::RunConfig;
use neural_parts::geometry::{
    load_mesh, normalize_mesh, uv_sphere, Aabb, Fixture, InsideTester, NormalizeTransform, OccupancyPool, TriMesh,
};
use neural_parts::metrics::{evaluate, union_mesh};
use neural_parts::trainer::{checkpoint_dir, load_checkpoint, FitState, Trainer};
use neural_parts::{Error, Exec, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fit neural-part primitives to a watertight mesh and evaluate the result.
#[derive(Parser)]
#[command(name = "nparts", version)]
struct Cli {
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit M primitives to a mesh; writes a checkpoint, a log and the config echo.
    Fit(FitArgs),
    /// Evaluate a checkpoint against a mesh; prints the report and appends a CSV row.
    Eval(EvalArgs),
    /// Write one OBJ per primitive, optionally also the union surface.
    Export(ExportArgs),
    /// Build the occupancy pool cache of a mesh.
    Prepare(PrepareArgs),
    /// Write the built-in fixture meshes as OBJ files.
    Fixtures(FixturesArgs),
    /// Print a complete config file.
    Config(ConfigArgs),
}

#[derive(Args)]
struct MeshArgs {
    /// OBJ file, or `builtin:NAME` for sphere, cube, capsule or dumbbell.
    #[arg(long)]
    mesh: Option<String>,
    /// Use the mesh coordinates as they are instead of fitting the mesh into the unit cube.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    /// Number of primitives M [config default: 5].
    #[arg(long)]
    primitives: Option<usize>,
    /// Optimizer steps [config default: 1000].
    #[arg(long)]
    iters: Option<u64>,
    /// TOML config; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the desk preset (smaller network and batches) instead of the paper defaults.
    #[arg(long)]
    desk: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for initialization, sampling and ray casting [config default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Adam learning rate [config default: 1e-4].
    #[arg(long)]
    lr: Option<f64>,
    /// Continue from `<out>/checkpoint`.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    /// Checkpoint directory.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Uniform samples for the IoU estimate.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Surface samples per side for Chamfer-L1.
    #[arg(long, default_value_t = 10_000)]
    chamfer_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV summary to append to [default: summary.csv next to the checkpoint].
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Sphere tessellation as LATxLON.
    #[arg(long, default_value = "64x64")]
    resolution: String,
    #[arg(long)]
    out: PathBuf,
    /// Also write union.obj without the faces inside other primitives.
    #[arg(long)]
    union: bool,
}

#[derive(Args)]
struct PrepareArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    /// Number of uniform points in the unit cube.
    #[arg(long, default_value_t = 100_000)]
    pool: usize,
    /// Cache directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Print the desk preset instead of the paper defaults.
    #[arg(long)]
    desk: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 1,
        Error::NonFinite { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a, exec),
        Command::Eval(a) => cmd_eval(a, exec),
        Command::Export(a) => cmd_export(a),
        Command::Prepare(a) => cmd_prepare(a, exec),
        Command::Fixtures(a) => cmd_fixtures(a),
        Command::Config(a) => {
            let c = if a.desk { RunConfig::desk() } else { RunConfig::default() };
            print!("{}", c.to_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Loads a mesh; built-in fixtures are already in the unit cube and are
/// never rescaled.
fn resolve_mesh(spec: &str, normalize: bool) -> Result<(TriMesh, NormalizeTransform, String)> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let f = Fixture::from_name(name).ok_or_else(|| {
            Error::Usage(format!("unknown fixture `{name}` (sphere, cube, capsule, dumbbell)"))
        })?;
        return Ok((f.mesh(), NormalizeTransform::IDENTITY, name.to_string()));
    }
    let path = Path::new(spec);
    let mesh = load_mesh(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    if normalize {
        let (m, t) = normalize_mesh(&mesh)?;
        Ok((m, t, name))
    } else {
        Ok((mesh, NormalizeTransform::IDENTITY, name))
    }
}

fn mesh_spec(args: &MeshArgs, config: Option<&RunConfig>) -> Result<String> {
    args.mesh
        .clone()
        .or_else(|| config.and_then(|c| c.mesh.clone()))
        .ok_or_else(|| Error::Usage("--mesh is required".into()))
}

fn build_pool(mesh: &TriMesh, size: usize, seed: u64, exec: Exec) -> Result<OccupancyPool> {
    let tester = InsideTester::new(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    OccupancyPool::build(&tester, Aabb::unit_cube(), size, seed, &mut rng, exec)
}

fn write_json(path: &Path, text: &str) -> Result<()> {
    fs::write(path, format!("{text}\n")).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_fit(a: FitArgs, exec: Exec) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None if a.desk => RunConfig::desk(),
        None => RunConfig::default(),
    };
    if let Some(m) = a.primitives {
        cfg.fit.primitives = m;
    }
    if let Some(n) = a.iters {
        cfg.fit.iterations = n;
    }
    if let Some(s) = a.seed {
        cfg.fit.seed = s;
        cfg.eval.seed = s;
    }
    if let Some(lr) = a.lr {
        cfg.fit.learning_rate = lr;
    }
    if a.mesh.no_normalize {
        cfg.normalize = false;
    }
    let spec = mesh_spec(&a.mesh, Some(&cfg))?;
    cfg.mesh = Some(spec.clone());
    let out = a
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::Usage("--out is required".into()))?;
    cfg.out = Some(out.clone());
    cfg.validate()?;

    let (mesh, transform, _) = resolve_mesh(&spec, cfg.normalize)?;
    fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;

    let cache = cfg.occupancy_cache.clone().unwrap_or_else(|| out.join("occupancy"));
    let pool = if cache.join("occupancy.json").exists() {
        OccupancyPool::load(&cache)?
    } else {
        let p = build_pool(&mesh, cfg.pool_size, cfg.fit.seed, exec)?;
        p.save(&cache)?;
        p
    };

    let state = if a.resume {
        let (manifest, state) = load_checkpoint(&checkpoint_dir(&out))?;
        manifest.check_compatible(&cfg.fit)?;
        state
    } else {
        FitState::init(&cfg.fit)?
    };
    cfg.save(&out.join("config.toml"))?;
    let t_json = format!(
        "{{\"center\": {:?}, \"scale\": {:?}}}",
        transform.center, transform.scale
    );
    write_json(&out.join("normalize.json"), &t_json)?;

    let mut trainer = Trainer::resume(cfg.fit.clone(), &mesh, &pool, state).with_exec(exec);
    trainer.run(Some(&out))?;
    let l = trainer.state.loss;
    println!(
        "step {} total {:.6} (rec {:.6} occ {:.6} norm {:.6} overlap {:.6} cover {:.6})",
        trainer.state.step, l.total, l.rec, l.occ, l.norm, l.overlap, l.cover
    );
    println!("checkpoint written to {}", checkpoint_dir(&out).display());
    Ok(())
}

fn cmd_eval(a: EvalArgs, exec: Exec) -> Result<()> {
    let (_, state) = load_checkpoint(&a.checkpoint)?;
    let spec = mesh_spec(&a.mesh, None)?;
    let (mesh, _, name) = resolve_mesh(&spec, !a.mesh.no_normalize)?;
    let cfg = neural_parts::metrics::EvalConfig {
        iou_samples: a.samples,
        chamfer_samples: a.chamfer_samples,
        seed: a.seed,
        ..Default::default()
    };
    let report = evaluate(&state.model, &mesh, &name, &cfg, exec)?;
    let json = report.to_json();
    println!("{json}");
    if let Some(p) = &a.report {
        write_json(p, &json)?;
    }
    let csv = a.csv.clone().unwrap_or_else(|| {
        a.checkpoint
            .parent()
            .map(|p| p.join("summary.csv"))
            .unwrap_or_else(|| PathBuf::from("summary.csv"))
    });
    report.append_csv(&csv)
}

fn parse_resolution(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Usage(format!("invalid resolution `{s}`, expected LATxLON such as 64x64"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let lat = a.trim().parse().map_err(|_| bad())?;
    let lon = b.trim().parse().map_err(|_| bad())?;
    Ok((lat, lon))
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let (n_lat, n_lon) = parse_resolution(&a.resolution)?;
    let (_, state) = load_checkpoint(&a.checkpoint)?;
    let model = &state.model;
    let tess = uv_sphere(n_lat, n_lon, model.radius())?;
    fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    for m in 0..model.primitives() {
        let mesh = model.primitive_mesh(m, &tess)?;
        mesh.write_obj(&a.out.join(format!("primitive_{m:02}.obj")))?;
    }
    if a.union {
        let um = union_mesh(model, n_lat, n_lon)?;
        um.retained().write_obj(&a.out.join("union.obj"))?;
    }
    println!("wrote {} primitive meshes to {}", model.primitives(), a.out.display());
    Ok(())
}

fn cmd_prepare(a: PrepareArgs, exec: Exec) -> Result<()> {
    let spec = mesh_spec(&a.mesh, None)?;
    let (mesh, _, _) = resolve_mesh(&spec, !a.mesh.no_normalize)?;
    let pool = build_pool(&mesh, a.pool, a.seed, exec)?;
    pool.save(&a.out)?;
    println!(
        "{} points, inside fraction {:.5}, written to {}",
        pool.len(),
        pool.inside_fraction(),
        a.out.display()
    );
    Ok(())
}

fn cmd_fixtures(a: FixturesArgs) -> Result<()> {
    fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    for f in Fixture::ALL {
        f.mesh().write_obj(&a.out.join(format!("{}.obj", f.name())))?;
    }
    Ok(())
}
