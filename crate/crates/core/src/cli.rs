//! Command-line interface behind the `planeguide` binary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::evaluation::{format_table, run_benchmark, simulate_scan, BenchmarkConfig, TrajectoryConfig};
use crate::geometry::{norm3, rotation_angle_3d, sub3, Pose, SpDirection, SpId, StandardPlaneDef};
use crate::io::{
    decode_pgm, load_image, load_volume_with_planes, save_image, save_pgm, save_volume_with_planes, sidecar_path,
    ImageSidecar,
};
use crate::registration::{register_slice, RegistrationConfig};
use crate::volume::{generate_phantom, sample_slice, SliceImage, Volume, DEFAULT_SLICE_SIZE};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "planeguide", version, about = "Slice-to-volume registration and standard plane guidance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic head phantom with its standard planes.
    Phantom(PhantomArgs),
    /// Resample a slice of a volume at a pose.
    Slice(SliceArgs),
    /// Estimate the pose of a slice image inside a volume.
    Register(RegisterArgs),
    /// Simulate a sweep towards a standard plane.
    Simulate(SimulateArgs),
    /// Compare random planes, registration and registration with alignment.
    Benchmark(BenchmarkArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid size as W,H,D.
    #[arg(long, default_value = "64,64,64", value_parser = parse_dims)]
    pub dims: [usize; 3],
    /// Output payload (`.raw`); the sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[arg(long)]
    pub volume: PathBuf,
    /// Pose JSON (`{"q":[w,x,y,z],"delta":[x,y,z]}`), `@file` to read it from
    /// a file, or a standard plane name such as `TVP`.
    #[arg(long)]
    pub pose: String,
    #[arg(long, default_value_t = DEFAULT_SLICE_SIZE)]
    pub size: usize,
    /// `.pgm` writes the 8-bit image, anything else a raw float payload;
    /// both get a JSON sidecar carrying the pose.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub volume: PathBuf,
    /// `.pgm` or raw float image with sidecar.
    #[arg(long)]
    pub image: PathBuf,
    /// Registration settings as JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long, default_value = "TVP")]
    pub sp: SpId,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = TrajectoryConfig::default().steps)]
    pub steps: usize,
    /// Per-frame orientation jitter, degrees.
    #[arg(long, default_value_t = TrajectoryConfig::default().noise_deg)]
    pub noise_deg: f64,
    /// Multiplicative intensity noise on frames.
    #[arg(long, default_value_t = 0.0)]
    pub image_noise: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub scans: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Benchmark settings as JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON report path; the text table goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Volume to serve; without it every volume-backed endpoint answers 409.
    #[arg(long)]
    pub volume: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Allow cross-origin requests.
    #[arg(long)]
    pub cors: bool,
    /// Directory of static files served at `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split([',', 'x']).collect();
    if parts.len() != 3 {
        return Err(format!("expected W,H,D, got {s:?}"));
    }
    let mut dims = [0; 3];
    for (d, p) in dims.iter_mut().zip(parts) {
        *d = p.trim().parse().map_err(|_| format!("bad dimension {p:?}"))?;
    }
    Ok(dims)
}

/// Parses the CLI and runs it. Usage errors exit with 2, failures with 1.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom(a) => phantom(a),
        Command::Slice(a) => slice(a),
        Command::Register(a) => register(a),
        Command::Simulate(a) => simulate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Serve(a) => serve(a),
    }
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let (volume, planes) = generate_phantom(a.seed, a.dims)?;
    save_volume_with_planes(&volume, &planes, &a.out)?;
    println!("wrote {} ({}x{}x{})", a.out.display(), a.dims[0], a.dims[1], a.dims[2]);
    Ok(())
}

/// Reads a pose given inline as JSON, from `@file`, or as a standard plane name.
pub fn parse_pose_arg(arg: &str, planes: &[StandardPlaneDef]) -> Result<Pose> {
    if let Ok(id) = arg.parse::<SpId>() {
        return find_plane(planes, id).map(|sp| sp.pose(SpDirection::Pos));
    }
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        None => arg.to_string(),
    };
    let pose: Pose = serde_json::from_str(&text)?;
    pose.validate()?;
    Ok(pose)
}

pub fn find_plane(planes: &[StandardPlaneDef], id: SpId) -> Result<&StandardPlaneDef> {
    planes
        .iter()
        .find(|p| p.id == id)
        .ok_or_else(|| Error::InvalidArgument(format!("the volume defines no {id} plane")))
}

fn slice(a: SliceArgs) -> Result<()> {
    let (volume, planes) = load_volume_with_planes(&a.volume)?;
    let pose = parse_pose_arg(&a.pose, &planes)?;
    let image = sample_slice(&volume, &pose, a.size, a.size);
    write_slice(&image, &volume, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn write_slice(image: &SliceImage, volume: &Volume, out: &Path) -> Result<()> {
    if is_pgm(out) {
        save_pgm(image, out)?;
        let meta = ImageSidecar {
            dims: [image.width, image.height],
            name: volume.name.clone(),
            pose: image.pose,
        };
        let path = sidecar_path(out);
        fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))
    } else {
        save_image(image, &volume.name, out)
    }
}

/// Loads a `.pgm` or raw image together with the pose recorded in its sidecar, if any.
pub fn read_slice(path: &Path) -> Result<SliceImage> {
    if !is_pgm(path) {
        return load_image(path);
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut image = decode_pgm(&bytes)?;
    let side = sidecar_path(path);
    if side.exists() {
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: ImageSidecar = serde_json::from_str(&text)?;
        image.pose = meta.pose;
    }
    Ok(image)
}

fn read_json_file<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn register(a: RegisterArgs) -> Result<()> {
    let (volume, _) = load_volume_with_planes(&a.volume)?;
    let image = read_slice(&a.image)?;
    let mut cfg: RegistrationConfig = match &a.config {
        Some(path) => read_json_file(path)?,
        None => RegistrationConfig::default(),
    };
    if a.seed != 0 {
        cfg.orientation_seed = a.seed;
    }
    let result = register_slice(&volume, &image, &cfg)?;
    let mut report = json!({ "schema_version": SCHEMA_VERSION, "result": result });
    if let Some(truth) = image.pose {
        report["reference"] = json!({
            "pose": truth,
            "rotation_error_deg": rotation_angle_3d(truth.q, result.pose.q).to_degrees(),
            "translation_error": norm3(sub3(truth.delta, result.pose.delta)),
        });
    }
    emit(&report, a.out.as_deref())
}

#[derive(Debug, Serialize)]
pub struct ScanManifest {
    pub schema_version: u32,
    pub sp_index: usize,
    pub sp_id: SpId,
    pub probe_q: Vec<crate::geometry::Quaternion>,
    pub frame_rate_hz: f64,
    pub frames: Vec<String>,
    pub poses: Vec<Pose>,
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let (volume, planes) = load_volume_with_planes(&a.volume)?;
    let sp = find_plane(&planes, a.sp)?;
    let cfg = TrajectoryConfig {
        steps: a.steps,
        noise_deg: a.noise_deg,
        image_noise: a.image_noise,
        rng_seed: a.seed,
        ..TrajectoryConfig::default()
    };
    let (scan, poses) = simulate_scan(&volume, sp, &cfg)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut names = Vec::with_capacity(scan.len());
    for (i, frame) in scan.frames.iter().enumerate() {
        let name = format!("frame_{i:03}.raw");
        save_image(frame, &volume.name, a.out.join(&name))?;
        names.push(name);
    }
    let manifest = ScanManifest {
        schema_version: SCHEMA_VERSION,
        sp_index: scan.sp_index,
        sp_id: scan.sp_id,
        probe_q: scan.probe_q.clone().unwrap_or_default(),
        frame_rate_hz: scan.frame_rate_hz,
        frames: names,
        poses,
    };
    emit(&manifest, Some(&a.out.join("manifest.json")))?;
    println!("wrote {} frames to {}", scan.len(), a.out.display());
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let (volume, planes) = load_volume_with_planes(&a.volume)?;
    if planes.is_empty() {
        return Err(Error::InvalidArgument("the volume defines no standard planes".into()));
    }
    let mut cfg: BenchmarkConfig = match &a.config {
        Some(path) => read_json_file(path)?,
        None => BenchmarkConfig::default(),
    };
    cfg.seed = a.seed;
    let tables = run_benchmark(&volume, &planes, a.scans, &cfg)?;
    print!("{}", format_table(&tables));
    if let Some(out) = &a.out {
        emit(&json!({ "schema_version": SCHEMA_VERSION, "tables": tables }), Some(out))?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let loaded = match &a.volume {
        Some(path) => Some(load_volume_with_planes(path)?),
        None => None,
    };
    let options = crate::service::ServiceOptions {
        cors: a.cors,
        assets: a.assets,
        ..Default::default()
    };
    let addr = format!("{}:{}", a.host, a.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    runtime.block_on(crate::service::serve(&addr, loaded, options))
}
