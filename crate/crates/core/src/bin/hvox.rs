//! Command-line front end: validate formats, construct volumes from OBJ
//! meshes, render and query `.hvox` files, and run benchmark sweeps.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hybrid_voxel::bench::{self, Camera, Manifest};
use hybrid_voxel::buffer::{hvox_file_size, load_hvox, save_hvox};
use hybrid_voxel::construct::{construct_volume, ConstructOptions};
use hybrid_voxel::format::plan_from_signature;
use hybrid_voxel::intersect::{point_query, TraversalOptions};
use hybrid_voxel::math::vec3;
use hybrid_voxel::voxelizer::{load_mesh, ChunkedVoxelSource, DEFAULT_CHUNK_EXP};

#[derive(Parser)]
#[command(name = "hvox", about = "Hybrid voxel format toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a format signature.
    Validate {
        /// Format signature, e.g. "R(3, 3, 3) G(8)" or "D(4^3, 6) G(5)"
        format: String,
    },
    /// Voxelize a mesh and construct a volume.
    Construct {
        /// Wavefront OBJ triangle mesh
        mesh: PathBuf,
        /// Format signature
        format: String,
        /// Output .hvox path
        #[arg(short, long)]
        output: PathBuf,
        /// Share one SVDAG dedup map per level across sub-volumes
        #[arg(long)]
        whole_level_dedup: bool,
        /// log2 of the voxelizer chunk edge
        #[arg(long, default_value_t = DEFAULT_CHUNK_EXP)]
        chunk_exp: u32,
    },
    /// Render a volume to a binary PPM image.
    Render {
        /// Input .hvox volume
        volume: PathBuf,
        /// Output .ppm path
        #[arg(short, long)]
        output: PathBuf,
        /// Stackless restarting SVO/SVDAG traversal
        #[arg(long)]
        restart_sv: bool,
        #[command(flatten)]
        camera: CameraArgs,
    },
    /// Print the stored voxel at integer coordinates.
    Query {
        volume: PathBuf,
        x: u64,
        y: u64,
        z: u64,
    },
    /// Run a benchmark manifest and emit CSV.
    Bench {
        /// TOML manifest (models, runs, settings)
        manifest: PathBuf,
        /// Output CSV path
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct CameraArgs {
    #[arg(long, default_value_t = 512)]
    width: u32,
    #[arg(long, default_value_t = 512)]
    height: u32,
    #[arg(long, default_value_t = 45.0)]
    fov: f64,
    /// Camera position "x,y,z" (defaults to an automatic diagonal view)
    #[arg(long, value_parser = parse_vec3)]
    cam_pos: Option<[f64; 3]>,
    /// Look-at point "x,y,z" (defaults to the volume center)
    #[arg(long, value_parser = parse_vec3)]
    cam_target: Option<[f64; 3]>,
    /// Up vector "x,y,z"
    #[arg(long, value_parser = parse_vec3, default_value = "0,1,0")]
    cam_up: [f64; 3],
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected x,y,z".into());
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("{e}"))?;
    }
    Ok(out)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Validate { format } => {
            let plan = plan_from_signature(&format)?;
            println!("format:     {}", plan.signature());
            println!(
                "resolution: {} x {} x {}",
                plan.resolution[0], plan.resolution[1], plan.resolution[2]
            );
            for (i, level) in plan.levels.iter().enumerate() {
                println!(
                    "level {}:    {} (covers {}^3 voxels per entry)",
                    i + 1,
                    level,
                    plan.cover(i)
                );
            }
        }
        Command::Construct {
            mesh,
            format,
            output,
            whole_level_dedup,
            chunk_exp,
        } => {
            let plan = plan_from_signature(&format)?;
            let mesh = load_mesh(&mesh)?;
            let mut source = ChunkedVoxelSource::new(mesh, plan.resolution, chunk_exp)?;
            let (buffer, stats) = construct_volume(
                &plan,
                &mut source,
                ConstructOptions { whole_level_dedup },
            )?;
            save_hvox(&buffer, &plan, &output)?;
            println!(
                "wrote {} ({} bytes, {} words, peak construction memory {} bytes)",
                output.display(),
                hvox_file_size(&buffer, &plan),
                buffer.len(),
                stats.peak_mem_bytes
            );
        }
        Command::Render {
            volume,
            output,
            restart_sv,
            camera,
        } => {
            let (buffer, plan) = load_hvox(&volume)?;
            let mut cam = Camera::auto(plan.resolution, camera.width, camera.height);
            cam.fov_y_deg = camera.fov;
            if let Some([x, y, z]) = camera.cam_pos {
                cam.position = vec3(x, y, z);
            }
            if let Some([x, y, z]) = camera.cam_target {
                cam.look_at = vec3(x, y, z);
            }
            cam.up = vec3(camera.cam_up[0], camera.cam_up[1], camera.cam_up[2]);
            let img = bench::render(&buffer, &plan, &cam, TraversalOptions { restart_sv });
            img.write_ppm(&output)?;
            println!("wrote {}", output.display());
        }
        Command::Query { volume, x, y, z } => {
            let (buffer, plan) = load_hvox(&volume)?;
            let voxel = point_query(&buffer, &plan, x, y, z)?;
            let [r, g, b, a] = voxel.channels();
            println!("voxel ({x}, {y}, {z}): rgba({r}, {g}, {b}, {a}) word 0x{:08x}", voxel.0);
        }
        Command::Bench { manifest, output } => {
            let text = fs::read_to_string(&manifest)
                .with_context(|| format!("reading {}", manifest.display()))?;
            let manifest_dir = manifest.parent().map(PathBuf::from).unwrap_or_default();
            let manifest = Manifest::parse(&text)?;
            let mut records = Vec::new();
            for model in &manifest.models {
                let mesh_path = manifest_dir.join(&model.mesh);
                let mesh = load_mesh(&mesh_path)?;
                for run in &manifest.runs {
                    let plan = plan_from_signature(&run.format)?;
                    let mut source = ChunkedVoxelSource::new(
                        mesh.clone(),
                        plan.resolution,
                        manifest.settings.chunk_exp,
                    )?;
                    let record = bench::run_bench(
                        &model.name,
                        &plan,
                        &mut source,
                        run,
                        &manifest.settings,
                    )?;
                    eprintln!(
                        "{} / {}: {} bytes, {:.2} ms",
                        record.model, record.format, record.size_bytes, record.frame_ms_mean
                    );
                    records.push(record);
                }
            }
            let mut out = std::io::BufWriter::new(fs::File::create(&output)?);
            bench::write_csv(&records, &mut out)?;
            out.flush()?;
            if records.is_empty() {
                bail!("manifest produced no records");
            }
            println!("wrote {} ({} records)", output.display(), records.len());
        }
    }
    Ok(())
}
