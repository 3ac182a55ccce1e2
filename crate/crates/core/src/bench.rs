//! CPU renderer, timing and size measurement, Pareto-frontier extraction,
//! and CSV emission for memory-vs-performance sweeps.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::buffer::{hvox_file_size, VolumeBuffer};
use crate::construct::{construct_volume, ConstructError, ConstructOptions};
use crate::format::FormatPlan;
use crate::intersect::{intersect_root, Ray, TraversalOptions};
use crate::math::{vec3, Vec3};
use crate::voxelizer::VoxelSource;

/// Pinhole camera in volume (finest voxel) space.
#[derive(Copy, Clone, Debug)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_y_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    /// Deterministic default: looks at the volume center from a fixed
    /// diagonal offset scaled to the resolution.
    pub fn auto(resolution: [u64; 3], width: u32, height: u32) -> Camera {
        let center = vec3(
            resolution[0] as f64 / 2.0,
            resolution[1] as f64 / 2.0,
            resolution[2] as f64 / 2.0,
        );
        let span = resolution[0].max(resolution[1]).max(resolution[2]) as f64;
        Camera {
            position: center + vec3(1.0, 0.6, 1.2).normalized() * (1.6 * span),
            look_at: center,
            up: vec3(0.0, 1.0, 0.0),
            fov_y_deg: 45.0,
            width,
            height,
        }
    }

    /// Primary ray through pixel center (i, j), j growing downward.
    pub fn primary_ray(&self, i: u32, j: u32) -> Ray {
        let forward = (self.look_at - self.position).normalized();
        let right = forward.cross(self.up).normalized();
        let up = right.cross(forward);
        let tan = (self.fov_y_deg.to_radians() / 2.0).tan();
        let aspect = self.width as f64 / self.height as f64;
        let px = (2.0 * (i as f64 + 0.5) / self.width as f64 - 1.0) * tan * aspect;
        let py = (1.0 - 2.0 * (j as f64 + 0.5) / self.height as f64) * tan;
        Ray::new(
            self.position,
            forward + right * px + up * py,
            0.0,
            f64::INFINITY,
        )
    }
}

/// Row-major RGBA8 image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 4]>,
}

impl Image {
    /// Binary PPM (P6); the alpha channel is stripped.
    pub fn write_ppm(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        for p in &self.pixels {
            out.write_all(&p[..3])?;
        }
        out.flush()
    }
}

/// Render one frame: one primary ray per pixel, voxel color modulated by
/// a fixed headlight (|normal . ray dir|), background transparent black.
pub fn render(
    buffer: &VolumeBuffer,
    plan: &FormatPlan,
    camera: &Camera,
    options: TraversalOptions,
) -> Image {
    let width = camera.width;
    let mut pixels = vec![[0u8; 4]; (camera.width * camera.height) as usize];
    pixels
        .par_chunks_mut(width as usize)
        .enumerate()
        .for_each(|(j, row)| {
            for (i, px) in row.iter_mut().enumerate() {
                let ray = camera.primary_ray(i as u32, j as u32);
                if let Some(hit) = intersect_root(buffer, plan, &ray, options) {
                    let weight = hit.normal.dot(ray.dir).abs();
                    let [r, g, b, a] = hit.color.channels();
                    *px = [
                        (r as f64 * weight).round() as u8,
                        (g as f64 * weight).round() as u8,
                        (b as f64 * weight).round() as u8,
                        a,
                    ];
                }
            }
        });
    Image {
        width: camera.width,
        height: camera.height,
        pixels,
    }
}

/// Wall-clock statistics over `frames` full-frame renders after one
/// warm-up frame. Returns (mean ms, stddev ms).
pub fn time_render(
    buffer: &VolumeBuffer,
    plan: &FormatPlan,
    camera: &Camera,
    options: TraversalOptions,
    frames: u32,
) -> (f64, f64) {
    assert!(frames >= 1);
    render(buffer, plan, camera, options); // warm-up
    let mut times = Vec::with_capacity(frames as usize);
    for _ in 0..frames {
        let start = Instant::now();
        render(buffer, plan, camera, options);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mean = times.iter().sum::<f64>() / frames as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / frames as f64;
    (mean, var.sqrt())
}

/// All points not strictly dominated (another point <= on both axes and <
/// on at least one), sorted by size.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut frontier: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(size, time)| {
            !points.iter().any(|&(s, t)| {
                s <= size && t <= time && (s < size || t < time)
            })
        })
        .collect();
    frontier.sort_by(|a, b| a.partial_cmp(b).unwrap());
    frontier.dedup();
    frontier
}

/// Maximum bytes resident while constructing `plan` from `source`:
/// chunk cache + dedup maps + per-level working arrays. An accounting
/// measure, not OS RSS.
pub fn peak_construction_memory<S: VoxelSource>(
    plan: &FormatPlan,
    source: &mut S,
    options: ConstructOptions,
) -> Result<u64, ConstructError> {
    let (_, stats) = construct_volume(plan, source, options)?;
    Ok(stats.peak_mem_bytes)
}

/// One benchmark measurement.
#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub model: String,
    pub format: String,
    pub flags: String,
    pub size_bytes: u64,
    pub frame_ms_mean: f64,
    pub frame_ms_std: f64,
    pub peak_mem_bytes: u64,
}

pub const CSV_HEADER: &str =
    "model,format,flags,size_bytes,frame_ms_mean,frame_ms_std,peak_mem_bytes";

pub fn write_csv<W: Write>(records: &[BenchRecord], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},\"{}\",\"{}\",{},{:.3},{:.3},{}",
            r.model, r.format, r.flags, r.size_bytes, r.frame_ms_mean, r.frame_ms_std,
            r.peak_mem_bytes
        )?;
    }
    Ok(())
}

/// Benchmark manifest (TOML).
#[derive(Debug, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub settings: Settings,
    #[serde(rename = "model")]
    pub models: Vec<ModelSpec>,
    #[serde(rename = "run")]
    pub runs: Vec<RunSpec>,
}

#[derive(Debug, Deserialize)]
pub struct Settings {
    #[serde(default = "default_image_dim")]
    pub width: u32,
    #[serde(default = "default_image_dim")]
    pub height: u32,
    #[serde(default = "default_frames")]
    pub frames: u32,
    #[serde(default = "default_chunk_exp")]
    pub chunk_exp: u32,
}

fn default_image_dim() -> u32 {
    512
}

fn default_frames() -> u32 {
    16
}

fn default_chunk_exp() -> u32 {
    crate::voxelizer::DEFAULT_CHUNK_EXP
}

impl Default for Settings {
    fn default() -> Settings {
        Settings {
            width: default_image_dim(),
            height: default_image_dim(),
            frames: default_frames(),
            chunk_exp: default_chunk_exp(),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub mesh: String,
}

#[derive(Debug, Deserialize)]
pub struct RunSpec {
    pub format: String,
    #[serde(default)]
    pub whole_level_dedup: bool,
    #[serde(default)]
    pub restart_sv: bool,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Construct, measure, and time one (model, run) pair.
pub fn run_bench<S: VoxelSource>(
    model: &str,
    plan: &FormatPlan,
    source: &mut S,
    run: &RunSpec,
    settings: &Settings,
) -> Result<BenchRecord, ConstructError> {
    let options = ConstructOptions {
        whole_level_dedup: run.whole_level_dedup,
    };
    let (buffer, stats) = construct_volume(plan, source, options)?;
    let camera = Camera::auto(plan.resolution, settings.width, settings.height);
    let traversal = TraversalOptions {
        restart_sv: run.restart_sv,
    };
    let (mean, std) = time_render(&buffer, plan, &camera, traversal, settings.frames);
    let mut flags = Vec::new();
    if run.whole_level_dedup {
        flags.push("--whole-level-dedup");
    }
    if run.restart_sv {
        flags.push("--restart-sv");
    }
    Ok(BenchRecord {
        model: model.to_string(),
        format: plan.signature(),
        flags: flags.join(" "),
        size_bytes: hvox_file_size(&buffer, plan),
        frame_ms_mean: mean,
        frame_ms_std: std,
        peak_mem_bytes: stats.peak_mem_bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::Voxel;
    use crate::construct::{construct_volume, ConstructOptions};
    use crate::format::plan_from_signature;
    use crate::voxelizer::GridVoxelSource;
    use rand::{Rng, SeedableRng};

    #[test]
    fn empty_volume_renders_background() {
        let plan = plan_from_signature("S(4)").unwrap();
        let buf = VolumeBuffer::new();
        let camera = Camera::auto(plan.resolution, 32, 32);
        let img = render(&buf, &plan, &camera, TraversalOptions::default());
        assert!(img.pixels.iter().all(|p| *p == [0, 0, 0, 0]));
    }

    #[test]
    fn centered_voxel_lights_center_pixel() {
        let mut grid = GridVoxelSource::new([16, 16, 16]);
        let color = Voxel::rgba(200, 120, 40, 255);
        grid.set(8, 8, 8, color);
        let plan = plan_from_signature("S(4)").unwrap();
        let (buf, _) = construct_volume(&plan, &mut grid, ConstructOptions::default()).unwrap();
        let camera = Camera {
            position: vec3(8.5, 8.5, 40.0),
            look_at: vec3(8.5, 8.5, 8.5),
            up: vec3(0.0, 1.0, 0.0),
            fov_y_deg: 40.0,
            width: 33,
            height: 33,
        };
        let img = render(&buf, &plan, &camera, TraversalOptions::default());
        let center = img.pixels[(16 * 33 + 16) as usize];
        // +Z face, headlight straight on: weight ~ 1
        assert_eq!(center, [200, 120, 40, 255]);
        assert_eq!(img.pixels[0], [0, 0, 0, 0]);
    }

    #[test]
    fn plan_independence_of_rendered_image() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut grid = GridVoxelSource::new([16, 16, 16]);
        for v in grid.voxels.iter_mut() {
            if rng.gen_bool(0.1) {
                *v = Voxel(rng.gen::<u32>() | 0xff00_0000);
            }
        }
        let camera = Camera::auto([16, 16, 16], 48, 48);
        let reference: Option<Image> = None;
        let mut reference = reference;
        for sig in ["R(4, 4, 4)", "S(4)", "G(4)", "R(2, 2, 2) G(2)"] {
            let plan = plan_from_signature(sig).unwrap();
            let (buf, _) =
                construct_volume(&plan, &mut grid.clone(), ConstructOptions::default()).unwrap();
            let img = render(&buf, &plan, &camera, TraversalOptions::default());
            match &reference {
                None => reference = Some(img),
                Some(r) => assert_eq!(&img, r, "{sig}"),
            }
        }
    }

    #[test]
    fn render_deterministic() {
        let mut grid = GridVoxelSource::new([8, 8, 8]);
        grid.set(3, 4, 2, Voxel::rgba(9, 8, 7, 255));
        let plan = plan_from_signature("G(3)").unwrap();
        let (buf, _) = construct_volume(&plan, &mut grid, ConstructOptions::default()).unwrap();
        let camera = Camera::auto([8, 8, 8], 40, 40);
        let a = render(&buf, &plan, &camera, TraversalOptions::default());
        let b = render(&buf, &plan, &camera, TraversalOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn time_render_single_frame_has_zero_std() {
        let plan = plan_from_signature("S(3)").unwrap();
        let buf = VolumeBuffer::new();
        let camera = Camera::auto(plan.resolution, 16, 16);
        let (mean, std) = time_render(&buf, &plan, &camera, TraversalOptions::default(), 1);
        assert!(mean >= 0.0);
        assert_eq!(std, 0.0);
    }

    #[test]
    fn pareto_basic() {
        let pts = [(1.0, 10.0), (2.0, 5.0), (3.0, 6.0)];
        assert_eq!(pareto_frontier(&pts), vec![(1.0, 10.0), (2.0, 5.0)]);
        assert_eq!(pareto_frontier(&[(4.0, 4.0)]), vec![(4.0, 4.0)]);
    }

    #[test]
    fn pareto_matches_pairwise_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let pts: Vec<(f64, f64)> = (0..40)
                .map(|_| (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
                .collect();
            let frontier = pareto_frontier(&pts);
            // every excluded point is dominated by an included one
            for &p in &pts {
                let included = frontier.contains(&p);
                let dominated = pts
                    .iter()
                    .any(|&q| q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1));
                assert_eq!(included, !dominated, "{p:?}");
            }
            // antichain
            for &a in &frontier {
                for &b in &frontier {
                    if a != b {
                        assert!(!(a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)));
                    }
                }
            }
        }
    }

    #[test]
    fn manifest_parses() {
        let text = r#"
            [settings]
            width = 64
            height = 64
            frames = 2

            [[model]]
            name = "cube"
            mesh = "cube.obj"

            [[run]]
            format = "R(2^3) G(3)"
            whole_level_dedup = true
        "#;
        let m = Manifest::parse(text).unwrap();
        assert_eq!(m.settings.width, 64);
        assert_eq!(m.models[0].name, "cube");
        assert!(m.runs[0].whole_level_dedup);
        assert!(!m.runs[0].restart_sv);
    }

    #[test]
    fn csv_schema() {
        let rec = BenchRecord {
            model: "cube".into(),
            format: "G(5)".into(),
            flags: "--whole-level-dedup".into(),
            size_bytes: 1234,
            frame_ms_mean: 1.5,
            frame_ms_std: 0.1,
            peak_mem_bytes: 99,
        };
        let mut out = Vec::new();
        write_csv(&[rec], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.contains("cube,\"G(5)\",\"--whole-level-dedup\",1234,1.500,0.100,99"));
    }
}
