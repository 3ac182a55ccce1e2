//! Shared helpers and independent oracles for the integration suites.
//!
//! The oracles here deliberately re-derive results from first principles
//! (dense-grid stepping, pairwise scans) and share no traversal code with
//! the library.

// each test binary uses a different subset of these helpers
#![allow(dead_code)]

use hybrid_voxel::buffer::{Voxel, VolumeBuffer};
use hybrid_voxel::construct::{construct_volume, ConstructOptions};
use hybrid_voxel::format::{plan_from_signature, FormatPlan};
use hybrid_voxel::intersect::Ray;
use hybrid_voxel::math::{vec3, Vec3};
use hybrid_voxel::voxelizer::GridVoxelSource;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_grid(res: [u64; 3], fill: f64, seed: u64) -> GridVoxelSource {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = GridVoxelSource::new(res);
    for v in grid.voxels.iter_mut() {
        if rng.gen_bool(fill) {
            // alpha forced non-zero so no stored word is the empty sentinel
            *v = Voxel(rng.gen::<u32>() | 0xff00_0000);
        }
    }
    grid
}

pub fn random_ray(rng: &mut impl Rng, res: [u64; 3]) -> Ray {
    let span = res[0].max(res[1]).max(res[2]) as f64;
    let origin = vec3(
        rng.gen_range(-span..2.0 * span),
        rng.gen_range(-span..2.0 * span),
        rng.gen_range(-span..2.0 * span),
    );
    let target = vec3(
        rng.gen_range(0.0..res[0] as f64),
        rng.gen_range(0.0..res[1] as f64),
        rng.gen_range(0.0..res[2] as f64),
    );
    Ray::new(origin, target - origin, 0.0, 1e9)
}

/// Plans spanning every shape class at each corpus resolution.
pub fn corpus_plans(res: u64) -> Vec<&'static str> {
    match res {
        16 => vec![
            "R(4, 4, 4)",
            "D(4, 4, 4, 6)",
            "S(4)",
            "G(4)",
            "R(1, 1, 1) R(1, 1, 1) R(2, 2, 2)",
            "R(2, 2, 2) G(2)",
            "D(2, 2, 2, 4) G(2)",
            "S(2) G(2)",
            "R(2, 2, 2) S(2)",
            "D(2, 2, 2, 3) S(2)",
            "G(2) G(2)",
            "S(2) S(2)",
        ],
        32 => vec![
            "R(5, 5, 5)",
            "D(5, 5, 5, 6)",
            "S(5)",
            "G(5)",
            "R(1, 1, 1) R(2, 2, 2) R(2, 2, 2)",
            "R(2, 2, 2) G(3)",
            "D(3, 3, 3, 6) G(2)",
            "S(3) G(2)",
            "R(3, 3, 3) S(2)",
            "G(3) S(2)",
            "S(2) G(3)",
            "G(2) G(3)",
        ],
        _ => panic!("no corpus plans for resolution {res}"),
    }
}

pub struct CorpusVolume {
    pub signature: String,
    pub plan: FormatPlan,
    pub buffer: VolumeBuffer,
}

pub struct CorpusEntry {
    pub grid: GridVoxelSource,
    pub volumes: Vec<CorpusVolume>,
}

/// Ten random grids (16^3 and 32^3) built under every corpus plan.
pub fn build_corpus() -> Vec<CorpusEntry> {
    let mut corpus = Vec::new();
    for (i, (res, fill)) in [
        (16u64, 0.15),
        (16, 0.4),
        (16, 0.02),
        (16, 0.7),
        (16, 0.1),
        (16, 0.25),
        (32, 0.1),
        (32, 0.02),
        (32, 0.3),
        (32, 0.05),
    ]
    .iter()
    .enumerate()
    {
        let grid = random_grid([*res, *res, *res], *fill, 1000 + i as u64);
        let volumes = corpus_plans(*res)
            .iter()
            .map(|sig| {
                let plan = plan_from_signature(sig).unwrap();
                let (buffer, _) =
                    construct_volume(&plan, &mut grid.clone(), ConstructOptions::default())
                        .unwrap();
                CorpusVolume {
                    signature: sig.to_string(),
                    plan,
                    buffer,
                }
            })
            .collect();
        corpus.push(CorpusEntry { grid, volumes });
    }
    corpus
}

/// Independent uniform-grid DDA: steps the dense source grid cell by cell
/// from the ray's entry point and returns the first occupied voxel and its
/// entry parameter.
pub fn oracle_grid_dda(grid: &GridVoxelSource, ray: &Ray) -> Option<([u64; 3], f64)> {
    let res = grid.resolution;
    let lo = Vec3::ZERO;
    let hi = vec3(res[0] as f64, res[1] as f64, res[2] as f64);

    // entry into the volume box
    let mut t_enter = ray.t_min;
    let mut t_exit = ray.t_max;
    for a in 0..3 {
        let o = ray.origin.axis(a);
        let d = ray.dir.axis(a);
        if d == 0.0 {
            if o < lo.axis(a) || o > hi.axis(a) {
                return None;
            }
        } else {
            let t1 = (lo.axis(a) - o) / d;
            let t2 = (hi.axis(a) - o) / d;
            t_enter = t_enter.max(t1.min(t2));
            t_exit = t_exit.min(t1.max(t2));
        }
    }
    if t_enter > t_exit {
        return None;
    }

    let p = ray.at(t_enter);
    let mut cell = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut t_step = [f64::INFINITY; 3];
    let mut step = [0i64; 3];
    for a in 0..3 {
        let d = ray.dir.axis(a);
        let f = p.axis(a);
        let mut c = f.floor() as i64;
        if f == f.floor() && d < 0.0 {
            c -= 1;
        }
        cell[a] = c.clamp(0, res[a] as i64 - 1);
        if d != 0.0 {
            step[a] = if d > 0.0 { 1 } else { -1 };
            let boundary = if d > 0.0 { cell[a] + 1 } else { cell[a] };
            t_next[a] = (boundary as f64 - ray.origin.axis(a)) / d;
            t_step[a] = 1.0 / d.abs();
        }
    }

    let mut t_cur = t_enter;
    loop {
        let (x, y, z) = (cell[0] as u64, cell[1] as u64, cell[2] as u64);
        if !grid.get(x, y, z).is_empty() {
            return Some(([x, y, z], t_cur.max(ray.t_min)));
        }
        let mut axis = 0;
        if t_next[1] < t_next[axis] {
            axis = 1;
        }
        if t_next[2] < t_next[axis] {
            axis = 2;
        }
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= res[axis] as i64 {
            return None;
        }
        t_cur = t_next[axis];
        if t_cur > t_exit {
            return None;
        }
        t_next[axis] += t_step[axis];
    }
}

/// Pairwise L1 distance oracle, clamped to `m`.
pub fn oracle_l1(occ: &[bool], extent: [u64; 3], m: u32) -> Vec<u32> {
    let [w, h, d] = extent;
    let n = (w * h * d) as usize;
    let mut out = vec![m; n];
    for (i, d_min) in out.iter_mut().enumerate() {
        let i = i as u64;
        let (x, y, z) = (i % w, (i / w) % h, i / (w * h));
        for (j, &o) in occ.iter().enumerate() {
            if o {
                let j = j as u64;
                let (jx, jy, jz) = (j % w, (j / w) % h, j / (w * h));
                let dist = x.abs_diff(jx) + y.abs_diff(jy) + z.abs_diff(jz);
                *d_min = (*d_min).min(dist.min(m as u64) as u32);
            }
        }
    }
    out
}

/// Lat-long sphere mesh as OBJ text, for voxelizer-driven tests.
pub fn sphere_obj(rings: usize, segments: usize) -> String {
    use std::fmt::Write;
    let mut obj = String::new();
    for r in 0..=rings {
        let phi = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let theta = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            let (x, y, z) = (
                phi.sin() * theta.cos(),
                phi.cos(),
                phi.sin() * theta.sin(),
            );
            writeln!(obj, "v {x} {y} {z}").unwrap();
        }
    }
    let idx = |r: usize, s: usize| (r * segments + s % segments) + 1;
    for r in 0..rings {
        for s in 0..segments {
            writeln!(
                obj,
                "f {} {} {} {}",
                idx(r, s),
                idx(r, s + 1),
                idx(r + 1, s + 1),
                idx(r + 1, s)
            )
            .unwrap();
        }
    }
    obj
}
