//! Lazy, chunked triangle-mesh voxelization under a Morton-ordered access
//! contract.
//!
//! The construction code requests single voxels in non-decreasing Morton
//! order. The voxelizer keeps exactly one chunk resident; because Morton
//! order is hierarchical over power-of-two blocks, every voxel of a chunk is
//! requested before any voxel of the next chunk, so each chunk is voxelized
//! at most once per sweep.

use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::buffer::Voxel;
use crate::math::{vec3, Aabb, Vec3};
use crate::morton::encode3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face references vertex {index}, mesh has {count} vertices")]
    IndexOutOfRange { index: i64, count: usize },
    #[error("mesh bounding box has zero extent")]
    DegenerateBounds,
}

/// Triangle mesh with a flat per-triangle color.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub colors: Vec<Voxel>,
}

impl Mesh {
    pub fn aabb(&self) -> Option<Aabb> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        let mut lo = first;
        let mut hi = first;
        for &v in it {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Some(Aabb::new(lo, hi))
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }
}

/// Load an ASCII OBJ subset: `v x y z` positions, `f i j k...` faces
/// (triangulated by fan, 1-based indices, negative indices relative to the
/// end), and an optional `# color r g b a` directive (0-255 per channel)
/// applying to the faces that follow.
pub fn load_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<Mesh, MeshError> {
    let mut mesh = Mesh {
        vertices: Vec::new(),
        triangles: Vec::new(),
        colors: Vec::new(),
    };
    let mut current_color = Voxel::rgba(255, 255, 255, 255);

    for (line_no, raw) in text.lines().enumerate() {
        let line = line_no + 1;
        let trimmed = raw.trim();
        let mut fields = trimmed.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = fields.next().ok_or_else(|| MeshError::Parse {
                        line,
                        msg: "vertex needs 3 coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| MeshError::Parse {
                        line,
                        msg: format!("bad coordinate {tok:?}"),
                    })?;
                }
                mesh.vertices.push(vec3(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut indices = Vec::new();
                for tok in fields {
                    // accept v, v/vt, v/vt/vn, v//vn; only the position index is used
                    let pos = tok.split('/').next().unwrap();
                    let idx: i64 = pos.parse().map_err(|_| MeshError::Parse {
                        line,
                        msg: format!("bad face index {tok:?}"),
                    })?;
                    let count = mesh.vertices.len();
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        count as i64 + idx
                    } else {
                        return Err(MeshError::Parse {
                            line,
                            msg: "face index 0 (OBJ indices are 1-based)".into(),
                        });
                    };
                    if resolved < 0 || resolved as usize >= count {
                        return Err(MeshError::IndexOutOfRange { index: idx, count });
                    }
                    indices.push(resolved as u32);
                }
                if indices.len() < 3 {
                    return Err(MeshError::Parse {
                        line,
                        msg: "face needs at least 3 vertices".into(),
                    });
                }
                for i in 1..indices.len() - 1 {
                    mesh.triangles.push([indices[0], indices[i], indices[i + 1]]);
                    mesh.colors.push(current_color);
                }
            }
            Some("#") => {
                let rest: Vec<&str> = fields.collect();
                if rest.first() == Some(&"color") {
                    if rest.len() != 5 {
                        return Err(MeshError::Parse {
                            line,
                            msg: "# color needs 4 channels".into(),
                        });
                    }
                    let mut ch = [0u8; 4];
                    for (c, tok) in ch.iter_mut().zip(&rest[1..]) {
                        *c = tok.parse().map_err(|_| MeshError::Parse {
                            line,
                            msg: format!("bad color channel {tok:?}"),
                        })?;
                    }
                    current_color = Voxel::rgba(ch[0], ch[1], ch[2], ch[3]);
                }
            }
            _ => {} // vt, vn, o, g, comments: ignored
        }
    }
    Ok(mesh)
}

/// Uniform scale plus translation from model space into grid space.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GridTransform {
    pub scale: f64,
    pub offset: Vec3,
}

impl GridTransform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        p * self.scale + self.offset
    }
}

/// Fit the mesh AABB into the grid box with a one-voxel margin on all sides,
/// centered, preserving aspect.
pub fn fit_transform(mesh: &Mesh, resolution: [u64; 3]) -> Result<GridTransform, MeshError> {
    let aabb = mesh.aabb().ok_or(MeshError::DegenerateBounds)?;
    let extent = aabb.extent();
    let max_extent = extent.x.max(extent.y).max(extent.z);
    if max_extent <= 0.0 {
        return Err(MeshError::DegenerateBounds);
    }
    let mut scale = f64::INFINITY;
    for (axis, &res) in resolution.iter().enumerate() {
        let e = extent.axis(axis);
        if e > 0.0 {
            let inner = (res as f64 - 2.0).max(1.0);
            scale = scale.min(inner / e);
        }
    }
    let grid_center = vec3(
        resolution[0] as f64 / 2.0,
        resolution[1] as f64 / 2.0,
        resolution[2] as f64 / 2.0,
    );
    let offset = grid_center - aabb.center() * scale;
    Ok(GridTransform { scale, offset })
}

/// Separating-axis triangle/box overlap test against a closed box: 3 box
/// face normals, the triangle normal, and the 9 edge cross products.
/// Degenerate triangles fall out correctly (zero axes are skipped).
pub fn triangle_box_overlap(tri: [Vec3; 3], aabb: Aabb) -> bool {
    let center = aabb.center();
    let half = aabb.extent() * 0.5;
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];

    // box face normals
    for axis in 0..3 {
        let min = v[0].axis(axis).min(v[1].axis(axis)).min(v[2].axis(axis));
        let max = v[0].axis(axis).max(v[1].axis(axis)).max(v[2].axis(axis));
        if min > half.axis(axis) || max < -half.axis(axis) {
            return false;
        }
    }

    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // triangle normal
    let normal = edges[0].cross(edges[1]);
    if normal.dot(normal) > 0.0 {
        let d = normal.dot(v[0]);
        let r = half.x * normal.x.abs() + half.y * normal.y.abs() + half.z * normal.z.abs();
        if d.abs() > r {
            return false;
        }
    }

    // edge cross products
    for edge in edges {
        for axis in 0..3 {
            let mut a = Vec3::ZERO;
            a.set_axis((axis + 1) % 3, -edge.axis((axis + 2) % 3));
            a.set_axis((axis + 2) % 3, edge.axis((axis + 1) % 3));
            if a.dot(a) == 0.0 {
                continue;
            }
            let p = [a.dot(v[0]), a.dot(v[1]), a.dot(v[2])];
            let min = p[0].min(p[1]).min(p[2]);
            let max = p[0].max(p[1]).max(p[2]);
            let r = half.x * a.x.abs() + half.y * a.y.abs() + half.z * a.z.abs();
            if min > r || max < -r {
                return false;
            }
        }
    }
    true
}

/// A Morton-order-fed supplier of finest-level voxels.
pub trait VoxelSource {
    fn resolution(&self) -> [u64; 3];

    /// Voxel at `(x, y, z)`. Implementations may require non-decreasing
    /// Morton order across calls.
    fn sample(&mut self, x: u64, y: u64, z: u64) -> Voxel;

    /// Bytes of voxel payload currently resident, for memory accounting.
    fn resident_bytes(&self) -> usize {
        0
    }
}

/// One resident cube of voxelized data.
#[derive(Clone, Debug)]
pub struct VoxelChunk {
    pub origin: [u64; 3],
    pub extent: u64,
    pub voxels: Vec<Voxel>,
}

/// Lazily voxelizes a mesh one chunk at a time. At most one chunk is
/// resident; queries must arrive in non-decreasing Morton order.
pub struct ChunkedVoxelSource {
    mesh: Mesh,
    resolution: [u64; 3],
    transform: GridTransform,
    chunk_exp: u32,
    chunk: Option<VoxelChunk>,
    last_code: u64,
    first_query: bool,
    voxelizations: u64,
    distinct_chunks: std::collections::HashSet<u64>,
}

/// Default chunk edge: 64 voxels (1 MiB of words per chunk).
pub const DEFAULT_CHUNK_EXP: u32 = 6;

impl ChunkedVoxelSource {
    pub fn new(
        mesh: Mesh,
        resolution: [u64; 3],
        chunk_exp: u32,
    ) -> Result<ChunkedVoxelSource, MeshError> {
        let transform = fit_transform(&mesh, resolution)?;
        Ok(ChunkedVoxelSource {
            mesh,
            resolution,
            transform,
            chunk_exp,
            chunk: None,
            last_code: 0,
            first_query: true,
            voxelizations: 0,
            distinct_chunks: std::collections::HashSet::new(),
        })
    }

    pub fn transform(&self) -> GridTransform {
        self.transform
    }

    /// Number of chunk voxelizations performed so far.
    pub fn voxelizations(&self) -> u64 {
        self.voxelizations
    }

    /// Number of distinct chunks ever requested.
    pub fn distinct_chunks(&self) -> u64 {
        self.distinct_chunks.len() as u64
    }

    fn voxelize_chunk(&mut self, origin: [u64; 3]) -> VoxelChunk {
        let extent = 1u64 << self.chunk_exp;
        let mut voxels = vec![Voxel::EMPTY; (extent * extent * extent) as usize];
        let chunk_lo = vec3(origin[0] as f64, origin[1] as f64, origin[2] as f64);
        let chunk_hi = chunk_lo + Vec3::splat(extent as f64);

        for (tri_idx, _) in self.mesh.triangles.iter().enumerate() {
            let tri = self.mesh.triangle(tri_idx);
            let tri = [
                self.transform.apply(tri[0]),
                self.transform.apply(tri[1]),
                self.transform.apply(tri[2]),
            ];
            let lo = tri[0].min(tri[1]).min(tri[2]).max(chunk_lo);
            let hi = tri[0].max(tri[1]).max(tri[2]).min(chunk_hi);
            if lo.x > hi.x || lo.y > hi.y || lo.z > hi.z {
                continue;
            }
            let color = self.mesh.colors[tri_idx];
            // cells are closed boxes, so a triangle touching a cell face at
            // an integer coordinate overlaps both neighbors
            let x0 = (lo.x.ceil() as i64 - 1).max(origin[0] as i64) as u64;
            let y0 = (lo.y.ceil() as i64 - 1).max(origin[1] as i64) as u64;
            let z0 = (lo.z.ceil() as i64 - 1).max(origin[2] as i64) as u64;
            let x1 = (hi.x.floor() as u64 + 1).min(origin[0] + extent).min(self.resolution[0]);
            let y1 = (hi.y.floor() as u64 + 1).min(origin[1] + extent).min(self.resolution[1]);
            let z1 = (hi.z.floor() as u64 + 1).min(origin[2] + extent).min(self.resolution[2]);
            for z in z0..z1 {
                for y in y0..y1 {
                    for x in x0..x1 {
                        let li = ((x - origin[0])
                            + extent * ((y - origin[1]) + extent * (z - origin[2])))
                            as usize;
                        if !voxels[li].is_empty() {
                            continue; // lowest triangle index wins
                        }
                        let cell = Aabb::new(
                            vec3(x as f64, y as f64, z as f64),
                            vec3((x + 1) as f64, (y + 1) as f64, (z + 1) as f64),
                        );
                        if triangle_box_overlap(tri, cell) {
                            // never collide with the empty sentinel
                            voxels[li] = if color.is_empty() {
                                Voxel(0x0100_0000)
                            } else {
                                color
                            };
                        }
                    }
                }
            }
        }
        self.voxelizations += 1;
        VoxelChunk {
            origin,
            extent,
            voxels,
        }
    }
}

impl VoxelSource for ChunkedVoxelSource {
    fn resolution(&self) -> [u64; 3] {
        self.resolution
    }

    fn sample(&mut self, x: u64, y: u64, z: u64) -> Voxel {
        assert!(
            x < self.resolution[0] && y < self.resolution[1] && z < self.resolution[2],
            "voxel ({x}, {y}, {z}) outside resolution {:?}",
            self.resolution
        );
        let code = encode3(x, y, z);
        assert!(
            self.first_query || code >= self.last_code,
            "Morton-order contract violated: code {code} after {}",
            self.last_code
        );
        self.first_query = false;
        self.last_code = code;

        let origin = [
            x >> self.chunk_exp << self.chunk_exp,
            y >> self.chunk_exp << self.chunk_exp,
            z >> self.chunk_exp << self.chunk_exp,
        ];
        let needs_new = match &self.chunk {
            Some(c) => c.origin != origin,
            None => true,
        };
        if needs_new {
            self.distinct_chunks
                .insert(encode3(origin[0], origin[1], origin[2]));
            self.chunk = Some(self.voxelize_chunk(origin));
        }
        let chunk = self.chunk.as_ref().unwrap();
        let e = chunk.extent;
        let li = ((x - origin[0]) + e * ((y - origin[1]) + e * (z - origin[2]))) as usize;
        chunk.voxels[li]
    }

    fn resident_bytes(&self) -> usize {
        self.chunk
            .as_ref()
            .map(|c| c.voxels.len() * 4)
            .unwrap_or(0)
    }
}

/// Dense in-memory voxel source; accepts queries in any order. Used for
/// tests and procedural benchmark scenes.
#[derive(Clone, Debug)]
pub struct GridVoxelSource {
    pub resolution: [u64; 3],
    pub voxels: Vec<Voxel>,
}

impl GridVoxelSource {
    pub fn new(resolution: [u64; 3]) -> GridVoxelSource {
        let n = (resolution[0] * resolution[1] * resolution[2]) as usize;
        GridVoxelSource {
            resolution,
            voxels: vec![Voxel::EMPTY; n],
        }
    }

    pub fn index(&self, x: u64, y: u64, z: u64) -> usize {
        (x + self.resolution[0] * (y + self.resolution[1] * z)) as usize
    }

    pub fn get(&self, x: u64, y: u64, z: u64) -> Voxel {
        self.voxels[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: u64, y: u64, z: u64, v: Voxel) {
        let i = self.index(x, y, z);
        self.voxels[i] = v;
    }
}

impl VoxelSource for GridVoxelSource {
    fn resolution(&self) -> [u64; 3] {
        self.resolution
    }

    fn sample(&mut self, x: u64, y: u64, z: u64) -> Voxel {
        self.get(x, y, z)
    }

    fn resident_bytes(&self) -> usize {
        self.voxels.len() * 4
    }
}

/// Procedural voxel source backed by a pure function of the coordinates.
pub struct FnVoxelSource<F: Fn(u64, u64, u64) -> Voxel> {
    pub resolution: [u64; 3],
    pub f: F,
}

impl<F: Fn(u64, u64, u64) -> Voxel> FnVoxelSource<F> {
    pub fn new(resolution: [u64; 3], f: F) -> Self {
        FnVoxelSource { resolution, f }
    }
}

impl<F: Fn(u64, u64, u64) -> Voxel> VoxelSource for FnVoxelSource<F> {
    fn resolution(&self) -> [u64; 3] {
        self.resolution
    }

    fn sample(&mut self, x: u64, y: u64, z: u64) -> Voxel {
        (self.f)(x, y, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morton::morton_children;
    use rand::{Rng, SeedableRng};

    #[test]
    fn parse_minimal_obj() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert_eq!(mesh.triangles, vec![[0, 1, 2]]);
        assert_eq!(mesh.colors[0], Voxel::rgba(255, 255, 255, 255));
    }

    #[test]
    fn quad_fans_into_two_triangles() {
        let mesh =
            parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn zero_face_index_rejected() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 4, .. }));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = parse_obj("v 0 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { .. }));
    }

    #[test]
    fn color_directive_scopes_following_faces() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\n# color 10 20 30 255\nf 1 2 3\n";
        let mesh = parse_obj(obj).unwrap();
        assert_eq!(mesh.colors[0], Voxel::rgba(10, 20, 30, 255));
    }

    fn unit_cube() -> Mesh {
        parse_obj(concat!(
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n",
            "v 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n",
            "f 1 2 3 4\nf 5 6 7 8\nf 1 2 6 5\nf 4 3 7 8\nf 1 4 8 5\nf 2 3 7 6\n",
        ))
        .unwrap()
    }

    #[test]
    fn fit_unit_cube_into_16() {
        let t = fit_transform(&unit_cube(), [16, 16, 16]).unwrap();
        assert!((t.scale - 14.0).abs() < 1e-12);
        let lo = t.apply(vec3(0.0, 0.0, 0.0));
        let hi = t.apply(vec3(1.0, 1.0, 1.0));
        for axis in 0..3 {
            assert!((lo.axis(axis) - 1.0).abs() < 1e-12);
            assert!((hi.axis(axis) - 15.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_point_cloud_errors() {
        let mesh = parse_obj("v 1 2 3\nv 1 2 3\nv 1 2 3\nf 1 2 3\n").unwrap();
        assert!(matches!(
            fit_transform(&mesh, [16, 16, 16]),
            Err(MeshError::DegenerateBounds)
        ));
    }

    #[test]
    fn triangle_inside_box() {
        let tri = [vec3(0.2, 0.2, 0.5), vec3(0.8, 0.2, 0.5), vec3(0.5, 0.8, 0.5)];
        assert!(triangle_box_overlap(
            tri,
            Aabb::new(Vec3::ZERO, Vec3::splat(1.0))
        ));
    }

    #[test]
    fn triangle_beyond_face_plane() {
        let tri = [vec3(2.0, 0.0, 0.0), vec3(3.0, 0.0, 0.0), vec3(2.0, 1.0, 0.0)];
        assert!(!triangle_box_overlap(
            tri,
            Aabb::new(Vec3::ZERO, Vec3::splat(1.0))
        ));
    }

    // Sample-based oracle: sample points on the triangle densely and test
    // them against a slightly inflated / deflated box to stay clear of
    // boundary ambiguity.
    fn overlap_oracle(tri: [Vec3; 3], aabb: Aabb, margin: f64) -> Option<bool> {
        let steps = 60;
        let mut any_inside_outer = false;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let u = i as f64 / steps as f64;
                let v = j as f64 / steps as f64;
                let p = tri[0] * (1.0 - u - v) + tri[1] * u + tri[2] * v;
                let inner = Aabb::new(aabb.lo + Vec3::splat(margin), aabb.hi - Vec3::splat(margin));
                let outer = Aabb::new(aabb.lo - Vec3::splat(margin), aabb.hi + Vec3::splat(margin));
                if inner.contains(p) {
                    return Some(true);
                }
                if outer.contains(p) {
                    any_inside_outer = true;
                }
            }
        }
        if any_inside_outer {
            None // too close to the boundary to decide by sampling
        } else {
            Some(false)
        }
    }

    #[test]
    fn overlap_matches_sampling_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut decided = 0;
        for _ in 0..10_000 {
            let mut p = || {
                vec3(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                )
            };
            let tri = [p(), p(), p()];
            let aabb = Aabb::new(Vec3::splat(-0.75), Vec3::splat(0.75));
            if let Some(expected) = overlap_oracle(tri, aabb, 0.05) {
                decided += 1;
                assert_eq!(
                    triangle_box_overlap(tri, aabb),
                    expected,
                    "tri {tri:?} vs {aabb:?}"
                );
            }
        }
        assert!(decided > 5_000);
    }

    #[test]
    fn single_voxel_triangle() {
        // small triangle strictly inside voxel (5, 5, 5) of a 16^3 grid,
        // placed in grid units via an identity-like mesh
        let mesh = parse_obj("v 5.3 5.3 5.5\nv 5.7 5.3 5.5\nv 5.5 5.7 5.5\nf 1 2 3\n").unwrap();
        let mut grid = GridVoxelSource::new([16, 16, 16]);
        let t = GridTransform {
            scale: 1.0,
            offset: Vec3::ZERO,
        };
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    let cell = Aabb::new(
                        vec3(x as f64, y as f64, z as f64),
                        vec3((x + 1) as f64, (y + 1) as f64, (z + 1) as f64),
                    );
                    if triangle_box_overlap(
                        [
                            t.apply(mesh.triangle(0)[0]),
                            t.apply(mesh.triangle(0)[1]),
                            t.apply(mesh.triangle(0)[2]),
                        ],
                        cell,
                    ) {
                        grid.set(x, y, z, Voxel::rgba(255, 255, 255, 255));
                    }
                }
            }
        }
        for z in 0..16u64 {
            for y in 0..16u64 {
                for x in 0..16u64 {
                    assert_eq!(!grid.get(x, y, z).is_empty(), (x, y, z) == (5, 5, 5));
                }
            }
        }
    }

    #[test]
    fn chunked_matches_brute_force() {
        // icosphere-ish: an octahedron subdivision stand-in built from a
        // few triangles is enough to exercise chunk traversal
        let mesh = unit_cube();
        let res = [32u64, 32, 32];
        let mut source = ChunkedVoxelSource::new(mesh.clone(), res, 3).unwrap();
        let t = source.transform();

        // brute-force full-grid voxelization oracle
        let mut expected = GridVoxelSource::new(res);
        for z in 0..res[2] {
            for y in 0..res[1] {
                for x in 0..res[0] {
                    let cell = Aabb::new(
                        vec3(x as f64, y as f64, z as f64),
                        vec3((x + 1) as f64, (y + 1) as f64, (z + 1) as f64),
                    );
                    for i in 0..mesh.triangles.len() {
                        let tri = mesh.triangle(i);
                        let tri = [t.apply(tri[0]), t.apply(tri[1]), t.apply(tri[2])];
                        if triangle_box_overlap(tri, cell) {
                            expected.set(x, y, z, mesh.colors[i]);
                            break;
                        }
                    }
                }
            }
        }

        for (x, y, z) in morton_children([5, 5, 5]) {
            assert_eq!(
                source.sample(x, y, z),
                expected.get(x, y, z),
                "voxel ({x}, {y}, {z})"
            );
        }
        // chunk residency: one sweep voxelizes each requested chunk once
        assert_eq!(source.voxelizations(), source.distinct_chunks());
        assert_eq!(source.resident_bytes(), 8 * 8 * 8 * 4);
    }

    #[test]
    #[should_panic(expected = "Morton-order contract violated")]
    fn morton_order_violation_fails_fast() {
        let mut source = ChunkedVoxelSource::new(unit_cube(), [16, 16, 16], 2).unwrap();
        source.sample(5, 5, 5);
        source.sample(0, 0, 0);
    }

    #[test]
    fn empty_mesh_all_empty() {
        let mesh = Mesh {
            vertices: vec![Vec3::ZERO, vec3(1.0, 0.0, 0.0), vec3(0.0, 1.0, 0.0)],
            triangles: vec![],
            colors: vec![],
        };
        let mut source = ChunkedVoxelSource::new(mesh, [16, 16, 16], 2).unwrap();
        for (x, y, z) in morton_children([4, 4, 4]) {
            assert!(source.sample(x, y, z).is_empty());
        }
    }
}
