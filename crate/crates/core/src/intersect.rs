//! First-hit ray traversal through any format plan over a volume buffer,
//! plus a structural point query used as a testing oracle.
//!
//! One intersection routine per level kind: raw and DF levels step cell to
//! cell with the Amanatides-Woo DDA (DF levels skip `d` steps after reading
//! a stored L1 distance `d`); SVO and SVDAG levels visit children in entry-t
//! order, either with an explicit stack or by restarting from the sub-volume
//! root for every lookup. World units are finest-level voxels.

use thiserror::Error;

use crate::buffer::{SvMasks, Voxel, VolumeBuffer};
use crate::format::{FormatPlan, LevelDesc};
use crate::math::{vec3, Vec3};

/// Direction components smaller than this are treated as exactly zero.
pub const DIR_EPSILON: f64 = 1e-12;

/// Restart-mode nudge past an exited box: 2^-16 of one finest voxel.
pub const RESTART_EPSILON: f64 = 1.0 / 65536.0;

#[derive(Copy, Clone, Debug)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    /// Normalizes the direction and snaps near-zero components to zero.
    pub fn new(origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Ray {
        let mut dir = dir.normalized();
        for axis in 0..3 {
            if dir.axis(axis).abs() < DIR_EPSILON {
                dir.set_axis(axis, 0.0);
            }
        }
        Ray {
            origin,
            dir: dir.normalized(),
            t_min,
            t_max,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// First-intersection result.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Hit {
    pub color: Voxel,
    /// Finest-level integer coordinates of the hit voxel.
    pub voxel: [u64; 3],
    /// Ray parameter at the voxel entry (clamped to `t_min`).
    pub t: f64,
    /// Axis-aligned unit normal of the entered face.
    pub normal: Vec3,
}

#[derive(Copy, Clone, Debug, Default)]
pub struct TraversalOptions {
    /// Stackless restarting traversal for SVO/SVDAG levels.
    pub restart_sv: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("coordinate ({x}, {y}, {z}) outside resolution {resolution:?}")]
    OutOfRange {
        x: u64,
        y: u64,
        z: u64,
        resolution: [u64; 3],
    },
}

/// Slab-method ray/box intersection. Returns entry t, exit t, and the axis
/// whose plane the ray enters through.
fn slab(ray: &Ray, lo: Vec3, hi: Vec3) -> Option<(f64, f64, usize)> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut axis = 0;
    for a in 0..3 {
        let o = ray.origin.axis(a);
        let d = ray.dir.axis(a);
        if d == 0.0 {
            if o < lo.axis(a) || o > hi.axis(a) {
                return None;
            }
        } else {
            let inv = 1.0 / d;
            let (ta, tb) = {
                let ta = (lo.axis(a) - o) * inv;
                let tb = (hi.axis(a) - o) * inv;
                if ta <= tb {
                    (ta, tb)
                } else {
                    (tb, ta)
                }
            };
            if ta > t_enter {
                t_enter = ta;
                axis = a;
            }
            t_exit = t_exit.min(tb);
        }
    }
    (t_enter <= t_exit).then_some((t_enter, t_exit, axis))
}

fn face_normal(axis: usize, ray: &Ray) -> Vec3 {
    let mut n = Vec3::ZERO;
    n.set_axis(axis, if ray.dir.axis(axis) >= 0.0 { -1.0 } else { 1.0 });
    n
}

/// First (minimum-t) non-empty finest-level voxel pierced by the ray.
pub fn intersect_root(
    buffer: &VolumeBuffer,
    plan: &FormatPlan,
    ray: &Ray,
    options: TraversalOptions,
) -> Option<Hit> {
    let root = buffer.root();
    if root == 0 {
        return None;
    }
    let res = vec3(
        plan.resolution[0] as f64,
        plan.resolution[1] as f64,
        plan.resolution[2] as f64,
    );
    slab(ray, Vec3::ZERO, res)?;
    let tracer = Tracer {
        buf: buffer,
        plan,
        options,
    };
    tracer.intersect_sub(0, root, [0, 0, 0], ray)
}

struct Tracer<'a> {
    buf: &'a VolumeBuffer,
    plan: &'a FormatPlan,
    options: TraversalOptions,
}

impl Tracer<'_> {
    fn is_last(&self, k: usize) -> bool {
        k + 1 == self.plan.num_levels()
    }

    fn intersect_sub(&self, k: usize, ptr: u32, lower: [u64; 3], ray: &Ray) -> Option<Hit> {
        match self.plan.levels[k] {
            LevelDesc::Raw { .. } => self.dda_level(k, ptr, lower, ray, false),
            LevelDesc::Df { .. } => self.dda_level(k, ptr, lower, ray, true),
            LevelDesc::Svo { depth } | LevelDesc::Svdag { depth } => {
                if self.options.restart_sv {
                    self.traverse_sv_restart(k, ptr, lower, ray, depth)
                } else {
                    self.traverse_sv_stack(k, ptr, lower, ray, depth)
                }
            }
        }
    }

    /// Resolve a terminating integer: at the last level it is the hit voxel,
    /// above it the next level's sub-volume.
    fn resolve_term(
        &self,
        k: usize,
        term: u32,
        cell_lower: [u64; 3],
        t_entry: f64,
        entry_axis: usize,
        ray: &Ray,
    ) -> Option<Hit> {
        if self.is_last(k) {
            Some(Hit {
                color: Voxel(term),
                voxel: cell_lower,
                t: t_entry.max(ray.t_min),
                normal: face_normal(entry_axis, ray),
            })
        } else {
            self.intersect_sub(k + 1, term, cell_lower, ray)
        }
    }

    fn dda_level(&self, k: usize, base: u32, lower: [u64; 3], ray: &Ray, df: bool) -> Option<Hit> {
        let log2 = self.plan.levels[k].log2_extent();
        let ext = [1i64 << log2[0], 1i64 << log2[1], 1i64 << log2[2]];
        let cover = self.plan.cover(k);
        let cs = cover as f64;
        let lo = vec3(lower[0] as f64, lower[1] as f64, lower[2] as f64);
        let hi = lo
            + vec3(
                ext[0] as f64 * cs,
                ext[1] as f64 * cs,
                ext[2] as f64 * cs,
            );

        let (t_enter, t_exit, enter_axis) = slab(ray, lo, hi)?;
        let t0 = t_enter.max(ray.t_min);
        let t1 = t_exit.min(ray.t_max);
        if t0 > t1 {
            return None;
        }

        let p = ray.at(t0);
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_next = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let d = ray.dir.axis(a);
            // half-open cells in the direction of travel
            let f = (p.axis(a) - lo.axis(a)) / cs;
            let mut c = f.floor();
            if c == f && d < 0.0 {
                c -= 1.0;
            }
            cell[a] = (c as i64).clamp(0, ext[a] - 1);
            if d > 0.0 {
                step[a] = 1;
                t_next[a] = (lo.axis(a) + (cell[a] + 1) as f64 * cs - ray.origin.axis(a)) / d;
                t_delta[a] = cs / d;
            } else if d < 0.0 {
                step[a] = -1;
                t_next[a] = (lo.axis(a) + cell[a] as f64 * cs - ray.origin.axis(a)) / d;
                t_delta[a] = -cs / d;
            }
        }

        let mut t_cur = t0;
        let mut last_axis = enter_axis;
        let mut skip = 0u32;
        loop {
            if skip == 0 {
                let idx = (cell[0] + ext[0] * (cell[1] + ext[1] * cell[2])) as u64;
                let term = if df {
                    self.buf.get(VolumeBuffer::df_entry(base, idx).0)
                } else {
                    self.buf.get(VolumeBuffer::raw_entry(base, idx))
                };
                if term != 0 {
                    let cell_lower = [
                        lower[0] + cell[0] as u64 * cover,
                        lower[1] + cell[1] as u64 * cover,
                        lower[2] + cell[2] as u64 * cover,
                    ];
                    if let Some(hit) = self.resolve_term(k, term, cell_lower, t_cur, last_axis, ray)
                    {
                        return Some(hit);
                    }
                } else if df {
                    // d >= 1 voxels can be marched through before the next
                    // occupancy test
                    let dist = self.buf.get(VolumeBuffer::df_entry(base, idx).1);
                    skip = dist.saturating_sub(1);
                }
            } else {
                skip -= 1;
            }

            // advance the axis with the nearest crossing; ties break toward
            // the smallest axis index
            let mut axis = 0;
            for a in 1..3 {
                if t_next[a] < t_next[axis] {
                    axis = a;
                }
            }
            cell[axis] += step[axis];
            if cell[axis] < 0 || cell[axis] >= ext[axis] {
                return None;
            }
            debug_assert!(t_next[axis] >= t_cur);
            t_cur = t_next[axis];
            if t_cur > t1 {
                return None;
            }
            t_next[axis] += t_delta[axis];
            last_axis = axis;
        }
    }

    /// Gather the valid children of a sparse node: (octant, payload, leaf).
    /// For leaves the payload is the terminating integer itself, otherwise
    /// the child node offset.
    fn sv_children(&self, k: usize, off: u32, out: &mut Vec<(u8, u32, bool)>) {
        out.clear();
        match self.plan.levels[k] {
            LevelDesc::Svo { .. } => {
                let node = self.buf.read_svo_node(off as u64).expect("node in range");
                for octant in 0..8u8 {
                    if node.masks.has_child(octant) {
                        let child_off = node.child_offset(octant);
                        if node.masks.is_leaf(octant) {
                            out.push((octant, self.buf.get(child_off as u64), true));
                        } else {
                            out.push((octant, child_off, false));
                        }
                    }
                }
            }
            _ => {
                let masks = SvMasks::unpack(self.buf.get(off as u64));
                for octant in 0..8u8 {
                    if masks.has_child(octant) {
                        let ptr = self.buf.get(off as u64 + 1 + masks.rank(octant) as u64);
                        if masks.is_leaf(octant) {
                            // SVDAG leaves are single-word nodes
                            out.push((octant, self.buf.get(ptr as u64), true));
                        } else {
                            out.push((octant, ptr, false));
                        }
                    }
                }
            }
        }
    }

    fn traverse_sv_stack(
        &self,
        k: usize,
        root: u32,
        lower: [u64; 3],
        ray: &Ray,
        depth: u32,
    ) -> Option<Hit> {
        let cover = self.plan.cover(k);
        let root_size = cover << depth;
        let lo = vec3(lower[0] as f64, lower[1] as f64, lower[2] as f64);
        let (t_enter, t_exit, axis) = slab(ray, lo, lo + Vec3::splat(root_size as f64))?;
        if t_enter > ray.t_max || t_exit < ray.t_min {
            return None;
        }

        struct Frame {
            payload: u32,
            leaf: bool,
            cell: [u64; 3],
            /// size of this node's box in finest voxels
            size: u64,
            t: f64,
            axis: usize,
        }
        let mut stack: Vec<Frame> = Vec::with_capacity(8 * depth as usize + 1);
        stack.push(Frame {
            payload: root,
            leaf: false,
            cell: lower,
            size: root_size,
            t: t_enter,
            axis,
        });
        let mut children = Vec::with_capacity(8);
        let mut hits: Vec<Frame> = Vec::with_capacity(8);

        while let Some(frame) = stack.pop() {
            if frame.leaf {
                if let Some(hit) =
                    self.resolve_term(k, frame.payload, frame.cell, frame.t, frame.axis, ray)
                {
                    return Some(hit);
                }
                continue;
            }
            debug_assert!(frame.size > cover, "stack descended past max depth");
            let half = frame.size / 2;
            self.sv_children(k, frame.payload, &mut children);
            hits.clear();
            for &(octant, payload, leaf) in children.iter() {
                let cell = [
                    frame.cell[0] + (octant & 1) as u64 * half,
                    frame.cell[1] + ((octant >> 1) & 1) as u64 * half,
                    frame.cell[2] + ((octant >> 2) & 1) as u64 * half,
                ];
                let lo = vec3(cell[0] as f64, cell[1] as f64, cell[2] as f64);
                if let Some((t_enter, t_exit, axis)) =
                    slab(ray, lo, lo + Vec3::splat(half as f64))
                {
                    if t_enter <= ray.t_max && t_exit >= ray.t_min {
                        hits.push(Frame {
                            payload,
                            leaf,
                            cell,
                            size: half,
                            t: t_enter,
                            axis,
                        });
                    }
                }
            }
            // visit in increasing entry t; ties break by octant order, which
            // is the order sv_children produced
            hits.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
            while let Some(h) = hits.pop() {
                stack.push(h);
            }
        }
        None
    }

    fn traverse_sv_restart(
        &self,
        k: usize,
        root: u32,
        lower: [u64; 3],
        ray: &Ray,
        depth: u32,
    ) -> Option<Hit> {
        let cover = self.plan.cover(k);
        let root_size = cover << depth;
        let lo = vec3(lower[0] as f64, lower[1] as f64, lower[2] as f64);
        let hi = lo + Vec3::splat(root_size as f64);
        let (t_enter, t_exit, _) = slab(ray, lo, hi)?;
        let t_end = t_exit.min(ray.t_max);
        let mut t = t_enter.max(ray.t_min);

        loop {
            if t > t_end {
                return None;
            }
            let p = ray.at(t + RESTART_EPSILON);
            if !crate::math::Aabb::new(lo, hi).contains(p) {
                return None;
            }

            // descend from the sub-volume root to the deepest node
            // containing p
            let mut node = root;
            let mut cell = lower;
            let mut size = root_size;
            let mut children = Vec::with_capacity(8);
            'descend: loop {
                let half = size / 2;
                self.sv_children(k, node, &mut children);
                let octant = (p.x >= (cell[0] + half) as f64) as u8
                    | ((p.y >= (cell[1] + half) as f64) as u8) << 1
                    | ((p.z >= (cell[2] + half) as f64) as u8) << 2;
                let child_cell = [
                    cell[0] + (octant & 1) as u64 * half,
                    cell[1] + ((octant >> 1) & 1) as u64 * half,
                    cell[2] + ((octant >> 2) & 1) as u64 * half,
                ];
                let child_lo = vec3(
                    child_cell[0] as f64,
                    child_cell[1] as f64,
                    child_cell[2] as f64,
                );
                let child_box = slab(ray, child_lo, child_lo + Vec3::splat(half as f64));
                match children.iter().find(|c| c.0 == octant) {
                    None => {
                        // empty octant: skip its whole box
                        let (_, exit, _) = child_box.expect("p is inside the child box");
                        t = exit.max(t);
                        break 'descend;
                    }
                    Some(&(_, payload, leaf)) => {
                        if leaf {
                            let (entry, exit, axis) = child_box.expect("p is inside the leaf box");
                            if let Some(hit) =
                                self.resolve_term(k, payload, child_cell, entry, axis, ray)
                            {
                                return Some(hit);
                            }
                            t = exit.max(t);
                            break 'descend;
                        }
                        node = payload;
                        cell = child_cell;
                        size = half;
                    }
                }
            }
        }
    }
}

/// Stored voxel at finest-level coordinates, by structural descent.
pub fn point_query(
    buffer: &VolumeBuffer,
    plan: &FormatPlan,
    x: u64,
    y: u64,
    z: u64,
) -> Result<Voxel, QueryError> {
    if x >= plan.resolution[0] || y >= plan.resolution[1] || z >= plan.resolution[2] {
        return Err(QueryError::OutOfRange {
            x,
            y,
            z,
            resolution: plan.resolution,
        });
    }
    let mut ptr = buffer.root();
    let mut rel = [x, y, z];
    for k in 0..plan.num_levels() {
        if ptr == 0 {
            return Ok(Voxel::EMPTY);
        }
        let cover = plan.cover(k);
        let local = [rel[0] / cover, rel[1] / cover, rel[2] / cover];
        rel = [rel[0] % cover, rel[1] % cover, rel[2] % cover];
        let term = match plan.levels[k] {
            LevelDesc::Raw { w, h, .. } => {
                let idx = local[0] + (1u64 << w) * (local[1] + (1u64 << h) * local[2]);
                buffer.get(VolumeBuffer::raw_entry(ptr, idx))
            }
            LevelDesc::Df { w, h, .. } => {
                let idx = local[0] + (1u64 << w) * (local[1] + (1u64 << h) * local[2]);
                buffer.get(VolumeBuffer::df_entry(ptr, idx).0)
            }
            LevelDesc::Svo { depth } => {
                let mut off = ptr;
                let mut term = 0;
                for d in (0..depth).rev() {
                    let octant = (((local[0] >> d) & 1)
                        | ((local[1] >> d) & 1) << 1
                        | ((local[2] >> d) & 1) << 2) as u8;
                    let node = buffer.read_svo_node(off as u64).expect("node in range");
                    if !node.masks.has_child(octant) {
                        return Ok(Voxel::EMPTY);
                    }
                    let child = node.child_offset(octant);
                    if node.masks.is_leaf(octant) {
                        term = buffer.get(child as u64);
                    } else {
                        off = child;
                    }
                }
                term
            }
            LevelDesc::Svdag { depth } => {
                let mut off = ptr;
                let mut term = 0;
                for d in (0..depth).rev() {
                    let octant = (((local[0] >> d) & 1)
                        | ((local[1] >> d) & 1) << 1
                        | ((local[2] >> d) & 1) << 2) as u8;
                    let masks = SvMasks::unpack(buffer.get(off as u64));
                    if !masks.has_child(octant) {
                        return Ok(Voxel::EMPTY);
                    }
                    let child = buffer.get(off as u64 + 1 + masks.rank(octant) as u64);
                    if masks.is_leaf(octant) {
                        term = buffer.get(child as u64);
                    } else {
                        off = child;
                    }
                }
                term
            }
        };
        if term == 0 || k + 1 == plan.num_levels() {
            return Ok(Voxel(term));
        }
        ptr = term;
    }
    unreachable!("plans have at least one level")
}
