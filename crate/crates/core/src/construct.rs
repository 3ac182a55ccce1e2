//! Bottom-up, out-of-core construction of a volume buffer for any format
//! plan from a Morton-ordered voxel source.
//!
//! One recursive constructor per level: raw and DF levels iterate their
//! children in Morton order and emit a flat array once all children are
//! recorded; SVO and SVDAG levels consume children through one 8-slot queue
//! per depth, emitting contiguous non-empty children whenever a queue fills.
//! Children are always written before their parents, so every stored offset
//! points backwards in the buffer. Word 0 is patched with the root offset at
//! the end.

use std::collections::HashMap;
use thiserror::Error;

use crate::buffer::{BufferError, SvMasks, VolumeBuffer};
use crate::format::{FormatPlan, LevelDesc};
use crate::morton::{decode3, morton_children};
use crate::voxelizer::VoxelSource;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error("plan resolution {plan:?} does not match source resolution {supplied:?}")]
    ResolutionMismatch { plan: [u64; 3], supplied: [u64; 3] },
}

#[derive(Copy, Clone, Debug, Default)]
pub struct ConstructOptions {
    /// Share one SVDAG de-duplication map across all sub-volumes of a level
    /// instead of one map per sub-volume.
    pub whole_level_dedup: bool,
}

/// Accounting gathered while building.
#[derive(Copy, Clone, Debug, Default)]
pub struct ConstructStats {
    /// Maximum over time of chunk cache + dedup maps + per-level working
    /// arrays, in bytes. An accounting measure, not OS RSS.
    pub peak_mem_bytes: u64,
}

/// L1 distance to the nearest occupied cell, clamped to `max_dist`, exact
/// for the 6-neighborhood via multi-source BFS. `extent` is (W, H, D),
/// x-fastest.
pub fn l1_distance_transform(occupancy: &[bool], extent: [u64; 3], max_dist: u32) -> Vec<u32> {
    let [w, h, d] = extent;
    let n = (w * h * d) as usize;
    debug_assert_eq!(occupancy.len(), n);
    let mut dist = vec![max_dist; n];
    let mut frontier: Vec<usize> = Vec::new();
    for (i, &occ) in occupancy.iter().enumerate() {
        if occ {
            dist[i] = 0;
            frontier.push(i);
        }
    }
    let mut level = 0u32;
    while !frontier.is_empty() && level + 1 < max_dist {
        level += 1;
        let mut next = Vec::new();
        for &i in &frontier {
            let i = i as u64;
            let (x, y, z) = (i % w, (i / w) % h, i / (w * h));
            let mut push = |nx: u64, ny: u64, nz: u64| {
                let j = (nx + w * (ny + h * nz)) as usize;
                if dist[j] > level {
                    dist[j] = level;
                    next.push(j);
                }
            };
            if x > 0 {
                push(x - 1, y, z);
            }
            if x + 1 < w {
                push(x + 1, y, z);
            }
            if y > 0 {
                push(x, y - 1, z);
            }
            if y + 1 < h {
                push(x, y + 1, z);
            }
            if z > 0 {
                push(x, y, z - 1);
            }
            if z + 1 < d {
                push(x, y, z + 1);
            }
        }
        frontier = next;
    }
    dist
}

/// Build the serialized volume for `plan` from `source`.
///
/// All voxelizer accesses happen in non-decreasing Morton order. Returns the
/// buffer (word 0 = root pointer, 0 iff the volume is entirely empty) and
/// construction stats.
pub fn construct_volume<S: VoxelSource>(
    plan: &FormatPlan,
    source: &mut S,
    options: ConstructOptions,
) -> Result<(VolumeBuffer, ConstructStats), ConstructError> {
    if source.resolution() != plan.resolution {
        return Err(ConstructError::ResolutionMismatch {
            plan: plan.resolution,
            supplied: source.resolution(),
        });
    }
    let mut builder = Builder {
        plan,
        source,
        buf: VolumeBuffer::new(),
        options,
        dedup: vec![HashMap::new(); plan.num_levels()],
        dedup_bytes: 0,
        work_bytes: 0,
        peak_bytes: 0,
    };
    let root = builder.construct_sub(0, [0, 0, 0])?;
    builder.buf.set_root(root);
    let stats = ConstructStats {
        peak_mem_bytes: builder.peak_bytes as u64,
    };
    Ok((builder.buf, stats))
}

struct Builder<'a, S: VoxelSource> {
    plan: &'a FormatPlan,
    source: &'a mut S,
    buf: VolumeBuffer,
    options: ConstructOptions,
    dedup: Vec<HashMap<Vec<u32>, u32>>,
    dedup_bytes: usize,
    work_bytes: usize,
    peak_bytes: usize,
}

/// An SVO node built but not yet written: children already emitted.
#[derive(Copy, Clone)]
struct PendingNode {
    first: u32,
    masks: u32,
}

impl<S: VoxelSource> Builder<'_, S> {
    fn note_mem(&mut self) {
        let current = self.work_bytes + self.dedup_bytes + self.source.resident_bytes();
        if current > self.peak_bytes {
            self.peak_bytes = current;
        }
    }

    fn alloc_work(&mut self, bytes: usize) {
        self.work_bytes += bytes;
        self.note_mem();
    }

    fn free_work(&mut self, bytes: usize) {
        self.work_bytes -= bytes;
    }

    /// Terminating integer for one child of level `k`: the voxel word at the
    /// finest level, otherwise the next level's sub-volume offset.
    fn term_for_child(&mut self, k: usize, lower: [u64; 3]) -> Result<u32, ConstructError> {
        let term = if k + 1 == self.plan.num_levels() {
            let v = self.source.sample(lower[0], lower[1], lower[2]);
            self.note_mem();
            v.0
        } else {
            self.construct_sub(k + 1, lower)?
        };
        Ok(term)
    }

    /// Construct the level-`k` sub-volume with the given lower indices.
    /// Returns its word offset, or 0 if the sub-volume is entirely empty.
    fn construct_sub(&mut self, k: usize, lower: [u64; 3]) -> Result<u32, ConstructError> {
        match self.plan.levels[k] {
            LevelDesc::Raw { .. } => self.construct_grid(k, lower, None),
            LevelDesc::Df { m, .. } => self.construct_grid(k, lower, Some(m)),
            LevelDesc::Svo { depth } => self.construct_sv(k, lower, depth, false),
            LevelDesc::Svdag { depth } => self.construct_sv(k, lower, depth, true),
        }
    }

    fn construct_grid(
        &mut self,
        k: usize,
        lower: [u64; 3],
        df_max: Option<u32>,
    ) -> Result<u32, ConstructError> {
        let log2 = self.plan.levels[k].log2_extent();
        let [w, h, _d] = [1u64 << log2[0], 1u64 << log2[1], 1u64 << log2[2]];
        let count = 1usize << (log2[0] + log2[1] + log2[2]);
        let cover = self.plan.cover(k);

        let mut entries = vec![0u32; count];
        self.alloc_work(count * 4);
        let mut any = false;
        for (x, y, z) in morton_children(log2) {
            let child_lower = [
                lower[0] + x * cover,
                lower[1] + y * cover,
                lower[2] + z * cover,
            ];
            let term = self.term_for_child(k, child_lower)?;
            entries[(x + w * (y + h * z)) as usize] = term;
            any |= term != 0;
        }

        let result = if !any {
            0
        } else if let Some(m) = df_max {
            let occupancy: Vec<bool> = entries.iter().map(|&t| t != 0).collect();
            self.alloc_work(count);
            let dist = l1_distance_transform(
                &occupancy,
                [1 << log2[0], 1 << log2[1], 1 << log2[2]],
                m,
            );
            self.alloc_work(count * 4);
            let mut interleaved = Vec::with_capacity(count * 2);
            self.alloc_work(count * 8);
            for i in 0..count {
                interleaved.push(entries[i]);
                interleaved.push(dist[i]);
            }
            let off = self.buf.push_words(&interleaved)?;
            self.free_work(count * 13);
            off
        } else {
            self.buf.push_words(&entries)?
        };
        self.free_work(count * 4);
        Ok(result)
    }

    fn construct_sv(
        &mut self,
        k: usize,
        lower: [u64; 3],
        depth: u32,
        dedup: bool,
    ) -> Result<u32, ConstructError> {
        if dedup && !self.options.whole_level_dedup {
            self.dedup_bytes -= map_bytes(&self.dedup[k]);
            self.dedup[k].clear();
        }
        let cover = self.plan.cover(k);
        let depth = depth as usize;
        // queues[d - 1] collects the up-to-8 children of one node at depth
        // d - 1; SVO queues hold pending (unwritten) nodes, SVDAG queues
        // hold offsets of already-deduplicated nodes.
        let mut svo_queues: Vec<Vec<Option<PendingNode>>> = vec![Vec::with_capacity(8); depth];
        let mut dag_queues: Vec<Vec<Option<u32>>> = vec![Vec::with_capacity(8); depth];
        self.alloc_work(depth * 8 * 16);

        let total = 1u64 << (3 * depth);
        let mut root = 0u32;
        for code in 0..total {
            let (x, y, z) = decode3(code);
            let child_lower = [
                lower[0] + x * cover,
                lower[1] + y * cover,
                lower[2] + z * cover,
            ];
            let term = self.term_for_child(k, child_lower)?;
            if dedup {
                let leaf = if term == 0 {
                    None
                } else {
                    Some(self.dedup_node(k, vec![term])?)
                };
                dag_queues[depth - 1].push(leaf);
            } else {
                let node = if term == 0 {
                    None
                } else {
                    Some(PendingNode { first: term, masks: 0 })
                };
                svo_queues[depth - 1].push(node);
            }

            // cascade full queues towards the root
            for d in (0..depth).rev() {
                let full = if dedup {
                    dag_queues[d].len() == 8
                } else {
                    svo_queues[d].len() == 8
                };
                if !full {
                    break;
                }
                let children_are_leaves = d + 1 == depth;
                if dedup {
                    let parent = self.flush_svdag(k, &mut dag_queues[d], children_are_leaves)?;
                    if d == 0 {
                        root = parent.unwrap_or(0);
                    } else {
                        dag_queues[d - 1].push(parent);
                    }
                } else {
                    let parent = self.flush_svo(&mut svo_queues[d], children_are_leaves)?;
                    if d == 0 {
                        root = match parent {
                            Some(node) => self
                                .buf
                                .push_words(&[node.first, node.masks])?,
                            None => 0,
                        };
                    } else {
                        svo_queues[d - 1].push(parent);
                    }
                }
            }
        }
        self.free_work(depth * 8 * 16);
        Ok(root)
    }

    fn flush_svo(
        &mut self,
        queue: &mut Vec<Option<PendingNode>>,
        children_are_leaves: bool,
    ) -> Result<Option<PendingNode>, ConstructError> {
        debug_assert_eq!(queue.len(), 8);
        let mut valid = 0u8;
        let mut first = None;
        for (octant, entry) in queue.iter().enumerate() {
            if let Some(node) = entry {
                let off = self.buf.push_words(&[node.first, node.masks])?;
                first.get_or_insert(off);
                valid |= 1 << octant;
            }
        }
        queue.clear();
        Ok(first.map(|first| PendingNode {
            first,
            masks: SvMasks {
                valid,
                leaf: if children_are_leaves { valid } else { 0 },
            }
            .pack(),
        }))
    }

    fn flush_svdag(
        &mut self,
        k: usize,
        queue: &mut Vec<Option<u32>>,
        children_are_leaves: bool,
    ) -> Result<Option<u32>, ConstructError> {
        debug_assert_eq!(queue.len(), 8);
        let mut valid = 0u8;
        let mut words = vec![0u32]; // masks placeholder
        for (octant, entry) in queue.iter().enumerate() {
            if let Some(off) = entry {
                words.push(*off);
                valid |= 1 << octant;
            }
        }
        queue.clear();
        if valid == 0 {
            return Ok(None);
        }
        words[0] = SvMasks {
            valid,
            leaf: if children_are_leaves { valid } else { 0 },
        }
        .pack();
        Ok(Some(self.dedup_node(k, words)?))
    }

    /// Hash-cons a completed node: children are deduplicated before parents,
    /// so equal keys are bit-identical subgraph roots.
    fn dedup_node(&mut self, k: usize, words: Vec<u32>) -> Result<u32, ConstructError> {
        if let Some(&off) = self.dedup[k].get(&words) {
            return Ok(off);
        }
        let off = self.buf.push_words(&words)?;
        self.dedup_bytes += entry_bytes(&words);
        self.dedup[k].insert(words, off);
        self.note_mem();
        Ok(off)
    }
}

fn entry_bytes(key: &[u32]) -> usize {
    key.len() * 4 + 32
}

fn map_bytes(map: &HashMap<Vec<u32>, u32>) -> usize {
    map.keys().map(|k| entry_bytes(k)).sum()
}
