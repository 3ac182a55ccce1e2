//! Morton (Z-order) encoding and hierarchical iteration.
//!
//! All voxelizer accesses are arranged in this order, so the conventions here
//! are load-bearing: x occupies the least-significant bit of each 3-bit group,
//! then y, then z. Octree child indices use the same convention, which makes
//! Morton order coincide with octree child order.

/// Maximum supported coordinate magnitude: 20 bits per axis (3 x 20 = 60 bits).
pub const MAX_COORD_BITS: u32 = 20;

fn spread_bits(x: u64) -> u64 {
    let mut x = x & 0xf_ffff;
    x = (x | (x << 32)) & 0x1f00000000ffff;
    x = (x | (x << 16)) & 0x1f0000ff0000ff;
    x = (x | (x << 8)) & 0x100f00f00f00f00f;
    x = (x | (x << 4)) & 0x10c30c30c30c30c3;
    x = (x | (x << 2)) & 0x1249249249249249;
    x
}

fn compact_bits(x: u64) -> u64 {
    let mut x = x & 0x1249249249249249;
    x = (x | (x >> 2)) & 0x10c30c30c30c30c3;
    x = (x | (x >> 4)) & 0x100f00f00f00f00f;
    x = (x | (x >> 8)) & 0x1f0000ff0000ff;
    x = (x | (x >> 16)) & 0x1f00000000ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x
}

/// Interleave three coordinates into a Morton code. Coordinates must be
/// below `2^20`.
pub fn encode3(x: u64, y: u64, z: u64) -> u64 {
    debug_assert!(
        x < (1 << MAX_COORD_BITS) && y < (1 << MAX_COORD_BITS) && z < (1 << MAX_COORD_BITS),
        "coordinate overflow: ({x}, {y}, {z})"
    );
    spread_bits(x) | (spread_bits(y) << 1) | (spread_bits(z) << 2)
}

/// Inverse of [`encode3`].
pub fn decode3(code: u64) -> (u64, u64, u64) {
    (
        compact_bits(code),
        compact_bits(code >> 1),
        compact_bits(code >> 2),
    )
}

/// Iterate every coordinate of a `(2^wx, 2^wy, 2^wz)` box in Morton order.
///
/// Non-cubic boxes are enumerated by walking the Morton codes of the cubic
/// power-of-two bounding box and skipping out-of-range coordinates, so the
/// emitted sequence is strictly increasing in padded Morton code.
pub fn morton_children(log2_extent: [u32; 3]) -> MortonChildren {
    let max_log = log2_extent[0].max(log2_extent[1]).max(log2_extent[2]);
    MortonChildren {
        code: 0,
        end: 1u64 << (3 * max_log),
        extent: [
            1u64 << log2_extent[0],
            1u64 << log2_extent[1],
            1u64 << log2_extent[2],
        ],
    }
}

pub struct MortonChildren {
    code: u64,
    end: u64,
    extent: [u64; 3],
}

impl Iterator for MortonChildren {
    type Item = (u64, u64, u64);

    fn next(&mut self) -> Option<(u64, u64, u64)> {
        while self.code < self.end {
            let (x, y, z) = decode3(self.code);
            self.code += 1;
            if x < self.extent[0] && y < self.extent[1] && z < self.extent[2] {
                return Some((x, y, z));
            }
        }
        None
    }
}
