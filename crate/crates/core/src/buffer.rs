//! Word-addressable volume buffer and the bit-exact node encodings for each
//! base format, plus `.hvox` file serialization.
//!
//! The whole volume lives in one growable array of 32-bit words. Word 0 is
//! the root pointer (0 for an entirely empty volume). A terminating integer
//! is either a word offset to a sub-volume in the next level or an RGBA
//! color at the finest level; 0 always means empty.
//!
//! Encodings:
//! - Raw level data: `2^w * 2^h * 2^d` terminating integers, x-fastest
//!   (`index = x + W * (y + H * z)`).
//! - DF level data: the same, with a distance word interleaved after each
//!   terminating integer.
//! - SVO node: 2 words. Word 0 is the pointer to the first child node
//!   (internal) or a terminating integer (leaf); word 1 packs the valid mask
//!   (bits 0-7) and leaf mask (bits 8-15). Children are contiguous, so child
//!   i lives at `first + 2 * popcount(valid below i)`.
//! - SVDAG node: leaf is 1 word (terminating integer); internal is a masks
//!   word followed by `popcount(valid)` child pointer words.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::format::{plan_from_signature, FormatError, FormatPlan};

/// 32-bit RGBA voxel word: R bits 0-7, G 8-15, B 16-23, A 24-31. All-zero
/// means empty.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Voxel(pub u32);

impl Voxel {
    pub const EMPTY: Voxel = Voxel(0);

    pub fn rgba(r: u8, g: u8, b: u8, a: u8) -> Voxel {
        Voxel((r as u32) | (g as u32) << 8 | (b as u32) << 16 | (a as u32) << 24)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn channels(self) -> [u8; 4] {
        self.0.to_le_bytes()
    }
}

/// Maximum buffer length: one 32-bit word can address offsets below 2^32.
pub const MAX_WORDS: u64 = 1 << 32;

pub const HVOX_MAGIC: [u8; 4] = *b"HVOX";
pub const HVOX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BufferError {
    #[error("volume buffer would exceed {MAX_WORDS} words")]
    Overflow,
    #[error("word offset {offset} out of range (buffer has {len} words)")]
    OutOfRange { offset: u64, len: u64 },
    #[error("bad magic (expected \"HVOX\")")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u32),
    #[error("truncated or malformed file: {0}")]
    Malformed(String),
    #[error("invalid format signature in file: {0}")]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Packed valid/leaf masks of a sparse voxel node.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub struct SvMasks {
    /// Bit i set: child octant i contains any non-empty voxel.
    pub valid: u8,
    /// Bit i set: child i is a terminating integer rather than more nodes.
    pub leaf: u8,
}

impl SvMasks {
    pub fn pack(self) -> u32 {
        self.valid as u32 | (self.leaf as u32) << 8
    }

    pub fn unpack(word: u32) -> SvMasks {
        SvMasks {
            valid: (word & 0xff) as u8,
            leaf: ((word >> 8) & 0xff) as u8,
        }
    }

    pub fn has_child(self, octant: u8) -> bool {
        self.valid & (1 << octant) != 0
    }

    pub fn is_leaf(self, octant: u8) -> bool {
        self.leaf & (1 << octant) != 0
    }

    /// Number of valid children below `octant` (the child's rank).
    pub fn rank(self, octant: u8) -> u32 {
        (self.valid & ((1u16 << octant) as u8).wrapping_sub(1)).count_ones()
    }
}

/// An SVO node as stored: two words.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SvoNode {
    /// Pointer to the first child node, or a terminating integer in leaves.
    pub first: u32,
    pub masks: SvMasks,
}

impl SvoNode {
    /// Offset of the child in octant `octant` (which must be valid).
    pub fn child_offset(&self, octant: u8) -> u32 {
        self.first + 2 * self.masks.rank(octant)
    }
}

/// The serialized hybrid volume.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VolumeBuffer {
    words: Vec<u32>,
}

impl Default for VolumeBuffer {
    fn default() -> Self {
        Self::new()
    }
}

impl VolumeBuffer {
    /// A fresh buffer with the root pointer word reserved (and zero).
    pub fn new() -> VolumeBuffer {
        VolumeBuffer { words: vec![0] }
    }

    pub fn from_words(words: Vec<u32>) -> VolumeBuffer {
        VolumeBuffer { words }
    }

    pub fn len(&self) -> u64 {
        self.words.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn root(&self) -> u32 {
        self.words[0]
    }

    pub fn set_root(&mut self, offset: u32) {
        self.words[0] = offset;
    }

    pub fn get(&self, offset: u64) -> u32 {
        self.words[offset as usize]
    }

    pub fn try_get(&self, offset: u64) -> Result<u32, BufferError> {
        self.words
            .get(offset as usize)
            .copied()
            .ok_or(BufferError::OutOfRange {
                offset,
                len: self.len(),
            })
    }

    pub fn set(&mut self, offset: u64, word: u32) {
        self.words[offset as usize] = word;
    }

    /// Append `words`, returning the offset of the first appended word.
    pub fn push_words(&mut self, words: &[u32]) -> Result<u32, BufferError> {
        let offset = self.len();
        if offset + words.len() as u64 > MAX_WORDS {
            return Err(BufferError::Overflow);
        }
        self.words.extend_from_slice(words);
        Ok(offset as u32)
    }

    pub fn read_svo_node(&self, offset: u64) -> Result<SvoNode, BufferError> {
        let first = self.try_get(offset)?;
        let masks = SvMasks::unpack(self.try_get(offset + 1)?);
        Ok(SvoNode { first, masks })
    }

    pub fn write_svo_node(&mut self, node: SvoNode) -> Result<u32, BufferError> {
        self.push_words(&[node.first, node.masks.pack()])
    }

    /// Read an internal SVDAG node: masks word plus one pointer per valid
    /// child. Leaves are a single terminating-integer word read with `get`;
    /// whether an offset is a leaf comes from the parent's leaf mask.
    pub fn read_svdag_node(&self, offset: u64) -> Result<(SvMasks, Vec<u32>), BufferError> {
        let masks = SvMasks::unpack(self.try_get(offset)?);
        let n = masks.valid.count_ones() as u64;
        let mut children = Vec::with_capacity(n as usize);
        for i in 0..n {
            children.push(self.try_get(offset + 1 + i)?);
        }
        Ok((masks, children))
    }

    /// Word offset of the raw-level entry `index` in an array at `base`.
    pub fn raw_entry(base: u32, index: u64) -> u64 {
        base as u64 + index
    }

    /// Word offsets of the (terminating integer, distance) pair of DF entry
    /// `index` in an array at `base`.
    pub fn df_entry(base: u32, index: u64) -> (u64, u64) {
        let t = base as u64 + 2 * index;
        (t, t + 1)
    }
}

const fn header_len(sig_len: usize) -> u64 {
    // magic + version + sig length + sig + resolution + payload count
    4 + 4 + 4 + sig_len as u64 + 3 * 4 + 8
}

/// On-disk size of a volume serialized with [`save_hvox`].
pub fn hvox_file_size(buffer: &VolumeBuffer, plan: &FormatPlan) -> u64 {
    header_len(plan.signature().len()) + 4 * buffer.len()
}

/// Write a volume as an `.hvox` file. All integers little-endian.
pub fn save_hvox(buffer: &VolumeBuffer, plan: &FormatPlan, path: &Path) -> Result<(), BufferError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_hvox(buffer, plan, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_hvox<W: Write>(
    buffer: &VolumeBuffer,
    plan: &FormatPlan,
    w: &mut W,
) -> Result<(), BufferError> {
    let sig = plan.signature();
    w.write_all(&HVOX_MAGIC)?;
    w.write_all(&HVOX_VERSION.to_le_bytes())?;
    w.write_all(&(sig.len() as u32).to_le_bytes())?;
    w.write_all(sig.as_bytes())?;
    for axis in 0..3 {
        w.write_all(&(plan.resolution[axis] as u32).to_le_bytes())?;
    }
    w.write_all(&buffer.len().to_le_bytes())?;
    for word in buffer.words() {
        w.write_all(&word.to_le_bytes())?;
    }
    Ok(())
}

/// Load an `.hvox` file back into a buffer and its compiled plan.
pub fn load_hvox(path: &Path) -> Result<(VolumeBuffer, FormatPlan), BufferError> {
    let mut r = BufReader::new(File::open(path)?);
    read_hvox(&mut r)
}

pub fn read_hvox<R: Read>(r: &mut R) -> Result<(VolumeBuffer, FormatPlan), BufferError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| BufferError::Malformed("missing magic".into()))?;
    if magic != HVOX_MAGIC {
        return Err(BufferError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != HVOX_VERSION {
        return Err(BufferError::BadVersion(version));
    }
    let sig_len = read_u32(r)? as usize;
    let mut sig = vec![0u8; sig_len];
    r.read_exact(&mut sig)
        .map_err(|_| BufferError::Malformed("truncated signature".into()))?;
    let sig = String::from_utf8(sig)
        .map_err(|_| BufferError::Malformed("signature is not ASCII".into()))?;
    let plan = plan_from_signature(&sig)?;
    let mut resolution = [0u64; 3];
    for r_axis in &mut resolution {
        *r_axis = read_u32(r)? as u64;
    }
    if resolution != plan.resolution {
        return Err(BufferError::Malformed(format!(
            "stored resolution {resolution:?} does not match signature {sig:?}"
        )));
    }
    let mut count = [0u8; 8];
    r.read_exact(&mut count)
        .map_err(|_| BufferError::Malformed("truncated word count".into()))?;
    let count = u64::from_le_bytes(count);
    if count == 0 || count > MAX_WORDS {
        return Err(BufferError::Malformed(format!("bad word count {count}")));
    }
    let mut words = Vec::with_capacity(count as usize);
    let mut buf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut buf)
            .map_err(|_| BufferError::Malformed("truncated payload".into()))?;
        words.push(u32::from_le_bytes(buf));
    }
    Ok((VolumeBuffer::from_words(words), plan))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, BufferError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| BufferError::Malformed("truncated header".into()))?;
    Ok(u32::from_le_bytes(buf))
}
