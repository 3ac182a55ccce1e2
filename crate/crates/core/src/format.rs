//! Hybrid format signatures: parsing, validation, and compilation into an
//! execution plan shared by construction and intersection.
//!
//! A hybrid format is an ordered list of levels, each one of four base
//! formats: raw grid `R(w, h, d)`, distance field `D(w, h, d, m)`, sparse
//! voxel octree `S(l)`, and sparse voxel DAG `G(l)`. Extents are log2, so
//! `R(3, 3, 3)` is an 8x8x8 grid whose entries point into the next level.

use std::fmt;
use thiserror::Error;

use crate::morton::MAX_COORD_BITS;

/// One level of a hybrid format. Extents and depths are log2 / levels.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum LevelDesc {
    /// `R(w, h, d)`: raw grid of `2^w x 2^h x 2^d` entries.
    Raw { w: u32, h: u32, d: u32 },
    /// `D(w, h, d, m)`: raw grid plus a per-entry L1 distance clamped to `m`.
    Df { w: u32, h: u32, d: u32, m: u32 },
    /// `S(l)`: sparse voxel octree of depth `l`, spanning `2^l` per axis.
    Svo { depth: u32 },
    /// `G(l)`: sparse voxel DAG of depth `l`, spanning `2^l` per axis.
    Svdag { depth: u32 },
}

impl LevelDesc {
    /// Per-axis log2 extents of this level's own grid of entries.
    pub fn log2_extent(&self) -> [u32; 3] {
        match *self {
            LevelDesc::Raw { w, h, d } | LevelDesc::Df { w, h, d, .. } => [w, h, d],
            LevelDesc::Svo { depth } | LevelDesc::Svdag { depth } => [depth, depth, depth],
        }
    }

    pub fn is_cubic(&self) -> bool {
        let [w, h, d] = self.log2_extent();
        w == h && h == d
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, LevelDesc::Svo { .. } | LevelDesc::Svdag { .. })
    }
}

impl fmt::Display for LevelDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LevelDesc::Raw { w, h, d } => write!(f, "R({w}, {h}, {d})"),
            LevelDesc::Df { w, h, d, m } => write!(f, "D({w}, {h}, {d}, {m})"),
            LevelDesc::Svo { depth } => write!(f, "S({depth})"),
            LevelDesc::Svdag { depth } => write!(f, "G({depth})"),
        }
    }
}

/// An ordered list of levels; level 1 is the highest (coarsest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridFormat {
    pub levels: Vec<LevelDesc>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("empty format signature")]
    Empty,
    #[error("level {index}: non-first levels must be cubic, got {desc}")]
    NonCubic { index: usize, desc: String },
    #[error("level {index}: SVO/SVDAG depth must be at least 1")]
    ZeroDepth { index: usize },
    #[error("level {index}: DF max distance must be at least 1")]
    ZeroDistance { index: usize },
    #[error("total resolution {axis_res} on axis {axis} exceeds the 2^{MAX_COORD_BITS} cap")]
    ResolutionTooLarge { axis: usize, axis_res: u64 },
}

/// Parse a signature like `"R(1, 0, 2) D(2, 2, 2, 4)"`. Also accepts the
/// `R(4^3)` / `D(4^3, 6)` shorthand for three equal extents.
pub fn parse_format(signature: &str) -> Result<HybridFormat, FormatError> {
    let bytes: Vec<char> = signature.chars().collect();
    let mut pos = 0usize;
    let mut levels = Vec::new();

    let skip_ws = |pos: &mut usize| {
        while *pos < bytes.len() && bytes[*pos].is_whitespace() {
            *pos += 1;
        }
    };

    skip_ws(&mut pos);
    while pos < bytes.len() {
        let kind = bytes[pos];
        if !matches!(kind, 'R' | 'D' | 'S' | 'G') {
            return Err(FormatError::Syntax {
                pos,
                msg: format!("expected level kind R, D, S, or G, found {:?}", kind),
            });
        }
        pos += 1;
        skip_ws(&mut pos);
        if pos >= bytes.len() || bytes[pos] != '(' {
            return Err(FormatError::Syntax {
                pos,
                msg: "expected '('".into(),
            });
        }
        pos += 1;

        let mut params: Vec<u32> = Vec::new();
        loop {
            skip_ws(&mut pos);
            if pos < bytes.len() && bytes[pos] == '-' {
                return Err(FormatError::Syntax {
                    pos,
                    msg: "negative parameter".into(),
                });
            }
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if pos == start {
                return Err(FormatError::Syntax {
                    pos,
                    msg: "expected integer parameter".into(),
                });
            }
            let text: String = bytes[start..pos].iter().collect();
            let value: u32 = text.parse().map_err(|_| FormatError::Syntax {
                pos: start,
                msg: format!("integer out of range: {text}"),
            })?;
            // `4^3` (or `4³`) expands to three equal extents.
            let cubed = if pos < bytes.len() && bytes[pos] == '³' {
                pos += 1;
                true
            } else if pos + 1 < bytes.len() && bytes[pos] == '^' && bytes[pos + 1] == '3' {
                pos += 2;
                true
            } else {
                false
            };
            if cubed {
                params.extend([value; 3]);
            } else {
                params.push(value);
            }
            skip_ws(&mut pos);
            match bytes.get(pos) {
                Some(',') => pos += 1,
                Some(')') => {
                    pos += 1;
                    break;
                }
                _ => {
                    return Err(FormatError::Syntax {
                        pos,
                        msg: "expected ',' or ')'".into(),
                    });
                }
            }
        }

        let level = match (kind, params.as_slice()) {
            ('R', &[w, h, d]) => LevelDesc::Raw { w, h, d },
            ('D', &[w, h, d, m]) => LevelDesc::Df { w, h, d, m },
            ('S', &[depth]) => LevelDesc::Svo { depth },
            ('G', &[depth]) => LevelDesc::Svdag { depth },
            _ => {
                return Err(FormatError::Syntax {
                    pos,
                    msg: format!("{kind} takes {} parameters, got {}", expected_arity(kind), params.len()),
                });
            }
        };
        levels.push(level);
        skip_ws(&mut pos);
    }

    if levels.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(HybridFormat { levels })
}

fn expected_arity(kind: char) -> usize {
    match kind {
        'R' => 3,
        'D' => 4,
        _ => 1,
    }
}

/// Canonical signature text; `parse_format` round-trips it.
pub fn format_to_string(format: &HybridFormat) -> String {
    format
        .levels
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// A validated format plus the derived bookkeeping both construction and
/// intersection need.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormatPlan {
    pub levels: Vec<LevelDesc>,
    /// log2 of the finest-level cube covered by one entry of level k
    /// (product of extents of levels k+1..N; the last level's entries are
    /// single voxels, log 0).
    pub cover_log: Vec<u32>,
    /// Total resolution in finest-level voxels, per axis.
    pub resolution: [u64; 3],
}

impl FormatPlan {
    pub fn signature(&self) -> String {
        format_to_string(&HybridFormat {
            levels: self.levels.clone(),
        })
    }

    /// Side length (finest voxels) of one entry of level `k`.
    pub fn cover(&self, k: usize) -> u64 {
        1u64 << self.cover_log[k]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Validate a format and derive per-level cumulative extents and the total
/// resolution. Non-first levels must be cubic so that Morton order stays
/// hierarchical over their sub-volumes.
pub fn compile_plan(format: &HybridFormat) -> Result<FormatPlan, FormatError> {
    if format.levels.is_empty() {
        return Err(FormatError::Empty);
    }
    for (i, level) in format.levels.iter().enumerate() {
        match *level {
            LevelDesc::Svo { depth } | LevelDesc::Svdag { depth } if depth == 0 => {
                return Err(FormatError::ZeroDepth { index: i + 1 });
            }
            LevelDesc::Df { m: 0, .. } => {
                return Err(FormatError::ZeroDistance { index: i + 1 });
            }
            _ => {}
        }
        if i > 0 && !level.is_cubic() {
            return Err(FormatError::NonCubic {
                index: i + 1,
                desc: level.to_string(),
            });
        }
    }

    let n = format.levels.len();
    let mut cover_log = vec![0u32; n];
    for k in (0..n.saturating_sub(1)).rev() {
        // Levels below the first are cubic, so the cover is a cube.
        cover_log[k] = cover_log[k + 1] + format.levels[k + 1].log2_extent()[0];
    }

    let mut resolution = [0u64; 3];
    for (axis, res) in resolution.iter_mut().enumerate() {
        let total_log: u32 = format
            .levels
            .iter()
            .map(|l| l.log2_extent()[axis])
            .sum();
        if total_log > MAX_COORD_BITS {
            return Err(FormatError::ResolutionTooLarge {
                axis,
                axis_res: 1u64.checked_shl(total_log).unwrap_or(u64::MAX),
            });
        }
        *res = 1u64 << total_log;
    }

    Ok(FormatPlan {
        levels: format.levels.clone(),
        cover_log,
        resolution,
    })
}

/// Convenience: parse and compile in one step.
pub fn plan_from_signature(signature: &str) -> Result<FormatPlan, FormatError> {
    compile_plan(&parse_format(signature)?)
}
