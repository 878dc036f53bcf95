//! Elements, cylinders, metric, and Walsh characters of the binary group at a
//! fixed finite resolution.
//!
//! A point of the group is a 0/1 coordinate sequence; we keep the first N
//! coordinates and identify the rest to zero. Coordinate `x_i` (1-based) is
//! bit `i-1` of the element word, so `x_1` is the least significant bit.

use thiserror::Error;

/// Hard ceiling on resolution: cell counts stay within `usize` and full
/// per-level mass tables stay within desktop memory.
pub const MAX_LEVELS: u32 = 30;

#[derive(Debug, Error, PartialEq)]
pub enum GroupError {
    #[error("resolution must be between 1 and {MAX_LEVELS} levels, got {0}")]
    BadResolution(u32),
    #[error("element word {word:#x} has bits above resolution {levels}")]
    WordOutOfRange { word: u64, levels: u32 },
    #[error("resolution mismatch: {0} levels vs {1} levels")]
    ResolutionMismatch(u32, u32),
    #[error("walsh index {index} outside [0, 2^{levels})")]
    WalshIndexOutOfRange { index: u64, levels: u32 },
    #[error("cylinder level {level} exceeds resolution {levels}")]
    LevelOutOfRange { level: u32, levels: u32 },
    #[error("cylinder index {index} outside [0, 2^{level})")]
    CylinderIndexOutOfRange { index: u64, level: u32 },
}

/// Number of binary coordinates kept; the finest cells have width 2^-N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Resolution(u32);

impl Resolution {
    pub fn new(levels: u32) -> Result<Self, GroupError> {
        if levels == 0 || levels > MAX_LEVELS {
            return Err(GroupError::BadResolution(levels));
        }
        Ok(Self(levels))
    }

    pub fn levels(self) -> u32 {
        self.0
    }

    /// 2^N, the number of finest cylinders.
    pub fn cells(self) -> usize {
        1usize << self.0
    }
}

/// A group element truncated to the first N coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupElement {
    word: u64,
    resolution: Resolution,
}

impl GroupElement {
    pub fn new(word: u64, resolution: Resolution) -> Result<Self, GroupError> {
        if word >> resolution.levels() != 0 {
            return Err(GroupError::WordOutOfRange {
                word,
                levels: resolution.levels(),
            });
        }
        Ok(Self { word, resolution })
    }

    pub fn zero(resolution: Resolution) -> Self {
        Self { word: 0, resolution }
    }

    pub fn word(&self) -> u64 {
        self.word
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    /// Coordinate x_i for 1 <= i <= N.
    pub fn coordinate(&self, i: u32) -> Result<u8, GroupError> {
        if i == 0 || i > self.resolution.levels() {
            return Err(GroupError::LevelOutOfRange {
                level: i,
                levels: self.resolution.levels(),
            });
        }
        Ok(((self.word >> (i - 1)) & 1) as u8)
    }
}

fn check_same_resolution(x: &GroupElement, y: &GroupElement) -> Result<Resolution, GroupError> {
    if x.resolution != y.resolution {
        return Err(GroupError::ResolutionMismatch(
            x.resolution.levels(),
            y.resolution.levels(),
        ));
    }
    Ok(x.resolution)
}

/// Group operation: coordinate-wise addition mod 2, i.e. XOR of the words.
/// Every element is its own inverse.
pub fn add(x: &GroupElement, y: &GroupElement) -> Result<GroupElement, GroupError> {
    let resolution = check_same_resolution(x, y)?;
    Ok(GroupElement {
        word: x.word ^ y.word,
        resolution,
    })
}

/// Translation-invariant metric rho(x, y) = sum_i 2^-i |x_i - y_i|.
///
/// Equals (bit-reversal of `x XOR y` within N bits) / 2^N, so the value is an
/// exact binary64 dyadic rational.
pub fn metric(x: &GroupElement, y: &GroupElement) -> Result<f64, GroupError> {
    let resolution = check_same_resolution(x, y)?;
    let n = resolution.levels();
    let z = x.word ^ y.word;
    let reversed = z.reverse_bits() >> (64 - n);
    Ok(reversed as f64 * (-(n as f64)).exp2())
}

/// 1-based position of the first nonzero coordinate; `None` for the zero
/// element. `shell_level(z) = m` exactly when z lies in the shell K_m^2.
pub fn shell_level(z: &GroupElement) -> Option<u32> {
    if z.word == 0 {
        None
    } else {
        Some(z.word.trailing_zeros() + 1)
    }
}

/// Walsh character w_k at x: (-1)^popcount(k AND word). w_0 is identically 1
/// and every w_k is a homomorphism into {-1, +1}.
pub fn walsh(k: u64, x: &GroupElement) -> Result<i32, GroupError> {
    let levels = x.resolution.levels();
    if k >> levels != 0 {
        return Err(GroupError::WalshIndexOutOfRange { index: k, levels });
    }
    Ok(1 - 2 * ((k & x.word).count_ones() & 1) as i32)
}

/// Level-m cylinder: the coset of all points agreeing with `index` on the
/// first m coordinates. Index 0 at level m is the subgroup G_m; index 2^{m-1}
/// is its complementary half inside G_{m-1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CylinderId {
    level: u32,
    index: u64,
}

impl CylinderId {
    pub fn new(level: u32, index: u64) -> Result<Self, GroupError> {
        if level > MAX_LEVELS {
            return Err(GroupError::LevelOutOfRange {
                level,
                levels: MAX_LEVELS,
            });
        }
        if index >> level != 0 {
            return Err(GroupError::CylinderIndexOutOfRange { index, level });
        }
        Ok(Self { level, index })
    }

    /// The cylinder of `x` at `level`: first `level` coordinates, i.e. the
    /// word reduced mod 2^level.
    pub fn containing(x: &GroupElement, level: u32) -> Result<Self, GroupError> {
        if level > x.resolution.levels() {
            return Err(GroupError::LevelOutOfRange {
                level,
                levels: x.resolution.levels(),
            });
        }
        let mask = if level == 0 { 0 } else { u64::MAX >> (64 - level) };
        Ok(Self {
            level,
            index: x.word & mask,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> u64 {
        self.index
    }
}

/// Enumerate the 2^(N-m) finest cells inside a cylinder, in ascending word
/// order. The two children of a level-m cylinder with index c are the
/// level-(m+1) cylinders with indices c and c + 2^m.
pub fn coset_members(
    c: &CylinderId,
    resolution: Resolution,
) -> Result<impl Iterator<Item = GroupElement>, GroupError> {
    let m = c.level;
    let n = resolution.levels();
    if m > n {
        return Err(GroupError::LevelOutOfRange { level: m, levels: n });
    }
    let base = c.index;
    Ok((0..1u64 << (n - m)).map(move |t| GroupElement {
        word: base | (t << m),
        resolution,
    }))
}
