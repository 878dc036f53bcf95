//! Discrete measures on the finest cylinders, their Walsh spectra, per-level
//! aggregates, generator families, and a small on-disk format.
//!
//! A measure at resolution N is a nonnegative mass per level-N cylinder,
//! interpreted as a density with respect to the uniform measure on each cell.
//! Spectra are plain mass-weighted character sums with no normalization, so
//! coefficient 0 is the total mass and coarsening a measure truncates its
//! spectrum.

use crate::group::{CylinderId, GroupError, Resolution};
use crate::sums::pairwise_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("expected {expected} masses for resolution {levels}, got {got}")]
    WrongLength { expected: usize, levels: u32, got: usize },
    #[error("mass at cell {index} is invalid: {value} (must be finite and nonnegative)")]
    InvalidMass { index: usize, value: f64 },
    #[error("measure has empty support (total mass is zero)")]
    EmptySupport,
    #[error("length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),
    #[error("bernoulli probability at coordinate {coordinate} is invalid: {value} (must lie in [0, 1])")]
    InvalidProbability { coordinate: u32, value: f64 },
    #[error("zeroed coordinates are 1-based, got 0")]
    ZeroCoordinate,
    #[error("sparsity must lie in [0, 1), got {0}")]
    BadSparsity(f64),
}

/// Nonnegative mass on every finest cylinder; total mass must be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderMeasure {
    resolution: Resolution,
    masses: Vec<f64>,
    total: f64,
}

impl CylinderMeasure {
    pub fn new(resolution: Resolution, masses: Vec<f64>) -> Result<Self, MeasureError> {
        if masses.len() != resolution.cells() {
            return Err(MeasureError::WrongLength {
                expected: resolution.cells(),
                levels: resolution.levels(),
                got: masses.len(),
            });
        }
        for (index, &value) in masses.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(MeasureError::InvalidMass { index, value });
            }
        }
        let total = pairwise_sum(&masses);
        if total <= 0.0 {
            return Err(MeasureError::EmptySupport);
        }
        Ok(Self { resolution, masses, total })
    }

    /// Uniform measure: every finest cell carries 2^-N, total mass 1.
    pub fn haar(resolution: Resolution) -> Self {
        let mass = (-(resolution.levels() as f64)).exp2();
        Self {
            resolution,
            masses: vec![mass; resolution.cells()],
            total: 1.0,
        }
    }

    /// Unit mass spread uniformly over one cylinder.
    pub fn uniform_on(cylinder: &CylinderId, resolution: Resolution) -> Result<Self, MeasureError> {
        let n = resolution.levels();
        let m = cylinder.level();
        if m > n {
            return Err(GroupError::LevelOutOfRange { level: m, levels: n }.into());
        }
        let mass = (-((n - m) as f64)).exp2();
        let mut masses = vec![0.0; resolution.cells()];
        let stride = 1u64 << m;
        let mut w = cylinder.index();
        while (w as usize) < masses.len() {
            masses[w as usize] = mass;
            w += stride;
        }
        Ok(Self { resolution, masses, total: 1.0 })
    }

    /// Unit mass spread uniformly over the cells whose listed (1-based)
    /// coordinates are zero. Coordinates beyond the resolution are ignored;
    /// an empty list reproduces the uniform measure.
    pub fn pattern(zero_coordinates: &[u32], resolution: Resolution) -> Result<Self, MeasureError> {
        let n = resolution.levels();
        let mut zero_mask: u64 = 0;
        for &j in zero_coordinates {
            if j == 0 {
                return Err(MeasureError::ZeroCoordinate);
            }
            if j <= n {
                zero_mask |= 1 << (j - 1);
            }
        }
        let free = n - zero_mask.count_ones();
        let mass = (-(free as f64)).exp2();
        let masses = (0..resolution.cells() as u64)
            .map(|w| if w & zero_mask == 0 { mass } else { 0.0 })
            .collect();
        Ok(Self { resolution, masses, total: 1.0 })
    }

    /// Product measure: coordinate j is 1 with probability `probabilities[j-1]`
    /// independently. All probabilities 1/2 reproduces the uniform measure.
    pub fn bernoulli_product(probabilities: &[f64]) -> Result<Self, MeasureError> {
        let resolution = Resolution::new(probabilities.len() as u32)?;
        for (i, &p) in probabilities.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(MeasureError::InvalidProbability {
                    coordinate: i as u32 + 1,
                    value: p,
                });
            }
        }
        let mut masses = vec![1.0];
        for &p in probabilities {
            let mut next = vec![0.0; masses.len() * 2];
            for (w, &m) in masses.iter().enumerate() {
                next[w] = m * (1.0 - p);
                next[w + masses.len()] = m * p;
            }
            masses = next;
        }
        // The doubling loop appends the new coordinate as the top bit of the
        // index, matching bit j-1 of the cell word.
        Self::new(resolution, masses)
    }

    /// Seeded random measure: each cell is kept with probability
    /// 1 - sparsity and given an independent uniform mass in [0, 1). The
    /// stream is two draws per cell regardless of the keep decision, so
    /// outputs are reproducible across sparsity values.
    pub fn random(resolution: Resolution, seed: u64, sparsity: f64) -> Result<Self, MeasureError> {
        if !sparsity.is_finite() || !(0.0..1.0).contains(&sparsity) {
            return Err(MeasureError::BadSparsity(sparsity));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let masses: Vec<f64> = (0..resolution.cells())
            .map(|_| {
                let keep = rng.gen::<f64>() >= sparsity;
                let value = rng.gen::<f64>();
                if keep {
                    value
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(resolution, masses)
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.masses.iter().filter(|&&m| m > 0.0).count()
    }

    /// Aggregate to a coarser resolution by summing the masses of each
    /// level-m cylinder's descendants.
    pub fn coarsen(&self, level: u32) -> Result<Self, MeasureError> {
        let n = self.resolution.levels();
        if level == 0 || level > n {
            return Err(GroupError::LevelOutOfRange { level, levels: n }.into());
        }
        let table = level_masses(self);
        Self::new(Resolution::new(level)?, table.level(level).to_vec())
    }
}

/// In-place fast Walsh-Hadamard transform:
/// out[k] = sum_i in[i] * (-1)^popcount(i AND k). Self-inverse up to the
/// factor `len`; exact on inputs whose butterflies stay within integer range.
pub fn fwht_in_place(values: &mut [f64]) -> Result<(), MeasureError> {
    let n = values.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(MeasureError::LengthNotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        let mut block = 0;
        while block < n {
            for i in block..block + h {
                let a = values[i];
                let b = values[i + h];
                values[i] = a + b;
                values[i + h] = a - b;
            }
            block += h * 2;
        }
        h *= 2;
    }
    Ok(())
}

/// Copying wrapper around [`fwht_in_place`].
pub fn fwht(values: &[f64]) -> Result<Vec<f64>, MeasureError> {
    let mut out = values.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Walsh coefficients of a measure: coefficient k is the mass-weighted sum of
/// the k-th character. Coefficient 0 is the total mass; |coefficient| never
/// exceeds it.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshSpectrum {
    resolution: Resolution,
    coefficients: Vec<f64>,
}

impl WalshSpectrum {
    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// Full spectrum of a measure via the fast transform. Coefficients at
/// indices 2^N and above are identically zero for density measures, so the
/// first 2^N values carry everything.
pub fn spectrum(mu: &CylinderMeasure) -> WalshSpectrum {
    let mut coefficients = mu.masses.clone();
    fwht_in_place(&mut coefficients).expect("cell count is a power of two");
    WalshSpectrum {
        resolution: mu.resolution,
        coefficients,
    }
}

/// Masses of every cylinder at every level, with per-level sums of squares.
///
/// `squared_sum(m)` is T_m = sum_c mu(c)^2 over level-m cylinders; it is
/// nonincreasing in m, and the drop T_{m-1} - T_m is kept in the exact
/// cross-term form 2 * sum_c mu(child_1) * mu(child_2), which is nonnegative
/// by construction.
#[derive(Debug, Clone)]
pub struct LevelMassTable {
    resolution: Resolution,
    levels: Vec<Vec<f64>>,
    squared_sums: Vec<f64>,
    cross_sums: Vec<f64>,
    occupied: Vec<usize>,
}

/// Build the aggregation pyramid bottom-up; children of level-m index c are
/// the level-(m+1) indices c and c + 2^m.
pub fn level_masses(mu: &CylinderMeasure) -> LevelMassTable {
    let n = mu.resolution.levels() as usize;
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    levels[n] = mu.masses.clone();
    for m in (0..n).rev() {
        let half = 1usize << m;
        let child = &levels[m + 1];
        levels[m] = (0..half).map(|c| child[c] + child[c + half]).collect();
    }
    let squared_sums: Vec<f64> = levels
        .iter()
        .map(|lvl| pairwise_sum(&lvl.iter().map(|&v| v * v).collect::<Vec<_>>()))
        .collect();
    let mut cross_sums = vec![0.0; n + 1];
    for m in 1..=n {
        let half = 1usize << (m - 1);
        let child = &levels[m];
        let crosses: Vec<f64> = (0..half).map(|c| 2.0 * child[c] * child[c + half]).collect();
        cross_sums[m] = pairwise_sum(&crosses);
    }
    let occupied = levels
        .iter()
        .map(|lvl| lvl.iter().filter(|&&v| v > 0.0).count())
        .collect();
    LevelMassTable {
        resolution: mu.resolution,
        levels,
        squared_sums,
        cross_sums,
        occupied,
    }
}

impl LevelMassTable {
    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    /// All cylinder masses at one level, indexed by cylinder index.
    pub fn level(&self, m: u32) -> &[f64] {
        &self.levels[m as usize]
    }

    /// Mass of the level-m cylinder containing any cell with this index.
    pub fn mass(&self, m: u32, index: u64) -> f64 {
        self.levels[m as usize][index as usize]
    }

    /// T_m, the sum of squared cylinder masses at level m.
    pub fn squared_sum(&self, m: u32) -> f64 {
        self.squared_sums[m as usize]
    }

    /// T_{m-1} - T_m in exact cross-term form; defined for m >= 1.
    pub fn cross_sum(&self, m: u32) -> f64 {
        self.cross_sums[m as usize]
    }

    /// Number of positive-mass cylinders at level m.
    pub fn occupied(&self, m: u32) -> usize {
        self.occupied[m as usize]
    }
}

// ---------------------------------------------------------------------------
// On-disk format: one ASCII header line, then the payload.
//
//   dyadic-measure v1 levels=<N> cells=<2^N> encoding=<f64le|json>\n
//
// f64le: cells * 8 bytes of little-endian IEEE 754 doubles (lossless).
// json:  a JSON array of decimal reals (shortest round-trip formatting).
// ---------------------------------------------------------------------------

const MAGIC: &str = "dyadic-measure";
const VERSION: &str = "v1";
const MAX_HEADER: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureEncoding {
    F64Le,
    Json,
}

impl MeasureEncoding {
    fn tag(self) -> &'static str {
        match self {
            MeasureEncoding::F64Le => "f64le",
            MeasureEncoding::Json => "json",
        }
    }
}

#[derive(Debug, Error)]
pub enum MeasureIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Invalid(#[from] MeasureError),
    #[error("not a measure file: expected magic '{MAGIC}', got '{0}'")]
    BadMagic(String),
    #[error("unsupported format version '{0}' (this build reads {VERSION})")]
    BadVersion(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("header says {cells} cells but levels={levels} implies {expected}")]
    CellCountMismatch { cells: usize, levels: u32, expected: usize },
    #[error("payload ended early: expected {expected} masses, got {got}")]
    ShortPayload { expected: usize, got: usize },
    #[error("trailing bytes after {expected} masses")]
    TrailingData { expected: usize },
    #[error("bad json payload: {0}")]
    BadJson(String),
}

pub fn write_measure_to<W: Write>(
    mu: &CylinderMeasure,
    writer: &mut W,
    encoding: MeasureEncoding,
) -> Result<(), MeasureIoError> {
    writeln!(
        writer,
        "{MAGIC} {VERSION} levels={} cells={} encoding={}",
        mu.resolution.levels(),
        mu.resolution.cells(),
        encoding.tag()
    )?;
    match encoding {
        MeasureEncoding::F64Le => {
            for &m in &mu.masses {
                writer.write_all(&m.to_le_bytes())?;
            }
        }
        MeasureEncoding::Json => {
            serde_json::to_writer(&mut *writer, &mu.masses)
                .map_err(|e| MeasureIoError::BadJson(e.to_string()))?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

pub fn write_measure(
    mu: &CylinderMeasure,
    path: &Path,
    encoding: MeasureEncoding,
) -> Result<(), MeasureIoError> {
    let mut writer = BufWriter::new(std::fs::File::create(path)?);
    write_measure_to(mu, &mut writer, encoding)?;
    writer.flush()?;
    Ok(())
}

pub fn read_measure_from<R: Read>(reader: R) -> Result<CylinderMeasure, MeasureIoError> {
    let mut reader = BufReader::new(reader);
    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        let n = reader.read(&mut byte)?;
        if n == 0 {
            return Err(MeasureIoError::BadHeader("missing newline".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > MAX_HEADER {
            return Err(MeasureIoError::BadHeader("header line too long".into()));
        }
    }
    let header = String::from_utf8(header)
        .map_err(|_| MeasureIoError::BadHeader("header is not utf-8".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(MeasureIoError::BadHeader(format!(
            "expected 5 fields, got {}",
            fields.len()
        )));
    }
    if fields[0] != MAGIC {
        return Err(MeasureIoError::BadMagic(fields[0].to_string()));
    }
    if fields[1] != VERSION {
        return Err(MeasureIoError::BadVersion(fields[1].to_string()));
    }
    let field = |name: &str, text: &str| -> Result<String, MeasureIoError> {
        text.strip_prefix(&format!("{name}="))
            .map(str::to_string)
            .ok_or_else(|| MeasureIoError::BadHeader(format!("expected {name}=..., got '{text}'")))
    };
    let levels: u32 = field("levels", fields[2])?
        .parse()
        .map_err(|_| MeasureIoError::BadHeader("levels is not an integer".into()))?;
    let cells: usize = field("cells", fields[3])?
        .parse()
        .map_err(|_| MeasureIoError::BadHeader("cells is not an integer".into()))?;
    let encoding = field("encoding", fields[4])?;
    let resolution = Resolution::new(levels).map_err(MeasureError::from)?;
    if cells != resolution.cells() {
        return Err(MeasureIoError::CellCountMismatch {
            cells,
            levels,
            expected: resolution.cells(),
        });
    }
    let masses = match encoding.as_str() {
        "f64le" => {
            let mut bytes = vec![0u8; cells * 8];
            let mut filled = 0;
            while filled < bytes.len() {
                let n = reader.read(&mut bytes[filled..])?;
                if n == 0 {
                    return Err(MeasureIoError::ShortPayload {
                        expected: cells,
                        got: filled / 8,
                    });
                }
                filled += n;
            }
            let mut probe = [0u8; 1];
            if reader.read(&mut probe)? != 0 {
                return Err(MeasureIoError::TrailingData { expected: cells });
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect()
        }
        "json" => {
            let mut text = String::new();
            reader.read_to_string(&mut text)?;
            let parsed: Vec<f64> =
                serde_json::from_str(&text).map_err(|e| MeasureIoError::BadJson(e.to_string()))?;
            if parsed.len() < cells {
                return Err(MeasureIoError::ShortPayload {
                    expected: cells,
                    got: parsed.len(),
                });
            }
            if parsed.len() > cells {
                return Err(MeasureIoError::TrailingData { expected: cells });
            }
            parsed
        }
        other => {
            return Err(MeasureIoError::BadHeader(format!(
                "unknown encoding '{other}' (expected f64le or json)"
            )))
        }
    };
    Ok(CylinderMeasure::new(resolution, masses)?)
}

pub fn read_measure(path: &Path) -> Result<CylinderMeasure, MeasureIoError> {
    read_measure_from(std::fs::File::open(path)?)
}
