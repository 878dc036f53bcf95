//! Pointwise potentials and total energies of measures against the radial
//! kernels, computed by three independent algorithms.
//!
//! At finite resolution a pair of distinct cells interacts through the
//! kernel's constant value on the shell where their words first differ, and
//! a cell interacts with itself through the exact average of the kernel over
//! same-cell point pairs (the diagonal constant). The pairwise, shell-
//! aggregated, and spectral forms below are three routes to the same finite
//! sum; they agree to rounding, and the test suites hold them to that.

use crate::group::Resolution;
use crate::kernel::{
    coefficient_table, one_minus_exp2, shell_integral_sum, KernelError, KernelSpec,
};
use crate::measure::{level_masses, spectrum, CylinderMeasure, LevelMassTable};
use crate::sums::pairwise_sum;
use thiserror::Error;

/// Cost ceiling for the pairwise method, which runs O(4^N) kernel lookups.
pub const NAIVE_MAX_LEVELS: u32 = 14;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(
        "resolution {levels} exceeds the pairwise method's cap of {NAIVE_MAX_LEVELS} levels; \
         use the hierarchical or spectral method"
    )]
    ResolutionTooLargeForNaive { levels: u32 },
}

/// Kernel averaged over cell pairs at a fixed resolution: the constant value
/// on each shell (pairs of cells first differing at coordinate m) plus the
/// diagonal constant for same-cell pairs.
#[derive(Debug, Clone)]
pub struct CellKernel {
    resolution: Resolution,
    s: f64,
    truncation: Option<u32>,
    // index m in 1..=N; index 0 unused
    shell_values: Vec<f64>,
    diagonal: f64,
}

/// Shell constants and the diagonal constant of the kernel at a resolution.
///
/// The diagonal is 2^N times the integral of the kernel over the level-N
/// subgroup: exactly 2^{ns} when truncated at n <= N, the geometric tail
/// 2^{Ns-1}/(1 - 2^{s-1}) for the full kernel, and the mixed sum in between
/// when n > N.
pub fn cell_averaged_kernel(spec: &KernelSpec, resolution: Resolution) -> CellKernel {
    let levels = resolution.levels();
    let s = spec.s();
    let mut shell_values = vec![0.0; levels as usize + 1];
    for m in 1..=levels {
        shell_values[m as usize] = match spec.truncation() {
            Some(n) if m > n => (n as f64 * s).exp2(),
            _ => ((m as f64 - 1.0) * s).exp2(),
        };
    }
    let diagonal = match spec.truncation() {
        Some(n) if n <= levels => (n as f64 * s).exp2(),
        Some(n) => {
            let integral = shell_integral_sum(s, levels, n) + (n as f64 * (s - 1.0)).exp2();
            (levels as f64).exp2() * integral
        }
        None => (levels as f64 * s - 1.0).exp2() / one_minus_exp2(s - 1.0),
    };
    CellKernel {
        resolution,
        s,
        truncation: spec.truncation(),
        shell_values,
        diagonal,
    }
}

impl CellKernel {
    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn truncation(&self) -> Option<u32> {
        self.truncation
    }

    /// Kernel value between cells first differing at coordinate m (1 <= m <= N).
    pub fn shell_value(&self, m: u32) -> f64 {
        self.shell_values[m as usize]
    }

    /// Average kernel value over point pairs within one cell.
    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMethod {
    Naive,
    Hierarchical,
    Spectral,
}

impl std::fmt::Display for EnergyMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnergyMethod::Naive => "naive",
            EnergyMethod::Hierarchical => "hierarchical",
            EnergyMethod::Spectral => "spectral",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyResult {
    pub value: f64,
    pub method: EnergyMethod,
    pub s: f64,
    pub truncation: Option<u32>,
    pub resolution: Resolution,
}

/// Pointwise potential: value[i] is the kernel integrated against the
/// measure, averaged over the i-th cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    resolution: Resolution,
    s: f64,
    truncation: Option<u32>,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn truncation(&self) -> Option<u32> {
        self.truncation
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Split `out` into per-thread contiguous chunks and fill each in parallel.
/// Every element depends only on its own index, so results are identical for
/// every thread count; `threads == 1` runs inline.
fn fill_chunked<F>(out: &mut [f64], threads: usize, fill: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let threads = threads.max(1).min(out.len().max(1));
    if threads == 1 {
        fill(0, out);
        return;
    }
    let chunk_len = out.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for (t, chunk) in out.chunks_mut(chunk_len).enumerate() {
            let fill = &fill;
            scope.spawn(move || fill(t * chunk_len, chunk));
        }
    });
}

/// Potential of the measure at every cell, O(N) per cell.
///
/// Working outward from the finest scale, the mass at shell distance m from
/// cell i is the level-(m-1) cylinder mass minus the level-m cylinder mass;
/// each shell contributes that times the shell constant, and the cell's own
/// mass contributes through the diagonal constant, added last.
pub fn potential(mu: &CylinderMeasure, spec: &KernelSpec, threads: usize) -> PotentialField {
    potential_from_table(&level_masses(mu), spec, threads)
}

/// [`potential`] against a prebuilt aggregation table.
pub fn potential_from_table(
    table: &LevelMassTable,
    spec: &KernelSpec,
    threads: usize,
) -> PotentialField {
    let resolution = table.resolution();
    let levels = resolution.levels();
    let kernel = cell_averaged_kernel(spec, resolution);
    let mut values = vec![0.0; resolution.cells()];
    fill_chunked(&mut values, threads, |start, chunk| {
        for (offset, out) in chunk.iter_mut().enumerate() {
            let i = (start + offset) as u64;
            let mut acc = 0.0;
            let mut inner = table.mass(levels, i);
            for m in (1..=levels).rev() {
                let outer = table.mass(m - 1, i & ((1 << (m - 1)) - 1));
                acc += kernel.shell_value(m) * (outer - inner);
                inner = outer;
            }
            *out = acc + kernel.diagonal() * table.mass(levels, i);
        }
    });
    PotentialField {
        resolution,
        s: spec.s(),
        truncation: spec.truncation(),
        values,
    }
}

/// Ground-truth pairwise energy, O(4^N): every ordered cell pair contributes
/// mass_i * mass_j times the cell-averaged kernel. Row sums are written to a
/// fixed per-cell array and combined pairwise, so the result is identical for
/// every thread count.
pub fn energy_naive(
    mu: &CylinderMeasure,
    spec: &KernelSpec,
    threads: usize,
) -> Result<EnergyResult, EnergyError> {
    let resolution = mu.resolution();
    if resolution.levels() > NAIVE_MAX_LEVELS {
        return Err(EnergyError::ResolutionTooLargeForNaive {
            levels: resolution.levels(),
        });
    }
    let kernel = cell_averaged_kernel(spec, resolution);
    let masses = mu.masses();
    // value by xor word, indexed by trailing-zero count: shell m = tz + 1
    let by_tz: Vec<f64> = (0..resolution.levels())
        .map(|tz| kernel.shell_value(tz + 1))
        .collect();
    let mut rows = vec![0.0; masses.len()];
    fill_chunked(&mut rows, threads, |start, chunk| {
        for (offset, out) in chunk.iter_mut().enumerate() {
            let i = start + offset;
            let mass_i = masses[i];
            if mass_i == 0.0 {
                *out = 0.0;
                continue;
            }
            let mut acc = 0.0;
            for (j, &mass_j) in masses.iter().enumerate() {
                if j != i {
                    acc += mass_j * by_tz[(i ^ j).trailing_zeros() as usize];
                }
            }
            *out = mass_i * (acc + kernel.diagonal() * mass_i);
        }
    });
    Ok(EnergyResult {
        value: pairwise_sum(&rows),
        method: EnergyMethod::Naive,
        s: spec.s(),
        truncation: spec.truncation(),
        resolution,
    })
}

/// Shell-aggregated energy, O(2^N): cross terms at each level times the
/// shell constant, plus the diagonal against the finest squared sum. Terms
/// accumulate from the finest scale downward.
pub fn energy_hierarchical(mu: &CylinderMeasure, spec: &KernelSpec) -> EnergyResult {
    energy_hierarchical_from_table(&level_masses(mu), spec)
}

/// [`energy_hierarchical`] against a prebuilt aggregation table.
pub fn energy_hierarchical_from_table(table: &LevelMassTable, spec: &KernelSpec) -> EnergyResult {
    let resolution = table.resolution();
    let levels = resolution.levels();
    let kernel = cell_averaged_kernel(spec, resolution);
    let mut terms = Vec::with_capacity(levels as usize + 1);
    terms.push(kernel.diagonal() * table.squared_sum(levels));
    for m in (1..=levels).rev() {
        terms.push(kernel.shell_value(m) * table.cross_sum(m));
    }
    EnergyResult {
        value: pairwise_sum(&terms),
        method: EnergyMethod::Hierarchical,
        s: spec.s(),
        truncation: spec.truncation(),
        resolution,
    }
}

/// Spectral energy, O(N 2^N): kernel coefficient times squared measure
/// coefficient, summed over the whole spectrum. Exact at finite resolution
/// because the measure's coefficients vanish from index 2^N on. Terms
/// accumulate from the highest index downward; the index-0 term joins last.
pub fn energy_spectral(mu: &CylinderMeasure, spec: &KernelSpec) -> EnergyResult {
    let resolution = mu.resolution();
    let coefficients = coefficient_table(spec, resolution);
    let sp = spectrum(mu);
    let hat = sp.coefficients();
    let terms: Vec<f64> = (1..hat.len())
        .rev()
        .map(|k| coefficients[k] * hat[k] * hat[k])
        .collect();
    EnergyResult {
        value: pairwise_sum(&terms) + coefficients[0] * hat[0] * hat[0],
        method: EnergyMethod::Spectral,
        s: spec.s(),
        truncation: spec.truncation(),
        resolution,
    }
}

/// Dispatch on the method; `threads` only affects the pairwise method.
pub fn energy(
    mu: &CylinderMeasure,
    spec: &KernelSpec,
    method: EnergyMethod,
    threads: usize,
) -> Result<EnergyResult, EnergyError> {
    match method {
        EnergyMethod::Naive => energy_naive(mu, spec, threads),
        EnergyMethod::Hierarchical => Ok(energy_hierarchical(mu, spec)),
        EnergyMethod::Spectral => Ok(energy_spectral(mu, spec)),
    }
}
