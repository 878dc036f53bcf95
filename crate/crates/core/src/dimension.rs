//! Dimension lower bounds from energy growth.
//!
//! A measure whose s-energy stays bounded as the kernel truncation deepens
//! witnesses that its support has dimension at least s; a measure whose
//! truncated energies keep growing geometrically does not. This module turns
//! that dichotomy into an estimator: build the profile of truncated energies,
//! fit the asymptotic growth ratio of its increments, classify each exponent
//! as bounded or divergent, and bisect for the crossover. A dyadic
//! box-counting dimension serves as an upper comparator, and the
//! Fourier-side series gives an independent convergence diagnostic.
//!
//! Classification at finite resolution is honest about its limits: growth
//! ratios inside the configured dead band come back inconclusive rather than
//! being coerced to either side.

use crate::group::Resolution;
use crate::kernel::{block_of, full_coefficient, KernelError, KernelSpec};
use crate::measure::{level_masses, spectrum, CylinderMeasure, LevelMassTable};
use crate::sums::{least_squares_slope, pairwise_sum};
use std::f64::consts::LN_2;
use thiserror::Error;

/// Coarsest tolerance floor for the bisection: 2^-10.
pub const MIN_DIM_TOLERANCE: f64 = 0.0009765625;

const MAX_OUTER_STEPS: u32 = 10;
const MAX_EDGE_STEPS: u32 = 12;

#[derive(Debug, Error)]
pub enum DimensionError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("resolution {levels} is too coarse for this analysis (needs at least {min} levels)")]
    ResolutionTooCoarse { levels: u32, min: u32 },
    #[error("tolerance {tol} out of range [{MIN_DIM_TOLERANCE}, 1)")]
    BadTolerance { tol: f64 },
    #[error("thresholds must satisfy 0 < eps_bounded < eps_divergent, got {eps_bounded} and {eps_divergent}")]
    BadThresholds { eps_bounded: f64, eps_divergent: f64 },
    #[error("k_max {k_max} out of range 1..={cells} for this resolution")]
    KMaxOutOfRange { k_max: u64, cells: u64 },
    #[error("every probed exponent was inconclusive; raise the resolution or widen the thresholds")]
    AllInconclusive { probes: Vec<SProbe> },
}

/// Truncated energies of one measure at one exponent, for every truncation
/// level the resolution supports.
#[derive(Debug, Clone)]
pub struct EnergyProfile {
    pub s: f64,
    /// values[n - 1] is the energy truncated at level n; nondecreasing.
    pub values: Vec<f64>,
    /// Fitted asymptotic ratio of successive increments; `None` when the
    /// resolution leaves fewer than two increments to fit.
    pub growth_ratio: Option<f64>,
}

/// Increment between consecutive profile values, in closed form: moving the
/// truncation from n to n+1 reweights exactly the pairs that share a level-
/// (n+1) cylinder, so values[n+1] - values[n] = T_{n+1} (2^{(n+1)s} - 2^{ns}).
/// Computing it directly avoids the cancellation of differencing two
/// near-equal energies.
fn profile_increment(table: &LevelMassTable, s: f64, n: u32) -> f64 {
    table.squared_sum(n + 1) * (n as f64 * s).exp2() * (s * LN_2).exp_m1()
}

fn default_window(increment_count: usize) -> usize {
    increment_count.div_ceil(3).max(3).min(increment_count)
}

/// 2^slope of the least-squares fit to log2 increments over the trailing
/// window. The increments of a self-similar measure are exactly geometric,
/// so the fit recovers their ratio; the window averages out staircase
/// patterns in structured measures.
fn fitted_growth_ratio(table: &LevelMassTable, s: f64, window: Option<usize>) -> Option<f64> {
    let increment_count = table.resolution().levels() as usize - 1;
    if increment_count < 2 {
        return None;
    }
    let window = window
        .unwrap_or_else(|| default_window(increment_count))
        .clamp(2, increment_count);
    let first = increment_count - window + 1;
    let points: Vec<(f64, f64)> = (first..=increment_count)
        .map(|n| {
            let delta = profile_increment(table, s, n as u32);
            (n as f64, delta.log2())
        })
        .collect();
    Some(least_squares_slope(&points).exp2())
}

/// Profile of truncated energies for the full kernel at exponent s.
pub fn energy_profile(mu: &CylinderMeasure, s: f64) -> Result<EnergyProfile, DimensionError> {
    energy_profile_from_table(&level_masses(mu), s)
}

/// [`energy_profile`] against a prebuilt aggregation table.
///
/// values[n-1] accumulates the shell terms up to level n plus the clipped
/// remainder 2^{ns} T_n; this is the hierarchical energy with truncation n,
/// reorganized so the whole profile costs O(N).
pub fn energy_profile_from_table(
    table: &LevelMassTable,
    s: f64,
) -> Result<EnergyProfile, DimensionError> {
    KernelSpec::new(s)?;
    let levels = table.resolution().levels();
    let mut values = Vec::with_capacity(levels as usize);
    let mut shell_terms = 0.0;
    for n in 1..=levels {
        shell_terms += ((n as f64 - 1.0) * s).exp2() * table.cross_sum(n);
        values.push(shell_terms + (n as f64 * s).exp2() * table.squared_sum(n));
    }
    Ok(EnergyProfile {
        s,
        values,
        growth_ratio: fitted_growth_ratio(table, s, None),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Bounded,
    Divergent,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Bounded => "bounded",
            Verdict::Divergent => "divergent",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One classified exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SProbe {
    pub s: f64,
    pub growth_ratio: f64,
    pub verdict: Verdict,
}

/// Dead-band thresholds for the growth-ratio classifier, plus an optional
/// fit-window override (in increments, counted from the finest level).
#[derive(Debug, Clone, Copy)]
pub struct ClassifierConfig {
    /// Ratios at most 1 + eps_bounded classify as bounded.
    pub eps_bounded: f64,
    /// Ratios at least 1 + eps_divergent classify as divergent.
    pub eps_divergent: f64,
    /// Trailing-window length for the fit; default is a third of the
    /// available increments, at least 3.
    pub window: Option<usize>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            eps_bounded: 0.01,
            eps_divergent: 0.015,
            window: None,
        }
    }
}

impl ClassifierConfig {
    fn validate(&self) -> Result<(), DimensionError> {
        if !(self.eps_bounded > 0.0 && self.eps_bounded < self.eps_divergent) {
            return Err(DimensionError::BadThresholds {
                eps_bounded: self.eps_bounded,
                eps_divergent: self.eps_divergent,
            });
        }
        Ok(())
    }
}

/// Classify one exponent by its fitted energy-growth ratio.
pub fn classify_s(
    mu: &CylinderMeasure,
    s: f64,
    config: &ClassifierConfig,
) -> Result<SProbe, DimensionError> {
    classify_s_from_table(&level_masses(mu), s, config)
}

/// [`classify_s`] against a prebuilt aggregation table; O(N) per call.
pub fn classify_s_from_table(
    table: &LevelMassTable,
    s: f64,
    config: &ClassifierConfig,
) -> Result<SProbe, DimensionError> {
    config.validate()?;
    KernelSpec::new(s)?;
    let levels = table.resolution().levels();
    let Some(growth_ratio) = fitted_growth_ratio(table, s, config.window) else {
        return Err(DimensionError::ResolutionTooCoarse { levels, min: 3 });
    };
    let verdict = if growth_ratio <= 1.0 + config.eps_bounded {
        Verdict::Bounded
    } else if growth_ratio >= 1.0 + config.eps_divergent {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    Ok(SProbe {
        s,
        growth_ratio,
        verdict,
    })
}

/// Result of the bisection for the largest bounded exponent.
#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    /// Midpoint of the final bracket; the certified claim is that the
    /// support's dimension is at least the bracket's low end.
    pub lower_bound: f64,
    /// (largest exponent classified bounded, smallest classified divergent);
    /// the ends default to 0 and 1 when no probe certified them.
    pub bracket: (f64, f64),
    /// Whether the bracket width reached the requested tolerance.
    pub resolved: bool,
    pub probes: Vec<SProbe>,
    pub resolution: Resolution,
}

fn probe(
    table: &LevelMassTable,
    s: f64,
    config: &ClassifierConfig,
    probes: &mut Vec<SProbe>,
) -> Verdict {
    let p = classify_s_from_table(table, s, config).expect("validated inputs");
    probes.push(p);
    p.verdict
}

/// Estimate the largest exponent with bounded energy growth by bisection.
///
/// The bracket starts at the a-priori bounds (0, 1). A midpoint classified
/// bounded raises the low end, divergent lowers the high end. The first
/// inconclusive midpoint stops the outer loop and triggers one edge
/// refinement on each side: the largest still-bounded exponent below the
/// dead band and the smallest still-divergent exponent above it, each found
/// by its own short bisection. The estimate reports `resolved = false` when
/// the dead band leaves the final bracket wider than the tolerance.
pub fn dim_lower_bound(mu: &CylinderMeasure, tol: f64) -> Result<DimensionEstimate, DimensionError> {
    dim_lower_bound_with(&level_masses(mu), tol, &ClassifierConfig::default())
}

/// [`dim_lower_bound`] with explicit thresholds, reusing a prebuilt table.
pub fn dim_lower_bound_with(
    table: &LevelMassTable,
    tol: f64,
    config: &ClassifierConfig,
) -> Result<DimensionEstimate, DimensionError> {
    config.validate()?;
    if !(tol >= MIN_DIM_TOLERANCE && tol < 1.0) {
        return Err(DimensionError::BadTolerance { tol });
    }
    let levels = table.resolution().levels();
    if levels < 3 {
        return Err(DimensionError::ResolutionTooCoarse { levels, min: 3 });
    }

    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut probes = Vec::new();
    for _ in 0..MAX_OUTER_STEPS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match probe(table, mid, config, &mut probes) {
            Verdict::Bounded => lo = mid,
            Verdict::Divergent => hi = mid,
            Verdict::Inconclusive => {
                // the dead band straddles mid; close in on it from both sides
                let mut a = lo;
                let mut b = mid;
                for _ in 0..MAX_EDGE_STEPS {
                    if b - a <= tol / 8.0 {
                        break;
                    }
                    let x = 0.5 * (a + b);
                    if probe(table, x, config, &mut probes) == Verdict::Bounded {
                        a = x;
                    } else {
                        b = x;
                    }
                }
                lo = a;
                let mut a = mid;
                let mut b = hi;
                for _ in 0..MAX_EDGE_STEPS {
                    if b - a <= tol / 8.0 {
                        break;
                    }
                    let x = 0.5 * (a + b);
                    if probe(table, x, config, &mut probes) == Verdict::Divergent {
                        b = x;
                    } else {
                        a = x;
                    }
                }
                hi = b;
                break;
            }
        }
    }

    if lo == 0.0 && hi == 1.0 {
        return Err(DimensionError::AllInconclusive { probes });
    }
    Ok(DimensionEstimate {
        lower_bound: 0.5 * (lo + hi),
        bracket: (lo, hi),
        resolved: hi - lo <= tol,
        probes,
        resolution: table.resolution(),
    })
}

/// Per-block comparison of the Fourier-side series with weight k^{s-1}
/// against the kernel-weighted series.
#[derive(Debug, Clone)]
pub struct FourierBlock {
    pub m: u32,
    /// sum of k^{s-1} hat(k)^2 over the block's indices
    pub power_sum: f64,
    /// sum of kernel-coefficient-weighted terms over the same indices
    pub kernel_sum: f64,
    pub weight_ratio_min: f64,
    pub weight_ratio_max: f64,
}

#[derive(Debug, Clone)]
pub struct FourierSeriesCheck {
    pub s: f64,
    pub k_max: u64,
    /// partial sum of k^{s-1} hat(k)^2 for k = 1..=k_max
    pub power_weighted_total: f64,
    /// partial sum with the kernel's coefficient as weight instead
    pub kernel_weighted_total: f64,
    pub blocks: Vec<FourierBlock>,
}

/// Partial sums of the two convergence-test series over the spectrum, with
/// per-block weight-ratio envelopes. Indices at and beyond 2^N carry no
/// spectral mass and contribute nothing.
pub fn fourier_series_check(
    mu: &CylinderMeasure,
    s: f64,
    k_max: u64,
) -> Result<FourierSeriesCheck, DimensionError> {
    KernelSpec::new(s)?;
    let cells = mu.resolution().cells() as u64;
    if k_max < 1 || k_max > cells {
        return Err(DimensionError::KMaxOutOfRange { k_max, cells });
    }
    let sp = spectrum(mu);
    let hat = sp.coefficients();
    let k_hi = k_max.min(cells - 1);

    // totals accumulate from the highest index down, mirroring the spectral
    // energy sum term for term
    let kernel_terms: Vec<f64> = (1..=k_hi)
        .rev()
        .map(|k| {
            let c = hat[k as usize];
            full_coefficient(s, k).expect("validated exponent") * c * c
        })
        .collect();
    let power_terms: Vec<f64> = (1..=k_hi)
        .rev()
        .map(|k| {
            let c = hat[k as usize];
            ((s - 1.0) * (k as f64).log2()).exp2() * c * c
        })
        .collect();

    let mut blocks = Vec::new();
    for m in 1..=block_of(k_hi) {
        let first = 1u64 << (m - 1);
        let last = ((1u64 << m) - 1).min(k_hi);
        let mut power_sum = 0.0;
        let mut kernel_sum = 0.0;
        let mut ratio_min = f64::INFINITY;
        let mut ratio_max = f64::NEG_INFINITY;
        for k in first..=last {
            let c = hat[k as usize];
            let kernel_weight = full_coefficient(s, k).expect("validated exponent");
            let power_weight = ((s - 1.0) * (k as f64).log2()).exp2();
            kernel_sum += kernel_weight * c * c;
            power_sum += power_weight * c * c;
            let ratio = kernel_weight / power_weight;
            ratio_min = ratio_min.min(ratio);
            ratio_max = ratio_max.max(ratio);
        }
        blocks.push(FourierBlock {
            m,
            power_sum,
            kernel_sum,
            weight_ratio_min: ratio_min,
            weight_ratio_max: ratio_max,
        });
    }

    Ok(FourierSeriesCheck {
        s,
        k_max,
        power_weighted_total: pairwise_sum(&power_terms),
        kernel_weighted_total: pairwise_sum(&kernel_terms),
        blocks,
    })
}

/// Per-level maxima of cylinder mass rescaled by 2^{ns}: bounded iff no
/// point carries more mass at scale 2^-n than an s-dimensional profile
/// allows.
#[derive(Debug, Clone)]
pub struct ScalingDiagnostic {
    pub s: f64,
    /// per_level[n] = max over level-n cylinders of mass * 2^{ns}, n = 0..=N
    pub per_level: Vec<f64>,
    pub supremum: f64,
}

pub fn scaling_diagnostic(mu: &CylinderMeasure, s: f64) -> Result<ScalingDiagnostic, DimensionError> {
    scaling_diagnostic_from_table(&level_masses(mu), s)
}

pub fn scaling_diagnostic_from_table(
    table: &LevelMassTable,
    s: f64,
) -> Result<ScalingDiagnostic, DimensionError> {
    KernelSpec::new(s)?;
    let levels = table.resolution().levels();
    let per_level: Vec<f64> = (0..=levels)
        .map(|n| {
            let max_mass = table.level(n).iter().cloned().fold(0.0f64, f64::max);
            max_mass * (n as f64 * s).exp2()
        })
        .collect();
    let supremum = per_level.iter().cloned().fold(0.0f64, f64::max);
    Ok(ScalingDiagnostic {
        s,
        per_level,
        supremum,
    })
}

/// Dyadic box-counting dimension: least-squares slope of log2(occupied
/// level-n cylinder count) over n = 1..=N. An upper comparator for the
/// energy-based lower bound.
pub fn box_counting_dim(mu: &CylinderMeasure) -> Result<f64, DimensionError> {
    box_counting_dim_from_table(&level_masses(mu))
}

pub fn box_counting_dim_from_table(table: &LevelMassTable) -> Result<f64, DimensionError> {
    let levels = table.resolution().levels();
    if levels < 2 {
        return Err(DimensionError::ResolutionTooCoarse { levels, min: 2 });
    }
    let points: Vec<(f64, f64)> = (1..=levels)
        .map(|n| (n as f64, (table.occupied(n) as f64).log2()))
        .collect();
    Ok(least_squares_slope(&points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{energy_hierarchical, energy_spectral};
    use crate::group::CylinderId;
    use crate::kernel::truncated_coefficient;

    fn res(n: u32) -> Resolution {
        Resolution::new(n).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    fn pattern_even(n: u32) -> CylinderMeasure {
        let coords: Vec<u32> = (2..=n).step_by(2).collect();
        CylinderMeasure::pattern(&coords, res(n)).unwrap()
    }

    fn pattern_mod3(n: u32) -> CylinderMeasure {
        let coords: Vec<u32> = (1..=n).filter(|c| c % 3 != 0).collect();
        CylinderMeasure::pattern(&coords, res(n)).unwrap()
    }

    fn single_cylinder(n: u32) -> CylinderMeasure {
        CylinderMeasure::uniform_on(&CylinderId::new(n, 5).unwrap(), res(n)).unwrap()
    }

    #[test]
    fn haar_profile_matches_truncated_coefficients() {
        let mu = CylinderMeasure::haar(res(12));
        for s in [0.25, 0.5, 0.9] {
            let profile = energy_profile(&mu, s).unwrap();
            for (idx, &v) in profile.values.iter().enumerate() {
                let expected = truncated_coefficient(s, idx as u32 + 1, 0).unwrap();
                assert!(close(v, expected, 1e-12), "s={s} n={}", idx + 1);
            }
            // increments decay geometrically at ratio 2^{s-1}
            let ratio = profile.growth_ratio.unwrap();
            assert!(close(ratio, (s - 1.0).exp2(), 1e-9), "s={s} ratio={ratio}");
        }
    }

    #[test]
    fn single_cylinder_profile_is_a_pure_power() {
        let mu = single_cylinder(10);
        let s = 0.5;
        let profile = energy_profile(&mu, s).unwrap();
        for (idx, &v) in profile.values.iter().enumerate() {
            let n = idx as u32 + 1;
            let expected = (n as f64 * s).exp2(); // mass is exactly 1
            assert!(close(v, expected, 1e-13), "n={n}");
        }
        assert!(close(profile.growth_ratio.unwrap(), s.exp2(), 1e-9));
    }

    #[test]
    fn profile_is_nondecreasing_and_matches_hierarchical_truncations() {
        let mu = CylinderMeasure::random(res(10), 404, 0.35).unwrap();
        let s = 0.6;
        let profile = energy_profile(&mu, s).unwrap();
        let mut previous = 0.0;
        for (idx, &v) in profile.values.iter().enumerate() {
            assert!(v >= previous, "n={}", idx + 1);
            previous = v;
            let spec = KernelSpec::new(s)
                .unwrap()
                .with_truncation(idx as u32 + 1)
                .unwrap();
            let direct = energy_hierarchical(&mu, &spec).value;
            assert!(close(v, direct, 1e-12), "n={}", idx + 1);
        }
    }

    #[test]
    fn closed_form_increments_match_value_differences() {
        let mu = CylinderMeasure::random(res(12), 8, 0.2).unwrap();
        let table = level_masses(&mu);
        let profile = energy_profile_from_table(&table, 0.5).unwrap();
        for n in 1..12u32 {
            let diff = profile.values[n as usize] - profile.values[n as usize - 1];
            let direct = profile_increment(&table, 0.5, n);
            assert!(close(diff, direct, 1e-9), "n={n}");
        }
    }

    #[test]
    fn classifier_verdicts_on_known_measures() {
        let config = ClassifierConfig::default();
        let haar = CylinderMeasure::haar(res(20));
        for s in [0.1, 0.5, 0.875, 0.95, 0.99] {
            let p = classify_s(&haar, s, &config).unwrap();
            assert_eq!(p.verdict, Verdict::Bounded, "s={s} ratio={}", p.growth_ratio);
        }

        let even = pattern_even(20);
        assert_eq!(classify_s(&even, 0.25, &config).unwrap().verdict, Verdict::Bounded);
        assert_eq!(classify_s(&even, 0.75, &config).unwrap().verdict, Verdict::Divergent);
        // the fitted ratio for this staircase is exactly 2^{s - 1/2}, so an s
        // just above 1/2 lands inside the dead band deterministically
        assert_eq!(
            classify_s(&even, 0.518, &config).unwrap().verdict,
            Verdict::Inconclusive
        );

        let single = single_cylinder(20);
        assert_eq!(classify_s(&single, 0.5, &config).unwrap().verdict, Verdict::Divergent);
    }

    #[test]
    fn classifier_verdict_is_monotone_in_s() {
        let mu = pattern_mod3(18);
        let config = ClassifierConfig::default();
        let mut seen_divergent = false;
        for i in 1..40 {
            let s = i as f64 / 40.0;
            let verdict = classify_s(&mu, s, &config).unwrap().verdict;
            if seen_divergent {
                assert_ne!(verdict, Verdict::Bounded, "s={s}");
            }
            if verdict == Verdict::Divergent {
                seen_divergent = true;
            }
        }
        assert!(seen_divergent);
    }

    #[test]
    fn classifier_requires_enough_levels() {
        let mu = CylinderMeasure::haar(res(2));
        assert!(matches!(
            classify_s(&mu, 0.5, &ClassifierConfig::default()),
            Err(DimensionError::ResolutionTooCoarse { levels: 2, min: 3 })
        ));
    }

    #[test]
    fn classifier_rejects_bad_thresholds() {
        let mu = CylinderMeasure::haar(res(4));
        let config = ClassifierConfig {
            eps_bounded: 0.05,
            eps_divergent: 0.01,
            window: None,
        };
        assert!(matches!(
            classify_s(&mu, 0.5, &config),
            Err(DimensionError::BadThresholds { .. })
        ));
    }

    #[test]
    fn dim_estimate_haar_has_full_dimension() {
        let mu = CylinderMeasure::haar(res(20));
        let est = dim_lower_bound(&mu, 0.015625).unwrap();
        assert!(est.resolved);
        assert!(est.lower_bound >= 0.95, "got {}", est.lower_bound);
        assert!(close(est.bracket.0, 0.984375, 1e-12));
        assert_eq!(est.bracket.1, 1.0);
    }

    #[test]
    fn dim_estimate_even_pattern_brackets_one_half() {
        let mu = pattern_even(20);
        let est = dim_lower_bound(&mu, 0.015625).unwrap();
        assert!(est.resolved, "bracket {:?}", est.bracket);
        assert!(est.lower_bound >= 0.45 && est.lower_bound <= 0.55, "got {}", est.lower_bound);
    }

    #[test]
    fn dim_estimate_mod3_pattern_brackets_one_third() {
        let mu = pattern_mod3(20);
        let est = dim_lower_bound(&mu, 0.015625).unwrap();
        assert!(est.resolved, "bracket {:?}", est.bracket);
        assert!(est.lower_bound >= 0.28 && est.lower_bound <= 0.39, "got {}", est.lower_bound);
    }

    #[test]
    fn dim_estimate_single_cylinder_is_near_zero() {
        let mu = single_cylinder(20);
        let est = dim_lower_bound(&mu, 0.015625).unwrap();
        assert!(est.resolved, "bracket {:?}", est.bracket);
        assert!(est.lower_bound <= 0.05, "got {}", est.lower_bound);
    }

    #[test]
    fn dim_estimates_respect_the_box_counting_ceiling() {
        for mu in [
            CylinderMeasure::haar(res(16)),
            pattern_even(16),
            pattern_mod3(16),
            single_cylinder(16),
        ] {
            let table = level_masses(&mu);
            let est = dim_lower_bound_with(&table, 0.015625, &ClassifierConfig::default()).unwrap();
            let box_dim = box_counting_dim_from_table(&table).unwrap();
            assert!(
                est.lower_bound <= box_dim + 0.05,
                "lower {} box {box_dim}",
                est.lower_bound
            );
        }
    }

    #[test]
    fn dim_bracket_ends_carry_matching_verdicts() {
        let mu = pattern_even(18);
        let est = dim_lower_bound(&mu, 0.015625).unwrap();
        let (lo, hi) = est.bracket;
        for p in &est.probes {
            if p.s == lo {
                assert_eq!(p.verdict, Verdict::Bounded);
            }
            if p.s == hi {
                assert_eq!(p.verdict, Verdict::Divergent);
            }
        }
        assert!(est.probes.iter().any(|p| p.s == lo));
    }

    #[test]
    fn dim_rejects_out_of_range_tolerances() {
        let mu = CylinderMeasure::haar(res(6));
        assert!(matches!(
            dim_lower_bound(&mu, 0.0001),
            Err(DimensionError::BadTolerance { .. })
        ));
        assert!(matches!(
            dim_lower_bound(&mu, 1.5),
            Err(DimensionError::BadTolerance { .. })
        ));
    }

    #[test]
    fn dim_reports_all_inconclusive_as_an_error() {
        // a single cylinder diverges at every probed s; squeezing the dead
        // band around every ratio in (1, 2) leaves no classifiable exponent
        let mu = single_cylinder(8);
        let config = ClassifierConfig {
            eps_bounded: 1e-12,
            eps_divergent: 1e12,
            window: None,
        };
        match dim_lower_bound_with(&level_masses(&mu), 0.015625, &config) {
            Err(DimensionError::AllInconclusive { probes }) => {
                assert!(!probes.is_empty());
                assert!(probes.iter().all(|p| p.verdict == Verdict::Inconclusive));
            }
            other => panic!("expected all-inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn fourier_check_totals_match_the_spectral_energy_exactly() {
        let mu = CylinderMeasure::random(res(8), 55, 0.3).unwrap();
        let s = 0.5;
        let check = fourier_series_check(&mu, s, 255).unwrap();
        let sp = spectrum(&mu);
        let k0 = full_coefficient(s, 0).unwrap() * sp.coefficients()[0] * sp.coefficients()[0];
        let spectral = energy_spectral(&mu, &KernelSpec::new(s).unwrap()).value;
        assert_eq!(check.kernel_weighted_total + k0, spectral);
    }

    #[test]
    fn fourier_check_on_haar_is_zero_beyond_the_constant() {
        let mu = CylinderMeasure::haar(res(8));
        let check = fourier_series_check(&mu, 0.5, 256).unwrap();
        assert_eq!(check.power_weighted_total, 0.0);
        assert_eq!(check.kernel_weighted_total, 0.0);
    }

    #[test]
    fn fourier_weight_ratios_are_uniformly_comparable() {
        let mu = CylinderMeasure::random(res(12), 9, 0.0).unwrap();
        let check = fourier_series_check(&mu, 0.35, 4096).unwrap();
        let mins = check
            .blocks
            .iter()
            .skip(2)
            .map(|b| b.weight_ratio_min)
            .fold(f64::INFINITY, f64::min);
        let maxs = check
            .blocks
            .iter()
            .skip(2)
            .map(|b| b.weight_ratio_max)
            .fold(0.0f64, f64::max);
        assert!(mins > 0.0);
        assert!(maxs / mins <= 2.0, "ratio envelope {mins}..{maxs}");
    }

    #[test]
    fn fourier_blocks_of_subcritical_pattern_decay() {
        let mu = pattern_even(14);
        let check = fourier_series_check(&mu, 0.4, (1 << 14) - 1).unwrap();
        // only even blocks carry spectral mass; below the critical exponent
        // their kernel-weighted sums shrink geometrically (block m sits at
        // index m - 1)
        for m in [6usize, 8, 10] {
            assert!(
                check.blocks[m + 1].kernel_sum < check.blocks[m - 1].kernel_sum,
                "m={m}"
            );
        }
        assert!(check.kernel_weighted_total.is_finite());
    }

    #[test]
    fn fourier_check_validates_k_max() {
        let mu = CylinderMeasure::haar(res(4));
        assert!(matches!(
            fourier_series_check(&mu, 0.5, 0),
            Err(DimensionError::KMaxOutOfRange { .. })
        ));
        assert!(matches!(
            fourier_series_check(&mu, 0.5, 17),
            Err(DimensionError::KMaxOutOfRange { .. })
        ));
        assert!(fourier_series_check(&mu, 0.5, 16).is_ok());
    }

    #[test]
    fn scaling_diagnostic_known_profiles() {
        let haar = CylinderMeasure::haar(res(10));
        let d = scaling_diagnostic(&haar, 0.5).unwrap();
        for (n, &v) in d.per_level.iter().enumerate() {
            assert!(close(v, (n as f64 * -0.5).exp2(), 1e-12), "n={n}");
        }
        assert!(close(d.supremum, 1.0, 1e-12));

        let single = single_cylinder(10);
        let d = scaling_diagnostic(&single, 0.5).unwrap();
        assert!(close(d.supremum, 32.0, 1e-12)); // 2^{10 * 0.5} * mass 1

        // the even pattern at the critical exponent oscillates between
        // 2^{-1/2} and 1 without escaping
        let even = pattern_even(12);
        let d = scaling_diagnostic(&even, 0.5).unwrap();
        for (n, &v) in d.per_level.iter().enumerate() {
            assert!(v <= 1.0 + 1e-12 && v >= 0.5f64.sqrt() - 1e-12, "n={n} v={v}");
        }
    }

    #[test]
    fn box_counting_dimensions_of_the_fixtures() {
        assert_eq!(box_counting_dim(&CylinderMeasure::haar(res(12))).unwrap(), 1.0);
        assert_eq!(box_counting_dim(&single_cylinder(12)).unwrap(), 0.0);
        let even = box_counting_dim(&pattern_even(20)).unwrap();
        assert!((even - 0.5).abs() <= 0.02, "even {even}");
        let mod3 = box_counting_dim(&pattern_mod3(20)).unwrap();
        assert!((mod3 - 1.0 / 3.0).abs() <= 0.04, "mod3 {mod3}");
    }

    #[test]
    fn estimates_and_probes_stay_consistent() {
        let mu = pattern_even(16);
        let est = dim_lower_bound(&mu, 0.03125).unwrap();
        assert!(est.bracket.0 < est.bracket.1);
        assert!(est.lower_bound > est.bracket.0 && est.lower_bound < est.bracket.1);
        assert!(est.probes.len() <= (MAX_OUTER_STEPS + 2 * MAX_EDGE_STEPS) as usize);
        for p in &est.probes {
            assert!(p.s > 0.0 && p.s < 1.0);
            assert!(p.growth_ratio.is_finite());
        }
    }
}
