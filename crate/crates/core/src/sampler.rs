//! Monte Carlo sampling of single Otto cycles under the two-point measurement scheme.
//!
//! Each cycle draws `n ~ Boltzmann(β_cold, E^0)`, `m ~ T_exp[n][·]`,
//! `k ~ Boltzmann(β_hot, E^τ)` and `l ~ T_com[k][·]`. The hot isochore
//! thermalizes completely, so `k` ignores `m`. All randomness comes from a
//! ChaCha8 stream seeded with an explicit `u64`, which makes every estimate
//! reproducible bit for bit across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{CoreError, CoreResult};
use crate::extended::ExtendedReal;
use crate::numeric::least_squares_slope;
use crate::spectra::{efficiency_distribution, efficiency_of, joint_distribution, EfficiencyDistribution, EngineSpec};
use crate::DEFAULT_GROUPING_TOL;

/// Generator used for all sampling.
pub type SamplerRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SamplerRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum expected count for a Pearson bin to stand on its own.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub w1: f64,
    pub q2: f64,
    pub w3: f64,
    pub eta: ExtendedReal,
}

/// Inverse-CDF draw from a discrete distribution given by cumulative weights.
#[derive(Debug, Clone)]
struct Categorical {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Self {
            cumulative,
            last_positive,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty weights");
        let r = rng.random::<f64>() * total;
        // zero-width intervals never satisfy r < c[i] before an earlier index does
        self.cumulative
            .iter()
            .position(|&c| r < c)
            .unwrap_or(self.last_positive)
    }
}

/// Precomputed cumulative tables for repeated cycle draws from one engine.
#[derive(Debug, Clone)]
pub struct CycleSampler<'a> {
    spec: &'a EngineSpec,
    cold: Categorical,
    hot: Categorical,
    expansion: Vec<Categorical>,
    compression: Vec<Categorical>,
    tol: f64,
}

impl<'a> CycleSampler<'a> {
    pub fn new(spec: &'a EngineSpec) -> Self {
        Self::with_tol(spec, DEFAULT_GROUPING_TOL)
    }

    /// `tol` is the zero-heat tolerance handed to [`efficiency_of`].
    pub fn with_tol(spec: &'a EngineSpec, tol: f64) -> Self {
        let d = spec.dim();
        Self {
            spec,
            cold: Categorical::new(&spec.thermal_cold().weights),
            hot: Categorical::new(&spec.thermal_hot().weights),
            expansion: (0..d).map(|n| Categorical::new(spec.t_expansion().row(n))).collect(),
            compression: (0..d).map(|k| Categorical::new(spec.t_compression().row(k))).collect(),
            tol,
        }
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R) -> [usize; 4] {
        let n = self.cold.draw(rng);
        let m = self.expansion[n].draw(rng);
        let k = self.hot.draw(rng);
        let l = self.compression[k].draw(rng);
        [n, m, k, l]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CycleRecord {
        let [n, m, k, l] = self.sample_indices(rng);
        self.record(n, m, k, l)
    }

    fn record(&self, n: usize, m: usize, k: usize, l: usize) -> CycleRecord {
        let e0 = self.spec.spectrum_start().levels();
        let et = self.spec.spectrum_end().levels();
        let (w1, q2, w3) = (et[m] - e0[n], et[k] - et[m], e0[l] - et[k]);
        CycleRecord {
            n,
            m,
            k,
            l,
            w1,
            q2,
            w3,
            eta: efficiency_of(w1, q2, w3, self.tol).0,
        }
    }
}

/// Draws one cycle. Repeated draws should reuse a [`CycleSampler`].
pub fn sample_cycle<R: Rng + ?Sized>(spec: &EngineSpec, rng: &mut R) -> CycleRecord {
    CycleSampler::new(spec).sample(rng)
}

/// Sample counts per efficiency value.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    atoms: Vec<(ExtendedReal, u64)>,
    total: u64,
    seed: u64,
}

impl EmpiricalDistribution {
    /// Counts are merged within `tol` and sorted ascending; `total` is their sum.
    pub fn from_counts(counts: impl IntoIterator<Item = (ExtendedReal, u64)>, seed: u64, tol: f64) -> Self {
        let mut atoms: Vec<(ExtendedReal, u64)> = Vec::new();
        for (eta, count) in counts {
            if count == 0 {
                continue;
            }
            match atoms.iter_mut().find(|(e, _)| e.approx_eq(eta, tol)) {
                Some(slot) => slot.1 += count,
                None => atoms.push((eta, count)),
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = atoms.iter().map(|a| a.1).sum();
        Self { atoms, total, seed }
    }

    pub fn atoms(&self) -> &[(ExtendedReal, u64)] {
        &self.atoms
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count_at(&self, eta: ExtendedReal, tol: f64) -> u64 {
        self.atoms
            .iter()
            .filter(|(e, _)| e.approx_eq(eta, tol))
            .map(|a| a.1)
            .sum()
    }

    /// Pools two independent runs. The result keeps `self`'s seed.
    pub fn merge(&self, other: &Self, tol: f64) -> Self {
        Self::from_counts(self.atoms.iter().chain(&other.atoms).copied(), self.seed, tol)
    }
}

/// Empirical efficiency distribution of `n_samples` independent cycles.
///
/// Sampled values are snapped onto the exact support; a value with no exact
/// counterpart is kept as-is so that [`goodness_of_fit`] reports it.
pub fn estimate_efficiency_distribution(
    spec: &EngineSpec,
    n_samples: u64,
    seed: u64,
) -> CoreResult<EmpiricalDistribution> {
    if n_samples == 0 {
        return Err(CoreError::InvalidInput("at least one sample is required".into()));
    }
    let tol = DEFAULT_GROUPING_TOL;
    let exact = efficiency_distribution(&joint_distribution(spec), tol);
    let sampler = CycleSampler::with_tol(spec, tol);
    let d = spec.dim();

    // slot per measurement path, resolved once
    let mut slots: Vec<ExtendedReal> = exact.support().collect();
    let mut path_slot = vec![0usize; d.pow(4)];
    for (index, slot) in path_slot.iter_mut().enumerate() {
        let (n, m, k, l) = (index / (d * d * d), (index / (d * d)) % d, (index / d) % d, index % d);
        let eta = sampler.record(n, m, k, l).eta;
        *slot = match slots.iter().position(|s| s.approx_eq(eta, tol)) {
            Some(i) => i,
            None => {
                slots.push(eta);
                slots.len() - 1
            }
        };
    }

    let mut counts = vec![0u64; slots.len()];
    let mut rng = seeded_rng(seed);
    for _ in 0..n_samples {
        let [n, m, k, l] = sampler.sample_indices(&mut rng);
        counts[path_slot[((n * d + m) * d + k) * d + l]] += 1;
    }
    Ok(EmpiricalDistribution::from_counts(
        slots.into_iter().zip(counts),
        seed,
        tol,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub tv_distance: f64,
    pub chi2_stat: f64,
    pub dof: usize,
    /// Upper-tail probability of `chi2_stat`; 1 when there is nothing to test.
    pub p_value: f64,
}

impl FitReport {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Total-variation distance and Pearson χ² of an empirical distribution
/// against exact weights.
///
/// Atoms with expected count below [`MIN_EXPECTED_COUNT`] are pooled into a
/// single bin, which is used only if it reaches that threshold itself.
pub fn goodness_of_fit(empirical: &EmpiricalDistribution, exact: &EfficiencyDistribution) -> CoreResult<FitReport> {
    let tol = exact.grouping_tol();
    for &(eta, count) in empirical.atoms() {
        if count > 0 && exact.mass_at(eta) <= 0.0 {
            return Err(CoreError::SupportViolation(format!(
                "{count} samples at eta = {eta}, which has no mass in the exact distribution"
            )));
        }
    }
    let n = empirical.total() as f64;
    let observed_freq = |eta: ExtendedReal| empirical.count_at(eta, tol) as f64 / n;

    let mut tv = 0.0;
    for atom in exact.atoms() {
        tv += (observed_freq(atom.eta) - atom.prob).abs();
    }
    // empirical atoms are all inside the exact support by now
    let tv_distance = 0.5 * tv;

    let mut chi2_stat = 0.0;
    let mut bins = 0usize;
    let (mut pooled_expected, mut pooled_observed) = (0.0, 0.0);
    for atom in exact.atoms() {
        let expected = atom.prob * n;
        let observed = empirical.count_at(atom.eta, tol) as f64;
        if expected >= MIN_EXPECTED_COUNT {
            chi2_stat += (observed - expected).powi(2) / expected;
            bins += 1;
        } else {
            pooled_expected += expected;
            pooled_observed += observed;
        }
    }
    if pooled_expected >= MIN_EXPECTED_COUNT {
        chi2_stat += (pooled_observed - pooled_expected).powi(2) / pooled_expected;
        bins += 1;
    }
    let dof = bins.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| CoreError::InvalidInput(e.to_string()))?
            .sf(chi2_stat)
    };
    Ok(FitReport {
        tv_distance,
        chi2_stat,
        dof,
        p_value,
    })
}

/// Mean total-variation distance at each sample size, averaged over a family
/// of seeds, and the log-log slope of that curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TvConvergence {
    pub rows: Vec<(u64, f64)>,
    pub slope: f64,
}

pub fn tv_convergence(spec: &EngineSpec, sample_sizes: &[u64], seeds: &[u64]) -> CoreResult<TvConvergence> {
    if sample_sizes.len() < 2 || seeds.is_empty() {
        return Err(CoreError::InvalidInput(
            "need two sample sizes and at least one seed".into(),
        ));
    }
    let exact = efficiency_distribution(&joint_distribution(spec), DEFAULT_GROUPING_TOL);
    let mut rows = Vec::with_capacity(sample_sizes.len());
    for &n in sample_sizes {
        let mut sum = 0.0;
        for &seed in seeds {
            let emp = estimate_efficiency_distribution(spec, n, seed)?;
            sum += goodness_of_fit(&emp, &exact)?.tv_distance;
        }
        rows.push((n, sum / seeds.len() as f64));
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|&(n, tv)| ((n as f64).ln(), tv.ln())).collect();
    Ok(TvConvergence {
        slope: least_squares_slope(&points),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{EfficiencyAtom, EnergySpectrum, Unitary};

    fn identity_spec(beta: f64) -> EngineSpec {
        let s0 = EnergySpectrum::new(vec![-0.5, 0.5]).unwrap();
        let s1 = EnergySpectrum::new(vec![-2.0, 2.0]).unwrap();
        EngineSpec::new(s0, s1, Unitary::identity(2), Unitary::identity(2), beta, beta).unwrap()
    }

    #[test]
    fn frozen_engine_stays_in_ground_state() {
        let spec = identity_spec(700.0);
        let sampler = CycleSampler::new(&spec);
        let mut rng = seeded_rng(3);
        for _ in 0..1000 {
            let rec = sampler.sample(&mut rng);
            assert_eq!((rec.n, rec.m, rec.k, rec.l), (0, 0, 0, 0));
            assert_eq!((rec.w1, rec.q2, rec.w3), (-1.5, 0.0, 1.5));
            assert_eq!(rec.eta, ExtendedReal::Finite(0.0));
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let spec = identity_spec(0.3);
        let draw = |seed| {
            let mut rng = seeded_rng(seed);
            (0..200).map(|_| sample_cycle(&spec, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
        assert_eq!(
            estimate_efficiency_distribution(&spec, 5000, 9).unwrap(),
            estimate_efficiency_distribution(&spec, 5000, 9).unwrap()
        );
    }

    #[test]
    fn single_sample() {
        let emp = estimate_efficiency_distribution(&identity_spec(1.0), 1, 5).unwrap();
        assert_eq!(emp.total(), 1);
        assert_eq!(emp.atoms().len(), 1);
        assert_eq!(emp.atoms()[0].1, 1);
        assert_eq!(emp.seed(), 5);
        assert!(estimate_efficiency_distribution(&identity_spec(1.0), 0, 5).is_err());
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let c = Categorical::new(&[0.0, 0.3, 0.0, 0.7, 0.0]);
        let mut rng = seeded_rng(1);
        for _ in 0..10_000 {
            let i = c.draw(&mut rng);
            assert!(i == 1 || i == 3);
        }
    }

    fn exact(weights: &[(f64, f64)]) -> EfficiencyDistribution {
        EfficiencyDistribution::from_atoms(
            weights
                .iter()
                .map(|&(eta, prob)| EfficiencyAtom { eta: eta.into(), prob }),
            0.0,
            1e-9,
        )
    }

    #[test]
    fn exact_counts_fit_perfectly() {
        let exact = exact(&[(0.0, 0.5), (0.25, 0.25), (f64::INFINITY, 0.25)]);
        let emp = EmpiricalDistribution::from_counts(
            [(0.0.into(), 500), (0.25.into(), 250), (ExtendedReal::PosInfinity, 250)],
            0,
            1e-9,
        );
        let fit = goodness_of_fit(&emp, &exact).unwrap();
        assert_eq!(fit.tv_distance, 0.0);
        assert_eq!(fit.chi2_stat, 0.0);
        assert_eq!(fit.dof, 2);
        assert_eq!(fit.p_value, 1.0);
    }

    #[test]
    fn support_violation_detected() {
        let exact = exact(&[(0.0, 0.5), (0.25, 0.5)]);
        let emp = EmpiricalDistribution::from_counts([(0.0.into(), 5), (0.3.into(), 1)], 0, 1e-9);
        assert!(matches!(
            goodness_of_fit(&emp, &exact),
            Err(CoreError::SupportViolation(_))
        ));
    }

    #[test]
    fn rare_atoms_are_pooled() {
        let exact = exact(&[(0.0, 0.995), (1.0, 0.003), (2.0, 0.002)]);
        let emp = EmpiricalDistribution::from_counts([(0.0.into(), 995), (1.0.into(), 5)], 0, 1e-9);
        let fit = goodness_of_fit(&emp, &exact).unwrap();
        // 1000 samples: the two rare atoms pool to expected 5, observed 5
        assert_eq!(fit.dof, 1);
        assert!(fit.chi2_stat.abs() < 1e-12);
    }

    #[test]
    fn merge_is_order_independent() {
        let spec = identity_spec(0.7);
        let a = estimate_efficiency_distribution(&spec, 300, 1).unwrap();
        let b = estimate_efficiency_distribution(&spec, 500, 2).unwrap();
        let c = estimate_efficiency_distribution(&spec, 700, 3).unwrap();
        let left = a.merge(&b, 1e-9).merge(&c, 1e-9);
        let right = a.merge(&c.merge(&b, 1e-9), 1e-9);
        assert_eq!(left.atoms(), right.atoms());
        assert_eq!(left.total(), 1500);
    }
}
