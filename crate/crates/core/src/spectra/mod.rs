//! Generic two-point-measurement machinery for a finite-dimensional Otto engine.
//!
//! A cycle is probed by four projective energy measurements: `n` on `E^0`
//! before the expansion, `m` on `E^τ` after it, `k` on `E^τ` after the hot
//! isochore, and `l` on `E^0` after the compression. Both isochores are
//! assumed to thermalize completely, so `n` and `k` are Boltzmann distributed
//! at `β_cold` and `β_hot` respectively, and `k` is independent of `m`.

mod efficiency;
mod joint;

pub use efficiency::{
    efficiency_distribution, efficiency_heat_covariance, efficiency_moments, efficiency_of, engine_conditions,
    thermodynamic_efficiency, CovarianceReport, EfficiencyAtom, EfficiencyDistribution, EngineConditions, MomentReport,
    INFINITY_MASS_TOL, MEAN_HEAT_TOL,
};
pub use joint::{
    heat2_distribution, joint_distribution, joint_distribution_with_tol, mean_heat2, mean_work1, mean_work3,
    work1_distribution, work3_distribution, JointAtom, JointDistribution, MeanEnergetics,
};

use log::warn;

use crate::error::{invalid, CoreResult};
use crate::linalg::CMatrix;

/// Entrywise tolerance on `U†U − I` accepted by [`Unitary::new`].
pub const UNITARITY_TOL: f64 = 1e-10;

/// Ascending list of energy eigenvalues (ħ = k_B = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    levels: Vec<f64>,
}

impl EnergySpectrum {
    pub fn new(levels: Vec<f64>) -> CoreResult<Self> {
        if levels.is_empty() {
            return invalid("energy spectrum is empty");
        }
        if levels.iter().any(|e| !e.is_finite()) {
            return invalid("energy spectrum has non-finite levels");
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return invalid("energy levels must be sorted ascending");
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn ground(&self) -> f64 {
        self.levels[0]
    }
}

/// A stroke evolution operator expressed in the energy eigenbases of the
/// stroke's initial and final Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(CMatrix);

impl Unitary {
    pub fn new(matrix: CMatrix) -> CoreResult<Self> {
        let defect = matrix.unitarity_defect();
        if defect.is_nan() || defect > UNITARITY_TOL {
            return invalid(format!(
                "matrix is not unitary: max |U†U − I| = {defect:.3e} exceeds {UNITARITY_TOL:e}"
            ));
        }
        Ok(Self(matrix))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Row-stochastic matrix of level-transition probabilities, `prob(from, to)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    dim: usize,
    probs: Vec<f64>,
}

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.dim + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.probs[from * self.dim..(from + 1) * self.dim]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.prob(i, j)).sum())
            .collect()
    }

    /// Largest deviation of any row or column sum from one.
    pub fn stochasticity_defect(&self) -> f64 {
        self.row_sums()
            .into_iter()
            .chain(self.column_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `T[n][m] = |⟨m|U|n⟩|²`, the probability to go from level `n` to level `m`.
pub fn transition_matrix(u: &Unitary) -> TransitionMatrix {
    let m = u.matrix();
    let dim = m.dim();
    let mut probs = Vec::with_capacity(dim * dim);
    for from in 0..dim {
        for to in 0..dim {
            probs.push(m[(to, from)].norm_sqr());
        }
    }
    TransitionMatrix { dim, probs }
}

/// Boltzmann occupation of a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub beta: f64,
    pub weights: Vec<f64>,
    /// May overflow to `inf` for large `β·|E_0|`; [`ThermalState::ln_partition_function`]
    /// stays finite.
    pub partition_function: f64,
    ln_partition_function: f64,
}

impl ThermalState {
    pub fn ln_partition_function(&self) -> f64 {
        self.ln_partition_function
    }
}

/// Boltzmann weights `exp(−βE_n)/Z`, evaluated with the ground energy factored
/// out so that the largest exponent is zero.
pub fn thermal_state(spectrum: &EnergySpectrum, beta: f64) -> CoreResult<ThermalState> {
    if !beta.is_finite() || beta <= 0.0 {
        return invalid(format!("inverse temperature must be positive and finite, got {beta}"));
    }
    let e0 = spectrum.ground();
    let shifted: Vec<f64> = spectrum.levels().iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let sum: f64 = shifted.iter().sum();
    let ln_z = -beta * e0 + sum.ln();
    Ok(ThermalState {
        beta,
        weights: shifted.iter().map(|w| w / sum).collect(),
        partition_function: ln_z.exp(),
        ln_partition_function: ln_z,
    })
}

/// Complete input of one Otto cycle: the spectra at the two ends of the
/// expansion, both stroke unitaries and the two bath temperatures.
#[derive(Debug, Clone)]
pub struct EngineSpec {
    spectrum_start: EnergySpectrum,
    spectrum_end: EnergySpectrum,
    u_expansion: Unitary,
    u_compression: Unitary,
    beta_cold: f64,
    beta_hot: f64,
    thermal_cold: ThermalState,
    thermal_hot: ThermalState,
    t_expansion: TransitionMatrix,
    t_compression: TransitionMatrix,
}

impl EngineSpec {
    /// `u_expansion` maps the `spectrum_start` basis to the `spectrum_end`
    /// basis and `u_compression` the reverse.
    pub fn new(
        spectrum_start: EnergySpectrum,
        spectrum_end: EnergySpectrum,
        u_expansion: Unitary,
        u_compression: Unitary,
        beta_cold: f64,
        beta_hot: f64,
    ) -> CoreResult<Self> {
        let d = spectrum_start.dim();
        if d < 2 {
            return invalid("an engine needs at least two levels");
        }
        for (name, dim) in [
            ("end spectrum", spectrum_end.dim()),
            ("expansion unitary", u_expansion.dim()),
            ("compression unitary", u_compression.dim()),
        ] {
            if dim != d {
                return invalid(format!(
                    "dimension mismatch: {name} has dimension {dim}, start spectrum {d}"
                ));
            }
        }
        let thermal_cold = thermal_state(&spectrum_start, beta_cold)?;
        let thermal_hot = thermal_state(&spectrum_end, beta_hot)?;
        if beta_cold <= beta_hot {
            warn!("beta_cold = {beta_cold} is not above beta_hot = {beta_hot}; outside the engine regime");
        }
        let t_expansion = transition_matrix(&u_expansion);
        let t_compression = transition_matrix(&u_compression);
        Ok(Self {
            spectrum_start,
            spectrum_end,
            u_expansion,
            u_compression,
            beta_cold,
            beta_hot,
            thermal_cold,
            thermal_hot,
            t_expansion,
            t_compression,
        })
    }

    pub fn dim(&self) -> usize {
        self.spectrum_start.dim()
    }

    pub fn spectrum_start(&self) -> &EnergySpectrum {
        &self.spectrum_start
    }

    pub fn spectrum_end(&self) -> &EnergySpectrum {
        &self.spectrum_end
    }

    pub fn u_expansion(&self) -> &Unitary {
        &self.u_expansion
    }

    pub fn u_compression(&self) -> &Unitary {
        &self.u_compression
    }

    pub fn beta_cold(&self) -> f64 {
        self.beta_cold
    }

    pub fn beta_hot(&self) -> f64 {
        self.beta_hot
    }

    /// Occupation of `E^0` at `β_cold`, i.e. the distribution of `n`.
    pub fn thermal_cold(&self) -> &ThermalState {
        &self.thermal_cold
    }

    /// Occupation of `E^τ` at `β_hot`, i.e. the distribution of `k`.
    pub fn thermal_hot(&self) -> &ThermalState {
        &self.thermal_hot
    }

    pub fn t_expansion(&self) -> &TransitionMatrix {
        &self.t_expansion
    }

    pub fn t_compression(&self) -> &TransitionMatrix {
        &self.t_compression
    }

    pub fn is_engine_regime(&self) -> bool {
        self.beta_cold > self.beta_hot
    }
}
