//! Numerical propagation of `i dU/dt = H(t) U`, `U(0) = I`.
//!
//! Each step applies the exact exponential of the midpoint Hamiltonian,
//! `U ← exp(−i H(t + Δ/2) Δ) U`. This is the second-order exponential
//! midpoint (lowest-order Magnus) rule; every factor is unitary, so the
//! product stays unitary up to round-off no matter how coarse the grid.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, CoreError, CoreResult};
use crate::linalg::{exp_hermitian_step, CMatrix};
use crate::numeric::least_squares_slope;
use crate::spectra::Unitary;
use crate::twolevel::TwoLevelParams;

/// Steps per unit of `duration · max‖H‖` used by [`propagate_default`].
pub const DEFAULT_STEPS_PER_PHASE: f64 = 32000.0;

/// Samples of `H(t)` used to estimate `max‖H‖`.
const NORM_SAMPLES: usize = 257;

/// Above this value of `max‖H‖·Δ` a step resolves less than one radian of
/// phase and the report flags it.
pub const STABILITY_THRESHOLD: f64 = 1.0;

/// A time-dependent Hamiltonian on `[0, duration]`.
#[derive(Clone)]
pub struct DrivingProtocol {
    dimension: usize,
    duration: f64,
    hamiltonian: Arc<dyn Fn(f64) -> CMatrix + Send + Sync>,
}

impl fmt::Debug for DrivingProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DrivingProtocol")
            .field("dimension", &self.dimension)
            .field("duration", &self.duration)
            .finish_non_exhaustive()
    }
}

impl DrivingProtocol {
    pub fn new(
        dimension: usize,
        duration: f64,
        hamiltonian: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> CoreResult<Self> {
        if dimension == 0 {
            return invalid("protocol dimension must be positive");
        }
        if !(duration.is_finite() && duration > 0.0) {
            return invalid(format!("protocol duration must be positive, got {duration}"));
        }
        Ok(Self {
            dimension,
            duration,
            hamiltonian: Arc::new(hamiltonian),
        })
    }

    pub fn constant(h: CMatrix, duration: f64) -> CoreResult<Self> {
        Self::new(h.dim(), duration, move |_| h.clone())
    }

    /// `H_exp(t) = γ(t)(cos ωt σx + sin ωt σy) + (ω/2) σz`.
    pub fn two_level_expansion(params: &TwoLevelParams) -> Self {
        let p = params.clone();
        let omega = p.omega();
        let tau = p.tau();
        Self {
            dimension: 2,
            duration: tau,
            hamiltonian: Arc::new(move |t| expansion_hamiltonian(&p, omega, t)),
        }
    }

    /// `H_com(t) = −H_exp(τ − t)`.
    pub fn two_level_compression(params: &TwoLevelParams) -> Self {
        let p = params.clone();
        let omega = p.omega();
        let tau = p.tau();
        Self {
            dimension: 2,
            duration: tau,
            hamiltonian: Arc::new(move |t| expansion_hamiltonian(&p, omega, tau - t).scale((-1.0).into())),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        (self.hamiltonian)(t)
    }

    /// Largest `‖H(t)‖` over an even sampling of the protocol.
    pub fn max_norm(&self) -> f64 {
        (0..NORM_SAMPLES)
            .map(|i| self.duration * i as f64 / (NORM_SAMPLES - 1) as f64)
            .map(|t| self.hamiltonian_at(t).hermitian_norm())
            .fold(0.0, f64::max)
    }

    pub fn default_steps(&self) -> usize {
        ((DEFAULT_STEPS_PER_PHASE * self.duration * self.max_norm()).ceil() as usize).max(1)
    }
}

fn expansion_hamiltonian(p: &TwoLevelParams, omega: f64, t: f64) -> CMatrix {
    let gamma = p.ramp().at(t, p.tau());
    let (s, c) = (omega * t).sin_cos();
    let x = CMatrix::pauli_x().scale((gamma * c).into());
    let y = CMatrix::pauli_y().scale((gamma * s).into());
    let z = CMatrix::pauli_z().scale((omega / 2.0).into());
    &(&x + &y) + &z
}

pub fn propagate(protocol: &DrivingProtocol, steps: usize) -> CoreResult<Unitary> {
    if steps == 0 {
        return invalid("at least one propagation step is required");
    }
    let dt = protocol.duration / steps as f64;
    let mut u = CMatrix::identity(protocol.dimension);
    for i in 0..steps {
        let t = (i as f64 + 0.5) * dt;
        let h = protocol.hamiltonian_at(t);
        if h.dim() != protocol.dimension {
            return invalid(format!(
                "protocol returned a {0}x{0} matrix at t = {t}, expected dimension {1}",
                h.dim(),
                protocol.dimension
            ));
        }
        if !h.is_hermitian(1e-12 * h.max_abs().max(1.0)) {
            return invalid(format!("protocol Hamiltonian is not Hermitian at t = {t}"));
        }
        u = exp_hermitian_step(&h, dt).matmul(&u);
    }
    Unitary::new(u)
}

/// [`propagate`] with [`DrivingProtocol::default_steps`].
pub fn propagate_default(protocol: &DrivingProtocol) -> CoreResult<Unitary> {
    propagate(protocol, protocol.default_steps())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    /// Entrywise max deviation from the finest-grid propagator.
    pub deviation: f64,
    /// `max‖H‖ · Δ`
    pub step_phase: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Negative least-squares slope of `ln deviation` against `ln steps`,
    /// fitted over rows with deviation above round-off.
    pub observed_order: Option<f64>,
}

impl ConvergenceReport {
    pub fn any_unstable(&self) -> bool {
        self.rows.iter().any(|r| r.unstable)
    }
}

/// Deviation of each propagator in `step_sequence` from the last (finest) one.
pub fn convergence_report(protocol: &DrivingProtocol, step_sequence: &[usize]) -> CoreResult<ConvergenceReport> {
    if step_sequence.len() < 2 || step_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidInput(
            "step sequence must be strictly increasing with at least two entries".into(),
        ));
    }
    let norm = protocol.max_norm();
    let results = step_sequence
        .iter()
        .map(|&n| propagate(protocol, n))
        .collect::<CoreResult<Vec<_>>>()?;
    let finest = results.last().expect("non-empty").matrix();
    let rows: Vec<ConvergenceRow> = step_sequence
        .iter()
        .zip(&results)
        .map(|(&steps, u)| {
            let step_phase = norm * protocol.duration / steps as f64;
            ConvergenceRow {
                steps,
                deviation: u.matrix().max_abs_diff(finest),
                step_phase,
                unstable: step_phase > STABILITY_THRESHOLD,
            }
        })
        .collect();

    let points: Vec<(f64, f64)> = rows[..rows.len() - 1]
        .iter()
        .filter(|r| r.deviation > 1e-13)
        .map(|r| ((r.steps as f64).ln(), r.deviation.ln()))
        .collect();
    let observed_order = (points.len() >= 2).then(|| -least_squares_slope(&points));
    Ok(ConvergenceReport { rows, observed_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twolevel::closed_form_unitary;
    use num_complex::Complex64;

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let p = DrivingProtocol::constant(CMatrix::zeros(3), 2.0).unwrap();
        let u = propagate(&p, 10).unwrap();
        assert!(u.matrix().max_abs_diff(&CMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn constant_sigma_z() {
        let (omega, tau) = (0.9, 3.1);
        let h = CMatrix::pauli_z().scale((omega / 2.0).into());
        let p = DrivingProtocol::constant(h, tau).unwrap();
        let u = propagate(&p, 7).unwrap();
        let expected = CMatrix::diagonal(&[
            Complex64::from_polar(1.0, -omega * tau / 2.0),
            Complex64::from_polar(1.0, omega * tau / 2.0),
        ]);
        assert!(u.matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn non_hermitian_protocol_rejected() {
        let mut h = CMatrix::zeros(2);
        h[(0, 1)] = Complex64::new(1.0, 0.0);
        let p = DrivingProtocol::constant(h, 1.0).unwrap();
        assert!(matches!(propagate(&p, 4), Err(CoreError::InvalidInput(_))));
        let ok = DrivingProtocol::constant(CMatrix::pauli_x(), 1.0).unwrap();
        assert!(propagate(&ok, 0).is_err());
    }

    #[test]
    fn general_dimension_uses_series_exponential() {
        // three-level constant Hamiltonian: compare against the one-shot exponential
        let h = CMatrix::from_fn(3, |i, j| {
            if i == j {
                Complex64::new(i as f64 - 1.0, 0.0)
            } else if i < j {
                Complex64::new(0.3, 0.1 * (i + j) as f64)
            } else {
                Complex64::new(0.3, -0.1 * (i + j) as f64)
            }
        });
        let p = DrivingProtocol::constant(h.clone(), 2.5).unwrap();
        let u = propagate(&p, 40).unwrap();
        let exact = crate::linalg::expm(&h.scale(Complex64::new(0.0, -2.5)));
        assert!(u.matrix().max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let params = TwoLevelParams::new(0.5, 3.0, 2.39, 2.0, 0.1).unwrap();
        let protocol = DrivingProtocol::two_level_expansion(&params);
        let exact = closed_form_unitary(&params, params.tau()).unwrap();
        let coarse = propagate(&protocol, 400).unwrap().matrix().max_abs_diff(exact.matrix());
        let fine = propagate(&protocol, 800).unwrap().matrix().max_abs_diff(exact.matrix());
        let ratio = coarse / fine;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn constant_protocol_converges_at_round_off() {
        let h = CMatrix::pauli_x().scale(0.7.into());
        let p = DrivingProtocol::constant(h, 2.0).unwrap();
        let report = convergence_report(&p, &[4, 8, 16, 32]).unwrap();
        assert!(report.rows.iter().all(|r| r.deviation < 1e-14));
        assert_eq!(report.observed_order, None);
    }

    #[test]
    fn coarse_steps_flagged() {
        let params = TwoLevelParams::new(0.5, 3.0, 7.18, 2.0, 0.1).unwrap();
        let protocol = DrivingProtocol::two_level_expansion(&params);
        let report = convergence_report(&protocol, &[4, 64, 1024]).unwrap();
        assert!(report.rows[0].unstable);
        assert!(!report.rows[2].unstable);
    }

    #[test]
    fn step_sequence_must_increase() {
        let p = DrivingProtocol::constant(CMatrix::pauli_x(), 1.0).unwrap();
        assert!(convergence_report(&p, &[8, 4]).is_err());
        assert!(convergence_report(&p, &[8]).is_err());
    }
}
