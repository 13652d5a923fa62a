//! Closed forms for the spin-1/2 Otto engine driven by a rotating field.
//!
//! The expansion Hamiltonian is
//! `H(t) = γ(t)(cos ωt σx + sin ωt σy) + (ω/2) σz`, whose eigenvalues are
//! `±ν(t)` with `ν = √(4γ² + ω²)/2`. In the frame co-rotating about `z` the
//! drive reduces to `γ(t) σx`, which is why the evolution operator is known
//! exactly in terms of `I(t) = −∫₀ᵗ γ`. The survival probability of either
//! stroke is `u = cos² I` and the adiabaticity parameter is `A* = 1 − 2u`.
//!
//! With `x = β1 ν0`, `y = β2 ντ`, `r = ν0/ντ` and `v = 1 − u`, enumerating the
//! sixteen measurement paths gives the efficiency distribution
//!
//! | η      | weight                                              |
//! |--------|-----------------------------------------------------|
//! | 0      | `u² cosh(x+y)/(2 cosh x cosh y) + v² cosh(x−y)/(2 cosh x cosh y)` |
//! | 1 − r  | `u² cosh(x−y)/(2 cosh x cosh y)`                    |
//! | 1 + r  | `v² cosh(x+y)/(2 cosh x cosh y)`                    |
//! | 1      | `uv`                                                |
//! | −∞     | `uv eˣ/(2 cosh x)`                                  |
//! | +∞     | `uv e⁻ˣ/(2 cosh x)`                                 |
//!
//! The two infinite atoms carry a factor `uv` and together hold mass `uv`;
//! the whole `η = 0` atom comes from paths with zero heat and zero work.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use log::warn;
use num_complex::Complex64;

use crate::error::{invalid, CoreError, CoreResult};
use crate::extended::ExtendedReal;
use crate::linalg::CMatrix;
use crate::numeric::adaptive_simpson;
use crate::spectra::{EfficiencyAtom, EfficiencyDistribution, EnergySpectrum, EngineSpec, MeanEnergetics, Unitary};
use crate::DEFAULT_GROUPING_TOL;

/// `|u − 1|` below which a stroke counts as adiabatic.
pub const ADIABATIC_TOL: f64 = 1e-9;

const RAMP_QUADRATURE_TOL: f64 = 1e-12;

/// Amplitude `γ(t)` of the rotating field over `t ∈ [0, τ]`.
#[derive(Clone)]
pub enum Ramp {
    /// `γ(t) = γ1 (1 − t/τ) + γ2 t/τ`.
    Linear { gamma1: f64, gamma2: f64 },
    /// Arbitrary amplitude as a function of absolute time.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Ramp {
    pub fn at(&self, t: f64, tau: f64) -> f64 {
        match self {
            Ramp::Linear { gamma1, gamma2 } => gamma1 * (1.0 - t / tau) + gamma2 * (t / tau),
            Ramp::Custom(f) => f(t),
        }
    }

    /// `∫₀ᵗ γ(s) ds`.
    pub fn integral(&self, t: f64, tau: f64) -> f64 {
        match self {
            Ramp::Linear { gamma1, gamma2 } => gamma1 * t + (gamma2 - gamma1) * t * t / (2.0 * tau),
            Ramp::Custom(f) => adaptive_simpson(&|s| f(s), 0.0, t, RAMP_QUADRATURE_TOL),
        }
    }
}

impl fmt::Debug for Ramp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ramp::Linear { gamma1, gamma2 } => write!(f, "Linear {{ gamma1: {gamma1}, gamma2: {gamma2} }}"),
            Ramp::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Parameters of the spin engine.
///
/// Unless overridden, the rotation frequency follows the stroke duration as
/// `ω = π/(2τ)`, so changing `tau` also changes both level splittings.
#[derive(Debug, Clone)]
pub struct TwoLevelParams {
    ramp: Ramp,
    tau: f64,
    omega: Option<f64>,
    beta1: f64,
    beta2: f64,
}

impl TwoLevelParams {
    /// Linear ramp from `gamma1` to `gamma2` over a stroke of duration `tau`.
    pub fn new(gamma1: f64, gamma2: f64, tau: f64, beta1: f64, beta2: f64) -> CoreResult<Self> {
        for (name, value) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(value.is_finite() && value > 0.0) {
                return invalid(format!("{name} must be positive and finite, got {value}"));
            }
        }
        Self::with_ramp(Ramp::Linear { gamma1, gamma2 }, tau, beta1, beta2)
    }

    pub fn with_ramp(ramp: Ramp, tau: f64, beta1: f64, beta2: f64) -> CoreResult<Self> {
        for (name, value) in [("tau", tau), ("beta1", beta1), ("beta2", beta2)] {
            if !(value.is_finite() && value > 0.0) {
                return invalid(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if beta1 <= beta2 {
            warn!("beta1 = {beta1} is not above beta2 = {beta2}; outside the engine regime");
        }
        Ok(Self {
            ramp,
            tau,
            omega: None,
            beta1,
            beta2,
        })
    }

    /// Freezes the rotation frequency instead of tying it to `tau`.
    pub fn with_omega(mut self, omega: f64) -> CoreResult<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return invalid(format!("omega must be non-negative and finite, got {omega}"));
        }
        self.omega = Some(omega);
        Ok(self)
    }

    pub fn with_tau(&self, tau: f64) -> CoreResult<Self> {
        let mut p = Self::with_ramp(self.ramp.clone(), tau, self.beta1, self.beta2)?;
        p.omega = self.omega;
        Ok(p)
    }

    pub fn with_betas(&self, beta1: f64, beta2: f64) -> CoreResult<Self> {
        let mut p = Self::with_ramp(self.ramp.clone(), self.tau, beta1, beta2)?;
        p.omega = self.omega;
        Ok(p)
    }

    pub fn ramp(&self) -> &Ramp {
        &self.ramp
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn omega(&self) -> f64 {
        self.omega.unwrap_or(FRAC_PI_2 / self.tau)
    }

    pub fn omega_override(&self) -> Option<f64> {
        self.omega
    }

    pub fn gamma1(&self) -> f64 {
        self.ramp.at(0.0, self.tau)
    }

    pub fn gamma2(&self) -> f64 {
        self.ramp.at(self.tau, self.tau)
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    /// `I(t) = −∫₀ᵗ γ`.
    pub fn i_integral(&self, t: f64) -> f64 {
        -self.ramp.integral(t, self.tau)
    }
}

/// Quantities fixed by the parameters: half-gaps, `I(τ)`, survival
/// probability and adiabaticity parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelDerived {
    pub omega: f64,
    pub nu0: f64,
    pub nu_tau: f64,
    pub i_integral: f64,
    /// `cos² I`
    pub u: f64,
    /// `sin² I`, kept separately so that `v` near zero keeps full precision.
    pub v: f64,
    pub a_star: f64,
}

impl TwoLevelDerived {
    pub fn is_adiabatic(&self) -> bool {
        (self.u - 1.0).abs() < ADIABATIC_TOL
    }

    /// `1 − ν0/ντ`, the efficiency of an adiabatic cycle.
    pub fn adiabatic_efficiency(&self) -> f64 {
        1.0 - self.nu0 / self.nu_tau
    }
}

fn half_gap(gamma: f64, omega: f64) -> f64 {
    (4.0 * gamma * gamma + omega * omega).sqrt() / 2.0
}

pub fn derive(params: &TwoLevelParams) -> TwoLevelDerived {
    let omega = params.omega();
    let i_integral = params.i_integral(params.tau());
    let (s, c) = i_integral.sin_cos();
    let u = c * c;
    TwoLevelDerived {
        omega,
        nu0: half_gap(params.gamma1(), omega),
        nu_tau: half_gap(params.gamma2(), omega),
        i_integral,
        u,
        v: s * s,
        a_star: 1.0 - 2.0 * u,
    }
}

/// Duration of a linear-ramp stroke with `I(τ) = −kπ`, i.e. exactly `u = 1`.
pub fn adiabatic_tau(gamma1: f64, gamma2: f64, k: u32) -> f64 {
    2.0 * PI * k as f64 / (gamma1 + gamma2)
}

/// Expansion propagator from time 0 to `t`:
///
/// ```text
/// ⎛ e^{−iωt/2} cos I    i e^{−iωt/2} sin I ⎞
/// ⎝ i e^{iωt/2} sin I   e^{iωt/2} cos I    ⎠ ,   I = I(t)
/// ```
pub fn closed_form_unitary(params: &TwoLevelParams, t: f64) -> CoreResult<Unitary> {
    if !(0.0..=params.tau()).contains(&t) {
        return invalid(format!("time {t} outside the stroke [0, {}]", params.tau()));
    }
    Unitary::new(expansion_matrix(params, t))
}

fn expansion_matrix(params: &TwoLevelParams, t: f64) -> CMatrix {
    let omega = params.omega();
    let (s, c) = params.i_integral(t).sin_cos();
    let lead = Complex64::from_polar(1.0, -omega * t / 2.0);
    let trail = lead.conj();
    let i = Complex64::i();
    CMatrix::from_fn(2, |row, col| match (row, col) {
        (0, 0) => lead * c,
        (0, 1) => i * lead * s,
        (1, 0) => i * trail * s,
        _ => trail * c,
    })
}

/// Propagator of the compression `H_com(t) = −H_exp(τ − t)` from 0 to `t`.
///
/// `X(t) = U_exp(τ − t)` solves the compression equation of motion, so the
/// propagator is `U_exp(τ − t) U_exp(τ)†`.
pub fn compression_unitary_at(params: &TwoLevelParams, t: f64) -> CoreResult<Unitary> {
    if !(0.0..=params.tau()).contains(&t) {
        return invalid(format!("time {t} outside the stroke [0, {}]", params.tau()));
    }
    let full = expansion_matrix(params, params.tau()).adjoint();
    Unitary::new(expansion_matrix(params, params.tau() - t).matmul(&full))
}

/// Full compression stroke, `U_exp(τ)†`.
pub fn compression_unitary(params: &TwoLevelParams) -> CoreResult<Unitary> {
    Ok(closed_form_unitary(params, params.tau())?.adjoint())
}

/// The generic engine description of the spin engine, with spectra
/// `{−ν0, ν0}` and `{−ντ, ντ}`.
pub fn engine_spec(params: &TwoLevelParams) -> CoreResult<EngineSpec> {
    let d = derive(params);
    EngineSpec::new(
        EnergySpectrum::new(vec![-d.nu0, d.nu0])?,
        EnergySpectrum::new(vec![-d.nu_tau, d.nu_tau])?,
        closed_form_unitary(params, params.tau())?,
        compression_unitary(params)?,
        params.beta1(),
        params.beta2(),
    )
}

/// `⟨W1⟩ = (ντA* + ν0) tanh β1ν0`, `⟨W3⟩ = (ν0A* + ντ) tanh β2ντ`,
/// `⟨Q2⟩ = −ντ [tanh β2ντ + A* tanh β1ν0]`.
pub fn mean_energetics(params: &TwoLevelParams) -> MeanEnergetics {
    let d = derive(params);
    let (tc, th) = thermal_tanh(params, &d);
    MeanEnergetics {
        w1: (d.nu_tau * d.a_star + d.nu0) * tc,
        w3: (d.nu0 * d.a_star + d.nu_tau) * th,
        q2: -d.nu_tau * heat_and_work_brackets(params, &d).0,
    }
}

fn thermal_tanh(params: &TwoLevelParams, d: &TwoLevelDerived) -> (f64, f64) {
    ((params.beta1() * d.nu0).tanh(), (params.beta2() * d.nu_tau).tanh())
}

/// `tanh x − tanh y` for `x, y ≥ 0` without cancellation when both are near 1.
fn tanh_difference(x: f64, y: f64) -> f64 {
    let (ex, ey) = ((-2.0 * x).exp(), (-2.0 * y).exp());
    -2.0 * ey * (-2.0 * (x - y)).exp_m1() / ((1.0 + ex) * (1.0 + ey))
}

/// `(1 + tanh x tanh y)/2` and `(1 − tanh x tanh y)/2`, i.e.
/// `cosh(x ± y)/(2 cosh x cosh y)`, written with `a = e^{−2x}`, `b = e^{−2y}`
/// so that neither loses precision at low temperature.
fn thermal_overlaps(params: &TwoLevelParams, d: &TwoLevelDerived) -> (f64, f64) {
    let a = (-2.0 * params.beta1() * d.nu0).exp();
    let b = (-2.0 * params.beta2() * d.nu_tau).exp();
    let denom = (1.0 + a) * (1.0 + b);
    ((1.0 + a * b) / denom, (a + b) / denom)
}

/// Brackets `th + A* tc` and `tc + A* th` written as `v S ∓ u D`, with
/// `S = tc + th` and `D = tc − th` evaluated stably.
fn heat_and_work_brackets(params: &TwoLevelParams, d: &TwoLevelDerived) -> (f64, f64) {
    let (tc, th) = thermal_tanh(params, d);
    let diff = tanh_difference(params.beta1() * d.nu0, params.beta2() * d.nu_tau);
    let sum = tc + th;
    (d.v * sum - d.u * diff, d.v * sum + d.u * diff)
}

/// Upper bounds on `A*` from the two engine conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineBounds {
    /// From `⟨Q2⟩ > 0`.
    pub bound_heat: f64,
    /// From `−(⟨W1⟩ + ⟨W3⟩) > 0`.
    pub bound_work: f64,
    pub satisfied: bool,
}

impl EngineBounds {
    /// Signed distance of `a_star` below the binding bound.
    pub fn margin(&self, a_star: f64) -> f64 {
        self.bound_heat.min(self.bound_work) - a_star
    }
}

pub fn engine_bounds(params: &TwoLevelParams) -> EngineBounds {
    let d = derive(params);
    let (tc, th) = thermal_tanh(params, &d);
    let bound_heat = -th / tc;
    let bound_work = -(d.nu0 * tc + d.nu_tau * th) / (d.nu_tau * tc + d.nu0 * th);
    EngineBounds {
        bound_heat,
        bound_work,
        satisfied: d.a_star <= bound_heat.min(bound_work),
    }
}

/// Thermodynamic efficiency `1 + (ν0/ντ)(A* tanh β2ντ + tanh β1ν0)/(tanh β2ντ + A* tanh β1ν0)`.
pub fn eta_th(params: &TwoLevelParams) -> CoreResult<f64> {
    let d = derive(params);
    let (denominator, numerator) = heat_and_work_brackets(params, &d);
    if denominator.abs() < 1e-12 {
        return Err(CoreError::Undefined(format!(
            "mean absorbed heat vanishes (denominator {denominator:e}); thermodynamic efficiency is undefined"
        )));
    }
    Ok(1.0 + d.nu0 / d.nu_tau * numerator / denominator)
}

/// Closed-form efficiency distribution, see the module docs for the weights.
pub fn efficiency_distribution_closed(params: &TwoLevelParams) -> EfficiencyDistribution {
    let d = derive(params);
    let (u, v) = (d.u, d.v);
    let r = d.nu0 / d.nu_tau;
    let x = params.beta1() * d.nu0;
    let (aligned, opposed) = thermal_overlaps(params, &d);
    // e^{∓x}/(2 cosh x)
    let neg_inf = 1.0 / (1.0 + (-2.0 * x).exp());
    let pos_inf = 1.0 / (1.0 + (2.0 * x).exp());

    let zero = u * u * aligned + v * v * opposed;
    let atoms = [
        (ExtendedReal::Finite(0.0), zero),
        (ExtendedReal::Finite(1.0 - r), u * u * opposed),
        (ExtendedReal::Finite(1.0 + r), v * v * aligned),
        (ExtendedReal::Finite(1.0), u * v),
        (ExtendedReal::NegInfinity, u * v * neg_inf),
        (ExtendedReal::PosInfinity, u * v * pos_inf),
    ];
    EfficiencyDistribution::from_atoms(
        atoms.into_iter().map(|(eta, prob)| EfficiencyAtom { eta, prob }),
        zero,
        DEFAULT_GROUPING_TOL,
    )
}

fn require_adiabatic(d: &TwoLevelDerived) -> CoreResult<()> {
    if d.is_adiabatic() {
        Ok(())
    } else {
        Err(CoreError::Precondition(format!(
            "efficiency moments need adiabatic driving (|u − 1| < {ADIABATIC_TOL:e}), got u = {}",
            d.u
        )))
    }
}

/// Mean efficiency of an adiabatic cycle, `(2/Z0Zτ) cosh(β1ν0 − β2ντ)(1 − ν0/ντ)`.
pub fn adiabatic_mean(params: &TwoLevelParams) -> CoreResult<f64> {
    let d = derive(params);
    require_adiabatic(&d)?;
    Ok(thermal_overlaps(params, &d).1 * d.adiabatic_efficiency())
}

/// Variance of the adiabatic efficiency, `¼(1 − ν0/ντ)²[1 − tanh²(β1ν0) tanh²(β2ντ)]`.
pub fn adiabatic_variance(params: &TwoLevelParams) -> CoreResult<f64> {
    let d = derive(params);
    require_adiabatic(&d)?;
    let (aligned, opposed) = thermal_overlaps(params, &d);
    let eta = d.adiabatic_efficiency();
    // 1 − t² = (1 + t)(1 − t)
    Ok(eta * eta * aligned * opposed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureLimits {
    /// `β_i ν^j ≪ 1`
    pub high_t: f64,
    /// `β_i ν^j ≫ 1`
    pub low_t: f64,
}

/// Asymptotes of [`adiabatic_mean`]: `η_th/2` and `η_th(e^{−2β2ντ} + e^{−2β1ν0})`
/// with `η_th = 1 − ν0/ντ`.
pub fn adiabatic_mean_limits(params: &TwoLevelParams) -> TemperatureLimits {
    let d = derive(params);
    let eta = d.adiabatic_efficiency();
    let (x, y) = (params.beta1() * d.nu0, params.beta2() * d.nu_tau);
    TemperatureLimits {
        high_t: eta / 2.0,
        low_t: eta * ((-2.0 * y).exp() + (-2.0 * x).exp()),
    }
}

/// Asymptotes of [`adiabatic_variance`]: `η_th²/4` and
/// `η_th² (e^{2x} + e^{2y})/(e^{2x+2y} + 2e^{2x} + 2e^{2y})`.
pub fn adiabatic_variance_limits(params: &TwoLevelParams) -> TemperatureLimits {
    let d = derive(params);
    let eta2 = d.adiabatic_efficiency().powi(2);
    let (x, y) = (params.beta1() * d.nu0, params.beta2() * d.nu_tau);
    // numerator and denominator divided by e^{2x+2y}
    let (ex, ey) = ((-2.0 * x).exp(), (-2.0 * y).exp());
    TemperatureLimits {
        high_t: eta2 / 4.0,
        low_t: eta2 * (ey + ex) / (1.0 + 2.0 * ey + 2.0 * ex),
    }
}

/// Stroke durations in `[tau_lo, tau_hi]` where the engine conditions switch
/// on or off, located by scanning `grid` points and bisecting each sign
/// change of [`EngineBounds::margin`].
pub fn engine_window_boundaries(base: &TwoLevelParams, tau_lo: f64, tau_hi: f64, grid: usize) -> CoreResult<Vec<f64>> {
    if !(tau_lo > 0.0 && tau_hi > tau_lo) || grid < 2 {
        return invalid("need 0 < tau_lo < tau_hi and at least two grid points");
    }
    let margin = |tau: f64| -> CoreResult<f64> {
        let p = base.with_tau(tau)?;
        Ok(engine_bounds(&p).margin(derive(&p).a_star))
    };
    let step = (tau_hi - tau_lo) / (grid - 1) as f64;
    let mut roots = Vec::new();
    let mut prev = (tau_lo, margin(tau_lo)?);
    for i in 1..grid {
        let tau = tau_lo + step * i as f64;
        let cur = (tau, margin(tau)?);
        if (prev.1 > 0.0) != (cur.1 > 0.0) {
            let (mut a, mut b, fa) = (prev.0, cur.0, prev.1);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if b - a < 1e-13 {
                    break;
                }
                if (margin(mid)? > 0.0) == (fa > 0.0) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_engine(tau: f64) -> TwoLevelParams {
        TwoLevelParams::new(0.5, 3.0, tau, 2.0, 0.1).unwrap()
    }

    #[test]
    fn symmetric_ramp_has_equal_gaps() {
        let p = TwoLevelParams::new(1.2, 1.2, 3.3, 1.0, 0.5).unwrap();
        let d = derive(&p);
        assert_eq!(d.nu0, d.nu_tau);
        let omega = FRAC_PI_2 / 3.3;
        assert!((d.nu0 - (4.0 * 1.44 + omega * omega).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn linear_ramp_integral() {
        let p = reference_engine(7.18);
        assert!((derive(&p).i_integral + 1.75 * 7.18).abs() < 1e-12);
        let custom = TwoLevelParams::with_ramp(
            Ramp::Custom(Arc::new(|t: f64| 0.5 * (1.0 - t / 7.18) + 3.0 * t / 7.18)),
            7.18,
            2.0,
            0.1,
        )
        .unwrap();
        assert!((derive(&custom).i_integral - derive(&p).i_integral).abs() < 1e-11);
    }

    #[test]
    fn caption_durations() {
        // 1.75 τ_ad ≈ 4π; the nonadiabatic time lands well inside (0, 1)
        let ad = derive(&reference_engine(7.18));
        assert!(ad.u > 1.0 - 1e-5);
        assert!(!ad.is_adiabatic());
        let exact = derive(&reference_engine(adiabatic_tau(0.5, 3.0, 4)));
        assert!(exact.is_adiabatic());
        assert!((adiabatic_tau(0.5, 3.0, 4) - 7.18).abs() < 1e-3);
        let nad = derive(&reference_engine(2.39));
        assert!(nad.u > 0.1 && nad.u < 0.9);
        assert!((nad.u - (1.75f64 * 2.39).cos().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn unitary_at_time_zero_is_identity() {
        let u = closed_form_unitary(&reference_engine(2.39), 0.0).unwrap();
        assert!(u.matrix().max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        assert!(closed_form_unitary(&reference_engine(2.39), 2.4).is_err());
    }

    #[test]
    fn full_transition_at_quarter_period() {
        // I(τ) = −π/2
        let tau = PI / 3.5;
        let u = closed_form_unitary(&reference_engine(tau), tau).unwrap();
        assert!(u.matrix()[(0, 0)].norm() < 1e-15);
        assert!((u.matrix()[(0, 1)].norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compression_transitions_equal_expansion() {
        let p = reference_engine(2.39);
        let exp = closed_form_unitary(&p, p.tau()).unwrap();
        let com = compression_unitary(&p).unwrap();
        let d = derive(&p);
        assert!((com.matrix()[(0, 0)].norm_sqr() - d.u).abs() < 1e-15);
        for i in 0..2 {
            for j in 0..2 {
                assert!((exp.matrix()[(i, j)].norm_sqr() - com.matrix()[(i, j)].norm_sqr()).abs() < 1e-15);
            }
        }
        let at_end = compression_unitary_at(&p, p.tau()).unwrap();
        assert!(at_end.matrix().max_abs_diff(com.matrix()) < 1e-15);
        let at_start = compression_unitary_at(&p, 0.0).unwrap();
        assert!(at_start.matrix().max_abs_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn adiabatic_means_with_equal_gaps_vanish() {
        // A* = −1 with ν0 = ντ: ⟨W1⟩ = (ν0 − ντ) tanh β1ν0 = 0
        let tau = adiabatic_tau(1.0, 1.0, 2);
        let p = TwoLevelParams::new(1.0, 1.0, tau, 2.0, 0.5).unwrap();
        let m = mean_energetics(&p);
        assert!(m.w1.abs() < 1e-14);
        assert!(m.w3.abs() < 1e-14);
        assert!((eta_th(&p).unwrap()).abs() < 1e-14);
        let lim = adiabatic_mean_limits(&p);
        assert_eq!((lim.high_t, lim.low_t), (0.0, 0.0));
        assert!(adiabatic_variance(&p).unwrap().abs() < 1e-30);
    }

    #[test]
    fn hot_bath_at_infinite_temperature_does_no_compression_work() {
        let p = TwoLevelParams::new(0.5, 3.0, 2.39, 2.0, 1e-14).unwrap();
        assert!(mean_energetics(&p).w3.abs() < 1e-13);
    }

    #[test]
    fn bounds_equal_temperatures_equal_gaps() {
        let p = TwoLevelParams::new(1.0, 1.0, 2.0, 0.7, 0.7).unwrap();
        let b = engine_bounds(&p);
        assert!((b.bound_heat + 1.0).abs() < 1e-15);
        assert!((b.bound_work + 1.0).abs() < 1e-15);
    }

    #[test]
    fn adiabatic_engine_satisfies_bounds() {
        let p = reference_engine(adiabatic_tau(0.5, 3.0, 4));
        let d = derive(&p);
        assert!((d.a_star + 1.0).abs() < 1e-12);
        assert!(engine_bounds(&p).satisfied);
        assert!((eta_th(&p).unwrap() - d.adiabatic_efficiency()).abs() < 1e-12);
    }

    #[test]
    fn certain_transition_violates_bounds() {
        // I(τ) = −π/2 gives u = 0, A* = +1
        let tau = PI / 3.5;
        let p = reference_engine(tau);
        assert!((derive(&p).a_star - 1.0).abs() < 1e-12);
        assert!(!engine_bounds(&p).satisfied);
    }

    #[test]
    fn closed_distribution_adiabatic_support() {
        let p = reference_engine(adiabatic_tau(0.5, 3.0, 4));
        let d = derive(&p);
        let dist = efficiency_distribution_closed(&p);
        let r = d.nu0 / d.nu_tau;
        let (x, y) = (2.0 * d.nu0, 0.1 * d.nu_tau);
        let expected = 2.0 * (x - y).cosh() / (4.0 * x.cosh() * y.cosh());
        assert!((dist.mass_at(1.0 - r) - expected).abs() < 1e-15);
        for eta in [ExtendedReal::Finite(1.0), ExtendedReal::Finite(1.0 + r)] {
            assert!(dist.mass_at(eta) < 1e-25);
        }
        assert!(dist.infinity_mass() < 1e-25);
        assert!((dist.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_distribution_certain_transition() {
        let tau = PI / 3.5;
        let dist = efficiency_distribution_closed(&reference_engine(tau));
        assert!(dist.mass_at(1.0) < 1e-30);
        assert!(dist.infinity_mass() < 1e-30);
        assert!((dist.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adiabatic_only_operations_are_gated() {
        let p = reference_engine(2.39);
        assert!(matches!(adiabatic_mean(&p), Err(CoreError::Precondition(_))));
        assert!(matches!(adiabatic_variance(&p), Err(CoreError::Precondition(_))));
    }

    #[test]
    fn mean_at_balanced_temperatures() {
        // β1ν0 = β2ντ: cosh(0) = 1 and the prefactor is 2/(Z0 Zτ)
        let tau = adiabatic_tau(0.5, 3.0, 4);
        let d = derive(&reference_engine(tau));
        let beta2 = 0.4;
        let beta1 = beta2 * d.nu_tau / d.nu0;
        let p = TwoLevelParams::new(0.5, 3.0, tau, beta1, beta2).unwrap();
        let x = beta1 * d.nu0;
        let expected = 2.0 * d.adiabatic_efficiency() / (4.0 * x.cosh() * x.cosh());
        assert!((adiabatic_mean(&p).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn variance_vanishes_at_zero_temperature() {
        let p = reference_engine(adiabatic_tau(0.5, 3.0, 4))
            .with_betas(400.0, 300.0)
            .unwrap();
        let var = adiabatic_variance(&p).unwrap();
        assert!(var > 0.0 && var < 1e-150);
        // far below the tanh resolution, still on the low-temperature asymptote
        let low = adiabatic_variance_limits(&p).low_t;
        assert!(((var - low) / low).abs() < 1e-12);
    }

    #[test]
    fn omega_override_freezes_frequency() {
        let p = reference_engine(2.0).with_omega(0.3).unwrap();
        assert_eq!(p.with_tau(5.0).unwrap().omega(), 0.3);
        assert_eq!(reference_engine(2.0).with_tau(5.0).unwrap().omega(), FRAC_PI_2 / 5.0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(TwoLevelParams::new(-0.5, 3.0, 1.0, 2.0, 0.1).is_err());
        assert!(TwoLevelParams::new(0.5, 3.0, 0.0, 2.0, 0.1).is_err());
        assert!(TwoLevelParams::new(0.5, 3.0, 1.0, f64::NAN, 0.1).is_err());
    }
}
