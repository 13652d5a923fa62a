use super::joint::{joint_distribution, JointDistribution};
use super::EngineSpec;
use crate::error::{CoreError, CoreResult};
use crate::extended::ExtendedReal;

/// Infinity mass at or above which efficiency moments are reported as undefined.
pub const INFINITY_MASS_TOL: f64 = 1e-12;

/// `|⟨Q2⟩|` below which the thermodynamic efficiency is undefined.
pub const MEAN_HEAT_TOL: f64 = 1e-12;

/// Stochastic efficiency `η = −(W1 + W3)/Q2` of a single path.
///
/// A heat within `tol` of zero counts as `0⁺`: the result is `±∞` following
/// the sign of the work output, or `0` when the work vanishes as well. The
/// flag reports whether the `0/0 = 0` rule was applied.
pub fn efficiency_of(w1: f64, q2: f64, w3: f64, tol: f64) -> (ExtendedReal, bool) {
    let work = -(w1 + w3);
    if q2.abs() <= tol {
        if work.abs() <= tol {
            (ExtendedReal::Finite(0.0), true)
        } else if work > 0.0 {
            (ExtendedReal::PosInfinity, false)
        } else {
            (ExtendedReal::NegInfinity, false)
        }
    } else {
        (ExtendedReal::Finite(work / q2), false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyAtom {
    pub eta: ExtendedReal,
    pub prob: f64,
}

/// Purely atomic distribution of the stochastic efficiency on `ℝ ∪ {±∞}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyDistribution {
    atoms: Vec<EfficiencyAtom>,
    zero_over_zero_weight: f64,
    grouping_tol: f64,
}

impl EfficiencyDistribution {
    /// Merges finite atoms within `grouping_tol` of each other, drops zero
    /// weights and sorts ascending.
    pub fn from_atoms(
        atoms: impl IntoIterator<Item = EfficiencyAtom>,
        zero_over_zero_weight: f64,
        grouping_tol: f64,
    ) -> Self {
        let mut atoms: Vec<EfficiencyAtom> = atoms.into_iter().filter(|a| a.prob != 0.0).collect();
        atoms.sort_by(|a, b| a.eta.total_cmp(&b.eta));
        let mut merged: Vec<EfficiencyAtom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if last.eta.approx_eq(atom.eta, grouping_tol) => last.prob += atom.prob,
                _ => merged.push(atom),
            }
        }
        Self {
            atoms: merged,
            zero_over_zero_weight,
            grouping_tol,
        }
    }

    pub fn atoms(&self) -> &[EfficiencyAtom] {
        &self.atoms
    }

    /// Mass placed at `η = 0` by the `0/0 = 0` convention.
    pub fn zero_over_zero_weight(&self) -> f64 {
        self.zero_over_zero_weight
    }

    pub fn grouping_tol(&self) -> f64 {
        self.grouping_tol
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    pub fn infinity_mass(&self) -> f64 {
        self.atoms.iter().filter(|a| !a.eta.is_finite()).map(|a| a.prob).sum()
    }

    pub fn support(&self) -> impl Iterator<Item = ExtendedReal> + '_ {
        self.atoms.iter().map(|a| a.eta)
    }

    /// Total mass of atoms within the grouping tolerance of `eta`.
    pub fn mass_at(&self, eta: impl Into<ExtendedReal>) -> f64 {
        let eta = eta.into();
        self.atoms
            .iter()
            .filter(|a| a.eta.approx_eq(eta, self.grouping_tol))
            .map(|a| a.prob)
            .sum()
    }

    /// Largest absolute weight difference over the union of both supports.
    pub fn max_weight_difference(&self, other: &Self) -> f64 {
        self.support()
            .chain(other.support())
            .map(|eta| (self.mass_at(eta) - other.mass_at(eta)).abs())
            .fold(0.0, f64::max)
    }
}

/// Pushes a joint `(W1, Q2, W3)` distribution forward to `η`.
pub fn efficiency_distribution(joint: &JointDistribution, tol: f64) -> EfficiencyDistribution {
    let mut zero_over_zero = 0.0;
    let atoms: Vec<EfficiencyAtom> = joint
        .atoms()
        .iter()
        .map(|a| {
            let (eta, routed) = efficiency_of(a.w1, a.q2, a.w3, tol);
            if routed {
                zero_over_zero += a.prob;
            }
            EfficiencyAtom { eta, prob: a.prob }
        })
        .collect();
    EfficiencyDistribution::from_atoms(atoms, zero_over_zero, tol)
}

/// Mean and variance of the efficiency, present only when no weight sits at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub defined: bool,
    pub infinity_mass: f64,
}

pub fn efficiency_moments(dist: &EfficiencyDistribution) -> MomentReport {
    let infinity_mass = dist.infinity_mass();
    if infinity_mass >= INFINITY_MASS_TOL {
        return MomentReport {
            mean: None,
            variance: None,
            defined: false,
            infinity_mass,
        };
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    for a in dist.atoms() {
        if let Some(x) = a.eta.finite() {
            m1 += a.prob * x;
            m2 += a.prob * x * x;
        }
    }
    MomentReport {
        mean: Some(m1),
        variance: Some(m2 - m1 * m1),
        defined: true,
        infinity_mass,
    }
}

/// `Cov(Q2, η)` together with the residual of `⟨η⟩ = η_th − Cov(Q2, η)/⟨Q2⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceReport {
    pub cov: Option<f64>,
    pub identity_residual: Option<f64>,
    pub defined: bool,
}

pub fn efficiency_heat_covariance(joint: &JointDistribution) -> CovarianceReport {
    let undefined = CovarianceReport {
        cov: None,
        identity_residual: None,
        defined: false,
    };
    let tol = joint.grouping_tol();
    let mut infinity_mass = 0.0;
    let (mut mean_eta, mut mean_q2_eta) = (0.0, 0.0);
    for a in joint.atoms() {
        match efficiency_of(a.w1, a.q2, a.w3, tol).0 {
            ExtendedReal::Finite(eta) => {
                mean_eta += a.prob * eta;
                mean_q2_eta += a.prob * a.q2 * eta;
            }
            _ => infinity_mass += a.prob,
        }
    }
    if infinity_mass >= INFINITY_MASS_TOL {
        return undefined;
    }
    let means = joint.means();
    let cov = mean_q2_eta - means.q2 * mean_eta;
    let identity_residual = (means.q2.abs() >= MEAN_HEAT_TOL).then(|| {
        let eta_th = joint.mean_work_output() / means.q2;
        (mean_eta - eta_th + cov / means.q2).abs()
    });
    CovarianceReport {
        cov: Some(cov),
        identity_residual,
        defined: true,
    }
}

/// `η_th = −(⟨W1⟩ + ⟨W3⟩)/⟨Q2⟩`.
pub fn thermodynamic_efficiency(spec: &EngineSpec) -> CoreResult<f64> {
    let joint = joint_distribution(spec);
    let q2 = joint.means().q2;
    if q2.abs() < MEAN_HEAT_TOL {
        return Err(CoreError::Undefined(format!(
            "mean absorbed heat {q2:e} vanishes; thermodynamic efficiency is undefined"
        )));
    }
    Ok(joint.mean_work_output() / q2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConditions {
    pub heat_in_positive: bool,
    pub work_out_positive: bool,
    pub is_engine: bool,
}

pub fn engine_conditions(spec: &EngineSpec) -> EngineConditions {
    let joint = joint_distribution(spec);
    let heat_in_positive = joint.means().q2 > 0.0;
    let work_out_positive = joint.mean_work_output() > 0.0;
    EngineConditions {
        heat_in_positive,
        work_out_positive,
        is_engine: heat_in_positive && work_out_positive,
    }
}
