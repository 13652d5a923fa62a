use super::EngineSpec;
use crate::DEFAULT_GROUPING_TOL;

/// One point of the joint `(W1, Q2, W3)` distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAtom {
    pub w1: f64,
    pub q2: f64,
    pub w3: f64,
    pub prob: f64,
}

impl JointAtom {
    /// Net work delivered by the cycle, `−(W1 + W3)`.
    pub fn work_output(&self) -> f64 {
        -(self.w1 + self.w3)
    }
}

/// Mean expansion work, absorbed heat and compression work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEnergetics {
    pub w1: f64,
    pub q2: f64,
    pub w3: f64,
}

impl MeanEnergetics {
    pub fn work_output(&self) -> f64 {
        -(self.w1 + self.w3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    atoms: Vec<JointAtom>,
    grouping_tol: f64,
}

impl JointDistribution {
    /// Builds a distribution from raw atoms, merging those whose three
    /// coordinates all agree within `grouping_tol`. Zero-probability atoms are
    /// dropped. The caller is responsible for normalization.
    pub fn from_atoms(atoms: impl IntoIterator<Item = JointAtom>, grouping_tol: f64) -> Self {
        let mut merged: Vec<JointAtom> = Vec::new();
        for atom in atoms {
            if atom.prob == 0.0 {
                continue;
            }
            let close = |a: &JointAtom| {
                (a.w1 - atom.w1).abs() <= grouping_tol
                    && (a.q2 - atom.q2).abs() <= grouping_tol
                    && (a.w3 - atom.w3).abs() <= grouping_tol
            };
            match merged.iter_mut().find(|a| close(a)) {
                Some(rep) => rep.prob += atom.prob,
                None => merged.push(atom),
            }
        }
        merged.sort_by(|a, b| {
            a.w1.total_cmp(&b.w1)
                .then(a.q2.total_cmp(&b.q2))
                .then(a.w3.total_cmp(&b.w3))
        });
        Self {
            atoms: merged,
            grouping_tol,
        }
    }

    pub fn atoms(&self) -> &[JointAtom] {
        &self.atoms
    }

    pub fn grouping_tol(&self) -> f64 {
        self.grouping_tol
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    pub fn marginal_w1(&self) -> Vec<(f64, f64)> {
        merge_1d(self.atoms.iter().map(|a| (a.w1, a.prob)), self.grouping_tol)
    }

    pub fn marginal_q2(&self) -> Vec<(f64, f64)> {
        merge_1d(self.atoms.iter().map(|a| (a.q2, a.prob)), self.grouping_tol)
    }

    pub fn marginal_w3(&self) -> Vec<(f64, f64)> {
        merge_1d(self.atoms.iter().map(|a| (a.w3, a.prob)), self.grouping_tol)
    }

    pub fn means(&self) -> MeanEnergetics {
        let mut m = MeanEnergetics {
            w1: 0.0,
            q2: 0.0,
            w3: 0.0,
        };
        for a in &self.atoms {
            m.w1 += a.prob * a.w1;
            m.q2 += a.prob * a.q2;
            m.w3 += a.prob * a.w3;
        }
        m
    }

    /// `−⟨W1 + W3⟩` summed path by path. On paths that return to their
    /// starting levels the two works cancel exactly, which keeps this
    /// accurate where `⟨W1⟩` and `⟨W3⟩` nearly cancel.
    pub fn mean_work_output(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.work_output()).sum()
    }
}

/// Enumerates all `(n, m, k, l)` measurement paths of one cycle.
///
/// Path weight: `P_n(β_cold) · T_exp[n][m] · P_k(β_hot) · T_com[k][l]`, with
/// `W1 = E^τ_m − E^0_n`, `Q2 = E^τ_k − E^τ_m`, `W3 = E^0_l − E^τ_k`.
pub fn joint_distribution(spec: &EngineSpec) -> JointDistribution {
    joint_distribution_with_tol(spec, DEFAULT_GROUPING_TOL)
}

pub fn joint_distribution_with_tol(spec: &EngineSpec, grouping_tol: f64) -> JointDistribution {
    let d = spec.dim();
    let e0 = spec.spectrum_start().levels();
    let et = spec.spectrum_end().levels();
    let p_cold = &spec.thermal_cold().weights;
    let p_hot = &spec.thermal_hot().weights;
    let t_exp = spec.t_expansion();
    let t_com = spec.t_compression();

    let mut paths = Vec::with_capacity(d.pow(4));
    for n in 0..d {
        for m in 0..d {
            let first = p_cold[n] * t_exp.prob(n, m);
            for k in 0..d {
                for l in 0..d {
                    paths.push(JointAtom {
                        w1: et[m] - e0[n],
                        q2: et[k] - et[m],
                        w3: e0[l] - et[k],
                        prob: first * p_hot[k] * t_com.prob(k, l),
                    });
                }
            }
        }
    }
    JointDistribution::from_atoms(paths, grouping_tol)
}

/// Distribution of the expansion work alone, summed over `(n, m)` only.
pub fn work1_distribution(spec: &EngineSpec) -> Vec<(f64, f64)> {
    let d = spec.dim();
    let e0 = spec.spectrum_start().levels();
    let et = spec.spectrum_end().levels();
    let p = &spec.thermal_cold().weights;
    let t = spec.t_expansion();
    let pairs = (0..d).flat_map(|n| (0..d).map(move |m| (n, m)));
    merge_1d(
        pairs.map(|(n, m)| (et[m] - e0[n], p[n] * t.prob(n, m))),
        DEFAULT_GROUPING_TOL,
    )
}

/// Distribution of the absorbed heat, summed over `(n, m, k)`.
pub fn heat2_distribution(spec: &EngineSpec) -> Vec<(f64, f64)> {
    let d = spec.dim();
    let et = spec.spectrum_end().levels();
    let p_cold = &spec.thermal_cold().weights;
    let p_hot = &spec.thermal_hot().weights;
    let t = spec.t_expansion();
    // occupation of E^τ after the expansion
    let after: Vec<f64> = (0..d).map(|m| (0..d).map(|n| p_cold[n] * t.prob(n, m)).sum()).collect();
    let pairs = (0..d).flat_map(|m| (0..d).map(move |k| (m, k)));
    merge_1d(
        pairs.map(|(m, k)| (et[k] - et[m], after[m] * p_hot[k])),
        DEFAULT_GROUPING_TOL,
    )
}

/// Distribution of the compression work, summed over `(k, l)`.
pub fn work3_distribution(spec: &EngineSpec) -> Vec<(f64, f64)> {
    let d = spec.dim();
    let e0 = spec.spectrum_start().levels();
    let et = spec.spectrum_end().levels();
    let p_hot = &spec.thermal_hot().weights;
    let t = spec.t_compression();
    let pairs = (0..d).flat_map(|k| (0..d).map(move |l| (k, l)));
    merge_1d(
        pairs.map(|(k, l)| (e0[l] - et[k], p_hot[k] * t.prob(k, l))),
        DEFAULT_GROUPING_TOL,
    )
}

pub fn mean_work1(spec: &EngineSpec) -> f64 {
    joint_distribution(spec).means().w1
}

pub fn mean_work3(spec: &EngineSpec) -> f64 {
    joint_distribution(spec).means().w3
}

pub fn mean_heat2(spec: &EngineSpec) -> f64 {
    joint_distribution(spec).means().q2
}

/// Sorts `(value, prob)` pairs and merges runs whose values lie within `tol`
/// of the run's first value. Zero-probability entries are dropped.
pub(crate) fn merge_1d(items: impl IntoIterator<Item = (f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    let mut items: Vec<(f64, f64)> = items.into_iter().filter(|&(_, p)| p != 0.0).collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(items.len());
    for (x, p) in items {
        match out.last_mut() {
            Some(last) if (x - last.0).abs() <= tol => last.1 += p,
            _ => out.push((x, p)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{EnergySpectrum, Unitary};

    fn identity_spec(levels: Vec<f64>, beta1: f64, beta2: f64) -> EngineSpec {
        let d = levels.len();
        let s = EnergySpectrum::new(levels).unwrap();
        EngineSpec::new(s.clone(), s, Unitary::identity(d), Unitary::identity(d), beta1, beta2).unwrap()
    }

    #[test]
    fn identity_engine_has_no_work() {
        let spec = identity_spec(vec![-0.4, 0.4], 2.0, 0.5);
        assert_eq!(work1_distribution(&spec), vec![(0.0, 1.0)]);
        let m = joint_distribution(&spec).means();
        assert_eq!(m.w1, 0.0);
        assert_eq!(m.w3, 0.0);
        assert_eq!(mean_work1(&spec), 0.0);
        assert_eq!(mean_work3(&spec), 0.0);
    }

    #[test]
    fn identity_engine_equal_temperatures_enumeration() {
        let nu = 0.6;
        let beta = 1.3;
        let spec = identity_spec(vec![-nu, nu], beta, beta);
        let joint = joint_distribution(&spec);
        assert!(joint.atoms().iter().all(|a| a.w1 == 0.0 && a.w3 == 0.0));

        // Brute force over the four paths that survive identity transitions.
        let p = [(beta * nu).exp(), (-beta * nu).exp()];
        let z = p[0] + p[1];
        let e = [-nu, nu];
        let mut oracle = [0.0f64; 3]; // Q2 = -2ν, 0, +2ν
        for m in 0..2 {
            for k in 0..2 {
                let q2 = e[k] - e[m];
                let idx = ((q2 / (2.0 * nu)).round() as i32 + 1) as usize;
                oracle[idx] += p[m] / z * p[k] / z;
            }
        }
        let q2 = joint.marginal_q2();
        assert_eq!(q2.len(), 3);
        for ((value, prob), (expected_value, expected)) in
            q2.iter()
                .zip([(-2.0 * nu, oracle[0]), (0.0, oracle[1]), (2.0 * nu, oracle[2])])
        {
            assert!((value - expected_value).abs() < 1e-15);
            assert!((prob - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn single_atom_merging() {
        let atoms = vec![
            JointAtom {
                w1: 1.0,
                q2: 2.0,
                w3: 3.0,
                prob: 0.25,
            },
            JointAtom {
                w1: 1.0 + 1e-12,
                q2: 2.0,
                w3: 3.0 - 1e-12,
                prob: 0.5,
            },
            JointAtom {
                w1: 1.0,
                q2: 2.5,
                w3: 3.0,
                prob: 0.25,
            },
            JointAtom {
                w1: 7.0,
                q2: 2.5,
                w3: 3.0,
                prob: 0.0,
            },
        ];
        let j = JointDistribution::from_atoms(atoms, 1e-9);
        assert_eq!(j.atoms().len(), 2);
        assert_eq!(j.atoms()[0].prob, 0.75);
    }

    #[test]
    fn merge_1d_chains_within_tolerance() {
        let merged = merge_1d(vec![(0.5, 0.1), (0.0, 0.2), (1e-10, 0.3), (0.5 + 5e-10, 0.4)], 1e-9);
        assert_eq!(merged.len(), 2);
        assert!((merged[0].1 - 0.5).abs() < 1e-15);
        assert!((merged[1].1 - 0.5).abs() < 1e-15);
    }
}
