use otto_core::sampler::{estimate_efficiency_distribution, goodness_of_fit, seeded_rng, CycleSampler};
use otto_core::spectra::{efficiency_distribution, efficiency_of, joint_distribution};
use otto_core::twolevel::{adiabatic_tau, derive, engine_spec, TwoLevelParams};
use otto_core::{CoreError, ExtendedReal, DEFAULT_GROUPING_TOL};

fn reference_engine(tau: f64) -> TwoLevelParams {
    TwoLevelParams::new(0.5, 3.0, tau, 2.0, 0.1).unwrap()
}

#[test]
fn records_are_consistent_with_spectra() {
    let spec = engine_spec(&reference_engine(2.39)).unwrap();
    let sampler = CycleSampler::new(&spec);
    let e0 = spec.spectrum_start().levels();
    let et = spec.spectrum_end().levels();
    let mut rng = seeded_rng(17);
    for _ in 0..2000 {
        let r = sampler.sample(&mut rng);
        assert_eq!(r.w1, et[r.m] - e0[r.n]);
        assert_eq!(r.q2, et[r.k] - et[r.m]);
        assert_eq!(r.w3, e0[r.l] - et[r.k]);
        assert_eq!(r.eta, efficiency_of(r.w1, r.q2, r.w3, DEFAULT_GROUPING_TOL).0);
    }
}

#[test]
fn frequencies_within_three_sigma_bands() {
    let spec = engine_spec(&reference_engine(2.39)).unwrap();
    let exact = efficiency_distribution(&joint_distribution(&spec), DEFAULT_GROUPING_TOL);
    let n = 1_000_000u64;
    let emp = estimate_efficiency_distribution(&spec, n, 42).unwrap();
    assert_eq!(emp.total(), n);
    assert_eq!(emp.atoms().len(), 6);
    for atom in exact.atoms() {
        let count = emp.count_at(atom.eta, DEFAULT_GROUPING_TOL) as f64;
        let sigma = (n as f64 * atom.prob * (1.0 - atom.prob)).sqrt();
        assert!((count - n as f64 * atom.prob).abs() < 3.0 * sigma, "{}", atom.eta);
    }
    let fit = goodness_of_fit(&emp, &exact).unwrap();
    assert!(fit.tv_distance < 5.0 / (n as f64).sqrt());
    assert!(fit.passes(1e-3));
}

#[test]
fn adiabatic_samples_stay_on_two_atoms() {
    let params = reference_engine(adiabatic_tau(0.5, 3.0, 4));
    let spec = engine_spec(&params).unwrap();
    let emp = estimate_efficiency_distribution(&spec, 100_000, 7).unwrap();
    let r = {
        let d = derive(&params);
        d.nu0 / d.nu_tau
    };
    assert_eq!(emp.atoms().len(), 2);
    assert!(emp.atoms()[0].0.approx_eq(ExtendedReal::Finite(0.0), 1e-12));
    assert!(emp.atoms()[1].0.approx_eq(ExtendedReal::Finite(1.0 - r), 1e-12));
}

#[test]
fn wrong_temperature_is_rejected() {
    let spec = engine_spec(&reference_engine(2.39)).unwrap();
    let wrong = engine_spec(&reference_engine(2.39).with_betas(1.6, 0.1).unwrap()).unwrap();
    let exact_wrong = efficiency_distribution(&joint_distribution(&wrong), DEFAULT_GROUPING_TOL);
    let emp = estimate_efficiency_distribution(&spec, 200_000, 1).unwrap();
    let fit = goodness_of_fit(&emp, &exact_wrong).unwrap();
    assert!(!fit.passes(1e-3), "p = {}", fit.p_value);
}

#[test]
fn nonadiabatic_samples_against_adiabatic_exact_violate_support() {
    let spec = engine_spec(&reference_engine(2.39)).unwrap();
    let adiabatic = engine_spec(&reference_engine(adiabatic_tau(0.5, 3.0, 4))).unwrap();
    let exact = efficiency_distribution(&joint_distribution(&adiabatic), DEFAULT_GROUPING_TOL);
    let emp = estimate_efficiency_distribution(&spec, 1000, 3).unwrap();
    assert!(matches!(
        goodness_of_fit(&emp, &exact),
        Err(CoreError::SupportViolation(_))
    ));
}
