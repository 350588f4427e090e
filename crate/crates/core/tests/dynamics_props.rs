use cvgauss_core::bath::{BathModel, SpectralDensity, ThermalSpec};
use cvgauss_core::gaussian::ppt_negativity;
use cvgauss_core::oscillators::{
    closed_form_free, integrate, slot, transformed_frequencies, CovarianceVector10, DynamicsOptions, OscillatorPair,
    Reservoir,
};
use proptest::prelude::*;

fn bath_for(pair: &OscillatorPair, horizon: f64) -> BathModel {
    let freqs = transformed_frequencies(pair).unwrap();
    BathModel::new(SpectralDensity::ohmic(0.1, 20.0).unwrap(), ThermalSpec::new(10.0).unwrap(), freqs.omega_2, horizon)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn v_plus_survives_any_bath(r in 0.0..2.5f64, lambda in -0.8..0.8f64, markov in any::<bool>()) {
        let pair = OscillatorPair::new(1.0, 1.0, lambda).unwrap();
        let bath = bath_for(&pair, 30.0);
        let reservoir = if markov { Reservoir::Markov(&bath) } else { Reservoir::TimeDependent(&bath) };
        let v0 = CovarianceVector10::squeezed_vacuum(r, &pair).unwrap();
        let traj = integrate(&pair, reservoir, &v0, 30.0, 0.1, &DynamicsOptions::default()).unwrap();
        let (m, wf) = (traj.mass, traj.freqs.omega_f);
        let p0 = v0.v_plus_11(m, wf);
        for v in &traj.states {
            prop_assert!((v.v_plus_11(m, wf) - p0).abs() <= 1e-6 * p0);
        }
    }

    #[test]
    fn cross_block_stays_zero(
        d in (0.05..3.0f64, -0.5..0.5f64, 0.05..3.0f64),
        e in (0.05..3.0f64, -0.5..0.5f64, 0.05..3.0f64),
        lambda in -0.8..0.8f64,
    ) {
        let pair = OscillatorPair::new(1.0, 1.0, lambda).unwrap();
        let bath = bath_for(&pair, 10.0);
        let mut v0 = CovarianceVector10([0.0; 10]);
        // keep each block a valid single-mode state
        let fix = |(a, b, c): (f64, f64, f64)| (a + 0.5, b, c + 0.5 + b * b / (a + 0.5));
        let (a, b, c) = fix(d);
        v0.0[slot::V11] = a;
        v0.0[slot::V12] = b;
        v0.0[slot::V22] = c;
        let (a, b, c) = fix(e);
        v0.0[slot::V33] = a;
        v0.0[slot::V34] = b;
        v0.0[slot::V44] = c;
        let traj = integrate(&pair, Reservoir::TimeDependent(&bath), &v0, 10.0, 0.5, &DynamicsOptions::default()).unwrap();
        for v in &traj.states {
            prop_assert!(v.cross_block().iter().all(|x| x.abs() <= 1e-10));
        }
    }

    #[test]
    fn free_block_matches_closed_form(
        a in 0.1..3.0f64,
        b in -1.0..1.0f64,
        extra in 0.0..2.0f64,
        lambda in -0.9..0.9f64,
        mass in 0.5..2.0f64,
    ) {
        let pair = OscillatorPair::new(mass, 1.0, lambda * mass).unwrap();
        let v22 = (0.25 + b * b) / a + extra;
        let mut v0 = CovarianceVector10::squeezed_vacuum(0.0, &pair).unwrap();
        v0.0[slot::V11] = a;
        v0.0[slot::V12] = b;
        v0.0[slot::V22] = v22;
        let traj = integrate(&pair, Reservoir::Off, &v0, 20.0, 0.25, &DynamicsOptions::default()).unwrap();
        let wf = traj.freqs.omega_f;
        for (t, v) in traj.times.iter().zip(&traj.states) {
            let (x, y, z) = closed_form_free(a, b, v22, wf, mass, *t).unwrap();
            let scale = a.max(v22).max(1.0) * 1e-7;
            prop_assert!((v.0[slot::V11] - x).abs() <= scale);
            prop_assert!((v.0[slot::V12] - y).abs() <= scale);
            prop_assert!((v.0[slot::V22] - z).abs() <= scale);
        }
    }
}

/// Late-time local minima of `V11`, where the free-mode quadratures are
/// uncorrelated. There the partial transpose pairs the free-mode position with
/// the damped-mode momentum, so entanglement is decided by `V11 V44 < 1/4`.
#[test]
fn product_criterion_at_squeezing_minima() {
    let pair = OscillatorPair::new(1.0, 1.0, 0.0).unwrap();
    let bath =
        BathModel::new(SpectralDensity::ohmic(0.1, 100.0).unwrap(), ThermalSpec::new(10.0).unwrap(), 1.0, 0.0).unwrap();
    let mut checked = 0;
    let mut both = [0, 0];
    for k in 0..40 {
        // r spread over [0.6, 2.6], sampled on both sides of the threshold
        let r = 0.6 + 0.05 * k as f64 + 0.013;
        let v0 = CovarianceVector10::squeezed_vacuum(r, &pair).unwrap();
        let traj = integrate(&pair, Reservoir::Markov(&bath), &v0, 50.0, 0.01, &DynamicsOptions::default()).unwrap();
        let v11 = traj.series(slot::V11);
        for i in 1..traj.len() - 1 {
            if traj.times[i] < 40.0 || !(v11[i] < v11[i - 1] && v11[i] <= v11[i + 1]) {
                continue;
            }
            let v = &traj.states[i];
            let product = v.0[slot::V11] * v.0[slot::V44];
            if (product - 0.25).abs() < 2e-3 {
                continue;
            }
            let ent = ppt_negativity(&v.to_bare().unwrap()).unwrap().entangled;
            assert_eq!(ent, product < 0.25, "r = {r}, t = {}: V11 V44 = {product}", traj.times[i]);
            checked += 1;
            both[usize::from(ent)] += 1;
        }
    }
    assert!(checked >= 100, "only {checked} snapshots");
    assert!(both[0] > 10 && both[1] > 10, "{both:?}");
}

/// `V44` relaxes to the Bose value; `V33` carries the stationary shift of the
/// anomalous-diffusion term, `V33 = (V44 / M - f2) / (M Omega~^2)`.
#[test]
fn markov_fixed_point() {
    let pair = OscillatorPair::new(1.0, 1.0, 0.0).unwrap();
    for temperature in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        let th = ThermalSpec::new(temperature).unwrap();
        let bath = BathModel::new(SpectralDensity::ohmic(0.1, 100.0).unwrap(), th, 1.0, 0.0).unwrap();
        let v0 = CovarianceVector10::squeezed_vacuum(1.0, &pair).unwrap();
        let traj = integrate(&pair, Reservoir::Markov(&bath), &v0, 150.0, 1.0, &DynamicsOptions::default()).unwrap();
        let thermal = cvgauss_core::bath::mean_occupation(&th, 1.0).unwrap() + 0.5;
        let c = bath.markov();
        let w2 = 1.0 + c.freq_shift + bath.counterterm();
        let last = traj.states.last().unwrap();
        assert!((last.0[slot::V44] / thermal - 1.0).abs() < 1e-6, "T = {temperature}");
        let v33 = (last.0[slot::V44] - c.f2) / w2;
        assert!((last.0[slot::V33] / v33 - 1.0).abs() < 1e-6, "T = {temperature}");
        assert!(last.0[slot::V34].abs() < 1e-6);
        if temperature >= 5.0 {
            assert!((last.0[slot::V33] / thermal - 1.0).abs() < 0.03, "T = {temperature}");
        }
    }
}
