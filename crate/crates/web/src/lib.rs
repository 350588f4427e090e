//! Browser bindings for the static demo page in `www/`.
//!
//! Each export returns a flat `Float64Array` of row-major records so the page
//! can plot without any serialization layer.

use cvgauss_core::bath::{BathModel, SpectralDensity, ThermalSpec};
use cvgauss_core::cavity::{run_protocol, squeeze_parameters, squeezed_target, EffectiveCouplings, ProtocolSpec};
use cvgauss_core::ode::OdeOptions;
use cvgauss_core::oscillators::{
    entanglement_series, integrate, threshold_r, transformed_frequencies, CovarianceVector10, DynamicsOptions,
    OscillatorPair, Reservoir,
};
use wasm_bindgen::prelude::*;

/// Longest trajectory the page may request, to keep the tab responsive.
pub const MAX_SAMPLES: usize = 20_000;

/// `(t, nu_tilde_minus, log_negativity)` triples for two oscillators with
/// unit mass and frequency, starting from a two-mode squeezed vacuum.
#[allow(clippy::too_many_arguments)]
pub fn negativity_rows(
    r: f64,
    coupling: f64,
    gamma0: f64,
    cutoff: f64,
    temperature: f64,
    t_end: f64,
    dt_out: f64,
    markov: bool,
) -> cvgauss_core::Result<Vec<f64>> {
    if t_end / dt_out > MAX_SAMPLES as f64 {
        return Err(cvgauss_core::Error::Domain(format!("more than {MAX_SAMPLES} samples requested")));
    }
    let pair = OscillatorPair::new(1.0, 1.0, coupling)?;
    let freqs = transformed_frequencies(&pair)?;
    let sd = SpectralDensity::ohmic(gamma0, cutoff)?;
    let bath = BathModel::new(sd, ThermalSpec::new(temperature)?, freqs.omega_2, t_end)?;
    let reservoir = if markov { Reservoir::Markov(&bath) } else { Reservoir::TimeDependent(&bath) };
    let v0 = CovarianceVector10::squeezed_vacuum(r, &pair)?;
    let traj = integrate(&pair, reservoir, &v0, t_end, dt_out, &DynamicsOptions::default())?;
    Ok(entanglement_series(&traj)?.iter().flat_map(|p| [p.t, p.nu_tilde_minus, p.log_negativity]).collect())
}

/// `(t, purity, distance_to_target)` triples for the two-step ring-cavity
/// protocol with real couplings, followed by `xi0` and `xi1`.
pub fn protocol_rows(kappa: f64, beta_u: f64, beta_s: f64) -> cvgauss_core::Result<Vec<f64>> {
    let ec = EffectiveCouplings::real(beta_u, beta_s);
    let spec = ProtocolSpec::default_for(kappa);
    let traj = run_protocol(&ec, kappa, &spec, OdeOptions::default())?;
    let target = squeezed_target(&ec)?;
    let (xi0, xi1) = squeeze_parameters(&ec)?;
    let mut out: Vec<f64> =
        traj.times.iter().zip(&traj.sigma).flat_map(|(t, s)| [*t, s.purity(), s.max_abs_diff(&target)]).collect();
    out.extend([xi0, xi1]);
    Ok(out)
}

fn js(e: cvgauss_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn negativity_trajectory(
    r: f64,
    coupling: f64,
    gamma0: f64,
    cutoff: f64,
    temperature: f64,
    t_end: f64,
    dt_out: f64,
    markov: bool,
) -> Result<Vec<f64>, JsError> {
    negativity_rows(r, coupling, gamma0, cutoff, temperature, t_end, dt_out, markov).map_err(js)
}

/// Squeezing threshold for surviving entanglement at temperature `T`.
#[wasm_bindgen]
pub fn squeezing_threshold(temperature: f64, coupling: f64) -> Result<f64, JsError> {
    let pair = OscillatorPair::new(1.0, 1.0, coupling).map_err(js)?;
    let freqs = transformed_frequencies(&pair).map_err(js)?;
    threshold_r(temperature, freqs.omega_2).map_err(js)
}

#[wasm_bindgen]
pub fn cavity_protocol(kappa: f64, beta_u: f64, beta_s: f64) -> Result<Vec<f64>, JsError> {
    protocol_rows(kappa, beta_u, beta_s).map_err(js)
}
