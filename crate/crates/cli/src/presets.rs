//! Built-in parameter sets for the figure scans and the two auxiliary
//! scenarios.

use crate::config::{
    BathSection, CavitySection, Config, OscillatorSection, OutputSection, Scenario, Sweep, SweepParameter,
};
use cvgauss_core::cavity::Propagation;

pub const NAMES: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "threshold", "ring-cavity"];

fn oscillators(name: &str, coupling: f64, r: f64, bath: BathSection, sweep: Sweep) -> Config {
    Config {
        scenario: Scenario::Oscillators,
        name: None,
        preset: Some(name.to_string()),
        oscillators: OscillatorSection { coupling, r, ..OscillatorSection::default() },
        bath,
        cavity: None,
        ensemble: None,
        threshold: Default::default(),
        ode: Default::default(),
        sweep: Some(sweep),
        output: OutputSection::default(),
    }
}

fn bath(gamma0: f64, cutoff: f64) -> BathSection {
    BathSection { gamma0, cutoff, temperature: 10.0, ..BathSection::default() }
}

pub fn preset(name: &str) -> Option<Config> {
    let r_values = || Sweep { parameter: SweepParameter::R, values: vec![1.0, 1.498, 2.0] };
    let cfg = match name {
        "fig2" => oscillators(name, 0.0, 1.0, bath(0.1, 100.0), r_values()),
        "fig3" => oscillators(
            name,
            0.0,
            1.6,
            bath(1.0, 200.0),
            Sweep { parameter: SweepParameter::Cutoff, values: vec![200.0, 500.0, 800.0] },
        ),
        "fig4" => oscillators(
            name,
            0.0,
            1.6,
            bath(0.05, 100.0),
            Sweep { parameter: SweepParameter::Gamma0, values: vec![0.05, 1.0, 5.0] },
        ),
        "fig5" => oscillators(name, 0.8, 1.0, bath(0.1, 100.0), r_values()),
        "threshold" => Config {
            scenario: Scenario::Threshold,
            sweep: None,
            ..oscillators(name, 0.0, 1.0, bath(0.1, 100.0), r_values())
        },
        "ring-cavity" => Config {
            scenario: Scenario::RingCavity,
            cavity: Some(CavitySection {
                kappa: Some(1.0),
                beta_u: None,
                beta_s: None,
                phase_u: 0.0,
                phase_s: 0.0,
                tau1: None,
                tau2: None,
                dt_out: None,
                first: Propagation::Clockwise,
            }),
            sweep: None,
            ..oscillators(name, 0.0, 1.0, bath(0.1, 100.0), r_values())
        },
        _ => return None,
    };
    Some(cfg)
}

/// Config used when only `--scenario` is given.
pub fn for_scenario(s: Scenario) -> Config {
    let mut cfg = match s {
        Scenario::Oscillators => preset("fig2").expect("built-in preset"),
        Scenario::Threshold => preset("threshold").expect("built-in preset"),
        Scenario::RingCavity => preset("ring-cavity").expect("built-in preset"),
    };
    if s == Scenario::Oscillators {
        cfg.sweep = None;
        cfg.preset = None;
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in NAMES {
            let cfg = preset(name).unwrap();
            assert!(cfg.jobs().is_ok(), "{name}");
        }
        assert!(preset("fig9").is_none());
    }

    #[test]
    fn figure_sweeps() {
        let fig2 = preset("fig2").unwrap().jobs().unwrap();
        assert_eq!(fig2.iter().map(|j| j.config.oscillators.r).collect::<Vec<_>>(), [1.0, 1.498, 2.0]);
        assert!(fig2.iter().all(|j| j.config.oscillators.coupling == 0.0 && j.config.bath.gamma0 == 0.1));
        let fig3 = preset("fig3").unwrap().jobs().unwrap();
        assert_eq!(fig3.iter().map(|j| j.config.bath.cutoff).collect::<Vec<_>>(), [200.0, 500.0, 800.0]);
        assert!(fig3.iter().all(|j| j.config.bath.gamma0 == 1.0 && j.config.oscillators.r == 1.6));
        let fig4 = preset("fig4").unwrap().jobs().unwrap();
        assert_eq!(fig4.iter().map(|j| j.config.bath.gamma0).collect::<Vec<_>>(), [0.05, 1.0, 5.0]);
        let fig5 = preset("fig5").unwrap().jobs().unwrap();
        assert!(fig5.iter().all(|j| j.config.oscillators.coupling == 0.8));
        for jobs in [fig2, fig3, fig4, fig5] {
            assert!(jobs.iter().all(|j| j.config.bath.temperature == 10.0));
        }
    }

    #[test]
    fn scenario_defaults() {
        assert_eq!(for_scenario(Scenario::Oscillators).jobs().unwrap().len(), 1);
        assert_eq!(for_scenario(Scenario::RingCavity).scenario, Scenario::RingCavity);
    }
}
