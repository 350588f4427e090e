//! Executes jobs and writes their CSV tables and JSON manifests.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use cvgauss_core::bath::{markov_coefficients, mean_occupation, BathCoefficients, BathModel};
use cvgauss_core::cavity::{
    build_system, eigenvalue_report, run_protocol, squeeze_parameters, squeezed_target, upper_triangle,
    upper_triangle_labels, validity_check, ProtocolSpec, C2, C_MINUS2,
};
use cvgauss_core::gaussian::{ppt_negativity_between, symplectic_eigenvalues};
use cvgauss_core::oscillators::{
    entanglement_series, integrate, late_time_min_nu, output_grid, sudden_death_report, threshold_bisection,
    threshold_r, transformed_frequencies, CovarianceVector10, Reservoir,
};
use serde_json::{json, Value};

use crate::config::{Config, Job, ReservoirKind, Scenario};
use crate::error::CliError;

const OSCILLATOR_COLUMNS: [&str; 13] =
    ["t", "V11", "V12", "V22", "V13", "V14", "V23", "V24", "V33", "V34", "V44", "nu_tilde_minus", "log_negativity"];

/// Scientific notation with 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn coeffs_json(c: &BathCoefficients) -> Value {
    json!({ "freq_shift": c.freq_shift, "gamma2": c.gamma2, "d2": c.d2, "f2": c.f2 })
}

struct Table {
    path: PathBuf,
    out: BufWriter<fs::File>,
}

impl Table {
    fn create(path: PathBuf, header: &[String]) -> Result<Self, CliError> {
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut t = Self { path, out: BufWriter::new(file) };
        t.line(header.iter().map(String::as_str))?;
        Ok(t)
    }

    fn line<'a>(&mut self, cells: impl IntoIterator<Item = &'a str>) -> Result<(), CliError> {
        let mut first = true;
        for c in cells {
            if !first {
                self.out.write_all(b",").map_err(|e| io_err(&self.path, e))?;
            }
            self.out.write_all(c.as_bytes()).map_err(|e| io_err(&self.path, e))?;
            first = false;
        }
        self.out.write_all(b"\n").map_err(|e| io_err(&self.path, e))
    }

    fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        self.line(cells.iter().map(String::as_str))
    }

    fn finish(mut self) -> Result<String, CliError> {
        self.out.flush().map_err(|e| io_err(&self.path, e))?;
        Ok(file_name(&self.path))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// What a finished job reports back.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stem: String,
    pub files: Vec<String>,
    pub summary: String,
}

pub fn run_job(job: &Job, dir: &Path) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (mut derived, files, summary) = match job.config.scenario {
        Scenario::Oscillators => oscillators(&job.config, &job.stem, dir)?,
        Scenario::Threshold => threshold(&job.config, &job.stem, dir)?,
        Scenario::RingCavity => ring_cavity(&job.config, &job.stem, dir)?,
    };
    let manifest_path = dir.join(format!("{}.json", job.stem));
    let mut all_files = files.clone();
    all_files.push(file_name(&manifest_path));
    if let Value::Object(ref mut m) = derived {
        m.retain(|_, v| !v.is_null());
    }
    let manifest = json!({
        "tool": "cvgauss",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": job.config.scenario.to_string(),
        "config": job.config,
        "derived": derived,
        "files": files,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is valid json");
    fs::write(&manifest_path, text + "\n").map_err(|e| io_err(&manifest_path, e))?;
    Ok(Outcome { stem: job.stem.clone(), files: all_files, summary })
}

fn oscillators(cfg: &Config, stem: &str, dir: &Path) -> Result<(Value, Vec<String>, String), CliError> {
    let o = &cfg.oscillators;
    let pair = cfg.pair()?;
    let freqs = transformed_frequencies(&pair)?;
    let (sd, th) = (cfg.spectral_density()?, cfg.thermal()?);
    let opts = cfg.dynamics_options();
    let bath = match o.reservoir {
        ReservoirKind::Off => None,
        _ => Some(BathModel::new(sd, th, freqs.omega_2, o.t_end)?),
    };
    let reservoir = match (o.reservoir, &bath) {
        (ReservoirKind::TimeDependent, Some(b)) => Reservoir::TimeDependent(b),
        (ReservoirKind::Markov, Some(b)) => Reservoir::Markov(b),
        _ => Reservoir::Off,
    };
    let v0 = CovarianceVector10::squeezed_vacuum(o.r, &pair)?;
    let traj = integrate(&pair, reservoir, &v0, o.t_end, o.dt_out, &opts)?;
    let ent = entanglement_series(&traj)?;

    let mut files = Vec::new();
    let mut table = Table::create(dir.join(format!("{stem}.csv")), &header(&OSCILLATOR_COLUMNS))?;
    let mut row = [0.0; 13];
    for ((t, v), e) in traj.times.iter().zip(&traj.states).zip(&ent) {
        row[0] = *t;
        row[1..11].copy_from_slice(&v.0);
        row[11] = e.nu_tilde_minus;
        row[12] = e.log_negativity;
        table.row(&row)?;
    }
    files.push(table.finish()?);

    if cfg.bath.dump_coefficients {
        if let Some(b) = &bath {
            let path = dir.join(format!("{stem}_bath.csv"));
            let mut table = Table::create(path, &header(&["t", "omega2_eff_sq", "gamma2", "d2", "f2"]))?;
            let shift = if o.renormalize { b.counterterm() } else { 0.0 };
            for t in output_grid(o.t_end, o.dt_out)? {
                let c = b.coefficients_at(t);
                table.row(&[t, freqs.omega_2.powi(2) + c.freq_shift + shift, c.gamma2, c.d2, c.f2])?;
            }
            files.push(table.finish()?);
        }
    }

    let deaths = sudden_death_report(&ent)?;
    let last = ent.last().expect("trajectory is never empty");
    let markov = bath.as_ref().map(BathModel::markov);
    let derived = json!({
        "omega_f": freqs.omega_f,
        "omega_2": freqs.omega_2,
        "nbar": mean_occupation(&th, freqs.omega_2)?,
        "r_th": threshold_r(th.temperature, freqs.omega_2)?,
        "counterterm": bath.as_ref().map(|b| b.counterterm()),
        "markov_coefficients": markov.as_ref().map(coeffs_json),
        "samples": traj.len(),
        "final_nu_tilde_minus": last.nu_tilde_minus,
        "final_log_negativity": last.log_negativity,
        "death_intervals": deaths.iter().map(|d| json!({ "death": d.death, "revival": d.revival })).collect::<Vec<_>>(),
    });
    let summary = format!(
        "{} samples, final E_N = {:.4}, {} separable interval(s)",
        traj.len(),
        last.log_negativity,
        deaths.len()
    );
    Ok((derived, files, summary))
}

fn threshold(cfg: &Config, stem: &str, dir: &Path) -> Result<(Value, Vec<String>, String), CliError> {
    let pair = cfg.pair()?;
    let freqs = transformed_frequencies(&pair)?;
    let (sd, th) = (cfg.spectral_density()?, cfg.thermal()?);
    let (markov, warning) = markov_coefficients(&sd, &th, freqs.omega_2)?;
    let bath = BathModel::new(sd, th, freqs.omega_2, 0.0)?;
    let search = cfg.threshold_search();
    let opts = cfg.dynamics_options();
    let r_th = threshold_r(th.temperature, freqs.omega_2)?;
    let numeric = threshold_bisection(&pair, &bath, &search, &opts)?;

    let mut files = Vec::new();
    let n = cfg.threshold.scan_points;
    if n > 0 {
        let path = dir.join(format!("{stem}.csv"));
        let mut table = Table::create(path, &header(&["r", "late_time_min_nu_tilde_minus"]))?;
        let (lo, hi) = search.bracket;
        for k in 0..n {
            let r = if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
            table.row(&[r, late_time_min_nu(&pair, &bath, r, &search, &opts)?])?;
        }
        files.push(table.finish()?);
    }
    let derived = json!({
        "omega_f": freqs.omega_f,
        "omega_2": freqs.omega_2,
        "nbar": mean_occupation(&th, freqs.omega_2)?,
        "r_th": r_th,
        "r_th_numeric": numeric,
        "markov_coefficients": coeffs_json(&markov),
        "warning": warning,
    });
    let summary = format!("r_th = {r_th:.6} (analytic), {numeric:.4} (late-time bisection)");
    Ok((derived, files, summary))
}

fn ring_cavity(cfg: &Config, stem: &str, dir: &Path) -> Result<(Value, Vec<String>, String), CliError> {
    let kappa = cfg.kappa().map_err(CliError::Config)?;
    let ec = cfg.couplings().map_err(CliError::Config)?;
    let c = cfg.cavity.as_ref().expect("validated");
    let default = ProtocolSpec::default_for(kappa);
    let spec = ProtocolSpec {
        tau1: c.tau1.unwrap_or(default.tau1),
        tau2: c.tau2.unwrap_or(default.tau2),
        dt_out: c.dt_out.unwrap_or(default.dt_out),
        first: c.first,
    };
    let (xi0, xi1) = squeeze_parameters(&ec)?;
    let traj = run_protocol(&ec, kappa, &spec, cfg.ode_options())?;
    let target = squeezed_target(&ec)?;

    let mut cols = vec!["t".to_string()];
    cols.extend(upper_triangle_labels());
    cols.push("purity".into());
    cols.push("distance_to_target".into());
    let mut table = Table::create(dir.join(format!("{stem}.csv")), &cols)?;
    for (t, s) in traj.times.iter().zip(&traj.sigma) {
        let mut row = vec![*t];
        row.extend(upper_triangle(s.matrix()));
        row.push(s.purity());
        row.push(s.max_abs_diff(&target));
        table.row(&row)?;
    }
    let files = vec![table.finish()?];

    let mut steps = Vec::new();
    for way in [spec.first, spec.first.reversed()] {
        let report = eigenvalue_report(&build_system(&ec, kappa, way)?)?;
        steps.push(json!({
            "propagation": way,
            "eigenvalues": report.eigenvalues.iter().map(|(re, im)| [*re, *im]).collect::<Vec<_>>(),
            "max_nonzero_real": report.max_nonzero_real(),
            "convergence_time": report.convergence_time,
        }));
    }
    let last = traj.final_sigma();
    let nu = symplectic_eigenvalues(last)?;
    let distance = last.max_abs_diff(&target);
    // couplings derived from atomic parameters echo those parameters
    let ensemble = match cfg.cavity.as_ref().and_then(|c| c.beta_u) {
        Some(_) => None,
        None => cfg.ensemble_params(),
    };
    let warnings: Vec<String> =
        ensemble.iter().flat_map(|p| validity_check(p).into_iter().map(|w| w.to_string())).collect();
    let derived = json!({
        "beta_u": [ec.beta_u.re, ec.beta_u.im],
        "beta_s": [ec.beta_s.re, ec.beta_s.im],
        "beta_eff": ec.beta_eff()?,
        "xi0": xi0,
        "xi1": xi1,
        "kappa": kappa,
        "protocol": spec,
        "steps": steps,
        "final": {
            "distance_to_target": distance,
            "purity": last.purity(),
            "max_symplectic_deviation": nu.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max),
            "log_negativity_c2_cm2": ppt_negativity_between(last, C2, C_MINUS2)?.log_negativity,
        },
        "ensemble": ensemble,
        "warnings": warnings,
    });
    let summary = format!("xi0 = xi1 = {xi0:.6}, final distance to target {distance:.2e}");
    Ok((derived, files, summary))
}

/// Runs jobs on up to `workers` threads; results keep the job order.
pub fn run_all(jobs: &[Job], dir: &Path, workers: usize) -> Vec<Result<Outcome, CliError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Outcome, CliError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let result = run_job(job, dir);
                *slots[i].lock().expect("no panics while holding the lock") = Some(result);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("worker finished").expect("every job ran")).collect()
}
