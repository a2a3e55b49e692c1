use std::path::Path;

use log::{info, warn};
use lsmm::builtin::{build_inverter_chain, InverterChain};
use lsmm::generator::{build_canonical_T, CanonicalForm};
use lsmm::linalg::{eigenvalues, is_skew_symmetric, pole_place_siso};
use lsmm::linear::{
    assemble_family, check_admissibility, derive_Q, dominant_params, error_bound, index_J,
    solve_relaxed,
};
use lsmm::series::{
    assemble_nonlinear_family, default_samples, moment_matching_on_manifold_check,
    nonlinear_error_bound, solve_pde_series,
};
use lsmm::sim::{
    estimate_gamma_rms, frequency_response, log_grid, rms_value, simulate_interconnection,
    steady_state_error_map, steady_state_rms_limit, DrivenSystem, TruncatedOutputs,
};
use lsmm::{
    Error, Mat, NonlinearReducedModel, PolyMap, ReducedModel, ReductionParams, SignalGenerator,
    SimConfig, StateSpace, Vector, Which,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    pipeline_matrix, FssConfig, GammaMethod, InterpolationConfig, InverterConfig, Pipeline,
    ProjectConfig, SimSettings, SystemSource, MAX_SIMULATED_HORIZON,
};
use crate::error::CliError;
use crate::io::{write_csv, write_json, Complex, ModelFile};

/// System, generator and reduced model shared by every command.
struct Setup {
    sys: StateSpace,
    generator: SignalGenerator,
    model: ReducedModel,
    form: CanonicalForm,
    params: Option<ReductionParams>,
    nonlinear: Option<Nonlinear>,
}

struct Nonlinear {
    config: InverterConfig,
    model: NonlinearReducedModel,
    /// Output of the series solution; absent when the model was read from a file.
    mu: Option<PolyMap>,
}

fn spectrum_json(m: &Mat) -> Result<Vec<Complex>, CliError> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| Complex { re: z.re, im: z.im })
        .collect())
}

fn is_hurwitz(m: &Mat) -> Result<bool, CliError> {
    Ok(eigenvalues(m)?.iter().all(|z| z.re < 0.0))
}

fn placed_delta(sys: &StateSpace, generator: &SignalGenerator) -> Result<Vector, CliError> {
    let nu = generator.nu();
    let sigma = eigenvalues(&sys.a)?;
    if nu > sigma.len() {
        return Err(CliError::Config(format!(
            "Delta must be given when nu = {nu} exceeds n = {}",
            sigma.len()
        )));
    }
    if nu < sigma.len() && sigma[nu - 1].im > 0.0 {
        return Err(Error::PairSplit { r: nu }.into());
    }
    Ok(pole_place_siso(&generator.s, &generator.l, &sigma[..nu])?)
}

fn reduction_params(
    cfg: &ProjectConfig,
    sys: &StateSpace,
    g: &SignalGenerator,
) -> Result<Option<ReductionParams>, CliError> {
    let params = match &cfg.pipeline {
        Pipeline::Dominant => dominant_params(sys, g, cfg.order()?)?,
        Pipeline::Explicit { p, delta } => {
            let p = pipeline_matrix(p)?;
            if cfg.r.is_some_and(|r| r != p.nrows()) {
                return Err(CliError::Config(format!(
                    "r disagrees with the {} rows of P",
                    p.nrows()
                )));
            }
            let delta = match delta {
                Some(d) => Vector::from_vec(d.clone()),
                None => placed_delta(sys, g)?,
            };
            let q = derive_Q(&p, &build_canonical_T(g)?)?;
            ReductionParams { p, delta, q }
        }
        Pipeline::Relaxed { .. } => return Ok(None),
    };
    Ok(Some(params))
}

fn setup(cfg: &ProjectConfig) -> Result<Setup, CliError> {
    let sys = cfg.linear_system()?;
    let generator = cfg.generator()?;
    let form = build_canonical_T(&generator)?;
    info!(
        "system of order {}, generator of dimension {}",
        sys.n(),
        generator.nu()
    );

    if let Some(path) = &cfg.model_file {
        let file = ModelFile::load(path)?;
        let model = file.model()?;
        let nonlinear = match (&cfg.system, file.kappa()?) {
            (SystemSource::Inverter(inv), Some(kappa)) => {
                let params = ReductionParams {
                    p: model.p.clone(),
                    delta: model
                        .delta
                        .clone()
                        .unwrap_or_else(|| Vector::zeros(generator.nu())),
                    q: model
                        .q
                        .clone()
                        .unwrap_or_else(|| Mat::zeros(generator.nu(), model.r())),
                };
                Some(Nonlinear {
                    config: inv.clone(),
                    model: NonlinearReducedModel {
                        f: model.f.clone(),
                        g: model.g.clone(),
                        kappa,
                        params,
                    },
                    mu: None,
                })
            }
            (SystemSource::Inverter(_), None) => {
                return Err(CliError::Config(
                    "model file lacks kappa for a nonlinear system".into(),
                ))
            }
            _ => None,
        };
        return Ok(Setup {
            sys,
            generator,
            model,
            form,
            params: None,
            nonlinear,
        });
    }

    let params = reduction_params(cfg, &sys, &generator)?;
    let model = match (&cfg.pipeline, &params) {
        (Pipeline::Relaxed { p }, _) => solve_relaxed(&sys, &generator, &pipeline_matrix(p)?)?,
        (_, Some(params)) => assemble_family(&sys, &generator, params)?,
        (_, None) => unreachable!("family pipelines always produce parameters"),
    };
    let nonlinear = match &cfg.system {
        SystemSource::Inverter(inv) => {
            let params = params.as_ref().ok_or_else(|| {
                CliError::Config("the relaxed pipeline applies to linear systems only".into())
            })?;
            let (field, h) = build_inverter_chain(&inv.params()?, inv.degree)?;
            let sol = solve_pde_series(&field, &h, &generator, inv.degree)?;
            let model = assemble_nonlinear_family(&generator, &sol.mu, params)?;
            Some(Nonlinear {
                config: inv.clone(),
                model,
                mu: Some(sol.mu),
            })
        }
        _ => None,
    };
    Ok(Setup {
        sys,
        generator,
        model,
        form,
        params,
        nonlinear,
    })
}

fn emit(out: &Path, name: &str, report: &Value) -> Result<(), CliError> {
    write_json(&out.join(name), report)?;
    println!(
        "{}",
        serde_json::to_string_pretty(report).unwrap_or_default()
    );
    Ok(())
}

pub fn reduce(cfg: &ProjectConfig, out: &Path) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let mut file = ModelFile::new(&s.model, Some(&s.form));
    if let Some(nl) = &s.nonlinear {
        file = file.with_kappa(&nl.model.kappa);
    }
    write_json(&out.join("model.json"), &file)?;

    let admissibility: Vec<Value> = match &s.params {
        Some(p) => check_admissibility(&s.generator, p)?
            .checks
            .iter()
            .map(|(c, ok)| json!({ "condition": format!("{c:?}"), "ok": ok }))
            .collect(),
        None => Vec::new(),
    };
    let mut report = json!({
        "n": s.sys.n(),
        "nu": s.generator.nu(),
        "r": s.model.r(),
        "index_J": index_J(&s.sys, &s.generator, &s.model)?,
        "error_bound": error_bound(&s.sys, &s.generator, &s.model)?,
        "sigma_F": spectrum_json(&s.model.f)?,
        "admissibility": admissibility,
        "spectrum_clash": s.model.spectrum_clash,
    });
    if let Some(Nonlinear {
        model,
        mu: Some(mu),
        ..
    }) = &s.nonlinear
    {
        report["nonlinear_error_bound"] = json!(nonlinear_error_bound(
            mu,
            model,
            &default_samples(&s.generator)
        )?);
        let samples = lsmm::series::halton_ball(model.r(), s.generator.omega0.norm(), 64);
        report["manifold_check"] = json!(moment_matching_on_manifold_check(model, mu, &samples)?);
    }
    emit(out, "report.json", &report)
}

pub fn freqresp(cfg: &ProjectConfig, out: &Path) -> Result<(), CliError> {
    let grid = &cfg.freq;
    if !(grid.lo > 0.0 && grid.hi >= grid.lo && grid.points >= 1) {
        return Err(CliError::Config(
            "frequency grid needs 0 < lo <= hi and at least one point".into(),
        ));
    }
    let omegas = log_grid(grid.lo, grid.hi, grid.points);
    let sys = cfg.linear_system()?;
    let wants_model = cfg.model_file.is_some()
        || cfg.r.is_some()
        || !matches!(cfg.system, SystemSource::Inline { .. });
    let model = if wants_model {
        Some(setup(cfg)?.model)
    } else {
        None
    };

    let full = frequency_response(&sys, &omegas)?;
    let reduced = model
        .as_ref()
        .map(|m| frequency_response(&m.as_state_space(), &omegas))
        .transpose()?;
    let mut header = vec!["omega", "mag", "phase"];
    if reduced.is_some() {
        header.extend(["model_mag", "model_phase", "rel_error"]);
    }
    header.push("pole");
    let mut poles = 0;
    let rows: Vec<Vec<f64>> = (0..omegas.len())
        .map(|k| {
            let w = full[k].value;
            let mut row = vec![
                omegas[k],
                w.map_or(f64::NAN, |z| z.norm()),
                w.map_or(f64::NAN, |z| z.arg()),
            ];
            let mut pole = w.is_none();
            if let Some(red) = &reduced {
                let v = red[k].value;
                pole |= v.is_none();
                let rel = match (w, v) {
                    (Some(a), Some(b)) => (a - b).norm() / a.norm(),
                    _ => f64::NAN,
                };
                row.extend([
                    v.map_or(f64::NAN, |z| z.norm()),
                    v.map_or(f64::NAN, |z| z.arg()),
                    rel,
                ]);
            }
            poles += pole as usize;
            row.push(if pole { 1.0 } else { 0.0 });
            row
        })
        .collect();
    write_csv(&out.join("freqresp.csv"), &header, &rows)?;
    if poles > 0 {
        warn!("{poles} grid points lie on a pole and are flagged");
    }
    let report = json!({ "points": omegas.len(), "flagged": poles, "csv": "freqresp.csv" });
    emit(out, "freqresp.json", &report)
}

fn sim_config(cfg: &ProjectConfig) -> Result<SimConfig, CliError> {
    let base = match cfg.system {
        // The inverter's slowest stage has time constant 52 and its outputs are of order 1e-9.
        SystemSource::Inverter(_) => SimConfig {
            t_final: 2000.0,
            rel_tol: 1e-6,
            abs_tol: 1e-22,
            ..SimConfig::default()
        },
        _ => SimConfig::default(),
    };
    cfg.sim.resolve(&base)
}

pub fn simulate(cfg: &ProjectConfig, out: &Path) -> Result<(), CliError> {
    let sim = sim_config(cfg)?;
    let s = setup(cfg)?;
    let ws = sim.window_start();
    let (header, rows, report) = match &s.nonlinear {
        None => {
            if !is_hurwitz(&s.sys.a)? || !is_hurwitz(&s.model.f)? {
                warn!("system or model is not asymptotically stable; no steady state exists");
            }
            let systems: [&dyn DrivenSystem; 2] = [&s.sys, &s.model];
            let traj = simulate_interconnection(&s.generator, &systems, &sim)?;
            let rows: Vec<Vec<f64>> = traj
                .times
                .iter()
                .zip(&traj.values)
                .map(|(t, v)| vec![*t, v[2], v[3], v[2] - v[3]])
                .collect();
            let e: Vec<f64> = rows.iter().map(|r| r[3]).collect();
            let y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
            let report = json!({
                "window_start": ws,
                "rms_y": rms_value(&traj.times, &y, ws)?,
                "rms_e": rms_value(&traj.times, &e, ws)?,
            });
            (vec!["t", "y", "psi", "e"], rows, report)
        }
        Some(nl) => {
            let degree = nl.model.kappa.degree();
            let plant = InverterChain {
                params: nl.config.params()?,
            };
            let orders = [degree, 1, 3.min(degree)];
            let outs = TruncatedOutputs::new(&nl.model, &orders)?;
            let systems: [&dyn DrivenSystem; 2] = [&plant, &outs];
            let traj = simulate_interconnection(&s.generator, &systems, &sim)?;
            let rows: Vec<Vec<f64>> = traj
                .times
                .iter()
                .zip(&traj.values)
                .map(|(t, v)| {
                    vec![
                        *t,
                        v[2],
                        v[3],
                        v[2] - v[3],
                        v[4],
                        v[5],
                        v[2] - v[4],
                        v[2] - v[5],
                    ]
                })
                .collect();
            let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
            let report = json!({
                "window_start": ws,
                "rms_y": rms_value(&traj.times, &col(1), ws)?,
                "rms_e": rms_value(&traj.times, &col(3), ws)?,
                "rms_e1": rms_value(&traj.times, &col(6), ws)?,
                "rms_e3": rms_value(&traj.times, &col(7), ws)?,
            });
            (
                vec!["t", "y", "psi", "e", "psi1", "psi3", "e1", "e3"],
                rows,
                report,
            )
        }
    };
    write_csv(&out.join("simulate.csv"), &header, &rows)?;
    emit(out, "simulate.json", &report)
}

#[derive(Serialize)]
struct BoundReport {
    error_bound: f64,
    gamma_rms_estimate: f64,
    ratio: f64,
    method: GammaMethod,
    horizon: Option<f64>,
}

pub fn bound(cfg: &ProjectConfig, out: &Path) -> Result<(), CliError> {
    let sim = sim_config(cfg)?;
    let s = setup(cfg)?;
    if !is_skew_symmetric(&s.generator.s, 1e-12) {
        return Err(Error::NotSkewSymmetric.into());
    }
    let slowest = |m: &Mat| -> Result<f64, CliError> {
        Ok(eigenvalues(m)?
            .iter()
            .map(|z| -z.re)
            .fold(f64::INFINITY, f64::min))
    };
    let (ra, rf) = (slowest(&s.sys.a)?, slowest(&s.model.f)?);
    if ra <= 0.0 {
        return Err(Error::Unstable {
            which: Which::System,
        }
        .into());
    }
    if rf <= 0.0 {
        return Err(Error::Unstable {
            which: Which::Model,
        }
        .into());
    }
    let bound = error_bound(&s.sys, &s.generator, &s.model)?;
    let needed = (40.0 / ra.min(rf)).max(sim.t_final);
    let method = match cfg.gamma {
        GammaMethod::Auto if needed > MAX_SIMULATED_HORIZON => {
            info!("transient needs a horizon of {needed:.3e}; using the harmonic limit");
            GammaMethod::Harmonic
        }
        GammaMethod::Auto => GammaMethod::Simulate,
        m => m,
    };
    let (gamma, horizon) = match method {
        GammaMethod::Harmonic => {
            let map = steady_state_error_map(&s.sys, &s.model, &s.generator)?;
            (steady_state_rms_limit(&map, &s.generator)?, None)
        }
        _ => {
            let est = estimate_gamma_rms(&s.sys, &s.model, &s.generator, &sim)?;
            (est.gamma, Some(est.horizon))
        }
    };
    let report = BoundReport {
        error_bound: bound,
        gamma_rms_estimate: gamma,
        ratio: if bound > 0.0 { gamma / bound } else { f64::NAN },
        method,
        horizon,
    };
    let value = serde_json::to_value(&report).map_err(|e| CliError::Numerical(e.to_string()))?;
    emit(out, "bound.json", &value)?;
    if gamma > bound + 1e-6 {
        return Err(CliError::Numerical(format!(
            "steady-state gain {gamma:.6e} exceeds the error bound {bound:.6e}"
        )));
    }
    Ok(())
}

pub const EXAMPLES: [&str; 3] = ["fss", "inverter", "lag"];

/// Ready-to-run configuration for a named example.
pub fn example_config(name: &str) -> Result<ProjectConfig, CliError> {
    let base = |system| ProjectConfig {
        system,
        interpolation: None,
        r: None,
        pipeline: Pipeline::Dominant,
        sim: SimSettings::default(),
        freq: Default::default(),
        gamma: GammaMethod::Auto,
        model_file: None,
    };
    Ok(match name {
        "fss" => {
            let mut c = base(SystemSource::Fss(FssConfig {
                modes: 30,
                seed: 1009,
            }));
            c.r = Some(10);
            c
        }
        "inverter" => {
            let mut c = base(SystemSource::Inverter(InverterConfig {
                stages: 12,
                v_t: 0.25,
                alpha: 4.0,
                degree: 3,
            }));
            c.r = Some(4);
            c
        }
        // Second-order lag with an exact-matching model of order nu = 2 at +-i.
        "lag" => {
            let mut c = base(SystemSource::Inline {
                a: vec![vec![-1.0, 0.0], vec![1.0, -3.0]],
                b: vec![1.0, 0.0],
                c: vec![0.0, 3.0],
            });
            c.interpolation = Some(InterpolationConfig {
                frequencies: Some(vec![1.0]),
                ..Default::default()
            });
            c.r = Some(2);
            c.pipeline = Pipeline::Explicit {
                p: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                delta: None,
            };
            c
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown example {other}; choose one of {}",
                EXAMPLES.join(", ")
            )))
        }
    })
}
