use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;

use octabush::acceptance::{self, nu_sweep_amplitudes, transfer_sweep_amplitudes, AcceptanceOptions, CriterionResult};
use octabush::analysis::{
    closure_residual, mode_series, NuOfACurve, NuPoint, SweepSystem, TransferCurve, TransferPoint, TransferSetup,
};
use octabush::dynamics::{
    bush_initial_condition, integrate_full, integrate_reduced, write_full_csv, write_reduced_csv, ReducedState,
    Schedule, Trajectory,
};
use octabush::fitting::{
    allowed_monomials_c4v, allowed_monomials_d4h, cluster_energy_fn, compare_pes, fit_polynomial,
    forbidden_term_audit, sample_energies, AmplitudeGrid, MonomialBasis, SampleSet,
};
use octabush::potentials::{reference_d4h, Exponents, PolynomialPes, VARIABLE_NAMES};
use octabush::symmetry::{
    default_stabilizer_tolerance, dynamical_domains, fourfold_axes, generate_oh, stabilizer, standard_basis,
    standard_modes, Mode, MoleculeGeometry, N_LIGANDS,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{parse_range, variable_index, ConfigError, Model, RunConfig};
use crate::run::{display_path, RunDir, Summary};

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// The configuration was rejected before anything ran.
    Config(ConfigError),
    /// A run started and errored.
    Run(String),
    /// Everything ran; a check failed or a run aborted.
    Checks,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<octabush::Error> for Failure {
    fn from(e: octabush::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(format!("i/o: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn modes3() -> [Mode; 3] {
    let (p1, p2, p3) = standard_modes();
    [p1, p2, p3]
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Run(format!("worker pool: {e}")))
}

fn finish(dir: &RunDir, summary: Summary, json_stdout: bool) -> Outcome {
    let (value, pass) = summary.finish();
    dir.write_json("summary.json", &value)?;
    if json_stdout {
        println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
    } else {
        for c in value["checks"].as_array().into_iter().flatten() {
            let mark = if c["pass"] == Value::Bool(true) { "PASS" } else { "FAIL" };
            println!("[{mark}] {}: {} (target {})", c["name"].as_str().unwrap_or("?"), c["measured_full"], c["target"].as_str().unwrap_or("?"));
        }
        println!("output: {}", display_path(&dir.path));
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

/// Smallest integers proportional to the pattern and their norm.
fn integer_pattern(mode: &Mode) -> (Vec<[i64; 3]>, i64) {
    let p = mode.pattern().components();
    let unit = p.iter().map(|x| x.abs()).filter(|x| *x > 1e-12).fold(f64::INFINITY, f64::min);
    let atoms: Vec<[i64; 3]> = (0..N_LIGANDS)
        .map(|i| std::array::from_fn(|k| (p[3 * i + k] / unit).round() as i64))
        .collect();
    let norm2 = atoms.iter().flatten().map(|x| x * x).sum();
    (atoms, norm2)
}

pub fn modes(json_out: bool) -> Outcome {
    let geom = MoleculeGeometry::new(1.0)?;
    let group = generate_oh(&geom);
    let mut rows = Vec::new();
    for (k, mode) in modes3().iter().enumerate() {
        let stab = stabilizer(mode.pattern(), &group, default_stabilizer_tolerance(mode.pattern()))?;
        let domains = dynamical_domains(mode, &group);
        let axes: Vec<String> = domains
            .iter()
            .map(|d| {
                let s = stabilizer(d.pattern(), &group, default_stabilizer_tolerance(d.pattern())).unwrap_or_default();
                let ax = fourfold_axes(&s);
                if ax.len() == 1 { ax[0].to_string() } else { "-".into() }
            })
            .collect();
        let (atoms, norm2) = integer_pattern(mode);
        rows.push(json!({
            "name": format!("phi{}", k + 1),
            "label": mode.label().to_string(),
            "irrep": mode.irrep().name(),
            "optics": mode.irrep().optics_name(),
            "stabilizer_order": stab.len(),
            "domain_count": domains.len(),
            "domain_axes": axes,
            "normalization": format!("1/sqrt({norm2})"),
            "integer_pattern": atoms,
            "pattern": mode.pattern().components().to_vec(),
        }));
    }
    if json_out {
        println!("{}", serde_json::to_string_pretty(&rows).expect("serializable"));
        return Ok(());
    }
    let mut out = String::new();
    writeln!(out, "{:<6} {:<6} {:<5} {:<6} {:>5} {:>8}  pattern (atoms 1..6)", "mode", "group", "irrep", "optics", "|G_f|", "domains").unwrap();
    for r in &rows {
        let atoms: Vec<String> = r["integer_pattern"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| {
                let v: Vec<String> = a.as_array().unwrap().iter().map(|x| format!("{:>2}", x)).collect();
                format!("({})", v.join(","))
            })
            .collect();
        writeln!(
            out,
            "{:<6} {:<6} {:<5} {:<6} {:>5} {:>8}  {} x [{}]",
            r["name"].as_str().unwrap(),
            r["label"].as_str().unwrap(),
            r["irrep"].as_str().unwrap(),
            r["optics"].as_str().unwrap(),
            r["stabilizer_order"].as_u64().unwrap(),
            r["domain_count"].as_u64().unwrap(),
            r["normalization"].as_str().unwrap(),
            atoms.join(" ")
        )
        .unwrap();
    }
    print!("{out}");
    Ok(())
}

/// Standard bush generated by the excited mode of highest index.
fn bush_for(amplitudes: &[f64; 3]) -> Vec<Mode> {
    let top = (0..3).rev().find(|k| amplitudes[*k] != 0.0);
    let all = modes3();
    match top {
        Some(k) => all[..=k].to_vec(),
        None => Vec::new(),
    }
}

fn schedule(config: &RunConfig, dt: f64) -> Schedule {
    let s = Schedule::new(dt, config.integrator.steps);
    match config.integrator.stride {
        Some(k) => s.with_stride(k),
        None => s,
    }
}

fn record_abort<S>(summary: &mut Summary, traj: &Trajectory<S>) {
    summary.flag("aborted", traj.abort.is_some());
    summary.serialized("abort", &traj.abort);
    summary.value("samples", json!(traj.samples.len()));
    summary.num("relative_energy_drift", traj.relative_energy_drift());
}

pub fn simulate(config: &RunConfig, json_out: bool) -> Outcome {
    let model = config.build_model()?;
    let x0 = config.amplitudes();
    let dir = RunDir::create(config)?;
    let mut summary = Summary::new("simulate");
    match &model {
        Model::Cluster(cluster) => {
            let dt = match config.integrator.dt {
                Some(dt) => dt,
                None => 2.0 * PI / cluster.breathing_omega()? / 2000.0,
            };
            let sched = schedule(config, dt);
            let init = bush_initial_condition(&modes3(), &x0)?;
            let traj = integrate_full(cluster, &init, sched)?;
            let basis = standard_basis();
            dir.write_with("trajectory.csv", |w| write_full_csv(&traj, &basis, w))?;
            let series = mode_series(&traj, &basis);
            dir.write_with("modes.csv", |w| series.write_csv(w))?;
            summary.text("integrator", traj.meta.integrator).num("dt", dt);
            record_abort(&mut summary, &traj);
            for k in 0..3 {
                summary.num(&format!("max_abs_phi{}", k + 1), series.max_abs(k));
            }
            let bush = bush_for(&x0);
            if bush.is_empty() {
                summary.text("closure", "no mode excited");
            } else {
                let names: Vec<String> = (1..=bush.len()).map(|k| format!("phi{k}")).collect();
                summary.serialized("bush", &names);
                let r = closure_residual(&traj, &bush)?;
                summary.num("closure_residual", r);
                summary.check(
                    "closure residual",
                    r,
                    &format!("< {:e}", config.analysis.closure_threshold),
                    r < config.analysis.closure_threshold,
                );
            }
        }
        Model::Reduced(rhs) => {
            let dt = config.integrator.dt.unwrap_or(0.01);
            let traj = integrate_reduced(rhs, &ReducedState::at_rest(x0), schedule(config, dt))?;
            dir.write_with("trajectory.csv", |w| write_reduced_csv(&traj, w))?;
            summary.text("integrator", traj.meta.integrator).num("dt", dt);
            record_abort(&mut summary, &traj);
            let scale = x0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut zero = Vec::new();
            let mut excited = Vec::new();
            for k in 0..rhs.variable_count() {
                let name = VARIABLE_NAMES[k];
                let m = traj.max_abs(k);
                summary.num(&format!("max_abs_{name}"), m);
                if traj.samples.iter().all(|s| s.state.amplitudes[k] == 0.0) {
                    zero.push(name);
                }
                if x0[k] == 0.0 && m > config.analysis.excitation_threshold * scale {
                    excited.push(name);
                }
            }
            summary.serialized("identically_zero", &zero);
            summary.serialized("secondary_excited", &excited);
        }
    }
    finish(&dir, summary, json_out)
}

fn source_pes(model: &Model) -> Option<&PolynomialPes> {
    match model {
        Model::Reduced(rhs) => Some(rhs.pes()),
        Model::Cluster(_) => None,
    }
}

pub fn fit(config: &RunConfig, json_out: bool) -> Outcome {
    let model = config.build_model()?;
    let nv = config.fit.vars.len();
    let full = MonomialBasis::full(nv, config.fit.degree)?;
    let allowed = full.restricted_to(&if nv == 2 { allowed_monomials_d4h() } else { allowed_monomials_c4v() });
    let modes = modes3();
    let grid = match (&model, config.fit.half_width, config.fit.count) {
        (Model::Cluster(c), None, None) => AmplitudeGrid::cluster_audit(nv, c.geometry().center_vertex_distance())?,
        (Model::Reduced(_), None, None) if nv == 2 => AmplitudeGrid::default_ab(),
        (Model::Reduced(_), None, None) => AmplitudeGrid::default_abc(),
        (_, h, n) => {
            let default = if nv == 2 { AmplitudeGrid::default_ab() } else { AmplitudeGrid::default_abc() };
            let axis = default.axes()[0];
            AmplitudeGrid::cube(nv, h.unwrap_or(axis.hi), n.unwrap_or(axis.count))?
        }
    };
    let samples: SampleSet = match &model {
        Model::Cluster(c) => sample_energies(cluster_energy_fn(c, &modes[..nv]), &grid)?,
        Model::Reduced(rhs) => sample_energies(|x| Ok(rhs.pes().evaluate(x)), &grid)?,
    };
    let dir = RunDir::create(config)?;
    dir.write_with("samples.csv", |w| samples.write_csv(w))?;
    let audit = forbidden_term_audit(&samples, &full, &allowed)?;
    let restricted = fit_polynomial(&samples, &allowed)?;
    dir.write_json(
        "fit.json",
        &json!({
            "grid": grid,
            "full": audit.report,
            "allowed": restricted,
            "forbidden_max": audit.forbidden_max,
            "allowed_max": audit.allowed_max,
            "worst_forbidden": audit.worst_forbidden,
        }),
    )?;
    let mut summary = Summary::new("fit");
    summary
        .text("vars", config.fit.vars.clone())
        .value("degree", json!(config.fit.degree))
        .value("sample_count", json!(samples.len()))
        .value("missing", json!(samples.missing))
        .num("residual_rms", audit.report.residual_rms)
        .num("allowed_residual_rms", restricted.residual_rms)
        .num("condition_number", audit.report.condition_number)
        .num("forbidden_max", audit.forbidden_max)
        .num("forbidden_relative", audit.relative());
    let coefficients: serde_json::Map<String, Value> = restricted
        .terms
        .iter()
        .map(|t| (t.name.clone(), json!({"value": crate::run::round6(t.value), "value_full": t.value, "std_error": t.std_error})))
        .collect();
    summary.value("coefficients", Value::Object(coefficients));
    match source_pes(&model) {
        Some(pes) => {
            let truth = PolynomialPes::new(
                pes.terms().iter().filter(|(e, _)| e[nv..].iter().all(|x| *x == 0)).map(|(e, c)| (*e, *c)),
            )?;
            summary.check("forbidden max", audit.forbidden_max, "< 1e-10", audit.forbidden_max < 1e-10);
            if truth.terms().keys().all(|e| full.contains(e)) {
                let err = compare_pes(&audit.report.pes, &truth).iter().fold(0.0f64, |m, d| m.max(d.delta.abs()));
                summary.check("max coefficient recovery error", err, "< 1e-10", err < 1e-10);
            }
        }
        None => {
            let rel = audit.relative();
            summary.check("forbidden max relative", rel, "< 1e-6", rel < 1e-6);
        }
    }
    if let Some(cmp) = config.fit.compare {
        let table = compare_pes(&restricted.pes, &cmp.reference());
        dir.write_with("comparison.csv", |w| {
            writeln!(w, "term,fitted,reference,delta")?;
            for t in &table {
                writeln!(w, "{},{:.16e},{:.16e},{:.16e}", t.name, t.fitted, t.reference, t.delta)?;
            }
            Ok(())
        })?;
        summary.serialized("comparison", &table);
        if !json_out {
            println!("{:<10} {:>14} {:>14} {:>14}", "term", "fitted", "reference", "delta");
            for t in &table {
                println!("{:<10} {:>14.6e} {:>14.6e} {:>14.6e}", t.name, t.fitted, t.reference, t.delta);
            }
        }
    }
    finish(&dir, summary, json_out)
}

fn sweep_amplitudes(config: &RunConfig, default: Vec<f64>) -> Vec<f64> {
    match &config.sweep.range {
        Some(r) => parse_range(r).expect("validated"),
        None => default,
    }
}

pub fn sweep_nu(config: &RunConfig, json_out: bool) -> Outcome {
    let model = config.build_model()?;
    let variable = variable_index(&config.sweep.mode).expect("validated");
    let amplitudes = sweep_amplitudes(config, nu_sweep_amplitudes());
    let modes = modes3();
    let system = match &model {
        Model::Reduced(rhs) => {
            if variable >= rhs.variable_count() {
                return Err(ConfigError::new("sweep.mode", format!("model has {} variables", rhs.variable_count())).into());
            }
            SweepSystem::Reduced { rhs, variable, dt: config.sweep.dt, periods: config.sweep.periods }
        }
        Model::Cluster(cluster) => SweepSystem::Full {
            model: cluster,
            mode: modes[variable].clone(),
            steps_per_period: config.sweep.steps_per_period,
            periods: config.sweep.periods,
        },
    };
    let harmonic = system.harmonic_frequency()?;
    let points: Vec<NuPoint> = pool(config.workers)?.install(|| {
        amplitudes
            .par_iter()
            .map(|a| {
                system.point(*a).unwrap_or_else(|e| NuPoint {
                    initial: *a,
                    amplitude: f64::NAN,
                    estimate: None,
                    failure: Some(e.to_string()),
                })
            })
            .collect()
    });
    let curve = NuOfACurve { points, harmonic_frequency: harmonic };
    let dir = RunDir::create(config)?;
    let meta = [
        ("model", format!("{:?}", config.model)),
        ("mode", config.sweep.mode.clone()),
        ("periods", format!("{}", config.sweep.periods)),
        ("harmonic_frequency", format!("{harmonic:.16e}")),
    ];
    dir.write_with("nu_of_a.csv", |w| curve.write_csv(w, &meta))?;
    let failures = curve.points.iter().filter(|p| p.failure.is_some()).count();
    let mut summary = Summary::new("sweep nu");
    summary
        .text("mode", config.sweep.mode.clone())
        .num("harmonic_frequency", harmonic)
        .flag("soft_nonlinearity", curve.strictly_decreasing())
        .value("failed_points", json!(failures));
    let (c0, c2) = curve.quadratic_fit().map_or((None, None), |(a, b)| (Some(a), Some(b)));
    summary.opt_num("fit_intercept", c0).opt_num("fit_slope_a2", c2);
    summary.check("failed points", failures as f64, "0", failures == 0);
    if let Some(p) = curve.points.first() {
        let nu = p.estimate.map_or(f64::NAN, |e| e.frequency);
        let rel = (nu - harmonic).abs() / harmonic;
        summary.num("smallest_amplitude_frequency", nu);
        summary.check("harmonic limit relative error", rel, "< 0.01", rel < 0.01);
    }
    finish(&dir, summary, json_out)
}

/// Points from the smallest amplitudes used for the small-μ exponent.
const SMALL_MU_POINTS: usize = 3;

pub fn sweep_transfer(config: &RunConfig, json_out: bool, mode_given: bool) -> Outcome {
    let Model::Reduced(rhs) = config.build_model()? else {
        return Err(ConfigError::new("model", "transfer sweeps need a polynomial model").into());
    };
    let mut setup = TransferSetup { dt: config.sweep.dt, periods: config.sweep.periods, ..TransferSetup::default() };
    if mode_given {
        setup.root = variable_index(&config.sweep.mode).expect("validated");
        setup.secondary = usize::from(setup.root == 0);
    }
    if setup.root.max(setup.secondary) >= rhs.variable_count() {
        return Err(ConfigError::new("sweep.mode", format!("model has {} variables", rhs.variable_count())).into());
    }
    let amplitudes = sweep_amplitudes(config, transfer_sweep_amplitudes());
    let results: Vec<Result<TransferPoint, String>> = pool(config.workers)?
        .install(|| amplitudes.par_iter().map(|mu| setup.point(&rhs, *mu).map_err(|e| e.to_string())).collect());
    let errors: Vec<String> = results.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
    let curve = TransferCurve { points: results.into_iter().filter_map(Result::ok).collect() };
    let dir = RunDir::create(config)?;
    let meta = [
        ("model", format!("{:?}", config.model)),
        ("root", VARIABLE_NAMES[setup.root].to_string()),
        ("secondary", VARIABLE_NAMES[setup.secondary].to_string()),
        ("periods", format!("{}", setup.periods)),
        ("dt", format!("{}", setup.dt)),
    ];
    dir.write_with("transfer.csv", |w| curve.write_csv(w, &meta))?;
    let blow_ups = curve.points.iter().filter(|p| p.blow_up).count();
    let small: Vec<(f64, f64)> = curve
        .stable()
        .filter(|p| p.mu > 0.0 && p.secondary_max > 0.0)
        .take(SMALL_MU_POINTS)
        .map(|p| (p.mu, p.secondary_max))
        .collect();
    let small_exponent = octabush::analysis::scaling_exponent(&small);
    let mut summary = Summary::new("sweep transfer");
    summary
        .text("root", VARIABLE_NAMES[setup.root])
        .text("secondary", VARIABLE_NAMES[setup.secondary])
        .value("blow_ups", json!(blow_ups))
        .serialized("errors", &errors)
        .opt_num("largest_stable_ratio", curve.largest_stable_ratio())
        .opt_num("scaling_exponent", curve.scaling_exponent())
        .opt_num("small_mu_exponent", small_exponent);
    summary.check("failed points", errors.len() as f64, "0", errors.is_empty());
    if let Some(e) = small_exponent {
        summary.check("small-mu exponent", e, "2 ± 0.1", (e - 2.0).abs() <= 0.1);
    }
    finish(&dir, summary, json_out)
}

/// Parses `i,j,k:delta` into a coefficient perturbation.
pub fn parse_perturbation(s: &str) -> Result<(Exponents, f64), ConfigError> {
    let bad = || ConfigError::new("--perturb", format!("expected i,j,k:delta, got `{s}`"));
    let (e, d) = s.split_once(':').ok_or_else(bad)?;
    let e: Vec<u32> = e.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let e: Exponents = e.try_into().map_err(|_| bad())?;
    let d: f64 = d.trim().parse().map_err(|_| bad())?;
    Ok((e, d))
}

pub fn check(
    config: &RunConfig,
    json_out: bool,
    criteria: &[u8],
    perturb: Option<(Exponents, f64)>,
) -> Outcome {
    let mut opts = AcceptanceOptions { seed: config.seed, ..AcceptanceOptions::default() };
    if let Some((e, d)) = perturb {
        opts.d4h = reference_d4h().perturbed(e, d)?;
    }
    for id in criteria {
        if !(1..=11).contains(id) {
            return Err(ConfigError::new("--criteria", format!("unknown criterion {id}")).into());
        }
    }
    let dir = RunDir::create(config)?;
    let results: Vec<CriterionResult> = pool(config.workers)?.install(|| {
        criteria
            .par_iter()
            .map(|id| acceptance::run_one(*id, &opts).expect("validated id"))
            .collect()
    });
    let pass = results.iter().all(|c| c.pass);
    let report = json!({ "criteria": results, "pass": pass });
    dir.write_json("summary.json", &report)?;
    if json_out {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        for c in &results {
            println!("{c}");
        }
        println!("output: {}", display_path(&dir.path));
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}
