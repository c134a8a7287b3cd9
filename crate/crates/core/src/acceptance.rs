//! End-to-end acceptance criteria. Each criterion returns its individual
//! measurements with targets and tolerances; nothing here panics on a
//! failed check.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    closure_residual, harmonic_frequencies, lindstedt_shift, nu_of_a_sweep, transfer_curve, SweepSystem,
    TransferSetup, FLUORINE_MASS,
};
use crate::dynamics::{bush_initial_condition, integrate_full, integrate_reduced, ReducedState, Schedule};
use crate::fitting::{
    allowed_monomials_d4h, cluster_energy_fn, fit_polynomial, forbidden_term_audit, sample_energies, AmplitudeGrid,
    MonomialBasis,
};
use crate::potentials::{
    compare_equations, reduced_equations, reference_c4v, reference_c4v_equations, reference_d4h,
    reference_d4h_equations, ClusterModel, EquationTable, PairPotential, PolynomialPes, ReducedRhs, VARIABLE_NAMES,
};
use crate::symmetry::{
    apply_symmetry, dynamical_domains, fourfold_axes, generate_oh, is_closed_under_composition, standard_basis,
    standard_modes, stabilizer, Axis, DisplacementField, Irrep, Mode, MoleculeGeometry, SymmetryLabel, N_DOF,
};
use crate::{Error, Result};

/// Printed-coefficient agreement, set by the four-decimal rounding.
pub const PRINTED_TOLERANCE: f64 = 5e-4;

/// Inputs that the criteria read, so defects can be planted.
#[derive(Clone, Debug)]
pub struct AcceptanceOptions {
    pub d4h: PolynomialPes,
    pub c4v: PolynomialPes,
    pub seed: u64,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self {
            d4h: reference_d4h(),
            c4v: reference_c4v(),
            seed: 20_260_101,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: String,
    pub tolerance: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, target: impl Into<String>, tolerance: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            measured,
            target: target.into(),
            tolerance: tolerance.into(),
            pass: pass && !measured.is_nan(),
        }
    }

    fn below(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self::new(name, measured, "0", format!("< {limit:e}"), measured < limit)
    }

    fn near(name: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Self::new(name, measured, format!("{target}"), format!("± {tol:e}"), (measured - target).abs() <= tol)
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self::new(name, f64::NAN, "evaluation succeeds", err.to_string(), false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Measurements reported alongside the gated checks.
    pub notes: Vec<String>,
    pub pass: bool,
}

impl CriterionResult {
    fn new(id: u8, title: &'static str, checks: Vec<Check>, notes: Vec<String>) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self {
            id,
            title,
            checks,
            notes,
            pass,
        }
    }

    fn from_result(id: u8, title: &'static str, r: Result<(Vec<Check>, Vec<String>)>) -> Self {
        match r {
            Ok((checks, notes)) => Self::new(id, title, checks, notes),
            Err(e) => Self::new(id, title, vec![Check::failed(title, &e)], Vec::new()),
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let passed = self.checks.iter().filter(|c| c.pass).count();
        write!(
            f,
            "[{}] criterion {:>2}: {} ({}/{} checks)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            passed,
            self.checks.len()
        )?;
        if let Some(c) = self.failures().next() {
            write!(f, "; first failure {}: measured {:e}, target {} {}", c.name, c.measured, c.target, c.tolerance)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceptanceReport {
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
}

pub fn run_all(opts: &AcceptanceOptions) -> AcceptanceReport {
    let criteria = vec![
        criterion_1(opts),
        criterion_2(opts),
        criterion_3(opts),
        criterion_4(opts),
        criterion_5(opts),
        criterion_6(opts),
        criterion_7(opts),
        criterion_8(opts),
        criterion_9(opts),
        criterion_10(opts),
        criterion_11(opts),
    ];
    let pass = criteria.iter().all(|c| c.pass);
    AcceptanceReport { criteria, pass }
}

pub fn run_one(id: u8, opts: &AcceptanceOptions) -> Option<CriterionResult> {
    Some(match id {
        1 => criterion_1(opts),
        2 => criterion_2(opts),
        3 => criterion_3(opts),
        4 => criterion_4(opts),
        5 => criterion_5(opts),
        6 => criterion_6(opts),
        7 => criterion_7(opts),
        8 => criterion_8(opts),
        9 => criterion_9(opts),
        10 => criterion_10(opts),
        11 => criterion_11(opts),
        _ => return None,
    })
}

fn unit_rhs(pes: &PolynomialPes) -> Result<ReducedRhs> {
    reduced_equations(pes, [1.0; 3])
}

fn equation_checks(pes: &PolynomialPes, printed: &[EquationTable]) -> Result<(Vec<Check>, Vec<String>)> {
    let derived = unit_rhs(pes)?.equation_tables();
    let checks = compare_equations(&derived, printed)
        .into_iter()
        .map(|d| {
            Check::new(
                format!("{}-equation {}", VARIABLE_NAMES[d.variable], d.term_name()),
                d.derived,
                format!("{}", d.printed),
                format!("± {PRINTED_TOLERANCE:e}"),
                d.abs_error() <= PRINTED_TOLERANCE,
            )
        })
        .collect();
    Ok((checks, Vec::new()))
}

/// Governing equations of the D_4h bush follow from its potential.
pub fn criterion_1(opts: &AcceptanceOptions) -> CriterionResult {
    CriterionResult::from_result(
        1,
        "D4h equations are minus the gradient of the D4h potential",
        equation_checks(&opts.d4h, &reference_d4h_equations()),
    )
}

/// Governing equations of the C_4v bush follow from its potential.
pub fn criterion_2(opts: &AcceptanceOptions) -> CriterionResult {
    CriterionResult::from_result(
        2,
        "C4v equations are minus the gradient of the C4v potential",
        equation_checks(&opts.c4v, &reference_c4v_equations()),
    )
}

/// Breathing to tetragonal harmonic frequency ratio.
pub fn criterion_3(opts: &AcceptanceOptions) -> CriterionResult {
    let r = (|| {
        let h = harmonic_frequencies(&opts.d4h, 1.0)?;
        let ratio = h[0].omega / h[1].omega;
        let heavy = harmonic_frequencies(&opts.d4h, FLUORINE_MASS)?;
        Ok((
            vec![
                Check::near("omega_a / omega_b", ratio, 1.2, 0.01),
                Check::near("omega_a / omega_b arithmetic", ratio, 1.1984, 1e-4),
                Check::below("mass independence", (heavy[0].omega / heavy[1].omega - ratio).abs(), 1e-12),
            ],
            Vec::new(),
        ))
    })();
    CriterionResult::from_result(3, "breathing/tetragonal frequency ratio", r)
}

/// Harmonic breathing wavenumber at the fluorine mass.
pub fn criterion_4(opts: &AcceptanceOptions) -> CriterionResult {
    let r = (|| {
        let h = harmonic_frequencies(&opts.d4h, FLUORINE_MASS)?;
        let w = h[0].wavenumber;
        let c = harmonic_frequencies(&opts.c4v, FLUORINE_MASS)?;
        Ok((
            vec![
                Check::near("breathing wavenumber", w, 732.2, 0.1),
                Check::new(
                    "relative distance to 710 cm^-1",
                    (w - 710.0).abs() / 710.0,
                    "710",
                    "< 5%",
                    (w - 710.0).abs() / 710.0 < 0.05,
                ),
            ],
            vec![format!(
                "c-mode harmonic wavenumber {:.1} cm^-1 (the quoted rough estimate is 530 cm^-1; not gated)",
                c[2].wavenumber
            )],
        ))
    })();
    CriterionResult::from_result(4, "harmonic breathing wavenumber", r)
}

/// Closure amplitude as a fraction of the equilibrium distance.
pub const CLOSURE_AMPLITUDE: f64 = 0.05;
/// Closure run length in periods of the slowest bush mode.
pub const CLOSURE_PERIODS: f64 = 10.0;

fn closure_potentials() -> Vec<(&'static str, PairPotential)> {
    vec![
        ("LJ(1,1)", PairPotential::lennard_jones(1.0, 1.0).expect("valid")),
        ("Morse(1,3,1)", PairPotential::morse(1.0, 3.0, 1.0).expect("valid")),
    ]
}

/// Residual of the bush spanned by `bush` when the cluster is released
/// from `CLOSURE_AMPLITUDE · d* · root`.
pub fn closure_run(model: &ClusterModel, root: &Mode, bush: &[Mode]) -> Result<f64> {
    let d = model.geometry().center_vertex_distance();
    let t0 = 2.0 * PI / model.breathing_omega()?;
    let slowest = bush
        .iter()
        .map(|m| model.mode_omega(m))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let dt = t0 / 2000.0;
    let steps = (CLOSURE_PERIODS * 2.0 * PI / slowest / dt).ceil() as usize;
    let init = bush_initial_condition(std::slice::from_ref(root), &[CLOSURE_AMPLITUDE * d])?;
    let traj = integrate_full(model, &init, Schedule::new(dt, steps))?;
    if let Some(a) = traj.abort {
        return Err(Error::Search(format!("closure run aborted at step {}", a.step())));
    }
    closure_residual(&traj, bush)
}

/// Uniform displacement of every ligand along z.
pub fn ligand_shift_mode() -> Mode {
    Mode::new(DisplacementField::from_atoms([[0.0, 0.0, 1.0]; 6]), SymmetryLabel::C4v, Irrep::Gamma10)
        .expect("nonzero pattern")
}

/// Bushes of the three root modes stay closed in the full cluster.
pub fn criterion_5(_opts: &AcceptanceOptions) -> CriterionResult {
    let (p1, p2, p3) = standard_modes();
    let cases = [
        ("phi1", p1.clone(), vec![p1.clone()]),
        ("phi2", p2.clone(), vec![p1.clone(), p2.clone()]),
        ("phi3", p3.clone(), vec![p1.clone(), p2.clone(), p3.clone()]),
    ];
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for (label, pot) in closure_potentials() {
        let model = match ClusterModel::at_equilibrium(pot, true) {
            Ok(m) => m,
            Err(e) => {
                checks.push(Check::failed(label, &e));
                continue;
            }
        };
        for (name, root, bush) in &cases {
            let what = format!("{label} {name} residual");
            checks.push(match closure_run(&model, root, bush) {
                Ok(r) => Check::below(what, r, 1e-8),
                Err(e) => Check::failed(what, &e),
            });
        }
        let mut four = cases[2].2.clone();
        four.push(ligand_shift_mode());
        if let Ok(r) = closure_run(&model, &p3, &four) {
            notes.push(format!("{label} phi3 residual with the uniform ligand z-shift added to the bush: {r:.3e}"));
        }
        if let Ok(free) = ClusterModel::at_equilibrium(pot, false) {
            for (name, root, bush) in &cases {
                if let Ok(r) = closure_run(&free, root, bush) {
                    notes.push(format!("{label} without center forces, {name} residual: {r:.3e}"));
                }
            }
        }
    }
    CriterionResult::new(5, "bush closure in the full cluster", checks, notes)
}

fn run_reduced(rhs: &ReducedRhs, x0: [f64; 3], steps: usize) -> Result<crate::dynamics::Trajectory<ReducedState>> {
    integrate_reduced(rhs, &ReducedState::at_rest(x0), Schedule::new(0.01, steps).with_stride(1))
}

/// Root and secondary modes couple one way only.
pub fn criterion_6(opts: &AcceptanceOptions) -> CriterionResult {
    let r = (|| {
        let rhs = unit_rhs(&opts.d4h)?;
        let a_only = run_reduced(&rhs, [0.2, 0.0, 0.0], 100_000)?;
        let b_max = a_only.max_abs(1);
        let omega_b = harmonic_frequencies(&opts.d4h, 1.0)?[1].omega;
        let one_period = (2.0 * PI / omega_b / 0.01).ceil() as usize;
        let b_only = run_reduced(&rhs, [0.0, 0.3, 0.0], one_period)?;
        let a_max = b_only.max_abs(0);
        let small = transfer_curve(&rhs, &[0.01, 0.02, 0.04], &TransferSetup::default())?;
        let exponent = small.scaling_exponent().unwrap_or(f64::NAN);
        Ok((
            vec![
                Check::new(
                    "max|b| after 1e5 steps from a only",
                    b_max,
                    "0",
                    "exact",
                    b_max == 0.0 && a_only.is_complete(),
                ),
                Check::new("max|a| within one period from b = 0.3", a_max, "> 0", "strict", a_max > 0.0),
                Check::near("small-mu exponent of max|a|", exponent, 2.0, 0.1),
            ],
            Vec::new(),
        ))
    })();
    CriterionResult::from_result(6, "root/secondary selection-rule asymmetry", r)
}

/// Root amplitudes of the transfer sweep.
pub fn transfer_sweep_amplitudes() -> Vec<f64> {
    linspace(0.05, 0.35, 7)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| (lo * (n - 1 - k) as f64 + hi * k as f64) / (n - 1) as f64)
        .collect()
}

/// Secondary mode reaches a sizeable fraction of the root.
pub fn criterion_7(opts: &AcceptanceOptions) -> CriterionResult {
    let r = (|| {
        let rhs = unit_rhs(&opts.d4h)?;
        let curve = transfer_curve(&rhs, &transfer_sweep_amplitudes(), &TransferSetup::default())?;
        let ratio = curve.largest_stable_ratio().unwrap_or(f64::NAN);
        let blow_ups = curve.points.iter().filter(|p| p.blow_up).count();
        Ok((
            vec![Check::new(
                "max|a| / max|b| at the largest stable mu",
                ratio,
                "0.3",
                "[0.15, 0.45]",
                (0.15..=0.45).contains(&ratio),
            )],
            vec![format!("{blow_ups} of {} sweep points blew up", curve.points.len())],
        ))
    })();
    CriterionResult::from_result(7, "secondary-mode magnitude", r)
}

/// Amplitudes of the breathing frequency sweep.
pub fn nu_sweep_amplitudes() -> Vec<f64> {
    linspace(0.05, 0.4, 15)
}

/// The reduced breathing oscillation softens with amplitude.
pub fn criterion_8(opts: &AcceptanceOptions) -> CriterionResult {
    let r = (|| {
        let rhs = unit_rhs(&opts.d4h)?;
        let sys = SweepSystem::Reduced {
            rhs: &rhs,
            variable: 0,
            dt: 0.01,
            periods: 20.0,
        };
        let curve = nu_of_a_sweep(&sys, &nu_sweep_amplitudes())?;
        let gamma2 = opts.d4h.coefficient(&[2, 0, 0]);
        let w2 = 2.0 * gamma2;
        let kappa = lindstedt_shift(w2, 3.0 * opts.d4h.coefficient(&[3, 0, 0]), 4.0 * opts.d4h.coefficient(&[4, 0, 0]));
        let (_, fit_kappa) = curve.quadratic_fit().unwrap_or((f64::NAN, f64::NAN));
        let limit = sys.point(0.001)?;
        let nu_h = 0.38538f64.sqrt() / (2.0 * PI);
        let nu0 = limit.estimate.map_or(f64::NAN, |e| e.frequency);
        let consistent = curve.points.iter().all(|p| p.estimate.is_some_and(|e| e.consistent()));
        let drops = curve.values().windows(2).filter(|w| w[1].1 >= w[0].1).count();
        Ok((
            vec![
                Check::new("non-decreasing steps in nu(A)", drops as f64, "0", "exact", curve.strictly_decreasing()),
                Check::new(
                    "fitted d nu / d A^2",
                    fit_kappa,
                    format!("sign of {:.4}/(2 pi)", kappa),
                    "same sign",
                    fit_kappa.signum() == kappa.signum() && kappa < 0.0,
                ),
                Check::new(
                    "relative offset of nu(0.001) from sqrt(0.38538)/(2 pi)",
                    (nu0 / nu_h - 1.0).abs(),
                    "0",
                    "< 1%",
                    (nu0 / nu_h - 1.0).abs() < 0.01,
                ),
                Check::new("zero-crossing and spectral estimates agree", consistent as u8 as f64, "1", "within one bin", consistent),
            ],
            vec![format!(
                "perturbative d omega / d A^2 = {kappa:.5}, fitted d omega / d A^2 = {:.5}",
                2.0 * PI * fit_kappa
            )],
        ))
    })();
    CriterionResult::from_result(8, "soft breathing nonlinearity", r)
}

fn random_pes(rng: &mut ChaCha8Rng, basis: &MonomialBasis) -> Result<PolynomialPes> {
    PolynomialPes::new(basis.exponents().iter().map(|e| (*e, rng.gen_range(-1.0..1.0))))
}

/// Exact polynomial data is recovered; exact cluster data has no forbidden
/// terms.
pub fn criterion_9(opts: &AcceptanceOptions) -> CriterionResult {
    let r = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut checks = Vec::new();
        let cases = [
            ("d4h potential", opts.d4h.clone(), MonomialBasis::from_pes(2, &opts.d4h)?, AmplitudeGrid::default_ab()),
            ("c4v potential", opts.c4v.clone(), MonomialBasis::from_pes(3, &opts.c4v)?, AmplitudeGrid::default_abc()),
            {
                let basis = MonomialBasis::full(3, 4)?;
                ("random full quartic", random_pes(&mut rng, &basis)?, basis, AmplitudeGrid::default_abc())
            },
        ];
        for (name, pes, basis, grid) in cases {
            let samples = sample_energies(|x| Ok(pes.evaluate(x)), &grid)?;
            let fit = fit_polynomial(&samples, &basis)?;
            let err = pes
                .terms()
                .iter()
                .map(|(e, c)| (fit.coefficient(e) - c).abs())
                .fold(0.0, f64::max);
            checks.push(Check::below(format!("{name} max coefficient error"), err, 1e-10));
        }

        let mut notes = Vec::new();
        let (p1, p2, _) = standard_modes();
        let modes = [p1, p2];
        let full = MonomialBasis::full(2, 4)?;
        let allowed = allowed_monomials_d4h();
        for (label, pot) in closure_potentials() {
            let model = ClusterModel::at_equilibrium(pot, true)?;
            let d = model.geometry().center_vertex_distance();
            let energy = cluster_energy_fn(&model, &modes);
            let audit = forbidden_term_audit(&sample_energies(&energy, &AmplitudeGrid::cluster_audit(2, d)?)?, &full, &allowed)?;
            checks.push(Check::below(format!("{label} forbidden / allowed"), audit.relative(), 1e-6));
            let wide = forbidden_term_audit(&sample_energies(&energy, &AmplitudeGrid::default_ab())?, &full, &allowed)?;
            notes.push(format!(
                "{label} forbidden / allowed on the default 21x21 grid over [-0.3, 0.3]: {:.3e} (degree-5+ truncation)",
                wide.relative()
            ));
        }
        Ok((checks, notes))
    })();
    CriterionResult::from_result(9, "fit roundtrip and forbidden-term audit", r)
}

fn random_field(rng: &mut ChaCha8Rng, scale: f64) -> DisplacementField {
    DisplacementField(std::array::from_fn(|_| rng.gen_range(-scale..scale)))
}

/// Largest relative deviation of analytic forces from central differences.
pub fn force_fd_error(model: &ClusterModel, field: &DisplacementField, h: f64) -> Result<f64> {
    let f = model.forces(field)?;
    let mut worst: f64 = 0.0;
    for k in 0..N_DOF {
        let mut plus = *field;
        let mut minus = *field;
        plus.0[k] += h;
        minus.0[k] -= h;
        let fd = -(model.energy_change(&plus)? - model.energy_change(&minus)?) / (2.0 * h);
        worst = worst.max((fd - f.0[k]).abs());
    }
    Ok(worst / f.max_abs().max(f64::MIN_POSITIVE))
}

/// Forces, integrator and basis behave as the numerics require.
pub fn criterion_10(opts: &AcceptanceOptions) -> CriterionResult {
    let r = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
        let mut checks = Vec::new();
        let mut notes = Vec::new();
        let (p1, p2, p3) = standard_modes();
        for (label, pot) in closure_potentials() {
            let model = ClusterModel::at_equilibrium(pot, true)?;
            let d = model.geometry().center_vertex_distance();
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                worst = worst.max(force_fd_error(&model, &random_field(&mut rng, 0.05 * d), 1e-6)?);
            }
            checks.push(Check::below(format!("{label} force vs central difference"), worst, 1e-6));

            let t0 = 2.0 * PI / model.breathing_omega()?;
            let init = bush_initial_condition(std::slice::from_ref(&p1), &[CLOSURE_AMPLITUDE * d])?;
            let traj = integrate_full(&model, &init, Schedule::new(t0 / 1000.0, 10_000))?;
            let drift = traj.relative_energy_drift();
            checks.push(Check::below(format!("{label} breathing energy drift"), drift, 1e-6));
            let e0 = traj.samples[0].energy;
            let e_eq = model.energy(&DisplacementField::zeros())?;
            notes.push(format!(
                "{label} drift relative to the vibrational energy: {:.3e}",
                drift * e0.abs() / (e0 - e_eq).abs()
            ));

            let mixed = bush_initial_condition(
                &[p1.clone(), p2.clone(), p3.clone()],
                &[0.02 * d, -0.03 * d, 0.04 * d],
            )?;
            let mut start = mixed;
            start.velocities = random_field(&mut rng, 0.01 * d / t0);
            let sched = Schedule::new(t0 / 1000.0, 10_000);
            let fwd = integrate_full(&model, &start, sched)?;
            let end = fwd.last().expect("samples").state.reversed();
            let back = integrate_full(&model, &end, sched)?;
            let ret = back.last().expect("samples").state;
            let err = (ret.displacements - start.displacements)
                .max_abs()
                .max((ret.velocities + start.velocities).max_abs() * t0 / (2.0 * PI));
            checks.push(Check::below(format!("{label} time-reversal return error"), err, 1e-8));
        }
        let basis = standard_basis();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let f = random_field(&mut rng, 1.0);
            worst = worst.max((basis.reconstruct(&basis.decompose(&f)) - f).max_abs());
        }
        checks.push(Check::below("decompose/reconstruct roundtrip", worst, 1e-10));
        Ok((checks, notes))
    })();
    CriterionResult::from_result(10, "numerical hygiene", r)
}

/// Octahedral group, mode stabilizers, domains and parities.
pub fn criterion_11(_opts: &AcceptanceOptions) -> CriterionResult {
    let r = (|| {
        let geom = MoleculeGeometry::new(1.0)?;
        let group = generate_oh(&geom);
        let (p1, p2, p3) = standard_modes();
        let mut checks = vec![
            Check::near("|O_h|", group.len() as f64, 48.0, 0.0),
            Check::new(
                "closed under composition",
                is_closed_under_composition(&group) as u8 as f64,
                "1",
                "exact",
                is_closed_under_composition(&group),
            ),
        ];
        for (name, m, order) in [("phi1", &p1, 48.0), ("phi2", &p2, 16.0), ("phi3", &p3, 8.0)] {
            let tol = 1e-8 * m.pattern().norm();
            checks.push(Check::near(format!("{name} stabilizer order"), stabilizer(m.pattern(), &group, tol)?.len() as f64, order, 0.0));
        }
        let domains = dynamical_domains(&p3, &group);
        checks.push(Check::near("phi3 dynamical domains", domains.len() as f64, 3.0, 0.0));
        let mut axes = Vec::new();
        for dm in &domains {
            let tol = 1e-8 * dm.pattern().norm();
            let stab = stabilizer(dm.pattern(), &group, tol)?;
            axes.extend(fourfold_axes(&stab));
        }
        let expected = [Axis::Z, Axis::X, Axis::Y];
        let ok = axes.len() == 3 && axes[0] == Axis::Z && expected.iter().all(|a| axes.contains(a));
        checks.push(Check::new(
            "domain axes",
            axes.len() as f64,
            "z, x, y",
            format!("found {}", axes.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")),
            ok,
        ));
        let inversion = group
            .iter()
            .find(|g| g.is_inversion())
            .ok_or_else(|| Error::Precondition("no inversion in the group".into()))?;
        for (name, m, parity) in [("phi1", &p1, 1.0), ("phi2", &p2, 1.0), ("phi3", &p3, -1.0)] {
            let image = apply_symmetry(inversion, m.pattern());
            let measured = image.dot(m.pattern()) / m.pattern().norm_squared();
            checks.push(Check::near(format!("{name} inversion parity"), measured, parity, 1e-12));
        }
        Ok((checks, Vec::new()))
    })();
    CriterionResult::from_result(11, "octahedral symmetry suite", r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_criteria_pass() {
        let opts = AcceptanceOptions::default();
        for id in [1, 2, 3, 4, 11] {
            let c = run_one(id, &opts).unwrap();
            assert!(c.pass, "{c}");
        }
        assert!(run_one(12, &opts).is_none());
    }

    #[test]
    fn planted_defect_fails_first_criterion() {
        let opts = AcceptanceOptions {
            d4h: reference_d4h().perturbed([1, 2, 0], 0.01).unwrap(),
            ..Default::default()
        };
        let c = criterion_1(&opts);
        assert!(!c.pass);
        assert!(c.to_string().starts_with("[FAIL] criterion  1"));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.05, 0.4, 15);
        assert_eq!(v.len(), 15);
        assert_eq!(v[0], 0.05);
        assert_eq!(v[14], 0.4);
    }
}
