//! Time integration. The full cluster runs under velocity Verlet; reduced
//! bush systems run under classic RK4.

use std::io::{self, Write};

use serde::Serialize;

use crate::potentials::{ClusterModel, ReducedRhs};
use crate::symmetry::{DisplacementField, Mode, ModeBasis, N_DOF, N_LIGANDS};
use crate::{Error, Result};

/// Any state component beyond this magnitude aborts a run.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

/// Runs longer than this record every tenth step by default.
pub const DENSE_SAMPLING_LIMIT: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FullState {
    pub displacements: DisplacementField,
    pub velocities: DisplacementField,
    pub time: f64,
}

impl FullState {
    pub fn at_rest(displacements: DisplacementField) -> Self {
        Self {
            displacements,
            velocities: DisplacementField::zeros(),
            time: 0.0,
        }
    }

    /// Same configuration with velocities negated.
    pub fn reversed(&self) -> Self {
        Self {
            velocities: -self.velocities,
            ..*self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.displacements.is_finite() && self.velocities.is_finite() && self.time.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedState {
    pub amplitudes: [f64; 3],
    pub velocities: [f64; 3],
    pub time: f64,
}

impl ReducedState {
    pub fn at_rest(amplitudes: [f64; 3]) -> Self {
        Self {
            amplitudes,
            velocities: [0.0; 3],
            time: 0.0,
        }
    }
}

/// Bush amplitudes `(a, b, c)` on `(φ1, φ2, φ3)` at `t = 0`, released from
/// rest unless velocities are given.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InitialExcitation {
    pub amplitudes: [f64; 3],
    pub velocities: [f64; 3],
}

impl InitialExcitation {
    pub fn at_rest(amplitudes: [f64; 3]) -> Self {
        Self {
            amplitudes,
            velocities: [0.0; 3],
        }
    }

    pub fn zero_velocity(&self) -> bool {
        self.velocities.iter().all(|v| *v == 0.0)
    }

    pub fn reduced_state(&self) -> ReducedState {
        ReducedState {
            amplitudes: self.amplitudes,
            velocities: self.velocities,
            time: 0.0,
        }
    }

    pub fn full_state(&self, modes: &[Mode; 3]) -> Result<FullState> {
        let mut state = bush_initial_condition(modes, &self.amplitudes)?;
        for (m, v) in modes.iter().zip(&self.velocities) {
            state.velocities.add_scaled(*v, m.pattern());
        }
        Ok(state)
    }
}

/// `Σ coefficient · mode` at rest.
pub fn bush_initial_condition(modes: &[Mode], coefficients: &[f64]) -> Result<FullState> {
    if modes.len() != coefficients.len() {
        return Err(Error::Precondition(format!(
            "{} modes but {} coefficients",
            modes.len(),
            coefficients.len()
        )));
    }
    if let Some(c) = coefficients.iter().find(|c| !c.is_finite()) {
        return Err(Error::Domain(format!("coefficient {c} is not finite")));
    }
    let mut x = DisplacementField::zeros();
    for (m, c) in modes.iter().zip(coefficients) {
        x.add_scaled(*c, m.pattern());
    }
    Ok(FullState::at_rest(x))
}

/// Step size, step count and recording stride.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
}

impl Schedule {
    pub fn new(dt: f64, steps: usize) -> Self {
        let stride = if steps <= DENSE_SAMPLING_LIMIT { 1 } else { 10 };
        Self { dt, steps, stride }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::Domain("steps must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Domain("stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Abort {
    Collision { step: usize, message: String },
    BlowUp { step: usize },
}

impl Abort {
    pub fn step(&self) -> usize {
        match self {
            Abort::Collision { step, .. } | Abort::BlowUp { step } => *step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample<S> {
    pub time: f64,
    pub state: S,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub model: String,
    pub integrator: &'static str,
    pub schedule: Schedule,
    pub initial_condition: String,
}

/// Uniformly strided samples of a run. A run that aborts keeps the samples
/// recorded before the failure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory<S> {
    pub samples: Vec<Sample<S>>,
    pub meta: TrajectoryMeta,
    pub abort: Option<Abort>,
}

impl<S> Trajectory<S> {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.abort.is_none()
    }

    pub fn last(&self) -> Option<&Sample<S>> {
        self.samples.last()
    }

    /// `max |E(t) - E(0)| / |E(0)|`
    pub fn relative_energy_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        let e0 = first.energy;
        let dev = self
            .samples
            .iter()
            .map(|s| (s.energy - e0).abs())
            .fold(0.0, f64::max);
        if e0 == 0.0 {
            dev
        } else {
            dev / e0.abs()
        }
    }
}

impl Trajectory<ReducedState> {
    pub fn series(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.amplitudes[k]).collect()
    }

    pub fn max_abs(&self, k: usize) -> f64 {
        self.samples
            .iter()
            .map(|s| s.state.amplitudes[k].abs())
            .fold(0.0, f64::max)
    }
}

fn model_description(model: &ClusterModel) -> String {
    format!(
        "{:?}, d0 = {}, center {}",
        model.potential(),
        model.geometry().center_vertex_distance(),
        if model.include_center() { "on" } else { "off" }
    )
}

/// Velocity Verlet on the 18 ligand coordinates. Total energy is kinetic
/// plus cluster pair energy.
pub fn integrate_full(
    model: &ClusterModel,
    init: &FullState,
    schedule: Schedule,
) -> Result<Trajectory<FullState>> {
    schedule.validate()?;
    if !init.is_finite() {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    let masses = model.masses();
    let kinetic = |v: &DisplacementField| -> f64 {
        (0..N_LIGANDS)
            .map(|i| 0.5 * masses[i] * v.atom(i).norm_squared())
            .sum()
    };
    let inv_mass: [f64; N_DOF] = std::array::from_fn(|k| 1.0 / masses[k / 3]);
    let accel = |f: &DisplacementField| DisplacementField(std::array::from_fn(|k| f.0[k] * inv_mass[k]));

    let (e0, f0) = model.energy_and_forces(&init.displacements)?;
    let meta = TrajectoryMeta {
        model: model_description(model),
        integrator: "velocity-verlet",
        schedule,
        initial_condition: format!("{:?}", init.displacements.0),
    };
    let mut traj = Trajectory {
        samples: vec![Sample {
            time: init.time,
            state: *init,
            energy: e0 + kinetic(&init.velocities),
        }],
        meta,
        abort: None,
    };

    let dt = schedule.dt;
    let mut x = init.displacements;
    let mut v = init.velocities;
    let mut a = accel(&f0);
    for step in 1..=schedule.steps {
        x.add_scaled(dt, &v);
        x.add_scaled(0.5 * dt * dt, &a);
        let (e, f) = match model.energy_and_forces(&x) {
            Ok(ef) => ef,
            Err(err) => {
                traj.abort = Some(Abort::Collision {
                    step,
                    message: err.to_string(),
                });
                break;
            }
        };
        let a_new = accel(&f);
        v.add_scaled(0.5 * dt, &a);
        v.add_scaled(0.5 * dt, &a_new);
        a = a_new;
        if !(x.is_finite() && v.is_finite())
            || x.max_abs() > BLOW_UP_THRESHOLD
            || v.max_abs() > BLOW_UP_THRESHOLD
        {
            traj.abort = Some(Abort::BlowUp { step });
            break;
        }
        if step % schedule.stride == 0 {
            let time = init.time + step as f64 * dt;
            traj.samples.push(Sample {
                time,
                state: FullState {
                    displacements: x,
                    velocities: v,
                    time,
                },
                energy: e + kinetic(&v),
            });
        }
    }
    Ok(traj)
}

/// Classic fourth-order Runge-Kutta on `(x, ẋ)` of a reduced system.
pub fn integrate_reduced(
    rhs: &ReducedRhs,
    init: &ReducedState,
    schedule: Schedule,
) -> Result<Trajectory<ReducedState>> {
    schedule.validate()?;
    let finite = |s: &ReducedState| {
        s.amplitudes.iter().chain(&s.velocities).all(|x| x.is_finite())
    };
    if !finite(init) {
        return Err(Error::Domain("initial state is not finite".into()));
    }
    let meta = TrajectoryMeta {
        model: format!("{}", rhs.pes()),
        integrator: "rk4",
        schedule,
        initial_condition: format!(
            "amplitudes {:?}, velocities {:?}",
            init.amplitudes, init.velocities
        ),
    };
    let mut traj = Trajectory {
        samples: vec![Sample {
            time: init.time,
            state: *init,
            energy: rhs.energy(&init.amplitudes, &init.velocities),
        }],
        meta,
        abort: None,
    };

    let dt = schedule.dt;
    let mut x = init.amplitudes;
    let mut v = init.velocities;
    let add = |p: &[f64; 3], h: f64, q: &[f64; 3]| -> [f64; 3] {
        [p[0] + h * q[0], p[1] + h * q[1], p[2] + h * q[2]]
    };
    for step in 1..=schedule.steps {
        let k1x = v;
        let k1v = rhs.accelerations(&x);
        let k2x = add(&v, 0.5 * dt, &k1v);
        let k2v = rhs.accelerations(&add(&x, 0.5 * dt, &k1x));
        let k3x = add(&v, 0.5 * dt, &k2v);
        let k3v = rhs.accelerations(&add(&x, 0.5 * dt, &k2x));
        let k4x = add(&v, dt, &k3v);
        let k4v = rhs.accelerations(&add(&x, dt, &k3x));
        for k in 0..3 {
            x[k] += dt / 6.0 * (k1x[k] + 2.0 * k2x[k] + 2.0 * k3x[k] + k4x[k]);
            v[k] += dt / 6.0 * (k1v[k] + 2.0 * k2v[k] + 2.0 * k3v[k] + k4v[k]);
        }
        let time = init.time + step as f64 * dt;
        let state = ReducedState {
            amplitudes: x,
            velocities: v,
            time,
        };
        if !finite(&state)
            || x.iter().chain(&v).any(|c| c.abs() > BLOW_UP_THRESHOLD)
        {
            traj.abort = Some(Abort::BlowUp { step });
            break;
        }
        if step % schedule.stride == 0 {
            traj.samples.push(Sample {
                time,
                state,
                energy: rhs.energy(&x, &v),
            });
        }
    }
    Ok(traj)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_reduced_csv<W: Write>(traj: &Trajectory<ReducedState>, mut w: W) -> io::Result<()> {
    writeln!(w, "t,a,b,c,adot,bdot,cdot,energy")?;
    for s in &traj.samples {
        let mut row = vec![fmt_f(s.time)];
        row.extend(s.state.amplitudes.iter().map(|x| fmt_f(*x)));
        row.extend(s.state.velocities.iter().map(|x| fmt_f(*x)));
        row.push(fmt_f(s.energy));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn full_csv_header() -> String {
    let mut cols = vec!["t".to_string()];
    for prefix in ["", "v"] {
        for atom in 1..=N_LIGANDS {
            for axis in ["x", "y", "z"] {
                cols.push(format!("{prefix}{axis}{atom}"));
            }
        }
    }
    cols.push("energy".into());
    cols.extend((1..=N_DOF).map(|j| format!("c{j}")));
    cols.join(",")
}

/// Full trajectory with the live decomposition onto `basis`.
pub fn write_full_csv<W: Write>(
    traj: &Trajectory<FullState>,
    basis: &ModeBasis,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{}", full_csv_header())?;
    for s in &traj.samples {
        let mut row = vec![fmt_f(s.time)];
        row.extend(s.state.displacements.0.iter().map(|x| fmt_f(*x)));
        row.extend(s.state.velocities.0.iter().map(|x| fmt_f(*x)));
        row.push(fmt_f(s.energy));
        row.extend(basis.decompose(&s.state.displacements).iter().map(|x| fmt_f(*x)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{reduced_equations, reference_d4h, PairPotential, PolynomialPes};
    use crate::symmetry::{standard_basis, standard_modes};

    fn lj_model() -> ClusterModel {
        ClusterModel::at_equilibrium(PairPotential::lennard_jones(1.0, 1.0).unwrap(), true).unwrap()
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let model = lj_model();
        let t0 = 2.0 * std::f64::consts::PI / model.breathing_omega().unwrap();
        let traj = integrate_full(
            &model,
            &FullState::at_rest(DisplacementField::zeros()),
            Schedule::new(t0 / 200.0, 2000),
        )
        .unwrap();
        assert!(traj.is_complete());
        let worst = traj.samples.iter().map(|s| s.state.displacements.max_abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn times_are_uniform() {
        let model = lj_model();
        let (p1, _, _) = standard_modes();
        let init = bush_initial_condition(&[p1], &[0.01]).unwrap();
        let traj = integrate_full(&model, &init, Schedule::new(0.01, 100).with_stride(7)).unwrap();
        assert_eq!(traj.samples.len(), 1 + 100 / 7);
        for w in traj.samples.windows(2) {
            assert!((w[1].time - w[0].time - 0.07).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        let model = lj_model();
        let init = FullState::at_rest(DisplacementField::zeros());
        assert!(integrate_full(&model, &init, Schedule::new(0.0, 10)).is_err());
        assert!(integrate_full(&model, &init, Schedule::new(0.1, 0)).is_err());
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        assert!(integrate_reduced(&rhs, &ReducedState::at_rest([0.0; 3]), Schedule::new(-1.0, 10)).is_err());
    }

    #[test]
    fn collision_aborts_with_partial_trajectory() {
        // nearly free flight so atom 6 lands on the center at step 100
        let pot = PairPotential::morse(1e-12, 3.0, 1.0).unwrap();
        let model = ClusterModel::at_equilibrium(pot, true).unwrap();
        let d = model.geometry().center_vertex_distance();
        let mut v = DisplacementField::zeros();
        v.0[17] = -1.0;
        let init = FullState {
            displacements: DisplacementField::zeros(),
            velocities: v,
            time: 0.0,
        };
        let traj = integrate_full(&model, &init, Schedule::new(d / 100.0, 1000)).unwrap();
        assert_eq!(traj.abort.as_ref().map(Abort::step), Some(100));
        assert_eq!(traj.samples.len(), 100);
    }

    #[test]
    fn breathing_energy_is_conserved() {
        let model = lj_model();
        let (p1, _, _) = standard_modes();
        let d = model.geometry().center_vertex_distance();
        let t0 = 2.0 * std::f64::consts::PI / model.breathing_omega().unwrap();
        let init = bush_initial_condition(&[p1], &[0.02 * d]).unwrap();
        let traj = integrate_full(&model, &init, Schedule::new(t0 / 1000.0, 10_000)).unwrap();
        assert!(traj.relative_energy_drift() < 1e-6);
    }

    #[test]
    fn verlet_is_time_reversible() {
        let model = lj_model();
        let (p1, p2, p3) = standard_modes();
        let d = model.geometry().center_vertex_distance();
        let t0 = 2.0 * std::f64::consts::PI / model.breathing_omega().unwrap();
        let mut init = bush_initial_condition(&[p1, p2, p3], &[0.03 * d, -0.02 * d, 0.04 * d]).unwrap();
        init.velocities.0[5] = 0.01;
        let sched = Schedule::new(t0 / 500.0, 2000);
        let fwd = integrate_full(&model, &init, sched).unwrap();
        let back = integrate_full(&model, &fwd.last().unwrap().state.reversed(), sched).unwrap();
        let end = back.last().unwrap().state;
        assert!((end.displacements - init.displacements).max_abs() < 1e-8);
        assert!((end.velocities + init.velocities).max_abs() < 1e-8);
    }

    #[test]
    fn reduced_zero_state_stays_zero() {
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let traj = integrate_reduced(&rhs, &ReducedState::at_rest([0.0; 3]), Schedule::new(0.01, 1000)).unwrap();
        assert!(traj.samples.iter().all(|s| s.state.amplitudes == [0.0; 3]));
    }

    #[test]
    fn secondary_only_keeps_root_at_zero() {
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let traj =
            integrate_reduced(&rhs, &ReducedState::at_rest([0.2, 0.0, 0.0]), Schedule::new(0.01, 5000)).unwrap();
        assert!(traj.samples.iter().all(|s| s.state.amplitudes[1] == 0.0));
        assert!(traj.max_abs(0) > 0.19);
    }

    #[test]
    fn root_excitation_drives_secondary() {
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let period = 2.0 * std::f64::consts::PI / 0.26836f64.sqrt();
        let steps = (period / 0.01).ceil() as usize;
        let traj =
            integrate_reduced(&rhs, &ReducedState::at_rest([0.0, 0.1, 0.0]), Schedule::new(0.01, steps)).unwrap();
        assert!(traj.max_abs(0) > 0.0);
    }

    #[test]
    fn rk4_energy_and_blow_up() {
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let traj =
            integrate_reduced(&rhs, &ReducedState::at_rest([0.1, 0.1, 0.0]), Schedule::new(0.01, 20_000)).unwrap();
        assert!(traj.relative_energy_drift() < 1e-8);
        let cubic = PolynomialPes::new([([2, 0, 0], 0.5), ([3, 0, 0], -1.0)]).unwrap();
        let rhs = reduced_equations(&cubic, [1.0; 3]).unwrap();
        let traj =
            integrate_reduced(&rhs, &ReducedState::at_rest([1.0, 0.0, 0.0]), Schedule::new(0.01, 20_000)).unwrap();
        assert!(matches!(traj.abort, Some(Abort::BlowUp { .. })));
    }

    #[test]
    fn initial_conditions() {
        let (p1, p2, _) = standard_modes();
        let s = bush_initial_condition(&[p1.clone(), p2.clone()], &[0.0, 0.1]).unwrap();
        // atoms 1 and 6 move toward each other along z
        assert!(s.displacements.atom(0).z > 0.0);
        assert!((s.displacements.atom(0).z + s.displacements.atom(5).z).abs() < 1e-16);
        assert_eq!(s.velocities, DisplacementField::zeros());
        let s = bush_initial_condition(&[p1.clone()], &[0.1]).unwrap();
        let c = standard_basis().decompose(&s.displacements);
        assert!((c[0] - 0.1).abs() < 1e-15 && c[1..].iter().all(|x| x.abs() < 1e-15));
        let s = bush_initial_condition(&[p1, p2], &[0.0, 0.0]).unwrap();
        assert_eq!(s.displacements, DisplacementField::zeros());
        assert!(bush_initial_condition(&[], &[1.0]).is_err());
    }

    #[test]
    fn csv_headers() {
        let h = full_csv_header();
        let cols: Vec<&str> = h.split(',').collect();
        assert_eq!(cols.len(), 1 + 36 + 1 + 18);
        assert_eq!(cols[1], "x1");
        assert_eq!(cols[18], "z6");
        assert_eq!(cols[19], "vx1");
        assert_eq!(cols[37], "energy");
        assert_eq!(cols[55], "c18");
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let traj = integrate_reduced(&rhs, &ReducedState::at_rest([0.1, 0.0, 0.0]), Schedule::new(0.01, 3)).unwrap();
        let mut buf = Vec::new();
        write_reduced_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,a,b,c,adot,bdot,cdot,energy\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
