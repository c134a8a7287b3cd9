//! Post-processing of trajectories: mode projections, closure residuals,
//! frequency extraction, amplitude sweeps and harmonic frequencies.

use std::f64::consts::PI;
use std::io::{self, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::dynamics::{
    integrate_full, integrate_reduced, Abort, FullState, InitialExcitation, ReducedState, Schedule, Trajectory,
};
use crate::potentials::{ClusterModel, PolynomialPes, ReducedRhs, VARIABLE_NAMES};
use crate::symmetry::{complete_basis, project, DisplacementField, Mode, ModeBasis, N_DOF};
use crate::{Error, Result};

/// cm⁻¹ per hartree.
pub const HARTREE_WAVENUMBER: f64 = 219474.63;

/// ¹⁹F mass in electron masses.
pub const FLUORINE_MASS: f64 = 34631.0;

/// Coefficients of every basis mode along a full trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSeries {
    pub times: Vec<f64>,
    pub coefficients: Vec<[f64; N_DOF]>,
}

impl ModeSeries {
    pub fn series(&self, j: usize) -> Vec<f64> {
        self.coefficients.iter().map(|c| c[j]).collect()
    }

    pub fn max_abs(&self, j: usize) -> f64 {
        self.coefficients.iter().map(|c| c[j].abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=N_DOF).map(|j| format!("c{j}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, c) in self.times.iter().zip(&self.coefficients) {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(c.iter().map(|x| format!("{x:.16e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn mode_series(traj: &Trajectory<FullState>, basis: &ModeBasis) -> ModeSeries {
    ModeSeries {
        times: traj.times(),
        coefficients: traj
            .samples
            .iter()
            .map(|s| basis.decompose(&s.state.displacements))
            .collect(),
    }
}

/// `max_t ‖X - P X‖ / max_t ‖X‖` where `P` projects onto the span of the
/// bush modes.
pub fn closure_residual(traj: &Trajectory<FullState>, bush: &[Mode]) -> Result<f64> {
    if bush.is_empty() {
        return Err(Error::Precondition("bush has no modes".into()));
    }
    let span = complete_basis(bush)?;
    let k = bush.len();
    let mut leak: f64 = 0.0;
    let mut size: f64 = 0.0;
    for s in &traj.samples {
        let x = &s.state.displacements;
        let mut inside = DisplacementField::zeros();
        for m in &span.modes()[..k] {
            inside.add_scaled(project(x, m), m.pattern());
        }
        leak = leak.max((*x - inside).norm());
        size = size.max(x.norm());
    }
    if size == 0.0 {
        return Err(Error::UndefinedRatio("trajectory never leaves equilibrium".into()));
    }
    Ok(leak / size)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyMethod {
    ZeroCrossing,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    /// Cycles per time unit.
    pub frequency: f64,
    pub omega: f64,
    pub method: FrequencyMethod,
    pub uncertainty: f64,
    /// Peak of the windowed spectrum.
    pub spectral: f64,
    /// Native spectral resolution, one over the record length.
    pub bin_width: f64,
}

impl FrequencyEstimate {
    /// Primary and spectral estimates differ by less than one bin.
    pub fn consistent(&self) -> bool {
        (self.frequency - self.spectral).abs() < self.bin_width
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InsufficientData(format!("{} samples", times.len())));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Precondition("times must increase".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::Precondition("times must be uniformly spaced".into()));
        }
    }
    Ok(dt)
}

/// Dominant frequency from a Hann-windowed spectrum, zero-padded fourfold,
/// refined by a parabola through the log magnitudes around the peak.
fn spectral_peak(centered: &[f64], dt: f64) -> f64 {
    let n = centered.len();
    let len = (4 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = centered
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            Complex::new(y * w, 0.0)
        })
        .collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf[..len / 2].iter().map(|c| c.norm()).collect();
    let k = (1..mag.len()).max_by(|&i, &j| mag[i].total_cmp(&mag[j])).unwrap_or(1);
    let mut offset = 0.0;
    if k + 1 < mag.len() && mag[k - 1] > 0.0 && mag[k + 1] > 0.0 {
        let (l, c, r) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
        let denom = l - 2.0 * c + r;
        if denom != 0.0 {
            offset = 0.5 * (l - r) / denom;
        }
    }
    (k as f64 + offset) / (len as f64 * dt)
}

/// Frequency of a uniformly sampled oscillation from the mean spacing of
/// its upward mean crossings, cross-checked against the spectral peak.
pub fn estimate_frequency(times: &[f64], values: &[f64]) -> Result<FrequencyEstimate> {
    if times.len() != values.len() {
        return Err(Error::Precondition("times and values differ in length".into()));
    }
    let dt = uniform_step(times)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let y: Vec<f64> = values.iter().map(|v| v - mean).collect();

    let mut sign_changes = 0;
    let mut upward = Vec::new();
    for i in 1..y.len() {
        let (y0, y1) = (y[i - 1], y[i]);
        if (y0 < 0.0 && y1 >= 0.0) || (y0 >= 0.0 && y1 < 0.0) {
            sign_changes += 1;
        }
        if y0 < 0.0 && y1 >= 0.0 {
            upward.push(times[i - 1] + dt * y0 / (y0 - y1));
        }
    }
    if sign_changes < 4 || upward.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{sign_changes} sign changes; at least 4 are needed"
        )));
    }
    let cycles = (upward.len() - 1) as f64;
    let period = (upward[upward.len() - 1] - upward[0]) / cycles;
    let frequency = 1.0 / period;
    let spread = if upward.len() > 2 {
        let var = upward
            .windows(2)
            .map(|w| (w[1] - w[0] - period).powi(2))
            .sum::<f64>()
            / (cycles - 1.0);
        var.sqrt() / cycles.sqrt()
    } else {
        0.0
    };
    // interpolation error bound per crossing: one sample step over the span
    let uncertainty = frequency * (spread / period).max(dt * dt / (period * period * cycles));
    Ok(FrequencyEstimate {
        frequency,
        omega: 2.0 * PI * frequency,
        method: FrequencyMethod::ZeroCrossing,
        uncertainty,
        spectral: spectral_peak(&y, dt),
        bin_width: 1.0 / (dt * (y.len() - 1) as f64),
    })
}

/// System whose amplitude-dependent frequency is swept.
#[derive(Clone, Debug)]
pub enum SweepSystem<'a> {
    /// Only `variable` is displaced at `t = 0`.
    Reduced {
        rhs: &'a ReducedRhs,
        variable: usize,
        dt: f64,
        periods: f64,
    },
    /// The cluster released from `A · mode`.
    Full {
        model: &'a ClusterModel,
        mode: Mode,
        steps_per_period: usize,
        periods: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NuPoint {
    pub initial: f64,
    /// `max |x(t)|` of the excited coordinate.
    pub amplitude: f64,
    pub estimate: Option<FrequencyEstimate>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NuOfACurve {
    pub points: Vec<NuPoint>,
    pub harmonic_frequency: f64,
}

impl NuOfACurve {
    /// `(A, ν)` of every point that produced an estimate.
    pub fn values(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.estimate.map(|e| (p.amplitude, e.frequency)))
            .collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        let v = self.values();
        v.len() == self.points.len() && v.windows(2).all(|w| w[1].1 < w[0].1 && w[1].0 > w[0].0)
    }

    /// Least-squares `ν0 + κ A²` through the points.
    pub fn quadratic_fit(&self) -> Option<(f64, f64)> {
        let v = self.values();
        if v.len() < 2 {
            return None;
        }
        let n = v.len() as f64;
        let (sx, sy) = v.iter().fold((0.0, 0.0), |(sx, sy), (a, f)| (sx + a * a, sy + f));
        let (mx, my) = (sx / n, sy / n);
        let sxx: f64 = v.iter().map(|(a, _)| (a * a - mx).powi(2)).sum();
        let sxy: f64 = v.iter().map(|(a, f)| (a * a - mx) * (f - my)).sum();
        if sxx == 0.0 {
            return None;
        }
        let kappa = sxy / sxx;
        Some((my - kappa * mx, kappa))
    }

    pub fn write_csv<W: Write>(&self, mut w: W, metadata: &[(&str, String)]) -> io::Result<()> {
        write_metadata(&mut w, metadata)?;
        writeln!(w, "# harmonic_frequency: {:.16e}", self.harmonic_frequency)?;
        writeln!(w, "initial,amplitude,frequency,spectral,uncertainty")?;
        for p in &self.points {
            match p.estimate {
                Some(e) => writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    p.initial, p.amplitude, e.frequency, e.spectral, e.uncertainty
                )?,
                None => writeln!(w, "{:.16e},{:.16e},nan,nan,nan", p.initial, p.amplitude)?,
            }
        }
        Ok(())
    }
}

fn write_metadata<W: Write>(w: &mut W, metadata: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

fn abort_message(abort: &Abort) -> String {
    match abort {
        Abort::Collision { step, message } => format!("collision at step {step}: {message}"),
        Abort::BlowUp { step } => format!("blow-up at step {step}"),
    }
}

impl SweepSystem<'_> {
    pub fn harmonic_frequency(&self) -> Result<f64> {
        match self {
            SweepSystem::Reduced { rhs, variable, .. } => {
                let all = harmonic_frequencies(rhs.pes(), rhs.masses()[*variable])?;
                all.into_iter()
                    .find(|h| h.variable == *variable)
                    .map(|h| h.nu)
                    .ok_or_else(|| Error::Precondition(format!("no quadratic term in {}", VARIABLE_NAMES[*variable])))
            }
            SweepSystem::Full { model, mode, .. } => Ok(model.mode_omega(mode)? / (2.0 * PI)),
        }
    }

    /// One run started from amplitude `initial`.
    pub fn point(&self, initial: f64) -> Result<NuPoint> {
        let period = 1.0 / self.harmonic_frequency()?;
        let (times, values, abort) = match self {
            SweepSystem::Reduced { rhs, variable, dt, periods } => {
                let mut x = [0.0; 3];
                x[*variable] = initial;
                let steps = (periods * period / dt).ceil() as usize;
                let traj = integrate_reduced(rhs, &ReducedState::at_rest(x), Schedule::new(*dt, steps).with_stride(1))?;
                (traj.times(), traj.series(*variable), traj.abort)
            }
            SweepSystem::Full { model, mode, steps_per_period, periods } => {
                let init = FullState::at_rest(*mode.pattern() * initial);
                let dt = period / *steps_per_period as f64;
                let steps = (periods * *steps_per_period as f64).ceil() as usize;
                let traj = integrate_full(model, &init, Schedule::new(dt, steps).with_stride(1))?;
                let values = traj.samples.iter().map(|s| project(&s.state.displacements, mode)).collect();
                (traj.times(), values, traj.abort)
            }
        };
        let amplitude = values.iter().map(|v: &f64| v.abs()).fold(0.0, f64::max);
        if let Some(a) = abort {
            return Ok(NuPoint {
                initial,
                amplitude,
                estimate: None,
                failure: Some(abort_message(&a)),
            });
        }
        let (estimate, failure) = match estimate_frequency(&times, &values) {
            Ok(e) => (Some(e), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(NuPoint {
            initial,
            amplitude,
            estimate,
            failure,
        })
    }
}

fn check_amplitudes(amplitudes: &[f64], allow_zero: bool) -> Result<()> {
    if amplitudes.is_empty() {
        return Err(Error::Precondition("no amplitudes".into()));
    }
    for a in amplitudes {
        if !(a.is_finite() && (*a > 0.0 || (allow_zero && *a == 0.0))) {
            return Err(Error::Domain(format!("amplitude {a} must be positive")));
        }
    }
    if amplitudes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("amplitudes must be strictly increasing".into()));
    }
    Ok(())
}

/// One run per amplitude. Failed runs stay in the curve with their reason.
pub fn nu_of_a_sweep(system: &SweepSystem, amplitudes: &[f64]) -> Result<NuOfACurve> {
    check_amplitudes(amplitudes, false)?;
    let points = amplitudes.iter().map(|a| system.point(*a)).collect::<Result<Vec<_>>>()?;
    Ok(NuOfACurve {
        points,
        harmonic_frequency: system.harmonic_frequency()?,
    })
}

/// Root-to-secondary transfer in a two-mode reduced system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferSetup {
    pub root: usize,
    pub secondary: usize,
    pub dt: f64,
    /// Run length in harmonic periods of the root.
    pub periods: f64,
}

impl Default for TransferSetup {
    fn default() -> Self {
        Self {
            root: 1,
            secondary: 0,
            dt: 0.01,
            periods: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferPoint {
    pub mu: f64,
    pub root_max: f64,
    pub secondary_max: f64,
    pub blow_up: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferCurve {
    pub points: Vec<TransferPoint>,
}

impl TransferCurve {
    pub fn stable(&self) -> impl Iterator<Item = &TransferPoint> {
        self.points.iter().filter(|p| !p.blow_up)
    }

    /// `max|secondary| / max|root|` at the largest stable root amplitude.
    pub fn largest_stable_ratio(&self) -> Option<f64> {
        self.stable()
            .filter(|p| p.root_max > 0.0)
            .last()
            .map(|p| p.secondary_max / p.root_max)
    }

    /// Slope of `log max|secondary|` against `log μ` over the stable
    /// points with nonzero values.
    pub fn scaling_exponent(&self) -> Option<f64> {
        scaling_exponent(
            &self
                .stable()
                .filter(|p| p.mu > 0.0 && p.secondary_max > 0.0)
                .map(|p| (p.mu, p.secondary_max))
                .collect::<Vec<_>>(),
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W, metadata: &[(&str, String)]) -> io::Result<()> {
        write_metadata(&mut w, metadata)?;
        writeln!(w, "mu,root_max,secondary_max,blow_up")?;
        for p in &self.points {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{}",
                p.mu, p.root_max, p.secondary_max, p.blow_up
            )?;
        }
        Ok(())
    }
}

/// Least-squares slope in log-log coordinates.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl TransferSetup {
    pub fn point(&self, rhs: &ReducedRhs, mu: f64) -> Result<TransferPoint> {
        let omega = harmonic_frequencies(rhs.pes(), rhs.masses()[self.root])?
            .into_iter()
            .find(|h| h.variable == self.root)
            .map(|h| h.omega)
            .ok_or_else(|| Error::Precondition("root has no quadratic term".into()))?;
        let steps = (self.periods * 2.0 * PI / omega / self.dt).ceil() as usize;
        let mut excitation = InitialExcitation::default();
        excitation.amplitudes[self.root] = mu;
        let traj = integrate_reduced(rhs, &excitation.reduced_state(), Schedule::new(self.dt, steps).with_stride(1))?;
        Ok(TransferPoint {
            mu,
            root_max: traj.max_abs(self.root),
            secondary_max: traj.max_abs(self.secondary),
            blow_up: traj.abort.is_some(),
        })
    }
}

/// Releases the root from `μ` with the secondary at rest at zero, for each
/// `μ`. Blow-ups are flagged and the sweep continues.
pub fn transfer_curve(rhs: &ReducedRhs, root_amplitudes: &[f64], setup: &TransferSetup) -> Result<TransferCurve> {
    check_amplitudes(root_amplitudes, true)?;
    let points = root_amplitudes
        .iter()
        .map(|mu| setup.point(rhs, *mu))
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferCurve { points })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarmonicFrequency {
    pub variable: usize,
    /// Diagonal quadratic coefficient.
    pub gamma: f64,
    pub omega: f64,
    pub nu: f64,
    /// `omega × 219474.63`, meaningful in atomic units.
    pub wavenumber: f64,
}

/// `ω = √(2γ/m)` for every variable carrying a diagonal quadratic term.
pub fn harmonic_frequencies(pes: &PolynomialPes, mode_mass: f64) -> Result<Vec<HarmonicFrequency>> {
    if !(mode_mass > 0.0 && mode_mass.is_finite()) {
        return Err(Error::Domain(format!("mode mass must be positive, got {mode_mass}")));
    }
    let mut out = Vec::new();
    for k in 0..pes.variable_count() {
        let mut e = [0u32; 3];
        e[k] = 2;
        let gamma = pes.coefficient(&e);
        if !(gamma > 0.0) {
            return Err(Error::Saddle(VARIABLE_NAMES[k].to_string(), gamma));
        }
        let omega = (2.0 * gamma / mode_mass).sqrt();
        out.push(HarmonicFrequency {
            variable: k,
            gamma,
            omega,
            nu: omega / (2.0 * PI),
            wavenumber: omega * HARTREE_WAVENUMBER,
        });
    }
    Ok(out)
}

/// Second-order amplitude correction `κ` in `ω(A) ≈ ω0 + κ A²` for
/// `ẍ + ω0² x + α x² + β x³ = 0`.
pub fn lindstedt_shift(omega0_squared: f64, alpha: f64, beta: f64) -> f64 {
    let w = omega0_squared.sqrt();
    3.0 * beta / (8.0 * w) - 5.0 * alpha * alpha / (12.0 * w * w * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::bush_initial_condition;
    use crate::potentials::{reduced_equations, reference_c4v, reference_d4h, PairPotential};
    use crate::symmetry::{standard_basis, standard_modes};

    fn sine(f: f64, dt: f64, n: usize, phase: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let y = t.iter().map(|t| (2.0 * PI * f * t + phase).sin() + 0.3).collect();
        (t, y)
    }

    #[test]
    fn exact_sine() {
        let (t, y) = sine(0.37, 0.001, 30_000, 0.4);
        let e = estimate_frequency(&t, &y).unwrap();
        assert!((e.frequency / 0.37 - 1.0).abs() < 1e-6);
        assert!((e.omega - 2.0 * PI * e.frequency).abs() < 1e-15);
        assert!(e.consistent(), "{e:?}");
        assert!((e.spectral - 0.37).abs() < 2.0 * e.bin_width);
    }

    #[test]
    fn constant_and_short_series() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(matches!(estimate_frequency(&t, &vec![1.0; 100]), Err(Error::InsufficientData(_))));
        let (t, y) = sine(1.0, 0.01, 130, 0.0);
        assert!(matches!(estimate_frequency(&t, &y), Err(Error::InsufficientData(_))));
        assert!(estimate_frequency(&[0.0, 1.0, 3.0, 4.0], &[0.0, 1.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn harmonic_values() {
        let h = harmonic_frequencies(&reference_d4h(), 1.0).unwrap();
        assert_eq!(h.len(), 2);
        assert!((h[0].omega * h[0].omega - 0.38538).abs() < 1e-12);
        assert!((h[0].omega / h[1].omega - (0.38538f64 / 0.26836).sqrt()).abs() < 1e-12);
        let f = harmonic_frequencies(&reference_d4h(), FLUORINE_MASS).unwrap();
        assert!((f[0].wavenumber - 732.17).abs() < 0.05);
        assert!((f[0].omega / f[1].omega - h[0].omega / h[1].omega).abs() < 1e-14);
        let c = harmonic_frequencies(&reference_c4v(), FLUORINE_MASS).unwrap();
        assert!((c[2].wavenumber - 647.1).abs() < 0.5);
        let saddle = PolynomialPes::new([([2, 0, 0], 1.0), ([0, 2, 0], -0.1)]).unwrap();
        assert!(matches!(harmonic_frequencies(&saddle, 1.0), Err(Error::Saddle(..))));
        assert!(harmonic_frequencies(&reference_d4h(), 0.0).is_err());
    }

    #[test]
    fn lindstedt_coefficient() {
        let k = lindstedt_shift(0.38538, -0.28521, 0.12051);
        assert!((k + 0.0689).abs() < 5e-5);
    }

    #[test]
    fn reduced_harmonic_limit() {
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let sys = SweepSystem::Reduced {
            rhs: &rhs,
            variable: 0,
            dt: 0.01,
            periods: 20.0,
        };
        let p = sys.point(0.001).unwrap();
        let nu0 = 0.38538f64.sqrt() / (2.0 * PI);
        assert!((p.estimate.unwrap().frequency / nu0 - 1.0).abs() < 1e-4);
        assert!((p.amplitude - 0.001).abs() < 1e-9);
    }

    #[test]
    fn sweep_rejects_bad_amplitudes() {
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let sys = SweepSystem::Reduced {
            rhs: &rhs,
            variable: 0,
            dt: 0.01,
            periods: 5.0,
        };
        assert!(nu_of_a_sweep(&sys, &[0.2, 0.1]).is_err());
        assert!(nu_of_a_sweep(&sys, &[-0.1]).is_err());
        assert!(nu_of_a_sweep(&sys, &[]).is_err());
    }

    #[test]
    fn transfer_zero_and_small() {
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let curve = transfer_curve(&rhs, &[0.0, 0.01, 0.02, 0.04], &TransferSetup::default()).unwrap();
        assert_eq!(curve.points[0].root_max, 0.0);
        assert_eq!(curve.points[0].secondary_max, 0.0);
        let e = curve.scaling_exponent().unwrap();
        assert!((e - 2.0).abs() < 0.1, "{e}");
        assert!(curve.points.windows(2).all(|w| w[1].root_max > w[0].root_max));
    }

    #[test]
    fn series_of_breathing_run() {
        let model = ClusterModel::at_equilibrium(PairPotential::lennard_jones(1.0, 1.0).unwrap(), true).unwrap();
        let (p1, p2, p3) = standard_modes();
        let d = model.geometry().center_vertex_distance();
        let t0 = 2.0 * PI / model.breathing_omega().unwrap();
        let init = bush_initial_condition(&[p1.clone()], &[0.05 * d]).unwrap();
        let traj = integrate_full(&model, &init, Schedule::new(t0 / 500.0, 5000)).unwrap();
        let basis = standard_basis();
        let ms = mode_series(&traj, &basis);
        assert!(ms.max_abs(0) > 0.04 * d);
        for j in 1..N_DOF {
            assert!(ms.max_abs(j) < 1e-8 * ms.max_abs(0));
        }
        for (c, s) in ms.coefficients.iter().zip(&traj.samples) {
            let sum: f64 = c.iter().map(|x| x * x).sum();
            assert!((sum - s.state.displacements.norm_squared()).abs() < 1e-10);
        }
        assert!(closure_residual(&traj, &[p1]).unwrap() < 1e-8);
        let e = estimate_frequency(&ms.times, &ms.series(0)).unwrap();
        assert!(e.consistent());
        assert!((e.frequency * t0 - 1.0).abs() < 0.05);

        let free = ClusterModel::at_equilibrium(PairPotential::lennard_jones(1.0, 1.0).unwrap(), false).unwrap();
        let d = free.geometry().center_vertex_distance();
        let t0 = 2.0 * PI / free.breathing_omega().unwrap();
        let init = bush_initial_condition(&[p3.clone()], &[0.05 * d]).unwrap();
        let traj = integrate_full(&free, &init, Schedule::new(t0 / 500.0, 5000)).unwrap();
        assert!(closure_residual(&traj, &[p3.clone()]).unwrap() > 1e-4);
        let ms = mode_series(&traj, &basis);
        assert!(ms.max_abs(0) > 0.0 && ms.max_abs(1) > 0.0);
        for j in 3..N_DOF {
            assert!(ms.max_abs(j) < 1e-8 * 0.05 * d);
        }
        let (p1, _, _) = standard_modes();
        assert!(closure_residual(&traj, &[p1, p2, p3]).unwrap() < 1e-8);
    }

    #[test]
    fn c4v_bush_closes_only_without_center_forces() {
        let (p1, p2, p3) = standard_modes();
        let shift = Mode::new(
            DisplacementField::from_atoms([[0.0, 0.0, 1.0]; 6]),
            crate::symmetry::SymmetryLabel::C4v,
            crate::symmetry::Irrep::Gamma10,
        )
        .unwrap();
        let bush = [p1, p2, p3.clone()];
        for include_center in [false, true] {
            let model =
                ClusterModel::at_equilibrium(PairPotential::lennard_jones(1.0, 1.0).unwrap(), include_center).unwrap();
            let d = model.geometry().center_vertex_distance();
            let t0 = 2.0 * PI / model.breathing_omega().unwrap();
            let init = bush_initial_condition(&[p3.clone()], &[0.05 * d]).unwrap();
            let traj = integrate_full(&model, &init, Schedule::new(t0 / 1000.0, 5000)).unwrap();
            let three = closure_residual(&traj, &bush).unwrap();
            let mut four = bush.to_vec();
            four.push(shift.clone());
            let four = closure_residual(&traj, &four).unwrap();
            if include_center {
                // the fixed center pulls the ligand shell along z
                assert!(three > 0.1 && four < 1e-8, "{three} {four}");
            } else {
                assert!(three < 1e-8, "{three}");
            }
        }
    }

    #[test]
    fn zero_trajectory_ratio_is_undefined() {
        let model = ClusterModel::at_equilibrium(PairPotential::lennard_jones(1.0, 1.0).unwrap(), true).unwrap();
        let (p1, _, _) = standard_modes();
        let mut traj = integrate_full(&model, &FullState::at_rest(DisplacementField::zeros()), Schedule::new(0.01, 10)).unwrap();
        for s in &mut traj.samples {
            s.state.displacements = DisplacementField::zeros();
        }
        assert!(matches!(closure_residual(&traj, &[p1]), Err(Error::UndefinedRatio(_))));
    }
}
