use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Isotropic pair interaction.
///
/// Lennard-Jones: `U(r) = A/r^12 - B/r^6`.
/// Morse: `U(r) = D (exp(-2 alpha (r - r0)) - 2 exp(-alpha (r - r0)))`, well
/// depth `-D` at `r0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairPotential {
    LennardJones { a: f64, b: f64 },
    Morse { depth: f64, alpha: f64, r0: f64 },
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {x}")))
    }
}

impl PairPotential {
    pub fn lennard_jones(a: f64, b: f64) -> Result<Self> {
        let p = PairPotential::LennardJones { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn morse(depth: f64, alpha: f64, r0: f64) -> Result<Self> {
        let p = PairPotential::Morse { depth, alpha, r0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PairPotential::LennardJones { a, b } => {
                check_positive("A", a)?;
                check_positive("B", b)
            }
            PairPotential::Morse { depth, alpha, r0 } => {
                check_positive("D", depth)?;
                check_positive("alpha", alpha)?;
                check_positive("r0", r0)
            }
        }
    }

    /// Distance of the pair minimum.
    pub fn characteristic_length(&self) -> f64 {
        match *self {
            PairPotential::LennardJones { a, b } => (2.0 * a / b).powf(1.0 / 6.0),
            PairPotential::Morse { r0, .. } => r0,
        }
    }

    fn check_r(r: f64) -> Result<()> {
        if r > 0.0 && r.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("pair distance must be positive, got {r}")))
        }
    }

    pub fn energy(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        Ok(self.energy_unchecked(r))
    }

    /// `-dU/dr`
    pub fn force(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        Ok(self.force_unchecked(r))
    }

    /// `d²U/dr²`
    pub fn curvature(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        Ok(match *self {
            PairPotential::LennardJones { a, b } => {
                let inv2 = 1.0 / (r * r);
                let inv6 = inv2 * inv2 * inv2;
                inv2 * (156.0 * a * inv6 * inv6 - 42.0 * b * inv6)
            }
            PairPotential::Morse { depth, alpha, r0 } => {
                let e = (-alpha * (r - r0)).exp();
                depth * alpha * alpha * (4.0 * e * e - 2.0 * e)
            }
        })
    }

    pub(crate) fn energy_unchecked(&self, r: f64) -> f64 {
        match *self {
            PairPotential::LennardJones { a, b } => {
                let inv6 = (r * r * r).powi(-2);
                a * inv6 * inv6 - b * inv6
            }
            PairPotential::Morse { depth, alpha, r0 } => {
                let e = (-alpha * (r - r0)).exp();
                depth * (e * e - 2.0 * e)
            }
        }
    }

    pub(crate) fn force_unchecked(&self, r: f64) -> f64 {
        match *self {
            PairPotential::LennardJones { a, b } => {
                let inv = 1.0 / r;
                let inv6 = inv.powi(6);
                inv * (12.0 * a * inv6 * inv6 - 6.0 * b * inv6)
            }
            PairPotential::Morse { depth, alpha, r0 } => {
                let e = (-alpha * (r - r0)).exp();
                2.0 * alpha * depth * (e * e - e)
            }
        }
    }

    /// `U(r_ref + dr) - U(r_ref) - U'(r_ref) dr`, accurate to rounding
    /// relative to its own size.
    pub(crate) fn energy_remainder(&self, r_ref: f64, dr: f64) -> f64 {
        match *self {
            PairPotential::LennardJones { a, b } => {
                let x = dr / r_ref;
                // (1+x)^-n - 1 + n x
                let g = |n: f64| expm1_minus_x(-n * x.ln_1p()) + n * x_minus_ln1p(x);
                let inv6 = (r_ref * r_ref * r_ref).powi(-2);
                a * inv6 * inv6 * g(12.0) - b * inv6 * g(6.0)
            }
            PairPotential::Morse { depth, alpha, r0 } => {
                let e = (-alpha * (r_ref - r0)).exp();
                let q = (-alpha * dr).exp_m1();
                depth * (2.0 * (e * e - e) * expm1_minus_x(-alpha * dr) + e * e * q * q)
            }
        }
    }
}

const SERIES_RADIUS: f64 = 0.25;

/// `exp(x) - 1 - x`
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() >= SERIES_RADIUS {
        return x.exp_m1() - x;
    }
    let mut term = x * x / 2.0;
    let mut sum: f64 = 0.0;
    let mut k = 2.0;
    while term.abs() > 1e-18 * sum.abs() && k < 40.0 {
        sum += term;
        k += 1.0;
        term *= x / k;
    }
    sum
}

/// `x - ln(1 + x)`
fn x_minus_ln1p(x: f64) -> f64 {
    if x.abs() >= SERIES_RADIUS {
        return x - x.ln_1p();
    }
    let mut power = x * x;
    let mut sum: f64 = 0.0;
    let mut k = 2.0;
    loop {
        let term = power / k;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || k > 80.0 {
            return sum;
        }
        power *= -x;
        k += 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lj_examples() {
        let lj = PairPotential::lennard_jones(1.0, 1.0).unwrap();
        assert_eq!(lj.energy(1.0).unwrap(), 0.0);
        let rmin = 2f64.powf(1.0 / 6.0);
        assert!((lj.energy(rmin).unwrap() + 0.25).abs() < 1e-15);
        assert!(lj.force(rmin).unwrap().abs() < 1e-14);
        assert!((lj.characteristic_length() - rmin).abs() < 1e-15);
    }

    #[test]
    fn morse_minimum() {
        let m = PairPotential::morse(1.0, 1.0, 1.0).unwrap();
        assert_eq!(m.force(1.0).unwrap(), 0.0);
        assert_eq!(m.energy(1.0).unwrap(), -1.0);
    }

    #[test]
    fn rejects_bad_parameters_and_distances() {
        assert!(PairPotential::lennard_jones(0.0, 1.0).is_err());
        assert!(PairPotential::lennard_jones(1.0, -1.0).is_err());
        assert!(PairPotential::morse(1.0, 0.0, 1.0).is_err());
        let lj = PairPotential::lennard_jones(1.0, 1.0).unwrap();
        assert!(matches!(lj.energy(0.0), Err(Error::Domain(_))));
        assert!(lj.force(-1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pots = [
            PairPotential::lennard_jones(1.0, 1.0).unwrap(),
            PairPotential::lennard_jones(2.5, 0.7).unwrap(),
            PairPotential::morse(1.3, 2.0, 1.1).unwrap(),
        ];
        let h = 1e-5;
        for p in pots {
            for &r in &[0.95, 1.1, 1.4, 2.2] {
                let fd = -(p.energy(r + h).unwrap() - p.energy(r - h).unwrap()) / (2.0 * h);
                let f = p.force(r).unwrap();
                assert!((fd - f).abs() <= 1e-7 * f.abs().max(1.0), "{p:?} r={r}");
                let fd2 = -(p.force(r + h).unwrap() - p.force(r - h).unwrap()) / (2.0 * h);
                let k = p.curvature(r).unwrap();
                assert!((fd2 - k).abs() <= 1e-6 * k.abs().max(1.0), "{p:?} r={r}");
            }
        }
    }

    #[test]
    fn remainder_helpers() {
        for x in [0.01, -0.2, 0.24, 0.3, -0.6] {
            let e = expm1_minus_x(x);
            let l = x_minus_ln1p(x);
            assert!((e - (x.exp_m1() - x)).abs() <= 1e-12 * x * x, "{x}");
            assert!((l - (x - x.ln_1p())).abs() <= 1e-12 * x * x, "{x}");
        }
        assert!((expm1_minus_x(1e-6) - 5.000001666667083e-13).abs() < 1e-27);
        assert!((x_minus_ln1p(1e-6) - 4.999996666669167e-13).abs() < 1e-27);
    }

    #[test]
    fn remainder_matches_taylor() {
        let pots = [
            PairPotential::lennard_jones(1.0, 1.0).unwrap(),
            PairPotential::morse(1.0, 3.0, 1.0).unwrap(),
        ];
        for p in pots {
            for &r in &[0.9, 1.1, 1.5] {
                let dr = 1e-5;
                let k = p.curvature(r).unwrap();
                let rem = p.energy_remainder(r, dr);
                assert!((rem / (0.5 * k * dr * dr) - 1.0).abs() < 1e-3, "{p:?} {r}");
                let direct = p.energy(r + 0.1).unwrap() - p.energy(r).unwrap() + p.force(r).unwrap() * 0.1;
                assert!((p.energy_remainder(r, 0.1) - direct).abs() < 1e-12);
            }
        }
    }
}
