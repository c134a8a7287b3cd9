use nalgebra::Vector3;

use super::PairPotential;
use crate::symmetry::{DisplacementField, Mode, MoleculeGeometry, N_LIGANDS};
use crate::{Error, Result};

const COLLISION_FRACTION: f64 = 1e-6;
const EQUILIBRIUM_SCAN_POINTS: usize = 600;
const EQUILIBRIUM_SCAN_RANGE: (f64, f64) = (0.2, 5.0);

/// Index used for the central atom in degeneracy errors.
pub const CENTER: usize = usize::MAX;

/// Ligand pair (i, j) or ligand/center pair (i, CENTER).
#[derive(Clone, Copy, Debug)]
struct Pair {
    i: usize,
    j: usize,
    reference: Vector3<f64>,
    reference_length: f64,
}

/// Six mobile ligands around an immovable central atom, all pairs
/// interacting through one pair potential.
#[derive(Clone, Debug)]
pub struct ClusterModel {
    geometry: MoleculeGeometry,
    potential: PairPotential,
    include_center: bool,
    masses: [f64; N_LIGANDS],
    pairs: Vec<Pair>,
    /// Energy gradient of the undisplaced configuration.
    reference_gradient: DisplacementField,
}

impl ClusterModel {
    pub fn new(
        geometry: MoleculeGeometry,
        potential: PairPotential,
        include_center: bool,
        masses: [f64; N_LIGANDS],
    ) -> Result<Self> {
        potential.validate()?;
        if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Domain(format!("ligand masses must be positive, got {m}")));
        }
        let mut pairs = Vec::with_capacity(21);
        for i in 0..N_LIGANDS {
            for j in i + 1..N_LIGANDS {
                let reference = geometry.position(i) - geometry.position(j);
                pairs.push(Pair {
                    i,
                    j,
                    reference,
                    reference_length: reference.norm(),
                });
            }
        }
        if include_center {
            for i in 0..N_LIGANDS {
                let reference = geometry.position(i);
                pairs.push(Pair {
                    i,
                    j: CENTER,
                    reference,
                    reference_length: reference.norm(),
                });
            }
        }
        let mut model = Self {
            geometry,
            potential,
            include_center,
            masses,
            pairs,
            reference_gradient: DisplacementField::zeros(),
        };
        model.reference_gradient = -model.forces(&DisplacementField::zeros())?;
        Ok(model)
    }

    /// Cluster built at the minimum of the radial energy, unit masses.
    pub fn at_equilibrium(potential: PairPotential, include_center: bool) -> Result<Self> {
        let d = find_equilibrium(&potential, include_center)?;
        Self::new(
            MoleculeGeometry::new(d)?,
            potential,
            include_center,
            [1.0; N_LIGANDS],
        )
    }

    pub fn with_masses(mut self, masses: [f64; N_LIGANDS]) -> Result<Self> {
        if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Domain(format!("ligand masses must be positive, got {m}")));
        }
        self.masses = masses;
        Ok(self)
    }

    pub fn geometry(&self) -> &MoleculeGeometry {
        &self.geometry
    }

    pub fn potential(&self) -> &PairPotential {
        &self.potential
    }

    pub fn include_center(&self) -> bool {
        self.include_center
    }

    pub fn masses(&self) -> &[f64; N_LIGANDS] {
        &self.masses
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    fn separation(&self, pair: &Pair, field: &DisplacementField) -> Vector3<f64> {
        if pair.j == CENTER {
            pair.reference + field.atom(pair.i)
        } else {
            pair.reference + field.atom(pair.i) - field.atom(pair.j)
        }
    }

    fn check_distance(&self, pair: &Pair, r: f64) -> Result<()> {
        let min = COLLISION_FRACTION * self.geometry.center_vertex_distance();
        if r > min && r.is_finite() {
            Ok(())
        } else {
            let j = if pair.j == CENTER { 0 } else { pair.j + 1 };
            Err(Error::Degenerate(pair.i + 1, j, min))
        }
    }

    /// Total pair energy of the displaced configuration.
    pub fn energy(&self, field: &DisplacementField) -> Result<f64> {
        let mut e = 0.0;
        for pair in &self.pairs {
            let r = self.separation(pair, field).norm();
            self.check_distance(pair, r)?;
            e += self.potential.energy_unchecked(r);
        }
        Ok(e)
    }

    /// Energy relative to the undisplaced configuration. First-order pair
    /// terms are regrouped into the reference gradient, so every summand
    /// is second order in the displacement.
    pub fn energy_change(&self, field: &DisplacementField) -> Result<f64> {
        let mut e = self.reference_gradient.dot(field);
        for pair in &self.pairs {
            let rel = if pair.j == CENTER {
                field.atom(pair.i)
            } else {
                field.atom(pair.i) - field.atom(pair.j)
            };
            let r = (pair.reference + rel).norm();
            self.check_distance(pair, r)?;
            let r0 = pair.reference_length;
            let proj = pair.reference.dot(&rel);
            // r - r0 = (2 ref.rel + rel.rel) / (r + r0)
            let dr = (2.0 * proj + rel.norm_squared()) / (r + r0);
            // dr minus its linear part ref.rel / r0
            let nonlinear = (r0 * rel.norm_squared() - proj * dr) / (r0 * (r + r0));
            let slope = -self.potential.force_unchecked(r0);
            e += slope * nonlinear + self.potential.energy_remainder(r0, dr);
        }
        Ok(e)
    }

    /// Energy and the negative gradient with respect to the 18 ligand
    /// coordinates.
    pub fn energy_and_forces(&self, field: &DisplacementField) -> Result<(f64, DisplacementField)> {
        let mut e = 0.0;
        let mut forces = DisplacementField::zeros();
        for pair in &self.pairs {
            let sep = self.separation(pair, field);
            let r = sep.norm();
            self.check_distance(pair, r)?;
            e += self.potential.energy_unchecked(r);
            let f = sep * (self.potential.force_unchecked(r) / r);
            forces.set_atom(pair.i, &(forces.atom(pair.i) + f));
            if pair.j != CENTER {
                forces.set_atom(pair.j, &(forces.atom(pair.j) - f));
            }
        }
        Ok((e, forces))
    }

    pub fn forces(&self, field: &DisplacementField) -> Result<DisplacementField> {
        self.energy_and_forces(field).map(|(_, f)| f)
    }

    /// Harmonic angular frequency of the breathing mode, from the radial
    /// energy curvature at the current geometry.
    pub fn breathing_omega(&self) -> Result<f64> {
        let d = self.geometry.center_vertex_distance();
        let s2 = 2f64.sqrt();
        let c = if self.include_center { 6.0 } else { 0.0 };
        let p = &self.potential;
        let k = c * p.curvature(d)? + 24.0 * p.curvature(s2 * d)? + 12.0 * p.curvature(2.0 * d)?;
        let m = self.masses[0];
        if !(k > 0.0) {
            return Err(Error::Saddle("breathing".into(), k));
        }
        // X = a phi_1 moves every ligand radially by a / sqrt(6)
        Ok((k / (6.0 * m)).sqrt())
    }

    /// Harmonic angular frequency along a mode, from central differences of
    /// the forces. Assumes equal ligand masses.
    pub fn mode_omega(&self, mode: &Mode) -> Result<f64> {
        let h = 1e-5 * self.geometry.center_vertex_distance();
        let phi = mode.pattern();
        let fp = self.forces(&(*phi * h))?;
        let fm = self.forces(&(*phi * -h))?;
        let k = -(fp - fm).dot(phi) / (2.0 * h);
        if !(k > 0.0) {
            return Err(Error::Saddle(format!("{} mode", mode.label()), k));
        }
        Ok((k / self.masses[0]).sqrt())
    }
}

/// Energy of the undisplaced regular octahedron with center-vertex
/// distance `d`: `c U(d) + 12 U(√2 d) + 3 U(2d)` with `c = 6` when the
/// central atom interacts.
pub fn radial_energy(potential: &PairPotential, include_center: bool, d: f64) -> Result<f64> {
    let c = if include_center { 6.0 } else { 0.0 };
    Ok(c * potential.energy(d)?
        + 12.0 * potential.energy(2f64.sqrt() * d)?
        + 3.0 * potential.energy(2.0 * d)?)
}

fn radial_slope(potential: &PairPotential, include_center: bool, d: f64) -> f64 {
    let c = if include_center { 6.0 } else { 0.0 };
    let s2 = 2f64.sqrt();
    -(c * potential.force_unchecked(d)
        + 12.0 * s2 * potential.force_unchecked(s2 * d)
        + 6.0 * potential.force_unchecked(2.0 * d))
}

/// Center-vertex distance minimising the radial energy. A geometric scan
/// brackets the minimum, then the radial slope is bisected to full
/// precision.
pub fn find_equilibrium(potential: &PairPotential, include_center: bool) -> Result<f64> {
    potential.validate()?;
    let l = potential.characteristic_length();
    let (lo, hi) = (EQUILIBRIUM_SCAN_RANGE.0 * l, EQUILIBRIUM_SCAN_RANGE.1 * l);
    let ratio = (hi / lo).powf(1.0 / (EQUILIBRIUM_SCAN_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..EQUILIBRIUM_SCAN_POINTS)
        .map(|k| lo * ratio.powi(k as i32))
        .collect();
    let energies: Vec<f64> = grid
        .iter()
        .map(|&d| radial_energy(potential, include_center, d))
        .collect::<Result<_>>()?;
    let (kmin, _) = energies
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Search("radial energy not finite on scan".into()))?;
    if kmin == 0 || kmin == grid.len() - 1 {
        return Err(Error::Search(format!(
            "no interior minimum in [{lo:.4}, {hi:.4}]"
        )));
    }
    let (mut a, mut b) = (grid[kmin - 1], grid[kmin + 1]);
    let (mut sa, sb) = (
        radial_slope(potential, include_center, a),
        radial_slope(potential, include_center, b),
    );
    if !(sa < 0.0 && sb > 0.0) {
        return Err(Error::Search("radial slope does not change sign".into()));
    }
    while (b - a) > 1e-15 * b {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let sm = radial_slope(potential, include_center, m);
        if sm == 0.0 {
            return Ok(m);
        }
        if (sm < 0.0) == (sa < 0.0) {
            a = m;
            sa = sm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::{apply_symmetry, generate_oh, standard_modes};

    fn lj() -> PairPotential {
        PairPotential::lennard_jones(1.0, 1.0).unwrap()
    }

    /// Dense-grid scan refined by golden section on the energy itself.
    fn golden_section_oracle(p: &PairPotential, center: bool) -> f64 {
        let e = |d: f64| radial_energy(p, center, d).unwrap();
        let l = p.characteristic_length();
        let n = 20_000;
        let (lo, hi) = (0.5 * l, 3.0 * l);
        let step = (hi - lo) / n as f64;
        let k = (0..=n)
            .min_by(|&i, &j| e(lo + i as f64 * step).total_cmp(&e(lo + j as f64 * step)))
            .unwrap();
        let (mut a, mut b) = (lo + (k as f64 - 1.0) * step, lo + (k as f64 + 1.0) * step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if e(c) < e(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn equilibrium_matches_golden_section_oracle() {
        for center in [true, false] {
            let d = find_equilibrium(&lj(), center).unwrap();
            let oracle = golden_section_oracle(&lj(), center);
            // golden section on a flat minimum resolves ~sqrt(eps)
            assert!((d - oracle).abs() < 1e-7 * d, "center={center}: {d} vs {oracle}");
        }
    }

    #[test]
    fn equilibrium_has_vanishing_forces() {
        for p in [lj(), PairPotential::morse(1.0, 3.0, 1.0).unwrap()] {
            let model = ClusterModel::at_equilibrium(p, true).unwrap();
            let f = model.forces(&DisplacementField::zeros()).unwrap();
            assert!(f.norm() < 1e-8, "{p:?}: {}", f.norm());
        }
    }

    #[test]
    fn morse_equilibrium_approaches_r0_for_narrow_wells() {
        let mut prev = f64::INFINITY;
        for alpha in [2.0, 4.0, 8.0, 16.0] {
            let p = PairPotential::morse(1.0, alpha, 1.0).unwrap();
            let d = find_equilibrium(&p, true).unwrap();
            let gap = (d - 1.0).abs();
            assert!(gap < prev, "alpha={alpha}: gap {gap} not below {prev}");
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn pair_count() {
        let g = MoleculeGeometry::new(1.1).unwrap();
        let m = ClusterModel::new(g.clone(), lj(), true, [1.0; 6]).unwrap();
        assert_eq!(m.pair_count(), 21);
        let m = ClusterModel::new(g, lj(), false, [1.0; 6]).unwrap();
        assert_eq!(m.pair_count(), 15);
    }

    #[test]
    fn energy_at_equilibrium_is_radial_energy() {
        let model = ClusterModel::at_equilibrium(lj(), true).unwrap();
        let d = model.geometry().center_vertex_distance();
        let e = model.energy(&DisplacementField::zeros()).unwrap();
        assert!((e - radial_energy(&lj(), true, d).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn forces_match_finite_differences() {
        let model = ClusterModel::at_equilibrium(lj(), true).unwrap();
        let (p1, p2, p3) = standard_modes();
        let mut field = *p1.pattern() * 0.03 + *p2.pattern() * -0.02 + *p3.pattern() * 0.04;
        field.0[4] += 0.011;
        field.0[13] -= 0.007;
        let f = model.forces(&field).unwrap();
        let h = 1e-6;
        for k in 0..18 {
            let mut fp = field;
            let mut fm = field;
            fp.0[k] += h;
            fm.0[k] -= h;
            let fd = -(model.energy(&fp).unwrap() - model.energy(&fm).unwrap()) / (2.0 * h);
            assert!((fd - f.0[k]).abs() < 1e-6 * f.norm(), "k={k}");
        }
    }

    #[test]
    fn energy_is_oh_invariant() {
        let model = ClusterModel::at_equilibrium(lj(), true).unwrap();
        let group = generate_oh(model.geometry());
        let mut field = DisplacementField::zeros();
        for (k, x) in field.0.iter_mut().enumerate() {
            *x = 0.01 * ((k * 7 % 11) as f64 - 5.0);
        }
        let e0 = model.energy(&field).unwrap();
        for g in &group {
            let e = model.energy(&apply_symmetry(g, &field)).unwrap();
            assert!((e - e0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_change_agrees_with_difference() {
        let model = ClusterModel::at_equilibrium(lj(), true).unwrap();
        let (_, p2, _) = standard_modes();
        let f = *p2.pattern() * 0.1;
        let direct = model.energy(&f).unwrap() - model.energy(&DisplacementField::zeros()).unwrap();
        assert!((model.energy_change(&f).unwrap() - direct).abs() < 1e-13);
    }

    #[test]
    fn collision_is_reported() {
        let model = ClusterModel::at_equilibrium(lj(), true).unwrap();
        let d = model.geometry().center_vertex_distance();
        let mut f = DisplacementField::zeros();
        f.0[2] = d; // atom 1 onto the center
        assert!(matches!(model.energy(&f), Err(Error::Degenerate(1, 0, _))));
        assert!(model.forces(&f).is_err());
    }

    #[test]
    fn breathing_omega_matches_mode_stiffness() {
        let model = ClusterModel::at_equilibrium(lj(), true).unwrap();
        let (p1, _, _) = standard_modes();
        let w0 = model.breathing_omega().unwrap();
        let w1 = model.mode_omega(&p1).unwrap();
        assert!((w0 - w1).abs() < 1e-6 * w0);
    }
}
