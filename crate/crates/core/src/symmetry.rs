//! Octahedral geometry, the O_h action on ligand displacements, and the
//! symmetry-adapted mode patterns of the breathing (O_h), tetragonal (D_4h)
//! and polar (C_4v) bushes.
//!
//! Atoms are indexed 0..6 in code and labelled 1..6 in output. Atom 1 sits
//! on -z, 2 on -x, 3 on -y, 4 on +x, 5 on +y and 6 on +z. With this
//! assignment the breathing pattern is a uniform outward radial field.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const N_LIGANDS: usize = 6;
pub const N_DOF: usize = 3 * N_LIGANDS;

/// Unit direction of each ligand from the central atom.
pub const LIGAND_DIRECTIONS: [[f64; 3]; N_LIGANDS] = [
    [0.0, 0.0, -1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

const SITE_MATCH_TOL: f64 = 1e-9;
const ORTHONORMAL_TOL: f64 = 1e-10;
const COMPLETION_DROP_TOL: f64 = 1e-8;
const DOMAIN_DEDUP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeGeometry {
    center_vertex_distance: f64,
    positions: [Vector3<f64>; N_LIGANDS],
}

impl MoleculeGeometry {
    /// Regular octahedron with ligands at distance `d0` from the origin.
    pub fn new(d0: f64) -> Result<Self> {
        if !(d0 > 0.0) || !d0.is_finite() {
            return Err(Error::Domain(format!(
                "center-vertex distance must be positive and finite, got {d0}"
            )));
        }
        let positions = LIGAND_DIRECTIONS.map(|u| Vector3::from(u) * d0);
        Ok(Self {
            center_vertex_distance: d0,
            positions,
        })
    }

    pub fn center_vertex_distance(&self) -> f64 {
        self.center_vertex_distance
    }

    pub fn positions(&self) -> &[Vector3<f64>; N_LIGANDS] {
        &self.positions
    }

    pub fn position(&self, atom: usize) -> Vector3<f64> {
        self.positions[atom]
    }

    /// Index of the ligand at `p`, if any.
    pub fn site_of(&self, p: &Vector3<f64>) -> Option<usize> {
        let tol = SITE_MATCH_TOL * self.center_vertex_distance.max(1.0);
        self.positions.iter().position(|q| (q - p).norm() <= tol)
    }
}

pub fn build_equilibrium(d0: f64) -> Result<MoleculeGeometry> {
    MoleculeGeometry::new(d0)
}

/// Cartesian displacements of the six ligands, `(x, y, z)` per atom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementField(pub [f64; N_DOF]);

impl Default for DisplacementField {
    fn default() -> Self {
        Self::zeros()
    }
}

impl DisplacementField {
    pub const fn zeros() -> Self {
        Self([0.0; N_DOF])
    }

    pub fn from_atoms(atoms: [[f64; 3]; N_LIGANDS]) -> Self {
        let mut out = [0.0; N_DOF];
        for (i, v) in atoms.iter().enumerate() {
            out[3 * i..3 * i + 3].copy_from_slice(v);
        }
        Self(out)
    }

    pub fn from_slice(components: &[f64]) -> Result<Self> {
        let arr: [f64; N_DOF] = components.try_into().map_err(|_| {
            Error::Domain(format!(
                "displacement field needs {N_DOF} components, got {}",
                components.len()
            ))
        })?;
        Ok(Self(arr))
    }

    pub fn components(&self) -> &[f64; N_DOF] {
        &self.0
    }

    pub fn atom(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.0[3 * i], self.0[3 * i + 1], self.0[3 * i + 2])
    }

    pub fn set_atom(&mut self, i: usize, v: &Vector3<f64>) {
        self.0[3 * i..3 * i + 3].copy_from_slice(v.as_slice());
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(x, y)| x * y).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += alpha * y;
        }
    }

    /// Sum of the six displacement vectors.
    pub fn net_displacement(&self) -> Vector3<f64> {
        (0..N_LIGANDS).map(|i| self.atom(i)).sum()
    }
}

impl Add for DisplacementField {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for DisplacementField {
    fn add_assign(&mut self, rhs: Self) {
        self.add_scaled(1.0, &rhs);
    }
}

impl Sub for DisplacementField {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self.add_scaled(-1.0, &rhs);
        self
    }
}

impl Neg for DisplacementField {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|x| -x))
    }
}

impl Mul<f64> for DisplacementField {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self(self.0.map(|x| x * s))
    }
}

impl Mul<DisplacementField> for f64 {
    type Output = DisplacementField;
    fn mul(self, f: DisplacementField) -> DisplacementField {
        f * self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryLabel {
    Oh,
    D4h,
    C4v,
    Generic,
}

impl SymmetryLabel {
    pub fn order(self) -> Option<usize> {
        match self {
            SymmetryLabel::Oh => Some(48),
            SymmetryLabel::D4h => Some(16),
            SymmetryLabel::C4v => Some(8),
            SymmetryLabel::Generic => None,
        }
    }
}

impl fmt::Display for SymmetryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SymmetryLabel::Oh => "O_h",
            SymmetryLabel::D4h => "D_4h",
            SymmetryLabel::C4v => "C_4v",
            SymmetryLabel::Generic => "generic",
        };
        f.write_str(s)
    }
}

/// Irreducible representation of O_h a mode belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Irrep {
    Gamma1,
    Gamma5,
    Gamma10,
    Unassigned,
}

impl Irrep {
    pub fn name(self) -> &'static str {
        match self {
            Irrep::Gamma1 => "Γ1",
            Irrep::Gamma5 => "Γ5",
            Irrep::Gamma10 => "Γ10",
            Irrep::Unassigned => "-",
        }
    }

    /// Conventional spectroscopy symbol.
    pub fn optics_name(self) -> &'static str {
        match self {
            Irrep::Gamma1 => "A1g",
            Irrep::Gamma5 => "Eg",
            Irrep::Gamma10 => "F1u",
            Irrep::Unassigned => "-",
        }
    }
}

/// A unit-norm displacement pattern with its symmetry tags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pattern: DisplacementField,
    label: SymmetryLabel,
    irrep: Irrep,
}

impl Mode {
    /// Normalises `pattern`; fails on a vanishing field.
    pub fn new(pattern: DisplacementField, label: SymmetryLabel, irrep: Irrep) -> Result<Self> {
        let n = pattern.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain("mode pattern must be non-zero".into()));
        }
        Ok(Self {
            pattern: pattern * (1.0 / n),
            label,
            irrep,
        })
    }

    pub fn pattern(&self) -> &DisplacementField {
        &self.pattern
    }

    pub fn label(&self) -> SymmetryLabel {
        self.label
    }

    pub fn irrep(&self) -> Irrep {
        self.irrep
    }
}

/// The breathing, tetragonal and polar patterns, each unit norm.
pub fn standard_modes() -> (Mode, Mode, Mode) {
    let s6 = 6f64.sqrt();
    let s12 = 12f64.sqrt();
    let phi1 = DisplacementField::from_atoms([
        [0.0, 0.0, -1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]) * (1.0 / s6);
    let phi2 = DisplacementField::from_atoms([
        [0.0, 0.0, 2.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, -2.0],
    ]) * (1.0 / s12);
    let phi3 = DisplacementField::from_atoms([
        [0.0, 0.0, -2.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -2.0],
    ]) * (1.0 / s12);
    (
        Mode {
            pattern: phi1,
            label: SymmetryLabel::Oh,
            irrep: Irrep::Gamma1,
        },
        Mode {
            pattern: phi2,
            label: SymmetryLabel::D4h,
            irrep: Irrep::Gamma5,
        },
        Mode {
            pattern: phi3,
            label: SymmetryLabel::C4v,
            irrep: Irrep::Gamma10,
        },
    )
}

/// Orthonormal basis of the 18-dimensional displacement space.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeBasis {
    modes: Vec<Mode>,
}

impl ModeBasis {
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.modes
            .iter()
            .map(|m| {
                self.modes
                    .iter()
                    .map(|n| m.pattern.dot(&n.pattern))
                    .collect()
            })
            .collect()
    }

    pub fn decompose(&self, field: &DisplacementField) -> [f64; N_DOF] {
        let mut out = [0.0; N_DOF];
        for (c, m) in out.iter_mut().zip(&self.modes) {
            *c = field.dot(&m.pattern);
        }
        out
    }

    pub fn reconstruct(&self, coeffs: &[f64; N_DOF]) -> DisplacementField {
        let mut f = DisplacementField::zeros();
        for (c, m) in coeffs.iter().zip(&self.modes) {
            f.add_scaled(*c, &m.pattern);
        }
        f
    }
}

/// Extends `seeds` to a full orthonormal basis by Gram-Schmidt over the
/// canonical unit vectors in index order.
pub fn complete_basis(seeds: &[Mode]) -> Result<ModeBasis> {
    if seeds.len() > N_DOF {
        return Err(Error::Precondition(format!(
            "at most {N_DOF} seed modes, got {}",
            seeds.len()
        )));
    }
    for (i, m) in seeds.iter().enumerate() {
        for (j, n) in seeds.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            let g = m.pattern.dot(&n.pattern);
            if (g - target).abs() > ORTHONORMAL_TOL {
                return Err(Error::Precondition(format!(
                    "seed modes not orthonormal: <{}, {}> = {g}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }

    let mut modes: Vec<Mode> = seeds.to_vec();
    for k in 0..N_DOF {
        if modes.len() == N_DOF {
            break;
        }
        let mut v = DisplacementField::zeros();
        v.0[k] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for m in &modes {
                let p = v.dot(&m.pattern);
                v.add_scaled(-p, &m.pattern);
            }
        }
        let n = v.norm();
        if n < COMPLETION_DROP_TOL {
            continue;
        }
        modes.push(Mode {
            pattern: v * (1.0 / n),
            label: SymmetryLabel::Generic,
            irrep: Irrep::Unassigned,
        });
    }
    debug_assert_eq!(modes.len(), N_DOF);
    Ok(ModeBasis { modes })
}

/// The basis used throughout: the three bush modes followed by the
/// orthonormal completion.
pub fn standard_basis() -> ModeBasis {
    let (p1, p2, p3) = standard_modes();
    complete_basis(&[p1, p2, p3]).expect("standard modes are orthonormal")
}

pub fn project(field: &DisplacementField, mode: &Mode) -> f64 {
    field.dot(&mode.pattern)
}

pub fn decompose(field: &DisplacementField, basis: &ModeBasis) -> [f64; N_DOF] {
    basis.decompose(field)
}

pub fn reconstruct(coeffs: &[f64; N_DOF], basis: &ModeBasis) -> DisplacementField {
    basis.reconstruct(coeffs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Orthogonal 3x3 matrix with the induced permutation of ligand sites:
/// `rotation * pos(i) = pos(permutation[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    rotation: Matrix3<f64>,
    permutation: [usize; N_LIGANDS],
}

impl GroupElement {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            permutation: [0, 1, 2, 3, 4, 5],
        }
    }

    /// Derives the site permutation by matching rotated positions.
    pub fn from_rotation(rotation: Matrix3<f64>, geom: &MoleculeGeometry) -> Result<Self> {
        let rtr = rotation.transpose() * rotation;
        if (rtr - Matrix3::identity()).abs().max() > 1e-12 {
            return Err(Error::Domain("matrix is not orthogonal".into()));
        }
        let mut permutation = [0usize; N_LIGANDS];
        for (i, p) in permutation.iter_mut().enumerate() {
            let image = rotation * geom.position(i);
            *p = geom.site_of(&image).ok_or_else(|| {
                Error::Domain(format!("rotation does not map atom {} onto a site", i + 1))
            })?;
        }
        Ok(Self {
            rotation,
            permutation,
        })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn permutation(&self) -> &[usize; N_LIGANDS] {
        &self.permutation
    }

    pub fn determinant(&self) -> f64 {
        self.rotation.determinant()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let mut permutation = [0usize; N_LIGANDS];
        for (i, p) in permutation.iter_mut().enumerate() {
            *p = self.permutation[other.permutation[i]];
        }
        Self {
            rotation: self.rotation * other.rotation,
            permutation,
        }
    }

    pub fn inverse(&self) -> Self {
        let mut permutation = [0usize; N_LIGANDS];
        for (i, &p) in self.permutation.iter().enumerate() {
            permutation[p] = i;
        }
        Self {
            rotation: self.rotation.transpose(),
            permutation,
        }
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.permutation == other.permutation
            && (self.rotation - other.rotation).abs().max() < 1e-9
    }

    pub fn is_identity(&self) -> bool {
        self.approx_eq(&Self::identity())
    }

    pub fn is_inversion(&self) -> bool {
        (self.rotation + Matrix3::identity()).abs().max() < 1e-9
    }

    /// Axis of a proper fourfold rotation, `None` for any other element.
    pub fn fourfold_axis(&self) -> Option<Axis> {
        let r = &self.rotation;
        if (self.determinant() - 1.0).abs() > 1e-9 || (r.trace() - 1.0).abs() > 1e-9 {
            return None;
        }
        let w = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
        let k = w.iamax();
        Some([Axis::X, Axis::Y, Axis::Z][k])
    }
}

/// The 48 elements of O_h, identity first, closed by brute force from a
/// fourfold rotation about z, a threefold rotation about (1,1,1) and the
/// inversion.
pub fn generate_oh(geom: &MoleculeGeometry) -> Vec<GroupElement> {
    let c4z = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let c3 = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let inv = -Matrix3::identity();
    let generators: Vec<GroupElement> = [c4z, c3, inv]
        .into_iter()
        .map(|m| GroupElement::from_rotation(m, geom).expect("generator maps sites to sites"))
        .collect();

    let mut elements = vec![GroupElement::identity()];
    let mut frontier = 0;
    while frontier < elements.len() {
        let g = elements[frontier].clone();
        for h in &generators {
            let product = h.compose(&g);
            if !elements.iter().any(|e| e.approx_eq(&product)) {
                elements.push(product);
            }
        }
        frontier += 1;
    }
    elements
}

pub fn is_closed_under_composition(elements: &[GroupElement]) -> bool {
    elements.iter().all(|g| {
        elements
            .iter()
            .all(|h| elements.iter().any(|e| e.approx_eq(&g.compose(h))))
    })
}

pub fn apply_symmetry(g: &GroupElement, field: &DisplacementField) -> DisplacementField {
    let mut out = DisplacementField::zeros();
    for i in 0..N_LIGANDS {
        let image = g.rotation * field.atom(i);
        out.set_atom(g.permutation[i], &image);
    }
    out
}

pub fn default_stabilizer_tolerance(field: &DisplacementField) -> f64 {
    1e-8 * field.norm()
}

/// All elements leaving `field` unchanged within `tol`.
pub fn stabilizer(
    field: &DisplacementField,
    group: &[GroupElement],
    tol: f64,
) -> Result<Vec<GroupElement>> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(group
        .iter()
        .filter(|g| (apply_symmetry(g, field) - *field).norm() <= tol)
        .cloned()
        .collect())
}

/// Distinct fourfold axes present in a set of elements.
pub fn fourfold_axes(elements: &[GroupElement]) -> Vec<Axis> {
    let mut axes: Vec<Axis> = elements.iter().filter_map(|g| g.fourfold_axis()).collect();
    axes.sort();
    axes.dedup();
    axes
}

/// Orbit of a mode pattern under `group`, identified up to sign. The input
/// mode comes first; the rest follow group order.
pub fn dynamical_domains(mode: &Mode, group: &[GroupElement]) -> Vec<Mode> {
    let mut domains: Vec<Mode> = Vec::new();
    for g in group {
        let image = apply_symmetry(g, &mode.pattern);
        let seen = domains.iter().any(|d| {
            (d.pattern - image).norm() <= DOMAIN_DEDUP_TOL
                || (d.pattern + image).norm() <= DOMAIN_DEDUP_TOL
        });
        if !seen {
            domains.push(Mode {
                pattern: image,
                label: mode.label,
                irrep: mode.irrep,
            });
        }
    }
    domains
}
