//! Least-squares reconstruction of reduced potentials from sampled
//! energies, and the audit of symmetry-forbidden monomials.

use std::collections::BTreeSet;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::potentials::polynomial::{degree, monomial, monomial_name};
use crate::potentials::{reference_c4v, reference_d4h, ClusterModel, Exponents, PolynomialPes, VARIABLE_NAMES};
use crate::symmetry::{DisplacementField, Mode};
use crate::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-12;

/// Half-width, as a fraction of the center-vertex distance, of the grid
/// on which cluster energies are audited. The cluster energy is not a
/// polynomial: allowed terms of degree 5 and 6 leak into the forbidden
/// degree-4 columns in proportion to the squared half-width, while rounding
/// noise in the quartic columns grows as its inverse square.
pub const CLUSTER_AUDIT_HALF_WIDTH: f64 = 1e-4;

/// Null-space components above this fraction of the largest one are named
/// in conditioning errors.
const DEPENDENCE_SHARE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn symmetric(half_width: f64, count: usize) -> Self {
        Self {
            lo: -half_width,
            hi: half_width,
            count,
        }
    }

    /// `k`-th of `count` evenly spaced points, written so that symmetric
    /// ranges give exactly symmetric nodes and an exact zero.
    pub fn point(&self, k: usize) -> f64 {
        let n = (self.count - 1) as f64;
        (self.lo * (n - k as f64) + self.hi * k as f64) / n
    }
}

/// Tensor grid of amplitude nodes over one to three bush variables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmplitudeGrid {
    axes: Vec<AxisRange>,
}

impl AmplitudeGrid {
    pub fn new(axes: Vec<AxisRange>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::Domain(format!("grid needs 1 to 3 axes, got {}", axes.len())));
        }
        for (k, r) in axes.iter().enumerate() {
            if r.count < 2 {
                return Err(Error::Domain(format!(
                    "axis {} needs at least 2 points, got {}",
                    VARIABLE_NAMES[k], r.count
                )));
            }
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
                return Err(Error::Domain(format!(
                    "axis {} range [{}, {}] is invalid",
                    VARIABLE_NAMES[k], r.lo, r.hi
                )));
            }
        }
        Ok(Self { axes })
    }

    /// `count`^`variables` nodes over `[-half_width, half_width]` per axis.
    pub fn cube(variables: usize, half_width: f64, count: usize) -> Result<Self> {
        Self::new(vec![AxisRange::symmetric(half_width, count); variables])
    }

    /// 21 × 21 over [-0.3, 0.3]².
    pub fn default_ab() -> Self {
        Self::cube(2, 0.3, 21).expect("valid default grid")
    }

    /// 21 × 21 (or 11³) over `CLUSTER_AUDIT_HALF_WIDTH · d` per axis.
    pub fn cluster_audit(variables: usize, d: f64) -> Result<Self> {
        let count = if variables == 3 { 11 } else { 21 };
        Self::cube(variables, CLUSTER_AUDIT_HALF_WIDTH * d, count)
    }

    /// 11³ over [-0.25, 0.25]³.
    pub fn default_abc() -> Self {
        Self::cube(3, 0.25, 11).expect("valid default grid")
    }

    pub fn axes(&self) -> &[AxisRange] {
        &self.axes
    }

    pub fn variable_count(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|r| r.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in lexicographic order, the last variable running fastest.
    /// Unused trailing variables are zero.
    pub fn nodes(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; self.axes.len()];
        loop {
            let mut node = [0.0; 3];
            for (k, r) in self.axes.iter().enumerate() {
                node[k] = r.point(idx[k]);
            }
            out.push(node);
            let mut k = self.axes.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.axes[k].count {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergySample {
    pub node: [f64; 3],
    pub energy: f64,
}

/// Origin-shifted energies. Nodes whose evaluation failed are omitted and
/// counted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSet {
    pub variables: usize,
    pub samples: Vec<EnergySample>,
    pub missing: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header: Vec<&str> = VARIABLE_NAMES[..self.variables].to_vec();
        header.push("energy");
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row: Vec<String> = s.node[..self.variables].iter().map(|x| format!("{x:.16e}")).collect();
            row.push(format!("{:.16e}", s.energy));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Evaluates `energy_fn` on every node and subtracts its value at the
/// origin.
pub fn sample_energies<F>(energy_fn: F, grid: &AmplitudeGrid) -> Result<SampleSet>
where
    F: Fn(&[f64; 3]) -> Result<f64>,
{
    let origin = energy_fn(&[0.0; 3])?;
    let mut samples = Vec::with_capacity(grid.len());
    let mut missing = 0;
    for node in grid.nodes() {
        match energy_fn(&node) {
            Ok(e) if e.is_finite() => samples.push(EnergySample {
                node,
                energy: e - origin,
            }),
            _ => missing += 1,
        }
    }
    Ok(SampleSet {
        variables: grid.variable_count(),
        samples,
        missing,
    })
}

/// Energy callback of the cluster along `Σ x_k modes[k]`, measured from the
/// undisplaced configuration.
pub fn cluster_energy_fn<'a>(
    model: &'a ClusterModel,
    modes: &'a [Mode],
) -> impl Fn(&[f64; 3]) -> Result<f64> + Sync + 'a {
    move |x: &[f64; 3]| {
        let mut field = DisplacementField::zeros();
        for (m, c) in modes.iter().zip(x) {
            field.add_scaled(*c, m.pattern());
        }
        model.energy_change(&field)
    }
}

/// Ordered set of monomials in the first `variables` amplitudes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonomialBasis {
    variables: usize,
    exponents: Vec<Exponents>,
}

impl MonomialBasis {
    pub fn new(variables: usize, exponents: Vec<Exponents>) -> Result<Self> {
        if !(1..=3).contains(&variables) {
            return Err(Error::Domain(format!("1 to 3 variables, got {variables}")));
        }
        let mut seen = BTreeSet::new();
        for e in &exponents {
            if degree(e) < 2 {
                return Err(Error::Domain(format!(
                    "monomial {} has degree < 2",
                    monomial_name(e)
                )));
            }
            if e[variables..].iter().any(|p| *p > 0) {
                return Err(Error::Domain(format!(
                    "monomial {} uses a variable beyond the first {variables}",
                    monomial_name(e)
                )));
            }
            if !seen.insert(*e) {
                return Err(Error::Domain(format!("duplicate monomial {}", monomial_name(e))));
            }
        }
        Ok(Self { variables, exponents })
    }

    /// Every monomial of total degree 2 through `max_degree`.
    pub fn full(variables: usize, max_degree: u32) -> Result<Self> {
        if max_degree < 2 {
            return Err(Error::Domain(format!("max degree must be at least 2, got {max_degree}")));
        }
        let lim = |k: usize| if k < variables { max_degree } else { 0 };
        let mut exponents = Vec::new();
        for d in 2..=max_degree {
            for m in (0..=lim(0).min(d)).rev() {
                for n in (0..=lim(1).min(d - m)).rev() {
                    let p = d - m - n;
                    if p <= lim(2) {
                        exponents.push([m, n, p]);
                    }
                }
            }
        }
        Self::new(variables, exponents)
    }

    pub fn from_pes(variables: usize, pes: &PolynomialPes) -> Result<Self> {
        Self::new(variables, pes.terms().keys().copied().collect())
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn exponents(&self) -> &[Exponents] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn contains(&self, e: &Exponents) -> bool {
        self.exponents.contains(e)
    }

    pub fn is_superset_of(&self, other: &Self) -> bool {
        other.exponents.iter().all(|e| self.contains(e))
    }

    /// Members of `self` that also appear in `allowed`, order kept.
    pub fn restricted_to(&self, allowed: &Self) -> Self {
        Self {
            variables: self.variables,
            exponents: self.exponents.iter().filter(|e| allowed.contains(e)).copied().collect(),
        }
    }
}

/// The nine monomials admitted in the two-mode D_4h potential.
pub fn allowed_monomials_d4h() -> MonomialBasis {
    MonomialBasis::from_pes(2, &reference_d4h()).expect("reference terms are valid")
}

/// The sixteen monomials admitted in the three-mode C_4v potential.
pub fn allowed_monomials_c4v() -> MonomialBasis {
    MonomialBasis::from_pes(3, &reference_c4v()).expect("reference terms are valid")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitTerm {
    pub exponents: Exponents,
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    pub allowed: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    #[serde(skip)]
    pub pes: PolynomialPes,
    pub terms: Vec<FitTerm>,
    pub residual_rms: f64,
    pub sample_count: usize,
    pub missing: usize,
    /// Ratio of extreme singular values of the column-scaled design matrix.
    pub condition_number: f64,
    pub forbidden_max: Option<f64>,
}

impl FitReport {
    pub fn coefficient(&self, e: &Exponents) -> f64 {
        self.pes.coefficient(e)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Ordinary least squares through an SVD of the column-normalized design
/// matrix.
pub fn fit_polynomial(samples: &SampleSet, basis: &MonomialBasis) -> Result<FitReport> {
    let n = samples.len();
    let p = basis.len();
    if p == 0 {
        return Err(Error::Precondition("empty monomial basis".into()));
    }
    if n < p {
        return Err(Error::InsufficientData(format!(
            "{n} samples for {p} monomials"
        )));
    }
    let mut design = DMatrix::from_fn(n, p, |i, j| monomial(&basis.exponents[j], &samples.samples[i].node));
    let y = DVector::from_iterator(n, samples.samples.iter().map(|s| s.energy));

    let mut scales = vec![0.0; p];
    let mut zero_columns = Vec::new();
    for j in 0..p {
        let norm = design.column(j).norm();
        if norm == 0.0 {
            zero_columns.push(monomial_name(&basis.exponents[j]));
        } else {
            design.column_mut(j).unscale_mut(norm);
        }
        scales[j] = norm;
    }
    if !zero_columns.is_empty() {
        return Err(Error::Conditioning(zero_columns));
    }

    let svd = design.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let s = &svd.singular_values;
    let s_max = s.max();
    let s_min = s.min();
    if !(s_min > RANK_TOLERANCE * s_max) {
        let k = s.imin();
        let null = v_t.row(k);
        let big = null.amax();
        let names = (0..p)
            .filter(|&j| null[j].abs() > DEPENDENCE_SHARE * big)
            .map(|j| monomial_name(&basis.exponents[j]))
            .collect();
        return Err(Error::Conditioning(names));
    }

    let uty = u.transpose() * &y;
    let z = DVector::from_fn(p, |k, _| uty[k] / s[k]);
    let x_scaled = v_t.transpose() * z;
    let residual = &y - &design * &x_scaled;
    let ss = residual.norm_squared();
    let residual_rms = (ss / n as f64).sqrt();
    let sigma2 = if n > p { ss / (n - p) as f64 } else { 0.0 };

    let mut terms = Vec::with_capacity(p);
    for j in 0..p {
        let var: f64 = (0..p).map(|k| (v_t[(k, j)] / s[k]).powi(2)).sum();
        terms.push(FitTerm {
            exponents: basis.exponents[j],
            name: monomial_name(&basis.exponents[j]),
            value: x_scaled[j] / scales[j],
            std_error: (sigma2 * var).sqrt() / scales[j],
            allowed: None,
        });
    }
    let pes = PolynomialPes::new(terms.iter().map(|t| (t.exponents, t.value)))?;
    Ok(FitReport {
        pes,
        terms,
        residual_rms,
        sample_count: n,
        missing: samples.missing,
        condition_number: s_max / s_min,
        forbidden_max: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Audit {
    pub report: FitReport,
    /// Largest |coefficient| outside the allowed set.
    pub forbidden_max: f64,
    pub worst_forbidden: Option<Exponents>,
    /// Largest |coefficient| inside the allowed set.
    pub allowed_max: f64,
}

impl Audit {
    pub fn relative(&self) -> f64 {
        if self.allowed_max > 0.0 {
            self.forbidden_max / self.allowed_max
        } else {
            f64::INFINITY
        }
    }

    pub fn forbidden_terms(&self) -> impl Iterator<Item = &FitTerm> {
        self.report.terms.iter().filter(|t| t.allowed == Some(false))
    }
}

/// Fits `full_basis` and measures the monomials it has beyond `allowed`.
pub fn forbidden_term_audit(
    samples: &SampleSet,
    full_basis: &MonomialBasis,
    allowed: &MonomialBasis,
) -> Result<Audit> {
    if !full_basis.is_superset_of(allowed) {
        let extra: Vec<String> = allowed
            .exponents()
            .iter()
            .filter(|e| !full_basis.contains(e))
            .map(monomial_name)
            .collect();
        return Err(Error::Precondition(format!(
            "full basis lacks allowed monomials {}",
            extra.join(", ")
        )));
    }
    let mut report = fit_polynomial(samples, full_basis)?;
    let mut forbidden_max = 0.0;
    let mut worst_forbidden = None;
    let mut allowed_max: f64 = 0.0;
    for t in &mut report.terms {
        let ok = allowed.contains(&t.exponents);
        t.allowed = Some(ok);
        if ok {
            allowed_max = allowed_max.max(t.value.abs());
        } else if t.value.abs() > forbidden_max || worst_forbidden.is_none() {
            forbidden_max = t.value.abs();
            worst_forbidden = Some(t.exponents);
        }
    }
    report.forbidden_max = Some(forbidden_max);
    Ok(Audit {
        report,
        forbidden_max,
        worst_forbidden,
        allowed_max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermComparison {
    pub exponents: Exponents,
    pub name: String,
    pub fitted: f64,
    pub reference: f64,
    pub delta: f64,
}

/// Per-monomial difference over the union of both term sets.
pub fn compare_pes(fitted: &PolynomialPes, reference: &PolynomialPes) -> Vec<TermComparison> {
    let keys: BTreeSet<Exponents> = fitted.terms().keys().chain(reference.terms().keys()).copied().collect();
    keys.into_iter()
        .map(|e| {
            let f = fitted.coefficient(&e);
            let r = reference.coefficient(&e);
            TermComparison {
                exponents: e,
                name: monomial_name(&e),
                fitted: f,
                reference: r,
                delta: f - r,
            }
        })
        .collect()
}
