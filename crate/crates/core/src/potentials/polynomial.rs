use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exponents `(m, n, p)` of the monomial `a^m b^n c^p`.
pub type Exponents = [u32; 3];

pub const VARIABLE_NAMES: [&str; 3] = ["a", "b", "c"];

pub(crate) fn monomial(e: &Exponents, x: &[f64; 3]) -> f64 {
    x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32)
}

pub(crate) fn degree(e: &Exponents) -> u32 {
    e[0] + e[1] + e[2]
}

pub(crate) fn monomial_name(e: &Exponents) -> String {
    let mut s = String::new();
    for (k, &p) in e.iter().enumerate() {
        match p {
            0 => {}
            1 => s.push_str(VARIABLE_NAMES[k]),
            _ => s.push_str(&format!("{}^{}", VARIABLE_NAMES[k], p)),
        }
    }
    if s.is_empty() {
        s.push('1');
    }
    s
}

/// Sparse polynomial `U(a, b, c) = Σ γ_mnp a^m b^n c^p` expanded about
/// equilibrium; constant and linear terms are rejected.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolynomialPes {
    terms: BTreeMap<Exponents, f64>,
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    exponents: Exponents,
    coefficient: f64,
}

#[derive(Serialize, Deserialize)]
struct PesDocument {
    variables: Vec<String>,
    terms: Vec<TermRecord>,
}

impl PolynomialPes {
    pub fn new<I: IntoIterator<Item = (Exponents, f64)>>(terms: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            if degree(&e) < 2 {
                return Err(Error::Domain(format!(
                    "term {} has degree < 2; expansions about equilibrium have none",
                    monomial_name(&e)
                )));
            }
            if !c.is_finite() {
                return Err(Error::Domain(format!("coefficient of {} is not finite", monomial_name(&e))));
            }
            if map.insert(e, c).is_some() {
                return Err(Error::Domain(format!("duplicate term {}", monomial_name(&e))));
            }
        }
        Ok(Self { terms: map })
    }

    pub fn terms(&self) -> &BTreeMap<Exponents, f64> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, e: &Exponents) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    /// Highest variable index used, plus one.
    pub fn variable_count(&self) -> usize {
        self.terms
            .keys()
            .map(|e| (0..3).rev().find(|&k| e[k] > 0).map_or(0, |k| k + 1))
            .max()
            .unwrap_or(0)
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(degree).max().unwrap_or(0)
    }

    /// Returns a copy with `delta` added to one coefficient.
    pub fn perturbed(&self, e: Exponents, delta: f64) -> Result<Self> {
        if degree(&e) < 2 {
            return Err(Error::Domain("cannot perturb a constant or linear term".into()));
        }
        let mut out = self.clone();
        *out.terms.entry(e).or_insert(0.0) += delta;
        Ok(out)
    }

    pub fn evaluate(&self, x: &[f64; 3]) -> f64 {
        self.terms.iter().map(|(e, c)| c * monomial(e, x)).sum()
    }

    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (e, c) in &self.terms {
            for (k, gk) in g.iter_mut().enumerate() {
                if e[k] == 0 {
                    continue;
                }
                let mut d = *e;
                d[k] -= 1;
                *gk += c * e[k] as f64 * monomial(&d, x);
            }
        }
        g
    }

    /// Symbolic partial derivative with respect to variable `k`.
    pub fn derivative_terms(&self, k: usize) -> BTreeMap<Exponents, f64> {
        let mut out = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[k] == 0 {
                continue;
            }
            let mut d = *e;
            d[k] -= 1;
            *out.entry(d).or_insert(0.0) += c * e[k] as f64;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PesDocument {
            variables: VARIABLE_NAMES.iter().map(|s| s.to_string()).collect(),
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermRecord {
                    exponents: *e,
                    coefficient: *c,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PesDocument = serde_json::from_str(s)?;
        Self::new(doc.terms.into_iter().map(|t| (t.exponents, t.coefficient)))
    }
}

impl fmt::Display for PolynomialPes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U =")?;
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let sign = if *c < 0.0 { "-" } else if i == 0 { "" } else { "+" };
            write!(f, " {sign}{}{}", c.abs(), monomial_name(e))?;
        }
        Ok(())
    }
}

/// One governing equation written as `ẍ_k + ω² x_k = Σ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquationTable {
    pub variable: usize,
    pub linear_coefficient: f64,
    pub rhs: Vec<(Exponents, f64)>,
}

impl EquationTable {
    pub fn rhs_coefficient(&self, e: &Exponents) -> f64 {
        self.rhs
            .iter()
            .find(|(x, _)| x == e)
            .map_or(0.0, |(_, c)| *c)
    }
}

impl fmt::Display for EquationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = VARIABLE_NAMES[self.variable];
        write!(f, "{v}'' + {:.5}{v} =", self.linear_coefficient)?;
        for (i, (e, c)) in self.rhs.iter().enumerate() {
            let sign = if *c < 0.0 { "-" } else if i == 0 { "" } else { "+" };
            write!(f, " {sign}{:.5}{}", c.abs(), monomial_name(e))?;
        }
        Ok(())
    }
}

/// Accelerations `ẍ_k = -(1/m_k) ∂U/∂x_k` of a reduced bush system.
#[derive(Clone, Debug)]
pub struct ReducedRhs {
    pes: PolynomialPes,
    masses: [f64; 3],
    force_terms: [BTreeMap<Exponents, f64>; 3],
}

pub fn reduced_equations(pes: &PolynomialPes, masses: [f64; 3]) -> Result<ReducedRhs> {
    if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::Domain(format!("mode masses must be positive, got {m}")));
    }
    let force_terms = [0, 1, 2].map(|k| {
        pes.derivative_terms(k)
            .into_iter()
            .map(|(e, c)| (e, -c / masses[k]))
            .collect()
    });
    Ok(ReducedRhs {
        pes: pes.clone(),
        masses,
        force_terms,
    })
}

impl ReducedRhs {
    pub fn pes(&self) -> &PolynomialPes {
        &self.pes
    }

    pub fn masses(&self) -> &[f64; 3] {
        &self.masses
    }

    pub fn variable_count(&self) -> usize {
        self.pes.variable_count()
    }

    pub fn accelerations(&self, x: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|k| {
            self.force_terms[k]
                .iter()
                .map(|(e, c)| c * monomial(e, x))
                .sum()
        })
    }

    pub fn energy(&self, x: &[f64; 3], v: &[f64; 3]) -> f64 {
        let kinetic: f64 = (0..3).map(|k| 0.5 * self.masses[k] * v[k] * v[k]).sum();
        kinetic + self.pes.evaluate(x)
    }

    /// Coefficients in governing-equation layout: the linear self term on
    /// the left, every other term on the right.
    pub fn equation_tables(&self) -> Vec<EquationTable> {
        (0..self.variable_count())
            .map(|k| {
                let mut linear = [0u32; 3];
                linear[k] = 1;
                let mut rhs: Vec<(Exponents, f64)> = self.force_terms[k]
                    .iter()
                    .filter(|(e, _)| **e != linear)
                    .map(|(e, c)| (*e, *c))
                    .collect();
                rhs.sort_by_key(|(e, _)| (degree(e), std::cmp::Reverse(*e)));
                EquationTable {
                    variable: k,
                    linear_coefficient: -self.force_terms[k].get(&linear).copied().unwrap_or(0.0),
                    rhs,
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientDelta {
    pub variable: usize,
    /// `None` for the linear left-hand coefficient.
    pub exponents: Option<Exponents>,
    pub derived: f64,
    pub printed: f64,
}

impl CoefficientDelta {
    pub fn abs_error(&self) -> f64 {
        (self.derived - self.printed).abs()
    }

    pub fn term_name(&self) -> String {
        let v = VARIABLE_NAMES[self.variable];
        match &self.exponents {
            None => format!("{v}-eq linear {v}"),
            Some(e) => format!("{v}-eq {}", monomial_name(e)),
        }
    }
}

/// Pairs every coefficient of `derived` with its printed counterpart; terms
/// present on either side appear once, missing ones count as zero.
pub fn compare_equations(derived: &[EquationTable], printed: &[EquationTable]) -> Vec<CoefficientDelta> {
    let mut out = Vec::new();
    for p in printed {
        let d = derived.iter().find(|d| d.variable == p.variable);
        out.push(CoefficientDelta {
            variable: p.variable,
            exponents: None,
            derived: d.map_or(0.0, |d| d.linear_coefficient),
            printed: p.linear_coefficient,
        });
        let mut keys: Vec<Exponents> = p.rhs.iter().map(|(e, _)| *e).collect();
        if let Some(d) = d {
            for (e, _) in &d.rhs {
                if !keys.contains(e) {
                    keys.push(*e);
                }
            }
        }
        for e in keys {
            out.push(CoefficientDelta {
                variable: p.variable,
                exponents: Some(e),
                derived: d.map_or(0.0, |d| d.rhs_coefficient(&e)),
                printed: p.rhs_coefficient(&e),
            });
        }
    }
    out
}
