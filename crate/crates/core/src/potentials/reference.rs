//! Published fitted potentials of the D_4h and C_4v bushes of SF6 and their
//! governing equations as printed. Amplitudes in Bohr, energies in Hartree,
//! coefficients kept at printed precision.

use super::{EquationTable, Exponents, PolynomialPes};

const D4H_TERMS: [(Exponents, f64); 9] = [
    ([0, 2, 0], 0.13418),
    ([2, 0, 0], 0.19269),
    ([1, 2, 0], -0.20382),
    ([0, 3, 0], 0.04220),
    ([3, 0, 0], -0.09507),
    ([1, 3, 0], -0.04813),
    ([2, 2, 0], 0.12396),
    ([0, 4, 0], 0.03085),
    ([4, 0, 0], 0.03013),
];

const C4V_TERMS: [(Exponents, f64); 16] = [
    ([2, 0, 0], 0.19280),
    ([0, 0, 2], 0.15057),
    ([0, 2, 0], 0.13254),
    ([0, 1, 2], 0.21180),
    ([1, 0, 2], -0.23103),
    ([1, 2, 0], -0.22387),
    ([0, 3, 0], 0.04395),
    ([3, 0, 0], -0.08708),
    ([0, 0, 4], 0.02771794903),
    ([0, 2, 2], 0.16522),
    ([0, 4, 0], 0.03186),
    ([1, 1, 2], -0.2562),
    ([1, 3, 0], -0.05031),
    ([2, 0, 2], 0.13336),
    ([2, 2, 0], 0.13581),
    ([4, 0, 0], 0.02575),
];

/// Two-mode potential `U(a, b)` of the D_4h bush.
pub fn reference_d4h() -> PolynomialPes {
    PolynomialPes::new(D4H_TERMS).expect("reference terms are valid")
}

/// Three-mode potential `U(a, b, c)` of the C_4v bush.
pub fn reference_c4v() -> PolynomialPes {
    PolynomialPes::new(C4V_TERMS).expect("reference terms are valid")
}

fn table(variable: usize, linear: f64, rhs: &[(Exponents, f64)]) -> EquationTable {
    EquationTable {
        variable,
        linear_coefficient: linear,
        rhs: rhs.to_vec(),
    }
}

/// Printed governing equations of the D_4h bush (unit mode mass).
pub fn reference_d4h_equations() -> Vec<EquationTable> {
    vec![
        table(
            0,
            0.38538,
            &[
                ([2, 0, 0], 0.28521),
                ([0, 2, 0], 0.20382),
                ([1, 2, 0], -0.24791),
                ([3, 0, 0], -0.12051),
                ([0, 3, 0], 0.04813),
            ],
        ),
        // b(-0.12658b + 0.40763a - 0.12340b^2 - 0.24791a^2 + 0.14440ab)
        table(
            1,
            0.26835,
            &[
                ([0, 2, 0], -0.12658),
                ([1, 1, 0], 0.40763),
                ([0, 3, 0], -0.12340),
                ([2, 1, 0], -0.24791),
                ([1, 2, 0], 0.14440),
            ],
        ),
    ]
}

/// Printed governing equations of the C_4v bush (unit mode mass).
pub fn reference_c4v_equations() -> Vec<EquationTable> {
    vec![
        table(
            0,
            0.3856,
            &[
                ([2, 0, 0], 0.26125),
                ([0, 2, 0], 0.22387),
                ([0, 0, 2], 0.23103),
                ([3, 0, 0], -0.10301),
                ([0, 3, 0], 0.05031),
                ([1, 2, 0], -0.27163),
                ([1, 0, 2], -0.26672),
                ([0, 1, 2], 0.256),
            ],
        ),
        table(
            1,
            0.26508,
            &[
                ([0, 2, 0], -0.13184),
                ([0, 0, 2], -0.21180),
                ([1, 1, 0], 0.44775),
                ([0, 3, 0], -0.12743),
                ([2, 1, 0], -0.27163),
                ([1, 2, 0], 0.15093),
                ([1, 0, 2], 0.256),
                ([0, 1, 2], -0.33045),
            ],
        ),
        // c(0.46205a - 0.42361b - 0.11087c^2 - 0.26672a^2 + 0.512ab - 0.33045b^2)
        table(
            2,
            0.30114,
            &[
                ([1, 0, 1], 0.46205),
                ([0, 1, 1], -0.42361),
                ([0, 0, 3], -0.11087),
                ([2, 0, 1], -0.26672),
                ([1, 1, 1], 0.512),
                ([0, 2, 1], -0.33045),
            ],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{compare_equations, reduced_equations};

    #[test]
    fn term_counts_and_spot_values() {
        let d = reference_d4h();
        assert_eq!(d.len(), 9);
        assert_eq!(d.coefficient(&[1, 2, 0]), -0.20382);
        let c = reference_c4v();
        assert_eq!(c.len(), 16);
        assert_eq!(c.coefficient(&[0, 1, 2]), 0.21180);
        assert_eq!(c.coefficient(&[1, 1, 2]), -0.2562);
        assert_eq!(c.coefficient(&[0, 0, 4]), 0.02771794903);
    }

    #[test]
    fn d4h_axis_values() {
        let d = reference_d4h();
        assert_eq!(d.evaluate(&[0.0, 0.0, 0.0]), 0.0);
        assert!((d.evaluate(&[1.0, 0.0, 0.0]) - 0.12775).abs() < 1e-14);
        assert!((d.evaluate(&[0.0, 1.0, 0.0]) - 0.20723).abs() < 1e-14);
    }

    #[test]
    fn c4v_has_only_even_powers_of_c() {
        assert!(reference_c4v().terms().keys().all(|e| e[2] % 2 == 0));
    }

    #[test]
    fn exact_decimal_roundtrip() {
        for p in [reference_d4h(), reference_c4v()] {
            let json = p.to_json().unwrap();
            assert!(json.contains("0.02771794903") || p.len() == 9);
            assert_eq!(PolynomialPes::from_json(&json).unwrap(), p);
        }
    }

    #[test]
    fn derived_d4h_equations_match_print() {
        let rhs = reduced_equations(&reference_d4h(), [1.0; 3]).unwrap();
        let t = rhs.equation_tables();
        assert!((t[0].linear_coefficient - 0.38538).abs() < 1e-12);
        assert!((t[1].linear_coefficient - 0.26836).abs() < 1e-12);
        assert!((t[0].rhs_coefficient(&[2, 0, 0]) - 0.28521).abs() < 1e-12);
        let deltas = compare_equations(&t, &reference_d4h_equations());
        assert_eq!(deltas.len(), 12);
        for d in deltas {
            assert!(d.abs_error() < 5e-4, "{}: {} vs {}", d.term_name(), d.derived, d.printed);
        }
    }

    #[test]
    fn derived_c4v_equations_match_print() {
        let rhs = reduced_equations(&reference_c4v(), [1.0; 3]).unwrap();
        let t = rhs.equation_tables();
        assert!((t[2].linear_coefficient - 0.30114).abs() < 1e-12);
        assert!((t[2].rhs_coefficient(&[0, 0, 3]) + 4.0 * 0.02771794903).abs() < 1e-12);
        let deltas = compare_equations(&t, &reference_c4v_equations());
        assert_eq!(deltas.len(), 25);
        for d in deltas {
            assert!(d.abs_error() < 5e-4, "{}: {} vs {}", d.term_name(), d.derived, d.printed);
        }
    }
}
