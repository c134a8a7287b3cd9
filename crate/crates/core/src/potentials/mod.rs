//! Energy models: pair potentials summed over the 7-atom cluster, and
//! polynomial potentials over bush amplitudes.

mod cluster;
mod pair;
pub(crate) mod polynomial;
mod reference;

pub use cluster::{find_equilibrium, radial_energy, ClusterModel};
pub use pair::PairPotential;
pub use polynomial::{
    compare_equations, reduced_equations, CoefficientDelta, EquationTable, Exponents,
    PolynomialPes, ReducedRhs, VARIABLE_NAMES,
};
pub use reference::{
    reference_c4v, reference_c4v_equations, reference_d4h, reference_d4h_equations,
};
