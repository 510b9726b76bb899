pub mod error;
pub mod field_model;
pub mod path_integrals;
pub mod quadrature;
pub mod fock_algebra;
pub mod propagator;
pub mod oracle;
pub mod cli;
