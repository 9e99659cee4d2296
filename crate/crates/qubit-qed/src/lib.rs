//! Perturbative and resummed response functions of a two-level system coupled
//! to a bosonic field through a momentum-dependent form factor.
//!
//! The analytic path ([`selfenergy`], [`response`]) works with closed forms in
//! the excited/ground projector basis, reduced to one-dimensional k-integrals
//! over g²(k). The [`oracle`] module evaluates the same loop integrals by
//! brute force from explicit matrices and is used only for validation.

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod model;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod response;
pub mod selfenergy;
pub mod tolerances;
pub mod verify;

pub use dispersion::{h_closed_hydrogen, h_function, pv_integral, shift_width, DispersionValue, QuadratureSpec};
pub use error::{Error, Result};
pub use model::{load_model, make_model, parse_config, FormFactor, FormFactorFamily, Masses, SystemModel, Variant};
pub use propagator::{dyson_resum, dyson_truncate, electron_propagator, photon_line, ProjectorValue};
pub use response::{evaluate, locate_poles, transition_matrix, Order, PoleReport, Quantity};
pub use selfenergy::{coefficients_b_delta, fourth_order_diagram, mass_correction, Channel, ChannelValue, Diagram, MassCorrections};
