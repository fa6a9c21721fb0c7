//! Electrical impedance tomography with the smoothened complete electrode model
//! on extended electrodes.
//!
//! The forward problem is discretized with P1 finite elements ([`fem`]); contact
//! conductances on the electrodes follow one of three parametrizations
//! ([`contact`]). Reconstructions minimize a Tikhonov functional with
//! Gaussian priors ([`priors`]) by a Gauss–Newton iteration ([`reconstruction`])
//! driven by exact Jacobians ([`sensitivity`]).

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod contact;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod priors;
pub mod reconstruction;
pub mod sensitivity;
pub mod sparse;

pub use contact::{initial_contact, ContactParams, ContactSummary, Variant};
pub use error::{Error, Result};
pub use fem::{CurrentPatterns, DomainConductivity, ForwardModel, ForwardSolution};
pub use mesh::{build_boundary, locate_electrodes, refine_uniform, ExtendedElectrode, TriMesh};
