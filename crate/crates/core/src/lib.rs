//! Approximate subgroups of residually nilpotent groups, computed exactly on
//! desk-scale instances: certificates, dimension chains, nilpotent structure,
//! nilprogression fitting, residual lifting and growth gaps.

pub mod error;
pub mod group;
pub mod growth;
pub mod progression;
pub mod resid;
pub mod setcalc;
pub mod structure;
pub mod subgrp;

pub use error::{Error, Result};
pub use group::{make_context, Element, Group, GroupCtx, GroupRef, GroupSpec, Homomorphism, Kind};
pub use setcalc::{
    certify_approx, product_set, symmetrize, ApproxCertificate, ElemSet, SetSpec, SymSet,
};
pub use subgrp::{closure, lower_central_series, quotient, QuotientCtx, Subgroup};
