//! Structure algorithms for nilpotent approximate groups.

pub mod central;
pub mod chain;
pub mod nilpotent;

pub use central::{
    commutator_chain, commutators_in_a4_check, guralnick_set, refined_central_series,
    CentralSeriesCert, CommutatorChainCert, GuralnickResult,
};
pub use chain::{
    dimension_chain, dimension_chain_with, find_nonnormal_witness, gleason_check,
    torsion_structure, ChainCertificate, GleasonReport, TorsionResult,
};
pub use nilpotent::{nilpotent_structure, nilpotent_structure_with, StageRecord, StructureResult};
