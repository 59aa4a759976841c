//! Soundness verification for Data Petri Nets.
//!
//! A Data Petri Net (DPN) couples a workflow net with typed case variables,
//! per-transition read/write sets and guards. Verification proceeds by
//! abstracting each variable domain to a finite set of representative values,
//! translating the DPN into a colored Petri net, building its reachability
//! graph, and deciding data-aware soundness (and the decision-aware soundness
//! family) on that graph. A brute-force concrete-semantics oracle is provided
//! for validating the abstraction on finite domains.

pub mod abstraction;
pub mod cpn;
pub mod dmn;
pub mod dpn;
pub mod guards;
pub mod model;
pub mod oracle;
pub mod report;
pub mod soundness;
pub mod statespace;
