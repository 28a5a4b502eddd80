//! Linear MDS convertible codes: code construction over GF(2^w), conversion
//! planning with minimal node access, lower bounds and verification oracles.
//!
//! Stripe and node indices are 0-based. Node `c` of a stripe stores code
//! column `c`: columns `0..k` are systematic, `k..n` are parities.

pub mod bounds;
pub mod codes;
pub mod conversions;
pub mod error;
pub mod framework;
pub mod galois;
pub mod oracle;

pub use bounds::{general_bound, merge_bound, optimal_partitions, regime_bound, split_bound, IntersectionMatrix};
pub use codes::{make_systematic_mds, MdsCode};
pub use conversions::{
    build_spec, build_spec_for_initial, compute_new_nodes, execute, plan_conversion, plan_general,
    plan_generalized_merge, plan_generalized_split, plan_merge, plan_split, Conversion, GeneralPlanTree,
    PartitionPolicy, TouchLog,
};
pub use error::{Error, Result};
pub use framework::{
    access_cost, classify, default_plan, AccessCost, AccessReport, ConversionParams, ConversionPlan,
    ConvertibleCodeSpec, DefaultMode, NewNode, NodeRef, PartitionPair, Regime, Side, StripePayloads, UnchangedNode,
};
pub use galois::{Field, FieldElement, FieldSpec, GfMatrix};
pub use oracle::{audit_access, verify_mds_exhaustive, verify_preservation, AuditReport, Verdict};
