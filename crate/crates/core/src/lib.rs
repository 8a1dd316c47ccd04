//! Desk-scale end-to-end network slice orchestration: a three-level
//! descriptor model (VNFD/NSD/NSID), simulated infrastructure managers,
//! slice lifecycle management across multiple VIMs, tenant radio-resource
//! scheduling, L2 isolation bookkeeping and metric collection.

pub mod descriptor;
pub mod engine;
pub mod fabric;
pub mod nfvi;
pub mod orchestrator;
pub mod registry;
pub mod telemetry;
pub mod tenancy;

pub use descriptor::{
    parse_nsd, parse_nsid, parse_vnfd, resource_budget, validate_package, DescriptorPackage, Flavor, MetricName,
    ResourceVector, ValidationReport,
};
pub use engine::{Engine, EngineError};
pub use orchestrator::{LifecycleState, PackageId};
