//! Performance simulation of sparse neural networks on a mesh of
//! neuromorphic cores.
//!
//! A [`workload::NetworkSpec`] is partitioned onto cores
//! ([`placement::PartitionPlan`]), placed on the mesh
//! ([`placement::MappingPlan`]) and simulated step by step ([`sim::simulate`]).
//! The [`floorline`] model classifies the result as memory, compute or
//! traffic bound, and the [`optimizer`] searches partitionings and mappings
//! guided by that classification.

pub mod analytic;
pub mod config;
pub mod error;
pub mod export;
pub mod floorline;
pub mod optimizer;
pub mod placement;
pub mod sim;
pub mod workload;

pub use analytic::Bottleneck;
pub use config::{parse_workload, serialize_workload, Workload};
pub use error::{Error, Result};
pub use floorline::{classify, fit_floorline, FloorlineModel, FloorlinePoint};
pub use placement::{MappingPlan, PartitionPlan};
pub use sim::{simulate, EventMode, SimInput, SimReport};
pub use workload::{ChipSpec, CostModel, LayerSpec, NetworkSpec, SparsitySchedule};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/workloads.md")]
    mod workloads {}
    #[doc = include_str!("../../../book/src/counts.md")]
    mod counts {}
    #[doc = include_str!("../../../book/src/placement.md")]
    mod placement {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/floorline.md")]
    mod floorline {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
