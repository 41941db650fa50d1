//! Executable model of the TTP group membership service and its clique
//! avoidance mechanism.
//!
//! * [`station`]: one station's state machine (vectors, CRC checks, gate, re-integration).
//! * [`ring`]: synchronous TDMA ring with scenario-driven fault injection.
//! * [`scenario`]: scenario files and fault-rate validation.
//! * [`trace`]: JSON-lines traces and per-slot tables.
//! * [`abstract_model`]: the single-fault counter automaton and the map from concrete rings.
//! * [`kfault`]: per-level counter trees for several faults and their counting oracle.
//! * [`checker`]: explicit-state exploration, properties, and concrete/abstract cross-checks.
//! * [`cli`]: the `ttp-clique` command line.

pub mod abstract_model;
pub mod checker;
pub mod cli;
pub mod error;
pub mod kfault;
pub mod ring;
pub mod scenario;
pub mod station;
pub mod trace;

pub use error::{Error, Result};
pub use ring::{RingState, SlotRecord, Trace};
pub use scenario::{FaultSpec, Scenario};
pub use station::{GateRule, Location, MembershipVector, StationId, StationState};

/// Smallest ring the membership algorithm supports.
pub const MIN_STATIONS: usize = 3;
