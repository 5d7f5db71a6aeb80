//! Request-trip-vehicle (RTV) assignment.
//!
//! The crate builds downward-closed trip catalogs under pickup/dropoff
//! deadlines, solves the set-partitioning ILP and its LP relaxation exactly
//! at desk scale, rounds fractional solutions (independent, dependent and
//! deterministic rounding with multiplicity correction), prices columns with
//! an exact net-worth tour pricer, and simulates multi-round batch dispatch
//! in the penalty version of the problem.
//!
//! Data-parallel loops (rounding trials, per-vehicle trip generation and
//! pricing, replications) run on rayon when the `parallel` feature is on
//! (the default) and sequentially otherwise. Results never depend on the
//! execution mode.

pub mod batchsim;
pub mod colgen;
pub mod error;
pub mod exec;
pub mod generators;
pub mod json;
pub mod lp;
pub mod mip;
pub mod model;
pub mod rounding;
pub mod routing;
pub mod tripgen;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{
    assignment_cost, load_instance, save_instance, validate_catalog, Admissible, Assignment,
    CatalogViolation, DualSolution, FractionalSolution, Instance, Metric, OnboardPassenger, Point,
    Qos, Request, RequestId, Trip, TripCatalog, TripId, Vehicle, VehicleId, EMPTY_TRIP,
};
