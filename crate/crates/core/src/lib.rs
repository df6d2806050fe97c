//! Invariant point processes on concrete unimodular groups.
//!
//! The crate samples Poisson, IID-marked and Cox processes on Euclidean
//! space, integer lattices and the Heisenberg group, builds factor graphs and
//! Voronoi structures on the samples, and provides the statistical machinery
//! to check intensity, Campbell and Palm identities against Monte Carlo
//! output.

pub mod diagnostics;
pub mod error;
pub mod format;
pub mod geometry;
pub mod graph;
pub mod group;
pub mod process;
pub mod rng;
pub mod spatial;
pub mod stats;

pub use error::{Error, Result};
pub use group::{
    check_disintegration, folner_defect, CosetId, DisintegrationReport, FolnerSet, GroupPoint, ModelGroup,
    ModelKind, Selector, Subgroup, Window,
};
pub use process::{
    campbell_check, estimate_intensity, fidi, iid_marking, palm_cox, palm_poisson, sample_cox_folner,
    sample_cox_given_cosets, sample_cox_quotient, sample_poisson_group, sample_poisson_quotient, CampbellReport, Configuration,
    CoxSample, DrivingSegment, Estimate, MarkedConfiguration, PalmConstruction, PalmSample, TestFunction,
};
pub use rng::{replicate, StreamKey};
pub use diagnostics::{
    count_gof_test, default_panel, palm_reroot_estimate, reroot_agreement_test, tv_estimate, tv_max_marginal, two_sample_fidi_test,
    weak_convergence_report, ConvergenceOptions, ConvergenceReport, ConvergenceRow, FidiSample, RerootedFidi, TvEstimate,
};
pub use graph::{
    avg_degree, connectivity, cost_upper_bound_experiment, distance_graph, leafwise_line_graph,
    lifted_quotient_graph, star_graph, star_union, ComponentReport, CostOptions, CostRow, Edge, EdgeKind,
    ExperimentReport, FactorGraph, StarSchedule, StarStage,
};
pub use geometry::{
    coordinate_labels, high_adjacency_scan, leafwise_voronoi, voronoi_assign, AdjacencyPair, Leaf, LeafwiseCells,
    VoronoiAssignment,
};
