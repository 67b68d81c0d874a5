//! Coupled thermomechanical simulation driver.
//!
//! Couples the nonlinear heat equation (temperature-dependent conductivity
//! and heat capacity, Robin boundaries) one-way into quasi-static linear
//! elasticity with thermal expansion. Each accepted time step solves the
//! thermal problem by Newton's method, then the elastic problem with the
//! fresh temperature field; the displacement never feeds back.

pub mod elastic;
pub mod materials;
pub mod schedules;
pub mod thermal;
pub mod transient;

pub use elastic::{
    cell_von_mises, solve_elastic, ElasticProblem, ElasticReport, ElasticSolveOptions,
};
pub use materials::{Material, MaterialTable, PropertyTable};
pub use schedules::{BoundaryCondition, BoundarySchedule};
pub use thermal::{
    assemble_thermal, newton_thermal, BoundaryFluxSign, KrylovKind, NewtonReport, ThermalMode,
    ThermalProblem, ThermalSolveOptions,
};
pub use transient::{
    advance_transient, coupled_steady_solve, CoupledProblem, PreconditionerCache, RebuildEvent,
    RebuildReason, ReusePolicy, State, SteadyReport, StepReport, TimeController,
};

use crate::fem::DofMap;
use crate::mesh::CELL_EDGES;

/// Global node ids of a boundary facet in facet-basis order: the three
/// vertices of the sorted facet triple, then for quadratic spaces the
/// midpoint nodes of edges (0,1), (0,2), (1,2). Looked up through the
/// owning cell because edge nodes are only addressable per cell.
pub(crate) fn facet_nodes(
    dm: &DofMap,
    cell_vertices: [usize; 4],
    cell: usize,
    facet: [usize; 3],
) -> [usize; 6] {
    let mut nodes = [usize::MAX; 6];
    let local = facet.map(|v| {
        cell_vertices
            .iter()
            .position(|&cv| cv == v)
            .expect("facet vertex belongs to owner cell")
    });
    nodes[..3].copy_from_slice(&facet);
    if dm.degree() == 2 {
        let cell_nodes = dm.cell_nodes(cell);
        for (k, [i, j]) in [[0usize, 1], [0, 2], [1, 2]].into_iter().enumerate() {
            let (a, b) = (local[i].min(local[j]), local[i].max(local[j]));
            let edge = CELL_EDGES
                .iter()
                .position(|&e| e == [a, b])
                .expect("cell edge exists for facet edge");
            nodes[3 + k] = cell_nodes[4 + edge];
        }
    }
    nodes
}
