//! Two-plex multiplex graphs: a global plex of all pairs within a large cutoff
//! and a local plex within a small cutoff, plus the local plex's angle triplets.

mod angles;
mod cache;
mod neighbors;

pub use angles::enumerate_angles;
pub use cache::{read_graph, write_graph, GRAPH_MAGIC, GRAPH_VERSION};
pub use neighbors::{radius_neighbors_brute, radius_neighbors_grid};

use crate::error::{Error, Result};
use crate::geom::Structure;

pub const DEFAULT_LOCAL_CUTOFF: f64 = 2.6;
pub const DEFAULT_GLOBAL_CUTOFF: f64 = 20.0;

/// Directed edge carrying a message from `src` to `dst`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    /// Å
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AngleKind {
    /// Companion edge `j' -> i` shares the message edge's target `i`.
    OneHop,
    /// Companion edge `k -> j` feeds the message edge's source `j`.
    TwoHop,
}

/// Angle between a message edge and one of its companion edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleTriplet {
    pub kind: AngleKind,
    /// Index of the message edge `j -> i` in the local edge list.
    pub edge_a: usize,
    /// Index of the companion edge in the local edge list.
    pub edge_b: usize,
    /// Radians in `[0, π]`, measured at the shared vertex.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexGraph {
    pub z: Vec<u8>,
    pub global_edges: Vec<Edge>,
    pub local_edges: Vec<Edge>,
    pub angles: Vec<AngleTriplet>,
}

impl MultiplexGraph {
    pub fn num_nodes(&self) -> usize {
        self.z.len()
    }
}

/// Builds the multiplex graph of an already C/N/O-filtered structure.
pub fn build_multiplex(s: &Structure, local_cutoff: f64, global_cutoff: f64) -> Result<MultiplexGraph> {
    if !(local_cutoff > 0.0 && local_cutoff < global_cutoff) || !global_cutoff.is_finite() {
        return Err(Error::Config(format!(
            "cutoffs must satisfy 0 < local ({local_cutoff}) < global ({global_cutoff})"
        )));
    }
    let positions = s.positions();
    let global_edges = radius_neighbors_grid(&positions, global_cutoff)?;
    let local_edges = radius_neighbors_grid(&positions, local_cutoff)?;
    let angles = enumerate_angles(&local_edges, &positions)?;
    if global_edges.is_empty() {
        log::warn!(
            "structure {} has no atom pairs within {global_cutoff} Å",
            s.id
        );
    }
    Ok(MultiplexGraph {
        z: s.elements(),
        global_edges,
        local_edges,
        angles,
    })
}

pub(crate) fn sort_edges(edges: &mut [Edge]) {
    edges.sort_by(|a, b| (a.dst, a.src).cmp(&(b.dst, b.src)));
}
