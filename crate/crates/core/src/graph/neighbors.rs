use std::collections::HashMap;

use super::{sort_edges, Edge};
use crate::error::{Error, Result};
use crate::geom::{distance, Vec3};

fn check_cutoff(cutoff: f64) -> Result<()> {
    if cutoff > 0.0 && cutoff.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("cutoff must be positive, got {cutoff}")))
    }
}

// Both searches go through this so the inclusive boundary test sees the same
// floating-point distance for a given (src, dst) pair.
#[inline]
fn pair(positions: &[Vec3], src: usize, dst: usize, cutoff: f64) -> Result<Option<Edge>> {
    let d = distance(&positions[src], &positions[dst]);
    if d == 0.0 {
        return Err(Error::CoincidentAtoms {
            a: src.min(dst),
            b: src.max(dst),
        });
    }
    Ok((d <= cutoff).then_some(Edge {
        src,
        dst,
        distance: d,
    }))
}

/// O(n²) reference search: every ordered pair with `0 < d <= cutoff`.
pub fn radius_neighbors_brute(positions: &[Vec3], cutoff: f64) -> Result<Vec<Edge>> {
    check_cutoff(cutoff)?;
    let mut edges = Vec::new();
    for dst in 0..positions.len() {
        for src in 0..positions.len() {
            if src != dst {
                if let Some(e) = pair(positions, src, dst, cutoff)? {
                    edges.push(e);
                }
            }
        }
    }
    Ok(edges)
}

type Cell = (i64, i64, i64);

fn cell_of(p: &Vec3, size: f64) -> Cell {
    (
        (p[0] / size).floor() as i64,
        (p[1] / size).floor() as i64,
        (p[2] / size).floor() as i64,
    )
}

/// Uniform-grid search with cell size equal to the cutoff. Returns the same
/// edge set as [`radius_neighbors_brute`], sorted by `(dst, src)`.
pub fn radius_neighbors_grid(positions: &[Vec3], cutoff: f64) -> Result<Vec<Edge>> {
    check_cutoff(cutoff)?;
    let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        cells.entry(cell_of(p, cutoff)).or_default().push(i);
    }
    let mut edges = Vec::new();
    for (dst, p) in positions.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p, cutoff);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(members) = cells.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &src in members {
                        if src != dst {
                            if let Some(e) = pair(positions, src, dst, cutoff)? {
                                edges.push(e);
                            }
                        }
                    }
                }
            }
        }
    }
    sort_edges(&mut edges);
    Ok(edges)
}
