use super::{AngleKind, AngleTriplet, Edge};
use crate::error::{Error, Result};
use crate::geom::{dot, sub, Vec3};

/// Angle at `vertex` between the rays towards `a` and `b`.
pub(crate) fn angle_at(vertex: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let u = sub(a, vertex);
    let w = sub(b, vertex);
    let cos = dot(&u, &w) / (dot(&u, &u).sqrt() * dot(&w, &w).sqrt());
    cos.clamp(-1.0, 1.0).acos()
}

/// For each directed message edge `j -> i`, pairs it with the other edges
/// entering `i` (one-hop, angle at `i`) and with the edges `k -> j`, `k != i`
/// (two-hop, angle ∠kji at `j`). Sorted by `(edge_a, edge_b)`.
pub fn enumerate_angles(local_edges: &[Edge], positions: &[Vec3]) -> Result<Vec<AngleTriplet>> {
    let n = positions.len();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, e) in local_edges.iter().enumerate() {
        for node in [e.src, e.dst] {
            if node >= n {
                return Err(Error::IndexOutOfRange {
                    what: "edge node",
                    index: node,
                    len: n,
                });
            }
        }
        incoming[e.dst].push(idx);
    }

    let mut triplets = Vec::new();
    for (a, msg) in local_edges.iter().enumerate() {
        let (j, i) = (msg.src, msg.dst);
        for &b in &incoming[i] {
            let jp = local_edges[b].src;
            if b != a && jp != j {
                triplets.push(AngleTriplet {
                    kind: AngleKind::OneHop,
                    edge_a: a,
                    edge_b: b,
                    theta: angle_at(&positions[i], &positions[j], &positions[jp]),
                });
            }
        }
        for &b in &incoming[j] {
            let k = local_edges[b].src;
            if k != i {
                triplets.push(AngleTriplet {
                    kind: AngleKind::TwoHop,
                    edge_a: a,
                    edge_b: b,
                    theta: angle_at(&positions[j], &positions[k], &positions[i]),
                });
            }
        }
    }
    triplets.sort_by(|x, y| (x.edge_a, x.edge_b).cmp(&(y.edge_a, y.edge_b)));
    Ok(triplets)
}
