//! Binary graph cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     4 bytes  "PXGR"
//! version   u32
//! nodes     u32, then one u8 atomic number per node
//! global    u32 count, then (src u32, dst u32, distance f64) per edge
//! local     u32 count, same record layout
//! triplets  u32 count, then (kind u8 [0 one-hop, 1 two-hop], edge_a u32, edge_b u32, theta f64)
//! ```

use super::{AngleKind, AngleTriplet, Edge, MultiplexGraph};
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 4] = b"PXGR";
pub const GRAPH_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_edges(out: &mut Vec<u8>, edges: &[Edge]) {
    put_u32(out, edges.len());
    for e in edges {
        put_u32(out, e.src);
        put_u32(out, e.dst);
        out.extend_from_slice(&e.distance.to_le_bytes());
    }
}

pub fn write_graph(g: &MultiplexGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(GRAPH_MAGIC);
    out.extend_from_slice(&GRAPH_VERSION.to_le_bytes());
    put_u32(&mut out, g.z.len());
    out.extend_from_slice(&g.z);
    put_edges(&mut out, &g.global_edges);
    put_edges(&mut out, &g.local_edges);
    put_u32(&mut out, g.angles.len());
    for t in &g.angles {
        out.push(match t.kind {
            AngleKind::OneHop => 0,
            AngleKind::TwoHop => 1,
        });
        put_u32(&mut out, t.edge_a);
        put_u32(&mut out, t.edge_b);
        out.extend_from_slice(&t.theta.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptGraph("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn edges(&mut self, nodes: usize) -> Result<Vec<Edge>> {
        let count = self.u32()?;
        let mut edges = Vec::with_capacity(count.min(self.buf.len() / 16));
        for _ in 0..count {
            let (src, dst, distance) = (self.u32()?, self.u32()?, self.f64()?);
            if src >= nodes || dst >= nodes {
                return Err(Error::CorruptGraph(format!("edge ({src}, {dst}) out of range")));
            }
            edges.push(Edge { src, dst, distance });
        }
        Ok(edges)
    }
}

pub fn read_graph(bytes: &[u8]) -> Result<MultiplexGraph> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != GRAPH_MAGIC {
        return Err(Error::CorruptGraph("bad magic".into()));
    }
    let version = r.u32()? as u32;
    if version != GRAPH_VERSION {
        return Err(Error::CorruptGraph(format!("unsupported version {version}")));
    }
    let nodes = r.u32()?;
    let z = r.take(nodes)?.to_vec();
    let global_edges = r.edges(nodes)?;
    let local_edges = r.edges(nodes)?;
    let count = r.u32()?;
    let mut angles = Vec::with_capacity(count.min(bytes.len() / 17));
    for _ in 0..count {
        let kind = match r.take(1)?[0] {
            0 => AngleKind::OneHop,
            1 => AngleKind::TwoHop,
            k => return Err(Error::CorruptGraph(format!("bad triplet kind {k}"))),
        };
        let (edge_a, edge_b, theta) = (r.u32()?, r.u32()?, r.f64()?);
        if edge_a >= local_edges.len() || edge_b >= local_edges.len() {
            return Err(Error::CorruptGraph("triplet references a missing edge".into()));
        }
        angles.push(AngleTriplet {
            kind,
            edge_a,
            edge_b,
            theta,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptGraph("trailing bytes".into()));
    }
    Ok(MultiplexGraph {
        z,
        global_edges,
        local_edges,
        angles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Atom, Structure};
    use crate::graph::build_multiplex;

    fn sample() -> MultiplexGraph {
        let atoms = [[0.0, 0.0, 0.0], [1.4, 0.0, 0.0], [2.1, 1.2, 0.0], [6.0, 1.0, 1.0]]
            .iter()
            .zip([6u8, 7, 8, 6])
            .map(|(p, z)| Atom {
                element: z,
                position: *p,
            })
            .collect();
        build_multiplex(&Structure::new("c", atoms).unwrap(), 2.6, 20.0).unwrap()
    }

    #[test]
    fn round_trip() {
        let g = sample();
        assert!(!g.angles.is_empty());
        let bytes = write_graph(&g);
        assert_eq!(&bytes[..4], GRAPH_MAGIC);
        assert_eq!(read_graph(&bytes).unwrap(), g);
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = write_graph(&sample());
        assert!(read_graph(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_graph(&bad), Err(Error::CorruptGraph(_))));
    }
}
