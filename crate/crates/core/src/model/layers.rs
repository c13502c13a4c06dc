//! Building blocks of the network, recorded on an autodiff [`Tape`].

use std::rc::Rc;

use super::params::layer_prefix;
use super::{basis, Ablation, ModelConfig, Plex, MAX_ATOMIC_NUMBER};
use crate::error::{Error, Result};
use crate::graph::{Edge, MultiplexGraph};
use crate::tensor::{BoundParams, Tape, Tensor, Var};

pub const LEAKY_RELU_SLOPE: f64 = 0.01;

/// Edge index lists plus the radial basis matrix `[edges, n_basis]`.
#[derive(Debug, Clone)]
pub struct EdgeInputs {
    pub src: Rc<[usize]>,
    pub dst: Rc<[usize]>,
    pub basis: Var,
}

/// Triplet index lists plus the angle basis matrix `[triplets, n_shbf]`.
#[derive(Debug, Clone)]
pub struct TripletInputs {
    pub message: Rc<[usize]>,
    pub companion: Rc<[usize]>,
    pub basis: Var,
}

/// Graph-derived constants recorded on a tape.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub num_nodes: usize,
    pub z_index: Rc<[usize]>,
    pub global: EdgeInputs,
    pub local: EdgeInputs,
    pub triplets: TripletInputs,
}

fn edge_inputs(tape: &mut Tape, edges: &[Edge], cutoff: f64, n_basis: usize) -> Result<EdgeInputs> {
    let mut data = Vec::with_capacity(edges.len() * n_basis);
    for e in edges {
        data.extend(basis::rbf_expand(e.distance, cutoff, n_basis)?);
    }
    let basis = tape.constant(Tensor::matrix(edges.len(), n_basis, data)?);
    Ok(EdgeInputs {
        src: edges.iter().map(|e| e.src).collect(),
        dst: edges.iter().map(|e| e.dst).collect(),
        basis,
    })
}

impl GraphInputs {
    pub fn record(tape: &mut Tape, graph: &MultiplexGraph, config: &ModelConfig) -> Result<Self> {
        let num_nodes = graph.num_nodes();
        let z_index = graph
            .z
            .iter()
            .map(|&z| match z as usize {
                z @ 1..=MAX_ATOMIC_NUMBER => Ok(z - 1),
                other => Err(Error::IndexOutOfRange {
                    what: "atomic number embedding",
                    index: other,
                    len: MAX_ATOMIC_NUMBER,
                }),
            })
            .collect::<Result<Rc<[usize]>>>()?;
        let global = edge_inputs(tape, &graph.global_edges, config.global_cutoff, config.n_rbf)?;
        let local = edge_inputs(tape, &graph.local_edges, config.local_cutoff, config.n_srbf)?;
        let n_local = graph.local_edges.len();
        let mut angle_data = Vec::with_capacity(graph.angles.len() * config.n_shbf);
        for t in &graph.angles {
            if t.edge_a >= n_local || t.edge_b >= n_local {
                return Err(Error::IndexOutOfRange {
                    what: "angle triplet edge",
                    index: t.edge_a.max(t.edge_b),
                    len: n_local,
                });
            }
            angle_data.extend(basis::angle_basis(t.theta, config.n_shbf));
        }
        let triplets = TripletInputs {
            message: graph.angles.iter().map(|t| t.edge_a).collect(),
            companion: graph.angles.iter().map(|t| t.edge_b).collect(),
            basis: tape.constant(Tensor::matrix(graph.angles.len(), config.n_shbf, angle_data)?),
        };
        Ok(GraphInputs {
            num_nodes,
            z_index,
            global,
            local,
            triplets,
        })
    }
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    tape.add_row(xw, b)
}

/// Two dense layers, each followed by swish.
pub fn mlp(tape: &mut Tape, params: &BoundParams, prefix: &str, x: Var) -> Result<Var> {
    let h = linear(
        tape,
        x,
        params.get(&format!("{prefix}.w1"))?,
        params.get(&format!("{prefix}.b1"))?,
    )?;
    let h = tape.swish(h)?;
    let h = linear(
        tape,
        h,
        params.get(&format!("{prefix}.w2"))?,
        params.get(&format!("{prefix}.b2"))?,
    )?;
    tape.swish(h)
}

/// `MLP_m([h_src ‖ h_dst ‖ basis])` per edge. The first layer is applied to
/// the three blocks separately, which avoids materialising the concatenation.
fn edge_messages(
    tape: &mut Tape,
    params: &BoundParams,
    prefix: &str,
    h: Var,
    edges: &EdgeInputs,
) -> Result<Var> {
    let f = tape.value(h).dims2("edge_messages")?.1;
    let w1 = params.get(&format!("{prefix}.w1"))?;
    let rows = tape.value(w1).dims2("edge_messages")?.0;
    let w_src = tape.row_block(w1, 0, f)?;
    let w_dst = tape.row_block(w1, f, 2 * f)?;
    let w_basis = tape.row_block(w1, 2 * f, rows)?;
    let h_src = tape.matmul(h, w_src)?;
    let h_dst = tape.matmul(h, w_dst)?;
    let from_src = tape.gather_rows(h_src, edges.src.clone())?;
    let from_dst = tape.gather_rows(h_dst, edges.dst.clone())?;
    let from_basis = tape.matmul(edges.basis, w_basis)?;
    let pre = tape.add(from_src, from_dst)?;
    let pre = tape.add(pre, from_basis)?;
    let pre = tape.add_row(pre, params.get(&format!("{prefix}.b1"))?)?;
    let hidden = tape.swish(pre)?;
    let out = linear(
        tape,
        hidden,
        params.get(&format!("{prefix}.w2"))?,
        params.get(&format!("{prefix}.b2"))?,
    )?;
    tape.swish(out)
}

/// Global plex update: `h_i + Σ_j m_ji ⊙ W_e e_ji` with
/// `m_ji = MLP_m([h_j ‖ h_i ‖ e_ji])`.
pub fn global_message_pass(
    tape: &mut Tape,
    params: &BoundParams,
    layer: usize,
    h: Var,
    edges: &EdgeInputs,
    num_nodes: usize,
) -> Result<Var> {
    if edges.src.is_empty() {
        return Ok(h);
    }
    let prefix = layer_prefix(layer, Plex::Global);
    let m = edge_messages(tape, params, &format!("{prefix}.msg"), h, edges)?;
    let phi = tape.matmul(edges.basis, params.get(&format!("{prefix}.edge"))?)?;
    let weighted = tape.mul(m, phi)?;
    let agg = tape.segment_sum(weighted, edges.dst.clone(), num_nodes)?;
    tape.add(h, agg)
}

/// Local plex update. Messages are first refined with the one-hop and
/// two-hop companion terms,
/// `m'_ji = m_ji + Σ_c m_c ⊙ W_e e_c ⊙ MLP_α(a_{c,ji})`,
/// then aggregated as `h_i + Σ_j m'_ji ⊙ W_e e_ji`.
pub fn local_message_pass(
    tape: &mut Tape,
    params: &BoundParams,
    layer: usize,
    h: Var,
    edges: &EdgeInputs,
    triplets: &TripletInputs,
    num_nodes: usize,
) -> Result<Var> {
    if edges.src.is_empty() {
        return Ok(h);
    }
    let prefix = layer_prefix(layer, Plex::Local);
    let m = edge_messages(tape, params, &format!("{prefix}.msg"), h, edges)?;
    let phi = tape.matmul(edges.basis, params.get(&format!("{prefix}.edge"))?)?;
    let refined = if triplets.message.is_empty() {
        m
    } else {
        let carried = tape.mul(m, phi)?;
        let companions = tape.gather_rows(carried, triplets.companion.clone())?;
        let angle = mlp(tape, params, &format!("{prefix}.angle"), triplets.basis)?;
        let terms = tape.mul(companions, angle)?;
        let num_edges = edges.src.len();
        let update = tape.segment_sum(terms, triplets.message.clone(), num_edges)?;
        tape.add(m, update)?
    };
    let weighted = tape.mul(refined, phi)?;
    let agg = tape.segment_sum(weighted, edges.dst.clone(), num_nodes)?;
    tape.add(h, agg)
}

fn residual(tape: &mut Tape, params: &BoundParams, prefix: &str, x: Var) -> Result<Var> {
    let delta = mlp(tape, params, prefix, x)?;
    tape.add(x, delta)
}

/// Residual blocks after a message pass. Returns `(h_next, h_fuse)`: the
/// forwarding blocks produce `h_next`, the fusion blocks continue from it to
/// produce the plex's input to the fusion head.
pub fn update_block(
    tape: &mut Tape,
    params: &BoundParams,
    config: &ModelConfig,
    layer: usize,
    plex: Plex,
    h_raw: Var,
) -> Result<(Var, Var)> {
    let prefix = layer_prefix(layer, plex);
    let mut h = h_raw;
    for k in 0..config.forward_blocks {
        h = residual(tape, params, &format!("{prefix}.fwd{k}"), h)?;
    }
    let mut fuse = h;
    for k in 0..config.fusion_blocks {
        fuse = residual(tape, params, &format!("{prefix}.fuse{k}"), fuse)?;
    }
    Ok((h, fuse))
}

#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub y: Var,
    /// Per layer, the `[nodes, plexes]` attention weights when attention is used.
    pub attention: Vec<Option<Var>>,
}

/// Per layer: attention over plexes per node
/// (`softmax_m LeakyReLU(W_m h_{m,i})`), node predictions
/// `Σ_m α_{m,i} W_out_m h_{m,i}`, then the mean over nodes and layers.
pub fn fusion(
    tape: &mut Tape,
    params: &BoundParams,
    config: &ModelConfig,
    per_layer: &[Vec<(Plex, Var)>],
    num_nodes: usize,
) -> Result<FusionOutput> {
    let expected = config.ablation.plexes();
    if per_layer.len() != config.num_layers {
        return Err(Error::Config(format!(
            "fusion expects {} layers, got {}",
            config.num_layers,
            per_layer.len()
        )));
    }
    let mut layer_preds = Vec::with_capacity(per_layer.len());
    let mut attention = Vec::with_capacity(per_layer.len());
    for (layer, embeddings) in per_layer.iter().enumerate() {
        let mut ordered = Vec::with_capacity(expected.len());
        for &plex in expected {
            let h = embeddings
                .iter()
                .find(|(p, _)| *p == plex)
                .map(|(_, h)| *h)
                .ok_or(Error::MissingPlex(plex.name()))?;
            ordered.push((plex, h));
        }
        let mut outs = Vec::with_capacity(ordered.len());
        for &(plex, h) in &ordered {
            let w = params.get(&format!("{}.out", layer_prefix(layer, plex)))?;
            outs.push(tape.matmul(h, w)?);
        }
        let num_plex = ordered.len();
        let pred = if num_plex == 1 {
            attention.push(None);
            outs[0]
        } else if config.ablation == Ablation::NoFusion {
            attention.push(None);
            let mut sum = outs[0];
            for &o in &outs[1..] {
                sum = tape.add(sum, o)?;
            }
            tape.scale(sum, 1.0 / num_plex as f64)?
        } else {
            let mut logits = Vec::with_capacity(num_plex);
            for &(plex, h) in &ordered {
                let w = params.get(&format!("{}.att", layer_prefix(layer, plex)))?;
                let raw = tape.matmul(h, w)?;
                logits.push(tape.leaky_relu(raw, LEAKY_RELU_SLOPE)?);
            }
            let node_of: Rc<[usize]> = (0..num_nodes * num_plex).map(|r| r / num_plex).collect();
            let logits = tape.concat(&logits)?;
            let logits = tape.reshape(logits, vec![num_nodes * num_plex, 1])?;
            let alpha = tape.segment_softmax(logits, node_of.clone(), num_nodes)?;
            let values = tape.concat(&outs)?;
            let values = tape.reshape(values, vec![num_nodes * num_plex, 1])?;
            let weighted = tape.mul(alpha, values)?;
            attention.push(Some(tape.reshape(alpha, vec![num_nodes, num_plex])?));
            tape.segment_sum(weighted, node_of, num_nodes)?
        };
        layer_preds.push(pred);
    }
    let all = tape.concat(&layer_preds)?;
    let y = tape.mean(all)?;
    Ok(FusionOutput { y, attention })
}
