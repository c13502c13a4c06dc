//! The network: atom-type embeddings, global and local message passing with
//! residual update blocks, and an attention fusion head that regresses a
//! scalar RMSD estimate.

pub mod basis;
pub mod layers;
mod params;

use std::fmt;
use std::str::FromStr;

pub use basis::{angle_basis, rbf_expand};
pub use layers::{FusionOutput, GraphInputs};
pub use params::{init_params, param_count, param_layout, ParamSpec};

use crate::error::{Error, Result};
use crate::graph::{MultiplexGraph, DEFAULT_GLOBAL_CUTOFF, DEFAULT_LOCAL_CUTOFF};
use crate::tensor::{BoundParams, ParamStore, Tape, Tensor, Var};

/// The embedding table covers atomic numbers `1..=MAX_ATOMIC_NUMBER`.
pub const MAX_ATOMIC_NUMBER: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plex {
    Global,
    Local,
}

impl Plex {
    pub fn name(self) -> &'static str {
        match self {
            Plex::Global => "global",
            Plex::Local => "local",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Ablation {
    #[default]
    Full,
    /// Unweighted mean of plex outputs instead of attention.
    NoFusion,
    NoLocal,
    NoGlobal,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoFusion,
        Ablation::NoLocal,
        Ablation::NoGlobal,
    ];

    /// Plexes that run, in execution order.
    pub fn plexes(self) -> &'static [Plex] {
        match self {
            Ablation::Full | Ablation::NoFusion => &[Plex::Global, Plex::Local],
            Ablation::NoLocal => &[Plex::Global],
            Ablation::NoGlobal => &[Plex::Local],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoFusion => "no_fusion",
            Ablation::NoLocal => "no_local",
            Ablation::NoGlobal => "no_global",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Ablation::Full => 0,
            Ablation::NoFusion => 1,
            Ablation::NoLocal => 2,
            Ablation::NoGlobal => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Ablation::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    /// Radial basis size for global edges.
    pub n_rbf: usize,
    /// Angle harmonics for local triplets.
    pub n_shbf: usize,
    /// Radial basis size for local edges.
    pub n_srbf: usize,
    pub local_cutoff: f64,
    pub global_cutoff: f64,
    pub ablation: Ablation,
    /// Residual blocks producing the embeddings handed to the next stage.
    pub forward_blocks: usize,
    /// Further residual blocks producing the fusion-head input.
    pub fusion_blocks: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: 16,
            num_layers: 1,
            n_rbf: 16,
            n_shbf: 7,
            n_srbf: 6,
            local_cutoff: DEFAULT_LOCAL_CUTOFF,
            global_cutoff: DEFAULT_GLOBAL_CUTOFF,
            ablation: Ablation::Full,
            forward_blocks: 3,
            fusion_blocks: 6,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("n_rbf", self.n_rbf),
            ("n_shbf", self.n_shbf),
            ("n_srbf", self.n_srbf),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.local_cutoff > 0.0 && self.local_cutoff < self.global_cutoff)
            || !self.global_cutoff.is_finite()
        {
            return Err(Error::Config(format!(
                "cutoffs must satisfy 0 < local ({}) < global ({})",
                self.local_cutoff, self.global_cutoff
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hidden_dim={} layers={} n_rbf={} n_shbf={} n_srbf={} local_cutoff={} global_cutoff={} ablation={} forward_blocks={} fusion_blocks={}",
            self.hidden_dim,
            self.num_layers,
            self.n_rbf,
            self.n_shbf,
            self.n_srbf,
            self.local_cutoff,
            self.global_cutoff,
            self.ablation,
            self.forward_blocks,
            self.fusion_blocks
        )
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub y: Var,
    pub attention: Vec<Option<Var>>,
}

/// Records the full network on `tape`: embed, then per layer the global pass,
/// its update block, the local pass and its update block, then fusion.
pub fn forward(
    tape: &mut Tape,
    params: &BoundParams,
    config: &ModelConfig,
    graph: &MultiplexGraph,
) -> Result<ForwardOutput> {
    let inputs = GraphInputs::record(tape, graph, config)?;
    let n = inputs.num_nodes;
    let mut h = tape.gather_rows(params.get("embedding")?, inputs.z_index.clone())?;
    let mut per_layer = Vec::with_capacity(config.num_layers);
    for layer in 0..config.num_layers {
        let mut fused = Vec::with_capacity(2);
        for &plex in config.ablation.plexes() {
            let raw = match plex {
                Plex::Global => {
                    layers::global_message_pass(tape, params, layer, h, &inputs.global, n)?
                }
                Plex::Local => layers::local_message_pass(
                    tape,
                    params,
                    layer,
                    h,
                    &inputs.local,
                    &inputs.triplets,
                    n,
                )?,
            };
            let (next, fuse) = layers::update_block(tape, params, config, layer, plex, raw)?;
            fused.push((plex, fuse));
            h = next;
        }
        per_layer.push(fused);
    }
    let out = layers::fusion(tape, params, config, &per_layer, n)?;
    Ok(ForwardOutput {
        y: out.y,
        attention: out.attention,
    })
}

/// Predicted RMSD for one graph.
pub fn predict(config: &ModelConfig, params: &ParamStore, graph: &MultiplexGraph) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let out = forward(&mut tape, &bound, config, graph)?;
    Ok(tape.value(out.y).item())
}

/// Per-layer `[nodes, plexes]` attention weights (`None` where attention is
/// not used).
pub fn attention_weights(
    config: &ModelConfig,
    params: &ParamStore,
    graph: &MultiplexGraph,
) -> Result<Vec<Option<Tensor>>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let out = forward(&mut tape, &bound, config, graph)?;
    Ok(out
        .attention
        .iter()
        .map(|a| a.map(|v| tape.value(v).clone()))
        .collect())
}

/// Smooth L1 loss of the prediction against `label` and its gradient for
/// every parameter.
pub fn loss_and_grads(
    config: &ModelConfig,
    params: &ParamStore,
    graph: &MultiplexGraph,
    label: f64,
    beta: f64,
) -> Result<(f64, ParamStore)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true);
    let out = forward(&mut tape, &bound, config, graph)?;
    let loss = tape.smooth_l1(out.y, label, beta)?;
    let value = tape.value(loss).item();
    let mut grads = tape.backward(loss)?;
    Ok((value, params.collect_grads(&bound, &mut grads)))
}
