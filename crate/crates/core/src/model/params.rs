//! Parameter layout and initialization. Every name and shape is a function of
//! the [`ModelConfig`] alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Ablation, ModelConfig, Plex, MAX_ATOMIC_NUMBER};
use crate::error::Result;
use crate::tensor::{ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    Glorot,
    Zeros,
    Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub(crate) init: Init,
}

pub(crate) fn layer_prefix(layer: usize, plex: Plex) -> String {
    format!("l{layer}.{}", plex.name())
}

fn push_mlp(out: &mut Vec<ParamSpec>, prefix: &str, input: usize, width: usize) {
    let mut add = |suffix: &str, shape: Vec<usize>, init| {
        out.push(ParamSpec {
            name: format!("{prefix}.{suffix}"),
            shape,
            init,
        })
    };
    add("w1", vec![input, width], Init::Glorot);
    add("b1", vec![width], Init::Zeros);
    add("w2", vec![width, width], Init::Glorot);
    add("b2", vec![width], Init::Zeros);
}

/// Ordered parameter layout; initialization draws in this order.
pub fn param_layout(config: &ModelConfig) -> Vec<ParamSpec> {
    let f = config.hidden_dim;
    let mut out = vec![ParamSpec {
        name: "embedding".into(),
        shape: vec![MAX_ATOMIC_NUMBER, f],
        init: Init::Embedding,
    }];
    let plexes = config.ablation.plexes();
    let attention = config.ablation == Ablation::Full && plexes.len() > 1;
    for layer in 0..config.num_layers {
        for &plex in plexes {
            let prefix = layer_prefix(layer, plex);
            let basis = match plex {
                Plex::Global => config.n_rbf,
                Plex::Local => config.n_srbf,
            };
            push_mlp(&mut out, &format!("{prefix}.msg"), 2 * f + basis, f);
            out.push(ParamSpec {
                name: format!("{prefix}.edge"),
                shape: vec![basis, f],
                init: Init::Glorot,
            });
            if plex == Plex::Local {
                push_mlp(&mut out, &format!("{prefix}.angle"), config.n_shbf, f);
            }
            for k in 0..config.forward_blocks {
                push_mlp(&mut out, &format!("{prefix}.fwd{k}"), f, f);
            }
            for k in 0..config.fusion_blocks {
                push_mlp(&mut out, &format!("{prefix}.fuse{k}"), f, f);
            }
            if attention {
                out.push(ParamSpec {
                    name: format!("{prefix}.att"),
                    shape: vec![f, 1],
                    init: Init::Glorot,
                });
            }
            out.push(ParamSpec {
                name: format!("{prefix}.out"),
                shape: vec![f, 1],
                init: Init::Glorot,
            });
        }
    }
    out
}

/// Number of scalar parameters implied by the configuration.
pub fn param_count(config: &ModelConfig) -> usize {
    param_layout(config)
        .iter()
        .map(|p| p.shape.iter().product::<usize>())
        .sum()
}

/// Glorot-uniform weights, zero biases and `0.1 * N(0, 1)` embedding rows.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ParamStore> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for spec in param_layout(config) {
        let len: usize = spec.shape.iter().product();
        let data: Vec<f64> = match spec.init {
            Init::Zeros => vec![0.0; len],
            Init::Embedding => (0..len)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.1 * z
                })
                .collect(),
            Init::Glorot => {
                let (fan_in, fan_out) = (spec.shape[0], spec.shape[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..len).map(|_| rng.random_range(-limit..limit)).collect()
            }
        };
        store.insert(spec.name, Tensor::new(spec.shape, data)?)?;
    }
    Ok(store)
}
