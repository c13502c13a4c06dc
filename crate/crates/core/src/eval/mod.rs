//! Scoring, per-group ranking and near-native statistics.

mod metrics;
mod report;

pub use metrics::{
    near_native_metrics, rmsd_band_table, spearman, BandRow, BandTable, GroupMetrics,
    NearNativeMetrics, DEFAULT_BAND_THRESHOLDS, DEFAULT_BAND_TOP_NS, DEFAULT_TOP_NS,
    NEAR_NATIVE_THRESHOLD,
};
pub use report::{format_metrics, format_report, parse_report};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::MultiplexGraph;
use crate::model::predict;
use crate::train::{load_graph, Checkpoint, DatasetManifest};

/// One scored structural model.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedModel {
    pub id: String,
    pub score: f64,
    /// Å
    pub rmsd: f64,
    /// 1-based position by ascending score.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRanking {
    pub group: String,
    /// Ordered by rank.
    pub models: Vec<RankedModel>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankingReport {
    pub groups: Vec<GroupRanking>,
}

/// Input to [`RankingReport::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEntry {
    pub id: String,
    pub group: String,
    pub score: f64,
    pub rmsd: f64,
}

impl RankingReport {
    /// Groups appear in order of first occurrence. Within a group models are
    /// sorted by ascending score; equal scores keep input order.
    pub fn build(entries: &[ScoredEntry]) -> Result<Self> {
        let mut groups: Vec<GroupRanking> = Vec::new();
        for e in entries {
            if !e.score.is_finite() {
                return Err(Error::NonFinite { op: "score" });
            }
            let idx = match groups.iter().position(|g| g.group == e.group) {
                Some(i) => i,
                None => {
                    groups.push(GroupRanking {
                        group: e.group.clone(),
                        models: Vec::new(),
                    });
                    groups.len() - 1
                }
            };
            groups[idx].models.push(RankedModel {
                id: e.id.clone(),
                score: e.score,
                rmsd: e.rmsd,
                rank: 0,
            });
        }
        for g in &mut groups {
            g.models.sort_by(|a, b| a.score.total_cmp(&b.score));
            for (i, m) in g.models.iter_mut().enumerate() {
                m.rank = i + 1;
            }
        }
        Ok(RankingReport { groups })
    }
}

pub fn score_graphs(checkpoint: &Checkpoint, graphs: &[MultiplexGraph]) -> Result<Vec<f64>> {
    graphs
        .par_iter()
        .map(|g| predict(&checkpoint.config, &checkpoint.params, g))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Predicted RMSD per manifest entry, in manifest order.
pub fn score_manifest(manifest: &DatasetManifest, checkpoint: &Checkpoint) -> Result<Vec<f64>> {
    let config = &checkpoint.config;
    manifest
        .entries
        .par_iter()
        .map(|e| {
            load_graph(&e.path, config)
                .and_then(|g| predict(config, &checkpoint.params, &g))
                .map_err(|err| err.in_entry(e.path.display().to_string()))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}
