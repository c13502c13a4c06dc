use super::{GroupRanking, RankingReport};
use crate::error::{Error, Result};

/// Å; a model is near-native when its RMSD is strictly below this.
pub const NEAR_NATIVE_THRESHOLD: f64 = 2.0;
pub const DEFAULT_TOP_NS: [usize; 2] = [1, 10];
pub const DEFAULT_BAND_THRESHOLDS: [f64; 3] = [2.0, 5.0, 10.0];
pub const DEFAULT_BAND_TOP_NS: [usize; 3] = [1, 10, 100];

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub group: String,
    /// Per N: whether the N best-scoring models include a near-native one.
    pub top_hits: Vec<(usize, bool)>,
    /// Rank of the best-scoring near-native model, if any exists.
    pub best_near_native_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearNativeMetrics {
    pub threshold: f64,
    pub groups: Vec<GroupMetrics>,
    /// Per N: fraction of all groups with a near-native model in the top N.
    pub top_fractions: Vec<(usize, f64)>,
    /// Over groups that have a near-native model; `None` when none do.
    pub geometric_mean_rank: Option<f64>,
    pub groups_without_near_native: usize,
}

fn non_empty(g: &GroupRanking) -> Result<()> {
    if g.models.is_empty() {
        return Err(Error::EmptyGroup(g.group.clone()));
    }
    Ok(())
}

pub fn near_native_metrics(
    report: &RankingReport,
    threshold: f64,
    top_ns: &[usize],
) -> Result<NearNativeMetrics> {
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!("threshold must be positive, got {threshold}")));
    }
    let mut groups = Vec::with_capacity(report.groups.len());
    for g in &report.groups {
        non_empty(g)?;
        let best = g
            .models
            .iter()
            .filter(|m| m.rmsd < threshold)
            .map(|m| m.rank)
            .min();
        groups.push(GroupMetrics {
            group: g.group.clone(),
            top_hits: top_ns
                .iter()
                .map(|&n| (n, best.is_some_and(|r| r <= n)))
                .collect(),
            best_near_native_rank: best,
        });
    }
    let total = groups.len();
    let top_fractions = top_ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let hits = groups.iter().filter(|g| g.top_hits[k].1).count();
            let frac = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
            (n, frac)
        })
        .collect();
    let ranks: Vec<f64> = groups
        .iter()
        .filter_map(|g| g.best_near_native_rank)
        .map(|r| r as f64)
        .collect();
    let geometric_mean_rank = (!ranks.is_empty())
        .then(|| (ranks.iter().map(|r| r.ln()).sum::<f64>() / ranks.len() as f64).exp());
    Ok(NearNativeMetrics {
        threshold,
        groups_without_near_native: total - ranks.len(),
        groups,
        top_fractions,
        geometric_mean_rank,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub group: String,
    /// Per N: the lowest RMSD among the N best-scoring models and its band.
    pub cells: Vec<(usize, f64, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub thresholds: Vec<f64>,
    pub top_ns: Vec<usize>,
    pub rows: Vec<BandRow>,
}

impl BandTable {
    /// Band index = number of thresholds at or below the RMSD.
    pub fn band_of(thresholds: &[f64], rmsd: f64) -> usize {
        thresholds.iter().filter(|&&t| t <= rmsd).count()
    }

    /// Labels such as `<2`, `2-5`, `5-10`, `>10`.
    pub fn band_labels(&self) -> Vec<String> {
        let t = &self.thresholds;
        let mut out = Vec::with_capacity(t.len() + 1);
        if let Some(first) = t.first() {
            out.push(format!("<{first}"));
        }
        for w in t.windows(2) {
            out.push(format!("{}-{}", w[0], w[1]));
        }
        match t.last() {
            Some(last) => out.push(format!(">{last}")),
            None => out.push("all".into()),
        }
        out
    }

    /// Number of groups per band, for the `k`-th N.
    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut out = vec![0; self.thresholds.len() + 1];
        for row in &self.rows {
            out[row.cells[k].2] += 1;
        }
        out
    }
}

pub fn rmsd_band_table(report: &RankingReport, thresholds: &[f64], top_ns: &[usize]) -> Result<BandTable> {
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("band thresholds must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(report.groups.len());
    for g in &report.groups {
        non_empty(g)?;
        let cells = top_ns
            .iter()
            .map(|&n| {
                let min = g
                    .models
                    .iter()
                    .take(n.max(1))
                    .map(|m| m.rmsd)
                    .fold(f64::INFINITY, f64::min);
                (n, min, BandTable::band_of(thresholds, min))
            })
            .collect();
        rows.push(BandRow {
            group: g.group.clone(),
            cells,
        });
    }
    Ok(BandTable {
        thresholds: thresholds.to_vec(),
        top_ns: top_ns.to_vec(),
        rows,
    })
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` for fewer
/// than two points or a constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ScoredEntry;
    use proptest::prelude::*;

    fn report(groups: &[(&str, &[(f64, f64)])]) -> RankingReport {
        let entries: Vec<ScoredEntry> = groups
            .iter()
            .flat_map(|(g, models)| {
                models.iter().enumerate().map(move |(i, &(score, rmsd))| ScoredEntry {
                    id: format!("{g}_{i}"),
                    group: g.to_string(),
                    score,
                    rmsd,
                })
            })
            .collect();
        RankingReport::build(&entries).unwrap()
    }

    // Three groups: best near-native at rank 1, at rank 4, and none at all.
    fn fixture() -> RankingReport {
        report(&[
            ("a", &[(0.1, 1.2), (0.2, 6.0), (0.3, 3.0)]),
            ("b", &[(0.5, 8.0), (0.1, 2.0), (0.3, 12.0), (0.2, 4.5), (0.9, 1.9), (0.4, 0.7)]),
            ("c", &[(1.0, 2.5), (2.0, 11.0)]),
        ])
    }

    #[test]
    fn fixture_near_native() {
        let m = near_native_metrics(&fixture(), NEAR_NATIVE_THRESHOLD, &DEFAULT_TOP_NS).unwrap();
        let ranks: Vec<Option<usize>> = m.groups.iter().map(|g| g.best_near_native_rank).collect();
        // b by score: 2.0, 4.5, 12.0, 0.7, 8.0, 1.9 -> first < 2 at rank 4
        assert_eq!(ranks, [Some(1), Some(4), None]);
        assert!((m.geometric_mean_rank.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(m.groups_without_near_native, 1);
        assert_eq!(m.top_fractions, vec![(1, 1.0 / 3.0), (10, 2.0 / 3.0)]);
        assert_eq!(m.groups[0].top_hits, vec![(1, true), (10, true)]);
        assert_eq!(m.groups[1].top_hits, vec![(1, false), (10, true)]);
    }

    #[test]
    fn threshold_is_strict() {
        let r = report(&[("g", &[(0.0, 2.0), (1.0, 1.99)])]);
        let m = near_native_metrics(&r, 2.0, &[1]).unwrap();
        assert_eq!(m.groups[0].best_near_native_rank, Some(2));
        assert_eq!(m.top_fractions, vec![(1, 0.0)]);
    }

    #[test]
    fn fixture_bands() {
        let t = rmsd_band_table(&fixture(), &DEFAULT_BAND_THRESHOLDS, &DEFAULT_BAND_TOP_NS).unwrap();
        assert_eq!(t.band_labels(), ["<2", "2-5", "5-10", ">10"]);
        let cells: Vec<Vec<(f64, usize)>> = t
            .rows
            .iter()
            .map(|r| r.cells.iter().map(|c| (c.1, c.2)).collect())
            .collect();
        assert_eq!(cells[0], [(1.2, 0), (1.2, 0), (1.2, 0)]);
        assert_eq!(cells[1], [(2.0, 1), (0.7, 0), (0.7, 0)]);
        assert_eq!(cells[2], [(2.5, 1), (2.5, 1), (2.5, 1)]);
        assert_eq!(t.counts(0), [1, 2, 0, 0]);
    }

    #[test]
    fn band_lookups() {
        let best_first = report(&[("g", &[(0.0, 1.0), (1.0, 6.0), (2.0, 12.0)])]);
        let t = rmsd_band_table(&best_first, &DEFAULT_BAND_THRESHOLDS, &[1]).unwrap();
        assert_eq!(t.rows[0].cells[0].2, 0);
        let worst_first = report(&[("g", &[(0.0, 12.0), (1.0, 6.0), (2.0, 1.0)])]);
        let t = rmsd_band_table(&worst_first, &DEFAULT_BAND_THRESHOLDS, &[1, 100]).unwrap();
        assert_eq!(t.rows[0].cells[0].2, 3);
        assert_eq!(t.rows[0].cells[1].2, 0);
        for (rmsd, band) in [(1.999, 0), (2.0, 1), (5.0, 2), (10.0, 3), (9.99, 2)] {
            assert_eq!(BandTable::band_of(&DEFAULT_BAND_THRESHOLDS, rmsd), band, "{rmsd}");
        }
    }

    #[test]
    fn empty_group_is_an_error() {
        let r = RankingReport {
            groups: vec![GroupRanking {
                group: "e".into(),
                models: vec![],
            }],
        };
        assert!(matches!(near_native_metrics(&r, 2.0, &[1]), Err(Error::EmptyGroup(_))));
        assert!(matches!(rmsd_band_table(&r, &[2.0], &[1]), Err(Error::EmptyGroup(_))));
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        // ties: ranks (1.5, 1.5, 3) vs (1, 2, 3)
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    /// From-scratch recomputation: sort indices by (score, input position).
    fn brute_force(
        groups: &[Vec<(f64, f64)>],
        threshold: f64,
    ) -> (Vec<Option<usize>>, f64, f64, Option<f64>) {
        let mut best = Vec::new();
        for g in groups {
            let mut order: Vec<usize> = (0..g.len()).collect();
            order.sort_by(|&i, &j| g[i].0.partial_cmp(&g[j].0).unwrap().then(i.cmp(&j)));
            best.push(order.iter().position(|&i| g[i].1 < threshold).map(|p| p + 1));
        }
        let n = groups.len() as f64;
        let top1 = best.iter().filter(|b| **b == Some(1)).count() as f64 / n;
        let top10 = best.iter().filter(|b| b.is_some_and(|r| r <= 10)).count() as f64 / n;
        let found: Vec<f64> = best.iter().flatten().map(|&r| r as f64).collect();
        let gm = (!found.is_empty()).then(|| found.iter().product::<f64>().powf(1.0 / found.len() as f64));
        (best, top1, top10, gm)
    }

    fn groups_strategy() -> impl Strategy<Value = Vec<Vec<(f64, f64)>>> {
        prop::collection::vec(
            prop::collection::vec((0u32..50, 0.0f64..15.0), 1..30),
            1..6,
        )
        .prop_map(|gs| {
            gs.into_iter()
                .map(|g| g.into_iter().map(|(s, r)| (s as f64 * 0.25, r)).collect())
                .collect()
        })
    }

    fn to_report(groups: &[Vec<(f64, f64)>]) -> RankingReport {
        let entries: Vec<ScoredEntry> = groups
            .iter()
            .enumerate()
            .flat_map(|(gi, g)| {
                g.iter().enumerate().map(move |(i, &(score, rmsd))| ScoredEntry {
                    id: format!("m{i}"),
                    group: format!("g{gi}"),
                    score,
                    rmsd,
                })
            })
            .collect();
        RankingReport::build(&entries).unwrap()
    }

    proptest! {
        #[test]
        fn metrics_match_brute_force(groups in groups_strategy()) {
            let m = near_native_metrics(&to_report(&groups), 2.0, &DEFAULT_TOP_NS).unwrap();
            let (best, top1, top10, gm) = brute_force(&groups, 2.0);
            let got: Vec<Option<usize>> = m.groups.iter().map(|g| g.best_near_native_rank).collect();
            prop_assert_eq!(got, best);
            prop_assert!((m.top_fractions[0].1 - top1).abs() < 1e-12);
            prop_assert!((m.top_fractions[1].1 - top10).abs() < 1e-12);
            match (m.geometric_mean_rank, gm) {
                (Some(a), Some(b)) => {
                    prop_assert!((a - b).abs() < 1e-9 * b);
                    prop_assert!(a >= 1.0 - 1e-12);
                }
                (None, None) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }

        #[test]
        fn metrics_ignore_monotone_transforms(groups in groups_strategy()) {
            let moved: Vec<Vec<(f64, f64)>> = groups
                .iter()
                .map(|g| g.iter().map(|&(s, r)| ((s * 0.7).exp() + 3.0, r)).collect())
                .collect();
            let a = to_report(&groups);
            let b = to_report(&moved);
            prop_assert_eq!(
                near_native_metrics(&a, 2.0, &DEFAULT_TOP_NS).unwrap(),
                near_native_metrics(&b, 2.0, &DEFAULT_TOP_NS).unwrap()
            );
            prop_assert_eq!(
                rmsd_band_table(&a, &DEFAULT_BAND_THRESHOLDS, &DEFAULT_BAND_TOP_NS).unwrap(),
                rmsd_band_table(&b, &DEFAULT_BAND_THRESHOLDS, &DEFAULT_BAND_TOP_NS).unwrap()
            );
        }

        #[test]
        fn min_rmsd_shrinks_with_n(groups in groups_strategy()) {
            let t = rmsd_band_table(&to_report(&groups), &DEFAULT_BAND_THRESHOLDS, &[1, 3, 10, 100]).unwrap();
            for row in &t.rows {
                for w in row.cells.windows(2) {
                    prop_assert!(w[0].1 >= w[1].1);
                }
            }
        }
    }
}
