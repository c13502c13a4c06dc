//! Text formats: the ranking TSV and the `key=value` metrics block.

use std::fmt::Write as _;

use super::{BandTable, GroupRanking, NearNativeMetrics, RankedModel, RankingReport};
use crate::error::{Error, Result};

const HEADER: &str = "group\tid\tscore\ttrue_rmsd\trank";

/// One row per model, groups in report order, models in rank order. Floats
/// use the shortest representation that round-trips.
pub fn format_report(report: &RankingReport) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    for g in &report.groups {
        for m in &g.models {
            writeln!(out, "{}\t{}\t{}\t{}\t{}", g.group, m.id, m.score, m.rmsd, m.rank).unwrap();
        }
    }
    out
}

pub fn parse_report(text: &str) -> Result<RankingReport> {
    let mut groups: Vec<GroupRanking> = Vec::new();
    let mut seen_header = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line.trim_end() != HEADER {
                return Err(err(format!("expected header {HEADER:?}")));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| err(format!("bad {what} {s:?}")))
        };
        let model = RankedModel {
            id: f[1].to_string(),
            score: num(f[2], "score")?,
            rmsd: num(f[3], "true_rmsd")?,
            rank: f[4].parse().map_err(|_| err(format!("bad rank {:?}", f[4])))?,
        };
        match groups.last_mut() {
            Some(g) if g.group == f[0] => {
                if model.rank != g.models.len() + 1 {
                    return Err(err(format!("rank {} out of sequence", model.rank)));
                }
                g.models.push(model);
            }
            _ => {
                if groups.iter().any(|g| g.group == f[0]) {
                    return Err(err(format!("group {:?} is not contiguous", f[0])));
                }
                if model.rank != 1 {
                    return Err(err(format!("group {:?} does not start at rank 1", f[0])));
                }
                groups.push(GroupRanking {
                    group: f[0].to_string(),
                    models: vec![model],
                });
            }
        }
    }
    if !seen_header {
        return Err(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        });
    }
    Ok(RankingReport { groups })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// Flat `key=value` summary, aggregate keys first, then per-group keys.
pub fn format_metrics(
    report: &RankingReport,
    metrics: &NearNativeMetrics,
    bands: &BandTable,
) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
    kv("threshold", metrics.threshold.to_string());
    kv("groups", metrics.groups.len().to_string());
    kv(
        "models",
        report.groups.iter().map(|g| g.models.len()).sum::<usize>().to_string(),
    );
    for (n, frac) in &metrics.top_fractions {
        kv(&format!("top{n}_fraction"), format!("{frac:.6}"));
    }
    kv("geometric_mean_rank", fmt_opt(metrics.geometric_mean_rank));
    kv(
        "groups_without_near_native",
        metrics.groups_without_near_native.to_string(),
    );
    let labels = bands.band_labels();
    for (k, n) in bands.top_ns.iter().enumerate() {
        for (label, count) in labels.iter().zip(bands.counts(k)) {
            kv(&format!("band.top{n}.{label}"), count.to_string());
        }
    }
    for (g, m) in report.groups.iter().zip(&metrics.groups) {
        let scores: Vec<f64> = g.models.iter().map(|m| m.score).collect();
        let rmsds: Vec<f64> = g.models.iter().map(|m| m.rmsd).collect();
        let p = format!("group.{}", g.group);
        kv(&format!("{p}.models"), g.models.len().to_string());
        kv(&format!("{p}.spearman"), fmt_opt(super::spearman(&scores, &rmsds)));
        kv(
            &format!("{p}.best_near_native_rank"),
            m.best_near_native_rank
                .map_or_else(|| "none".to_string(), |r| r.to_string()),
        );
        for (n, hit) in &m.top_hits {
            kv(&format!("{p}.top{n}"), u8::from(*hit).to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{near_native_metrics, rmsd_band_table, ScoredEntry};

    fn sample() -> RankingReport {
        let e = |id: &str, g: &str, score: f64, rmsd: f64| ScoredEntry {
            id: id.into(),
            group: g.into(),
            score,
            rmsd,
        };
        RankingReport::build(&[
            e("x1", "g1", 0.1 + 0.2, 1.5),
            e("x2", "g1", -3.25, 7.0),
            e("y1", "g2", 2.0, 12.5),
            e("y2", "g2", 1e-17, 4.0),
        ])
        .unwrap()
    }

    #[test]
    fn report_round_trip_is_exact() {
        let r = sample();
        let text = format_report(&r);
        assert!(text.starts_with("group\tid\tscore\ttrue_rmsd\trank\n"));
        assert_eq!(parse_report(&text).unwrap(), r);
    }

    #[test]
    fn rejects_malformed_reports() {
        assert!(parse_report("").is_err());
        assert!(parse_report("a\tb\n").is_err());
        let bad_rank = format!("{HEADER}\ng\tm\t1\t1\t2\n");
        assert!(matches!(parse_report(&bad_rank), Err(Error::Parse { line: 2, .. })));
        let split = format!("{HEADER}\ng\ta\t1\t1\t1\nh\tb\t1\t1\t1\ng\tc\t1\t1\t2\n");
        assert!(parse_report(&split).is_err());
    }

    #[test]
    fn metrics_block_keys() {
        let r = sample();
        let m = near_native_metrics(&r, 2.0, &[1, 10]).unwrap();
        let b = rmsd_band_table(&r, &[2.0, 5.0, 10.0], &[1, 10, 100]).unwrap();
        let text = format_metrics(&r, &m, &b);
        for line in [
            "threshold=2",
            "groups=2",
            "models=4",
            "top1_fraction=0.000000",
            "top10_fraction=0.500000",
            "geometric_mean_rank=2.000000",
            "groups_without_near_native=1",
            "band.top1.>10=0",
            "band.top1.5-10=1",
            "group.g1.best_near_native_rank=2",
            "group.g2.best_near_native_rank=none",
            "group.g1.spearman=-1.000000",
        ] {
            assert!(text.lines().any(|l| l == line), "missing {line} in\n{text}");
        }
    }
}
