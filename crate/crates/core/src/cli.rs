//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{
    format_metrics, format_report, near_native_metrics, parse_report, rmsd_band_table,
    score_manifest, RankingReport, ScoredEntry, DEFAULT_BAND_THRESHOLDS, DEFAULT_BAND_TOP_NS,
    DEFAULT_TOP_NS,
};
use crate::geom::{filter_heavy_cno, read_structure, write_xyz};
use crate::graph::{build_multiplex, write_graph, DEFAULT_GLOBAL_CUTOFF, DEFAULT_LOCAL_CUTOFF};
use crate::model::{predict, Ablation, ModelConfig};
use crate::train::manifest::format_manifest;
use crate::train::{
    load_checkpoint, load_graph, load_manifest, save_checkpoint, synth_decoys, train,
    DatasetManifest, ManifestEntry, TrainConfig,
};

#[derive(Debug, Parser)]
#[command(name = "paxnet", version, about = "Score RNA 3D structural models")]
pub struct Cli {
    /// Worker threads for graph building, training and scoring.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the two-plex graph of a structure and write the binary cache.
    BuildGraph(BuildGraphArgs),
    /// Write Gaussian-noise decoys of a native structure plus a manifest.
    Synth(SynthArgs),
    /// Train a model and write the best checkpoint.
    Train(TrainArgs),
    /// Print the predicted RMSD of each input structure.
    Score(ScoreArgs),
    /// Score a manifest and write the per-group ranking report.
    Rank(RankArgs),
    /// Compute near-native metrics from a ranking report.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    /// Structure file (.pdb, .ent or .xyz).
    #[arg(long)]
    pub input: PathBuf,
    /// Local plex cutoff, Å.
    #[arg(long, default_value_t = DEFAULT_LOCAL_CUTOFF)]
    pub local_cutoff: f64,
    /// Global plex cutoff, Å.
    #[arg(long, default_value_t = DEFAULT_GLOBAL_CUTOFF)]
    pub global_cutoff: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Native structure; only its C/N/O atoms are kept.
    #[arg(long)]
    pub native: PathBuf,
    /// Comma-separated noise levels, Å.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigmas: Vec<f64>,
    /// Decoys per sigma.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Manifest to write; entries are relative to its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Group id; defaults to the native's file stem.
    #[arg(long)]
    pub group: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train_manifest: PathBuf,
    /// Early stopping watches this set's loss, or the training loss without it.
    #[arg(long)]
    pub val_manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 25)]
    pub patience: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One of full, no_fusion, no_local, no_global.
    #[arg(long, default_value_t = Ablation::Full)]
    pub ablation: Ablation,
    #[arg(long, default_value_t = DEFAULT_LOCAL_CUTOFF)]
    pub local_cutoff: f64,
    #[arg(long, default_value_t = DEFAULT_GLOBAL_CUTOFF)]
    pub global_cutoff: f64,
    /// Residual blocks on the forwarding branch of each update block.
    #[arg(long, default_value_t = ModelConfig::default().forward_blocks)]
    pub forward_blocks: usize,
    /// Residual blocks on the fusion branch of each update block.
    #[arg(long, default_value_t = ModelConfig::default().fusion_blocks)]
    pub fusion_blocks: usize,
    /// Output checkpoint path.
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Structure files; may be repeated.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report TSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// Near-native RMSD threshold, Å.
    #[arg(long, default_value_t = 2.0)]
    pub threshold: f64,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn build_graph(args: &BuildGraphArgs, out: &mut dyn Write) -> Result<()> {
    let s = filter_heavy_cno(&read_structure(&args.input)?)?;
    let g = build_multiplex(&s, args.local_cutoff, args.global_cutoff)?;
    write_file(&args.out, &write_graph(&g))?;
    writeln!(
        out,
        "nodes={} global_edges={} local_edges={} angles={}",
        g.num_nodes(),
        g.global_edges.len(),
        g.local_edges.len(),
        g.angles.len()
    )
    .map_err(io_err)
}

fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let native = filter_heavy_cno(&read_structure(&args.native)?)?;
    let group = match &args.group {
        Some(g) => g.clone(),
        None => args
            .native
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "native".into()),
    };
    if group.is_empty() || group.contains(['\t', '\n']) {
        return Err(Error::Config(format!("invalid group id {group:?}")));
    }
    let decoys = synth_decoys(&native, &args.sigmas, args.count, args.seed)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let mut manifest = DatasetManifest::default();
    for (i, (mut decoy, label)) in decoys.into_iter().enumerate() {
        let path = args.out_dir.join(format!("{group}_{i:05}.xyz"));
        decoy.id = format!("{group}_{i:05}");
        write_file(&path, write_xyz(&decoy).as_bytes())?;
        manifest.entries.push(ManifestEntry {
            path,
            label,
            group: group.clone(),
        });
    }
    let base = args.manifest.parent().unwrap_or(Path::new(""));
    let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
    let text = relative_manifest(&manifest, base)?;
    write_file(&args.manifest, text.as_bytes())?;
    writeln!(out, "wrote {} decoys to {}", manifest.len(), args.out_dir.display()).map_err(io_err)
}

/// Manifest text whose paths resolve from `base`.
fn relative_manifest(manifest: &DatasetManifest, base: &Path) -> Result<String> {
    let abs = |p: &Path| -> Result<PathBuf> {
        std::path::absolute(p).map_err(|e| Error::io(p, e))
    };
    let base_abs = abs(base)?;
    let mut rel = manifest.clone();
    for e in &mut rel.entries {
        let target = abs(&e.path)?;
        e.path = match target.strip_prefix(&base_abs) {
            Ok(r) => r.to_path_buf(),
            Err(_) => target,
        };
    }
    Ok(format_manifest(&rel, Path::new("")))
}

fn train_cmd(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let config = TrainConfig {
        batch_size: args.batch_size,
        learning_rate: args.lr,
        max_epochs: args.epochs,
        patience: args.patience,
        seed: args.seed,
        model: ModelConfig {
            hidden_dim: args.hidden_dim,
            num_layers: args.layers,
            ablation: args.ablation,
            local_cutoff: args.local_cutoff,
            global_cutoff: args.global_cutoff,
            forward_blocks: args.forward_blocks,
            fusion_blocks: args.fusion_blocks,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    config.validate()?;
    writeln!(
        err,
        "model: {} parameters={}",
        config.model,
        crate::model::param_count(&config.model)
    )
    .map_err(io_err)?;
    let train_set = load_manifest(&args.train_manifest)?;
    let val_set = args.val_manifest.as_deref().map(load_manifest).transpose()?;
    let mut write_err = None;
    let outcome = train(&train_set, val_set.as_ref(), &config, |r| {
        let val = r.val_loss.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        if let Err(e) = writeln!(out, "{}\t{:.6}\t{}", r.epoch, r.train_loss, val) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(io_err(e));
    }
    save_checkpoint(&outcome.checkpoint, &args.checkpoint)?;
    writeln!(
        err,
        "best epoch {} (loss {:.6}), checkpoint {}",
        outcome.checkpoint.meta.epoch,
        outcome.checkpoint.meta.best_val_loss,
        args.checkpoint.display()
    )
    .map_err(io_err)
}

fn score(args: &ScoreArgs, out: &mut dyn Write) -> Result<()> {
    use rayon::prelude::*;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let preds = args
        .input
        .par_iter()
        .map(|p| {
            load_graph(p, &ckpt.config)
                .and_then(|g| predict(&ckpt.config, &ckpt.params, &g))
                .map_err(|e| e.in_entry(p.display().to_string()))
        })
        .collect::<Vec<_>>();
    for (path, pred) in args.input.iter().zip(preds) {
        writeln!(out, "{}\t{}", path.display(), pred?).map_err(io_err)?;
    }
    Ok(())
}

fn rank(args: &RankArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let manifest = load_manifest(&args.manifest)?;
    let scores = score_manifest(&manifest, &ckpt)?;
    let base = args.manifest.parent().unwrap_or(Path::new(""));
    let entries: Vec<ScoredEntry> = manifest
        .entries
        .iter()
        .zip(scores)
        .map(|(e, score)| ScoredEntry {
            id: e.path.strip_prefix(base).unwrap_or(&e.path).display().to_string(),
            group: e.group.clone(),
            score,
            rmsd: e.label,
        })
        .collect();
    let report = RankingReport::build(&entries)?;
    write_file(&args.out, format_report(&report).as_bytes())?;
    writeln!(
        out,
        "ranked {} models in {} groups to {}",
        entries.len(),
        report.groups.len(),
        args.out.display()
    )
    .map_err(io_err)
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.report).map_err(|e| Error::io(&args.report, e))?;
    let report = parse_report(&text)?;
    let metrics = near_native_metrics(&report, args.threshold, &DEFAULT_TOP_NS)?;
    let bands = rmsd_band_table(&report, &DEFAULT_BAND_THRESHOLDS, &DEFAULT_BAND_TOP_NS)?;
    out.write_all(format_metrics(&report, &metrics, &bands).as_bytes())
        .map_err(io_err)
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    match &cli.command {
        Command::BuildGraph(a) => build_graph(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Train(a) => train_cmd(a, out, err),
        Command::Score(a) => score(a, out),
        Command::Rank(a) => rank(a, out),
        Command::Eval(a) => eval(a, out),
    }
}

/// Runs the CLI and returns the process exit code: 0 on success, 2 on usage
/// errors, 1 on any other failure.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let _ = writeln!(err, "config: {cli:?}");
    let result = match cli.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(&cli, out, err))),
        None => dispatch(&cli, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let _ = writeln!(err, "  caused by: {s}");
                source = s.source();
            }
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("paxnet").chain(args.iter().copied()), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = run_capture(&["frobnicate"]);
        assert_eq!(code, 2);
        assert!(err.contains("frobnicate"));
    }

    #[test]
    fn missing_flag_is_usage_error() {
        assert_eq!(run_capture(&["score", "--checkpoint", "c.bin"]).0, 2);
        assert_eq!(run_capture(&["train", "--bogus"]).0, 2);
    }

    #[test]
    fn help_succeeds_everywhere() {
        for sub in ["build-graph", "synth", "train", "score", "rank", "eval"] {
            let (code, out, _) = run_capture(&[sub, "--help"]);
            assert_eq!(code, 0, "{sub}");
            assert!(out.contains("--"), "{sub}");
        }
        let (code, out, _) = run_capture(&["train", "--help"]);
        assert_eq!(code, 0);
        for flag in [
            "--train-manifest",
            "--val-manifest",
            "--epochs",
            "--patience",
            "--batch-size",
            "--lr",
            "--hidden-dim",
            "--layers",
            "--seed",
            "--ablation",
            "--checkpoint",
            "--threads",
        ] {
            assert!(out.contains(flag), "{flag}");
        }
    }

    #[test]
    fn domain_error_exits_one() {
        let (code, _, err) = run_capture(&["eval", "--report", "/nonexistent/report.tsv"]);
        assert_eq!(code, 1);
        assert!(err.contains("/nonexistent/report.tsv"));
    }

    #[test]
    fn defaults_follow_reference_settings() {
        let cli = Cli::try_parse_from(["paxnet", "train", "--train-manifest", "m", "--checkpoint", "c"])
            .unwrap();
        let Command::Train(t) = cli.command else {
            panic!("expected train");
        };
        assert_eq!((t.batch_size, t.lr, t.hidden_dim, t.layers), (8, 1e-4, 16, 1));
        assert_eq!((t.local_cutoff, t.global_cutoff), (2.6, 20.0));
        assert_eq!(t.ablation, Ablation::Full);
        assert_eq!((t.forward_blocks, t.fusion_blocks), (3, 6));
    }
}
