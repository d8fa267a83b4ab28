use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gplp_core::checkpoint::{load_checkpoint, save_checkpoint};
use gplp_core::ingest::{self, EdgeList};
use gplp_core::knockout::{degradation_report, write_degradation_tsv, KnockoutConfig};
use gplp_core::metrics::{dual_class_report, pr_curve, roc_curve, write_curve};
use gplp_core::synth::BlockModel;
use gplp_core::train::{self, EpochRecord};
use gplp_core::{
    EdgeRecord, Error, InteractionMatrix, MetricsReport, ModelConfig, Rebalance, Role, SplitSpec, TrainConfig,
};

use crate::args::{
    EvaluateArgs, KnockoutArgs, OnOff, PredictArgs, ReportArgs, ReportKind, RoleArg, SynthArgs, TrainArgs,
};
use crate::UsageError;

fn read_edges(path: &Path) -> Result<EdgeList> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    ingest::parse_edge_list(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// A file when a path is given, stdout otherwise.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))
}

/// `path` with `suffix` appended to its file name.
fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `run.metrics.tsv` -> `run.metrics.fold2.tsv`
fn fold_path(path: &Path, i: usize) -> PathBuf {
    match path.extension() {
        Some(ext) => {
            let mut name = path.file_stem().unwrap_or_default().to_owned();
            name.push(format!(".fold{i}."));
            name.push(ext);
            path.with_file_name(name)
        }
        None => suffixed(path, &format!(".fold{i}")),
    }
}

fn model_config(a: &TrainArgs) -> ModelConfig {
    ModelConfig {
        features: a.features.into(),
        hidden_dim: a.hidden as usize,
        num_layers: a.layers,
        readout: a.readout.into(),
        ..Default::default()
    }
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        lr: a.lr,
        batch_size: a.batch as usize,
        epochs: a.epochs,
        seed: a.split.seed,
        eval_every: a.eval_every,
        rebalance: if a.rebalance == OnOff::On { Rebalance::Upsample } else { Rebalance::Off },
        ..Default::default()
    }
}

fn has_both_classes(records: &[EdgeRecord]) -> bool {
    records.iter().any(|r| r.label == 1) && records.iter().any(|r| r.label == 0)
}

#[derive(Default)]
struct Outputs {
    ckpt: Option<PathBuf>,
    history: Option<PathBuf>,
    metrics: Option<PathBuf>,
}

impl Outputs {
    fn for_train(a: &TrainArgs) -> Self {
        Outputs {
            ckpt: Some(a.out.clone()),
            history: Some(a.history.clone().unwrap_or_else(|| suffixed(&a.out, ".history.tsv"))),
            metrics: Some(a.metrics.clone().unwrap_or_else(|| suffixed(&a.out, ".metrics.tsv"))),
        }
    }

    fn fold(&self, i: usize) -> Self {
        Outputs {
            ckpt: self.ckpt.as_deref().map(|p| fold_path(p, i)),
            history: self.history.as_deref().map(|p| fold_path(p, i)),
            metrics: self.metrics.as_deref().map(|p| fold_path(p, i)),
        }
    }
}

/// One training run on `train`, scored on `test`.
fn train_once(
    a: &TrainArgs,
    edges: &EdgeList,
    train_set: &[EdgeRecord],
    test: &[EdgeRecord],
    knock: Option<&KnockoutConfig>,
    out: &Outputs,
    tag: &str,
) -> Result<Option<MetricsReport>> {
    let matrix = InteractionMatrix::build(edges.num_attackers, edges.num_targets, train_set)?;
    let quiet = a.quiet;
    let mut progress = |r: &EpochRecord| {
        if let (false, Some((auroc, aupr))) = (quiet, r.test) {
            eprintln!("{tag}epoch {} loss {:.4} auroc {auroc:.4} aupr {aupr:.4}", r.epoch + 1, r.train_loss);
        }
    };
    let (params, history) =
        train::fit_with(&matrix, train_set, test, &model_config(a), &train_config(a), knock, &mut progress)?;
    if let Some(p) = &out.ckpt {
        save_checkpoint(&params, p).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &out.history {
        write_with(p, |w| history.write_tsv(w))?;
    }
    if !has_both_classes(test) {
        eprintln!("{tag}warning: test records lack one class; no metrics written");
        return Ok(None);
    }
    let report = train::evaluate(&params, &matrix, test)?;
    if let Some(p) = &out.metrics {
        write_with(p, |w| report.write_tsv(w))?;
    }
    Ok(Some(report))
}

/// Single split or k-fold run; returns the (mean) test report.
fn train_run(a: &TrainArgs, knock: Option<&KnockoutConfig>, out: &Outputs) -> Result<Option<MetricsReport>> {
    let edges = read_edges(&a.edges)?;
    let Some(k) = a.kfold else {
        let (train_set, test) = ingest::split(&edges.records, SplitSpec::new(a.split.split, a.split.seed))?;
        return train_once(a, &edges, &train_set, &test, knock, out, "");
    };
    let folds = ingest::kfold(&edges.records, k as usize, a.split.seed)?;
    let mut reports = Vec::new();
    for (i, fold) in folds.iter().enumerate() {
        let tag = format!("[fold {}/{}] ", i + 1, k);
        let r = train_once(a, &edges, &fold.train, &fold.validation, knock, &out.fold(i + 1), &tag)?;
        reports.extend(r);
    }
    let mean = MetricsReport::mean(&reports);
    if let (Some(m), Some(p)) = (&mean, &out.metrics) {
        write_with(p, |w| m.write_tsv(w))?;
    }
    Ok(mean)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    if let Some(r) = train_run(a, None, &Outputs::for_train(a))? {
        println!("auroc\t{}\naupr\t{}", r.auroc_harmonic, r.aupr_harmonic);
    }
    Ok(())
}

pub fn knockout_train(a: &KnockoutArgs) -> Result<()> {
    if a.ko_severity.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
        return Err(UsageError("--ko-severity must be a finite value >= 0".into()).into());
    }
    let cfg = KnockoutConfig {
        seed: a.ko_seed,
        scope: a.ko_scope.into(),
        allow_empty: a.ko_allow_empty,
        severity: a.ko_severity,
        mode: a.ko_mode.into(),
    };
    let clean = match &a.baseline {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(MetricsReport::read_tsv(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))?)
        }
        None => train_run(&a.train, None, &Outputs::default())?,
    };
    let outputs = Outputs::for_train(&a.train);
    let degraded = train_run(&a.train, Some(&cfg), &outputs)?;
    let (Some(clean), Some(degraded)) = (clean, degraded) else {
        return Err(Error::SingleClass).context("no test metrics to compare");
    };
    let rows = degradation_report(&clean, &degraded);
    let path = a.degradation.clone().unwrap_or_else(|| suffixed(&a.train.out, ".degradation.tsv"));
    write_with(&path, |w| write_degradation_tsv(w, &rows))?;
    write_degradation_tsv(io::stdout().lock(), &rows)?;
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let params = load_checkpoint(&a.ckpt).with_context(|| format!("reading {}", a.ckpt.display()))?;
    let edges = read_edges(&a.edges)?;
    let (topology, test) = match &a.test {
        Some(p) => (edges.records, read_edges(p)?.records),
        None => ingest::split(&edges.records, SplitSpec::new(a.split.split, a.split.seed))?,
    };
    let matrix = InteractionMatrix::build(edges.num_attackers, edges.num_targets, &topology)?;
    let scored = train::score_records(&params, &matrix, &test)?;
    let report = dual_class_report(&scored)?;
    let mut w = output(a.out.as_deref())?;
    report.write_tsv(&mut w)?;
    w.flush()?;
    if let Some(p) = &a.roc {
        let pts = roc_curve(&scored)?;
        write_with(p, |w| write_curve(w, ("fpr", "tpr"), &pts))?;
    }
    if let Some(p) = &a.pr {
        let pts = pr_curve(&scored)?;
        write_with(p, |w| write_curve(w, ("recall", "precision"), &pts))?;
    }
    Ok(())
}

/// `attacker<TAB>target` lines; `#` comments and blank lines are skipped.
fn parse_pairs<R: BufRead>(r: R) -> gplp_core::Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::Parse { line: i + 1, reason };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(bad(format!("expected 2 tab-separated fields, found {}", fields.len())));
        }
        let idx = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(format!("bad index {s:?}")));
        pairs.push((idx(fields[0])?, idx(fields[1])?));
    }
    Ok(pairs)
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let params = load_checkpoint(&a.ckpt).with_context(|| format!("reading {}", a.ckpt.display()))?;
    let edges = read_edges(&a.edges)?;
    let f = File::open(&a.pairs).with_context(|| format!("opening {}", a.pairs.display()))?;
    let pairs = parse_pairs(BufReader::new(f)).with_context(|| format!("reading {}", a.pairs.display()))?;
    let matrix = InteractionMatrix::build(edges.num_attackers, edges.num_targets, &edges.records)?;
    let scores = train::score_pairs(&params, &matrix, &pairs)?;
    let mut w = output(a.out.as_deref())?;
    for ((at, t), p) in pairs.iter().zip(scores) {
        writeln!(w, "{at}\t{t}\t{p}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    match &a.kind {
        ReportKind::Degrees { edges, role, out } => {
            let e = read_edges(edges)?;
            let m = InteractionMatrix::build(e.num_attackers, e.num_targets, &e.records)?;
            let role = match role {
                RoleArg::Attacker => Role::Attacker,
                RoleArg::Target => Role::Target,
            };
            let mut w = output(out.as_deref())?;
            writeln!(w, "degree\tcount")?;
            for (d, c) in m.degree_histogram(role) {
                writeln!(w, "{d}\t{c}")?;
            }
            w.flush()?;
        }
        ReportKind::Compare { clean, degraded, out } => {
            let read = |p: &Path| -> Result<MetricsReport> {
                let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                MetricsReport::read_tsv(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
            };
            let rows = degradation_report(&read(clean)?, &read(degraded)?);
            let mut w = output(out.as_deref())?;
            write_degradation_tsv(&mut w, &rows)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let bm = BlockModel {
        num_attackers: a.attackers,
        num_targets: a.targets,
        blocks: a.blocks,
        p_in: a.p_in,
        p_out: a.p_out,
        neg_ratio: a.neg_ratio,
        seed: a.seed,
    };
    let e = bm.generate()?;
    let mut w = output(a.out.as_deref())?;
    ingest::write_edge_list(&mut w, e.num_attackers, e.num_targets, &e.records)?;
    w.flush()?;
    Ok(())
}
