//! The four subcommands as library functions, so tests can drive them
//! without spawning processes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use npr_core::checkpoint::Checkpoint;
use npr_core::eval::{
    compute_metrics, dense_checkpoint, evaluate_with, evaluation_ics, finetune, unfold, FieldTriple, Metrics,
    MetricsReport,
};
use npr_core::model::ModelKind;
use npr_core::reference::{reference_field, FieldGrid};
use npr_core::training::{train, CsvSink, ProgressSink, StepRecord};

use crate::config::{ArchKind, RunConfig};
use crate::error::{CliError, Result};
use crate::ic_expr::parse_ic;
use crate::render::{range_sidecar, write_pgm};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const PROGRESS_FILE: &str = "progress.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DENSE_CHECKPOINT_FILE: &str = "finetuned.ckpt";
pub const FINETUNE_METRICS_FILE: &str = "finetune_metrics.csv";

/// Overrides shared by the subcommands; `None` keeps the config value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid: Option<(usize, usize)>,
    pub steps: Option<usize>,
    pub model: Option<ArchKind>,
    pub no_hardcode_baseline: bool,
}

impl Overrides {
    /// The configuration file (or defaults) with command-line overrides
    /// applied, validated.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
            cfg.finetune.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some((nt, nx)) = self.grid {
            cfg.eval.nt = nt;
            cfg.eval.nx = nx;
        }
        if let Some(model) = self.model {
            cfg.model.kind = model;
        }
        if self.no_hardcode_baseline && cfg.model.kind == ArchKind::Deeponet {
            cfg.train.hardcode_ic = false;
            cfg.train.hardcode_bc = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse `"<nt>x<nx>"`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid {s:?} is not of the form <nt>x<nx>"))?;
    let nt = a.trim().parse().map_err(|_| format!("bad grid rows {a:?}"))?;
    let nx = b.trim().parse().map_err(|_| format!("bad grid columns {b:?}"))?;
    if nt < 2 || nx < 2 {
        return Err(format!("grid {s:?} must be at least 2x2"));
    }
    Ok((nt, nx))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("creating {}", path.display()), e))
}

fn write_field(path: &Path, field: &FieldGrid) -> Result<()> {
    let mut w = create_file(path)?;
    field.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

struct Tracking<S> {
    inner: S,
    last: Option<StepRecord>,
}

impl<S: ProgressSink> ProgressSink for Tracking<S> {
    fn record(&mut self, rec: &StepRecord) -> npr_core::Result<()> {
        self.last = Some(*rec);
        self.inner.record(rec)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub progress: PathBuf,
    pub last: Option<StepRecord>,
}

pub fn cmd_train(ov: &Overrides) -> Result<TrainOutcome> {
    let mut cfg = ov.resolve()?;
    if let Some(steps) = ov.steps {
        cfg.train.n_steps = steps;
    }
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let progress = dir.join(PROGRESS_FILE);
    let mut sink = Tracking {
        inner: CsvSink::new(create_file(&progress)?, cfg.output.progress_every, cfg.train.n_steps),
        last: None,
    };
    let ckpt = train(&cfg.ibvp(), cfg.model_spec(), &cfg.train, &mut sink)?;
    let last = sink.last;
    sink.inner
        .into_inner()
        .flush()
        .map_err(|e| CliError::io(format!("writing {}", progress.display()), e))?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    ckpt.save(&checkpoint)?;
    Ok(TrainOutcome {
        checkpoint,
        progress,
        last,
    })
}

fn require_checkpoint(path: Option<&Path>) -> Result<Checkpoint> {
    let path = path.ok_or_else(|| CliError::Usage("--checkpoint is required".into()))?;
    Ok(Checkpoint::load(path)?)
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub report: MetricsReport,
    pub metrics: PathBuf,
}

/// Evaluate a checkpoint on the configured set of initial conditions. A
/// dense PINN checkpoint is evaluated on the single condition it was tuned
/// for.
pub fn cmd_eval(ov: &Overrides, checkpoint: Option<&Path>) -> Result<EvalOutcome> {
    let cfg = ov.resolve()?;
    let ckpt = require_checkpoint(checkpoint)?;
    let ics = match (&ckpt.ic, ckpt.model.kind()) {
        (Some(ic), ModelKind::DensePinn) => vec![ic.clone()],
        _ => evaluation_ics(&ckpt.ibvp, cfg.eval.n_ics, cfg.eval.seed),
    };
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let export = cfg.eval.export_fields;
    let report = evaluate_with(&ckpt, &ics, cfg.eval.nt, cfg.eval.nx, |i, triple: &FieldTriple| {
        if export {
            write_field(&dir.join(format!("ic{i:02}_model.csv")), &triple.model).map_err(into_core)?;
            write_field(&dir.join(format!("ic{i:02}_reference.csv")), &triple.reference).map_err(into_core)?;
            write_field(&dir.join(format!("ic{i:02}_diff.csv")), &triple.diff).map_err(into_core)?;
        }
        Ok(())
    })?;
    let metrics = dir.join(METRICS_FILE);
    let mut w = create_file(&metrics)?;
    report.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(format!("writing {}", metrics.display()), e))?;
    Ok(EvalOutcome { report, metrics })
}

fn into_core(e: CliError) -> npr_core::Error {
    match e {
        CliError::Core(e) => e,
        CliError::Io { source, .. } => npr_core::Error::Io(source),
        other => npr_core::Error::Config(other.to_string()),
    }
}

#[derive(Clone, Debug)]
pub struct FinetuneOutcome {
    pub before: Metrics,
    pub after: Metrics,
    pub checkpoint: PathBuf,
    pub seconds: f64,
}

/// Unfold the hypernetwork output for one initial condition, fine-tune it
/// as a dense PINN and compare against the reference before and after.
pub fn cmd_finetune(ov: &Overrides, checkpoint: Option<&Path>, ic_expr: Option<&str>) -> Result<FinetuneOutcome> {
    let mut cfg = ov.resolve()?;
    if let Some(steps) = ov.steps {
        cfg.finetune.steps = steps;
    }
    let ckpt = require_checkpoint(checkpoint)?;
    let expr = ic_expr.ok_or_else(|| CliError::Usage("--ic is required".into()))?;
    let ic = parse_ic(expr)?;
    let (nt, nx) = (cfg.eval.nt, cfg.eval.nx);

    let (model, mut params) = unfold(&ckpt, &ic)?;
    let reference = reference_field(&ckpt.ibvp, &ic, nt, nx)?;
    let before_field = model.field(params.as_slice(), &ic, nt, nx)?;
    let before = compute_metrics(&before_field, &reference)?;

    let start = std::time::Instant::now();
    finetune(&model, &mut params, &ic, &ckpt.ibvp, &cfg.finetune, &mut npr_core::training::NullSink)?;
    let seconds = start.elapsed().as_secs_f64();

    let after_field = model.field(params.as_slice(), &ic, nt, nx)?;
    let after = compute_metrics(&after_field, &reference)?;

    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let dense = dense_checkpoint(&ckpt, model, params, &ic, cfg.finetune.steps);
    let path = dir.join(DENSE_CHECKPOINT_FILE);
    dense.save(&path)?;
    write_field(&dir.join("reference.csv"), &reference)?;
    write_field(&dir.join("before_diff.csv"), &before_field.abs_diff(&reference)?)?;
    write_field(&dir.join("after_diff.csv"), &after_field.abs_diff(&reference)?)?;
    let metrics = dir.join(FINETUNE_METRICS_FILE);
    let mut w = create_file(&metrics)?;
    let row = |w: &mut BufWriter<File>, label: &str, m: &Metrics| {
        writeln!(w, "{label},{},{},{},{}", m.l1, m.l2, m.linf, m.rms)
    };
    (|| {
        writeln!(w, "stage,l1,l2,linf,rms_unpublished")?;
        row(&mut w, "before", &before)?;
        row(&mut w, "after", &after)?;
        w.flush()
    })()
    .map_err(|e| CliError::io(format!("writing {}", metrics.display()), e))?;

    Ok(FinetuneOutcome {
        before,
        after,
        checkpoint: path,
        seconds,
    })
}

/// Render a field CSV as a PGM heatmap plus a `.range.txt` sidecar.
pub fn cmd_render(input: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let file = File::open(input).map_err(|e| CliError::io(format!("opening {}", input.display()), e))?;
    let field = FieldGrid::read_csv(std::io::BufReader::new(file))?;
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| input.with_extension("pgm"));
    if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut w = create_file(&target)?;
    let (lo, hi) = write_pgm(&field, &mut w)
        .and_then(|r| w.flush().map(|_| r))
        .map_err(|e| CliError::io(format!("writing {}", target.display()), e))?;
    let sidecar = target.with_extension("range.txt");
    fs::write(&sidecar, range_sidecar(lo, hi)).map_err(|e| CliError::io(format!("writing {}", sidecar.display()), e))?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag() {
        assert_eq!(parse_grid("500x500"), Ok((500, 500)));
        assert_eq!(parse_grid("21X33"), Ok((21, 33)));
        assert!(parse_grid("500").is_err());
        assert!(parse_grid("1x5").is_err());
        assert!(parse_grid("ax5").is_err());
    }
}
