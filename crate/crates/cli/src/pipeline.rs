//! Pipeline stages. Every stage reads its inputs from and writes its artifacts to
//! the configured output directory, so stages can run as separate processes.
//!
//! Layout under `out/`:
//! `manifest.txt`, `trajectories/traj_NNNN.csv`, `model.txt`,
//! `families/family_K.csv`, `build_report.txt`, `runs/run_K.csv`,
//! `summary.csv`, `timings.txt`, `verify_report.csv`, `verify_failures.txt`, `report.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use invlearn::plants::{self, streams};
use invlearn::{
    build_level_family, build_merged, closed_loop, fit_hyperparameters, rmse, BoundSet, ClosedLoopRun,
    ControllerConfig, Interpolant, Kernel, LevelFamily, NarxDataset, NumericalPlant, Pendulum, Plant, Trajectory,
};
use rayon::prelude::*;

use crate::config::{KernelSpec, PlantId, RunConfig};

pub const MANIFEST: &str = "manifest.txt";
pub const MODEL: &str = "model.txt";
pub const BUILD_REPORT: &str = "build_report.txt";
pub const SUMMARY: &str = "summary.csv";
pub const TIMINGS: &str = "timings.txt";
pub const RUN_LOG_HEADER: &str = "t,delta,kappa,i1,slack,certified,u,y_next,descent_ok";

pub fn plant_for(id: PlantId) -> Box<dyn Plant> {
    match id {
        PlantId::Numerical => Box::new(NumericalPlant),
        PlantId::Pendulum => Box::new(Pendulum::default()),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {} (run the earlier stage first)", path.display()))
}

pub fn family_path(out: &Path, k: usize) -> PathBuf {
    out.join("families").join(format!("family_{k}.csv"))
}

pub fn run_path(out: &Path, k: usize) -> PathBuf {
    out.join("runs").join(format!("run_{k}.csv"))
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Generate the training trajectories and write them with a manifest.
pub fn collect(cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    let noise = cfg.noise();
    let trajs = match cfg.plant {
        PlantId::Numerical => plants::collect_numerical_dataset(cfg.seed)?
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let mut rng = plants::rng_stream(cfg.seed, streams::DATASET_NOISE + k as u64);
                plants::add_noise(t, noise.dataset_std, &mut rng)
            })
            .collect::<invlearn::Result<Vec<_>>>()?,
        PlantId::Pendulum => plants::collect_pendulum_dataset(&Pendulum::default(), &noise)?,
    };
    let dir = cfg.out.join("trajectories");
    if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("cannot clear {}", dir.display()))?;
    }
    let mut manifest = String::from("# collection manifest\n");
    let _ = writeln!(manifest, "plant={}", cfg.plant.name());
    let _ = writeln!(manifest, "seed={}", cfg.seed);
    let _ = writeln!(manifest, "dataset_std={}", noise.dataset_std);
    let _ = writeln!(manifest, "input_stream={}", streams::NUMERICAL_INPUTS);
    let _ = writeln!(manifest, "dataset_noise_stream={}", streams::DATASET_NOISE);
    let _ = writeln!(manifest, "trajectories={}", trajs.len());
    for (k, t) in trajs.iter().enumerate() {
        let name = format!("traj_{k:04}.csv");
        write(&dir.join(&name), &t.to_csv())?;
        let _ = writeln!(manifest, "file={name}");
    }
    write(&cfg.out.join(MANIFEST), &manifest)?;
    Ok(trajs)
}

/// Trajectories listed in the manifest, checked against the configured plant.
pub fn load_trajectories(cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    let manifest = read(&cfg.out.join(MANIFEST))?;
    let mut trajs = Vec::new();
    for line in manifest.lines() {
        match line.split_once('=') {
            Some(("plant", p)) if p != cfg.plant.name() => {
                bail!("{} holds {p} data but the config is for {}", cfg.out.display(), cfg.plant.name())
            }
            Some(("file", name)) => {
                let path = cfg.out.join("trajectories").join(name);
                trajs.push(Trajectory::from_csv(&read(&path)?).with_context(|| path.display().to_string())?);
            }
            _ => {}
        }
    }
    Ok(trajs)
}

pub fn load_dataset(cfg: &RunConfig) -> Result<NarxDataset> {
    Ok(build_merged(&load_trajectories(cfg)?, cfg.order, cfg.delay)?)
}

/// What `build` produced.
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub dataset: NarxDataset,
    pub interpolant: Option<Interpolant>,
    pub bounds: Option<BoundSet>,
    pub families: Vec<LevelFamily>,
    pub warnings: Vec<String>,
    pub report: String,
}

fn kernel_label(k: &Kernel) -> String {
    match k {
        Kernel::Isotropic(k) => format!(
            "{} signal_scale={} length_scale={}",
            k.family().name(),
            k.signal_scale(),
            k.length_scale()
        ),
        Kernel::ArdMatern52(k) => format!(
            "matern52_ard signal_scale={} length_scales={}",
            k.signal_scale(),
            join_floats(k.length_scales())
        ),
    }
}

/// Fit the inverse model and one level family per delta, then dump them.
pub fn build(cfg: &RunConfig) -> Result<BuildOutput> {
    let dataset = load_dataset(cfg)?;
    let mut warnings = Vec::new();
    let mut report = String::from("# build report\n");
    let _ = writeln!(report, "plant={}", cfg.plant.name());
    let _ = writeln!(report, "records={}", dataset.len());
    let fam_dir = cfg.out.join("families");
    if fam_dir.exists() {
        fs::remove_dir_all(&fam_dir).with_context(|| format!("cannot clear {}", fam_dir.display()))?;
    }
    if dataset.is_empty() {
        let msg = "dataset is empty; no model fitted and all families are empty".to_string();
        eprintln!("warning: {msg}");
        warnings.push(msg.clone());
        let _ = writeln!(report, "warning={msg}");
        write(&cfg.out.join(BUILD_REPORT), &report)?;
        return Ok(BuildOutput {
            dataset,
            interpolant: None,
            bounds: None,
            families: Vec::new(),
            warnings,
            report,
        });
    }

    let kernel = match &cfg.kernel {
        KernelSpec::Fixed(k) => k.clone(),
        KernelSpec::Search(search) => fit_hyperparameters(search, &dataset, cfg.regularization)?,
    };
    let interpolant = Interpolant::fit(kernel.clone(), &dataset, cfg.regularization)?;
    let bounds = cfg.bounds.resolve(&kernel, cfg.delay)?;
    let _ = writeln!(report, "kernel={}", kernel_label(&kernel));
    let _ = writeln!(report, "regularization={}", interpolant.regularization());
    let _ = writeln!(report, "jitter={}", interpolant.jitter());
    let _ = writeln!(report, "max_training_residual={:e}", interpolant.max_training_residual());
    write(&cfg.out.join(MODEL), &interpolant.to_text())?;

    let families = cfg
        .deltas
        .iter()
        .map(|&d| build_level_family(&dataset, &bounds, d, cfg.max_level))
        .collect::<invlearn::Result<Vec<_>>>()?;
    report.push_str("delta,nonempty_levels,truncated_at,level0,level1,a0_subset_a1\n");
    for (k, fam) in families.iter().enumerate() {
        write(&family_path(&cfg.out, k), &fam.to_text())?;
        let nonempty = fam.levels().iter().filter(|l| !l.is_empty()).count();
        let a0a1 = fam.check_a0_subset_a1();
        let _ = writeln!(
            report,
            "{},{},{},{},{},{}",
            fam.delta(),
            nonempty,
            fam.truncated_at().map_or("none".to_string(), |j| j.to_string()),
            fam.level(0).len(),
            fam.level(1).len(),
            a0a1
        );
        if !a0a1 {
            warnings.push(format!(
                "delta={}: A0 is not contained in A1, so certified regulation from outside A0 is not guaranteed",
                fam.delta()
            ));
        }
    }
    write(&cfg.out.join(BUILD_REPORT), &report)?;
    Ok(BuildOutput {
        dataset,
        interpolant: Some(interpolant),
        bounds: Some(bounds),
        families,
        warnings,
        report,
    })
}

/// Reload the dataset, model and family dumps into a controller.
pub fn load_controller(cfg: &RunConfig) -> Result<ControllerConfig> {
    let dataset = load_dataset(cfg)?;
    if dataset.is_empty() {
        bail!("dataset is empty; nothing to control with");
    }
    let interpolant = Interpolant::from_text(&read(&cfg.out.join(MODEL))?).context("model.txt")?;
    let bounds = cfg.bounds.resolve(interpolant.kernel(), cfg.delay)?;
    let families = load_families(cfg, &dataset)?;
    Ok(ControllerConfig::new(dataset, interpolant, bounds, families, cfg.fallback)?)
}

pub fn load_families(cfg: &RunConfig, dataset: &NarxDataset) -> Result<Vec<LevelFamily>> {
    (0..cfg.deltas.len())
        .map(|k| {
            let path = family_path(&cfg.out, k);
            LevelFamily::from_text(&read(&path)?, dataset).with_context(|| path.display().to_string())
        })
        .collect()
}

/// One closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub initial_condition: Vec<f64>,
    pub run: ClosedLoopRun,
    pub rmse: f64,
    pub certified_fraction: f64,
    pub descent_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub runs: Vec<RunRecord>,
    pub timings: Vec<(String, Duration)>,
}

impl RunResult {
    pub fn total_descent_violations(&self) -> usize {
        self.runs.iter().map(|r| r.descent_violations).sum()
    }
}

/// Per-step log of a run, with the initial condition and `y(0)` in the preamble.
pub fn run_log(record: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# initial_condition={}", join_floats(&record.initial_condition));
    let _ = writeln!(out, "# y0={}", record.run.outputs[0]);
    out.push_str(RUN_LOG_HEADER);
    out.push('\n');
    let opt = |v: Option<String>| v.unwrap_or_default();
    for s in &record.run.steps {
        let c = &s.certificate;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.t,
            opt(c.delta.map(|d| d.to_string())),
            opt(c.kappa.map(|k| k.to_string())),
            c.index,
            c.slack,
            c.certified,
            s.input,
            s.y_next,
            s.descent.label()
        );
    }
    out
}

/// `y(0..=T)` recovered from a run log.
pub fn outputs_from_log(text: &str) -> Result<Vec<f64>> {
    let mut ys = Vec::new();
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("# y0=") {
            ys.push(v.parse()?);
        } else if !line.starts_with('#') && line != RUN_LOG_HEADER && !line.is_empty() {
            let field = line.split(',').nth(7).ok_or_else(|| anyhow!("short row `{line}`"))?;
            ys.push(field.parse()?);
        }
    }
    Ok(ys)
}

/// Run the closed loop from every initial condition and write the logs.
pub fn simulate(cfg: &RunConfig) -> Result<RunResult> {
    let started = Instant::now();
    let controller = load_controller(cfg)?;
    let loaded = started.elapsed();
    let plant = plant_for(cfg.plant);
    let runs = cfg
        .initial_conditions
        .par_iter()
        .enumerate()
        .map(|(k, ic)| {
            let mut rng = plants::rng_stream(cfg.seed, streams::ONLINE_NOISE + k as u64);
            let run = closed_loop(&controller, plant.as_ref(), ic, cfg.horizon, cfg.online_std, &mut rng)?;
            let steps = run.steps.len().max(1) as f64;
            Ok(RunRecord {
                initial_condition: ic.clone(),
                rmse: rmse(&run.outputs),
                certified_fraction: run.certified_steps() as f64 / steps,
                descent_violations: run.descent_violations(),
                run,
            })
        })
        .collect::<invlearn::Result<Vec<_>>>()?;
    let runs_dir = cfg.out.join("runs");
    if runs_dir.exists() {
        fs::remove_dir_all(&runs_dir).with_context(|| format!("cannot clear {}", runs_dir.display()))?;
    }
    let mut summary = String::from("run,initial_condition,rmse,certified_fraction,descent_violations,max_abs_y_last_fifth\n");
    for (k, r) in runs.iter().enumerate() {
        write(&run_path(&cfg.out, k), &run_log(r))?;
        let tail = &r.run.outputs[r.run.outputs.len() * 4 / 5..];
        let _ = writeln!(
            summary,
            "{k},{},{},{},{},{}",
            join_floats(&r.initial_condition),
            r.rmse,
            r.certified_fraction,
            r.descent_violations,
            tail.iter().fold(0.0f64, |m, y| m.max(y.abs()))
        );
    }
    write(&cfg.out.join(SUMMARY), &summary)?;
    let timings = vec![
        ("load".to_string(), loaded),
        ("simulate".to_string(), started.elapsed() - loaded),
    ];
    let mut t = String::new();
    for (name, d) in &timings {
        let _ = writeln!(t, "{name}_seconds={:.6}", d.as_secs_f64());
    }
    write(&cfg.out.join(TIMINGS), &t)?;
    Ok(RunResult { runs, timings })
}

/// Concatenate the stage reports that exist into `report.txt` and return it.
pub fn report(cfg: &RunConfig) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "== {} ({})", cfg.plant.name(), cfg.out.display());
    let mut found = false;
    for name in [BUILD_REPORT, SUMMARY, crate::verify::VERIFY_REPORT, TIMINGS] {
        let path = cfg.out.join(name);
        if let Ok(text) = fs::read_to_string(&path) {
            found = true;
            let _ = writeln!(out, "\n-- {name}");
            out.push_str(&text);
        }
    }
    if !found {
        bail!("no artifacts under {}; run collect, build and simulate first", cfg.out.display());
    }
    write(&cfg.out.join("report.txt"), &out)?;
    Ok(out)
}
