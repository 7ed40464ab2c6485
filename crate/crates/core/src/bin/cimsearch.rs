//! Operator CLI: cardinality reports, single-design evaluation, the joint
//! search, and the method comparison table.
//!
//! Exit codes: 0 success, 2 config/parse errors, 3 infeasible single
//! evaluation, 4 search failure (over-constrained space).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use cimsearch::config::{load_profile, load_run_config, ConfigError, RunConfig};
use cimsearch::cost::TechnologyProfile;
use cimsearch::evolve::{
    baselines, diversity, run_search, run_two_stage, run_xpert_like, score, Archive,
    CandidateEvaluator, ObjectiveMode, ObjectiveSpec, SearchError,
};
use cimsearch::evolve::select_top_k;
use cimsearch::report::{sha256_hex, ComparisonRow, Manifest};
use cimsearch::Cardinality;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_SEARCH: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cimsearch",
    version,
    about = "Joint model/quantization/hardware search for compute-in-memory accelerators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print exact subspace and total cardinalities of a search space
    Space {
        /// Spec or full config file (the [space] section is used)
        #[arg(long)]
        spec: PathBuf,
    },
    /// Evaluate one explicit design and print its archive CSV row
    Eval {
        /// Spec or full config file
        #[arg(long)]
        spec: PathBuf,
        /// Design file with `[design] encoding = [...]`
        #[arg(long)]
        design: PathBuf,
        /// Technology profile: built-in name or file path (overrides the
        /// config's [hardware-profiles])
        #[arg(long)]
        profile: Option<String>,
    },
    /// Run the joint evolutionary search and write archive files
    Search {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for archive/convergence/top-k/manifest files
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// edap | delay | energy-area | priority:a=..,b=..,c=..,d=..
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        generations: Option<u32>,
    },
    /// Run joint, two-stage and hardware-first searches plus baselines on
    /// one budget and write the comparison table
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        generations: Option<u32>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Space { spec } => cmd_space(&spec),
        Command::Eval {
            spec,
            design,
            profile,
        } => cmd_eval(&spec, &design, profile.as_deref()),
        Command::Search {
            config,
            out,
            seed,
            workers,
            objective,
            generations,
        } => cmd_search(&config, &out, seed, workers, objective.as_deref(), generations),
        Command::Compare {
            config,
            out,
            seed,
            workers,
            objective,
            generations,
        } => cmd_compare(&config, &out, seed, workers, objective.as_deref(), generations),
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn exit_code_for(err: &ConfigError) -> u8 {
    match err {
        ConfigError::Search(SearchError::ExhaustedSampling { .. }) => EXIT_SEARCH,
        _ => EXIT_CONFIG,
    }
}

fn load_config_with_overrides(
    path: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    objective: Option<&str>,
    generations: Option<u32>,
) -> Result<RunConfig, ConfigError> {
    let mut cfg = load_run_config(path)?;
    if let Some(seed) = seed {
        cfg.search.seed = seed;
        cfg.eval.value_seed = seed;
        cfg.oracle.seed = cimsearch::rng::derived_seed(seed, "oracle-noise");
    }
    if let Some(workers) = workers {
        cfg.search.workers = workers;
    }
    if let Some(text) = objective {
        cfg.search.objective = ObjectiveMode::parse(text).map_err(ConfigError::Invalid)?;
    }
    if let Some(generations) = generations {
        cfg.search.generations = generations;
    }
    cfg.search.validate()?;
    Ok(cfg)
}

fn cmd_space(spec_path: &Path) -> ExitCode {
    if !spec_path.exists() {
        return fail(EXIT_CONFIG, format!("spec not found: {}", spec_path.display()));
    }
    let text = match std::fs::read_to_string(spec_path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", spec_path.display())),
    };
    let base = spec_path.parent().unwrap_or_else(|| Path::new("."));
    let spec = match cimsearch::space::load_spec_at(&text, base) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let c = spec.cardinality();
    println!("model:    {} (~{})", c.model, Cardinality::scientific(&c.model));
    println!("quant:    {} (~{})", c.quant, Cardinality::scientific(&c.quant));
    println!(
        "hardware: {} (~{})",
        c.hardware,
        Cardinality::scientific(&c.hardware)
    );
    println!("total:    {} (~{})", c.total, Cardinality::scientific(&c.total));
    println!(
        "{} x {} x {} = {}",
        c.model, c.quant, c.hardware, c.total
    );
    ExitCode::SUCCESS
}

#[derive(Deserialize)]
struct DesignFile {
    design: DesignSection,
}

#[derive(Deserialize)]
struct DesignSection {
    encoding: Vec<u32>,
}

fn cmd_eval(spec_path: &Path, design_path: &Path, profile: Option<&str>) -> ExitCode {
    let cfg = match load_run_config(spec_path) {
        Ok(c) => c,
        Err(e) => return fail(exit_code_for(&e), e),
    };
    let tech: Arc<TechnologyProfile> = match profile {
        None => cfg.profile.clone(),
        Some(name_or_path) => {
            let loaded = if TechnologyProfile::builtin(name_or_path).is_some() {
                load_profile(Some(name_or_path), None, Path::new("."))
            } else {
                load_profile(None, Some(name_or_path), Path::new("."))
            };
            match loaded {
                Ok(p) => Arc::new(p),
                Err(e) => return fail(EXIT_CONFIG, e),
            }
        }
    };
    let design_text = match std::fs::read_to_string(design_path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", design_path.display())),
    };
    let design_file: DesignFile = match toml::from_str(&design_text) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", design_path.display())),
    };
    let design = match cfg.spec.decode(&design_file.design.encoding) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_CONFIG, e),
    };

    let evaluator = match cimsearch::config::build_evaluator(&cfg) {
        Ok(mut ev) => {
            ev.tech = tech;
            ev
        }
        Err(e) => return fail(exit_code_for(&e), e),
    };
    let evaluation = match evaluator.evaluate(&design) {
        Ok(ev) => ev,
        Err(e) => return fail(EXIT_CONFIG, e),
    };

    // priority mode scores the lone design against itself
    let objective = ObjectiveSpec {
        mode: cfg.search.objective,
        anchor: Some(cimsearch::evolve::Anchor {
            energy_mj: evaluation.metrics.energy_mj,
            delay_us: evaluation.metrics.delay_us,
            area_mm2: evaluation.metrics.area_mm2,
            accuracy: evaluation.accuracy,
        }),
    };
    let design_score = match score(&evaluation.metrics, evaluation.accuracy, &objective) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };

    let m = &evaluation.metrics;
    println!("{}", cimsearch::report::ARCHIVE_HEADER);
    println!(
        "0,{},{},{},{},{},{},{},{},1",
        design, m.energy_mj, m.delay_us, m.area_mm2, m.edap, evaluation.accuracy, design_score,
        m.feasible
    );
    if m.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    }
}

struct RunContext {
    cfg: RunConfig,
    evaluator: CandidateEvaluator,
    manifest: Manifest,
    started: Instant,
}

fn prepare_run(
    command: &str,
    config_path: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    objective: Option<&str>,
    generations: Option<u32>,
) -> Result<RunContext, (u8, String)> {
    let cfg = load_config_with_overrides(config_path, seed, workers, objective, generations)
        .map_err(|e| (exit_code_for(&e), e.to_string()))?;
    let config_bytes = std::fs::read(config_path)
        .map_err(|e| (EXIT_CONFIG, format!("{}: {e}", config_path.display())))?;
    let evaluator = cimsearch::config::build_evaluator(&cfg)
        .map_err(|e| (exit_code_for(&e), e.to_string()))?;
    let manifest = Manifest {
        command: command.to_string(),
        config_path: config_path.display().to_string(),
        config_sha256: sha256_hex(&config_bytes),
        seed: cfg.search.seed,
        spec_sha256: sha256_hex(cfg.spec.canonical_string().as_bytes()),
        profile_sha256: sha256_hex(cfg.profile.canonical_string().as_bytes()),
        objective: cfg.search.objective.key(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_ms: 0,
    };
    Ok(RunContext {
        cfg,
        evaluator,
        manifest,
        started: Instant::now(),
    })
}

fn search_error_exit(err: &SearchError) -> u8 {
    match err {
        SearchError::ExhaustedSampling { .. } => EXIT_SEARCH,
        _ => EXIT_CONFIG,
    }
}

fn write_run_outputs(
    out: &Path,
    ctx: &mut RunContext,
    archive: &Archive,
) -> Result<(), (u8, String)> {
    std::fs::create_dir_all(out)
        .map_err(|e| (EXIT_CONFIG, format!("{}: {e}", out.display())))?;
    let mref = ctx.manifest.reference();
    cimsearch::report::write_archive_csv(&out.join("archive.csv"), archive, &mref)
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    cimsearch::report::write_convergence_csv(&out.join("convergence.csv"), archive, &mref)
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    let objective = ObjectiveSpec {
        mode: ctx.cfg.search.objective,
        anchor: archive.anchor,
    };
    let top = select_top_k(archive, &objective, ctx.cfg.search.top_k)
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    if top.truncated {
        eprintln!(
            "warning: top-k asked for {} designs, archive holds {} feasible",
            ctx.cfg.search.top_k,
            top.entries.len()
        );
    }
    let designs: Vec<&cimsearch::DesignPoint> = top.entries.iter().map(|e| &e.design).collect();
    if designs.len() < 2 {
        eprintln!("warning: fewer than 2 designs; diversity reported as 0");
    }
    let top_diversity = diversity(&designs);
    cimsearch::report::write_topk_csv(&out.join("topk.csv"), &top.entries, top_diversity, &mref)
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    ctx.manifest.duration_ms = ctx.started.elapsed().as_millis() as u64;
    ctx.manifest
        .write(&out.join("manifest.txt"))
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    println!(
        "archive: {} ({} entries, {} rejected draws)",
        out.join("archive.csv").display(),
        archive.entries.len(),
        archive.rejections
    );
    if let Some(best) = archive.best() {
        println!(
            "best: score={} accuracy={} E={} D={} A={} encoding={}",
            best.score,
            best.accuracy,
            best.metrics.energy_mj,
            best.metrics.delay_us,
            best.metrics.area_mm2,
            best.design
        );
    }
    println!("top-{} diversity: {}", designs.len(), top_diversity);
    Ok(())
}

fn cmd_search(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    objective: Option<&str>,
    generations: Option<u32>,
) -> ExitCode {
    let mut ctx = match prepare_run("search", config_path, seed, workers, objective, generations) {
        Ok(c) => c,
        Err((code, msg)) => return fail(code, msg),
    };
    let archive = match run_search(&ctx.cfg.spec, &ctx.cfg.search, &ctx.evaluator) {
        Ok(a) => a,
        Err(e) => return fail(search_error_exit(&e), e),
    };
    match write_run_outputs(out, &mut ctx, &archive) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => fail(code, msg),
    }
}

fn method_row(
    name: &str,
    archive: &Archive,
    objective: &ObjectiveSpec,
    top_k: usize,
) -> Result<(ComparisonRow, String), String> {
    let top = select_top_k(archive, objective, top_k).map_err(|e| e.to_string())?;
    let best = top
        .entries
        .first()
        .ok_or_else(|| format!("{name}: no feasible designs"))?;
    let designs: Vec<&cimsearch::DesignPoint> = top.entries.iter().map(|e| &e.design).collect();
    let m = &best.metrics;
    Ok((
        ComparisonRow {
            method: name.to_string(),
            accuracy: best.accuracy,
            energy_mj: m.energy_mj,
            delay_us: m.delay_us,
            area_mm2: m.area_mm2,
            edap: m.edap,
            score: score(m, best.accuracy, objective).map_err(|e| e.to_string())?,
            tops_per_w: m.tops_per_w,
            tops_per_mm2: m.tops_per_mm2,
            utilization: m.utilization,
            diversity: Some(diversity(&designs)),
            edap_ratio_vs_baseline1: f64::NAN,
            edap_ratio_vs_baseline2: f64::NAN,
        },
        best.design.to_string(),
    ))
}

fn cmd_compare(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    objective: Option<&str>,
    generations: Option<u32>,
) -> ExitCode {
    let mut ctx = match prepare_run("compare", config_path, seed, workers, objective, generations) {
        Ok(c) => c,
        Err((code, msg)) => return fail(code, msg),
    };
    let spec = ctx.cfg.spec.clone();
    let cfg = &ctx.cfg.search;

    let joint = match run_search(&spec, cfg, &ctx.evaluator) {
        Ok(a) => a,
        Err(e) => return fail(search_error_exit(&e), e),
    };
    let two_stage = match run_two_stage(&spec, cfg, &ctx.evaluator) {
        Ok(a) => a,
        Err(e) => return fail(search_error_exit(&e), e),
    };
    let xpert = match run_xpert_like(&spec, cfg, &ctx.evaluator) {
        Ok(a) => a,
        Err(e) => return fail(search_error_exit(&e), e),
    };

    let objective_spec = ObjectiveSpec {
        mode: cfg.objective,
        anchor: joint.anchor,
    };
    let base = match baselines(
        &spec,
        &ctx.evaluator,
        &objective_spec,
        cfg.seed,
        ctx.cfg.baseline_samples,
    ) {
        Ok(b) => b,
        Err(e) => return fail(search_error_exit(&e), e),
    };

    let b1_score = match score(&base.median.metrics, base.median.accuracy, &objective_spec) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut rows = vec![
        ComparisonRow {
            method: "baseline1".into(),
            accuracy: base.median.accuracy,
            energy_mj: base.median.metrics.energy_mj,
            delay_us: base.median.metrics.delay_us,
            area_mm2: base.median.metrics.area_mm2,
            edap: base.median.metrics.edap,
            score: b1_score,
            tops_per_w: base.median.metrics.tops_per_w,
            tops_per_mm2: base.median.metrics.tops_per_mm2,
            utilization: base.median.metrics.utilization,
            diversity: None,
            edap_ratio_vs_baseline1: f64::NAN,
            edap_ratio_vs_baseline2: f64::NAN,
        },
        ComparisonRow {
            method: "baseline2".into(),
            accuracy: base.random.accuracy,
            energy_mj: base.random.energy_mj,
            delay_us: base.random.delay_us,
            area_mm2: base.random.area_mm2,
            edap: base.random.edap,
            score: base.random.score,
            tops_per_w: base.random.tops_per_w,
            tops_per_mm2: base.random.tops_per_mm2,
            utilization: base.random.utilization,
            diversity: None,
            edap_ratio_vs_baseline1: f64::NAN,
            edap_ratio_vs_baseline2: f64::NAN,
        },
    ];
    for (name, archive) in [
        ("joint", &joint),
        ("two_stage", &two_stage),
        ("xpert_like", &xpert),
    ] {
        match method_row(name, archive, &objective_spec, cfg.top_k) {
            Ok((row, encoding)) => {
                println!("{name}: score={} encoding={encoding}", row.score);
                rows.push(row);
            }
            Err(e) => return fail(EXIT_SEARCH, e),
        }
    }
    let b1_edap = rows[0].edap;
    let b2_edap = rows[1].edap;
    for row in rows.iter_mut() {
        row.edap_ratio_vs_baseline1 = b1_edap / row.edap;
        row.edap_ratio_vs_baseline2 = b2_edap / row.edap;
    }

    if let Err((code, msg)) = (|| -> Result<(), (u8, String)> {
        std::fs::create_dir_all(out)
            .map_err(|e| (EXIT_CONFIG, format!("{}: {e}", out.display())))?;
        let mref = ctx.manifest.reference();
        cimsearch::report::write_comparison_csv(&out.join("comparison.csv"), &rows, &mref)
            .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
        for (name, archive) in [
            ("archive_joint.csv", &joint),
            ("archive_two_stage.csv", &two_stage),
            ("archive_xpert_like.csv", &xpert),
        ] {
            cimsearch::report::write_archive_csv(&out.join(name), archive, &mref)
                .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
        }
        ctx.manifest.duration_ms = ctx.started.elapsed().as_millis() as u64;
        ctx.manifest
            .write(&out.join("manifest.txt"))
            .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
        Ok(())
    })() {
        return fail(code, msg);
    }

    println!("comparison: {}", out.join("comparison.csv").display());
    ExitCode::SUCCESS
}
