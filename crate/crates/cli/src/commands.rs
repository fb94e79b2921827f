use std::fs;
use std::path::{Path, PathBuf};

use egoground::eval::{
    read_json, read_records, render_overlays, run_task, score_run_dir, Engine, MetricsReport,
    OverlayColors, RunMetadata, RunOptions, METADATA_FILE, RECORDS_FILE, REPORT_FILE,
};
use egoground::pipeline::SvCotConfig;
use egoground::schema::{expand_cases, load_dataset, LoadedDataset, TaskKind};
use egoground::scorers::{
    ChatClient, DirectionEstimator, DirectionStrategy, EndpointConfig, MockVerifier,
    RemoteVerifier, TemplateRegistry, Verifier,
};
use egoground::synth::{generate_fixture_set, SceneConfig};
use sha2::{Digest, Sha256};

use crate::config::{resolve, EngineKind, FileConfig, RunArgs, RunConfig, VerifierKind};
use crate::{CliError, SynthArgs};

fn sha256_hex(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            toml::from_str::<SceneConfig>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => SceneConfig::default(),
    };
    macro_rules! apply {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = args.$flag { config.$field = v; })*
        };
    }
    apply!(
        seed => seed,
        width => width,
        height => height,
        mean_candidates => n_candidates_mean,
        same_category_rate => same_category_rate,
        negative_rate => negative_rate,
        noise_sigma => direction_noise_sigma,
        occlusion_rate => occlusion_rate
    );
    let set = generate_fixture_set(&config, args.count, &args.out)?;
    let st = &set.stats;
    let n = st.count as f64;
    let ci = 1.96 * (config.negative_rate * (1.0 - config.negative_rate) / n).sqrt();
    println!("wrote {} scenes to {}", st.count, set.dataset_path.display());
    println!("sidecar {}", set.sidecar_path.display());
    println!(
        "negative rate     {:.4}  (configured {:.4}, 95% band ±{:.4})",
        st.negative_rate, config.negative_rate, ci
    );
    println!(
        "mean candidates   {:.3}  (configured {:.3})",
        st.mean_candidates, config.n_candidates_mean
    );
    println!(
        "same-category     {:.4}  (configured {:.4})",
        st.same_category_rate, config.same_category_rate
    );
    println!("sha256 dataset    {}", sha256_hex(&set.dataset_path)?);
    println!("sha256 sidecar    {}", sha256_hex(&set.sidecar_path)?);
    Ok(())
}

pub fn validate(path: &Path) -> Result<(), CliError> {
    let loaded = load_dataset(path)?;
    println!("{}: {} samples kept, {} rejected", path.display(), loaded.samples.len(), loaded.rejected);
    for (kind, count) in loaded.issue_counts() {
        let severity = if kind.is_soft() { "kept" } else { "dropped" };
        println!("  issue {:<20} {count:>6} ({severity})", kind.as_str());
    }
    for task in TaskKind::ALL {
        let exp = expand_cases(&loaded.samples, task);
        let skips: Vec<String> = exp
            .skip_counts()
            .iter()
            .map(|(r, n)| format!("{} {n}", r.as_str()))
            .collect();
        let skips = if skips.is_empty() { "none".to_string() } else { skips.join(", ") };
        println!(
            "  {:<6} {:>6} cases, {:>6} runnable, skipped: {skips}",
            task.as_str(),
            exp.len(),
            exp.cases().count()
        );
    }
    Ok(())
}

fn load_for_run(path: &Path) -> Result<LoadedDataset, CliError> {
    let loaded = load_dataset(path)?;
    if loaded.rejected > 0 {
        eprintln!(
            "warning: {} samples dropped by validation (run `egoground validate {}`)",
            loaded.rejected,
            path.display()
        );
    }
    Ok(loaded)
}

fn summary_line(task: TaskKind, meta: &RunMetadata, report: &MetricsReport, dir: &Path) -> String {
    let mut parts = vec![format!(
        "{:<5} {} records, {} skipped, {} parsed",
        task.slug(),
        meta.records_emitted,
        meta.hard_skipped,
        meta.parsed_ok
    )];
    for (k, v) in &report.precision_at {
        parts.push(format!("P@{k} {v:.3}"));
    }
    if let Some(v) = report.iou_avg {
        parts.push(format!("IoU {v:.3}"));
    }
    if let Some(v) = report.rejection_accuracy {
        parts.push(format!("reject {v:.3}"));
    }
    if let (Some(a), Some(f)) = (report.accuracy, report.macro_f1) {
        parts.push(format!("acc {a:.3} macroF1 {f:.3}"));
    }
    parts.push(format!("-> {}", dir.display()));
    parts.join(" | ")
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let cfg = resolve(args, &file, |k| std::env::var(k).ok())?;
    execute(&cfg)
}

fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let client = cfg.endpoint.as_ref().map(|e| {
        ChatClient::new(EndpointConfig {
            base_url: e.base_url.clone(),
            api_key: e.api_key.clone(),
            model: e.model.clone(),
            timeout: e.timeout,
        })
    });
    let remote = || client.clone().ok_or_else(|| CliError::Config("no endpoint configured".into()));

    let mut registry = TemplateRegistry::builtin();
    if let Some(dir) = &cfg.templates {
        registry
            .load_dir(dir)
            .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    }
    let mut templates = Vec::new();
    if cfg.engine == EngineKind::Direct {
        for &task in &cfg.tasks {
            let mut t = registry
                .get(task, &cfg.model_family)
                .cloned()
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "no {} template for model family `{}`",
                        task.as_str(),
                        cfg.model_family
                    ))
                })?;
            if let Some(mode) = cfg.mode {
                t.coordinate_mode = mode;
            }
            templates.push(t);
        }
    }

    let loaded = load_for_run(&cfg.data)?;
    let direction = match cfg.direction {
        DirectionStrategy::Remote if cfg.engine == EngineKind::Svcot => {
            DirectionEstimator::remote(remote()?, cfg.image_root.clone())
        }
        s => DirectionEstimator::local(s),
    };
    let verifier: Box<dyn Verifier> = match cfg.verifier {
        VerifierKind::Remote if cfg.engine == EngineKind::Svcot => {
            Box::new(RemoteVerifier::new(remote()?, cfg.image_root.clone()))
        }
        _ => Box::new(MockVerifier),
    };
    let opts = RunOptions {
        start: cfg.start,
        end: cfg.end,
        workers: cfg.workers,
        resume: cfg.resume,
        seed: cfg.seed,
        data_path: cfg.data.display().to_string(),
    };
    let direct_client = if cfg.engine == EngineKind::Direct { Some(remote()?) } else { None };

    for (i, &task) in cfg.tasks.iter().enumerate() {
        let engine = match (&direct_client, cfg.engine) {
            (Some(c), EngineKind::Direct) => Engine::Direct {
                template: &templates[i],
                client: c,
                image_root: cfg.image_root.as_deref(),
            },
            _ => Engine::SvCot {
                direction: &direction,
                verifier: verifier.as_ref(),
                config: SvCotConfig {
                    tau: cfg.tau,
                    cone_half_angle: cfg.cone_half_angle,
                    ..SvCotConfig::default()
                },
            },
        };
        let dir = cfg.out.join(task.slug());
        let out = run_task(&loaded.samples, task, &engine, &opts, &dir)?;
        println!("{}", summary_line(task, &out.metadata, &out.report, &dir));
    }
    Ok(())
}

/// A run directory itself, or the task directories under an output root.
fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if dir.join(METADATA_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(METADATA_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Io(format!(
            "{}: no {METADATA_FILE} here or in any subdirectory",
            dir.display()
        )));
    }
    Ok(dirs)
}

pub fn score(dir: &Path) -> Result<(), CliError> {
    let dirs = run_dirs(dir)?;
    let many = dirs.len() > 1;
    for d in dirs {
        let (_, text) = score_run_dir(&d)?;
        if many {
            println!("== {}", d.display());
        }
        print!("{text}");
        match fs::read_to_string(d.join(REPORT_FILE)) {
            Ok(existing) if existing == text => eprintln!("{}: matches {REPORT_FILE}", d.display()),
            Ok(_) => eprintln!("{}: differs from {REPORT_FILE}", d.display()),
            Err(_) => eprintln!("{}: no {REPORT_FILE} to compare", d.display()),
        }
    }
    Ok(())
}

pub fn render(dir: &Path, data: Option<&Path>, image_root: Option<&Path>) -> Result<(), CliError> {
    for d in run_dirs(dir)? {
        let meta: RunMetadata = read_json(&d.join(METADATA_FILE))?;
        let data_path = data.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&meta.data_path));
        let loaded = load_dataset(&data_path)?;
        let records = read_records(&d.join(RECORDS_FILE))?;
        let summary = render_overlays(
            &records,
            &loaded.samples,
            image_root,
            &d,
            &meta.scorer,
            &OverlayColors::default(),
        )?;
        println!(
            "{}: {} overlays, {} text files -> {}",
            d.display(),
            summary.images.len(),
            summary.text_files.len(),
            summary.dir.display()
        );
    }
    Ok(())
}
