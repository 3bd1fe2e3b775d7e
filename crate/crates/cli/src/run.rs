//! Running selected experiments and writing reports, schema and manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use besov_core::report::{ReportSchema, TOOL_VERSION};
use serde::Serialize;
use serde_json::json;

use crate::config::{Flags, RunConfig, Settings};
use crate::experiments::{self, Context, REGISTRY};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_ASSERTION: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    One(String),
    All,
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    experiment: String,
    status: String,
    files: Vec<String>,
    wall_seconds: f64,
    failures: Vec<String>,
}

fn selected(selector: &Selector, settings: &Settings) -> Result<Vec<(&'static str, bool)>> {
    match selector {
        Selector::One(name) => match experiments::find(name) {
            Some(e) => Ok(vec![(e.name, true)]),
            None => bail!("unknown experiment `{name}`"),
        },
        Selector::All => {
            if let Some(names) = &settings.experiments {
                if let Some(bad) = names.iter().find(|n| experiments::find(n).is_none()) {
                    bail!("config error: key `experiments`: unknown selector `{bad}`");
                }
            }
            Ok(REGISTRY
                .iter()
                .filter(|e| {
                    settings
                        .experiments
                        .as_ref()
                        .is_none_or(|n| n.iter().any(|x| x == e.name))
                })
                .map(|e| (e.name, experiments::applicable(e.name, settings)))
                .collect())
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Run the selection and return the process exit code. `Err` means a
/// configuration or runtime error (exit code 1).
pub fn execute(
    selector: &Selector,
    config_path: &Path,
    flags: &Flags,
    threads: Option<usize>,
) -> Result<u8> {
    let started = Instant::now();
    let config = RunConfig::load(config_path)?;
    let settings = Settings::resolve(&config, flags)?;
    if let Some(k) = threads {
        if k == 0 {
            bail!("--threads must be at least 1");
        }
        // A pool that already exists (repeated calls in one process) is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
    let plan = selected(selector, &settings)?;
    let out: PathBuf = settings.out.clone();
    fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    let ctx = Context::new(settings.clone());
    let mut entries = Vec::new();
    let mut schemas: Vec<ReportSchema> = Vec::new();
    let mut failures = Vec::new();
    for (name, runnable) in plan {
        if !runnable {
            println!("{name}: skipped (not applicable to this domain)");
            entries.push(ManifestEntry {
                experiment: name.to_string(),
                status: "skipped".into(),
                files: Vec::new(),
                wall_seconds: 0.0,
                failures: Vec::new(),
            });
            continue;
        }
        let t0 = Instant::now();
        let outcome = experiments::find(name)
            .expect("planned from the registry")
            .run(&ctx)
            .with_context(|| format!("experiment {name}"))?;
        let mut files = Vec::new();
        for report in &outcome.reports {
            let path = out.join(report.file_name());
            let file =
                fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            report.write_csv(std::io::BufWriter::new(file))?;
            files.push(report.file_name());
            schemas.push(report.schema());
        }
        let secs = t0.elapsed().as_secs_f64();
        let status = if outcome.failures.is_empty() {
            "ok"
        } else {
            "assertion-failed"
        };
        println!(
            "{name}: {status}, {} report(s), {secs:.2} s",
            outcome.reports.len()
        );
        for f in &outcome.failures {
            eprintln!("hard assertion failed: {f}");
        }
        failures.extend(outcome.failures.iter().cloned());
        entries.push(ManifestEntry {
            experiment: name.to_string(),
            status: status.into(),
            files,
            wall_seconds: secs,
            failures: outcome.failures,
        });
    }

    let code = if failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    };
    write_json(
        &out.join("schema.json"),
        &json!({ "tool_version": TOOL_VERSION, "reports": schemas }),
    )?;
    write_json(
        &out.join("run-manifest.json"),
        &json!({
            "tool": env!("CARGO_PKG_NAME"),
            "tool_version": env!("CARGO_PKG_VERSION"),
            "core_version": TOOL_VERSION,
            "selector": match selector { Selector::One(n) => n.as_str(), Selector::All => "all" },
            "config_path": config_path.display().to_string(),
            "config": config,
            "settings": settings,
            "threads": rayon::current_num_threads(),
            "experiments": entries,
            "total_wall_seconds": started.elapsed().as_secs_f64(),
            "exit_code": code,
        }),
    )?;
    Ok(code)
}
