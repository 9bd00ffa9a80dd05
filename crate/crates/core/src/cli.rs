//! `reserve-dyn` command line: subcommands, CSV writers and the run manifest.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, load_config, LoadedConfig};
use crate::error::{Error, Result};
use crate::oracle::{mc_reliability, replication_pool};
use crate::reliability::{ClusteredFleet, Evaluator, IndexSeries, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "reserve-dyn",
    version,
    about = "TCL operating reserve and short-term reliability evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Woor,
    Ort,
    Hybrid,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Woor => Variant::WoOR,
            VariantArg::Ort => Variant::Ort,
            VariantArg::Hybrid => Variant::Hybrid,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Scenario JSON file, or the name of a bundled example.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deterministic aggregate power and reserve of the clustered fleet.
    Aggregate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "aggregate.csv")]
        out: PathBuf,
    },
    /// Density and CDF of aggregate power at one time.
    Distribution {
        #[command(flatten)]
        config: ConfigArg,
        /// Minutes from the start.
        #[arg(long)]
        at: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[arg(long, default_value = "distribution.csv")]
        out: PathBuf,
    },
    /// Reserve capacity states and probabilities at one time.
    Multistate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        at: f64,
        #[arg(long, default_value = "multistate.csv")]
        out: PathBuf,
    },
    /// Analytical reliability indices.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ort")]
        variant: VariantArg,
    },
    /// Monte Carlo reliability indices and fleet traces.
    Oracle {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Samples per time point; defaults to the config value.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "ort")]
        variant: VariantArg,
    },
    /// Analytical and Monte Carlo indices side by side.
    Compare {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["woor", "ort"])]
        variants: Vec<VariantArg>,
    },
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Numerical { .. } | Error::Domain(_) | Error::StateOverflow { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Debug, Serialize)]
struct OutputEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Seeds {
    population: u64,
    clustering: u64,
    monte_carlo: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    scenario: String,
    config_sha256: String,
    variant: Option<String>,
    seeds: Seeds,
    cluster_count: Option<usize>,
    timings_s: Vec<(String, f64)>,
    outputs: Vec<OutputEntry>,
}

/// Writes files into one directory and records their checksums.
struct OutputDir {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputDir {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), text)?;
        self.entries.push(OutputEntry {
            file: name.to_string(),
            bytes: text.len(),
            sha256: hex(&Sha256::digest(text.as_bytes())),
        });
        Ok(())
    }

    fn finish(self, mut manifest: RunManifest) -> Result<()> {
        manifest.outputs = self.entries;
        let text =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn manifest(
    command: &str,
    cfg: &LoadedConfig,
    variant: Option<Variant>,
    mc_seed: Option<u64>,
) -> Result<RunManifest> {
    Ok(RunManifest {
        tool: "reserve-dyn",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        scenario: cfg.config.name.clone(),
        config_sha256: cfg.hash()?,
        variant: variant.map(|v| v.name().to_string()),
        seeds: Seeds {
            population: cfg.config.population.seed,
            clustering: cfg.config.cluster_seed,
            monte_carlo: mc_seed,
        },
        cluster_count: None,
        timings_s: Vec::new(),
        outputs: Vec::new(),
    })
}

/// CSV text from a header and rows of numbers.
pub fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| (v + 0.0).to_string()))
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn headers(first: &str, idx: &IndexSeries, extra: &[&str]) -> Vec<String> {
    let mut h = vec![first.to_string()];
    h.extend(idx.bus_ids.iter().map(|b| format!("bus_{b}")));
    h.push("system".into());
    h.extend(extra.iter().map(|s| s.to_string()));
    h
}

fn index_tables(idx: &IndexSeries) -> Result<[(String, String); 3]> {
    let se = idx.standard_errors.as_ref();
    let table = |per_bus: &Vec<Vec<f64>>, system: &Vec<f64>, errors: Option<&Vec<f64>>| {
        let extra: &[&str] = if errors.is_some() {
            &["system_se"]
        } else {
            &[]
        };
        csv_text(
            &headers("time_h", idx, extra),
            (0..idx.times_h.len()).map(|k| {
                let mut row = vec![idx.times_h[k]];
                row.extend(per_bus.iter().map(|tr| tr[k]));
                row.push(system[k]);
                if let Some(e) = errors {
                    row.push(e[k]);
                }
                row
            }),
        )
    };
    Ok([
        (
            "lolp.csv".into(),
            table(&idx.lolp, &idx.lolp_system, se.map(|s| &s.lolp_system))?,
        ),
        (
            "eens.csv".into(),
            table(&idx.eens, &idx.eens_system, se.map(|s| &s.eens_system))?,
        ),
        (
            "lole.csv".into(),
            table(&idx.lole, &idx.lole_system, se.map(|s| &s.lole_system))?,
        ),
    ])
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    (0..times.len())
        .min_by(|&a, &b| {
            (times[a] - t)
                .abs()
                .total_cmp(&(times[b] - t).abs())
                .then(a.cmp(&b))
        })
        .unwrap_or(0)
}

fn minutes_label(t_h: f64) -> String {
    let m = t_h * 60.0;
    if (m - m.round()).abs() < 1e-9 {
        format!("{}", m.round() as i64)
    } else {
        format!("{m:.3}")
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Aggregate { config, out } => {
            let cfg = load_config(&config.config)?;
            let s = cfg.scenario()?;
            let fleet = ClusteredFleet::build(&s)?;
            let times = s.times();
            let power: Vec<f64> = times
                .iter()
                .map(|&t| fleet.power(t))
                .collect::<Result<_>>()?;
            let p0 = power[0];
            let text = csv_text(
                &["time_h".into(), "power_mw".into(), "reserve_mw".into()],
                times.iter().zip(&power).map(|(t, p)| vec![*t, *p, p0 - p]),
            )?;
            write_file(&out, &text)?;
            log::info!(
                "{} clusters, initial power {p0:.2} MW",
                fleet.clusters.len()
            );
        }
        Command::Distribution {
            config,
            at,
            points,
            out,
        } => {
            let cfg = load_config(&config.config)?;
            let ev = Evaluator::new(cfg.scenario()?)?;
            let k = nearest_index(ev.times(), at / 60.0);
            let d = &ev.fleet.distributions[k];
            let sd = d.std_dev();
            let points = points.max(2);
            let (lo, hi) = if sd > 0.0 {
                (d.mean - 6.0 * sd, d.mean + 6.0 * sd)
            } else {
                (d.mean - 1.0, d.mean + 1.0)
            };
            let text = csv_text(
                &["x".into(), "pdf".into(), "cdf".into()],
                (0..points).map(|i| {
                    let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                    vec![x, d.pdf(x), d.cdf(x)]
                }),
            )?;
            write_file(&out, &text)?;
        }
        Command::Multistate { config, at, out } => {
            let cfg = load_config(&config.config)?;
            let ev = Evaluator::new(cfg.scenario()?)?;
            let k = nearest_index(ev.times(), at / 60.0);
            let lz = ev
                .fleet
                .ort_lz(k, ev.scenario.t_s, ev.scenario.standby_failure);
            let text = csv_text(
                &["capacity_mw".into(), "probability".into()],
                lz.iter().map(|(c, p)| vec![c, p]),
            )?;
            write_file(&out, &text)?;
        }
        Command::Evaluate {
            config,
            out,
            variant,
        } => {
            let cfg = load_config(&config.config)?;
            evaluate_to_dir(&cfg, &out, variant.into())?;
        }
        Command::Oracle {
            config,
            out,
            samples,
            seed,
            variant,
        } => {
            let cfg = load_config(&config.config)?;
            oracle_to_dir(&cfg, &out, variant.into(), samples, seed)?;
        }
        Command::Compare {
            config,
            out,
            samples,
            seed,
            variants,
        } => {
            let cfg = load_config(&config.config)?;
            let report = compare(
                &cfg,
                &variants.into_iter().map(Variant::from).collect::<Vec<_>>(),
                samples,
                seed,
            )?;
            print!("{}", report.text);
            if let Some(dir) = out {
                let mut o = OutputDir::new(&dir)?;
                o.write("compare.csv", &report.csv)?;
                o.write("compare.txt", &report.text)?;
                let mut m = manifest(
                    "compare",
                    &cfg,
                    None,
                    Some(seed.unwrap_or(cfg.config.mc.seed)),
                )?;
                m.timings_s = report.timings;
                o.finish(m)?;
            }
        }
    }
    Ok(())
}

/// Run the analytical evaluation and write every artifact into `dir`.
pub fn evaluate_to_dir(cfg: &LoadedConfig, dir: &Path, variant: Variant) -> Result<()> {
    let ev = Evaluator::new(cfg.scenario()?)?;
    let result = ev.evaluate(variant)?;
    let mut o = OutputDir::new(dir)?;
    for (name, text) in index_tables(&result.indices)? {
        o.write(&name, &text)?;
    }
    let f = &ev.fleet;
    o.write(
        "aggregate.csv",
        &csv_text(
            &[
                "time_h".into(),
                "mean_power_mw".into(),
                "mean_reserve_mw".into(),
                "std_mw".into(),
            ],
            (0..f.times_h.len()).map(|k| {
                vec![
                    f.times_h[k],
                    f.distributions[k].mean,
                    f.mean_reserve[k],
                    f.distributions[k].std_dev(),
                ]
            }),
        )?,
    )?;
    let mut header = vec!["time_h".to_string()];
    header.extend(f.grid.capacities.iter().map(|c| format!("rc_{c:.3}")));
    o.write(
        "ort_states.csv",
        &csv_text(
            &header,
            (0..f.times_h.len()).map(|k| {
                let mut row = vec![f.times_h[k]];
                row.extend(&f.state_probabilities[k]);
                row
            }),
        )?,
    )?;
    for &t in &ev.scenario.snapshots_h {
        let k = nearest_index(&f.times_h, t);
        let lz = if variant == Variant::WoOR {
            crate::multistate::Lz::unit()
        } else {
            f.ort_lz(k, ev.scenario.t_s, ev.scenario.standby_failure)
        };
        o.write(
            &format!("states_{}.csv", minutes_label(f.times_h[k])),
            &csv_text(
                &["capacity_mw".into(), "probability".into()],
                lz.iter().map(|(c, p)| vec![c, p]),
            )?,
        )?;
    }
    o.write(
        "state_counts.csv",
        &csv_text(
            &["time_h".into(), "states".into()],
            f.times_h
                .iter()
                .zip(&result.state_counts)
                .map(|(t, c)| vec![*t, *c as f64]),
        )?,
    )?;
    let mut m = manifest("evaluate", cfg, Some(variant), None)?;
    m.cluster_count = Some(f.clusters.len());
    m.timings_s = ev.timings.clone();
    m.timings_s.push(("indices".into(), result.seconds));
    o.finish(m)
}

/// Run the Monte Carlo oracle and write its traces into `dir`.
pub fn oracle_to_dir(
    cfg: &LoadedConfig,
    dir: &Path,
    variant: Variant,
    samples: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let ev = Evaluator::new(cfg.scenario()?)?;
    let samples = samples.unwrap_or(ev.scenario.mc.samples);
    let seed = seed.unwrap_or(ev.scenario.mc.seed);
    let start = Instant::now();
    let pool = if variant == Variant::WoOR {
        None
    } else {
        Some(replication_pool(&ev)?)
    };
    let pool_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let idx = mc_reliability(&ev, pool.as_ref(), variant, samples, seed)?;
    let mc_s = start.elapsed().as_secs_f64();
    let mut o = OutputDir::new(dir)?;
    for (name, text) in index_tables(&idx)? {
        o.write(&name, &text)?;
    }
    if let Some(pool) = &pool {
        let reps = pool.power_mw.len() as f64;
        o.write(
            "fleet.csv",
            &csv_text(
                &[
                    "time_h".into(),
                    "mean_power_mw".into(),
                    "mean_reserve_mw".into(),
                ],
                (0..pool.times_h.len()).map(|k| {
                    let p = pool.power_mw.iter().map(|r| r[k]).sum::<f64>() / reps;
                    let rc = (0..pool.power_mw.len())
                        .map(|r| pool.reserve(r, k))
                        .sum::<f64>()
                        / reps;
                    vec![pool.times_h[k], p, rc]
                }),
            )?,
        )?;
    }
    let mut m = manifest("oracle", cfg, Some(variant), Some(seed))?;
    m.cluster_count = Some(ev.fleet.clusters.len());
    m.timings_s = ev.timings.clone();
    m.timings_s.push(("replications".into(), pool_s));
    m.timings_s.push(("sampling".into(), mc_s));
    o.finish(m)
}

pub struct CompareReport {
    pub text: String,
    pub csv: String,
    /// (variant, index, analytical, monte carlo, relative error)
    pub rows: Vec<(Variant, &'static str, f64, f64, f64)>,
    pub timings: Vec<(String, f64)>,
}

fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Analytical and Monte Carlo end-of-horizon indices for each variant.
pub fn compare(
    cfg: &LoadedConfig,
    variants: &[Variant],
    samples: Option<usize>,
    seed: Option<u64>,
) -> Result<CompareReport> {
    let ev = Evaluator::new(cfg.scenario()?)?;
    let samples = samples.unwrap_or(ev.scenario.mc.samples);
    let seed = seed.unwrap_or(ev.scenario.mc.seed);
    let mut timings = ev.timings.clone();
    let start = Instant::now();
    let pool = if variants.iter().any(|v| *v != Variant::WoOR) {
        Some(replication_pool(&ev)?)
    } else {
        None
    };
    timings.push(("replications".into(), start.elapsed().as_secs_f64()));
    let mut rows = Vec::new();
    let mut ses = Vec::new();
    for &v in variants {
        let start = Instant::now();
        let anl = ev.evaluate(v)?.indices;
        timings.push((
            format!("analytical_{}", v.name()),
            start.elapsed().as_secs_f64(),
        ));
        let start = Instant::now();
        let mc = mc_reliability(&ev, pool.as_ref(), v, samples, seed)?;
        timings.push((
            format!("monte_carlo_{}", v.name()),
            start.elapsed().as_secs_f64(),
        ));
        let se = mc
            .standard_errors
            .as_ref()
            .expect("monte carlo reports errors");
        let last = anl.times_h.len() - 1;
        for (name, a, m, e) in [
            (
                "eens_mwh",
                anl.final_eens(),
                mc.final_eens(),
                se.eens_system[last],
            ),
            (
                "lole_h",
                anl.final_lole(),
                mc.final_lole(),
                se.lole_system[last],
            ),
        ] {
            rows.push((v, name, a, m, rel_err(a, m)));
            ses.push(e);
        }
    }
    let mut text = String::new();
    let _ = writeln!(
        text,
        "scenario {}  samples {samples}  seed {seed}",
        ev.scenario.name
    );
    let _ = writeln!(
        text,
        "{:<8} {:<10} {:>14} {:>14} {:>12} {:>10}",
        "variant", "index", "analytical", "monte_carlo", "mc_se", "rel_err"
    );
    for ((v, name, a, m, r), e) in rows.iter().zip(&ses) {
        let _ = writeln!(
            text,
            "{:<8} {:<10} {a:>14.6e} {m:>14.6e} {e:>12.3e} {:>9.2}%",
            v.name(),
            name,
            r * 100.0
        );
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "variant",
        "index",
        "analytical",
        "monte_carlo",
        "mc_se",
        "rel_err",
    ])
    .map_err(csv_err)?;
    for ((v, name, a, m, r), e) in rows.iter().zip(&ses) {
        w.write_record([
            v.name().to_string(),
            name.to_string(),
            a.to_string(),
            m.to_string(),
            e.to_string(),
            r.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let csv = String::from_utf8(
        w.into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?,
    )
    .expect("utf-8");
    Ok(CompareReport {
        text,
        csv,
        rows,
        timings,
    })
}
