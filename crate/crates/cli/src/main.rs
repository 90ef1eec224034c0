//! `kacrice`: simulate random fields, measure level sets, evaluate Kac-Rice
//! integrals and run paired experiments.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kacrice::error::{Error, Result};
use kacrice::exec::with_workers;
use kacrice::field_models::sample_realization;
use kacrice::harness::{
    evaluate_rhs, exit, measure_lhs, paper_examples, run_crofton, run_experiment, run_suite,
    CroftonConfig, ExperimentConfig, Manifest, Verdict,
};
use kacrice::level_set::GridSample;
use kacrice::rng::derive_seed;
use kacrice::SCHEMA_VERSION;

#[derive(Parser)]
#[command(name = "kacrice", version, about = "Level sets of random fields and the Kac-Rice formula")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump realizations sampled on the lattice.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of realizations to dump.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Empirical side only.
    Measure(Common),
    /// Kac-Rice side only.
    Kacrice(Common),
    /// Integral-geometry checks.
    Crofton(Common),
    /// Paired experiment with a verdict.
    Validate(Common),
    /// Run a manifest of experiments.
    Suite {
        #[command(flatten)]
        common: Common,
        /// Use the shipped paper-examples manifest instead of `--config`.
        #[arg(long)]
        paper_examples: bool,
        /// Only run the experiments with these ids.
        #[arg(long = "only", value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config (manifest for `suite`). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = match &cli.command {
        Command::Simulate { common, .. } | Command::Suite { common, .. } => common.workers,
        Command::Measure(c) | Command::Kacrice(c) | Command::Crofton(c) | Command::Validate(c) => {
            c.workers
        }
    };
    let run = || dispatch(&cli.command);
    let result = match workers {
        Some(w) => with_workers(w, run),
        None => run(),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("kacrice: {e}");
            ExitCode::from(exit::for_error(&e) as u8)
        }
    }
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => {
            let s = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            Ok(serde_json::from_str(&s)?)
        }
        None => Ok(T::default()),
    }
}

fn experiment(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = read_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `text` to `<out>/<name>` or stdout.
fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        None => {
            let mut o = io::stdout().lock();
            o.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                o.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Simulate { common, count } => simulate(common, *count),
        Command::Measure(c) => {
            let cfg = experiment(c)?;
            let lhs = measure_lhs(&cfg)?;
            let text = match c.format {
                Format::Json => json(&lhs)?,
                Format::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        schema_version: u32,
                        index: usize,
                        value: f64,
                    }
                    let rows: Vec<Row> = lhs
                        .values
                        .iter()
                        .enumerate()
                        .map(|(index, &value)| Row {
                            schema_version: SCHEMA_VERSION,
                            index,
                            value,
                        })
                        .collect();
                    csv_rows(&rows)?
                }
            };
            emit(&c.out, &format!("{}-lhs.{}", cfg.id, c.format.ext()), &text)?;
            Ok(exit::PASS)
        }
        Command::Kacrice(c) => {
            let cfg = experiment(c)?;
            let rhs = evaluate_rhs(&cfg)?;
            let text = match c.format {
                Format::Json => rhs.to_json()? + "\n",
                Format::Csv => {
                    #[derive(Serialize)]
                    struct Row<'a> {
                        schema_version: u32,
                        quantity: &'a str,
                        value: f64,
                        quadrature_error: f64,
                        mc_std_error: f64,
                        truncation_error: f64,
                        total_error: f64,
                        clamped_mass: f64,
                    }
                    csv_rows(&[Row {
                        schema_version: SCHEMA_VERSION,
                        quantity: &rhs.quantity,
                        value: rhs.value,
                        quadrature_error: rhs.quadrature_error,
                        mc_std_error: rhs.mc_std_error,
                        truncation_error: rhs.truncation_error,
                        total_error: rhs.total_error,
                        clamped_mass: rhs.clamped_mass,
                    }])?
                }
            };
            emit(&c.out, &format!("{}-rhs.{}", cfg.id, c.format.ext()), &text)?;
            Ok(exit::PASS)
        }
        Command::Crofton(c) => {
            let mut cfg: CroftonConfig = read_config(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let rep = run_crofton(&cfg)?;
            let text = match c.format {
                Format::Json => json(&rep)?,
                Format::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        schema_version: u32,
                        check: String,
                        exact: f64,
                        estimate: f64,
                        std_error: f64,
                        verdict: Verdict,
                    }
                    let mut rows = Vec::new();
                    for r in &rep.favard {
                        rows.push(Row {
                            schema_version: SCHEMA_VERSION,
                            check: "favard".into(),
                            exact: r.length,
                            estimate: r.estimate,
                            std_error: r.std_error,
                            verdict: r.verdict,
                        });
                    }
                    for r in &rep.det_constants {
                        rows.push(Row {
                            schema_version: SCHEMA_VERSION,
                            check: format!("det_{}_{}", r.ambient, r.d),
                            exact: r.exact,
                            estimate: r.estimate,
                            std_error: r.std_error,
                            verdict: r.verdict,
                        });
                    }
                    for r in &rep.identity {
                        rows.push(Row {
                            schema_version: SCHEMA_VERSION,
                            check: format!("crofton_{}x{}_{}", r.rows, r.cols, r.matrix),
                            exact: r.normal_jacobian,
                            estimate: r.estimate,
                            std_error: r.std_error,
                            verdict: r.verdict,
                        });
                    }
                    csv_rows(&rows)?
                }
            };
            emit(&c.out, &format!("crofton.{}", c.format.ext()), &text)?;
            Ok(verdict_code(rep.verdict))
        }
        Command::Validate(c) => {
            let cfg = experiment(c)?;
            let rep = run_experiment(&cfg)?;
            let text = match c.format {
                Format::Json => rep.to_json()?,
                Format::Csv => {
                    #[derive(Serialize)]
                    struct Row<'a> {
                        schema_version: u32,
                        id: &'a str,
                        estimator: &'a str,
                        lhs_mean: f64,
                        lhs_std_error: f64,
                        rhs_value: f64,
                        rhs_total_error: f64,
                        z_score: Option<f64>,
                        verdict: Verdict,
                    }
                    csv_rows(&[Row {
                        schema_version: SCHEMA_VERSION,
                        id: &rep.id,
                        estimator: &rep.estimator,
                        lhs_mean: rep.lhs_mean,
                        lhs_std_error: rep.lhs_std_error,
                        rhs_value: rep.rhs.value,
                        rhs_total_error: rep.rhs.total_error,
                        z_score: rep.z_score,
                        verdict: rep.verdict,
                    }])?
                }
            };
            emit(&c.out, &format!("{}.{}", cfg.id, c.format.ext()), &text)?;
            eprintln!(
                "{}: {:?} (lhs {:.6} ± {:.6}, rhs {:.6} ± {:.6}, {:.1}s)",
                rep.id,
                rep.verdict,
                rep.lhs_mean,
                rep.lhs_std_error,
                rep.rhs.value,
                rep.rhs.total_error,
                rep.wall_time.as_secs_f64()
            );
            Ok(verdict_code(rep.verdict))
        }
        Command::Suite {
            common,
            paper_examples: builtin,
            only,
        } => {
            let mut manifest = if *builtin {
                paper_examples()
            } else {
                let Some(path) = &common.config else {
                    return Err(Error::Config("suite needs --config or --paper-examples".into()));
                };
                let s = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                Manifest::from_json(&s)?
            };
            if !only.is_empty() {
                let ids: Vec<&str> = only.iter().map(String::as_str).collect();
                manifest = manifest.select(&ids);
            }
            if let Some(s) = common.seed {
                for e in &mut manifest.experiments {
                    e.seed = s;
                }
            }
            let summary = run_suite(&manifest, common.out.as_deref())?;
            if common.out.is_none() || common.format == Format::Csv {
                let mut buf = Vec::new();
                summary.write_csv(&mut buf)?;
                io::stdout().write_all(&buf)?;
            }
            Ok(summary.exit_code())
        }
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => exit::PASS,
        Verdict::Fail => exit::VERDICT_FAIL,
    }
}

fn simulate(c: &Common, count: usize) -> Result<i32> {
    let cfg = experiment(c)?;
    let res = cfg.resolution();
    let out: &Path = c
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("simulate needs --out".into()))?;
    fs::create_dir_all(out)?;
    for i in 0..count {
        let seed = derive_seed(cfg.seed, &cfg.id, i as u64);
        let r = sample_realization(&cfg.model, seed)?;
        let grid = GridSample::sample(&r, &cfg.domain, res, Some(seed))?;
        match c.format {
            Format::Json => grid.write_binary(&out.join(format!("{}-{i}.bin", cfg.id)))?,
            Format::Csv => {
                let mut w = csv::Writer::from_path(out.join(format!("{}-{i}.csv", cfg.id)))?;
                let (d, dim) = (grid.output_dim, grid.input_dim());
                let mut header = vec!["schema_version".to_string()];
                header.extend((0..dim).map(|k| format!("t{k}")));
                header.extend((0..d).map(|k| format!("x{k}")));
                header.extend((0..d * dim).map(|k| format!("j{k}")));
                w.write_record(&header)?;
                for node in 0..grid.node_count() {
                    let mut rec = vec![SCHEMA_VERSION.to_string()];
                    rec.extend(grid.coordinates(node).iter().map(f64::to_string));
                    rec.extend(grid.value(node).iter().map(f64::to_string));
                    rec.extend(grid.jacobian(node).iter().map(f64::to_string));
                    w.write_record(&rec)?;
                }
                w.flush()?;
            }
        }
    }
    Ok(exit::PASS)
}
