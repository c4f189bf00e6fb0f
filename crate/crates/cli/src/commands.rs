use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fungen::diagnostics::{assemble_report, write_atomic, DiagnosticsSeries, ReportFiles, ReportInput};
use fungen::engine::{normalize_at_start, run_backtest};
use fungen::genfun::Generator;
use fungen::lambda::build_lambda;
use fungen::marketdata::{load_market_csv, write_market_csv_to, MarketPath};
use fungen::simulate::simulate_market;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{MarketSource, RunConfig};
use crate::{thread_cap, CliError};

/// The market path of one run.
pub fn load_market(cfg: &RunConfig, seed: Option<u64>) -> Result<MarketPath<f64>, CliError> {
    match &cfg.market {
        MarketSource::Csv(p) => Ok(load_market_csv(p)?),
        MarketSource::Simulator(_) => Ok(simulate_market(&cfg.sim_for(seed).expect("simulator source"))?),
    }
}

/// Runs `f` on every seed, in parallel up to `FUNGEN_THREADS`.
pub(crate) fn fan_out<R: Send>(
    seeds: &[Option<u64>],
    f: impl Fn(Option<u64>) -> R + Sync + Send,
) -> Result<Vec<R>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| seeds.par_iter().map(|&s| f(s)).collect()))
}

fn metadata() -> serde_json::Value {
    json!({
        "created_at": chrono::Utc::now().to_rfc3339(),
        "fungen_version": env!("CARGO_PKG_VERSION"),
    })
}

/// Writes one market CSV per run. `out` ending in `.csv` names the file of
/// a single run; anything else is a directory receiving
/// `<run_id>__market.csv` files.
pub fn cmd_simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    if !matches!(cfg.market, MarketSource::Simulator(_)) {
        return Err(CliError::Config("at `market`: simulate needs a simulator source".into()));
    }
    let seeds = cfg.run_seeds();
    let single = out.filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    if single.is_some() && seeds.len() != 1 {
        return Err(CliError::Config(format!(
            "at `seeds`: {} seeds need an output directory, not a single CSV file",
            seeds.len()
        )));
    }
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    let results = fan_out(&seeds, |seed| -> Result<PathBuf, CliError> {
        let path = load_market(cfg, seed)?;
        let target = match single {
            Some(f) => f.to_path_buf(),
            None => dir.join(format!("{}__market.csv", cfg.run_id(seed))),
        };
        let mut buf = Vec::new();
        write_market_csv_to(&mut buf, &path)?;
        write_atomic(&target, &buf)?;
        Ok(target)
    })?;
    results.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct BacktestRun {
    pub run_id: String,
    pub seed: Option<u64>,
    pub files: ReportFiles,
}

#[derive(Debug, Clone, Serialize)]
struct AggregateEntry {
    run_id: String,
    seed: Option<u64>,
    terminal_wealth: BTreeMap<String, f64>,
    t_star: BTreeMap<String, Option<usize>>,
    gamma_terminal: Option<f64>,
    e_terminal: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Aggregate {
    batch_id: String,
    generator: String,
    runs: Vec<AggregateEntry>,
    /// Per mode: number of runs whose `Γ` crossed the threshold.
    crossings: BTreeMap<String, usize>,
    mean_terminal_wealth: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct BacktestSummary {
    pub runs: Vec<BacktestRun>,
    pub aggregate: PathBuf,
}

fn backtest_one(cfg: &RunConfig, seed: Option<u64>, dir: &Path) -> Result<BacktestRun, CliError> {
    let run_id = cfg.run_id(seed);
    let path = load_market(cfg, seed)?;
    let lam = build_lambda(&cfg.lambda, &path)?;
    let g = normalize_at_start(cfg.genfun.catalog(), &path, &lam)?;
    let mut outputs = Vec::new();
    for mode in cfg.mode.modes() {
        let out = run_backtest(&path, &g, &lam, mode, cfg.c).map_err(|f| CliError::Backtest {
            run_id: run_id.clone(),
            mode: mode.label(),
            message: f.to_string(),
        })?;
        outputs.push((mode, out));
    }
    let diagnostics = DiagnosticsSeries::compute(&path, cfg.diversity_cap)?;
    let input = ReportInput {
        run_id: &run_id,
        seed,
        generator: g.name(),
        path: &path,
        outputs: outputs.iter().map(|(m, o)| (*m, o)).collect(),
        diagnostics: &diagnostics,
        epsilon: cfg.epsilon,
        config: cfg.canonical(seed),
        metadata: metadata(),
    };
    let files = assemble_report(dir, &input)?;
    Ok(BacktestRun { run_id, seed, files })
}

/// One report per seed plus `<batch_id>__aggregate.json`. Every seed is
/// attempted; any failure makes the whole command fail.
pub fn cmd_backtest(cfg: &RunConfig, out: Option<&Path>) -> Result<BacktestSummary, CliError> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    let seeds = cfg.run_seeds();
    let results = fan_out(&seeds, |seed| backtest_one(cfg, seed, &dir))?;
    let total = results.len();
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => errors.push(e),
        }
    }
    if errors.len() == 1 && total == 1 {
        return Err(errors.pop().expect("one error"));
    }
    if !errors.is_empty() {
        let details = errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n");
        return Err(CliError::Batch { failed: errors.len(), total, details });
    }

    let mut crossings = BTreeMap::new();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    let entries: Vec<AggregateEntry> = runs
        .iter()
        .map(|r| {
            let s = &r.files.summary_data;
            for (mode, m) in &s.modes {
                *crossings.entry(mode.clone()).or_insert(0) += usize::from(m.t_star.is_some());
                *sums.entry(mode.clone()).or_insert(0.0) += m.terminal_wealth;
            }
            AggregateEntry {
                run_id: r.run_id.clone(),
                seed: r.seed,
                terminal_wealth: s.modes.iter().map(|(k, m)| (k.clone(), m.terminal_wealth)).collect(),
                t_star: s.modes.iter().map(|(k, m)| (k.clone(), m.t_star)).collect(),
                gamma_terminal: s.gamma_terminal,
                e_terminal: s.e_terminal,
            }
        })
        .collect();
    let n = entries.len().max(1) as f64;
    let agg = Aggregate {
        batch_id: cfg.batch_id(),
        generator: cfg.genfun.catalog().name().to_string(),
        runs: entries,
        crossings,
        mean_terminal_wealth: sums.into_iter().map(|(k, v)| (k, v / n)).collect(),
    };
    let aggregate = dir.join(format!("{}__aggregate.json", agg.batch_id));
    let bytes = serde_json::to_vec_pretty(&agg).map_err(fungen::diagnostics::ReportError::from)?;
    write_atomic(&aggregate, &bytes)?;
    Ok(BacktestSummary { runs, aggregate })
}

