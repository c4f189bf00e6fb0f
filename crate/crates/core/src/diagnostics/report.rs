use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{arbitrage_check, max_drawdown, BacktestOutput, Mode, StrategyLedger};
use crate::marketdata::MarketPath;

use super::DiagnosticsSeries;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("summary serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

/// A dated table of named series, one row per trading day.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub dates: Vec<String>,
    pub columns: Vec<String>,
    /// `rows[l][j]` is column `j` on day `l`.
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new(dates: Vec<String>) -> Self {
        Self { rows: vec![Vec::new(); dates.len()], dates, columns: Vec::new() }
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: &[f64]) {
        assert_eq!(values.len(), self.dates.len(), "series length differs from the date grid");
        self.columns.push(name.into());
        for (row, &v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv { path: path.to_path_buf(), source }
}

/// `day,date,<columns...>`; floats use the shortest round-trip form.
pub fn write_series_csv(path: &Path, table: &SeriesTable) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["day".to_string(), "date".to_string()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header).map_err(csv_err(path))?;
    for (l, (date, row)) in table.dates.iter().zip(&table.rows).enumerate() {
        let mut rec = vec![l.to_string(), date.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io { path: path.to_path_buf(), source: e.into_error() })?;
    write_atomic(path, &bytes)
}

pub fn read_series_csv(path: &Path) -> Result<SeriesTable, ReportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.len() < 2 || &header[0] != "day" || &header[1] != "date" {
        return Err(ReportError::Parse { path: path.to_path_buf(), line: 1, message: "expected day,date,...".into() });
    }
    let mut table = SeriesTable { dates: vec![], columns: header.iter().skip(2).map(String::from).collect(), rows: vec![] };
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = k + 2;
        let parse_err = |message: String| ReportError::Parse { path: path.to_path_buf(), line, message };
        if rec[0].parse::<usize>().ok() != Some(k) {
            return Err(parse_err(format!("day index {} out of sequence", &rec[0])));
        }
        table.dates.push(rec[1].to_string());
        let row = rec
            .iter()
            .skip(2)
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        table.rows.push(row);
    }
    Ok(table)
}

/// `day,theta_<id>...,phi_<id>...,C,v_begin,v_end,G,Gamma_defect,Gamma_closed`.
pub fn write_ledger_csv(path: &Path, assets: &[String], ledger: &StrategyLedger<f64>) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["day".to_string()];
    header.extend(assets.iter().map(|a| format!("theta_{a}")));
    header.extend(assets.iter().map(|a| format!("phi_{a}")));
    header.extend(["C", "v_begin", "v_end", "G", "Gamma_defect", "Gamma_closed"].map(String::from));
    w.write_record(&header).map_err(csv_err(path))?;
    for (l, d) in ledger.days.iter().enumerate() {
        let mut rec = vec![l.to_string()];
        rec.extend(d.theta.iter().map(f64::to_string));
        rec.extend(d.phi.iter().map(f64::to_string));
        rec.extend([d.defect_c, d.v_begin, d.v_end, d.g_end, d.gamma_defect].map(|v| v.to_string()));
        rec.push(d.gamma_closed.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io { path: path.to_path_buf(), source: e.into_error() })?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub terminal_wealth: f64,
    pub min_wealth: f64,
    pub max_drawdown: f64,
    pub c: f64,
    pub threshold: f64,
    /// First day with `Γ` above the threshold, if any.
    pub t_star: Option<usize>,
    pub t_star_date: Option<String>,
    pub max_self_financing_residual: f64,
    pub max_incremental_gap: f64,
    /// Additive mode only.
    pub max_ledger_identity_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub seed: Option<u64>,
    pub generator: String,
    pub n_days: usize,
    pub n_assets: usize,
    pub modes: BTreeMap<String, ModeSummary>,
    pub gamma_terminal: Option<f64>,
    pub gamma_closed_terminal: Option<f64>,
    pub e_terminal: Option<f64>,
    pub diversity_cap: f64,
    /// Membership-change days.
    pub flagged_days: Vec<usize>,
    pub config: serde_json::Value,
    /// The only non-deterministic block (timestamps, versions).
    pub metadata: serde_json::Value,
}

pub struct ReportInput<'a> {
    pub run_id: &'a str,
    pub seed: Option<u64>,
    pub generator: &'a str,
    pub path: &'a MarketPath<f64>,
    pub outputs: Vec<(Mode, &'a BacktestOutput<f64>)>,
    pub diagnostics: &'a DiagnosticsSeries<f64>,
    pub epsilon: f64,
    pub config: serde_json::Value,
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub series: Vec<PathBuf>,
    pub ledgers: Vec<PathBuf>,
    pub summary: PathBuf,
    pub summary_data: RunSummary,
}

/// Writes `<run_id>__{wealth,gamma,D,E,diversity}.csv`, one ledger per mode
/// and `<run_id>__summary.json` into `dir`.
pub fn assemble_report(dir: &Path, input: &ReportInput<'_>) -> Result<ReportFiles, ReportError> {
    let id = input.run_id;
    let file = |stem: &str, ext: &str| dir.join(format!("{id}__{stem}.{ext}"));
    let dates: Vec<String> = input.path.dates().iter().map(|d| d.to_string()).collect();
    let mut series = Vec::new();

    let mut wealth = SeriesTable::new(dates.clone());
    for (mode, out) in &input.outputs {
        wealth.push_column(format!("v_{}", mode.label()), &out.wealth);
    }
    let mut gamma = SeriesTable::new(dates.clone());
    if let Some((_, out)) = input.outputs.first() {
        gamma.push_column("gamma_defect", &out.gamma_defect.values);
        if let Some(gc) = &out.gamma_closed {
            gamma.push_column("gamma_closed", &gc.values);
        }
    }
    let single = |name: &str, v: &[f64]| {
        let mut t = SeriesTable::new(dates.clone());
        t.push_column(name, v);
        t
    };
    let diag = input.diagnostics;
    for (stem, table) in [
        ("wealth", wealth),
        ("gamma", gamma),
        ("D", single("D", &diag.d_indicator)),
        ("E", single("E", &diag.e_cumulative)),
        ("diversity", single("diversity", &diag.diversity_capped)),
    ] {
        let p = file(stem, "csv");
        write_series_csv(&p, &table)?;
        series.push(p);
    }

    let mut ledgers = Vec::new();
    let mut modes = BTreeMap::new();
    for (mode, out) in &input.outputs {
        let p = file(&format!("ledger_{}", mode.label()), "csv");
        write_ledger_csv(&p, input.path.assets(), &out.ledger)?;
        ledgers.push(p);
        let verdict = arbitrage_check(&out.gamma_defect.values, *mode, input.epsilon);
        modes.insert(
            mode.label().to_string(),
            ModeSummary {
                terminal_wealth: out.wealth.last().copied().unwrap_or(f64::NAN),
                min_wealth: out.wealth.iter().copied().fold(f64::INFINITY, f64::min),
                max_drawdown: max_drawdown(&out.wealth),
                c: out.ledger.c_shift,
                threshold: verdict.threshold,
                t_star: verdict.t_star,
                t_star_date: verdict.t_star.map(|l| dates[l].clone()),
                max_self_financing_residual: out.ledger.max_self_financing_residual(),
                max_incremental_gap: out.ledger.max_incremental_gap(),
                max_ledger_identity_residual: (*mode == Mode::Additive)
                    .then(|| out.ledger.max_ledger_identity_residual()),
            },
        );
    }

    let first = input.outputs.first().map(|(_, o)| *o);
    let summary_data = RunSummary {
        run_id: id.to_string(),
        seed: input.seed,
        generator: input.generator.to_string(),
        n_days: input.path.n_days(),
        n_assets: input.path.n_assets(),
        modes,
        gamma_terminal: first.and_then(|o| o.gamma_defect.terminal()),
        gamma_closed_terminal: first.and_then(|o| o.gamma_closed.as_ref().and_then(|g| g.terminal())),
        e_terminal: diag.e_cumulative.last().copied(),
        diversity_cap: diag.cap,
        flagged_days: diag.flagged_days.clone(),
        config: input.config.clone(),
        metadata: input.metadata.clone(),
    };
    let summary = file("summary", "json");
    write_atomic(&summary, &serde_json::to_vec_pretty(&summary_data)?)?;
    Ok(ReportFiles { series, ledgers, summary, summary_data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = SeriesTable::new(vec!["2000-01-03".into(), "2000-01-04".into(), "2000-01-05".into()]);
        t.push_column("a", &[0.1, 1.0 / 3.0, -2.5e-17]);
        t.push_column("b", &[f64::MAX, 1e300, 0.0]);
        let p = dir.path().join("x.csv");
        write_series_csv(&p, &t).unwrap();
        assert_eq!(read_series_csv(&p).unwrap(), t);
        assert_eq!(t.column("a").unwrap()[1], 1.0 / 3.0);
    }

    #[test]
    fn malformed_series_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "day,date,a\n0,2000-01-03,1.0\n1,2000-01-04,oops\n").unwrap();
        match read_series_csv(&p) {
            Err(ReportError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested").join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
