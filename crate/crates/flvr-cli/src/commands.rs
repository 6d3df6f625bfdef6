//! The six subcommands: ingest, fit, hedge, panel, test, simulate.
//!
//! Every command writes its CSV outputs plus one JSON summary into the
//! output directory and finishes with a `run_manifest.json`. Output files are
//! byte-reproducible for identical inputs and configuration; only manifest
//! timestamps differ between runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use flvr::activity::{
    activity_time, estimate_initial_tau, first_half_window, ActivityTimePath, TauSearch, TrendLine,
};
use flvr::azcb::{run_hedge, AzcbContract, CostModel, HedgeLedger};
use flvr::market_data::{
    load_series, prepare, write_series_csv, CsvSchema, MarketData, SavingsAccountOptions,
    SeriesRole,
};
use flvr::panel::{
    build_panel, run_panel, sample_moments, t_test, t_test_from_moments, Histogram, PanelResult,
    PanelWindow, TestReport,
};
use flvr::sim::{
    hedge_convergence_experiment, mc_zcb_price_from_terminals, simulate_paths,
    simulate_terminal_values, SimConfig,
};

use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;
use crate::{Cli, CliError};

pub struct Stage {
    out_dir: PathBuf,
    manifest: ManifestBuilder,
}

impl Stage {
    pub fn new(cli: &Cli, config: &RunConfig, command: &str) -> Result<Self, CliError> {
        let out_dir = cli
            .out
            .clone()
            .or_else(|| config.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out_dir).map_err(|e| {
            CliError::config(format!(
                "output directory {} is not writable: {e}",
                out_dir.display()
            ))
        })?;
        Ok(Self {
            out_dir,
            manifest: ManifestBuilder::new(command, &config.canonical_json()),
        })
    }

    fn track_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.input(path)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.output(name);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::config(format!("serialization failed: {e}")))?;
        self.write(name, &text)
    }

    fn finish(self) -> Result<(), CliError> {
        self.manifest.write(&self.out_dir)
    }
}

fn schema(config: &RunConfig) -> Result<CsvSchema, CliError> {
    let mut schema = CsvSchema::default();
    if let Some(c) = &config.inputs.date_column {
        schema.date_column = c.clone();
    }
    if let Some(c) = &config.inputs.value_column {
        schema.value_column = c.clone();
    }
    if let Some(d) = &config.inputs.delimiter {
        let bytes = d.as_bytes();
        if bytes.len() != 1 {
            return Err(CliError::config(format!(
                "delimiter must be a single character, got {d:?}"
            )));
        }
        schema.delimiter = bytes[0];
    }
    Ok(schema)
}

struct LoadedMarket {
    data: MarketData,
    index_skipped: usize,
    rates_skipped: usize,
}

fn load_market(
    stage: &mut Stage,
    config: &RunConfig,
    index_flag: &Option<PathBuf>,
    rates_flag: &Option<PathBuf>,
) -> Result<LoadedMarket, CliError> {
    let index_path = index_flag
        .clone()
        .or_else(|| config.inputs.index.clone())
        .ok_or_else(|| CliError::config("no index CSV given (--index or [inputs].index)".into()))?;
    let rates_path = rates_flag
        .clone()
        .or_else(|| config.inputs.rates.clone())
        .ok_or_else(|| CliError::config("no rates CSV given (--rates or [inputs].rates)".into()))?;
    stage.track_input(&index_path)?;
    stage.track_input(&rates_path)?;
    let schema = schema(config)?;
    let index = load_series(&index_path, &schema, SeriesRole::IndexLevel)?;
    let rates = load_series(&rates_path, &schema, SeriesRole::RatePercent)?;
    let options = SavingsAccountOptions {
        max_rate_percent: config.ingest.max_rate_percent.unwrap_or(40.0),
    };
    let mut data = prepare(index.series, &rates.series, options)?;
    data.report.index_rows_skipped = index.skipped_rows;
    data.report.rate_rows_skipped = rates.skipped_rows;
    Ok(LoadedMarket {
        data,
        index_skipped: index.skipped_rows,
        rates_skipped: rates.skipped_rows,
    })
}

fn series_csv(dates: &[NaiveDate], values: &[f64]) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_series_csv(&mut buf, dates, values)?;
    String::from_utf8(buf).map_err(|e| CliError::data(format!("non-utf8 csv: {e}")))
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct IngestSummary {
    observations: usize,
    first_date: NaiveDate,
    last_date: NaiveDate,
    index_rows_skipped: usize,
    rate_rows_skipped: usize,
    rates_forward_filled: usize,
    index_dates_dropped: usize,
    account_dates_dropped: usize,
}

pub fn cmd_ingest(
    cli: &Cli,
    config: &RunConfig,
    index: &Option<PathBuf>,
    rates: &Option<PathBuf>,
) -> Result<(), CliError> {
    let mut stage = Stage::new(cli, config, "ingest")?;
    let loaded = load_market(&mut stage, config, index, rates)?;
    let md = &loaded.data;

    stage.write(
        "index.csv",
        &series_csv(md.index.dates(), md.index.values())?,
    )?;
    stage.write(
        "rates.csv",
        &series_csv(md.rates_on_grid.dates(), md.rates_on_grid.values())?,
    )?;
    stage.write(
        "savings_account.csv",
        &series_csv(md.account.dates(), md.account.values())?,
    )?;
    stage.write(
        "discounted_index.csv",
        &series_csv(md.discounted.dates(), md.discounted.values())?,
    )?;
    let summary = IngestSummary {
        observations: md.discounted.len(),
        first_date: md.discounted.dates()[0],
        last_date: *md.discounted.dates().last().unwrap(),
        index_rows_skipped: loaded.index_skipped,
        rate_rows_skipped: loaded.rates_skipped,
        rates_forward_filled: md.report.rates_forward_filled,
        index_dates_dropped: md.report.index_dates_dropped,
        account_dates_dropped: md.report.account_dates_dropped,
    };
    stage.write_json("ingest_summary.json", &summary)?;
    println!(
        "ingested {} observations {} -> {} (skipped {} index / {} rate rows, {} rates filled forward)",
        summary.observations,
        summary.first_date,
        summary.last_date,
        summary.index_rows_skipped,
        summary.rate_rows_skipped,
        summary.rates_forward_filled
    );
    stage.finish()
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct FitReport {
    tau0: f64,
    intercept: f64,
    slope_per_year: f64,
    r_squared: f64,
    window_start: NaiveDate,
    window_end: NaiveDate,
    at_bracket_edge: bool,
    bracket_lo: f64,
    bracket_hi: f64,
}

/// Shared by fit, hedge and panel: the estimated initial activity time and
/// the trendline fitted over the first half of the sample.
fn fit_first_half(
    md: &MarketData,
    config: &RunConfig,
) -> Result<(f64, TrendLine, TauSearch, bool), CliError> {
    let window = first_half_window(md.discounted.len());
    let mut search = match (config.fit.tau_lo, config.fit.tau_hi) {
        (Some(lo), Some(hi)) => TauSearch::bracket(lo, hi)?,
        (None, None) => TauSearch::default_for_window(&md.discounted, window)?,
        _ => {
            return Err(CliError::config(
                "set both [fit].tau_lo and [fit].tau_hi, or neither".into(),
            ))
        }
    };
    if let Some(points) = config.fit.grid_points {
        search.grid_points = points;
    }
    if let Some(tolerance) = config.fit.tolerance {
        search.tolerance = tolerance;
    }
    let estimate = estimate_initial_tau(&md.discounted, window, &search)?;
    Ok((
        estimate.tau0,
        estimate.trendline,
        search,
        estimate.at_bracket_edge,
    ))
}

pub fn cmd_fit(
    cli: &Cli,
    config: &RunConfig,
    index: &Option<PathBuf>,
    rates: &Option<PathBuf>,
) -> Result<(), CliError> {
    let mut stage = Stage::new(cli, config, "fit")?;
    let loaded = load_market(&mut stage, config, index, rates)?;
    let md = &loaded.data;
    let (tau0, line, search, at_edge) = fit_first_half(md, config)?;
    if at_edge {
        eprintln!(
            "warning: tau0 maximizer sits on the bracket edge [{}, {}]; widen [fit].tau_lo/tau_hi",
            search.lo, search.hi
        );
    }

    let path = activity_time(&md.discounted, tau0);
    let mut csv = String::from("date,tau,tau_trend\n");
    for (date, tau) in path.dates().iter().zip(path.tau()) {
        let trend = line.value_at(*date);
        writeln!(csv, "{date},{tau},{trend}").expect("string write");
    }
    stage.write("activity_time.csv", &csv)?;

    let window = first_half_window(md.discounted.len());
    let report = FitReport {
        tau0,
        intercept: line.intercept,
        slope_per_year: line.slope_per_year,
        r_squared: line.r_squared,
        window_start: md.discounted.dates()[window.0],
        window_end: md.discounted.dates()[window.1],
        at_bracket_edge: at_edge,
        bracket_lo: search.lo,
        bracket_hi: search.hi,
    };
    stage.write_json("fit_report.json", &report)?;
    println!(
        "tau0* = {:.6}, trendline slope = {:.6}/y, R^2 = {:.4} on {} -> {}",
        report.tau0,
        report.slope_per_year,
        report.r_squared,
        report.window_start,
        report.window_end
    );
    stage.finish()
}

// ---------------------------------------------------------------------------
// hedge
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct HedgeReport {
    start_date: NaiveDate,
    maturity_date: NaiveDate,
    steps: usize,
    cost_bp: f64,
    tau_bar_maturity: f64,
    initial_price: f64,
    payoff: f64,
    flvr_at_maturity: f64,
    max_abs_error: f64,
    total_cost: f64,
    frozen_at: Option<NaiveDate>,
    starts_in_second_half: bool,
}

fn ledger_csv(
    ledger: &HedgeLedger,
    s: &flvr::market_data::DiscountedIndex,
    tau: &ActivityTimePath,
) -> String {
    let mut csv = String::from("date,s,tau,price,portfolio,fraction,hedge_error,flvr,cost_paid\n");
    for (k, global) in (ledger.start_index..=ledger.maturity_index).enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            s.dates()[global],
            s.values()[global],
            tau.tau()[global],
            ledger.price[k],
            ledger.portfolio[k],
            ledger.fraction[k],
            ledger.hedge_error[k],
            ledger.flvr[k],
            ledger.cost_paid[k]
        )
        .expect("string write");
    }
    csv
}

pub fn cmd_hedge(
    cli: &Cli,
    config: &RunConfig,
    index: &Option<PathBuf>,
    rates: &Option<PathBuf>,
    start: Option<NaiveDate>,
    maturity: Option<NaiveDate>,
    cost_bp: Option<f64>,
) -> Result<(), CliError> {
    let mut stage = Stage::new(cli, config, "hedge")?;
    let loaded = load_market(&mut stage, config, index, rates)?;
    let md = &loaded.data;
    let (tau0, line, _, _) = fit_first_half(md, config)?;
    let tau = activity_time(&md.discounted, tau0);

    let dates = md.discounted.dates();
    let window = first_half_window(md.discounted.len());
    let start_date = start.or(config.hedge.start).unwrap_or(dates[window.1]); // default: initiation at the half point
    let maturity_date = maturity
        .or(config.hedge.maturity)
        .unwrap_or(*dates.last().unwrap());
    let start_index = dates.partition_point(|&d| d < start_date);
    if start_index >= dates.len() {
        return Err(CliError::config(format!(
            "start {start_date} lies past the data"
        )));
    }
    let maturity_index = dates.partition_point(|&d| d < maturity_date);
    if maturity_index >= dates.len() {
        return Err(CliError::config(format!(
            "maturity {maturity_date} lies past the data (last {})",
            dates.last().unwrap()
        )));
    }
    let cost_bp = cost_bp.or(config.hedge.cost_bp).unwrap_or(0.0);
    let costs = CostModel::from_bp(cost_bp)?;

    let contract = AzcbContract::new(start_index, maturity_index, line)?;
    let in_second_half = contract.starts_in_second_half(md.discounted.len());
    if !in_second_half {
        eprintln!(
            "note: initiation {start_date} lies inside the trendline's fit window; \
             pricing there uses in-sample information"
        );
    }
    let ledger = run_hedge(&contract, &md.discounted, &tau, &costs)?;

    stage.write(
        "hedge_ledger.csv",
        &ledger_csv(&ledger, &md.discounted, &tau),
    )?;
    let report = HedgeReport {
        start_date: dates[start_index],
        maturity_date: dates[maturity_index],
        steps: ledger.len(),
        cost_bp,
        tau_bar_maturity: ledger.tau_bar_maturity,
        initial_price: ledger.initial_price(),
        payoff: ledger.payoff,
        flvr_at_maturity: ledger.flvr_at_maturity(),
        max_abs_error: ledger.max_abs_error,
        total_cost: ledger.total_cost(),
        frozen_at: ledger.frozen_at.map(|k| dates[ledger.start_index + k]),
        starts_in_second_half: in_second_half,
    };
    stage.write_json("hedge_report.json", &report)?;
    println!(
        "hedged {} -> {}: P0 = {:.6}, payoff = {:.6}, V(T) = {:.6}, max |C| = {:.6}, costs = {:.6}",
        report.start_date,
        report.maturity_date,
        report.initial_price,
        report.payoff,
        report.flvr_at_maturity,
        report.max_abs_error,
        report.total_cost
    );
    stage.finish()
}

// ---------------------------------------------------------------------------
// panel + test
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PanelSummary {
    contracts: usize,
    term_min_months: u32,
    term_max_months: u32,
    cost_bp: f64,
    first_initiation: NaiveDate,
    last_initiation: NaiveDate,
    mean_flvr: f64,
    std_flvr: Option<f64>,
    worst_abs_error: f64,
    std_abs_error: Option<f64>,
}

#[derive(Serialize)]
struct TestReportJson {
    n: usize,
    sample_mean: f64,
    sample_std: f64,
    alpha: f64,
    df: usize,
    t_statistic: f64,
    critical_value: f64,
    mean_threshold: f64,
    reject: bool,
    reject_by_threshold: bool,
}

impl From<&TestReport> for TestReportJson {
    fn from(r: &TestReport) -> Self {
        Self {
            n: r.n,
            sample_mean: r.sample_mean,
            sample_std: r.sample_std,
            alpha: r.alpha,
            df: r.df,
            t_statistic: r.t_statistic,
            critical_value: r.critical_value,
            mean_threshold: r.mean_threshold,
            reject: r.reject,
            reject_by_threshold: r.reject_by_threshold,
        }
    }
}

fn histogram_csv(hist: &Histogram) -> String {
    let mut csv = String::from("bin_lo,bin_hi,count\n");
    for (k, &count) in hist.counts.iter().enumerate() {
        let lo = hist.edge(k);
        let hi = if k + 1 == hist.counts.len() {
            hist.hi
        } else {
            hist.edge(k + 1)
        };
        writeln!(csv, "{lo},{hi},{count}").expect("string write");
    }
    csv
}

fn panel_csv(result: &PanelResult) -> String {
    let mut csv = String::from("id,start,maturity,term_months,flvr,max_abs_error\n");
    for row in &result.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.contract.id,
            row.contract.start_date,
            row.contract.maturity_date,
            row.contract.term_months,
            row.flvr,
            row.max_abs_error
        )
        .expect("string write");
    }
    csv
}

fn print_test_block(report: &TestReport) {
    println!("one-sided t-test of H0: mean = 0 vs H1: mean > 0");
    println!("  n          = {}", report.n);
    println!("  mean       = {:.6}", report.sample_mean);
    println!("  std        = {:.6}", report.sample_std);
    println!("  T          = {:.4}", report.t_statistic);
    println!(
        "  t(1-{:e}, {}) = {:.4}",
        report.alpha, report.df, report.critical_value
    );
    println!("  threshold  = {:.6}", report.mean_threshold);
    println!(
        "  decision   = {}",
        if report.reject {
            "reject H0"
        } else {
            "fail to reject H0"
        }
    );
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_panel(
    cli: &Cli,
    config: &RunConfig,
    index: &Option<PathBuf>,
    rates: &Option<PathBuf>,
    term_min: Option<u32>,
    term_max: Option<u32>,
    cost_bp: Option<f64>,
    alpha: Option<f64>,
    init_start: Option<NaiveDate>,
    init_end: Option<NaiveDate>,
    bins: Option<usize>,
) -> Result<(), CliError> {
    let mut stage = Stage::new(cli, config, "panel")?;
    let loaded = load_market(&mut stage, config, index, rates)?;
    let md = &loaded.data;
    let (tau0, line, _, _) = fit_first_half(md, config)?;
    let tau = activity_time(&md.discounted, tau0);

    let term_min = term_min.or(config.panel.term_min_months).unwrap_or(180);
    let term_max = term_max.or(config.panel.term_max_months).unwrap_or(204);
    let cost_bp = cost_bp.or(config.panel.cost_bp).unwrap_or(0.0);
    let alpha = alpha.or(config.panel.alpha).unwrap_or(1e-6);
    let window = PanelWindow {
        init_start: init_start.or(config.panel.init_start),
        init_end: init_end.or(config.panel.init_end),
        burn_in_years: config.panel.burn_in_years.unwrap_or(10.0),
    };
    let costs = CostModel::from_bp(cost_bp)?;
    let mut spec = build_panel(&md.discounted, &line, (term_min, term_max), &window, costs)?;
    if let Some(bins) = bins.or(config.panel.histogram_bins) {
        if bins == 0 {
            return Err(CliError::config("histogram bins must be positive".into()));
        }
        spec.histogram_bins = bins;
    }
    let result = run_panel(&spec, &md.discounted, &tau)?;

    stage.write("panel.csv", &panel_csv(&result))?;
    stage.write("flvr_histogram.csv", &histogram_csv(&result.flvr_histogram))?;
    stage.write(
        "error_histogram.csv",
        &histogram_csv(&result.error_histogram),
    )?;
    let summary = PanelSummary {
        contracts: result.n,
        term_min_months: term_min,
        term_max_months: term_max,
        cost_bp,
        first_initiation: result.rows.first().unwrap().contract.start_date,
        last_initiation: result.rows.last().unwrap().contract.start_date,
        mean_flvr: result.mean_flvr,
        std_flvr: result.std_flvr,
        worst_abs_error: result.worst_abs_error,
        std_abs_error: result.std_abs_error,
    };
    stage.write_json("panel_summary.json", &summary)?;
    println!(
        "panel: {} contracts ({}m-{}m terms, initiations {} -> {}), mean FLVR = {:.4}, \
         std = {}, worst |C| = {:.6}",
        summary.contracts,
        term_min,
        term_max,
        summary.first_initiation,
        summary.last_initiation,
        summary.mean_flvr,
        summary
            .std_flvr
            .map_or("n/a".to_string(), |v| format!("{v:.4}")),
        summary.worst_abs_error
    );

    let report = t_test(&result, alpha)?;
    stage.write_json("test_report.json", &TestReportJson::from(&report))?;
    print_test_block(&report);
    stage.finish()
}

pub fn cmd_test(
    cli: &Cli,
    config: &RunConfig,
    panel_csv_path: &Path,
    alpha: Option<f64>,
) -> Result<(), CliError> {
    let mut stage = Stage::new(cli, config, "test")?;
    stage.track_input(panel_csv_path)?;
    let alpha = alpha.or(config.panel.alpha).unwrap_or(1e-6);

    let mut reader = csv::ReaderBuilder::new()
        .from_path(panel_csv_path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", panel_csv_path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("bad panel csv: {e}")))?
        .clone();
    let flvr_idx = headers
        .iter()
        .position(|h| h == "flvr")
        .ok_or_else(|| CliError::data("panel csv has no `flvr` column".into()))?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(format!("bad panel csv row: {e}")))?;
        let raw = record.get(flvr_idx).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| CliError::data(format!("bad flvr value {raw:?}")))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::data("panel csv has no rows".into()));
    }
    let (mean, std) = sample_moments(&values);
    let std = std.ok_or_else(|| {
        CliError::numerics("panel csv has a single row; dispersion undefined".into())
    })?;
    let report = t_test_from_moments(mean, std, values.len(), alpha)?;
    stage.write_json("test_report.json", &TestReportJson::from(&report))?;
    print_test_block(&report);
    stage.finish()
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SimReport {
    s0: f64,
    tau0: f64,
    slope: f64,
    horizon_years: f64,
    step_years: f64,
    paths: usize,
    seed: u64,
    closed_form: f64,
    mc_estimate: f64,
    std_error: f64,
    z_score: f64,
    convergence: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    cli: &Cli,
    config: &RunConfig,
    s0: Option<f64>,
    tau0: Option<f64>,
    slope: Option<f64>,
    horizon: Option<f64>,
    step: Option<f64>,
    paths: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut stage = Stage::new(cli, config, "simulate")?;
    let sim = &config.simulate;
    let base = SimConfig {
        s0: s0.or(sim.s0).unwrap_or(1.0),
        tau0: tau0.or(sim.tau0).unwrap_or(-1.2),
        slope: slope.or(sim.slope).unwrap_or(0.08),
        horizon_years: horizon.or(sim.horizon_years).unwrap_or(8.0),
        step_years: step.or(sim.step_years).unwrap_or(0.03125),
        n_paths: paths.or(sim.paths).unwrap_or(100_000),
        seed: seed.or(sim.seed).unwrap_or(42),
    };
    base.validate()?;

    // oracle: one exact transition to the horizon per path
    let oracle_config = SimConfig {
        step_years: base.horizon_years,
        ..base
    };
    let terminals = simulate_terminal_values(&oracle_config)?;
    let oracle = mc_zcb_price_from_terminals(&terminals, base.s0, base.tau0, base.tau_at_horizon());
    let mut oracle_csv = String::from(
        "s0,tau0,slope,horizon_years,closed_form,mc_estimate,std_error,z_score,n_paths\n",
    );
    writeln!(
        oracle_csv,
        "{},{},{},{},{},{},{},{},{}",
        base.s0,
        base.tau0,
        base.slope,
        base.horizon_years,
        oracle.closed_form,
        oracle.estimate,
        oracle.std_error,
        oracle.z_score,
        oracle.n_paths
    )
    .expect("string write");
    stage.write("oracle_report.csv", &oracle_csv)?;

    // hedge-error convergence over halving steps down to the configured one
    let coarsest = base.step_years * 8.0;
    if coarsest > base.horizon_years {
        return Err(CliError::config(format!(
            "convergence needs step*8 <= horizon ({coarsest} > {})",
            base.horizon_years
        )));
    }
    let steps = [
        coarsest,
        base.step_years * 4.0,
        base.step_years * 2.0,
        base.step_years,
    ];
    let convergence_config = SimConfig {
        n_paths: base.n_paths.min(256),
        ..base
    };
    let rows = hedge_convergence_experiment(&convergence_config, &steps)?;
    let mut convergence_csv = String::from("step_years,mean_max_abs_error\n");
    for row in &rows {
        writeln!(
            convergence_csv,
            "{},{}",
            row.step_years, row.mean_max_abs_error
        )
        .expect("string write");
    }
    stage.write("convergence.csv", &convergence_csv)?;

    // a handful of full trajectories for plotting
    let emit = sim.emit_paths.unwrap_or(10).min(base.n_paths);
    if emit > 0 {
        let path_config = SimConfig {
            n_paths: emit,
            ..base
        };
        let sampled = simulate_paths(&path_config)?;
        let mut paths_csv = String::from("path,time,s,tau,phi\n");
        for (p, path) in sampled.iter().enumerate() {
            for j in 0..path.len() {
                writeln!(
                    paths_csv,
                    "{},{},{},{},{}",
                    p, path.times[j], path.s[j], path.tau[j], path.phi[j]
                )
                .expect("string write");
            }
        }
        stage.write("sim_paths.csv", &paths_csv)?;
    }

    let report = SimReport {
        s0: base.s0,
        tau0: base.tau0,
        slope: base.slope,
        horizon_years: base.horizon_years,
        step_years: base.step_years,
        paths: base.n_paths,
        seed: base.seed,
        closed_form: oracle.closed_form,
        mc_estimate: oracle.estimate,
        std_error: oracle.std_error,
        z_score: oracle.z_score,
        convergence: rows
            .iter()
            .map(|r| (r.step_years, r.mean_max_abs_error))
            .collect(),
    };
    stage.write_json("sim_report.json", &report)?;
    println!(
        "oracle: closed form = {:.6}, MC = {:.6} +/- {:.6} (z = {:.2}, {} paths)",
        report.closed_form, report.mc_estimate, report.std_error, report.z_score, report.paths
    );
    println!(
        "convergence (step -> mean max |C|): {}",
        report
            .convergence
            .iter()
            .map(|(s, e)| format!("{s} -> {e:.5}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    stage.finish()
}
