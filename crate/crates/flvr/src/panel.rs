//! Cross-section of extreme-maturity bond experiments and the one-sided
//! Student-t test on the resulting potential-FLVR sample.
//!
//! Contracts are enumerated on a monthly grid: every first-available data
//! date of a calendar month inside the initiation window opens one contract
//! per term in the configured month range, provided the maturity (snapped
//! forward to the next trading date) still lies inside the data. Each
//! contract is hedged independently; the panel aggregates the FLVR values
//! and maximum absolute hedge errors.

use chrono::{Datelike, Months, NaiveDate};
use rayon::prelude::*;

use crate::activity::{ActivityTimePath, TrendLine};
use crate::azcb::{run_hedge, AzcbContract, CostModel};
use crate::market_data::DiscountedIndex;
use crate::stats::student_t_quantile;
use crate::{Error, Result};

/// Initiation window for the panel. With both bounds unset, initiations
/// start after a burn-in from the first data date, so the activity time has
/// accumulated history before the first contract opens.
#[derive(Debug, Clone, Copy)]
pub struct PanelWindow {
    pub init_start: Option<NaiveDate>,
    pub init_end: Option<NaiveDate>,
    /// Used only when `init_start` is unset.
    pub burn_in_years: f64,
}

impl Default for PanelWindow {
    fn default() -> Self {
        Self {
            init_start: None,
            init_end: None,
            burn_in_years: 10.0,
        }
    }
}

/// One enumerated contract of the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PanelContract {
    pub id: usize,
    pub start_index: usize,
    pub maturity_index: usize,
    pub start_date: NaiveDate,
    pub maturity_date: NaiveDate,
    pub term_months: u32,
}

/// The full experiment grid plus everything needed to run it.
#[derive(Debug, Clone)]
pub struct PanelSpec {
    pub contracts: Vec<PanelContract>,
    pub trendline: TrendLine,
    pub costs: CostModel,
    pub term_months: (u32, u32),
    /// Bin count for the result histograms.
    pub histogram_bins: usize,
}

impl PanelSpec {
    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }
}

/// Enumerates every valid (month start, term) contract in the window.
///
/// A maturity target is the initiation date shifted by the term (day-of-month
/// clamped), snapped forward to the next available data date; pairs whose
/// snapped maturity falls past the end of the data are dropped.
pub fn build_panel(
    s: &DiscountedIndex,
    trendline: &TrendLine,
    term_months: (u32, u32),
    window: &PanelWindow,
    costs: CostModel,
) -> Result<PanelSpec> {
    let (term_lo, term_hi) = term_months;
    if term_lo == 0 || term_lo > term_hi {
        return Err(Error::InvalidParameter(format!(
            "bad term range [{term_lo}, {term_hi}] months"
        )));
    }
    let dates = s.dates();
    let first = dates[0];
    let last = *dates.last().expect("series is never empty");

    let init_start = window.init_start.unwrap_or_else(|| {
        let months = (window.burn_in_years * 12.0).round() as u32;
        first
            .checked_add_months(Months::new(months))
            .unwrap_or(first)
    });
    let init_end = window.init_end.unwrap_or(last);

    // first available data date of each calendar month inside the window
    let mut month_starts: Vec<usize> = Vec::new();
    let mut current_month: Option<(i32, u32)> = None;
    for (i, &date) in dates.iter().enumerate() {
        let key = (date.year(), date.month());
        if current_month != Some(key) {
            current_month = Some(key);
            if date >= init_start && date <= init_end {
                month_starts.push(i);
            }
        }
    }

    let mut contracts = Vec::new();
    for &start_index in &month_starts {
        let start_date = dates[start_index];
        for term in term_lo..=term_hi {
            let Some(target) = start_date.checked_add_months(Months::new(term)) else {
                continue;
            };
            if target > last {
                continue;
            }
            let maturity_index = dates.partition_point(|&d| d < target);
            if maturity_index >= dates.len() {
                continue;
            }
            contracts.push(PanelContract {
                id: contracts.len(),
                start_index,
                maturity_index,
                start_date,
                maturity_date: dates[maturity_index],
                term_months: term,
            });
        }
    }
    if contracts.is_empty() {
        return Err(Error::EmptyPanel);
    }
    Ok(PanelSpec {
        contracts,
        trendline: trendline.clone(),
        costs,
        term_months,
        histogram_bins: 50,
    })
}

/// Equal-width histogram over `[lo, hi]` with the top edge inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// Lower edge of bin `k`.
    pub fn edge(&self, k: usize) -> f64 {
        self.lo + self.bin_width() * k as f64
    }
}

/// Bins `values` into `bins` equal-width cells spanning their range. A
/// degenerate range is widened by half a unit on both sides.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    assert!(bins > 0, "need at least one bin");
    assert!(!values.is_empty(), "need at least one value");
    let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { lo, hi, counts }
}

/// Neumaier-compensated sum; keeps the panel mean independent of how the
/// contracts were scheduled.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Outcome of one panel contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelOutcome {
    pub contract: PanelContract,
    pub flvr: f64,
    pub max_abs_error: f64,
}

/// Aggregated panel results. Rows are sorted by contract id, so two runs of
/// the same spec (or a reshuffled copy of it) produce identical output.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelResult {
    pub rows: Vec<PanelOutcome>,
    pub n: usize,
    /// Sample mean of the FLVR values.
    pub mean_flvr: f64,
    /// Sample standard deviation; `None` for a single contract.
    pub std_flvr: Option<f64>,
    /// Largest maximum absolute hedge error across contracts.
    pub worst_abs_error: f64,
    /// Sample standard deviation of the maximum absolute hedge errors.
    pub std_abs_error: Option<f64>,
    pub flvr_histogram: Histogram,
    pub error_histogram: Histogram,
}

fn sample_std(values: &[f64], mean: f64) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let ss = compensated_sum(
        &values
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .collect::<Vec<_>>(),
    );
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Compensated sample mean and (for two or more values) standard deviation.
pub fn sample_moments(values: &[f64]) -> (f64, Option<f64>) {
    assert!(!values.is_empty(), "need at least one value");
    let mean = compensated_sum(values) / values.len() as f64;
    (mean, sample_std(values, mean))
}

/// Hedges every enumerated contract (in parallel) and aggregates. Any
/// failing contract aborts the run, identified by id and dates.
pub fn run_panel(
    spec: &PanelSpec,
    s: &DiscountedIndex,
    tau: &ActivityTimePath,
) -> Result<PanelResult> {
    if spec.contracts.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let mut rows = spec
        .contracts
        .par_iter()
        .map(|contract| {
            let azcb = AzcbContract::new(
                contract.start_index,
                contract.maturity_index,
                spec.trendline.clone(),
            )
            .map_err(|e| contract_error(contract, e))?;
            let ledger =
                run_hedge(&azcb, s, tau, &spec.costs).map_err(|e| contract_error(contract, e))?;
            Ok(PanelOutcome {
                contract: *contract,
                flvr: ledger.flvr_at_maturity(),
                max_abs_error: ledger.max_abs_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.contract.id);

    let flvr: Vec<f64> = rows.iter().map(|r| r.flvr).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.max_abs_error).collect();
    let n = rows.len();
    let mean_flvr = compensated_sum(&flvr) / n as f64;
    let std_flvr = sample_std(&flvr, mean_flvr);
    let worst_abs_error = errors.iter().cloned().fold(0.0, f64::max);
    let mean_abs_error = compensated_sum(&errors) / n as f64;
    let std_abs_error = sample_std(&errors, mean_abs_error);
    let flvr_histogram = histogram(&flvr, spec.histogram_bins);
    let error_histogram = histogram(&errors, spec.histogram_bins);
    Ok(PanelResult {
        rows,
        n,
        mean_flvr,
        std_flvr,
        worst_abs_error,
        std_abs_error,
        flvr_histogram,
        error_histogram,
    })
}

fn contract_error(contract: &PanelContract, source: Error) -> Error {
    Error::ContractFailed {
        id: contract.id,
        start: contract.start_date,
        maturity: contract.maturity_date,
        source: Box::new(source),
    }
}

/// Decision record of the one-sided test of `H0: mean = 0` against
/// `H1: mean > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestReport {
    pub n: usize,
    pub sample_mean: f64,
    pub sample_std: f64,
    pub alpha: f64,
    /// Degrees of freedom, `n - 1`.
    pub df: usize,
    /// `T = mean / (std / sqrt(n))`.
    pub t_statistic: f64,
    /// Student-t quantile at `1 - alpha` with `df` degrees of freedom.
    pub critical_value: f64,
    /// Smallest sample mean that still rejects: `critical * std / sqrt(n)`.
    pub mean_threshold: f64,
    /// `T >= critical_value` (boundary inclusive).
    pub reject: bool,
    /// The equivalent decision `mean >= mean_threshold`.
    pub reject_by_threshold: bool,
}

/// The t-test from summary statistics.
pub fn t_test_from_moments(mean: f64, std: f64, n: usize, alpha: f64) -> Result<TestReport> {
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least two contracts, got {n}"
        )));
    }
    if std.is_nan() || std <= 0.0 {
        return Err(Error::DegenerateSample(format!(
            "sample standard deviation must be positive, got {std}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "significance level must lie in (0, 1), got {alpha}"
        )));
    }
    let df = n - 1;
    let standard_error = std / (n as f64).sqrt();
    let t_statistic = mean / standard_error;
    let critical_value = student_t_quantile(1.0 - alpha, df)?;
    let mean_threshold = critical_value * standard_error;
    Ok(TestReport {
        n,
        sample_mean: mean,
        sample_std: std,
        alpha,
        df,
        t_statistic,
        critical_value,
        mean_threshold,
        reject: t_statistic >= critical_value,
        reject_by_threshold: mean >= mean_threshold,
    })
}

/// The t-test on a panel's FLVR sample.
pub fn t_test(result: &PanelResult, alpha: f64) -> Result<TestReport> {
    let std = result.std_flvr.ok_or_else(|| {
        Error::DegenerateSample("panel has a single contract; no dispersion".into())
    })?;
    t_test_from_moments(result.mean_flvr, std, result.n, alpha)
}
