//! Market-data ingestion: raw CSV series, the roll-over savings account built
//! from T-bill discount rates, and the savings-account-discounted index.
//!
//! The discounting convention used throughout the crate: the savings account
//! is worth exactly one currency unit at the first observation date, and every
//! other series is expressed in units of it. Quoted T-bill rates are percent
//! per annum on a discount basis, so the account accrues by the ratio of
//! 90-day discount factors, pro-rated by the actual day count between
//! observations.

use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use crate::{Error, Result};

/// What the values of a series mean. Positivity is only required for levels,
/// not for rates (rates may be zero, and the sanity bound is enforced where
/// the recursion consumes them).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesRole {
    /// Index or price level; strictly positive.
    IndexLevel,
    /// Interest rate in percent per annum; finite.
    RatePercent,
    /// Savings-account level; strictly positive.
    Account,
    /// Level divided by the savings account; strictly positive.
    Discounted,
}

impl fmt::Display for SeriesRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SeriesRole::IndexLevel => "index level",
            SeriesRole::RatePercent => "rate (percent)",
            SeriesRole::Account => "savings account",
            SeriesRole::Discounted => "discounted level",
        };
        f.write_str(name)
    }
}

/// A dated series of observations on a strictly increasing date grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    role: SeriesRole,
}

impl ObservationSeries {
    /// Validates and wraps a series: at least two observations, strictly
    /// increasing dates, finite values, and strictly positive values for
    /// level-like roles.
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>, role: SeriesRole) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} dates vs {} values",
                dates.len(),
                values.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 observations, got {}",
                dates.len()
            )));
        }
        for pair in dates.windows(2) {
            if pair[1] == pair[0] {
                return Err(Error::DuplicateDate(pair[0]));
            }
            if pair[1] < pair[0] {
                return Err(Error::InvalidSeries(format!(
                    "dates not increasing: {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        let needs_positive = !matches!(role, SeriesRole::RatePercent);
        for (date, &v) in dates.iter().zip(&values) {
            if !v.is_finite() {
                return Err(Error::InvalidSeries(format!("non-finite value on {date}")));
            }
            if needs_positive && v <= 0.0 {
                return Err(Error::InvalidSeries(format!(
                    "nonpositive {role} {v} on {date}"
                )));
            }
        }
        Ok(Self {
            dates,
            values,
            role,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn role(&self) -> SeriesRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        *self.dates.last().expect("series is never empty")
    }
}

/// The roll-over T-bill account, worth 1 at the first observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SavingsAccount {
    series: ObservationSeries,
}

impl SavingsAccount {
    pub fn series(&self) -> &ObservationSeries {
        &self.series
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.series.dates()
    }

    pub fn values(&self) -> &[f64] {
        self.series.values()
    }
}

/// Index level divided by the savings account, on their common date grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedIndex {
    series: ObservationSeries,
}

impl DiscountedIndex {
    /// Wraps an already-discounted series. Used by the simulator and by tests
    /// that build synthetic discounted paths directly.
    pub fn from_series(series: ObservationSeries) -> Result<Self> {
        if series.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidSeries(
                "discounted index must be strictly positive".into(),
            ));
        }
        Ok(Self { series })
    }

    pub fn series(&self) -> &ObservationSeries {
        &self.series
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.series.dates()
    }

    pub fn values(&self) -> &[f64] {
        self.series.values()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// Column mapping for CSV ingestion. Defaults to `date,value` with a comma
/// delimiter; dates are ISO-8601.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub date_column: String,
    pub value_column: String,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            value_column: "value".into(),
            delimiter: b',',
        }
    }
}

/// A parsed series plus ingestion bookkeeping.
#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub series: ObservationSeries,
    /// Rows dropped because the value field was blank or a missing-data marker.
    pub skipped_rows: usize,
}

/// Blank and the usual missing-data markers are skipped (and counted) rather
/// than treated as parse errors.
fn is_missing(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty() || t == "." || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Loads a dated series from a CSV file with a header row.
///
/// Rows are sorted by date after parsing, so unordered files are accepted;
/// duplicate dates are a hard error. Rows whose value field is missing are
/// skipped and counted in the result.
pub fn load_series(path: &Path, schema: &CsvSchema, role: SeriesRole) -> Result<LoadedSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_owned(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv {
                path: path.to_owned(),
                message: e.to_string(),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_owned(),
            message: e.to_string(),
        })?
        .clone();
    let col_index = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Csv {
                path: path.to_owned(),
                message: format!("missing column {name:?} (header: {headers:?})"),
            })
    };
    let date_idx = col_index(&schema.date_column)?;
    let value_idx = col_index(&schema.value_column)?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    let mut skipped = 0usize;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Csv {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let date_raw = record.get(date_idx).unwrap_or("");
        let value_raw = record.get(value_idx).unwrap_or("");
        if is_missing(value_raw) {
            skipped += 1;
            continue;
        }
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| Error::Parse {
            path: path.to_owned(),
            line,
            field: "date",
            value: date_raw.to_string(),
        })?;
        let value: f64 = value_raw.parse().map_err(|_| Error::Parse {
            path: path.to_owned(),
            line,
            field: "value",
            value: value_raw.to_string(),
        })?;
        rows.push((date, value));
    }

    rows.sort_by_key(|&(d, _)| d);
    let (dates, values): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let series = ObservationSeries::new(dates, values, role)?;
    Ok(LoadedSeries {
        series,
        skipped_rows: skipped,
    })
}

/// Writes the canonical `date,value` CSV. Values use the shortest decimal
/// representation that round-trips to the identical f64, so a load of the
/// output reproduces the input bit-exactly.
pub fn write_series_csv<W: Write>(mut w: W, dates: &[NaiveDate], values: &[f64]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: "<writer>".into(),
        source: e,
    };
    writeln!(w, "date,value").map_err(io_err)?;
    for (date, value) in dates.iter().zip(values) {
        writeln!(w, "{date},{value}").map_err(io_err)?;
    }
    Ok(())
}

/// Options for the savings-account recursion.
#[derive(Debug, Clone, Copy)]
pub struct SavingsAccountOptions {
    /// Quoted rates at or above this bound (in percent) are rejected.
    pub max_rate_percent: f64,
}

impl Default for SavingsAccountOptions {
    fn default() -> Self {
        Self {
            max_rate_percent: 40.0,
        }
    }
}

/// Rolls quoted 3-month T-bill discount rates into a savings account.
///
/// Per step the account grows by
/// `(1 - r/100 * (90 - d)/360) / (1 - r/100 * 90/360)` where `r` is the rate
/// quoted on the step's end date and `d` the actual number of calendar days
/// in the step. The initial value is exactly 1.
pub fn build_savings_account(
    tbill: &ObservationSeries,
    options: SavingsAccountOptions,
) -> Result<SavingsAccount> {
    if tbill.role() != SeriesRole::RatePercent {
        return Err(Error::InvalidSeries(format!(
            "expected rate series, got {}",
            tbill.role()
        )));
    }
    let dates = tbill.dates();
    let rates = tbill.values();
    let mut values = Vec::with_capacity(dates.len());
    values.push(1.0);
    for i in 1..dates.len() {
        let date = dates[i];
        let rate = rates[i];
        if rate < 0.0 || rate >= options.max_rate_percent {
            return Err(Error::RateOutOfRange {
                date,
                rate,
                max: options.max_rate_percent,
            });
        }
        let day_count = (dates[i] - dates[i - 1]).num_days() as f64;
        let numerator = 1.0 - rate / 100.0 * (90.0 - day_count) / 360.0;
        let denominator = 1.0 - rate / 100.0 * 90.0 / 360.0;
        if numerator <= 0.0 {
            return Err(Error::NonpositiveFactor {
                date,
                rate,
                part: "numerator",
            });
        }
        if denominator <= 0.0 {
            return Err(Error::NonpositiveFactor {
                date,
                rate,
                part: "denominator",
            });
        }
        values.push(values[i - 1] * numerator / denominator);
    }
    let series = ObservationSeries::new(dates.to_vec(), values, SeriesRole::Account)?;
    Ok(SavingsAccount { series })
}

/// Rate series aligned onto a target grid by carrying the last observed rate
/// forward across gaps.
#[derive(Debug, Clone)]
pub struct AlignedRates {
    pub rates: ObservationSeries,
    /// Grid dates that had no same-day rate and took the previous one.
    pub forward_filled: usize,
    /// Leading grid dates dropped because no rate had been observed yet.
    pub dropped_leading: usize,
}

/// Aligns a rate series onto `grid`: exact-date matches are used as-is, gaps
/// take the most recent earlier rate, and grid dates before the first rate
/// observation are dropped.
pub fn forward_fill_rates(grid: &[NaiveDate], rates: &ObservationSeries) -> Result<AlignedRates> {
    let rate_dates = rates.dates();
    let rate_values = rates.values();
    let mut out_dates = Vec::with_capacity(grid.len());
    let mut out_values = Vec::with_capacity(grid.len());
    let mut filled = 0usize;
    let mut dropped = 0usize;
    let mut cursor = 0usize; // index of the first rate date > current grid date
    for &date in grid {
        while cursor < rate_dates.len() && rate_dates[cursor] <= date {
            cursor += 1;
        }
        if cursor == 0 {
            dropped += 1;
            continue;
        }
        if rate_dates[cursor - 1] != date {
            filled += 1;
        }
        out_dates.push(date);
        out_values.push(rate_values[cursor - 1]);
    }
    if out_dates.len() < 2 {
        return Err(Error::EmptyIntersection);
    }
    Ok(AlignedRates {
        rates: ObservationSeries::new(out_dates, out_values, SeriesRole::RatePercent)?,
        forward_filled: filled,
        dropped_leading: dropped,
    })
}

/// Result of discounting an index by the savings account.
#[derive(Debug, Clone)]
pub struct Discounted {
    pub index: DiscountedIndex,
    /// Index dates absent from the account grid (dropped by the inner join).
    pub dropped_index_dates: usize,
    /// Account dates absent from the index grid.
    pub dropped_account_dates: usize,
}

/// Divides the index by the savings account on the intersection of their
/// date grids. Dates present in only one series are dropped and counted.
pub fn discount_index(index: &ObservationSeries, account: &SavingsAccount) -> Result<Discounted> {
    let mut dates = Vec::new();
    let mut values = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let (idx_dates, idx_values) = (index.dates(), index.values());
    let (acc_dates, acc_values) = (account.dates(), account.values());
    let mut dropped_index = 0usize;
    let mut dropped_account = 0usize;
    while i < idx_dates.len() && j < acc_dates.len() {
        match idx_dates[i].cmp(&acc_dates[j]) {
            std::cmp::Ordering::Less => {
                dropped_index += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                dropped_account += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                dates.push(idx_dates[i]);
                values.push(idx_values[i] / acc_values[j]);
                i += 1;
                j += 1;
            }
        }
    }
    dropped_index += idx_dates.len() - i;
    dropped_account += acc_dates.len() - j;
    if dates.len() < 2 {
        return Err(Error::EmptyIntersection);
    }
    let series = ObservationSeries::new(dates, values, SeriesRole::Discounted)?;
    Ok(Discounted {
        index: DiscountedIndex::from_series(series)?,
        dropped_index_dates: dropped_index,
        dropped_account_dates: dropped_account,
    })
}

/// Ingestion bookkeeping for a full pipeline run.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub index_rows_skipped: usize,
    pub rate_rows_skipped: usize,
    pub rates_forward_filled: usize,
    pub index_dates_dropped: usize,
    pub account_dates_dropped: usize,
}

/// Everything the downstream stages need, built in one pass.
#[derive(Debug, Clone)]
pub struct MarketData {
    pub index: ObservationSeries,
    pub rates_on_grid: ObservationSeries,
    pub account: SavingsAccount,
    pub discounted: DiscountedIndex,
    pub report: IngestReport,
}

/// Builds the savings account on the index date grid (rates forward-filled
/// onto it) and discounts the index. This is the canonical preparation used
/// by the CLI and the acceptance runs.
pub fn prepare(
    index: ObservationSeries,
    rates: &ObservationSeries,
    options: SavingsAccountOptions,
) -> Result<MarketData> {
    let aligned = forward_fill_rates(index.dates(), rates)?;
    let account = build_savings_account(&aligned.rates, options)?;
    let discounted = discount_index(&index, &account)?;
    let report = IngestReport {
        rates_forward_filled: aligned.forward_filled,
        index_dates_dropped: discounted.dropped_index_dates + aligned.dropped_leading,
        account_dates_dropped: discounted.dropped_account_dates,
        ..IngestReport::default()
    };
    Ok(MarketData {
        index,
        rates_on_grid: aligned.rates,
        account,
        discounted: discounted.index,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn series(rows: &[(&str, f64)], role: SeriesRole) -> ObservationSeries {
        let dates = rows.iter().map(|&(s, _)| d(s)).collect();
        let values = rows.iter().map(|&(_, v)| v).collect();
        ObservationSeries::new(dates, values, role).unwrap()
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_csv() {
        let f = write_csv("date,value\n2020-01-01,100.5\n2020-01-02,101.0\n2020-01-03,99.25\n");
        let loaded = load_series(f.path(), &CsvSchema::default(), SeriesRole::IndexLevel).unwrap();
        assert_eq!(loaded.series.len(), 3);
        assert_eq!(loaded.skipped_rows, 0);
        assert_eq!(loaded.series.values(), &[100.5, 101.0, 99.25]);
    }

    #[test]
    fn skips_blank_value_rows_and_counts_them() {
        let f = write_csv("date,value\n2020-01-01,100\n2020-01-02,\n2020-01-03,101\n");
        let loaded = load_series(f.path(), &CsvSchema::default(), SeriesRole::IndexLevel).unwrap();
        assert_eq!(loaded.series.len(), 2);
        assert_eq!(loaded.skipped_rows, 1);
    }

    #[test]
    fn duplicated_date_is_an_error() {
        let f = write_csv("date,value\n2020-01-01,100\n2020-01-01,101\n2020-01-02,102\n");
        let err = load_series(f.path(), &CsvSchema::default(), SeriesRole::IndexLevel).unwrap_err();
        assert!(matches!(err, Error::DuplicateDate(_)), "{err}");
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let f = write_csv("date,value\n2020-01-03,103\n2020-01-01,101\n2020-01-02,102\n");
        let loaded = load_series(f.path(), &CsvSchema::default(), SeriesRole::IndexLevel).unwrap();
        assert_eq!(loaded.series.values(), &[101.0, 102.0, 103.0]);
    }

    #[test]
    fn unparsable_number_is_an_error() {
        let f = write_csv("date,value\n2020-01-01,abc\n2020-01-02,1\n");
        let err = load_series(f.path(), &CsvSchema::default(), SeriesRole::IndexLevel).unwrap_err();
        assert!(matches!(err, Error::Parse { field: "value", .. }), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_series(
            Path::new("/definitely/not/here.csv"),
            &CsvSchema::default(),
            SeriesRole::IndexLevel,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }

    #[test]
    fn custom_schema_and_delimiter() {
        let f = write_csv("DATE;DTB3\n2020-01-01;1.5\n2020-01-02;1.6\n");
        let schema = CsvSchema {
            date_column: "DATE".into(),
            value_column: "DTB3".into(),
            delimiter: b';',
        };
        let loaded = load_series(f.path(), &schema, SeriesRole::RatePercent).unwrap();
        assert_eq!(loaded.series.values(), &[1.5, 1.6]);
    }

    #[test]
    fn zero_rates_give_constant_account() {
        let rates = series(
            &[
                ("2020-01-01", 0.0),
                ("2020-01-02", 0.0),
                ("2020-01-05", 0.0),
            ],
            SeriesRole::RatePercent,
        );
        let account = build_savings_account(&rates, SavingsAccountOptions::default()).unwrap();
        assert_eq!(account.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_step_factor_matches_hand_evaluated_recursion() {
        // r = 5.0, d = 1 day: factor = (1 - 0.05*89/360)/(1 - 0.05*90/360)
        // = 35555/35550 = 7111/7110.
        let rates = series(
            &[("2020-01-01", 5.0), ("2020-01-02", 5.0)],
            SeriesRole::RatePercent,
        );
        let account = build_savings_account(&rates, SavingsAccountOptions::default()).unwrap();
        assert_eq!(account.values()[0], 1.0);
        assert_relative_eq!(account.values()[1], 7111.0 / 7110.0, max_relative = 1e-14);
        assert_relative_eq!(account.values()[1], 1.000_140_646_976_09, epsilon = 1e-12);
    }

    #[test]
    fn initial_account_value_is_exactly_one() {
        let rates = series(
            &[("2020-01-01", 3.0), ("2020-01-08", 2.5)],
            SeriesRole::RatePercent,
        );
        let account = build_savings_account(&rates, SavingsAccountOptions::default()).unwrap();
        assert_eq!(account.values()[0], 1.0);
    }

    #[test]
    fn weekend_gap_uses_actual_day_count() {
        // Friday -> Monday is d = 3; the growth factor must exceed the d = 1
        // factor for the same positive rate.
        let over_weekend = series(
            &[("2020-01-03", 5.0), ("2020-01-06", 5.0)],
            SeriesRole::RatePercent,
        );
        let overnight = series(
            &[("2020-01-06", 5.0), ("2020-01-07", 5.0)],
            SeriesRole::RatePercent,
        );
        let a = build_savings_account(&over_weekend, SavingsAccountOptions::default()).unwrap();
        let b = build_savings_account(&overnight, SavingsAccountOptions::default()).unwrap();
        assert!(a.values()[1] > b.values()[1]);
    }

    #[test]
    fn rate_outside_sanity_bound_names_the_date() {
        let rates = series(
            &[("2020-01-01", 3.0), ("2020-01-02", 41.0)],
            SeriesRole::RatePercent,
        );
        let err = build_savings_account(&rates, SavingsAccountOptions::default()).unwrap_err();
        match err {
            Error::RateOutOfRange { date, rate, .. } => {
                assert_eq!(date, d("2020-01-02"));
                assert_eq!(rate, 41.0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn extreme_rate_with_raised_bound_trips_the_factor_check() {
        // r = 450% over one day makes the numerator 1 - 4.5*89/360 < 0
        let rates = series(
            &[("2020-01-01", 1.0), ("2020-01-02", 450.0)],
            SeriesRole::RatePercent,
        );
        let options = SavingsAccountOptions {
            max_rate_percent: 1e9,
        };
        let err = build_savings_account(&rates, options).unwrap_err();
        match err {
            Error::NonpositiveFactor { date, part, .. } => {
                assert_eq!(date, d("2020-01-02"));
                assert_eq!(part, "numerator");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn negative_rate_is_rejected_by_default() {
        let rates = series(
            &[("2020-01-01", 1.0), ("2020-01-02", -0.5)],
            SeriesRole::RatePercent,
        );
        assert!(build_savings_account(&rates, SavingsAccountOptions::default()).is_err());
    }

    #[test]
    fn discount_by_unit_account_is_identity() {
        let index = series(
            &[("2020-01-01", 100.0), ("2020-01-02", 105.0)],
            SeriesRole::IndexLevel,
        );
        let rates = series(
            &[("2020-01-01", 0.0), ("2020-01-02", 0.0)],
            SeriesRole::RatePercent,
        );
        let account = build_savings_account(&rates, SavingsAccountOptions::default()).unwrap();
        let out = discount_index(&index, &account).unwrap();
        assert_eq!(out.index.values(), index.values());
    }

    #[test]
    fn index_equal_to_account_discounts_to_one() {
        let rates = series(
            &[
                ("2020-01-01", 5.0),
                ("2020-01-02", 5.0),
                ("2020-01-03", 5.0),
            ],
            SeriesRole::RatePercent,
        );
        let account = build_savings_account(&rates, SavingsAccountOptions::default()).unwrap();
        let index = ObservationSeries::new(
            account.dates().to_vec(),
            account.values().to_vec(),
            SeriesRole::IndexLevel,
        )
        .unwrap();
        let out = discount_index(&index, &account).unwrap();
        for &v in out.index.values() {
            assert_relative_eq!(v, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn inner_join_drops_and_reports_unmatched_dates() {
        let index = series(
            &[
                ("2020-01-01", 100.0),
                ("2020-01-02", 101.0),
                ("2020-01-03", 102.0),
            ],
            SeriesRole::IndexLevel,
        );
        let rates = series(
            &[
                ("2020-01-01", 0.0),
                ("2020-01-03", 0.0),
                ("2020-01-04", 0.0),
            ],
            SeriesRole::RatePercent,
        );
        let account = build_savings_account(&rates, SavingsAccountOptions::default()).unwrap();
        let out = discount_index(&index, &account).unwrap();
        assert_eq!(out.index.dates(), &[d("2020-01-01"), d("2020-01-03")]);
        assert_eq!(out.dropped_index_dates, 1);
        assert_eq!(out.dropped_account_dates, 1);
    }

    #[test]
    fn empty_intersection_is_an_error() {
        let index = series(
            &[("2020-01-01", 100.0), ("2020-01-02", 101.0)],
            SeriesRole::IndexLevel,
        );
        let rates = series(
            &[("2021-01-01", 0.0), ("2021-01-02", 0.0)],
            SeriesRole::RatePercent,
        );
        let account = build_savings_account(&rates, SavingsAccountOptions::default()).unwrap();
        assert!(matches!(
            discount_index(&index, &account).unwrap_err(),
            Error::EmptyIntersection
        ));
    }

    #[test]
    fn forward_fill_carries_last_rate_and_reports() {
        let grid = vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")];
        let rates = series(
            &[("2019-12-31", 1.0), ("2020-01-02", 2.0)],
            SeriesRole::RatePercent,
        );
        let aligned = forward_fill_rates(&grid, &rates).unwrap();
        assert_eq!(aligned.rates.values(), &[1.0, 2.0, 2.0]);
        assert_eq!(aligned.forward_filled, 2);
        assert_eq!(aligned.dropped_leading, 0);
    }

    #[test]
    fn forward_fill_drops_grid_dates_before_first_rate() {
        let grid = vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")];
        let rates = series(
            &[("2020-01-02", 2.0), ("2020-01-03", 3.0)],
            SeriesRole::RatePercent,
        );
        let aligned = forward_fill_rates(&grid, &rates).unwrap();
        assert_eq!(aligned.rates.dates(), &[d("2020-01-02"), d("2020-01-03")]);
        assert_eq!(aligned.dropped_leading, 1);
    }

    #[test]
    fn canonical_csv_round_trips_bit_exactly() {
        let dates = vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")];
        let values = vec![
            100.1,
            1.000_140_646_976_09,
            std::f64::consts::PI * 1e-7 + 1.0,
        ];
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &dates, &values).unwrap();
        let f = write_csv(std::str::from_utf8(&buf).unwrap());
        let loaded = load_series(f.path(), &CsvSchema::default(), SeriesRole::IndexLevel).unwrap();
        assert_eq!(loaded.series.values(), values.as_slice());
        assert_eq!(loaded.series.dates(), dates.as_slice());

        // a second round trip writes identical bytes
        let mut buf2 = Vec::new();
        write_series_csv(&mut buf2, loaded.series.dates(), loaded.series.values()).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn prepare_builds_account_on_index_grid() {
        let index = series(
            &[
                ("2020-01-01", 100.0),
                ("2020-01-02", 101.0),
                ("2020-01-03", 102.0),
            ],
            SeriesRole::IndexLevel,
        );
        let rates = series(
            &[("2020-01-01", 5.0), ("2020-01-03", 5.0)],
            SeriesRole::RatePercent,
        );
        let md = prepare(index, &rates, SavingsAccountOptions::default()).unwrap();
        assert_eq!(md.account.dates().len(), 3);
        assert_eq!(md.report.rates_forward_filled, 1);
        assert_eq!(md.discounted.len(), 3);
        assert!(md.discounted.values()[1] < 101.0); // account grew
    }
}
