//! Activity time of the discounted index and its linear trendline.
//!
//! The activity time at observation `i` is
//! `tau_i = ln( sum_{l<=i} (sqrt(S_l) - sqrt(S_{l-1}))^2 + exp(tau_0) )`,
//! i.e. the log of the accumulated quadratic variation of the square root of
//! the discounted index, shifted by the exponential of an unknown initial
//! value. The initial value `tau_0` is not observable; it is estimated by
//! maximizing the R² of a straight line fitted through the resulting path
//! over the first half of the sample. The fitted line, extrapolated past the
//! fit window, is what the bond pricing uses.

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::market_data::DiscountedIndex;
use crate::{Error, Result};

/// Calendar time in years between two dates: actual days / 365.25.
pub fn years_between(origin: NaiveDate, date: NaiveDate) -> f64 {
    (date - origin).num_days() as f64 / 365.25
}

/// Year fractions of every date relative to `origin`.
pub fn time_axis_years(origin: NaiveDate, dates: &[NaiveDate]) -> Vec<f64> {
    dates.iter().map(|&d| years_between(origin, d)).collect()
}

/// Inclusive index window `[0, N/2]` of the first half of a sample of the
/// given length, with `N` the last even index.
pub fn first_half_window(len: usize) -> (usize, usize) {
    assert!(len >= 2, "need at least two observations");
    let last = len - 1;
    let n = if last.is_multiple_of(2) {
        last
    } else {
        last - 1
    };
    (0, n / 2)
}

/// Accumulated quadratic variation of the square root of a positive path:
/// `sum over steps of (sqrt(S_i) - sqrt(S_{i-1}))^2` up to and including
/// index `end`.
pub fn sqrt_quadratic_variation(values: &[f64], end: usize) -> f64 {
    let mut sum = 0.0;
    for i in 1..=end {
        let d = values[i].sqrt() - values[i - 1].sqrt();
        sum += d * d;
    }
    sum
}

/// The discretely observed activity time of a discounted index.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityTimePath {
    dates: Vec<NaiveDate>,
    tau: Vec<f64>,
    tau0: f64,
}

impl ActivityTimePath {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }
}

/// `ln(qv + exp(tau0))` evaluated as `tau0 + ln1p(qv * exp(-tau0))`, which is
/// exact at `qv = 0` and keeps precision when the accumulated variation is
/// small next to `exp(tau0)`.
#[inline]
fn tau_from_qv(qv: f64, tau0: f64) -> f64 {
    let scaled = qv * (-tau0).exp();
    if scaled.is_finite() {
        tau0 + scaled.ln_1p()
    } else {
        // exp(tau0) underflowed; the shift is negligible next to qv
        qv.ln()
    }
}

/// Activity-time values for a raw positive path. `out[0]` is exactly `tau0`;
/// later entries are `ln(accumulated quadratic variation + exp(tau0))`.
pub fn activity_time_from_values(values: &[f64], tau0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    out.push(tau0);
    let mut qv = 0.0;
    for i in 1..values.len() {
        let d = values[i].sqrt() - values[i - 1].sqrt();
        qv += d * d;
        out.push(tau_from_qv(qv, tau0));
    }
    out
}

/// Activity time of a discounted index for a given initial value.
pub fn activity_time(s: &DiscountedIndex, tau0: f64) -> ActivityTimePath {
    ActivityTimePath {
        dates: s.dates().to_vec(),
        tau: activity_time_from_values(s.values(), tau0),
        tau0,
    }
}

/// Ordinary least squares of `y` on `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// `1 - SS_res/SS_tot`, defined as 1 when `SS_tot = 0`.
    pub r_squared: f64,
}

/// Two-pass simple linear regression. Errors when all times coincide.
pub fn fit_line(times: &[f64], y: &[f64]) -> Result<LineFit> {
    assert_eq!(times.len(), y.len());
    let n = times.len();
    if n < 3 {
        return Err(Error::InvalidWindow(format!(
            "need at least 3 points to fit, got {n}"
        )));
    }
    if times.iter().all(|&t| t == times[0]) {
        return Err(Error::DegenerateTimeAxis);
    }
    if y.iter().all(|&v| v == y[0]) {
        // SS_tot = 0: a flat line fits exactly, R^2 = 1 by convention
        return Ok(LineFit {
            intercept: y[0],
            slope: 0.0,
            r_squared: 1.0,
        });
    }
    let mean_t = times.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (&t, &yi) in times.iter().zip(y) {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (yi - mean_y);
    }
    if stt == 0.0 {
        return Err(Error::DegenerateTimeAxis);
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&t, &yi) in times.iter().zip(y) {
        let fitted = intercept + slope * t;
        ss_res += (yi - fitted) * (yi - fitted);
        ss_tot += (yi - mean_y) * (yi - mean_y);
    }
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LineFit {
        intercept,
        slope,
        r_squared,
    })
}

/// Fitted linear trend of the activity time, anchored at the window start.
///
/// `value(t)` extrapolates freely past the fit window; that extrapolation is
/// the intended use for pricing in the second half of the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendLine {
    /// Fitted value at the time origin.
    pub intercept: f64,
    /// Slope per year of calendar time.
    pub slope_per_year: f64,
    /// R² of the fit, in [0, 1] for any fit with an intercept.
    pub r_squared: f64,
    /// Inclusive index range the line was fitted on.
    pub fit_window: (usize, usize),
    /// Date at which `value(0)` applies.
    pub time_origin: NaiveDate,
}

impl TrendLine {
    /// Affine evaluation `intercept + slope * years_since_origin`.
    pub fn value(&self, years_since_origin: f64) -> f64 {
        self.intercept + self.slope_per_year * years_since_origin
    }

    /// Evaluation at a calendar date.
    pub fn value_at(&self, date: NaiveDate) -> f64 {
        self.value(years_between(self.time_origin, date))
    }
}

/// Fits the trendline through `path` over the inclusive index `window`,
/// with the time axis in years since the window's first date.
pub fn fit_trendline(path: &ActivityTimePath, window: (usize, usize)) -> Result<TrendLine> {
    let (start, end) = window;
    if start > end || end >= path.len() {
        return Err(Error::InvalidWindow(format!(
            "window [{start}, {end}] out of bounds for path of length {}",
            path.len()
        )));
    }
    let dates = &path.dates()[start..=end];
    let origin = dates[0];
    let times = time_axis_years(origin, dates);
    let fit = fit_line(&times, &path.tau()[start..=end])?;
    Ok(TrendLine {
        intercept: fit.intercept,
        slope_per_year: fit.slope,
        r_squared: fit.r_squared,
        fit_window: window,
        time_origin: origin,
    })
}

/// Bracket and tolerances for the one-dimensional search over the initial
/// activity time.
#[derive(Debug, Clone, Copy)]
pub struct TauSearch {
    pub lo: f64,
    pub hi: f64,
    /// Coarse-grid candidates evaluated before refinement.
    pub grid_points: usize,
    /// Width of the final bracket around the maximizer.
    pub tolerance: f64,
}

impl TauSearch {
    /// A bracket with the default grid (201 points) and tolerance (1e-8).
    pub fn bracket(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidParameter(format!(
                "bad tau0 bracket [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            lo,
            hi,
            grid_points: 201,
            tolerance: 1e-8,
        })
    }

    /// Default bracket `[ln q - 8, ln q + 2]` where `q` is the accumulated
    /// quadratic variation of `sqrt(S)` over the window. `exp(tau_0)` is
    /// commensurate with that accumulated variation, which makes the bracket
    /// scale-free.
    pub fn default_for_window(s: &DiscountedIndex, window: (usize, usize)) -> Result<Self> {
        let q = sqrt_quadratic_variation(s.values(), window.1);
        if q <= 0.0 {
            return Err(Error::InvalidParameter(
                "zero quadratic variation over the window; supply an explicit bracket".into(),
            ));
        }
        Self::bracket(q.ln() - 8.0, q.ln() + 2.0)
    }
}

/// Outcome of the initial-activity-time estimation.
#[derive(Debug, Clone)]
pub struct TauEstimate {
    pub tau0: f64,
    /// Trendline fitted at the estimated tau0 over the search window.
    pub trendline: TrendLine,
    /// Set when the maximizer sits on a bracket endpoint; widen the bracket.
    pub at_bracket_edge: bool,
}

/// Golden-section maximization on [a, b]. Ties prefer the smaller abscissa so
/// results do not depend on evaluation order.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
        let (x, fx) = if fc >= fd { (c, fc) } else { (d, fd) };
        if fx > best.1 || (fx == best.1 && x < best.0) {
            best = (x, fx);
        }
    }
    best
}

/// Estimates the initial activity time by maximizing the trendline R² over
/// the bracket: a coarse grid scan followed by golden-section refinement
/// around the best grid candidate.
///
/// The activity-time increments do not depend on `tau0`, so the quadratic
/// variation is accumulated once and each candidate evaluation is a single
/// regression on `ln(qv_i + exp(tau0))`.
pub fn estimate_initial_tau(
    s: &DiscountedIndex,
    window: (usize, usize),
    search: &TauSearch,
) -> Result<TauEstimate> {
    let (start, end) = window;
    if start != 0 {
        return Err(Error::InvalidWindow(
            "tau0 search window must start at the first observation".into(),
        ));
    }
    if end >= s.len() || end - start + 1 < 3 {
        return Err(Error::InvalidWindow(format!(
            "window [{start}, {end}] invalid for series of length {}",
            s.len()
        )));
    }
    if !search.tolerance.is_finite() || search.tolerance <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }

    let values = &s.values()[start..=end];
    let dates = &s.dates()[start..=end];
    let times = time_axis_years(dates[0], dates);
    // prefix quadratic variation; qv[0] = 0
    let mut qv = Vec::with_capacity(values.len());
    qv.push(0.0);
    for i in 1..values.len() {
        let d = values[i].sqrt() - values[i - 1].sqrt();
        qv.push(qv[i - 1] + d * d);
    }

    let objective = |tau0: f64| -> f64 {
        let mut y = Vec::with_capacity(qv.len());
        y.push(tau0);
        for &q in &qv[1..] {
            y.push(tau_from_qv(q, tau0));
        }
        match fit_line(&times, &y) {
            Ok(fit) => fit.r_squared,
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let (tau0, at_edge) = if search.lo == search.hi || search.grid_points <= 1 {
        (search.lo, false)
    } else {
        let n = search.grid_points;
        let step = (search.hi - search.lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|k| search.lo + step * k as f64).collect();
        let scores: Vec<f64> = grid.par_iter().map(|&x| objective(x)).collect();
        // first index of the maximum = smallest tau0 among ties
        let mut best = 0usize;
        for (k, &score) in scores.iter().enumerate() {
            if score > scores[best] {
                best = k;
            }
        }
        let at_edge = best == 0 || best == n - 1;
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(n - 1)];
        let (refined, refined_score) = golden_max(objective, lo, hi, search.tolerance);
        let keep_grid =
            scores[best] > refined_score || (scores[best] == refined_score && grid[best] < refined);
        (if keep_grid { grid[best] } else { refined }, at_edge)
    };

    let path = activity_time(s, tau0);
    let trendline = fit_trendline(&path, window)?;
    Ok(TauEstimate {
        tau0,
        trendline,
        at_bracket_edge: at_edge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{ObservationSeries, SeriesRole};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn daily_index(values: &[f64]) -> DiscountedIndex {
        let start = date("2000-01-01");
        let dates: Vec<NaiveDate> = (0..values.len())
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        DiscountedIndex::from_series(
            ObservationSeries::new(dates, values.to_vec(), SeriesRole::Discounted).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_path_has_constant_activity_time() {
        let s = daily_index(&[2.5; 10]);
        let path = activity_time(&s, 0.7);
        for &t in path.tau() {
            assert_abs_diff_eq!(t, 0.7, epsilon = 1e-15);
        }
        assert_eq!(path.tau()[0], 0.7); // exact, not via ln(exp(.))
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        // S: 1 -> 4, tau0 = 0: tau_1 = ln((2-1)^2 + 1) = ln 2
        let s = daily_index(&[1.0, 4.0]);
        let path = activity_time(&s, 0.0);
        assert_relative_eq!(path.tau()[1], std::f64::consts::LN_2, max_relative = 1e-15);
    }

    #[test]
    fn activity_time_is_nondecreasing() {
        let s = daily_index(&[1.0, 1.4, 0.9, 2.2, 2.2, 1.7, 3.0]);
        let path = activity_time(&s, -1.3);
        for w in path.tau().windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn first_half_window_uses_last_even_index() {
        assert_eq!(first_half_window(5), (0, 2)); // N = 4
        assert_eq!(first_half_window(6), (0, 2)); // N = 4
        assert_eq!(first_half_window(7), (0, 3)); // N = 6
        assert_eq!(first_half_window(2), (0, 0)); // N = 0
    }

    #[test]
    fn exactly_linear_path_fits_perfectly() {
        let start = date("2000-01-01");
        let dates: Vec<NaiveDate> = (0..40).map(|i| start + chrono::Days::new(i * 7)).collect();
        let times = time_axis_years(start, &dates);
        let tau: Vec<f64> = times.iter().map(|&t| -2.0 + 0.35 * t).collect();
        let path = ActivityTimePath {
            dates,
            tau,
            tau0: -2.0,
        };
        let line = fit_trendline(&path, (0, 39)).unwrap();
        assert_relative_eq!(line.r_squared, 1.0, epsilon = 1e-12);
        assert_relative_eq!(line.slope_per_year, 0.35, epsilon = 1e-10);
        assert_relative_eq!(line.intercept, -2.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_path_r_squared_is_one_by_convention() {
        let s = daily_index(&[2.5; 12]);
        let path = activity_time(&s, 0.4);
        let line = fit_trendline(&path, (0, 11)).unwrap();
        assert_eq!(line.r_squared, 1.0);
        assert_abs_diff_eq!(line.slope_per_year, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn r_squared_matches_squared_correlation() {
        let s = daily_index(&[1.0, 1.2, 1.1, 1.5, 1.4, 2.0, 2.1, 2.6, 2.4, 3.0]);
        let path = activity_time(&s, -2.0);
        let line = fit_trendline(&path, (0, 9)).unwrap();

        // independent route: squared Pearson correlation of (t, tau)
        let times = time_axis_years(path.dates()[0], path.dates());
        let n = times.len() as f64;
        let mt = times.iter().sum::<f64>() / n;
        let my = path.tau().iter().sum::<f64>() / n;
        let (mut stt, mut syy, mut sty) = (0.0, 0.0, 0.0);
        for (&t, &y) in times.iter().zip(path.tau()) {
            stt += (t - mt) * (t - mt);
            syy += (y - my) * (y - my);
            sty += (t - mt) * (y - my);
        }
        let rho2 = sty * sty / (stt * syy);
        assert_abs_diff_eq!(line.r_squared, rho2, epsilon = 1e-10);
    }

    #[test]
    fn short_window_is_rejected() {
        let s = daily_index(&[1.0, 2.0, 3.0, 4.0]);
        let path = activity_time(&s, 0.0);
        assert!(matches!(
            fit_trendline(&path, (0, 1)),
            Err(Error::InvalidWindow(_))
        ));
    }

    #[test]
    fn degenerate_time_axis_is_rejected() {
        assert!(matches!(
            fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateTimeAxis)
        ));
    }

    #[test]
    fn trendline_evaluation_is_affine() {
        let line = TrendLine {
            intercept: 1.0,
            slope_per_year: 0.1,
            r_squared: 1.0,
            fit_window: (0, 10),
            time_origin: date("2000-01-01"),
        };
        assert_eq!(line.value(0.0), 1.0);
        assert_relative_eq!(line.value(10.0), 2.0, epsilon = 1e-15);
        let flat = TrendLine {
            slope_per_year: 0.0,
            ..line
        };
        assert_eq!(flat.value(3.7), 1.0);
        assert_eq!(flat.value(-5.0), 1.0);
    }

    #[test]
    fn degenerate_bracket_returns_the_single_candidate() {
        let s = daily_index(&[1.0, 1.3, 1.1, 1.6, 1.4, 1.9, 2.0, 1.8, 2.2, 2.5]);
        let search = TauSearch {
            lo: -1.5,
            hi: -1.5,
            grid_points: 201,
            tolerance: 1e-8,
        };
        let est = estimate_initial_tau(&s, (0, 9), &search).unwrap();
        assert_eq!(est.tau0, -1.5);
        assert!(!est.at_bracket_edge);
    }

    #[test]
    fn estimate_is_a_local_maximizer() {
        // noisy near-linear activity growth: geometric-ish path
        let mut values = vec![1.0];
        let mut x = 1.0f64;
        for i in 1..200 {
            let bump = if i % 3 == 0 { -0.004 } else { 0.006 };
            x *= 1.0 + bump + 0.002 * ((i * 7 % 11) as f64 - 5.0) / 5.0;
            values.push(x);
        }
        let s = daily_index(&values);
        let window = (0, 199);
        let search = TauSearch::default_for_window(&s, window).unwrap();
        let est = estimate_initial_tau(&s, window, &search).unwrap();

        let objective = |tau0: f64| {
            let path = activity_time(&s, tau0);
            fit_trendline(&path, window).unwrap().r_squared
        };
        let r_star = objective(est.tau0);
        assert!(r_star >= objective(est.tau0 + 10.0 * search.tolerance) - 1e-12);
        assert!(r_star >= objective(est.tau0 - 10.0 * search.tolerance) - 1e-12);
        assert_relative_eq!(est.trendline.r_squared, r_star, epsilon = 1e-12);
    }

    #[test]
    fn default_bracket_requires_positive_quadratic_variation() {
        let s = daily_index(&[2.0; 10]);
        assert!(TauSearch::default_for_window(&s, (0, 9)).is_err());
    }
}
