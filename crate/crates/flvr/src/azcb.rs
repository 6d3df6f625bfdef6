//! Approximate zero-coupon bond (AZCB) pricing and discrete hedging.
//!
//! In savings-account units the AZCB pays
//! `H = 1 - exp(-S_T / (2 max(exp(taubar_T) - exp(tau_T), 0)))` at maturity,
//! which is 1 when the realized activity time has caught up with the
//! trendline and slightly below 1 otherwise. The same functional form priced
//! at the current `(S, tau)` gives the bond value before maturity.
//!
//! The hedge is a discrete self-financing portfolio that holds the fraction
//! `pi = (1 - 1/Z) ln(1 - Z)` of wealth in the index and the rest in the
//! savings account, rebalanced at every observation while the portfolio value
//! stays below par. Once the value reaches 1 the position is moved to the
//! savings account for good. The difference between the hedge value and the
//! bond's initial price is the potential free lunch with vanishing risk.

use crate::activity::ActivityTimePath;
use crate::activity::TrendLine;
use crate::market_data::DiscountedIndex;
use crate::{Error, Result};

/// AZCB price for a discounted index level `s`, realized activity time `tau`
/// and trendline activity time `tau_bar_maturity` at the bond's maturity.
///
/// When `exp(tau) >= exp(tau_bar_maturity)` the exponential term is taken to
/// be zero and the price is exactly 1.
pub fn azcb_price(s: f64, tau: f64, tau_bar_maturity: f64) -> f64 {
    debug_assert!(s > 0.0, "index level must be positive");
    let gap = tau_bar_maturity.exp() - tau.exp();
    if gap <= 0.0 {
        return 1.0;
    }
    // -expm1(-x) keeps precision when the price is near zero
    -(-s / (2.0 * gap)).exp_m1()
}

/// AZCB payoff at maturity; the same function as [`azcb_price`] evaluated at
/// the maturity observation.
pub fn azcb_payoff(s_maturity: f64, tau_maturity: f64, tau_bar_maturity: f64) -> f64 {
    azcb_price(s_maturity, tau_maturity, tau_bar_maturity)
}

/// Fraction of wealth invested in the index: `(1 - 1/z) ln(1 - z)` for
/// `z` strictly inside (0, 1). Callers must apply the freeze rule (no
/// hedging at or above par) before calling.
pub fn hedge_fraction(z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "hedge fraction needs 0 < z < 1, got {z}"
        )));
    }
    Ok((1.0 - 1.0 / z) * (-z).ln_1p())
}

/// Proportional transaction costs per unit of traded stock notional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub proportional_rate: f64,
}

impl CostModel {
    pub fn zero() -> Self {
        Self {
            proportional_rate: 0.0,
        }
    }

    /// E.g. `from_bp(50.0)` for 50 basis points per unit traded.
    pub fn from_bp(basis_points: f64) -> Result<Self> {
        let rate = basis_points / 10_000.0;
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cost rate must be a nonnegative number, got {basis_points} bp"
            )));
        }
        Ok(Self {
            proportional_rate: rate,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.proportional_rate == 0.0
    }
}

/// Which value drives the invested fraction at each rebalance: the hedge
/// portfolio value (the default) or the theoretical price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HedgeMode {
    #[default]
    PortfolioValue,
    TheoreticalPrice,
}

/// One bond experiment on a data grid: initiation and maturity positions plus
/// the trendline (fitted on the first half of the sample) that fixes the
/// maturity activity time.
#[derive(Debug, Clone)]
pub struct AzcbContract {
    pub start_index: usize,
    pub maturity_index: usize,
    pub trendline: TrendLine,
}

impl AzcbContract {
    pub fn new(start_index: usize, maturity_index: usize, trendline: TrendLine) -> Result<Self> {
        if start_index >= maturity_index {
            return Err(Error::InvalidContract(format!(
                "start index {start_index} must precede maturity index {maturity_index}"
            )));
        }
        Ok(Self {
            start_index,
            maturity_index,
            trendline,
        })
    }

    /// Whether the initiation lies in the second half of a grid of the given
    /// length, the configuration used for the out-of-sample experiments.
    pub fn starts_in_second_half(&self, grid_len: usize) -> bool {
        let (_, half) = crate::activity::first_half_window(grid_len);
        self.start_index >= half
    }
}

/// Per-step record of a hedge run, from initiation to maturity inclusive.
/// All vectors are indexed relative to the contract start.
#[derive(Debug, Clone)]
pub struct HedgeLedger {
    /// Position of the initiation in the underlying data grid.
    pub start_index: usize,
    /// Position of the maturity in the underlying data grid.
    pub maturity_index: usize,
    /// Trendline activity time at maturity, fixed at initiation.
    pub tau_bar_maturity: f64,
    /// Theoretical price `P_i`.
    pub price: Vec<f64>,
    /// Hedge portfolio value `Z_i` (net of costs charged so far; the maturity
    /// entry is net of the final liquidation).
    pub portfolio: Vec<f64>,
    /// Fraction of wealth in the index chosen at step `i` (0 once frozen and
    /// at maturity).
    pub fraction: Vec<f64>,
    /// Hedge error `C_i = P_i - Z_i`.
    pub hedge_error: Vec<f64>,
    /// Potential FLVR `V_i = Z_i - P_start`.
    pub flvr: Vec<f64>,
    /// Transaction costs charged at step `i`.
    pub cost_paid: Vec<f64>,
    /// Payoff at maturity (equals the final price entry).
    pub payoff: f64,
    /// `max_i |C_i|`.
    pub max_abs_error: f64,
    /// Step (relative to start) at which the portfolio reached par and the
    /// hedge froze, if it did.
    pub frozen_at: Option<usize>,
}

impl HedgeLedger {
    pub fn len(&self) -> usize {
        self.price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_empty()
    }

    pub fn initial_price(&self) -> f64 {
        self.price[0]
    }

    pub fn flvr_at_maturity(&self) -> f64 {
        *self.flvr.last().expect("ledger has at least two steps")
    }

    pub fn total_cost(&self) -> f64 {
        self.cost_paid.iter().sum()
    }
}

/// Final FLVR value and the maximum absolute hedge error of a ledger.
pub fn flvr_outcome(ledger: &HedgeLedger) -> (f64, f64) {
    (ledger.flvr_at_maturity(), ledger.max_abs_error)
}

/// Runs the discrete hedge on raw slices of the discounted index and its
/// activity time, both covering exactly the contract's life. The activity
/// time must have been computed on the full history, then sliced.
pub fn run_hedge_raw(
    s: &[f64],
    tau: &[f64],
    tau_bar_maturity: f64,
    costs: &CostModel,
    mode: HedgeMode,
) -> Result<HedgeLedger> {
    if s.len() != tau.len() {
        return Err(Error::InvalidContract(format!(
            "index and activity time disagree in length: {} vs {}",
            s.len(),
            tau.len()
        )));
    }
    if s.len() < 2 {
        return Err(Error::InvalidContract(
            "a contract needs at least two observations".into(),
        ));
    }
    let rate = costs.proportional_rate;
    let n = s.len();
    let last = n - 1;

    let price: Vec<f64> = s
        .iter()
        .zip(tau)
        .map(|(&si, &ti)| azcb_price(si, ti, tau_bar_maturity))
        .collect();
    let p_start = price[0];

    let mut portfolio = Vec::with_capacity(n);
    let mut fraction = Vec::with_capacity(n);
    let mut cost_paid = Vec::with_capacity(n);
    let mut frozen_at: Option<usize> = None;

    // The fraction chosen for the step ahead, given the current value.
    let choose_fraction = |z: f64, p: f64, frozen: bool| -> f64 {
        if frozen {
            return 0.0;
        }
        match mode {
            HedgeMode::PortfolioValue => {
                hedge_fraction(z).expect("freeze rule guarantees 0 < z < 1")
            }
            HedgeMode::TheoreticalPrice => {
                if p < 1.0 {
                    hedge_fraction(p).expect("price below par is positive")
                } else {
                    0.0
                }
            }
        }
    };

    let z = p_start;
    portfolio.push(z);
    if z >= 1.0 {
        frozen_at = Some(0);
    }
    let mut pi = choose_fraction(z, price[0], frozen_at.is_some());
    fraction.push(pi);
    let mut stock = pi * z;
    let initial_cost = rate * stock.abs();
    cost_paid.push(initial_cost);
    // wealth available going into the next step, net of the initial purchase
    let mut wealth = z - initial_cost;

    for i in 1..n {
        let growth = s[i] / s[i - 1];
        let incoming_stock = stock * growth;
        let mut z_i = wealth + stock * (growth - 1.0);
        let step_cost;
        if i == last {
            // liquidate whatever stock remains
            step_cost = rate * incoming_stock.abs();
            z_i -= step_cost;
            pi = 0.0;
            stock = 0.0;
        } else {
            if z_i <= 0.0 {
                return Err(Error::HedgeFailed {
                    step: i,
                    message: format!("portfolio value {z_i} not positive"),
                });
            }
            if frozen_at.is_none() && z_i >= 1.0 {
                frozen_at = Some(i);
            }
            pi = choose_fraction(z_i, price[i], frozen_at.is_some());
            let new_stock = pi * z_i;
            step_cost = rate * (new_stock - incoming_stock).abs();
            wealth = z_i - step_cost;
            stock = new_stock;
        }
        if z_i <= 0.0 {
            return Err(Error::HedgeFailed {
                step: i,
                message: format!("portfolio value {z_i} not positive"),
            });
        }
        portfolio.push(z_i);
        fraction.push(pi);
        cost_paid.push(step_cost);
    }

    let hedge_error: Vec<f64> = price
        .iter()
        .zip(&portfolio)
        .map(|(&p, &zv)| p - zv)
        .collect();
    let flvr: Vec<f64> = portfolio.iter().map(|&zv| zv - p_start).collect();
    let max_abs_error = hedge_error.iter().fold(0.0f64, |m, &c| m.max(c.abs()));

    Ok(HedgeLedger {
        start_index: 0,
        maturity_index: last,
        tau_bar_maturity,
        payoff: price[last],
        price,
        portfolio,
        fraction,
        hedge_error,
        flvr,
        cost_paid,
        max_abs_error,
        frozen_at,
    })
}

/// Runs the hedge for a contract on dated series, with the maturity
/// activity time taken from the contract's trendline extrapolation (fixed at
/// initiation). Equivalent to [`run_hedge_with_mode`] with the default mode.
pub fn run_hedge(
    contract: &AzcbContract,
    s: &DiscountedIndex,
    tau: &ActivityTimePath,
    costs: &CostModel,
) -> Result<HedgeLedger> {
    run_hedge_with_mode(contract, s, tau, costs, HedgeMode::default())
}

pub fn run_hedge_with_mode(
    contract: &AzcbContract,
    s: &DiscountedIndex,
    tau: &ActivityTimePath,
    costs: &CostModel,
    mode: HedgeMode,
) -> Result<HedgeLedger> {
    if s.len() != tau.len() {
        return Err(Error::InvalidContract(format!(
            "index ({}) and activity time ({}) grids differ",
            s.len(),
            tau.len()
        )));
    }
    let (start, maturity) = (contract.start_index, contract.maturity_index);
    if maturity >= s.len() {
        return Err(Error::InvalidContract(format!(
            "maturity index {maturity} outside grid of length {}",
            s.len()
        )));
    }
    let maturity_date = s.dates()[maturity];
    let tau_bar_maturity = contract.trendline.value_at(maturity_date);
    let ledger = run_hedge_raw(
        &s.values()[start..=maturity],
        &tau.tau()[start..=maturity],
        tau_bar_maturity,
        costs,
        mode,
    )?;
    Ok(HedgeLedger {
        start_index: start,
        maturity_index: maturity,
        ..ledger
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::{activity_time, first_half_window, fit_trendline};
    use crate::market_data::{ObservationSeries, SeriesRole};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use chrono::NaiveDate;

    #[test]
    fn price_is_par_when_activity_time_caught_up() {
        assert_eq!(azcb_price(1.0, 0.5, 0.5), 1.0);
        assert_eq!(azcb_price(100.0, 0.7, 0.5), 1.0);
    }

    #[test]
    fn price_at_unit_exponent_point() {
        // s = 2 (exp(taubar) - exp(tau)) makes the exponent exactly -1
        let tau = 0.3f64;
        let tau_bar = 1.1f64;
        let s = 2.0 * (tau_bar.exp() - tau.exp());
        assert_relative_eq!(
            azcb_price(s, tau, tau_bar),
            0.632_120_558_828_557_7,
            epsilon = 1e-15
        );
    }

    #[test]
    fn price_vanishes_with_the_index() {
        let gap = 1.0f64.exp() - 0.0f64.exp();
        let tiny = 1e-18;
        let p = azcb_price(tiny, 0.0, 1.0);
        assert!(p > 0.0);
        // for small s the price is s / (2 gap) to first order
        assert_relative_eq!(p, tiny / (2.0 * gap), max_relative = 1e-12);
    }

    #[test]
    fn payoff_matches_price_bit_for_bit() {
        for &s in &[0.01, 0.5, 1.0, 3.0, 250.0] {
            for &tau in &[-2.0, 0.0, 0.49, 0.5, 1.0] {
                let p = azcb_price(s, tau, 0.5);
                let h = azcb_payoff(s, tau, 0.5);
                assert_eq!(p.to_bits(), h.to_bits());
            }
        }
    }

    #[test]
    fn price_monotone_in_index_and_gap() {
        let tau_bar = 1.0f64;
        for &tau in &[-1.0, 0.0, 0.5] {
            for &s in &[0.1, 0.5, 1.0, 2.0] {
                let base = azcb_price(s, tau, tau_bar);
                assert!(azcb_price(s * 1.01, tau, tau_bar) > base);
                // larger realized tau shrinks the gap and raises the price
                assert!(azcb_price(s, tau + 0.01, tau_bar) > base);
                // a higher trendline at maturity widens the gap and lowers it
                assert!(azcb_price(s, tau, tau_bar + 0.01) < base);
            }
        }
    }

    #[test]
    fn hedge_fraction_at_one_half_is_ln_two() {
        assert_relative_eq!(
            hedge_fraction(0.5).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn hedge_fraction_limits() {
        assert_relative_eq!(hedge_fraction(1e-12).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hedge_fraction(1.0 - 1e-12).unwrap(), 0.0, epsilon = 1e-9);
        for &z in &[1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-6] {
            let pi = hedge_fraction(z).unwrap();
            assert!(pi > 0.0 && pi < 1.0, "pi({z}) = {pi}");
        }
    }

    #[test]
    fn hedge_fraction_rejects_values_outside_open_unit_interval() {
        for &z in &[-0.2, 0.0, 1.0, 1.3, f64::NAN] {
            assert!(hedge_fraction(z).is_err(), "z = {z}");
        }
    }

    #[test]
    fn fraction_from_price_formula_is_the_same_function() {
        // the pricing-side formula (1 - 1/P) ln(1 - P), written independently
        for k in 1..100 {
            let p = k as f64 / 100.0;
            let from_price = (1.0 - 1.0 / p) * (1.0 - p).ln();
            assert_relative_eq!(hedge_fraction(p).unwrap(), from_price, max_relative = 1e-12);
        }
    }

    fn flat_trendline(tau_bar: f64, origin: NaiveDate) -> TrendLine {
        TrendLine {
            intercept: tau_bar,
            slope_per_year: 0.0,
            r_squared: 1.0,
            fit_window: (0, 0),
            time_origin: origin,
        }
    }

    fn daily_discounted(values: &[f64]) -> DiscountedIndex {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..values.len())
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        DiscountedIndex::from_series(
            ObservationSeries::new(dates, values.to_vec(), SeriesRole::Discounted).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_path_hedges_exactly() {
        let s = daily_discounted(&[2.0; 8]);
        let tau = activity_time(&s, 0.0);
        let contract = AzcbContract::new(0, 7, flat_trendline(0.8, s.dates()[0])).unwrap();
        let ledger = run_hedge(&contract, &s, &tau, &CostModel::zero()).unwrap();
        for i in 0..ledger.len() {
            assert_eq!(ledger.portfolio[i], ledger.initial_price());
            assert_abs_diff_eq!(ledger.hedge_error[i], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(ledger.flvr[i], 0.0, epsilon = 1e-15);
        }
        assert_eq!(ledger.max_abs_error, 0.0);
        assert_eq!(flvr_outcome(&ledger), (0.0, 0.0));
    }

    #[test]
    fn self_financing_recursion_recomputes_exactly() {
        let s = daily_discounted(&[1.0, 1.05, 0.97, 1.1, 1.2, 1.15, 1.3]);
        let tau = activity_time(&s, -1.0);
        let contract = AzcbContract::new(0, 6, flat_trendline(0.5, s.dates()[0])).unwrap();
        let ledger = run_hedge(&contract, &s, &tau, &CostModel::zero()).unwrap();
        assert_eq!(ledger.portfolio[0], ledger.price[0]);
        for i in 1..ledger.len() {
            if ledger.frozen_at.is_some_and(|f| i > f) {
                assert_eq!(ledger.portfolio[i], ledger.portfolio[i - 1]);
                continue;
            }
            let growth = s.values()[i] / s.values()[i - 1];
            let expected =
                ledger.portfolio[i - 1] * (1.0 + ledger.fraction[i - 1] * (growth - 1.0));
            assert_relative_eq!(ledger.portfolio[i], expected, max_relative = 1e-14);
            assert!(ledger.portfolio[i] > 0.0);
        }
    }

    #[test]
    fn freeze_is_permanent_once_at_par() {
        // a high initial price and a surging index push Z over par at step 1
        let s = [1.0, 2.4, 2.0, 3.0, 1.5];
        let tau = [0.0; 5]; // realized tau flat, so the price stays below par
        let ledger = run_hedge_raw(
            &s,
            &tau,
            0.21,
            &CostModel::zero(),
            HedgeMode::PortfolioValue,
        )
        .unwrap();
        let frozen = ledger.frozen_at.expect("portfolio should reach par");
        assert!(ledger.portfolio[frozen] >= 1.0);
        for i in frozen..ledger.len() - 1 {
            assert_eq!(ledger.fraction[i], 0.0);
            if i > frozen {
                assert_eq!(ledger.portfolio[i], ledger.portfolio[frozen]);
            }
        }
        // the frozen value carries to maturity unchanged (zero costs)
        assert_eq!(ledger.portfolio[ledger.len() - 1], ledger.portfolio[frozen]);
    }

    #[test]
    fn costs_reduce_the_outcome_and_are_recorded() {
        let values = [1.0, 1.08, 0.95, 1.12, 1.2, 1.1, 1.25, 1.3];
        let s = daily_discounted(&values);
        let tau = activity_time(&s, -1.2);
        let contract = AzcbContract::new(0, 7, flat_trendline(0.4, s.dates()[0])).unwrap();

        let free = run_hedge(&contract, &s, &tau, &CostModel::zero()).unwrap();
        let costly = run_hedge(&contract, &s, &tau, &CostModel::from_bp(50.0).unwrap()).unwrap();

        assert!(free.cost_paid.iter().all(|&c| c == 0.0));
        assert!(costly.cost_paid[0] > 0.0, "initial purchase is charged");
        assert!(
            *costly.cost_paid.last().unwrap() > 0.0,
            "final liquidation is charged"
        );
        assert!(costly.total_cost() > 0.0);
        assert!(costly.flvr_at_maturity() < free.flvr_at_maturity());
        // initial value is quoted gross: both ledgers start at the price
        assert_eq!(costly.portfolio[0], free.portfolio[0]);
        assert_eq!(costly.flvr[0], 0.0);
    }

    #[test]
    fn ruinous_costs_fail_with_the_step_index() {
        // a near-total haircut per trade plus a crash drives Z below zero
        let s = [1.0, 0.45, 0.4, 0.5];
        let tau = [0.0; 4];
        let err = run_hedge_raw(
            &s,
            &tau,
            1.2,
            &CostModel {
                proportional_rate: 0.99,
            },
            HedgeMode::PortfolioValue,
        )
        .unwrap_err();
        assert!(matches!(err, Error::HedgeFailed { .. }), "{err}");
    }

    #[test]
    fn contract_indices_validated() {
        let origin = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        assert!(AzcbContract::new(5, 5, flat_trendline(0.0, origin)).is_err());
        assert!(AzcbContract::new(6, 2, flat_trendline(0.0, origin)).is_err());

        let s = daily_discounted(&[1.0, 1.1, 1.2]);
        let tau = activity_time(&s, 0.0);
        let contract = AzcbContract::new(0, 9, flat_trendline(0.5, s.dates()[0])).unwrap();
        assert!(matches!(
            run_hedge(&contract, &s, &tau, &CostModel::zero()),
            Err(Error::InvalidContract(_))
        ));
    }

    #[test]
    fn second_half_check_matches_window_convention() {
        let origin = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let c = AzcbContract::new(2, 4, flat_trendline(0.0, origin)).unwrap();
        assert!(c.starts_in_second_half(5)); // half of len 5 ends at index 2
        let early = AzcbContract::new(1, 4, flat_trendline(0.0, origin)).unwrap();
        assert!(!early.starts_in_second_half(5));
    }

    #[test]
    fn theoretical_price_mode_tracks_price_fraction() {
        let values = [1.0, 1.04, 0.98, 1.09, 1.15];
        let s = daily_discounted(&values);
        let tau = activity_time(&s, -1.0);
        let contract = AzcbContract::new(0, 4, flat_trendline(0.6, s.dates()[0])).unwrap();
        let ledger = run_hedge_with_mode(
            &contract,
            &s,
            &tau,
            &CostModel::zero(),
            HedgeMode::TheoreticalPrice,
        )
        .unwrap();
        for i in 0..ledger.len() - 1 {
            if ledger.price[i] < 1.0 && ledger.frozen_at.is_none_or(|f| i < f) {
                assert_relative_eq!(
                    ledger.fraction[i],
                    hedge_fraction(ledger.price[i]).unwrap(),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn real_shaped_hedge_stays_positive_and_tracks_price() {
        // a jagged but growing path, hedged against a slowly rising trendline
        let mut values = Vec::with_capacity(400);
        let mut x = 1.0f64;
        for i in 0..400 {
            let wiggle = ((i * 31 % 17) as f64 - 8.0) / 8.0;
            x *= 1.0 + 0.004 + 0.01 * wiggle;
            values.push(x);
        }
        let s = daily_discounted(&values);
        let tau = activity_time(&s, -3.0);
        let window = first_half_window(s.len());
        let path = activity_time(&s, -3.0);
        let line = fit_trendline(&path, window).unwrap();
        let contract = AzcbContract::new(window.1, s.len() - 1, line).unwrap();
        let ledger = run_hedge(&contract, &s, &tau, &CostModel::zero()).unwrap();
        assert!(ledger.portfolio.iter().all(|&z| z > 0.0));
        assert!(ledger.price.iter().all(|&p| p > 0.0 && p <= 1.0));
        assert_eq!(ledger.flvr[0], 0.0);
        assert_eq!(
            ledger.payoff,
            *ledger.price.last().unwrap(),
            "payoff is the final price entry"
        );
    }
}
