//! Exact simulation of the benchmark-neutral index dynamics and the
//! Monte-Carlo oracle for the closed-form bond price.
//!
//! Under the pricing measure the discounted index follows
//! `dS = 4 exp(tau) a dt + sqrt(4 S exp(tau) a) dW`, a dimension-4 squared
//! Bessel process in the clock `phi = exp(tau)` when the activity time grows
//! linearly, `tau_t = tau_0 + a t`. Its transition over a clock increment
//! `dphi` is `dphi` times a noncentral chi-square with 4 degrees of freedom
//! and noncentrality `x / dphi`, sampled here as a Poisson mixture of gammas.
//! Stepping with that transition is exact in law, so Monte-Carlo estimates
//! test the pricing formula rather than a discretization scheme.
//!
//! Each path draws from its own counter-seeded ChaCha stream, which makes
//! parallel runs reproducible and independent of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;

use crate::azcb::{self, CostModel, HedgeMode};
use crate::{Error, Result};

/// Parameters of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Initial discounted index level.
    pub s0: f64,
    /// Initial activity time.
    pub tau0: f64,
    /// Activity-time slope per year (constant).
    pub slope: f64,
    /// Simulation horizon in years.
    pub horizon_years: f64,
    /// Requested step in years; the grid is adjusted so the final point
    /// lands exactly on the horizon.
    pub step_years: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.s0.is_finite() || self.s0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "s0 must be positive, got {}",
                self.s0
            )));
        }
        if !self.tau0.is_finite() {
            return Err(Error::InvalidParameter("tau0 must be finite".into()));
        }
        if !self.slope.is_finite() || self.slope <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "activity-time slope must be positive, got {}",
                self.slope
            )));
        }
        if !self.step_years.is_finite() || self.step_years <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "step must be positive, got {}",
                self.step_years
            )));
        }
        if self.horizon_years.is_nan() || self.horizon_years < self.step_years {
            return Err(Error::InvalidParameter(format!(
                "horizon {} shorter than one step {}",
                self.horizon_years, self.step_years
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps after snapping the grid onto the horizon.
    pub fn n_steps(&self) -> usize {
        ((self.horizon_years / self.step_years).round() as usize).max(1)
    }

    /// Activity time at year `t`.
    pub fn tau_at(&self, t: f64) -> f64 {
        self.tau0 + self.slope * t
    }

    /// Activity time at the horizon; the trendline value a synthetic hedge
    /// prices against.
    pub fn tau_at_horizon(&self) -> f64 {
        self.tau_at(self.horizon_years)
    }
}

/// One simulated trajectory. `phi[i]` is `exp(tau[i])`, the clock the squared
/// Bessel process runs on; it is strictly increasing.
#[derive(Debug, Clone)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
}

impl SimPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_s(&self) -> f64 {
        *self.s.last().expect("paths have at least two points")
    }
}

/// The RNG stream for one path of one run. Streams are independent, so paths
/// can be generated in any order or in parallel without changing the draw.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exact transition of a dimension-4 squared Bessel process over a clock
/// increment `dphi`: `dphi` times a noncentral chi-square with 4 degrees of
/// freedom and noncentrality `x / dphi`, drawn as a central chi-square with
/// `4 + 2J` degrees of freedom where `J ~ Poisson(x / (2 dphi))`.
pub fn sample_besq4_transition<R: Rng + ?Sized>(x: f64, dphi: f64, rng: &mut R) -> f64 {
    debug_assert!(x > 0.0, "current value must be positive");
    debug_assert!(dphi > 0.0, "clock increment must be positive");
    let mixing = Poisson::new(0.5 * x / dphi).expect("positive Poisson rate");
    let extra: f64 = mixing.sample(rng);
    // chi-square with 4 + 2J dof is Gamma(shape 2 + J, scale 2)
    let chi2 = Gamma::new(2.0 + extra, 2.0).expect("valid gamma parameters");
    let next = dphi * chi2.sample(rng);
    // the process never reaches zero; keep the sample strictly positive even
    // if the gamma draw underflows
    next.max(f64::MIN_POSITIVE)
}

fn grid(config: &SimConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = config.n_steps();
    let dt = config.horizon_years / n as f64;
    let times: Vec<f64> = (0..=n).map(|j| j as f64 * dt).collect();
    let tau: Vec<f64> = times.iter().map(|&t| config.tau_at(t)).collect();
    let phi: Vec<f64> = tau.iter().map(|&t| t.exp()).collect();
    (times, tau, phi)
}

fn sample_path_values(config: &SimConfig, phi: &[f64], stream: u64) -> Vec<f64> {
    let mut rng = path_rng(config.seed, stream);
    let mut s = Vec::with_capacity(phi.len());
    s.push(config.s0);
    for j in 1..phi.len() {
        let dphi = phi[j] - phi[j - 1];
        let next = sample_besq4_transition(s[j - 1], dphi, &mut rng);
        s.push(next);
    }
    s
}

/// Simulates `n_paths` exact trajectories on the config's time grid. The
/// activity time evolves deterministically as `tau_0 + a t`.
pub fn simulate_paths(config: &SimConfig) -> Result<Vec<SimPath>> {
    config.validate()?;
    let (times, tau, phi) = grid(config);
    let paths = (0..config.n_paths)
        .into_par_iter()
        .map(|p| SimPath {
            times: times.clone(),
            s: sample_path_values(config, &phi, p as u64),
            tau: tau.clone(),
            phi: phi.clone(),
        })
        .collect();
    Ok(paths)
}

/// Simulates only the horizon values of `n_paths` trajectories; identical in
/// law to the terminal entries of [`simulate_paths`] and far cheaper for
/// Monte-Carlo estimation.
pub fn simulate_terminal_values(config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let (_, _, phi) = grid(config);
    let terminals = (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            *sample_path_values(config, &phi, p as u64)
                .last()
                .expect("grid has at least two points")
        })
        .collect();
    Ok(terminals)
}

/// Monte-Carlo bond-price estimate together with the closed form it checks.
#[derive(Debug, Clone, Copy)]
pub struct McZcbReport {
    /// `1 - exp(-S_t / (2 (exp(tau_T) - exp(tau_t))))`.
    pub closed_form: f64,
    /// `S_t * mean(1 / S_T)` over the sampled paths.
    pub estimate: f64,
    /// Standard error of the estimate.
    pub std_error: f64,
    /// `(estimate - closed_form) / std_error`.
    pub z_score: f64,
    pub n_paths: usize,
}

/// Benchmark-neutral Monte-Carlo price of the bond paying one savings-account
/// unit at the horizon, `S_t E[1/S_T]`, from terminal index samples started
/// at `(s_t, tau_t)`.
pub fn mc_zcb_price_from_terminals(
    terminal_s: &[f64],
    s_t: f64,
    tau_t: f64,
    tau_maturity: f64,
) -> McZcbReport {
    assert!(!terminal_s.is_empty(), "need at least one path");
    let n = terminal_s.len();
    let inverses: Vec<f64> = terminal_s.iter().map(|&v| 1.0 / v).collect();
    let mean = inverses.iter().sum::<f64>() / n as f64;
    let var = inverses
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (n as f64 - 1.0);
    let estimate = s_t * mean;
    let std_error = s_t * (var / n as f64).sqrt();
    let closed_form = azcb::azcb_price(s_t, tau_t, tau_maturity);
    let z_score = if std_error > 0.0 {
        (estimate - closed_form) / std_error
    } else {
        0.0
    };
    McZcbReport {
        closed_form,
        estimate,
        std_error,
        z_score,
        n_paths: n,
    }
}

/// As [`mc_zcb_price_from_terminals`], reading the terminal values off full
/// paths simulated from `(s_t, tau_t)`.
pub fn mc_zcb_price(paths: &[SimPath], s_t: f64, tau_t: f64, tau_maturity: f64) -> McZcbReport {
    let terminals: Vec<f64> = paths.iter().map(SimPath::terminal_s).collect();
    mc_zcb_price_from_terminals(&terminals, s_t, tau_t, tau_maturity)
}

/// Stock-GOP volatility `theta = sqrt(4 exp(tau) a / S)` implied by the
/// information-minimizing dynamics.
pub fn gop_volatility(s: f64, tau: f64, slope: f64) -> f64 {
    (4.0 * tau.exp() * slope / s).sqrt()
}

/// Mean maximum absolute hedge error at one rebalancing step size.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub step_years: f64,
    pub mean_max_abs_error: f64,
}

/// Hedges the horizon bond on fresh exact paths at each step size and reports
/// the mean maximum absolute hedge error. On these synthetic paths the
/// trendline is exact (`tau_T` is known), so the residual error is purely the
/// discrete-time rebalancing; it shrinks as the step does.
pub fn hedge_convergence_experiment(
    base: &SimConfig,
    step_sizes: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    base.validate()?;
    if step_sizes.is_empty() {
        return Err(Error::InvalidParameter("no step sizes given".into()));
    }
    for pair in step_sizes.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::InvalidParameter(
                "step sizes must be strictly decreasing".into(),
            ));
        }
    }
    let mut rows = Vec::with_capacity(step_sizes.len());
    for (k, &step) in step_sizes.iter().enumerate() {
        let config = SimConfig {
            step_years: step,
            ..*base
        };
        config.validate()?;
        let (_, tau, phi) = grid(&config);
        let tau_bar = *tau.last().expect("grid non-empty");
        let errors: Vec<f64> = (0..config.n_paths)
            .into_par_iter()
            .map(|p| {
                let stream = ((k as u64) << 32) | p as u64;
                let s = sample_path_values(&config, &phi, stream);
                let ledger = azcb::run_hedge_raw(
                    &s,
                    &tau,
                    tau_bar,
                    &CostModel::zero(),
                    HedgeMode::PortfolioValue,
                )
                .expect("synthetic hedge cannot fail without costs");
                ledger.max_abs_error
            })
            .collect();
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        rows.push(ConvergenceRow {
            step_years: step,
            mean_max_abs_error: mean,
        });
    }
    Ok(rows)
}
