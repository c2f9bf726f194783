//! Time integration of the weak form
//!
//! ```text
//! u_t = −∂x(½u²) − ∂x(1 − ∂x²)⁻¹(3/2 u² + 2k u)
//! ```
//!
//! with classical RK4 and the 2/3 rule applied to `u²`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{
    apply_symbol, dealias_spectrum, functional_h, functional_s, Field, Grid, SymbolId,
};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_CFL: f64 = 0.5;
/// `min u_x` below this marks the run as possibly breaking. A heuristic: the
/// true criterion is `u_x → −∞`.
pub const DEFAULT_BREAKING_THRESHOLD: f64 = -1e3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub cfl: f64,
    pub breaking_threshold: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_end: 10.0,
            sample_every: 100,
            cfl: DEFAULT_CFL,
            breaking_threshold: DEFAULT_BREAKING_THRESHOLD,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidArgument("sample_every must be >= 1".into()));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::InvalidArgument(format!("CFL must be positive, got {}", self.cfl)));
        }
        Ok(())
    }
}

/// Diagnostics recorded at one sample time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistoryRecord {
    pub t: f64,
    pub s: f64,
    pub h: f64,
    /// `min_x (u − u_xx + 2k/3)`
    pub min_w: f64,
    /// `min_x (u + 2k/3 − |u_x|)`; nonnegative when `|u_x| ≤ u + 2k/3`
    pub uxu_slack: f64,
    pub linf_u: f64,
    pub min_u: f64,
    pub min_ux: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Flags {
    pub breaking_suspected: bool,
    /// Integration stopped early because the solution stopped being finite.
    pub halted: bool,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub k: f64,
    pub history: Vec<HistoryRecord>,
    pub flags: Flags,
}

impl SimState {
    pub fn new(u0: Field, k: f64) -> Self {
        Self {
            t: 0.0,
            u: u0,
            k,
            history: Vec::new(),
            flags: Flags::default(),
        }
    }

    /// Append diagnostics for the current state (skipped if `t` is not past
    /// the last record).
    pub fn record(&mut self) {
        if self.history.last().is_some_and(|r| r.t >= self.t) {
            return;
        }
        self.history.push(diagnostics(&self.u, self.k, self.t));
    }

    pub fn max_relative_drift(&self) -> (f64, f64) {
        let Some(first) = self.history.first() else {
            return (0.0, 0.0);
        };
        let rel = |a: f64, b: f64| if b != 0.0 { (a - b).abs() / b.abs() } else { (a - b).abs() };
        self.history.iter().fold((0.0f64, 0.0f64), |(ds, dh), r| {
            (ds.max(rel(r.s, first.s)), dh.max(rel(r.h, first.h)))
        })
    }
}

pub fn diagnostics(u: &Field, k: f64, t: f64) -> HistoryRecord {
    let ux = u.derivative();
    let uxx = u.second_derivative();
    let shift = 2.0 * k / 3.0;
    let mut min_w = f64::INFINITY;
    let mut slack = f64::INFINITY;
    for ((&v, &d), &dd) in u.values().iter().zip(ux.values()).zip(uxx.values()) {
        min_w = min_w.min(v - dd + shift);
        slack = slack.min(v + shift - d.abs());
    }
    HistoryRecord {
        t,
        s: functional_s(u),
        h: functional_h(u, k),
        min_w,
        uxu_slack: slack,
        linf_u: u.linf_norm(),
        min_u: u.min(),
        min_ux: ux.min(),
    }
}

fn rhs_values(grid: &Grid, u: &[f64], k: f64) -> Vec<f64> {
    let u_hat = grid.forward(u);
    let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
    let mut q_hat = grid.forward(&sq);
    dealias_spectrum(grid, &mut q_hat);
    let ny = grid.nyquist_slot();
    let out: Vec<Complex64> = q_hat
        .iter()
        .zip(&u_hat)
        .enumerate()
        .map(|(m, (&q, &uh))| {
            if m == ny {
                return Complex64::new(0.0, 0.0);
            }
            let xi = grid.wavenumber(m);
            let inner = 0.5 * q + (1.5 * q + 2.0 * k * uh) / (1.0 + xi * xi);
            Complex64::new(0.0, -xi) * inner
        })
        .collect();
    grid.inverse(out)
}

/// `−∂x(½u²) − ∂x(1−∂x²)⁻¹(3/2 u² + 2k u)` with `u²` dealiased.
pub fn rhs_weak(u: &Field, k: f64) -> Field {
    Field::from_vec_unchecked(u.grid(), rhs_values(u.grid(), u.values(), k))
}

/// `δH/δu = −½u² − 2k(4−∂x²)⁻¹u`, with the same dealiased square as
/// [`rhs_weak`].
pub fn hamiltonian_gradient(u: &Field, k: f64) -> Field {
    let sq = crate::spectral::dealias_23(&u.map(|v| v * v));
    let smooth = apply_symbol(u, SymbolId::Helmholtz4Inv);
    sq.zip_map_unchecked(&smooth, |q, s| -0.5 * q - 2.0 * k * s)
}

/// `J δH/δu` with `J = ∂x(4−∂x²)(1−∂x²)⁻¹`; an independent route to
/// [`rhs_weak`].
pub fn rhs_hamiltonian(u: &Field, k: f64) -> Field {
    apply_symbol(&hamiltonian_gradient(u, k), SymbolId::SkewJ)
}

/// A priori bound `√2(1+√2)‖u0‖ + 4k/3` on `‖u(t)‖∞` for data with `w0 > 0`.
pub fn linf_bound(u0: &Field, k: f64) -> f64 {
    std::f64::consts::SQRT_2 * (1.0 + std::f64::consts::SQRT_2) * u0.l2_norm() + 4.0 * k / 3.0
}

/// Largest stable step `CFL·Δx/(‖u‖∞ + 1)`.
pub fn dt_max(u: &Field, cfl: f64) -> f64 {
    cfl * u.grid().spacing() / (u.linf_norm() + 1.0)
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

/// One classical RK4 step of size `dt` on raw samples. `dt` may be negative.
fn rk4_values(grid: &Grid, u: &[f64], k: f64, dt: f64) -> Vec<f64> {
    let k1 = rhs_values(grid, u, k);
    let k2 = rhs_values(grid, &axpy(u, 0.5 * dt, &k1), k);
    let k3 = rhs_values(grid, &axpy(u, 0.5 * dt, &k2), k);
    let k4 = rhs_values(grid, &axpy(u, dt, &k3), k);
    u.iter()
        .enumerate()
        .map(|(j, v)| v + dt / 6.0 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]))
        .collect()
}

fn advance(state: &mut SimState, dt: f64, cfl: f64) -> Result<()> {
    let limit = dt_max(&state.u, cfl);
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    let next = rk4_values(state.u.grid(), state.u.values(), state.k, dt);
    if next.iter().any(|v| !v.is_finite()) {
        state.flags.breaking_suspected = true;
        state.flags.halted = true;
        return Err(Error::Blowup { t: state.t + dt });
    }
    state.u = Field::from_vec_unchecked(state.u.grid(), next);
    Ok(())
}

/// Advance by `dt` with the default CFL guard and append diagnostics.
pub fn rk4_step(s: &SimState, dt: f64) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut next = s.clone();
    if next.history.is_empty() {
        next.record();
    }
    advance(&mut next, dt, DEFAULT_CFL)?;
    next.t = s.t + dt;
    next.record();
    Ok(next)
}

/// Integrate from `u0` to `cfg.t_end`, recording diagnostics every
/// `cfg.sample_every` steps and at the final time.
pub fn run(u0: Field, k: f64, cfg: &EvolveConfig) -> Result<SimState> {
    run_observed(u0, k, cfg, |_| {})
}

/// As [`run`], calling `observer` after every recorded sample (including
/// `t = 0`). A non-finite solution ends the run early with
/// `flags.halted` set instead of returning an error.
pub fn run_observed(
    u0: Field,
    k: f64,
    cfg: &EvolveConfig,
    mut observer: impl FnMut(&SimState),
) -> Result<SimState> {
    cfg.validate()?;
    if !u0.is_finite() {
        return Err(Error::NonFinite {
            index: u0.values().iter().position(|v| !v.is_finite()).unwrap_or(0),
        });
    }
    let mut state = SimState::new(u0, k);
    state.record();
    observer(&state);

    let full = (cfg.t_end / cfg.dt).floor() as usize;
    let remainder = cfg.t_end - full as f64 * cfg.dt;
    let partial = remainder > 1e-9 * cfg.dt;
    let total = full + usize::from(partial);

    for step in 1..=total {
        let dt = if step > full { remainder } else { cfg.dt };
        match advance(&mut state, dt, cfg.cfl) {
            Ok(()) => {}
            Err(Error::Blowup { .. }) => return Ok(state),
            Err(e) => return Err(e),
        }
        state.t = if step > full {
            cfg.t_end
        } else {
            step as f64 * cfg.dt
        };
        if step % cfg.sample_every == 0 || step == total {
            state.record();
            let last = state.history.last().expect("just recorded");
            if last.min_ux < cfg.breaking_threshold {
                state.flags.breaking_suspected = true;
            }
            observer(&state);
        }
    }
    Ok(state)
}
