//! Smooth solitary waves `φ^c` built from the first integral
//!
//! ```text
//! φ_x² = φ² + 2kφ²(2φ/3 − c)/(c − φ)².
//! ```
//!
//! Writing the right-hand side as `φ² G(φ)` the numerator of `G` factors as
//! `(Φ − φ)(Φ₂ − φ)` where `Φ < Φ₂` are the roots of
//! `(c − φ)² + 2k(2φ/3 − c) = 0`, so `√G = σ√(Φ₂ − φ)/(c − φ)` with
//! `σ = √(Φ − φ)`. In the variable `σ` the inverse map
//! `x(φ) = ∫_φ^Φ dψ/(ψ√G(ψ))` splits into an explicit logarithm plus the
//! integral of a function that is analytic on `[0, √Φ]`:
//!
//! ```text
//! x(φ) = ln(Φ/φ)/a + ∫_0^σ B(s) ds,   a = √(1 − 2k/c),
//! B(s) = 2k(8/3 − 2ψ/c) / ( a√(Φ₂−ψ) · (a(c−ψ) + s√(Φ₂−ψ)) ),   ψ = Φ − s².
//! ```
//!
//! The integral is evaluated by Gauss–Legendre quadrature and `x(φ) = x_j`
//! is inverted pointwise by safeguarded Newton iteration, so no
//! interpolation error enters the sampled profile.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{apply_symbol, Field, Grid, SymbolId};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_POINTS: usize = 4096;
pub const DEFAULT_HALF_LENGTH: f64 = 64.0;

/// Below `TAIL_CUTOFF · Φ` the profile continues as a pure exponential.
pub const TAIL_CUTOFF: f64 = 1e-8;

const GAUSS_POINTS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WaveParams {
    c: f64,
    k: f64,
}

impl WaveParams {
    pub fn new(c: f64, k: f64) -> Result<Self> {
        if c.is_finite() && k.is_finite() && k > 0.0 && c > 2.0 * k {
            Ok(Self { c, k })
        } else {
            Err(Error::InvalidParams { c, k })
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `√(1 − 2k/c)`, the exponential decay rate of the tail.
    pub fn decay_rate(&self) -> f64 {
        (1.0 - 2.0 * self.k / self.c).sqrt()
    }

    /// Larger root `Φ₂ > c` of `(c−Φ)² + 2k(2Φ/3 − c)`.
    fn upper_root(&self) -> f64 {
        let (c, k) = (self.c, self.k);
        (c - 2.0 * k / 3.0) + (2.0 * k * c / 3.0 + 4.0 * k * k / 9.0).sqrt()
    }

    /// `(c − 2k)/4`, the bottom of the essential spectrum of `L_c`.
    pub fn essential_edge(&self) -> f64 {
        (self.c - 2.0 * self.k) / 4.0
    }
}

/// Peak height `Φ_c`: the root of `(c−Φ)² + 2k(2Φ/3 − c) = 0` lying in
/// `((c−2k)/4, c−2k)`.
pub fn max_height(p: &WaveParams) -> f64 {
    // product of the two roots is c² − 2kc; dividing avoids the cancellation
    // in (c − 2k/3) − √(…)
    let (c, k) = (p.c, p.k);
    (c * c - 2.0 * k * c) / p.upper_root()
}

/// Nodes and weights of the Gauss–Legendre rule on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gauss_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GAUSS_POINTS))
}

/// The inverse map `x(φ)` and its pieces for one parameter pair.
struct InverseMap {
    c: f64,
    k: f64,
    a: f64,
    peak: f64,
    upper: f64,
}

impl InverseMap {
    fn new(p: &WaveParams) -> Self {
        Self {
            c: p.c,
            k: p.k,
            a: p.decay_rate(),
            peak: max_height(p),
            upper: p.upper_root(),
        }
    }

    /// Regular part of the integrand in the variable `s = √(Φ − ψ)`.
    fn regular(&self, s: f64) -> f64 {
        let psi = self.peak - s * s;
        let root = (self.upper - psi).sqrt();
        2.0 * self.k * (8.0 / 3.0 - 2.0 * psi / self.c)
            / (self.a * root * (self.a * (self.c - psi) + s * root))
    }

    /// `∫_0^σ B(s) ds`.
    fn regular_integral(&self, sigma: f64) -> f64 {
        let (nodes, weights) = gauss_rule();
        let half = 0.5 * sigma;
        nodes
            .iter()
            .zip(weights)
            .map(|(z, w)| w * self.regular(half * (1.0 + z)))
            .sum::<f64>()
            * half
    }

    /// `x(σ)` for the branch `x ≥ 0`.
    fn x_of_sigma(&self, sigma: f64) -> f64 {
        let psi = self.peak - sigma * sigma;
        (self.peak / psi).ln() / self.a + self.regular_integral(sigma)
    }

    /// `dx/dσ = 2(c − ψ)/(ψ√(Φ₂ − ψ))`.
    fn dx_dsigma(&self, sigma: f64) -> f64 {
        let psi = self.peak - sigma * sigma;
        2.0 * (self.c - psi) / (psi * (self.upper - psi).sqrt())
    }

    /// `x(φ)` parametrized by `η = ln φ`.
    fn x_of_log(&self, eta: f64) -> f64 {
        let phi = eta.exp();
        let sigma = (self.peak - phi).max(0.0).sqrt();
        (self.peak.ln() - eta) / self.a + self.regular_integral(sigma)
    }

    /// `dx/dη = −(c − φ)/(σ√(Φ₂ − φ))`.
    fn dx_dlog(&self, eta: f64) -> f64 {
        let phi = eta.exp();
        let sigma = (self.peak - phi).max(0.0).sqrt();
        -(self.c - phi) / (sigma * (self.upper - phi).sqrt())
    }

    fn x_of_phi(&self, phi: f64) -> f64 {
        self.x_of_log(phi.ln())
    }

    /// `|φ_x| = φσ√(Φ₂ − φ)/(c − φ)`.
    fn slope_magnitude(&self, phi: f64) -> f64 {
        let sigma = (self.peak - phi).max(0.0).sqrt();
        phi * sigma * (self.upper - phi).sqrt() / (self.c - phi)
    }
}

/// Safeguarded Newton iteration for an increasing or decreasing scalar map
/// on a bracket.
fn newton_bracketed(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    guess: f64,
    tol: f64,
) -> Option<f64> {
    let f_lo = f(lo);
    let increasing = f(hi) > f_lo;
    let mut t = guess.clamp(lo, hi);
    for _ in 0..200 {
        let r = f(t);
        if r == 0.0 {
            return Some(t);
        }
        if (r > 0.0) == increasing {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - r / df(t);
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= tol * (1.0 + t.abs()) || hi - lo <= tol * (1.0 + t.abs()) {
            return Some(next);
        }
        t = next;
    }
    None
}

#[derive(Clone, Debug)]
pub struct SolitaryWave {
    pub params: WaveParams,
    pub grid: Grid,
    pub phi: Field,
    pub phi_x: Field,
    pub max_height: f64,
    pub decay_rate: f64,
    /// `ρ = (4 − ∂x²)⁻¹ φ`
    pub rho: Field,
    /// `ψ̃ = (1 − ∂x²)(4 − ∂x²)⁻¹ φ`
    pub psi_tilde: Field,
    /// `φ − φ_xx + 2k/3`
    pub w_profile: Field,
}

impl SolitaryWave {
    pub fn c(&self) -> f64 {
        self.params.c
    }

    pub fn k(&self) -> f64 {
        self.params.k
    }
}

/// Sample `φ^c` on `grid` with the peak at `x = 0`.
pub fn build_profile(p: &WaveParams, grid: &Grid, tol: f64) -> Result<SolitaryWave> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} out of (0, 1)")));
    }
    let map = InverseMap::new(p);
    let peak = map.peak;
    let a = map.a;

    let phi_cut = TAIL_CUTOFF * peak;
    let x_cut = map.x_of_phi(phi_cut);
    let l = grid.half_length();
    let tail_at = |x: f64| phi_cut * (-a * (x - x_cut)).exp();
    let edge = if l >= x_cut {
        tail_at(l)
    } else {
        let lo = phi_cut.ln();
        let hi = peak.ln();
        newton_bracketed(|e| map.x_of_log(e) - l, |e| map.dx_dlog(e), lo, hi, 0.5 * (lo + hi), 1e-12)
            .map_or(peak, f64::exp)
    };
    if edge >= tol {
        return Err(Error::GridTooShort { tail: edge, tol });
    }

    let sigma_max = peak.sqrt();
    let phi_half = 0.5 * peak;
    let x_half = map.x_of_phi(phi_half);

    let n = grid.len();
    let origin = grid.origin_index();
    let mut right = vec![0.0; n / 2 + 1];
    right[0] = peak;
    let mut sigma_guess = 0.0;
    let mut eta_guess = phi_half.ln();
    for (i, slot) in right.iter_mut().enumerate().skip(1) {
        let x = i as f64 * grid.spacing();
        let value = if x <= x_half {
            let hi = (peak - phi_half).sqrt();
            let sigma = newton_bracketed(
                |s| map.x_of_sigma(s) - x,
                |s| map.dx_dsigma(s),
                0.0,
                hi.min(sigma_max),
                sigma_guess,
                1e-15,
            )
            .ok_or_else(|| Error::Quadrature(format!("no convergence near peak at x = {x}")))?;
            sigma_guess = sigma;
            peak - sigma * sigma
        } else if x <= x_cut {
            let eta = newton_bracketed(
                |e| map.x_of_log(e) - x,
                |e| map.dx_dlog(e),
                phi_cut.ln(),
                phi_half.ln(),
                eta_guess,
                1e-15,
            )
            .ok_or_else(|| Error::Quadrature(format!("no convergence in decay at x = {x}")))?;
            eta_guess = eta;
            eta.exp()
        } else {
            tail_at(x)
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Quadrature(format!("profile value {value} at x = {x}")));
        }
        *slot = value;
    }

    let mut phi = vec![0.0; n];
    let mut phi_x = vec![0.0; n];
    for (j, (v, d)) in phi.iter_mut().zip(phi_x.iter_mut()).enumerate() {
        let offset = j as isize - origin as isize;
        let value = right[offset.unsigned_abs()];
        *v = value;
        let slope = if j == origin {
            0.0
        } else {
            map.slope_magnitude(value)
        };
        *d = if offset > 0 { -slope } else { slope };
    }

    let (c, k) = (p.c, p.k);
    let phi = Field::new(grid, phi)?;
    let phi_x = Field::new(grid, phi_x)?;
    let rho = phi.map(|f| (2.0 * c * f - f * f) / (6.0 * c + 4.0 * k));
    let psi_tilde = phi.map(|f| (3.0 * f + 4.0 * k) * f / (2.0 * (3.0 * c + 2.0 * k)));
    let w_profile = phi.map(|f| 2.0 * k / 3.0 * (c / (c - f)).powi(3));

    Ok(SolitaryWave {
        params: *p,
        grid: grid.clone(),
        phi,
        phi_x,
        max_height: peak,
        decay_rate: a,
        rho,
        psi_tilde,
        w_profile,
    })
}

/// Build on the default `N = 4096`, `L = 64` grid with `tol = 1e-10`.
pub fn build_default(p: &WaveParams) -> Result<SolitaryWave> {
    let grid = Grid::new(DEFAULT_HALF_LENGTH, DEFAULT_POINTS)?;
    build_profile(p, &grid, DEFAULT_TOL)
}

/// `max_j |(c−φ)(φ−φ_xx) − (φ² + 2kφ − φ_x²)|` with both derivatives taken
/// spectrally from the sampled profile.
pub fn residual_travel_ode(w: &SolitaryWave) -> f64 {
    travel_ode_residual(&w.phi, w.c(), w.k())
}

pub fn travel_ode_residual(phi: &Field, c: f64, k: f64) -> f64 {
    let d1 = phi.derivative();
    let d2 = phi.second_derivative();
    phi.values()
        .iter()
        .zip(d1.values())
        .zip(d2.values())
        .map(|((&f, &fx), &fxx)| ((c - f) * (f - fxx) - (f * f + 2.0 * k * f - fx * fx)).abs())
        .fold(0.0, f64::max)
}

/// Maximum deviations of the closed forms from their spectral counterparts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedFormReport {
    /// `(2cφ − φ²)/(6c+4k)` vs `(4−∂x²)⁻¹φ`
    pub rho: f64,
    /// `(3φ+4k)φ/(2(3c+2k))` vs `(1−∂x²)(4−∂x²)⁻¹φ`
    pub psi_tilde: f64,
    /// `(2k/3)(c³/(c−φ)³ − 1)` vs `φ − φ_xx`
    pub momentum: f64,
}

impl ClosedFormReport {
    pub fn max(&self) -> f64 {
        self.rho.max(self.psi_tilde).max(self.momentum)
    }
}

pub fn closed_form_checks(w: &SolitaryWave) -> ClosedFormReport {
    let k = w.k();
    let rho_spec = apply_symbol(&w.phi, SymbolId::Helmholtz4Inv);
    let psi_spec = apply_symbol(&w.phi, SymbolId::SWeight);
    let m_spec = &w.phi - &w.phi.second_derivative();
    let m_closed = w.w_profile.map(|v| v - 2.0 * k / 3.0);
    ClosedFormReport {
        rho: (&rho_spec - &w.rho).linf_norm(),
        psi_tilde: (&psi_spec - &w.psi_tilde).linf_norm(),
        momentum: (&m_spec - &m_closed).linf_norm(),
    }
}

/// Least-squares slope of `ln φ` against `x` over the right tail where
/// `lo·Φ ≤ φ ≤ hi·Φ`.
pub fn tail_log_slope(w: &SolitaryWave, lo: f64, hi: f64) -> Option<f64> {
    let grid = &w.grid;
    let pts: Vec<(f64, f64)> = (grid.origin_index()..grid.len())
        .map(|j| (grid.point(j), w.phi.values()[j]))
        .filter(|&(_, f)| f >= lo * w.max_height && f <= hi * w.max_height)
        .map(|(x, f)| (x, f.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}
