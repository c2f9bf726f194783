//! Orbital-stability experiments: perturbed initial data, orbital distance,
//! the foliation `u = φ(· − r) + h(· − r)`, the a priori L∞–L² estimate and the
//! two-root stability certificate.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{run_observed, EvolveConfig};
use crate::linops::{assemble_lc, constrained_coercivity};
use crate::profile::{build_profile, SolitaryWave, DEFAULT_TOL};
use crate::spectral::{
    dot, functional_h, functional_s, lagrangian_q, random_band_limited, sobolev_norm, Field,
    Grid,
};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "DPLAB_THREADS";
/// Foliation neighbourhood radius as a fraction of `‖φ‖`.
pub const DEFAULT_DELTA1_FRACTION: f64 = 0.1;
/// Largest grid on which the sweep measures `α` directly.
pub const ALPHA_MAX_POINTS: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// `exp(−x²)` centred at the crest
    Gaussian,
    /// random band-limited field, modes `|n| ≤ N/8`
    Random(u64),
    /// the kernel direction `φ_x`
    Kernel,
    Custom(Field),
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Gaussian => write!(f, "gaussian"),
            Shape::Random(seed) => write!(f, "random:{seed}"),
            Shape::Kernel => write!(f, "kernel"),
            Shape::Custom(_) => write!(f, "custom"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Shape::Gaussian),
            "kernel" => Ok(Shape::Kernel),
            _ => {
                let seed = s
                    .strip_prefix("random:")
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "unknown shape `{s}` (expected gaussian, random:SEED or kernel)"
                        ))
                    })?;
                Ok(Shape::Random(seed))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub delta: f64,
    pub shape: Shape,
    pub s_matched: bool,
}

impl Perturbation {
    pub fn new(delta: f64, shape: Shape) -> Self {
        Self {
            delta,
            shape,
            s_matched: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PerturbedInitial {
    pub u0: Field,
    /// factor applied for S-matching (1 otherwise)
    pub scale: f64,
    pub min_w0: f64,
}

/// Unnormalized perturbation direction.
pub fn shape_field(w: &SolitaryWave, shape: &Shape) -> Result<Field> {
    match shape {
        Shape::Gaussian => Ok(Field::from_fn(&w.grid, |x| (-x * x).exp())),
        Shape::Random(seed) => Ok(random_band_limited(&w.grid, w.grid.len() / 8, *seed)),
        Shape::Kernel => Ok(w.phi_x.clone()),
        Shape::Custom(f) => {
            if f.grid() != &w.grid {
                return Err(Error::GridMismatch);
            }
            Ok(f.clone())
        }
    }
}

/// `u0 = s(φ + δv)` with `v` of unit discrete H³ norm and `s` chosen so that
/// `S(u0) = S(φ)` when requested. Rejects data with `w0 ≤ 0` somewhere.
pub fn make_perturbed_initial(w: &SolitaryWave, p: &Perturbation) -> Result<PerturbedInitial> {
    if !(p.delta.is_finite() && p.delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be nonnegative, got {}", p.delta)));
    }
    let v = shape_field(w, &p.shape)?;
    let norm = sobolev_norm(&v, 3.0);
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("perturbation shape has zero norm".into()));
    }
    let raw = &w.phi + &(&v * (p.delta / norm));
    let scale = if p.s_matched {
        // S is quadratic, so the matching factor is explicit
        (functional_s(&w.phi) / functional_s(&raw)).sqrt()
    } else {
        1.0
    };
    let u0 = if scale == 1.0 { raw } else { &raw * scale };
    let (j, min_w0) = (&u0 - &u0.second_derivative())
        .map(|v| v + 2.0 * w.k() / 3.0)
        .argmin();
    if !(min_w0 > 0.0) {
        return Err(Error::NonPositiveMomentum {
            min_w0,
            x: w.grid.point(j),
        });
    }
    Ok(PerturbedInitial { u0, scale, min_w0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitalDistance {
    pub d2: f64,
    pub dinf: f64,
    /// optimal shift in `[−L, L)`
    pub x0: f64,
}

fn wrap(x: f64, l: f64) -> f64 {
    let p = 2.0 * l;
    let r = (x + l).rem_euclid(p) - l;
    if r >= l {
        r - p
    } else {
        r
    }
}

/// Cross-correlation `a ↦ ∫u(x)φ(x − a)dx` of band-limited fields and its
/// first two derivatives.
struct Correlation {
    grid: Grid,
    product: Vec<Complex64>,
}

impl Correlation {
    fn new(u: &Field, phi: &Field) -> Self {
        let grid = u.grid().clone();
        let uh = grid.forward(u.values());
        let ph = grid.forward(phi.values());
        let product = uh.iter().zip(&ph).map(|(a, b)| a * b.conj()).collect();
        Self { grid, product }
    }

    /// Values at all grid shifts `a = sΔx`, indexed by `s mod N`.
    fn on_grid(&self) -> Vec<f64> {
        let dx = self.grid.spacing();
        self.grid
            .inverse(self.product.clone())
            .into_iter()
            .map(|v| v * dx)
            .collect()
    }

    fn derivatives(&self, a: f64) -> (f64, f64, f64) {
        let ny = self.grid.nyquist_slot();
        let (mut c0, mut c1, mut c2) = (0.0, 0.0, 0.0);
        for (m, z) in self.product.iter().enumerate() {
            let xi = self.grid.wavenumber(m);
            if m == ny {
                c0 += z.re * (xi * a).cos();
                c1 -= z.re * xi * (xi * a).sin();
                c2 -= z.re * xi * xi * (xi * a).cos();
            } else {
                let e = z * Complex64::from_polar(1.0, xi * a);
                c0 += e.re;
                c1 -= xi * e.im;
                c2 -= xi * xi * e.re;
            }
        }
        let s = self.grid.spacing() / self.grid.len() as f64;
        (c0 * s, c1 * s, c2 * s)
    }
}

fn distance_at(u: &Field, w: &SolitaryWave, x0: f64) -> OrbitalDistance {
    let diff = u - &w.phi.shifted(x0);
    OrbitalDistance {
        d2: diff.l2_norm(),
        dinf: diff.linf_norm(),
        x0,
    }
}

/// `inf_a ‖u − φ(· − a)‖` with the maximizing shift, refined below the grid.
pub fn orbital_distance(u: &Field, w: &SolitaryWave) -> Result<OrbitalDistance> {
    if u.grid() != &w.grid {
        return Err(Error::GridMismatch);
    }
    let grid = &w.grid;
    let n = grid.len();
    let dx = grid.spacing();
    let l = grid.half_length();
    let corr = Correlation::new(u, &w.phi);
    let r = corr.on_grid();
    let signed = |s: usize| if s >= n / 2 { s as i64 - n as i64 } else { s as i64 };

    let (lo, hi) = r
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scale = u.l2_norm() * w.phi.l2_norm();
    if !(hi - lo > 1e-13 * scale) {
        // flat correlation: minimize d2 over grid shifts directly
        let best = (0..n as i64)
            .map(|s| if s >= n as i64 / 2 { s - n as i64 } else { s })
            .map(|s| ((u - &w.phi.rotated(s as isize)).l2_norm(), s))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.abs().cmp(&b.1.abs())))
            .expect("grid is nonempty");
        return Ok(distance_at(u, w, best.1 as f64 * dx));
    }

    let tie = 1e-14 * hi.abs().max(scale);
    let mut best = 0usize;
    for s in 1..n {
        let better = r[s] > r[best] + tie
            || ((r[s] - r[best]).abs() <= tie && signed(s).abs() < signed(best).abs());
        if better {
            best = s;
        }
    }
    let (rm, r0, rp) = (r[(best + n - 1) % n], r[best], r[(best + 1) % n]);
    let curv = rm - 2.0 * r0 + rp;
    let offset = if curv < 0.0 {
        (0.5 * (rm - rp) / curv).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let mut a = (signed(best) as f64 + offset) * dx;
    for _ in 0..3 {
        let (_, d1, d2) = corr.derivatives(a);
        if !(d2 < 0.0) {
            break;
        }
        let step = d1 / d2;
        if step.abs() > dx {
            break;
        }
        a -= step;
        if step.abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    Ok(distance_at(u, w, wrap(a, l)))
}

#[derive(Clone, Debug)]
pub struct Foliation {
    pub r: f64,
    pub h: Field,
}

/// Decompose `u = φ(· − r) + h(· − r)` with `(h, φ_x) = 0`, by Newton's method
/// on `F(r) = (u(· + r) − φ, φ_x)` started at the orbital shift.
pub fn foliation_decompose(u: &Field, w: &SolitaryWave) -> Result<Foliation> {
    foliation_decompose_within(u, w, DEFAULT_DELTA1_FRACTION * w.phi.l2_norm())
}

pub fn foliation_decompose_within(u: &Field, w: &SolitaryWave, delta1: f64) -> Result<Foliation> {
    let od = orbital_distance(u, w)?;
    if !(od.d2 < delta1) {
        return Err(Error::Foliation(format!(
            "orbital distance {:.3e} is outside the neighbourhood radius {delta1:.3e}",
            od.d2
        )));
    }
    let grid = &w.grid;
    let dx = grid.spacing();
    let n = grid.len() as f64;
    let uh = grid.forward(u.values());
    let px = grid.forward(w.phi_x.values());
    let base = dot(&w.phi, &w.phi_x);
    let px_sq = dot(&w.phi_x, &w.phi_x);
    let ny = grid.nyquist_slot();
    // F(r) and F'(r) from the spectra of u and φ_x
    let eval = |r: f64| -> (f64, f64) {
        let (mut f, mut df) = (0.0, 0.0);
        for (m, (a, b)) in uh.iter().zip(&px).enumerate() {
            let xi = grid.wavenumber(m);
            let z = a * b.conj();
            if m == ny {
                f += z.re * (xi * r).cos();
                df -= z.re * xi * (xi * r).sin();
            } else {
                let e = z * Complex64::from_polar(1.0, xi * r);
                f += e.re;
                df -= xi * e.im;
            }
        }
        (dx * f / n - base, dx * df / n)
    };
    let mut r = od.x0;
    let mut converged = false;
    for _ in 0..50 {
        let (f, df) = eval(r);
        if !(df.abs() > 1e-3 * px_sq) {
            return Err(Error::Foliation(format!("degenerate derivative {df:.3e} at r = {r}")));
        }
        let step = f / df;
        r -= step;
        if !r.is_finite() || (r - od.x0).abs() > 0.5 * grid.half_length() {
            return Err(Error::Foliation("Newton iteration diverged".into()));
        }
        if step.abs() <= 1e-14 * (1.0 + r.abs()) {
            converged = true;
            break;
        }
    }
    let h = &u.shifted(-r) - &w.phi;
    let orth = dot(&h, &w.phi_x).abs();
    if !converged && orth > 1e-10 * px_sq {
        return Err(Error::Foliation(format!("no convergence, |(h, phi_x)| = {orth:.3e}")));
    }
    Ok(Foliation {
        r: wrap(r, grid.half_length()),
        h,
    })
}

/// Right side minus left side of the a priori estimate
/// `‖g‖∞ ≤ ‖g‖^{2/3}(1 + 4k/3 + √2‖g‖^{2/3} + 2‖ψ‖∞ + 2‖ψ'‖∞)` with
/// `ψ = φ(· − x0)` and `g = u − ψ`. Nonnegative when the estimate holds.
pub fn apriori_linfty_check(u: &Field, w: &SolitaryWave, x0: f64, k: f64) -> f64 {
    let psi = w.phi.shifted(x0);
    let g = u - &psi;
    let g23 = g.l2_norm().powf(2.0 / 3.0);
    let bracket =
        1.0 + 4.0 * k / 3.0 + SQRT_2 * g23 + 2.0 * psi.linf_norm() + 2.0 * psi.derivative().linf_norm();
    g23 * bracket - g.linf_norm()
}

/// `γ(c, k) = (1 + 4k/3 + 2‖φ‖∞ + 2‖φ'‖∞)/6`.
pub fn gamma(w: &SolitaryWave) -> f64 {
    (1.0 + 4.0 * w.k() / 3.0 + 2.0 * w.phi.linf_norm() + 2.0 * w.phi_x.linf_norm()) / 6.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertificateRoots {
    pub r1: f64,
    pub r2: f64,
}

fn certificate_f(alpha: f64, beta: f64, gamma: f64, qbar: f64, r: f64) -> f64 {
    qbar - alpha * r * r + gamma * r.powf(8.0 / 3.0) + beta * r.powi(3) + SQRT_2 / 6.0 * r.powf(10.0 / 3.0)
}

/// `f'(r)/r`, increasing in `r`.
fn certificate_slope(alpha: f64, beta: f64, gamma: f64, r: f64) -> f64 {
    -2.0 * alpha
        + 8.0 / 3.0 * gamma * r.powf(2.0 / 3.0)
        + 3.0 * beta * r
        + 10.0 / 3.0 * SQRT_2 / 6.0 * r.powf(4.0 / 3.0)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The two smallest positive roots `r1 < r2` of
/// `f(r) = Q̄ − αr² + γr^{8/3} + βr³ + (√2/6)r^{10/3}`, or `None` when `f`
/// stays positive (`Q̄` too large).
pub fn stability_certificate(alpha: f64, beta: f64, gamma: f64, qbar: f64) -> Result<Option<CertificateRoots>> {
    let all_finite = [alpha, beta, gamma, qbar].iter().all(|v| v.is_finite());
    if !all_finite || !(alpha > 0.0) || beta < 0.0 || gamma < 0.0 || qbar < 0.0 {
        return Err(Error::InvalidCertificate(format!(
            "need alpha > 0 and beta, gamma, Qbar >= 0 (alpha = {alpha}, beta = {beta}, gamma = {gamma}, Qbar = {qbar})"
        )));
    }
    // f decreases up to the unique zero of f'(r)/r and increases after it
    let mut hi = 1.0;
    while certificate_slope(alpha, beta, gamma, hi) <= 0.0 {
        hi *= 2.0;
    }
    let r_min = bisect(0.0, hi, |r| certificate_slope(alpha, beta, gamma, r));
    let f = |r: f64| certificate_f(alpha, beta, gamma, qbar, r);
    if f(r_min) > 0.0 {
        return Ok(None);
    }
    let r1 = if qbar == 0.0 { 0.0 } else { bisect(0.0, r_min, f) };
    let mut top = 2.0 * r_min;
    while f(top) <= 0.0 {
        top *= 2.0;
    }
    let r2 = bisect(r_min, top, f);
    Ok(Some(CertificateRoots { r1, r2 }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub evolve: EvolveConfig,
    pub shape: Shape,
    pub s_matched: bool,
    pub beta: f64,
    /// measured from the wave when absent
    pub alpha: Option<f64>,
    /// worker cap; falls back to `DPLAB_THREADS`, then to all cores
    pub threads: Option<usize>,
    pub delta1: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            evolve: EvolveConfig {
                t_end: 50.0,
                ..EvolveConfig::default()
            },
            shape: Shape::Gaussian,
            s_matched: true,
            beta: 0.0,
            alpha: None,
            threads: None,
            delta1: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub d2: f64,
    pub dinf: f64,
    /// shift, unwrapped to be continuous in time
    pub x0: f64,
    pub s_drift: f64,
    pub h_drift: f64,
    pub min_w: f64,
    pub linfty_slack: f64,
    /// `‖h‖` of the foliation, NaN where the decomposition failed
    pub h_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberReport {
    pub delta: f64,
    pub scale: f64,
    pub min_w0: f64,
    pub qbar: f64,
    pub certificate: Option<CertificateRoots>,
    pub h0_norm: f64,
    pub sup_d2: f64,
    pub sup_dinf: f64,
    pub sup_h_norm: f64,
    pub max_s_drift: f64,
    pub max_h_drift: f64,
    pub min_w: f64,
    pub min_linfty_slack: f64,
    pub foliation_failures: usize,
    /// `‖h0‖ < r1`, so the certificate confines the whole run
    pub starts_inside: bool,
    /// `‖h(t)‖` never lies in `(r1, r2)` at a sample
    pub barrier_ok: bool,
    pub halted: bool,
    pub breaking_suspected: bool,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub c: f64,
    pub k: f64,
    pub n: usize,
    pub half_length: f64,
    pub shape: String,
    pub t_end: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub members: Vec<MemberReport>,
    /// largest `sup_t d2 / δ` over members with `δ > 0`
    pub max_d2_ratio: f64,
    pub linfty_ok: bool,
    pub barrier_ok: bool,
    /// report only: `sup_t d2` nondecreasing in `δ`
    pub monotone_in_delta: bool,
}

/// `α` on the wave's grid, or on a coarser grid of the same length when the
/// wave's grid is too large for a dense eigensolve.
pub fn measured_alpha(w: &SolitaryWave) -> Result<f64> {
    let n = w.grid.len();
    if n <= ALPHA_MAX_POINTS {
        return Ok(constrained_coercivity(&assemble_lc(w), w));
    }
    let coarse = Grid::new(w.grid.half_length(), ALPHA_MAX_POINTS)?;
    let cw = build_profile(&w.params, &coarse, DEFAULT_TOL)?;
    Ok(constrained_coercivity(&assemble_lc(&cw), &cw))
}

fn thread_count(cfg: &SweepConfig) -> Option<usize> {
    cfg.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&n: &usize| n > 0)
    })
}

fn run_member(
    w: &SolitaryWave,
    delta: f64,
    cfg: &SweepConfig,
    alpha: f64,
    gam: f64,
    delta1: f64,
) -> Result<MemberReport> {
    let (c, k) = (w.c(), w.k());
    let pert = Perturbation {
        delta,
        shape: cfg.shape.clone(),
        s_matched: cfg.s_matched,
    };
    let init = make_perturbed_initial(w, &pert)?;
    let qbar = (lagrangian_q(&init.u0, c, k) - lagrangian_q(&w.phi, c, k)).abs();
    let certificate = stability_certificate(alpha, cfg.beta, gam, qbar)?;
    let s0 = functional_s(&init.u0);
    let h0 = functional_h(&init.u0, k);
    let rel = |a: f64, b: f64| if b != 0.0 { (a - b) / b.abs() } else { a - b };
    let period = w.grid.period();

    let mut samples: Vec<Sample> = Vec::new();
    let mut failures = 0usize;
    let mut first_error: Option<Error> = None;
    let state = run_observed(init.u0.clone(), k, &cfg.evolve, |st| {
        if first_error.is_some() {
            return;
        }
        let rec = st.history.last().expect("observer runs after a record");
        let od = match orbital_distance(&st.u, w) {
            Ok(od) => od,
            Err(e) => {
                first_error = Some(e);
                return;
            }
        };
        let x0 = match samples.last() {
            Some(prev) => od.x0 + period * ((prev.x0 - od.x0) / period).round(),
            None => od.x0,
        };
        let h_norm = match foliation_decompose_within(&st.u, w, delta1) {
            Ok(f) => f.h.l2_norm(),
            Err(_) => {
                failures += 1;
                f64::NAN
            }
        };
        samples.push(Sample {
            t: st.t,
            d2: od.d2,
            dinf: od.dinf,
            x0,
            s_drift: rel(rec.s, s0),
            h_drift: rel(rec.h, h0),
            min_w: rec.min_w,
            linfty_slack: apriori_linfty_check(&st.u, w, od.x0, k),
            h_norm,
        });
    })?;
    if let Some(e) = first_error {
        return Err(e);
    }

    let fold_max = |f: fn(&Sample) -> f64| samples.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let fold_min = |f: fn(&Sample) -> f64| samples.iter().map(f).fold(f64::INFINITY, f64::min);
    let h0_norm = samples.first().map_or(f64::NAN, |s| s.h_norm);
    let (starts_inside, barrier_ok) = match certificate {
        Some(CertificateRoots { r1, r2 }) => {
            let inside = h0_norm < r1;
            let ok = samples.iter().all(|s| {
                let r = if s.h_norm.is_nan() { s.d2 } else { s.h_norm };
                !(r > r1 && r < r2) && (!inside || r <= r1)
            });
            (inside, ok)
        }
        None => (false, true),
    };
    Ok(MemberReport {
        delta,
        scale: init.scale,
        min_w0: init.min_w0,
        qbar,
        certificate,
        h0_norm,
        sup_d2: fold_max(|s| s.d2),
        sup_dinf: fold_max(|s| s.dinf),
        sup_h_norm: samples.iter().map(|s| s.h_norm).filter(|v| !v.is_nan()).fold(0.0, f64::max),
        max_s_drift: fold_max(|s| s.s_drift.abs()),
        max_h_drift: fold_max(|s| s.h_drift.abs()),
        min_w: fold_min(|s| s.min_w),
        min_linfty_slack: fold_min(|s| s.linfty_slack),
        foliation_failures: failures,
        starts_inside,
        barrier_ok,
        halted: state.flags.halted,
        breaking_suspected: state.flags.breaking_suspected,
        samples,
    })
}

/// Evolve `φ` perturbed by each `δ` (in parallel), sampling orbital distance,
/// foliation, conservation drift and the a priori estimate.
pub fn stability_sweep(w: &SolitaryWave, deltas: &[f64], t_end: f64, cfg: &SweepConfig) -> Result<StabilityReport> {
    let mut cfg = cfg.clone();
    cfg.evolve.t_end = t_end;
    cfg.evolve.validate()?;
    if !(cfg.beta >= 0.0) {
        return Err(Error::InvalidCertificate(format!("beta must be >= 0, got {}", cfg.beta)));
    }
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => measured_alpha(w)?,
    };
    let gam = gamma(w);
    let delta1 = cfg.delta1.unwrap_or(DEFAULT_DELTA1_FRACTION * w.phi.l2_norm());

    let work = || -> Result<Vec<MemberReport>> {
        deltas
            .par_iter()
            .map(|&d| run_member(w, d, &cfg, alpha, gam, delta1))
            .collect()
    };
    let members = match thread_count(&cfg) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let max_d2_ratio = members
        .iter()
        .filter(|m| m.delta > 0.0)
        .map(|m| m.sup_d2 / m.delta)
        .fold(0.0, f64::max);
    let mut order: Vec<&MemberReport> = members.iter().collect();
    order.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let monotone_in_delta = order.windows(2).all(|p| p[1].sup_d2 >= p[0].sup_d2);
    Ok(StabilityReport {
        c: w.c(),
        k: w.k(),
        n: w.grid.len(),
        half_length: w.grid.half_length(),
        shape: cfg.shape.to_string(),
        t_end,
        alpha,
        beta: cfg.beta,
        gamma: gam,
        linfty_ok: members.iter().all(|m| m.min_linfty_slack >= 0.0),
        barrier_ok: members.iter().all(|m| m.barrier_ok),
        max_d2_ratio,
        monotone_in_delta,
        members,
    })
}
