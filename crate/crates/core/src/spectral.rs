//! Periodic pseudospectral substrate.
//!
//! The real line is truncated to the periodic box `[-L, L)` sampled at `N`
//! uniform points. Transforms use the unnormalized forward DFT
//! `f̂_m = Σ_j f_j e^{-2πi jm/N}` and an inverse carrying the `1/N`. All
//! integrals are rectangle-rule sums `Δx Σ_j`, so the Fourier-side energy of
//! a field is `(Δx/N) Σ_m |f̂_m|²` (see [`fourier_energy`]). Every functional
//! in this module is expressed through [`inner_l2`], which keeps the
//! transform convention internal.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative size of the imaginary part tolerated when returning to real space.
pub const IMAG_RESIDUE_TOL: f64 = 1e-12;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[-L, L)`.
///
/// Cloning is cheap: FFT plans are shared behind an `Arc` and are immutable.
#[derive(Clone)]
pub struct Grid {
    half_length: f64,
    n: usize,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length.to_bits() == other.half_length.to_bits()
    }
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        if n < Self::MIN_POINTS || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "point count must be even and >= {}, got {n}",
                Self::MIN_POINTS
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        Ok(Self {
            half_length,
            n,
            plans: Arc::new(plans),
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn period(&self) -> f64 {
        2.0 * self.half_length
    }

    /// `x_j = -L + jΔx`, computed as `(j - N/2)Δx` so that `x_{N/2} = 0` and
    /// `x_{N/2+i} = -x_{N/2-i}` hold bit for bit.
    pub fn point(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Index of the sample sitting at `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// Signed mode number `n ∈ [-N/2, N/2)` stored at FFT slot `m`.
    pub fn mode_number(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// Wavenumber `ξ = πn/L` stored at FFT slot `m`.
    pub fn wavenumber(&self, m: usize) -> f64 {
        PI * self.mode_number(m) as f64 / self.half_length
    }

    /// Wavenumbers in ascending order `πn/L, n = -N/2..N/2-1`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let half = (self.n / 2) as i64;
        (-half..half)
            .map(|n| PI * n as f64 / self.half_length)
            .collect()
    }

    pub fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plans.forward.process(&mut buf);
        buf
    }

    /// Inverse transform keeping the real part. Also returns the largest
    /// discarded imaginary part (on the same scale as the samples).
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> (Vec<f64>, f64) {
        debug_assert_eq!(spectrum.len(), self.n);
        self.plans.inverse.process(&mut spectrum);
        let scale = 1.0 / self.n as f64;
        let mut max_im = 0.0f64;
        let values = spectrum
            .iter()
            .map(|z| {
                max_im = max_im.max(z.im.abs());
                z.re * scale
            })
            .collect();
        (values, max_im * scale)
    }

    /// Inverse transform of a Hermitian spectrum.
    pub fn inverse(&self, spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse_real(spectrum).0
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real samples on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_vec_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        Self::from_vec_unchecked(grid, values)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self::from_vec_unchecked(grid, vec![value; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self.zip_map_unchecked(other, f))
    }

    pub(crate) fn zip_map_unchecked(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_vec_unchecked(&self.grid, values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index and value of the smallest sample.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, v)| if v < acc.1 { (j, v) } else { acc })
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        dot(self, self).sqrt()
    }

    /// `x ↦ f(-x)` on the grid (slot `j` ↔ slot `N - j`).
    pub fn reflect(&self) -> Self {
        let n = self.len();
        let values = (0..n).map(|j| self.values[(n - j) % n]).collect();
        Self::from_vec_unchecked(&self.grid, values)
    }

    /// Band-limited translate `x ↦ f(x - a)`.
    pub fn shifted(&self, a: f64) -> Self {
        let grid = &self.grid;
        let mut spec = grid.forward(&self.values);
        let ny = grid.nyquist_slot();
        for (m, z) in spec.iter_mut().enumerate() {
            let xi = grid.wavenumber(m);
            if m == ny {
                // cos keeps the Nyquist coefficient real
                *z *= (xi * a).cos();
            } else {
                *z *= Complex64::from_polar(1.0, -xi * a);
            }
        }
        Self::from_vec_unchecked(grid, grid.inverse(spec))
    }

    /// Circular shift by whole grid cells: `result_j = f_{j - cells}`.
    pub fn rotated(&self, cells: isize) -> Self {
        let n = self.len() as isize;
        let values = (0..n)
            .map(|j| self.values[(j - cells).rem_euclid(n) as usize])
            .collect();
        Self::from_vec_unchecked(&self.grid, values)
    }

    pub fn derivative(&self) -> Self {
        apply_symbol(self, SymbolId::Derivative)
    }

    pub fn second_derivative(&self) -> Self {
        apply_multiplier(self, |xi| Complex64::new(-xi * xi, 0.0), false)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        self.zip_map_unchecked(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        self.zip_map_unchecked(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|v| v * rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|v| -v)
    }
}

/// Fourier multipliers used by the operators of the equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymbolId {
    /// `∂x`: `iξ`
    Derivative,
    /// `(1 - ∂x²)⁻¹`: `1/(1+ξ²)`, i.e. convolution with `½e^{-|x|}`
    Helmholtz1Inv,
    /// `(4 - ∂x²)⁻¹`: `1/(4+ξ²)`
    Helmholtz4Inv,
    /// `(4 - ∂x²)^{-1/2}`: `1/√(4+ξ²)`
    SqrtHelmholtz4Inv,
    /// `J = ∂x(4 - ∂x²)(1 - ∂x²)⁻¹`: `iξ(4+ξ²)/(1+ξ²)`
    SkewJ,
    /// `(1 - ∂x²)(4 - ∂x²)⁻¹`: `(1+ξ²)/(4+ξ²)`
    SWeight,
}

impl SymbolId {
    pub const ALL: [SymbolId; 6] = [
        SymbolId::Derivative,
        SymbolId::Helmholtz1Inv,
        SymbolId::Helmholtz4Inv,
        SymbolId::SqrtHelmholtz4Inv,
        SymbolId::SkewJ,
        SymbolId::SWeight,
    ];

    pub fn value(self, xi: f64) -> Complex64 {
        let x2 = xi * xi;
        match self {
            SymbolId::Derivative => Complex64::new(0.0, xi),
            SymbolId::Helmholtz1Inv => Complex64::new(1.0 / (1.0 + x2), 0.0),
            SymbolId::Helmholtz4Inv => Complex64::new(1.0 / (4.0 + x2), 0.0),
            SymbolId::SqrtHelmholtz4Inv => Complex64::new(1.0 / (4.0 + x2).sqrt(), 0.0),
            SymbolId::SkewJ => Complex64::new(0.0, xi * (4.0 + x2) / (1.0 + x2)),
            SymbolId::SWeight => Complex64::new((1.0 + x2) / (4.0 + x2), 0.0),
        }
    }

    /// Odd (imaginary) symbols have no real partner at the Nyquist slot.
    pub fn is_odd(self) -> bool {
        matches!(self, SymbolId::Derivative | SymbolId::SkewJ)
    }

    pub fn name(self) -> &'static str {
        match self {
            SymbolId::Derivative => "derivative",
            SymbolId::Helmholtz1Inv => "helmholtz1_inv",
            SymbolId::Helmholtz4Inv => "helmholtz4_inv",
            SymbolId::SqrtHelmholtz4Inv => "sqrt_helmholtz4_inv",
            SymbolId::SkewJ => "skew_J",
            SymbolId::SWeight => "s_weight",
        }
    }
}

/// Multiply the spectrum of `f` by `symbol(ξ)`. Odd symbols are zeroed at
/// the Nyquist slot so the output stays real.
pub fn apply_multiplier(f: &Field, symbol: impl Fn(f64) -> Complex64, odd: bool) -> Field {
    let (out, residue) = apply_multiplier_with_residue(f, symbol, odd);
    debug_assert!(residue < 1e-9, "imaginary residue {residue:e}");
    out
}

pub(crate) fn apply_multiplier_with_residue(
    f: &Field,
    symbol: impl Fn(f64) -> Complex64,
    odd: bool,
) -> (Field, f64) {
    let grid = f.grid();
    let mut spec = grid.forward(f.values());
    let input_scale: f64 = spec.iter().map(|z| z.norm()).sum::<f64>() / grid.len() as f64;
    multiply_spectrum(grid, &mut spec, symbol, odd);
    let (values, imag) = grid.inverse_real(spec);
    let residue = if input_scale > 0.0 { imag / input_scale } else { 0.0 };
    (Field::from_vec_unchecked(grid, values), residue)
}

pub(crate) fn multiply_spectrum(
    grid: &Grid,
    spec: &mut [Complex64],
    symbol: impl Fn(f64) -> Complex64,
    odd: bool,
) {
    let ny = grid.nyquist_slot();
    for (m, z) in spec.iter_mut().enumerate() {
        if odd && m == ny {
            *z = Complex64::new(0.0, 0.0);
        } else {
            *z *= symbol(grid.wavenumber(m));
        }
    }
}

pub fn apply_symbol(f: &Field, s: SymbolId) -> Field {
    apply_multiplier(f, |xi| s.value(xi), s.is_odd())
}

/// Same as [`apply_symbol`] but also reports the relative imaginary residue
/// discarded on the way back to real space, relative to `Σ|f̂|/N`.
pub fn apply_symbol_checked(f: &Field, s: SymbolId) -> (Field, f64) {
    apply_multiplier_with_residue(f, |xi| s.value(xi), s.is_odd())
}

pub(crate) fn dot(f: &Field, g: &Field) -> f64 {
    let sum: f64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    f.grid.spacing() * sum
}

/// `∫ f g dx` by the rectangle rule.
pub fn inner_l2(f: &Field, g: &Field) -> Result<f64> {
    f.grid.check_same(&g.grid)?;
    Ok(dot(f, g))
}

/// `(Δx/N) Σ |f̂_m|²`; equals `inner_l2(f, f)` by Parseval.
pub fn fourier_energy(f: &Field) -> f64 {
    let grid = f.grid();
    let spec = grid.forward(f.values());
    let sum: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    grid.spacing() * sum / grid.len() as f64
}

/// Fourier Sobolev norm `(Σ (1+ξ²)^s |f̂|²)^{1/2}` normalized so that `s = 0`
/// gives the L² norm.
pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    let grid = f.grid();
    let spec = grid.forward(f.values());
    let sum: f64 = spec
        .iter()
        .enumerate()
        .map(|(m, z)| {
            let xi = grid.wavenumber(m);
            (1.0 + xi * xi).powf(s) * z.norm_sqr()
        })
        .sum();
    (grid.spacing() * sum / grid.len() as f64).sqrt()
}

/// `S(u) = ½ ∫ u (1-∂x²)(4-∂x²)⁻¹ u dx`.
pub fn functional_s(f: &Field) -> f64 {
    0.5 * dot(f, &apply_symbol(f, SymbolId::SWeight))
}

/// `H(u) = -(1/6) ∫ (u³ + 6k ((4-∂x²)^{-1/2} u)²) dx`.
pub fn functional_h(f: &Field, k: f64) -> f64 {
    let sq = f.map(|v| v * v);
    let g = apply_symbol(f, SymbolId::SqrtHelmholtz4Inv);
    -(dot(&sq, f) + 6.0 * k * dot(&g, &g)) / 6.0
}

/// `Q(u; c) = H(u) + c S(u)`.
pub fn lagrangian_q(f: &Field, c: f64, k: f64) -> f64 {
    functional_h(f, k) + c * functional_s(f)
}

/// Whether signed mode `n` survives the 2/3 rule on an `N`-point grid.
pub fn kept_by_dealias(n: i64, points: usize) -> bool {
    3 * n.unsigned_abs() as usize <= points
}

pub(crate) fn dealias_spectrum(grid: &Grid, spec: &mut [Complex64]) {
    let n = grid.len();
    for (m, z) in spec.iter_mut().enumerate() {
        if !kept_by_dealias(grid.mode_number(m), n) {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}

/// Seeded random real field with Fourier modes `|n| ≤ max_mode` and
/// coefficients uniform in `[−1, 1]`.
pub fn random_band_limited(grid: &Grid, max_mode: usize, seed: u64) -> Field {
    use rand::{Rng, SeedableRng};
    let n = grid.len();
    let top = max_mode.min(n / 2 - 1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    spec[0] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
    for m in 1..=top {
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        // unit coefficient ↔ unit-amplitude cosine
        spec[m] = z * (0.5 * n as f64);
        spec[n - m] = spec[m].conj();
    }
    spec[0] *= n as f64;
    Field::from_vec_unchecked(grid, grid.inverse(spec))
}

/// Zero every mode with `|n| > N/3`.
pub fn dealias_23(f: &Field) -> Field {
    let grid = f.grid();
    let mut spec = grid.forward(f.values());
    dealias_spectrum(grid, &mut spec);
    Field::from_vec_unchecked(grid, grid.inverse(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pi_grid(n: usize) -> Grid {
        Grid::new(PI, n).unwrap()
    }

    /// Band-limited random field with modes up to `max_mode`.
    fn random_field(grid: &Grid, max_mode: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = grid.half_length();
        let coeffs: Vec<(f64, f64)> = (0..=max_mode)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Field::from_fn(grid, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(n, (a, b))| {
                    let arg = PI * n as f64 * x / l;
                    a * arg.cos() + if n > 0 { b * arg.sin() } else { 0.0 }
                })
                .sum()
        })
    }

    #[test]
    fn grid_spacing_and_wavenumbers() {
        let g = Grid::new(64.0, 1024).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert_eq!(g.point(0), -64.0);
        assert_eq!(g.point(512), 0.0);

        let g = pi_grid(16);
        let ks = g.wavenumbers();
        for (i, n) in (-8..8).enumerate() {
            assert_relative_eq!(ks[i], n as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(64.0, 1000).is_ok());
        assert!(matches!(Grid::new(64.0, 1001), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(64.0, 14), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(0.0, 64), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(-1.0, 64), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn field_rejects_nan() {
        let g = pi_grid(16);
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert_eq!(Field::new(&g, v), Err(Error::NonFinite { index: 3 }));
    }

    #[test]
    fn constant_through_helmholtz4() {
        let g = pi_grid(32);
        let out = apply_symbol(&Field::constant(&g, 1.0), SymbolId::Helmholtz4Inv);
        for v in out.values() {
            assert_relative_eq!(*v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn cosine_through_helmholtz1() {
        let g = pi_grid(32);
        let f = Field::from_fn(&g, f64::cos);
        let out = apply_symbol(&f, SymbolId::Helmholtz1Inv);
        for (x, v) in g.points().iter().zip(out.values()) {
            assert_relative_eq!(*v, x.cos() / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn helmholtz1_matches_exponential_kernel_quadrature() {
        // p * f with p(x) = ½e^{-|x|}, evaluated by a fine trapezoid sum on
        // the line; the Gaussian is negligible at the box edge.
        let g = Grid::new(20.0, 512).unwrap();
        let gauss = |x: f64| (-x * x).exp();
        let spectral = apply_symbol(&Field::from_fn(&g, gauss), SymbolId::Helmholtz1Inv);
        let h = 1e-3;
        let quad = |x: f64| -> f64 {
            // split at y = x where the kernel has a kink
            let trap = |a: f64, b: f64| {
                let n = ((b - a) / h).ceil() as usize;
                let dy = (b - a) / n as f64;
                let f = |y: f64| 0.5 * (-(x - y).abs()).exp() * gauss(y);
                let mut s = 0.5 * (f(a) + f(b));
                for i in 1..n {
                    s += f(a + i as f64 * dy);
                }
                s * dy
            };
            trap(-12.0, x) + trap(x, 12.0)
        };
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for j in (0..g.len()).step_by(8) {
            let x = g.point(j);
            if x.abs() > 10.0 {
                continue;
            }
            let q = quad(x);
            worst = worst.max((q - spectral.values()[j]).abs());
            scale = scale.max(q.abs());
        }
        assert!(worst / scale < 1e-6, "relative error {}", worst / scale);
    }

    #[test]
    fn inner_products_of_trig_modes() {
        let g = pi_grid(64);
        let c = Field::from_fn(&g, f64::cos);
        let s = Field::from_fn(&g, f64::sin);
        assert!(inner_l2(&c, &s).unwrap().abs() < 1e-14);
        assert_relative_eq!(inner_l2(&c, &c).unwrap(), PI, epsilon = 1e-13);
    }

    #[test]
    fn inner_product_grid_mismatch() {
        let a = Field::zeros(&pi_grid(16));
        let b = Field::zeros(&pi_grid(32));
        assert_eq!(inner_l2(&a, &b), Err(Error::GridMismatch));
    }

    #[test]
    fn parseval_on_random_fields() {
        let g = Grid::new(10.0, 256).unwrap();
        for seed in 0..20 {
            let f = random_field(&g, 40, seed);
            let direct = inner_l2(&f, &f).unwrap();
            assert_relative_eq!(direct, fourier_energy(&f), max_relative = 1e-12);
        }
    }

    #[test]
    fn functionals_on_cosine() {
        let g = pi_grid(64);
        let f = Field::from_fn(&g, f64::cos);
        assert_relative_eq!(functional_s(&f), PI / 5.0, epsilon = 1e-13);
        // cubic term vanishes, quadratic gives -(1/6)·6·(π/5)
        assert_relative_eq!(functional_h(&f, 1.0), -PI / 5.0, epsilon = 1e-13);
        assert_eq!(functional_s(&Field::zeros(&g)), 0.0);
        assert_eq!(functional_h(&Field::zeros(&g), 1.0), 0.0);
        assert_eq!(lagrangian_q(&Field::zeros(&g), 3.0, 1.0), 0.0);
        assert_eq!(lagrangian_q(&f, 0.0, 1.0), functional_h(&f, 1.0));
    }

    #[test]
    fn functional_h_matches_direct_quadrature() {
        // Oracle: cubic integral by a 16x oversampled rectangle rule on the
        // analytic series, quadratic integral from the closed-form sine/cosine
        // coefficients times 1/(4+ξ²).
        let l = 8.0;
        let g = Grid::new(l, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let modes: Vec<(f64, f64)> = (0..=12)
            .map(|_| (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .collect();
        let eval = |x: f64| -> f64 {
            modes
                .iter()
                .enumerate()
                .map(|(n, (a, b))| {
                    let arg = PI * n as f64 * x / l;
                    a * arg.cos() + if n > 0 { b * arg.sin() } else { 0.0 }
                })
                .sum()
        };
        let f = Field::from_fn(&g, eval);
        let fine = 128 * 16;
        let dx = 2.0 * l / fine as f64;
        let cubic: f64 = (0..fine)
            .map(|j| eval(-l + j as f64 * dx).powi(3))
            .sum::<f64>()
            * dx;
        let quadratic: f64 = modes
            .iter()
            .enumerate()
            .map(|(n, (a, b))| {
                let xi = PI * n as f64 / l;
                let weight = if n == 0 { 2.0 * l } else { l };
                weight * (a * a + if n > 0 { b * b } else { 0.0 }) / (4.0 + xi * xi)
            })
            .sum();
        let oracle = -(cubic + 6.0 * quadratic) / 6.0;
        assert_relative_eq!(functional_h(&f, 1.0), oracle, max_relative = 1e-8);
    }

    #[test]
    fn random_fields_are_band_limited_and_reproducible() {
        let g = Grid::new(10.0, 128).unwrap();
        let f = random_band_limited(&g, 9, 42);
        assert_eq!(f, random_band_limited(&g, 9, 42));
        assert_ne!(f, random_band_limited(&g, 9, 43));
        let spec = g.forward(f.values());
        for (m, z) in spec.iter().enumerate() {
            if g.mode_number(m).abs() > 9 {
                assert!(z.norm() < 1e-10, "mode {}", g.mode_number(m));
            }
        }
        assert!(spec[9].norm() > 0.0);
        // every coefficient is bounded by one in amplitude
        assert!(f.linf_norm() <= 1.0 + 2.0 * 9.0 * 2f64.sqrt());
        let wide = random_band_limited(&g, 1000, 1);
        assert!(g.forward(wide.values())[g.nyquist_slot()].norm() < 1e-10);
    }

    #[test]
    fn dealias_behaviour() {
        let g = pi_grid(48);
        let f = random_field(&g, 23, 3);
        let once = dealias_23(&f);
        let twice = dealias_23(&once);
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let band = random_field(&g, 16, 4);
        let kept = dealias_23(&band);
        for (a, b) in band.values().iter().zip(kept.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let top = Field::from_fn(&g, |x| (23.0 * x).cos());
        assert!(dealias_23(&top).linf_norm() < 1e-14);
    }

    #[test]
    fn operator_identities() {
        let g = Grid::new(12.0, 256).unwrap();
        for seed in 0..5 {
            let f = random_field(&g, 60, seed);
            // (4-∂²)(1-∂²)⁻¹ = 1 + 3(1-∂²)⁻¹, checked through J = ∂x(...)
            let j = apply_symbol(&f, SymbolId::SkewJ);
            let h1 = apply_symbol(&f, SymbolId::Helmholtz1Inv);
            let rhs = (&f + &(&h1 * 3.0)).derivative();
            let scale = j.linf_norm();
            assert!((&j - &rhs).linf_norm() <= 1e-12 * scale);

            let twice = apply_symbol(
                &apply_symbol(&f, SymbolId::SqrtHelmholtz4Inv),
                SymbolId::SqrtHelmholtz4Inv,
            );
            let h4 = apply_symbol(&f, SymbolId::Helmholtz4Inv);
            assert!((&twice - &h4).linf_norm() <= 1e-12 * h4.linf_norm());

            for s in SymbolId::ALL {
                let (_, residue) = apply_symbol_checked(&f, s);
                assert!(residue < IMAG_RESIDUE_TOL, "{} residue {residue:e}", s.name());
            }
        }
    }

    #[test]
    fn shifts_and_reflection() {
        let g = Grid::new(10.0, 128).unwrap();
        let f = Field::from_fn(&g, |x| (-(x - 1.0) * (x - 1.0)).exp());
        let moved = f.shifted(2.0 * g.spacing());
        let rotated = f.rotated(2);
        assert!((&moved - &rotated).linf_norm() < 1e-12);
        let r = f.reflect();
        let expect = Field::from_fn(&g, |x| (-(x + 1.0) * (x + 1.0)).exp());
        assert!((&r - &expect).linf_norm() < 1e-14);
        let back = f.shifted(0.37).shifted(-0.37);
        assert!((&back - &f).linf_norm() < 1e-13);
    }

    #[test]
    fn sobolev_norm_of_mode() {
        let g = pi_grid(32);
        let f = Field::from_fn(&g, |x| (2.0 * x).sin());
        assert_relative_eq!(sobolev_norm(&f, 0.0), f.l2_norm(), epsilon = 1e-13);
        assert_relative_eq!(sobolev_norm(&f, 3.0), 125f64.sqrt() * PI.sqrt(), epsilon = 1e-12);
    }

    mod props {
        use super::{fourier_energy, functional_s, inner_l2, random_field, Field, Grid};
        use proptest::prelude::*;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn s_is_equivalent_to_squared_l2(seed in any::<u64>(), modes in 1usize..60) {
                let g = Grid::new(16.0, 128).unwrap();
                let f = random_field(&g, modes, seed);
                let l2 = inner_l2(&f, &f).unwrap();
                let s = functional_s(&f);
                prop_assert!(l2 / 8.0 <= s * (1.0 + 1e-14));
                prop_assert!(s <= l2 / 2.0 * (1.0 + 1e-14));
            }

            #[test]
            fn parseval_holds(seed in any::<u64>()) {
                let g = Grid::new(5.0, 64).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = Field::new(&g, (0..64).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).unwrap();
                let a = inner_l2(&f, &f).unwrap();
                prop_assert!((a - fourier_energy(&f)).abs() <= 1e-12 * a);
            }
        }
    }
}
