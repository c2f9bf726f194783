//! The linearized operator `L_c = c − φ − (3c+2k)(4 − ∂x²)⁻¹` about a
//! solitary wave: dense assembly, spectrum classification, constrained
//! coercivity, the resolvent function `g(λ) = ((L_c − λ)⁻¹ψ̃, ψ̃)` and the
//! convexity quantity `dS(φ^c)/dc`.
//!
//! Grid samples are the coordinates. Because the quadrature weight is the
//! constant `Δx`, the matrix of `L_c` acting on samples is symmetric and its
//! eigenvalues are those of the discretized operator; the continuum quadratic
//! form is `(L_c f, f) = Δx fᵀ A f` (see [`OperatorMatrix::quadratic_form`]).

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::{build_profile, SolitaryWave, WaveParams, DEFAULT_TOL};
use crate::spectral::{apply_symbol, dot, functional_s, lagrangian_q, Field, Grid, SymbolId};

/// Default classification thresholds for `c − 2k = 1`; [`Thresholds::scaled`]
/// rescales them in proportion to `c − 2k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    /// eigenvalues below `−negative` count as negative
    pub negative: f64,
    /// eigenvalues in `(−zero, zero)` count as the kernel
    pub zero: f64,
    /// every remaining eigenvalue must be at least this
    pub positive_min: f64,
    /// minimum |cosine| between the kernel vector and `φ_x`
    pub zero_cosine: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            negative: 1e-4,
            zero: 1e-4,
            positive_min: 1e-3,
            zero_cosine: 0.999,
        }
    }
}

impl Thresholds {
    pub fn scaled(p: &WaveParams) -> Self {
        let s = p.c() - 2.0 * p.k();
        let d = Self::default();
        Self {
            negative: d.negative * s,
            zero: d.zero * s,
            positive_min: d.positive_min * s,
            zero_cosine: d.zero_cosine,
        }
    }
}

/// Eigenvalues (ascending) and matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

#[derive(Debug)]
pub struct OperatorMatrix {
    matrix: DMatrix<f64>,
    grid: Grid,
    c: f64,
    k: f64,
    eigen: OnceLock<Eigensystem>,
}

impl OperatorMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn apply(&self, f: &Field) -> Field {
        let v = DVector::from_column_slice(f.values());
        let out = &self.matrix * v;
        Field::from_vec_unchecked(&self.grid, out.as_slice().to_vec())
    }

    /// `(L_c f, f)` including the quadrature weight.
    pub fn quadratic_form(&self, f: &Field) -> f64 {
        dot(&self.apply(f), f)
    }

    pub fn symmetry_defect(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst
    }

    /// Full symmetric eigendecomposition, computed once.
    pub fn eigensystem(&self) -> &Eigensystem {
        self.eigen.get_or_init(|| {
            let eig = SymmetricEigen::new(self.matrix.clone());
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = DMatrix::from_fn(self.len(), self.len(), |r, c| {
                eig.eigenvectors[(r, order[c])]
            });
            Eigensystem { values, vectors }
        })
    }

    fn column_field(&self, col: usize) -> Field {
        let v = self.eigensystem().vectors.column(col);
        Field::from_vec_unchecked(&self.grid, v.iter().copied().collect())
    }
}

/// `L_c h` through Fourier symbols, without a dense matrix.
pub fn apply_lc(w: &SolitaryWave, h: &Field) -> Field {
    let (c, k) = (w.c(), w.k());
    let smooth = apply_symbol(h, SymbolId::Helmholtz4Inv);
    let local = h.zip_map_unchecked(&w.phi, |v, p| (c - p) * v);
    local.zip_map_unchecked(&smooth, |a, b| a - (3.0 * c + 2.0 * k) * b)
}

/// Dense matrix of `L_c` on the wave's grid.
pub fn assemble_lc(w: &SolitaryWave) -> OperatorMatrix {
    let grid = &w.grid;
    let n = grid.len();
    let (c, k) = (w.c(), w.k());
    let mut delta = vec![0.0; n];
    delta[0] = 1.0;
    let column = apply_symbol(&Field::from_vec_unchecked(grid, delta), SymbolId::Helmholtz4Inv);
    let raw = column.values();
    // the circulant kernel is even; average the roundoff away so A = Aᵀ exactly
    let kernel: Vec<f64> = (0..n).map(|m| 0.5 * (raw[m] + raw[(n - m) % n])).collect();
    let weight = 3.0 * c + 2.0 * k;
    let phi = w.phi.values();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        let conv = -weight * kernel[(i + n - j) % n];
        if i == j {
            conv + c - phi[i]
        } else {
            conv
        }
    });
    OperatorMatrix {
        matrix,
        grid: grid.clone(),
        c,
        k,
        eigen: OnceLock::new(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub c: f64,
    pub k: f64,
    pub n: usize,
    pub half_length: f64,
    /// all eigenvalues, ascending
    #[serde(skip)]
    pub eigenvalues: Vec<f64>,
    pub lambda_star: f64,
    /// unit-L² ground state, sign chosen positive at the peak
    #[serde(skip)]
    pub ground_vector: Field,
    pub zero_eigenvalue: f64,
    pub zero_vector_correlation: f64,
    pub positive_gap: f64,
    /// `(c − 2k)/4`, from the constant-coefficient symbol
    pub essential_edge_estimate: f64,
    /// lower end of the densely packed part of the spectrum: the smallest
    /// eigenvalue `λ` above the kernel with at least [`CLUSTER_SIZE`]
    /// eigenvalues in `[λ, λ + CLUSTER_WIDTH·(c−2k)]`
    pub continuum_edge: f64,
    pub negative_count: usize,
    pub zero_count: usize,
    pub thresholds: Thresholds,
    pub classified: bool,
    pub issues: Vec<String>,
}

pub const CLUSTER_SIZE: usize = 5;
pub const CLUSTER_WIDTH: f64 = 0.05;

/// Classify the spectrum with thresholds scaled to `c − 2k`.
pub fn spectrum_report(a: &OperatorMatrix, w: &SolitaryWave) -> SpectrumReport {
    spectrum_report_with(a, w, Thresholds::scaled(&w.params))
}

pub fn spectrum_report_with(a: &OperatorMatrix, w: &SolitaryWave, th: Thresholds) -> SpectrumReport {
    let eig = a.eigensystem();
    let vals = &eig.values;
    let mut issues = Vec::new();

    let negative_count = vals.iter().filter(|&&v| v < -th.negative).count();
    let zero_idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() < th.zero).collect();
    if negative_count != 1 {
        issues.push(format!("expected one negative eigenvalue, found {negative_count}"));
    }
    if zero_idx.len() != 1 {
        issues.push(format!("expected one near-zero eigenvalue, found {}", zero_idx.len()));
    }

    let mut ground = a.column_field(0);
    let norm = ground.l2_norm();
    let o = w.grid.origin_index();
    let sign = if ground.values()[o] < 0.0 { -1.0 } else { 1.0 };
    ground = ground.map(|v| sign * v / norm);

    // kernel candidate: the eigenvalue nearest zero
    let zero_col = (0..vals.len())
        .min_by(|&i, &j| vals[i].abs().total_cmp(&vals[j].abs()))
        .unwrap_or(0);
    let zero_vec = a.column_field(zero_col);
    let corr = dot(&zero_vec, &w.phi_x) / (zero_vec.l2_norm() * w.phi_x.l2_norm());
    if corr.abs() < th.zero_cosine {
        issues.push(format!("kernel vector cosine with phi_x is {corr:.6}"));
    }

    let rest: Vec<f64> = (0..vals.len())
        .filter(|&i| i != 0 && i != zero_col)
        .map(|i| vals[i])
        .collect();
    let positive_gap = rest.first().copied().unwrap_or(f64::NAN);
    if !(positive_gap >= th.positive_min) {
        issues.push(format!(
            "smallest remaining eigenvalue {positive_gap:e} below {:e}",
            th.positive_min
        ));
    }

    let width = CLUSTER_WIDTH * (w.c() - 2.0 * w.k());
    let continuum_edge = rest
        .iter()
        .enumerate()
        .find(|&(i, &v)| rest[i..].iter().take_while(|&&u| u <= v + width).count() >= CLUSTER_SIZE)
        .map(|(_, &v)| v)
        .unwrap_or(f64::NAN);

    SpectrumReport {
        c: w.c(),
        k: w.k(),
        n: w.grid.len(),
        half_length: w.grid.half_length(),
        eigenvalues: vals.clone(),
        lambda_star: vals[0],
        ground_vector: ground,
        zero_eigenvalue: vals[zero_col],
        zero_vector_correlation: corr.abs(),
        positive_gap,
        essential_edge_estimate: w.params.essential_edge(),
        continuum_edge,
        negative_count,
        zero_count: zero_idx.len(),
        thresholds: th,
        classified: issues.is_empty(),
        issues,
    }
}

/// Shifted inverse iteration on the dense matrix (LU factorization), returning
/// the Rayleigh quotient and the unit iterate. Independent of the symmetric
/// eigensolver.
pub fn inverse_iteration(a: &OperatorMatrix, shift: f64, start: &Field, iterations: usize) -> (f64, Field) {
    let n = a.len();
    let shifted = &a.matrix - DMatrix::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = DVector::from_column_slice(start.values());
    v /= v.norm();
    for _ in 0..iterations {
        match lu.solve(&v) {
            Some(next) => {
                let nn = next.norm();
                if !(nn.is_finite() && nn > 0.0) {
                    break;
                }
                v = next / nn;
            }
            None => break,
        }
    }
    let rq = v.dot(&(&a.matrix * &v));
    (rq, Field::from_vec_unchecked(&a.grid, v.as_slice().to_vec()))
}

/// Apply the reflector `I − 2vvᵀ/(vᵀv)` to both sides of a symmetric matrix.
fn reflect_symmetric(m: &mut DMatrix<f64>, v: &DVector<f64>) {
    let vv = v.dot(v);
    if vv == 0.0 {
        return;
    }
    let beta = 2.0 / vv;
    let p = &*m * v * beta;
    let kappa = 0.5 * beta * v.dot(&p);
    let q = p - v * kappa;
    m.ger(-1.0, v, &q, 1.0);
    m.ger(-1.0, &q, v, 1.0);
}

/// Householder vector sending `x` to a multiple of the first unit vector.
fn householder(x: &DVector<f64>) -> DVector<f64> {
    let mut v = x.clone();
    let alpha = x.norm();
    if alpha == 0.0 {
        return v;
    }
    let s = if x[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s * alpha;
    v
}

/// Smallest Rayleigh quotient of `A` over the orthogonal complement of the
/// given constraint fields (Householder deflation, then eigenvalues of the
/// trailing block).
pub fn constrained_minimum(a: &OperatorMatrix, constraints: &[&Field]) -> f64 {
    let n = a.len();
    let m = constraints.len();
    if m == 0 {
        return a.eigensystem().values[0];
    }
    let mut mat = a.matrix.clone();
    let mut basis: Vec<DVector<f64>> = constraints
        .iter()
        .map(|f| DVector::from_column_slice(f.values()))
        .collect();
    for col in 0..m {
        let tail = basis[col].rows(col, n - col).into_owned();
        let mut v = DVector::zeros(n);
        v.rows_mut(col, n - col).copy_from(&householder(&tail));
        reflect_symmetric(&mut mat, &v);
        let vv = v.dot(&v);
        if vv > 0.0 {
            for b in basis.iter_mut().skip(col + 1) {
                let coef = 2.0 * v.dot(b) / vv;
                *b -= &v * coef;
            }
        }
    }
    let block = mat.view((m, m), (n - m, n - m)).into_owned();
    block.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Coercivity constant `α`: the minimum of `(L_c h, h)/‖h‖²` over
/// `h ⟂ ψ̃, h ⟂ φ_x`.
pub fn constrained_coercivity(a: &OperatorMatrix, w: &SolitaryWave) -> f64 {
    constrained_minimum(a, &[&w.psi_tilde, &w.phi_x])
}

/// Eigenvalues closer than this to `λ` make `g(λ)` undefined.
pub const RESOLVENT_GUARD: f64 = 1e-6;
/// Eigenvectors whose overlap with `ψ̃` (relative) is below this do not
/// contribute a pole to `g`.
pub const POLE_OVERLAP: f64 = 1e-8;

/// `x = (A − λ)⁻¹ ψ̃` via the eigendecomposition.
pub fn resolvent_solution(a: &OperatorMatrix, w: &SolitaryWave, lambda: f64) -> Result<Field> {
    let eig = a.eigensystem();
    let psi = DVector::from_column_slice(w.psi_tilde.values());
    let psi_norm = psi.norm();
    let coeffs = eig.vectors.tr_mul(&psi);
    let mut scaled = DVector::zeros(coeffs.len());
    for (i, (&mu, &beta)) in eig.values.iter().zip(coeffs.iter()).enumerate() {
        let gap = mu - lambda;
        if gap.abs() < RESOLVENT_GUARD {
            if beta.abs() > POLE_OVERLAP * psi_norm {
                return Err(Error::NearSingular {
                    lambda,
                    eigenvalue: mu,
                    tol: RESOLVENT_GUARD,
                });
            }
            // ψ̃ is (numerically) orthogonal to this eigenvector
            continue;
        }
        scaled[i] = beta / gap;
    }
    let x = &eig.vectors * scaled;
    Ok(Field::from_vec_unchecked(&a.grid, x.as_slice().to_vec()))
}

/// `g(λ) = ((L_c − λ)⁻¹ψ̃, ψ̃)`.
pub fn resolvent_g(a: &OperatorMatrix, w: &SolitaryWave, lambda: f64) -> Result<f64> {
    Ok(dot(&resolvent_solution(a, w, lambda)?, &w.psi_tilde))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexityPoint {
    pub c: f64,
    pub s: f64,
    pub dsdc: f64,
}

pub const DEFAULT_DC_FRACTION: f64 = 1e-3;

/// `S(φ^c)` and its central-difference derivative with `Δc = 10⁻³ c`.
pub fn convexity_dsdc(k: f64, c_values: &[f64], grid: &Grid) -> Result<Vec<ConvexityPoint>> {
    convexity_dsdc_with(k, c_values, grid, DEFAULT_DC_FRACTION)
}

/// As [`convexity_dsdc`] with spacing `Δc = fraction · c`.
pub fn convexity_dsdc_with(
    k: f64,
    c_values: &[f64],
    grid: &Grid,
    fraction: f64,
) -> Result<Vec<ConvexityPoint>> {
    if c_values.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("c values must be strictly ascending".into()));
    }
    let s_at = |c: f64| -> Result<f64> {
        let p = WaveParams::new(c, k)?;
        Ok(functional_s(&build_profile(&p, grid, DEFAULT_TOL)?.phi))
    };
    c_values
        .par_iter()
        .map(|&c| {
            let dc = fraction * c;
            if c - dc <= 2.0 * k {
                return Err(Error::InvalidParams { c: c - dc, k });
            }
            let s = s_at(c)?;
            let dsdc = (s_at(c + dc)? - s_at(c - dc)?) / (2.0 * dc);
            Ok(ConvexityPoint { c, s, dsdc })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpansionReport {
    /// `Q_c(φ + h) − Q_c(φ)`
    pub delta_q: f64,
    /// `½(L_c h, h)`
    pub quadratic: f64,
    /// `(1/6)∫h³`
    pub cubic: f64,
    /// `|ΔQ − (½(L_c h, h) − (1/6)∫h³)|`
    pub defect: f64,
}

/// Compare `Q_c(φ + h) − Q_c(φ)` with its exact cubic expansion about the
/// critical point `φ`.
pub fn expansion_check(w: &SolitaryWave, h: &Field) -> Result<ExpansionReport> {
    if h.grid() != &w.grid {
        return Err(Error::GridMismatch);
    }
    let (c, k) = (w.c(), w.k());
    let delta_q = lagrangian_q(&(&w.phi + h), c, k) - lagrangian_q(&w.phi, c, k);
    let quadratic = 0.5 * dot(&apply_lc(w, h), h);
    let cubic = dot(&h.map(|v| v * v), h) / 6.0;
    Ok(ExpansionReport {
        delta_q,
        quadratic,
        cubic,
        defect: (delta_q - (quadratic - cubic)).abs(),
    })
}

/// `δQ_c/δu` at `φ`: `−½φ² − 2kρ + cψ̃` with `ρ, ψ̃` taken spectrally.
pub fn lagrangian_gradient(w: &SolitaryWave) -> Field {
    let (c, k) = (w.c(), w.k());
    let rho = apply_symbol(&w.phi, SymbolId::Helmholtz4Inv);
    let psi = apply_symbol(&w.phi, SymbolId::SWeight);
    let quad = w.phi.map(|v| -0.5 * v * v);
    let lin = psi.zip_map_unchecked(&rho, |p, r| c * p - 2.0 * k * r);
    &quad + &lin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::build_profile;

    fn wave(n: usize) -> SolitaryWave {
        let p = WaveParams::new(3.0, 1.0).unwrap();
        build_profile(&p, &Grid::new(64.0, n).unwrap(), DEFAULT_TOL).unwrap()
    }

    fn random_field(grid: &Grid, seed: u64) -> Field {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let l = grid.half_length();
        let modes: Vec<(f64, f64)> = (0..40)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Field::from_fn(grid, |x| {
            modes
                .iter()
                .enumerate()
                .map(|(n, (a, b))| {
                    let arg = std::f64::consts::PI * n as f64 * x / l;
                    a * arg.cos() + b * arg.sin()
                })
                .sum()
        })
    }

    #[test]
    fn matrix_action_matches_symbols() {
        let w = wave(256);
        let a = assemble_lc(&w);
        assert_eq!(a.symmetry_defect(), 0.0);
        for seed in 0..10 {
            let f = random_field(&w.grid, seed);
            let dense = a.apply(&f);
            let symbolic = apply_lc(&w, &f);
            assert!((&dense - &symbolic).linf_norm() <= 1e-10 * symbolic.linf_norm());
        }
        let one = a.apply(&Field::constant(&w.grid, 1.0));
        for (v, p) in one.values().iter().zip(w.phi.values()) {
            assert!((v - ((3.0 - p) - 11.0 / 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_x_is_in_the_kernel() {
        let w = wave(1024);
        let r = apply_lc(&w, &w.phi_x);
        assert!(r.l2_norm() / w.phi_x.l2_norm() < 1e-6);
    }

    #[test]
    fn spectrum_is_classified() {
        let w = wave(512);
        let a = assemble_lc(&w);
        let r = spectrum_report(&a, &w);
        assert!(r.classified, "{:?}", r.issues);
        assert!(r.lambda_star < 0.0);
        assert!(r.zero_vector_correlation >= 0.999);
        assert_eq!(r.essential_edge_estimate, 0.25);
        // ground state is of one sign
        let g = &r.ground_vector;
        assert!(g.values().iter().all(|&v| v > -1e-8));

        let (rq, _) = inverse_iteration(&a, r.lambda_star - 1e-3, &w.phi, 30);
        assert!((rq - r.lambda_star).abs() < 1e-10);
    }

    #[test]
    fn constraints_only_raise_the_minimum() {
        let w = wave(256);
        let a = assemble_lc(&w);
        let none = constrained_minimum(&a, &[]);
        let one = constrained_minimum(&a, &[&w.phi_x]);
        let two = constrained_coercivity(&a, &w);
        assert_eq!(none, a.eigensystem().values[0]);
        assert!(none <= one + 1e-12 && one <= two + 1e-12);
        assert!(two > 0.0);
    }

    #[test]
    fn resolvent_refuses_near_poles() {
        let w = wave(256);
        let a = assemble_lc(&w);
        let lstar = a.eigensystem().values[0];
        assert!(matches!(
            resolvent_g(&a, &w, lstar + 1e-8),
            Err(Error::NearSingular { .. })
        ));
        assert!(resolvent_g(&a, &w, 0.0).unwrap() < 0.0);
    }

    #[test]
    fn expansion_is_exact_for_zero() {
        let w = wave(256);
        let r = expansion_check(&w, &Field::zeros(&w.grid)).unwrap();
        assert_eq!(r.defect, 0.0);
    }
}
