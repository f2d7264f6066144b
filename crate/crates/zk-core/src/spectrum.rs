//! Discretization of the cylinder `R x T`, spectral transforms, the
//! dispersion relation and the linear propagator.
//!
//! The unbounded direction is periodized to a torus of period
//! `L = 2 pi n_x1 / (2 xi_max)`, so that the retained continuous frequencies
//! `xi_j = -xi_max + j h` (with `h = 2 xi_max / n_x1`) are exactly the
//! lattice frequencies of that torus. The periodic direction keeps integer
//! modes `n` with `|n| <= k_max`.
//!
//! Conventions, fixed once and used everywhere:
//!
//! * forward transform: `uhat(xi_j, n) = (L / (P Q)) sum_{p,q} u(x_p, y_q)
//!   e^{-i xi_j x_p - i n y_q}` with `P = n_x1`, `Q = 2 k_max + 1`;
//! * inverse transform: `u(x_p, y_q) = (1/L) sum_{j,n} uhat e^{+i ...}`;
//! * Plancherel: `sum |uhat|^2 h = sum |u|^2 dx dy` where `dx = L/P`,
//!   `dy = 2 pi / Q`, i.e. the spectral quadrature weight is `h` in the
//!   continuous direction and `1` per integer mode.
//!
//! With these conventions the pointwise product of two fields corresponds to
//! `(1/L)` times the discrete convolution of their coefficients over the
//! frequency lattice; [`multiply_fields`] evaluates it with 3/2-rule zero
//! padding, which makes the quadratic convolution exact on the retained band.
//!
//! Fields flagged as real-valued keep conjugate symmetry
//! `uhat(-xi, -n) = conj(uhat(xi, n))`. The row `xi = -xi_max` has no
//! partner on the grid; real-flagged fields keep it empty.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("n_x1 must be even and >= 2, got {0}")]
    OddSamples(usize),
    #[error("xi_max must satisfy xi_max >= 1, got {0}")]
    BadExtent(f64),
    #[error("k_max must be >= 1, got {0}")]
    BadKMax(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field contains a non-finite entry")]
    NonFinite,
}

/// Uniform frequency grid on the periodized cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    xi_max: f64,
    n_x1: usize,
    k_max: usize,
    period_x1: f64,
}

impl FrequencyGrid {
    pub fn new(xi_max: f64, n_x1: usize, k_max: usize) -> Result<Self, SpectrumError> {
        if n_x1 < 2 || n_x1 % 2 != 0 {
            return Err(SpectrumError::OddSamples(n_x1));
        }
        if !(xi_max >= 1.0) {
            return Err(SpectrumError::BadExtent(xi_max));
        }
        if k_max < 1 {
            return Err(SpectrumError::BadKMax(k_max));
        }
        let period_x1 = 2.0 * std::f64::consts::PI * n_x1 as f64 / (2.0 * xi_max);
        Ok(Self { xi_max, n_x1, k_max, period_x1 })
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }
    pub fn n_x1(&self) -> usize {
        self.n_x1
    }
    pub fn k_max(&self) -> usize {
        self.k_max
    }
    pub fn period_x1(&self) -> f64 {
        self.period_x1
    }
    /// Spacing of the continuous frequency samples, `2 xi_max / n_x1`.
    pub fn h_xi(&self) -> f64 {
        2.0 * self.xi_max / self.n_x1 as f64
    }
    /// Number of retained integer modes, `2 k_max + 1`.
    pub fn n_cols(&self) -> usize {
        2 * self.k_max + 1
    }
    /// Continuous frequency of row `j`.
    pub fn xi(&self, j: usize) -> f64 {
        -self.xi_max + j as f64 * self.h_xi()
    }
    /// Integer mode of column `c`.
    pub fn mode_n(&self, c: usize) -> i64 {
        c as i64 - self.k_max as i64
    }
    /// Column of integer mode `n`, when retained.
    pub fn col_of_n(&self, n: i64) -> Option<usize> {
        let c = n + self.k_max as i64;
        (0..self.n_cols() as i64).contains(&c).then_some(c as usize)
    }
    /// Row whose frequency equals `xi` up to grid roundoff.
    pub fn row_of_xi(&self, xi: f64) -> Option<usize> {
        let j = (xi + self.xi_max) / self.h_xi();
        let r = j.round();
        if (j - r).abs() < 1e-9 && r >= 0.0 && (r as usize) < self.n_x1 {
            Some(r as usize)
        } else {
            None
        }
    }
}

/// Dispersion relation of the linearized flow, `phi(xi, n) = xi (xi^2 + n^2)`.
#[inline]
pub fn dispersion(xi: f64, n: i64) -> f64 {
    let n = n as f64;
    xi * (xi * xi + n * n)
}

/// `<y>` bracket for a frequency pair.
#[inline]
pub fn bracket2(xi: f64, n: i64) -> f64 {
    let n = n as f64;
    (1.0 + xi * xi + n * n).sqrt()
}

/// `<y>` bracket of a real number.
#[inline]
pub fn bracket(y: f64) -> f64 {
    (1.0 + y * y).sqrt()
}

/// Complex Fourier coefficients of a function on the discretized cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: FrequencyGrid,
    coeffs: Array2<Complex64>,
    real: bool,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, dir))
}

/// Unnormalized FFT along both axes of a rectangular array.
fn fft2_inplace(data: &mut Array2<Complex64>, dir: FftDirection) {
    let (rows, cols) = data.dim();
    let row_fft = plan(cols, dir);
    let mut scratch = vec![Complex64::default(); row_fft.get_inplace_scratch_len()];
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major layout");
        row_fft.process_with_scratch(slice, &mut scratch);
    }
    let col_fft = plan(rows, dir);
    let mut scratch = vec![Complex64::default(); col_fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            buf[r] = data[(r, c)];
        }
        col_fft.process_with_scratch(&mut buf, &mut scratch);
        for r in 0..rows {
            data[(r, c)] = buf[r];
        }
    }
}

#[inline]
fn bin_of_mode(m: i64, size: usize) -> usize {
    m.rem_euclid(size as i64) as usize
}

impl SpectralField {
    pub fn zeros(grid: &FrequencyGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: Array2::zeros((grid.n_x1(), grid.n_cols())),
            real: false,
        }
    }

    pub fn from_fn<F: FnMut(f64, i64) -> Complex64>(grid: &FrequencyGrid, mut f: F) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.n_x1() {
            for c in 0..grid.n_cols() {
                out.coeffs[(j, c)] = f(grid.xi(j), grid.mode_n(c));
            }
        }
        out
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }
    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }
    pub fn flagged_real(&self) -> bool {
        self.real
    }
    pub fn set_real_flag(&mut self, real: bool) {
        self.real = real;
    }

    pub fn at(&self, j: usize, c: usize) -> Complex64 {
        self.coeffs[(j, c)]
    }

    /// Set the coefficient at continuous frequency `xi` (must be on-grid) and
    /// integer mode `n`.
    pub fn set_mode(&mut self, xi: f64, n: i64, value: Complex64) {
        let j = self.grid.row_of_xi(xi).expect("xi not on grid");
        let c = self.grid.col_of_n(n).expect("n not on grid");
        self.coeffs[(j, c)] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest deviation from conjugate symmetry, relative to the largest
    /// coefficient magnitude.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let p = self.grid.n_x1();
        let q = self.grid.n_cols();
        let scale = self
            .coeffs
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        let mut worst = 0.0_f64;
        for j in 0..p {
            let jr = (p - j) % p;
            for c in 0..q {
                let cr = q - 1 - c;
                let d = (self.coeffs[(j, c)] - self.coeffs[(jr, cr)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }

    /// Physical samples on the `n_x1 x (2 k_max + 1)` collocation grid.
    pub fn to_physical(&self) -> Array2<Complex64> {
        let p = self.grid.n_x1();
        let q = self.grid.n_cols();
        let mut shifted = Array2::<Complex64>::zeros((p, q));
        for j in 0..p {
            let m = j as i64 - (p / 2) as i64;
            let jb = bin_of_mode(m, p);
            for c in 0..q {
                let nb = bin_of_mode(self.grid.mode_n(c), q);
                shifted[(jb, nb)] = self.coeffs[(j, c)];
            }
        }
        fft2_inplace(&mut shifted, FftDirection::Inverse);
        let scale = 1.0 / self.grid.period_x1();
        shifted.mapv_inplace(|z| z * scale);
        shifted
    }

    /// Field whose coefficients are the forward transform of physical samples.
    pub fn from_physical(grid: &FrequencyGrid, samples: &Array2<Complex64>) -> Self {
        let p = grid.n_x1();
        let q = grid.n_cols();
        assert_eq!(samples.dim(), (p, q));
        let mut work = samples.clone();
        fft2_inplace(&mut work, FftDirection::Forward);
        let scale = grid.period_x1() / (p * q) as f64;
        let mut out = Self::zeros(grid);
        for j in 0..p {
            let m = j as i64 - (p / 2) as i64;
            let jb = bin_of_mode(m, p);
            for c in 0..q {
                let nb = bin_of_mode(grid.mode_n(c), q);
                out.coeffs[(j, c)] = work[(jb, nb)] * scale;
            }
        }
        out
    }

    /// `L^2` norm matching the physical-space norm through Plancherel.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.h_xi();
        (self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() * h).sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.mapv_inplace(|z| z * c);
        out.real = self.real && c.im == 0.0;
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, SpectrumError> {
        if self.grid != other.grid {
            return Err(SpectrumError::GridMismatch);
        }
        let mut out = self.clone();
        out.coeffs += &other.coeffs;
        out.real = self.real && other.real;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SpectrumError> {
        if self.grid != other.grid {
            return Err(SpectrumError::GridMismatch);
        }
        let mut out = self.clone();
        out.coeffs -= &other.coeffs;
        out.real = self.real && other.real;
        Ok(out)
    }

    /// Mirror in the unbounded direction, `uhat(xi, n) -> uhat(-xi, n)`.
    ///
    /// The unpaired `xi = -xi_max` row is left in place.
    pub fn mirror_x1(&self) -> Self {
        let p = self.grid.n_x1();
        let q = self.grid.n_cols();
        let mut out = Self::zeros(&self.grid);
        out.real = self.real;
        for j in 0..p {
            let jr = (p - j) % p;
            for c in 0..q {
                out.coeffs[(jr, c)] = self.coeffs[(j, c)];
            }
        }
        out
    }
}

/// Coefficient-wise multiplication by `e^{i t phi(xi_j, n)}`.
///
/// A unit-modulus multiplier, hence an exact isometry of every Sobolev norm.
pub fn propagate_linear(field: &SpectralField, t: f64) -> SpectralField {
    let mut out = field.clone();
    let grid = field.grid().clone();
    for j in 0..grid.n_x1() {
        let xi = grid.xi(j);
        for c in 0..grid.n_cols() {
            let phase = t * dispersion(xi, grid.mode_n(c));
            out.coeffs[(j, c)] *= Complex64::from_polar(1.0, phase);
        }
    }
    out
}

/// Spectral derivative in the unbounded direction: multiply by `i xi_j`.
pub fn derivative_x1(field: &SpectralField) -> SpectralField {
    let mut out = field.clone();
    let grid = field.grid().clone();
    for j in 0..grid.n_x1() {
        let m = Complex64::new(0.0, grid.xi(j));
        for c in 0..grid.n_cols() {
            out.coeffs[(j, c)] *= m;
        }
    }
    out
}

/// Spectral coefficients of the pointwise product on the periodized cylinder.
///
/// Zero-padded (3/2 rule) transforms make the result equal, on the retained
/// band, to `(1/L)` times the exact discrete convolution of the inputs over
/// the frequency lattice. Frequencies produced outside the band are dropped.
pub fn multiply_fields(
    a: &SpectralField,
    b: &SpectralField,
) -> Result<SpectralField, SpectrumError> {
    if a.grid != b.grid {
        return Err(SpectrumError::GridMismatch);
    }
    let grid = &a.grid;
    let p = grid.n_x1();
    let q = grid.n_cols();
    let pp = 3 * p / 2;
    let qq = 3 * (q / 2) + 2; // q = 2k+1 -> qq = 3k+2, alias-free for products
    let embed = |f: &SpectralField| -> Array2<Complex64> {
        let mut big = Array2::<Complex64>::zeros((pp, qq));
        for j in 0..p {
            let m = j as i64 - (p / 2) as i64;
            let jb = bin_of_mode(m, pp);
            for c in 0..q {
                let nb = bin_of_mode(grid.mode_n(c), qq);
                big[(jb, nb)] = f.coeffs[(j, c)];
            }
        }
        big
    };
    let mut fa = embed(a);
    let mut fb = embed(b);
    fft2_inplace(&mut fa, FftDirection::Inverse);
    fft2_inplace(&mut fb, FftDirection::Inverse);
    for (za, zb) in fa.iter_mut().zip(fb.iter()) {
        *za *= *zb;
    }
    fft2_inplace(&mut fa, FftDirection::Forward);
    // inverse carried no normalization; forward of the product needs
    // 1 / (L * pp * qq) in total to realize (1/L) * convolution
    let scale = 1.0 / (grid.period_x1() * (pp * qq) as f64);
    let mut out = SpectralField::zeros(grid);
    for j in 0..p {
        let m = j as i64 - (p / 2) as i64;
        let jb = bin_of_mode(m, pp);
        for c in 0..q {
            let nb = bin_of_mode(grid.mode_n(c), qq);
            out.coeffs[(j, c)] = fa[(jb, nb)] * scale;
        }
    }
    out.real = a.real && b.real;
    if out.real {
        // keep the unpaired -xi_max row empty so conjugate symmetry is exact
        for c in 0..q {
            out.coeffs[(0, c)] = Complex64::default();
        }
    }
    Ok(out)
}

/// Temporal window applied before the time transform of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// No window (indicator of the time span).
    Flat,
    /// Hann window `sin^2(pi t / T)` on `[0, T]`.
    Hann,
}

impl Window {
    pub fn weight(&self, t: f64, t_total: f64) -> f64 {
        match self {
            Window::Flat => 1.0,
            Window::Hann => {
                let s = (std::f64::consts::PI * t / t_total).sin();
                s * s
            }
        }
    }
}

/// Complex coefficients `uhat(xi, n, tau)` on a space-time frequency grid.
///
/// The temporal grid is `tau_r = (r - floor(n_tau/2)) h_tau`, symmetric about
/// zero up to one spacing, with `sum_r |F|^2 h_tau` matching the windowed
/// time integral through the discrete Plancherel identity.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    grid: FrequencyGrid,
    coeffs: Array3<Complex64>,
    h_tau: f64,
    window: Window,
    t_total: f64,
}

impl SpaceTimeField {
    pub fn zeros(grid: &FrequencyGrid, n_tau: usize, h_tau: f64) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: Array3::zeros((grid.n_x1(), grid.n_cols(), n_tau)),
            h_tau,
            window: Window::Flat,
            t_total: 0.0,
        }
    }

    /// Window time samples `states[i] ~ u(., t_i)`, `t_i = i dt`, and apply
    /// the discrete time transform `F_r = (dt / sqrt(2 pi)) sum_i w_i uhat_i
    /// e^{-i tau_r t_i}`.
    pub fn from_time_samples(states: &[SpectralField], dt: f64, window: Window) -> Self {
        let n = states.len();
        assert!(n >= 2, "need at least two time samples");
        let grid = states[0].grid().clone();
        let t_total = n as f64 * dt;
        let h_tau = std::f64::consts::TAU / t_total;
        let p = grid.n_x1();
        let q = grid.n_cols();
        let mut out = Self::zeros(&grid, n, h_tau);
        out.window = window;
        out.t_total = t_total;

        let weights: Vec<f64> = (0..n).map(|i| window.weight(i as f64 * dt, t_total)).collect();
        let fft = plan(n, FftDirection::Forward);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let amp = dt / std::f64::consts::TAU.sqrt();
        let half = (n / 2) as i64;
        let mut buf = vec![Complex64::default(); n];
        for j in 0..p {
            for c in 0..q {
                for (i, s) in states.iter().enumerate() {
                    buf[i] = s.at(j, c) * weights[i] * amp;
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for r in 0..n {
                    let m = r as i64 - half;
                    out.coeffs[(j, c, r)] = buf[bin_of_mode(m, n)];
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }
    pub fn coeffs(&self) -> &Array3<Complex64> {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.coeffs
    }
    pub fn n_tau(&self) -> usize {
        self.coeffs.dim().2
    }
    pub fn h_tau(&self) -> f64 {
        self.h_tau
    }
    pub fn tau(&self, r: usize) -> f64 {
        (r as i64 - (self.n_tau() / 2) as i64) as f64 * self.h_tau
    }
    pub fn window(&self) -> Window {
        self.window
    }
    /// Total time span seen by the window.
    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.mapv_inplace(|z| z * c);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_small() -> FrequencyGrid {
        FrequencyGrid::new(4.0, 16, 4).unwrap()
    }

    fn random_field(grid: &FrequencyGrid, seed: u64) -> SpectralField {
        let mut rng = crate::rng::CounterRng::new(seed);
        SpectralField::from_fn(grid, |_, _| {
            Complex64::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0))
        })
    }

    /// Real-flagged random field: conjugate-symmetric with empty -xi_max row.
    fn random_real_field(grid: &FrequencyGrid, seed: u64) -> SpectralField {
        let mut rng = crate::rng::CounterRng::new(seed);
        let p = grid.n_x1();
        let q = grid.n_cols();
        let mut f = SpectralField::zeros(grid);
        for j in 1..p {
            for c in 0..q {
                let jr = p - j;
                let cr = q - 1 - c;
                if (j, c) <= (jr, cr) {
                    let z = Complex64::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
                    if (j, c) == (jr, cr) {
                        f.coeffs_mut()[(j, c)] = Complex64::new(z.re, 0.0);
                    } else {
                        f.coeffs_mut()[(j, c)] = z;
                        f.coeffs_mut()[(jr, cr)] = z.conj();
                    }
                }
            }
        }
        f.set_real_flag(true);
        f
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert_eq!(
            FrequencyGrid::new(4.0, 15, 4).unwrap_err(),
            SpectrumError::OddSamples(15)
        );
        assert!(matches!(
            FrequencyGrid::new(0.5, 16, 4),
            Err(SpectrumError::BadExtent(_))
        ));
        assert!(matches!(
            FrequencyGrid::new(4.0, 16, 0),
            Err(SpectrumError::BadKMax(0))
        ));
    }

    #[test]
    fn grid_sampling_layout() {
        let g = grid_small();
        assert_eq!(g.h_xi(), 0.5);
        assert_eq!(g.xi(0), -4.0);
        assert_eq!(g.xi(8), 0.0);
        assert_eq!(g.mode_n(0), -4);
        assert_eq!(g.mode_n(8), 4);
        assert_eq!(g.row_of_xi(1.5), Some(11));
        assert_eq!(g.row_of_xi(1.3), None);
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(1.0, 0), 1.0);
        assert_eq!(dispersion(2.0, 3), 26.0);
        assert_eq!(dispersion(-1.0, 2), -5.0);
    }

    #[test]
    fn dispersion_is_odd_in_xi() {
        let mut rng = crate::rng::CounterRng::new(3);
        for _ in 0..100 {
            let xi = rng.range(-50.0, 50.0);
            let n = rng.range_i64(-40, 40);
            assert_eq!(dispersion(-xi, n), -dispersion(xi, n));
        }
    }

    #[test]
    fn propagate_at_zero_is_identity() {
        let g = grid_small();
        let f = random_field(&g, 1);
        let out = propagate_linear(&f, 0.0);
        assert_eq!(out, f);
    }

    #[test]
    fn propagate_group_law() {
        let g = grid_small();
        let f = random_field(&g, 2);
        let a = propagate_linear(&propagate_linear(&f, 0.3), 0.45);
        let b = propagate_linear(&f, 0.75);
        let err: f64 = a
            .coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "group law defect {err}");
    }

    #[test]
    fn propagate_single_mode_full_turn() {
        let g = grid_small();
        let mut f = SpectralField::zeros(&g);
        f.set_mode(1.0, 1, Complex64::new(1.0, 0.0));
        // phi(1,1) = 2, so t = pi gives phase e^{2 pi i} = 1
        let out = propagate_linear(&f, std::f64::consts::PI);
        let d = (out.at(g.row_of_xi(1.0).unwrap(), g.col_of_n(1).unwrap())
            - Complex64::new(1.0, 0.0))
        .norm();
        assert!(d < 1e-12);
    }

    #[test]
    fn propagate_is_l2_isometry() {
        let g = grid_small();
        let f = random_field(&g, 7);
        let out = propagate_linear(&f, 1.7);
        assert!((out.l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn derivative_zero_and_single_mode() {
        let g = grid_small();
        let z = SpectralField::zeros(&g);
        assert_eq!(derivative_x1(&z), z);

        let mut f = SpectralField::zeros(&g);
        f.set_mode(2.0, 0, Complex64::new(1.0, 0.0));
        let d = derivative_x1(&f);
        let v = d.at(g.row_of_xi(2.0).unwrap(), g.col_of_n(0).unwrap());
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn real_flag_ops_preserve_conjugate_symmetry() {
        let g = grid_small();
        let f = random_real_field(&g, 11);
        assert!(f.conjugate_symmetry_defect() < 1e-12);
        assert!(propagate_linear(&f, 0.9).conjugate_symmetry_defect() < 1e-12);
        assert!(derivative_x1(&f).conjugate_symmetry_defect() < 1e-12);
        let h = random_real_field(&g, 12);
        let prod = multiply_fields(&f, &h).unwrap();
        assert!(prod.flagged_real());
        assert!(prod.conjugate_symmetry_defect() < 1e-10);
    }

    #[test]
    fn physical_round_trip_and_parseval() {
        let g = grid_small();
        let f = random_field(&g, 4);
        let phys = f.to_physical();
        let back = SpectralField::from_physical(&g, &phys);
        let err: f64 = f
            .coeffs()
            .iter()
            .zip(back.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "round trip defect {err}");

        let dx = g.period_x1() / g.n_x1() as f64;
        let dy = std::f64::consts::TAU / g.n_cols() as f64;
        let phys_l2 = (phys.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx * dy).sqrt();
        assert!(
            (phys_l2 - f.l2_norm()).abs() < 1e-10 * f.l2_norm(),
            "parseval defect {} vs {}",
            phys_l2,
            f.l2_norm()
        );
    }

    #[test]
    fn real_flagged_field_has_real_samples() {
        let g = grid_small();
        let f = random_real_field(&g, 21);
        let phys = f.to_physical();
        let scale = phys.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let worst = phys.iter().map(|z| z.im.abs()).fold(0.0_f64, f64::max);
        assert!(worst < 1e-12 * scale, "imaginary residue {worst}");
    }

    #[test]
    fn multiply_by_constant_one_is_identity() {
        let g = grid_small();
        // constant 1 in physical space: uhat(0,0) = L
        let mut one = SpectralField::zeros(&g);
        one.set_mode(0.0, 0, Complex64::new(g.period_x1(), 0.0));
        let f = random_field(&g, 5);
        let prod = multiply_fields(&f, &one).unwrap();
        let err: f64 = f
            .coeffs()
            .iter()
            .zip(prod.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "identity defect {err}");
    }

    #[test]
    fn multiply_two_single_modes() {
        let g = grid_small();
        let mut a = SpectralField::zeros(&g);
        let mut b = SpectralField::zeros(&g);
        a.set_mode(1.0, 2, Complex64::new(2.0, 1.0));
        b.set_mode(-0.5, -1, Complex64::new(0.0, 3.0));
        let prod = multiply_fields(&a, &b).unwrap();
        let expect = Complex64::new(2.0, 1.0) * Complex64::new(0.0, 3.0) / g.period_x1();
        for j in 0..g.n_x1() {
            for c in 0..g.n_cols() {
                let want = if (g.xi(j) - 0.5).abs() < 1e-12 && g.mode_n(c) == 1 {
                    expect
                } else {
                    Complex64::default()
                };
                assert!(
                    (prod.at(j, c) - want).norm() < 1e-13,
                    "unexpected coefficient at ({j},{c})"
                );
            }
        }
    }

    /// Brute-force banded convolution: (1/L) sum over lattice pairs.
    fn convolve_direct(a: &SpectralField, b: &SpectralField) -> SpectralField {
        let g = a.grid().clone();
        let p = g.n_x1() as i64;
        let q = g.n_cols() as i64;
        let mut out = SpectralField::zeros(&g);
        for j in 0..p {
            for c in 0..q {
                let mut acc = Complex64::default();
                for j1 in 0..p {
                    let j2 = j - j1 + p / 2; // xi_j = xi_j1 + xi_j2
                    if !(0..p).contains(&j2) {
                        continue;
                    }
                    for c1 in 0..q {
                        let c2 = c - c1 + (q - 1) / 2;
                        if !(0..q).contains(&c2) {
                            continue;
                        }
                        acc += a.at(j1 as usize, c1 as usize) * b.at(j2 as usize, c2 as usize);
                    }
                }
                out.coeffs_mut()[(j as usize, c as usize)] = acc / g.period_x1();
            }
        }
        out
    }

    #[test]
    fn multiply_matches_direct_convolution_oracle() {
        let g = FrequencyGrid::new(4.0, 16, 4).unwrap();
        let a = random_field(&g, 8);
        let b = random_field(&g, 9);
        let fast = multiply_fields(&a, &b).unwrap();
        let slow = convolve_direct(&a, &b);
        let scale = slow.coeffs().iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let err: f64 = fast
            .coeffs()
            .iter()
            .zip(slow.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-11 * scale, "convolution defect {err} (scale {scale})");
    }

    #[test]
    fn multiply_is_bilinear_and_commutative() {
        let g = grid_small();
        let a = random_field(&g, 14);
        let b = random_field(&g, 15);
        let c = random_field(&g, 16);
        let ab = multiply_fields(&a, &b).unwrap();
        let ba = multiply_fields(&b, &a).unwrap();
        let err: f64 = ab
            .coeffs()
            .iter()
            .zip(ba.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "commutativity defect {err}");

        let lam = Complex64::new(0.7, -0.2);
        let lhs = multiply_fields(&a.scale(lam).add(&b).unwrap(), &c).unwrap();
        let rhs = multiply_fields(&a, &c)
            .unwrap()
            .scale(lam)
            .add(&multiply_fields(&b, &c).unwrap())
            .unwrap();
        let scale = rhs.coeffs().iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let err: f64 = lhs
            .coeffs()
            .iter()
            .zip(rhs.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12 * scale.max(1.0), "bilinearity defect {err}");
    }

    #[test]
    fn multiply_rejects_grid_mismatch() {
        let a = SpectralField::zeros(&grid_small());
        let b = SpectralField::zeros(&FrequencyGrid::new(4.0, 32, 4).unwrap());
        assert_eq!(multiply_fields(&a, &b).unwrap_err(), SpectrumError::GridMismatch);
    }

    #[test]
    fn time_transform_parseval() {
        let g = FrequencyGrid::new(2.0, 4, 1).unwrap();
        let n = 32;
        let dt = 0.05;
        let mut rng = crate::rng::CounterRng::new(33);
        let states: Vec<SpectralField> = (0..n)
            .map(|_| {
                SpectralField::from_fn(&g, |_, _| {
                    Complex64::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0))
                })
            })
            .collect();
        let st = SpaceTimeField::from_time_samples(&states, dt, Window::Hann);
        // discrete Plancherel: sum_r |F|^2 h_tau = sum_i |w_i f_i|^2 dt per mode
        let t_total = n as f64 * dt;
        for j in 0..g.n_x1() {
            for c in 0..g.n_cols() {
                let lhs: f64 = (0..n)
                    .map(|r| st.coeffs()[(j, c, r)].norm_sqr() * st.h_tau())
                    .sum();
                let rhs: f64 = (0..n)
                    .map(|i| {
                        let w = Window::Hann.weight(i as f64 * dt, t_total);
                        (states[i].at(j, c) * w).norm_sqr() * dt
                    })
                    .sum();
                assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1e-12), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn tau_grid_symmetric_about_zero() {
        let g = FrequencyGrid::new(2.0, 4, 1).unwrap();
        let states: Vec<SpectralField> = (0..8).map(|_| SpectralField::zeros(&g)).collect();
        let st = SpaceTimeField::from_time_samples(&states, 0.1, Window::Flat);
        let first = st.tau(0);
        let last = st.tau(st.n_tau() - 1);
        assert!((first + last).abs() <= st.h_tau() + 1e-12);
    }
}
