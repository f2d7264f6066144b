//! Gaussian randomization of initial data and first-iterate smoothing
//! experiments.
//!
//! Data is split with a smooth partition of unity into unit-scale frequency
//! blocks `P_k`, each block is multiplied by an independent standard complex
//! Gaussian drawn from a counter-based stream keyed by `(seed, k)`, and the
//! real part of the sum is taken as initial data. Genericity (sup-norm decay
//! `<k>^{-alpha}` of the blocks) is measured, not enforced.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::rng::CounterRng;
use crate::spectrum::{
    bracket2, derivative_x1, dispersion, multiply_fields, propagate_linear, FrequencyGrid,
    SpaceTimeField, SpectralField, SpectrumError, Window,
};

#[derive(Debug, Error, PartialEq)]
pub enum RandomizeError {
    #[error("alpha must lie in (1/2, 2), got {0}")]
    BadAlpha(f64),
    #[error("K_trunc must be >= 4, got {0}")]
    BadTruncation(i64),
    #[error("projection center {0:?} outside the grid band")]
    KOutsideGrid((i64, i64)),
}

/// Parameters of a randomization run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationParams {
    pub alpha: f64,
    pub seed: u64,
    pub k_trunc: i64,
}

impl RandomizationParams {
    pub fn new(alpha: f64, seed: u64, k_trunc: i64) -> Result<Self, RandomizeError> {
        if !(alpha > 0.5 && alpha < 2.0) {
            return Err(RandomizeError::BadAlpha(alpha));
        }
        if k_trunc < 4 {
            return Err(RandomizeError::BadTruncation(k_trunc));
        }
        Ok(Self { alpha, seed, k_trunc })
    }
}

/// Smooth bump with `chi0(x) + chi0(x - 1) = 1` on `[0, 1]`: even,
/// supported on `[-1, 1]`, `chi0(0) = 1`.
pub fn chi0(x: f64) -> f64 {
    fn g(y: f64) -> f64 {
        if y > 0.0 {
            (-1.0 / y).exp()
        } else {
            0.0
        }
    }
    let y = 1.0 - x.abs();
    let a = g(y);
    if a == 0.0 {
        return 0.0;
    }
    a / (a + g(1.0 - y))
}

/// Projection to the unit-scale block around `k = (k1, k2)`: multiply by
/// `chi0(xi - k1)` and keep the single integer mode `k2`.
pub fn project_pk(f: &SpectralField, k: (i64, i64)) -> Result<SpectralField, RandomizeError> {
    let grid = f.grid();
    if (k.0.abs() as f64) > grid.xi_max() - 1.0 || k.1.abs() > grid.k_max() as i64 {
        return Err(RandomizeError::KOutsideGrid(k));
    }
    let mut out = SpectralField::zeros(grid);
    let col = grid.col_of_n(k.1).expect("mode inside band");
    for j in 0..grid.n_x1() {
        let w = chi0(grid.xi(j) - k.0 as f64);
        if w != 0.0 {
            out.coeffs_mut()[(j, col)] = f.at(j, col) * w;
        }
    }
    Ok(out)
}

fn lattice_range(grid: &FrequencyGrid, k_trunc: i64) -> (i64, i64) {
    let k1_max = k_trunc.min((grid.xi_max() - 1.0).floor() as i64);
    let k2_max = k_trunc.min(grid.k_max() as i64);
    (k1_max, k2_max)
}

/// Per-block Gaussian weights applied by the randomization, resolved on the
/// grid: `w(xi, n) = sum_k |g_k|-free chi0(xi - k1)^2 [n = k2]`.
fn partition_sq_weight(grid: &FrequencyGrid, k_trunc: i64, xi: f64, n: i64) -> f64 {
    let (k1_max, k2_max) = lattice_range(grid, k_trunc);
    if n.abs() > k2_max {
        return 0.0;
    }
    let mut acc = 0.0;
    let lo = (xi - 1.0).ceil() as i64;
    let hi = (xi + 1.0).floor() as i64;
    for k1 in lo..=hi {
        if k1.abs() <= k1_max {
            let c = chi0(xi - k1 as f64);
            acc += c * c;
        }
    }
    acc
}

/// Gaussian randomization with realification: `Re( sum_k g_k P_k u0 )` with
/// `g_k` iid standard complex Gaussians keyed by `(seed, k)`. The output is
/// flagged real.
pub fn randomize_data(u0: &SpectralField, p: &RandomizationParams) -> SpectralField {
    let grid = u0.grid().clone();
    let (k1_max, k2_max) = lattice_range(&grid, p.k_trunc);
    let mut sum = SpectralField::zeros(&grid);
    for k2 in -k2_max..=k2_max {
        let col = grid.col_of_n(k2).expect("mode inside band");
        for k1 in -k1_max..=k1_max {
            let (re, im) = CounterRng::keyed(p.seed, &[k1, k2]).complex_gaussian();
            let g = Complex64::new(re, im);
            for j in 0..grid.n_x1() {
                let w = chi0(grid.xi(j) - k1 as f64);
                if w != 0.0 {
                    sum.coeffs_mut()[(j, col)] += u0.at(j, col) * w * g;
                }
            }
        }
    }
    // realification: (u + conj u) / 2 in physical space, i.e. the mirrored
    // conjugate average in frequency space
    let p_grid = grid.n_x1();
    let q = grid.n_cols();
    let mut out = SpectralField::zeros(&grid);
    for j in 0..p_grid {
        let jr = (p_grid - j) % p_grid;
        for c in 0..q {
            let cr = q - 1 - c;
            out.coeffs_mut()[(j, c)] = 0.5 * (sum.at(j, c) + sum.at(jr, cr).conj());
        }
    }
    // the unpaired row is empty: chi0 vanishes at the band edge
    out.set_real_flag(true);
    out
}

/// Exact expectation of the squared randomized `H^s` norm: the analytic
/// block sum `(1/2) sum |u0hat|^2 (sum_k chi0^2) <(xi,n)>^{2s} h`, the
/// realification contributing the factor one half.
pub fn expected_randomized_hs_sq(u0: &SpectralField, p: &RandomizationParams, s: f64) -> f64 {
    let grid = u0.grid();
    let h = grid.h_xi();
    let mut acc = 0.0;
    for j in 0..grid.n_x1() {
        let xi = grid.xi(j);
        for c in 0..grid.n_cols() {
            let n = grid.mode_n(c);
            let w = partition_sq_weight(grid, p.k_trunc, xi, n);
            if w > 0.0 {
                acc += u0.at(j, c).norm_sqr() * w * bracket2(xi, n).powf(2.0 * s);
            }
        }
    }
    0.5 * acc * h
}

/// Measured genericity constant: `sup_k <k>^alpha max |P_k u0|`.
pub fn generic_constant(u0: &SpectralField, alpha: f64) -> f64 {
    let grid = u0.grid();
    let k1_max = (grid.xi_max() - 1.0).floor() as i64;
    let k2_max = grid.k_max() as i64;
    let mut sup = 0.0_f64;
    for k2 in -k2_max..=k2_max {
        let col = grid.col_of_n(k2).expect("in band");
        for k1 in -k1_max..=k1_max {
            let mut block_max = 0.0_f64;
            for j in 0..grid.n_x1() {
                let w = chi0(grid.xi(j) - k1 as f64);
                if w > 0.0 {
                    block_max = block_max.max((u0.at(j, col) * w).norm());
                }
            }
            let k_norm2 = (k1 * k1 + k2 * k2) as f64;
            sup = sup.max((1.0 + k_norm2).powf(alpha / 2.0) * block_max);
        }
    }
    sup
}

/// Deterministic power-law data `u0hat = <(xi,n)>^{-alpha}`, real-flagged,
/// with the unpaired row left empty. Its genericity constant is order one.
pub fn power_law_data(grid: &FrequencyGrid, alpha: f64) -> SpectralField {
    let mut f = SpectralField::from_fn(grid, |xi, n| {
        Complex64::new(bracket2(xi, n).powf(-alpha), 0.0)
    });
    for c in 0..grid.n_cols() {
        f.coeffs_mut()[(0, c)] = Complex64::default();
    }
    f.set_real_flag(true);
    f
}

/// First Picard remainder of the flow: the Duhamel integral
/// `v1(t) = int_0^t S(t-s) (1/2) d_x1 (S(s) u0)^2 ds`, computed in the
/// interaction picture with a cumulative trapezoid on `n_t` nodes.
///
/// Returns the Hann-windowed space-time transform of the sampled remainder
/// and its endpoint.
pub fn first_picard_remainder(
    u0w: &SpectralField,
    t_end: f64,
    n_t: usize,
) -> Result<(SpaceTimeField, SpectralField), SpectrumError> {
    assert!(t_end <= 1.0, "contract: t_end <= 1");
    assert!(n_t >= 2);
    let grid = u0w.grid().clone();
    let h = t_end / (n_t - 1) as f64;
    let nonlin = |t: f64| -> Result<SpectralField, SpectrumError> {
        let flow = propagate_linear(u0w, t);
        let sq = multiply_fields(&flow, &flow)?;
        Ok(propagate_linear(&derivative_x1(&sq).scale(Complex64::new(0.5, 0.0)), -t))
    };
    let mut states = Vec::with_capacity(n_t);
    let mut zero = SpectralField::zeros(&grid);
    zero.set_real_flag(u0w.flagged_real());
    states.push(zero.clone());
    let mut acc = zero;
    let mut prev = nonlin(0.0)?;
    for i in 1..n_t {
        let t = i as f64 * h;
        let cur = nonlin(t)?;
        acc = acc.add(&prev.add(&cur)?.scale(Complex64::new(0.5 * h, 0.0)))?;
        prev = cur;
        states.push(propagate_linear(&acc, t));
    }
    let endpoint = states.last().expect("nonempty").clone();
    let stf = SpaceTimeField::from_time_samples(&states, h, Window::Hann);
    Ok((stf, endpoint))
}

/// First Picard remainder at a single time, with the modulation integral
/// `int_0^t e^{is(phi_1 + phi_2 - phi_3)} ds` evaluated in closed form per
/// interacting mode pair. Quadratic cost in the support size, but free of
/// any time-quadrature error; the workhorse of the smoothing census, where
/// the beat frequencies are far too fast for trapezoid nodes.
pub fn first_picard_endpoint_exact(u0w: &SpectralField, t_end: f64) -> SpectralField {
    let grid = u0w.grid().clone();
    let p = grid.n_x1();
    let q = grid.n_cols();
    // populated input modes
    let mut support: Vec<(usize, usize, Complex64, f64)> = Vec::new();
    for j in 0..p {
        let xi = grid.xi(j);
        for c in 0..q {
            let z = u0w.at(j, c);
            if z != Complex64::default() {
                support.push((j, c, z, dispersion(xi, grid.mode_n(c))));
            }
        }
    }
    let l = grid.period_x1();
    let half = p / 2;
    let k = grid.k_max();
    let acc = (0..support.len())
        .into_par_iter()
        .fold(
            || vec![Complex64::default(); p * q],
            |mut local, a| {
                let (j1, c1, z1, phi1) = support[a];
                for &(j2, c2, z2, phi2) in &support[a..] {
                    // output mode w3 = w1 + w2, kept when on the band
                    let j3 = j1 + j2;
                    if j3 < half || j3 >= p + half {
                        continue;
                    }
                    let j3 = j3 - half;
                    let c3 = c1 + c2;
                    if c3 < k || c3 > 3 * k {
                        continue;
                    }
                    let c3 = c3 - k;
                    let xi3 = grid.xi(j3);
                    let phi3 = dispersion(xi3, grid.mode_n(c3));
                    let delta = phi1 + phi2 - phi3;
                    let osc = if delta.abs() < 1e-12 {
                        Complex64::new(t_end, 0.0)
                    } else {
                        (Complex64::from_polar(1.0, t_end * delta) - 1.0)
                            / Complex64::new(0.0, delta)
                    };
                    // unordered pairs enter the convolution twice
                    let pair_factor = if (j1, c1) == (j2, c2) { 1.0 } else { 2.0 };
                    local[j3 * q + c3] += Complex64::new(0.0, 0.5 * xi3 * pair_factor / l)
                        * z1
                        * z2
                        * osc
                        * Complex64::from_polar(1.0, t_end * phi3);
                }
                local
            },
        )
        .reduce(
            || vec![Complex64::default(); p * q],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut out = SpectralField::zeros(&grid);
    out.set_real_flag(u0w.flagged_real());
    for (idx, v) in acc.into_iter().enumerate() {
        out.coeffs_mut()[(idx / q, idx % q)] = v;
    }
    if out.flagged_real() {
        // unpaired -xi_max row stays empty, matching the product convention
        for c in 0..q {
            out.coeffs_mut()[(0, c)] = Complex64::default();
        }
    }
    out
}
