//! Concentrated wave pairs that break the bilinear product estimate, and
//! the measurement of their growth exponents.
//!
//! Each half of a pair is an indicator profile
//! `uhat(nu, k, mu) = 1_R(nu) 1_{|mu - phi(nu,k)| <= C}` supported on a
//! single integer mode, i.e. a wave packet riding the dispersion surface
//! inside a thin frequency window. The two windows sit on the triangle
//! resonance (`k = N`, `m = -N/2`), so the product concentrates at the
//! third vertex with order-one modulations, while the input norms shrink
//! with the window size. All modulation integrals are evaluated against the
//! indicator profiles directly; no space-time grid enters at scan scale.
//!
//! Conventions: the product transform is the plain convolution quadrature
//! `(uv)^ = int uhat vhat`, and the reported ratio is
//! `|| d_x1 (uv) ||_{X^{s, b-1+delta}} / (||u||_{X^{s,b}} ||v||_{X^{s,b}})`
//! (`Y`-type weights in the `y` case, with the dual weight `|xi|/<xi>` on
//! the output side). Multiplicative conventions cancel in the slope.

use rayon::prelude::*;
use thiserror::Error;

use crate::quad::{linear_fit, simpson_adaptive};
use crate::resonance::triangle_delta_exact;
use crate::spectrum::{bracket, bracket2};

#[derive(Debug, Error, PartialEq)]
pub enum CounterexampleError {
    #[error("N must be even and >= 64, got {0}")]
    BadScale(f64),
    #[error("quadrature too coarse to resolve the window: mesh {mesh} exceeds {limit}")]
    UnresolvedWindow { mesh: f64, limit: f64 },
    #[error("window is empty")]
    EmptySupport,
    #[error("slope fit needs at least 3 scales, got {0}")]
    DegenerateFit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Windows of width `N^{-1/2}` at the triangle vertices; breaks the
    /// plain estimate below `s = 3/4`.
    X,
    /// Windows of width `1/N` offset to `nu ~ 1/2`; breaks the weighted
    /// estimate below `s = 1/2`.
    Y,
}

/// Indicator-profile pair concentrated on the triangle resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorPair {
    pub case: Case,
    pub n: f64,
    /// nu-window of the first factor.
    pub r1: (f64, f64),
    /// omega-window of the second factor (`zeta = -N/2 + omega`).
    pub r2: (f64, f64),
    /// Modulation half-width.
    pub c_mod: f64,
    pub amp_u: f64,
    pub amp_v: f64,
    /// Quadrature nodes across each window.
    pub n_quad: usize,
}

/// Build the concentrated pair at scale `n`.
///
/// `n_quad` is the number of quadrature nodes across each window; the
/// implied mesh must resolve the window to an eighth of its half-width.
pub fn build_pair(case: Case, n: f64, c_mod: f64, n_quad: usize) -> Result<IndicatorPair, CounterexampleError> {
    if n < 64.0 || (n / 2.0).fract() != 0.0 {
        return Err(CounterexampleError::BadScale(n));
    }
    let (r1, r2) = match case {
        Case::X => {
            let w = n.powf(-0.5);
            ((-w, w), (-w, w))
        }
        Case::Y => ((0.5 - 0.5 / n, 0.5 + 0.5 / n), (-0.25 - 1.0 / n, -0.25 + 1.0 / n)),
    };
    if n_quad == 0 || r1.1 <= r1.0 || r2.1 <= r2.0 {
        return Err(CounterexampleError::EmptySupport);
    }
    let limit = match case {
        Case::X => n.powf(-0.5) / 8.0,
        Case::Y => 1.0 / (8.0 * n),
    };
    let mesh = ((r1.1 - r1.0) / n_quad as f64).max((r2.1 - r2.0) / n_quad as f64);
    if mesh > limit * (1.0 + 1e-12) {
        return Err(CounterexampleError::UnresolvedWindow { mesh, limit });
    }
    Ok(IndicatorPair { case, n, r1, r2, c_mod, amp_u: 1.0, amp_v: 1.0, n_quad })
}

/// `int_{-C}^{C} <lam>^{2b} dlam`, the modulation-window factor of an
/// indicator norm.
pub fn modulation_window_integral(b: f64, c: f64) -> f64 {
    simpson_adaptive(&|lam: f64| bracket(lam).powf(2.0 * b), -c, c, 1e-12)
}

fn low_weight(case: Case, xi: f64) -> f64 {
    match case {
        Case::X => 1.0,
        Case::Y => bracket(xi) / xi.abs(),
    }
}

fn dual_weight(case: Case, xi: f64) -> f64 {
    match case {
        Case::X => 1.0,
        Case::Y => xi.abs() / bracket(xi),
    }
}

/// Input norms of the pair: `(||u||, ||v||)` in the case's space.
pub fn pair_norms(pair: &IndicatorPair, s: f64, b: f64) -> (f64, f64) {
    let window = modulation_window_integral(b, pair.c_mod);
    let ku = pair.n;
    let kv = -pair.n / 2.0;
    let integ = |r: (f64, f64), k: f64, shift: f64, amp: f64| -> f64 {
        let f = |t: f64| {
            let freq = shift + t;
            bracket2(freq, k as i64).powf(2.0 * s) * low_weight(pair.case, freq)
        };
        let v = simpson_adaptive(&f, r.0, r.1, 1e-12);
        amp * (v * window).sqrt()
    };
    (
        integ(pair.r1, ku, 0.0, pair.amp_u),
        // second factor lives at zeta = -N/2 + omega
        integ(pair.r2, kv, -pair.n / 2.0, pair.amp_v),
    )
}

/// Quadrature of the product field: returns the output norm
/// `|| d_x1 (uv) ||` with modulation exponent `bp` and, separately, the
/// fraction of unweighted squared mass with modulation inside `|z| <=
/// c_mod` (the concentration box).
pub fn product_norm(pair: &IndicatorPair, s: f64, bp: f64) -> (f64, f64) {
    let n = pair.n;
    let c = pair.c_mod;
    let n_out = (n / 2.0).round() as i64;
    let rho_lo = pair.r1.0 + pair.r2.0;
    let rho_hi = pair.r1.1 + pair.r2.1;
    let n_rho = 2 * pair.n_quad;
    let d_rho = (rho_hi - rho_lo) / n_rho as f64;

    // modulation extent of the product: tent half-width 2C around the
    // resonance values, which are O(1) on the triangle configuration
    let mut dmin = f64::INFINITY;
    let mut dmax = f64::NEG_INFINITY;
    for i in 0..=32 {
        for j in 0..=32 {
            let nu = pair.r1.0 + (pair.r1.1 - pair.r1.0) * i as f64 / 32.0;
            let om = pair.r2.0 + (pair.r2.1 - pair.r2.0) * j as f64 / 32.0;
            let d = triangle_delta_exact(nu, om, n);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
    }
    let z_lo = dmin - 2.0 * c - 1.0;
    let z_hi = dmax + 2.0 * c + 1.0;
    let n_z = 512;
    let d_z = (z_hi - z_lo) / n_z as f64;

    let tent = |x: f64| (2.0 * c - x.abs()).max(0.0);
    let rows: Vec<(f64, f64, f64)> = (0..n_rho)
        .into_par_iter()
        .map(|ri| {
            let rho = rho_lo + (ri as f64 + 0.5) * d_rho;
            // overlap interval in nu: R1 cap (rho - R2)
            let lo = pair.r1.0.max(rho - pair.r2.1);
            let hi = pair.r1.1.min(rho - pair.r2.0);
            if hi <= lo {
                return (0.0, 0.0, 0.0);
            }
            let n_nu = pair.n_quad;
            let d_nu = (hi - lo) / n_nu as f64;
            let w_out = rho - n / 2.0;
            let mut acc_w = 0.0; // weighted squared mass
            let mut acc_m = 0.0; // plain squared mass
            let mut acc_box = 0.0; // plain squared mass inside |z| <= c
            for zi in 0..n_z {
                let z = z_lo + (zi as f64 + 0.5) * d_z;
                let mut g = 0.0;
                for k in 0..n_nu {
                    let nu = lo + (k as f64 + 0.5) * d_nu;
                    let d = triangle_delta_exact(nu, rho - nu, n);
                    g += tent(z - d);
                }
                let g = g * d_nu * pair.amp_u * pair.amp_v;
                let g2 = g * g;
                let plain = w_out * w_out * g2;
                acc_w += plain
                    * bracket(z).powf(2.0 * bp)
                    * bracket2(w_out, n_out).powf(2.0 * s)
                    * dual_weight(pair.case, w_out);
                acc_m += plain;
                if z.abs() <= c {
                    acc_box += plain;
                }
            }
            (acc_w * d_z * d_rho, acc_m * d_z * d_rho, acc_box * d_z * d_rho)
        })
        .collect();
    let total_w: f64 = rows.iter().map(|r| r.0).sum();
    let total_m: f64 = rows.iter().map(|r| r.1).sum();
    let total_box: f64 = rows.iter().map(|r| r.2).sum();
    (total_w.sqrt(), if total_m > 0.0 { total_box / total_m } else { 0.0 })
}

/// Ratio of the product norm to the input norm product at one scale.
pub fn ratio_at(pair: &IndicatorPair, s: f64, b: f64, delta: f64) -> f64 {
    let (nu_norm, nv_norm) = pair_norms(pair, s, b);
    let (num, _) = product_norm(pair, s, b - 1.0 + delta);
    num / (nu_norm * nv_norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub case: Case,
    pub n: f64,
    pub s: f64,
    pub b: f64,
    pub delta: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioScan {
    pub rows: Vec<RatioRow>,
    /// Least-squares slope of `log2 ratio` against `log2 N`.
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Sweep the scales, fit `log2 ratio` against `log2 N`.
pub fn ratio_scan(
    case: Case,
    n_list: &[f64],
    s: f64,
    b: f64,
    delta: f64,
    c_mod: f64,
    n_quad: usize,
) -> Result<RatioScan, CounterexampleError> {
    if n_list.len() < 3 {
        return Err(CounterexampleError::DegenerateFit(n_list.len()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let pair = build_pair(case, n, c_mod, n_quad)?;
        let ratio = ratio_at(&pair, s, b, delta);
        rows.push(RatioRow { case, n, s, b, delta, ratio });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n.log2()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.log2()).collect();
    let (slope, intercept, max_residual) = linear_fit(&xs, &ys);
    Ok(RatioScan { rows, slope, intercept, max_residual })
}
