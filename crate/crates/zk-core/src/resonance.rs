//! Geometry of zero-sum frequency triples.
//!
//! A frequency triple is three pairs on `R x Z` summing to zero, the atom of
//! all resonance analysis. This module evaluates the resonance function
//! `Delta = phi_1 + phi_2 + phi_3`, the anisotropic norms
//! `theta_i = sqrt(3 first^2 + second^2)` whose differences are directional
//! derivatives of `Delta`, dyadic size profiles, the halving-process
//! classification into `M`-interactions, the triangle-resonance (bad) set,
//! the rotation-localization and lower-bound lemmas, and the box covering of
//! the `M`-interaction region.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::rng::CounterRng;
use crate::spectrum::dispersion;

#[derive(Debug, Error, PartialEq)]
pub enum ResonanceError {
    #[error("triple lies outside every admissible annulus (norms {0:?})")]
    OutOfAnnulus([f64; 3]),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("M = {m} outside the admissible range [{lo}, {hi}]")]
    InvalidMRange { m: f64, lo: f64, hi: f64 },
}

// ---------------------------------------------------------------------------
// dyadic helpers
// ---------------------------------------------------------------------------

/// Largest power of two `<= |x|`, floored at 1 (so `d(x) = 1` for `|x| < 2`).
/// Exact powers of two map to themselves.
pub fn dyadic_value(x: f64) -> f64 {
    let a = x.abs();
    if a < 2.0 {
        return 1.0;
    }
    let e = ((a.to_bits() >> 52) & 0x7ff) as i64 - 1023;
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Largest power of two `<= |x|` with no floor (negative exponents allowed).
/// Returns 0 for `x = 0`.
pub fn dyadic_value_unfloored(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 || !a.is_normal() {
        return 0.0;
    }
    let e = ((a.to_bits() >> 52) & 0x7ff) as i64 - 1023;
    f64::from_bits(((e + 1023) as u64) << 52)
}

fn exponent_of(x: f64) -> i64 {
    debug_assert!(x.is_normal() && x > 0.0);
    ((x.to_bits() >> 52) & 0x7ff) as i64 - 1023
}

// ---------------------------------------------------------------------------
// triples
// ---------------------------------------------------------------------------

/// Three frequency pairs with zero sum; the third entry is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyTriple {
    pub nu: f64,
    pub zeta: f64,
    pub xi: f64,
    pub k2: i64,
    pub m2: i64,
    pub n2: i64,
}

impl FrequencyTriple {
    pub fn new(nu: f64, k2: i64, zeta: f64, m2: i64) -> Self {
        Self { nu, zeta, xi: -nu - zeta, k2, m2, n2: -k2 - m2 }
    }

    pub fn firsts(&self) -> [f64; 3] {
        [self.nu, self.zeta, self.xi]
    }

    pub fn seconds(&self) -> [i64; 3] {
        [self.k2, self.m2, self.n2]
    }

    pub fn pair(&self, i: usize) -> (f64, i64) {
        match i {
            0 => (self.nu, self.k2),
            1 => (self.zeta, self.m2),
            _ => (self.xi, self.n2),
        }
    }

    /// Euclidean norms of the three pairs.
    pub fn norms(&self) -> [f64; 3] {
        let n = |x: f64, k: i64| (x * x + (k * k) as f64).sqrt();
        [n(self.nu, self.k2), n(self.zeta, self.m2), n(self.xi, self.n2)]
    }

    pub fn min_abs_first(&self) -> f64 {
        self.nu.abs().min(self.zeta.abs()).min(self.xi.abs())
    }
}

/// Three time frequencies with zero sum; the third entry is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeTriple {
    pub mu: f64,
    pub eta: f64,
    pub tau: f64,
}

impl TimeTriple {
    pub fn new(mu: f64, eta: f64) -> Self {
        Self { mu, eta, tau: -mu - eta }
    }

    /// Time frequencies matching the three dispersion values exactly
    /// (all modulations zero up to the derived third entry).
    pub fn on_dispersion_surface(t: &FrequencyTriple) -> Self {
        Self::new(dispersion(t.nu, t.k2), dispersion(t.zeta, t.m2))
    }
}

/// `Delta = phi(nu,k2) + phi(zeta,m2) + phi(xi,n2)`.
pub fn triple_delta(t: &FrequencyTriple) -> f64 {
    dispersion(t.nu, t.k2) + dispersion(t.zeta, t.m2) + dispersion(t.xi, t.n2)
}

/// The three anisotropic norms `theta_i = sqrt(3 first^2 + second^2)`.
pub fn thetas(t: &FrequencyTriple) -> [f64; 3] {
    let th = |x: f64, k: i64| (3.0 * x * x + (k * k) as f64).sqrt();
    [th(self_first(t, 0), t.k2), th(self_first(t, 1), t.m2), th(self_first(t, 2), t.n2)]
}

#[inline]
fn self_first(t: &FrequencyTriple, i: usize) -> f64 {
    [t.nu, t.zeta, t.xi][i]
}

pub fn max_theta_gap(t: &FrequencyTriple) -> f64 {
    let th = thetas(t);
    let mut m = 0.0_f64;
    for i in 0..3 {
        for j in (i + 1)..3 {
            m = m.max((th[i] - th[j]).abs());
        }
    }
    m
}

/// Modulations `(mu - phi_1, eta - phi_2, tau - phi_3)`.
pub fn modulations(t: &FrequencyTriple, tt: &TimeTriple) -> [f64; 3] {
    [
        tt.mu - dispersion(t.nu, t.k2),
        tt.eta - dispersion(t.zeta, t.m2),
        tt.tau - dispersion(t.xi, t.n2),
    ]
}

// ---------------------------------------------------------------------------
// dyadic profile
// ---------------------------------------------------------------------------

/// Tuple of dyadic sizes attached to a frequency/time configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicProfile {
    /// Dyadic sizes of the pair norms.
    pub n: [f64; 3],
    /// Dyadic sizes of the first components.
    pub n_star: [f64; 3],
    /// Dyadic sizes of the modulations.
    pub l: [f64; 3],
    /// Dyadic gap scales; `m[i]` measures the theta difference of the other
    /// two indices, floored at `m_min(i)`.
    pub m: [f64; 3],
}

impl DyadicProfile {
    pub fn n_max(&self) -> f64 {
        self.n[0].max(self.n[1]).max(self.n[2])
    }
    pub fn n_min(&self) -> f64 {
        self.n[0].min(self.n[1]).min(self.n[2])
    }
    pub fn n_med(&self) -> f64 {
        let mut v = self.n;
        v.sort_by(f64::total_cmp);
        v[1]
    }

    /// Smallest admissible value of `m[i]`: the least power of two
    /// `>= sqrt(n_star[i]) / n_max`.
    pub fn m_min(&self, i: usize) -> f64 {
        m_floor(self.n_star[i], self.n_max())
    }
}

fn m_floor(n_star: f64, n_max: f64) -> f64 {
    // both arguments are exact powers of two
    let a = exponent_of(n_star);
    let b = exponent_of(n_max);
    let e = (a - 2 * b + 1).div_euclid(2); // ceil(a/2 - b)
    (e as f64).exp2()
}

/// All dyadic sizes of a configuration, with the gap scales floored.
pub fn dyadic_profile(t: &FrequencyTriple, tt: &TimeTriple) -> DyadicProfile {
    let norms = t.norms();
    let n = [dyadic_value(norms[0]), dyadic_value(norms[1]), dyadic_value(norms[2])];
    let n_star = [dyadic_value(t.nu), dyadic_value(t.zeta), dyadic_value(t.xi)];
    let md = modulations(t, tt);
    let l = [dyadic_value(md[0]), dyadic_value(md[1]), dyadic_value(md[2])];
    let th = thetas(t);
    let n_max = n[0].max(n[1]).max(n[2]);
    let gap = |a: f64, b: f64| dyadic_value_unfloored(a - b);
    let m = [
        gap(th[1], th[2]).max(m_floor(n_star[0], n_max)),
        gap(th[0], th[2]).max(m_floor(n_star[1], n_max)),
        gap(th[0], th[1]).max(m_floor(n_star[2], n_max)),
    ];
    DyadicProfile { n, n_star, l, m }
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

/// Constants of the halving-process classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    /// The lower-bound lemma constant `C`; must be a power of two.
    pub c_big: f64,
    /// Top-scale divisor, `512 * c_big` by construction.
    pub c2: f64,
    /// Halving floor `beta` (dyadic).
    pub beta: f64,
    /// Box constant of the covering.
    pub c_box: f64,
}

impl ClassifyConfig {
    /// Constants used by the analysis: `C = 2^12`, `C2 = 512 C`, and a
    /// halving floor small enough that every fall-through configuration is
    /// pinned to the exact triangle boxes (see [`default_beta`]).
    pub fn standard() -> Self {
        let c_big = 4096.0;
        Self { c_big, c2: 512.0 * c_big, beta: default_beta(c_big), c_box: 1.0 / 1024.0 }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }
}

/// Largest dyadic halving floor such that a configuration that never stops
/// the halving process is forced into the triangle boxes: the fall-through
/// state satisfies `min first < 2 C beta` and all theta gaps `< beta`, and
/// rotation localization then pins the vertices within
/// `(10 + 2 sqrt(3) C) beta` of the triangle. Requiring both
/// `2 C beta <= 1/10` and `(10 + 2 sqrt(3) C) beta <= sqrt(3)/10` keeps every
/// vertex inside its 1/10-box and snaps the integer components exactly.
pub fn default_beta(c_big: f64) -> f64 {
    let cap1 = 0.1 / (2.0 * c_big);
    let cap2 = 3.0_f64.sqrt() / 10.0 / (10.0 + 2.0 * 3.0_f64.sqrt() * c_big);
    let cap = cap1.min(cap2);
    dyadic_value_unfloored(cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionKind {
    /// The small-first-component stop: the resonance function is provably
    /// large on these configurations.
    First,
    /// The theta-gap stop: a bilinear gain is available.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassTag {
    MInteraction { m: f64, kind: InteractionKind },
    Bad,
    OutOfRange,
}

/// Classification outcome; records the halving floor and annulus scale used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub tag: ClassTag,
    pub beta: f64,
    pub n_min: f64,
}

/// Dyadic annulus scale of a triple: the largest dyadic `N >= 64` with all
/// three pair norms in `[N, 8N]`, when one exists.
pub fn annulus_scale(t: &FrequencyTriple) -> Option<f64> {
    let norms = t.norms();
    let r = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let big = norms.iter().cloned().fold(0.0_f64, f64::max);
    let n_min = dyadic_value(r);
    (n_min >= 64.0 && big <= 8.0 * n_min && r >= n_min).then_some(n_min)
}

/// Halving-process classification of a triple in the dyadic annulus.
///
/// Scales descend from `n_min / C2`; at each scale the process stops when
/// `min{|nu|,|zeta|,|xi|} >= 2 C M` (first kind) or some
/// `|theta_i - theta_j| >= M` (second kind, checked after the first).
/// Configurations with a theta gap above `n_min / 1000` take the top scale
/// directly; configurations that never stop above the floor `beta` are Bad.
pub fn classify(t: &FrequencyTriple, config: &ClassifyConfig) -> Classification {
    let Some(n_min) = annulus_scale(t) else {
        return Classification { tag: ClassTag::OutOfRange, beta: config.beta, n_min: 0.0 };
    };
    let gap = max_theta_gap(t);
    let minfirst = t.min_abs_first();
    let m_top = n_min / config.c2;
    if gap > n_min / 1000.0 {
        return Classification {
            tag: ClassTag::MInteraction { m: m_top, kind: InteractionKind::Second },
            beta: config.beta,
            n_min,
        };
    }
    let mut m = m_top;
    loop {
        if minfirst >= 2.0 * config.c_big * m {
            return Classification {
                tag: ClassTag::MInteraction { m, kind: InteractionKind::First },
                beta: config.beta,
                n_min,
            };
        }
        if gap >= m {
            return Classification {
                tag: ClassTag::MInteraction { m, kind: InteractionKind::Second },
                beta: config.beta,
                n_min,
            };
        }
        if m <= config.beta {
            return Classification { tag: ClassTag::Bad, beta: config.beta, n_min };
        }
        m *= 0.5;
    }
}

// ---------------------------------------------------------------------------
// triangle resonance (bad set)
// ---------------------------------------------------------------------------

/// Frequency-box part of the triangle-resonance conditions: up to a
/// rearrangement, `|nu| <= 1/10`, `|zeta + k/2| <= 1/10`,
/// `|xi - k/2| <= 1/10` with `m2 = n2 = -k2/2` exactly.
pub fn triangle_boxes(t: &FrequencyTriple) -> bool {
    bad_permutation(t, None).is_some()
}

/// Full triangle-resonance test including the modulation bound
/// `|modulation_i| <= 2048 |k2|^3` for all three entries.
pub fn is_bad(t: &FrequencyTriple, tt: &TimeTriple) -> bool {
    bad_permutation(t, Some(tt)).is_some()
}

/// Permutations tried in order; ties resolve to the first match.
const PERMS: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn bad_permutation(t: &FrequencyTriple, tt: Option<&TimeTriple>) -> Option<usize> {
    let firsts = t.firsts();
    let seconds = t.seconds();
    let times = tt.map(|v| [v.mu, v.eta, v.tau]);
    'perm: for (pi, p) in PERMS.iter().enumerate() {
        let k = seconds[p[0]];
        if k % 2 != 0 {
            continue;
        }
        let half = k / 2;
        if seconds[p[1]] != -half || seconds[p[2]] != -half {
            continue;
        }
        let kh = k as f64 / 2.0;
        if firsts[p[0]].abs() > 0.1
            || (firsts[p[1]] + kh).abs() > 0.1
            || (firsts[p[2]] - kh).abs() > 0.1
        {
            continue;
        }
        if let Some(times) = &times {
            let bound = 2048.0 * (k.abs() as f64).powi(3);
            for (slot, &idx) in p.iter().enumerate() {
                let (x, s) = (firsts[idx], seconds[idx]);
                let _ = slot;
                if (times[idx] - dispersion(x, s)).abs() > bound {
                    continue 'perm;
                }
            }
        }
        return Some(pi);
    }
    None
}

// ---------------------------------------------------------------------------
// localization and lower-bound lemmas
// ---------------------------------------------------------------------------

fn rot(v: (f64, f64), cos: f64, sin: f64) -> (f64, f64) {
    (v.0 * cos - v.1 * sin, v.0 * sin + v.1 * cos)
}

fn norm2(v: (f64, f64)) -> f64 {
    (v.0 * v.0 + v.1 * v.1).sqrt()
}

/// Zero-sum vectors of nearly equal length must sit within `5 eps` of the
/// two `+/-2 pi/3` rotations of the first one, in one of the two pairings.
///
/// Preconditions (`w1+w2+w3 = 0`, `||w_i| - |w1|| <= eps`, `eps < |w1|/100`)
/// are reported as errors, distinct from a `false` verdict.
pub fn localization_check(
    w1: (f64, f64),
    w2: (f64, f64),
    w3: (f64, f64),
    eps: f64,
) -> Result<bool, ResonanceError> {
    let scale = norm2(w1);
    let sum = (w1.0 + w2.0 + w3.0, w1.1 + w2.1 + w3.1);
    if norm2(sum) > 1e-9 * scale.max(1.0) {
        return Err(ResonanceError::Precondition("vectors do not sum to zero".into()));
    }
    if !(eps >= 0.0) || eps >= scale / 100.0 {
        return Err(ResonanceError::Precondition(format!(
            "eps = {eps} not below |w1|/100 = {}",
            scale / 100.0
        )));
    }
    for w in [w2, w3] {
        if (norm2(w) - scale).abs() > eps * (1.0 + 1e-12) {
            return Err(ResonanceError::Precondition(format!(
                "norm spread {} exceeds eps = {eps}",
                (norm2(w) - scale).abs()
            )));
        }
    }
    let (c, s) = (-0.5, 0.5 * 3.0_f64.sqrt());
    let plus = rot(w1, c, s);
    let minus = rot(w1, c, -s);
    let d = |a: (f64, f64), b: (f64, f64)| norm2((a.0 - b.0, a.1 - b.1));
    let tol = 5.0 * eps;
    Ok((d(w2, plus) <= tol && d(w3, minus) <= tol)
        || (d(w2, minus) <= tol && d(w3, plus) <= tol))
}

/// Lower bound on the resonance function far from space-like resonances:
/// under the annulus, the `n_min/1000` theta-gap bound and
/// `min first >= C max gap`, asserts `|Delta| >= (n_min^2 / 100) min first`.
pub fn coro_lower_bound_check(t: &FrequencyTriple, c_big: f64) -> Result<bool, ResonanceError> {
    let Some(n_min) = annulus_scale(t) else {
        return Err(ResonanceError::Precondition("triple outside the annulus".into()));
    };
    let gap = max_theta_gap(t);
    if gap > n_min / 1000.0 {
        return Err(ResonanceError::Precondition(format!(
            "theta gap {gap} above n_min/1000 = {}",
            n_min / 1000.0
        )));
    }
    let minfirst = t.min_abs_first();
    if minfirst < c_big * gap {
        return Err(ResonanceError::Precondition(format!(
            "min first component {minfirst} below C * gap = {}",
            c_big * gap
        )));
    }
    Ok(triple_delta(t).abs() >= n_min * n_min / 100.0 * minfirst * (1.0 - 1e-9))
}

// ---------------------------------------------------------------------------
// resonance function on the triangle configuration
// ---------------------------------------------------------------------------

/// Measured coefficient of the cubic remainder `|exact - approx| <=
/// ERR_COEFF (|nu|^3 + |omega|^3)`; the remainder is `-3 nu omega (nu +
/// omega)` identically, so the sharp coefficient is 3.
pub const DELTA_BAD_ERR_COEFF: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBadExpansion {
    /// Leading expansion `3 nu omega k + (3/2) k nu^2`.
    pub approx: f64,
    /// Exact resonance function of the reconstructed triangle configuration.
    pub exact: f64,
    /// `DELTA_BAD_ERR_COEFF * (|nu|^3 + |omega|^3)`.
    pub err_bound: f64,
}

/// Exact resonance function on the triangle configuration `(nu, k)`,
/// `(-k/2 + omega, -k/2)`, `(k/2 - nu - omega, -k/2)`, as the expanded
/// polynomial identity
/// `Delta = 3 nu omega k + (3/2) k nu^2 - 3 nu^2 omega - 3 nu omega^2`.
/// Avoids the `k^2`-scale cancellation of the direct dispersion sum.
#[inline]
pub fn triangle_delta_exact(nu: f64, omega: f64, k: f64) -> f64 {
    3.0 * nu * omega * k + 1.5 * k * nu * nu - 3.0 * nu * omega * (nu + omega)
}

/// Resonance function near the triangle configuration, split into the
/// leading expansion and its remainder; the remainder past `approx` is
/// independent of `k`.
pub fn delta_bad_expansion(nu: f64, omega: f64, k: f64) -> DeltaBadExpansion {
    debug_assert!(nu.abs() <= 0.1 + 1e-12 && omega.abs() <= 0.1 + 1e-12);
    let approx = 3.0 * nu * omega * k + 1.5 * k * nu * nu;
    let exact = triangle_delta_exact(nu, omega, k);
    let err_bound = DELTA_BAD_ERR_COEFF * (nu.abs().powi(3) + omega.abs().powi(3));
    DeltaBadExpansion { approx, exact, err_bound }
}

// ---------------------------------------------------------------------------
// covering of the M-interaction region
// ---------------------------------------------------------------------------

/// Geometry constants of the covering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverConfig {
    /// Box side in units of `M`.
    pub c_box: f64,
    /// Halving constant `C` the interactions were classified with.
    pub c_big: f64,
}

impl CoverConfig {
    /// Half-width (in units of `M`) of the strip about the vertical line,
    /// holding the small-first-component vertex: `|nu| < 4 C M`.
    pub fn axis_width(&self) -> f64 {
        4.0 * self.c_big
    }

    /// Half-width (in units of `M`) of the strips about the two diagonal
    /// lines, from rotation localization: `sqrt(2) (10 + 4 sqrt(3) C)`.
    pub fn diag_width(&self) -> f64 {
        std::f64::consts::SQRT_2 * (10.0 + 4.0 * 3.0_f64.sqrt() * self.c_big)
    }

    /// Multiplicity bound `ceil(2 W / c + 1)^4` with `W` the containment
    /// constant of the diagonal strips.
    pub fn c3(&self) -> f64 {
        (2.0 * self.diag_width() / self.c_box + 1.0).ceil().powi(4)
    }
}

/// Grid box `[ix s, (ix+1) s) x [iy s, (iy+1) s)` with `s` the box side.
pub type CoverBox = (i64, i64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxTriple {
    /// Box on the vertical-line strip (small first component vertex).
    pub axis: CoverBox,
    /// Box on the `(-t/2, -t/2)` strip.
    pub minus: CoverBox,
    /// Box on the `(t/2, -t/2)` strip.
    pub plus: CoverBox,
    pub kind: InteractionKind,
}

#[derive(Debug, Clone)]
pub struct Covering {
    pub m: f64,
    pub n_min: f64,
    pub box_size: f64,
    /// Boxes per strip: axis, minus-diagonal, plus-diagonal.
    pub strips: [BTreeSet<CoverBox>; 3],
    pub triples: Vec<BoxTriple>,
    lookup: BTreeSet<(CoverBox, CoverBox, CoverBox)>,
}

/// Unit direction and a point check for the three resonance lines.
const LINES: [(f64, f64); 3] = [
    (0.0, 1.0),                                       // (0, t)
    (-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2), // (-t/2, -t/2)
    (std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),  // (t/2, -t/2)
];

fn strip_boxes(dir: (f64, f64), half_width: f64, n_min: f64, s: f64) -> BTreeSet<CoverBox> {
    let mut out = BTreeSet::new();
    let normal = (-dir.1, dir.0);
    let t_max = 8.0 * n_min + half_width + 2.0 * s;
    let step = 0.5 * s;
    let cross_steps = (half_width / step).ceil() as i64 + 2;
    let mut t = -t_max;
    while t <= t_max {
        for o in -cross_steps..=cross_steps {
            let q = (t * dir.0 + o as f64 * step * normal.0, t * dir.1 + o as f64 * step * normal.1);
            let bx = ((q.0 / s).floor() as i64, (q.1 / s).floor() as i64);
            out.insert(bx);
        }
        t += step;
    }
    // keep boxes that truly meet the strip within the annulus
    out.retain(|&(ix, iy)| {
        let (x0, x1) = (ix as f64 * s, (ix + 1) as f64 * s);
        let (y0, y1) = (iy as f64 * s, (iy + 1) as f64 * s);
        // distance of the box to the line through 0 with direction `dir`
        let corners = [(x0, y0), (x0, y1), (x1, y0), (x1, y1)];
        let d_line = corners
            .iter()
            .map(|&(x, y)| (x * normal.0 + y * normal.1).abs())
            .fold(f64::INFINITY, f64::min);
        if d_line > half_width {
            return false;
        }
        let far = corners.iter().map(|&(x, y)| (x * x + y * y).sqrt()).fold(0.0_f64, f64::max);
        let nearest_x = if x0 > 0.0 { x0 } else if x1 < 0.0 { x1 } else { 0.0 };
        let nearest_y = if y0 > 0.0 { y0 } else if y1 < 0.0 { y1 } else { 0.0 };
        let near = (nearest_x * nearest_x + nearest_y * nearest_y).sqrt();
        far >= n_min && near <= 8.0 * n_min
    });
    out
}

fn theta_range_of_box(b: CoverBox, s: f64) -> (f64, f64) {
    let (x0, x1) = (b.0 as f64 * s, (b.0 + 1) as f64 * s);
    let (y0, y1) = (b.1 as f64 * s, (b.1 + 1) as f64 * s);
    let sq_range = |lo: f64, hi: f64| -> (f64, f64) {
        let lo2 = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()).powi(2) };
        let hi2 = lo.abs().max(hi.abs()).powi(2);
        (lo2, hi2)
    };
    let (xl, xh) = sq_range(x0, x1);
    let (yl, yh) = sq_range(y0, y1);
    ((3.0 * xl + yl).sqrt(), (3.0 * xh + yh).sqrt())
}

/// Grid covering of the `M`-interaction region by `c M`-boxes, paired into
/// admissible triples and tagged by the theta-gap witness rule: a triple is
/// second kind when the box intervals admit a gap `>= M`.
pub fn cover_s_m(
    m: f64,
    n_min: f64,
    config: &CoverConfig,
    classify: &ClassifyConfig,
) -> Result<Covering, ResonanceError> {
    let lo = classify.beta;
    let hi = n_min / classify.c2;
    if !(m >= lo && m <= hi) {
        return Err(ResonanceError::InvalidMRange { m, lo, hi });
    }
    let s = config.c_box * m;
    let axis = strip_boxes(LINES[0], config.axis_width() * m, n_min, s);
    let minus = strip_boxes(LINES[1], config.diag_width() * m, n_min, s);
    let plus = strip_boxes(LINES[2], config.diag_width() * m, n_min, s);

    let mut triples = Vec::new();
    let mut lookup = BTreeSet::new();
    let reach = config.diag_width() * m + 2.0 * s;
    let reach_boxes = (reach / s).ceil() as i64 + 1;
    for &b0 in &axis {
        let k_mid = (b0.1 as f64 + 0.5) * s;
        let center_minus = (-k_mid / 2.0, -k_mid / 2.0);
        let c_ix = (center_minus.0 / s).floor() as i64;
        let c_iy = (center_minus.1 / s).floor() as i64;
        for dx in -reach_boxes..=reach_boxes {
            for dy in -reach_boxes..=reach_boxes {
                let bm = (c_ix + dx, c_iy + dy);
                if !minus.contains(&bm) {
                    continue;
                }
                // third box covers -(B0 + Bm)
                let sx0 = -((b0.0 + bm.0 + 2) as f64) * s;
                let sy0 = -((b0.1 + bm.1 + 2) as f64) * s;
                let base_ix = (sx0 / s).floor() as i64;
                let base_iy = (sy0 / s).floor() as i64;
                for ox in 0..=2_i64 {
                    for oy in 0..=2_i64 {
                        let bp = (base_ix + ox, base_iy + oy);
                        // -(B0+Bm) spans two box widths, half-open on the
                        // left and closed on the right
                        let span_x0 = sx0;
                        let span_x1 = -((b0.0 + bm.0) as f64) * s;
                        let px0 = bp.0 as f64 * s;
                        let px1 = (bp.0 + 1) as f64 * s;
                        if px1 <= span_x0 || px0 > span_x1 {
                            continue;
                        }
                        let span_y0 = sy0;
                        let span_y1 = -((b0.1 + bm.1) as f64) * s;
                        let py0 = bp.1 as f64 * s;
                        let py1 = (bp.1 + 1) as f64 * s;
                        if py1 <= span_y0 || py0 > span_y1 {
                            continue;
                        }
                        if !plus.contains(&bp) {
                            continue;
                        }
                        let ranges =
                            [theta_range_of_box(b0, s), theta_range_of_box(bm, s), theta_range_of_box(bp, s)];
                        let mut second = false;
                        for i in 0..3 {
                            for j in (i + 1)..3 {
                                if ranges[i].1 - ranges[j].0 >= m || ranges[j].1 - ranges[i].0 >= m
                                {
                                    second = true;
                                }
                            }
                        }
                        let kind =
                            if second { InteractionKind::Second } else { InteractionKind::First };
                        triples.push(BoxTriple { axis: b0, minus: bm, plus: bp, kind });
                        lookup.insert((b0, bm, bp));
                    }
                }
            }
        }
    }
    Ok(Covering { m, n_min, box_size: s, strips: [axis, minus, plus], triples, lookup })
}

impl Covering {
    fn box_of(&self, p: (f64, i64)) -> CoverBox {
        ((p.0 / self.box_size).floor() as i64, ((p.1 as f64) / self.box_size).floor() as i64)
    }

    /// Whether some returned triple contains the configuration, trying every
    /// assignment of the three frequencies to the three strip roles.
    pub fn covers(&self, t: &FrequencyTriple) -> bool {
        let boxes = [self.box_of(t.pair(0)), self.box_of(t.pair(1)), self.box_of(t.pair(2))];
        for p in PERMS {
            if self.lookup.contains(&(boxes[p[0]], boxes[p[1]], boxes[p[2]])) {
                return true;
            }
        }
        false
    }

    /// Largest number of triples any single box participates in.
    pub fn max_multiplicity(&self) -> usize {
        let mut counts: BTreeMap<CoverBox, usize> = BTreeMap::new();
        for t in &self.triples {
            for b in [t.axis, t.minus, t.plus] {
                *counts.entry(b).or_default() += 1;
            }
        }
        counts.values().cloned().max().unwrap_or(0)
    }

    pub fn boxes_per_strip(&self) -> [usize; 3] {
        [self.strips[0].len(), self.strips[1].len(), self.strips[2].len()]
    }
}

// ---------------------------------------------------------------------------
// samplers
// ---------------------------------------------------------------------------

/// Random triple with all pair norms in `[n_min, 8 n_min]` and dyadic
/// annulus scale exactly `n_min` (`n_min` a power of two `>= 64`).
pub fn sample_annulus_triple(rng: &mut CounterRng, n_min: f64) -> FrequencyTriple {
    loop {
        let r1 = rng.range(n_min, 2.0 * n_min);
        let a1 = rng.range(0.0, std::f64::consts::TAU);
        let k2 = (r1 * a1.sin()).round() as i64;
        let nu = r1 * a1.cos();
        let r2 = rng.range(n_min, 2.0 * n_min);
        let a2 = rng.range(0.0, std::f64::consts::TAU);
        let m2 = (r2 * a2.sin()).round() as i64;
        let zeta = r2 * a2.cos();
        let t = FrequencyTriple::new(nu, k2, zeta, m2);
        if annulus_scale(&t) == Some(n_min) {
            return t;
        }
    }
}

/// Rejection sample of a localization-lemma instance: `w1` random, `w2`
/// near a `+/-2 pi/3` rotation of it, `w3` derived, `eps` the observed norm
/// spread. The returned instance satisfies every precondition.
pub fn sample_localization_instance(
    rng: &mut CounterRng,
) -> ((f64, f64), (f64, f64), (f64, f64), f64) {
    loop {
        let r = rng.range(1.0, 1000.0);
        let a = rng.range(0.0, std::f64::consts::TAU);
        let w1 = (r * a.cos(), r * a.sin());
        let sign = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
        let (c, s) = (-0.5, sign * 0.5 * 3.0_f64.sqrt());
        let target = rot(w1, c, s);
        let rho = rng.range(0.0, r / 400.0);
        let b = rng.range(0.0, std::f64::consts::TAU);
        let w2 = (target.0 + rho * b.cos(), target.1 + rho * b.sin());
        let w3 = (-w1.0 - w2.0, -w1.1 - w2.1);
        let spread = (norm2(w2) - r).abs().max((norm2(w3) - r).abs());
        let eps = (spread * 1.000001).max(1e-12 * r);
        if eps < r / 100.0 {
            return (w1, w2, w3, eps);
        }
    }
}

/// Rejection sample of a lower-bound-lemma instance: a rotated equal-theta
/// configuration, perturbed within the hypothesis margin. `None` when the
/// draw fails the hypothesis (caller retries).
pub fn sample_coro_instance(rng: &mut CounterRng, c_big: f64) -> Option<FrequencyTriple> {
    let n_min = [64.0, 128.0, 256.0, 512.0][rng.range_i64(0, 3) as usize];
    let rho = rng.range(2.2 * n_min, 4.0 * n_min);
    let angle = rng.range(0.0, std::f64::consts::TAU);
    let base = sample_equal_theta_triple(rho, angle)?;
    let minfirst = base.min_abs_first();
    if minfirst < 1.0 {
        return None;
    }
    // perturb the first components, keeping the hypothesis margin
    let scale = minfirst / (8.0 * c_big);
    let d1 = rng.range(-scale, scale);
    let d2 = rng.range(-scale, scale);
    let t = FrequencyTriple::new(base.nu + d1, base.k2, base.zeta + d2, base.m2);
    if annulus_scale(&t) != Some(n_min) {
        return None;
    }
    let gap = max_theta_gap(&t);
    if gap > n_min / 1000.0 || t.min_abs_first() < c_big * gap {
        return None;
    }
    Some(t)
}

/// Census sampler: generic annulus triples mixed with near-triangle,
/// rotated equal-theta and in-box draws so every class is populated.
pub fn sample_census_triple(rng: &mut CounterRng, n_min: f64) -> FrequencyTriple {
    let fallback = |rng: &mut CounterRng| sample_annulus_triple(rng, n_min);
    match rng.range_i64(0, 9) {
        0..=5 => fallback(rng),
        6 => {
            // near-triangle at a random perturbation scale
            let p = 2 * rng.range_i64(n_min as i64 / 2 + 1, (2.0 * n_min) as i64 - 1);
            let scale = rng.range(0.0, n_min / 1024.0);
            let t = FrequencyTriple::new(
                rng.range(-scale, scale),
                p,
                -(p as f64) / 2.0 + rng.range(-scale, scale),
                -p / 2,
            );
            if annulus_scale(&t) == Some(n_min) {
                t
            } else {
                fallback(rng)
            }
        }
        7 => {
            // rotated equal-theta configuration: large min first component
            // with a vanishing theta gap
            let rho = rng.range(2.2 * n_min, 3.8 * n_min);
            let angle = rng.range(0.0, std::f64::consts::TAU);
            match sample_equal_theta_triple(rho, angle) {
                Some(t) if annulus_scale(&t) == Some(n_min) => t,
                _ => fallback(rng),
            }
        }
        _ => {
            // deep triangle resonance: theta gaps below the halving floor,
            // solved through omega^2 - p omega - nu^2 = 0 which equalizes
            // the first two thetas
            let beta = ClassifyConfig::standard().beta;
            let p_lo = (1.45 * n_min) as i64 / 2 + 1;
            let p_hi = (2.0 * n_min) as i64 - 1;
            let p = 2 * rng.range_i64(p_lo, p_hi);
            let nu = rng.range(-beta / 2.0, beta / 2.0);
            let pf = p as f64;
            let omega = 0.5 * (pf - (pf * pf + 4.0 * nu * nu).sqrt());
            let t = FrequencyTriple::new(nu, p, -pf / 2.0 + omega, -p / 2);
            if annulus_scale(&t) == Some(n_min) {
                t
            } else {
                fallback(rng)
            }
        }
    }
}

/// Near-equilateral configuration in theta space: an exact triangle of
/// circumradius about `rho`, rotated by `angle`, with integer second
/// components and first components re-solved (Newton) so that all three
/// thetas agree to machine precision. Returns `None` when the solve fails.
pub fn sample_equal_theta_triple(rho: f64, angle: f64) -> Option<FrequencyTriple> {
    // vertices of an equilateral triangle in theta coordinates
    let base = [(0.0, rho), rot((0.0, rho), -0.5, 0.5 * 3.0_f64.sqrt()), rot(
        (0.0, rho),
        -0.5,
        -0.5 * 3.0_f64.sqrt(),
    )];
    let sn = angle.sin();
    let cs = angle.cos();
    let w: Vec<(f64, f64)> = base.iter().map(|&v| rot(v, cs, sn)).collect();
    let y = [w[0].1.round(), w[1].1.round()];
    let y3 = -y[0] - y[1];
    let mut x = [w[0].0 / 3.0_f64.sqrt(), w[1].0 / 3.0_f64.sqrt()];
    // Newton on f_i = theta_i^2 - theta_3^2 in (x1, x2), x3 = -x1-x2
    for _ in 0..60 {
        let x3 = -x[0] - x[1];
        let t1 = 3.0 * x[0] * x[0] + y[0] * y[0];
        let t2 = 3.0 * x[1] * x[1] + y[1] * y[1];
        let t3 = 3.0 * x3 * x3 + y3 * y3;
        let f = [t1 - t3, t2 - t3];
        if f[0].abs().max(f[1].abs()) < 1e-9 {
            let k2 = y[0] as i64;
            let m2 = y[1] as i64;
            let t = FrequencyTriple::new(x[0], k2, x[1], m2);
            return Some(t);
        }
        let j11 = 6.0 * (x[0] + x3);
        let j12 = 6.0 * x3;
        let j21 = 6.0 * x3;
        let j22 = 6.0 * (x[1] + x3);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-9 {
            return None;
        }
        let dx0 = (f[0] * j22 - f[1] * j12) / det;
        let dx1 = (j11 * f[1] - j21 * f[0]) / det;
        x[0] -= dx0;
        x[1] -= dx1;
    }
    None
}
