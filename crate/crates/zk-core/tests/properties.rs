//! Property tests for the algebraic invariants of the spectral calculus and
//! the resonance geometry.

use num_complex::Complex64;
use proptest::prelude::*;

use zk_core::norms::{sobolev_norm, tilde_sobolev_norm};
use zk_core::resonance::{
    dyadic_value, dyadic_value_unfloored, thetas, triple_delta, FrequencyTriple,
};
use zk_core::spectrum::{
    derivative_x1, dispersion, multiply_fields, propagate_linear, FrequencyGrid, SpectralField,
};

fn small_grid() -> FrequencyGrid {
    FrequencyGrid::new(4.0, 16, 3).unwrap()
}

/// Random complex field on the small grid.
fn field_strategy() -> impl Strategy<Value = SpectralField> {
    let g = small_grid();
    let cells = g.n_x1() * g.n_cols();
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), cells).prop_map(move |vals| {
        let mut f = SpectralField::zeros(&g);
        for (i, (re, im)) in vals.into_iter().enumerate() {
            f.coeffs_mut()[(i / g.n_cols(), i % g.n_cols())] = Complex64::new(re, im);
        }
        f
    })
}

/// Random real-flagged field: conjugate-symmetric, empty unpaired row.
fn real_field_strategy() -> impl Strategy<Value = SpectralField> {
    field_strategy().prop_map(|f| {
        let g = f.grid().clone();
        let p = g.n_x1();
        let q = g.n_cols();
        let mut out = SpectralField::zeros(&g);
        for j in 1..p {
            for c in 0..q {
                let jr = p - j;
                let cr = q - 1 - c;
                let z = f.at(j, c);
                if (j, c) < (jr, cr) {
                    out.coeffs_mut()[(j, c)] = z;
                    out.coeffs_mut()[(jr, cr)] = z.conj();
                } else if (j, c) == (jr, cr) {
                    out.coeffs_mut()[(j, c)] = Complex64::new(z.re, 0.0);
                }
            }
        }
        out.set_real_flag(true);
        out
    })
}

proptest! {
    #[test]
    fn dispersion_odd_in_first_argument(xi in -100.0..100.0f64, n in -64i64..64) {
        prop_assert_eq!(dispersion(-xi, n), -dispersion(xi, n));
    }

    #[test]
    fn dyadic_brackets_its_argument(x in 1e-6..1e9f64) {
        let d = dyadic_value(x);
        prop_assert!(d <= x.max(1.0) && (x < 2.0 * d || x < 2.0));
        let du = dyadic_value_unfloored(x);
        prop_assert!(du <= x && x < 2.0 * du);
    }

    #[test]
    fn triples_sum_to_zero_and_delta_flips_sign(
        nu in -50.0..50.0f64, k2 in -40i64..40, zeta in -50.0..50.0f64, m2 in -40i64..40
    ) {
        let t = FrequencyTriple::new(nu, k2, zeta, m2);
        prop_assert_eq!(t.nu + t.zeta + t.xi, 0.0);
        prop_assert_eq!(t.k2 + t.m2 + t.n2, 0);
        // mirroring the first components flips the resonance function
        let m = FrequencyTriple::new(-nu, k2, -zeta, m2);
        prop_assert!((triple_delta(&m) + triple_delta(&t)).abs() <= 1e-9 * triple_delta(&t).abs().max(1.0));
        // thetas are invariant under that mirror
        let a = thetas(&t);
        let b = thetas(&m);
        for i in 0..3 {
            prop_assert_eq!(a[i], b[i]);
        }
    }

    #[test]
    fn propagation_is_isometry_and_group(f in field_strategy(), t1 in -2.0..2.0f64, t2 in -2.0..2.0f64) {
        let once = propagate_linear(&propagate_linear(&f, t1), t2);
        let joint = propagate_linear(&f, t1 + t2);
        let mut worst = 0.0f64;
        for (a, b) in once.coeffs().iter().zip(joint.coeffs()) {
            worst = worst.max((a - b).norm());
        }
        prop_assert!(worst < 1e-11);
        for s in [0.0, 0.7] {
            let n0 = sobolev_norm(&f, s);
            let n1 = sobolev_norm(&joint, s);
            prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1e-12));
        }
    }

    #[test]
    fn product_commutes(a in field_strategy(), b in field_strategy()) {
        let ab = multiply_fields(&a, &b).unwrap();
        let ba = multiply_fields(&b, &a).unwrap();
        let mut worst = 0.0f64;
        for (x, y) in ab.coeffs().iter().zip(ba.coeffs()) {
            worst = worst.max((x - y).norm());
        }
        prop_assert!(worst < 1e-11);
    }

    #[test]
    fn real_flag_survives_the_calculus(u in real_field_strategy(), v in real_field_strategy(), t in -1.0..1.0f64) {
        prop_assert!(u.conjugate_symmetry_defect() < 1e-12);
        prop_assert!(propagate_linear(&u, t).conjugate_symmetry_defect() < 1e-11);
        prop_assert!(derivative_x1(&u).conjugate_symmetry_defect() < 1e-11);
        let prod = multiply_fields(&u, &v).unwrap();
        prop_assert!(prod.flagged_real());
        prop_assert!(prod.conjugate_symmetry_defect() < 1e-9);
    }

    #[test]
    fn norms_absolutely_homogeneous(f in field_strategy(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let c = Complex64::new(re, im);
        let k = c.norm();
        let scaled = f.scale(c);
        for s in [-0.5, 0.0, 1.0] {
            prop_assert!((sobolev_norm(&scaled, s) - k * sobolev_norm(&f, s)).abs() <= 1e-10 * (1.0 + k));
            prop_assert!((tilde_sobolev_norm(&scaled, s) - k * tilde_sobolev_norm(&f, s)).abs() <= 1e-9 * (1.0 + k));
        }
    }
}
