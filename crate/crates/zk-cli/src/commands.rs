//! Subcommand implementations. Outputs are plain CSV tables with
//! deterministic row order; identical configs and seeds give byte-identical
//! files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use zk_core::counterexamples as cx;
use zk_core::io as zkio;
use zk_core::measure::{
    a_set_bounds, a_set_measure, bilinear_constant, level_set_integral, BilinearGeometry,
    BilinearVariant, FixedFrequencies, SquareRegion, ThetaBinding,
};
use zk_core::norms::{sobolev_norm, tilde_sobolev_norm, xsb_norm, ysb_norm, zsb_norm, NormParams};
use zk_core::randomize::{
    expected_randomized_hs_sq, first_picard_remainder, generic_constant, power_law_data,
    randomize_data, RandomizationParams,
};
use zk_core::resonance::{
    classify, coro_lower_bound_check, dyadic_profile, localization_check, sample_annulus_triple,
    sample_census_triple, sample_coro_instance, sample_localization_instance, ClassTag,
    ClassifyConfig, FrequencyTriple, InteractionKind, TimeTriple,
};
use zk_core::rng::CounterRng;
use zk_core::solver::{conserved_report, energy, gaussian_bump, mass, picard_solve, SolverError};
use zk_core::spectrum::{dispersion, FrequencyGrid, SpaceTimeField, Window};

use crate::config::Config;
use crate::{CliError, CxCase, Lemma};

fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    opt.as_ref()
        .ok_or_else(|| CliError::Config(format!("missing config section [{name}]")))
}

fn csv(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn simulate(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let sc = section(&cfg.simulate, "simulate")?;
    let grid = FrequencyGrid::new(sc.xi_max, sc.n_x1, sc.k_max)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let u0 = match &sc.input {
        Some(path) => {
            let mut r = BufReader::new(File::open(path)?);
            let mut f =
                zkio::read_field(&mut r).map_err(|e| CliError::Config(e.to_string()))?;
            f.set_real_flag(true);
            f
        }
        None => gaussian_bump(&grid, sc.amplitude, sc.width),
    };
    let traj = picard_solve(&u0, sc.t_end, sc.dt, sc.max_iter, sc.tol).map_err(|e| match e {
        SolverError::NonConvergence(_) => CliError::Numerical(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;

    let mut w = BufWriter::new(File::create(out.join("trajectory.zkcf"))?);
    zkio::write_trajectory(&mut w, &traj)?;
    let mut w = BufWriter::new(File::create(out.join("endpoint.zkcf"))?);
    zkio::write_field(&mut w, traj.endpoint())?;

    let rep = conserved_report(&traj).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut w = csv(&out.join("conserved.csv"))?;
    writeln!(w, "t,mass,energy")?;
    for (i, st) in traj.states.iter().enumerate() {
        let e = energy(st).map_err(|e| CliError::Numerical(e.to_string()))?;
        writeln!(w, "{},{},{}", i as f64 * traj.dt, mass(st), e)?;
    }
    writeln!(
        w,
        "# mass_drift={} energy_drift={} line_mass_drift={} iterations={}",
        rep.mass_drift, rep.energy_drift, rep.line_mass_drift, traj.meta.iterations
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// norms
// ---------------------------------------------------------------------------

pub fn norms(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let nc = section(&cfg.norms, "norms")?;
    let mut w = csv(&out.join("norms.csv"))?;
    writeln!(w, "norm_name,s,b,gamma,value")?;
    let bytes = std::fs::read(&nc.input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", nc.input)))?;
    if let Ok(field) = zkio::read_field(&mut bytes.as_slice()) {
        for &s in &nc.s_list {
            writeln!(w, "sobolev,{s},0,0,{}", sobolev_norm(&field, s))?;
            writeln!(w, "tilde_sobolev,{s},0,0.5,{}", tilde_sobolev_norm(&field, s))?;
        }
        return Ok(());
    }
    let traj = zkio::read_trajectory(&mut bytes.as_slice())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let b = nc.b.ok_or_else(|| CliError::Config("missing field `b` in [norms]".into()))?;
    let stf = SpaceTimeField::from_time_samples(&traj.states, traj.dt, Window::Hann);
    for &s in &nc.s_list {
        writeln!(w, "xsb,{s},{b},0,{}", xsb_norm(&stf, &NormParams::x(s, b)))?;
        writeln!(w, "ysb,{s},{b},0.5,{}", ysb_norm(&stf, s, b))?;
        let z = zsb_norm(&stf, s, b);
        writeln!(w, "zsb,{s},{b},0.5,{}", z.z)?;
        writeln!(w, "zsb_sup,{s},{b},0.5,{}", z.linf)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn kind_name(tag: &ClassTag) -> (&'static str, f64) {
    match tag {
        ClassTag::MInteraction { m, kind: InteractionKind::First } => ("first", *m),
        ClassTag::MInteraction { m, kind: InteractionKind::Second } => ("second", *m),
        ClassTag::Bad => ("bad", 0.0),
        ClassTag::OutOfRange => ("out_of_range", 0.0),
    }
}

pub fn classify_cmd(cfg: &Config, out: &Path, seed: u64) -> Result<(), CliError> {
    let cc = section(&cfg.classify, "classify")?;
    let mut config = ClassifyConfig::standard();
    if let Some(beta) = cc.beta {
        config = config.with_beta(beta);
    }
    let mut w = csv(&out.join("classify.csv"))?;
    writeln!(w, "n_min,M,kind,count")?;
    match cc.mode.as_str() {
        "triple" => {
            let need = |v: Option<f64>, k: &str| {
                v.ok_or_else(|| CliError::Config(format!("missing field `{k}` in [classify]")))
            };
            let nu = need(cc.nu, "nu")?;
            let zeta = need(cc.zeta, "zeta")?;
            let k2 =
                cc.k2.ok_or_else(|| CliError::Config("missing field `k2` in [classify]".into()))?;
            let m2 =
                cc.m2.ok_or_else(|| CliError::Config("missing field `m2` in [classify]".into()))?;
            let t = FrequencyTriple::new(nu, k2, zeta, m2);
            let outcome = classify(&t, &config);
            let (kind, m) = kind_name(&outcome.tag);
            writeln!(w, "{},{},{},1", outcome.n_min, m, kind)?;
        }
        "census" => {
            let n_min = cc
                .n_min
                .ok_or_else(|| CliError::Config("missing field `n_min` in [classify]".into()))?;
            let samples = cc
                .samples
                .ok_or_else(|| CliError::Config("missing field `samples` in [classify]".into()))?;
            let mut counts: std::collections::BTreeMap<(String, u64), usize> =
                std::collections::BTreeMap::new();
            let mut rng = CounterRng::keyed(seed, &[1]);
            for _ in 0..samples {
                let t = sample_census_triple(&mut rng, n_min);
                let outcome = classify(&t, &config);
                let (kind, m) = kind_name(&outcome.tag);
                *counts.entry((kind.to_string(), m.to_bits())).or_default() += 1;
            }
            for ((kind, mbits), count) in counts {
                writeln!(w, "{},{},{},{}", n_min, f64::from_bits(mbits), kind, count)?;
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "classify mode must be `census` or `triple`, got `{other}`"
            )))
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// verify-lemma
// ---------------------------------------------------------------------------

pub fn verify_lemma(cfg: &Config, out: &Path, seed: u64, lemma: Lemma) -> Result<(), CliError> {
    let vc = section(&cfg.verify_lemma, "verify-lemma")?;
    match lemma {
        Lemma::Localization => {
            let samples = vc.samples.unwrap_or(100_000);
            let failures: usize = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = CounterRng::keyed(seed, &[10, i as i64]);
                    let (w1, w2, w3, eps) = sample_localization_instance(&mut rng);
                    match localization_check(w1, w2, w3, eps) {
                        Ok(true) => 0usize,
                        _ => 1,
                    }
                })
                .sum();
            let mut w = csv(&out.join("lemma_localization.csv"))?;
            writeln!(w, "lemma,samples,failures")?;
            writeln!(w, "localization,{samples},{failures}")?;
            if failures > 0 {
                return Err(CliError::Numerical(format!("{failures} localization failures")));
            }
        }
        Lemma::Coro => {
            let samples = vc.samples.unwrap_or(100_000);
            let c_big = 4096.0;
            let results: Vec<(usize, usize)> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = CounterRng::keyed(seed, &[11, i as i64]);
                    for _ in 0..64 {
                        if let Some(t) = sample_coro_instance(&mut rng, c_big) {
                            return match coro_lower_bound_check(&t, c_big) {
                                Ok(true) => (1, 0),
                                _ => (1, 1),
                            };
                        }
                    }
                    (0, 0)
                })
                .collect();
            let accepted: usize = results.iter().map(|r| r.0).sum();
            let failures: usize = results.iter().map(|r| r.1).sum();
            let mut w = csv(&out.join("lemma_coro.csv"))?;
            writeln!(w, "lemma,samples,failures")?;
            writeln!(w, "coro,{accepted},{failures}")?;
            if failures > 0 {
                return Err(CliError::Numerical(format!("{failures} lower-bound failures")));
            }
        }
        Lemma::Sweden => {
            let profiles = vc.profiles.unwrap_or(20);
            let lambdas = vc.lambdas.unwrap_or(50);
            let delta = vc.delta.unwrap_or(0.05);
            let mut w = csv(&out.join("lemma_level_set.csv"))?;
            writeln!(w, "bound_name,N,M,L1,L2,empirical_constant")?;
            let mut rng = CounterRng::keyed(seed, &[12]);
            let mut made = 0;
            while made < profiles {
                let n_min = [128.0, 256.0, 512.0, 1024.0][made % 4];
                let t = sample_annulus_triple(&mut rng, n_min);
                let tt = TimeTriple::on_dispersion_surface(&t);
                let p = dyadic_profile(&t, &tt);
                if p.m[2] <= p.m_min(2) && p.n_star[2] == 1.0 {
                    continue;
                }
                let fixed = FixedFrequencies { xi: t.xi, n2: t.n2, m2: t.m2 };
                let d0 = zk_core::resonance::triple_delta(&t);
                let mut c_emp = 0.0_f64;
                for li in 0..lambdas {
                    let lam = d0 + (li as f64 - lambdas as f64 / 2.0) * n_min;
                    let v = level_set_integral(lam, &p, &fixed, delta)
                        .map_err(|e| CliError::Numerical(e.to_string()))?;
                    c_emp = c_emp.max(v * p.n_max() * p.m[2]);
                }
                writeln!(
                    w,
                    "level_set,{},{},{},{},{}",
                    p.n_max(),
                    p.m[2],
                    p.l[0],
                    p.l[1],
                    c_emp
                )?;
                made += 1;
            }
        }
        Lemma::Abounds => {
            let configs = vc.configs.unwrap_or(100);
            let points = vc.points.unwrap_or(200_000);
            let mut w = csv(&out.join("lemma_a_set.csv"))?;
            writeln!(w, "bound_name,N,M,L1,L2,empirical_constant")?;
            let rows: Vec<(f64, f64, f64, f64, f64, bool)> = (0..configs)
                .into_par_iter()
                .map(|i| {
                    let mut rng = CounterRng::keyed(seed, &[13, i as i64]);
                    let n_min = [64.0, 128.0, 256.0][i % 3];
                    let t = sample_annulus_triple(&mut rng, n_min);
                    let tt = TimeTriple::new(
                        dispersion(t.nu, t.k2) + rng.range(-500.0, 500.0),
                        dispersion(t.zeta, t.m2) + rng.range(-500.0, 500.0),
                    );
                    let p = dyadic_profile(&t, &tt);
                    let measure =
                        a_set_measure(t.xi, t.n2, tt.tau, &p, ThetaBinding::Shell, points, &mut rng);
                    let bounds = a_set_bounds(&p, ThetaBinding::Shell);
                    let ok = measure <= bounds.minimum();
                    (p.n_max(), p.m[2], p.l[0], p.l[1], measure / bounds.minimum(), ok)
                })
                .collect();
            let mut violations = 0;
            for (n, m, l1, l2, ratio, ok) in rows {
                writeln!(w, "a_set_min_ratio,{n},{m},{l1},{l2},{ratio}")?;
                if !ok {
                    violations += 1;
                }
            }
            if violations > 0 {
                return Err(CliError::Numerical(format!("{violations} interaction-set violations")));
            }
        }
        Lemma::Bilinear => {
            let draws = vc.draws.unwrap_or(100);
            let resolution = vc.resolution.unwrap_or(6);
            let mut w = csv(&out.join("lemma_bilinear.csv"))?;
            writeln!(w, "bound_name,N,M,L1,L2,empirical_constant")?;
            let mut rng = CounterRng::keyed(seed, &[14]);
            for (i, n) in [128.0, 256.0, 512.0, 1024.0].into_iter().enumerate() {
                let m = 2.0_f64.powi(i as i32 + 2);
                let c = 0.25;
                let side = c * m;
                let l1 = 2.0_f64.powi((i % 3) as i32 + 1);
                let l2 = 4.0;
                let geom = BilinearGeometry {
                    r1: SquareRegion { x0: 0.1 * n, y0: n, side },
                    r2: SquareRegion { x0: -n, y0: -0.5 * n, side },
                    l1,
                    l2,
                    m,
                    n,
                    c,
                };
                let rep = bilinear_constant(&geom, BilinearVariant::General, draws, resolution, &mut rng)
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                writeln!(w, "{},{n},{m},{l1},{l2},{}", rep.bound_name, rep.empirical_constant)?;
                // separated variant on theta-separated squares
                let geom = BilinearGeometry {
                    r1: SquareRegion { x0: 0.05 * n, y0: n, side },
                    r2: SquareRegion { x0: -1.2 * n, y0: -0.5 * n, side },
                    l1,
                    l2,
                    m,
                    n,
                    c,
                };
                let rep = bilinear_constant(&geom, BilinearVariant::Separated, draws, resolution, &mut rng)
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                writeln!(w, "{},{n},{m},{l1},{l2},{}", rep.bound_name, rep.empirical_constant)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// counterexample
// ---------------------------------------------------------------------------

pub fn counterexample(cfg: &Config, out: &Path, case: CxCase) -> Result<(), CliError> {
    let cc = section(&cfg.counterexample, "counterexample")?;
    let case_core = match case {
        CxCase::X => cx::Case::X,
        CxCase::Y => cx::Case::Y,
    };
    let name = match case {
        CxCase::X => "x",
        CxCase::Y => "y",
    };
    let mut w = csv(&out.join(format!("counterexample_{name}.csv")))?;
    writeln!(w, "case,N,s,b,delta,ratio")?;
    for &s in &cc.s_list {
        let scan = cx::ratio_scan(case_core, &cc.n_list, s, cc.b, cc.delta, cc.c_mod, cc.n_quad)
            .map_err(|e| CliError::Config(e.to_string()))?;
        for row in &scan.rows {
            writeln!(w, "{name},{},{},{},{},{}", row.n, row.s, row.b, row.delta, row.ratio)?;
        }
        writeln!(
            w,
            "# case={name} s={s} slope={} intercept={} max_residual={}",
            scan.slope, scan.intercept, scan.max_residual
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// random-experiment
// ---------------------------------------------------------------------------

/// Grid sized so the quadratic interactions of data truncated at `k_trunc`
/// stay inside the band; the sample spacing resolves the unit-scale bumps.
pub fn census_grid(k_trunc: i64) -> FrequencyGrid {
    let xi_max = (2 * k_trunc + 6) as f64;
    let n_x1 = (2.0 * xi_max * 4.0) as usize;
    FrequencyGrid::new(xi_max, n_x1, (2 * k_trunc + 6) as usize).expect("valid census grid")
}

pub fn random_experiment(cfg: &Config, out: &Path, seed: u64) -> Result<(), CliError> {
    let rc = section(&cfg.random_experiment, "random-experiment")?;
    let mut w = csv(&out.join("random_census.csv"))?;
    writeln!(w, "seed,K_trunc,alpha,s,norm_u0,norm_v1")?;

    // variance oracle on the smallest truncation
    let k0 = *rc.k_truncs.iter().min().ok_or_else(|| {
        CliError::Config("field `k_truncs` in [random-experiment] must be nonempty".into())
    })?;
    let var_seeds = rc.variance_seeds.unwrap_or(200);
    let grid0 = census_grid(k0);
    let base0 = power_law_data(&grid0, rc.alpha);
    let s_var = rc.alpha - 1.0 - 0.1;
    let sq: Vec<f64> = (0..var_seeds)
        .into_par_iter()
        .map(|i| {
            let p = RandomizationParams::new(rc.alpha, seed ^ (0x5bd1e995 + i), k0).unwrap();
            let u = randomize_data(&base0, &p);
            let v = sobolev_norm(&u, s_var);
            v * v
        })
        .collect();
    let mc = sq.iter().sum::<f64>() / var_seeds as f64;
    let oracle = expected_randomized_hs_sq(
        &base0,
        &RandomizationParams::new(rc.alpha, 0, k0).unwrap(),
        s_var,
    );
    writeln!(
        w,
        "# variance_check K_trunc={k0} s={s_var} mc_mean={mc} oracle={oracle} rel={}",
        (mc - oracle).abs() / oracle
    )?;
    writeln!(w, "# generic_constant={}", generic_constant(&base0, rc.alpha))?;

    // smoothing census: remainder norms across truncation doublings
    for &kt in &rc.k_truncs {
        let grid = census_grid(kt);
        let base = power_law_data(&grid, rc.alpha);
        let rows: Vec<(u64, f64, f64)> = (0..rc.seeds)
            .into_par_iter()
            .map(|i| {
                let p = RandomizationParams::new(rc.alpha, seed ^ (0x9e3779b9 + i), kt).unwrap();
                let u = randomize_data(&base, &p);
                let n_u = sobolev_norm(&u, rc.s);
                let (_, end) = first_picard_remainder(&u, rc.t_end, rc.n_t)
                    .expect("grids agree by construction");
                (i, n_u, sobolev_norm(&end, rc.s))
            })
            .collect();
        let mut v1: Vec<f64> = rows.iter().map(|r| r.2).collect();
        for (i, n_u, n_v) in rows {
            writeln!(w, "{i},{kt},{},{},{n_u},{n_v}", rc.alpha, rc.s)?;
        }
        v1.sort_by(f64::total_cmp);
        writeln!(w, "# K_trunc={kt} median_v1={}", v1[v1.len() / 2])?;
    }
    Ok(())
}
