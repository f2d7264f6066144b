use rayon::prelude::*;
use zk_core::norms::sobolev_norm;
use zk_core::randomize::*;
use zk_core::spectrum::FrequencyGrid;

fn census_grid(k_trunc: i64) -> FrequencyGrid {
    let xi_max = (2 * k_trunc + 6) as f64;
    let n_x1 = (2.0 * xi_max * 4.0) as usize;
    FrequencyGrid::new(xi_max, n_x1, (2 * k_trunc + 6) as usize).unwrap()
}

fn main() {
    let alpha = 0.97;
    let s = 0.55;
    let seeds = 8u64;
    for t_end in [0.05f64, 0.1, 0.25] {
        let mut meds = Vec::new();
        for kt in [8i64, 16, 32] {
            let grid = census_grid(kt);
            let base = power_law_data(&grid, alpha);
            let mut v: Vec<f64> = (0..seeds)
                .into_par_iter()
                .map(|i| {
                    let p = RandomizationParams::new(alpha, 1000 + i, kt).unwrap();
                    let u = randomize_data(&base, &p);
                    sobolev_norm(&first_picard_endpoint_exact(&u, t_end), s)
                })
                .collect();
            v.sort_by(f64::total_cmp);
            meds.push(v[v.len() / 2]);
        }
        println!(
            "T={t_end}: medians {:.4} {:.4} {:.4}  ratios {:.2} {:.2} total {:.2}",
            meds[0], meds[1], meds[2],
            meds[1] / meds[0], meds[2] / meds[1], meds[2] / meds[0]
        );
    }
}
