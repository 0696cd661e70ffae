use std::time::Instant;

use bivtail::gpd::{gpd_quantile, GpdParams};
use bivtail::threshold::{default_grid, select_threshold, EXCEEDANCE_FLOOR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Minima that are exactly GPD below `u_star` (10% of them) and half-normal above.
fn piecewise_minima(n: usize, u_star: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tail = GpdParams::shape_scale(-0.2, 5.0).unwrap();
    let bulk: Normal<f64> = Normal::new(0.0, 3.0).unwrap();
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.1 {
                u_star - gpd_quantile(rng.random::<f64>(), &tail).unwrap()
            } else {
                u_star + bulk.sample(&mut rng).abs()
            }
        })
        .collect()
}

#[test]
fn finds_the_generator_threshold() {
    let u_star = -15.0;
    let minima = piecewise_minima(1_000_000, u_star, 17);
    let grid = default_grid(&minima, 0.001, 0.25, 100).unwrap();
    let step = grid[0] - grid[1];
    let t = Instant::now();
    let sel = select_threshold(&[(2, minima.clone()), (3, minima)], &grid, 0.95, EXCEEDANCE_FLOOR).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let u = sel.require().unwrap();
    eprintln!("u_opt {u} truth {u_star} step {step} elapsed {elapsed:.2}s");
    assert!((u - u_star).abs() <= 2.0 * step);
}
