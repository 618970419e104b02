use std::sync::Arc;

use eulerlab::spectral::{evaluate_modes, Axis, SpectralField};
use eulerlab::{Grid32, Grid64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn smooth_random(grid: &Arc<Grid64>, seed: u64, kmax: i64) -> SpectralField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for _ in 0..12 {
        let k = [
            rng.random_range(-kmax..=kmax) as f64,
            rng.random_range(-kmax..=kmax) as f64,
            rng.random_range(-kmax..=kmax) as f64,
        ];
        terms.push((k, rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU)));
    }
    SpectralField::scalar_from_fn(grid, |x| {
        terms
            .iter()
            .map(|(k, a, ph)| a * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).cos())
            .sum()
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn round_trip_is_exact_to_roundoff() {
    let g = Grid64::new(32).unwrap();
    let mut f = smooth_random(&g, 1, 10);
    let orig = f.physical().to_vec();
    let scale = f.max_abs().unwrap();
    f.to_fourier().unwrap();
    let mut back = SpectralField::from_fourier(&g, 1, f.fourier().to_vec());
    back.to_physical().unwrap();
    assert!(max_diff(back.physical(), &orig) <= 1e-13 * scale);
}

#[test]
fn parseval_holds() {
    let g = Grid64::new(16).unwrap();
    for seed in 0..5 {
        let mut f = smooth_random(&g, seed, 7);
        let grid_sum = f.grid_sum_squares().unwrap();
        let spectral = f.spectral_sum_squares().unwrap();
        assert!(
            (grid_sum - spectral).abs() <= 1e-12 * grid_sum,
            "seed {seed}"
        );
    }
}

#[test]
fn sine_derivative() {
    let g = Grid64::new(16).unwrap();
    let mut f = SpectralField::scalar_from_fn(&g, |x| x[0].sin());
    let mut d = f.derivative(Axis::X1).unwrap();
    d.to_physical().unwrap();
    let want: Vec<f64> = (0..g.len()).map(|i| g.point(i)[0].cos()).collect();
    assert!(max_diff(d.physical(), &want) <= 1e-12);
}

#[test]
fn taylor_green_cross_derivative() {
    let g = Grid64::new(32).unwrap();
    let mut u1 = SpectralField::scalar_from_fn(&g, |x| x[0].sin() * x[1].cos() * x[2].cos());
    let mut d = u1.derivative(Axis::X2).unwrap();
    d.to_physical().unwrap();
    let want: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            -x[0].sin() * x[1].sin() * x[2].cos()
        })
        .collect();
    assert!(max_diff(d.physical(), &want) <= 1e-12);
}

#[test]
fn mixed_derivatives_commute() {
    let g = Grid64::new(32).unwrap();
    let mut f = smooth_random(&g, 9, 10);
    let mut a = f
        .derivative(Axis::X1)
        .unwrap()
        .derivative(Axis::X2)
        .unwrap();
    let mut b = f
        .derivative(Axis::X2)
        .unwrap()
        .derivative(Axis::X1)
        .unwrap();
    let mut c = f.second_derivative(Axis::X1, Axis::X2).unwrap();
    a.to_physical().unwrap();
    b.to_physical().unwrap();
    c.to_physical().unwrap();
    assert!(max_diff(a.physical(), b.physical()) <= 1e-12);
    assert!(max_diff(a.physical(), c.physical()) <= 1e-12);
}

#[test]
fn manufactured_poisson() {
    let g = Grid64::new(32).unwrap();
    let mut phi = SpectralField::scalar_from_fn(&g, |x| x[0].cos() * (2.0 * x[1]).cos());
    let want = phi.physical().to_vec();
    let mut rhs = phi.laplacian().unwrap();
    for v in rhs.fourier_mut() {
        *v = -*v;
    }
    let mut rec = rhs.solve_poisson().unwrap();
    rec.to_physical().unwrap();
    assert!(max_diff(rec.physical(), &want) <= 1e-12);
}

#[test]
fn poisson_rejects_nonzero_mean() {
    let g = Grid64::new(16).unwrap();
    let mut f = SpectralField::scalar_from_fn(&g, |x| 1.0 + x[0].sin());
    assert!(f.solve_poisson().is_err());
}

#[test]
fn poisson_inverts_negative_laplacian() {
    let g = Grid64::new(32).unwrap();
    let mut f = smooth_random(&g, 4, 15);
    f.to_fourier().unwrap();
    f.fourier_mut()[0] = Default::default();
    f.to_physical().unwrap();
    let want = f.physical().to_vec();
    let mut lap = f.laplacian().unwrap();
    for v in lap.fourier_mut() {
        *v = -*v;
    }
    let mut rec = lap.solve_poisson().unwrap();
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    rec.to_physical().unwrap();
    assert!(max_diff(rec.physical(), &want) <= 1e-11 * scale);
}

#[test]
fn fourier_evaluation_reproduces_band_limited_field() {
    let g = Grid64::new(16).unwrap();
    let f = |x: [f64; 3]| (2.0 * x[0] + x[2]).sin() + 0.5 * (3.0 * x[1]).cos();
    let mut field = SpectralField::scalar_from_fn(&g, f);
    field.to_fourier().unwrap();
    for x in [[0.3, 1.7, 5.1], [6.0, 0.01, 2.2]] {
        let v = evaluate_modes(&g, &[field.fourier()], x)[0];
        assert!((v - f(x)).abs() < 1e-12);
    }
}

#[test]
fn single_precision_round_trip() {
    let g = Grid32::new(16).unwrap();
    let mut f = SpectralField::scalar_from_fn(&g, |x| x[0].sin() * x[1].cos());
    let orig = f.physical().to_vec();
    f.to_fourier().unwrap();
    let mut back = SpectralField::from_fourier(&g, 1, f.fourier().to_vec());
    back.to_physical().unwrap();
    let err = back
        .physical()
        .iter()
        .zip(&orig)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    assert!(err < 1e-5);
}

#[test]
fn rejects_bad_sizes() {
    assert!(Grid64::new(17).is_err());
    assert!(Grid64::new(8).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn parseval_for_random_fields(seed in any::<u64>()) {
        let g = Grid64::new(16).unwrap();
        let mut f = smooth_random(&g, seed, 7);
        let a = f.grid_sum_squares().unwrap();
        let b = f.spectral_sum_squares().unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn derivatives_commute_for_random_fields(seed in any::<u64>()) {
        let g = Grid64::new(16).unwrap();
        let mut f = smooth_random(&g, seed, 5);
        let mut a = f.derivative(Axis::X3).unwrap().derivative(Axis::X1).unwrap();
        let mut b = f.derivative(Axis::X1).unwrap().derivative(Axis::X3).unwrap();
        a.to_physical().unwrap();
        b.to_physical().unwrap();
        prop_assert!(max_diff(a.physical(), b.physical()) <= 1e-12);
    }
}
