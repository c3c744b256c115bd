use inn::pca::{Method, PcaBasis};
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng;

fn random_data(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut r = inn::rng::stream(seed, 11);
    // decaying column scales give a well-separated spectrum
    Array2::from_shape_fn((n, dim), |(_, j)| r.random_range(-1.0..1.0) * 0.6f64.powi(j as i32) + 0.1)
}

fn projector(b: &PcaBasis) -> Array2<f64> {
    b.eigvecs.t().dot(&b.eigvecs)
}

#[test]
fn two_point_oracle() {
    // samples (3, 0) and (0, 1): covariance diag(9/2, 1/2)
    let u = array![[3.0, 0.0], [0.0, 1.0]];
    let b = PcaBasis::fit(u.view(), 1).unwrap();
    assert!((b.eigvals[0] - 4.5).abs() < 1e-14);
    assert!((b.eigvals[1] - 0.5).abs() < 1e-14);
    assert!((b.eigvecs[[0, 0]].abs() - 1.0).abs() < 1e-14);
    assert!((b.tail_sum() - 0.5).abs() < 1e-14);
    assert!((b.energy_fraction() - 0.9).abs() < 1e-14);
    // mean ‖u‖⁴ = (81 + 1)/2, Σλ² = 20.25 + 0.25
    assert!((b.c_nu - (41.0f64 - 20.5).sqrt()).abs() < 1e-12);
}

#[test]
fn save_load_is_exact() {
    let u = random_data(20, 7, 3);
    let b = PcaBasis::fit(u.view(), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("basis.json");
    b.save(&p).unwrap();
    assert_eq!(PcaBasis::load(&p).unwrap(), b);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn reconstruction_error_equals_tail(n in 3usize..30, dim in 2usize..14, seed in 0u64..10_000, frac in 0.0f64..1.0) {
        let u = random_data(n, dim, seed);
        let d = 1 + ((n.min(dim) - 1) as f64 * frac) as usize;
        let b = PcaBasis::fit(u.view(), d).unwrap();
        let mse = b.reconstruction_mse(u.view()).unwrap();
        let tail = b.tail_sum();
        let total: f64 = b.eigvals.iter().sum();
        prop_assert!((mse - tail).abs() <= 1e-9 * tail + 1e-12 * total, "mse {mse:e} tail {tail:e}");
    }

    #[test]
    fn gram_and_covariance_agree(n in 3usize..20, dim in 2usize..12, seed in 0u64..10_000) {
        let u = random_data(n, dim, seed);
        let d = 1.max(n.min(dim) / 2);
        let g = PcaBasis::fit_with(u.view(), d, Method::Gram).unwrap();
        let c = PcaBasis::fit_with(u.view(), d, Method::Covariance).unwrap();
        let scale = g.eigvals[0];
        for (a, b) in g.eigvals.iter().zip(&c.eigvals) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
        // the leading subspaces match when the cut has a gap
        if g.eigvals.len() == d || g.eigvals[d - 1] - g.eigvals[d] > 1e-6 * scale {
            prop_assert!((projector(&g) - projector(&c)).iter().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn orthonormal_and_adjoint(n in 3usize..25, dim in 2usize..12, seed in 0u64..10_000) {
        let u = random_data(n, dim, seed);
        let d = n.min(dim);
        let b = PcaBasis::fit(u.view(), d).unwrap();
        let gram = b.eigvecs.dot(&b.eigvecs.t());
        prop_assert!((gram - Array2::<f64>::eye(d)).iter().all(|v| v.abs() < 1e-12));
        let mut r = inn::rng::stream(seed, 2);
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let lhs: f64 = b.encode(&x).unwrap().iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&b.decode(&v).unwrap()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
        let w = b.weight_vector().unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(b.eigvals.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn truncation_matches_refit(n in 4usize..20, dim in 3usize..10, seed in 0u64..10_000) {
        let u = random_data(n, dim, seed);
        let full = PcaBasis::fit(u.view(), n.min(dim)).unwrap();
        let t = full.truncate(2).unwrap();
        let direct = PcaBasis::fit(u.view(), 2).unwrap();
        prop_assert!((t.tail_sum() - direct.tail_sum()).abs() < 1e-12 * full.eigvals[0]);
        prop_assert!((projector(&t) - projector(&direct)).iter().all(|v| v.abs() < 1e-6));
    }
}
