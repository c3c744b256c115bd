use inn::pde::kl::weight;
use inn::pde::{generate, sample_xi, series_oracle, solve, PairDataset, SolveSpec, KL_TERMS};

fn center_error(cells: usize) -> f64 {
    let spec = SolveSpec::with_cells(cells);
    let sol = solve(&vec![1.0; spec.nodes()], &spec).unwrap();
    (sol.at(&spec, cells / 2, cells / 2) - series_oracle(0.5, 0.5, 2000)).abs()
}

#[test]
fn convergence_order() {
    let e: Vec<f64> = [16, 32, 64].iter().map(|&c| center_error(c)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "order {order} from {e:?}");
    }
}

#[test]
fn oracle_center_value() {
    // truncation error at the center decays like terms⁻²
    let exact = 0.0736713532814;
    assert!((series_oracle(0.5, 0.5, 200) - exact).abs() < 1e-7);
    assert!((series_oracle(0.5, 0.5, 4000) - exact).abs() < 1e-10);
}

#[test]
fn scaling_and_monotonicity() {
    let spec = SolveSpec::with_cells(20);
    let one = solve(&vec![1.0; spec.nodes()], &spec).unwrap();
    let two = solve(&vec![2.0; spec.nodes()], &spec).unwrap();
    for (a, b) in one.y.iter().zip(&two.y) {
        assert!((a - 2.0 * b).abs() <= 1e-10);
        assert!(b <= a);
    }
    assert!(one.energy > 0.0);
    let xi = sample_xi(1, 0);
    let mut u = xi.on_grid(20);
    let base = solve(&u, &spec).unwrap();
    u.iter_mut().for_each(|v| *v += 0.5);
    let bigger = solve(&u, &spec).unwrap();
    assert!(base.y.iter().zip(&bigger.y).all(|(a, b)| *b <= *a + 1e-14));
}

#[test]
fn kl_mean_matches_clt() {
    let (x1, x2) = (0.3, 0.7);
    let mut var = 0.0;
    for i in 1..=KL_TERMS {
        for j in 1..=KL_TERMS {
            let c = weight(i, j) * (i as f64 * std::f64::consts::PI * x1).cos() * (j as f64 * std::f64::consts::PI * x2).cos();
            var += c * c;
        }
    }
    let m = 10_000;
    let mean = (0..m).map(|k| sample_xi(77, k).eval(x1, x2)).sum::<f64>() / m as f64;
    let sigma = (var / m as f64).sqrt();
    assert!((mean - 2.0).abs() <= 3.0 * sigma, "mean {mean} sigma {sigma}");
}

#[test]
fn dataset_properties() {
    let spec = SolveSpec::with_cells(16);
    let ds = generate(100, 5, &spec).unwrap();
    let m = spec.cells + 1;
    for row in ds.y.rows() {
        for a in 0..m {
            for b in 0..m {
                let v = row[a * m + b];
                if a == 0 || b == 0 || a == m - 1 || b == m - 1 {
                    assert_eq!(v, 0.0);
                } else {
                    assert!(v > 0.0);
                }
            }
        }
    }
}

#[test]
fn dataset_bytes_independent_of_threads() {
    let spec = SolveSpec::with_cells(10);
    let dir = tempfile::tempdir().unwrap();
    let mut blobs = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let ds = pool.install(|| generate(10, 3, &spec)).unwrap();
        let p = dir.path().join(format!("d{threads}.json"));
        ds.save(&p).unwrap();
        blobs.push(std::fs::read(p.with_extension("bin")).unwrap());
        let back = PairDataset::load(&p).unwrap();
        assert_eq!(back, ds);
    }
    assert_eq!(blobs[0], blobs[1]);
}
