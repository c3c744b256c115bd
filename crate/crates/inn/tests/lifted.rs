use inn::constructor::{GridDataset, RandomBiLipschitz, TargetMap};
use inn::lifted::construct_f_nn_lifted;
use inn::rng;
use rand::Rng;

#[test]
fn exact_interpolation() {
    for d in [2, 3] {
        for n in [2, 4, 8] {
            let f = RandomBiLipschitz::new(d, 40 + n as u64);
            let data = GridDataset::from_fn(d, n, |x| f.eval(x)).unwrap();
            let map = construct_f_nn_lifted(&data).unwrap();
            let res = map.interpolation_residual(&data).unwrap();
            assert!(res <= 1e-10, "d={d} n={n} residual {res}");
            assert_eq!(map.layer_count(), 4 + 2 * data.len());
        }
    }
}

#[test]
fn identity_data_certificate() {
    let data = GridDataset::from_fn(2, 2, |x| x.to_vec()).unwrap();
    let map = construct_f_nn_lifted(&data).unwrap();
    let lip = map.lip_inv_estimate;
    assert!((lip - 1.0).abs() < 1e-12);
    let expected = (4.0 * 2.0 / 1.0) * 2f64.sqrt() * (1.0 + 6.0 / (lip * 2.0));
    assert!((map.certificate.product_forward - expected).abs() < 1e-12 * expected);
    assert!(map.interpolation_residual(&data).unwrap() <= 1e-10);
}

#[test]
fn inverse_recovers_grid_points() {
    let f = RandomBiLipschitz::new(2, 3);
    let data = GridDataset::from_fn(2, 4, |x| f.eval(x)).unwrap();
    let map = construct_f_nn_lifted(&data).unwrap();
    for i in 0..data.len() {
        let x = map.inverse(&data.y[i]).unwrap();
        let e = x.iter().zip(data.x(i)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(e <= 1e-9);
    }
}

#[test]
fn inner_round_trip() {
    let f = RandomBiLipschitz::new(3, 8);
    let data = GridDataset::from_fn(3, 2, |x| f.eval(x)).unwrap();
    let map = construct_f_nn_lifted(&data).unwrap();
    let inner = map.inner();
    let mut r = rng::stream(2, 0);
    for _ in 0..1000 {
        let z: Vec<f64> = (0..8).map(|_| r.random_range(-0.5..1.5)).collect();
        let back = inner.inverse(&inner.forward(&z).unwrap()).unwrap();
        assert!(z.iter().zip(&back).all(|(a, b)| (a - b).abs() <= 1e-9));
    }
}

#[test]
fn off_grid_forward_is_rejected_but_relaxed_works() {
    let f = RandomBiLipschitz::new(2, 3);
    let data = GridDataset::from_fn(2, 4, |x| f.eval(x)).unwrap();
    let map = construct_f_nn_lifted(&data).unwrap();
    let x = [0.1, 0.13];
    assert!(map.relaxed_forward(&x).is_ok());
    // the control coordinate only vanishes at grid images
    assert!(map.forward(&x).is_err());
}

#[test]
fn save_load_round_trip() {
    let data = GridDataset::from_fn(2, 2, |x| vec![x[0] + 0.1 * x[1], x[1]]).unwrap();
    let map = construct_f_nn_lifted(&data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lifted.json");
    map.save(&p).unwrap();
    assert_eq!(inn::lifted::LiftedMap::load(&p).unwrap(), map);
}
