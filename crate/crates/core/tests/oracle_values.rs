use fqfold::oracle::{disk_scan, lambda_star_1d, lambda_star_1d_with, lambda_star_disk, time_map_roots};
use fqfold::saddle::{saddle_search, SaddleConfig};
use fqfold::{Grid64, Params64, Shape};

const FROZEN: f64 = 9.045_635_364_563_7;

fn params() -> Params64 {
    Params64::new(0.5, 3.0).unwrap()
}

#[test]
fn interval_regression_value() {
    let p = params();
    let t = lambda_star_1d(1.0, &p, 1e-13).unwrap();
    assert!((t.lambda_star_oracle - FROZEN).abs() < 1e-10);
    assert!((t.rho_at_fold - 1.614_99).abs() < 1e-4);
    assert!(t.rows.iter().all(|r| r.2 > 0.0 && r.2 <= 0.5 + 1e-9));
    let coarse = lambda_star_1d_with(1.0, &p, 1e-13, 2e-13).unwrap();
    assert!((coarse.lambda_star_oracle - t.lambda_star_oracle).abs() < 1e-12 * FROZEN);
    let csv = t.to_csv();
    assert!(csv.starts_with("rho,lambda,T\n"));
    assert_eq!(csv.lines().count(), t.rows.len() + 1);
}

#[test]
fn fold_structure_in_the_time_map() {
    let p = params();
    assert_eq!(time_map_roots(1.0, 0.99 * FROZEN, &p, 1e-13).unwrap().len(), 2);
    assert!(time_map_roots(1.0, 1.01 * FROZEN, &p, 1e-13).unwrap().is_empty());
    let long = lambda_star_1d(2.0, &p, 1e-10).unwrap();
    assert!(long.lambda_star_oracle < FROZEN);
}

#[test]
fn disk_shooting() {
    let p = params();
    let d = lambda_star_disk(0.5, &p, 1e-10).unwrap();
    assert!(lambda_star_disk(1.0, &p, 1e-8).unwrap() < d);

    // one interior maximum of the first zero over ρ at λ = 0.9λ*
    let rho: Vec<f64> = (0..60).map(|k| 10f64.powf(-3.0 + 4.0 * k as f64 / 59.0)).collect();
    let scan = disk_scan(0.9 * d, &p, &rho).unwrap();
    let ups = scan.windows(2).filter(|w| w[1].1 > w[0].1).count();
    let k = scan.windows(2).position(|w| w[1].1 < w[0].1).unwrap();
    assert!(scan[k + 1..].windows(2).all(|w| w[1].1 < w[0].1));
    assert_eq!(ups, k);

    // staircase boundary: first-order in h, 1.15% at resolution 128
    let err = |res: usize| {
        let g = Grid64::masked_2d(&Shape::Disk { radius: 0.5 }, res).unwrap();
        (saddle_search(&g, &p, &SaddleConfig::default()).unwrap().lambda_star - d) / d
    };
    let (e64, e128) = (err(64), err(128));
    assert!(e128.abs() < 0.015, "rel {e128:e}");
    assert!(e128.abs() < 0.6 * e64.abs());
}
