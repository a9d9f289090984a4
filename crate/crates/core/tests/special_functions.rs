mod common;

use mpcr_core::special::{noncentral_t_cdf, normal_quantile, t_cdf, t_quantile};

#[test]
fn quadrature_oracle_reproduces_fixture() {
    let v = common::quadrature::noncentral_t_cdf(2.0, 5, 1.5);
    assert!((v - 0.631_449_247_255_671_7).abs() < 1e-11, "{v}");
}

#[test]
fn noncentral_cdf_against_quadrature_grid() {
    let mut worst = 0.0f64;
    for &x in &[-50.0, -8.0, -2.0, -0.5, 0.0, 0.5, 1.7, 4.0, 12.0, 50.0] {
        for &dof in &[1u64, 3, 12, 150, 10_000] {
            for &lambda in &[-40.0, -3.0, 0.0, 2.5] {
                let got = noncentral_t_cdf(x, dof, lambda);
                let want = common::quadrature::noncentral_t_cdf(x, dof, lambda);
                let err = (got - want).abs();
                worst = worst.max(err);
                assert!(err < 1e-8, "x={x} dof={dof} lambda={lambda}: {got} vs {want}");
            }
        }
    }
    println!("worst abs error {worst:e}");
}

#[test]
fn t_quantile_round_trip() {
    for dof in [1u64, 2, 3, 5, 10, 29, 100, 1000, 100_000] {
        for &p in &[1e-6, 0.01, 0.025, 0.1, 0.5, 0.8, 0.95, 0.975, 0.999_99] {
            let q = t_quantile(dof, p).unwrap();
            assert!((t_cdf(q, dof) - p).abs() < 1e-7, "dof={dof} p={p}");
        }
    }
}

#[test]
fn t_quantile_approaches_normal_monotonically() {
    let z = normal_quantile(0.975).unwrap();
    let mut prev = f64::INFINITY;
    for dof in [1u64, 2, 3, 5, 10, 30, 100, 1000, 1_000_000] {
        let q = t_quantile(dof, 0.975).unwrap();
        assert!(q < prev && q > z);
        prev = q;
    }
    assert!((prev - z).abs() < 1e-5);
}

#[test]
fn noncentral_cdf_monotone() {
    for dof in [2u64, 9, 60] {
        let mut prev = 0.0;
        for i in -40..=40 {
            let v = noncentral_t_cdf(i as f64 * 0.25, dof, 1.3);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        let mut prev = 1.0;
        for i in -20..=20 {
            let v = noncentral_t_cdf(0.8, dof, i as f64 * 0.5);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }
}
