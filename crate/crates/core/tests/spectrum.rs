use nalgebra::{DMatrix, SymmetricEigen};
use quenchlab_core::domain::DomainDescriptor;
use quenchlab_core::spectrum::{
    embedding_ratio, first_eigenpair, sobolev_constant, verify_positivity, SobolevMethod, EIGEN_TOL,
};
use quenchlab_core::Discretization;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn series(x: f64, order: u32, alternating: bool) -> f64 {
    // sum_m (±1)^m (x/2)^{2m+order} / (m! (m+order)!)
    let half = x / 2.0;
    let mut term = half.powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..60 {
        let m = f64::from(m);
        term *= half * half / (m * (m + f64::from(order)));
        sum += if alternating && (m as u64) % 2 == 1 {
            -term
        } else {
            term
        };
    }
    sum
}

fn clamped_disk_wavenumber() -> f64 {
    let f = |k: f64| {
        series(k, 0, true) * series(k, 1, false) + series(k, 0, false) * series(k, 1, true)
    };
    let (mut lo, mut hi) = (2.5, 3.8);
    assert!(f(lo) * f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn bessel_oracle_sanity() {
    // J0 first zero and I0(1)
    assert!(series(2.404_825_557_695_773, 0, true).abs() < 1e-12);
    assert!((series(1.0, 0, false) - 1.266_065_877_752_008_4).abs() < 1e-14);
    let k = clamped_disk_wavenumber();
    assert!((k - 3.1962).abs() < 1e-4, "{k}");
}

#[test]
fn disk_eigenvalue_converges_at_second_order() {
    let exact = clamped_disk_wavenumber().powi(4);
    let mut errors = Vec::new();
    for n in [32, 64, 128, 256] {
        let d = Discretization::new(&DomainDescriptor::ball(2, 1.0, n)).unwrap();
        let e = first_eigenpair(&d.bilaplacian, EIGEN_TOL).unwrap();
        assert!(verify_positivity(&e, &d.grid).pass);
        let norm = d.inner(&e.phi1, &e.phi1).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        errors.push((e.lambda1 - exact).abs());
    }
    assert!(errors[3] / exact < 5e-3);
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "order {order}");
    }
}

#[test]
fn ball_eigenvalue_scales_with_radius() {
    let e1 = {
        let d = Discretization::new(&DomainDescriptor::ball(3, 1.0, 64)).unwrap();
        first_eigenpair(&d.bilaplacian, EIGEN_TOL).unwrap().lambda1
    };
    let e2 = {
        let d = Discretization::new(&DomainDescriptor::ball(3, 2.0, 64)).unwrap();
        first_eigenpair(&d.bilaplacian, EIGEN_TOL).unwrap().lambda1
    };
    assert!((e1 / e2 - 16.0).abs() < 1e-8);
}

fn dense_smallest(d: &Discretization) -> f64 {
    let k = d.bilaplacian.weighted_matrix();
    let w = d.mass();
    let n = w.len();
    let bw = k.bandwidth();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) > bw {
            0.0
        } else {
            k.get(i, j) / (w[i] * w[j]).sqrt()
        }
    });
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn inverse_iteration_matches_dense_solver() {
    for desc in [
        DomainDescriptor::rectangle(1.0, 1.0, 12),
        DomainDescriptor::rectangle(2.0, 1.0, 14),
        DomainDescriptor::ball(2, 1.0, 40),
    ] {
        let d = Discretization::new(&desc).unwrap();
        let e = first_eigenpair(&d.bilaplacian, EIGEN_TOL).unwrap();
        let dense = dense_smallest(&d);
        assert!(
            (e.lambda1 - dense).abs() < 1e-8 * dense,
            "{} vs {dense}",
            e.lambda1
        );
    }
}

#[test]
fn square_eigenvalue_is_near_the_plate_value() {
    // clamped unit square: Λ₁ ≈ 1294.93
    let d = Discretization::new(&DomainDescriptor::rectangle(1.0, 1.0, 48)).unwrap();
    let e = first_eigenpair(&d.bilaplacian, EIGEN_TOL).unwrap();
    assert!((e.lambda1 / 1294.934 - 1.0).abs() < 0.01, "{}", e.lambda1);
}

#[test]
fn sobolev_constant_dominates_random_probes() {
    let d = Discretization::new(&DomainDescriptor::ball(2, 1.0, 64)).unwrap();
    let e = first_eigenpair(&d.bilaplacian, EIGEN_TOL).unwrap();
    let s2 = sobolev_constant(&d, &e, 2.0).unwrap();
    assert_eq!(s2.method, SobolevMethod::RayleighExact);
    assert!((s2.s - e.lambda1.powf(-0.5)).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for r in [3.0, 4.0, 6.0] {
        let s = sobolev_constant(&d, &e, r).unwrap();
        assert!(s.converged);
        let at_phi = embedding_ratio(&d, &e.phi1, r).unwrap();
        assert!(s.ratio >= at_phi * (1.0 - 1e-12));
        for _ in 0..50 {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let w: Vec<f64> = (0..e.phi1.len())
                .map(|i| {
                    let x = i as f64 / 64.0;
                    (1.0 - x * x).powi(2) * (1.0 + a * x * x + b * x.powi(4))
                })
                .collect();
            let ratio = embedding_ratio(&d, &w, r).unwrap();
            assert!(
                ratio <= s.ratio * (1.0 + 1e-9),
                "r={r}: {ratio} > {}",
                s.ratio
            );
        }
    }
}

#[test]
fn sobolev_rejects_exponents_outside_range() {
    let d = Discretization::new(&DomainDescriptor::ball(5, 1.0, 32)).unwrap();
    let e = first_eigenpair(&d.bilaplacian, EIGEN_TOL).unwrap();
    assert!(sobolev_constant(&d, &e, 10.0).is_err());
    assert!(sobolev_constant(&d, &e, 9.0).is_ok());
}
