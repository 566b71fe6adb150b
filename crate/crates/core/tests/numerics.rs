use dropout_ode::ode::{integrate, Method, SprottB, TimeGrid};
use dropout_ode::polykernel::{loss_and_gradient, loss_mse, Batch, DropoutMask, DropoutRate, NetworkShape, WeightSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fourth-order central difference of the loss along one parameter.
fn numeric_partial(weights: &WeightSet, batch: &Batch, mask: &DropoutMask, idx: usize, eps: f64) -> f64 {
    let at = |delta: f64| {
        let mut w = weights.clone();
        *w.iter_mut().nth(idx).unwrap() += delta;
        loss_mse(&w, batch, mask).unwrap()
    };
    (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps)
}

fn random_instance(rng: &mut ChaCha8Rng) -> (WeightSet, Batch, DropoutMask) {
    let shape = NetworkShape::sprott_default();
    let weights = WeightSet::random_init(shape, rng);
    let n = rng.random_range(1..=8);
    let inputs = (0..n * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
    let targets = (0..n * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
    let rate = DropoutRate::new(rng.random_range(0.0..0.6)).unwrap();
    let mask = DropoutMask::sample(rate, 10, rng);
    (weights, Batch::new(3, 3, inputs, targets).unwrap(), mask)
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (w, batch, mask) = random_instance(&mut rng);
        let (_, grad) = loss_and_gradient(&w, &batch, &mask).unwrap();
        for (idx, &g) in grad.iter().enumerate() {
            let fd = numeric_partial(&w, &batch, &mask, idx, 1e-4);
            let err = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

fn endpoint(method: Method, h: f64) -> Vec<f64> {
    let grid = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
    let substeps = (1.0 / h).round() as u32;
    let method = match method {
        Method::Euler { .. } => Method::Euler { substeps },
        Method::Rk4 { .. } => Method::Rk4 { substeps },
        m => m,
    };
    integrate(&SprottB, &[1.0, 1.0, 1.0], &grid, method).unwrap().state(1).to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Least-squares slope of log error against log step.
fn observed_order(method: Method, reference: &[f64]) -> f64 {
    let steps: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .map(|&h| (h.ln(), max_diff(&endpoint(method, h), reference).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn euler_and_rk4_converge_at_their_orders() {
    let reference = endpoint(Method::Rk4 { substeps: 0 }, 1e-5);
    let euler = observed_order(Method::Euler { substeps: 0 }, &reference);
    let rk4 = observed_order(Method::Rk4 { substeps: 0 }, &reference);
    assert!((euler - 1.0).abs() <= 0.15, "euler slope {euler}");
    assert!((rk4 - 4.0).abs() <= 0.3, "rk4 slope {rk4}");

    // halving the step shrinks the rk4 error by about 16
    let e1 = max_diff(&endpoint(Method::Rk4 { substeps: 0 }, 1e-2), &reference);
    let e2 = max_diff(&endpoint(Method::Rk4 { substeps: 0 }, 5e-3), &reference);
    assert!((e1 / e2).log2() >= 3.7, "ratio {}", e1 / e2);
}

#[test]
fn adaptive_agrees_with_fine_rk4() {
    let grid = TimeGrid::uniform(0.0, 0.01, 1001).unwrap();
    let rk45 = integrate(&SprottB, &[1.0, 1.0, 1.0], &grid, Method::Rk45 { tol: 1e-8 }).unwrap();
    let rk4 = integrate(&SprottB, &[1.0, 1.0, 1.0], &grid, Method::Rk4 { substeps: 100 }).unwrap();
    let diff = max_diff(rk45.values(), rk4.values());
    assert!(diff < 1e-5, "max discrepancy {diff:e}");
    assert_eq!(rk45.grid(), &grid);
    assert_eq!(rk45.grid().times(), grid.times());
}

#[test]
fn adaptive_error_tracks_tolerance() {
    let grid = TimeGrid::uniform(0.0, 5.0, 2).unwrap();
    let oracle = integrate(&SprottB, &[1.0, 1.0, 1.0], &grid, Method::Rk4 { substeps: 500_000 }).unwrap();
    for tol in [1e-4, 1e-6, 1e-8] {
        let run = integrate(&SprottB, &[1.0, 1.0, 1.0], &grid, Method::Rk45 { tol }).unwrap();
        let err = max_diff(run.state(1), oracle.state(1));
        assert!(err < 100.0 * tol, "tol {tol:e}: error {err:e}");
    }
}

#[test]
fn integration_is_deterministic() {
    let grid = TimeGrid::uniform(0.0, 0.1, 101).unwrap();
    let a = integrate(&SprottB, &[0.1, 0.1, -0.1], &grid, Method::default()).unwrap();
    let b = integrate(&SprottB, &[0.1, 0.1, -0.1], &grid, Method::default()).unwrap();
    assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
}
