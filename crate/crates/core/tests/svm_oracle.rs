use molvec_core::eval::{svm_objective, toy_2d, train_linear_svm, train_linear_svm_traced, SvmConfig};

fn grid_optimum(x: &[Vec<f64>], y: &[f64], c: f64) -> (f64, [f64; 3]) {
    let steps: Vec<f64> = (0..=120).map(|i| -3.0 + 0.05 * i as f64).collect();
    let mut best = (f64::INFINITY, [0.0; 3]);
    for &w0 in &steps {
        for &w1 in &steps {
            for &b in &steps {
                let obj = svm_objective(&[w0, w1], b, x, y, c);
                if obj < best.0 {
                    best = (obj, [w0, w1, b]);
                }
            }
        }
    }
    best
}

#[test]
fn trained_objective_is_within_two_percent_of_grid() {
    let (x, y) = toy_2d();
    for c in [1.0, 0.1, 10.0] {
        let cfg = SvmConfig { c, ..SvmConfig::default() };
        let m = train_linear_svm(&x, &y, &cfg).unwrap();
        let trained = svm_objective(&m.w, m.b, &x, &y, c);
        let (grid, _) = grid_optimum(&x, &y, c);
        assert!(trained <= 1.02 * grid, "C={c}: {trained} vs grid {grid}");
    }
}

/// The first few averaged iterates still carry the large early bias steps;
/// from step 10 on the sequence must not go up.
#[test]
fn averaged_objective_is_non_increasing() {
    let (x, y) = toy_2d();
    let (_, trace) = train_linear_svm_traced(&x, &y, &SvmConfig::default()).unwrap();
    assert_eq!(trace.len(), 2000);
    for (i, w) in trace.windows(2).enumerate().skip(9) {
        assert!(w[1] <= w[0] + 1e-12, "step {}: {} -> {}", i + 2, w[0], w[1]);
    }
    assert!(trace[1999] < trace[0]);
}

#[test]
fn training_is_seed_deterministic_with_minibatches() {
    let (x, y) = toy_2d();
    let cfg = SvmConfig {
        batch_size: Some(3),
        seed: 11,
        ..SvmConfig::default()
    };
    assert_eq!(train_linear_svm(&x, &y, &cfg).unwrap(), train_linear_svm(&x, &y, &cfg).unwrap());
}
