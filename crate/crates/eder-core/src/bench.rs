//! Determinant-backend microbenchmarks.
//!
//! Times the Cholesky determinant against the LU oracle on random Gram
//! matrices of normalized columns, and times bulk segment scoring for the
//! linear-growth check. Per-call figures are medians over trials, with each
//! trial repeated enough times that the clock resolution stops mattering.

use std::hint::black_box;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{det_via_cholesky, det_via_lu, gram, l2_normalize, KernelMatrix, Vector};
use crate::replay::{segment_diversity, DiversityConfig};
use crate::rng::splitmix64;

/// Timing and agreement figures for one matrix order.
#[derive(Debug, Clone)]
pub struct DetBenchRow {
    pub order: usize,
    /// Median ns per `det_via_cholesky` call.
    pub cholesky_ns: f64,
    /// Median ns per `det_via_lu` call.
    pub lu_ns: f64,
    /// cholesky_ns / lu_ns.
    pub ratio: f64,
    /// Worst per-matrix disagreement `|chol - lu| / max(|lu|, 1e-6)`; the
    /// floor folds the near-zero determinant regime into an absolute scale.
    pub max_disagreement: f64,
}

fn random_unit_columns(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vector> {
    (0..count)
        .map(|_| {
            let entries: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            l2_normalize(&Vector::new(entries).expect("gaussian entries are finite"))
        })
        .collect()
}

/// A random Gram matrix of `order` normalized `dim`-dimensional columns.
pub fn random_gram(rng: &mut ChaCha8Rng, order: usize, dim: usize) -> KernelMatrix {
    let columns = random_unit_columns(rng, order, dim);
    gram(&columns, 0.0).expect("columns share a dimension")
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    samples[samples.len() / 2]
}

/// Benchmarks both determinant backends at each order in `orders`.
pub fn bench_determinant(
    orders: &[usize],
    trials: usize,
    dim: usize,
    seed: u64,
) -> Vec<DetBenchRow> {
    use rand::SeedableRng;
    let mut rows = Vec::with_capacity(orders.len());
    for &order in orders {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ order as u64));
        let matrices: Vec<KernelMatrix> = (0..trials)
            .map(|_| random_gram(&mut rng, order, dim))
            .collect();
        // Repeat each timed call so one measurement spans well over the
        // clock granularity even at small orders.
        let reps = (2048 / (order * order)).max(1);
        let mut cholesky_samples = Vec::with_capacity(trials);
        let mut lu_samples = Vec::with_capacity(trials);
        let mut max_disagreement = 0.0f64;
        for m in &matrices {
            // Agreement check first; it also warms the matrix so neither
            // timed section pays the first-touch cache misses.
            let c = det_via_cholesky(m).expect("gram matrices are PSD");
            let l = det_via_lu(m);
            max_disagreement = max_disagreement.max((c - l).abs() / l.abs().max(1e-6));

            let t0 = Instant::now();
            for _ in 0..reps {
                black_box(det_via_cholesky(black_box(m)).expect("gram matrices are PSD"));
            }
            cholesky_samples.push(t0.elapsed().as_nanos() as f64 / reps as f64);

            let t1 = Instant::now();
            for _ in 0..reps {
                black_box(det_via_lu(black_box(m)));
            }
            lu_samples.push(t1.elapsed().as_nanos() as f64 / reps as f64);
        }
        let cholesky_ns = median(cholesky_samples);
        let lu_ns = median(lu_samples);
        rows.push(DetBenchRow {
            order,
            cholesky_ns,
            lu_ns,
            ratio: cholesky_ns / lu_ns,
            max_disagreement,
        });
    }
    rows
}

/// Wall time to score `n_segments` random segments of `order` embeddings
/// each (Gram construction plus Cholesky determinant), generation excluded.
pub fn time_segment_scoring(
    n_segments: usize,
    order: usize,
    dim: usize,
    seed: u64,
) -> std::time::Duration {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let segments: Vec<Vec<Vector>> = (0..n_segments)
        .map(|_| random_unit_columns(&mut rng, order, dim))
        .collect();
    let cfg = DiversityConfig {
        segment_length: order,
        ..DiversityConfig::default()
    };
    let t0 = Instant::now();
    for embeddings in &segments {
        black_box(segment_diversity(embeddings, &cfg).expect("valid embeddings"));
    }
    t0.elapsed()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_order_backends_agree_exactly() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = random_gram(&mut rng, 1, 8);
            let c = det_via_cholesky(&m).unwrap();
            let l = det_via_lu(&m);
            // Order 1: both backends reduce to the single entry.
            assert_eq!(l, m.get(0, 0));
            assert!((c - l).abs() <= 1e-15);
        }
    }

    #[test]
    fn bench_rows_report_agreement() {
        let rows = bench_determinant(&[2, 4], 50, 16, 9);
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert!(
                row.max_disagreement <= 1e-9,
                "disagreement {}",
                row.max_disagreement
            );
            assert!(row.cholesky_ns > 0.0 && row.lu_ns > 0.0);
        }
    }
}
