//! Property tests for the scoring and buffer invariants.

use eder_core::linalg::{cholesky, det_via_cholesky, det_via_lu, gram, l2_normalize, Vector};
use eder_core::replay::{
    rejection_filter, segment_diversity, segment_trajectory, DiversityConfig, ReplayBuffer,
    Segment, Transition,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_unit_columns(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vector> {
    (0..count)
        .map(|_| {
            let entries: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            l2_normalize(&Vector::new(entries).unwrap())
        })
        .collect()
}

/// Random orthonormal set via Gram-Schmidt on Gaussian columns.
fn random_orthonormal_columns(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vector> {
    assert!(dim >= 2 * count, "need headroom to avoid near-dependence");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut candidate: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for existing in &basis {
            let dot: f64 = candidate.iter().zip(existing).map(|(a, b)| a * b).sum();
            for (c, e) in candidate.iter_mut().zip(existing) {
                *c -= dot * e;
            }
        }
        let norm: f64 = candidate.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(candidate.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
        .into_iter()
        .map(|entries| Vector::new(entries).unwrap())
        .collect()
}

fn episode(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Transition> {
    random_unit_columns(rng, len, dim)
        .into_iter()
        .enumerate()
        .map(|(i, embedding)| Transition {
            state_id: i,
            action_id: 0,
            reward: 0.0,
            next_state_id: i + 1,
            done: false,
            embedding,
        })
        .collect()
}

proptest! {
    /// Unit columns bound the determinant into [0, 1] (Hadamard).
    #[test]
    fn determinant_of_unit_columns_stays_in_unit_interval(
        seed in any::<u64>(),
        b in 1usize..=12,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns = random_unit_columns(&mut rng, b, b + 4);
        let kernel = gram(&columns, 0.0).unwrap();
        let det = det_via_cholesky(&kernel).unwrap();
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&det), "det = {det}");
    }

    /// Orthonormal columns reach the maximum determinant of 1.
    #[test]
    fn orthonormal_columns_score_one(seed in any::<u64>(), b in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns = random_orthonormal_columns(&mut rng, b, 2 * b + 2);
        let det = det_via_cholesky(&gram(&columns, 0.0).unwrap()).unwrap();
        prop_assert!((det - 1.0).abs() <= 1e-9, "det = {det}");
    }

    /// A repeated column collapses the determinant to zero.
    #[test]
    fn repeated_column_scores_zero(
        seed in any::<u64>(),
        b in 2usize..=10,
        duplicate in 0usize..10,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut columns = random_unit_columns(&mut rng, b, b + 4);
        let from = duplicate % b;
        let to = (duplicate + 1) % b;
        columns[to] = columns[from].clone();
        let det = det_via_cholesky(&gram(&columns, 0.0).unwrap()).unwrap();
        prop_assert!(det <= 1e-9, "det = {det}");
    }

    /// Both determinant backends agree on random Gram matrices.
    #[test]
    fn determinant_backends_agree(seed in any::<u64>(), b in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns = random_unit_columns(&mut rng, b, b + 8);
        let kernel = gram(&columns, 1e-10).unwrap();
        let c = det_via_cholesky(&kernel).unwrap();
        let l = det_via_lu(&kernel);
        let tolerance = if l.abs() < 1e-6 { 1e-12 } else { 1e-9 * l.abs() };
        prop_assert!((c - l).abs() <= tolerance, "chol {c} vs lu {l}");
    }

    /// The Cholesky factor reconstructs positive-definite inputs.
    #[test]
    fn cholesky_reconstructs_pd_inputs(seed in any::<u64>(), b in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns = random_unit_columns(&mut rng, b, 2 * b + 4);
        let kernel = gram(&columns, 1e-6).unwrap();
        let factor = cholesky(&kernel).unwrap();
        let rebuilt = factor.reconstruct();
        for i in 0..b {
            for j in 0..b {
                prop_assert!((rebuilt.get(i, j) - kernel.get(i, j)).abs() <= 1e-8);
            }
        }
    }

    /// Gram output is exactly symmetric (entries mirrored, not recomputed).
    #[test]
    fn gram_is_exactly_symmetric(seed in any::<u64>(), b in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns = random_unit_columns(&mut rng, b, 6);
        let kernel = gram(&columns, 0.0).unwrap();
        for i in 0..b {
            for j in 0..b {
                prop_assert_eq!(kernel.get(i, j), kernel.get(j, i));
            }
        }
    }

    /// Segmentation tiles every transition exactly once with step b.
    #[test]
    fn segmentation_partitions_the_episode(len in 1usize..=300, b in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(len as u64);
        let transitions = episode(&mut rng, len, 4);
        let segments = segment_trajectory(&transitions, b).unwrap();
        prop_assert_eq!(segments.len(), len.div_ceil(b));
        let mut covered = vec![0usize; len];
        for (i, s) in segments.iter().enumerate() {
            prop_assert_eq!(s.start_index, i * b, "step must equal b");
            for c in &mut covered[s.start_index..s.start_index + s.length] {
                *c += 1;
            }
            if i + 1 < segments.len() {
                prop_assert_eq!(s.length, b);
            }
        }
        prop_assert!(covered.iter().all(|&c| c == 1));
    }

    /// With a fixed admission stream, raising one segment's score can flip
    /// it rejected -> accepted but never the reverse.
    #[test]
    fn rejection_is_monotone_in_the_raised_score(
        scores in prop::collection::vec(0.0f64..10.0, 1..12),
        raise_index in 0usize..12,
        raise_by in 0.1f64..20.0,
        admission_seed in any::<u64>(),
    ) {
        let index = raise_index % scores.len();
        let make_segments = |scores: &[f64]| -> Vec<Segment> {
            scores
                .iter()
                .map(|&q| Segment { start_index: 0, length: 1, diversity: q, accepted: false })
                .collect()
        };
        let cfg = DiversityConfig::default();
        let mut base = make_segments(&scores);
        let mut rng = ChaCha8Rng::seed_from_u64(admission_seed);
        rejection_filter(&mut base, &cfg, &mut rng).unwrap();

        let mut raised_scores = scores.clone();
        raised_scores[index] += raise_by;
        let mut raised = make_segments(&raised_scores);
        let mut rng = ChaCha8Rng::seed_from_u64(admission_seed);
        rejection_filter(&mut raised, &cfg, &mut rng).unwrap();

        prop_assert!(
            !(base[index].accepted && !raised[index].accepted),
            "raising a score must not revoke acceptance"
        );
    }

    /// Diversity scores are backend-independent within 1e-9 relative.
    #[test]
    fn scores_are_backend_independent(seed in any::<u64>(), b in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embeddings = random_unit_columns(&mut rng, b, b + 2);
        let with_cholesky = DiversityConfig { segment_length: b, ..DiversityConfig::default() };
        let with_lu = DiversityConfig { use_cholesky: false, ..with_cholesky.clone() };
        let c = segment_diversity(&embeddings, &with_cholesky).unwrap();
        let l = segment_diversity(&embeddings, &with_lu).unwrap();
        let tolerance = if l.abs() < 1e-6 { 1e-12 } else { 1e-9 * l.abs() };
        prop_assert!((c - l).abs() <= tolerance);
    }

    /// Incremental buffer accounting survives arbitrary insert/evict
    /// interleavings, and cached scores never drift.
    #[test]
    fn buffer_accounting_and_caches_hold(
        lengths in prop::collection::vec(1usize..=12, 1..20),
        capacity in 12usize..40,
        seed in any::<u64>(),
    ) {
        let mut data_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buffer = ReplayBuffer::new(capacity, ChaCha8Rng::seed_from_u64(seed ^ 1));
        let cfg = DiversityConfig { segment_length: 3, ..DiversityConfig::default() };
        for len in lengths {
            buffer.insert_trajectory(episode(&mut data_rng, len, 8), &cfg).unwrap();
            let recomputed = buffer.recompute_diversity_sum();
            let delta = (buffer.total_diversity_sum() - recomputed).abs();
            prop_assert!(delta <= 1e-9 * recomputed.abs().max(1e-3));
            prop_assert!(buffer.len_transitions() <= capacity);
        }
        for trajectory in buffer.trajectories() {
            for s in &trajectory.segments {
                let embeddings: Vec<&Vector> = trajectory.transitions
                    [s.start_index..s.start_index + s.length]
                    .iter()
                    .map(|t| &t.embedding)
                    .collect();
                let rescored = segment_diversity(&embeddings, &cfg).unwrap();
                prop_assert!((rescored - s.diversity).abs() <= 1e-12);
            }
        }
    }
}

/// Replacing any column with a renormalized convex combination of the others
/// makes the set linearly dependent, so the determinant cannot rise.
///
/// Weights are kept away from zero: a near-zero weight makes an intermediate
/// column prefix nearly dependent, which amplifies rounding in later
/// radicands past the non-PSD threshold even though the exact matrix is PSD.
#[test]
fn convex_combination_replacement_never_raises_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..200 {
        let b = 2 + (trial % 7);
        let columns = random_unit_columns(&mut rng, b, b + 4);
        let before = det_via_cholesky(&gram(&columns, 0.0).unwrap()).unwrap();
        let replace = trial % b;
        let mut weights: Vec<f64> = (0..b - 1).map(|_| 0.2 + rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let dim = columns[0].dim();
        let mut combo = vec![0.0; dim];
        let mut w_iter = weights.iter();
        for (i, column) in columns.iter().enumerate() {
            if i == replace {
                continue;
            }
            let w = w_iter.next().unwrap();
            for (acc, x) in combo.iter_mut().zip(column.as_slice()) {
                *acc += w * x;
            }
        }
        let mut replaced = columns.clone();
        replaced[replace] = l2_normalize(&Vector::new(combo).unwrap());
        let after = det_via_cholesky(&gram(&replaced, 0.0).unwrap()).unwrap();
        assert!(
            after <= before + 1e-9,
            "det rose from {before} to {after} at trial {trial}"
        );
    }
}
