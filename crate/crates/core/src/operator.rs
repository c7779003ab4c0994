//! Matrix-free linear operators with solve accounting.
//!
//! Forward maps, goal maps and prior covariances enter the library as
//! operator actions rather than matrices; every application is counted so
//! the offline-online contract (zero model solves during optimization) can
//! be asserted mechanically.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// A linear map with an adjoint, applied matrix-free.
pub trait LinearOperator: Send + Sync {
    fn domain_dim(&self) -> usize;
    fn range_dim(&self) -> usize;
    /// `v` has length `domain_dim`; the result has length `range_dim`.
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
    /// `w` has length `range_dim`; the result has length `domain_dim`.
    fn apply_adjoint(&self, w: &DVector<f64>) -> DVector<f64>;
}

struct HandleInner {
    op: Box<dyn LinearOperator>,
    forward_calls: AtomicU64,
    adjoint_calls: AtomicU64,
}

/// Shared, counting wrapper around a [`LinearOperator`].
///
/// Clones share the same operator and the same counters; counter updates are
/// atomic so concurrent applications account exactly one increment per call.
#[derive(Clone)]
pub struct OperatorHandle {
    inner: Arc<HandleInner>,
}

impl OperatorHandle {
    pub fn new(op: impl LinearOperator + 'static) -> Self {
        OperatorHandle {
            inner: Arc::new(HandleInner {
                op: Box::new(op),
                forward_calls: AtomicU64::new(0),
                adjoint_calls: AtomicU64::new(0),
            }),
        }
    }

    pub fn domain_dim(&self) -> usize {
        self.inner.op.domain_dim()
    }

    pub fn range_dim(&self) -> usize {
        self.inner.op.range_dim()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(
            v.len(),
            self.domain_dim(),
            "operator apply: vector length {} does not match domain dim {}",
            v.len(),
            self.domain_dim()
        );
        self.inner.forward_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.op.apply(v)
    }

    pub fn apply_adjoint(&self, w: &DVector<f64>) -> DVector<f64> {
        assert_eq!(
            w.len(),
            self.range_dim(),
            "operator adjoint: vector length {} does not match range dim {}",
            w.len(),
            self.range_dim()
        );
        self.inner.adjoint_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.op.apply_adjoint(w)
    }

    pub fn forward_count(&self) -> u64 {
        self.inner.forward_calls.load(Ordering::Relaxed)
    }

    pub fn adjoint_count(&self) -> u64 {
        self.inner.adjoint_calls.load(Ordering::Relaxed)
    }

    /// Total applications, one per `apply` or `apply_adjoint` call.
    pub fn solve_count(&self) -> u64 {
        self.forward_count() + self.adjoint_count()
    }
}

/// Dense matrix-backed operator, used for desk-scale models and oracles.
pub struct DenseOperator {
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        DenseOperator { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn domain_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn range_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    fn apply_adjoint(&self, w: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(w)
    }
}

/// Maximum relative adjoint defect `|⟨Av, w⟩ − ⟨v, A*w⟩| / (‖v‖‖w‖)` over
/// `pairs` seeded random vector pairs.
pub fn adjoint_dot_test(handle: &OperatorHandle, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let v = DVector::from_fn(handle.domain_dim(), |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let w = DVector::from_fn(handle.range_dim(), |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let lhs = handle.apply(&v).dot(&w);
        let rhs = v.dot(&handle.apply_adjoint(&w));
        worst = worst.max((lhs - rhs).abs() / (v.norm() * w.norm()));
    }
    worst
}
