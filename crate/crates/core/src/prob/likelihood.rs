use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

/// Log-likelihood of the observed data.
///
/// Implementations return `-inf` for parameters the forward model cannot
/// handle (for example a hydraulic solve that did not converge).
pub trait LogLikelihood: Send + Sync {
    fn log_likelihood(&self, theta: &[f64]) -> f64;
    /// Forward-model solves performed so far.
    fn evaluations(&self) -> u64;
}

/// Failure function: the system fails when the value is at least 1.
pub trait FailureFunction: Send + Sync {
    fn failure_value(&self, theta: &[f64]) -> f64;
    fn evaluations(&self) -> u64;
}

/// Thread-safe model-evaluation counter.
#[derive(Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn new() -> Self {
        Self(AtomicU64::new(0))
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

impl fmt::Debug for EvalCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EvalCounter({})", self.get())
    }
}

/// Closure-backed likelihood; each call counts as one evaluation.
pub struct FnLikelihood<F> {
    f: F,
    counter: EvalCounter,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnLikelihood<F> {
    pub fn new(f: F) -> Self {
        Self { f, counter: EvalCounter::new() }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> LogLikelihood for FnLikelihood<F> {
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.counter.add(1);
        (self.f)(theta)
    }

    fn evaluations(&self) -> u64 {
        self.counter.get()
    }
}

/// Closure-backed failure function; each call counts as one evaluation.
pub struct FnFailure<F> {
    f: F,
    counter: EvalCounter,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnFailure<F> {
    pub fn new(f: F) -> Self {
        Self { f, counter: EvalCounter::new() }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FailureFunction for FnFailure<F> {
    fn failure_value(&self, theta: &[f64]) -> f64 {
        self.counter.add(1);
        (self.f)(theta)
    }

    fn evaluations(&self) -> u64 {
        self.counter.get()
    }
}
