//! Deterministic arithmetic-operation accounting.

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

/// One counted unit of work.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpEvent {
    /// Dense product of a p×q and a q×r matrix.
    MatMul { p: usize, q: usize, r: usize },
    /// Householder QR of an n×k matrix.
    Qr { n: usize, k: usize },
    /// SVD of an n×k matrix.
    Svd { n: usize, k: usize },
    /// Multiplications with stored sparse-matrix entries.
    Sparse { entries: usize },
    /// Generated right-hand-side coefficients.
    Rhs { entries: usize },
}

impl OpEvent {
    pub fn cost(&self) -> u64 {
        match *self {
            OpEvent::MatMul { p, q, r } => (p * q * r) as u64,
            OpEvent::Qr { n, k } => 2 * (n * k * k) as u64,
            OpEvent::Svd { n, k } => {
                let (a, b) = if n >= k { (n, k) } else { (k, n) };
                14 * (a * b * b) as u64
            }
            OpEvent::Sparse { entries } | OpEvent::Rhs { entries } => entries as u64,
        }
    }
}

/// Running operation tally; optionally keeps the event log for replay.
#[derive(Debug, Default)]
pub struct OpCounter {
    total: AtomicU64,
    log: Option<Mutex<Vec<OpEvent>>>,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_log() -> Self {
        OpCounter { total: AtomicU64::new(0), log: Some(Mutex::new(Vec::new())) }
    }

    pub fn record(&self, e: OpEvent) {
        let c = e.cost();
        if c == 0 {
            return;
        }
        self.total.fetch_add(c, Ordering::Relaxed);
        if let Some(log) = &self.log {
            log.lock().unwrap().push(e);
        }
    }

    pub fn matmul(&self, p: usize, q: usize, r: usize) {
        self.record(OpEvent::MatMul { p, q, r });
    }

    pub fn total(&self) -> u64 {
        self.total.load(Ordering::Relaxed)
    }

    pub fn events(&self) -> Vec<OpEvent> {
        self.log.as_ref().map(|l| l.lock().unwrap().clone()).unwrap_or_default()
    }
}
