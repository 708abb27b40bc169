//! Per-step audit of cell state transitions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{CellKind, Dims};

/// The ten state changes a cell may undergo between two steps.
pub const ALLOWED_TRANSITIONS: [(CellKind, CellKind); 10] = [
    (CellKind::Liquid, CellKind::Interface),
    (CellKind::Interface, CellKind::Liquid),
    (CellKind::Interface, CellKind::Gas),
    (CellKind::Gas, CellKind::Interface),
    (CellKind::Liquid, CellKind::Obstacle),
    (CellKind::Interface, CellKind::Obstacle),
    (CellKind::Gas, CellKind::Obstacle),
    (CellKind::Obstacle, CellKind::Liquid),
    (CellKind::Obstacle, CellKind::Interface),
    (CellKind::Obstacle, CellKind::Gas),
];

pub fn is_allowed(from: CellKind, to: CellKind) -> bool {
    from == to || ALLOWED_TRANSITIONS.contains(&(from, to))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: u64,
    pub cell: [usize; 3],
    pub from: CellKind,
    pub to: CellKind,
}

/// Counts observed transitions and remembers forbidden ones.
#[derive(Debug, Clone, Default)]
pub struct TransitionAuditor {
    pub counts: BTreeMap<(CellKind, CellKind), u64>,
    pub violations: Vec<Violation>,
    pub steps: u64,
}

impl TransitionAuditor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, step: u64, dims: Dims, before: &[CellKind], after: &[CellKind]) {
        self.steps += 1;
        for (idx, (&a, &b)) in before.iter().zip(after).enumerate() {
            if a == b {
                continue;
            }
            *self.counts.entry((a, b)).or_default() += 1;
            if !is_allowed(a, b) {
                self.violations.push(Violation { step, cell: dims.coords(idx), from: a, to: b });
            }
        }
    }

    pub fn result(&self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Consistency {
                step: v.step,
                cell: v.cell,
                message: format!("forbidden transition {} -> {}", v.from.label(), v.to.label()),
            }),
        }
    }

    /// Distinct transition kinds seen so far.
    pub fn observed(&self) -> Vec<(CellKind, CellKind)> {
        self.counts.keys().copied().collect()
    }
}
