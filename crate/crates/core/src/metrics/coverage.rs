use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINS_PER_DIM: usize = 10;

/// Visited-bin tracker over a 2-D slice of the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageGrid {
    low: [f64; 2],
    high: [f64; 2],
    counts: Vec<u64>,
    visited: usize,
}

impl CoverageGrid {
    pub fn new(low: [f64; 2], high: [f64; 2]) -> Result<Self> {
        for d in 0..2 {
            if !low[d].is_finite() || !high[d].is_finite() || high[d] <= low[d] {
                return Err(Error::Config(format!(
                    "coverage range for dimension {d} is degenerate: [{}, {}]",
                    low[d], high[d]
                )));
            }
        }
        Ok(Self {
            low,
            high,
            counts: vec![0; BINS_PER_DIM * BINS_PER_DIM],
            visited: 0,
        })
    }

    /// Position in [-1.2, 0.6], velocity in [-0.07, 0.07].
    pub fn mountain_car() -> Self {
        Self::new([-1.2, -0.07], [0.6, 0.07]).expect("static ranges")
    }

    pub fn bin_index(&self, point: [f64; 2]) -> (usize, usize) {
        let idx = |d: usize| {
            let t = (point[d] - self.low[d]) / (self.high[d] - self.low[d]);
            let raw = (BINS_PER_DIM as f64 * t).floor();
            if raw.is_nan() {
                0
            } else {
                raw.clamp(0.0, (BINS_PER_DIM - 1) as f64) as usize
            }
        };
        (idx(0), idx(1))
    }

    /// Marks the bin containing `point`; returns the coverage percentage.
    pub fn update(&mut self, point: [f64; 2]) -> f64 {
        let (i, j) = self.bin_index(point);
        let c = &mut self.counts[i * BINS_PER_DIM + j];
        if *c == 0 {
            self.visited += 1;
        }
        *c += 1;
        self.percent()
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.visited as f64 / (BINS_PER_DIM * BINS_PER_DIM) as f64
    }

    pub fn visited_bins(&self) -> usize {
        self.visited
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * BINS_PER_DIM + j]
    }

    pub fn is_visited(&self, i: usize, j: usize) -> bool {
        self.count(i, j) > 0
    }
}
