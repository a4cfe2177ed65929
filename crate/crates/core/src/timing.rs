//! Lap-based wall-clock accounting split into disjoint categories.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    LinearSolve,
    Flux,
    Other,
}

/// Each call to [`Timer::lap`] charges the time since the previous lap to
/// one category, so the parts never overlap and add up to the total.
#[derive(Clone, Debug)]
pub struct Timer {
    last: Instant,
    started: Instant,
    pub linear: Duration,
    pub flux: Duration,
    pub other: Duration,
}

impl Default for Timer {
    fn default() -> Self {
        Self::new()
    }
}

impl Timer {
    pub fn new() -> Self {
        let now = Instant::now();
        Self { last: now, started: now, linear: Duration::ZERO, flux: Duration::ZERO, other: Duration::ZERO }
    }

    /// Restarts the clock without clearing accumulated parts.
    pub fn resume(&mut self) {
        self.last = Instant::now();
    }

    #[inline]
    pub fn lap(&mut self, cat: Category) {
        let now = Instant::now();
        let d = now - self.last;
        self.last = now;
        match cat {
            Category::LinearSolve => self.linear += d,
            Category::Flux => self.flux += d,
            Category::Other => self.other += d,
        }
    }

    pub fn breakdown(&self) -> TimingBreakdown {
        TimingBreakdown {
            linear_s: self.linear.as_secs_f64(),
            flux_s: self.flux.as_secs_f64(),
            other_s: self.other.as_secs_f64(),
            total_s: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Seconds spent per category plus the independently measured total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub linear_s: f64,
    pub flux_s: f64,
    pub other_s: f64,
    pub total_s: f64,
}

impl TimingBreakdown {
    pub fn parts_sum(&self) -> f64 {
        self.linear_s + self.flux_s + self.other_s
    }

    /// Fraction of the total covered by the categorized parts.
    pub fn coverage(&self) -> f64 {
        if self.total_s <= 0.0 {
            1.0
        } else {
            self.parts_sum() / self.total_s
        }
    }

    pub fn linear_fraction(&self) -> f64 {
        let s = self.parts_sum();
        if s > 0.0 { self.linear_s / s } else { 0.0 }
    }
}
