//! Compensated (Kahan-Babuska-Neumaier) summation.
//!
//! Every reduction in the crate that has to be reproducible goes through
//! [`NeumaierSum`] with a fixed term order, so results do not depend on the
//! number of worker threads.

use std::ops::{Add, AddAssign};

#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

impl From<f64> for NeumaierSum {
    fn from(value: f64) -> Self {
        Self { s: value, c: 0.0 }
    }
}

impl AddAssign<f64> for NeumaierSum {
    #[inline]
    fn add_assign(&mut self, rhs: f64) {
        let t = self.s + rhs;
        if self.s.abs() >= rhs.abs() {
            self.c += (self.s - t) + rhs;
        } else {
            self.c += (rhs - t) + self.s;
        }
        self.s = t;
    }
}

impl Add<f64> for NeumaierSum {
    type Output = Self;

    fn add(mut self, rhs: f64) -> Self {
        self += rhs;
        self
    }
}

impl Add for NeumaierSum {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs.s;
        self += rhs.c;
        self
    }
}

impl std::iter::Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc += v;
        }
        acc
    }
}

/// Compensated sum of a slice in index order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    values.iter().copied().sum::<NeumaierSum>().sum()
}
