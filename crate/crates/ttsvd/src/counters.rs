//! Software flop and byte counters.
//!
//! Kernels tally `2 * fma + mul` operations executed in their inner loops and
//! `8 * (elements streamed in + out)` bytes. Parallel workers keep private
//! counters that are summed once the parallel section ends.

use std::ops::{Add, AddAssign};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub flops: u64,
    pub bytes: u64,
}

impl Counters {
    pub fn new(flops: u64, bytes: u64) -> Self {
        Self { flops, bytes }
    }
}

impl AddAssign for Counters {
    fn add_assign(&mut self, rhs: Self) {
        self.flops += rhs.flops;
        self.bytes += rhs.bytes;
    }
}

impl Add for Counters {
    type Output = Counters;

    fn add(mut self, rhs: Self) -> Counters {
        self += rhs;
        self
    }
}

impl std::iter::Sum for Counters {
    fn sum<I: Iterator<Item = Counters>>(iter: I) -> Self {
        iter.fold(Counters::default(), |a, b| a + b)
    }
}
