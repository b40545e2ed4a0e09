//! Fixed-point fluid bit amounts.
//!
//! Buffer contents are tracked in integer quanta of 2^-40 bit so that
//! partial drains, FIFO completion and bit conservation are exact. Any
//! real-valued rate is rounded to the nearest quantum once, at the point it
//! enters a queue; two computations fed the same amounts therefore agree on
//! every completion round.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

const FRACTION_BITS: i32 = 40;
const SCALE: f64 = (1u64 << FRACTION_BITS) as f64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bits(u64);

impl Bits {
    pub const ZERO: Bits = Bits(0);

    /// Smallest representable positive amount.
    pub const QUANTUM: Bits = Bits(1);

    /// Rounds a non-negative bit count to the nearest quantum. Negative and
    /// NaN inputs map to zero; values beyond the range saturate.
    pub fn from_f64(bits: f64) -> Self {
        if bits.is_nan() || bits <= 0.0 {
            return Bits::ZERO;
        }
        Bits((bits * SCALE).round() as u64)
    }

    pub const fn from_quanta(quanta: u64) -> Self {
        Bits(quanta)
    }

    pub const fn quanta(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_sub(self, rhs: Bits) -> Bits {
        Bits(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Bits {
    type Output = Bits;

    fn add(self, rhs: Bits) -> Bits {
        Bits(self.0 + rhs.0)
    }
}

impl AddAssign for Bits {
    fn add_assign(&mut self, rhs: Bits) {
        self.0 += rhs.0;
    }
}

impl Sub for Bits {
    type Output = Bits;

    fn sub(self, rhs: Bits) -> Bits {
        Bits(self.0 - rhs.0)
    }
}

impl SubAssign for Bits {
    fn sub_assign(&mut self, rhs: Bits) {
        self.0 -= rhs.0;
    }
}

impl Sum for Bits {
    fn sum<I: Iterator<Item = Bits>>(iter: I) -> Bits {
        iter.fold(Bits::ZERO, Add::add)
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

/// Running total that cannot overflow over any realistic horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitTotal(u128);

impl BitTotal {
    pub fn add(&mut self, bits: Bits) {
        self.0 += u128::from(bits.0);
    }

    pub fn quanta(self) -> u128 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_nearest_quantum() {
        assert_eq!(Bits::from_f64(1.0).quanta(), 1 << 40);
        assert_eq!(Bits::from_f64(0.5).to_f64(), 0.5);
        assert_eq!(Bits::from_f64(0.4 / SCALE), Bits::ZERO);
        assert_eq!(Bits::from_f64(0.6 / SCALE), Bits::QUANTUM);
    }

    #[test]
    fn invalid_inputs_become_zero() {
        assert_eq!(Bits::from_f64(-3.0), Bits::ZERO);
        assert_eq!(Bits::from_f64(f64::NAN), Bits::ZERO);
    }

    #[test]
    fn conversion_error_is_below_one_quantum() {
        for x in [0.1, 0.2925, 1.0 / 3.0, 17.123456789, 1e-9] {
            assert!((Bits::from_f64(x).to_f64() - x).abs() <= 0.5 / SCALE);
        }
    }
}
