//! Fixed-point quantities.
//!
//! Data volumes are integers in hundredths of a gigabyte, traffic coefficients
//! in ten-thousandths, so a cost (volume times coefficient) is an integer count
//! of micro-gigabytes. All cost arithmetic in the crate is exact.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Hundredths of a GB per [`Volume`] unit.
pub const VOLUME_UNITS_PER_GB: u64 = 100;
/// Coefficient units per 1.0.
pub const COEFFICIENT_SCALE: u32 = 10_000;
/// Micro-GB per GB.
pub const COST_UNITS_PER_GB: u64 = VOLUME_UNITS_PER_GB * COEFFICIENT_SCALE as u64;

/// A data volume in units of 0.01 GB.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Volume(pub u64);

impl Volume {
    pub const ZERO: Volume = Volume(0);

    /// Rounds to the nearest 0.01 GB. Negative and non-finite inputs map to zero.
    pub fn from_gb(gb: f64) -> Self {
        if !gb.is_finite() || gb <= 0.0 {
            return Volume(0);
        }
        Volume((gb * VOLUME_UNITS_PER_GB as f64).round() as u64)
    }

    pub fn as_gb(self) -> f64 {
        self.0 as f64 / VOLUME_UNITS_PER_GB as f64
    }

    /// Cost of moving this volume once across a link with the given coefficient.
    pub fn weighted(self, coefficient: Coefficient) -> Cost {
        Cost(self.0 * coefficient.0 as u64)
    }

    /// Cost of moving this volume over a unit-coefficient link.
    pub fn at_unit_cost(self) -> Cost {
        self.weighted(Coefficient::ONE)
    }
}

impl Add for Volume {
    type Output = Volume;
    fn add(self, rhs: Volume) -> Volume {
        Volume(self.0 + rhs.0)
    }
}

impl AddAssign for Volume {
    fn add_assign(&mut self, rhs: Volume) {
        self.0 += rhs.0;
    }
}

impl Mul<u64> for Volume {
    type Output = Volume;
    fn mul(self, rhs: u64) -> Volume {
        Volume(self.0 * rhs)
    }
}

impl Sum for Volume {
    fn sum<I: Iterator<Item = Volume>>(iter: I) -> Volume {
        Volume(iter.map(|v| v.0).sum())
    }
}

impl fmt::Display for Volume {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02} GB", self.0 / 100, self.0 % 100)
    }
}

/// A traffic coefficient in units of 1e-4. The cloud link is [`Coefficient::ONE`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coefficient(pub u32);

impl Coefficient {
    pub const ZERO: Coefficient = Coefficient(0);
    pub const ONE: Coefficient = Coefficient(COEFFICIENT_SCALE);

    /// Rounds to the nearest 1e-4; negative and non-finite inputs map to zero.
    pub fn from_f64(value: f64) -> Self {
        if !value.is_finite() || value <= 0.0 {
            return Coefficient(0);
        }
        Coefficient((value * COEFFICIENT_SCALE as f64).round() as u32)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / COEFFICIENT_SCALE as f64
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

/// A backhaul transmission cost in micro-GB (GB-equivalents times 1e6).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cost(pub u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);

    pub fn as_gb(self) -> f64 {
        self.0 as f64 / COST_UNITS_PER_GB as f64
    }

    pub fn saturating_add(self, rhs: Cost) -> Cost {
        Cost(self.0.saturating_add(rhs.0))
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl Sub for Cost {
    type Output = Cost;
    fn sub(self, rhs: Cost) -> Cost {
        Cost(self.0 - rhs.0)
    }
}

impl Mul<u64> for Cost {
    type Output = Cost;
    fn mul(self, rhs: u64) -> Cost {
        Cost(self.0 * rhs)
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        Cost(iter.map(|c| c.0).sum())
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} GB", self.as_gb())
    }
}
