//! Spin configurations on the hypercube `{-1,+1}^N`.
//!
//! Coordinate `i` is stored in bit `i`; a set bit means spin `+1`.

use crate::error::{arg, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest supported number of spins.
pub const MAX_SPINS: usize = 30;

/// A point of `{-1,+1}^N`, bit-packed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinConfig {
    bits: u32,
    n: u8,
}

impl SpinConfig {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SPINS {
            return arg(format!("spin count {n} outside 1..={MAX_SPINS}"));
        }
        if bits >> n != 0 {
            return arg(format!("bits {bits:#b} exceed {n} spins"));
        }
        Ok(Self { bits, n: n as u8 })
    }

    /// All spins `-1`.
    pub fn all_down(n: usize) -> Result<Self> {
        Self::new(0, n)
    }

    /// All spins `+1`.
    pub fn all_up(n: usize) -> Result<Self> {
        Self::new(if n == 0 { 0 } else { (1u32 << n) - 1 }, n)
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn n(self) -> usize {
        self.n as usize
    }

    /// Spin value at coordinate `i` as `+1` or `-1`.
    #[inline]
    pub fn spin(self, i: usize) -> i32 {
        if self.bits >> i & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// `σ^{(i)}`: the configuration with coordinate `i` reversed.
    pub fn flip(self, i: usize) -> Result<Self> {
        if i >= self.n() {
            return arg(format!("coordinate {i} out of range for N = {}", self.n));
        }
        Ok(Self {
            bits: self.bits ^ (1 << i),
            n: self.n,
        })
    }

    /// The `N` hypercube neighbours, in ascending coordinate order.
    pub fn neighbors(self) -> impl Iterator<Item = SpinConfig> {
        let s = self;
        (0..s.n()).map(move |i| SpinConfig {
            bits: s.bits ^ (1 << i),
            n: s.n,
        })
    }

    pub fn hamming(self, other: SpinConfig) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }

    /// Sum of spins, `Σ σ_i`.
    pub fn magnetization(self) -> i32 {
        2 * self.bits.count_ones() as i32 - self.n as i32
    }

    /// Every configuration on `n` spins, in index order.
    pub fn all(n: usize) -> impl Iterator<Item = SpinConfig> {
        assert!((1..=MAX_SPINS).contains(&n));
        (0..1u32 << n).map(move |bits| SpinConfig { bits, n: n as u8 })
    }
}

/// Binary rendering, most significant coordinate first (`N` digits).
impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.n())
    }
}

/// Renders a state index as an `n`-digit bitstring.
pub fn bitstring(bits: u32, n: usize) -> String {
    format!("{:0width$b}", bits, width = n)
}

impl SpinConfig {
    /// Inverse of the `Display` rendering: `N` binary digits, most
    /// significant coordinate first.
    pub fn parse(s: &str) -> Result<Self> {
        let n = s.len();
        if n == 0 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return arg(format!("'{s}' is not a bitstring"));
        }
        if n > MAX_SPINS {
            return arg(format!("'{s}' has {n} digits, more than {MAX_SPINS}"));
        }
        Self::new(u32::from_str_radix(s, 2).expect("checked digits"), n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_rejects_junk() {
        assert!(SpinConfig::parse("").is_err());
        assert!(SpinConfig::parse("01a").is_err());
        assert!(SpinConfig::parse(&"1".repeat(31)).is_err());
        assert_eq!(SpinConfig::parse("010").unwrap(), SpinConfig::new(2, 3).unwrap());
    }

    proptest! {
        #[test]
        fn parse_inverts_display(n in 1usize..=30, raw in any::<u32>()) {
            let s = SpinConfig::new(raw & ((1u64 << n) - 1) as u32, n).unwrap();
            prop_assert_eq!(SpinConfig::parse(&s.to_string()).unwrap(), s);
        }
    }

    #[test]
    fn flip_examples() {
        let s = SpinConfig::new(0b000, 3).unwrap();
        assert_eq!(s.flip(1).unwrap().bits(), 0b010);
        let s = SpinConfig::new(0b010, 3).unwrap();
        assert_eq!(s.flip(1).unwrap().bits(), 0b000);
        let s = SpinConfig::new(0, 1).unwrap();
        assert_eq!(s.flip(0).unwrap().bits(), 1);
    }

    #[test]
    fn flip_out_of_range() {
        let s = SpinConfig::new(0, 3).unwrap();
        assert!(s.flip(3).is_err());
    }

    #[test]
    fn rejects_high_bits() {
        assert!(SpinConfig::new(0b1000, 3).is_err());
        assert!(SpinConfig::new(0, 0).is_err());
        assert!(SpinConfig::new(0, 31).is_err());
    }

    #[test]
    fn display_is_msb_first() {
        let s = SpinConfig::new(0b01, 2).unwrap();
        assert_eq!(s.to_string(), "01");
        assert_eq!(bitstring(2, 3), "010");
    }

    proptest! {
        #[test]
        fn flip_is_involution(n in 1usize..=30, raw in any::<u32>(), i in 0usize..30) {
            let bits = raw & ((1u64 << n) - 1) as u32;
            let s = SpinConfig::new(bits, n).unwrap();
            let i = i % n;
            prop_assert_eq!(s.flip(i).unwrap().flip(i).unwrap(), s);
            prop_assert_eq!(s.flip(i).unwrap().bits() >> n, 0);
        }

        #[test]
        fn neighbors_at_distance_one(n in 1usize..=30, raw in any::<u32>()) {
            let bits = raw & ((1u64 << n) - 1) as u32;
            let s = SpinConfig::new(bits, n).unwrap();
            let nb: Vec<_> = s.neighbors().collect();
            prop_assert_eq!(nb.len(), n);
            for t in nb {
                prop_assert_eq!(s.hamming(t), 1);
            }
        }
    }
}
