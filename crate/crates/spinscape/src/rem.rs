//! Random Energy Model disorder.

use crate::error::{arg, Error, Result};
use crate::rng;
use crate::spin::SpinConfig;
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::{Read, Write};

/// File magic for persisted disorder.
pub const MAGIC: [u8; 8] = *b"SPNREM01";

/// Largest N for which a disorder table is materialised.
pub const MAX_REM_SPINS: usize = 26;

/// I.i.d. standard normal field `X_σ`, one entry per state.
#[derive(Clone, Debug, PartialEq)]
pub struct RemDisorder {
    pub n: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

impl RemDisorder {
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        if n == 0 || n > MAX_REM_SPINS {
            return arg(format!("REM size {n} outside 1..={MAX_REM_SPINS}"));
        }
        let mut rng = rng::seeded(seed);
        let values = (0..1usize << n).map(|_| rng.sample(StandardNormal)).collect();
        Ok(Self { n, seed, values })
    }

    /// `H(σ) = -√N X_σ`.
    pub fn energy(&self, s: SpinConfig) -> Result<f64> {
        if s.n() != self.n {
            return arg(format!("config has {} spins, disorder has {}", s.n(), self.n));
        }
        Ok(self.energy_bits(s.bits()))
    }

    #[inline]
    pub(crate) fn energy_bits(&self, bits: u32) -> f64 {
        -(self.n as f64).sqrt() * self.values[bits as usize]
    }

    /// Layout: magic, N (u64 LE), seed (u64 LE), then `2^N` f64 LE.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(io)?;
        let n = u64::from_le_bytes(word) as usize;
        if n == 0 || n > MAX_REM_SPINS {
            return Err(Error::Format(format!("N = {n} out of range")));
        }
        r.read_exact(&mut word).map_err(io)?;
        let seed = u64::from_le_bytes(word);
        let mut values = Vec::with_capacity(1 << n);
        for _ in 0..1usize << n {
            r.read_exact(&mut word).map_err(io)?;
            values.push(f64::from_le_bytes(word));
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(io)? != 0 {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(Self { n, seed, values })
    }
}

/// Threshold `c = -N√(2 ln 2) + N^{1/4}/4`.
pub fn preset_threshold(n: usize) -> f64 {
    let n = n as f64;
    -n * (2.0 * std::f64::consts::LN_2).sqrt() + n.powf(0.25) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_scaling() {
        let mut d = RemDisorder::generate(4, 1).unwrap();
        d.values[3] = 0.0;
        d.values[5] = 1.0;
        assert_eq!(d.energy(SpinConfig::new(3, 4).unwrap()).unwrap(), 0.0);
        assert_eq!(d.energy(SpinConfig::new(5, 4).unwrap()).unwrap(), -2.0);
        let mut d9 = RemDisorder::generate(9, 1).unwrap();
        let x = -(2.0 * std::f64::consts::LN_2).sqrt();
        d9.values[0] = x;
        let e = d9.energy(SpinConfig::new(0, 9).unwrap()).unwrap();
        assert!((e - 3.0 * (2.0 * std::f64::consts::LN_2).sqrt()).abs() < 1e-15);
        assert!((e - 3.5322).abs() < 1e-3);
        assert!(d9.energy(SpinConfig::new(0, 8).unwrap()).is_err());
    }

    #[test]
    fn reproducible_bytes() {
        let a = RemDisorder::generate(10, 99).unwrap();
        let b = RemDisorder::generate(10, 99).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_to(&mut ba).unwrap();
        b.write_to(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_eq!(ba.len(), 24 + 8 * 1024);
        assert_ne!(a.values, RemDisorder::generate(10, 100).unwrap().values);
    }

    #[test]
    fn file_round_trip() {
        let a = RemDisorder::generate(6, 3).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(RemDisorder::read_from(buf.as_slice()).unwrap(), a);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(RemDisorder::read_from(bad.as_slice()).is_err());
        buf.push(0);
        assert!(RemDisorder::read_from(buf.as_slice()).is_err());
        assert!(RemDisorder::read_from(&buf[..40]).is_err());
    }

    #[test]
    fn preset_value() {
        let c = preset_threshold(16);
        assert!((c - (-16.0 * (2.0 * std::f64::consts::LN_2).sqrt() + 0.5)).abs() < 1e-12);
    }
}
