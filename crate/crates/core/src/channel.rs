//! Linear per-element channel model.
//!
//! The received channel for a surface configuration `b` is
//! `h = h_Z + Σ b_i h_i`, optionally extended with bilinear terms
//! `b_i b_j g_ij` for declared neighbouring pairs. All powers are linear;
//! conversion to dB happens only at reporting boundaries.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One path or aggregate channel, as a complex baseband coefficient.
pub type ChannelCoefficient = Complex64;

/// Converts a linear power ratio to dB.
pub fn power_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Converts dB to a linear power ratio.
pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// On/off state of every surface element, element 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SurfaceConfig {
    bits: Vec<bool>,
}

impl SurfaceConfig {
    pub fn all_zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn all_ones(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Builds a config from the low `n` bits of `index`, element 0 taking the
    /// most significant bit, so ascending indices enumerate bitstrings in
    /// lexicographic order.
    pub fn from_index(index: u64, n: usize) -> Self {
        let bits = (0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect();
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.bits[i] = on;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_zeros(&self) -> bool {
        self.bits.iter().all(|&b| !b)
    }

    /// Bitwise NOT.
    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    /// Bitwise AND; panics on length mismatch.
    pub fn and(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self {
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }

    /// Bitwise OR; panics on length mismatch.
    pub fn or(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self {
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
        }
    }

    /// Hex encoding with element 0 as the most significant bit of the first
    /// digit. The last digit is zero-padded on the right.
    pub fn to_hex(&self) -> String {
        self.bits
            .chunks(4)
            .map(|chunk| {
                let nibble = chunk
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (k, &b)| acc | ((b as u32) << (3 - k)));
                char::from_digit(nibble, 16).unwrap()
            })
            .collect()
    }

    /// Inverse of [`to_hex`](Self::to_hex) for a known element count.
    pub fn from_hex(hex: &str, n: usize) -> Result<Self> {
        if hex.len() != n.div_ceil(4) {
            return Err(Error::InvalidArgument(format!(
                "hex string of {} digits cannot hold exactly {n} bits",
                hex.len()
            )));
        }
        let mut bits = Vec::with_capacity(n);
        for c in hex.chars() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| Error::InvalidArgument(format!("bad hex digit {c:?}")))?;
            for k in 0..4 {
                if bits.len() < n {
                    bits.push((nibble >> (3 - k)) & 1 == 1);
                } else if (nibble >> (3 - k)) & 1 == 1 {
                    return Err(Error::InvalidArgument("non-zero padding bits".into()));
                }
            }
        }
        Ok(Self { bits })
    }
}

impl fmt::Display for SurfaceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for SurfaceConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

/// Baseline channel plus per-element contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    h_z: ChannelCoefficient,
    h: Vec<ChannelCoefficient>,
    interactions: BTreeMap<(usize, usize), ChannelCoefficient>,
    noise_floor_power: f64,
}

fn check_finite(c: ChannelCoefficient, what: &'static str) -> Result<()> {
    if c.re.is_finite() && c.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

impl Environment {
    /// Linear environment with unit noise floor.
    pub fn new(h_z: ChannelCoefficient, h: Vec<ChannelCoefficient>) -> Result<Self> {
        Self::with_interactions(h_z, h, BTreeMap::new(), 1.0)
    }

    pub fn with_interactions(
        h_z: ChannelCoefficient,
        h: Vec<ChannelCoefficient>,
        interactions: BTreeMap<(usize, usize), ChannelCoefficient>,
        noise_floor_power: f64,
    ) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidArgument("environment needs at least one element".into()));
        }
        check_finite(h_z, "h_z")?;
        for &c in &h {
            check_finite(c, "h")?;
        }
        for (&(i, j), &g) in &interactions {
            if i >= j || j >= h.len() {
                return Err(Error::InvalidArgument(format!(
                    "interaction key ({i}, {j}) must satisfy i < j < {}",
                    h.len()
                )));
            }
            check_finite(g, "interactions")?;
        }
        if !(noise_floor_power > 0.0 && noise_floor_power.is_finite()) {
            return Err(Error::InvalidArgument("noise_floor_power must be positive".into()));
        }
        Ok(Self {
            h_z,
            h,
            interactions,
            noise_floor_power,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.h.len()
    }

    pub fn h_z(&self) -> ChannelCoefficient {
        self.h_z
    }

    pub fn h(&self) -> &[ChannelCoefficient] {
        &self.h
    }

    pub fn interactions(&self) -> &BTreeMap<(usize, usize), ChannelCoefficient> {
        &self.interactions
    }

    pub fn is_linear(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn noise_floor_power(&self) -> f64 {
        self.noise_floor_power
    }

    pub fn set_noise_floor_power(&mut self, p: f64) -> Result<()> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument("noise_floor_power must be positive".into()));
        }
        self.noise_floor_power = p;
        Ok(())
    }

    /// Copy with the baseline replaced.
    pub fn with_baseline(&self, h_z: ChannelCoefficient) -> Result<Self> {
        check_finite(h_z, "h_z")?;
        Ok(Self { h_z, ..self.clone() })
    }

    /// Copy with `h_Z = 0`: only the paths through the surface remain.
    pub fn surface_only(&self) -> Self {
        Self {
            h_z: Complex64::new(0.0, 0.0),
            ..self.clone()
        }
    }

    pub fn without_interactions(&self) -> Self {
        Self {
            interactions: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Copy keeping only the elements flagged in `active`; the rest are
    /// physically removed (their contributions and interactions vanish).
    pub fn restricted(&self, active: &[bool]) -> Result<Self> {
        self.check_len(active.len())?;
        let h = self
            .h
            .iter()
            .zip(active)
            .map(|(&c, &a)| if a { c } else { Complex64::new(0.0, 0.0) })
            .collect();
        let interactions = self
            .interactions
            .iter()
            .filter(|(&(i, j), _)| active[i] && active[j])
            .map(|(&k, &g)| (k, g))
            .collect();
        Ok(Self {
            h,
            interactions,
            ..self.clone()
        })
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.h.len() {
            Err(Error::Dimension {
                expected: self.h.len(),
                got,
            })
        } else {
            Ok(())
        }
    }

    /// Serializes to the JSON wire format.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct EnvironmentWire {
    h_z: [f64; 2],
    h: Vec<[f64; 2]>,
    #[serde(default)]
    interactions: Vec<(usize, usize, f64, f64)>,
    noise_floor_power: f64,
}

impl Serialize for Environment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EnvironmentWire {
            h_z: [self.h_z.re, self.h_z.im],
            h: self.h.iter().map(|c| [c.re, c.im]).collect(),
            interactions: self
                .interactions
                .iter()
                .map(|(&(i, j), g)| (i, j, g.re, g.im))
                .collect(),
            noise_floor_power: self.noise_floor_power,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Environment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = EnvironmentWire::deserialize(d)?;
        let mut interactions = BTreeMap::new();
        for (i, j, re, im) in w.interactions {
            if interactions.insert((i, j), Complex64::new(re, im)).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate interaction ({i}, {j})")));
            }
        }
        Environment::with_interactions(
            Complex64::new(w.h_z[0], w.h_z[1]),
            w.h.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
            interactions,
            w.noise_floor_power,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Channel produced by `config`: `h_Z + Σ b_i h_i + Σ b_i b_j g_ij`.
pub fn evaluate_channel(env: &Environment, config: &SurfaceConfig) -> Result<ChannelCoefficient> {
    env.check_len(config.len())?;
    let mut acc = env.h_z;
    for (&c, &b) in env.h.iter().zip(config.bits()) {
        if b {
            acc += c;
        }
    }
    for (&(i, j), &g) in &env.interactions {
        if config.get(i) && config.get(j) {
            acc += g;
        }
    }
    Ok(acc)
}

/// Noise-free RSSI-ratio `|h(config)|² / |h_Z|²`.
pub fn rssi_ratio_exact(env: &Environment, config: &SurfaceConfig) -> Result<f64> {
    let base = env.h_z.norm_sqr();
    if base == 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    let h = evaluate_channel(env, config)?;
    if config.is_all_zeros() {
        // exactly 1 even when interactions are present
        return Ok(1.0);
    }
    Ok(h.norm_sqr() / base)
}

/// Unit-bandwidth Shannon capacity `log2(1 + |h|²/N0)`.
pub fn capacity(env: &Environment, config: &SurfaceConfig) -> Result<f64> {
    let h = evaluate_channel(env, config)?;
    Ok((1.0 + h.norm_sqr() / env.noise_floor_power).log2())
}

/// Ratio of unit-bandwidth capacities of `opt` over `base`.
///
/// A zero-capacity base yields `f64::INFINITY` unless `opt` is also zero,
/// in which case the channels are identical and the ratio is 1.
pub fn capacity_improvement(
    env: &Environment,
    base: &SurfaceConfig,
    opt: &SurfaceConfig,
) -> Result<f64> {
    let c_base = capacity(env, base)?;
    let c_opt = capacity(env, opt)?;
    if c_base == 0.0 {
        return Ok(if c_opt == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(c_opt / c_base)
}

/// `log2(1 + snr_opt) / log2(1 + snr_base)` for linear SNRs.
pub fn capacity_ratio_from_snr(snr_base: f64, snr_opt: f64) -> f64 {
    let c_base = (1.0 + snr_base).log2();
    let c_opt = (1.0 + snr_opt).log2();
    if c_base == 0.0 {
        if c_opt == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        c_opt / c_base
    }
}

/// `|h_Z| + Σ |h_i|`: the magnitude reachable with full complex control of
/// every element.
pub fn ideal_upper_bound(env: &Environment) -> f64 {
    env.h_z.norm() + env.h.iter().map(|c| c.norm()).sum::<f64>()
}
