//! Hierarchical 16QAM.
//!
//! The constellation is four "clouds" (one per quadrant) of four "satellites".
//! The two high-priority (HP) bits pick the quadrant, the two low-priority
//! (LP) bits pick the satellite inside it. Per axis the amplitude is
//! `±(c ± s)` with `s = α·c`; `c` is chosen so that the mean symbol energy is
//! one. `α = 0.5` is the uniform 16QAM lattice, `α = 0` collapses every cloud
//! to a single point and leaves plain QPSK.
//!
//! Bit order inside a symbol is `(hp_I, hp_Q, lp_I, lp_Q)`. On each axis the
//! four levels from negative to positive carry the (hp, lp) pairs
//! `10, 11, 01, 00`, which is a Gray sequence.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Ratio of satellite spacing to cloud spacing.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HmAlpha(f64);

impl HmAlpha {
    pub const QPSK: HmAlpha = HmAlpha(0.0);
    pub const UNIFORM: HmAlpha = HmAlpha(0.5);

    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&value) {
            return Err(Error::InvalidAlpha(value));
        }
        Ok(HmAlpha(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_qpsk(self) -> bool {
        self.0 == 0.0
    }
}

impl fmt::Display for HmAlpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Two HP bits and two LP bits carried by one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayeredBits {
    hp: u8,
    lp: u8,
}

impl LayeredBits {
    pub fn new(hp: u8, lp: u8) -> Result<Self> {
        if hp > 3 || lp > 3 {
            return Err(Error::InvalidBits { hp, lp });
        }
        Ok(LayeredBits { hp, lp })
    }

    /// Symbol index `hp << 2 | lp`.
    pub fn index(self) -> usize {
        ((self.hp << 2) | self.lp) as usize
    }

    pub fn from_index(index: usize) -> Self {
        let i = (index & 0xf) as u8;
        LayeredBits { hp: i >> 2, lp: i & 3 }
    }

    pub fn hp(self) -> u8 {
        self.hp
    }

    pub fn lp(self) -> u8 {
        self.lp
    }

    pub fn all() -> impl Iterator<Item = LayeredBits> {
        (0..16).map(LayeredBits::from_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HqamGeometry {
    alpha: HmAlpha,
    cloud: f64,
    satellite: f64,
    points: [Complex64; 16],
}

fn axis_level(cloud: f64, satellite: f64, hp_bit: u8, lp_bit: u8) -> f64 {
    let sign = if hp_bit == 0 { 1.0 } else { -1.0 };
    let offset = if lp_bit == 0 { satellite } else { -satellite };
    sign * (cloud + offset)
}

impl HqamGeometry {
    pub fn new(alpha: HmAlpha) -> Self {
        let a = alpha.value();
        let cloud = (0.5 / (1.0 + a * a)).sqrt();
        let satellite = a * cloud;
        let mut points = [Complex64::new(0.0, 0.0); 16];
        for bits in LayeredBits::all() {
            let (hi, hq) = (bits.hp >> 1, bits.hp & 1);
            let (li, lq) = (bits.lp >> 1, bits.lp & 1);
            points[bits.index()] = Complex64::new(
                axis_level(cloud, satellite, hi, li),
                axis_level(cloud, satellite, hq, lq),
            );
        }
        HqamGeometry {
            alpha,
            cloud,
            satellite,
            points,
        }
    }

    pub fn alpha(&self) -> HmAlpha {
        self.alpha
    }

    /// Cloud-centre amplitude per axis.
    pub fn cloud_offset(&self) -> f64 {
        self.cloud
    }

    /// Satellite offset from the cloud centre per axis.
    pub fn satellite_offset(&self) -> f64 {
        self.satellite
    }

    pub fn points(&self) -> &[Complex64; 16] {
        &self.points
    }

    pub fn point(&self, bits: LayeredBits) -> Complex64 {
        self.points[bits.index()]
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0
    }
}

pub fn geometry_from_alpha(alpha: HmAlpha) -> HqamGeometry {
    HqamGeometry::new(alpha)
}

pub fn map_symbol(bits: LayeredBits, geom: &HqamGeometry) -> Complex64 {
    geom.point(bits)
}

fn nearest(received: Complex64, points: &[Complex64; 16]) -> LayeredBits {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (received - p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    LayeredBits::from_index(best)
}

/// Maximum-likelihood detection with perfect channel knowledge.
pub fn demap_ml(received: Complex64, geom: &HqamGeometry, h: Complex64) -> Result<LayeredBits> {
    if h.norm_sqr() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let scaled: [Complex64; 16] = std::array::from_fn(|i| h * geom.points[i]);
    Ok(nearest(received, &scaled))
}

/// Superposition of up to three transmitters sending the same bits, each with
/// its own geometry and channel gain.
#[derive(Debug, Clone)]
pub struct CompositeConstellation {
    geometries: Vec<HqamGeometry>,
    gains: Vec<Complex64>,
    points: [Complex64; 16],
}

impl CompositeConstellation {
    pub fn new(geometries: Vec<HqamGeometry>, gains: Vec<Complex64>) -> Result<Self> {
        if geometries.is_empty() || geometries.len() > 3 || geometries.len() != gains.len() {
            return Err(Error::TransmitterCount(geometries.len()));
        }
        if gains.iter().all(|h| h.norm_sqr() == 0.0) {
            return Err(Error::ZeroChannel);
        }
        let mut points = [Complex64::new(0.0, 0.0); 16];
        for (g, h) in geometries.iter().zip(&gains) {
            for (p, q) in points.iter_mut().zip(g.points.iter()) {
                *p += h * q;
            }
        }
        Ok(CompositeConstellation {
            geometries,
            gains,
            points,
        })
    }

    pub fn geometries(&self) -> &[HqamGeometry] {
        &self.geometries
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn points(&self) -> &[Complex64; 16] {
        &self.points
    }

    pub fn point(&self, bits: LayeredBits) -> Complex64 {
        self.points[bits.index()]
    }

    /// Smallest distance between two composite points whose HP bits differ.
    pub fn hp_min_distance(&self) -> f64 {
        self.min_distance(|a, b| a.hp != b.hp)
    }

    /// Smallest distance between two composite points whose LP bits differ.
    pub fn lp_min_distance(&self) -> f64 {
        self.min_distance(|a, b| a.lp != b.lp)
    }

    fn min_distance(&self, differs: impl Fn(LayeredBits, LayeredBits) -> bool) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..16 {
            for j in (i + 1)..16 {
                if differs(LayeredBits::from_index(i), LayeredBits::from_index(j)) {
                    best = best.min((self.points[i] - self.points[j]).norm());
                }
            }
        }
        best
    }
}

pub fn demap_composite(received: Complex64, comp: &CompositeConstellation) -> LayeredBits {
    nearest(received, &comp.points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceModulation {
    Qpsk,
    Uniform16Qam,
}

fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Closed-form AWGN symbol error probability at the given Es/N0.
pub fn analytic_reference_ser(modulation: ReferenceModulation, esn0_db: f64) -> f64 {
    let esn0 = 10f64.powf(esn0_db / 10.0);
    match modulation {
        ReferenceModulation::Qpsk => {
            let q = q_function(esn0.sqrt());
            2.0 * q - q * q
        }
        ReferenceModulation::Uniform16Qam => {
            let p = 1.5 * q_function((esn0 / 5.0).sqrt());
            2.0 * p - p * p
        }
    }
}
