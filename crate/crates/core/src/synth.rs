//! Seedable generators of synthetic environments.
//!
//! Every generator is a pure function of its inputs. Randomness comes from
//! `ChaCha8Rng::seed_from_u64(seed)`; the draw order is part of the
//! contract and is versioned by [`GENERATOR_VERSION`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelCoefficient, Environment};
use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Identifies the RNG algorithm and draw order used by the generators.
pub const GENERATOR_VERSION: &str = "chacha8-v1";

/// Statistical ensemble: uniform phases, folded-normal element magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IidEnvSpec {
    pub n_elements: usize,
    pub element_sigma: f64,
    pub baseline_magnitude: f64,
    pub seed: u64,
}

fn uniform_phase(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-PI..PI)
}

/// Draws an i.i.d. environment. Draw order: baseline phase, then for each
/// element its magnitude followed by its phase.
pub fn gen_iid(spec: &IidEnvSpec) -> Result<Environment> {
    if spec.n_elements == 0 {
        return Err(Error::InvalidArgument("n_elements must be >= 1".into()));
    }
    if !(spec.element_sigma >= 0.0 && spec.element_sigma.is_finite()) {
        return Err(Error::InvalidArgument("element_sigma must be finite and >= 0".into()));
    }
    if !(spec.baseline_magnitude >= 0.0 && spec.baseline_magnitude.is_finite()) {
        return Err(Error::InvalidArgument("baseline_magnitude must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.element_sigma)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let h_z = Complex64::from_polar(spec.baseline_magnitude, uniform_phase(&mut rng));
    let h = (0..spec.n_elements)
        .map(|_| {
            let mag: f64 = normal.sample(&mut rng);
            Complex64::from_polar(mag.abs(), uniform_phase(&mut rng))
        })
        .collect();
    Environment::new(h_z, h)
}

/// Horizontal and vertical neighbour pairs of a row-major grid.
pub fn grid_neighbor_pairs(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                pairs.push((i, i + 1));
            }
            if r + 1 < rows {
                pairs.push((i, i + cols));
            }
        }
    }
    pairs
}

/// Adds a bilinear term `g_ij` to each listed pair. Its magnitude is
/// `strength · (|h_i| + |h_j|) / 2` and its phase is uniform.
pub fn add_pair_interactions(
    env: &Environment,
    pairs: &[(usize, usize)],
    strength: f64,
    seed: u64,
) -> Result<Environment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = env.h();
    let mut map: BTreeMap<(usize, usize), ChannelCoefficient> = env.interactions().clone();
    for &(a, b) in pairs {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if j >= h.len() {
            return Err(Error::Dimension {
                expected: h.len(),
                got: j + 1,
            });
        }
        let mag = strength * 0.5 * (h[i].norm() + h[j].norm());
        *map.entry((i, j)).or_default() += Complex64::from_polar(mag, uniform_phase(&mut rng));
    }
    Environment::with_interactions(env.h_z(), h.to_vec(), map, env.noise_floor_power())
}

/// A static multipath ray folded into the baseline channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraPath {
    pub length_m: f64,
    pub gain: f64,
}

/// Planar surface between a transmitter and a receiver.
///
/// Element positions are stored explicitly; `rows`, `cols` and the two
/// spacings describe the grid they came from and define the surface area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricScene {
    pub wavelength_m: f64,
    pub rows: usize,
    pub cols: usize,
    pub row_spacing_m: f64,
    pub col_spacing_m: f64,
    pub positions_m: Vec<[f64; 3]>,
    pub tx_m: [f64; 3],
    pub rx_m: [f64; 3],
    pub element_reflectivity: f64,
    pub direct_path_gain: f64,
    #[serde(default)]
    pub extra_paths: Vec<ExtraPath>,
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

impl GeometricScene {
    /// Builds a `rows × cols` grid in the plane `z = center[2]`, rows along
    /// y and columns along x, centred on `center`. Element index is
    /// row-major.
    #[allow(clippy::too_many_arguments)]
    pub fn planar_grid(
        wavelength_m: f64,
        center: [f64; 3],
        rows: usize,
        cols: usize,
        row_spacing_m: f64,
        col_spacing_m: f64,
        tx_m: [f64; 3],
        rx_m: [f64; 3],
    ) -> Self {
        let mut positions_m = Vec::with_capacity(rows * cols);
        let r0 = (rows as f64 - 1.0) / 2.0;
        let c0 = (cols as f64 - 1.0) / 2.0;
        for r in 0..rows {
            for c in 0..cols {
                positions_m.push([
                    center[0] + (c as f64 - c0) * col_spacing_m,
                    center[1] + (r as f64 - r0) * row_spacing_m,
                    center[2],
                ]);
            }
        }
        Self {
            wavelength_m,
            rows,
            cols,
            row_spacing_m,
            col_spacing_m,
            positions_m,
            tx_m,
            rx_m,
            element_reflectivity: 1.0,
            direct_path_gain: 1.0,
            extra_paths: Vec::new(),
        }
    }

    pub fn n_elements(&self) -> usize {
        self.positions_m.len()
    }

    /// Surface area `(rows · row_spacing) × (cols · col_spacing)`.
    pub fn area(&self) -> f64 {
        (self.rows as f64 * self.row_spacing_m) * (self.cols as f64 * self.col_spacing_m)
    }

    /// True when either grid spacing exceeds half the design wavelength
    /// (grating-lobe regime).
    pub fn spacing_warning(&self) -> bool {
        let half = self.wavelength_m / 2.0;
        self.row_spacing_m > half || self.col_spacing_m > half
    }

    /// Reflected path length `|tx − p_i| + |p_i − rx|` of every element.
    pub fn element_path_lengths(&self) -> Vec<f64> {
        self.positions_m
            .iter()
            .map(|&p| distance(self.tx_m, p) + distance(p, self.rx_m))
            .collect()
    }

    pub fn direct_path_length(&self) -> f64 {
        distance(self.tx_m, self.rx_m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_m > 0.0) {
            return Err(Error::Geometry("wavelength must be positive".into()));
        }
        if self.positions_m.is_empty() || self.rows * self.cols != self.positions_m.len() {
            return Err(Error::Geometry(format!(
                "{} positions do not fill a {}x{} grid",
                self.positions_m.len(),
                self.rows,
                self.cols
            )));
        }
        if !(self.row_spacing_m > 0.0 && self.col_spacing_m > 0.0) {
            return Err(Error::Geometry("grid spacing must be positive".into()));
        }
        if !(self.element_reflectivity > 0.0 && self.element_reflectivity <= 1.0) {
            return Err(Error::Geometry("element_reflectivity must lie in (0, 1]".into()));
        }
        if !(self.direct_path_gain >= 0.0) {
            return Err(Error::Geometry("direct_path_gain must be >= 0".into()));
        }
        if self.direct_path_length() == 0.0 {
            return Err(Error::Geometry("tx and rx coincide".into()));
        }
        for (i, &p) in self.positions_m.iter().enumerate() {
            if distance(self.tx_m, p) == 0.0 || distance(p, self.rx_m) == 0.0 {
                return Err(Error::Geometry(format!("element {i} coincides with an endpoint")));
            }
        }
        for e in &self.extra_paths {
            if !(e.length_m > 0.0) {
                return Err(Error::Geometry("extra path length must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(s)?;
        scene.validate()?;
        Ok(scene)
    }
}

fn spherical(gain: f64, spread: f64, path_length: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(gain / spread, -2.0 * PI * path_length / wavelength)
}

/// Evaluates the scene at one carrier frequency (Hz).
///
/// Element `i` contributes `ρ / (d_tx,i · d_i,rx) · exp(−j 2π (d_tx,i + d_i,rx) / λ)`;
/// the direct path and every extra ray contribute `g / L · exp(−j 2π L / λ)`.
pub fn gen_geometric(scene: &GeometricScene, frequency: f64) -> Result<Environment> {
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(Error::InvalidArgument("frequency must be positive".into()));
    }
    scene.validate()?;
    let wavelength = SPEED_OF_LIGHT / frequency;
    let d_direct = scene.direct_path_length();
    let mut h_z = spherical(scene.direct_path_gain, d_direct, d_direct, wavelength);
    for e in &scene.extra_paths {
        h_z += spherical(e.gain, e.length_m, e.length_m, wavelength);
    }
    let h = scene
        .positions_m
        .iter()
        .map(|&p| {
            let d1 = distance(scene.tx_m, p);
            let d2 = distance(p, scene.rx_m);
            spherical(scene.element_reflectivity, d1 * d2, d1 + d2, wavelength)
        })
        .collect();
    Environment::new(h_z, h)
}

/// One environment per frequency, all from the same geometry.
pub fn scene_at_frequencies(scene: &GeometricScene, freqs: &[f64]) -> Result<Vec<Environment>> {
    freqs.iter().map(|&f| gen_geometric(scene, f)).collect()
}
