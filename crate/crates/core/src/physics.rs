//! Focusing physics: 2D field maps of a phase-conjugate emitter array, the
//! Abbe focal-spot law, and the pixelation energy-ratio bound.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling grid: `resolution[0]` columns along x, `resolution[1]` rows
/// along y, spanning `[origin, origin + extent]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub resolution: [usize; 2],
}

impl GridSpec {
    pub fn spacing(&self) -> [f64; 2] {
        [
            self.extent[0] / (self.resolution[0] - 1) as f64,
            self.extent[1] / (self.resolution[1] - 1) as f64,
        ]
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        let [dx, dy] = self.spacing();
        [self.origin[0] + ix as f64 * dx, self.origin[1] + iy as f64 * dy]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|k| p[k] >= self.origin[k] && p[k] <= self.origin[k] + self.extent[k])
    }

    /// Grid index closest to `p`.
    pub fn nearest(&self, p: [f64; 2]) -> (usize, usize) {
        let [dx, dy] = self.spacing();
        let ix = ((p[0] - self.origin[0]) / dx).round().clamp(0.0, (self.resolution[0] - 1) as f64);
        let iy = ((p[1] - self.origin[1]) / dy).round().clamp(0.0, (self.resolution[1] - 1) as f64);
        (ix as usize, iy as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySceneGrid {
    pub emitters: Vec<[f64; 2]>,
    pub target: [f64; 2],
    pub wavelength: f64,
    pub grid: GridSpec,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl ArraySceneGrid {
    /// `count` emitters on the x axis at `spacing`, centred on `center_x`.
    pub fn line_array(count: usize, spacing: f64, center_x: f64) -> Vec<[f64; 2]> {
        let c0 = (count as f64 - 1.0) / 2.0;
        (0..count)
            .map(|k| [center_x + (k as f64 - c0) * spacing, 0.0])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.emitters.is_empty() {
            return Err(Error::InvalidArgument("need at least one emitter".into()));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::InvalidArgument("wavelength must be positive".into()));
        }
        let g = &self.grid;
        if g.resolution[0] < 2 || g.resolution[1] < 2 || !(g.extent[0] > 0.0 && g.extent[1] > 0.0) {
            return Err(Error::InvalidArgument("grid needs >= 2 samples and positive extent per axis".into()));
        }
        let [dx, dy] = g.spacing();
        let max_step = self.wavelength / 4.0 * (1.0 + 1e-9);
        if dx > max_step || dy > max_step {
            return Err(Error::InvalidArgument(
                "grid must sample at least 4 points per wavelength".into(),
            ));
        }
        if !g.contains(self.target) {
            return Err(Error::InvalidArgument("target lies outside the grid".into()));
        }
        Ok(())
    }

    /// Emitter drive `(1/√M) · exp(+j 2π |e − target| / λ)`.
    fn drives(&self) -> Vec<Complex64> {
        let amp = 1.0 / (self.emitters.len() as f64).sqrt();
        self.emitters
            .iter()
            .map(|&e| Complex64::from_polar(amp, 2.0 * PI * dist2(e, self.target) / self.wavelength))
            .collect()
    }

    /// Power at `p`; distances below λ/10 are clamped, reported in the flag.
    fn power_with(&self, drives: &[Complex64], p: [f64; 2]) -> (f64, bool) {
        let min_d = self.wavelength / 10.0;
        let mut clamped = false;
        let mut acc = Complex64::new(0.0, 0.0);
        for (&e, &w) in self.emitters.iter().zip(drives) {
            let mut d = dist2(e, p);
            if d < min_d {
                d = min_d;
                clamped = true;
            }
            acc += w * Complex64::from_polar(1.0 / d, -2.0 * PI * d / self.wavelength);
        }
        (acc.norm_sqr(), clamped)
    }

    /// Power at an arbitrary point.
    pub fn power_at(&self, p: [f64; 2]) -> f64 {
        self.power_with(&self.drives(), p).0
    }

    pub fn target_power(&self) -> f64 {
        self.power_at(self.target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub grid: GridSpec,
    /// Row-major (`y` outer, `x` inner).
    pub powers: Vec<f64>,
    /// True when some grid point sat within λ/10 of an emitter.
    pub clamped: bool,
}

impl FieldMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.powers[iy * self.grid.resolution[0] + ix]
    }

    /// Writes `x,y,power` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,power")?;
        for iy in 0..self.grid.resolution[1] {
            for ix in 0..self.grid.resolution[0] {
                let [x, y] = self.grid.point(ix, iy);
                writeln!(w, "{x},{y},{}", self.at(ix, iy))?;
            }
        }
        Ok(())
    }

    /// Little-endian binary grid: origin (2), extent (2), resolution (2) as
    /// f64, then the row-major powers as f64.
    pub fn write_bin<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        let header = [
            g.origin[0],
            g.origin[1],
            g.extent[0],
            g.extent[1],
            g.resolution[0] as f64,
            g.resolution[1] as f64,
        ];
        for v in header.iter().chain(&self.powers) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_bin<R: Read>(mut r: R) -> Result<Self> {
        let mut next = || -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let origin = [next()?, next()?];
        let extent = [next()?, next()?];
        let (nx, ny) = (next()?, next()?);
        if !(nx >= 2.0 && ny >= 2.0 && nx.fract() == 0.0 && ny.fract() == 0.0) {
            return Err(Error::InvalidArgument("bad grid resolution in header".into()));
        }
        let resolution = [nx as usize, ny as usize];
        let powers = (0..resolution[0] * resolution[1])
            .map(|_| next())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: GridSpec {
                origin,
                extent,
                resolution,
            },
            powers,
            clamped: false,
        })
    }
}

/// Power map of the phase-conjugate array over the scene grid.
pub fn focus_field_map(scene: &ArraySceneGrid) -> Result<FieldMap> {
    scene.validate()?;
    let drives = scene.drives();
    let [nx, ny] = scene.grid.resolution;
    let rows: Vec<(Vec<f64>, bool)> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let mut clamped = false;
            let row = (0..nx)
                .map(|ix| {
                    let (p, c) = scene.power_with(&drives, scene.grid.point(ix, iy));
                    clamped |= c;
                    p
                })
                .collect();
            (row, clamped)
        })
        .collect();
    let clamped = rows.iter().any(|(_, c)| *c);
    let powers = rows.into_iter().flat_map(|(r, _)| r).collect();
    Ok(FieldMap {
        grid: scene.grid,
        powers,
        clamped,
    })
}

/// Area of the 4-connected region around the grid point nearest `target`
/// where power ≥ `0.5 · target_power`.
pub fn half_max_spot_area(map: &FieldMap, target: [f64; 2], target_power: f64) -> f64 {
    let [nx, ny] = map.grid.resolution;
    let threshold = 0.5 * target_power;
    let start = map.grid.nearest(target);
    if map.at(start.0, start.1) < threshold {
        return 0.0;
    }
    let mut seen = vec![false; nx * ny];
    let mut queue = VecDeque::from([start]);
    seen[start.1 * nx + start.0] = true;
    let mut count = 0usize;
    while let Some((ix, iy)) = queue.pop_front() {
        count += 1;
        let mut push = |x: usize, y: usize| {
            let k = y * nx + x;
            if !seen[k] && map.powers[k] >= threshold {
                seen[k] = true;
                queue.push_back((x, y));
            }
        };
        if ix > 0 {
            push(ix - 1, iy);
        }
        if ix + 1 < nx {
            push(ix + 1, iy);
        }
        if iy > 0 {
            push(ix, iy - 1);
        }
        if iy + 1 < ny {
            push(ix, iy + 1);
        }
    }
    let [dx, dy] = map.grid.spacing();
    count as f64 * dx * dy
}

/// Half-max width of the focal spot along the line through the target
/// perpendicular to `axis` (the direction from the array centre to the
/// target), sampled at `step` with linear interpolation at the crossings.
pub fn transverse_half_max_width(scene: &ArraySceneGrid, axis: [f64; 2], step: f64) -> f64 {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
    let perp = [-axis[1] / norm, axis[0] / norm];
    let drives = scene.drives();
    let p0 = scene.power_with(&drives, scene.target).0;
    let half = 0.5 * p0;
    let at = |s: f64| {
        let p = [scene.target[0] + s * perp[0], scene.target[1] + s * perp[1]];
        scene.power_with(&drives, p).0
    };
    let crossing = |sign: f64| {
        let mut prev = (0.0, p0);
        let mut s = step;
        loop {
            let v = at(sign * s);
            if v < half {
                let frac = (prev.1 - half) / (prev.1 - v);
                return prev.0 + frac * (s - prev.0);
            }
            prev = (s, v);
            s += step;
            if s > 1e6 * scene.wavelength {
                return f64::INFINITY;
            }
        }
    };
    crossing(1.0) + crossing(-1.0)
}

/// Abbe focal-spot inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbbeParams {
    pub surface_area: f64,
    pub distance: f64,
    pub wavelength: f64,
    pub k: f64,
    /// Solid angle the surface subtends at the transmitter, in (0, 2π].
    pub solid_angle: f64,
}

impl AbbeParams {
    pub fn new(surface_area: f64, distance: f64, wavelength: f64) -> Self {
        Self {
            surface_area,
            distance,
            wavelength,
            k: 0.5,
            solid_angle: PI / 2.0,
        }
    }

    /// Received energy scale `Ω / a`.
    pub fn energy_scale(&self) -> f64 {
        self.solid_angle / abbe_spot_area(self)
    }
}

/// `a = k λ² (1 + 4 d² / A)`.
pub fn abbe_spot_area(p: &AbbeParams) -> f64 {
    p.k * p.wavelength * p.wavelength * (1.0 + 4.0 * p.distance * p.distance / p.surface_area)
}

/// Lower bound on the energy ratio between a surface with pixels of largest
/// dimension `a` and an ideal continuous surface, in units where `c = 1`
/// (so `λ = 1/ν`): `sin(π ν a) / (√2 π a ν)` for `a < λ`, else 0.
pub fn pixelation_bound(a: f64, frequency_nu: f64) -> f64 {
    let x = a * frequency_nu;
    if x >= 1.0 {
        return 0.0;
    }
    // sin(πx)/x, series near zero
    let sinc = if x < 1e-6 {
        PI * (1.0 - (PI * x).powi(2) / 6.0)
    } else {
        (PI * x).sin() / x
    };
    sinc / (2f64.sqrt() * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(emitters: Vec<[f64; 2]>, target: [f64; 2], lambda: f64, grid: GridSpec) -> ArraySceneGrid {
        ArraySceneGrid {
            emitters,
            target,
            wavelength: lambda,
            grid,
        }
    }

    fn grid(origin: [f64; 2], extent: [f64; 2], step: f64) -> GridSpec {
        GridSpec {
            origin,
            extent,
            resolution: [
                (extent[0] / step).round() as usize + 1,
                (extent[1] / step).round() as usize + 1,
            ],
        }
    }

    #[test]
    fn single_emitter_is_spherical() {
        let s = scene(vec![[0.0, 0.0]], [3.0, 0.0], 1.0, grid([-5.0, -5.0], [10.0, 10.0], 0.25));
        let map = focus_field_map(&s).unwrap();
        for iy in 0..map.grid.resolution[1] {
            for ix in 0..map.grid.resolution[0] {
                let [x, y] = map.grid.point(ix, iy);
                let d = (x * x + y * y).sqrt();
                if d >= 0.1 {
                    assert!((map.at(ix, iy) - 1.0 / (d * d)).abs() < 1e-12 / (d * d));
                }
            }
        }
        assert!(map.clamped);
    }

    #[test]
    fn coherent_gain_is_m_times_single() {
        let lambda = 0.125;
        let d = 4.0;
        let target = [0.3, -0.2];
        for m in [2usize, 4, 17, 100] {
            let emitters: Vec<[f64; 2]> = (0..m)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / m as f64;
                    [target[0] + d * a.cos(), target[1] + d * a.sin()]
                })
                .collect();
            let g = grid([-5.0, -5.0], [10.0, 10.0], lambda / 4.0);
            let multi = scene(emitters.clone(), target, lambda, g).target_power();
            let single = scene(vec![emitters[0]], target, lambda, g).target_power();
            assert!((multi / single - m as f64).abs() <= 1e-9 * m as f64, "m={m}");
        }
    }

    #[test]
    fn large_array_focuses_tighter() {
        let lambda = 1.0;
        let g = grid([-30.0, 5.0], [60.0, 50.0], 0.25);
        let target = [0.0, 25.0];
        let small = scene(ArraySceneGrid::line_array(4, 0.5, 0.0), target, lambda, g);
        let large = scene(ArraySceneGrid::line_array(100, 0.5, 0.0), target, lambda, g);
        let a_small = half_max_spot_area(&focus_field_map(&small).unwrap(), target, small.target_power());
        let a_large = half_max_spot_area(&focus_field_map(&large).unwrap(), target, large.target_power());
        assert!(a_large < a_small, "{a_large} vs {a_small}");
    }

    #[test]
    fn grid_validation() {
        let s = scene(vec![[0.0, 0.0]], [30.0, 0.0], 1.0, grid([-5.0, -5.0], [10.0, 10.0], 0.25));
        assert!(focus_field_map(&s).is_err());
        let s = scene(vec![[0.0, 0.0]], [1.0, 0.0], 1.0, grid([-5.0, -5.0], [10.0, 10.0], 0.5));
        assert!(focus_field_map(&s).is_err());
        let s = scene(vec![], [1.0, 0.0], 1.0, grid([-5.0, -5.0], [10.0, 10.0], 0.25));
        assert!(focus_field_map(&s).is_err());
    }

    #[test]
    fn binary_and_csv_formats() {
        let s = scene(vec![[0.0, 0.0], [1.0, 0.0]], [0.5, 2.0], 1.0, grid([-1.0, 1.0], [3.0, 2.0], 0.25));
        let map = focus_field_map(&s).unwrap();
        let mut buf = Vec::new();
        map.write_bin(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * (6 + map.powers.len()));
        let back = FieldMap::read_bin(&buf[..]).unwrap();
        assert_eq!(back.grid, map.grid);
        assert_eq!(back.powers, map.powers);
        let mut csv = Vec::new();
        map.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + map.powers.len());
        assert!(text.starts_with("x,y,power\n-1,1,"));
    }

    #[test]
    fn abbe_examples() {
        let mut p = AbbeParams::new(6.0, 1e-9, 0.1224);
        assert!((abbe_spot_area(&p) - 0.5 * 0.1224 * 0.1224).abs() < 1e-15);
        p.distance = 1.0;
        p.surface_area = 4.0;
        assert!((abbe_spot_area(&p) - 0.1224 * 0.1224).abs() < 1e-15);
        let p = AbbeParams::new(6.0, 3.0, 0.1224);
        assert!((abbe_spot_area(&p) - 0.5 * 0.1224 * 0.1224 * 7.0).abs() < 1e-15);
        assert!((abbe_spot_area(&p) - 0.0524).abs() < 1e-4);
        assert!(p.energy_scale() > 0.0);
    }

    #[test]
    fn pixelation_examples() {
        let nu = 2.4;
        assert!((pixelation_bound(1e-12, nu) - 1.0 / 2f64.sqrt()).abs() < 1e-9);
        assert!((pixelation_bound(0.5 / nu, nu) - 2.0 / (2f64.sqrt() * PI)).abs() < 1e-9);
        assert_eq!(pixelation_bound(1.0 / nu, nu), 0.0);
        assert_eq!(pixelation_bound(3.0 / nu, nu), 0.0);
        let mut prev = f64::INFINITY;
        for k in 1..1000 {
            let v = pixelation_bound(k as f64 / 1000.0 / nu, nu);
            assert!(v <= prev);
            prev = v;
        }
    }
}
