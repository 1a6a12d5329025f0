//! Geometric drivers: frequency generalization and focusing field maps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ExperimentName, ExperimentReport, ExperimentSpec, Series};
use crate::channel::{power_to_db, rssi_ratio_exact};
use crate::error::{Error, Result};
use crate::optimize::halfplane_opt;
use crate::physics::{
    abbe_spot_area, focus_field_map, half_max_spot_area, transverse_half_max_width, AbbeParams,
    ArraySceneGrid, GridSpec,
};
use crate::synth::{gen_geometric, scene_at_frequencies, GeometricScene, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequencyOptions {
    pub center_hz: f64,
    pub span_hz: f64,
    pub step_hz: f64,
    pub top_k: usize,
    /// Required fractional loss of the centre dB gain at the predicted offset.
    pub min_decay: f64,
    /// Allowed distance of the checked sample from the predicted offset,
    /// as a fraction of the offset.
    pub offset_tolerance: f64,
}

impl Default for FrequencyOptions {
    fn default() -> Self {
        Self {
            center_hz: 2.42e9,
            span_hz: 50e6,
            step_hz: 1e6,
            top_k: 3,
            min_decay: 0.5,
            offset_tolerance: 0.1,
        }
    }
}

/// 16×16 half-wavelength surface in the `z = 0` plane with both endpoints
/// 2.5 m in front of it and 1.41 m apart, so the reflected paths run about
/// 4 m longer than the (attenuated) direct path.
pub fn default_frequency_scene(center_hz: f64) -> GeometricScene {
    let lambda = SPEED_OF_LIGHT / center_hz;
    let mut scene = GeometricScene::planar_grid(
        lambda,
        [0.0, 0.0, 0.0],
        16,
        16,
        lambda / 2.0,
        lambda / 2.0,
        [-1.0, 0.0, 2.5],
        [0.0, -1.0, 2.5],
    );
    scene.element_reflectivity = 0.05;
    scene.direct_path_gain = 0.5;
    scene
}

/// Magnitude-weighted mean length of the paths making up `h_Z`.
fn baseline_path_length(scene: &GeometricScene) -> f64 {
    let l = scene.direct_path_length();
    let mut w = scene.direct_path_gain / l;
    let mut wl = scene.direct_path_gain;
    for e in &scene.extra_paths {
        w += e.gain / e.length_m;
        wl += e.gain;
    }
    if w > 0.0 {
        wl / w
    } else {
        l
    }
}

/// Config optimized at the centre frequency, evaluated across the band.
pub fn exp_frequency(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let o = &spec.options.frequency;
    let scene = match &spec.env {
        Some(src) => src
            .scene()?
            .ok_or_else(|| Error::InvalidArgument("frequency needs a scene environment".into()))?,
        None => default_frequency_scene(o.center_hz),
    };
    let steps = (o.span_hz / o.step_hz).round() as i64;
    let offsets: Vec<f64> = (-steps..=steps).map(|k| k as f64 * o.step_hz).collect();
    let freqs: Vec<f64> = offsets.iter().map(|d| o.center_hz + d).collect();
    let center = steps as usize;

    let env0 = gen_geometric(&scene, o.center_hz)?;
    let (config, _) = halfplane_opt(&env0);
    let gains: Vec<f64> = scene_at_frequencies(&scene, &freqs)?
        .iter()
        .map(|e| rssi_ratio_exact(e, &config).map(power_to_db))
        .collect::<Result<_>>()?;
    let g0 = gains[center];
    let rank = 1 + gains.iter().filter(|&&g| g > g0).count();

    let paths = scene.element_path_lengths();
    let (mut w, mut wl) = (0.0, 0.0);
    for (i, h) in env0.h().iter().enumerate() {
        if config.get(i) {
            w += h.norm();
            wl += h.norm() * paths[i];
        }
    }
    let delta_l = if w > 0.0 { wl / w - baseline_path_length(&scene) } else { 0.0 };
    let predicted = SPEED_OF_LIGHT / (2.0 * delta_l.abs());

    let mut report = ExperimentReport::new(ExperimentName::Frequency, spec.seed);
    report.check(
        "center_in_top_k",
        rank <= o.top_k,
        format!("centre gain {g0:.3} dB ranks {rank} of {}", gains.len()),
    );
    let k = (predicted / o.step_hz).round() as i64;
    let within = k >= 1 && k <= steps && ((k as f64 * o.step_hz) - predicted).abs() <= o.offset_tolerance * predicted;
    let mut decays = Vec::new();
    if within && g0 > 0.0 {
        for side in [-1i64, 1] {
            let g = gains[(steps + side * k) as usize];
            decays.push(1.0 - g / g0);
        }
    }
    let decay_ok = decays.len() == 2 && decays.iter().all(|&d| d >= o.min_decay);
    report.check(
        "decays_at_predicted_offset",
        decay_ok,
        if decays.is_empty() {
            format!("predicted offset {:.3} MHz not testable on the grid (centre gain {g0:.3} dB)", predicted / 1e6)
        } else {
            format!(
                "predicted offset {:.3} MHz (sample {} MHz): dB gain lost {:.3} below, {:.3} above",
                predicted / 1e6,
                k as f64 * o.step_hz / 1e6,
                decays[0],
                decays[1]
            )
        },
    );
    report.metric("center_gain_db", g0);
    report.metric("center_rank", rank);
    report.metric("path_difference_m", delta_l);
    report.metric("predicted_offset_hz", predicted);
    report.metric("elements_on", config.count_ones());
    report.metric("best_config", config.to_hex());
    let mut series = Series::new("frequency_gain", &["frequency_hz", "offset_hz", "gain_db"]);
    for ((f, d), g) in freqs.iter().zip(&offsets).zip(&gains) {
        series.push(vec![*f, *d, *g]);
    }
    report.series.push(series);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffractionOptions {
    pub wavelength: f64,
    /// Emitter pitch in wavelengths.
    pub spacing: f64,
    pub large_count: usize,
    pub small_count: usize,
    /// Target distance for the field maps, in wavelengths.
    pub near_distance: f64,
    /// Field-map sample step, in wavelengths.
    pub grid_step: f64,
    pub grid_half_width: f64,
    pub grid_near: f64,
    pub grid_far: f64,
    /// Far-field target distance as a multiple of the large aperture.
    pub far_field_multiple: f64,
    pub abbe_factor: f64,
    pub coherent_counts: Vec<usize>,
}

impl Default for DiffractionOptions {
    fn default() -> Self {
        Self {
            wavelength: 0.1224,
            spacing: 0.5,
            large_count: 100,
            small_count: 4,
            near_distance: 20.0,
            grid_step: 0.25,
            grid_half_width: 25.0,
            grid_near: 2.0,
            grid_far: 45.0,
            far_field_multiple: 5.0,
            abbe_factor: 3.0,
            coherent_counts: vec![1, 2, 4, 17, 100],
        }
    }
}

/// Focusing maps for a large and a small array, the coherent-gain law, and
/// the far-field spot against the Abbe area.
pub fn exp_diffraction(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let o = &spec.options.diffraction;
    let lam = o.wavelength;
    let mut report = ExperimentReport::new(ExperimentName::Diffraction, spec.seed);

    // equidistant emitters on a circle around the target
    let target = [0.0, o.near_distance * lam];
    let radius = o.near_distance * lam / 2.0;
    let tiny_grid = GridSpec {
        origin: [target[0] - lam, target[1] - lam],
        extent: [2.0 * lam, 2.0 * lam],
        resolution: [9, 9],
    };
    let mut worst_gain_err: f64 = 0.0;
    let mut gain_series = Series::new("coherent_gain", &["m", "power_ratio"]);
    for &m in &o.coherent_counts {
        let emitters: Vec<[f64; 2]> = (0..m)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / m as f64 + 0.1;
                [target[0] + radius * a.cos(), target[1] + radius * a.sin()]
            })
            .collect();
        let one = ArraySceneGrid {
            emitters: vec![emitters[0]],
            target,
            wavelength: lam,
            grid: tiny_grid,
        };
        let all = ArraySceneGrid {
            emitters,
            ..one.clone()
        };
        let ratio = all.target_power() / one.target_power();
        worst_gain_err = worst_gain_err.max((ratio / m as f64 - 1.0).abs());
        gain_series.push(vec![m as f64, ratio]);
    }
    report.check(
        "coherent_gain_identity",
        worst_gain_err <= 1e-9,
        format!("max relative deviation from M× single-emitter power {worst_gain_err:e}"),
    );

    let step = o.grid_step * lam;
    let extent = [2.0 * o.grid_half_width * lam, (o.grid_far - o.grid_near) * lam];
    let grid = GridSpec {
        origin: [-o.grid_half_width * lam, o.grid_near * lam],
        extent,
        resolution: [
            (extent[0] / step).ceil() as usize + 1,
            (extent[1] / step).ceil() as usize + 1,
        ],
    };
    let mut areas = Vec::new();
    for count in [o.large_count, o.small_count] {
        let scene = ArraySceneGrid {
            emitters: ArraySceneGrid::line_array(count, o.spacing * lam, 0.0),
            target,
            wavelength: lam,
            grid,
        };
        let map = focus_field_map(&scene)?;
        areas.push(half_max_spot_area(&map, target, scene.target_power()));
        report.grids.push((format!("focus_{count}"), map));
    }
    report.check(
        "large_array_smaller_spot",
        areas[0] < areas[1],
        format!(
            "half-max area {:.5} m² with {} emitters vs {:.5} m² with {}",
            areas[0], o.large_count, areas[1], o.small_count
        ),
    );

    let aperture = o.large_count as f64 * o.spacing * lam;
    let far = o.far_field_multiple * aperture;
    let far_scene = ArraySceneGrid {
        emitters: ArraySceneGrid::line_array(o.large_count, o.spacing * lam, 0.0),
        target: [0.0, far],
        wavelength: lam,
        grid: GridSpec {
            origin: [-lam, far - lam],
            extent: [2.0 * lam, 2.0 * lam],
            resolution: [9, 9],
        },
    };
    let width = transverse_half_max_width(&far_scene, [0.0, 1.0], lam / 50.0);
    let spot = width * width;
    let abbe = abbe_spot_area(&AbbeParams::new(aperture * aperture, far, lam));
    let ratio = abbe / spot;
    report.check(
        "far_field_spot_within_abbe_factor",
        ratio <= o.abbe_factor && ratio >= 1.0 / o.abbe_factor,
        format!(
            "transverse half-max spot {spot:.5} m² vs Abbe {abbe:.5} m² (ratio {ratio:.3}, factor {})",
            o.abbe_factor
        ),
    );
    report.metric("spot_area_large", areas[0]);
    report.metric("spot_area_small", areas[1]);
    report.metric("far_field_distance_m", far);
    report.metric("far_field_width_m", width);
    report.metric("far_field_spot_m2", spot);
    report.metric("abbe_area_m2", abbe);
    report.metric("abbe_ratio", ratio);
    report.metric("max_coherent_gain_error", worst_gain_err);
    report.series.push(gain_series);
    Ok(report)
}
