//! Network-facing representations: event voxel grids, voxel normalization
//! and the normalized log-depth transform with its inverse.

use crate::error::{Error, Result};
use crate::events::Event;
use crate::scalar::Scalar;

/// B temporal bins of polarity mass over the sensor plane, covering the
/// half-open window declared at construction. Bin spacing is derived from
/// the declared window bounds so empty windows are well-defined zero grids.
#[derive(Clone, Debug)]
pub struct VoxelGrid<T: Scalar = f32> {
    pub bins: usize,
    pub height: usize,
    pub width: usize,
    pub t_start_us: u64,
    pub t_end_us: u64,
    /// Row-major [bins, height, width].
    pub data: Vec<T>,
}

impl<T: Scalar> VoxelGrid<T> {
    pub fn at(&self, bin: usize, y: usize, x: usize) -> T {
        self.data[(bin * self.height + y) * self.width + x]
    }

    pub fn total(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.data {
            acc += v;
        }
        acc
    }
}

/// Deposit each event's polarity into the two temporal bins nearest its
/// normalized time t* = (B-1)(t - t0)/(t1 - t0), with bilinear weights;
/// spatial placement is a delta at the event pixel.
pub fn build_voxel_grid<T: Scalar>(
    events: &[Event],
    height: usize,
    width: usize,
    bins: usize,
    t_start_us: u64,
    t_end_us: u64,
) -> Result<VoxelGrid<T>> {
    if bins == 0 {
        return Err(Error::invalid_argument("voxel grid needs at least one bin"));
    }
    if t_end_us < t_start_us {
        return Err(Error::invalid_argument("voxel window end before start"));
    }
    if t_end_us == t_start_us {
        let distinct: std::collections::BTreeSet<u64> = events.iter().map(|e| e.t_us).collect();
        if distinct.len() > 1 {
            return Err(Error::invalid_data(
                "zero-duration voxel window with more than one distinct timestamp",
            ));
        }
    }
    let mut grid = VoxelGrid {
        bins,
        height,
        width,
        t_start_us,
        t_end_us,
        data: vec![T::zero(); bins * height * width],
    };
    let span = (t_end_us - t_start_us) as f64;
    for e in events {
        if e.t_us < t_start_us || e.t_us > t_end_us {
            return Err(Error::invalid_data(format!(
                "event at t={} outside window [{t_start_us}, {t_end_us}]",
                e.t_us
            )));
        }
        if (e.x as usize) >= width || (e.y as usize) >= height {
            return Err(Error::invalid_data(format!(
                "event at ({}, {}) outside {width}x{height}",
                e.x, e.y
            )));
        }
        let t_star = if span == 0.0 {
            0.0
        } else {
            (bins - 1) as f64 * (e.t_us - t_start_us) as f64 / span
        };
        let p = T::from_f64(e.polarity as f64);
        let b0 = t_star.floor() as usize;
        let frac = t_star - b0 as f64;
        let base = (e.y as usize) * width + e.x as usize;
        let w0 = T::from_f64(1.0 - frac);
        grid.data[(b0 * height * width) + base] += p * w0;
        if frac > 0.0 && b0 + 1 < bins {
            grid.data[((b0 + 1) * height * width) + base] += p * T::from_f64(frac);
        }
    }
    Ok(grid)
}

/// Standardize the non-zero entries to zero mean and unit variance
/// (population statistics); zero entries stay exactly zero. Degenerate
/// cases (fewer than two non-zero entries or vanishing spread) only
/// subtract the mean.
pub fn normalize_voxel<T: Scalar>(grid: &VoxelGrid<T>) -> VoxelGrid<T> {
    let nonzero: Vec<T> = grid.data.iter().copied().filter(|v| *v != T::zero()).collect();
    let mut out = grid.clone();
    if nonzero.is_empty() {
        return out;
    }
    let n = T::from_f64(nonzero.len() as f64);
    let mut mean = T::zero();
    for &v in &nonzero {
        mean += v;
    }
    mean = mean / n;
    let mut var = T::zero();
    for &v in &nonzero {
        var += (v - mean) * (v - mean);
    }
    var = var / n;
    let std = var.sqrt();
    let degenerate = nonzero.len() < 2 || std < T::from_f64(1e-6);
    for v in out.data.iter_mut() {
        if *v != T::zero() {
            *v = if degenerate { *v - mean } else { (*v - mean) / std };
        }
    }
    out
}

/// Normalized log-depth map with a validity mask.
#[derive(Clone, Debug)]
pub struct DepthMap {
    pub height: usize,
    pub width: usize,
    /// Metric depth in meters, when known.
    pub metric: Option<Vec<f32>>,
    /// Normalized log depth in [0, 1] on valid pixels.
    pub normalized: Vec<f32>,
    pub valid: Vec<bool>,
    pub alpha: f64,
    pub d_max: f64,
}

impl DepthMap {
    /// Build from metric depth: d_hat = (1/alpha) ln(d / d_max) + 1, clamped
    /// to [0, 1]. Invalid pixels carry 0 and a false mask bit.
    pub fn from_metric(
        metric: Vec<f32>,
        valid: Vec<bool>,
        height: usize,
        width: usize,
        alpha: f64,
        d_max: f64,
    ) -> Result<DepthMap> {
        if metric.len() != height * width || valid.len() != height * width {
            return Err(Error::invalid_argument("depth map size mismatch"));
        }
        if alpha <= 0.0 || d_max <= 0.0 {
            return Err(Error::invalid_argument("alpha and d_max must be positive"));
        }
        let normalized = metric
            .iter()
            .zip(&valid)
            .map(|(&d, &ok)| {
                if !ok {
                    return Ok(0.0f32);
                }
                if d <= 0.0 {
                    return Err(Error::invalid_data(format!(
                        "non-positive depth {d} on a valid pixel"
                    )));
                }
                Ok(depth_to_normalized(d as f64, alpha, d_max) as f32)
            })
            .collect::<Result<Vec<f32>>>()?;
        Ok(DepthMap {
            height,
            width,
            metric: Some(metric),
            normalized,
            valid,
            alpha,
            d_max,
        })
    }

    /// Metric depth recovered from the normalized channel.
    pub fn normalized_to_metric(&self) -> Vec<f32> {
        self.normalized
            .iter()
            .map(|&v| normalized_to_depth(v as f64, self.alpha, self.d_max) as f32)
            .collect()
    }
}

/// Scalar normalized log-depth transform, clamped to [0, 1].
pub fn depth_to_normalized(metric: f64, alpha: f64, d_max: f64) -> f64 {
    ((metric / d_max).ln() / alpha + 1.0).clamp(0.0, 1.0)
}

/// Inverse transform: d = d_max * exp(alpha (d_hat - 1)).
pub fn normalized_to_depth(normalized: f64, alpha: f64, d_max: f64) -> f64 {
    d_max * (alpha * (normalized - 1.0)).exp()
}
