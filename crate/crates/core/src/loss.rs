//! Training losses on normalized log depth and evaluation metrics on metric
//! depth.
//!
//! Losses operate on single samples ([1, 1, H, W]); batched training slices
//! per sample so the scale-invariant statistic never pools across images.
//! Residuals are zeroed outside the validity mask before any spatial
//! operator, so values at invalid pixels can never reach a loss.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::ops;
use crate::tensor::Tensor;

/// Number of pyramid levels in the gradient-matching loss.
pub const GRAD_LOSS_SCALES: usize = 4;

fn check_single_sample<T: Scalar>(
    context: &'static str,
    pred: &Tensor<T>,
    gt: &Tensor<T>,
    mask: &Tensor<T>,
) -> Result<(usize, usize)> {
    let (n, c, h, w) = pred.dim4()?;
    if n != 1 || c != 1 {
        return Err(Error::invalid_argument(format!(
            "{context} expects a [1, 1, H, W] prediction, got {:?}",
            pred.shape()
        )));
    }
    if gt.shape() != pred.shape() {
        return Err(Error::ShapeMismatch {
            context,
            lhs: pred.shape().to_vec(),
            rhs: gt.shape().to_vec(),
        });
    }
    if mask.shape() != pred.shape() {
        return Err(Error::ShapeMismatch {
            context,
            lhs: pred.shape().to_vec(),
            rhs: mask.shape().to_vec(),
        });
    }
    Ok((h, w))
}

/// 0/1 mask tensor from a boolean image.
pub fn mask_tensor<T: Scalar>(valid: &[bool], height: usize, width: usize) -> Tensor<T> {
    debug_assert_eq!(valid.len(), height * width);
    let data: Vec<T> = valid
        .iter()
        .map(|&b| if b { T::one() } else { T::zero() })
        .collect();
    Tensor::from_vec(&[1, 1, height, width], data).expect("mask shape")
}

fn mask_count<T: Scalar>(mask: &Tensor<T>) -> usize {
    mask.data().iter().filter(|v| **v != T::zero()).count()
}

/// Scale-invariant loss over valid pixels:
/// (1/n) sum R^2 - (1/n^2) (sum R)^2 with R = pred - gt.
pub fn scale_invariant_loss<T: Scalar>(
    pred: &Tensor<T>,
    gt: &Tensor<T>,
    mask: &Tensor<T>,
) -> Result<Tensor<T>> {
    check_single_sample("scale_invariant_loss", pred, gt, mask)?;
    let n = mask_count(mask);
    if n == 0 {
        return Err(Error::invalid_data("scale_invariant_loss: empty mask"));
    }
    let r = ops::mul(&ops::sub(pred, gt)?, mask)?;
    let sum_sq = ops::sum_all(&ops::mul(&r, &r)?);
    let sum_r = ops::sum_all(&r);
    let n = n as f64;
    ops::sub(
        &ops::scale(&sum_sq, 1.0 / n),
        &ops::scale(&ops::mul(&sum_r, &sum_r)?, 1.0 / (n * n)),
    )
}

/// Validity pyramid: a coarse pixel is valid when all four children are, and
/// a 1-pixel border is excluded at every scale so the Sobel zero padding can
/// never touch a counted pixel.
fn mask_pyramid(valid: &[bool], height: usize, width: usize, scales: usize) -> Vec<(Vec<bool>, usize, usize)> {
    let mut levels = Vec::with_capacity(scales);
    let mut cur = valid.to_vec();
    let (mut h, mut w) = (height, width);
    for s in 0..scales {
        levels.push((cur.clone(), h, w));
        if s + 1 < scales {
            let (nh, nw) = (h / 2, w / 2);
            let mut next = vec![false; nh * nw];
            for y in 0..nh {
                for x in 0..nw {
                    next[y * nw + x] = cur[2 * y * w + 2 * x]
                        && cur[2 * y * w + 2 * x + 1]
                        && cur[(2 * y + 1) * w + 2 * x]
                        && cur[(2 * y + 1) * w + 2 * x + 1];
                }
            }
            cur = next;
            h = nh;
            w = nw;
        }
    }
    levels
}

fn interior(valid: &[bool], h: usize, w: usize) -> Vec<bool> {
    let mut out = vec![false; h * w];
    if h > 2 && w > 2 {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                out[y * w + x] = valid[y * w + x];
            }
        }
    }
    out
}

/// Multi-scale gradient-matching loss: per scale, the mean of
/// |dx R| + |dy R| (Sobel) over valid interior pixels, summed over
/// [`GRAD_LOSS_SCALES`] scales of an average-pooled residual pyramid. A
/// scale with no valid pixels contributes zero.
pub fn gradient_matching_loss<T: Scalar>(
    pred: &Tensor<T>,
    gt: &Tensor<T>,
    mask: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (h, w) = check_single_sample("gradient_matching_loss", pred, gt, mask)?;
    let div = 1usize << (GRAD_LOSS_SCALES - 1);
    if h % div != 0 || w % div != 0 {
        return Err(Error::invalid_argument(format!(
            "gradient_matching_loss needs dims divisible by {div}, got {h}x{w}"
        )));
    }
    let valid: Vec<bool> = mask.data().iter().map(|v| *v != T::zero()).collect();
    let levels = mask_pyramid(&valid, h, w, GRAD_LOSS_SCALES);

    let mut r = ops::mul(&ops::sub(pred, gt)?, mask)?;
    let mut total = Tensor::scalar(T::zero());
    for (s, (level_valid, lh, lw)) in levels.iter().enumerate() {
        if s > 0 {
            r = ops::avg_downsample2x(&r)?;
        }
        let inter = interior(level_valid, *lh, *lw);
        let n_s = inter.iter().filter(|b| **b).count();
        if n_s == 0 {
            continue;
        }
        let m = mask_tensor::<T>(&inter, *lh, *lw);
        let (gx, gy) = ops::sobel_gradients(&r)?;
        let term = ops::sum_all(&ops::mul(&ops::add(&ops::abs(&gx), &ops::abs(&gy))?, &m)?);
        total = ops::add(&total, &ops::scale(&term, 1.0 / n_s as f64))?;
    }
    Ok(total)
}

/// Per-prediction losses at one label, kept separate for logging.
pub struct LabelLoss<T: Scalar> {
    pub si: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> LabelLoss<T> {
    pub fn compute(pred: &Tensor<T>, gt: &Tensor<T>, mask: &Tensor<T>) -> Result<Self> {
        Ok(LabelLoss {
            si: scale_invariant_loss(pred, gt, mask)?,
            grad: gradient_matching_loss(pred, gt, mask)?,
        })
    }

    pub fn total(&self, lambda: f64) -> Result<Tensor<T>> {
        ops::add(&self.si, &ops::scale(&self.grad, lambda))
    }
}

/// Sequence loss: at each label the available prediction losses (two for the
/// temporally aligned voxel/frame pair, one otherwise) are averaged, then
/// summed over the labels.
pub fn total_sequence_loss<T: Scalar>(
    per_label: &[Vec<Tensor<T>>],
) -> Result<Tensor<T>> {
    if per_label.is_empty() {
        return Err(Error::invalid_argument("sequence loss needs >= 1 label"));
    }
    let mut total = Tensor::scalar(T::zero());
    for (i, losses) in per_label.iter().enumerate() {
        if losses.is_empty() {
            return Err(Error::invalid_data(format!(
                "label {i} has no aligned prediction"
            )));
        }
        let mut acc = losses[0].clone();
        for l in &losses[1..] {
            acc = ops::add(&acc, l)?;
        }
        total = ops::add(&total, &ops::scale(&acc, 1.0 / losses.len() as f64))?;
    }
    Ok(total)
}

/// Depth metrics over valid pixels with ground truth at or below the cutoff.
/// `None` when no pixel survives the cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthMetrics {
    pub abs_rel: Option<f64>,
    pub mae: Option<f64>,
}

pub fn depth_metrics(
    pred_metric: &[f32],
    gt_metric: &[f32],
    valid: &[bool],
    cutoff_m: f64,
) -> Result<DepthMetrics> {
    if pred_metric.len() != gt_metric.len() || pred_metric.len() != valid.len() {
        return Err(Error::invalid_argument("depth_metrics length mismatch"));
    }
    if cutoff_m <= 0.0 {
        return Err(Error::invalid_argument("cutoff must be positive"));
    }
    let mut n = 0usize;
    let mut abs_rel = 0.0f64;
    let mut mae = 0.0f64;
    for ((&p, &g), &ok) in pred_metric.iter().zip(gt_metric).zip(valid) {
        if !ok || g as f64 > cutoff_m {
            continue;
        }
        let (p, g) = (p as f64, g as f64);
        abs_rel += (p - g).abs() / g;
        mae += (p - g).abs();
        n += 1;
    }
    if n == 0 {
        return Ok(DepthMetrics {
            abs_rel: None,
            mae: None,
        });
    }
    Ok(DepthMetrics {
        abs_rel: Some(abs_rel / n as f64),
        mae: Some(mae / n as f64),
    })
}
