//! Differentiable operations. Each op computes its forward value eagerly and
//! registers a backward closure when any parent tracks gradients.
//!
//! Layout is fixed batch-major NCHW; binary ops require exact shape equality
//! (the architecture never needs broadcasting).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::gemm::{self, ConvGeom};
use crate::tensor::{Op, Tensor};

fn shape_err(context: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::ShapeMismatch {
        context,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// pointwise ops
// ---------------------------------------------------------------------------

fn unary<T: Scalar>(
    x: &Tensor<T>,
    fwd: impl Fn(T) -> T,
    // d(out)/d(in) from (input value, output value)
    dfd: impl Fn(T, T) -> T + 'static,
) -> Tensor<T> {
    let data: Vec<T> = x.data().iter().map(|&v| fwd(v)).collect();
    let op = Op {
        parents: vec![x.clone()],
        backward: Box::new(move |ctx| {
            if !ctx.parents[0].tracks() {
                return vec![None];
            }
            let xd = ctx.parents[0].data();
            let g = ctx
                .out_grad
                .iter()
                .zip(xd.iter().zip(ctx.out_data))
                .map(|(&og, (&xv, &yv))| og * dfd(xv, yv))
                .collect();
            vec![Some(g)]
        }),
    };
    Tensor::from_op(x.shape().to_vec(), data, op)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    unary(
        x,
        |v| if v > T::zero() { v } else { T::zero() },
        |xv, _| if xv > T::zero() { T::one() } else { T::zero() },
    )
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    unary(
        x,
        |v| T::one() / (T::one() + (-v).exp()),
        |_, yv| yv * (T::one() - yv),
    )
}

pub fn tanh<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    unary(x, |v| v.tanh(), |_, yv| T::one() - yv * yv)
}

/// |x|, with subgradient 0 at the origin.
pub fn abs<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    unary(
        x,
        |v| v.abs(),
        |xv, _| {
            if xv > T::zero() {
                T::one()
            } else if xv < T::zero() {
                -T::one()
            } else {
                T::zero()
            }
        },
    )
}

/// 1 - x (the ConvGRU convex-combination complement).
pub fn one_minus<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    unary(x, |v| T::one() - v, |_, _| -T::one())
}

/// x * c for a compile-time constant factor.
pub fn scale<T: Scalar>(x: &Tensor<T>, c: f64) -> Tensor<T> {
    let cv = T::from_f64(c);
    unary(x, move |v| v * cv, move |_, _| cv)
}

fn binary<T: Scalar>(
    context: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    fwd: impl Fn(T, T) -> T,
    // gradients w.r.t. (a, b) from (a value, b value, out cotangent)
    bwd: impl Fn(T, T, T) -> (T, T) + 'static,
) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(shape_err(context, a.shape(), b.shape()));
    }
    let data: Vec<T> = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| fwd(x, y))
        .collect();
    let op = Op {
        parents: vec![a.clone(), b.clone()],
        backward: Box::new(move |ctx| {
            let (need_a, need_b) = (ctx.parents[0].tracks(), ctx.parents[1].tracks());
            let ad = ctx.parents[0].data();
            let bd = ctx.parents[1].data();
            let mut ga = need_a.then(|| Vec::with_capacity(ad.len()));
            let mut gb = need_b.then(|| Vec::with_capacity(bd.len()));
            for ((&x, &y), &og) in ad.iter().zip(bd.iter()).zip(ctx.out_grad) {
                let (da, db) = bwd(x, y, og);
                if let Some(v) = ga.as_mut() {
                    v.push(da);
                }
                if let Some(v) = gb.as_mut() {
                    v.push(db);
                }
            }
            vec![ga, gb]
        }),
    };
    Ok(Tensor::from_op(a.shape().to_vec(), data, op))
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary("add", a, b, |x, y| x + y, |_, _, g| (g, g))
}

pub fn sub<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary("sub", a, b, |x, y| x - y, |_, _, g| (g, -g))
}

pub fn mul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    binary("mul", a, b, |x, y| x * y, |x, y, g| (g * y, g * x))
}

// ---------------------------------------------------------------------------
// reductions and shape ops
// ---------------------------------------------------------------------------

/// Sum of every element, as a 1-element tensor.
pub fn sum_all<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut acc = T::zero();
    for &v in x.data().iter() {
        acc += v;
    }
    let n = x.numel();
    let op = Op {
        parents: vec![x.clone()],
        backward: Box::new(move |ctx| {
            if !ctx.parents[0].tracks() {
                return vec![None];
            }
            vec![Some(vec![ctx.out_grad[0]; n])]
        }),
    };
    Tensor::from_op(vec![1], vec![acc], op)
}

/// Concatenate two 4-D tensors along the channel axis.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, ca, h, w) = a.dim4()?;
    let (nb, cb, hb, wb) = b.dim4()?;
    if n != nb || h != hb || w != wb {
        return Err(shape_err("concat_channels", a.shape(), b.shape()));
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(n * (ca + cb) * plane);
    {
        let ad = a.data();
        let bd = b.data();
        for bi in 0..n {
            data.extend_from_slice(&ad[bi * ca * plane..(bi + 1) * ca * plane]);
            data.extend_from_slice(&bd[bi * cb * plane..(bi + 1) * cb * plane]);
        }
    }
    let op = Op {
        parents: vec![a.clone(), b.clone()],
        backward: Box::new(move |ctx| {
            let (need_a, need_b) = (ctx.parents[0].tracks(), ctx.parents[1].tracks());
            let mut ga = need_a.then(|| Vec::with_capacity(n * ca * plane));
            let mut gb = need_b.then(|| Vec::with_capacity(n * cb * plane));
            for bi in 0..n {
                let base = bi * (ca + cb) * plane;
                if let Some(v) = ga.as_mut() {
                    v.extend_from_slice(&ctx.out_grad[base..base + ca * plane]);
                }
                if let Some(v) = gb.as_mut() {
                    v.extend_from_slice(&ctx.out_grad[base + ca * plane..base + (ca + cb) * plane]);
                }
            }
            vec![ga, gb]
        }),
    };
    Ok(Tensor::from_op(vec![n, ca + cb, h, w], data, op))
}

/// Extract batch element `i` as a [1, C, H, W] tensor.
pub fn select_batch<T: Scalar>(x: &Tensor<T>, i: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dim4()?;
    if i >= n {
        return Err(Error::invalid_argument(format!(
            "batch index {i} out of range for batch size {n}"
        )));
    }
    let len = c * h * w;
    let data = x.data()[i * len..(i + 1) * len].to_vec();
    let op = Op {
        parents: vec![x.clone()],
        backward: Box::new(move |ctx| {
            if !ctx.parents[0].tracks() {
                return vec![None];
            }
            let mut g = vec![T::zero(); n * len];
            g[i * len..(i + 1) * len].copy_from_slice(ctx.out_grad);
            vec![Some(g)]
        }),
    };
    Ok(Tensor::from_op(vec![1, c, h, w], data, op))
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

/// 2-D cross-correlation with zero padding. `weight` is (C_out, C_in, k, k);
/// output spatial size is floor((H + 2p - k) / stride) + 1.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (n, cin, h, w) = input.dim4()?;
    let (cout, wcin, kh, kw) = weight.dim4()?;
    if wcin != cin {
        return Err(shape_err("conv2d input/weight", input.shape(), weight.shape()));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(shape_err("conv2d bias", &[cout], b.shape()));
        }
    }
    if stride == 0 {
        return Err(Error::invalid_argument("conv2d stride must be >= 1"));
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(Error::invalid_argument(format!(
            "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * padding,
            w + 2 * padding
        )));
    }
    let geom = ConvGeom {
        cin,
        h,
        w,
        kh,
        kw,
        stride,
        pad: padding,
        oh: (h + 2 * padding - kh) / stride + 1,
        ow: (w + 2 * padding - kw) / stride + 1,
    };
    let k = geom.patch_len();
    let nsp = geom.out_len();
    let mut out = vec![T::zero(); n * cout * nsp];
    {
        let xd = input.data();
        let wd = weight.data();
        let mut cols = vec![T::zero(); k * nsp];
        for bi in 0..n {
            gemm::im2col(&xd[bi * cin * h * w..(bi + 1) * cin * h * w], &geom, &mut cols);
            gemm::matmul_acc(
                &mut out[bi * cout * nsp..(bi + 1) * cout * nsp],
                &wd,
                &cols,
                cout,
                k,
                nsp,
            );
        }
        if let Some(b) = bias {
            let bd = b.data();
            for bi in 0..n {
                for c in 0..cout {
                    let row = &mut out[(bi * cout + c) * nsp..(bi * cout + c + 1) * nsp];
                    let bv = bd[c];
                    for o in row.iter_mut() {
                        *o += bv;
                    }
                }
            }
        }
    }

    let mut parents = vec![input.clone(), weight.clone()];
    let has_bias = bias.is_some();
    if let Some(b) = bias {
        parents.push(b.clone());
    }
    let op = Op {
        parents,
        backward: Box::new(move |ctx| {
            let input = &ctx.parents[0];
            let weight = &ctx.parents[1];
            let need_dx = input.tracks();
            let need_dw = weight.tracks();
            let need_db = has_bias && ctx.parents[2].tracks();
            let xd = input.data();
            let wd = weight.data();
            let mut dx = need_dx.then(|| vec![T::zero(); n * cin * h * w]);
            let mut dw = need_dw.then(|| vec![T::zero(); cout * k]);
            let mut db = need_db.then(|| vec![T::zero(); cout]);
            let wt = need_dx.then(|| gemm::transpose(&wd, cout, k));
            let mut cols = need_dw.then(|| vec![T::zero(); k * nsp]);
            let mut dcols = need_dx.then(|| vec![T::zero(); k * nsp]);
            for bi in 0..n {
                let dout_b = &ctx.out_grad[bi * cout * nsp..(bi + 1) * cout * nsp];
                if let (Some(dw), Some(cols)) = (dw.as_mut(), cols.as_mut()) {
                    gemm::im2col(&xd[bi * cin * h * w..(bi + 1) * cin * h * w], &geom, cols);
                    gemm::matmul_abt_acc(dw, dout_b, cols, cout, nsp, k);
                }
                if let (Some(dx), Some(wt), Some(dcols)) = (dx.as_mut(), wt.as_ref(), dcols.as_mut())
                {
                    dcols.fill(T::zero());
                    gemm::matmul_acc(dcols, wt, dout_b, k, cout, nsp);
                    gemm::col2im_acc(dcols, &geom, &mut dx[bi * cin * h * w..(bi + 1) * cin * h * w]);
                }
                if let Some(db) = db.as_mut() {
                    for c in 0..cout {
                        let mut acc = T::zero();
                        for &v in &dout_b[c * nsp..(c + 1) * nsp] {
                            acc += v;
                        }
                        db[c] += acc;
                    }
                }
            }
            let mut grads = vec![dx, dw];
            if has_bias {
                grads.push(db);
            }
            grads
        }),
    };
    Ok(Tensor::from_op(vec![n, cout, geom.oh, geom.ow], out, op))
}

// ---------------------------------------------------------------------------
// resampling
// ---------------------------------------------------------------------------

/// Per-axis taps for 2x bilinear upsampling with half-pixel centers
/// (the non-align-corners convention; mean preserving on constants).
fn upsample_taps<T: Scalar>(out_len: usize, in_len: usize) -> Vec<(usize, usize, T, T)> {
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (in_len - 1) as f64);
            let i0 = src.floor() as usize;
            let f = src - i0 as f64;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, T::from_f64(1.0 - f), T::from_f64(f))
        })
        .collect()
}

/// Double both spatial dimensions by bilinear interpolation.
pub fn bilinear_upsample2x<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dim4()?;
    let (oh, ow) = (h * 2, w * 2);
    let ytaps = upsample_taps::<T>(oh, h);
    let xtaps = upsample_taps::<T>(ow, w);
    let mut out = vec![T::zero(); n * c * oh * ow];
    {
        let xd = x.data();
        for pl in 0..n * c {
            let src = &xd[pl * h * w..(pl + 1) * h * w];
            let dst = &mut out[pl * oh * ow..(pl + 1) * oh * ow];
            for (oy, &(y0, y1, wy0, wy1)) in ytaps.iter().enumerate() {
                for (ox, &(x0, x1, wx0, wx1)) in xtaps.iter().enumerate() {
                    dst[oy * ow + ox] = wy0 * (wx0 * src[y0 * w + x0] + wx1 * src[y0 * w + x1])
                        + wy1 * (wx0 * src[y1 * w + x0] + wx1 * src[y1 * w + x1]);
                }
            }
        }
    }
    let op = Op {
        parents: vec![x.clone()],
        backward: Box::new(move |ctx| {
            if !ctx.parents[0].tracks() {
                return vec![None];
            }
            let mut dx = vec![T::zero(); n * c * h * w];
            for pl in 0..n * c {
                let src = &mut dx[pl * h * w..(pl + 1) * h * w];
                let g = &ctx.out_grad[pl * oh * ow..(pl + 1) * oh * ow];
                for (oy, &(y0, y1, wy0, wy1)) in ytaps.iter().enumerate() {
                    for (ox, &(x0, x1, wx0, wx1)) in xtaps.iter().enumerate() {
                        let gv = g[oy * ow + ox];
                        src[y0 * w + x0] += wy0 * wx0 * gv;
                        src[y0 * w + x1] += wy0 * wx1 * gv;
                        src[y1 * w + x0] += wy1 * wx0 * gv;
                        src[y1 * w + x1] += wy1 * wx1 * gv;
                    }
                }
            }
            vec![Some(dx)]
        }),
    };
    Ok(Tensor::from_op(vec![n, c, oh, ow], out, op))
}

/// 2x2 mean pooling. Spatial dims must be even; callers crop first.
pub fn avg_downsample2x<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dim4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid_argument(format!(
            "avg_downsample2x needs even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let mut out = vec![T::zero(); n * c * oh * ow];
    {
        let xd = x.data();
        for pl in 0..n * c {
            let src = &xd[pl * h * w..(pl + 1) * h * w];
            let dst = &mut out[pl * oh * ow..(pl + 1) * oh * ow];
            for oy in 0..oh {
                for ox in 0..ow {
                    let base = 2 * oy * w + 2 * ox;
                    dst[oy * ow + ox] =
                        (src[base] + src[base + 1] + src[base + w] + src[base + w + 1]) * quarter;
                }
            }
        }
    }
    let op = Op {
        parents: vec![x.clone()],
        backward: Box::new(move |ctx| {
            if !ctx.parents[0].tracks() {
                return vec![None];
            }
            let mut dx = vec![T::zero(); n * c * h * w];
            for pl in 0..n * c {
                let dst = &mut dx[pl * h * w..(pl + 1) * h * w];
                let g = &ctx.out_grad[pl * oh * ow..(pl + 1) * oh * ow];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let gv = g[oy * ow + ox] * quarter;
                        let base = 2 * oy * w + 2 * ox;
                        dst[base] += gv;
                        dst[base + 1] += gv;
                        dst[base + w] += gv;
                        dst[base + w + 1] += gv;
                    }
                }
            }
            vec![Some(dx)]
        }),
    };
    Ok(Tensor::from_op(vec![n, c, oh, ow], out, op))
}

// ---------------------------------------------------------------------------
// Sobel
// ---------------------------------------------------------------------------

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

fn sobel_one<T: Scalar>(x: &Tensor<T>, kernel: &'static [[f64; 3]; 3]) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dim4()?;
    if c != 1 {
        return Err(Error::invalid_argument(format!(
            "sobel_gradients expects a single channel, got {c}"
        )));
    }
    let k: Vec<T> = kernel
        .iter()
        .flatten()
        .map(|&v| T::from_f64(v))
        .collect();
    let mut out = vec![T::zero(); n * h * w];
    {
        let xd = x.data();
        for pl in 0..n {
            let src = &xd[pl * h * w..(pl + 1) * h * w];
            let dst = &mut out[pl * h * w..(pl + 1) * h * w];
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = T::zero();
                    for a in 0..3usize {
                        let iy = y as isize + a as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for b in 0..3usize {
                            let ix = xx as isize + b as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += k[a * 3 + b] * src[iy as usize * w + ix as usize];
                        }
                    }
                    dst[y * w + xx] = acc;
                }
            }
        }
    }
    let kb = k.clone();
    let op = Op {
        parents: vec![x.clone()],
        backward: Box::new(move |ctx| {
            if !ctx.parents[0].tracks() {
                return vec![None];
            }
            let mut dx = vec![T::zero(); n * h * w];
            for pl in 0..n {
                let g = &ctx.out_grad[pl * h * w..(pl + 1) * h * w];
                let dst = &mut dx[pl * h * w..(pl + 1) * h * w];
                for y in 0..h {
                    for xx in 0..w {
                        let gv = g[y * w + xx];
                        if gv == T::zero() {
                            continue;
                        }
                        for a in 0..3usize {
                            let iy = y as isize + a as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for b in 0..3usize {
                                let ix = xx as isize + b as isize - 1;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                dst[iy as usize * w + ix as usize] += kb[a * 3 + b] * gv;
                            }
                        }
                    }
                }
            }
            vec![Some(dx)]
        }),
    };
    Ok(Tensor::from_op(vec![n, 1, h, w], out, op))
}

/// Horizontal and vertical Sobel responses with zero padding. Callers mask
/// out a 1-pixel border so the padding convention cannot reach any loss.
pub fn sobel_gradients<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    Ok((sobel_one(x, &SOBEL_X)?, sobel_one(x, &SOBEL_Y)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t4(shape: [usize; 4], data: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(&shape, data).unwrap()
    }

    #[test]
    fn relu_values() {
        let x = Tensor::<f64>::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).to_vec(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn sigmoid_tanh_at_zero() {
        let x = Tensor::<f64>::from_vec(&[1], vec![0.0]).unwrap();
        assert_eq!(sigmoid(&x).item(), 0.5);
        assert_eq!(tanh(&x).item(), 0.0);
    }

    #[test]
    fn binary_shape_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 1, 2, 2]);
        let b = Tensor::<f64>::zeros(&[2, 1, 2, 3]);
        let err = mul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 1, 2, 2]") && msg.contains("[2, 1, 2, 3]"), "{msg}");
    }

    #[test]
    fn conv_identity_kernel() {
        let x = t4([1, 1, 3, 3], (1..=9).map(|v| v as f64).collect());
        let w = t4([1, 1, 1, 1], vec![1.0]);
        let y = conv2d(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn conv_ones_stride2() {
        let x = t4([1, 1, 4, 4], vec![1.0; 16]);
        let w = t4([1, 1, 2, 2], vec![1.0; 4]);
        let y = conv2d(&x, &w, None, 2, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.to_vec(), vec![4.0; 4]);
    }

    /// Six-loop direct cross-correlation used as the convolution oracle.
    fn conv_naive(
        x: &[f64],
        w: &[f64],
        (n, cin, h, wd): (usize, usize, usize, usize),
        (cout, k): (usize, usize),
        stride: usize,
        pad: usize,
    ) -> Vec<f64> {
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut out = vec![0.0; n * cout * oh * ow];
        for b in 0..n {
            for co in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for ci in 0..cin {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    acc += x[((b * cin + ci) * h + iy as usize) * wd + ix as usize]
                                        * w[((co * cin + ci) * k + ky) * k + kx];
                                }
                            }
                        }
                        out[((b * cout + co) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x_data: Vec<f64> = (0..2 * 8 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w_data: Vec<f64> = (0..3 * 2 * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = t4([1, 2, 8, 8], x_data.clone());
        let w = t4([3, 2, 3, 3], w_data.clone());
        for (stride, pad) in [(1, 0), (1, 1), (2, 1), (2, 2)] {
            let y = conv2d(&x, &w, None, stride, pad).unwrap();
            let want = conv_naive(&x_data, &w_data, (1, 2, 8, 8), (3, 3), stride, pad);
            assert_eq!(y.numel(), want.len());
            for (a, b) in y.to_vec().iter().zip(&want) {
                assert!((a - b).abs() < 1e-6, "stride={stride} pad={pad}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn conv_linearity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xd: Vec<f64> = (0..2 * 36).map(|_| rng.random_range(-1.0..1.0)).collect();
        let yd: Vec<f64> = (0..2 * 36).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wd: Vec<f64> = (0..2 * 2 * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (1.7, -0.4);
        let mixed: Vec<f64> = xd.iter().zip(&yd).map(|(x, y)| a * x + b * y).collect();
        let w = t4([2, 2, 3, 3], wd);
        let out_mixed = conv2d(&t4([1, 2, 6, 6], mixed), &w, None, 1, 1).unwrap();
        let out_x = conv2d(&t4([1, 2, 6, 6], xd), &w, None, 1, 1).unwrap();
        let out_y = conv2d(&t4([1, 2, 6, 6], yd), &w, None, 1, 1).unwrap();
        for ((m, x), y) in out_mixed.to_vec().iter().zip(out_x.to_vec()).zip(out_y.to_vec()) {
            assert!((m - (a * x + b * y)).abs() < 1e-5);
        }
    }

    #[test]
    fn upsample_constant_and_roundtrip() {
        let x = t4([1, 1, 2, 2], vec![3.5; 4]);
        let up = bilinear_upsample2x(&x).unwrap();
        assert_eq!(up.shape(), &[1, 1, 4, 4]);
        assert!(up.to_vec().iter().all(|&v| (v - 3.5).abs() < 1e-12));
        let down = avg_downsample2x(&up).unwrap();
        assert_eq!(down.to_vec(), x.to_vec());
    }

    #[test]
    fn upsample_matches_convention_formula() {
        // Independent evaluation of the half-pixel-center formula.
        let vals = [0.0, 1.0, 2.0, 3.0];
        let x = t4([1, 1, 2, 2], vals.to_vec());
        let up = bilinear_upsample2x(&x).unwrap();
        let sample = |sy: f64, sx: f64| -> f64 {
            let cy = sy.clamp(0.0, 1.0);
            let cx = sx.clamp(0.0, 1.0);
            let y0 = cy.floor() as usize;
            let x0 = cx.floor() as usize;
            let (fy, fx) = (cy - y0 as f64, cx - x0 as f64);
            let y1 = (y0 + 1).min(1);
            let x1 = (x0 + 1).min(1);
            let at = |y: usize, x: usize| vals[y * 2 + x];
            (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1))
                + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1))
        };
        let got = up.to_vec();
        for oy in 0..4 {
            for ox in 0..4 {
                let want = sample((oy as f64 + 0.5) / 2.0 - 0.5, (ox as f64 + 0.5) / 2.0 - 0.5);
                assert!((got[oy * 4 + ox] - want).abs() < 1e-12, "({oy},{ox})");
            }
        }
    }

    #[test]
    fn downsample_block_mean() {
        let x = t4([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(avg_downsample2x(&x).unwrap().to_vec(), vec![2.5]);
        let c = t4([1, 1, 4, 4], vec![0.7; 16]);
        assert!(avg_downsample2x(&c)
            .unwrap()
            .to_vec()
            .iter()
            .all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn downsample_odd_dims_rejected() {
        let x = Tensor::<f64>::zeros(&[1, 1, 3, 4]);
        assert!(avg_downsample2x(&x).is_err());
    }

    #[test]
    fn downsample_matches_block_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = t4([1, 1, 8, 8], data.clone());
        let y = avg_downsample2x(&x).unwrap();
        let got = y.to_vec();
        for oy in 0..4 {
            for ox in 0..4 {
                let want = (data[2 * oy * 8 + 2 * ox]
                    + data[2 * oy * 8 + 2 * ox + 1]
                    + data[(2 * oy + 1) * 8 + 2 * ox]
                    + data[(2 * oy + 1) * 8 + 2 * ox + 1])
                    / 4.0;
                assert!((got[oy * 4 + ox] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn downsample_preserves_global_mean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = t4([1, 1, 16, 16], data.clone());
        let y = avg_downsample2x(&x).unwrap();
        let mean_in: f64 = data.iter().sum::<f64>() / 256.0;
        let mean_out: f64 = y.to_vec().iter().sum::<f64>() / 64.0;
        assert!((mean_in - mean_out).abs() < 1e-12);
    }

    #[test]
    fn sobel_constant_zero_interior() {
        let x = t4([1, 1, 6, 6], vec![2.0; 36]);
        let (gx, gy) = sobel_gradients(&x).unwrap();
        let gxv = gx.to_vec();
        let gyv = gy.to_vec();
        for y in 1..5 {
            for xx in 1..5 {
                assert_eq!(gxv[y * 6 + xx], 0.0);
                assert_eq!(gyv[y * 6 + xx], 0.0);
            }
        }
    }

    #[test]
    fn sobel_ramp_interior_is_eight() {
        // I(x, y) = x: interior dx response is 8, dy response 0.
        let mut data = vec![0.0; 36];
        for y in 0..6 {
            for xx in 0..6 {
                data[y * 6 + xx] = xx as f64;
            }
        }
        let x = t4([1, 1, 6, 6], data);
        let (gx, gy) = sobel_gradients(&x).unwrap();
        let gxv = gx.to_vec();
        let gyv = gy.to_vec();
        for y in 1..5 {
            for xx in 1..5 {
                assert_eq!(gxv[y * 6 + xx], 8.0, "({y},{xx})");
                assert_eq!(gyv[y * 6 + xx], 0.0);
            }
        }
    }

    #[test]
    fn sobel_transpose_swaps_axes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..49).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut tdata = vec![0.0; 49];
        for y in 0..7 {
            for xx in 0..7 {
                tdata[xx * 7 + y] = data[y * 7 + xx];
            }
        }
        let (gx, gy) = sobel_gradients(&t4([1, 1, 7, 7], data)).unwrap();
        let (tgx, tgy) = sobel_gradients(&t4([1, 1, 7, 7], tdata)).unwrap();
        let (gx, gy, tgx, tgy) = (gx.to_vec(), gy.to_vec(), tgx.to_vec(), tgy.to_vec());
        for y in 1..6 {
            for xx in 1..6 {
                assert!((gx[y * 7 + xx] - tgy[xx * 7 + y]).abs() < 1e-12);
                assert!((gy[y * 7 + xx] - tgx[xx * 7 + y]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn concat_and_select_roundtrip() {
        let a = t4([2, 1, 2, 2], (0..8).map(|v| v as f64).collect());
        let b = t4([2, 2, 2, 2], (8..24).map(|v| v as f64).collect());
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 3, 2, 2]);
        let s1 = select_batch(&c, 1).unwrap();
        assert_eq!(s1.shape(), &[1, 3, 2, 2]);
        assert_eq!(
            s1.to_vec(),
            vec![4.0, 5.0, 6.0, 7.0, 16.0, 17.0, 18.0, 19.0, 20.0, 21.0, 22.0, 23.0]
        );
    }
}
