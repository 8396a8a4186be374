//! Dense kernels behind the tensor ops: blocked matrix products and the
//! im2col/col2im transforms used by the convolution forward/backward passes.
//!
//! All kernels are deterministic: every output element is produced by exactly
//! one task with a fixed accumulation order, so thread count never changes
//! results.

use rayon::prelude::*;

use crate::scalar::Scalar;

/// Below this many multiply-adds the rayon dispatch costs more than it saves.
const PAR_THRESHOLD: usize = 1 << 15;

/// Column block sized so an 8-row output tile stays in L1.
const COL_BLOCK: usize = 512;

/// out[m, n] = a[m, k] * b[k, n] (overwrite), all row-major.
pub fn matmul_set<T: Scalar>(out: &mut [T], a: &[T], b: &[T], m: usize, k: usize, n: usize) {
    out.fill(T::zero());
    matmul_acc(out, a, b, m, k, n);
}

/// out[m, n] += a[m, k] * b[k, n], all row-major.
pub fn matmul_acc<T: Scalar>(out: &mut [T], a: &[T], b: &[T], m: usize, k: usize, n: usize) {
    assert_eq!(out.len(), m * n, "matmul_acc: out length");
    assert_eq!(a.len(), m * k, "matmul_acc: a length");
    assert_eq!(b.len(), k * n, "matmul_acc: b length");
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    if m * k * n < PAR_THRESHOLD {
        matmul_rows(out, a, b, 0, m, k, n);
        return;
    }
    // Row chunks sized for both parallelism and B reuse; B stays shared.
    let threads = rayon::current_num_threads().max(1);
    let rows_per_chunk = (m / (threads * 2)).clamp(1, 8);
    out.par_chunks_mut(rows_per_chunk * n)
        .enumerate()
        .for_each(|(chunk, out_rows)| {
            let row0 = chunk * rows_per_chunk;
            let rows = out_rows.len() / n;
            matmul_rows(out_rows, &a[row0 * k..(row0 + rows) * k], b, 0, rows, k, n);
        });
}

/// Width of the register tile; two AVX-512 or four AVX2 f32 vectors.
const NB: usize = 32;

/// Sequential kernel for a contiguous band of output rows: 4 x NB register
/// tiles accumulated over k, plus axpy edges.
fn matmul_rows<T: Scalar>(out: &mut [T], a: &[T], b: &[T], _row0: usize, rows: usize, k: usize, n: usize) {
    let n_main = n - n % NB;
    let r_main = rows - rows % 4;
    for m0 in (0..r_main).step_by(4) {
        let a0 = &a[m0 * k..(m0 + 1) * k];
        let a1 = &a[(m0 + 1) * k..(m0 + 2) * k];
        let a2 = &a[(m0 + 2) * k..(m0 + 3) * k];
        let a3 = &a[(m0 + 3) * k..(m0 + 4) * k];
        let mut nb = 0;
        while nb < n_main {
            let mut acc0 = [T::zero(); NB];
            let mut acc1 = [T::zero(); NB];
            let mut acc2 = [T::zero(); NB];
            let mut acc3 = [T::zero(); NB];
            for kk in 0..k {
                let brow = &b[kk * n + nb..kk * n + nb + NB];
                let (av0, av1, av2, av3) = (a0[kk], a1[kk], a2[kk], a3[kk]);
                for j in 0..NB {
                    let bv = brow[j];
                    acc0[j] += av0 * bv;
                    acc1[j] += av1 * bv;
                    acc2[j] += av2 * bv;
                    acc3[j] += av3 * bv;
                }
            }
            for (r, accr) in [&acc0, &acc1, &acc2, &acc3].into_iter().enumerate() {
                let orow = &mut out[(m0 + r) * n + nb..(m0 + r) * n + nb + NB];
                for j in 0..NB {
                    orow[j] += accr[j];
                }
            }
            nb += NB;
        }
        if n_main < n {
            for kk in 0..k {
                let brow = &b[kk * n + n_main..(kk + 1) * n];
                for r in 0..4 {
                    let av = a[(m0 + r) * k + kk];
                    axpy(&mut out[(m0 + r) * n + n_main..(m0 + r + 1) * n], av, brow);
                }
            }
        }
    }
    for mi in r_main..rows {
        let mut nb = 0;
        while nb < n {
            let nw = COL_BLOCK.min(n - nb);
            for kk in 0..k {
                let av = a[mi * k + kk];
                if av == T::zero() {
                    continue;
                }
                axpy(
                    &mut out[mi * n + nb..mi * n + nb + nw],
                    av,
                    &b[kk * n + nb..kk * n + nb + nw],
                );
            }
            nb += nw;
        }
    }
}

/// out[i] += s * x[i]
#[inline]
fn axpy<T: Scalar>(out: &mut [T], s: T, x: &[T]) {
    for (o, &v) in out.iter_mut().zip(x.iter()) {
        *o += s * v;
    }
}

/// out[m, j] += sum_n a[m, n] * b[j, n]  (i.e. out += A · Bᵀ), row-major.
pub fn matmul_abt_acc<T: Scalar>(out: &mut [T], a: &[T], b: &[T], m: usize, n: usize, j: usize) {
    assert_eq!(out.len(), m * j, "matmul_abt_acc: out length");
    assert_eq!(a.len(), m * n, "matmul_abt_acc: a length");
    assert_eq!(b.len(), j * n, "matmul_abt_acc: b length");
    if m == 0 || n == 0 || j == 0 {
        return;
    }
    let body = |out_rows: &mut [T], a_rows: &[T]| {
        let rows = out_rows.len() / j;
        for mi in 0..rows {
            let a_row = &a_rows[mi * n..(mi + 1) * n];
            let out_row = &mut out_rows[mi * j..(mi + 1) * j];
            for (jj, o) in out_row.iter_mut().enumerate() {
                *o += dot(a_row, &b[jj * n..(jj + 1) * n]);
            }
        }
    };
    if m * n * j < PAR_THRESHOLD {
        body(out, a);
        return;
    }
    let threads = rayon::current_num_threads().max(1);
    let rows_per_chunk = (m / (threads * 2)).clamp(1, 4);
    out.par_chunks_mut(rows_per_chunk * j)
        .enumerate()
        .for_each(|(chunk, out_rows)| {
            let row0 = chunk * rows_per_chunk;
            let rows = out_rows.len() / j;
            body(out_rows, &a[row0 * n..(row0 + rows) * n]);
        });
}

/// Dot product with eight independent accumulators. The fixed lane layout
/// keeps the sum order deterministic while letting the loop vectorize.
#[inline]
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [T::zero(); 8];
    let mut xc = x.chunks_exact(8);
    let mut yc = y.chunks_exact(8);
    for (xa, ya) in (&mut xc).zip(&mut yc) {
        for i in 0..8 {
            acc[i] += xa[i] * ya[i];
        }
    }
    let mut tail = T::zero();
    for (xv, yv) in xc.remainder().iter().zip(yc.remainder()) {
        tail += *xv * *yv;
    }
    let s01 = acc[0] + acc[1];
    let s23 = acc[2] + acc[3];
    let s45 = acc[4] + acc[5];
    let s67 = acc[6] + acc[7];
    ((s01 + s23) + (s45 + s67)) + tail
}

/// Row-major transpose into a fresh buffer.
pub fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    assert_eq!(a.len(), rows * cols);
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Geometry of one 2-D convolution application.
#[derive(Clone, Copy, Debug)]
pub struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn patch_len(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    pub fn out_len(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfold one image (cin × h × w) into cols[k, j] where k runs over
/// (channel, ky, kx) and j over output positions; zero padding.
pub fn im2col<T: Scalar>(input: &[T], g: &ConvGeom, cols: &mut [T]) {
    assert_eq!(input.len(), g.cin * g.h * g.w);
    assert_eq!(cols.len(), g.patch_len() * g.out_len());
    let (oh, ow, w, h) = (g.oh, g.ow, g.w, g.h);
    for ci in 0..g.cin {
        let plane = &input[ci * h * w..(ci + 1) * h * w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let krow = (ci * g.kh + ky) * g.kw + kx;
                let dst_all = &mut cols[krow * oh * ow..(krow + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let dst = &mut dst_all[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    // ox range for which ix = ox*stride + kx - pad is in bounds
                    let ox_lo = g.pad.saturating_sub(kx).div_ceil(g.stride).min(ow);
                    let ox_hi = if w + g.pad > kx {
                        ((w + g.pad - kx - 1) / g.stride + 1).min(ow)
                    } else {
                        0
                    };
                    dst[..ox_lo].fill(T::zero());
                    dst[ox_hi..].fill(T::zero());
                    if g.stride == 1 {
                        let ix0 = ox_lo + kx - g.pad;
                        dst[ox_lo..ox_hi].copy_from_slice(&src_row[ix0..ix0 + (ox_hi - ox_lo)]);
                    } else {
                        for (ox, d) in (ox_lo..ox_hi).zip(dst[ox_lo..ox_hi].iter_mut()) {
                            *d = src_row[ox * g.stride + kx - g.pad];
                        }
                    }
                }
            }
        }
    }
}

/// Fold cols gradients back onto the input gradient (scatter-add), the
/// adjoint of [`im2col`].
pub fn col2im_acc<T: Scalar>(dcols: &[T], g: &ConvGeom, dinput: &mut [T]) {
    assert_eq!(dinput.len(), g.cin * g.h * g.w);
    assert_eq!(dcols.len(), g.patch_len() * g.out_len());
    let (oh, ow, w, h) = (g.oh, g.ow, g.w, g.h);
    for ci in 0..g.cin {
        let plane = &mut dinput[ci * h * w..(ci + 1) * h * w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let krow = (ci * g.kh + ky) * g.kw + kx;
                let src_all = &dcols[krow * oh * ow..(krow + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    let src = &src_all[oy * ow..(oy + 1) * ow];
                    let ox_lo = g.pad.saturating_sub(kx).div_ceil(g.stride).min(ow);
                    let ox_hi = if w + g.pad > kx {
                        ((w + g.pad - kx - 1) / g.stride + 1).min(ow)
                    } else {
                        0
                    };
                    for ox in ox_lo..ox_hi {
                        dst_row[ox * g.stride + kx - g.pad] += src[ox];
                    }
                }
            }
        }
    }
}
