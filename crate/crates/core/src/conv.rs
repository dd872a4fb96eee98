//! Slice-level causal convolution kernels used by both the plain signal
//! operations and the gradient tape.
//!
//! Layouts are row-major: signals are `[channels][len]`, kernels are
//! `[c_out][c_in][width]`. Samples before index 0 are taken as zero.

use crate::scalar::Scalar;

/// `out[co][i] += sum_ci sum_j w[co][ci][j] * x[ci][i - j]`, plus `bias[co]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn forward<F: Scalar>(
    x: &[F],
    c_in: usize,
    len: usize,
    w: &[F],
    c_out: usize,
    width: usize,
    bias: Option<&[F]>,
    out: &mut [F],
) {
    debug_assert_eq!(x.len(), c_in * len);
    debug_assert_eq!(w.len(), c_out * c_in * width);
    debug_assert_eq!(out.len(), c_out * len);
    for co in 0..c_out {
        let o = &mut out[co * len..(co + 1) * len];
        if let Some(b) = bias {
            o.iter_mut().for_each(|v| *v += b[co]);
        }
        for ci in 0..c_in {
            let xs = &x[ci * len..(ci + 1) * len];
            let ws = &w[(co * c_in + ci) * width..(co * c_in + ci + 1) * width];
            for (j, &wj) in ws.iter().enumerate().take(len) {
                if wj == F::zero() {
                    continue;
                }
                for (ov, &xv) in o[j..].iter_mut().zip(&xs[..len - j]) {
                    *ov += wj * xv;
                }
            }
        }
    }
}

/// Adjoint of [`forward`] with respect to the input: accumulates into `gx`.
pub(crate) fn backward_input<F: Scalar>(
    g: &[F],
    c_in: usize,
    len: usize,
    w: &[F],
    c_out: usize,
    width: usize,
    gx: &mut [F],
) {
    for co in 0..c_out {
        let gs = &g[co * len..(co + 1) * len];
        for ci in 0..c_in {
            let gxs = &mut gx[ci * len..(ci + 1) * len];
            let ws = &w[(co * c_in + ci) * width..(co * c_in + ci + 1) * width];
            for (j, &wj) in ws.iter().enumerate().take(len) {
                for (gv, &up) in gxs[..len - j].iter_mut().zip(&gs[j..]) {
                    *gv += wj * up;
                }
            }
        }
    }
}

/// Adjoint of [`forward`] with respect to the kernel: correlation of the
/// upstream adjoint with the input, accumulated into `gw`.
pub(crate) fn backward_kernel<F: Scalar>(
    g: &[F],
    x: &[F],
    c_in: usize,
    len: usize,
    c_out: usize,
    width: usize,
    gw: &mut [F],
) {
    for co in 0..c_out {
        let gs = &g[co * len..(co + 1) * len];
        for ci in 0..c_in {
            let xs = &x[ci * len..(ci + 1) * len];
            let gws = &mut gw[(co * c_in + ci) * width..(co * c_in + ci + 1) * width];
            for (j, gwj) in gws.iter_mut().enumerate().take(len) {
                let mut acc = F::zero();
                for (&up, &xv) in gs[j..].iter().zip(&xs[..len - j]) {
                    acc += up * xv;
                }
                *gwj += acc;
            }
        }
    }
}
