//! Convolution geometry and the im2col lowering used by the conv op.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding so that `out = ceil(in / stride)`; the odd pad cell goes bottom/right.
    Same,
    /// No padding; the kernel must fit inside the input.
    Valid,
}

/// Output length and leading pad along one spatial axis.
pub fn conv_output_len(input: usize, kernel: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::Config("convolution stride must be at least 1".into()));
    }
    if kernel == 0 || input == 0 {
        return Err(Error::Config(format!(
            "convolution needs positive sizes (input {input}, kernel {kernel})"
        )));
    }
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if kernel > input {
                return Err(Error::Config(format!(
                    "kernel extent {kernel} exceeds unpadded input extent {input}"
                )));
            }
            Ok(((input - kernel) / stride + 1, 0))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub cin: usize,
    pub kh: usize,
    pub kw: usize,
    pub cout: usize,
    pub sh: usize,
    pub sw: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    /// Geometry for an `[batch, h, w, cin]` input and `[kh, kw, cin, cout]` kernels.
    pub fn new(
        input: [usize; 4],
        kernels: [usize; 4],
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Self> {
        let [batch, in_h, in_w, cin] = input;
        let [kh, kw, kcin, cout] = kernels;
        if cin != kcin {
            return Err(Error::Config(format!(
                "conv2d channel mismatch: input {input:?} has {cin} channels, kernels {kernels:?} expect {kcin}"
            )));
        }
        let (out_h, pad_top) = conv_output_len(in_h, kh, stride.0, padding)?;
        let (out_w, pad_left) = conv_output_len(in_w, kw, stride.1, padding)?;
        Ok(ConvGeometry {
            batch,
            in_h,
            in_w,
            cin,
            kh,
            kw,
            cout,
            sh: stride.0,
            sw: stride.1,
            out_h,
            out_w,
            pad_top,
            pad_left,
        })
    }

    /// Rows of the lowered patch matrix (one per output pixel).
    pub fn patch_rows(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }

    /// Columns of the lowered patch matrix, ordered `(ky, kx, c)` like the kernel tensor.
    pub fn patch_cols(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_h, self.out_w, self.cout]
    }

    // Input coordinate for output position `o` and tap `k`, or None in the padding.
    #[inline]
    fn source(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        let pos = (o * stride + k).checked_sub(pad)?;
        (pos < extent).then_some(pos)
    }
}

pub(crate) fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let cols = g.patch_cols();
    let mut out = vec![0.0; g.patch_rows() * cols];
    let mut row = 0;
    for n in 0..g.batch {
        let image = &input[n * g.in_h * g.in_w * g.cin..][..g.in_h * g.in_w * g.cin];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let dst = &mut out[row * cols..][..cols];
                for ky in 0..g.kh {
                    let Some(iy) = ConvGeometry::source(oy, ky, g.sh, g.pad_top, g.in_h) else {
                        continue;
                    };
                    for kx in 0..g.kw {
                        let Some(ix) = ConvGeometry::source(ox, kx, g.sw, g.pad_left, g.in_w) else {
                            continue;
                        };
                        let src = &image[(iy * g.in_w + ix) * g.cin..][..g.cin];
                        dst[(ky * g.kw + kx) * g.cin..][..g.cin].copy_from_slice(src);
                    }
                }
                row += 1;
            }
        }
    }
    out
}

/// Scatter-add patch gradients back onto the input gradient.
pub(crate) fn col2im_add(dcols: &[f64], g: &ConvGeometry, dinput: &mut [f64]) {
    let cols = g.patch_cols();
    let mut row = 0;
    for n in 0..g.batch {
        let image = &mut dinput[n * g.in_h * g.in_w * g.cin..][..g.in_h * g.in_w * g.cin];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let src = &dcols[row * cols..][..cols];
                for ky in 0..g.kh {
                    let Some(iy) = ConvGeometry::source(oy, ky, g.sh, g.pad_top, g.in_h) else {
                        continue;
                    };
                    for kx in 0..g.kw {
                        let Some(ix) = ConvGeometry::source(ox, kx, g.sw, g.pad_left, g.in_w) else {
                            continue;
                        };
                        let dst = &mut image[(iy * g.in_w + ix) * g.cin..][..g.cin];
                        for (d, s) in dst.iter_mut().zip(&src[(ky * g.kw + kx) * g.cin..][..g.cin]) {
                            *d += s;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}
