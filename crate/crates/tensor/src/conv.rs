use crate::error::{dim_err, Result};

/// Output extent of a valid (unpadded) convolution along one axis.
pub fn conv_output_extent(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 || input < kernel {
        return None;
    }
    Some((input - kernel) / stride + 1)
}

/// Index bookkeeping for a valid convolution over `[B, C, S1, .., Sr]`
/// inputs with a cubic kernel of side `kernel`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub in_spatial: Vec<usize>,
    pub out_spatial: Vec<usize>,
    /// Flat spatial input offset of each output position's window origin.
    window_origin: Vec<usize>,
    /// Flat spatial offset of each kernel tap relative to the origin.
    tap_offset: Vec<usize>,
}

impl ConvGeometry {
    pub fn new(input_shape: &[usize], weight_shape: &[usize], stride: usize) -> Result<Self> {
        let rank = input_shape.len().checked_sub(2).unwrap_or(0);
        if !(2..=3).contains(&rank) {
            return Err(dim_err!(
                "convolution input must be [B, C, S..] with 2 or 3 spatial axes, got {input_shape:?}"
            ));
        }
        if weight_shape.len() != rank + 2 {
            return Err(dim_err!(
                "weight shape {weight_shape:?} does not match input rank {}",
                input_shape.len()
            ));
        }
        let (batch, in_channels) = (input_shape[0], input_shape[1]);
        let (out_channels, w_in) = (weight_shape[0], weight_shape[1]);
        if w_in != in_channels {
            return Err(dim_err!(
                "input has {in_channels} channels but weights expect {w_in}"
            ));
        }
        let kernel = weight_shape[2];
        if weight_shape[2..].iter().any(|&k| k != kernel) {
            return Err(dim_err!("only cubic kernels are supported, got {weight_shape:?}"));
        }
        if stride == 0 {
            return Err(dim_err!("stride must be positive"));
        }
        let in_spatial = input_shape[2..].to_vec();
        let out_spatial = in_spatial
            .iter()
            .map(|&s| conv_output_extent(s, kernel, stride))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| dim_err!("kernel {kernel} does not fit spatial extent {in_spatial:?}"))?;

        let mut axis_stride = vec![1usize; rank];
        for a in (0..rank - 1).rev() {
            axis_stride[a] = axis_stride[a + 1] * in_spatial[a + 1];
        }
        let window_origin = multi_indices(&out_spatial)
            .map(|idx| idx.iter().zip(&axis_stride).map(|(&o, &s)| o * stride * s).sum())
            .collect();
        let tap_offset = multi_indices(&vec![kernel; rank])
            .map(|idx| idx.iter().zip(&axis_stride).map(|(&k, &s)| k * s).sum())
            .collect();

        Ok(ConvGeometry {
            batch,
            in_channels,
            out_channels,
            kernel,
            stride,
            in_spatial,
            out_spatial,
            window_origin,
            tap_offset,
        })
    }

    pub fn in_points(&self) -> usize {
        self.in_spatial.iter().product()
    }

    pub fn out_points(&self) -> usize {
        self.window_origin.len()
    }

    pub fn taps(&self) -> usize {
        self.tap_offset.len()
    }

    /// Rows of the unrolled patch matrix: `C_in * k^r`.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.taps()
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let mut s = vec![self.batch, self.out_channels];
        s.extend_from_slice(&self.out_spatial);
        s
    }

    /// Unrolls `[B, C, S..]` into a `[C*k^r, B*P]` patch matrix.
    pub(crate) fn im2col(&self, input: &[f64]) -> Vec<f64> {
        let (b_n, s_in, p_out) = (self.batch, self.in_points(), self.out_points());
        let width = b_n * p_out;
        let mut cols = vec![0.0; self.patch_len() * width];
        for c in 0..self.in_channels {
            for (t, &tap) in self.tap_offset.iter().enumerate() {
                let row = &mut cols[(c * self.taps() + t) * width..][..width];
                for b in 0..b_n {
                    let src = &input[(b * self.in_channels + c) * s_in..][..s_in];
                    let dst = &mut row[b * p_out..][..p_out];
                    for (d, &origin) in dst.iter_mut().zip(&self.window_origin) {
                        *d = src[origin + tap];
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`im2col`](Self::im2col): scatters patch gradients back.
    pub(crate) fn col2im(&self, cols: &[f64], grad_input: &mut [f64]) {
        let (b_n, s_in, p_out) = (self.batch, self.in_points(), self.out_points());
        let width = b_n * p_out;
        for c in 0..self.in_channels {
            for (t, &tap) in self.tap_offset.iter().enumerate() {
                let row = &cols[(c * self.taps() + t) * width..][..width];
                for b in 0..b_n {
                    let dst = &mut grad_input[(b * self.in_channels + c) * s_in..][..s_in];
                    let src = &row[b * p_out..][..p_out];
                    for (&g, &origin) in src.iter().zip(&self.window_origin) {
                        dst[origin + tap] += g;
                    }
                }
            }
        }
    }
}

/// Row-major enumeration of all multi-indices below `extent`.
fn multi_indices(extent: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = extent.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; extent.len()];
        for a in (0..extent.len()).rev() {
            idx[a] = flat % extent[a];
            flat /= extent[a];
        }
        idx
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_extents_follow_valid_formula() {
        assert_eq!(conv_output_extent(64, 3, 2), Some(31));
        assert_eq!(conv_output_extent(31, 3, 2), Some(15));
        assert_eq!(conv_output_extent(15, 3, 2), Some(7));
        assert_eq!(conv_output_extent(3, 3, 2), Some(1));
        assert_eq!(conv_output_extent(2, 3, 2), None);
    }

    #[test]
    fn geometry_rejects_channel_mismatch() {
        assert!(ConvGeometry::new(&[1, 2, 8, 8], &[4, 3, 3, 3], 2).is_err());
        assert!(ConvGeometry::new(&[1, 2, 8], &[4, 2, 3], 2).is_err());
        let g = ConvGeometry::new(&[2, 3, 9, 9, 9], &[5, 3, 3, 3, 3], 2).unwrap();
        assert_eq!(g.output_shape(), vec![2, 5, 4, 4, 4]);
        assert_eq!(g.patch_len(), 81);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = ConvGeometry::new(&[2, 2, 7, 6], &[3, 2, 3, 3], 2).unwrap();
        let x: Vec<f64> = (0..2 * 2 * 42).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let cols = g.im2col(&x);
        let y: Vec<f64> = (0..cols.len()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; x.len()];
        g.col2im(&y, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
