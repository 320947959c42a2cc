//! Two-dimensional FFT helpers on `ndarray` grids and linear convolution.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest `n' >= n` whose only prime factors are 2, 3 and 5.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn transform_rows(data: &mut Array2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
    let width = data.ncols();
    let slice = data.as_slice_mut().expect("fft grids are allocated in standard layout");
    slice.par_chunks_mut(width).for_each(|row| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(row, &mut scratch);
    });
}

fn transpose(data: &Array2<Complex64>) -> Array2<Complex64> {
    let mut t = Array2::zeros((data.ncols(), data.nrows()));
    t.assign(&data.t());
    t
}

/// Unnormalised 2-D DFT in place. The inverse direction does not divide by `N`.
pub fn fft2_inplace(data: &mut Array2<Complex64>, direction: FftDirection) {
    let (rows, cols) = data.dim();
    if rows == 0 || cols == 0 {
        return;
    }
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(cols, direction);
    let col_fft = planner.plan_fft(rows, direction);
    if !data.is_standard_layout() {
        *data = data.as_standard_layout().to_owned();
    }
    transform_rows(data, &row_fft);
    let mut t = transpose(data);
    transform_rows(&mut t, &col_fft);
    data.assign(&t.t());
}

pub fn fft2(data: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = data.as_standard_layout().to_owned();
    fft2_inplace(&mut out, FftDirection::Forward);
    out
}

/// Inverse 2-D DFT including the `1/N` normalisation.
pub fn ifft2(data: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = data.as_standard_layout().to_owned();
    fft2_inplace(&mut out, FftDirection::Inverse);
    let scale = 1.0 / (out.len() as f64);
    out.mapv_inplace(|v| v * scale);
    out
}

/// Moves the zero-frequency sample to index `(rows/2, cols/2)`.
pub fn fftshift<T: Clone>(data: &Array2<T>) -> Array2<T> {
    let (rows, cols) = data.dim();
    let (sr, sc) = (rows / 2, cols / 2);
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        data[((r + rows - sr) % rows, (c + cols - sc) % cols)].clone()
    })
}

/// Inverse of [`fftshift`]: moves index `(rows/2, cols/2)` to the origin.
pub fn ifftshift<T: Clone>(data: &Array2<T>) -> Array2<T> {
    let (rows, cols) = data.dim();
    let (sr, sc) = (rows / 2, cols / 2);
    Array2::from_shape_fn((rows, cols), |(r, c)| data[((r + sr) % rows, (c + sc) % cols)].clone())
}

/// Zero-pads a real grid into a complex grid of the given size (top-left aligned).
pub fn pad_complex(src: ArrayView2<f64>, dims: (usize, usize)) -> Array2<Complex64> {
    let mut out = Array2::zeros(dims);
    for ((r, c), v) in src.indexed_iter() {
        out[(r, c)] = Complex64::new(*v, 0.0);
    }
    out
}

/// Full linear convolution; the output has `image + kernel - 1` samples per axis.
pub fn fft_convolve_full(image: ArrayView2<f64>, kernel: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (ih, iw) = image.dim();
    let (kh, kw) = kernel.dim();
    if ih == 0 || iw == 0 || kh == 0 || kw == 0 {
        return Err(Error::Input("convolution operands must be non-empty".into()));
    }
    let (oh, ow) = (ih + kh - 1, iw + kw - 1);
    let dims = (next_fast_len(oh), next_fast_len(ow));
    let mut a = pad_complex(image, dims);
    let mut b = pad_complex(kernel, dims);
    fft2_inplace(&mut a, FftDirection::Forward);
    fft2_inplace(&mut b, FftDirection::Forward);
    a.zip_mut_with(&b, |x, y| *x *= *y);
    fft2_inplace(&mut a, FftDirection::Inverse);
    let scale = 1.0 / (dims.0 * dims.1) as f64;
    Ok(Array2::from_shape_fn((oh, ow), |(r, c)| a[(r, c)].re * scale))
}

/// Direct O(N^2 K^2) full convolution. Used for sparse or very small operands.
pub fn direct_convolve_full(image: ArrayView2<f64>, kernel: ArrayView2<f64>) -> Array2<f64> {
    let (ih, iw) = image.dim();
    let (kh, kw) = kernel.dim();
    let mut out = Array2::zeros((ih + kh - 1, iw + kw - 1));
    for ((r, c), &v) in image.indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let mut window = out.slice_mut(ndarray::s![r..r + kh, c..c + kw]);
        window.scaled_add(v, &kernel);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fast_len() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(97), 100);
        assert_eq!(next_fast_len(2787), 2880);
    }

    #[test]
    fn shift_roundtrip_odd_and_even() {
        for dims in [(4, 6), (5, 7), (1, 3)] {
            let a = Array2::from_shape_fn(dims, |(r, c)| (r * 10 + c) as f64);
            assert_eq!(ifftshift(&fftshift(&a)), a);
        }
        let a = Array2::from_shape_fn((4, 4), |(r, c)| (r * 4 + c) as f64);
        let s = fftshift(&a);
        assert_eq!(s[(2, 2)], a[(0, 0)]);
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let a = Array2::from_shape_fn((6, 10), |(r, c)| {
            Complex64::new((r as f64).sin() + c as f64, (c as f64 * 0.3).cos())
        });
        let back = ifft2(&fft2(&a));
        for (x, y) in a.iter().zip(back.iter()) {
            assert_abs_diff_eq!(x.re, y.re, epsilon = 1e-12);
            assert_abs_diff_eq!(x.im, y.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn delta_kernel_is_identity_in_interior() {
        let img = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 / 35.0);
        let mut k = Array2::zeros((3, 3));
        k[(1, 1)] = 1.0;
        let out = fft_convolve_full(img.view(), k.view()).unwrap();
        assert_eq!(out.dim(), (7, 9));
        for r in 0..5 {
            for c in 0..7 {
                assert_abs_diff_eq!(out[(r + 1, c + 1)], img[(r, c)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_image_unit_kernel() {
        let img = Array2::from_elem((12, 12), 0.37);
        let k = Array2::from_shape_fn((5, 5), |(r, c)| 1.0 + (r + 2 * c) as f64);
        let k = &k / k.sum();
        let out = fft_convolve_full(img.view(), k.view()).unwrap();
        for r in 4..12 {
            for c in 4..12 {
                assert_abs_diff_eq!(out[(r, c)], 0.37, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn empty_operand_rejected() {
        let img = Array2::<f64>::zeros((0, 3));
        let k = Array2::<f64>::ones((2, 2));
        assert!(fft_convolve_full(img.view(), k.view()).is_err());
    }
}
