//! Dense row-major image tensors: real-valued magnitudes everywhere in the
//! pipeline, complex values only for frequency-domain data.

use crate::error::{Error, Result};

/// A real H×W image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidParam {
                name: "data",
                reason: format!("expected {} values, got {}", height * width, data.len()),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Constant-valued image.
    pub fn splat(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }
}

/// A complex H×W image stored as separate real/imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    height: usize,
    width: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            re: vec![0.0; height * width],
            im: vec![0.0; height * width],
        }
    }

    pub fn from_real(image: &Image) -> Self {
        Self {
            height: image.height(),
            width: image.width(),
            re: image.as_slice().to_vec(),
            im: vec![0.0; image.len()],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> (f64, f64) {
        let i = row * self.width + col;
        (self.re[i], self.im[i])
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, re: f64, im: f64) {
        let i = row * self.width + col;
        self.re[i] = re;
        self.im[i] = im;
    }

    /// Per-pixel magnitude as a real image.
    pub fn magnitude(&self) -> Image {
        let data = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| re.hypot(im))
            .collect();
        Image {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| re * re + im * im)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Image::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::from_vec(2, 2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn indexing_is_row_major() {
        let img = Image::from_vec(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(img.get(0, 2), 2.0);
        assert_eq!(img.get(1, 0), 3.0);
    }

    #[test]
    fn magnitude_of_real_image_is_abs() {
        let img = Image::from_vec(1, 3, vec![-2.0, 0.0, 1.5]).unwrap();
        let mag = ComplexImage::from_real(&img).magnitude();
        assert_eq!(mag.as_slice(), &[2.0, 0.0, 1.5]);
    }
}
