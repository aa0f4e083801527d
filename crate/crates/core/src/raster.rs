//! Dense row-major 2D rasters and the color/depth/mask triple.

use serde::{Deserialize, Serialize};

use crate::cloud::Rgb;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "raster buffer of {} items for {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = self.index(x, y);
        self.data[i] = v;
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub(crate) fn check_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            })
        } else {
            Ok(())
        }
    }
}

/// Color image, depth map and validity mask rendered from one view.
///
/// Invalid pixels carry `f64::INFINITY` depth and black color; the mask is
/// authoritative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewMaps {
    pub color: Raster<Rgb>,
    pub depth: Raster<f64>,
    pub valid: Raster<bool>,
}

pub const INVALID_DEPTH: f64 = f64::INFINITY;

impl ViewMaps {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            color: Raster::filled(width, height, [0, 0, 0]),
            depth: Raster::filled(width, height, INVALID_DEPTH),
            valid: Raster::filled(width, height, false),
        }
    }

    pub fn new(color: Raster<Rgb>, depth: Raster<f64>, valid: Raster<bool>) -> Result<Self> {
        let dims = color.dims();
        depth.check_dims(dims)?;
        valid.check_dims(dims)?;
        Ok(Self {
            color,
            depth,
            valid,
        })
    }

    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.color.dims()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.data().iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_count() == 0
    }

    pub(crate) fn check_dims(&self, dims: (usize, usize)) -> Result<()> {
        self.color.check_dims(dims)?;
        self.depth.check_dims(dims)?;
        self.valid.check_dims(dims)
    }

    /// Reset invalid pixels to black / `INVALID_DEPTH`.
    pub(crate) fn normalize_invalid(&mut self) {
        for i in 0..self.valid.data().len() {
            if !self.valid.data()[i] {
                self.color.data_mut()[i] = [0, 0, 0];
                self.depth.data_mut()[i] = INVALID_DEPTH;
            }
        }
    }
}

/// Luma `0.299 R + 0.587 G + 0.114 B` as an f32 raster.
pub fn to_gray(color: &Raster<Rgb>) -> Raster<f32> {
    color.map(|c| 0.299 * c[0] as f32 + 0.587 * c[1] as f32 + 0.114 * c[2] as f32)
}
