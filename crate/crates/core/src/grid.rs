//! Dense row-major pixel grids and the typed maps built on them.
//!
//! Every scalar map uses `0.0` as its invalid marker. Normal maps use the zero
//! vector.

use std::ops::{Deref, DerefMut, Index, IndexMut};

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// A `width × height` row-major grid. Pixel `(u, v)` is column `u`, row `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "grid of {width}x{height} needs {} values, got {}",
                width * height,
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
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index_of(&self, u: usize, v: usize) -> usize {
        debug_assert!(u < self.width && v < self.height);
        v * self.width + u
    }

    #[inline]
    pub fn coords_of(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> &T {
        &self.data[self.index_of(u, v)]
    }

    #[inline]
    pub fn get_mut(&mut self, u: usize, v: usize) -> &mut T {
        let i = self.index_of(u, v);
        &mut self.data[i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_shape<U>(&self, other: &Grid<U>, what: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            })
        }
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Index<usize> for Grid<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

/// Valid values are strictly positive and finite.
#[inline]
pub fn is_valid(value: f64) -> bool {
    value > 0.0 && value.is_finite()
}

macro_rules! scalar_map {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub Grid<f64>);

        impl $name {
            /// A map with every pixel invalid.
            pub fn empty(width: usize, height: usize) -> Self {
                Self(Grid::filled(width, height, 0.0))
            }

            pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
                Grid::from_vec(width, height, data).map(Self)
            }

            pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
                Self(Grid::from_fn(width, height, f))
            }

            #[inline]
            pub fn is_valid_at(&self, i: usize) -> bool {
                is_valid(self.0[i])
            }

            pub fn valid_count(&self) -> usize {
                self.0.as_slice().iter().filter(|&&d| is_valid(d)).count()
            }

            pub fn valid_mask(&self) -> Vec<bool> {
                self.0.as_slice().iter().map(|&d| is_valid(d)).collect()
            }

            pub fn into_grid(self) -> Grid<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = Grid<f64>;
            fn deref(&self) -> &Grid<f64> {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Grid<f64> {
                &mut self.0
            }
        }
    };
}

scalar_map!(
    /// Per-pixel depth along the optical axis in meters.
    DepthMap
);
scalar_map!(
    /// Per-pixel distance from the camera origin to the local tangent plane, in meters.
    PlaneOriginMap
);
scalar_map!(
    /// Per-pixel reliability of sparse seeds, in `[0, 1]`; zero where no seed exists.
    ConfidenceMap
);

/// Per-pixel unit surface normals in camera coordinates. The zero vector marks invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap(pub Grid<Vector3<f64>>);

impl NormalMap {
    pub fn constant(width: usize, height: usize, n: Vector3<f64>) -> Self {
        Self(Grid::filled(width, height, n))
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl FnMut(usize, usize) -> Vector3<f64>,
    ) -> Self {
        Self(Grid::from_fn(width, height, f))
    }

    #[inline]
    pub fn is_valid_at(&self, i: usize) -> bool {
        self.0[i] != Vector3::zeros()
    }
}

impl Deref for NormalMap {
    type Target = Grid<Vector3<f64>>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for NormalMap {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}
