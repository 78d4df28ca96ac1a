use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// `N` points in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        Ok(PointSet {
            dim,
            coords: Vec::new(),
        })
    }

    /// `n` i.i.d. draws from `N(0, I_d)`.
    pub fn standard_gaussian<R: Rng + ?Sized>(dim: usize, n: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        let coords = (0..dim * n).map(|_| rng.sample(StandardNormal)).collect();
        Ok(PointSet { dim, coords })
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(invalid("coords", "length must be a positive multiple of d"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut set = PointSet::new(dim)?;
        for r in rows {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
        self.coords.extend_from_slice(x);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// The points at `indices`, in the order given.
    pub fn subset(&self, indices: impl IntoIterator<Item = usize>) -> PointSet {
        let mut coords = Vec::new();
        for i in indices {
            coords.extend_from_slice(self.get(i));
        }
        PointSet { dim: self.dim, coords }
    }
}
