use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Device class inside one period block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceClass {
    Generation,
    Charge,
    Discharge,
}

/// Ordering of the stacked decision vector.
///
/// Each period contributes a block `[generation (n_g), charge (n_e),
/// discharge (n_e)]` of width `p`; periods are stacked in time order, so the
/// vectorized form is the column-major flattening of the `p x T` schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionLayout {
    pub n_g: usize,
    pub n_e: usize,
    pub horizon: usize,
}

impl DecisionLayout {
    pub fn new(n_g: usize, n_e: usize, horizon: usize) -> Self {
        DecisionLayout { n_g, n_e, horizon }
    }

    /// Per-period width `p = n_g + 2 n_e`.
    pub fn p(&self) -> usize {
        self.n_g + 2 * self.n_e
    }

    pub fn len(&self) -> usize {
        self.p() * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_width(&self, class: DeviceClass) -> usize {
        match class {
            DeviceClass::Generation => self.n_g,
            _ => self.n_e,
        }
    }

    fn class_offset(&self, class: DeviceClass) -> usize {
        match class {
            DeviceClass::Generation => 0,
            DeviceClass::Charge => self.n_g,
            DeviceClass::Discharge => self.n_g + self.n_e,
        }
    }

    /// Position of device `k` of `class` at period `t` in the stacked vector.
    pub fn index(&self, class: DeviceClass, t: usize, k: usize) -> usize {
        debug_assert!(t < self.horizon && k < self.class_width(class));
        t * self.p() + self.class_offset(class) + k
    }

    pub fn gen(&self, t: usize, g: usize) -> usize {
        self.index(DeviceClass::Generation, t, g)
    }

    pub fn ch(&self, t: usize, e: usize) -> usize {
        self.index(DeviceClass::Charge, t, e)
    }

    pub fn dis(&self, t: usize, e: usize) -> usize {
        self.index(DeviceClass::Discharge, t, e)
    }

    /// Contiguous slice of `class` at period `t`.
    pub fn slice<'a>(&self, x: &'a [f64], class: DeviceClass, t: usize) -> &'a [f64] {
        let start = t * self.p() + self.class_offset(class);
        &x[start..start + self.class_width(class)]
    }

    pub fn vectorize(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.shape() != (self.p(), self.horizon) {
            return Err(Error::Dimension(format!(
                "schedule is {}x{}, layout expects {}x{}",
                x.nrows(),
                x.ncols(),
                self.p(),
                self.horizon
            )));
        }
        let mut v = Vec::with_capacity(self.len());
        for t in 0..self.horizon {
            v.extend(x.column(t).iter());
        }
        Ok(v)
    }

    pub fn devectorize(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        if v.len() != self.len() {
            return Err(Error::Dimension(format!(
                "vector has length {}, layout expects {}",
                v.len(),
                self.len()
            )));
        }
        let p = self.p();
        Ok(DMatrix::from_fn(p, self.horizon, |i, t| v[t * p + i]))
    }
}

/// Block-selection and time-operator matrices used to assemble the
/// constraint system by Kronecker products.
#[derive(Debug, Clone)]
pub struct SelectionMatrices {
    pub u_g: SparseMatrix,
    pub u_ch: SparseMatrix,
    pub u_dis: SparseMatrix,
    pub v_g: SparseMatrix,
    pub v_ch: SparseMatrix,
    pub v_dis: SparseMatrix,
    /// `(T-1) x T` forward difference, row t = `e_{t+1} - e_t`.
    pub d: SparseMatrix,
    /// `T x T` unit lower-triangular ones (running sum).
    pub s: SparseMatrix,
}

impl SelectionMatrices {
    pub fn new(layout: &DecisionLayout) -> Self {
        let (n_g, n_e, p, t_len) = (layout.n_g, layout.n_e, layout.p(), layout.horizon);
        let select = |offset: usize, width: usize| {
            let t: Vec<_> = (0..width).map(|k| (k, offset + k, 1.0)).collect();
            SparseMatrix::from_triplets(width, p, &t)
        };
        let u_g = select(0, n_g);
        let u_ch = select(n_g, n_e);
        let u_dis = select(n_g + n_e, n_e);
        let eye = SparseMatrix::identity(t_len);
        let mut diff = Vec::new();
        for t in 0..t_len.saturating_sub(1) {
            diff.push((t, t, -1.0));
            diff.push((t, t + 1, 1.0));
        }
        let mut lower = Vec::new();
        for i in 0..t_len {
            for j in 0..=i {
                lower.push((i, j, 1.0));
            }
        }
        SelectionMatrices {
            v_g: eye.kron(&u_g),
            v_ch: eye.kron(&u_ch),
            v_dis: eye.kron(&u_dis),
            u_g,
            u_ch,
            u_dis,
            d: SparseMatrix::from_triplets(t_len.saturating_sub(1), t_len, &diff),
            s: SparseMatrix::from_triplets(t_len, t_len, &lower),
        }
    }
}
