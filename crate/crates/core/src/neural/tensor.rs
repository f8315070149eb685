use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Tensor> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Tensor::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row `i` of a tensor viewed as `shape[0] × rest`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.data.len() / self.shape[0].max(1);
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        if self.shape.is_empty() {
            0
        } else {
            self.data.len() / self.shape[0].max(1)
        }
    }
}

/// `out += W x` with `W` rows × cols.
pub(crate) fn matvec_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let wr = &w[r * cols..(r + 1) * cols];
        *o += wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += Wᵀ dy`.
pub(crate) fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    for (r, &g) in dy.iter().enumerate().take(rows) {
        if g == 0.0 {
            continue;
        }
        let wr = &w[r * cols..(r + 1) * cols];
        for (d, &wv) in dx.iter_mut().zip(wr) {
            *d += g * wv;
        }
    }
}

/// `g += dy xᵀ`.
pub(crate) fn outer_acc(g: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for (gv, &xv) in g[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *gv += d * xv;
        }
    }
}
