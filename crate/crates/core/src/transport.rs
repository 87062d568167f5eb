//! Periodic third order WENO finite differences for `v_x d/dx f`.

use crate::phase_space::DistributionField;
use rayon::prelude::*;

pub const WENO_EPS: f64 = 1e-6;

/// Smallest grid the five point stencil supports.
pub const MIN_CELLS: usize = 5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TransportError {
    #[error("need at least {MIN_CELLS} cells, got {0}")]
    TooFewCells(usize),
    #[error("invalid time step input: {0}")]
    InvalidStep(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

/// Uniform periodic grid of `nx` cells on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    nx: usize,
    dx: f64,
}

impl SpaceGrid {
    pub fn new(nx: usize) -> Result<Self, TransportError> {
        if nx < MIN_CELLS {
            return Err(TransportError::TooFewCells(nx));
        }
        Ok(Self { nx, dx: 1.0 / nx as f64 })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.center(i)).collect()
    }
}

/// Upwind reconstruction at the face to the right of `q0`, from
/// `(q_{i-1}, q_i, q_{i+1})` on the upwind side.
#[inline]
fn face(qm: f64, q0: f64, qp: f64) -> f64 {
    let p0 = -0.5 * qm + 1.5 * q0;
    let p1 = 0.5 * q0 + 0.5 * qp;
    let b0 = (q0 - qm) * (q0 - qm);
    let b1 = (qp - q0) * (qp - q0);
    let a0 = (1.0 / 3.0) / ((WENO_EPS + b0) * (WENO_EPS + b0));
    let a1 = (2.0 / 3.0) / ((WENO_EPS + b1) * (WENO_EPS + b1));
    (a0 * p0 + a1 * p1) / (a0 + a1)
}

/// Reconstruction of face `i + 1/2` for wind of sign `s`.
#[inline]
fn face_value(q: impl Fn(isize) -> f64, i: isize, s: f64) -> f64 {
    if s > 0.0 {
        face(q(i - 1), q(i), q(i + 1))
    } else {
        face(q(i + 2), q(i + 1), q(i))
    }
}

/// Approximates `dq/dx` upwinded for a wind of sign `sign(wind)`.
/// A zero wind gives zero.
pub fn weno3_derivative(q: &[f64], wind: f64, dx: f64) -> Result<Vec<f64>, TransportError> {
    let n = q.len();
    if n < MIN_CELLS {
        return Err(TransportError::TooFewCells(n));
    }
    if wind == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let at = |k: isize| q[k.rem_euclid(n as isize) as usize];
    let faces: Vec<f64> = (0..n as isize).map(|i| face_value(at, i, wind)).collect();
    Ok((0..n).map(|i| (faces[i] - faces[(i + n - 1) % n]) / dx).collect())
}

/// `-v_x d/dx f` on every velocity node.
pub fn advection_rhs(f: &DistributionField, sgrid: &SpaceGrid) -> Result<DistributionField, TransportError> {
    let nx = f.nx();
    if nx != sgrid.nx() {
        return Err(TransportError::Length { expected: sgrid.nx(), got: nx });
    }
    let mut out = DistributionField::zeros(nx, f.grid().clone());
    advection_rhs_into(f, sgrid, out.data_mut());
    Ok(out)
}

/// Same as [`advection_rhs`], writing into a caller owned buffer.
pub fn advection_rhs_into(f: &DistributionField, sgrid: &SpaceGrid, out: &mut [f64]) {
    let nx = f.nx();
    let grid = f.grid();
    let n = grid.len();
    let nv = grid.nv();
    let vx: Vec<f64> = (0..n).map(|k| grid.nodes_1d()[k / nv]).collect();
    let data = f.data();
    let cell = |i: isize| {
        let i = i.rem_euclid(nx as isize) as usize;
        &data[i * n..(i + 1) * n]
    };
    // faces[i] holds the flux through x_{i+1/2}
    let mut faces = vec![0.0; nx * n];
    faces.par_chunks_mut(n).enumerate().for_each(|(i, fc)| {
        let i = i as isize;
        let (cm, c0, cp, cpp) = (cell(i - 1), cell(i), cell(i + 1), cell(i + 2));
        for k in 0..n {
            let v = vx[k];
            fc[k] = if v > 0.0 {
                v * face(cm[k], c0[k], cp[k])
            } else if v < 0.0 {
                v * face(cpp[k], cp[k], c0[k])
            } else {
                0.0
            };
        }
    });
    let inv = 1.0 / sgrid.dx();
    out.par_chunks_mut(n).enumerate().for_each(|(i, o)| {
        let right = &faces[i * n..(i + 1) * n];
        let l = (i + nx - 1) % nx;
        let left = &faces[l * n..(l + 1) * n];
        for k in 0..n {
            o[k] = -(right[k] - left[k]) * inv;
        }
    });
}

/// `cfl * dx / vmax`.
pub fn cfl_dt(sgrid: &SpaceGrid, vmax: f64, cfl: f64) -> Result<f64, TransportError> {
    if !(cfl > 0.0 && cfl.is_finite()) {
        return Err(TransportError::InvalidStep(format!("cfl must be positive, got {cfl}")));
    }
    if !(vmax > 0.0 && vmax.is_finite()) {
        return Err(TransportError::InvalidStep(format!("vmax must be positive, got {vmax}")));
    }
    Ok(cfl * sgrid.dx() / vmax)
}
