//! Two dimensional velocity grid, moments, Maxwellians and entropy.

use std::f64::consts::PI;
use std::io::{self, Read, Write};

/// Spatial dimension of the velocity space.
pub const DIM: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum PhaseSpaceError {
    #[error("invalid velocity grid: {0}")]
    InvalidGrid(String),
    #[error("inadmissible state: rho = {rho}, T = {temperature}")]
    Inadmissible { rho: f64, temperature: f64 },
    #[error("negative distribution entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    nv: usize,
    vmax: f64,
    dv: f64,
    nodes: Vec<f64>,
}

impl VelocityGrid {
    /// Midpoint grid on `[-vmax, vmax]^2` with `nv` points per direction.
    pub fn new(nv: usize, vmax: f64) -> Result<Self, PhaseSpaceError> {
        if nv < 2 || nv % 2 != 0 {
            return Err(PhaseSpaceError::InvalidGrid(format!("nv must be even and >= 2, got {nv}")));
        }
        if !(vmax > 0.0 && vmax.is_finite()) {
            return Err(PhaseSpaceError::InvalidGrid(format!("vmax must be positive, got {vmax}")));
        }
        let dv = 2.0 * vmax / nv as f64;
        let nodes = (0..nv).map(|k| -vmax + (k as f64 + 0.5) * dv).collect();
        Ok(Self { nv, vmax, dv, nodes })
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// Quadrature weight of one node.
    pub fn weight(&self) -> f64 {
        self.dv * self.dv
    }

    /// Number of nodes, `nv^2`.
    pub fn len(&self) -> usize {
        self.nv * self.nv
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes_1d(&self) -> &[f64] {
        &self.nodes
    }

    /// Velocity of flat index `j * nv + k`.
    #[inline]
    pub fn velocity(&self, idx: usize) -> [f64; 2] {
        [self.nodes[idx / self.nv], self.nodes[idx % self.nv]]
    }

    pub fn velocities(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(|i| self.velocity(i))
    }
}

/// Conserved moments `(rho, rho u, E)` with `E = 1/2 int |v|^2 f`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentState {
    pub rho: f64,
    pub momentum: [f64; 2],
    pub energy: f64,
}

impl MomentState {
    pub fn from_primitive(rho: f64, u: [f64; 2], temperature: f64) -> Self {
        let u2 = u[0] * u[0] + u[1] * u[1];
        Self {
            rho,
            momentum: [rho * u[0], rho * u[1]],
            energy: 0.5 * rho * (DIM as f64 * temperature + u2),
        }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { rho: a[0], momentum: [a[1], a[2]], energy: a[3] }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rho, self.momentum[0], self.momentum[1], self.energy]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.momentum[0] / self.rho, self.momentum[1] / self.rho]
    }

    /// `T = (2E - rho |u|^2) / (d rho)`.
    pub fn temperature(&self) -> f64 {
        let m2 = self.momentum[0] * self.momentum[0] + self.momentum[1] * self.momentum[1];
        (2.0 * self.energy - m2 / self.rho) / (DIM as f64 * self.rho)
    }

    pub fn is_admissible(&self) -> bool {
        self.rho > 0.0 && self.temperature() > 0.0 && self.to_array().iter().all(|x| x.is_finite())
    }

    fn check(&self) -> Result<(), PhaseSpaceError> {
        if self.is_admissible() {
            Ok(())
        } else {
            Err(PhaseSpaceError::Inadmissible { rho: self.rho, temperature: self.temperature() })
        }
    }

    pub fn add_scaled(self, other: Self, s: f64) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array([a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]])
    }

    /// Largest absolute component difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let (a, b) = (self.to_array(), other.to_array());
        (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
    }
}

/// Discrete moments of `f`.
pub fn moments(f: &[f64], grid: &VelocityGrid) -> MomentState {
    let mut acc = [0.0f64; 4];
    for (idx, &fv) in f.iter().enumerate() {
        let [vx, vy] = grid.velocity(idx);
        acc[0] += fv;
        acc[1] += vx * fv;
        acc[2] += vy * fv;
        acc[3] += 0.5 * (vx * vx + vy * vy) * fv;
    }
    let w = grid.weight();
    MomentState::from_array(acc.map(|a| a * w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Correction {
    /// Sampled Maxwellian.
    None,
    /// Parameters adjusted so the discrete moments are reproduced.
    #[default]
    Conservative,
}

fn sample_into(rho: f64, u: [f64; 2], temperature: f64, grid: &VelocityGrid, out: &mut [f64]) {
    let c = rho / (2.0 * PI * temperature);
    let inv = 0.5 / temperature;
    let nv = grid.nv();
    let ex: Vec<f64> = grid.nodes_1d().iter().map(|v| (-(v - u[0]).powi(2) * inv).exp()).collect();
    let ey: Vec<f64> = grid.nodes_1d().iter().map(|v| (-(v - u[1]).powi(2) * inv).exp()).collect();
    for (j, row) in out.chunks_exact_mut(nv).enumerate() {
        let cx = c * ex[j];
        for (o, &e) in row.iter_mut().zip(&ey) {
            *o = cx * e;
        }
    }
}

pub fn maxwellian(m: &MomentState, grid: &VelocityGrid, mode: Correction) -> Result<Vec<f64>, PhaseSpaceError> {
    let mut out = vec![0.0; grid.len()];
    maxwellian_into(m, grid, mode, &mut out)?;
    Ok(out)
}

/// Writes the Maxwellian with moments `m` into `out`.
pub fn maxwellian_into(
    m: &MomentState,
    grid: &VelocityGrid,
    mode: Correction,
    out: &mut [f64],
) -> Result<(), PhaseSpaceError> {
    if out.len() != grid.len() {
        return Err(PhaseSpaceError::Length { expected: grid.len(), got: out.len() });
    }
    m.check()?;
    let mut p = *m;
    sample_into(p.rho, p.velocity(), p.temperature(), grid, out);
    if mode == Correction::None {
        return Ok(());
    }
    let scale = m.rho.abs() + m.momentum[0].abs() + m.momentum[1].abs() + m.energy.abs();
    let mut best = f64::INFINITY;
    let mut prev = p;
    for _ in 0..40 {
        let got = moments(out, grid);
        let err = m.max_diff(&got);
        if err >= best {
            // stagnated at rounding level: keep the previous iterate
            sample_into(prev.rho, prev.velocity(), prev.temperature(), grid, out);
            break;
        }
        if err <= 1e-15 * scale {
            break;
        }
        best = err;
        prev = p;
        let next = p.add_scaled(*m, 1.0).add_scaled(got, -1.0);
        if !next.is_admissible() {
            return Err(PhaseSpaceError::Inadmissible { rho: next.rho, temperature: next.temperature() });
        }
        p = next;
        sample_into(p.rho, p.velocity(), p.temperature(), grid, out);
    }
    Ok(())
}

/// `H(f) = sum f log f dv^2`, with zero entries contributing nothing.
pub fn entropy(f: &[f64], grid: &VelocityGrid) -> Result<f64, PhaseSpaceError> {
    let mut h = 0.0;
    for (index, &v) in f.iter().enumerate() {
        if v < 0.0 {
            return Err(PhaseSpaceError::NegativeEntry { index, value: v });
        }
        if v > 1e-300 {
            h += v * v.ln();
        }
    }
    Ok(h * grid.weight())
}

/// Distribution on `nx` spatial cells, stored cell by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    grid: VelocityGrid,
    nx: usize,
    data: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(nx: usize, grid: VelocityGrid) -> Self {
        let data = vec![0.0; nx * grid.len()];
        Self { grid, nx, data }
    }

    pub fn from_vec(nx: usize, grid: VelocityGrid, data: Vec<f64>) -> Result<Self, PhaseSpaceError> {
        if data.len() != nx * grid.len() {
            return Err(PhaseSpaceError::Length { expected: nx * grid.len(), got: data.len() });
        }
        Ok(Self { grid, nx, data })
    }

    /// Fills cell `i` with `cell(i, out)`.
    pub fn from_cells(
        nx: usize,
        grid: VelocityGrid,
        mut cell: impl FnMut(usize, &mut [f64]) -> Result<(), PhaseSpaceError>,
    ) -> Result<Self, PhaseSpaceError> {
        let mut f = Self::zeros(nx, grid);
        let n = f.grid.len();
        for (i, c) in f.data.chunks_exact_mut(n).enumerate() {
            cell(i, c)?;
        }
        Ok(f)
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[i * n..(i + 1) * n]
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

    pub fn moments(&self) -> Vec<MomentState> {
        self.data.chunks_exact(self.grid.len()).map(|c| moments(c, &self.grid)).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Little-endian: `nx` u64, `nv` u64, `vmax` f64, then the values.
    pub fn write_snapshot(&self, mut w: impl Write) -> Result<(), PhaseSpaceError> {
        w.write_all(&(self.nx as u64).to_le_bytes())?;
        w.write_all(&(self.grid.nv() as u64).to_le_bytes())?;
        w.write_all(&self.grid.vmax().to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot(mut r: impl Read) -> Result<Self, PhaseSpaceError> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let nx = u64::from_le_bytes(b) as usize;
        r.read_exact(&mut b)?;
        let nv = u64::from_le_bytes(b) as usize;
        r.read_exact(&mut b)?;
        let vmax = f64::from_le_bytes(b);
        let grid = VelocityGrid::new(nv, vmax)?;
        let n = nx
            .checked_mul(grid.len())
            .ok_or_else(|| PhaseSpaceError::Format("size overflow".into()))?;
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() != 8 * n {
            return Err(PhaseSpaceError::Format(format!("expected {} value bytes, got {}", 8 * n, raw.len())));
        }
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Self::from_vec(nx, grid, data)
    }
}
