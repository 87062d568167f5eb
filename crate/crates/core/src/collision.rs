//! Collision operators: BGK relaxation and the Fourier-Galerkin spectral
//! Boltzmann operator for two dimensional Maxwell molecules, plus the
//! penalization split `Q_B = P(f) - mu f` with `P = Q_B + mu f`.

use crate::phase_space::{maxwellian_into, moments, Correction, MomentState, PhaseSpaceError, VelocityGrid};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Collision kernel constant giving `mu = rho`.
pub const DEFAULT_SIGMA: f64 = 1.0 / (2.0 * PI);

#[derive(Debug, thiserror::Error)]
pub enum CollisionError {
    #[error(transparent)]
    PhaseSpace(#[from] PhaseSpaceError),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("negative density {0}")]
    NegativeDensity(f64),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("kernel cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A collision right hand side evaluated on one velocity slice.
pub trait CollisionOperator: Sync {
    fn apply(&self, f: &[f64], grid: &VelocityGrid) -> Result<Vec<f64>, CollisionError>;
}

/// `mu (M[f] - f)` with the conservative Maxwellian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgkOperator {
    pub mu: f64,
}

impl CollisionOperator for BgkOperator {
    fn apply(&self, f: &[f64], grid: &VelocityGrid) -> Result<Vec<f64>, CollisionError> {
        check_len(f, grid)?;
        let mut m = vec![0.0; grid.len()];
        maxwellian_into(&moments(f, grid), grid, Correction::Conservative, &mut m)?;
        Ok(m.iter().zip(f).map(|(m, f)| self.mu * (m - f)).collect())
    }
}

fn check_len(f: &[f64], grid: &VelocityGrid) -> Result<(), CollisionError> {
    if f.len() != grid.len() {
        return Err(CollisionError::Length { expected: grid.len(), got: f.len() });
    }
    Ok(())
}

/// Spectral Boltzmann operator on the periodized domain `[-T, T]^2`, `T = vmax`.
pub struct SpectralBoltzmann {
    nv: usize,
    vmax: f64,
    sigma: f64,
    /// `beta[((lx*nv + ly)*nv + mx)*nv + my]`, indices offset by `nv/2`.
    beta: Vec<f64>,
    /// Node offset phase per offset mode index.
    shift: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralBoltzmann {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralBoltzmann")
            .field("nv", &self.nv)
            .field("vmax", &self.vmax)
            .field("sigma", &self.sigma)
            .finish()
    }
}

/// `int_0^L r J0(a r) J0(b r) dr` with `a^2 - b^2 = xi^2 * dot`.
fn lommel(a: f64, b: f64, len: f64, dot: i64, xi: f64) -> f64 {
    use libm::{j0, j1};
    if dot == 0 {
        let (u, v) = (j0(a * len), j1(a * len));
        0.5 * len * len * (u * u + v * v)
    } else {
        len * (a * j1(a * len) * j0(b * len) - b * j0(a * len) * j1(b * len)) / (xi * xi * dot as f64)
    }
}

impl SpectralBoltzmann {
    pub fn new(grid: &VelocityGrid, sigma: f64) -> Result<Self, CollisionError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CollisionError::Invalid(format!("sigma must be positive, got {sigma}")));
        }
        let beta = Self::kernel(grid.nv(), grid.vmax(), sigma);
        Ok(Self::with_kernel(grid, sigma, beta))
    }

    fn with_kernel(grid: &VelocityGrid, sigma: f64, beta: Vec<f64>) -> Self {
        let nv = grid.nv();
        let half = (nv / 2) as i64;
        let shift = (0..nv as i64)
            .map(|p| {
                let l = (p - half) as f64;
                Complex64::from_polar(1.0, -PI * l + PI * l / nv as f64)
            })
            .collect();
        let mut planner = FftPlanner::new();
        Self {
            nv,
            vmax: grid.vmax(),
            sigma,
            beta,
            shift,
            fwd: planner.plan_fft_forward(nv),
            inv: planner.plan_fft_inverse(nv),
        }
    }

    /// Truncation radius `R = 2T / (3 + sqrt 2)`; relative speeds are cut at `2R`.
    pub fn radius(&self) -> f64 {
        2.0 * self.vmax / (3.0 + 2f64.sqrt())
    }

    pub fn cutoff(&self) -> f64 {
        2.0 * self.radius()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn kernel(nv: usize, vmax: f64, sigma: f64) -> Vec<f64> {
        let half = (nv / 2) as i64;
        let xi = PI / vmax;
        let len = 4.0 * vmax / (3.0 + 2f64.sqrt());
        let c = 4.0 * PI * PI * sigma;
        let n = nv as i64;
        let loss: Vec<f64> = (0..n * n)
            .map(|q| {
                let (mx, my) = (q / n - half, q % n - half);
                let r = xi * ((mx * mx + my * my) as f64).sqrt();
                if r == 0.0 {
                    c * 0.5 * len * len
                } else {
                    c * len * libm::j1(r * len) / r
                }
            })
            .collect();
        let mut beta = vec![0.0; nv.pow(4)];
        beta.par_chunks_mut(nv * nv).enumerate().for_each(|(p, row)| {
            let (lx, ly) = (p as i64 / n - half, p as i64 % n - half);
            for (q, out) in row.iter_mut().enumerate() {
                let (mx, my) = (q as i64 / n - half, q as i64 % n - half);
                let (sx, sy) = ((lx + mx) as f64, (ly + my) as f64);
                let (dx, dy) = ((lx - mx) as f64, (ly - my) as f64);
                let a = 0.5 * xi * (sx * sx + sy * sy).sqrt();
                let b = 0.5 * xi * (dx * dx + dy * dy).sqrt();
                let gain = c * lommel(a, b, len, lx * mx + ly * my, xi);
                *out = gain - loss[q];
            }
        });
        beta
    }

    /// 2D transform of `f` into offset-ordered coefficients.
    fn to_modes(&self, f: &[f64]) -> Vec<Complex64> {
        let nv = self.nv;
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        let scale = 1.0 / (nv * nv) as f64;
        let half = nv / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); nv * nv];
        for px in 0..nv {
            let ox = (px + half) % nv;
            for py in 0..nv {
                let oy = (py + half) % nv;
                out[ox * nv + oy] = buf[px * nv + py] * scale / (self.shift[ox] * self.shift[oy]);
            }
        }
        out
    }

    fn from_modes(&self, modes: &[Complex64]) -> Vec<f64> {
        let nv = self.nv;
        let half = nv / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); nv * nv];
        for px in 0..nv {
            let ox = (px + half) % nv;
            for py in 0..nv {
                let oy = (py + half) % nv;
                buf[px * nv + py] = modes[ox * nv + oy] * self.shift[ox] * self.shift[oy];
            }
        }
        self.transform(&mut buf, &self.inv);
        buf.iter().map(|c| c.re).collect()
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let nv = self.nv;
        plan.process(buf);
        let mut col = vec![Complex64::new(0.0, 0.0); nv];
        for k in 0..nv {
            for j in 0..nv {
                col[j] = buf[j * nv + k];
            }
            plan.process(&mut col);
            for j in 0..nv {
                buf[j * nv + k] = col[j];
            }
        }
    }

    /// Galerkin truncated `Q_hat_k = sum_{l+m=k} beta(l,m) f_hat_l f_hat_m`.
    fn convolve(&self, fh: &[Complex64]) -> Vec<Complex64> {
        let nv = self.nv;
        let half = nv / 2;
        let mut q = vec![Complex64::new(0.0, 0.0); nv * nv];
        for lx in 0..nv {
            let mx_lo = half.saturating_sub(lx);
            let mx_hi = (nv + half - lx).min(nv);
            for ly in 0..nv {
                let fl = fh[lx * nv + ly];
                if fl.norm_sqr() == 0.0 {
                    continue;
                }
                let my_lo = half.saturating_sub(ly);
                let my_hi = (nv + half - ly).min(nv);
                let base = (lx * nv + ly) * nv * nv;
                for mx in mx_lo..mx_hi {
                    let kx = lx + mx - half;
                    let brow = &self.beta[base + mx * nv..base + (mx + 1) * nv];
                    let frow = &fh[mx * nv..(mx + 1) * nv];
                    let qrow = &mut q[kx * nv..(kx + 1) * nv];
                    for my in my_lo..my_hi {
                        let ky = ly + my - half;
                        qrow[ky] += fl * (frow[my] * brow[my]);
                    }
                }
            }
        }
        q
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    fn cache_name(nv: usize, vmax: f64, sigma: f64) -> String {
        format!("kernel_nv{nv}_vmax{:016x}_sigma{:016x}.bin", vmax.to_bits(), sigma.to_bits())
    }

    /// Loads the kernel from `dir`, building and storing it on a miss.
    pub fn load_or_build(grid: &VelocityGrid, sigma: f64, dir: &Path) -> Result<Self, CollisionError> {
        let path: PathBuf = dir.join(Self::cache_name(grid.nv(), grid.vmax(), sigma));
        if let Ok(mut file) = fs::File::open(&path) {
            let mut raw = Vec::new();
            file.read_to_end(&mut raw)?;
            let n = grid.nv().pow(4);
            if raw.len() != 8 * n {
                return Err(CollisionError::Cache(format!("{} has {} bytes, expected {}", path.display(), raw.len(), 8 * n)));
            }
            let beta = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            return Ok(Self::with_kernel(grid, sigma, beta));
        }
        let op = Self::new(grid, sigma)?;
        fs::create_dir_all(dir)?;
        let mut w = io::BufWriter::new(fs::File::create(&path)?);
        for v in &op.beta {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(op)
    }
}

impl CollisionOperator for SpectralBoltzmann {
    fn apply(&self, f: &[f64], grid: &VelocityGrid) -> Result<Vec<f64>, CollisionError> {
        check_len(f, grid)?;
        if grid.nv() != self.nv || grid.vmax() != self.vmax {
            return Err(CollisionError::Invalid("grid does not match the kernel".into()));
        }
        let fh = self.to_modes(f);
        Ok(self.from_modes(&self.convolve(&fh)))
    }
}

/// `mu = 2 pi sigma rho`, the loss frequency of Maxwell molecules.
pub fn estimate_mu(f: &[f64], grid: &VelocityGrid, sigma: f64) -> Result<f64, CollisionError> {
    check_len(f, grid)?;
    let rho = moments(f, grid).rho;
    if rho < 0.0 {
        return Err(CollisionError::NegativeDensity(rho));
    }
    Ok(2.0 * PI * sigma * rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizationSplit {
    /// `mu (M - f)`.
    pub q_part: Vec<f64>,
    /// `Q_B - mu (M - f)`.
    pub g_part: Vec<f64>,
}

pub fn penalize(
    qb: &[f64],
    f: &[f64],
    m: &MomentState,
    mu: f64,
    grid: &VelocityGrid,
) -> Result<PenalizationSplit, CollisionError> {
    check_len(qb, grid)?;
    check_len(f, grid)?;
    let mut q_part = vec![0.0; grid.len()];
    maxwellian_into(m, grid, Correction::Conservative, &mut q_part)?;
    for (q, fv) in q_part.iter_mut().zip(f) {
        *q = mu * (*q - fv);
    }
    let g_part = qb.iter().zip(&q_part).map(|(a, b)| a - b).collect();
    Ok(PenalizationSplit { q_part, g_part })
}

/// Moment defects `<phi q>` of a collision output.
pub fn moment_defect(q: &[f64], grid: &VelocityGrid) -> [f64; 4] {
    moments(q, grid).to_array()
}

/// Removes the collision invariants from `q` with a correction of the form
/// `weight * (c0 + c.v + c3 |v|^2 / 2)`, leaving zero discrete moments.
pub fn project_conservative(q: &mut [f64], weight: &[f64], grid: &VelocityGrid) -> Result<(), CollisionError> {
    check_len(q, grid)?;
    check_len(weight, grid)?;
    let mut gram = Matrix4::<f64>::zeros();
    let mut rhs = Vector4::<f64>::zeros();
    for (idx, (&qv, &w)) in q.iter().zip(weight).enumerate() {
        let [vx, vy] = grid.velocity(idx);
        let phi = Vector4::new(1.0, vx, vy, 0.5 * (vx * vx + vy * vy));
        gram += phi * phi.transpose() * w;
        rhs += phi * qv;
    }
    let c = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CollisionError::Invalid("singular moment matrix in projection".into()))?;
    for (idx, (qv, &w)) in q.iter_mut().zip(weight).enumerate() {
        let [vx, vy] = grid.velocity(idx);
        *qv -= w * (c[0] + c[1] * vx + c[2] * vy + c[3] * 0.5 * (vx * vx + vy * vy));
    }
    Ok(())
}

/// Quadrature resolution of [`quadrature_reference`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureRule {
    /// Gauss-Legendre points in `|q|`.
    pub radial: usize,
    /// Uniform points in the direction of `q`.
    pub polar: usize,
    /// Uniform points on the scattering circle.
    pub scatter: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self { radial: 48, polar: 64, scatter: 64 }
    }
}

/// Brute force evaluation of the truncated Maxwell molecule operator
/// `sigma int_{|q|<cutoff} int_{S^1} f(v') f(v'_*) - f(v) f(v - q) dw dq`
/// at every node, for a distribution given as a closure.
pub fn quadrature_reference(
    fun: impl Fn(f64, f64) -> f64 + Sync,
    grid: &VelocityGrid,
    sigma: f64,
    cutoff: f64,
    rule: QuadratureRule,
) -> Result<Vec<f64>, CollisionError> {
    let deg = std::num::NonZeroUsize::new(rule.radial)
        .ok_or_else(|| CollisionError::Invalid("radial points must be positive".into()))?;
    if rule.polar == 0 || rule.scatter == 0 || !(cutoff > 0.0) {
        return Err(CollisionError::Invalid("empty quadrature".into()));
    }
    let gl = gauss_quad::GaussLegendre::new(deg);
    let radial: Vec<(f64, f64)> = gl
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0) * cutoff, 0.5 * w * cutoff))
        .collect();
    let dirs = |n: usize| -> Vec<(f64, f64)> {
        (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin_cos()).map(|(s, c)| (c, s)).collect()
    };
    let (th, om) = (dirs(rule.polar), dirs(rule.scatter));
    let dth = 2.0 * PI / rule.polar as f64;
    let dom = 2.0 * PI / rule.scatter as f64;
    let velocities: Vec<[f64; 2]> = grid.velocities().collect();
    Ok(velocities
        .par_iter()
        .map(|&[vx, vy]| {
            let fv = fun(vx, vy);
            let mut acc = 0.0;
            for &(r, wr) in &radial {
                for &(ct, st) in &th {
                    let (qx, qy) = (r * ct, r * st);
                    let loss = fv * fun(vx - qx, vy - qy) * rule.scatter as f64;
                    let mut gain = 0.0;
                    for &(co, so) in &om {
                        let (ox, oy) = (r * co, r * so);
                        gain += fun(vx - 0.5 * (qx - ox), vy - 0.5 * (qy - oy))
                            * fun(vx - 0.5 * (qx + ox), vy - 0.5 * (qy + oy));
                    }
                    acc += (gain - loss) * r * wr;
                }
            }
            sigma * acc * dth * dom
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::maxwellian;

    fn bimodal(grid: &VelocityGrid) -> Vec<f64> {
        let a = maxwellian(&MomentState::from_primitive(0.5, [1.0, 0.0], 0.6), grid, Correction::None).unwrap();
        let b = maxwellian(&MomentState::from_primitive(0.5, [-1.0, 0.5], 0.5), grid, Correction::None).unwrap();
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }

    #[test]
    fn mass_is_conserved_to_rounding() {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let op = SpectralBoltzmann::new(&g, DEFAULT_SIGMA).unwrap();
        let q = op.apply(&bimodal(&g), &g).unwrap();
        assert!(moment_defect(&q, &g)[0].abs() < 1e-13);
    }

    #[test]
    fn kernel_is_inversion_symmetric() {
        let g = VelocityGrid::new(8, 6.0).unwrap();
        let op = SpectralBoltzmann::new(&g, DEFAULT_SIGMA).unwrap();
        let n = 8usize;
        // beta(l, m) = beta(-l, -m) whenever both are in range
        for (l, m) in [((5, 3), (2, 6)), ((4, 4), (1, 7)), ((6, 2), (3, 3))] {
            let idx = |l: (usize, usize), m: (usize, usize)| ((l.0 * n + l.1) * n + m.0) * n + m.1;
            let neg = |p: (usize, usize)| (n - p.0, n - p.1);
            let a = op.beta[idx(l, m)];
            let b = op.beta[idx(neg(l), neg(m))];
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{a} {b}");
        }
    }

    #[test]
    fn roundtrip_through_modes() {
        let g = VelocityGrid::new(8, 5.0).unwrap();
        let op = SpectralBoltzmann::new(&g, DEFAULT_SIGMA).unwrap();
        let f = bimodal(&g);
        let back = op.from_modes(&op.to_modes(&f));
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn bgk_vanishes_on_maxwellian() {
        let g = VelocityGrid::new(16, 7.0).unwrap();
        let m = maxwellian(&MomentState::from_primitive(1.1, [0.2, 0.1], 0.9), &g, Correction::Conservative).unwrap();
        let q = BgkOperator { mu: 3.0 }.apply(&m, &g).unwrap();
        assert!(q.iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn penalize_split_sums_back() {
        let g = VelocityGrid::new(8, 6.0).unwrap();
        let f = bimodal(&g);
        let qb: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin() * 1e-2).collect();
        let s = penalize(&qb, &f, &moments(&f, &g), 1.5, &g).unwrap();
        for i in 0..g.len() {
            assert!((s.q_part[i] + s.g_part[i] - qb[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_removes_all_moments() {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let f = bimodal(&g);
        let mut q: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.11).cos() * 1e-3).collect();
        project_conservative(&mut q, &f, &g).unwrap();
        for d in moment_defect(&q, &g) {
            assert!(d.abs() < 1e-14, "{d}");
        }
    }

    #[test]
    fn mu_estimate_and_errors() {
        let g = VelocityGrid::new(8, 6.0).unwrap();
        let f = bimodal(&g);
        let mu = estimate_mu(&f, &g, DEFAULT_SIGMA).unwrap();
        assert!((mu - moments(&f, &g).rho).abs() < 1e-14);
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        assert!(matches!(estimate_mu(&neg, &g, 1.0), Err(CollisionError::NegativeDensity(_))));
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = VelocityGrid::new(8, 6.0).unwrap();
        let a = SpectralBoltzmann::load_or_build(&g, 0.2, dir.path()).unwrap();
        let b = SpectralBoltzmann::load_or_build(&g, 0.2, dir.path()).unwrap();
        assert_eq!(a.beta, b.beta);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
