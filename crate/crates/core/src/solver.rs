//! IMEX time steppers for `f_t + v_x f_x = Q(f) / eps`.
//!
//! Every stage is solved explicitly: the stage moments follow from the
//! explicit part alone because the implicit relaxation term conserves them,
//! which fixes the Maxwellian, and the remaining relation is diagonal.

use crate::collision::{project_conservative, CollisionError, CollisionOperator};
use crate::phase_space::{
    maxwellian, maxwellian_into, moments, Correction, DistributionField, MomentState, PhaseSpaceError, VelocityGrid,
};
use crate::tableau::ImexTableau;
use crate::transport::{advection_rhs_into, SpaceGrid, TransportError};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid step configuration: {0}")]
    Config(String),
    #[error("stage {stage}, cell {cell}: inadmissible moments (rho = {rho}, T = {temperature})")]
    Inadmissible { stage: usize, cell: usize, rho: f64, temperature: f64 },
    #[error("stage {stage}: 1 + dt a_ii mu / eps = {value} is not positive")]
    SingularStage { stage: usize, value: f64 },
    #[error("a collision operator is required in this mode")]
    MissingOperator,
    #[error(transparent)]
    PhaseSpace(#[from] PhaseSpaceError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    StandardBgk,
    PenalizedBoltzmann,
    HomogeneousBgk,
    HomogeneousPenalized,
    /// Linear penalized relaxation with true rate `lambda = alpha * mu`.
    HomogeneousLinearized { alpha: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct StepConfig<'a> {
    pub tableau: &'a ImexTableau,
    pub eps: f64,
    pub dt: f64,
    /// Relaxation rate of the implicit BGK term.
    pub mu: f64,
    pub mode: StepMode,
    pub correction: Correction,
}

impl<'a> StepConfig<'a> {
    pub fn new(tableau: &'a ImexTableau, eps: f64, dt: f64, mu: f64, mode: StepMode) -> Self {
        Self { tableau, eps, dt, mu, mode, correction: Correction::Conservative }
    }

    /// `z = dt mu / eps`.
    pub fn z(&self) -> f64 {
        self.dt * self.mu / self.eps
    }

    fn validate(&self) -> Result<(), SolverError> {
        for (name, v) in [("eps", self.eps), ("dt", self.dt), ("mu", self.mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let StepMode::HomogeneousLinearized { alpha } = self.mode {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(SolverError::Config(format!("alpha must be positive, got {alpha}")));
            }
        }
        Ok(())
    }

    fn expect_mode(&self, ok: bool) -> Result<(), SolverError> {
        if ok {
            Ok(())
        } else {
            Err(SolverError::Config(format!("mode {:?} not valid for this stepper", self.mode)))
        }
    }
}

/// Per stage moments of `dt L(F_i)` recorded during a kinetic step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTrace {
    /// `moments[i][cell]`; empty for stages whose transport term is unused.
    pub transport_moments: Vec<Vec<[f64; 4]>>,
    /// Stage moments used for the Maxwellians.
    pub stage_moments: Vec<Vec<MomentState>>,
}

/// Columns of `m` that actually feed a later stage or the update.
fn used_columns(m: &nalgebra::DMatrix<f64>, w: &nalgebra::DVector<f64>) -> Vec<bool> {
    let nu = w.len();
    (0..nu).map(|j| w[j] != 0.0 || (j + 1..nu).any(|i| m[(i, j)] != 0.0)).collect()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += a * x);
}

/// One step with implicit BGK relaxation.
pub fn imex_step_standard(
    f: &DistributionField,
    sgrid: &SpaceGrid,
    cfg: &StepConfig,
) -> Result<DistributionField, SolverError> {
    cfg.expect_mode(cfg.mode == StepMode::StandardBgk)?;
    kinetic_step(f, sgrid, cfg, None, None)
}

/// One step with `Q_B` split as an implicit BGK penalizer plus the explicit deviation.
pub fn imex_step_penalized(
    f: &DistributionField,
    sgrid: &SpaceGrid,
    cfg: &StepConfig,
    qb: &dyn CollisionOperator,
) -> Result<DistributionField, SolverError> {
    cfg.expect_mode(cfg.mode == StepMode::PenalizedBoltzmann)?;
    kinetic_step(f, sgrid, cfg, Some(qb), None)
}

/// Either kinetic stepper, also returning the stage moment trace.
pub fn imex_step_traced(
    f: &DistributionField,
    sgrid: &SpaceGrid,
    cfg: &StepConfig,
    qb: Option<&dyn CollisionOperator>,
) -> Result<(DistributionField, StageTrace), SolverError> {
    match (cfg.mode, qb) {
        (StepMode::StandardBgk, None) => {}
        (StepMode::PenalizedBoltzmann, Some(_)) => {}
        (StepMode::PenalizedBoltzmann, None) => return Err(SolverError::MissingOperator),
        _ => return cfg.expect_mode(false).map(|_| unreachable!()),
    }
    let mut trace = StageTrace::default();
    let out = kinetic_step(f, sgrid, cfg, qb, Some(&mut trace))?;
    Ok((out, trace))
}

/// `G = Q_B(F) - mu (M - F)` with its collision invariants removed.
fn deviation(
    qb: &dyn CollisionOperator,
    fc: &[f64],
    mc: &[f64],
    mu: f64,
    grid: &VelocityGrid,
) -> Result<Vec<f64>, SolverError> {
    let mut g = qb.apply(fc, grid)?;
    for ((g, m), f) in g.iter_mut().zip(mc).zip(fc) {
        *g -= mu * (m - f);
    }
    project_conservative(&mut g, mc, grid)?;
    Ok(g)
}

fn kinetic_step(
    f: &DistributionField,
    sgrid: &SpaceGrid,
    cfg: &StepConfig,
    qb: Option<&dyn CollisionOperator>,
    mut trace: Option<&mut StageTrace>,
) -> Result<DistributionField, SolverError> {
    cfg.validate()?;
    let t = cfg.tableau;
    let (a_ex, a_im, w_ex, w_im) = (t.a_ex(), t.a_im(), t.w_ex(), t.w_im());
    let nu = t.stages();
    let grid = f.grid().clone();
    let n = grid.len();
    let nx = f.nx();
    if nx != sgrid.nx() {
        return Err(TransportError::Length { expected: sgrid.nx(), got: nx }.into());
    }
    let z = cfg.z();
    let dt = cfg.dt;
    let un = f.moments();
    let need_ex = used_columns(a_ex, w_ex);
    let need_im = used_columns(a_im, w_im);

    // dt L(F_j) + dt/eps G(F_j), and dt mu/eps (M_j - F_j)
    let mut explicit: Vec<Option<Vec<f64>>> = vec![None; nu];
    let mut implicit: Vec<Option<Vec<f64>>> = vec![None; nu];
    let mut dl: Vec<Vec<[f64; 4]>> = vec![Vec::new(); nu];
    let mut max_dev = 0.0f64;

    for i in 0..nu {
        let ui: Vec<MomentState> = (0..nx)
            .map(|c| {
                let mut a = un[c].to_array();
                for j in 0..i {
                    let s = a_ex[(i, j)];
                    if s != 0.0 && !dl[j].is_empty() {
                        for q in 0..4 {
                            a[q] += s * dl[j][c][q];
                        }
                    }
                }
                MomentState::from_array(a)
            })
            .collect();
        if let Some(c) = ui.iter().position(|m| !m.is_admissible()) {
            return Err(SolverError::Inadmissible {
                stage: i,
                cell: c,
                rho: ui[c].rho,
                temperature: ui[c].temperature(),
            });
        }

        let mut stage = f.data().to_vec();
        for j in 0..i {
            if let (s, Some(e)) = (a_ex[(i, j)], &explicit[j]) {
                if s != 0.0 {
                    axpy(&mut stage, s, e);
                }
            }
            if let (s, Some(k)) = (a_im[(i, j)], &implicit[j]) {
                if s != 0.0 {
                    axpy(&mut stage, s, k);
                }
            }
        }

        let h = z * a_im[(i, i)];
        if 1.0 + h <= 0.0 {
            return Err(SolverError::SingularStage { stage: i, value: 1.0 + h });
        }
        let mut kbuf = vec![0.0; nx * n];
        let mut mbuf = vec![0.0; nx * n];
        stage
            .par_chunks_mut(n)
            .zip(kbuf.par_chunks_mut(n))
            .zip(mbuf.par_chunks_mut(n))
            .enumerate()
            .try_for_each(|(c, ((s, k), m))| -> Result<(), SolverError> {
                maxwellian_into(&ui[c], &grid, cfg.correction, m)?;
                for q in 0..n {
                    let r = s[q];
                    k[q] = z * (m[q] - r) / (1.0 + h);
                    s[q] = (r + h * m[q]) / (1.0 + h);
                }
                Ok(())
            })?;

        if need_ex[i] {
            let field = DistributionField::from_vec(nx, grid.clone(), stage)?;
            let mut e = vec![0.0; nx * n];
            advection_rhs_into(&field, sgrid, &mut e);
            e.par_iter_mut().for_each(|v| *v *= dt);
            dl[i] = e.chunks_exact(n).map(|c| moments(c, &grid).to_array()).collect();
            if let Some(op) = qb {
                let scale = dt / cfg.eps;
                let devs: Vec<f64> = e
                    .par_chunks_mut(n)
                    .enumerate()
                    .map(|(c, ec)| -> Result<f64, SolverError> {
                        let g = deviation(op, field.cell(c), &mbuf[c * n..(c + 1) * n], cfg.mu, &grid)?;
                        let mut norm = 0.0f64;
                        for (e, g) in ec.iter_mut().zip(&g) {
                            *e += scale * g;
                            norm = norm.max(g.abs());
                        }
                        Ok(scale * norm)
                    })
                    .collect::<Result<_, _>>()?;
                max_dev = devs.into_iter().fold(max_dev, f64::max);
            }
            explicit[i] = Some(e);
        }
        if need_im[i] {
            implicit[i] = Some(kbuf);
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.transport_moments.push(dl[i].clone());
            tr.stage_moments.push(ui);
        }
    }
    if max_dev > 1e3 {
        log::warn!("explicit deviation term is large: dt/eps |G_P| = {max_dev:.3e}");
    }

    let mut out = f.data().to_vec();
    for i in 0..nu {
        if let (Some(e), s) = (&explicit[i], w_ex[i]) {
            if s != 0.0 {
                axpy(&mut out, s, e);
            }
        }
        if let (Some(k), s) = (&implicit[i], w_im[i]) {
            if s != 0.0 {
                axpy(&mut out, s, k);
            }
        }
    }
    Ok(DistributionField::from_vec(nx, grid, out)?)
}

/// Space homogeneous step on a single velocity slice.
pub fn homogeneous_step(
    f: &[f64],
    grid: &VelocityGrid,
    cfg: &StepConfig,
    qb: Option<&dyn CollisionOperator>,
) -> Result<Vec<f64>, SolverError> {
    cfg.validate()?;
    if f.len() != grid.len() {
        return Err(PhaseSpaceError::Length { expected: grid.len(), got: f.len() }.into());
    }
    let t = cfg.tableau;
    let (a_ex, a_im, w_ex, w_im) = (t.a_ex(), t.a_im(), t.w_ex(), t.w_im());
    let nu = t.stages();
    let z = cfg.z();
    let m0 = moments(f, grid);
    if !m0.is_admissible() {
        return Err(SolverError::Inadmissible { stage: 0, cell: 0, rho: m0.rho, temperature: m0.temperature() });
    }
    let m = maxwellian(&m0, grid, cfg.correction)?;
    let y: Vec<f64> = f.iter().zip(&m).map(|(f, m)| f - m).collect();
    let n = grid.len();
    let alpha = match cfg.mode {
        StepMode::HomogeneousBgk => None,
        StepMode::HomogeneousLinearized { alpha } => Some(alpha),
        StepMode::HomogeneousPenalized => {
            let op = qb.ok_or(SolverError::MissingOperator)?;
            return homogeneous_penalized(f, &m, grid, cfg, op);
        }
        _ => return cfg.expect_mode(false).map(|_| unreachable!()),
    };

    // deviation form: Y_i = F_i - M
    let mut ex: Vec<Vec<f64>> = Vec::with_capacity(nu);
    let mut im: Vec<Vec<f64>> = Vec::with_capacity(nu);
    for i in 0..nu {
        let mut r = y.clone();
        for j in 0..i {
            let (se, si) = (a_ex[(i, j)], a_im[(i, j)]);
            for q in 0..n {
                r[q] += se * ex[j][q] + si * im[j][q];
            }
        }
        let d = 1.0 + z * a_im[(i, i)];
        if d <= 0.0 {
            return Err(SolverError::SingularStage { stage: i, value: d });
        }
        let yi: Vec<f64> = r.iter().map(|v| v / d).collect();
        im.push(yi.iter().map(|v| -z * v).collect());
        ex.push(match alpha {
            Some(a) => yi.iter().map(|v| z * (a - 1.0) * v).collect(),
            None => vec![0.0; n],
        });
    }
    let mut out = y;
    for i in 0..nu {
        for q in 0..n {
            out[q] += w_ex[i] * ex[i][q] + w_im[i] * im[i][q];
        }
    }
    for (o, m) in out.iter_mut().zip(&m) {
        *o += m;
    }
    Ok(out)
}

fn homogeneous_penalized(
    f: &[f64],
    m: &[f64],
    grid: &VelocityGrid,
    cfg: &StepConfig,
    op: &dyn CollisionOperator,
) -> Result<Vec<f64>, SolverError> {
    let t = cfg.tableau;
    let (a_ex, a_im, w_ex, w_im) = (t.a_ex(), t.a_im(), t.w_ex(), t.w_im());
    let nu = t.stages();
    let n = grid.len();
    let z = cfg.z();
    let scale = cfg.dt / cfg.eps;
    let need_ex = used_columns(a_ex, w_ex);
    let mut ex: Vec<Vec<f64>> = Vec::with_capacity(nu);
    let mut im: Vec<Vec<f64>> = Vec::with_capacity(nu);
    for i in 0..nu {
        let mut r = f.to_vec();
        for j in 0..i {
            let (se, si) = (a_ex[(i, j)], a_im[(i, j)]);
            for q in 0..n {
                r[q] += se * ex[j][q] + si * im[j][q];
            }
        }
        let h = z * a_im[(i, i)];
        if 1.0 + h <= 0.0 {
            return Err(SolverError::SingularStage { stage: i, value: 1.0 + h });
        }
        let mut k = vec![0.0; n];
        for q in 0..n {
            k[q] = z * (m[q] - r[q]) / (1.0 + h);
            r[q] = (r[q] + h * m[q]) / (1.0 + h);
        }
        im.push(k);
        ex.push(if need_ex[i] {
            let mut g = deviation(op, &r, m, cfg.mu, grid)?;
            g.iter_mut().for_each(|v| *v *= scale);
            g
        } else {
            vec![0.0; n]
        });
    }
    let mut out = f.to_vec();
    for i in 0..nu {
        for q in 0..n {
            out[q] += w_ex[i] * ex[i][q] + w_im[i] * im[i][q];
        }
    }
    Ok(out)
}

/// Right hand side `L(f) + (G(f) + mu (M - f)) / eps` of the penalized
/// semi-discretization, for reference integrators.
pub fn penalized_rhs(
    f: &DistributionField,
    sgrid: &SpaceGrid,
    eps: f64,
    mu: f64,
    qb: &dyn CollisionOperator,
) -> Result<DistributionField, SolverError> {
    let grid = f.grid().clone();
    let n = grid.len();
    let mut out = DistributionField::zeros(f.nx(), grid.clone());
    advection_rhs_into(f, sgrid, out.data_mut());
    out.data_mut().par_chunks_mut(n).enumerate().try_for_each(|(c, o)| -> Result<(), SolverError> {
        let fc = f.cell(c);
        let m = maxwellian(&moments(fc, &grid), &grid, Correction::Conservative)?;
        let g = deviation(qb, fc, &m, mu, &grid)?;
        for q in 0..n {
            o[q] += (g[q] + mu * (m[q] - fc[q])) / eps;
        }
        Ok(())
    })?;
    Ok(out)
}

/// `<v_x phi M>` for the discrete Maxwellian of `m`.
pub fn euler_flux(m: &MomentState, grid: &VelocityGrid, correction: Correction) -> Result<[f64; 4], SolverError> {
    let mw = maxwellian(m, grid, correction)?;
    let mut acc = [0.0; 4];
    for (idx, &fv) in mw.iter().enumerate() {
        let [vx, vy] = grid.velocity(idx);
        let g = vx * fv;
        acc[0] += g;
        acc[1] += vx * g;
        acc[2] += vy * g;
        acc[3] += 0.5 * (vx * vx + vy * vy) * g;
    }
    Ok(acc.map(|a| a * grid.weight()))
}

/// Explicit part `(A~, w~)` applied to the moment system closed by the
/// discrete Maxwellian, with the same WENO derivative as the kinetic solver.
pub fn euler_reference_step(
    u: &[MomentState],
    tableau: &ImexTableau,
    dt: f64,
    sgrid: &SpaceGrid,
    vgrid: &VelocityGrid,
    correction: Correction,
) -> Result<Vec<MomentState>, SolverError> {
    if !(dt > 0.0) {
        return Err(SolverError::Config(format!("dt must be positive, got {dt}")));
    }
    let nx = u.len();
    if nx != sgrid.nx() {
        return Err(TransportError::Length { expected: sgrid.nx(), got: nx }.into());
    }
    let (a_ex, w_ex) = (tableau.a_ex(), tableau.w_ex());
    let nu = tableau.stages();
    let n = vgrid.len();
    let mut d: Vec<Vec<[f64; 4]>> = Vec::with_capacity(nu);
    for i in 0..nu {
        let ui: Vec<MomentState> = (0..nx)
            .map(|c| {
                let mut a = u[c].to_array();
                for j in 0..i {
                    for q in 0..4 {
                        a[q] += dt * a_ex[(i, j)] * d[j][c][q];
                    }
                }
                MomentState::from_array(a)
            })
            .collect();
        if let Some(c) = ui.iter().position(|m| !m.is_admissible()) {
            return Err(SolverError::Inadmissible {
                stage: i,
                cell: c,
                rho: ui[c].rho,
                temperature: ui[c].temperature(),
            });
        }
        let field = DistributionField::from_cells(nx, vgrid.clone(), |c, out| {
            maxwellian_into(&ui[c], vgrid, correction, out)
        })?;
        let mut l = vec![0.0; nx * n];
        advection_rhs_into(&field, sgrid, &mut l);
        d.push(l.chunks_exact(n).map(|c| moments(c, vgrid).to_array()).collect());
    }
    Ok((0..nx)
        .map(|c| {
            let mut a = u[c].to_array();
            for i in 0..nu {
                for q in 0..4 {
                    a[q] += dt * w_ex[i] * d[i][c][q];
                }
            }
            MomentState::from_array(a)
        })
        .collect())
}

/// `(rho0, u0, T0)` of the smooth test problem at `x`.
pub fn initial_profile(x: f64) -> (f64, [f64; 2], f64) {
    let s = (2.0 * PI * x).sin();
    let c = (2.0 * PI * x).cos();
    ((2.0 + s) / 3.0, [c / 5.0, 0.0], (3.0 + c) / 4.0)
}

/// Local equilibrium with the smooth profile.
pub fn equilibrium_initial(sgrid: &SpaceGrid, vgrid: &VelocityGrid) -> Result<DistributionField, SolverError> {
    Ok(DistributionField::from_cells(sgrid.nx(), vgrid.clone(), |i, out| {
        let (rho, u, temp) = initial_profile(sgrid.center(i));
        maxwellian_into(&MomentState::from_primitive(rho, u, temp), vgrid, Correction::Conservative, out)
    })?)
}

/// Two drifting Maxwellians with velocities `u0` and `-3 u0`.
pub fn non_equilibrium_initial(sgrid: &SpaceGrid, vgrid: &VelocityGrid) -> Result<DistributionField, SolverError> {
    Ok(DistributionField::from_cells(sgrid.nx(), vgrid.clone(), |i, out| {
        let (rho, u, temp) = initial_profile(sgrid.center(i));
        let c = rho / (2.0 * PI * temp);
        for (idx, o) in out.iter_mut().enumerate() {
            let [vx, vy] = vgrid.velocity(idx);
            let a = ((vx - u[0]).powi(2) + (vy - u[1]).powi(2)) / (2.0 * temp);
            let b = ((vx + 3.0 * u[0]).powi(2) + (vy + 3.0 * u[1]).powi(2)) / (2.0 * temp);
            *o = c * 0.5 * ((-a).exp() + (-b).exp());
        }
        Ok(())
    })?)
}

/// `||f - M[f]||_1 / ||f||_1` over the whole field.
pub fn equilibrium_distance(f: &DistributionField, correction: Correction) -> Result<f64, SolverError> {
    let grid = f.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..f.nx() {
        let fc = f.cell(c);
        let m = maxwellian(&moments(fc, grid), grid, correction)?;
        for (a, b) in fc.iter().zip(&m) {
            num += (a - b).abs();
            den += a.abs();
        }
    }
    Ok(num / den)
}
