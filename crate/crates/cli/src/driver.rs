//! Simulation runs and grid refinement studies.

use std::path::Path;

use apkin_core::collision::{estimate_mu, BgkOperator, CollisionOperator, SpectralBoltzmann};
use apkin_core::phase_space::{maxwellian, Correction, DistributionField, MomentState, VelocityGrid};
use apkin_core::solver::{
    equilibrium_initial, homogeneous_step, imex_step_penalized, imex_step_standard, initial_profile,
    non_equilibrium_initial, SolverError, StepConfig, StepMode,
};
use apkin_core::tableau::{parse_tableau, ImexTableau, Registry};
use apkin_core::transport::{cfl_dt, SpaceGrid};
use rayon::prelude::*;

use crate::config::{InitialData, Operator, Reference, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Other(String),
}

impl RunError {
    /// Usage problems map to exit code 2, everything else to 1.
    pub fn is_usage(&self) -> bool {
        matches!(self, RunError::UnknownScheme(_) | RunError::Setup(_))
    }
}

/// Resolves scheme names against the registry. `all` expands to every entry and
/// a path to an existing file is read as a tableau description.
pub fn resolve_schemes(names: &[String], registry: &Registry) -> Result<Vec<ImexTableau>, RunError> {
    let mut out = Vec::new();
    for name in names {
        if name.eq_ignore_ascii_case("all") {
            out.extend(registry.iter().cloned());
        } else if let Some(t) = registry.get(name) {
            out.push(t.clone());
        } else if Path::new(name).is_file() {
            let src = std::fs::read_to_string(name).map_err(|e| RunError::Setup(format!("{name}: {e}")))?;
            out.push(parse_tableau(&src).map_err(|e| RunError::Setup(format!("{name}: {e}")))?);
        } else {
            return Err(RunError::UnknownScheme(name.clone()));
        }
    }
    Ok(out)
}

/// State at a reported time level.
#[derive(Debug, Clone)]
pub enum Snapshot<'a> {
    Field(&'a DistributionField),
    Slice(&'a [f64]),
}

impl Snapshot<'_> {
    pub fn moments(&self, grid: &VelocityGrid) -> Vec<MomentState> {
        match self {
            Snapshot::Field(f) => f.moments(),
            Snapshot::Slice(s) => vec![apkin_core::phase_space::moments(s, grid)],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    /// Relaxation rate used by the implicit part.
    pub mu: f64,
    pub final_field: DistributionField,
    pub initial_mass: f64,
    pub final_mass: f64,
}

impl RunSummary {
    pub fn densities(&self) -> Vec<f64> {
        self.final_field.moments().iter().map(|m| m.rho).collect()
    }

    /// Relative change of total mass.
    pub fn mass_drift(&self) -> f64 {
        (self.final_mass - self.initial_mass).abs() / self.initial_mass.abs()
    }
}

fn total_mass(f: &DistributionField) -> f64 {
    f.moments().iter().map(|m| m.rho).sum::<f64>() / f.nx() as f64
}

/// Homogeneous state taken from the smooth profile at `x = 0`.
pub fn homogeneous_initial(init: InitialData, grid: &VelocityGrid) -> Result<Vec<f64>, RunError> {
    let (rho, u, temp) = initial_profile(0.0);
    let out = match init {
        InitialData::Equilibrium => {
            maxwellian(&MomentState::from_primitive(rho, u, temp), grid, Correction::Conservative)
                .map_err(SolverError::from)?
        }
        InitialData::NonEquilibrium => {
            let a = maxwellian(&MomentState::from_primitive(rho, u, temp), grid, Correction::None)
                .map_err(SolverError::from)?;
            let b = maxwellian(
                &MomentState::from_primitive(rho, [-3.0 * u[0], -3.0 * u[1]], temp),
                grid,
                Correction::None,
            )
            .map_err(SolverError::from)?;
            a.iter().zip(&b).map(|(a, b)| 0.5 * (a + b)).collect()
        }
    };
    Ok(out)
}

/// Number of steps and step size landing exactly on `t_final`.
pub fn step_schedule(t_final: f64, dt_max: f64) -> (usize, f64) {
    let n = ((t_final / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, t_final / n as f64)
}

fn build_operator(cfg: &RunConfig, grid: &VelocityGrid) -> Result<Box<dyn CollisionOperator>, RunError> {
    Ok(match cfg.operator {
        Operator::Bgk => Box::new(BgkOperator { mu: cfg.mu }),
        Operator::Boltzmann => {
            let op = match std::env::var_os("APKIN_KERNEL_CACHE") {
                Some(dir) => SpectralBoltzmann::load_or_build(grid, cfg.sigma, Path::new(&dir)),
                None => SpectralBoltzmann::new(grid, cfg.sigma),
            }
            .map_err(|e| RunError::Setup(e.to_string()))?;
            Box::new(op)
        }
    })
}

/// Penalization rate: the configured BGK rate, or the largest local estimate for Boltzmann.
fn penalization_rate(cfg: &RunConfig, f: &DistributionField) -> Result<f64, RunError> {
    match cfg.operator {
        Operator::Bgk => Ok(cfg.mu),
        Operator::Boltzmann => {
            let mut mu: f64 = 0.0;
            for c in 0..f.nx() {
                mu = mu.max(estimate_mu(f.cell(c), f.grid(), cfg.sigma).map_err(SolverError::from)?);
            }
            Ok(mu)
        }
    }
}

/// Runs one scheme on `nx` cells to `cfg.t_final`. `nx = 1` selects the space
/// homogeneous stepper. `observe(step, t, state)` sees the initial state and every step.
pub fn run_simulation(
    cfg: &RunConfig,
    tableau: &ImexTableau,
    nx: usize,
    mut observe: impl FnMut(usize, f64, Snapshot<'_>) -> Result<(), RunError>,
) -> Result<RunSummary, RunError> {
    let vgrid = VelocityGrid::new(cfg.nv, cfg.vmax).map_err(|e| RunError::Setup(e.to_string()))?;
    let penalized = cfg.uses_penalization();
    let op = if penalized { Some(build_operator(cfg, &vgrid)?) } else { None };

    if nx == 1 {
        let mut f = homogeneous_initial(cfg.init, &vgrid)?;
        let single = DistributionField::from_vec(1, vgrid.clone(), f.clone()).map_err(SolverError::from)?;
        let mu = penalization_rate(cfg, &single)?;
        let (steps, dt) = step_schedule(cfg.t_final, cfg.cfl / cfg.vmax);
        let mode = if penalized { StepMode::HomogeneousPenalized } else { StepMode::HomogeneousBgk };
        let step = StepConfig::new(tableau, cfg.eps, dt, mu, mode);
        let m0 = apkin_core::phase_space::moments(&f, &vgrid).rho;
        observe(0, 0.0, Snapshot::Slice(&f))?;
        for n in 1..=steps {
            f = homogeneous_step(&f, &vgrid, &step, op.as_deref())?;
            observe(n, n as f64 * dt, Snapshot::Slice(&f))?;
        }
        let m1 = apkin_core::phase_space::moments(&f, &vgrid).rho;
        let final_field = DistributionField::from_vec(1, vgrid, f).map_err(SolverError::from)?;
        return Ok(RunSummary { steps, dt, mu, final_field, initial_mass: m0, final_mass: m1 });
    }

    let sgrid = SpaceGrid::new(nx).map_err(|e| RunError::Setup(e.to_string()))?;
    let mut f = match cfg.init {
        InitialData::Equilibrium => equilibrium_initial(&sgrid, &vgrid)?,
        InitialData::NonEquilibrium => non_equilibrium_initial(&sgrid, &vgrid)?,
    };
    let dt_max = cfl_dt(&sgrid, cfg.vmax, cfg.cfl).map_err(|e| RunError::Setup(e.to_string()))?;
    let (steps, dt) = step_schedule(cfg.t_final, dt_max);
    let mu = if penalized { penalization_rate(cfg, &f)? } else { cfg.mu };
    let mode = if penalized { StepMode::PenalizedBoltzmann } else { StepMode::StandardBgk };
    let step = StepConfig::new(tableau, cfg.eps, dt, mu, mode);
    let initial_mass = total_mass(&f);
    observe(0, 0.0, Snapshot::Field(&f))?;
    for n in 1..=steps {
        f = match &op {
            Some(op) => imex_step_penalized(&f, &sgrid, &step, op.as_ref())?,
            None => imex_step_standard(&f, &sgrid, &step)?,
        };
        observe(n, n as f64 * dt, Snapshot::Field(&f))?;
    }
    log::debug!("{} nx={nx}: {steps} steps of {dt:.3e}", tableau.name());
    let final_mass = total_mass(&f);
    Ok(RunSummary { steps, dt, mu, final_field: f, initial_mass, final_mass })
}

/// Sixth order midpoint restriction of a periodic cell array to half as many cells.
pub fn restrict(fine: &[f64]) -> Vec<f64> {
    let n = fine.len();
    let at = |k: isize| fine[k.rem_euclid(n as isize) as usize];
    (0..n as isize / 2)
        .map(|i| {
            let j = 2 * i;
            (3.0 * at(j - 2) - 25.0 * at(j - 1) + 150.0 * at(j) + 150.0 * at(j + 1) - 25.0 * at(j + 2)
                + 3.0 * at(j + 3))
                / 256.0
        })
        .collect()
}

/// Restricts `fine` down to `n` cells by repeated halving.
pub fn restrict_to(fine: &[f64], n: usize) -> Result<Vec<f64>, RunError> {
    let mut v = fine.to_vec();
    while v.len() > n {
        if v.len() % 2 != 0 {
            return Err(RunError::Setup(format!("cannot restrict {} cells to {n}", fine.len())));
        }
        v = restrict(&v);
    }
    if v.len() != n {
        return Err(RunError::Setup(format!("cannot restrict {} cells to {n}", fine.len())));
    }
    Ok(v)
}

/// One line of a refinement table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub error: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub scheme: String,
    pub rows: Vec<ConvergenceRow>,
    pub max_mass_drift: f64,
}

impl ConvergenceStudy {
    /// Order on the finest available pair.
    pub fn final_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).sum::<f64>() / a.len() as f64
}

/// Checks that each grid doubles the previous one.
pub fn validate_nx_list(nx: &[usize]) -> Result<(), RunError> {
    if nx.len() < 3 {
        return Err(RunError::Setup("a refinement study needs at least three grids".into()));
    }
    for w in nx.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(RunError::Setup(format!("grids must double: {} then {}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Density errors and observed orders of one scheme over `cfg.nx`.
pub fn converge(cfg: &RunConfig, tableau: &ImexTableau) -> Result<ConvergenceStudy, RunError> {
    validate_nx_list(&cfg.nx)?;
    let runs = cfg
        .nx
        .par_iter()
        .map(|&nx| run_simulation(cfg, tableau, nx, |_, _, _| Ok(())))
        .collect::<Result<Vec<_>, _>>()?;
    let rho: Vec<Vec<f64>> = runs.iter().map(|r| r.densities()).collect();
    let last = rho.len() - 1;
    let mut rows = Vec::with_capacity(last);
    for i in 0..last {
        let reference = match cfg.reference {
            Reference::Successive => restrict(&rho[i + 1]),
            Reference::Finest => restrict_to(&rho[last], cfg.nx[i])?,
        };
        let error = l1(&rho[i], &reference);
        let order = rows.last().map(|p: &ConvergenceRow| (p.error / error).log2());
        rows.push(ConvergenceRow { nx: cfg.nx[i], error, order });
    }
    let max_mass_drift = runs.iter().map(|r| r.mass_drift()).fold(0.0, f64::max);
    Ok(ConvergenceStudy { scheme: tableau.name().into(), rows, max_mass_drift })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restriction_is_exact_on_quintics() {
        // periodic polynomials are not available, so test on the interior of a long array
        let n = 64;
        let h = 1.0 / n as f64;
        let p = |x: f64| 1.0 + x - 2.0 * x.powi(2) + 0.5 * x.powi(3) + x.powi(4) - 0.3 * x.powi(5);
        let fine: Vec<f64> = (0..n).map(|i| p((i as f64 + 0.5) * h)).collect();
        let coarse = restrict(&fine);
        for i in 2..n / 2 - 2 {
            let x = (2 * i + 1) as f64 * h;
            assert!((coarse[i] - p(x)).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn restrict_to_rejects_odd_ratios() {
        assert!(restrict_to(&[1.0; 12], 5).is_err());
        assert_eq!(restrict_to(&[2.0; 16], 4).unwrap(), vec![2.0; 4]);
    }

    #[test]
    fn schedule_hits_final_time() {
        let (n, dt) = step_schedule(0.05, 0.5 / 128.0 / 8.0);
        assert_eq!(n, 103);
        assert!((n as f64 * dt - 0.05).abs() < 1e-15);
        assert_eq!(step_schedule(1.0, 0.25).0, 4);
    }

    #[test]
    fn nx_lists() {
        assert!(validate_nx_list(&[32, 64, 128]).is_ok());
        assert!(validate_nx_list(&[32, 64]).is_err());
        assert!(validate_nx_list(&[32, 48, 96]).is_err());
    }

    #[test]
    fn unknown_scheme() {
        let r = Registry::standard();
        assert!(matches!(resolve_schemes(&["nosuch".into()], &r), Err(RunError::UnknownScheme(_))));
        assert_eq!(resolve_schemes(&["all".into()], &r).unwrap().len(), 11);
    }
}
