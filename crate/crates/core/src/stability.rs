//! Linear stability of standard and penalized IMEX schemes.
//!
//! For the penalized relaxation problem the scheme reduces to the rational
//! function `R(alpha, z) = 1 - z b^T (I + z K)^{-1} e` with
//! `K = A - (alpha - 1) A~` and `b = w - (alpha - 1) w~`, `alpha = lambda / mu`.
//! `alpha = 1` recovers the DIRK stability function of the implicit part.

use crate::tableau::{check_ap_conditions, classify, ImexTableau, Registry, SchemeKind};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::fmt;

/// Slack allowed in componentwise non-negativity checks.
pub const NONNEG_TOL: f64 = 1e-12;

pub const ALPHA_SAMPLES: [f64; 6] = [0.25, 0.5, 1.0, 1.5, 2.0, 4.0];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StabilityError {
    #[error("I + zK is singular at z = {z}")]
    Singular { z: f64 },
    #[error("no finite limit of R(alpha, z) as z -> infinity at alpha = {alpha}")]
    NoLimit { alpha: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

fn shifted(t: &ImexTableau, alpha: f64) -> (DMatrix<f64>, DVector<f64>) {
    let s = alpha - 1.0;
    (t.a_im() - t.a_ex() * s, t.w_im() - t.w_ex() * s)
}

fn solve_shifted(k: &DMatrix<f64>, z: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>, StabilityError> {
    let n = k.nrows();
    let m = DMatrix::identity(n, n) + k * z;
    if (0..n).any(|i| m[(i, i)].abs() < 1e-300) {
        return Err(StabilityError::Singular { z });
    }
    m.solve_lower_triangular(rhs).ok_or(StabilityError::Singular { z })
}

fn rational(k: &DMatrix<f64>, b: &DVector<f64>, z: f64) -> Result<f64, StabilityError> {
    if !z.is_finite() || z < 0.0 {
        return Err(StabilityError::Invalid(format!("z must be finite and >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let n = k.nrows();
    let e = DMatrix::from_element(n, 1, 1.0);
    let x = solve_shifted(k, z, &e)?;
    Ok(1.0 - z * b.dot(&x.column(0)))
}

/// `R(z) = 1 - z w^T (I + zA)^{-1} e`.
pub fn dirk_stability(t: &ImexTableau, z: f64) -> Result<f64, StabilityError> {
    rational(t.a_im(), t.w_im(), z)
}

pub fn penalized_stability(t: &ImexTableau, alpha: f64, z: f64) -> Result<f64, StabilityError> {
    if !alpha.is_finite() {
        return Err(StabilityError::Invalid(format!("alpha must be finite, got {alpha}")));
    }
    let (k, b) = shifted(t, alpha);
    rational(&k, &b, z)
}

fn diag_invertible(k: &DMatrix<f64>, from: usize) -> bool {
    (from..k.nrows()).all(|i| k[(i, i)].abs() > 1e-14)
}

/// `lim_{z -> inf} R(alpha, z)`.  Returns `+-inf` when the function grows
/// linearly in `z`.
pub fn stability_at_infinity(t: &ImexTableau, alpha: f64) -> Result<f64, StabilityError> {
    if !alpha.is_finite() {
        return Err(StabilityError::Invalid(format!("alpha must be finite, got {alpha}")));
    }
    let (k, b) = shifted(t, alpha);
    let n = k.nrows();
    if diag_invertible(&k, 0) {
        let x = k
            .solve_lower_triangular(&DVector::from_element(n, 1.0))
            .ok_or(StabilityError::NoLimit { alpha })?;
        return Ok(1.0 - b.dot(&x));
    }
    let first_row_zero = (0..n).all(|j| k[(0, j)].abs() <= 1e-14);
    if n > 1 && first_row_zero && diag_invertible(&k, 1) {
        let m = n - 1;
        let kh: DMatrix<f64> = k.view((1, 1), (m, m)).into_owned();
        let kc: DVector<f64> = k.view((1, 0), (m, 1)).column(0).into_owned();
        let bh: DVector<f64> = b.rows(1, m).into_owned();
        let x = kh.solve_lower_triangular(&kc).ok_or(StabilityError::NoLimit { alpha })?;
        let growth = bh.dot(&x) - b[0];
        let scale = 1.0 + b[0].abs() + bh.amax();
        if growth.abs() > 1e-12 * scale {
            return Ok(f64::INFINITY.copysign(growth));
        }
        let y = kh
            .solve_lower_triangular(&DVector::from_element(m, 1.0))
            .ok_or(StabilityError::NoLimit { alpha })?;
        let x2 = kh.solve_lower_triangular(&x).ok_or(StabilityError::NoLimit { alpha })?;
        return Ok(1.0 - bh.dot(&y) - bh.dot(&x2));
    }
    // irregular structure: probe large z directly
    let r1 = rational(&k, &b, 1e8)?;
    let r2 = rational(&k, &b, 1e10)?;
    if (r1 - r2).abs() <= 1e-6 * (1.0 + r2.abs()) {
        Ok(r2)
    } else {
        Err(StabilityError::NoLimit { alpha })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn mid(&self) -> f64 {
        if self.hi.is_finite() {
            0.5 * (self.lo + self.hi)
        } else {
            self.lo + 1.0
        }
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        return "inf".into();
    }
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakApRange {
    /// Open intervals where `|R(alpha, inf)| < 1`.
    pub intervals: Vec<Interval>,
    /// Scan upper bound; an interval ending here is open-ended.
    pub alpha_max: f64,
}

impl WeakApRange {
    pub fn contains(&self, alpha: f64) -> bool {
        self.intervals.iter().any(|i| i.lo < alpha && alpha < i.hi)
    }
}

impl fmt::Display for WeakApRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|i| {
                let hi = if i.hi >= self.alpha_max { f64::INFINITY } else { i.hi };
                format!("({},{})", fmt_num(i.lo), fmt_num(hi))
            })
            .collect();
        f.write_str(&parts.join(" U "))
    }
}

fn bisect(mut a: f64, mut b: f64, a_in: bool, tol: f64, inside: impl Fn(f64) -> bool) -> f64 {
    while (b - a).abs() > tol * (1.0 + a.abs()) {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if inside(m) == a_in {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn abs_r_inf(t: &ImexTableau, alpha: f64) -> f64 {
    match stability_at_infinity(t, alpha) {
        Ok(r) if r.is_nan() => f64::INFINITY,
        Ok(r) => r.abs(),
        Err(_) => f64::INFINITY,
    }
}

/// Scan `(0, alpha_max)` with step `resolution` and refine every boundary
/// of `{|R(alpha, inf)| < 1}` by bisection.
pub fn weak_ap_range(t: &ImexTableau, alpha_max: f64, resolution: f64) -> Result<WeakApRange, StabilityError> {
    if !(alpha_max > 0.0 && resolution > 0.0 && resolution < alpha_max) {
        return Err(StabilityError::Invalid(format!(
            "need 0 < resolution < alpha_max, got {resolution}, {alpha_max}"
        )));
    }
    let tol = 1e-13;
    let inside = |a: f64| abs_r_inf(t, a) < 1.0;
    let n = (alpha_max / resolution).round() as usize;
    let alphas: Vec<f64> = (1..n).map(|k| k as f64 * resolution).collect();
    let vals: Vec<f64> = alphas.iter().map(|&a| abs_r_inf(t, a)).collect();

    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for k in 0..alphas.len() {
        let a = alphas[k];
        let now = vals[k] < 1.0;
        match (start, now) {
            (None, true) => {
                let lo = if k == 0 {
                    let tiny = resolution * 1e-6;
                    if inside(tiny) { 0.0 } else { bisect(tiny, a, false, tol, inside) }
                } else {
                    bisect(alphas[k - 1], a, false, tol, inside)
                };
                start = Some(lo);
            }
            (Some(lo), false) => {
                intervals.push(Interval { lo, hi: bisect(alphas[k - 1], a, true, tol, inside) });
                start = None;
            }
            (Some(lo), true) if k > 0 && k + 1 < alphas.len() => {
                // a tangency |R| = 1 inside a run removes a single point
                let (p, q) = (vals[k - 1], vals[k + 1]);
                if vals[k] >= p && vals[k] >= q && vals[k] > 1.0 - 1e-3 {
                    let (am, peak) = golden_max(alphas[k - 1], alphas[k + 1], |x| abs_r_inf(t, x));
                    if peak >= 1.0 - 1e-10 {
                        intervals.push(Interval { lo, hi: am });
                        start = Some(am);
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(lo) = start {
        intervals.push(Interval { lo, hi: alpha_max });
    }
    Ok(WeakApRange { intervals, alpha_max })
}

fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Positive `z` sampling used by the monotonicity scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub per_decade: usize,
}

impl Default for ZGrid {
    fn default() -> Self {
        Self { z_min: 1e-3, z_max: 1e6, per_decade: 400 }
    }
}

impl ZGrid {
    /// `0` followed by log-spaced points.
    pub fn points(&self) -> Vec<f64> {
        let l0 = self.z_min.log10();
        let l1 = self.z_max.log10();
        let n = ((l1 - l0) * self.per_decade as f64).ceil() as usize;
        let mut z = Vec::with_capacity(n + 2);
        z.push(0.0);
        for i in 0..=n {
            z.push(10f64.powf(l0 + (l1 - l0) * i as f64 / n as f64));
        }
        z
    }
}

fn min_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Smallest entry of `(I+zA)^{-1} [e, A e]`.
fn standard_margin(t: &ImexTableau, z: f64) -> f64 {
    let n = t.stages();
    let mut rhs = DMatrix::from_element(n, 2, 1.0);
    rhs.set_column(1, t.c_im());
    solve_shifted(t.a_im(), z, &rhs).map_or(f64::NEG_INFINITY, |x| min_entry(&x))
}

/// Smallest entry of `(I+zA)^{-1} [e, (A - A~) e, A~]`.
fn penalized_margin(t: &ImexTableau, z: f64) -> f64 {
    let n = t.stages();
    let mut rhs = DMatrix::zeros(n, n + 2);
    rhs.column_mut(0).fill(1.0);
    rhs.set_column(1, &(t.c_im() - t.c_ex()));
    rhs.view_mut((0, 2), (n, n)).copy_from(t.a_ex());
    solve_shifted(t.a_im(), z, &rhs).map_or(f64::NEG_INFINITY, |x| min_entry(&x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZIndependent {
    /// `1 - w^T A^{-1} e`; `None` when `A` is singular.
    pub one_minus_w_ainv_e: Option<f64>,
    /// Smallest entry of `w^T A^{-1}`.
    pub min_w_ainv: Option<f64>,
    /// `max |w~ - (w^T A^{-1} A~)^T|`, penalized check only.
    pub consistency: Option<f64>,
}

impl ZIndependent {
    fn compute(t: &ImexTableau) -> Self {
        match t.a_im().tr_solve_lower_triangular(t.w_im()).filter(|_| diag_invertible(t.a_im(), 0)) {
            Some(y) => Self {
                one_minus_w_ainv_e: Some(1.0 - y.sum()),
                min_w_ainv: Some(y.min()),
                consistency: Some((t.w_ex() - t.a_ex().transpose() * &y).amax()),
            },
            None => Self { one_minus_w_ainv_e: None, min_w_ainv: None, consistency: None },
        }
    }

    /// `None` when the checks do not apply.
    pub fn holds(&self, with_consistency: bool) -> Option<bool> {
        let (a, b) = (self.one_minus_w_ainv_e?, self.min_w_ainv?);
        let mut ok = a >= -NONNEG_TOL && b >= -NONNEG_TOL;
        if with_consistency {
            ok &= self.consistency? <= 1e-12;
        }
        Some(ok)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardMonotonicity {
    /// Largest `z` with `[0, z]` monotone; `inf` when unbounded on the grid.
    pub radius: f64,
    pub z_independent: ZIndependent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedMonotonicity {
    /// Closed intervals of monotone `z >= 0`.
    pub intervals: Vec<Interval>,
    pub z_independent: ZIndependent,
    /// First positive sample of the scan; pieces ending below it count as `{0}`.
    pub z_floor: f64,
}

impl PenalizedMonotonicity {
    /// Positive part of the region, or `z=0` when nothing beyond zero survives.
    pub fn summary(&self) -> String {
        let positive: Vec<String> = self
            .intervals
            .iter()
            .filter(|i| i.hi >= self.z_floor)
            .map(|i| format!("[{},{}{}", fmt_num(i.lo), fmt_num(i.hi), if i.hi.is_finite() { "]" } else { ")" }))
            .collect();
        if positive.is_empty() {
            "z=0".into()
        } else {
            positive.join(" U ")
        }
    }

    pub fn contains(&self, z: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(z))
    }
}

pub fn monotonicity_standard(t: &ImexTableau, grid: &ZGrid) -> StandardMonotonicity {
    let ok = |z: f64| standard_margin(t, z) >= -NONNEG_TOL;
    let zs = grid.points();
    let mut radius = f64::INFINITY;
    for (i, &z) in zs.iter().enumerate() {
        if !ok(z) {
            radius = if i == 0 { 0.0 } else { bisect(zs[i - 1], z, true, 1e-13, ok) };
            break;
        }
    }
    StandardMonotonicity { radius, z_independent: ZIndependent::compute(t) }
}

pub fn monotonicity_penalized(t: &ImexTableau, grid: &ZGrid) -> PenalizedMonotonicity {
    let ok = |z: f64| penalized_margin(t, z) >= -NONNEG_TOL;
    let zs = grid.points();
    let flags: Vec<bool> = zs.iter().map(|&z| ok(z)).collect();
    let mut intervals = Vec::new();
    let mut start = if flags[0] { Some(0.0) } else { None };
    for i in 1..zs.len() {
        match (start, flags[i - 1], flags[i]) {
            (None, false, true) => start = Some(bisect(zs[i - 1], zs[i], false, 1e-13, ok)),
            (Some(lo), true, false) => {
                let hi = bisect(zs[i - 1], zs[i], true, 1e-13, ok);
                intervals.push(Interval { lo, hi: hi.max(lo) });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(lo) = start {
        intervals.push(Interval { lo, hi: f64::INFINITY });
    }
    PenalizedMonotonicity { intervals, z_independent: ZIndependent::compute(t), z_floor: grid.z_min }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub name: String,
    pub kind: SchemeKind,
    pub gsa: bool,
    pub aa: bool,
    pub aa_c: bool,
    pub r_inf_samples: Vec<(f64, f64)>,
    pub weak_ap: WeakApRange,
    pub standard: StandardMonotonicity,
    pub penalized: PenalizedMonotonicity,
}

pub const CSV_HEADER: [&str; 8] = [
    "name",
    "type",
    "gsa",
    "aa",
    "aa_c",
    "am_intervals",
    "weak_ap_intervals",
    "R_inf_alpha_samples",
];

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.into()
}

impl StabilityReport {
    pub fn csv_record(&self) -> Vec<String> {
        let samples: Vec<String> = self
            .r_inf_samples
            .iter()
            .map(|(a, r)| format!("{}:{}", fmt_num(*a), fmt_num(*r)))
            .collect();
        vec![
            self.name.clone(),
            self.kind.label().into(),
            yes_no(self.gsa),
            yes_no(self.aa),
            yes_no(self.aa_c),
            self.penalized.summary(),
            self.weak_ap.to_string(),
            samples.join(";"),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    pub alpha_max: f64,
    pub alpha_resolution: f64,
    pub z_grid: ZGrid,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self { alpha_max: 16.0, alpha_resolution: 1e-4, z_grid: ZGrid::default() }
    }
}

pub fn analyze_scheme(t: &ImexTableau, s: &AnalysisSettings) -> Result<StabilityReport, StabilityError> {
    let class = classify(t).map_err(|e| StabilityError::Invalid(format!("{}: {e}", t.name())))?;
    let ap = check_ap_conditions(t);
    let r_inf_samples = ALPHA_SAMPLES
        .iter()
        .map(|&a| stability_at_infinity(t, a).map(|r| (a, r)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StabilityReport {
        name: t.name().into(),
        kind: class.kind,
        gsa: class.gsa,
        aa: ap.aa,
        aa_c: ap.aa_c,
        r_inf_samples,
        weak_ap: weak_ap_range(t, s.alpha_max, s.alpha_resolution)?,
        standard: monotonicity_standard(t, &s.z_grid),
        penalized: monotonicity_penalized(t, &s.z_grid),
    })
}

/// One row per registry entry; failures stay attached to their scheme.
pub fn stability_report(
    registry: &Registry,
    s: &AnalysisSettings,
) -> Vec<(String, Result<StabilityReport, StabilityError>)> {
    let schemes: Vec<&ImexTableau> = registry.iter().collect();
    schemes
        .par_iter()
        .map(|t| (t.name().to_string(), analyze_scheme(t, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alpha_one_is_dirk_function() {
        for t in Registry::standard().iter() {
            for z in [0.0, 0.1, 1.0, 7.5, 1e3] {
                let a = dirk_stability(t, z).unwrap();
                let b = penalized_stability(t, 1.0, z).unwrap();
                assert!(close(a, b, 1e-14), "{} z={z}", t.name());
            }
        }
    }

    #[test]
    fn backward_euler_function() {
        let t = ars_111();
        for z in [0.5, 2.0, 100.0] {
            assert!(close(dirk_stability(&t, z).unwrap(), 1.0 / (1.0 + z), 1e-15));
        }
    }

    #[test]
    fn ars111_limit_is_alpha_minus_one() {
        let t = ars_111();
        for a in [0.1, 0.7, 1.3, 2.5] {
            assert!(close(stability_at_infinity(&t, a).unwrap(), a - 1.0, 1e-14));
        }
    }

    #[test]
    fn ck_limit_matches_large_z() {
        let t = jf_ck_232();
        for a in [0.3, 1.0, 1.7] {
            let lim = stability_at_infinity(&t, a).unwrap();
            let big = penalized_stability(&t, a, 1e9).unwrap();
            assert!(close(lim, big, 1e-6), "a={a}: {lim} vs {big}");
            assert!(close(lim, 2.0 * a * a - 4.0 * a + 1.0, 1e-13));
        }
    }

    #[test]
    fn coinciding_abscissae_give_identity_at_two() {
        let t = ars_222(1.0 - 0.5f64.sqrt());
        for z in [0.1, 3.0, 1e4] {
            assert!(close(penalized_stability(&t, 2.0, z).unwrap(), 1.0, 1e-12));
        }
    }

    #[test]
    fn rejects_negative_z() {
        assert!(matches!(dirk_stability(&ars_111(), -1.0), Err(StabilityError::Invalid(_))));
    }

    #[test]
    fn weak_range_of_backward_euler_pair() {
        let r = weak_ap_range(&ars_111(), 16.0, 1e-4).unwrap();
        assert_eq!(r.intervals.len(), 1);
        assert!(close(r.intervals[0].lo, 0.0, 1e-12));
        assert!(close(r.intervals[0].hi, 2.0, 1e-8));
        assert_eq!(r.to_string(), "(0,2)");
    }

    #[test]
    fn tangency_splits_interval() {
        let r = weak_ap_range(&ars_222(1.0 - 0.5f64.sqrt()), 16.0, 1e-4).unwrap();
        assert_eq!(r.intervals.len(), 2, "{r}");
        assert!(close(r.intervals[0].hi, 2f64.sqrt(), 1e-6));
        assert!(close(r.intervals[0].lo, 2.0 * 2f64.sqrt() - 2.0, 1e-8));
    }

    #[test]
    fn standard_radius_backward_euler_is_unbounded() {
        let m = monotonicity_standard(&dp_a_121(1.0), &ZGrid::default());
        assert!(m.radius.is_infinite());
    }

    #[test]
    fn grid_contains_zero_and_ends() {
        let p = ZGrid::default().points();
        assert_eq!(p[0], 0.0);
        assert!(close(p[1], 1e-3, 1e-15));
        assert!(close(*p.last().unwrap(), 1e6, 1e-6));
        assert_eq!(p.len(), 2 + 9 * 400);
    }
}
