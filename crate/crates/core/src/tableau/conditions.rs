use super::{classify, ImexTableau, SchemeClass, SchemeKind, CONDITION_TOL};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEntry {
    pub id: String,
    /// `NaN` when the condition does not apply.
    pub residual: f64,
    pub applicable: bool,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub tolerance: f64,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    fn new(tolerance: f64) -> Self {
        Self { tolerance, entries: Vec::new() }
    }

    fn push(&mut self, id: impl Into<String>, residual: f64) {
        let residual = residual.abs();
        self.entries.push(ConditionEntry {
            id: id.into(),
            residual,
            applicable: true,
            satisfied: residual <= self.tolerance,
        });
    }

    fn skip(&mut self, id: impl Into<String>) {
        self.entries.push(ConditionEntry {
            id: id.into(),
            residual: f64::NAN,
            applicable: false,
            satisfied: false,
        });
    }

    /// All applicable entries hold.
    pub fn all_satisfied(&self) -> bool {
        self.entries.iter().filter(|e| e.applicable).all(|e| e.satisfied)
    }

    pub fn get(&self, id: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entries whose id starts with `prefix`.
    pub fn group(&self, prefix: &str) -> impl Iterator<Item = &ConditionEntry> {
        let p = prefix.to_owned();
        self.entries.iter().filter(move |e| e.id.starts_with(&p))
    }

    fn group_holds(&self, prefix: &str) -> bool {
        let mut any = false;
        for e in self.group(prefix) {
            if !e.applicable || !e.satisfied {
                return false;
            }
            any = true;
        }
        any
    }

    pub fn max_residual(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.applicable)
            .map(|e| e.residual)
            .fold(0.0, f64::max)
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn pow2(v: &DVector<f64>) -> DVector<f64> {
    v.component_mul(v)
}

/// Additive order conditions of the combined scheme up to `p <= 3`.
pub fn check_order_conditions(t: &ImexTableau, p: u32) -> ConditionReport {
    check_order_conditions_with_tol(t, p, CONDITION_TOL)
}

pub fn check_order_conditions_with_tol(t: &ImexTableau, p: u32, tol: f64) -> ConditionReport {
    let mut r = ConditionReport::new(tol);
    let ws = [("w~", t.w_ex()), ("w", t.w_im())];
    let cs = [("c~", t.c_ex()), ("c", t.c_im())];
    let ms = [("A~", t.a_ex()), ("A", t.a_im())];
    if p >= 1 {
        for (bn, b) in ws {
            r.push(format!("p1: sum {bn} = 1"), b.sum() - 1.0);
        }
    }
    if p >= 2 {
        for (bn, b) in ws {
            for (cn, c) in cs {
                r.push(format!("p2: {bn}.{cn} = 1/2"), b.dot(c) - 0.5);
            }
        }
    }
    if p >= 3 {
        for (bn, b) in ws {
            for (i, (cn, c)) in cs.iter().enumerate() {
                for (dn, d) in &cs[i..] {
                    r.push(
                        format!("p3: {bn}.({cn}*{dn}) = 1/3"),
                        b.dot(&c.component_mul(d)) - 1.0 / 3.0,
                    );
                }
            }
            for (mn, m) in ms {
                for (cn, c) in cs {
                    r.push(format!("p3: {bn}.{mn}.{cn} = 1/6"), b.dot(&(m * c)) - 1.0 / 6.0);
                }
            }
        }
    }
    for q in 4..=p {
        r.skip(format!("p{q}: not implemented"));
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Explicit,
    Implicit,
}

/// Classical order conditions of one of the two Runge-Kutta methods alone.
pub fn check_method_order(t: &ImexTableau, part: Part, p: u32) -> ConditionReport {
    let (a, b, c) = match part {
        Part::Explicit => (t.a_ex(), t.w_ex(), t.c_ex()),
        Part::Implicit => (t.a_im(), t.w_im(), t.c_im()),
    };
    let mut r = ConditionReport::new(CONDITION_TOL);
    if p >= 1 {
        r.push("p1: sum b = 1", b.sum() - 1.0);
    }
    if p >= 2 {
        r.push("p2: b.c = 1/2", b.dot(c) - 0.5);
    }
    if p >= 3 {
        r.push("p3: b.c^2 = 1/3", b.dot(&pow2(c)) - 1.0 / 3.0);
        r.push("p3: b.A.c = 1/6", b.dot(&(a * c)) - 1.0 / 6.0);
    }
    for q in 4..=p {
        r.skip(format!("p{q}: not implemented"));
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApReport {
    pub class: Option<SchemeClass>,
    /// Whether the implicit matrix (or its lower block for CK) is invertible.
    pub invertible: bool,
    pub conditions: ConditionReport,
    /// Asymptotic accuracy on consistent initial data.
    pub aa_c: bool,
    /// Asymptotic accuracy for arbitrary initial data.
    pub aa: bool,
}

const IDS_I_A: [&str; 2] = ["i: w.Ainv.e = 1", "i: w~ = w.Ainv.A~"];
const IDS_I_CK: [&str; 4] = [
    "i: w^.A^inv.e = 1",
    "i: w~1 = w^.A^inv.a~",
    "i: w~^ = w^.A^inv.A~^",
    "i: w1 = w^.A^inv.a",
];
const ID_II: &str = "ii: e_nu.A^inv.a = 0";
const IDS_APARS: [&str; 3] = [
    "iii-apars: e_nu.A^inv.A~^ = 0",
    "iii-apars: e_nu.A^inv.a~ = 0",
    "iii-apars: e_nu.A^inv.a = 0",
];
const IDS_APARS2: [&str; 2] = ["iii-apars2: A^inv.a~ = 0", "iii-apars2: A^inv.a = 0"];
const IDS_IV: [&str; 3] = ["iv: w.Kinv.c~ = 1", "iv: w.Kinv.c~^2 = 1", "iv: w.Kinv.A~.c~ = 1/2"];

/// Conditions for the asymptotic preserving / accurate property.
///
/// The index-1 group uses the implicit weights `w`.
pub fn check_ap_conditions(t: &ImexTableau) -> ApReport {
    let mut r = ConditionReport::new(CONDITION_TOL);
    let class = classify(t).ok();
    let Some(cls) = class else {
        for id in IDS_I_A.iter().chain(&IDS_I_CK).chain(&[ID_II]).chain(&IDS_APARS).chain(&IDS_APARS2).chain(&IDS_IV) {
            r.skip(*id);
        }
        return ApReport { class, invertible: false, conditions: r, aa_c: false, aa: false };
    };
    let nu = t.stages();
    let cex2 = pow2(t.c_ex());
    let acex = t.a_ex() * t.c_ex();
    match cls.kind {
        SchemeKind::TypeA => {
            let a = t.a_im();
            let y = a
                .tr_solve_lower_triangular(t.w_im())
                .expect("type A implies invertible");
            r.push(IDS_I_A[0], y.sum() - 1.0);
            r.push(IDS_I_A[1], max_abs(&(t.w_ex() - t.a_ex().transpose() * &y)));
            for id in IDS_I_CK.iter().chain(&[ID_II]).chain(&IDS_APARS).chain(&IDS_APARS2) {
                r.skip(*id);
            }
            r.push(IDS_IV[0], y.dot(t.c_ex()) - 1.0);
            r.push(IDS_IV[1], y.dot(&cex2) - 1.0);
            r.push(IDS_IV[2], y.dot(&acex) - 0.5);
        }
        SchemeKind::TypeCk | SchemeKind::TypeArs => {
            let m = nu - 1;
            let ahat: DMatrix<f64> = t.a_im().view((1, 1), (m, m)).into_owned();
            let a_col: DVector<f64> = t.a_im().view((1, 0), (m, 1)).column(0).into_owned();
            let atil_col: DVector<f64> = t.a_ex().view((1, 0), (m, 1)).column(0).into_owned();
            let atil_hat: DMatrix<f64> = t.a_ex().view((1, 1), (m, m)).into_owned();
            let what: DVector<f64> = t.w_im().rows(1, m).into_owned();
            let wtil_hat: DVector<f64> = t.w_ex().rows(1, m).into_owned();
            let y = ahat.tr_solve_lower_triangular(&what).expect("CK block invertible");
            for id in IDS_I_A {
                r.skip(id);
            }
            r.push(IDS_I_CK[0], y.sum() - 1.0);
            r.push(IDS_I_CK[1], t.w_ex()[0] - y.dot(&atil_col));
            r.push(IDS_I_CK[2], max_abs(&(wtil_hat - atil_hat.transpose() * &y)));
            r.push(IDS_I_CK[3], t.w_im()[0] - y.dot(&a_col));

            let inv_a = ahat.solve_lower_triangular(&a_col).expect("CK block invertible");
            let inv_atil = ahat.solve_lower_triangular(&atil_col).expect("CK block invertible");
            let inv_ahat = ahat
                .solve_lower_triangular(&atil_hat)
                .expect("CK block invertible");
            r.push(ID_II, inv_a[m - 1]);
            let last_row = inv_ahat.row(m - 1).iter().fold(0.0f64, |s, x| s.max(x.abs()));
            r.push(IDS_APARS[0], last_row);
            r.push(IDS_APARS[1], inv_atil[m - 1]);
            r.push(IDS_APARS[2], inv_a[m - 1]);
            r.push(IDS_APARS2[0], max_abs(&inv_atil));
            r.push(IDS_APARS2[1], max_abs(&inv_a));

            let sub = |v: &DVector<f64>| -> DVector<f64> { v.rows(1, m).into_owned() };
            r.push(IDS_IV[0], y.dot(&sub(t.c_ex())) - 1.0);
            r.push(IDS_IV[1], y.dot(&sub(&cex2)) - 1.0);
            r.push(IDS_IV[2], y.dot(&sub(&acex)) - 0.5);
        }
    }
    let ids: &[&str] = if cls.kind == SchemeKind::TypeA { &IDS_I_A } else { &IDS_I_CK };
    let i_holds = ids.iter().all(|id| r.get(id).is_some_and(|e| e.satisfied));
    let aa_c = cls.gsa && i_holds;
    let aa = aa_c
        && (cls.kind == SchemeKind::TypeA
            || r.group_holds("iii-apars:")
            || r.group_holds("iii-apars2:"));
    ApReport { class, invertible: true, conditions: r, aa_c, aa }
}
