//! IMEX Runge-Kutta double Butcher tableaux.
//!
//! A scheme is stored as an explicit part `(A~, w~)` with strictly lower
//! triangular `A~` and a diagonally implicit part `(A, w)`.  The helpers in
//! this module classify a scheme (type A / CK / ARS, ISA, GSA) and evaluate
//! the classical additive order conditions together with the conditions that
//! make a scheme asymptotic preserving and asymptotically accurate.

mod conditions;
mod registry;
mod text;

pub use conditions::{
    check_ap_conditions, check_method_order, check_order_conditions, ApReport, ConditionEntry,
    ConditionReport, Part,
};
pub use registry::{
    ars_111, ars_222, ars_443, bpr_ck_353, dp1_a_242, dp2_a_242, dp_a_121, dp_ars_121,
    jf_ck_232, Registry,
};
pub use text::{parse_tableau, write_tableau};

use nalgebra::{DMatrix, DVector};
use std::fmt;

/// Entries below this magnitude count as zero when classifying.
pub const ZERO_TOL: f64 = 1e-14;

/// Default residual tolerance for order and AP conditions.
pub const CONDITION_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TableauError {
    #[error("tableau dimensions are inconsistent: {0}")]
    Dimension(String),
    #[error("explicit matrix is not strictly lower triangular (entry {row},{col} = {value})")]
    ExplicitNotStrictlyLower { row: usize, col: usize, value: f64 },
    #[error("implicit matrix is not lower triangular (entry {row},{col} = {value})")]
    ImplicitNotLower { row: usize, col: usize, value: f64 },
    #[error("non-finite coefficient at {0}")]
    NonFinite(String),
    #[error("scheme is neither type A nor type CK")]
    Unclassifiable,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImexTableau {
    name: String,
    order: u32,
    a_ex: DMatrix<f64>,
    w_ex: DVector<f64>,
    c_ex: DVector<f64>,
    a_im: DMatrix<f64>,
    w_im: DVector<f64>,
    c_im: DVector<f64>,
}

fn to_matrix(rows: &[Vec<f64>], nu: usize, what: &str) -> Result<DMatrix<f64>, TableauError> {
    if rows.len() != nu {
        return Err(TableauError::Dimension(format!(
            "{what} has {} rows, expected {nu}",
            rows.len()
        )));
    }
    let mut m = DMatrix::zeros(nu, nu);
    for (i, row) in rows.iter().enumerate() {
        // short rows are padded with zeros so the lower triangle alone can be given
        if row.len() > nu {
            return Err(TableauError::Dimension(format!(
                "{what} row {i} has {} entries, expected at most {nu}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(TableauError::NonFinite(format!("{what}[{i}][{j}]")));
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn to_vector(w: &[f64], nu: usize, what: &str) -> Result<DVector<f64>, TableauError> {
    if w.len() != nu {
        return Err(TableauError::Dimension(format!(
            "{what} has {} entries, expected {nu}",
            w.len()
        )));
    }
    if let Some(i) = w.iter().position(|v| !v.is_finite()) {
        return Err(TableauError::NonFinite(format!("{what}[{i}]")));
    }
    Ok(DVector::from_column_slice(w))
}

impl ImexTableau {
    /// Build a tableau from row lists.  Rows may omit trailing zeros.
    pub fn new(
        name: impl Into<String>,
        order: u32,
        a_ex: &[Vec<f64>],
        w_ex: &[f64],
        a_im: &[Vec<f64>],
        w_im: &[f64],
    ) -> Result<Self, TableauError> {
        let nu = w_im.len();
        if nu == 0 {
            return Err(TableauError::Dimension("zero stages".into()));
        }
        let a_ex = to_matrix(a_ex, nu, "A~")?;
        let a_im = to_matrix(a_im, nu, "A")?;
        let w_ex = to_vector(w_ex, nu, "w~")?;
        let w_im = to_vector(w_im, nu, "w")?;
        Self::from_parts(name.into(), order, a_ex, w_ex, a_im, w_im)
    }

    pub fn from_parts(
        name: String,
        order: u32,
        a_ex: DMatrix<f64>,
        w_ex: DVector<f64>,
        a_im: DMatrix<f64>,
        w_im: DVector<f64>,
    ) -> Result<Self, TableauError> {
        let nu = w_im.len();
        if a_ex.shape() != (nu, nu) || a_im.shape() != (nu, nu) || w_ex.len() != nu {
            return Err(TableauError::Dimension(format!(
                "A~ {:?}, A {:?}, w~ {}, w {}",
                a_ex.shape(),
                a_im.shape(),
                w_ex.len(),
                nu
            )));
        }
        for i in 0..nu {
            for j in i..nu {
                let v = a_ex[(i, j)];
                if v.abs() > ZERO_TOL {
                    return Err(TableauError::ExplicitNotStrictlyLower { row: i, col: j, value: v });
                }
            }
            for j in i + 1..nu {
                let v = a_im[(i, j)];
                if v.abs() > ZERO_TOL {
                    return Err(TableauError::ImplicitNotLower { row: i, col: j, value: v });
                }
            }
        }
        let c_ex = row_sums(&a_ex);
        let c_im = row_sums(&a_im);
        Ok(Self { name, order, a_ex, w_ex, c_ex, a_im, w_im, c_im })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Declared order of the combined scheme.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn stages(&self) -> usize {
        self.w_im.len()
    }

    pub fn a_ex(&self) -> &DMatrix<f64> {
        &self.a_ex
    }

    pub fn w_ex(&self) -> &DVector<f64> {
        &self.w_ex
    }

    pub fn c_ex(&self) -> &DVector<f64> {
        &self.c_ex
    }

    pub fn a_im(&self) -> &DMatrix<f64> {
        &self.a_im
    }

    pub fn w_im(&self) -> &DVector<f64> {
        &self.w_im
    }

    pub fn c_im(&self) -> &DVector<f64> {
        &self.c_im
    }
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.iter().sum()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// `A` invertible.
    TypeA,
    /// First row of `A` zero, lower block invertible.
    TypeCk,
    /// Type CK with zero first column of `A` as well.
    TypeArs,
}

impl SchemeKind {
    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::TypeA => "A",
            SchemeKind::TypeCk => "CK",
            SchemeKind::TypeArs => "ARS",
        }
    }

    pub fn is_ck(self) -> bool {
        matches!(self, SchemeKind::TypeCk | SchemeKind::TypeArs)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeClass {
    pub kind: SchemeKind,
    /// Implicit part stiffly accurate: last row of `A` equals `w`.
    pub isa: bool,
    /// Both parts stiffly accurate.
    pub gsa: bool,
}

pub fn classify(t: &ImexTableau) -> Result<SchemeClass, TableauError> {
    classify_with_tol(t, ZERO_TOL)
}

pub fn classify_with_tol(t: &ImexTableau, tol: f64) -> Result<SchemeClass, TableauError> {
    let nu = t.stages();
    let a = t.a_im();
    let diag_nonzero = |from: usize| (from..nu).all(|i| a[(i, i)].abs() > tol);
    let kind = if diag_nonzero(0) {
        SchemeKind::TypeA
    } else if nu > 1 && (0..nu).all(|j| a[(0, j)].abs() <= tol) && diag_nonzero(1) {
        if (1..nu).all(|i| a[(i, 0)].abs() <= tol) {
            SchemeKind::TypeArs
        } else {
            SchemeKind::TypeCk
        }
    } else {
        return Err(TableauError::Unclassifiable);
    };
    let last_matches = |m: &DMatrix<f64>, w: &DVector<f64>| {
        (0..nu).all(|j| (m[(nu - 1, j)] - w[j]).abs() <= tol)
    };
    let isa = last_matches(t.a_im(), t.w_im());
    let gsa = isa && last_matches(t.a_ex(), t.w_ex());
    Ok(SchemeClass { kind, isa, gsa })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_vectors_are_row_sums() {
        let t = ars_222(1.0 - 0.5f64.sqrt());
        let g = 1.0 - 0.5f64.sqrt();
        assert!((t.c_ex()[1] - g).abs() < 1e-15);
        assert!((t.c_ex()[2] - 1.0).abs() < 1e-15);
        assert!((t.c_im()[1] - g).abs() < 1e-15);
        assert!((t.c_im()[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_diagonal_explicit_entry() {
        let r = ImexTableau::new(
            "bad",
            1,
            &[vec![0.5]],
            &[1.0],
            &[vec![1.0]],
            &[1.0],
        );
        assert!(matches!(r, Err(TableauError::ExplicitNotStrictlyLower { .. })));
    }

    #[test]
    fn rejects_upper_implicit_entry() {
        let r = ImexTableau::new(
            "bad",
            1,
            &[vec![0.0, 0.0], vec![1.0, 0.0]],
            &[0.5, 0.5],
            &[vec![1.0, 0.1], vec![0.0, 1.0]],
            &[0.5, 0.5],
        );
        assert!(matches!(r, Err(TableauError::ImplicitNotLower { row: 0, col: 1, .. })));
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let r = ImexTableau::new("bad", 1, &[vec![0.0]], &[1.0, 0.0], &[vec![1.0]], &[1.0]);
        assert!(matches!(r, Err(TableauError::Dimension(_))));
    }

    #[test]
    fn classification_of_registry() {
        let reg = Registry::standard();
        let expect = [
            ("ARS(1,1,1)", SchemeKind::TypeArs),
            ("DP-ARS(1,2,1)", SchemeKind::TypeArs),
            ("DP-A(1,2,1)", SchemeKind::TypeA),
            ("ARS(2,2,2)", SchemeKind::TypeArs),
            ("DP-ARS(2,2,2)", SchemeKind::TypeArs),
            ("JF-CK(2,3,2)", SchemeKind::TypeCk),
            ("DP1-A(2,4,2)", SchemeKind::TypeA),
            ("DP2-A1(2,4,2)", SchemeKind::TypeA),
            ("DP2-A2(2,4,2)", SchemeKind::TypeA),
            ("ARS(4,4,3)", SchemeKind::TypeArs),
            ("BPR-CK(3,5,3)", SchemeKind::TypeCk),
        ];
        for (name, kind) in expect {
            let c = classify(reg.get(name).unwrap()).unwrap();
            assert_eq!(c.kind, kind, "{name}");
            assert!(c.isa && c.gsa, "{name} should be GSA");
        }
    }

    #[test]
    fn unclassifiable_singular_block() {
        let t = ImexTableau::new(
            "x",
            1,
            &[vec![0.0, 0.0], vec![1.0, 0.0]],
            &[0.5, 0.5],
            &[vec![0.0, 0.0], vec![1.0, 0.0]],
            &[0.5, 0.5],
        )
        .unwrap();
        assert_eq!(classify(&t), Err(TableauError::Unclassifiable));
    }
}
