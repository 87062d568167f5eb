//! Plain text tableau files.
//!
//! ```text
//! # comment
//! NAME NU ORDER
//! <NU rows of A~>
//! <w~>
//! <NU rows of A>
//! <w>
//! ```
//!
//! Entries are whitespace separated arithmetic expressions such as
//! `1-sqrt(2)/2`.  Rows may be shortened to their lower triangle.

use super::{ImexTableau, TableauError};
use std::fmt::Write as _;

fn perr(line: usize, msg: impl Into<String>) -> TableauError {
    TableauError::Parse { line, msg: msg.into() }
}

fn parse_row(line: usize, text: &str) -> Result<Vec<f64>, TableauError> {
    text.split_whitespace()
        .map(|tok| {
            meval::eval_str(tok).map_err(|e| perr(line, format!("bad entry `{tok}`: {e}")))
        })
        .collect()
}

pub fn parse_tableau(src: &str) -> Result<ImexTableau, TableauError> {
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| perr(0, "empty tableau file"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(perr(hline, "header must be `NAME NU ORDER`"));
    }
    let nu: usize = head[1].parse().map_err(|_| perr(hline, "stage count is not an integer"))?;
    let order: u32 = head[2].parse().map_err(|_| perr(hline, "order is not an integer"))?;
    if nu == 0 {
        return Err(perr(hline, "stage count must be positive"));
    }

    let mut next_row = |what: &str| -> Result<Vec<f64>, TableauError> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| perr(0, format!("unexpected end of file while reading {what}")))?;
        parse_row(n, l)
    };
    let a_ex = (0..nu).map(|_| next_row("A~")).collect::<Result<Vec<_>, _>>()?;
    let w_ex = next_row("w~")?;
    let a_im = (0..nu).map(|_| next_row("A")).collect::<Result<Vec<_>, _>>()?;
    let w_im = next_row("w")?;
    if let Some((n, _)) = lines.next() {
        return Err(perr(n, "trailing content after w"));
    }
    ImexTableau::new(head[0], order, &a_ex, &w_ex, &a_im, &w_im)
}

/// Writes full rows with round-trip precision.
pub fn write_tableau(t: &ImexTableau) -> String {
    let mut s = String::new();
    let nu = t.stages();
    let name: String = t.name().chars().filter(|c| !c.is_whitespace()).collect();
    let _ = writeln!(s, "{name} {nu} {}", t.order());
    let mut row = |vals: &mut dyn Iterator<Item = f64>| {
        let parts: Vec<String> = vals.map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", parts.join(" "));
    };
    for i in 0..nu {
        row(&mut t.a_ex().row(i).iter().copied());
    }
    row(&mut t.w_ex().iter().copied());
    for i in 0..nu {
        row(&mut t.a_im().row(i).iter().copied());
    }
    row(&mut t.w_im().iter().copied());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::Registry;

    #[test]
    fn parses_expressions() {
        let src = "# two stage\nARS222 3 2\n0\n1-sqrt(2)/2\n1-1/(2*(1-sqrt(2)/2)) 1/(2*(1-sqrt(2)/2)) 0\n\
                   1-1/(2*(1-sqrt(2)/2)) 1/(2*(1-sqrt(2)/2)) 0\n0\n0 1-sqrt(2)/2\n0 sqrt(2)/2 1-sqrt(2)/2\n0 sqrt(2)/2 1-sqrt(2)/2\n";
        let t = parse_tableau(src).unwrap();
        let r = Registry::standard();
        let reference = r.get("ARS(2,2,2)").unwrap();
        assert!((t.a_im() - reference.a_im()).amax() < 1e-15);
        assert!((t.w_ex() - reference.w_ex()).amax() < 1e-15);
        assert_eq!(t.order(), 2);
    }

    #[test]
    fn roundtrip_registry() {
        for t in Registry::standard().iter() {
            let back = parse_tableau(&write_tableau(t)).unwrap();
            assert_eq!(back.a_ex(), t.a_ex());
            assert_eq!(back.a_im(), t.a_im());
            assert_eq!(back.w_ex(), t.w_ex());
            assert_eq!(back.w_im(), t.w_im());
        }
    }

    #[test]
    fn reports_bad_token_line() {
        let src = "X 1 1\n0\n1\nfoo(\n1\n";
        match parse_tableau(src) {
            Err(TableauError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_file() {
        assert!(matches!(parse_tableau("X 2 1\n0\n"), Err(TableauError::Parse { .. })));
    }
}
