use super::ImexTableau;

fn build(
    name: &str,
    order: u32,
    a_ex: &[Vec<f64>],
    w_ex: &[f64],
    a_im: &[Vec<f64>],
    w_im: &[f64],
) -> ImexTableau {
    ImexTableau::new(name, order, a_ex, w_ex, a_im, w_im).expect("registry tableau is well formed")
}

pub fn ars_111() -> ImexTableau {
    build(
        "ARS(1,1,1)",
        1,
        &[vec![0.0, 0.0], vec![1.0, 0.0]],
        &[1.0, 0.0],
        &[vec![0.0, 0.0], vec![0.0, 1.0]],
        &[0.0, 1.0],
    )
}

/// Explicit Euler coupled with a two stage stiffly accurate DIRK.
pub fn dp_ars_121(gamma: f64) -> ImexTableau {
    let delta = gamma / (1.0 - gamma);
    build(
        "DP-ARS(1,2,1)",
        1,
        &[vec![], vec![delta], vec![1.0, 0.0]],
        &[1.0, 0.0, 0.0],
        &[vec![], vec![0.0, gamma], vec![0.0, 1.0 - gamma, gamma]],
        &[0.0, 1.0 - gamma, gamma],
    )
}

pub fn dp_a_121(gamma: f64) -> ImexTableau {
    build(
        "DP-A(1,2,1)",
        1,
        &[vec![], vec![1.0]],
        &[1.0, 0.0],
        &[vec![gamma], vec![1.0 - gamma, gamma]],
        &[1.0 - gamma, gamma],
    )
}

pub fn ars_222(gamma: f64) -> ImexTableau {
    let delta = 1.0 - 1.0 / (2.0 * gamma);
    build(
        "ARS(2,2,2)",
        2,
        &[vec![], vec![gamma], vec![delta, 1.0 - delta]],
        &[delta, 1.0 - delta, 0.0],
        &[vec![], vec![0.0, gamma], vec![0.0, 1.0 - gamma, gamma]],
        &[0.0, 1.0 - gamma, gamma],
    )
}

pub fn jf_ck_232() -> ImexTableau {
    build(
        "JF-CK(2,3,2)",
        2,
        &[vec![], vec![0.5], vec![0.0, 1.0]],
        &[0.0, 1.0, 0.0],
        &[vec![], vec![0.0, 0.5], vec![0.5, 0.0, 0.5]],
        &[0.5, 0.0, 0.5],
    )
}

pub fn dp1_a_242() -> ImexTableau {
    build(
        "DP1-A(2,4,2)",
        2,
        &[vec![], vec![1.0 / 3.0], vec![1.0, 0.0], vec![0.5, 0.0, 0.5]],
        &[0.5, 0.0, 0.5, 0.0],
        &[
            vec![0.5],
            vec![1.0 / 6.0, 0.5],
            vec![-0.5, 0.5, 0.5],
            vec![1.5, -1.5, 0.5, 0.5],
        ],
        &[1.5, -1.5, 0.5, 0.5],
    )
}

/// One parameter family; `gamma = 1/3` and `gamma = 2` are the registry members.
pub fn dp2_a_242(gamma: f64) -> ImexTableau {
    build(
        "DP2-A(2,4,2)",
        2,
        &[vec![], vec![0.0], vec![0.0, 1.0], vec![0.0, 0.5, 0.5]],
        &[0.0, 0.5, 0.5, 0.0],
        &[
            vec![gamma],
            vec![-gamma, gamma],
            vec![0.0, 1.0 - gamma, gamma],
            vec![0.0, 0.5, 0.5 - gamma, gamma],
        ],
        &[0.0, 0.5, 0.5 - gamma, gamma],
    )
}

pub fn ars_443() -> ImexTableau {
    build(
        "ARS(4,4,3)",
        3,
        &[
            vec![],
            vec![0.5],
            vec![11.0 / 18.0, 1.0 / 18.0],
            vec![5.0 / 6.0, -5.0 / 6.0, 0.5],
            vec![0.25, 1.75, 0.75, -1.75],
        ],
        &[0.25, 1.75, 0.75, -1.75, 0.0],
        &[
            vec![],
            vec![0.0, 0.5],
            vec![0.0, 1.0 / 6.0, 0.5],
            vec![0.0, -0.5, 0.5, 0.5],
            vec![0.0, 1.5, -1.5, 0.5, 0.5],
        ],
        &[0.0, 1.5, -1.5, 0.5, 0.5],
    )
}

pub fn bpr_ck_353() -> ImexTableau {
    build(
        "BPR-CK(3,5,3)",
        3,
        &[
            vec![],
            vec![1.0],
            vec![4.0 / 9.0, 2.0 / 9.0],
            vec![0.25, 0.0, 0.75],
            vec![0.25, 0.0, 0.75, 0.0],
        ],
        &[0.25, 0.0, 0.75, 0.0, 0.0],
        &[
            vec![],
            vec![0.5, 0.5],
            vec![5.0 / 18.0, -1.0 / 9.0, 0.5],
            vec![0.5, 0.0, 0.0, 0.5],
            vec![0.25, 0.0, 0.75, -0.5, 0.5],
        ],
        &[0.25, 0.0, 0.75, -0.5, 0.5],
    )
}

/// Named collection of tableaux, kept in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: Vec<ImexTableau>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The eleven schemes of the stability table.
    pub fn standard() -> Self {
        let s = 0.5f64.sqrt();
        let mut r = Self::new();
        r.insert(ars_111());
        r.insert(dp_ars_121(1.0 - s));
        r.insert(dp_a_121(1.0 + s));
        r.insert(ars_222(1.0 - s));
        r.insert(ars_222(1.0 + s).with_name("DP-ARS(2,2,2)"));
        r.insert(jf_ck_232());
        r.insert(dp1_a_242());
        r.insert(dp2_a_242(1.0 / 3.0).with_name("DP2-A1(2,4,2)"));
        r.insert(dp2_a_242(2.0).with_name("DP2-A2(2,4,2)"));
        r.insert(ars_443());
        r.insert(bpr_ck_353());
        r
    }

    /// Adds or replaces an entry by name.
    pub fn insert(&mut self, t: ImexTableau) {
        match self.entries.iter_mut().find(|e| e.name() == t.name()) {
            Some(slot) => *slot = t,
            None => self.entries.push(t),
        }
    }

    /// Lookup tolerant of case and of subscript digits.
    pub fn get(&self, name: &str) -> Option<&ImexTableau> {
        let key = normalize(name);
        self.entries.iter().find(|e| normalize(e.name()) == key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ImexTableau> {
        self.entries.iter()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '\u{2080}'..='\u{2089}' => char::from_digit(c as u32 - 0x2080, 10).unwrap(),
            _ => c.to_ascii_uppercase(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_handles_subscripts() {
        let r = Registry::standard();
        assert_eq!(r.len(), 11);
        assert!(r.get("DP2-A\u{2081}(2,4,2)").is_some());
        assert!(r.get("ars(2,2,2)").is_some());
        assert!(r.get("nonexistent").is_none());
    }

    #[test]
    fn insert_replaces_same_name() {
        let mut r = Registry::standard();
        r.insert(dp2_a_242(0.4).with_name("DP2-A1(2,4,2)"));
        assert_eq!(r.len(), 11);
        let t = r.get("DP2-A1(2,4,2)").unwrap();
        assert_eq!(t.a_im()[(0, 0)], 0.4);
    }
}
