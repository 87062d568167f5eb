//! Run configuration: flat `key = value` files merged with command line flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Simulate,
    Converge,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Converge => "converge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Bgk,
    Boltzmann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    Equilibrium,
    NonEquilibrium,
}

/// Reference solution of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// Each grid against the next finer one.
    Successive,
    /// Every grid against the finest one.
    Finest,
}

macro_rules! string_enum {
    ($t:ty { $($v:path => $s:literal $(| $alt:literal)*),+ $(,)? }) => {
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($s $(| $alt)* => Ok($v),)+
                    other => Err(format!("unexpected `{other}`")),
                }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($v => $s,)+ })
            }
        }
    };
}

string_enum!(Operator { Operator::Bgk => "bgk", Operator::Boltzmann => "boltzmann" });
string_enum!(InitialData {
    InitialData::Equilibrium => "eq" | "equilibrium",
    InitialData::NonEquilibrium => "noneq" | "non_equilibrium" | "nonequilibrium",
});
string_enum!(Reference { Reference::Successive => "successive", Reference::Finest => "finest" });

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schemes: Vec<String>,
    pub eps: f64,
    pub nx: Vec<usize>,
    pub nv: usize,
    pub vmax: f64,
    pub t_final: f64,
    pub cfl: f64,
    pub operator: Operator,
    pub penalized: bool,
    pub init: InitialData,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// BGK relaxation rate.
    pub mu: f64,
    /// Boltzmann kernel constant.
    pub sigma: f64,
    pub reference: Reference,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schemes: vec!["all".into()],
            eps: 1e-6,
            nx: vec![32, 64, 128, 256],
            nv: 16,
            vmax: 8.0,
            t_final: 0.05,
            cfl: 0.5,
            operator: Operator::Bgk,
            penalized: false,
            init: InitialData::Equilibrium,
            out: None,
            seed: 0,
            mu: 1.0,
            sigma: apkin_core::collision::DEFAULT_SIGMA,
            reference: Reference::Successive,
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), msg: e.to_string() })
}

fn positive(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = value(key, v)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::Value { key: key.into(), msg: format!("must be positive, got {x}") })
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(ConfigError::Value { key: key.into(), msg: format!("not a boolean: `{other}`") }),
    }
}

/// Splits a list on `;`, or on `,` when no `;` is present and the value has no parentheses.
fn split_names(v: &str) -> Vec<String> {
    let sep = if v.contains(';') || v.contains('(') { ';' } else { ',' };
    v.split(sep).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key.trim() {
            "scheme" | "schemes" => {
                let names = split_names(v);
                if names.is_empty() {
                    return Err(ConfigError::Value { key: key.into(), msg: "empty scheme list".into() });
                }
                self.schemes = names;
            }
            "eps" => self.eps = positive(key, v)?,
            "nx" => {
                let list = v.split(',').map(|s| value::<usize>(key, s)).collect::<Result<Vec<_>, _>>()?;
                if list.is_empty() || list.contains(&0) {
                    return Err(ConfigError::Value { key: key.into(), msg: "cell counts must be positive".into() });
                }
                self.nx = list;
            }
            "nv" => {
                let n: usize = value(key, v)?;
                if n < 2 || n % 2 != 0 {
                    return Err(ConfigError::Value { key: key.into(), msg: "must be even and >= 2".into() });
                }
                self.nv = n;
            }
            "vmax" => self.vmax = positive(key, v)?,
            "tfinal" | "t_final" => self.t_final = positive(key, v)?,
            "cfl" => self.cfl = positive(key, v)?,
            "operator" => self.operator = value(key, v)?,
            "penalized" => self.penalized = parse_bool(key, v)?,
            "init" | "initial_data" => self.init = value(key, v)?,
            "out" => self.out = Some(PathBuf::from(v.trim())),
            "seed" => self.seed = value(key, v)?,
            "mu" => self.mu = positive(key, v)?,
            "sigma" => self.sigma = positive(key, v)?,
            "reference" => self.reference = value(key, v)?,
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Parses a configuration file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k, v).map_err(|e| match e {
                ConfigError::UnknownKey(_) | ConfigError::Value { .. } => ConfigError::Syntax { line: i + 1, msg: e.to_string() },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Inverse of [`RunConfig::parse`].
    pub fn serialize(&self) -> String {
        let nx: Vec<String> = self.nx.iter().map(|n| n.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("scheme", self.schemes.join(";"));
        kv("eps", format!("{:?}", self.eps));
        kv("nx", nx.join(","));
        kv("nv", self.nv.to_string());
        kv("vmax", format!("{:?}", self.vmax));
        kv("tfinal", format!("{:?}", self.t_final));
        kv("cfl", format!("{:?}", self.cfl));
        kv("operator", self.operator.to_string());
        kv("penalized", self.penalized.to_string());
        kv("init", self.init.to_string());
        if let Some(p) = &self.out {
            kv("out", p.display().to_string());
        }
        kv("seed", self.seed.to_string());
        kv("mu", format!("{:?}", self.mu));
        kv("sigma", format!("{:?}", self.sigma));
        kv("reference", self.reference.to_string());
        s
    }

    /// Penalized stepping is used for the Boltzmann operator or on request.
    pub fn uses_penalization(&self) -> bool {
        self.penalized || self.operator == Operator::Boltzmann
    }
}
