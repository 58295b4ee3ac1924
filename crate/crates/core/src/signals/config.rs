//! Line-based problem files.
//!
//! ```text
//! # comment
//! [problem]
//! ic_type = gaussian_sum          # wkb | gaussian_sum | problem1..4 | tanh_chirp
//! terms   = 3j,1,-2,-4; 2j,1,-1,-1
//! V       = 0
//! epsilon = 1/16
//! t_max   = 0.1
//! [grid]
//! x_min = -6
//! x_max = 6
//! [smoothing]
//! sigma_x = 1
//! sigma_k = 1
//! [run]
//! eta = 1e-3
//! ```
//!
//! Each Gaussian term is `alpha,beta,gamma[,delta]` meaning
//! `exp(−(alpha/ε + delta)·x² + beta·x + gamma)`; the optional `delta` holds
//! the ε-independent part of the quadratic coefficient. Numeric values accept
//! constant expressions (`1/16`, `2*pi`). Unknown keys, keys in the wrong
//! section, and duplicate keys are errors.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;

use super::{
    builtin_problem, default_t_max, parse_expression, GaussianTerm, InitialCondition, Potential, ProblemSpec,
    BUILTIN_IDS,
};
use crate::error::{Error, Result};

const SECTIONS: [(&str, &[&str]); 4] = [
    ("problem", &["ic_type", "A", "S", "terms", "V", "epsilon", "t_max"]),
    ("grid", &["x_min", "x_max", "k_max", "n_x", "n_k"]),
    ("smoothing", &["sigma_x", "sigma_k"]),
    ("run", &["eta", "h"]),
];

/// Recipe part of a config, independent of ε.
#[derive(Debug, Clone, PartialEq)]
pub enum Recipe {
    Builtin(String),
    Custom { initial_condition: InitialCondition, potential: Potential },
}

/// A parsed problem file: a family of problems over ε plus run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub recipe: Recipe,
    pub epsilon: Option<f64>,
    pub t_max: Option<f64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub k_max: Option<f64>,
    pub n_x: Option<usize>,
    pub n_k: Option<usize>,
    pub sigma_x: Option<f64>,
    pub sigma_k: Option<f64>,
    pub eta: Option<f64>,
    pub h: Option<f64>,
}

impl ProblemConfig {
    /// Config for a built-in problem with every override unset.
    pub fn builtin(id: &str) -> Result<Self> {
        if !BUILTIN_IDS.contains(&id) {
            return Err(Error::UnknownProblem(id.to_string()));
        }
        Ok(Self {
            recipe: Recipe::Builtin(id.to_string()),
            epsilon: None,
            t_max: None,
            x_min: None,
            x_max: None,
            k_max: None,
            n_x: None,
            n_k: None,
            sigma_x: None,
            sigma_k: None,
            eta: None,
            h: None,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<&'static str, (usize, String)> = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config { line: line_no, message: "unterminated section header".into() })?
                    .trim();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::Config { line: line_no, message: format!("unknown section [{name}]") });
                }
                section = SECTIONS.iter().find(|(s, _)| *s == name).map(|(s, _)| *s);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { line: line_no, message: "expected `key = value`".into() })?;
            let (key, value) = (key.trim(), value.trim());
            let Some(current) = section else {
                return Err(Error::Config { line: line_no, message: format!("key `{key}` outside of any section") });
            };
            let Some(home) = SECTIONS.iter().find(|(_, keys)| keys.contains(&key)) else {
                return Err(Error::Config { line: line_no, message: format!("unknown key `{key}`") });
            };
            if home.0 != current {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("key `{key}` belongs in [{}], found in [{current}]", home.0),
                });
            }
            let static_key = home.1.iter().find(|k| **k == key).copied().unwrap_or("");
            if entries.insert(static_key, (line_no, value.to_string())).is_some() {
                return Err(Error::Config { line: line_no, message: format!("duplicate key `{key}`") });
            }
        }

        let real =
            |key: &str| -> Result<Option<f64>> { entries.get(key).map(|(line, v)| parse_real(v, *line)).transpose() };
        let count = |key: &str| -> Result<Option<usize>> {
            entries
                .get(key)
                .map(|(line, v)| {
                    v.parse::<usize>().map_err(|_| Error::Config {
                        line: *line,
                        message: format!("`{key}` must be a positive integer"),
                    })
                })
                .transpose()
        };
        let ic_type = entries
            .get("ic_type")
            .ok_or_else(|| Error::Config { line: 0, message: "missing `ic_type` in [problem]".into() })?;
        let forbid = |keys: &[&str]| -> Result<()> {
            for k in keys {
                if let Some((line, _)) = entries.get(k) {
                    return Err(Error::Config {
                        line: *line,
                        message: format!("`{k}` does not apply to ic_type = {}", ic_type.1),
                    });
                }
            }
            Ok(())
        };
        let potential = || -> Result<Potential> {
            match entries.get("V") {
                Some((line, v)) => parse_expression(v)
                    .map(Potential::from_expr)
                    .map_err(|e| Error::Config { line: *line, message: format!("V: {e}") }),
                None => Ok(Potential::Zero),
            }
        };
        let expr = |key: &str| -> Result<super::FunctionExpr> {
            let (line, v) = entries
                .get(key)
                .ok_or_else(|| Error::Config { line: ic_type.0, message: format!("wkb recipe needs `{key}`") })?;
            parse_expression(v).map_err(|e| Error::Config { line: *line, message: format!("{key}: {e}") })
        };

        let recipe = match ic_type.1.as_str() {
            "wkb" => {
                forbid(&["terms"])?;
                Recipe::Custom {
                    initial_condition: InitialCondition::Wkb { amplitude: expr("A")?, phase: expr("S")? },
                    potential: potential()?,
                }
            }
            "gaussian_sum" => {
                forbid(&["A", "S"])?;
                let (line, v) = entries.get("terms").ok_or_else(|| Error::Config {
                    line: ic_type.0,
                    message: "gaussian_sum recipe needs `terms`".into(),
                })?;
                Recipe::Custom {
                    initial_condition: InitialCondition::GaussianSum(parse_terms(v, *line)?),
                    potential: potential()?,
                }
            }
            id if BUILTIN_IDS.contains(&id) => {
                forbid(&["A", "S", "terms", "V"])?;
                Recipe::Builtin(id.to_string())
            }
            other => {
                return Err(Error::Config {
                    line: ic_type.0,
                    message: format!("unknown ic_type `{other}` (wkb, gaussian_sum, or a built-in id)"),
                })
            }
        };

        let cfg = Self {
            recipe,
            epsilon: real("epsilon")?,
            t_max: real("t_max")?,
            x_min: real("x_min")?,
            x_max: real("x_max")?,
            k_max: real("k_max")?,
            n_x: count("n_x")?,
            n_k: count("n_k")?,
            sigma_x: real("sigma_x")?,
            sigma_k: real("sigma_k")?,
            eta: real("eta")?,
            h: real("h")?,
        };
        if let Recipe::Custom { .. } = cfg.recipe {
            if cfg.x_min.is_none() || cfg.x_max.is_none() {
                return Err(Error::Config { line: 0, message: "custom recipes need x_min and x_max in [grid]".into() });
            }
        }
        Ok(cfg)
    }

    /// Instantiate the problem at `epsilon` (or the file's own ε).
    pub fn spec(&self, epsilon: Option<f64>) -> Result<ProblemSpec> {
        let epsilon = epsilon.or(self.epsilon).ok_or_else(|| {
            Error::InvalidArgument("no epsilon given (set `epsilon` in [problem] or pass one)".into())
        })?;
        let mut spec = match &self.recipe {
            Recipe::Builtin(id) => builtin_problem(id, epsilon)?,
            Recipe::Custom { initial_condition, potential } => ProblemSpec::new(
                "custom",
                initial_condition.clone(),
                potential.clone(),
                epsilon,
                self.t_max.unwrap_or(default_t_max("custom")),
                (self.x_min.unwrap_or(-6.0), self.x_max.unwrap_or(6.0)),
            )?,
        };
        let mut rebuild = false;
        if let Some(t) = self.t_max {
            rebuild |= spec.t_max != t;
            spec.t_max = t;
        }
        if let Some(a) = self.x_min {
            rebuild |= spec.x_min != a;
            spec.x_min = a;
        }
        if let Some(b) = self.x_max {
            rebuild |= spec.x_max != b;
            spec.x_max = b;
        }
        if rebuild {
            spec = ProblemSpec::new(
                spec.name.clone(),
                spec.initial_condition,
                spec.potential,
                spec.epsilon,
                spec.t_max,
                (spec.x_min, spec.x_max),
            )?;
        }
        if let Some(k) = self.k_max {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidArgument(format!("k_max must be positive, got {k}")));
            }
            spec.k_max = k;
        }
        Ok(spec)
    }
}

fn parse_real(value: &str, line: usize) -> Result<f64> {
    let e = parse_expression(value).map_err(|e| Error::Config { line, message: format!("`{value}`: {e}") })?;
    if !e.is_constant() {
        return Err(Error::Config { line, message: format!("`{value}` must be a constant") });
    }
    e.eval(0.0).map_err(|e| Error::Config { line, message: format!("`{value}`: {e}") })
}

/// Parse a complex literal such as `1+3j`, `-0.5j`, `2`, `1e-3-2e-2j`.
pub fn parse_complex(text: &str) -> Option<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('j').or_else(|| s.strip_suffix('i')) else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    // Split at the last sign that is not a leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().ok()?,
    };
    Some(Complex64::new(re.parse::<f64>().ok()?, im))
}

fn parse_terms(text: &str, line: usize) -> Result<Vec<GaussianTerm>> {
    let mut terms = Vec::new();
    for (n, chunk) in text.split(';').enumerate() {
        if chunk.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = chunk.split(',').collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(Error::Config {
                line,
                message: format!("term {}: expected alpha,beta,gamma[,delta], got `{}`", n + 1, chunk.trim()),
            });
        }
        let mut vals = [Complex64::new(0.0, 0.0); 4];
        for (slot, part) in vals.iter_mut().zip(&parts) {
            *slot = parse_complex(part).ok_or_else(|| Error::Config {
                line,
                message: format!("term {}: bad complex literal `{}`", n + 1, part.trim()),
            })?;
        }
        let term = GaussianTerm::new(vals[0], vals[3], vals[1], vals[2]);
        if term.alpha.re < 0.0 || (term.alpha.re == 0.0 && term.delta.re <= 0.0) || term.delta.re < 0.0 {
            return Err(Error::Config {
                line,
                message: format!("term {}: Gaussian does not decay (Re a <= 0)", n + 1),
            });
        }
        terms.push(term);
    }
    if terms.is_empty() {
        return Err(Error::Config { line, message: "`terms` is empty".into() });
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        let c = |re, im| Some(Complex64::new(re, im));
        assert_eq!(parse_complex("1+3j"), c(1.0, 3.0));
        assert_eq!(parse_complex("-0.5j"), c(0.0, -0.5));
        assert_eq!(parse_complex("2"), c(2.0, 0.0));
        assert_eq!(parse_complex("j"), c(0.0, 1.0));
        assert_eq!(parse_complex("0.9-8j"), c(0.9, -8.0));
        assert_eq!(parse_complex("1e-3-2e-2j"), c(1e-3, -2e-2));
        assert_eq!(parse_complex("-1e+2+1e-1j"), c(-100.0, 0.1));
        assert_eq!(parse_complex("abc"), None);
    }

    #[test]
    fn problem4_file_matches_builtin() {
        let text = "\
[problem]
ic_type = gaussian_sum
terms = 3j,-2,-4,1; 2j,-1,-1,1; 1j,-2/3,-4/9,1
V = 0
epsilon = 1/16
t_max = 0.1
[grid]
x_min = -6
x_max = 6
";
        // -2/3 is not a complex literal; the file must use decimals.
        assert!(ProblemConfig::parse(text).is_err());
        let text = text.replace("-2/3,-4/9", "-0.6666666666666666,-0.4444444444444444");
        let cfg = ProblemConfig::parse(&text).unwrap();
        let spec = cfg.spec(None).unwrap();
        let builtin = builtin_problem("problem4", 1.0 / 16.0).unwrap();
        for x in [-1.3, 0.0, 0.4, 2.2] {
            let a = spec.initial_value(x).unwrap();
            let b = builtin.initial_value(x).unwrap();
            assert!((a - b).norm() <= 1e-15 * (1.0 + b.norm()));
        }
        assert_eq!(spec.potential, Potential::Zero);
        assert_eq!(spec.k_max, builtin.k_max);
    }

    #[test]
    fn builtin_ic_type_and_overrides() {
        let cfg = ProblemConfig::parse(
            "[problem]\nic_type = problem3\nepsilon = 1/64\n[grid]\nk_max = 3\n[run]\neta = 1e-4\n",
        )
        .unwrap();
        let spec = cfg.spec(None).unwrap();
        assert_eq!(spec.epsilon, 1.0 / 64.0);
        assert_eq!(spec.k_max, 3.0);
        assert_eq!(cfg.eta, Some(1e-4));
        let spec = cfg.spec(Some(0.125)).unwrap();
        assert_eq!(spec.epsilon, 0.125);
    }

    #[test]
    fn rejects_bad_files() {
        let err = |t: &str| ProblemConfig::parse(t).unwrap_err().to_string();
        assert!(err("[problem]\nic_type = problem1\nfoo = 1\n").contains("unknown key"));
        assert!(err("[grid]\nic_type = problem1\n").contains("belongs in [problem]"));
        assert!(err("[problem]\nic_type = problem1\nic_type = problem2\n").contains("duplicate"));
        assert!(err("[nope]\n").contains("unknown section"));
        assert!(err("ic_type = problem1\n").contains("outside"));
        assert!(err("[problem]\nic_type = wkb\nA = 1\n").contains("needs `S`"));
        assert!(err("[problem]\nic_type = problem1\nV = x\n").contains("does not apply"));
        assert!(err("[problem]\nic_type = wkb\nA = 1\nS = x\n").contains("x_min"));
        assert!(err("[problem]\nic_type = problem1\nepsilon = x\n").contains("constant"));
    }

    #[test]
    fn wkb_file() {
        let text = "[problem]\nic_type = wkb\nA = exp(-x^2)\nS = x^2/2\nV = x^2/2\nepsilon = 0.1\nt_max = 0.5\n[grid]\nx_min = -5\nx_max = 5\nn_x = 512\n[smoothing]\nsigma_x = 2\nsigma_k = 0.5\n";
        let cfg = ProblemConfig::parse(text).unwrap();
        assert_eq!(cfg.n_x, Some(512));
        assert_eq!(cfg.sigma_x, Some(2.0));
        let spec = cfg.spec(None).unwrap();
        assert!(matches!(spec.potential, Potential::Expr { .. }));
        assert_eq!(spec.potential.derivative(1.5), 1.5);
        assert_eq!(spec.t_max, 0.5);
    }
}
