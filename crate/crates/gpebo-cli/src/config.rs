//! Scenario files: a flat, line-oriented `key = value` format.
//!
//! ```text
//! # comment
//! name = paper_example
//! n = 2
//! a.1.1 = "2 - sin(t)"     # expressions of t are quoted, 1-based indices
//! c.1 = "1"
//! l.1 = "2 - sin(t)"
//! f = sin                  # one of sin, cos, tanh, square, identity
//! u = "sin(t)"
//! x0 = -3, -2              # number lists are comma-separated
//! k = -1, 3
//! b = 1, 2
//! m = -4, 4
//! theta0 = 0, 0, ...       # optional, 4n entries, defaults to zeros
//! gamma = 1000
//! beta = 1
//! f0 = 0.1
//! M = 1e12
//! T = 30
//! h = 0.001
//! x_bound = 1e9            # optional trajectory monitor override
//! outputs = csv, plots     # optional, defaults to csv
//! ```
//!
//! Matrix `a` needs all n×n entries `a.<row>.<col>`; vectors `c`, `l` need
//! `c.<i>` / `l.<i>`. Unknown keys are rejected with their line number, and
//! validation reports every violated constraint with its field path.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use gpebo::exprs::parse_expr;
use gpebo::observer::ObserverRun;
use gpebo::plant::{grid_steps, Nonlinearity, SystemDefinition, TrueParameters};
use gpebo::EstimatorConfig;

/// Artifact kinds a scenario asks for by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Csv,
    Plots,
}

/// One violated constraint, addressed by field path.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Errors from loading, parsing or validating a scenario file.
#[derive(Debug)]
pub enum ConfigError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Lexical/structural problem on one line (syntax, unknown or duplicate key).
    Line {
        line: usize,
        message: String,
    },
    Missing {
        key: String,
    },
    /// Semantic violations, all of them.
    Invalid {
        violations: Vec<Violation>,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            ConfigError::Line { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::Missing { key } => write!(f, "missing required key `{key}`"),
            ConfigError::Invalid { violations } => {
                writeln!(f, "invalid scenario ({} problem(s)):", violations.len())?;
                for v in violations {
                    writeln!(f, "  {}: {}", v.path, v.message)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// A parsed scenario: expression fields are kept as text so the file can be
/// regenerated verbatim; [`ScenarioConfig::to_run`] compiles and validates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    /// Row-major n×n expression texts.
    pub a: Vec<String>,
    pub c: Vec<String>,
    pub l: Vec<String>,
    pub f: String,
    pub u: String,
    pub x0: Vec<f64>,
    pub k: Vec<f64>,
    pub b: Vec<f64>,
    pub m: Vec<f64>,
    pub theta0: Option<Vec<f64>>,
    pub gamma: f64,
    pub beta: f64,
    pub f0: f64,
    pub m_cap: f64,
    pub t_end: f64,
    pub step: f64,
    pub x_bound: Option<f64>,
    pub outputs: Vec<OutputKind>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let entries = lex(text)?;
        build(entries)
    }

    /// Canonical serialization; parses back to an equal config.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("name", self.name.clone());
        kv("n", self.n.to_string());
        for i in 0..self.n {
            for j in 0..self.n {
                kv(
                    &format!("a.{}.{}", i + 1, j + 1),
                    format!("{:?}", self.a[i * self.n + j]),
                );
            }
        }
        for (i, e) in self.c.iter().enumerate() {
            kv(&format!("c.{}", i + 1), format!("{e:?}"));
        }
        for (i, e) in self.l.iter().enumerate() {
            kv(&format!("l.{}", i + 1), format!("{e:?}"));
        }
        kv("f", self.f.clone());
        kv("u", format!("{:?}", self.u));
        kv("x0", num_list(&self.x0));
        kv("k", num_list(&self.k));
        kv("b", num_list(&self.b));
        kv("m", num_list(&self.m));
        if let Some(theta0) = &self.theta0 {
            kv("theta0", num_list(theta0));
        }
        kv("gamma", format_num(self.gamma));
        kv("beta", format_num(self.beta));
        kv("f0", format_num(self.f0));
        kv("M", format_num(self.m_cap));
        kv("T", format_num(self.t_end));
        kv("h", format_num(self.step));
        if let Some(xb) = self.x_bound {
            kv("x_bound", format_num(xb));
        }
        kv(
            "outputs",
            self.outputs
                .iter()
                .map(|o| match o {
                    OutputKind::Csv => "csv",
                    OutputKind::Plots => "plots",
                })
                .collect::<Vec<_>>()
                .join(", "),
        );
        out
    }

    /// Compiles the scenario into a runnable observer setup, reporting every
    /// violated constraint at once.
    pub fn to_run(&self) -> Result<ObserverRun, ConfigError> {
        let mut violations = Vec::new();
        let n = self.n;
        if n == 0 {
            violations.push(Violation {
                path: "n".into(),
                message: "must be >= 1".into(),
            });
            return Err(ConfigError::Invalid { violations });
        }

        let mut exprs_of = |field: &str, texts: &[String]| {
            let mut parsed = Vec::with_capacity(texts.len());
            for (idx, text) in texts.iter().enumerate() {
                match parse_expr(text) {
                    Ok(e) => parsed.push(e),
                    Err(err) => {
                        let path = if field == "a" {
                            format!("a.{}.{}", idx / n + 1, idx % n + 1)
                        } else if field == "u" {
                            "u".into()
                        } else {
                            format!("{field}.{}", idx + 1)
                        };
                        violations.push(Violation {
                            path,
                            message: err.to_string(),
                        });
                    }
                }
            }
            parsed
        };
        let a = exprs_of("a", &self.a);
        let c = exprs_of("c", &self.c);
        let l = exprs_of("l", &self.l);
        let u = exprs_of("u", std::slice::from_ref(&self.u));

        let f = match Nonlinearity::from_name(&self.f) {
            Some(f) => f,
            None => {
                violations.push(Violation {
                    path: "f".into(),
                    message: format!(
                        "unknown nonlinearity `{}` (choose sin, cos, tanh, square, identity)",
                        self.f
                    ),
                });
                Nonlinearity::Identity
            }
        };

        for (path, v) in [
            ("x0", &self.x0),
            ("k", &self.k),
            ("b", &self.b),
            ("m", &self.m),
        ] {
            if v.len() != n {
                violations.push(Violation {
                    path: path.into(),
                    message: format!("needs {n} entries, got {}", v.len()),
                });
            }
        }
        if let Some(theta0) = &self.theta0 {
            if theta0.len() != 4 * n {
                violations.push(Violation {
                    path: "theta0".into(),
                    message: format!("needs {} entries, got {}", 4 * n, theta0.len()),
                });
            }
        }
        if !(self.gamma > 0.0) {
            violations.push(Violation {
                path: "gamma".into(),
                message: "must be > 0".into(),
            });
        }
        if !(self.beta >= 0.0) {
            violations.push(Violation {
                path: "beta".into(),
                message: "must be >= 0".into(),
            });
        }
        if !(self.f0 > 0.0) {
            violations.push(Violation {
                path: "f0".into(),
                message: "must be > 0: the initial covariance is F(0) = I / f0".into(),
            });
        }
        if !(self.m_cap > 0.0) {
            violations.push(Violation {
                path: "M".into(),
                message: "must be > 0".into(),
            });
        }
        if grid_steps(self.t_end, self.step).is_none() {
            violations.push(Violation {
                path: "T".into(),
                message: format!(
                    "grid needs 0 < h <= T with T/h integral (T = {}, h = {})",
                    self.t_end, self.step
                ),
            });
        }
        if let Some(xb) = self.x_bound {
            if !(xb > 0.0) {
                violations.push(Violation {
                    path: "x_bound".into(),
                    message: "must be > 0".into(),
                });
            }
        }

        if !violations.is_empty() {
            return Err(ConfigError::Invalid { violations });
        }

        let sys = SystemDefinition::new(n, a, c, l, f, u.into_iter().next().expect("parsed"))
            .map_err(|e| ConfigError::Invalid {
                violations: vec![Violation {
                    path: "system".into(),
                    message: e.to_string(),
                }],
            })?;
        let truth = TrueParameters::new(
            self.k.clone(),
            self.b.clone(),
            self.m.clone(),
            self.x0.clone(),
        );
        let cfg = EstimatorConfig {
            gamma: self.gamma,
            beta: self.beta,
            f0: self.f0,
            norm_cap: self.m_cap,
        };
        let mut run = ObserverRun::new(sys, Some(truth), cfg, self.t_end, self.step);
        if let Some(theta0) = &self.theta0 {
            run.theta_init = theta0.clone();
        }
        if let Some(xb) = self.x_bound {
            run.state_bound = xb;
        }
        run.validate().map_err(|e| ConfigError::Invalid {
            violations: vec![Violation {
                path: "run".into(),
                message: e.to_string(),
            }],
        })?;
        Ok(run)
    }

    pub fn wants(&self, kind: OutputKind) -> bool {
        self.outputs.contains(&kind)
    }
}

fn num_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format_num(*x))
        .collect::<Vec<_>>()
        .join(", ")
}

fn format_num(x: f64) -> String {
    format!("{x}")
}

struct Entry {
    line: usize,
    value: String,
}

/// First pass: comments off, `key = value` per line, duplicates rejected.
fn lex(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut map: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = strip_comment(raw);
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(eq) = trimmed.find('=') else {
            return Err(ConfigError::Line {
                line,
                message: format!("expected `key = value`, got {trimmed:?}"),
            });
        };
        let key = trimmed[..eq].trim();
        let value = trimmed[eq + 1..].trim();
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        {
            return Err(ConfigError::Line {
                line,
                message: format!("bad key {key:?}"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Line {
                line,
                message: format!("key `{key}` has no value"),
            });
        }
        if map.contains_key(key) {
            return Err(ConfigError::Line {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        map.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    Ok(map)
}

/// Drops a trailing `#` comment, respecting double quotes.
fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn build(mut map: BTreeMap<String, Entry>) -> Result<ScenarioConfig, ConfigError> {
    let mut take = |key: &str| map.remove(key);
    let mut required =
        |key: &str| take(key).ok_or_else(|| ConfigError::Missing { key: key.into() });

    let name_entry = required("name")?;
    let name = unquote(&name_entry.value).to_string();

    let n_entry = required("n")?;
    let n: usize = n_entry.value.parse().map_err(|_| ConfigError::Line {
        line: n_entry.line,
        message: format!(
            "key `n` must be a non-negative integer, got {:?}",
            n_entry.value
        ),
    })?;
    if n == 0 {
        return Err(ConfigError::Invalid {
            violations: vec![Violation {
                path: "n".into(),
                message: "must be >= 1".into(),
            }],
        });
    }

    let mut expr_field = |key: String| -> Result<String, ConfigError> {
        let e = map
            .remove(&key)
            .ok_or_else(|| ConfigError::Missing { key: key.clone() })?;
        quoted(&e.value)
            .map(str::to_string)
            .ok_or_else(|| ConfigError::Line {
                line: e.line,
                message: format!("key `{key}` must be a quoted expression, got {:?}", e.value),
            })
    };

    let mut a = Vec::with_capacity(n * n);
    for i in 1..=n {
        for j in 1..=n {
            a.push(expr_field(format!("a.{i}.{j}"))?);
        }
    }
    let mut c = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    for i in 1..=n {
        c.push(expr_field(format!("c.{i}"))?);
    }
    for i in 1..=n {
        l.push(expr_field(format!("l.{i}"))?);
    }
    let u = expr_field("u".to_string())?;

    let f_entry = map
        .remove("f")
        .ok_or_else(|| ConfigError::Missing { key: "f".into() })?;
    let f = unquote(&f_entry.value).to_string();

    let mut num_list_field = |key: &str| -> Result<Vec<f64>, ConfigError> {
        let e = map
            .remove(key)
            .ok_or_else(|| ConfigError::Missing { key: key.into() })?;
        parse_num_list(&e.value).map_err(|message| ConfigError::Line {
            line: e.line,
            message,
        })
    };
    let x0 = num_list_field("x0")?;
    let k = num_list_field("k")?;
    let b = num_list_field("b")?;
    let m = num_list_field("m")?;
    let theta0 = match map.remove("theta0") {
        Some(e) => Some(
            parse_num_list(&e.value).map_err(|message| ConfigError::Line {
                line: e.line,
                message,
            })?,
        ),
        None => None,
    };

    let mut num_field = |key: &str| -> Result<f64, ConfigError> {
        let e = map
            .remove(key)
            .ok_or_else(|| ConfigError::Missing { key: key.into() })?;
        e.value.parse().map_err(|_| ConfigError::Line {
            line: e.line,
            message: format!("key `{key}` must be a number, got {:?}", e.value),
        })
    };
    let gamma = num_field("gamma")?;
    let beta = num_field("beta")?;
    let f0 = num_field("f0")?;
    let m_cap = num_field("M")?;
    let t_end = num_field("T")?;
    let step = num_field("h")?;
    let x_bound = match map.remove("x_bound") {
        Some(e) => Some(e.value.parse().map_err(|_| ConfigError::Line {
            line: e.line,
            message: format!("key `x_bound` must be a number, got {:?}", e.value),
        })?),
        None => None,
    };

    let outputs = match map.remove("outputs") {
        None => vec![OutputKind::Csv],
        Some(e) => {
            let mut kinds = Vec::new();
            for part in e.value.split(',') {
                match part.trim() {
                    "csv" => kinds.push(OutputKind::Csv),
                    "plots" => kinds.push(OutputKind::Plots),
                    other => {
                        return Err(ConfigError::Line {
                            line: e.line,
                            message: format!("unknown output kind {other:?} (csv, plots)"),
                        })
                    }
                }
            }
            kinds
        }
    };

    if let Some((key, entry)) = map.into_iter().next() {
        return Err(ConfigError::Line {
            line: entry.line,
            message: format!("unknown key `{key}`"),
        });
    }

    Ok(ScenarioConfig {
        name,
        n,
        a,
        c,
        l,
        f,
        u,
        x0,
        k,
        b,
        m,
        theta0,
        gamma,
        beta,
        f0,
        m_cap,
        t_end,
        step,
        x_bound,
        outputs,
    })
}

fn quoted(value: &str) -> Option<&str> {
    let v = value.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        Some(&v[1..v.len() - 1])
    } else {
        None
    }
}

fn unquote(value: &str) -> &str {
    quoted(value).unwrap_or(value.trim())
}

fn parse_num_list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|part| {
            let p = part.trim();
            p.parse::<f64>()
                .map_err(|_| format!("expected a number, got {p:?}"))
        })
        .collect()
}
