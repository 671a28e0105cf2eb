//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` are comments. `include = path` pulls in another
//! file (relative to the including file); later assignments win, and
//! command-line values override every file.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Text,
    /// Comma-separated integers.
    IntList,
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    /// `None` marks a required key; `Some("")` an optional one without default.
    pub default: Option<&'static str>,
}

pub const fn key(name: &'static str, kind: Kind, default: Option<&'static str>) -> Key {
    Key { name, kind, default }
}

/// Every problem found while resolving a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct Config {
    command: String,
    values: BTreeMap<String, String>,
    schema: Vec<Key>,
}

fn read_file(
    path: &Path,
    allowed: &HashSet<&str>,
    out: &mut Vec<(String, String, String)>,
    stack: &mut Vec<PathBuf>,
    errors: &mut Vec<String>,
) {
    let canon = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    if stack.contains(&canon) {
        errors.push(format!("{}: include cycle", path.display()));
        return;
    }
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            errors.push(format!("{}: {e}", path.display()));
            return;
        }
    };
    stack.push(canon);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = format!("{}:{}", path.display(), i + 1);
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("{at}: expected `key = value`"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k == "include" {
            let inc = path.parent().unwrap_or(Path::new(".")).join(v);
            read_file(&inc, allowed, out, stack, errors);
        } else if !allowed.contains(k) {
            errors.push(format!("{at}: unknown key '{k}'"));
        } else {
            out.push((k.to_string(), v.to_string(), at));
        }
    }
    stack.pop();
}

fn check(kind: Kind, v: &str) -> Result<(), String> {
    let bad = |what: &str| Err(format!("expected {what}, found '{v}'"));
    match kind {
        Kind::Int => v.parse::<u64>().map(|_| ()).or_else(|_| bad("a non-negative integer")),
        Kind::Float => match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(()),
            _ => bad("a number"),
        },
        Kind::Bool => match v {
            "true" | "false" | "1" | "0" => Ok(()),
            _ => bad("true or false"),
        },
        Kind::Text => Ok(()),
        Kind::IntList => {
            if !v.is_empty() && v.split(',').all(|x| x.trim().parse::<u64>().is_ok()) {
                Ok(())
            } else {
                bad("comma-separated integers")
            }
        }
        Kind::Choice(opts) => {
            if opts.contains(&v) {
                Ok(())
            } else {
                Err(format!("expected one of {}, found '{v}'", opts.join(", ")))
            }
        }
    }
}

impl Config {
    /// Defaults, then `file` (with includes), then `overrides`. All errors
    /// are collected before returning.
    pub fn resolve(
        command: &str,
        schema: &[Key],
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Config, ConfigError> {
        let allowed: HashSet<&str> = schema.iter().map(|k| k.name).collect();
        let mut errors = Vec::new();
        let mut assigned = Vec::new();
        if let Some(f) = file {
            read_file(f, &allowed, &mut assigned, &mut Vec::new(), &mut errors);
        }
        for (k, v) in overrides {
            if allowed.contains(k.as_str()) {
                assigned.push((k.clone(), v.clone(), "command line".into()));
            } else {
                errors.push(format!("command line: unknown key '{k}'"));
            }
        }
        let mut values = BTreeMap::new();
        let mut origin = BTreeMap::new();
        for k in schema {
            if let Some(d) = k.default {
                if !d.is_empty() {
                    values.insert(k.name.to_string(), d.to_string());
                }
            }
        }
        for (k, v, at) in assigned {
            origin.insert(k.clone(), at);
            values.insert(k, v);
        }
        for k in schema {
            match values.get(k.name) {
                Some(v) => {
                    if let Err(e) = check(k.kind, v) {
                        let at = origin.get(k.name).map_or("default".to_string(), |s| s.clone());
                        errors.push(format!("{at}: {}: {e}", k.name));
                    }
                }
                None if k.default.is_none() => errors.push(format!("missing required key '{}'", k.name)),
                None => {}
            }
        }
        if errors.is_empty() {
            Ok(Config {
                command: command.to_string(),
                values,
                schema: schema.to_vec(),
            })
        } else {
            Err(ConfigError(errors))
        }
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        debug_assert!(self.schema.iter().any(|k| k.name == name), "undeclared key {name}");
        self.values.get(name).map(|s| s.as_str())
    }

    pub fn text(&self, name: &str) -> &str {
        self.get(name).unwrap_or_else(|| panic!("key '{name}' has no value"))
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.get(name).map(PathBuf::from)
    }

    pub fn int(&self, name: &str) -> usize {
        self.text(name).parse().expect("validated")
    }

    pub fn opt_int(&self, name: &str) -> Option<usize> {
        self.get(name).map(|v| v.parse().expect("validated"))
    }

    pub fn u64(&self, name: &str) -> u64 {
        self.text(name).parse().expect("validated")
    }

    pub fn float(&self, name: &str) -> f64 {
        self.text(name).parse().expect("validated")
    }

    pub fn flag(&self, name: &str) -> bool {
        matches!(self.get(name), Some("true" | "1"))
    }

    pub fn int_list(&self, name: &str) -> Vec<usize> {
        self.text(name).split(',').map(|x| x.trim().parse().expect("validated")).collect()
    }

    pub fn list(&self, name: &str) -> Vec<String> {
        self.get(name)
            .map(|v| v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
            .unwrap_or_default()
    }

    /// The resolved configuration as an includable file.
    pub fn render(&self) -> String {
        let mut s = format!("# rnng {} {}\n", env!("CARGO_PKG_VERSION"), self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &[Key] = &[
        key("k", Kind::Int, Some("100")),
        key("name", Kind::Text, None),
        key("mode", Kind::Choice(&["a", "b"]), Some("a")),
        key("rate", Kind::Float, Some("")),
    ];

    #[test]
    fn precedence_and_includes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.cfg"), "k = 5\nname = base\n").unwrap();
        std::fs::write(dir.path().join("run.cfg"), "# run\ninclude = base.cfg\nname = run\n").unwrap();
        let c = Config::resolve(
            "x",
            SCHEMA,
            Some(&dir.path().join("run.cfg")),
            &[("mode".into(), "b".into())],
        )
        .unwrap();
        assert_eq!((c.int("k"), c.text("name"), c.text("mode")), (5, "run", "b"));
        assert_eq!(c.get("rate"), None);
        let again = dir.path().join("again.cfg");
        std::fs::write(&again, c.render()).unwrap();
        let d = Config::resolve("x", SCHEMA, Some(&again), &[]).unwrap();
        assert_eq!(d.render(), c.render());
    }

    #[test]
    fn every_error_is_listed() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("bad.cfg");
        std::fs::write(&f, "k = -3\nbogus = 1\nmode = c\nnonsense\n").unwrap();
        let err = Config::resolve("x", SCHEMA, Some(&f), &[("zzz".into(), "1".into())]).unwrap_err();
        let text = err.to_string();
        for needle in ["bogus", "key = value", "zzz", "'name'", "k: expected", "mode: expected"] {
            assert!(text.contains(needle), "{needle} missing from {text}");
        }
        assert_eq!(err.0.len(), 6, "{text}");
    }

    #[test]
    fn include_cycles_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.cfg"), "include = b.cfg\n").unwrap();
        std::fs::write(dir.path().join("b.cfg"), "include = a.cfg\nname = x\n").unwrap();
        let err = Config::resolve("x", SCHEMA, Some(&dir.path().join("a.cfg")), &[]).unwrap_err();
        assert!(err.to_string().contains("cycle"));
    }
}
