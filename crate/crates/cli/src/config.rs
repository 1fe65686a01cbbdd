//! Settings for one run: defaults, then a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use growthmech_core::expr::{Chart, ExprField};
use growthmech_core::field::{SharedField, TabulatedRadial};
use growthmech_core::GrowthError;
use nalgebra::DMatrix;

use crate::CliError;

/// A setting a subcommand understands.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    /// `None` means the key must be given.
    pub default: Option<&'static str>,
    pub help: &'static str,
    /// Number of values the flag takes; values are joined with spaces.
    pub arity: usize,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default: Some(default), help, arity: 1 }
}

pub const fn required(name: &'static str, help: &'static str, arity: usize) -> Key {
    Key { name, default: None, help, arity }
}

/// Keys every subcommand accepts.
pub const COMMON: &[Key] = &[key("out", ".", "output directory")];

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str, keys: &[Key]) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected 'key = value', got '{line}'", i + 1)));
        };
        let k = k.trim();
        if !keys.iter().any(|key| key.name == k) {
            return Err(CliError::Usage(format!("config line {}: unknown key '{k}'", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    /// Defaults < file < flags; every required key must end up set.
    pub fn resolve(keys: &[Key], file: Option<&Path>, flags: BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> =
            keys.iter().filter_map(|k| k.default.map(|d| (k.name.to_string(), d.to_string()))).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            values.extend(parse_file(&text, keys)?);
        }
        values.extend(flags);
        for k in keys {
            if k.default.is_none() && !values.contains_key(k.name) {
                return Err(CliError::Usage(format!("missing required setting '{}' ({})", k.name, k.help)));
            }
        }
        Ok(Self { values })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }

    pub fn str(&self, k: &str) -> &str {
        self.values.get(k).map(String::as_str).unwrap_or("")
    }

    pub fn f64(&self, k: &str) -> Result<f64, CliError> {
        let s = self.str(k);
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::Usage(format!("{k}: expected a number, got '{s}'")))
    }

    pub fn positive(&self, k: &str) -> Result<f64, CliError> {
        let v = self.f64(k)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(CliError::Usage(format!("{k} must be positive, got {v}")))
        }
    }

    pub fn usize(&self, k: &str) -> Result<usize, CliError> {
        let s = self.str(k);
        s.parse().map_err(|_| CliError::Usage(format!("{k}: expected a non-negative integer, got '{s}'")))
    }

    pub fn f64s(&self, k: &str) -> Result<Vec<f64>, CliError> {
        self.str(k)
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("{k}: bad number '{s}'"))))
            .collect()
    }

    /// An expression, or `@path` to an `R,value` table for radial fields.
    pub fn field(&self, k: &str, chart: Chart) -> Result<SharedField, CliError> {
        field_from(k, self.str(k), chart)
    }

    /// Matrix written as rows split by `;`, entries by `,`; entries may be
    /// expressions in `t`.
    pub fn matrix_fn(
        &self,
        k: &str,
        n: usize,
    ) -> Result<impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static, CliError> {
        let src = self.str(k);
        let rows: Vec<&str> = src.split(';').collect();
        if rows.len() != n {
            return Err(CliError::Usage(format!("{k}: expected {n} rows separated by ';', got {}", rows.len())));
        }
        let mut cells = Vec::with_capacity(n * n);
        for row in rows {
            let entries: Vec<&str> = row.split(',').collect();
            if entries.len() != n {
                return Err(CliError::Usage(format!("{k}: expected {n} entries in row '{row}'")));
            }
            for e in entries {
                cells.push(field_from(k, e, Chart::Radial)?);
            }
        }
        Ok(move |t: f64| DMatrix::from_row_iterator(n, n, cells.iter().map(|c| c.value(&[0.0], t))))
    }
}

pub fn field_from(k: &str, src: &str, chart: Chart) -> Result<SharedField, CliError> {
    if let Some(path) = src.strip_prefix('@') {
        if chart != Chart::Radial {
            return Err(CliError::Usage(format!("{k}: tables are only supported for radial fields")));
        }
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{k}: cannot read {path}: {e}")))?;
        let table = TabulatedRadial::parse_csv(&text).map_err(|e| CliError::Usage(format!("{k}: {path}: {e}")))?;
        return Ok(Arc::new(table));
    }
    match ExprField::parse(src, chart) {
        Ok(f) => Ok(Arc::new(f)),
        Err(e @ GrowthError::Parse { .. }) => Err(CliError::Usage(format!("{k}: {e}"))),
        Err(e) => Err(CliError::Usage(format!("{k}: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[Key] = &[key("grid", "512", "nodes"), key("omega", "0", "growth"), required("range", "domain", 2)];

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\ngrid = 1024\nrange = 0 2\nomega = -R\n").unwrap();
        let s = Settings::resolve(KEYS, Some(&path), BTreeMap::new()).unwrap();
        assert_eq!(s.usize("grid").unwrap(), 1024);
        let flags = BTreeMap::from([("omega".to_string(), "R".to_string())]);
        let s = Settings::resolve(KEYS, Some(&path), flags).unwrap();
        assert_eq!(s.str("omega"), "R");
        assert_eq!(s.f64s("range").unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_file("nope = 1", KEYS), Err(CliError::Usage(m)) if m.contains("line 1")));
        assert!(Settings::resolve(KEYS, None, BTreeMap::new()).is_err());
        let s = Settings::resolve(
            KEYS,
            None,
            BTreeMap::from([("range".into(), "0 1".into()), ("omega".into(), "ln(".into())]),
        )
        .unwrap();
        let err = s.field("omega", Chart::Radial).unwrap_err().to_string();
        assert!(err.contains("column 4"), "{err}");
    }

    #[test]
    fn matrices() {
        let s = Settings::resolve(&[key("F", "1 + t, 0; 0, 2", "")], None, BTreeMap::new()).unwrap();
        let f = s.matrix_fn("F", 2).unwrap();
        assert_eq!(f(0.5), DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 2.0]));
        assert!(s.matrix_fn("F", 3).is_err());
    }
}
