use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Keys accepted in a config file. Flags use the same names with `-` for `_`.
const KNOWN_KEYS: &[&str] = &[
    "algo",
    "blocks",
    "design",
    "dims",
    "grid",
    "ground_truth",
    "max_iters",
    "n",
    "noise_var",
    "out",
    "repeats",
    "scheme",
    "seed",
    "sparsity",
    "standardize",
    "support",
    "t",
    "tol",
    "variant",
];

/// Flag values layered over an optional `key = value` config file.
///
/// Every lookup is recorded with the value it resolved to, so reports can
/// embed the configuration that was actually used.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    used: RefCell<Vec<(String, String)>>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_").to_ascii_lowercase()
}

fn parse_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new("io-error", format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| {
            CliError::new(
                "config-error",
                format!("{}:{}: {msg}", path.display(), i + 1),
            )
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, found `{line}`")))?;
        let key = normalize(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(bad(format!("unknown key `{key}`")));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    /// `flags` entries that are `Some` override the file.
    pub fn load(
        config: Option<&Path>,
        flags: Vec<(&str, Option<String>)>,
    ) -> Result<Self, CliError> {
        let mut values = match config {
            Some(p) => parse_config(p)?,
            None => BTreeMap::new(),
        };
        for (key, value) in flags {
            if let Some(v) = value {
                values.insert(normalize(key), v);
            }
        }
        Ok(Settings {
            values,
            used: RefCell::new(Vec::new()),
        })
    }

    fn record(&self, key: &str, value: &str) {
        let mut used = self.used.borrow_mut();
        if !used.iter().any(|(k, _)| k == key) {
            used.push((key.to_string(), value.to_string()));
        }
    }

    /// Raw string value, falling back to `default`.
    pub fn text(&self, key: &str, default: Option<&str>) -> Option<String> {
        let v = self
            .values
            .get(key)
            .cloned()
            .or_else(|| default.map(str::to_string))?;
        self.record(key, &v);
        Some(v)
    }

    pub fn required(&self, key: &str) -> Result<String, CliError> {
        self.text(key, None).ok_or_else(|| {
            CliError::new(
                "missing-argument",
                format!(
                    "`{}` is required (flag or config key)",
                    key.replace('_', "-")
                ),
            )
        })
    }

    pub fn parsed<T: FromStr>(&self, key: &str, default: &str) -> Result<T, CliError> {
        let raw = self.text(key, Some(default)).expect("default given");
        parse_value(key, &raw)
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        self.parsed(key, "false")
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.text(key, None).map(PathBuf::from)
    }

    pub fn paths(&self, key: &str) -> Option<Vec<PathBuf>> {
        self.text(key, None)
            .map(|v| split_list(&v).into_iter().map(PathBuf::from).collect())
    }

    /// The lookups made so far, in order.
    pub fn resolved(&self) -> Vec<(String, String)> {
        self.used.borrow().clone()
    }
}

pub fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.trim().parse().map_err(|_| {
        CliError::new(
            "invalid-argument",
            format!("invalid value `{raw}` for `{}`", key.replace('_', "-")),
        )
    })
}

/// Items separated by commas and/or whitespace.
pub fn split_list(raw: &str) -> Vec<&str> {
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, CliError> {
    split_list(raw)
        .into_iter()
        .map(|s| parse_value(key, s))
        .collect()
}
