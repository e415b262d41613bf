//! `key = value` settings files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Keys accepted in a settings file; they mirror the long flag names.
pub const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "alpha-high",
    "alpha-low",
    "big-m",
    "csv",
    "end",
    "endpoint",
    "fee-rate",
    "gamma",
    "gas",
    "grid-step",
    "initial-price",
    "out",
    "out-dir",
    "page-size",
    "path-index",
    "pool",
    "refine-tol",
    "repeats",
    "S",
    "seed",
    "sigma",
    "start",
    "T",
    "trade-fee",
    "wealth",
    "x-token",
];

#[derive(Debug, Default)]
pub struct SettingsFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl SettingsFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let bad = |n: usize, msg: String| {
            CliError::Usage(format!("{} line {n}: {msg}", path.display()))
        };
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(i + 1, "expected `key = value`".into()))?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            if !KNOWN_KEYS.contains(&key) {
                return Err(bad(i + 1, format!("unknown key `{key}`")));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(bad(i + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(SettingsFile {
            path: Some(path.to_path_buf()),
            values,
        })
    }
}

/// Resolves settings with precedence flag > settings file > default and
/// records every resolved value for the provenance line.
pub struct Resolver {
    file: SettingsFile,
    echo: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(file: SettingsFile) -> Self {
        Resolver {
            file,
            echo: Vec::new(),
        }
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.values.get(key) {
                Some(raw) => Some(raw.parse::<T>().map_err(|_| {
                    let src = self
                        .file
                        .path
                        .as_ref()
                        .map_or_else(String::new, |p| format!("{}: ", p.display()));
                    CliError::Usage(format!("{src}bad value `{raw}` for `{key}`"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.note(key, v);
        }
        Ok(value)
    }

    pub fn or<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
    {
        match self.get(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.note(key, &default);
                Ok(default)
            }
        }
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Display,
    {
        self.get(key, flag)?.ok_or_else(|| {
            CliError::Usage(format!("missing --{key} (or `{key} = …` in the settings file)"))
        })
    }

    /// Records a derived value, e.g. one estimated from data.
    pub fn note(&mut self, key: &str, value: &impl Display) {
        let value = value.to_string();
        match self.echo.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.echo.push((key.to_string(), value)),
        }
    }

    /// `# lpconc <command> key=value …`; values are shown at full precision
    /// so the line can be replayed as flags.
    pub fn provenance(&self, command: &str) -> String {
        let mut line = format!("# lpconc {command}");
        for (k, v) in &self.echo {
            line.push_str(&format!(" --{k} {v}"));
        }
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> SettingsFile {
        SettingsFile::parse(text, Path::new("run.conf")).unwrap()
    }

    #[test]
    fn precedence() {
        let mut r = Resolver::new(file("gas = 50\n# comment\n\ntrade-fee = 0.003\n"));
        assert_eq!(r.or("gas", Some(1.0), 109.8).unwrap(), 1.0);
        assert_eq!(r.or("trade-fee", None, 0.0005).unwrap(), 0.003);
        assert_eq!(r.or("wealth", None::<f64>, 1e5).unwrap(), 1e5);
        assert_eq!(
            r.provenance("x"),
            "# lpconc x --gas 1 --trade-fee 0.003 --wealth 100000"
        );
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(SettingsFile::parse("colour = red", Path::new("f")).is_err());
        assert!(SettingsFile::parse("gas 5", Path::new("f")).is_err());
        assert!(SettingsFile::parse("gas = 1\ngas = 2", Path::new("f")).is_err());
        let mut r = Resolver::new(file("gas = lots"));
        assert!(r.get::<f64>("gas", None).is_err());
        assert!(r.require::<f64>("alpha", None).is_err());
    }
}
