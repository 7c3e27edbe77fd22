//! Run configuration: a plain-text `key = value` (or `key: value`) file
//! whose every key can be overridden by a command-line flag of the same name.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Bad or missing configuration. Maps to the usage-error exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> ConfigResult<T> {
    Err(ConfigError(msg.into()))
}

/// Effective settings of one command after merging file and flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses a config file's text, rejecting keys outside `allowed`.
    pub fn parse(text: &str, allowed: &[&str]) -> ConfigResult<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once(['=', ':']) else {
                return err(format!("line {}: expected `key = value`", n + 1));
            };
            let k = k.trim();
            if !allowed.contains(&k) {
                return err(format!("line {}: unknown key `{k}`", n + 1));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path, allowed: &[&str]) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text, allowed)
    }

    /// File settings (if any) overlaid with flag values.
    pub fn merged(
        file: Option<&Path>,
        allowed: &[&str],
        overrides: Vec<(&'static str, String)>,
    ) -> ConfigResult<Self> {
        let mut s = match file {
            Some(p) => Self::load(p, allowed)?,
            None => Self::default(),
        };
        for (k, v) in overrides {
            s.values.insert(k.to_string(), v);
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn path(&self, key: &str) -> ConfigResult<PathBuf> {
        match self.get(key) {
            Some(v) => Ok(PathBuf::from(v)),
            None => err(format!("missing required key `{key}`")),
        }
    }

    pub fn opt_path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> ConfigResult<T> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> ConfigResult<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("bad value `{v}` for `{key}`"))),
        }
    }

    pub fn parse_req<T: FromStr>(&self, key: &str) -> ConfigResult<T> {
        self.parse_opt(key)?
            .ok_or_else(|| ConfigError(format!("missing required key `{key}`")))
    }
}

/// Declares a clap argument struct with a `--config` file flag plus one
/// optional string flag per config key, named exactly like the key.
#[macro_export]
macro_rules! config_args {
    ($(#[$sm:meta])* $name:ident { $( $(#[$m:meta])* $key:ident ),* $(,)? }) => {
        $(#[$sm])*
        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct $name {
            /// Key-value config file; flags override its entries.
            #[arg(long)]
            pub config: Option<std::path::PathBuf>,
            $(
                $(#[$m])*
                #[arg(long = stringify!($key), value_name = "VALUE")]
                pub $key: Option<String>,
            )*
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            pub fn settings(&self) -> $crate::config::ConfigResult<$crate::config::Settings> {
                let mut overrides = Vec::new();
                $(
                    if let Some(v) = &self.$key {
                        overrides.push((stringify!($key), v.clone()));
                    }
                )*
                $crate::config::Settings::merged(self.config.as_deref(), Self::KEYS, overrides)
            }
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_both_separators_and_comments() {
        let s = Settings::parse("a = 1\n# note\nb: two # trailing\n\n", &["a", "b"]).unwrap();
        assert_eq!(s.get("a"), Some("1"));
        assert_eq!(s.get("b"), Some("two"));
        assert_eq!(s.parse_req::<u32>("a"), Ok(1));
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(Settings::parse("zzz = 1", &["a"]).is_err());
    }

    #[test]
    fn bad_number() {
        let s = Settings::parse("a = x", &["a"]).unwrap();
        assert!(s.parse_req::<u32>("a").is_err());
        assert_eq!(s.parse_or::<u32>("missing", 7), Ok(7));
    }
}
