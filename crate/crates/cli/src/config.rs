//! Key-value run configuration. A value comes from the command-line flag if
//! given, else the config file, else the built-in default. Every value read
//! is recorded so it can be echoed next to the results.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct RunConfig {
    file: BTreeMap<String, String>,
    entries: Vec<(String, String)>,
}

impl RunConfig {
    /// `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key = value", idx + 1)));
            };
            file.insert(key.trim().replace('-', "_"), value.trim().to_string());
        }
        Ok(RunConfig { file, entries: Vec::new() })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                RunConfig::parse(&text)
            }
        }
    }

    fn record(&mut self, key: &str, value: &str) {
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn raw(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        let value = flag.or_else(|| self.file.get(key).cloned())?;
        self.record(key, &value);
        Some(value)
    }

    pub fn opt<T: FromStr>(&mut self, key: &str, flag: Option<String>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.raw(key, flag) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| CliError::Usage(format!("invalid {key} `{v}`: {e}"))),
        }
    }

    pub fn get<T: FromStr>(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let flag = flag.or_else(|| (!self.file.contains_key(key)).then(|| default.to_string()));
        Ok(self.opt(key, flag)?.expect("value or default present"))
    }

    pub fn required<T: FromStr>(&mut self, key: &str, flag: Option<String>) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.opt(key, flag)?.ok_or_else(|| CliError::Usage(format!("missing required `{key}` (flag or config)")))
    }

    /// Boolean switch: set by the flag, or by `true`/`false` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        self.get(key, flag.then(|| "true".to_string()), "false")
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// `# key=value` lines in the order the values were resolved.
    pub fn header(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "# {k}={v}").unwrap();
        }
        out
    }
}

pub fn parse_list<T: FromStr>(key: &str, text: &str) -> Result<Vec<T>, CliError>
where
    T::Err: Display,
{
    let items: Result<Vec<T>, _> = text.split(',').map(|s| s.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => Err(CliError::Usage(format!("{key} is empty"))),
        Err(e) => Err(CliError::Usage(format!("invalid {key} `{text}`: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let mut c = RunConfig::parse("# comment\nseed = 7\nbatch-size=4\n").unwrap();
        assert_eq!(c.get::<u64>("seed", None, "0").unwrap(), 7);
        assert_eq!(c.get::<u64>("seed", Some("9".into()), "0").unwrap(), 9);
        assert_eq!(c.get::<usize>("batch_size", None, "8").unwrap(), 4);
        assert_eq!(c.get::<usize>("patience", None, "5").unwrap(), 5);
        assert_eq!(c.header(), "# seed=9\n# batch_size=4\n# patience=5\n");
    }

    #[test]
    fn errors_are_usage() {
        assert!(RunConfig::parse("novalue").is_err());
        let mut c = RunConfig::parse("seed = x").unwrap();
        assert!(c.get::<u64>("seed", None, "0").is_err());
        assert!(c.required::<String>("train", None).is_err());
        assert!(c.switch("grid", false).is_ok_and(|g| !g));
        assert_eq!(parse_list::<usize>("n", "5, 10").unwrap(), [5, 10]);
    }
}
