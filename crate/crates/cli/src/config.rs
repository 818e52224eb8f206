use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Values from the optional `key=value` config file. Command-line flags win.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|m| CliError::Usage(format!("config {}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut file = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
            file.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self { file })
    }

    /// The flag if given, else the config value, parsed as `T`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(&normalize(key)) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {e}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing --{} (flag or config key {key})", key.replace('_', "-"))))
    }

    pub fn flag(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        Ok(flag || self.pick::<bool>(key, None)?.unwrap_or(false))
    }
}

/// Splits a comma-separated list, dropping empty entries.
pub fn split_list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// `"3-9"`, `"3,5,7"` or `"none"`.
pub fn parse_sizes(raw: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("invalid subset sizes {raw:?}"));
    if raw.trim().eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for part in split_list(raw) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let s = Settings::parse("# comment\nruns = 3\nstore-path=x.jsonl\n\nreplay_only=true").unwrap();
        assert_eq!(s.pick::<u32>("runs", None).unwrap(), Some(3));
        assert_eq!(s.pick::<u32>("runs", Some(5)).unwrap(), Some(5));
        assert_eq!(s.pick::<String>("store_path", None).unwrap().as_deref(), Some("x.jsonl"));
        assert!(s.flag("replay_only", false).unwrap());
        assert!(s.pick::<u32>("missing", None).unwrap().is_none());
        assert!(Settings::parse("nokey").is_err());
        assert!(matches!(Settings::parse("runs=x").unwrap().pick::<u32>("runs", None), Err(CliError::Usage(_))));
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_sizes("3-9").unwrap(), vec![3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(parse_sizes("5, 3,5").unwrap(), vec![3, 5]);
        assert!(parse_sizes("none").unwrap().is_empty());
        assert!(parse_sizes("9-3").is_err());
        assert!(parse_sizes("x").is_err());
    }
}
