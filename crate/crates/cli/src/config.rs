//! Optional TOML config file. Keys mirror the long flag names; a flag given
//! on the command line always wins over the file, and the file over defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub log_level: Option<String>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub family: Option<String>,
    pub preset: Option<String>,
    pub t: Option<u32>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub h: Option<usize>,
    pub alpha: Option<f64>,
    pub l_max: Option<usize>,
    pub rel_tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub scale: Option<String>,
    pub trials: Option<usize>,
    pub first_trial: Option<usize>,
    pub sizes: Option<String>,
    pub t_grid: Option<String>,
    pub hypotheses: Option<String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

/// Flag, then config file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Parses `"300x225,600x450"`.
pub fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|item| {
            let Some((a, b)) = item.split_once(['x', 'X']) else {
                bail!("expected AxB, got '{item}'");
            };
            Ok((
                a.trim().parse().with_context(|| format!("bad number in '{item}'"))?,
                b.trim().parse().with_context(|| format!("bad number in '{item}'"))?,
            ))
        })
        .collect()
}

/// Parses `"0,3,6,9"`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|item| item.parse().with_context(|| format!("bad list item '{item}'")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_lists() {
        assert_eq!(parse_pairs("300x225, 600X450").unwrap(), vec![(300, 225), (600, 450)]);
        assert!(parse_pairs("300-225").is_err());
        assert_eq!(parse_list::<u32>("0,3,6").unwrap(), vec![0, 3, 6]);
    }

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None::<i32>, None, 3), 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("alpha = 0.05\nl-max = 6").is_ok());
        assert!(toml::from_str::<ConfigFile>("colour = 1").is_err());
    }
}
