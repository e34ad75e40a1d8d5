//! Experiment configuration: a flat TOML file with typed fields and
//! unknown-key rejection, plus command-line overrides.

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config: missing required field `{0}`")]
    Missing(&'static str),
    #[error("config: invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(de: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(de)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

fn points<'de, D>(de: D) -> Result<Option<Vec<Vec<f64>>>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Pts {
        One(Vec<f64>),
        Many(Vec<Vec<f64>>),
    }
    Ok(Option::<Pts>::deserialize(de)?.map(|v| match v {
        Pts::One(x) => vec![x],
        Pts::Many(xs) => xs,
    }))
}

/// Every knob any subcommand reads. Fields a command does not use are
/// ignored by it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Box radius.
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub radius: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "points", skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<f64>>>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_factor: Option<f64>,
    /// Worker threads; 0 or absent means the environment default. Not part
    /// of the result-determining inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Macroscopic box side `N`.
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u32>,
    /// Input sample file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<String>,
    /// Main output file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ConfigError> {
        let text = std::str::from_utf8(bytes).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::parse(text)
    }

    /// Canonical text form, used for manifests and hashing.
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Copy of `self` with every field set in `over` replaced.
    pub fn merged(&self, over: &Config) -> Config {
        macro_rules! pick {
            ($($f:ident),*) => { Config { $($f: over.$f.clone().or_else(|| self.$f.clone())),* } };
        }
        pick!(
            d, radius, p, seed, event, s, x, xi, mu, alpha, n_grid, replicates, box_factor, workers, z, epsilon, big_n, ds,
            dy, j_radius, lemma, instances, source, target, t_min, t_max, sample, out
        )
    }

    /// The snapshot that determines results: everything but `workers`.
    pub fn result_inputs(&self) -> Config {
        Config { workers: None, ..self.clone() }
    }
}

/// Parses a point such as `1,-2,3`.
pub fn parse_point<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty point".into());
    }
    text.split(',')
        .map(|c| c.trim().parse::<T>().map_err(|_| format!("bad coordinate {:?}", c.trim())))
        .collect()
}

/// Parses a point list such as `0,0; 1,2; -3,4`. All points must share a
/// dimension.
pub fn parse_point_list<T: std::str::FromStr>(text: &str) -> Result<Vec<Vec<T>>, String> {
    let pts: Vec<Vec<T>> = text.split(';').filter(|s| !s.trim().is_empty()).map(parse_point).collect::<Result<_, _>>()?;
    if pts.is_empty() {
        return Err("empty point list".into());
    }
    if pts.iter().any(|p| p.len() != pts[0].len()) {
        return Err("points differ in dimension".into());
    }
    Ok(pts)
}

/// Parses a comma-separated list of scalars.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, String> {
    parse_point(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_scalars() {
        let c = Config::parse("d = 2\np = 0.7\nseed = 5\ns = 0.25\nx = [0, 0]\nn_grid = [8, 12]\nL = 10\nN = 3\n").unwrap();
        assert_eq!(c.s, Some(vec![0.25]));
        assert_eq!(c.x, Some(vec![vec![0.0, 0.0]]));
        assert_eq!(c.radius, Some(10));
        assert_eq!(c.big_n, Some(3));
        assert_eq!(Config::parse(&c.to_toml().unwrap()).unwrap(), c);
        let huge = Config { seed: Some(u64::MAX), ..Config::default() };
        let text = huge.to_toml().unwrap();
        assert_eq!(Config::parse(&text).unwrap(), huge);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::parse("replicate = 10"), Err(ConfigError::Parse(_))));
        assert!(Config::parse("p = \"high\"").is_err());
    }

    #[test]
    fn overrides_win() {
        let base = Config { p: Some(0.6), seed: Some(1), ..Config::default() };
        let over = Config { p: Some(0.7), ..Config::default() };
        let m = base.merged(&over);
        assert_eq!((m.p, m.seed), (Some(0.7), Some(1)));
    }

    #[test]
    fn point_lists() {
        assert_eq!(parse_point::<i64>("1, -2,3").unwrap(), vec![1, -2, 3]);
        assert_eq!(parse_point_list::<f64>("0,0; 0.5,1").unwrap(), vec![vec![0.0, 0.0], vec![0.5, 1.0]]);
        assert!(parse_point_list::<i64>("0,0;1").is_err());
        assert!(parse_point::<i64>("1,,2").is_err());
        assert!(parse_point_list::<i64>(" ; ").is_err());
    }
}
