//! Solver parameters for the CLI. Precedence: built-in defaults, then a
//! `key = value` config file, then command-line flags.

use sdes_core::experiment::SolverSettings;
use sdes_core::langmodel::NGramWeights;

/// Every settable key with its default, for `--help` and config files.
pub const KEYS: &[(&str, &str)] = &[
    ("ga.pop_size", "100"),
    ("ga.max_gen", "50"),
    ("ga.cross_rate", "0.95"),
    ("ga.mutate_rate", "0.05"),
    ("ga.elitism", "1"),
    ("ma.pop_size", "10"),
    ("ma.max_gen", "50"),
    ("ma.cross_rate", "0.5"),
    ("ma.mutate_rate", "0.5"),
    ("ma.elitism", "1"),
    ("ma.depth_limit", "1024"),
    ("sa.t0", "auto"),
    ("sa.cooling", "0.95"),
    ("sa.m", "10"),
    ("sa.iters_per_temp", "100*m"),
    ("sa.accept_cap", "10*m"),
    ("sa.max_temp_steps", "500"),
    ("weights.alpha", "0"),
    ("weights.beta", "1"),
    ("weights.gamma", "0"),
    ("seed", "random, printed"),
    ("workers", "0 (all cores)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub settings: SolverSettings,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub seed: Option<u64>,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let weights = NGramWeights::default();
        Self {
            settings: SolverSettings::default(),
            alpha: weights.alpha(),
            beta: weights.beta(),
            gamma: weights.gamma(),
            seed: None,
            workers: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let s = &mut self.settings;
        match key {
            "ga.pop_size" => s.ga.pop_size = parse(key, value)?,
            "ga.max_gen" => s.ga.max_gen = parse(key, value)?,
            "ga.cross_rate" => s.ga.cross_rate = parse(key, value)?,
            "ga.mutate_rate" => s.ga.mutate_rate = parse(key, value)?,
            "ga.elitism" => s.ga.elitism = parse(key, value)?,
            "ma.pop_size" => s.ma.ga.pop_size = parse(key, value)?,
            "ma.max_gen" => s.ma.ga.max_gen = parse(key, value)?,
            "ma.cross_rate" => s.ma.ga.cross_rate = parse(key, value)?,
            "ma.mutate_rate" => s.ma.ga.mutate_rate = parse(key, value)?,
            "ma.elitism" => s.ma.ga.elitism = parse(key, value)?,
            "ma.depth_limit" => s.ma.depth_limit = parse(key, value)?,
            "sa.t0" => {
                s.sa.t0 = if value == "auto" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "sa.cooling" => s.sa.cooling = parse(key, value)?,
            "sa.m" => s.sa.m = parse(key, value)?,
            "sa.iters_per_temp" => s.sa.iters_per_temp = Some(parse(key, value)?),
            "sa.accept_cap" => s.sa.accept_cap = Some(parse(key, value)?),
            "sa.max_temp_steps" => s.sa.max_temp_steps = parse(key, value)?,
            "weights.alpha" => self.alpha = parse(key, value)?,
            "weights.beta" => self.beta = parse(key, value)?,
            "weights.gamma" => self.gamma = parse(key, value)?,
            "seed" => self.seed = Some(parse(key, value)?),
            "workers" => self.workers = parse(key, value)?,
            _ => return Err(format!("unknown configuration key {key:?}")),
        }
        Ok(())
    }

    /// Apply a flat `key = value` file. Blank lines and `#` comments are
    /// skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
            self.set(key.trim(), value)
                .map_err(|e| format!("config line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<NGramWeights, String> {
        NGramWeights::new(self.alpha, self.beta, self.gamma).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.weights()?;
        self.settings.validate().map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_key_table() {
        let mut from_table = RunConfig::default();
        for (key, default) in KEYS {
            if default.parse::<f64>().is_ok() {
                from_table.set(key, default).unwrap();
            }
        }
        assert_eq!(from_table, RunConfig::default());
    }

    #[test]
    fn file_then_override() {
        let mut cfg = RunConfig::default();
        cfg.apply_file("# tuned\nga.pop_size = 40\n\nsa.t0=2.5 # fixed\nseed = 9\n")
            .unwrap();
        assert_eq!(cfg.settings.ga.pop_size, 40);
        assert_eq!(cfg.settings.sa.t0, Some(2.5));
        assert_eq!(cfg.seed, Some(9));
        cfg.set("ga.pop_size", "60").unwrap();
        assert_eq!(cfg.settings.ga.pop_size, 60);
    }

    #[test]
    fn bad_entries_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_file("ga.pop_size 40").is_err());
        assert!(cfg.apply_file("nope = 1").is_err());
        assert!(cfg.apply_file("ga.cross_rate = high").is_err());
        cfg.set("weights.alpha", "0.5").unwrap();
        assert!(cfg.validate().is_err());
    }
}
