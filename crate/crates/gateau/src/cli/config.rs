use std::fmt::Write as FmtWrite;
use std::path::Path;

use thiserror::Error;

use crate::chess::Variant;
use crate::mcts::SearchParams;
use crate::selfplay::TrainConfig;

/// Fully resolved run configuration: the training loop, the search, and
/// the rating-tournament knobs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Games per pair in rating matches.
    pub rate_games: u32,
    /// Round-robin seeding size for rating tournaments.
    pub rate_initial_players: usize,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset '{0}' (expected one of: {1})")]
    UnknownPreset(String, String),
    #[error("{file}:{line}: {message}")]
    Syntax {
        file: String,
        line: usize,
        message: String,
    },
    #[error("unknown key '{section}.{key}'")]
    UnknownKey { section: String, key: String },
    #[error("invalid value for '{section}.{key}': '{value}' ({message})")]
    BadValue {
        section: String,
        key: String,
        value: String,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub const PRESET_NAMES: [&str; 4] = ["alg1-defaults", "paper-8x8", "paper-5x5", "desk-scale"];

/// Named presets. "alg1-defaults" is the canonical loop; the paper-scale
/// presets override it per experiment; "desk-scale" is sized for a CPU.
pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let alg1 = RunConfig {
        train: TrainConfig::default(),
        rate_games: 60,
        rate_initial_players: 10,
    };
    let mut config = alg1;
    match name {
        "alg1-defaults" => {}
        "paper-8x8" => {
            config.train.iterations = 500;
            config.train.batch_size = 256;
            config.train.max_plies = 512;
            config.train.checkpoint_stride = 10;
        }
        "paper-5x5" => {
            config.train.variant = Variant::Gardner;
            config.train.iterations = 100;
            config.train.games_per_iter = 1024;
            config.train.batch_size = 256;
            config.train.max_plies = 256;
            config.train.blocks = 10;
            config.train.checkpoint_stride = 5;
        }
        "desk-scale" => {
            config.train.variant = Variant::Gardner;
            config.train.iterations = 10;
            config.train.games_per_iter = 64;
            config.train.window_size = 50_000;
            config.train.batch_size = 128;
            config.train.max_plies = 256;
            config.train.hidden = 32;
            config.train.blocks = 2;
            config.train.checkpoint_stride = 1;
            config.train.search.simulations = 32;
        }
        other => {
            return Err(ConfigError::UnknownPreset(
                other.to_string(),
                PRESET_NAMES.join(", "),
            ))
        }
    }
    Ok(config)
}

/// Renders a config in the flat sectioned key-value format that
/// [`apply_file`] reads back.
pub fn render(config: &RunConfig) -> String {
    let t = &config.train;
    let s = &t.search;
    let mut out = String::new();
    let _ = writeln!(out, "[run]");
    let _ = writeln!(out, "variant = {}", t.variant.name());
    let _ = writeln!(out, "seed = {}", t.seed);
    let _ = writeln!(out, "threads = {}", t.threads);
    let _ = writeln!(out, "\n[train]");
    let _ = writeln!(out, "iterations = {}", t.iterations);
    let _ = writeln!(out, "games_per_iter = {}", t.games_per_iter);
    let _ = writeln!(out, "window_size = {}", t.window_size);
    let _ = writeln!(out, "epochs_per_iter = {}", t.epochs_per_iter);
    let _ = writeln!(out, "batch_size = {}", t.batch_size);
    let _ = writeln!(out, "learning_rate = {}", t.learning_rate);
    let _ = writeln!(out, "max_plies = {}", t.max_plies);
    let _ = writeln!(out, "checkpoint_stride = {}", t.checkpoint_stride);
    let _ = writeln!(out, "hidden = {}", t.hidden);
    let _ = writeln!(out, "blocks = {}", t.blocks);
    let _ = writeln!(out, "\n[search]");
    let _ = writeln!(out, "simulations = {}", s.simulations);
    let _ = writeln!(out, "gumbel_scale = {}", s.gumbel_scale);
    let _ = writeln!(out, "considered_actions = {}", s.considered_actions);
    let _ = writeln!(out, "c_visit = {}", s.c_visit);
    let _ = writeln!(out, "c_scale = {}", s.c_scale);
    let _ = writeln!(out, "\n[rate]");
    let _ = writeln!(out, "games_per_pair = {}", config.rate_games);
    let _ = writeln!(out, "initial_players = {}", config.rate_initial_players);
    out
}

/// Applies a config file on top of `config`. Sections group keys; unknown
/// sections or keys are errors, not warnings.
pub fn apply_file(config: &mut RunConfig, path: &Path) -> Result<(), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file = path.display().to_string();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                file: file.clone(),
                line: lineno + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        apply_key(config, &section, key.trim(), value.trim())?;
    }
    Ok(())
}

/// Applies one `section.key = value` setting.
pub fn apply_key(
    config: &mut RunConfig,
    section: &str,
    key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    let bad = |message: &str| ConfigError::BadValue {
        section: section.to_string(),
        key: key.to_string(),
        value: value.to_string(),
        message: message.to_string(),
    };
    macro_rules! parse {
        ($ty:ty) => {
            value.parse::<$ty>().map_err(|e| bad(&e.to_string()))?
        };
    }
    let t = &mut config.train;
    match (section, key) {
        ("run", "variant") => {
            t.variant = Variant::from_name(value).ok_or_else(|| bad("chess or gardner"))?
        }
        ("run", "seed") => t.seed = parse!(u64),
        ("run", "threads") => t.threads = parse!(usize),
        ("train", "iterations") => t.iterations = parse!(u32),
        ("train", "games_per_iter") => t.games_per_iter = parse!(u32),
        ("train", "window_size") => t.window_size = parse!(usize),
        ("train", "epochs_per_iter") => t.epochs_per_iter = parse!(u32),
        ("train", "batch_size") => t.batch_size = parse!(usize),
        ("train", "learning_rate") => t.learning_rate = parse!(f64),
        ("train", "max_plies") => t.max_plies = parse!(u32),
        ("train", "checkpoint_stride") => t.checkpoint_stride = parse!(u32),
        ("train", "hidden") => t.hidden = parse!(usize),
        ("train", "blocks") => t.blocks = parse!(usize),
        ("search", "simulations") => t.search.simulations = parse!(u32),
        ("search", "gumbel_scale") => t.search.gumbel_scale = parse!(f64),
        ("search", "considered_actions") => t.search.considered_actions = parse!(usize),
        ("search", "c_visit") => t.search.c_visit = parse!(f64),
        ("search", "c_scale") => t.search.c_scale = parse!(f64),
        ("rate", "games_per_pair") => config.rate_games = parse!(u32),
        ("rate", "initial_players") => config.rate_initial_players = parse!(usize),
        _ => {
            return Err(ConfigError::UnknownKey {
                section: section.to_string(),
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Applies a `--set section.key=value` override.
pub fn apply_override(config: &mut RunConfig, setting: &str) -> Result<(), ConfigError> {
    let (path, value) = setting.split_once('=').ok_or_else(|| ConfigError::Syntax {
        file: "--set".into(),
        line: 0,
        message: format!("expected section.key=value, got '{setting}'"),
    })?;
    let (section, key) = path.trim().split_once('.').ok_or_else(|| ConfigError::Syntax {
        file: "--set".into(),
        line: 0,
        message: format!("expected section.key=value, got '{setting}'"),
    })?;
    apply_key(config, section, key, value.trim())
}

/// Search parameters implied by a run config.
pub fn search_params(config: &RunConfig) -> SearchParams {
    config.train.search.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve_and_round_trip() {
        for name in PRESET_NAMES {
            let config = preset(name).unwrap();
            let text = render(&config);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("run.conf");
            std::fs::write(&path, &text).unwrap();
            let mut other = preset("alg1-defaults").unwrap();
            apply_file(&mut other, &path).unwrap();
            assert_eq!(render(&other), text, "{name}");
        }
        assert!(matches!(
            preset("desk"),
            Err(ConfigError::UnknownPreset(_, _))
        ));
    }

    #[test]
    fn desk_scale_preset_values() {
        let config = preset("desk-scale").unwrap();
        assert_eq!(config.train.variant, Variant::Gardner);
        assert_eq!(config.train.iterations, 10);
        assert_eq!(config.train.games_per_iter, 64);
        assert_eq!(config.train.search.simulations, 32);
        assert_eq!(config.train.window_size, 50_000);
        assert_eq!(config.train.hidden, 32);
        assert_eq!(config.train.blocks, 2);
    }

    #[test]
    fn alg1_defaults_match_canonical_loop() {
        let config = preset("alg1-defaults").unwrap();
        assert_eq!(config.train.iterations, 100);
        assert_eq!(config.train.games_per_iter, 256);
        assert_eq!(config.train.search.simulations, 128);
        assert_eq!(config.train.window_size, 1_000_000);
        assert_eq!(config.train.epochs_per_iter, 1);
        assert_eq!(config.train.batch_size, 2048);
        assert_eq!(config.train.learning_rate, 0.001);
        assert_eq!(config.rate_games, 60);
        assert_eq!(config.rate_initial_players, 10);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut config = preset("alg1-defaults").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "[train]\niterations = 5\nwidow_size = 10\n").unwrap();
        match apply_file(&mut config, &path) {
            Err(ConfigError::UnknownKey { section, key }) => {
                assert_eq!(section, "train");
                assert_eq!(key, "widow_size");
            }
            other => panic!("expected unknown-key error, got {other:?}"),
        }
        assert!(apply_override(&mut config, "search.simulations=64").is_ok());
        assert_eq!(config.train.search.simulations, 64);
        assert!(apply_override(&mut config, "search.sims=64").is_err());
    }

    #[test]
    fn keep_search_params_in_sync() {
        let mut config = preset("desk-scale").unwrap();
        config.train.search.seed = 17;
        assert_eq!(search_params(&config).simulations, 32);
        assert_eq!(search_params(&config).seed, 17);
    }
}
