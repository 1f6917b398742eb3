//! Configuration file and value resolution.
//!
//! Each setting is taken from the first source that has it: command-line
//! flag, `LEXLABEL_*` environment variable (both handled by clap), the TOML
//! file named by `--config`, then the built-in default.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use lexlabel::gateway::{EmbeddingGateway, EmbeddingSource, GatewayConfig, HashingEmbedder, OpenSource, RemoteConfig};
use serde::{Deserialize, Serialize};

use crate::args::{EmbedArgs, ObjectiveArg, StrategyArg, UniverseArg};
use crate::failure::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub k_grid: Option<String>,
    pub objective: Option<ObjectiveArg>,
    pub macro_universe: Option<UniverseArg>,
    pub strategy: Option<StrategyArg>,
    pub vote_neighbors: Option<usize>,
    pub threshold: Option<f64>,
    pub sizes: Option<String>,
    pub train_fraction: Option<f64>,
    pub val_fraction: Option<f64>,
    pub listen: Option<String>,
    #[serde(default)]
    pub embedding: EmbeddingFile,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingFile {
    pub service_url: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_retries: Option<u32>,
    pub cache_dir: Option<PathBuf>,
    pub prefix: Option<String>,
    pub hashing_dim: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| lexlabel::Error::Io {
            path: path.to_owned(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// First of flag/env value, file value, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub const DEFAULT_SEED: u64 = 13;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_K_GRID: &str = "1..20";
pub const DEFAULT_VOTE_NEIGHBORS: usize = 10;
pub const DEFAULT_SIZES: &str = "100,500,1000,2000,5000,full";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_MODEL: &str = "default";

/// Resolved embedding settings, recorded in manifests (without the token).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedChoice {
    Remote {
        service_url: String,
        model: String,
        timeout_secs: f64,
        batch_size: usize,
        max_retries: u32,
        cache_dir: Option<PathBuf>,
        prefix: String,
        #[serde(skip)]
        auth_token: Option<String>,
    },
    Hashing {
        dim: usize,
        prefix: String,
    },
}

impl EmbedChoice {
    /// `None` when neither a service URL nor a hashing dimension is set.
    pub fn resolve(args: &EmbedArgs, file: &EmbeddingFile) -> Option<EmbedChoice> {
        let prefix = args.prefix.clone().or(file.prefix.clone()).unwrap_or_default();
        if let Some(url) = args.service_url.clone().or(file.service_url.clone()) {
            let defaults = GatewayConfig::default();
            return Some(EmbedChoice::Remote {
                service_url: url,
                model: pick(args.model.clone(), file.model.clone(), DEFAULT_MODEL.to_string()),
                timeout_secs: pick(args.timeout_secs, file.timeout_secs, 30.0),
                batch_size: pick(args.batch_size, file.batch_size, defaults.batch_size),
                max_retries: pick(args.max_retries, file.max_retries, defaults.max_retries),
                cache_dir: args.cache_dir.clone().or(file.cache_dir.clone()),
                prefix,
                auth_token: args.auth_token.clone(),
            });
        }
        args.hashing_dim
            .or(file.hashing_dim)
            .map(|dim| EmbedChoice::Hashing { dim, prefix })
    }

    /// Connects the chosen embedder. `expected_dim` is enforced on every
    /// returned vector.
    pub fn open(&self, expected_dim: Option<usize>) -> Result<OpenSource, CliError> {
        match self {
            EmbedChoice::Remote {
                service_url,
                model,
                timeout_secs,
                batch_size,
                max_retries,
                cache_dir,
                prefix,
                auth_token,
            } => {
                if !(timeout_secs.is_finite() && *timeout_secs > 0.0) {
                    return Err(CliError::Config("timeout_secs must be positive".into()));
                }
                let remote = RemoteConfig {
                    base_url: service_url.clone(),
                    model: model.clone(),
                    timeout: Duration::from_secs_f64(*timeout_secs),
                    auth_token: auth_token.clone(),
                    cache_dir: cache_dir.clone(),
                    gateway: GatewayConfig {
                        batch_size: *batch_size,
                        max_retries: *max_retries,
                        expected_dim,
                        prefix: prefix.clone(),
                        ..GatewayConfig::default()
                    },
                };
                Ok(EmbeddingSource::RemoteService(remote).open()?)
            }
            EmbedChoice::Hashing { dim, prefix } => {
                if *dim == 0 {
                    return Err(CliError::Config("hashing_dim must be positive".into()));
                }
                if let Some(expected) = expected_dim.filter(|e| e != dim) {
                    return Err(lexlabel::Error::DimensionMismatch { expected, actual: *dim }.into());
                }
                let gateway = EmbeddingGateway::new(
                    Arc::new(HashingEmbedder::new(*dim)),
                    None,
                    GatewayConfig {
                        expected_dim: Some(*dim),
                        prefix: prefix.clone(),
                        ..GatewayConfig::default()
                    },
                )?;
                Ok(OpenSource::Gateway(gateway))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }

    #[test]
    fn file_parsing() {
        let c: FileConfig = toml::from_str(
            "k = 7\nstrategy = \"neighbor-vote\"\n[embedding]\nservice_url = \"http://x\"\nbatch_size = 8\n",
        )
        .unwrap();
        assert_eq!(c.k, Some(7));
        assert_eq!(c.strategy, Some(StrategyArg::NeighborVote));
        let choice = EmbedChoice::resolve(&EmbedArgs::default(), &c.embedding).unwrap();
        match choice {
            EmbedChoice::Remote {
                batch_size,
                ref service_url,
                ..
            } => {
                assert_eq!(batch_size, 8);
                assert_eq!(service_url, "http://x");
            }
            _ => panic!("expected remote"),
        }
        let flag = EmbedArgs {
            batch_size: Some(2),
            ..EmbedArgs::default()
        };
        match EmbedChoice::resolve(&flag, &c.embedding).unwrap() {
            EmbedChoice::Remote { batch_size, .. } => assert_eq!(batch_size, 2),
            _ => panic!("expected remote"),
        }
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}
