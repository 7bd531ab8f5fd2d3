use std::fs;
use std::path::Path;

use phieq::reduction::ConstrainedInstance;
use phieq::{FactoredGame, MixtureStrategy, ProductStrategy};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)).map_err(|source| CliError::Io { path: path.into(), source })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let wrap = |source| CliError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.into(), source })
}

/// A game file holds either a bare factored game or a reduced instance that
/// wraps one.
pub enum GameFile {
    Game(FactoredGame),
    Instance(Box<ConstrainedInstance>),
}

impl GameFile {
    pub fn game(&self) -> &FactoredGame {
        match self {
            GameFile::Game(g) => g,
            GameFile::Instance(inst) => &inst.game,
        }
    }

    pub fn instance(&self) -> Option<&ConstrainedInstance> {
        match self {
            GameFile::Game(_) => None,
            GameFile::Instance(inst) => Some(inst),
        }
    }
}

pub fn read_game(path: &Path) -> Result<GameFile> {
    let value: Value = read_json(path)?;
    let json = |source| CliError::Json { path: path.into(), source };
    if value.get("mapping").is_some() {
        Ok(GameFile::Instance(Box::new(serde_json::from_value(value).map_err(json)?)))
    } else {
        Ok(GameFile::Game(serde_json::from_value(value).map_err(json)?))
    }
}

/// A list of marginals is read as a product strategy, an object as a
/// mixture.
pub fn read_strategy(path: &Path) -> Result<MixtureStrategy> {
    let value: Value = read_json(path)?;
    let json = |source| CliError::Json { path: path.into(), source };
    if value.is_array() {
        let p: ProductStrategy = serde_json::from_value(value).map_err(json)?;
        Ok(p.to_mixture())
    } else {
        serde_json::from_value(value).map_err(json)
    }
}
