//! Config files, flag merging and exit codes.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub const SPEECH_ROOT_ENV: &str = "REVERBMIX_SPEECH_ROOT";
pub const NOISE_ROOT_ENV: &str = "REVERBMIX_NOISE_ROOT";

/// Why a command stopped. Each kind has a fixed exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config file or pipeline description (2).
    Config(String),
    /// Speech or noise corpus, or a rendered split, not found (3).
    MissingCorpus(String),
    /// Some mixtures failed to render; the rest were written (4).
    Render(usize),
    /// Anything else (1).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::MissingCorpus(_) => 3,
            Failure::Render(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::MissingCorpus(m) => write!(f, "missing corpus: {m}"),
            Failure::Render(n) => write!(f, "{n} mixture(s) failed to render"),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<reverbmix::Error> for Failure {
    fn from(e: reverbmix::Error) -> Self {
        use reverbmix::Error as E;
        match e {
            E::FileNotFound { .. } | E::InsufficientUtterances(_) => Failure::MissingCorpus(e.to_string()),
            E::InvalidManifest(_)
            | E::InvalidChain(_)
            | E::InvalidStft(_)
            | E::NotCola(_)
            | E::InvalidRoom(_)
            | E::InvalidT60(_)
            | E::InvalidSampleRate(_)
            | E::Json(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

pub fn config_error(m: impl fmt::Display) -> Failure {
    Failure::Config(m.to_string())
}

/// Parses a TOML or JSON file (by extension; JSON first for unknown ones).
pub fn load_file(path: &Path) -> CmdResult<Value> {
    let text =
        std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let as_toml = |t: &str| -> CmdResult<Value> {
        let v: toml::Value = toml::from_str(t).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        serde_json::to_value(v).map_err(config_error)
    };
    match ext.as_str() {
        "toml" => as_toml(&text),
        "json" => serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display()))),
        _ => serde_json::from_str(&text).or_else(|_| as_toml(&text)),
    }
}

/// Section `name` of a config file, or an empty object.
pub fn section(file: Option<&Value>, name: &str) -> CmdResult<Value> {
    match file {
        None => Ok(Value::Object(Default::default())),
        Some(Value::Object(map)) => {
            for key in map.keys() {
                if !["generate", "rir", "evaluate", "cascade", "inspect", "threads"].contains(&key.as_str()) {
                    return Err(config_error(format!("unknown config section `{key}`")));
                }
            }
            Ok(map.get(name).cloned().unwrap_or(Value::Object(Default::default())))
        }
        Some(_) => Err(config_error("config file must hold a table of sections")),
    }
}

/// File values overlaid by every flag given on the command line. Flags
/// serialize only when set, so the file wins for everything else.
pub fn merge<T: Serialize + DeserializeOwned>(cli: &T, file: Value) -> CmdResult<T> {
    let mut merged = match file {
        Value::Object(m) => m,
        _ => return Err(config_error("config section must be a table")),
    };
    if let Value::Object(flags) = serde_json::to_value(cli).map_err(config_error)? {
        merged.extend(flags);
    }
    serde_json::from_value(Value::Object(merged)).map_err(config_error)
}

pub fn is_false(b: &bool) -> bool {
    !*b
}

/// Flag, then config file, then environment variable.
pub fn corpus_root(given: Option<&PathBuf>, env: &str) -> Option<PathBuf> {
    given
        .cloned()
        .or_else(|| std::env::var_os(env).filter(|v| !v.is_empty()).map(PathBuf::from))
}
