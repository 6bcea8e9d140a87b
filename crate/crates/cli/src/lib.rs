//! Subcommand dispatch for the `lnpr` command line.
//!
//! Every run writes its data files and a `manifest.json` to the output
//! directory. Files are assembled in memory first, so a failed run leaves
//! only a manifest recording the failure.

mod pipelines;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use lnpr_core::config::{parse_config, Config};
use lnpr_core::Error;
use serde_json::{json, Value};

pub const MANIFEST_FILE: &str = "manifest.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    FpiTrace,
    FpiChar,
    CouplerSweep,
    Homodyne,
    OpoSpectrum,
    SpdcSpectrum,
    SqueezeBudget,
    FitDn,
    FitFpi,
}

impl Subcommand {
    pub const ALL: [Subcommand; 9] = [
        Subcommand::FpiTrace,
        Subcommand::FpiChar,
        Subcommand::CouplerSweep,
        Subcommand::Homodyne,
        Subcommand::OpoSpectrum,
        Subcommand::SpdcSpectrum,
        Subcommand::SqueezeBudget,
        Subcommand::FitDn,
        Subcommand::FitFpi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::FpiTrace => "fpi-trace",
            Subcommand::FpiChar => "fpi-char",
            Subcommand::CouplerSweep => "coupler-sweep",
            Subcommand::Homodyne => "homodyne",
            Subcommand::OpoSpectrum => "opo-spectrum",
            Subcommand::SpdcSpectrum => "spdc-spectrum",
            Subcommand::SqueezeBudget => "squeeze-budget",
            Subcommand::FitDn => "fit-dn",
            Subcommand::FitFpi => "fit-fpi",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flags {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Overrides `run.seed` from the configuration.
    pub seed: Option<u64>,
    pub strict: bool,
    pub quiet: bool,
}

/// Files produced by a pipeline, kept in memory until the run succeeds.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
    summary: serde_json::Map<String, Value>,
    warnings: Vec<String>,
}

impl Outputs {
    pub fn file(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn json(&mut self, name: impl Into<String>, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.file(name, text);
    }

    pub fn summary(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_owned(), value);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }
}

/// What a run produced; `exit_code` follows the 0/1/2 convention.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub manifest: Value,
}

pub(crate) struct Context {
    pub config: Config,
    pub seed: u64,
    pub provenance: Vec<String>,
}

fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

/// Parses the configuration, runs one pipeline and writes its outputs plus a
/// manifest into `flags.out`.
pub fn run_subcommand(command: Subcommand, flags: &Flags) -> RunReport {
    let started = Instant::now();
    let mut manifest = json!({
        "subcommand": command.name(),
        "config_path": flags.config.display().to_string(),
        "config_sha256": Value::Null,
        "seed": Value::Null,
        "versions": {
            "lnpr-core": lnpr_core::VERSION,
            "lnpr-cli": env!("CARGO_PKG_VERSION"),
        },
    });

    let result = (|| -> Result<(Outputs, Vec<String>), Error> {
        let parsed = parse_config(&flags.config, flags.strict)?;
        let config = parsed.config;
        let hash = config.hash()?;
        let seed = flags.seed.unwrap_or(config.run.seed);
        manifest["config_sha256"] = json!(hash);
        manifest["seed"] = json!(seed);
        let provenance = vec![
            format!("lnpr {} {}", command.name(), env!("CARGO_PKG_VERSION")),
            format!("config_sha256 = {hash}"),
            format!("seed = {seed}"),
            format!(
                "config = {}",
                serde_json::to_string(&config).expect("config serializes")
            ),
        ];
        let ctx = Context {
            config,
            seed,
            provenance,
        };
        let out = pipelines::run(command, &ctx)?;
        Ok((out, parsed.warnings))
    })();

    let (status, code, outputs, warnings, error) = match result {
        Ok((out, mut warnings)) => {
            warnings.extend(out.warnings.iter().cloned());
            ("ok", EXIT_OK, Some(out), warnings, None)
        }
        Err(e) => {
            let code = exit_code(&e);
            let status = if code == EXIT_NUMERICAL {
                "numerical_failure"
            } else {
                "validation_error"
            };
            (status, code, None, Vec::new(), Some(e.to_string()))
        }
    };

    let mut written = Vec::new();
    let mut code = code;
    let mut error = error;
    let mut status = status;
    if let Err(e) = fs::create_dir_all(&flags.out) {
        error = Some(format!("cannot create output directory: {e}"));
        code = EXIT_VALIDATION;
        status = "validation_error";
    } else if let Some(out) = &outputs {
        for (name, contents) in &out.files {
            let path = flags.out.join(name);
            if let Err(e) = fs::write(&path, contents) {
                error = Some(format!("cannot write {}: {e}", path.display()));
                code = EXIT_VALIDATION;
                status = "validation_error";
                break;
            }
            written.push(path);
        }
    }

    manifest["status"] = json!(status);
    manifest["error"] = json!(error);
    manifest["warnings"] = json!(warnings);
    manifest["outputs"] = json!(written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect::<Vec<_>>());
    manifest["summary"] = outputs
        .map(|o| Value::Object(o.summary))
        .unwrap_or(Value::Null);
    manifest["wall_time_s"] = json!(started.elapsed().as_secs_f64());
    let manifest_path = flags.out.join(MANIFEST_FILE);
    if flags.out.is_dir() {
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        if fs::write(&manifest_path, text).is_ok() {
            written.push(manifest_path);
        }
    }

    if !flags.quiet {
        for w in manifest["warnings"].as_array().into_iter().flatten() {
            eprintln!("warning: {}", w.as_str().unwrap_or_default());
        }
        match &manifest["error"] {
            Value::String(e) => eprintln!("error: {e}"),
            _ => eprintln!(
                "{}: wrote {} files to {}",
                command.name(),
                written.len(),
                flags.out.display()
            ),
        }
    }
    RunReport {
        exit_code: code,
        files: written,
        manifest,
    }
}

/// Manifest without its wall-clock field, for comparing repeated runs.
pub fn manifest_without_timing(manifest: &Value) -> Value {
    let mut m = manifest.clone();
    if let Some(obj) = m.as_object_mut() {
        obj.remove("wall_time_s");
    }
    m
}

/// File-name fragment for a number, e.g. 30 → "30", -5 → "m5", 0.25 → "0.25".
pub(crate) fn tag(value: f64) -> String {
    let s = format!("{value}");
    match s.strip_prefix('-') {
        Some(rest) => format!("m{rest}"),
        None => s,
    }
}

pub(crate) fn resolve(config: &Config, path: &Path) -> PathBuf {
    config.resolve(path)
}
