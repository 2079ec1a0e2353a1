use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use lssboost::genotype::{load_plink, load_text_matrix};
use lssboost::GenotypeMatrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(lssboost::Error),
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.class(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use lssboost::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::Config(_) => 2,
                E::Numeric(_) | E::Collinear(_) | E::Separation(_) => 4,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<lssboost::Error> for CliError {
    fn from(e: lssboost::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Core(lssboost::Error::Config(msg.into()))
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(lssboost::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Genotype input: a PLINK fileset or the text format.
#[derive(Args, Clone, Debug, Default)]
pub struct GenoArgs {
    /// PLINK .bed file (with --bim and --fam)
    #[arg(long, requires_all = ["bim", "fam"])]
    pub bed: Option<PathBuf>,
    #[arg(long)]
    pub bim: Option<PathBuf>,
    #[arg(long)]
    pub fam: Option<PathBuf>,
    /// PLINK fileset prefix; shorthand for --bed/--bim/--fam
    #[arg(long, conflicts_with_all = ["bed", "bim", "fam"])]
    pub bfile: Option<PathBuf>,
    /// Tab-separated genotype text file
    #[arg(long, alias = "geno", conflicts_with_all = ["bed", "bfile"])]
    pub text_geno: Option<PathBuf>,
}

impl GenoArgs {
    pub fn is_set(&self) -> bool {
        self.bed.is_some() || self.bfile.is_some() || self.text_geno.is_some()
    }

    pub fn describe(&self) -> Value {
        serde_json::json!({
            "bed": self.bed, "bim": self.bim, "fam": self.fam,
            "bfile": self.bfile, "text_geno": self.text_geno,
        })
    }

    pub fn load(&self) -> CliResult<GenotypeMatrix> {
        if let Some(t) = &self.text_geno {
            return Ok(load_text_matrix(t)?);
        }
        if let Some(prefix) = &self.bfile {
            let with = |ext: &str| PathBuf::from(format!("{}.{ext}", prefix.display()));
            return Ok(load_plink(with("bed"), with("bim"), with("fam"))?);
        }
        match (&self.bed, &self.bim, &self.fam) {
            (Some(b), Some(m), Some(f)) => Ok(load_plink(b, m, f)?),
            _ => usage("genotypes required: --bed/--bim/--fam, --bfile or --text-geno"),
        }
    }
}

/// Overlays the keys of `file` onto the serialized defaults; unknown keys are
/// rejected so typos in a config file do not pass silently.
pub fn merge_config<T>(defaults: &T, file: Option<&Path>) -> CliResult<T>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let mut base = serde_json::to_value(defaults).map_err(lssboost::Error::from)?;
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let over: Value = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let (Value::Object(b), Value::Object(o)) = (&mut base, over) else {
            return Err(config_err(format!("{}: config must be a JSON object", path.display())));
        };
        for (k, v) in o {
            if !b.contains_key(&k) {
                return Err(config_err(format!("{}: unknown config key {k}", path.display())));
            }
            b.insert(k, v);
        }
    }
    serde_json::from_value(base).map_err(|e| config_err(format!("config: {e}")))
}

/// Version and config hash carried in every table header.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub subcommand: String,
    pub config: Value,
    pub hash: String,
}

impl Provenance {
    pub fn new(subcommand: &str, config: &impl Serialize) -> CliResult<Self> {
        let config = serde_json::to_value(config).map_err(lssboost::Error::from)?;
        // serde_json maps are sorted, so this text is canonical.
        let text = serde_json::to_string(&config).map_err(lssboost::Error::from)?;
        let hash = hex::encode(Sha256::digest(format!("{subcommand}\n{text}").as_bytes()));
        Ok(Provenance {
            subcommand: subcommand.to_string(),
            config,
            hash,
        })
    }

    pub fn comment(&self) -> String {
        format!("lssboost {VERSION} config={}", self.hash)
    }

    /// Writes `<name>` in `out` echoing the config and inputs for replay.
    pub fn write_run_json(&self, out: &Path, name: &str, inputs: Value) -> CliResult<()> {
        let echo = serde_json::json!({
            "tool": "lssboost",
            "version": VERSION,
            "subcommand": self.subcommand,
            "config_sha256": self.hash,
            "config": self.config,
            "inputs": inputs,
        });
        write_string(&out.join(name), &serde_json::to_string_pretty(&echo).map_err(lssboost::Error::from)?)
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_string(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// A tab-separated table with the provenance comment as its first line.
pub fn write_table(path: &Path, prov: &Provenance, header: &str, rows: &[String]) -> CliResult<()> {
    let mut s = format!("# {}\n{header}\n", prov.comment());
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    write_string(path, &s)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(lssboost::Error::from)?;
    write_string(path, &text)
}

/// Comma-separated `low:high` pairs.
#[derive(Clone, Debug, Serialize)]
pub struct Pairs(pub Vec<(f64, f64)>);

pub fn parse_pairs(s: &str) -> Result<Pairs, String> {
    split_pairs(s).map(Pairs)
}

fn split_pairs(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (a, b) = t.split_once(':').ok_or_else(|| format!("'{t}' is not of the form low:high"))?;
            let a = a.trim().parse::<f64>().map_err(|e| format!("'{a}': {e}"))?;
            let b = b.trim().parse::<f64>().map_err(|e| format!("'{b}': {e}"))?;
            Ok((a, b))
        })
        .collect()
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match split_pairs(s)?.as_slice() {
        [p] => Ok(*p),
        _ => Err(format!("expected a single low:high pair, got '{s}'")),
    }
}

/// Reads `id<TAB>weight` rows (header required, `#` lines skipped).
pub fn read_weights(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let (h, rows) = lssboost::table::read_table(path)?;
    let id = lssboost::table::column(&h, "id", path)?;
    let w = lssboost::table::column(&h, "weight", path)?;
    let mut out = BTreeMap::new();
    for r in rows {
        let v = lssboost::table::parse_f64(&r[w], path)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(lssboost::Error::Validation(format!("{}: weight {v} for {} is not positive", path.display(), r[id])).into());
        }
        out.insert(r[id].clone(), v);
    }
    Ok(out)
}
