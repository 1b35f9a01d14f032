//! Flat `key = value` config files and resolution of run settings.
//!
//! Keys use the long flag names without the leading dashes. A flag given on
//! the command line always wins over the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use slrr::affinity::{AffinityKind, Side};
use slrr::{Layout, PipelineConfig, RankSpec, RecoveryMethod};

use crate::args::{InputArgs, ModelArgs};

const KNOWN_KEYS: &[&str] = &[
    "input",
    "labels",
    "layout",
    "out-dir",
    "corrupt-ratio",
    "unit-scale",
    "trials",
    "preset",
    "recovery",
    "lambda",
    "alpha",
    "rank",
    "k",
    "seed",
    "affine-ones",
    "rpca-lambda",
    "affinity",
    "side",
    "center",
    "lambda-grid",
    "alpha-grid",
    "rank-grid",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| slrr::Error::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| slrr::Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
            let key = key.trim().trim_start_matches("--").to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(bad(format!("unknown key {key:?}")).into());
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile {
            path: Some(path.to_path_buf()),
            values,
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn typed<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                parse(v).with_context(|| {
                    let file = self.path.as_deref().unwrap_or(Path::new("<config>"));
                    format!("{}: key {key}", file.display())
                })
            })
            .transpose()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.typed(key, |v| v.parse::<T>().map_err(|e| usage(format!("bad value {v:?}: {e}"))))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.typed(key, parse_bool)?.unwrap_or(false))
    }
}

/// Wrap a message as a usage error so it maps to the usage exit code.
pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    slrr::Error::InvalidArgument(msg.into()).into()
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(usage(format!("expected a boolean, got {v:?}"))),
    }
}

pub fn parse_recovery(v: &str) -> Result<RecoveryMethod> {
    match v {
        "pca" => Ok(RecoveryMethod::Pca),
        "rpca" => Ok(RecoveryMethod::Rpca),
        "rp" | "random-projection" => Ok(RecoveryMethod::RandomProjection),
        "identity" | "none" => Ok(RecoveryMethod::Identity),
        _ => Err(usage(format!("unknown recovery {v:?}; use pca, rpca, rp or identity"))),
    }
}

pub fn parse_layout(v: &str) -> Result<Layout> {
    match v {
        "columns" | "samples-as-columns" => Ok(Layout::SamplesAsColumns),
        "rows" | "samples-as-rows" => Ok(Layout::SamplesAsRows),
        _ => Err(usage(format!("unknown layout {v:?}; use columns or rows"))),
    }
}

pub fn parse_affinity(v: &str) -> Result<AffinityKind> {
    match v {
        "cosine" => Ok(AffinityKind::Cosine),
        "raw-inner" => Ok(AffinityKind::RawInner),
        "abs-sum" => Ok(AffinityKind::AbsSum),
        _ => Err(usage(format!("unknown affinity {v:?}; use cosine, raw-inner or abs-sum"))),
    }
}

pub fn parse_side(v: &str) -> Result<Side> {
    match v {
        "rows" | "rows-of-m" => Ok(Side::RowsOfM),
        "cols" | "cols-of-n" => Ok(Side::ColsOfN),
        _ => Err(usage(format!("unknown side {v:?}; use rows or cols"))),
    }
}

pub fn parse_rank(v: &str) -> Result<RankSpec> {
    Ok(v.parse::<RankSpec>()?)
}

/// Comma-separated list; empty entries are rejected.
pub fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .map(|s| {
            if s.is_empty() {
                Err(usage(format!("empty entry in list {v:?}")))
            } else {
                item(s)
            }
        })
        .collect()
}

/// Rank grid entries may be `none` for methods that take no rank.
pub fn parse_rank_entry(v: &str) -> Result<Option<RankSpec>> {
    if v == "none" || v == "-" {
        Ok(None)
    } else {
        parse_rank(v).map(Some)
    }
}

fn parse_f64(v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| usage(format!("expected a number, got {v:?}")))
}

fn parse_u32(v: &str) -> Result<u32> {
    v.parse::<u32>().map_err(|_| usage(format!("expected a positive integer, got {v:?}")))
}

/// Where the data comes from and how it is prepared.
#[derive(Debug, Clone, Serialize)]
pub struct InputSettings {
    pub input: PathBuf,
    pub labels: Option<PathBuf>,
    pub layout: Layout,
    pub unit_scale: bool,
    pub corrupt_ratio: Option<f64>,
    pub out_dir: PathBuf,
}

pub fn resolve_input(args: &InputArgs, file: &ConfigFile) -> Result<InputSettings> {
    let input = match &args.input {
        Some(p) => p.clone(),
        None => file
            .get::<PathBuf>("input")?
            .ok_or_else(|| usage("no input matrix; pass --input or set input in the config file"))?,
    };
    let layout = match &args.layout {
        Some(v) => parse_layout(v)?,
        None => file.typed("layout", parse_layout)?.unwrap_or_default(),
    };
    let corrupt_ratio = match args.corrupt_ratio {
        Some(r) => Some(r),
        None => file.typed("corrupt-ratio", parse_f64)?,
    };
    Ok(InputSettings {
        input,
        labels: args.labels.clone().or(file.get("labels")?),
        layout,
        unit_scale: args.unit_scale || file.flag("unit-scale")?,
        corrupt_ratio,
        out_dir: args
            .out_dir
            .clone()
            .or(file.get("out-dir")?)
            .unwrap_or_else(|| PathBuf::from("slrr-out")),
    })
}

/// Build the pipeline configuration: preset defaults, then the config file,
/// then command-line flags. `inferred_k` fills in `k` when neither source
/// sets it (typically the number of ground-truth clusters).
pub fn resolve_model(
    args: &ModelArgs,
    file: &ConfigFile,
    inferred_k: Option<usize>,
) -> Result<PipelineConfig> {
    let k = match args.k.or(file.get("k")?).or(inferred_k) {
        Some(k) => k,
        None => bail!(usage("cluster count unknown; pass --k or --labels")),
    };
    let preset = args
        .preset
        .clone()
        .or(file.get("preset")?)
        .unwrap_or_else(|| "motion".to_string());
    let mut cfg = PipelineConfig::preset(&preset, k).ok_or_else(|| {
        usage(format!(
            "unknown preset {preset:?}; use motion, motion-pca, face-pca, face-rp or face-rpca"
        ))
    })?;

    macro_rules! pick {
        ($cli:expr, $key:literal, $parse:expr) => {
            match $cli {
                Some(v) => Some($parse(v)?),
                None => file.typed($key, $parse)?,
            }
        };
    }

    if let Some(m) = pick!(args.recovery.as_deref(), "recovery", parse_recovery) {
        cfg.recovery = m;
    }
    if let Some(r) = pick!(args.rank.as_deref(), "rank", parse_rank_entry) {
        cfg.rank = r;
    }
    if let Some(l) = args.lambda.or(file.typed("lambda", parse_f64)?) {
        cfg.lambda = l;
    }
    if let Some(a) = args.alpha.or(file.typed("alpha", parse_u32)?) {
        cfg.alpha = a;
    }
    if let Some(s) = args.seed.or(file.get("seed")?) {
        cfg.seed = s;
    }
    if let Some(l) = args.rpca_lambda.or(file.typed("rpca-lambda", parse_f64)?) {
        cfg.rpca.lambda = Some(l);
    }
    if let Some(kind) = pick!(args.affinity.as_deref(), "affinity", parse_affinity) {
        cfg.affinity = kind;
    }
    if let Some(side) = pick!(args.side.as_deref(), "side", parse_side) {
        cfg.side = side;
    }
    cfg.affine_ones |= args.affine_ones || file.flag("affine-ones")?;
    cfg.pca_center |= args.center || file.flag("center")?;
    Ok(cfg)
}

/// Sweep grids, defaulting to the single base value on each axis.
pub struct Grids {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<u32>,
    pub ranks: Vec<Option<RankSpec>>,
}

pub fn resolve_grids(
    lambda: Option<&str>,
    alpha: Option<&str>,
    rank: Option<&str>,
    file: &ConfigFile,
    base: &PipelineConfig,
) -> Result<Grids> {
    let text = |cli: Option<&str>, key: &str| -> Option<String> {
        cli.map(str::to_string).or_else(|| file.raw(key).map(str::to_string))
    };
    let lambdas = match text(lambda, "lambda-grid") {
        Some(v) => parse_list(&v, parse_f64)?,
        None => vec![base.lambda],
    };
    let alphas = match text(alpha, "alpha-grid") {
        Some(v) => parse_list(&v, parse_u32)?,
        None => vec![base.alpha],
    };
    let ranks = match text(rank, "rank-grid") {
        Some(v) => parse_list(&v, parse_rank_entry)?,
        None => vec![base.rank],
    };
    if lambdas.is_empty() || alphas.is_empty() || ranks.is_empty() {
        return Err(anyhow!(usage("sweep grids must be nonempty")));
    }
    Ok(Grids {
        lambdas,
        alphas,
        ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> ConfigFile {
        ConfigFile::parse(text, Path::new("run.conf")).unwrap()
    }

    #[test]
    fn parses_keys_and_comments() {
        let f = file("# sweep\nlambda = 0.5\n--alpha=3\n\nrecovery = rp\n");
        assert_eq!(f.get::<f64>("lambda").unwrap(), Some(0.5));
        assert_eq!(f.raw("alpha"), Some("3"));
        assert_eq!(f.typed("recovery", parse_recovery).unwrap(), Some(RecoveryMethod::RandomProjection));
    }

    #[test]
    fn rejects_unknown_key_with_line() {
        let err = ConfigFile::parse("lambda = 1\nlamda = 2\n", Path::new("x.conf")).unwrap_err();
        assert!(err.to_string().contains("x.conf:2"), "{err}");
    }

    #[test]
    fn cli_overrides_file() {
        let f = file("lambda = 0.5\nalpha = 3\nk = 4\n");
        let args = ModelArgs {
            lambda: Some(2.0),
            ..ModelArgs::default()
        };
        let cfg = resolve_model(&args, &f, None).unwrap();
        assert_eq!((cfg.lambda, cfg.alpha, cfg.k), (2.0, 3, 4));
    }

    #[test]
    fn k_falls_back_to_labels() {
        let cfg = resolve_model(&ModelArgs::default(), &ConfigFile::default(), Some(6)).unwrap();
        assert_eq!(cfg.k, 6);
        assert!(resolve_model(&ModelArgs::default(), &ConfigFile::default(), None).is_err());
    }

    #[test]
    fn grids_default_to_base() {
        let base = PipelineConfig::face_pca(3);
        let g = resolve_grids(None, Some("1,2"), Some("10n,none"), &ConfigFile::default(), &base).unwrap();
        assert_eq!(g.lambdas, vec![base.lambda]);
        assert_eq!(g.alphas, vec![1, 2]);
        assert_eq!(g.ranks, vec![Some(RankSpec::PerCluster(10)), None]);
        assert!(resolve_grids(Some("1,,2"), None, None, &ConfigFile::default(), &base).is_err());
    }

    #[test]
    fn booleans() {
        assert!(parse_bool("yes").unwrap());
        assert!(!parse_bool("0").unwrap());
        assert!(parse_bool("maybe").is_err());
    }
}
