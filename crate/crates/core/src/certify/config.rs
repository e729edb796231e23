//! JSON experiment configs, the experiment runner and artifact emission.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    certify_corollary_m, certify_graded, certify_holder, symbol_gallery, CertificationReport,
    CertifyParams, GradingWeight, Verdict,
};
use crate::error::{Error, Result};
use crate::metrics::hypoelliptic_gallery;
use crate::symbol::{symbol_from_expression, Symbol, SymbolTable};
use crate::torus::TorusGrid;

pub const CSV_HEADER: [&str; 8] =
    ["experiment_id", "l", "probe_seed", "ratio", "besov_in", "besov_out", "slope", "verdict"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolSource {
    Gallery(String),
    Expression(String),
    /// CSV with columns `[node,] xi1..xin, re, im`; without `node` the table
    /// is `x`-independent.
    Table(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Holder,
    Graded,
    Corollary,
}

fn default_l_min() -> u32 {
    2
}

fn default_probes() -> u32 {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    pub kind: ExperimentKind,
    pub symbol: SymbolSource,
    pub s: f64,
    #[serde(default = "default_l_min")]
    pub l_min: u32,
    pub l_max: u32,
    #[serde(default = "default_probes")]
    pub probes: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Envelope parameter for attached seminorms; gallery symbols supply
    /// their own.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub eps0: Option<f64>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub ell: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
}

fn missing_fields(v: &Value) -> Vec<String> {
    let mut missing = Vec::new();
    let Some(obj) = v.as_object() else {
        return vec!["<root object>".into()];
    };
    if !obj.contains_key("grid") {
        missing.push("grid".into());
    } else if let Some(g) = obj["grid"].as_object() {
        for k in ["dim", "points"] {
            if !g.contains_key(k) {
                missing.push(format!("grid.{k}"));
            }
        }
    }
    if let Some(exps) = obj.get("experiments").and_then(Value::as_array) {
        for (i, e) in exps.iter().enumerate() {
            let Some(e) = e.as_object() else { continue };
            let mut need = vec!["id", "kind", "symbol", "s", "l_max"];
            match e.get("kind").and_then(Value::as_str) {
                Some("graded") => {
                    need.push("beta");
                    if !e.contains_key("eps0") && !e.contains_key("model") {
                        missing.push(format!("experiments[{i}].eps0|model"));
                    }
                }
                Some("corollary") => need.extend(["m", "rho", "delta", "ell"]),
                _ => {}
            }
            for k in need {
                if !e.contains_key(k) {
                    missing.push(format!("experiments[{i}].{k}"));
                }
            }
        }
    }
    missing
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

/// Parses a config, enumerating every missing required field at once.
pub fn parse_config(src: &str) -> Result<Config> {
    let value: Value = serde_json::from_str(src).map_err(parse_error)?;
    let missing = missing_fields(&value);
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing fields: {}", missing.join(", "))));
    }
    let config: Config = serde_json::from_str(src).map_err(parse_error)?;
    let mut seen = BTreeSet::new();
    for e in &config.experiments {
        if !seen.insert(e.id.as_str()) {
            return Err(Error::Config(format!("duplicate experiment id '{}'", e.id)));
        }
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<Config> {
    parse_config(&fs::read_to_string(path)?)
}

fn read_table(path: &Path, grid: TorusGrid) -> Result<Symbol> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let dim = grid.dim();
    let xi_cols: Vec<usize> = (1..=dim)
        .map(|d| {
            col(&format!("xi{d}"))
                .or_else(|| if dim == 1 { col("xi") } else { None })
                .ok_or_else(|| Error::Config(format!("table {} lacks column xi{d}", path.display())))
        })
        .collect::<Result<_>>()?;
    let (re, im) = match (col("re"), col("im")) {
        (Some(r), Some(i)) => (r, i),
        _ => return Err(Error::Config(format!("table {} needs columns re, im", path.display()))),
    };
    let node_col = col("node");
    let mut cells: HashMap<(usize, Vec<i64>), Complex64> = HashMap::new();
    let (mut lo, mut hi) = (vec![i64::MAX; dim], vec![i64::MIN; dim]);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Parse {
            line: i + 2,
            column: 0,
            message: format!("bad {what} in {}", path.display()),
        };
        let node = match node_col {
            Some(c) => rec[c].trim().parse::<usize>().map_err(|_| bad("node"))?,
            None => 0,
        };
        if node >= grid.len() {
            return Err(bad("node"));
        }
        let xi: Vec<i64> = xi_cols
            .iter()
            .map(|&c| rec[c].trim().parse::<i64>().map_err(|_| bad("frequency")))
            .collect::<Result<_>>()?;
        for d in 0..dim {
            lo[d] = lo[d].min(xi[d]);
            hi[d] = hi[d].max(xi[d]);
        }
        let v = Complex64::new(
            rec[re].trim().parse().map_err(|_| bad("re"))?,
            rec[im].trim().parse().map_err(|_| bad("im"))?,
        );
        cells.insert((node, xi), v);
    }
    if cells.is_empty() {
        return Err(Error::Config(format!("table {} is empty", path.display())));
    }
    let mut absent = None;
    let table = SymbolTable::from_fn(grid, lo, hi, node_col.is_none(), |row, xi| {
        cells.get(&(row, xi.to_vec())).copied().unwrap_or_else(|| {
            absent.get_or_insert((row, xi.to_vec()));
            Complex64::default()
        })
    })?;
    if let Some((row, xi)) = absent {
        return Err(Error::Config(format!(
            "table {} has no entry for node {row}, xi {xi:?}",
            path.display()
        )));
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Symbol::from_table(table, name))
}

fn resolve_symbol(src: &SymbolSource, grid: TorusGrid, base: &Path) -> Result<(Symbol, Option<f64>)> {
    match src {
        SymbolSource::Gallery(name) => {
            let e = symbol_gallery(name, grid.dim())?;
            Ok((e.symbol, e.epsilon))
        }
        SymbolSource::Expression(text) => Ok((symbol_from_expression(text, grid.dim(), text.clone())?, None)),
        SymbolSource::Table(p) => {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            Ok((read_table(&path, grid)?, None))
        }
    }
}

/// FNV-1a, so that an experiment's seed does not depend on list order.
fn id_hash(id: &str) -> u64 {
    id.bytes()
        .fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn run_one(e: &ExperimentSpec, grid: TorusGrid, seed: u64, base: &Path) -> Result<CertificationReport> {
    let (sigma, gallery_eps) = resolve_symbol(&e.symbol, grid, base)?;
    let mut params = CertifyParams::new(grid, e.s, e.l_max, e.probes, e.seed.unwrap_or(seed ^ id_hash(&e.id)));
    params.l_min = e.l_min;
    match e.kind {
        ExperimentKind::Holder => certify_holder(&e.id, &sigma, e.epsilon.or(gallery_eps), &params),
        ExperimentKind::Graded => {
            let beta = e.beta.unwrap_or_default();
            let (eps0, weight) = match &e.model {
                Some(name) => {
                    let model = hypoelliptic_gallery(name)?;
                    (e.eps0.unwrap_or(model.eps0_f64()), GradingWeight::Model(model))
                }
                None => (e.eps0.unwrap_or_default(), GradingWeight::Bracket),
            };
            certify_graded(&e.id, &sigma, beta, eps0, weight, &params)
        }
        ExperimentKind::Corollary => certify_corollary_m(
            &e.id,
            &sigma,
            e.m.unwrap_or_default(),
            e.rho.unwrap_or(1.0),
            e.delta.unwrap_or_default(),
            e.ell.unwrap_or_default(),
            &params,
        ),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    /// Sorted by experiment id.
    pub reports: Vec<CertificationReport>,
    pub out_dir: Option<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.reports.iter().any(|r| r.verdict == Verdict::SuspectGrowth) {
            2
        } else {
            0
        }
    }
}

/// Runs every experiment of the config at `path` and writes artifacts when an
/// output directory is configured or given.
pub fn run_config(path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let config = load_config(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let grid = TorusGrid::new(config.grid.dim, config.grid.points)?;
    let seed = opts.seed.unwrap_or(config.seed);
    let run = || -> Result<Vec<CertificationReport>> {
        config
            .experiments
            .par_iter()
            .map(|e| run_one(e, grid, seed, &base))
            .collect()
    };
    let mut reports = match opts.jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    reports.sort_by(|a, b| a.experiment_id.cmp(&b.experiment_id));
    let out_dir = opts
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(|d| if d.is_absolute() { d.clone() } else { base.join(d) }));
    if let Some(dir) = &out_dir {
        write_artifacts(&reports, dir)?;
    }
    Ok(RunOutcome { reports, out_dir })
}

pub fn results_csv(reports: &[CertificationReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in reports {
        for b in &r.bands {
            for p in &b.probes {
                w.write_record([
                    r.experiment_id.clone(),
                    b.l.to_string(),
                    p.seed.to_string(),
                    p.ratio.to_string(),
                    p.besov_in.to_string(),
                    p.besov_out.to_string(),
                    r.slope.to_string(),
                    r.verdict.as_str().to_string(),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `results.csv`, `reports.json` and one `plot_<id>.csv` (`l, log2_ratio`)
/// per experiment.
pub fn write_artifacts(reports: &[CertificationReport], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), results_csv(reports)?)?;
    fs::write(dir.join("reports.json"), serde_json::to_vec_pretty(reports)?)?;
    for r in reports {
        let mut w = csv::Writer::from_path(dir.join(format!("plot_{}.csv", sanitize(&r.experiment_id))))?;
        w.write_record(["l", "log2_ratio"])?;
        for b in &r.bands {
            w.write_record([b.l.to_string(), b.ratio.log2().to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"{
        "grid": {"dim": 1, "points": 256},
        "seed": 4,
        "experiments": [
            {"id": "b", "kind": "holder", "symbol": {"gallery": "identity"}, "s": 0.5, "l_max": 6, "probes": 2},
            {"id": "a", "kind": "holder", "symbol": {"expression": "angle(xi1)^(-0.5)"}, "s": 0.5, "l_max": 6, "probes": 2}
        ]
    }"#;

    #[test]
    fn missing_fields_are_enumerated() {
        let src = r#"{"grid": {"dim": 1}, "experiments": [{"id": "x", "kind": "corollary", "symbol": {"gallery": "identity"}}]}"#;
        match parse_config(src) {
            Err(Error::Config(msg)) => {
                for f in ["grid.points", "experiments[0].s", "experiments[0].l_max", "experiments[0].rho"] {
                    assert!(msg.contains(f), "{msg}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_location() {
        match parse_config("{\n  \"grid\": ,\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config(r#"{"grid": {"dim": 1, "points": 8}, "bogus": 1}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn run_is_sorted_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, BASIC).unwrap();
        let out = dir.path().join("out");
        let opts = RunOptions { out: Some(out.clone()), ..Default::default() };
        let first = run_config(&path, &opts).unwrap();
        let ids: Vec<&str> = first.reports.iter().map(|r| r.experiment_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(first.exit_code(), 0);
        let csv1 = fs::read(out.join("results.csv")).unwrap();
        let second = run_config(&path, &RunOptions { jobs: Some(1), ..opts }).unwrap();
        assert_eq!(csv1, fs::read(out.join("results.csv")).unwrap());
        assert_eq!(first.reports.len(), second.reports.len());
        assert!(out.join("plot_a.csv").exists() && out.join("reports.json").exists());
    }

    #[test]
    fn table_symbols_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("xi,re,im\n");
        for k in -40..=40 {
            text.push_str(&format!("{k},{},0\n", 1.0 / (1.0 + (k * k) as f64).sqrt()));
        }
        fs::write(dir.path().join("t.csv"), text).unwrap();
        let grid = TorusGrid::new(1, 64).unwrap();
        let (s, _) = resolve_symbol(&SymbolSource::Table("t.csv".into()), grid, dir.path()).unwrap();
        assert!(s.is_x_independent());
        assert!((s.at_freq(&[3]).unwrap().re - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        fs::write(dir.path().join("gap.csv"), "xi,re,im\n0,1,0\n2,1,0\n").unwrap();
        assert!(resolve_symbol(&SymbolSource::Table("gap.csv".into()), grid, dir.path()).is_err());
    }

    #[test]
    fn empty_experiment_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        fs::write(&path, r#"{"grid": {"dim": 1, "points": 64}, "experiments": []}"#).unwrap();
        let r = run_config(&path, &RunOptions::default()).unwrap();
        assert!(r.reports.is_empty() && r.exit_code() == 0);
    }
}
