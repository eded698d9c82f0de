use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{metric_values, metric_names, z_score, ChanceDistribution, NullKind};
use crate::protocol::SessionMetrics;
use crate::{Error, Result};

const MAGIC_LINE: &str = "# mi-bci chance report v1";
const COLUMNS: &str = "null_model,metric,mean,std,runs";

/// Monte Carlo chance levels for one maze. Values are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct ChanceReport {
    pub maze_seed: u64,
    pub seed: u64,
    pub config_hash: String,
    pub stratified_priors: [f64; 3],
    pub distributions: Vec<ChanceDistribution>,
}

impl ChanceReport {
    pub fn get(&self, kind: NullKind, metric: &str) -> Option<&ChanceDistribution> {
        self.distributions
            .iter()
            .find(|d| d.null_model == kind && d.metric == metric)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = self.stratified_priors;
        let _ = writeln!(s, "{MAGIC_LINE}");
        let _ = writeln!(s, "# maze_seed={}", self.maze_seed);
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# config_hash={}", self.config_hash);
        let _ = writeln!(s, "# stratified_priors={},{},{}", p[0], p[1], p[2]);
        let _ = writeln!(s, "{COLUMNS}");
        for d in &self.distributions {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                d.null_model.name(),
                d.metric,
                d.mean,
                d.std,
                d.runs
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |no: usize, m: &str| Error::Format(format!("chance report line {no}: {m}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        if lines.next().map(|(_, l)| l) != Some(MAGIC_LINE) {
            return Err(Error::Format("not a chance report (missing header)".into()));
        }
        let (mut maze_seed, mut seed, mut hash, mut priors) = (None, None, None, None);
        let mut distributions = Vec::new();
        for (no, line) in lines {
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta.split_once('=').ok_or_else(|| bad(no, "bad header"))?;
                match k {
                    "maze_seed" => maze_seed = Some(v.parse().map_err(|_| bad(no, "bad seed"))?),
                    "seed" => seed = Some(v.parse().map_err(|_| bad(no, "bad seed"))?),
                    "config_hash" => hash = Some(v.to_string()),
                    "stratified_priors" => {
                        let ps: Vec<f64> = v
                            .split(',')
                            .map(|x| x.parse().map_err(|_| bad(no, "bad prior")))
                            .collect::<Result<_>>()?;
                        priors = Some(
                            <[f64; 3]>::try_from(ps).map_err(|_| bad(no, "need 3 priors"))?,
                        );
                    }
                    _ => {}
                }
                continue;
            }
            if line == COLUMNS || line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(no, "row needs 5 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(no, "bad number"));
            distributions.push(ChanceDistribution {
                null_model: NullKind::from_name(f[0]).ok_or_else(|| bad(no, "unknown null model"))?,
                metric: f[1].to_string(),
                mean: num(f[2])?,
                std: num(f[3])?,
                runs: f[4].parse().map_err(|_| bad(no, "bad run count"))?,
            });
        }
        let missing = |w: &str| Error::Format(format!("chance report lacks {w}"));
        Ok(ChanceReport {
            maze_seed: maze_seed.ok_or_else(|| missing("maze_seed"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            config_hash: hash.ok_or_else(|| missing("config_hash"))?,
            stratified_priors: priors.ok_or_else(|| missing("stratified_priors"))?,
            distributions,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub metric: String,
    pub null_model: NullKind,
    pub mean: f64,
    pub std: f64,
    pub observed: f64,
    pub z: f64,
    pub p: f64,
    pub marker: &'static str,
}

impl SignificanceRow {
    pub const HEADER: &'static str = "metric,null_model,mean,std,observed,z,p,marker";

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.3e},{}",
            self.metric,
            self.null_model.name(),
            self.mean,
            self.std,
            self.observed,
            self.z,
            self.p,
            self.marker
        )
    }
}

/// `**`/`*` against the stratified dummy and `++`/`+` against the uniform
/// one, at p < 0.01 / p < 0.05; `-` otherwise.
pub fn marker(kind: NullKind, p: f64) -> &'static str {
    match (kind, p) {
        (NullKind::Stratified, p) if p < 0.01 => "**",
        (NullKind::Stratified, p) if p < 0.05 => "*",
        (NullKind::Uniform, p) if p < 0.01 => "++",
        (NullKind::Uniform, p) if p < 0.05 => "+",
        _ => "-",
    }
}

/// Compares one session's metrics with the chance report of the same maze.
pub fn significance_table(
    observed: &SessionMetrics,
    maze_seed: u64,
    report: &ChanceReport,
) -> Result<Vec<SignificanceRow>> {
    if report.maze_seed != maze_seed {
        return Err(Error::InvalidInput(format!(
            "session used maze seed {maze_seed} but the chance report was built for {}",
            report.maze_seed
        )));
    }
    let mut rows = Vec::new();
    for (name, value) in metric_names().iter().zip(metric_values(observed)) {
        let Some(value) = value else { continue };
        for kind in [NullKind::Stratified, NullKind::Uniform] {
            let Some(d) = report.get(kind, name) else { continue };
            let z = z_score(value, d.mean, d.std);
            rows.push(SignificanceRow {
                metric: name.to_string(),
                null_model: kind,
                mean: d.mean,
                std: d.std,
                observed: value,
                z: z.z,
                p: z.p,
                marker: marker(kind, z.p),
            });
        }
    }
    Ok(rows)
}
