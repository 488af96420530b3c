//! Scenario files: a versioned TOML schema with unknown keys rejected.
//!
//! ```toml
//! schema_version = 1
//! name = "sweep"
//!
//! [library]
//! files = 100
//! packets = 50
//! delta = 0.2
//! matrix = { kind = "partners", per_packet = 4.0 }
//!
//! [demand]
//! receivers = 10
//! zipf_alpha = 0.8
//!
//! [sweep]
//! cache_sizes = [0, 1, 2, 5, 10]
//! schemes = ["LC_U", "LC_NM", "RAP_CM", "CA_RAP_CM"]
//!
//! [sampling]
//! cache_draws = 20
//! demand_draws = 50
//! seed = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::SchemeId;
use crate::bound::{RhoMethod, Strategy};
use crate::demand::{zipf, DemandDistribution};
use crate::library::{LibraryConfig, MatchMatrix};
use crate::packet::{PacketId, ReceiverSet};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub library: LibrarySection,
    pub demand: DemandSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned: Option<PinnedSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibrarySection {
    pub files: usize,
    pub packets: usize,
    pub delta: f64,
    #[serde(default)]
    pub matrix: MatrixSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    #[default]
    Identity,
    /// Every off-diagonal entry equal.
    Uniform { off_diagonal: f64 },
    /// Uniform off-diagonal entries giving `per_packet` partners per packet.
    Partners { per_packet: f64 },
    Rows { rows: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub receivers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zipf_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub cache_sizes: Vec<f64>,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<SchemeId>,
    /// Candidate thresholds for the correlation-aware scheme; defaults to the
    /// library threshold alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Vec<f64>>,
}

fn all_schemes() -> Vec<SchemeId> {
    SchemeId::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub cache_draws: usize,
    pub demand_draws: usize,
    pub seed: u64,
    /// Replay every codeword through the decoder.
    pub check_decoding: bool,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            cache_draws: 20,
            demand_draws: 50,
            seed: 0,
            check_decoding: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub strategy: Strategy,
    pub rho: RhoMethod,
}

/// Fixed caches and demand, one-based `"(f,b)"` packets and file numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnedSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caches: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Keep per-realization outcomes in the result record.
    pub traces: bool,
}

fn invalid<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T> {
    Err(Error::scenario(path, message))
}

/// Parses `"(f,b)"` with one-based indices.
pub fn parse_packet(text: &str) -> Option<PacketId> {
    let inner = text.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (f, b) = inner.split_once(',')?;
    PacketId::from_one_based(f.trim().parse().ok()?, b.trim().parse().ok()?)
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::scenario(if path == "." { String::new() } else { path }, e.into_inner().message().trim().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios always serialize")
    }

    /// SHA-256 of the canonical JSON form, excluding output settings.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputSection::default();
        let json = serde_json::to_vec(&canonical).expect("scenarios always serialize");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            );
        }
        let lib = &self.library;
        if lib.files == 0 {
            return invalid("library.files", "must be at least 1");
        }
        if lib.packets == 0 {
            return invalid("library.packets", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&lib.delta) {
            return invalid("library.delta", format!("{} is outside [0, 1]", lib.delta));
        }
        self.library_config()?;

        let n = self.demand.receivers;
        if n == 0 || n > ReceiverSet::CAPACITY {
            return invalid(
                "demand.receivers",
                format!("{n} is outside 1..={}", ReceiverSet::CAPACITY),
            );
        }
        self.demand_distribution()?;

        for (i, &m) in self.sweep.cache_sizes.iter().enumerate() {
            if m.is_nan() || m < 0.0 || m > lib.files as f64 {
                return invalid(
                    format!("sweep.cache_sizes[{i}]"),
                    format!("{m} is outside [0, {}]", lib.files),
                );
            }
        }
        if self.sweep.schemes.is_empty() {
            return invalid("sweep.schemes", "no scheme selected");
        }
        for (i, s) in self.sweep.schemes.iter().enumerate() {
            if self.sweep.schemes[..i].contains(s) {
                return invalid(format!("sweep.schemes[{i}]"), format!("{s} listed twice"));
            }
        }
        if let Some(grid) = &self.sweep.delta_grid {
            if grid.is_empty() {
                return invalid("sweep.delta_grid", "empty grid");
            }
            for (i, d) in grid.iter().enumerate() {
                if !(0.0..=1.0).contains(d) {
                    return invalid(format!("sweep.delta_grid[{i}]"), format!("{d} is outside [0, 1]"));
                }
            }
        }
        if self.sampling.cache_draws == 0 {
            return invalid("sampling.cache_draws", "must be at least 1");
        }
        if self.sampling.demand_draws == 0 {
            return invalid("sampling.demand_draws", "must be at least 1");
        }
        if let RhoMethod::MonteCarlo { samples: 0, .. } = self.optimizer.rho {
            return invalid("optimizer.rho.monte_carlo.samples", "must be at least 1");
        }
        if let Some(pinned) = &self.pinned {
            if let Some(caches) = &pinned.caches {
                if caches.len() != n {
                    return invalid(
                        "pinned.caches",
                        format!("{} caches for {n} receivers", caches.len()),
                    );
                }
            }
            self.pinned_caches()?;
            if let Some(demand) = &pinned.demand {
                if demand.len() != n {
                    return invalid(
                        "pinned.demand",
                        format!("{} requests for {n} receivers", demand.len()),
                    );
                }
                for (i, &f) in demand.iter().enumerate() {
                    if f == 0 || f > lib.files {
                        return invalid(
                            format!("pinned.demand[{i}]"),
                            format!("file {f} is outside 1..={}", lib.files),
                        );
                    }
                }
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> Result<MatchMatrix> {
        let m = self.library.files;
        Ok(match &self.library.matrix {
            MatrixSpec::Identity => MatchMatrix::identity(m),
            MatrixSpec::Uniform { off_diagonal } => MatchMatrix::uniform(m, *off_diagonal),
            MatrixSpec::Partners { per_packet } => {
                if m < 2 {
                    MatchMatrix::identity(m)
                } else {
                    MatchMatrix::uniform(m, per_packet / (m - 1) as f64)
                }
            }
            MatrixSpec::Rows { rows } => MatchMatrix::from_rows(rows.clone())
                .map_err(|e| Error::scenario("library.matrix.rows", e.to_string()))?,
        })
    }

    pub fn library_config(&self) -> Result<LibraryConfig> {
        let lib = &self.library;
        let matrix = self.matrix()?;
        if matrix.files() != lib.files {
            return invalid(
                "library.matrix",
                format!("{0}x{0} matrix for {1} files", matrix.files(), lib.files),
            );
        }
        LibraryConfig::new(lib.files, lib.packets, lib.delta, matrix)
            .map_err(|e| Error::scenario("library.matrix", e.to_string()))
    }

    pub fn demand_distribution(&self) -> Result<DemandDistribution> {
        let m = self.library.files;
        match (&self.demand.zipf_alpha, &self.demand.q) {
            (Some(alpha), None) => {
                zipf(m, *alpha).map_err(|e| Error::scenario("demand.zipf_alpha", e.to_string()))
            }
            (None, Some(q)) => {
                if q.len() != m {
                    return invalid("demand.q", format!("{} probabilities for {m} files", q.len()));
                }
                DemandDistribution::new(q.clone()).map_err(|e| Error::scenario("demand.q", e.to_string()))
            }
            (None, None) => invalid("demand", "one of zipf_alpha or q is required"),
            (Some(_), Some(_)) => invalid("demand", "zipf_alpha and q are mutually exclusive"),
        }
    }

    /// Zero-based pinned cache contents, if any.
    pub fn pinned_caches(&self) -> Result<Option<Vec<Vec<PacketId>>>> {
        let Some(caches) = self.pinned.as_ref().and_then(|p| p.caches.as_ref()) else {
            return Ok(None);
        };
        let mut out = Vec::with_capacity(caches.len());
        for (u, list) in caches.iter().enumerate() {
            let mut packets = Vec::with_capacity(list.len());
            for (i, text) in list.iter().enumerate() {
                let path = format!("pinned.caches[{u}][{i}]");
                let Some(p) = parse_packet(text) else {
                    return invalid(path, format!("{text:?} is not a (file,packet) pair"));
                };
                if p.file >= self.library.files || p.packet >= self.library.packets {
                    return invalid(path, format!("{text} is outside the library"));
                }
                if packets.contains(&p) {
                    return invalid(path, format!("{text} listed twice"));
                }
                packets.push(p);
            }
            out.push(packets);
        }
        Ok(Some(out))
    }

    /// Zero-based pinned demand, if any.
    pub fn pinned_demand(&self) -> Option<Vec<usize>> {
        self.pinned
            .as_ref()
            .and_then(|p| p.demand.as_ref())
            .map(|d| d.iter().map(|&f| f - 1).collect())
    }

    /// Threshold grid for the correlation-aware scheme.
    pub fn delta_grid(&self) -> Vec<f64> {
        self.sweep
            .delta_grid
            .clone()
            .unwrap_or_else(|| vec![self.library.delta])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
[library]
files = 6
packets = 4
delta = 0.2
matrix = { kind = "partners", per_packet = 1.0 }
[demand]
receivers = 3
zipf_alpha = 0.8
[sweep]
cache_sizes = [0, 1, 2]
"#;

    fn err_path(text: &str) -> String {
        match Scenario::from_toml(text) {
            Err(Error::Scenario { path, .. }) => path,
            other => panic!("expected a scenario error, got {other:?}"),
        }
    }

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_toml(BASE).unwrap();
        assert_eq!(s.sampling.cache_draws, 20);
        assert_eq!(s.sweep.schemes, SchemeId::ALL.to_vec());
        assert_eq!(s.delta_grid(), vec![0.2]);
        assert!((s.matrix().unwrap().get(0, 1) - 0.2).abs() < 1e-15);
        let again = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.digest(), s.digest());
    }

    #[test]
    fn unknown_keys_are_rejected_with_paths() {
        assert_eq!(err_path(&BASE.replace("delta = 0.2", "delta = 0.2\ncolour = 1")), "library.colour");
        assert_eq!(
            err_path(&BASE.replace("per_packet = 1.0", "per_packet = 1.0, extra = 2")),
            "library.matrix"
        );
    }

    #[test]
    fn validation_paths() {
        assert_eq!(err_path(&BASE.replace("schema_version = 1", "schema_version = 2")), "schema_version");
        assert_eq!(err_path(&BASE.replace("[0, 1, 2]", "[0, 1, 9]")), "sweep.cache_sizes[2]");
        assert_eq!(err_path(&BASE.replace("receivers = 3", "receivers = 0")), "demand.receivers");
        assert_eq!(err_path(&BASE.replace("zipf_alpha = 0.8", "")), "demand");
        assert_eq!(err_path(&BASE.replace("delta = 0.2", "delta = 2.0")), "library.delta");
        assert_eq!(err_path(&format!("{BASE}[sampling]\ncache_draws = 0\n")), "sampling.cache_draws");
        assert_eq!(
            err_path(&format!("{BASE}[pinned]\ndemand = [1, 2, 7]\n")),
            "pinned.demand[2]"
        );
        assert_eq!(
            err_path(&format!("{BASE}[pinned]\ncaches = [[\"(1,1)\"], [], [\"(1,9)\"]]\n")),
            "pinned.caches[2][0]"
        );
    }

    #[test]
    fn type_errors_carry_paths() {
        assert_eq!(err_path(&BASE.replace("files = 6", "files = \"six\"")), "library.files");
    }

    #[test]
    fn packet_text() {
        assert_eq!(parse_packet("(2,1)"), Some(PacketId::new(1, 0)));
        assert_eq!(parse_packet(" ( 4 , 2 ) "), Some(PacketId::new(3, 1)));
        assert_eq!(parse_packet("(0,1)"), None);
        assert_eq!(parse_packet("2,1"), None);
    }
}
