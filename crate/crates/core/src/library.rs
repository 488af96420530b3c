//! File library, packet-level correlation structure and synthetic generation.
//!
//! Entropies are normalized so that one file carries 1.0 file-unit and one
//! packet `1/B`. Two distinct packets are δ-correlated when their joint entropy
//! is at most `(1 + δ) / B`; the correlation relation is stored as a symmetric
//! list of partners per packet together with the pair's joint entropy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::packet::{PacketId, PacketSet};
use crate::seed::SeedTree;
use crate::{Error, Result};

const ENTROPY_EPS: f64 = 1e-12;

/// Dense `m x m` match matrix. `get(row, col)` is the expected number of
/// δ-correlated packets of file `row` per packet of file `col`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchMatrix {
    files: usize,
    entries: Vec<f64>,
}

impl MatchMatrix {
    pub fn identity(files: usize) -> Self {
        let mut entries = vec![0.0; files * files];
        for f in 0..files {
            entries[f * files + f] = 1.0;
        }
        MatchMatrix { files, entries }
    }

    /// Identity diagonal with the same value in every off-diagonal entry.
    pub fn uniform(files: usize, off_diagonal: f64) -> Self {
        let mut g = MatchMatrix::identity(files);
        for r in 0..files {
            for c in 0..files {
                if r != c {
                    g.entries[r * files + c] = off_diagonal;
                }
            }
        }
        g
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let files = rows.len();
        let mut entries = Vec::with_capacity(files * files);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != files {
                return Err(Error::Library(format!(
                    "match matrix row {} has {} entries, expected {files}",
                    i + 1,
                    row.len()
                )));
            }
            entries.extend(row);
        }
        Ok(MatchMatrix { files, entries })
    }

    pub fn files(&self) -> usize {
        self.files
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.files + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.entries[row * self.files + col] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.files.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn is_identity(&self) -> bool {
        (0..self.files).all(|r| {
            (0..self.files).all(|c| self.get(r, c) == if r == c { 1.0 } else { 0.0 })
        })
    }

    /// Row sums `sum_{f'} G[f][f']`, used to rank files by how much of the
    /// library they are correlated with.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.files)
            .map(|r| (0..self.files).map(|c| self.get(r, c)).sum())
            .collect()
    }

    /// Relabels files: file `f` becomes file `perm[f]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for r in 0..self.files {
            for c in 0..self.files {
                out.set(perm[r], perm[c], self.get(r, c));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibraryConfig {
    pub files: usize,
    pub packets: usize,
    pub delta: f64,
    pub matrix: MatchMatrix,
}

impl LibraryConfig {
    pub fn new(files: usize, packets: usize, delta: f64, matrix: MatchMatrix) -> Result<Self> {
        let cfg = LibraryConfig {
            files,
            packets,
            delta,
            matrix,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.files == 0 {
            return Err(Error::Library("library needs at least one file".into()));
        }
        if self.packets == 0 {
            return Err(Error::Library("files need at least one packet".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Library(format!(
                "delta {} outside [0, 1]",
                self.delta
            )));
        }
        if self.matrix.files() != self.files {
            return Err(Error::Library(format!(
                "match matrix is {0}x{0} but the library has {1} files",
                self.matrix.files(),
                self.files
            )));
        }
        for r in 0..self.files {
            for c in 0..self.files {
                let g = self.matrix.get(r, c);
                if r == c {
                    if g != 1.0 {
                        return Err(Error::Library(format!(
                            "match matrix diagonal G[{0}][{0}] = {g}, expected 1",
                            r + 1
                        )));
                    }
                } else if !(0.0..=self.packets as f64).contains(&g) || !g.is_finite() {
                    return Err(Error::Library(format!(
                        "match matrix entry G[{}][{}] = {g} outside [0, {}]",
                        r + 1,
                        c + 1,
                        self.packets
                    )));
                }
            }
        }
        Ok(())
    }

    /// Entropy of one packet in file-units.
    pub fn packet_entropy(&self) -> f64 {
        1.0 / self.packets as f64
    }
}

/// A δ-correlated partner of some packet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partner {
    pub packet: PacketId,
    /// Joint entropy of the pair, file-units.
    pub joint: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationModel {
    config: LibraryConfig,
    /// Indexed by flat packet index, sorted by partner id.
    partners: Vec<Vec<Partner>>,
}

impl CorrelationModel {
    /// A library with no cross-packet correlation.
    pub fn uncorrelated(files: usize, packets: usize, delta: f64) -> Result<Self> {
        let config = LibraryConfig::new(files, packets, delta, MatchMatrix::identity(files))?;
        Ok(CorrelationModel {
            partners: vec![Vec::new(); files * packets],
            config,
        })
    }

    /// Builds a model from an explicit list of correlated pairs with their
    /// joint entropies. This is the entry point for heterogeneous models.
    pub fn from_pairs(config: LibraryConfig, pairs: &[(PacketId, PacketId, f64)]) -> Result<Self> {
        config.validate()?;
        let b = config.packets;
        let h = config.packet_entropy();
        let mut partners = vec![Vec::new(); config.files * b];
        for &(a, c, joint) in pairs {
            for p in [a, c] {
                if p.file >= config.files || p.packet >= b {
                    return Err(Error::Library(format!("packet {p} out of range")));
                }
            }
            if a == c {
                return Err(Error::Library(format!("packet {a} paired with itself")));
            }
            if joint < h - ENTROPY_EPS || joint > (1.0 + config.delta) * h + ENTROPY_EPS {
                return Err(Error::Library(format!(
                    "pair {a}~{c} joint entropy {joint} outside [{h}, {}]",
                    (1.0 + config.delta) * h
                )));
            }
            let list: &mut Vec<Partner> = &mut partners[a.flat(b)];
            if list.iter().any(|q| q.packet == c) {
                return Err(Error::Library(format!("pair {a}~{c} listed twice")));
            }
            if list.iter().any(|q| q.packet.file == c.file) {
                return Err(Error::Library(format!(
                    "packet {a} already has a partner in file {}",
                    c.file + 1
                )));
            }
            list.push(Partner { packet: c, joint });
            let back: &mut Vec<Partner> = &mut partners[c.flat(b)];
            if back.iter().any(|q| q.packet.file == a.file) {
                return Err(Error::Library(format!(
                    "packet {c} already has a partner in file {}",
                    a.file + 1
                )));
            }
            back.push(Partner { packet: a, joint });
        }
        for list in &mut partners {
            list.sort_by_key(|q| q.packet);
        }
        Ok(CorrelationModel { config, partners })
    }

    pub fn config(&self) -> &LibraryConfig {
        &self.config
    }

    pub fn files(&self) -> usize {
        self.config.files
    }

    pub fn packets(&self) -> usize {
        self.config.packets
    }

    pub fn delta(&self) -> f64 {
        self.config.delta
    }

    pub fn partners(&self, p: PacketId) -> &[Partner] {
        &self.partners[p.flat(self.config.packets)]
    }

    /// Joint entropy of a stored δ-correlated pair.
    pub fn joint_entropy(&self, a: PacketId, b: PacketId) -> Option<f64> {
        self.partners(a)
            .binary_search_by_key(&b, |q| q.packet)
            .ok()
            .map(|i| self.partners(a)[i].joint)
    }

    pub fn are_correlated(&self, a: PacketId, b: PacketId) -> bool {
        self.joint_entropy(a, b).is_some()
    }

    /// `H(target | given)` in file-units.
    pub fn conditional_entropy(&self, target: PacketId, given: PacketId) -> f64 {
        if target == given {
            return 0.0;
        }
        match self.joint_entropy(target, given) {
            Some(joint) => joint - self.config.packet_entropy(),
            None => self.config.packet_entropy(),
        }
    }

    /// `p` followed by every packet in `cached ∪ requested` that is δ-correlated with it.
    pub fn delta_ensemble(
        &self,
        p: PacketId,
        cached: &PacketSet,
        requested: &PacketSet,
    ) -> Vec<PacketId> {
        let mut out = vec![p];
        out.extend(
            self.partners(p)
                .iter()
                .map(|q| q.packet)
                .filter(|&q| cached.contains(q) || requested.contains(q)),
        );
        out
    }

    /// Number of stored (unordered) pairs.
    pub fn pair_count(&self) -> usize {
        self.partners.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Unordered pairs `(a, b, joint)` with `a < b`, ascending.
    pub fn pairs(&self) -> Vec<(PacketId, PacketId, f64)> {
        let b = self.config.packets;
        let mut out = Vec::new();
        for (i, list) in self.partners.iter().enumerate() {
            let a = PacketId::from_flat(i, b);
            for q in list.iter().filter(|q| q.packet > a) {
                out.push((a, q.packet, q.joint));
            }
        }
        out
    }

    /// Model seen at a different correlation threshold: keeps only the pairs
    /// whose joint entropy satisfies `(1 + delta) / B`.
    pub fn at_threshold(&self, delta: f64) -> Result<Self> {
        let limit = (1.0 + delta) * self.config.packet_entropy() + ENTROPY_EPS;
        let kept: Vec<_> = self
            .pairs()
            .into_iter()
            .filter(|&(_, _, joint)| joint <= limit)
            .collect();
        let total = self.pair_count();
        let matrix = if kept.len() == total {
            self.config.matrix.clone()
        } else if kept.is_empty() {
            MatchMatrix::identity(self.config.files)
        } else {
            MatchMatrix::from_rows(recover_match_matrix_of(self.config.files, self.config.packets, &kept).mean)?
        };
        let config = LibraryConfig::new(self.config.files, self.config.packets, delta, matrix)?;
        CorrelationModel::from_pairs(config, &kept)
    }

    /// Deterministic text form, one-based packet ids.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# correlation model");
        let _ = writeln!(s, "files {}", self.config.files);
        let _ = writeln!(s, "packets {}", self.config.packets);
        let _ = writeln!(s, "delta {}", self.config.delta);
        for (a, b, joint) in self.pairs() {
            let _ = writeln!(s, "pair {a} {b} {joint}");
        }
        s
    }
}

/// Generates a library whose pair relation realizes the match matrix.
///
/// Files `f` and `f'` share exactly `round(G[f'][f] * B)` correlated pairs,
/// so `G` must round symmetrically. Each file keeps a cursor over its packet
/// indices; every file pair consumes the next packets from both cursors, which
/// spreads partners round-robin over the packets of each file and never uses a
/// packet twice toward the same file. The seed fixes the order in which file
/// pairs are visited. Every pair gets joint entropy `(1 + delta) / B`.
pub fn build_synthetic_library(config: &LibraryConfig, seed: u64) -> Result<CorrelationModel> {
    config.validate()?;
    let m = config.files;
    let b = config.packets;
    let mut file_pairs = Vec::new();
    for f in 0..m {
        for g in (f + 1)..m {
            let forward = (config.matrix.get(g, f) * b as f64).round() as usize;
            let backward = (config.matrix.get(f, g) * b as f64).round() as usize;
            if forward != backward {
                return Err(Error::Library(format!(
                    "match matrix is not symmetric between files {} and {} ({forward} vs {backward} pairs)",
                    f + 1,
                    g + 1
                )));
            }
            if forward > b {
                return Err(Error::MatchTooDense {
                    row: g + 1,
                    col: f + 1,
                    needed: forward,
                    packets: b,
                });
            }
            if forward > 0 {
                file_pairs.push((f, g, forward));
            }
        }
    }
    let mut rng = SeedTree::new(seed).child(crate::seed::STREAM_LIBRARY).rng();
    file_pairs.shuffle(&mut rng);

    let joint = (1.0 + config.delta) * config.packet_entropy();
    let mut cursor = vec![0usize; m];
    let mut pairs = Vec::new();
    for (f, g, count) in file_pairs {
        for _ in 0..count {
            let a = PacketId::new(f, cursor[f] % b);
            let c = PacketId::new(g, cursor[g] % b);
            cursor[f] += 1;
            cursor[g] += 1;
            pairs.push((a, c, joint));
        }
    }
    CorrelationModel::from_pairs(config.clone(), &pairs)
}

/// Match matrix recomputed from a pair relation.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredMatch {
    /// Per-packet minimum partner count, `min[f'][f]`.
    pub min: Vec<Vec<f64>>,
    /// Per-packet average partner count, `mean[f'][f]`.
    pub mean: Vec<Vec<f64>>,
}

pub fn recover_match_matrix(model: &CorrelationModel) -> RecoveredMatch {
    recover_match_matrix_of(model.files(), model.packets(), &model.pairs())
}

fn recover_match_matrix_of(
    files: usize,
    packets: usize,
    pairs: &[(PacketId, PacketId, f64)],
) -> RecoveredMatch {
    // counts[f'][f][b] = partners of (f, b) in file f'
    let mut counts = vec![vec![vec![0usize; packets]; files]; files];
    for &(a, c, _) in pairs {
        counts[c.file][a.file][a.packet] += 1;
        counts[a.file][c.file][c.packet] += 1;
    }
    let mut min = vec![vec![0.0; files]; files];
    let mut mean = vec![vec![0.0; files]; files];
    for fp in 0..files {
        for f in 0..files {
            if fp == f {
                min[fp][f] = 1.0;
                mean[fp][f] = 1.0;
                continue;
            }
            let row = &counts[fp][f];
            min[fp][f] = *row.iter().min().unwrap_or(&0) as f64;
            mean[fp][f] = row.iter().sum::<usize>() as f64 / packets as f64;
        }
    }
    RecoveredMatch { min, mean }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(f: usize, b: usize) -> PacketId {
        PacketId::from_one_based(f, b).unwrap()
    }

    pub(crate) fn example1_config() -> LibraryConfig {
        let mut g = MatchMatrix::identity(4);
        for (r, c) in [(1, 0), (0, 1), (3, 2), (2, 3)] {
            g.set(r, c, 1.0);
        }
        LibraryConfig::new(4, 2, 0.25, g).unwrap()
    }

    #[test]
    fn example1_pairs_are_aligned() {
        let model = build_synthetic_library(&example1_config(), 0).unwrap();
        let pairs: Vec<_> = model.pairs().into_iter().map(|(a, b, _)| (a, b)).collect();
        assert_eq!(
            pairs,
            vec![
                (p(1, 1), p(2, 1)),
                (p(1, 2), p(2, 2)),
                (p(3, 1), p(4, 1)),
                (p(3, 2), p(4, 2)),
            ]
        );
        for (_, _, joint) in model.pairs() {
            assert!((joint - 1.25 / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_matrix_gives_no_pairs() {
        let cfg = LibraryConfig::new(5, 3, 0.3, MatchMatrix::identity(5)).unwrap();
        let model = build_synthetic_library(&cfg, 9).unwrap();
        assert_eq!(model.pair_count(), 0);
        let rec = recover_match_matrix(&model);
        for f in 0..5 {
            for g in 0..5 {
                assert_eq!(rec.mean[f][g], if f == g { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn conditional_entropies() {
        let model = build_synthetic_library(&example1_config(), 0).unwrap();
        assert_eq!(model.conditional_entropy(p(3, 1), p(3, 1)), 0.0);
        assert!((model.conditional_entropy(p(3, 1), p(4, 1)) - 0.125).abs() < 1e-15);
        assert_eq!(model.conditional_entropy(p(3, 1), p(4, 2)), 0.5);
        assert_eq!(model.conditional_entropy(p(1, 1), p(3, 1)), 0.5);
    }

    #[test]
    fn example1_delta_ensemble() {
        let model = build_synthetic_library(&example1_config(), 0).unwrap();
        let mut cached = PacketSet::new(4, 2);
        for q in [p(2, 1), p(4, 1), p(2, 2), p(4, 2)] {
            cached.insert(q);
        }
        let mut requested = PacketSet::new(4, 2);
        requested.insert(p(3, 1));
        assert_eq!(
            model.delta_ensemble(p(3, 1), &cached, &requested),
            vec![p(3, 1), p(4, 1)]
        );
    }

    #[test]
    fn example1_recovered_match() {
        let model = build_synthetic_library(&example1_config(), 0).unwrap();
        let rec = recover_match_matrix(&model);
        assert_eq!(rec.mean[3][2], 1.0);
        assert_eq!(rec.min[3][2], 1.0);
        assert_eq!(rec.mean[0][2], 0.0);
    }

    #[test]
    fn rejects_dense_entries() {
        let cfg = LibraryConfig {
            files: 2,
            packets: 4,
            delta: 0.1,
            matrix: MatchMatrix::uniform(2, 1.5),
        };
        // 1.5 exceeds nothing per-entry (<= B) but 1.5*4 = 6 pairs > 4 packets.
        assert!(matches!(
            build_synthetic_library(&cfg, 1),
            Err(Error::MatchTooDense { needed: 6, .. })
        ));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(LibraryConfig::new(0, 1, 0.1, MatchMatrix::identity(0)).is_err());
        assert!(LibraryConfig::new(2, 1, 1.5, MatchMatrix::identity(2)).is_err());
        let mut g = MatchMatrix::identity(2);
        g.set(0, 0, 0.5);
        assert!(LibraryConfig::new(2, 1, 0.1, g).is_err());
    }

    #[test]
    fn from_pairs_enforces_invariants() {
        let cfg = LibraryConfig::new(3, 2, 0.2, MatchMatrix::identity(3)).unwrap();
        let ok = (p(1, 1), p(2, 1), 0.55);
        assert!(CorrelationModel::from_pairs(cfg.clone(), &[ok]).is_ok());
        // above threshold (1.2 / 2 = 0.6)
        assert!(CorrelationModel::from_pairs(cfg.clone(), &[(p(1, 1), p(2, 1), 0.61)]).is_err());
        // second partner in the same file
        assert!(
            CorrelationModel::from_pairs(cfg.clone(), &[ok, (p(1, 1), p(2, 2), 0.6)]).is_err()
        );
        assert!(CorrelationModel::from_pairs(cfg, &[(p(1, 1), p(1, 1), 0.5)]).is_err());
    }

    #[test]
    fn threshold_filtering() {
        let model = build_synthetic_library(&example1_config(), 0).unwrap();
        assert_eq!(model.at_threshold(0.25).unwrap().pair_count(), 4);
        let unaware = model.at_threshold(0.0).unwrap();
        assert_eq!(unaware.pair_count(), 0);
        assert!(unaware.config().matrix.is_identity());
    }

    #[test]
    fn text_form_is_stable() {
        let model = build_synthetic_library(&example1_config(), 0).unwrap();
        let text = model.to_text();
        assert!(text.contains("pair (3,2) (4,2) 0.625"));
        assert_eq!(text, build_synthetic_library(&example1_config(), 0).unwrap().to_text());
    }
}
