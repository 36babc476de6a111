//! Ball-union level sets certifying practical output regulation.
//!
//! For an accuracy `delta`, level 0 is the union of balls `B(zeta_i+, r_i)` whose
//! successor states sit strictly inside the slab `|y(t)| <= delta`. Level `j + 1`
//! is the union of `B(zeta_i, gamma^{-1}(r_i))` over records whose successor has
//! positive inradius `r_i` in level `j`. A level is stored as `(i, r_i, gamma^{-1}(r_i))`
//! tuples; the balls are rebuilt from the dataset.
//!
//! Exact inradius in a union of balls is expensive, so every inradius here is the
//! single-ball underestimate `max_b (r_b - |p - c_b|)`. A smaller radius only
//! shrinks the certified sets.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bounds::BoundSet;
use crate::data::{parse_field, NarxDataset};
use crate::error::{Error, Result};
use crate::kernels::euclidean;

/// Entries whose inradius falls below this are dropped.
pub const MIN_RADIUS: f64 = 1e-12;
/// Levels with more balls than this are queried through a grid index.
pub const INDEX_THRESHOLD: usize = 256;

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        euclidean(&self.center, p) <= self.radius
    }

    /// Single-ball containment `|c - c'| + r <= r'`.
    pub fn inside(&self, outer: &Ball) -> bool {
        euclidean(&self.center, &outer.center) + self.radius <= outer.radius
    }
}

/// `delta - |p_n|` when positive, where `p_n` is the latest-output coordinate.
/// Rounded down so that `|p_n| + r <= delta` also holds in floating point.
pub fn inradius_in_slab(point: &[f64], output_index: usize, delta: f64) -> Option<f64> {
    let y = point[output_index].abs();
    let mut r = delta - y;
    while r > 0.0 && y + r > delta {
        r = r.next_down();
    }
    (r > 0.0).then_some(r)
}

/// Single-ball underestimate of the inradius of `p` in the union of `balls`.
pub fn inradius_in_union(p: &[f64], balls: &[Ball]) -> Option<f64> {
    balls
        .iter()
        .map(|b| b.radius - euclidean(p, &b.center))
        .filter(|r| *r > 0.0)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
}

#[derive(Debug, Clone)]
struct Grid {
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl Grid {
    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|x| (x / self.cell).floor() as i64).collect()
    }
}

/// Ball union with membership queries; a grid hash over the centers (cell size =
/// largest radius) kicks in above [`INDEX_THRESHOLD`] balls.
#[derive(Debug, Clone)]
pub struct BallIndex {
    balls: Vec<Ball>,
    grid: Option<Grid>,
}

impl BallIndex {
    pub fn new(balls: Vec<Ball>) -> Self {
        Self::with_threshold(balls, INDEX_THRESHOLD)
    }

    pub fn with_threshold(balls: Vec<Ball>, threshold: usize) -> Self {
        let grid = (balls.len() > threshold).then(|| {
            let max_r = balls.iter().map(|b| b.radius).fold(0.0, f64::max);
            let cell = if max_r > 0.0 && max_r.is_finite() { max_r } else { 1.0 };
            let mut grid = Grid {
                cell,
                cells: HashMap::new(),
            };
            for (id, b) in balls.iter().enumerate() {
                let key = grid.key(&b.center);
                grid.cells.entry(key).or_default().push(id);
            }
            grid
        });
        Self { balls, grid }
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Balls containing `p`, as `(ball id, distance to center)`, in id order.
    pub fn covering(&self, p: &[f64]) -> Vec<(usize, f64)> {
        let hit = |id: usize| {
            let b = &self.balls[id];
            let d = euclidean(p, &b.center);
            (d <= b.radius).then_some((id, d))
        };
        match &self.grid {
            None => (0..self.balls.len()).filter_map(hit).collect(),
            Some(grid) => {
                let base = grid.key(p);
                let dim = base.len();
                let mut out = Vec::new();
                let mut offset = vec![-1i64; dim];
                loop {
                    let key: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
                    if let Some(ids) = grid.cells.get(&key) {
                        out.extend(ids.iter().copied().filter_map(hit));
                    }
                    // odometer over {-1, 0, 1}^dim
                    let mut k = 0;
                    while k < dim {
                        offset[k] += 1;
                        if offset[k] <= 1 {
                            break;
                        }
                        offset[k] = -1;
                        k += 1;
                    }
                    if k == dim {
                        break;
                    }
                }
                out.sort_unstable_by_key(|(id, _)| *id);
                out
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match &self.grid {
            None => self.balls.iter().any(|b| b.contains(p)),
            Some(_) => !self.covering(p).is_empty(),
        }
    }

    /// Same value as [`inradius_in_union`] over all balls.
    pub fn inradius(&self, p: &[f64]) -> Option<f64> {
        self.covering(p)
            .into_iter()
            .map(|(id, d)| self.balls[id].radius - d)
            .filter(|r| *r > 0.0)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
    }
}

/// `(i, r_i)` of an index set, with the certificate radius `gamma^{-1}(r_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexedEntry {
    pub index: usize,
    pub radius: f64,
    pub certificate_radius: f64,
}

/// Set whose index set is computed.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// `S_delta = { zeta : |zeta_n| <= delta }`.
    Slab { delta: f64 },
    /// A ball union, e.g. one level of a family.
    Union(&'a BallIndex),
}

/// One entry per record whose successor `zeta_i+` has positive inradius in `target`.
pub fn compute_index_set(
    dataset: &NarxDataset,
    target: Target<'_>,
    bounds: &BoundSet,
) -> Result<Vec<IndexedEntry>> {
    let out_idx = dataset.order() - 1;
    dataset
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let r = match target {
                Target::Slab { delta } => inradius_in_slab(&rec.successor, out_idx, delta),
                Target::Union(index) => index.inradius(&rec.successor),
            };
            match r {
                Some(r) if r >= MIN_RADIUS => Ok(Some(IndexedEntry {
                    index: i,
                    radius: r,
                    certificate_radius: bounds.gamma_inverse(r)?,
                })),
                _ => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

/// Balls of level `level` for the given entries.
pub fn level_balls(dataset: &NarxDataset, level: usize, entries: &[IndexedEntry]) -> Vec<Ball> {
    entries
        .iter()
        .map(|e| {
            let rec = dataset.record(e.index);
            if level == 0 {
                Ball::new(rec.successor.clone(), e.radius)
            } else {
                Ball::new(rec.zeta.clone(), e.certificate_radius)
            }
        })
        .collect()
}

/// Levels `0..=max_level` for one accuracy `delta`.
#[derive(Debug, Clone)]
pub struct LevelFamily {
    delta: f64,
    max_level: usize,
    levels: Vec<Vec<IndexedEntry>>,
    indexes: Vec<BallIndex>,
    truncated_at: Option<usize>,
}

/// Build levels `0..=max_level` for accuracy `delta`.
///
/// Construction stops at the first empty level (all later levels are empty too)
/// and reuses a level verbatim once the recursion reaches a fixed point.
pub fn build_level_family(
    dataset: &NarxDataset,
    bounds: &BoundSet,
    delta: f64,
    max_level: usize,
) -> Result<LevelFamily> {
    if !(delta > 0.0) {
        return Err(crate::error::invalid("delta", format!("must be > 0, got {delta}")));
    }
    if max_level < 1 {
        return Err(crate::error::invalid("max_level", "must be >= 1"));
    }
    let mut levels = Vec::with_capacity(max_level + 1);
    let mut indexes = Vec::with_capacity(max_level + 1);
    let mut truncated_at = None;

    let level0 = compute_index_set(dataset, Target::Slab { delta }, bounds)?;
    indexes.push(BallIndex::new(level_balls(dataset, 0, &level0)));
    levels.push(level0);

    for j in 1..=max_level {
        if levels[j - 1].is_empty() {
            truncated_at.get_or_insert(j - 1);
            levels.push(Vec::new());
            indexes.push(BallIndex::new(Vec::new()));
            continue;
        }
        if j >= 3 && levels[j - 1] == levels[j - 2] {
            let (lv, ix) = (levels[j - 1].clone(), indexes[j - 1].clone());
            levels.push(lv);
            indexes.push(ix);
            continue;
        }
        let entries = compute_index_set(dataset, Target::Union(&indexes[j - 1]), bounds)?;
        indexes.push(BallIndex::new(level_balls(dataset, j, &entries)));
        levels.push(entries);
    }
    if truncated_at.is_none() && levels[max_level].is_empty() {
        truncated_at = Some(max_level);
    }
    Ok(LevelFamily {
        delta,
        max_level,
        levels,
        indexes,
        truncated_at,
    })
}

/// Outcome of the sampled soundness audit of a family.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub entries_checked: usize,
    pub points_sampled: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Uniform sample in the ball `B(center, radius)`.
pub fn sample_in_ball<R: Rng>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = center.iter().map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let scale = radius * rng.random::<f64>().powf(1.0 / center.len() as f64) / norm;
    center.iter().zip(&dir).map(|(c, d)| c + scale * d).collect()
}

impl LevelFamily {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// First empty level, if the recursion died out.
    pub fn truncated_at(&self) -> Option<usize> {
        self.truncated_at
    }

    pub fn level(&self, j: usize) -> &[IndexedEntry] {
        &self.levels[j]
    }

    pub fn levels(&self) -> &[Vec<IndexedEntry>] {
        &self.levels
    }

    pub fn balls(&self, j: usize) -> &[Ball] {
        self.indexes[j].balls()
    }

    pub fn index(&self, j: usize) -> &BallIndex {
        &self.indexes[j]
    }

    pub fn contains(&self, j: usize, zeta: &[f64]) -> bool {
        j <= self.max_level && self.indexes[j].contains(zeta)
    }

    /// Level-`j` entries whose ball contains `zeta`, with the distance to the center.
    pub fn covering_entries(&self, j: usize, zeta: &[f64]) -> Vec<(IndexedEntry, f64)> {
        self.indexes[j]
            .covering(zeta)
            .into_iter()
            .map(|(id, d)| (self.levels[j][id], d))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(Vec::is_empty)
    }

    /// Sufficient test for `A^0 ⊂ A^1`: every level-0 ball fits inside one level-1
    /// ball. `false` means the inclusion could not be verified.
    pub fn check_a0_subset_a1(&self) -> bool {
        let outer = self.balls(1);
        self.balls(0)
            .iter()
            .all(|inner| outer.iter().any(|o| inner.inside(o)))
    }

    /// Check the family against its defining properties:
    /// level-0 balls inside the slab, positive radii, certificate radii that do not
    /// overshoot, and `samples_per_entry` uniform points of every `B(zeta_i+, r_i)`
    /// at level `j + 1` falling inside level `j`.
    pub fn audit(
        &self,
        dataset: &NarxDataset,
        bounds: &BoundSet,
        samples_per_entry: usize,
        seed: u64,
    ) -> AuditReport {
        let out_idx = dataset.order() - 1;
        let mut report = AuditReport::default();
        for (j, entries) in self.levels.iter().enumerate() {
            for e in entries {
                report.entries_checked += 1;
                if e.index >= dataset.len() {
                    report
                        .violations
                        .push(format!("delta={} level {j}: record {} out of range", self.delta, e.index));
                    continue;
                }
                if !(e.radius > 0.0) || !(e.certificate_radius >= 0.0) {
                    report.violations.push(format!(
                        "delta={} level {j} record {}: non-positive radius r={} gamma_inv={}",
                        self.delta, e.index, e.radius, e.certificate_radius
                    ));
                    continue;
                }
                match bounds.gamma(e.certificate_radius) {
                    Ok(g) if g <= e.radius + 1e-9 => {}
                    other => report.violations.push(format!(
                        "delta={} level {j} record {}: gamma(gamma_inv(r)) = {other:?} exceeds r = {}",
                        self.delta, e.index, e.radius
                    )),
                }
                if j == 0 {
                    let succ = &dataset.record(e.index).successor;
                    if succ[out_idx].abs() + e.radius > self.delta {
                        report.violations.push(format!(
                            "delta={} level 0 record {}: |y+| + r = {} leaves the slab",
                            self.delta,
                            e.index,
                            succ[out_idx].abs() + e.radius
                        ));
                    }
                }
            }
        }
        // recursion soundness; identical consecutive levels repeat the same check
        let checks: Vec<(usize, Vec<String>, usize)> = (1..=self.max_level)
            .into_par_iter()
            .filter(|&j| !(j >= 3 && self.levels[j] == self.levels[j - 1]))
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((j as u64) << 32));
                let mut bad = Vec::new();
                let mut sampled = 0;
                for e in &self.levels[j] {
                    if e.index >= dataset.len() || !(e.radius > 0.0) {
                        continue;
                    }
                    let center = &dataset.record(e.index).successor;
                    for _ in 0..samples_per_entry {
                        let p = sample_in_ball(&mut rng, center, e.radius);
                        sampled += 1;
                        if !self.contains(j - 1, &p) {
                            bad.push(format!(
                                "delta={} level {j} record {}: sampled point {p:?} of B(zeta+, {}) outside level {}",
                                self.delta,
                                e.index,
                                e.radius,
                                j - 1
                            ));
                            break;
                        }
                    }
                }
                (j, bad, sampled)
            })
            .collect();
        for (_, bad, sampled) in checks {
            report.points_sampled += sampled;
            report.violations.extend(bad);
        }
        report
    }

    /// Rows `j,i,r_i,gamma_inv_r_i` after a `key=value` preamble.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# level family\n");
        let _ = writeln!(out, "delta={}", self.delta);
        let _ = writeln!(out, "max_level={}", self.max_level);
        match self.truncated_at {
            Some(j) => {
                let _ = writeln!(out, "truncated_at={j}");
            }
            None => out.push_str("truncated_at=none\n"),
        }
        out.push_str("j,i,r_i,gamma_inv_r_i\n");
        for (j, entries) in self.levels.iter().enumerate() {
            for e in entries {
                let _ = writeln!(out, "{j},{},{},{}", e.index, e.radius, e.certificate_radius);
            }
        }
        out
    }

    /// Reload a dump against the dataset it was built from. Values are taken as
    /// written; run [`LevelFamily::audit`] to validate them.
    pub fn from_text(text: &str, dataset: &NarxDataset) -> Result<Self> {
        let mut delta = None;
        let mut max_level = None;
        let mut truncated_at = None;
        let mut rows: Vec<(usize, IndexedEntry)> = Vec::new();
        let mut in_rows = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !in_rows {
                if line == "j,i,r_i,gamma_inv_r_i" {
                    in_rows = true;
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or(Error::Parse {
                    line: lineno,
                    message: format!("expected key=value, got `{line}`"),
                })?;
                match k.trim() {
                    "delta" => delta = Some(parse_field::<f64>(v.trim(), lineno)?),
                    "max_level" => max_level = Some(parse_field::<usize>(v.trim(), lineno)?),
                    "truncated_at" => {
                        truncated_at = match v.trim() {
                            "none" => None,
                            s => Some(parse_field::<usize>(s, lineno)?),
                        }
                    }
                    other => {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("unknown key `{other}`"),
                        })
                    }
                }
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 4 fields, got {}", f.len()),
                });
            }
            let j: usize = parse_field(f[0], lineno)?;
            let index: usize = parse_field(f[1], lineno)?;
            if index >= dataset.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("record {index} out of range for {} records", dataset.len()),
                });
            }
            rows.push((
                j,
                IndexedEntry {
                    index,
                    radius: parse_field(f[2], lineno)?,
                    certificate_radius: parse_field(f[3], lineno)?,
                },
            ));
        }
        let missing = |key: &str| Error::Parse {
            line: 0,
            message: format!("missing key `{key}`"),
        };
        let delta = delta.ok_or_else(|| missing("delta"))?;
        let max_level = max_level.ok_or_else(|| missing("max_level"))?;
        let mut levels = vec![Vec::new(); max_level + 1];
        for (j, e) in rows {
            if j > max_level {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("level {j} exceeds max_level {max_level}"),
                });
            }
            levels[j].push(e);
        }
        let indexes = levels
            .iter()
            .enumerate()
            .map(|(j, entries)| BallIndex::new(level_balls(dataset, j, entries)))
            .collect();
        Ok(Self {
            delta,
            max_level,
            levels,
            indexes,
            truncated_at,
        })
    }
}
