//! Online reference selection and control.
//!
//! At each step the controller finds the smallest accuracy `delta` and then the
//! smallest level `kappa >= 1` whose ball union contains the current augmented
//! state, picks the covering data point with the largest slack, and applies the
//! learned inverse model at `[target_i; zeta]`.

use crate::bounds::BoundSet;
use crate::data::NarxDataset;
use crate::error::{Error, Result};
use crate::interpolant::Interpolant;
use crate::kernels::euclidean;
use crate::level_sets::LevelFamily;

/// What to do when no level set contains the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FallbackPolicy {
    /// Use the target of the training record whose `zeta_j` is closest.
    #[default]
    NearestNeighbor,
    /// Use the level entry (any `delta`, level `>= 1`) whose certificate is closest
    /// to holding, i.e. with the largest (negative) slack.
    BestSlack,
}

impl FallbackPolicy {
    pub fn name(self) -> &'static str {
        match self {
            FallbackPolicy::NearestNeighbor => "nearest_neighbor",
            FallbackPolicy::BestSlack => "best_slack",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "nearest_neighbor" => Some(FallbackPolicy::NearestNeighbor),
            "best_slack" => Some(FallbackPolicy::BestSlack),
            _ => None,
        }
    }
}

/// Immutable controller data: dataset, learned inverse, bounds and one family per `delta`.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    dataset: NarxDataset,
    interpolant: Interpolant,
    bounds: BoundSet,
    families: Vec<LevelFamily>,
    fallback: FallbackPolicy,
    /// Per record: largest certificate radius over all families and levels `>= 1`,
    /// with the first `(family, level)` attaining it.
    best_radius: Vec<Option<(f64, usize, usize)>>,
}

/// Bookkeeping for one control decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCertificate {
    /// Accuracy of the family used; `None` for fallback steps.
    pub delta: Option<f64>,
    /// Level at decision time; `None` for fallback steps.
    pub kappa: Option<usize>,
    /// Index of the reference record.
    pub index: usize,
    /// `gamma^{-1}(r_i) - |zeta - zeta_i|` for certified steps, `-|zeta - zeta_i|` otherwise.
    pub slack: f64,
    pub certified: bool,
}

/// Result of checking `zeta(t+1)` against level `kappa - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Descent {
    Held,
    Violated,
    /// Uncertified step; nothing to check.
    Skipped,
}

impl Descent {
    pub fn label(self) -> &'static str {
        match self {
            Descent::Held => "held",
            Descent::Violated => "violated",
            Descent::Skipped => "skipped",
        }
    }

    pub fn is_violation(self) -> bool {
        self == Descent::Violated
    }
}

impl ControllerConfig {
    /// Families must be sorted by strictly increasing `delta` and share `max_level`.
    pub fn new(
        dataset: NarxDataset,
        interpolant: Interpolant,
        bounds: BoundSet,
        families: Vec<LevelFamily>,
        fallback: FallbackPolicy,
    ) -> Result<Self> {
        if families.windows(2).any(|w| w[0].delta() >= w[1].delta()) {
            return Err(crate::error::invalid("families", "deltas must be strictly increasing"));
        }
        if families.windows(2).any(|w| w[0].max_level() != w[1].max_level()) {
            return Err(crate::error::invalid("families", "all families must share max_level"));
        }
        if interpolant.input_dim() != 2 * dataset.order() {
            return Err(Error::DimensionMismatch {
                expected: 2 * dataset.order(),
                actual: interpolant.input_dim(),
            });
        }
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut best_radius: Vec<Option<(f64, usize, usize)>> = vec![None; dataset.len()];
        for (f, fam) in families.iter().enumerate() {
            for j in 1..=fam.max_level() {
                for e in fam.level(j) {
                    let slot = &mut best_radius[e.index];
                    if slot.is_none_or(|(r, _, _)| e.certificate_radius > r) {
                        *slot = Some((e.certificate_radius, f, j));
                    }
                }
            }
        }
        Ok(Self {
            dataset,
            interpolant,
            bounds,
            families,
            fallback,
            best_radius,
        })
    }

    pub fn dataset(&self) -> &NarxDataset {
        &self.dataset
    }

    pub fn interpolant(&self) -> &Interpolant {
        &self.interpolant
    }

    pub fn bounds(&self) -> &BoundSet {
        &self.bounds
    }

    pub fn families(&self) -> &[LevelFamily] {
        &self.families
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.families.iter().map(LevelFamily::delta).collect()
    }

    pub fn fallback(&self) -> FallbackPolicy {
        self.fallback
    }

    fn family(&self, delta: f64) -> Option<&LevelFamily> {
        self.families.iter().find(|f| f.delta() == delta)
    }

    /// First `(delta, kappa)` containing `zeta`, smaller `delta` first, then smaller `kappa`.
    pub fn locate(&self, zeta: &[f64]) -> Option<(f64, usize)> {
        self.locate_from(zeta, 0)
    }

    fn locate_from(&self, zeta: &[f64], min_level: usize) -> Option<(f64, usize)> {
        self.families.iter().find_map(|fam| {
            (min_level..=fam.max_level())
                .find(|&j| fam.contains(j, zeta))
                .map(|j| (fam.delta(), j))
        })
    }

    /// Covering level-`kappa` entry with the largest slack, ties to the lowest index.
    pub fn select_reference(
        &self,
        zeta: &[f64],
        delta: f64,
        kappa: usize,
    ) -> Result<(StepCertificate, f64)> {
        if kappa == 0 {
            return Err(crate::error::invalid("kappa", "level 0 carries no reference"));
        }
        let fam = self
            .family(delta)
            .ok_or_else(|| Error::Inconsistent(format!("no family for delta {delta}")))?;
        let mut best: Option<(usize, f64)> = None;
        for (entry, dist) in fam.covering_entries(kappa, zeta) {
            let slack = entry.certificate_radius - dist;
            let better = match best {
                None => true,
                Some((idx, s)) => slack > s || (slack == s && entry.index < idx),
            };
            if better {
                best = Some((entry.index, slack));
            }
        }
        let (index, slack) = best.ok_or_else(|| {
            Error::Inconsistent(format!(
                "level {kappa} of delta {delta} contains the state but no entry covers it"
            ))
        })?;
        let cert = StepCertificate {
            delta: Some(delta),
            kappa: Some(kappa),
            index,
            slack,
            certified: true,
        };
        Ok((cert, self.dataset.record(index).target))
    }

    /// Index of the training state closest to `zeta`, ties to the lowest index.
    pub fn nearest_record(&self, zeta: &[f64]) -> (usize, f64) {
        self.dataset
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| (i, euclidean(&r.zeta, zeta)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    /// Entry with the largest slack over every family and level `>= 1`; earlier
    /// `delta`, lower level and lower index win ties. `None` when all levels are empty.
    pub fn best_slack_entry(&self, zeta: &[f64]) -> Option<StepCertificate> {
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (i, slot) in self.best_radius.iter().enumerate() {
            let Some((radius, f, j)) = *slot else { continue };
            let slack = radius - euclidean(&self.dataset.record(i).zeta, zeta);
            let better = match best {
                None => true,
                Some((s, bf, bj, bi)) => slack > s || (slack == s && (f, j, i) < (bf, bj, bi)),
            };
            if better {
                best = Some((slack, f, j, i));
            }
        }
        best.map(|(slack, f, j, index)| StepCertificate {
            delta: Some(self.families[f].delta()),
            kappa: Some(j),
            index,
            slack,
            certified: false,
        })
    }

    /// Input and certificate for the (measured) augmented state `zeta`.
    pub fn control(&self, zeta: &[f64]) -> Result<(f64, StepCertificate)> {
        let expected = self.dataset.state_dim();
        if zeta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: zeta.len(),
            });
        }
        let (cert, reference) = match self.locate_from(zeta, 1) {
            Some((delta, kappa)) => self.select_reference(zeta, delta, kappa)?,
            None => match self.fallback {
                FallbackPolicy::BestSlack if self.best_radius.iter().any(Option::is_some) => {
                    let mut cert = self.best_slack_entry(zeta).expect("some level is nonempty");
                    // the entry only lends its reference; nothing is certified
                    cert.delta = None;
                    cert.kappa = None;
                    (cert, self.dataset.record(cert.index).target)
                }
                FallbackPolicy::NearestNeighbor | FallbackPolicy::BestSlack => {
                    let (index, dist) = self.nearest_record(zeta);
                    let cert = StepCertificate {
                        delta: None,
                        kappa: None,
                        index,
                        slack: -dist,
                        certified: false,
                    };
                    (cert, self.dataset.record(index).target)
                }
            },
        };
        let mut xi = Vec::with_capacity(zeta.len() + 1);
        xi.push(reference);
        xi.extend_from_slice(zeta);
        Ok((self.interpolant.predict(&xi)?, cert))
    }

    /// Whether `zeta_next` made it into level `kappa - 1` of the family used.
    pub fn assert_descent(&self, previous: &StepCertificate, zeta_next: &[f64]) -> Descent {
        match (previous.certified, previous.delta, previous.kappa) {
            (true, Some(delta), Some(kappa)) if kappa >= 1 => match self.family(delta) {
                Some(fam) if fam.contains(kappa - 1, zeta_next) => Descent::Held,
                _ => Descent::Violated,
            },
            _ => Descent::Skipped,
        }
    }
}
