//! Input/output trajectories and the inverse-model training dataset.
//!
//! An augmented state of order `n` is laid out as
//! `[y(t-n+1), ..., y(t), u(t-n+1), ..., u(t-1)]`, so it has `2n - 1` entries and
//! entry `n - 1` (0-based) is the latest output `y(t)`.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Relative degree of the plant: how many steps before `u(t)` shows up in the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Delay {
    /// `y(t+1) = f(zeta(t), u(t))`.
    One,
    /// `y(t+2) = fbar(zeta(t), u(t))`; `y(t+1)` depends on `zeta(t)` only.
    Two,
}

impl Delay {
    pub fn steps(self) -> usize {
        match self {
            Delay::One => 1,
            Delay::Two => 2,
        }
    }

    pub fn from_steps(steps: usize) -> Option<Self> {
        match steps {
            1 => Some(Delay::One),
            2 => Some(Delay::Two),
            _ => None,
        }
    }
}

/// Recorded inputs `u(0..T-1)` and outputs `y(0..T)`, optionally with noisy outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    noisy_outputs: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(inputs: Vec<f64>, outputs: Vec<f64>) -> Result<Self> {
        if outputs.len() != inputs.len() + 1 {
            return Err(Error::InconsistentTrajectory {
                inputs: inputs.len(),
                outputs: outputs.len(),
            });
        }
        Ok(Self {
            inputs,
            outputs,
            noisy_outputs: None,
        })
    }

    pub fn with_noisy_outputs(mut self, noisy: Vec<f64>) -> Result<Self> {
        if noisy.len() != self.outputs.len() {
            return Err(Error::InconsistentTrajectory {
                inputs: self.inputs.len(),
                outputs: noisy.len(),
            });
        }
        self.noisy_outputs = Some(noisy);
        Ok(self)
    }

    /// `T`, the number of inputs.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn noisy_outputs(&self) -> Option<&[f64]> {
        self.noisy_outputs.as_deref()
    }

    /// Outputs as seen by the identification step: noisy ones when present.
    pub fn measured_outputs(&self) -> &[f64] {
        self.noisy_outputs.as_deref().unwrap_or(&self.outputs)
    }

    /// Delimiter-separated text with header `t,u,y[,y_noisy]`; `u` is empty at `t = T`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let noisy = self.noisy_outputs.as_deref();
        out.push_str(if noisy.is_some() { "t,u,y,y_noisy\n" } else { "t,u,y\n" });
        for (t, y) in self.outputs.iter().enumerate() {
            let _ = write!(out, "{t},");
            if let Some(u) = self.inputs.get(t) {
                let _ = write!(out, "{u}");
            }
            let _ = write!(out, ",{y}");
            if let Some(noisy) = noisy {
                let _ = write!(out, ",{}", noisy[t]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let has_noisy = match columns.as_slice() {
            ["t", "u", "y"] => false,
            ["t", "u", "y", "y_noisy"] => true,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected header `{header}`"),
                })
            }
        };
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let mut noisy = Vec::new();
        let mut input_ended = false;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} fields, got {}", columns.len(), fields.len()),
                });
            }
            let t: usize = parse_field(fields[0], lineno)?;
            if t != outputs.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected t = {}, got {t}", outputs.len()),
                });
            }
            if fields[1].is_empty() {
                input_ended = true;
            } else if input_ended {
                return Err(Error::Parse {
                    line: lineno,
                    message: "input after the final time step".into(),
                });
            } else {
                inputs.push(parse_field(fields[1], lineno)?);
            }
            outputs.push(parse_field(fields[2], lineno)?);
            if has_noisy {
                noisy.push(parse_field(fields[3], lineno)?);
            }
        }
        let traj = Trajectory::new(inputs, outputs)?;
        if has_noisy {
            traj.with_noisy_outputs(noisy)
        } else {
            Ok(traj)
        }
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(field: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field.parse().map_err(|e: T::Err| Error::Parse {
        line,
        message: format!("`{field}`: {e}"),
    })
}

/// Augmented state `[y(t-n+1..t); u(t-n+1..t-1)]` together with its order `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    order: usize,
    values: Vec<f64>,
}

impl AugmentedState {
    pub fn new(order: usize, values: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(crate::error::invalid("order", "model order must be >= 1"));
        }
        if values.len() != 2 * order - 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * order - 1,
                actual: values.len(),
            });
        }
        Ok(Self { order, values })
    }

    /// Build from the last `n` outputs and last `n - 1` inputs, oldest first.
    pub fn from_history(outputs: &[f64], inputs: &[f64]) -> Result<Self> {
        let order = outputs.len();
        if order == 0 || inputs.len() + 1 != order {
            return Err(Error::DimensionMismatch {
                expected: order.saturating_sub(1),
                actual: inputs.len(),
            });
        }
        let mut values = outputs.to_vec();
        values.extend_from_slice(inputs);
        Ok(Self { order, values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Most recent output `y(t)`.
    pub fn output(&self) -> f64 {
        self.values[self.order - 1]
    }

    /// Outputs `y(t-n+1..t)`.
    pub fn outputs(&self) -> &[f64] {
        &self.values[..self.order]
    }

    /// Inputs `u(t-n+1..t-1)`.
    pub fn inputs(&self) -> &[f64] {
        &self.values[self.order..]
    }

    /// `zeta(t+1)` from `zeta(t)`, the new output `y(t+1)` and the applied input `u(t)`.
    pub fn shift(&self, y_next: f64, u_now: f64) -> Self {
        Self {
            order: self.order,
            values: shift_state(&self.values, self.order, y_next, u_now),
        }
    }
}

/// Drop the oldest output and input, append `y_next` and `u_now`.
pub fn shift_state(zeta: &[f64], order: usize, y_next: f64, u_now: f64) -> Vec<f64> {
    debug_assert_eq!(zeta.len(), 2 * order - 1);
    let mut next = Vec::with_capacity(zeta.len());
    next.extend_from_slice(&zeta[1..order]);
    next.push(y_next);
    if order > 1 {
        next.extend_from_slice(&zeta[order + 1..]);
        next.push(u_now);
    }
    next
}

/// Selector `[0 I_{n-1} 0] zeta`: all outputs but the oldest.
pub fn recent_outputs(zeta: &[f64], order: usize) -> &[f64] {
    &zeta[1..order]
}

/// Selector `[0 I_{n-2}] zeta`: all past inputs but the oldest.
pub fn recent_inputs(zeta: &[f64], order: usize) -> &[f64] {
    if order >= 2 {
        &zeta[order + 1..]
    } else {
        &zeta[zeta.len()..]
    }
}

/// One training example for the inverse model.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// `[target; zeta]`, dimension `2n`.
    pub xi: Vec<f64>,
    /// Augmented state at decision time, dimension `2n - 1`.
    pub zeta: Vec<f64>,
    /// `y(t+1)` for delay one, `y(t+2)` for delay two.
    pub target: f64,
    /// Input `u(t)` that produced the target.
    pub input: f64,
    /// One-step successor `zeta(t+1)`.
    pub successor: Vec<f64>,
}

impl Record {
    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarxDataset {
    order: usize,
    delay: Delay,
    records: Vec<Record>,
}

impl NarxDataset {
    pub fn empty(order: usize, delay: Delay) -> Self {
        Self {
            order,
            delay,
            records: Vec::new(),
        }
    }

    /// Build from explicit records, dropping exact duplicates of `xi`.
    pub fn from_records(order: usize, delay: Delay, records: Vec<Record>) -> Result<Self> {
        for r in &records {
            if r.zeta.len() != 2 * order - 1 || r.successor.len() != 2 * order - 1 {
                return Err(Error::DimensionMismatch {
                    expected: 2 * order - 1,
                    actual: r.zeta.len(),
                });
            }
            if r.xi.len() != 2 * order || r.xi[0] != r.target || r.xi[1..] != r.zeta[..] {
                return Err(crate::error::invalid("records", "xi must equal [target; zeta]"));
            }
        }
        let mut ds = Self::empty(order, delay);
        ds.records = dedup(records);
        Ok(ds)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn delay(&self) -> Delay {
        self.delay
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &Record {
        &self.records[i]
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.xi.clone()).collect()
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.input).collect()
    }

    /// Dimension of the augmented state, `2n - 1`.
    pub fn state_dim(&self) -> usize {
        2 * self.order - 1
    }
}

fn xi_key(xi: &[f64]) -> Vec<u64> {
    xi.iter().map(|v| v.to_bits()).collect()
}

fn dedup(records: Vec<Record>) -> Vec<Record> {
    let mut seen = HashSet::with_capacity(records.len());
    records
        .into_iter()
        .filter(|r| seen.insert(xi_key(&r.xi)))
        .collect()
}

/// Turn one trajectory into inverse-model training records.
///
/// With `T` inputs this yields `T - n + 1` records for delay one and `T - n` for
/// delay two, before duplicate removal.
pub fn build_dataset(traj: &Trajectory, order: usize, delay: Delay) -> Result<NarxDataset> {
    if order == 0 {
        return Err(crate::error::invalid("order", "model order must be >= 1"));
    }
    let t_len = traj.len();
    let required = order + delay.steps() - 1;
    if t_len < required {
        return Err(Error::TrajectoryTooShort {
            len: t_len,
            required,
        });
    }
    let y = traj.measured_outputs();
    let u = traj.inputs();
    let count = t_len + 1 - required;
    let records = (1..=count)
        .map(|i| {
            // zeta at time i+n-2: outputs y(i-1..=i+n-2), inputs u(i-1..=i+n-3)
            let mut zeta = y[i - 1..i + order - 1].to_vec();
            zeta.extend_from_slice(&u[i - 1..i + order - 2]);
            let input = u[i + order - 2];
            let target = y[i + order - 2 + delay.steps()];
            let successor = shift_state(&zeta, order, y[i + order - 1], input);
            let mut xi = Vec::with_capacity(2 * order);
            xi.push(target);
            xi.extend_from_slice(&zeta);
            Record {
                xi,
                zeta,
                target,
                input,
                successor,
            }
        })
        .collect();
    Ok(NarxDataset {
        order,
        delay,
        records: dedup(records),
    })
}

/// Concatenate datasets sharing `(n, delay)` and remove duplicates globally.
pub fn merge(datasets: &[NarxDataset]) -> Result<NarxDataset> {
    let first = datasets.first().ok_or(Error::EmptyDataset)?;
    let mut all = Vec::new();
    for ds in datasets {
        if ds.order != first.order || ds.delay != first.delay {
            return Err(Error::IncompatibleDatasets {
                left: (first.order, first.delay.steps()),
                right: (ds.order, ds.delay.steps()),
            });
        }
        all.extend(ds.records.iter().cloned());
    }
    Ok(NarxDataset {
        order: first.order,
        delay: first.delay,
        records: dedup(all),
    })
}

/// Build and merge a dataset from several trajectories.
pub fn build_merged(trajs: &[Trajectory], order: usize, delay: Delay) -> Result<NarxDataset> {
    if trajs.is_empty() {
        return Ok(NarxDataset::empty(order, delay));
    }
    let parts = trajs
        .iter()
        .map(|t| build_dataset(t, order, delay))
        .collect::<Result<Vec<_>>>()?;
    merge(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(t_len: usize) -> Trajectory {
        let inputs = (0..t_len).map(|t| 100.0 + t as f64).collect();
        let outputs = (0..=t_len).map(|t| t as f64).collect();
        Trajectory::new(inputs, outputs).unwrap()
    }

    #[test]
    fn dataset_sizes() {
        assert_eq!(build_dataset(&ramp(5), 2, Delay::One).unwrap().len(), 4);
        assert_eq!(build_dataset(&ramp(5), 2, Delay::Two).unwrap().len(), 3);
        assert_eq!(build_dataset(&ramp(2), 2, Delay::One).unwrap().len(), 1);
        assert_eq!(build_dataset(&ramp(3), 2, Delay::Two).unwrap().len(), 1);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            build_dataset(&ramp(1), 2, Delay::One),
            Err(Error::TrajectoryTooShort { len: 1, required: 2 })
        ));
        assert!(build_dataset(&ramp(2), 2, Delay::Two).is_err());
    }

    #[test]
    fn record_layout_delay_one() {
        let ds = build_dataset(&ramp(5), 2, Delay::One).unwrap();
        let r = ds.record(0);
        // zeta(1) = [y(0); y(1); u(0)], target y(2), input u(1)
        assert_eq!(r.zeta, vec![0.0, 1.0, 100.0]);
        assert_eq!(r.target, 2.0);
        assert_eq!(r.input, 101.0);
        assert_eq!(r.xi, vec![2.0, 0.0, 1.0, 100.0]);
        assert_eq!(r.successor, vec![1.0, 2.0, 101.0]);
        let last = ds.record(3);
        assert_eq!(last.target, 5.0);
        assert_eq!(last.input, 104.0);
    }

    #[test]
    fn record_layout_delay_two() {
        let ds = build_dataset(&ramp(5), 2, Delay::Two).unwrap();
        let r = ds.record(0);
        assert_eq!(r.zeta, vec![0.0, 1.0, 100.0]);
        assert_eq!(r.target, 3.0);
        assert_eq!(r.input, 101.0);
        // one-step successor uses the recorded y(t+1)
        assert_eq!(r.successor, vec![1.0, 2.0, 101.0]);
        assert_eq!(ds.record(2).target, 5.0);
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift_state(&[1.0, 2.0, 3.0], 2, 9.0, 7.0), vec![2.0, 9.0, 7.0]);
        assert_eq!(
            shift_state(&[1.0, 2.0, 3.0, 4.0, 5.0], 3, 9.0, 7.0),
            vec![2.0, 3.0, 9.0, 5.0, 7.0]
        );
        assert_eq!(shift_state(&[1.0], 1, 9.0, 7.0), vec![9.0]);
        let z = AugmentedState::new(3, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(z.output(), 3.0);
        assert_eq!(z.shift(9.0, 7.0).as_slice(), &[2.0, 3.0, 9.0, 5.0, 7.0]);
    }

    #[test]
    fn augmented_state_dimension_checked() {
        assert!(AugmentedState::new(2, vec![0.0; 4]).is_err());
        assert!(AugmentedState::from_history(&[1.0, 2.0], &[3.0]).is_ok());
        assert!(AugmentedState::from_history(&[1.0, 2.0], &[]).is_err());
    }

    #[test]
    fn merge_counts() {
        let a = build_dataset(&ramp(4), 2, Delay::One).unwrap();
        assert_eq!(merge(std::slice::from_ref(&a)).unwrap(), a);

        let b_traj = Trajectory::new(vec![-1.0; 5], (0..6).map(|t| -(t as f64) - 10.0).collect())
            .unwrap();
        let b = build_dataset(&b_traj, 2, Delay::One).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(b.len(), 4);
        assert_eq!(merge(&[a.clone(), b]).unwrap().len(), 7);

        // share exactly one record with `a`
        let c_traj = Trajectory::new(vec![100.0, 101.0], vec![0.0, 1.0, 2.0]).unwrap();
        let c = build_dataset(&c_traj, 2, Delay::One).unwrap();
        let shared = c
            .records()
            .iter()
            .filter(|r| a.records().iter().any(|s| s.xi == r.xi))
            .count();
        assert_eq!(shared, 1);
        assert_eq!(merge(&[a.clone(), c.clone()]).unwrap().len(), a.len() + c.len() - 1);

        let other = build_dataset(&ramp(4), 2, Delay::Two).unwrap();
        assert!(matches!(merge(&[a, other]), Err(Error::IncompatibleDatasets { .. })));
    }

    #[test]
    fn duplicates_removed_bitwise() {
        let traj = Trajectory::new(vec![1.0; 6], vec![0.5; 7]).unwrap();
        assert_eq!(build_dataset(&traj, 2, Delay::One).unwrap().len(), 1);
    }

    #[test]
    fn csv_round_trip_and_format() {
        let traj = Trajectory::new(vec![0.25, -1.5], vec![1.0, 2.0, 3.5])
            .unwrap()
            .with_noisy_outputs(vec![1.1, 2.1, 3.6])
            .unwrap();
        let text = traj.to_csv();
        assert_eq!(text, "t,u,y,y_noisy\n0,0.25,1,1.1\n1,-1.5,2,2.1\n2,,3.5,3.6\n");
        assert_eq!(Trajectory::from_csv(&text).unwrap(), traj);
        assert!(Trajectory::from_csv("t,u\n0,1\n").is_err());
        assert!(Trajectory::from_csv("t,u,y\n0,,1\n1,2,3\n").is_err());
    }

    proptest! {
        #[test]
        fn records_read_straight_from_trajectory(
            ys in proptest::collection::vec(-10.0f64..10.0, 8..30),
            order in 1usize..4,
            two in any::<bool>(),
        ) {
            let delay = if two { Delay::Two } else { Delay::One };
            let inputs: Vec<f64> = ys[1..].iter().map(|y| y * 3.0 + 1.0).collect();
            let traj = Trajectory::new(inputs, ys.clone()).unwrap();
            let ds = build_dataset(&traj, order, delay).unwrap();
            for r in ds.records() {
                prop_assert_eq!(r.xi[0], r.target);
                prop_assert_eq!(&r.xi[1..], &r.zeta[..]);
                prop_assert!(ys.contains(&r.target));
                // selector slices reappear in the successor
                let mut expect = recent_outputs(&r.zeta, order).to_vec();
                prop_assert_eq!(&r.successor[..order - 1], &expect[..]);
                expect = recent_inputs(&r.zeta, order).to_vec();
                if order >= 2 {
                    prop_assert_eq!(&r.successor[order..2 * order - 2], &expect[..]);
                    prop_assert_eq!(r.successor[2 * order - 2], r.input);
                }
                if delay == Delay::One {
                    prop_assert_eq!(&shift_state(&r.zeta, order, r.target, r.input), &r.successor);
                }
            }
            prop_assert_eq!(merge(std::slice::from_ref(&ds)).unwrap(), ds);
        }
    }
}
