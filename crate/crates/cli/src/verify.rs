//! Property suites run by `verify`. Each check is usable on its own; [`verify`]
//! loads the artifacts from disk and runs all of them.

use std::fmt::Write as _;

use anyhow::Result;
use invlearn::level_sets::{inradius_in_union, sample_in_ball};
use invlearn::plants::{self, uniform_grid};
use invlearn::{
    Ball, BoundSet, Delay, GammaMode, Interpolant, LevelFamily, NarxDataset, NumericalPlant,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{PlantId, RunConfig};
use crate::pipeline;

pub const VERIFY_REPORT: &str = "verify_report.csv";
pub const VERIFY_FAILURES: &str = "verify_failures.txt";
/// Absolute slack allowed in every sampled inequality.
pub const SLACK: f64 = 1e-9;
const MAX_COUNTEREXAMPLES: usize = 20;

/// Stream ids of the verification samplers, disjoint from data and online noise.
mod streams {
    pub const BOUNDS: u64 = 3 << 20;
    pub const GEOMETRY: u64 = (3 << 20) + 1;
    pub const AUDIT: u64 = (3 << 20) + 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub status: Status,
    /// Number of cases evaluated.
    pub checked: usize,
    pub detail: String,
    pub counterexamples: Vec<String>,
}

impl Property {
    fn judge(name: &str, checked: usize, detail: String, counterexamples: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            status: if counterexamples.is_empty() { Status::Pass } else { Status::Fail },
            checked,
            detail,
            counterexamples,
        }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Self {
            name: name.to_string(),
            status: Status::Skipped,
            checked: 0,
            detail: why.to_string(),
            counterexamples: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

fn push_example(list: &mut Vec<String>, total: &mut usize, msg: impl FnOnce() -> String) {
    *total += 1;
    if list.len() < MAX_COUNTEREXAMPLES {
        list.push(msg());
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub properties: Vec<Property>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(Property::passed)
    }

    pub fn get(&self, name: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("property,status,checked,detail\n");
        for p in &self.properties {
            let _ = writeln!(out, "{},{},{},{}", p.name, p.status.label(), p.checked, p.detail.replace(',', ";"));
        }
        out
    }

    pub fn failures_text(&self) -> String {
        let mut out = String::new();
        for p in self.properties.iter().filter(|p| p.status == Status::Fail) {
            let _ = writeln!(out, "[{}] {}", p.name, p.detail);
            for c in &p.counterexamples {
                let _ = writeln!(out, "  {c}");
            }
        }
        out
    }
}

/// `max_i |c_hat(xi_i) - u_i| <= tol`.
pub fn exactness(model: &Interpolant, tol: f64) -> Property {
    let res = model.max_training_residual();
    let bad = if res <= tol {
        Vec::new()
    } else {
        vec![format!("max residual {res:e} > {tol:e}")]
    };
    Property::judge("interpolation_exactness", model.len(), format!("max residual {res:e}"), bad)
}

/// `|c(xi) - c_hat(xi)| <= eta(eps(xi)) + SLACK` on a `per_axis^4` grid over the
/// feasible region of the numerical plant.
pub fn oracle_agreement(model: &Interpolant, dataset: &NarxDataset, bounds: &BoundSet, per_axis: usize) -> Property {
    let ys = uniform_grid(-1.0, 1.0, per_axis);
    let us = uniform_grid(0.0, 1.0, per_axis);
    let mut grid = Vec::with_capacity(per_axis.pow(4));
    for &t in &ys {
        for &a in &ys {
            for &b in &ys {
                for &u in &us {
                    grid.push([t, a, b, u]);
                }
            }
        }
    }
    let train = dataset.inputs();
    let results: Vec<Option<String>> = grid
        .par_iter()
        .map(|xi| {
            let eps = train
                .iter()
                .map(|p| invlearn::kernels::euclidean(p, xi))
                .fold(f64::INFINITY, f64::min);
            let err = (NumericalPlant::inverse_oracle(xi) - model.predict(xi).ok()?).abs();
            let eta = bounds.eta(eps).ok()?;
            (err > eta + SLACK).then(|| format!("xi={xi:?} |c-c_hat|={err:e} eta({eps:.4})={eta:e}"))
        })
        .collect();
    let mut bad = Vec::new();
    let mut total = 0;
    for msg in results.into_iter().flatten() {
        push_example(&mut bad, &mut total, || msg);
    }
    Property::judge(
        "inverse_oracle_agreement",
        grid.len(),
        format!("{total} of {} grid points exceed eta", grid.len()),
        bad,
    )
}

/// Sample a state near `center`, clamped to the feasible state box of the plant.
fn sample_state(rng: &mut ChaCha8Rng, plant: PlantId, center: &[f64]) -> Vec<f64> {
    let radius = 10f64.powf(rng.random_range(-4.0..=0.0));
    let mut z = sample_in_ball(rng, center, radius);
    if plant == PlantId::Numerical {
        z[0] = z[0].clamp(-1.0, 1.0);
        z[1] = z[1].clamp(-1.0, 1.0);
        z[2] = z[2].clamp(0.0, 1.0);
    }
    z
}

/// Empirical check of the input, output and successor bounds with the true
/// plant as oracle, over `samples` (record, nearby state) pairs. Pairs where the
/// learned input is infeasible for the plant are redrawn and counted.
///
/// Returns `gamma_u`, `gamma_y` (delay one only) and `gamma` properties.
pub fn bound_validity(
    plant_id: PlantId,
    dataset: &NarxDataset,
    model: &Interpolant,
    bounds: &BoundSet,
    samples: usize,
    seed: u64,
) -> Vec<Property> {
    let plant = pipeline::plant_for(plant_id);
    let order = dataset.order();
    let mut rng = plants::rng_stream(seed, streams::BOUNDS);
    let (mut bad_u, mut bad_y, mut bad_g) = (Vec::new(), Vec::new(), Vec::new());
    let (mut n_u, mut n_y, mut n_g) = (0, 0, 0);
    let (mut drawn, mut redrawn) = (0, 0);
    let mut worst = [f64::NEG_INFINITY; 3];
    while drawn < samples && !dataset.is_empty() {
        if redrawn > 100 * samples.max(1) {
            break;
        }
        let i = rng.random_range(0..dataset.len());
        let rec = dataset.record(i);
        let zeta = sample_state(&mut rng, plant_id, &rec.zeta);
        let eps = invlearn::kernels::euclidean(&rec.zeta, &zeta);
        let mut xi = vec![rec.target];
        xi.extend_from_slice(&zeta);
        let Ok(u) = model.predict(&xi) else {
            redrawn += 1;
            continue;
        };
        if !plant.input_feasible(&zeta, u) {
            redrawn += 1;
            continue;
        }
        let (Ok(y_next), Ok(y_delayed)) = (plant.next_output(&zeta, u), plant.delayed_output(&zeta, u)) else {
            redrawn += 1;
            continue;
        };
        drawn += 1;
        let gu = bounds.gamma_u(eps).unwrap_or(f64::NAN);
        let du = (rec.input - u).abs();
        worst[0] = worst[0].max(du - gu);
        if !(du <= gu + SLACK) {
            push_example(&mut bad_u, &mut n_u, || format!("record {i} zeta={zeta:?}: |u_i-u|={du:e} > gamma_u({eps:e})={gu:e}"));
        }
        if bounds.delay() == Delay::One {
            let gy = bounds.gamma_y(eps).unwrap_or(f64::NAN);
            let dy = (rec.target - y_delayed).abs();
            worst[1] = worst[1].max(dy - gy);
            if !(dy <= gy + SLACK) {
                push_example(&mut bad_y, &mut n_y, || format!("record {i} zeta={zeta:?}: |y_i+-y+|={dy:e} > gamma_y({eps:e})={gy:e}"));
            }
        }
        let succ = invlearn::data::shift_state(&zeta, order, y_next, u);
        let ds = invlearn::kernels::euclidean(&rec.successor, &succ);
        let g = bounds.gamma(eps).unwrap_or(f64::NAN);
        worst[2] = worst[2].max(ds - g);
        if !(ds <= g + SLACK) {
            push_example(&mut bad_g, &mut n_g, || format!("record {i} zeta={zeta:?}: |zeta_i+-zeta+|={ds:e} > gamma({eps:e})={g:e}"));
        }
    }
    let shortfall = (drawn < samples).then(|| format!("only {drawn} of {samples} feasible samples"));
    let detail = |n: usize, w: f64| {
        format!(
            "{n} violations in {drawn} samples ({redrawn} redrawn); max(lhs - bound) = {w:e}{}",
            shortfall.as_ref().map_or(String::new(), |s| format!("; {s}"))
        )
    };
    let with_shortfall = |mut bad: Vec<String>| {
        if let Some(s) = &shortfall {
            bad.push(s.clone());
        }
        bad
    };
    let mut out = vec![Property::judge("bound_gamma_u", drawn, detail(n_u, worst[0]), with_shortfall(bad_u))];
    if bounds.delay() == Delay::One {
        out.push(Property::judge("bound_gamma_y", drawn, detail(n_y, worst[1]), with_shortfall(bad_y)));
    }
    out.push(Property::judge("bound_gamma", drawn, detail(n_g, worst[2]), with_shortfall(bad_g)));
    out
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Zero at zero and strictly increasing on a 1000-point log grid over
/// `[1e-9, 1e3]`. `eta` may flatten once it reaches its floating-point ceiling.
pub fn class_k(bounds: &BoundSet) -> Property {
    let grid = log_grid(1e-9, 1e3, 1000);
    type Named<'a> = (&'static str, Box<dyn Fn(f64) -> f64 + 'a>, bool);
    let mut fns: Vec<Named<'_>> = vec![
        ("eta", Box::new(|e| bounds.eta(e).unwrap_or(f64::NAN)), true),
        ("gamma_u", Box::new(|e| bounds.gamma_u(e).unwrap_or(f64::NAN)), false),
        ("gamma", Box::new(|e| bounds.gamma(e).unwrap_or(f64::NAN)), false),
    ];
    if bounds.delay() == Delay::One {
        fns.push(("gamma_y", Box::new(|e| bounds.gamma_y(e).unwrap_or(f64::NAN)), false));
    }
    let mut bad = Vec::new();
    let mut total = 0;
    for (name, f, may_saturate) in &fns {
        if f(0.0) != 0.0 {
            push_example(&mut bad, &mut total, || format!("{name}(0) = {}", f(0.0)));
        }
        let vals: Vec<f64> = grid.iter().map(|&e| f(e)).collect();
        let ceiling = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (k, w) in vals.windows(2).enumerate() {
            let flat_at_top = *may_saturate && w[0] == w[1] && w[1] >= ceiling * (1.0 - 1e-12);
            if !(w[1] > w[0] || flat_at_top) {
                push_example(&mut bad, &mut total, || {
                    format!("{name} not increasing between {} and {}: {} -> {}", grid[k], grid[k + 1], w[0], w[1])
                });
                break;
            }
        }
    }
    Property::judge("class_k", grid.len() * fns.len(), format!("{total} failures"), bad)
}

/// `|gamma(gamma_inverse(r)) - r| <= 1e-9 max(1, r)` for `points` log-spaced `r`
/// in `[1e-6, 1e3]`.
pub fn gamma_inversion(name: &str, bounds: &BoundSet, points: usize) -> Property {
    let mut bad = Vec::new();
    let mut total = 0;
    let mut worst: f64 = 0.0;
    for r in log_grid(1e-6, 1e3, points.max(2)) {
        let back = bounds.gamma_inverse(r).and_then(|e| bounds.gamma(e));
        match back {
            Ok(g) => {
                let rel = (g - r).abs() / r.max(1.0);
                worst = worst.max(rel);
                if rel > 1e-9 {
                    push_example(&mut bad, &mut total, || format!("r={r}: gamma(gamma_inv(r))={g}"));
                }
            }
            Err(e) => push_example(&mut bad, &mut total, || format!("r={r}: {e}")),
        }
    }
    Property::judge(name, points, format!("max relative error {worst:e}"), bad)
}

/// Distance from `p` along unit direction `d` until the ray leaves the union.
pub fn exit_distance(p: &[f64], d: &[f64], balls: &[Ball]) -> f64 {
    // each ball meets the ray in [s0, s1]; chain the intervals that start at 0
    let mut intervals: Vec<(f64, f64)> = balls
        .iter()
        .filter_map(|b| {
            let w: Vec<f64> = p.iter().zip(&b.center).map(|(x, c)| x - c).collect();
            let bq = w.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
            let c = w.iter().map(|a| a * a).sum::<f64>() - b.radius * b.radius;
            let disc = bq * bq - c;
            (disc >= 0.0).then(|| (-bq - disc.sqrt(), -bq + disc.sqrt()))
        })
        .filter(|&(_, s1)| s1 > 0.0)
        .collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = 0.0;
    for (s0, s1) in intervals {
        if s0 > reach {
            break;
        }
        reach = f64::max(reach, s1);
    }
    reach
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v = sample_in_ball(rng, &vec![0.0; dim], 1.0);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        return e;
    }
    v.iter().map(|x| x / n).collect()
}

/// The union inradius never exceeds the smallest exit distance over 2000
/// sampled directions, on `configs` random unions of 2 to 6 balls in 3-D.
pub fn inradius_geometry(configs: usize, seed: u64) -> Property {
    let mut rng = plants::rng_stream(seed, streams::GEOMETRY);
    let mut bad = Vec::new();
    let mut total = 0;
    let mut checked = 0;
    for c in 0..configs {
        let count = rng.random_range(2..=6);
        let balls: Vec<Ball> = (0..count)
            .map(|_| {
                let center: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
                Ball::new(center, rng.random_range(0.2..=1.0))
            })
            .collect();
        let host = &balls[rng.random_range(0..count)];
        let p = sample_in_ball(&mut rng, &host.center, host.radius * 0.999);
        let Some(lower) = inradius_in_union(&p, &balls) else {
            push_example(&mut bad, &mut total, || format!("config {c}: point {p:?} inside a ball reported outside the union"));
            continue;
        };
        checked += 1;
        let sampled = (0..2000)
            .map(|_| exit_distance(&p, &unit_vector(&mut rng, 3), &balls))
            .fold(f64::INFINITY, f64::min);
        if lower > sampled + 1e-12 {
            push_example(&mut bad, &mut total, || format!("config {c}: inradius {lower} > sampled {sampled} at {p:?}"));
        }
    }
    Property::judge("inradius_underestimate", checked, format!("{total} failures in {configs} unions"), bad)
}

/// Sampled audit of every family: positive radii, certificate radii, level-0
/// slab containment and `samples_per_entry` points per entry inside the level below.
pub fn level_recursion(
    families: &[LevelFamily],
    dataset: &NarxDataset,
    bounds: &BoundSet,
    samples_per_entry: usize,
    seed: u64,
) -> Property {
    let mut bad = Vec::new();
    let mut total = 0;
    let (mut entries, mut points) = (0, 0);
    for (k, fam) in families.iter().enumerate() {
        let audit = fam.audit(dataset, bounds, samples_per_entry, seed ^ streams::AUDIT ^ k as u64);
        entries += audit.entries_checked;
        points += audit.points_sampled;
        for v in audit.violations {
            push_example(&mut bad, &mut total, || v);
        }
    }
    Property::judge(
        "level_soundness",
        points,
        format!("{total} violations; {entries} entries; {points} sampled points"),
        bad,
    )
}

/// Oracle inverse composed with the plant returns the target, on a `10^4` grid.
pub fn inverse_identity(plant_id: PlantId) -> Property {
    let plant = pipeline::plant_for(plant_id);
    let (ys, us) = match plant_id {
        PlantId::Numerical => (uniform_grid(-1.0, 1.0, 10), uniform_grid(0.0, 1.0, 10)),
        PlantId::Pendulum => (uniform_grid(-0.3, 0.3, 10), uniform_grid(-5.0, 5.0, 10)),
    };
    let mut bad = Vec::new();
    let mut total = 0;
    let mut checked = 0;
    for &t in &ys {
        for &a in &ys {
            for &b in &ys {
                for &u_prev in &us {
                    let zeta = [a, b, u_prev];
                    let xi = [t, a, b, u_prev];
                    checked += 1;
                    let Some(u) = plant.inverse(&xi) else { continue };
                    match plant.delayed_output(&zeta, u) {
                        Ok(y) if (y - t).abs() <= 1e-9 => {}
                        other => push_example(&mut bad, &mut total, || format!("xi={xi:?}: plant gives {other:?}")),
                    }
                }
            }
        }
    }
    Property::judge("inverse_identity", checked, format!("{total} failures"), bad)
}

/// Bounds with the composed successor function `gamma_u + (1 + L_f) e` even when
/// the controller runs on a linear override.
pub fn composed_bounds(bounds: &BoundSet) -> invlearn::Result<BoundSet> {
    BoundSet::new(
        bounds.lipschitz_f(),
        bounds.lipschitz_c(),
        bounds.rkhs_bound(),
        bounds.delay(),
        bounds.eta_mode().clone(),
        GammaMode::Composed,
    )
}

/// Run every suite on the artifacts under `cfg.out` and write the report.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let dataset = pipeline::load_dataset(cfg)?;
    let model = Interpolant::from_text(&std::fs::read_to_string(cfg.out.join(pipeline::MODEL))?)?;
    let bounds = cfg.bounds.resolve(model.kernel(), cfg.delay)?;
    let families = pipeline::load_families(cfg, &dataset)?;
    let v = cfg.verify;
    let noisy = cfg.dataset_std > 0.0;
    let mut props = Vec::new();

    props.push(inverse_identity(cfg.plant));
    props.push(if model.regularization() == 0.0 {
        exactness(&model, 1e-8)
    } else {
        Property::skipped("interpolation_exactness", "ridge regression (lambda > 0)")
    });
    props.push(match (cfg.plant, noisy) {
        (PlantId::Numerical, false) => oracle_agreement(&model, &dataset, &bounds, v.oracle_grid_per_axis),
        (PlantId::Numerical, true) => Property::skipped("inverse_oracle_agreement", "noisy dataset"),
        (PlantId::Pendulum, _) => Property::skipped("inverse_oracle_agreement", "closed-form eta only for the numerical plant"),
    });
    if noisy {
        props.push(Property::skipped("bound_gamma", "noisy dataset: records are not exact plant samples"));
    } else {
        let derived = composed_bounds(&bounds)?;
        props.extend(bound_validity(cfg.plant, &dataset, &model, &derived, v.bound_samples, cfg.seed));
    }
    props.push(class_k(&bounds));
    props.push(gamma_inversion("gamma_inversion", &bounds, v.inverse_points));
    if bounds.gamma_mode() != GammaMode::Composed {
        props.push(gamma_inversion("gamma_inversion_composed", &composed_bounds(&bounds)?, v.inverse_points));
    }
    props.push(inradius_geometry(v.geometry_configs, cfg.seed));
    props.push(level_recursion(&families, &dataset, &bounds, v.level_samples_per_entry, cfg.seed));

    let report = VerifyReport { properties: props };
    std::fs::write(cfg.out.join(VERIFY_REPORT), report.to_csv())?;
    std::fs::write(cfg.out.join(VERIFY_FAILURES), report.failures_text())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_distance_examples() {
        let one = [Ball::new(vec![0.0, 0.0], 1.0)];
        assert!((exit_distance(&[0.0, 0.0], &[1.0, 0.0], &one) - 1.0).abs() < 1e-12);
        assert!((exit_distance(&[0.5, 0.0], &[-1.0, 0.0], &one) - 1.5).abs() < 1e-12);
        let chain = [Ball::new(vec![0.0, 0.0], 1.0), Ball::new(vec![1.5, 0.0], 1.0)];
        assert!((exit_distance(&[0.0, 0.0], &[1.0, 0.0], &chain) - 2.5).abs() < 1e-12);
        let gap = [Ball::new(vec![0.0, 0.0], 1.0), Ball::new(vec![3.0, 0.0], 1.0)];
        assert!((exit_distance(&[0.0, 0.0], &[1.0, 0.0], &gap) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_suite_passes() {
        let p = inradius_geometry(20, 1);
        assert_eq!(p.status, Status::Pass, "{:?}", p.counterexamples);
    }

    #[test]
    fn class_k_and_inversion_on_linear_bounds() {
        let b = BoundSet::new(
            2.0,
            1.0,
            1.0,
            Delay::Two,
            invlearn::EtaMode::Linear { slope: 1.0 },
            GammaMode::Linear { slope: 1.005 },
        )
        .unwrap();
        assert_eq!(class_k(&b).status, Status::Pass);
        assert_eq!(gamma_inversion("g", &b, 100).status, Status::Pass);
        assert_eq!(class_k(&BoundSet::numerical_benchmark()).status, Status::Pass);
    }

    #[test]
    fn inverse_identity_both_plants() {
        assert_eq!(inverse_identity(PlantId::Numerical).status, Status::Pass);
        assert_eq!(inverse_identity(PlantId::Pendulum).status, Status::Pass);
    }
}
