//! Fixtures shared by the benchmarks.

use invlearn::plants::{self, NoiseSpec};
use invlearn::{
    build_level_family, build_merged, ArdMatern52Kernel, BoundSet, ControllerConfig, Delay, EtaMode, FallbackPolicy,
    GammaMode, Interpolant, IsotropicKernel, Kernel, NarxDataset, Pendulum,
};

pub const NUMERICAL_DELTAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0, 3.0];

pub fn numerical_dataset() -> NarxDataset {
    build_merged(&plants::collect_numerical_dataset(0).unwrap(), 2, Delay::One).unwrap()
}

pub fn numerical_kernel() -> Kernel {
    IsotropicKernel::squared_exponential(1.0, 2.0 * std::f64::consts::SQRT_2)
        .unwrap()
        .into()
}

pub fn pendulum_dataset() -> NarxDataset {
    let trajs = plants::collect_pendulum_dataset(&Pendulum::default(), &NoiseSpec::none(0)).unwrap();
    build_merged(&trajs, 2, Delay::Two).unwrap()
}

pub fn pendulum_kernel() -> Kernel {
    ArdMatern52Kernel::new(10.0, vec![0.1, 0.1, 0.1, 3.0]).unwrap().into()
}

pub fn pendulum_bounds() -> BoundSet {
    let (l_f, l_c) = Pendulum::default().lipschitz_constants();
    BoundSet::new(
        l_f,
        l_c,
        1.0,
        Delay::Two,
        EtaMode::ProfileDerived(pendulum_kernel().radial_minorant()),
        GammaMode::Linear { slope: 1.005 },
    )
    .unwrap()
}

pub fn numerical_controller() -> ControllerConfig {
    let ds = numerical_dataset();
    let model = Interpolant::fit(numerical_kernel(), &ds, 0.0).unwrap();
    let bounds = BoundSet::numerical_benchmark();
    let families = NUMERICAL_DELTAS
        .iter()
        .map(|&d| build_level_family(&ds, &bounds, d, 20).unwrap())
        .collect();
    ControllerConfig::new(ds, model, bounds, families, FallbackPolicy::BestSlack).unwrap()
}
