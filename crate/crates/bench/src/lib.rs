//! Fixtures shared by the benchmarks in `benches/`.

use stopctl_core::pipeline::{prepare, Prepared};
use stopctl_core::RunConfig;

/// The catalog OU-quadratic run on an `n` by `n` lattice with `paths` Monte Carlo paths.
pub fn catalog_run(n: usize, paths: usize) -> Prepared {
    let mut cfg = RunConfig::catalog("ou_quadratic");
    cfg.grid.nx = n;
    cfg.grid.nt = n;
    cfg.sim.n_paths = paths;
    prepare(&cfg).expect("catalog config is valid")
}
