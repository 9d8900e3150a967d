use stopctl_core::io::{read_csv, OS_HEADER};
use stopctl_core::pipeline::{self, prepare, Prepared, OS_FILE};
use stopctl_core::{extract_b_os, Error, RunConfig};
use tempfile::TempDir;

fn small(name: &str) -> Prepared {
    let mut cfg = RunConfig::catalog(name);
    cfg.grid.nx = 80;
    cfg.grid.nt = 80;
    cfg.sim.n_paths = 500;
    prepare(&cfg).unwrap()
}

#[test]
fn surface_and_boundaries_round_trip_exactly() {
    for name in ["ou_quadratic", "halfline_linear"] {
        let dir = TempDir::new().unwrap();
        let p = small(name);
        pipeline::cmd_solve(&p, dir.path()).unwrap();
        let (fresh, _) = pipeline::solve_surface(&p).unwrap();
        let loaded = pipeline::load_surface(&p, dir.path()).unwrap();
        assert_eq!(loaded.v, fresh.v);
        assert_eq!(loaded.region, fresh.region);
        let fb = pipeline::cmd_boundaries(&p, dir.path()).unwrap();
        assert_eq!(pipeline::load_boundaries(&p, dir.path()).unwrap(), fb);
    }
}

#[test]
fn os_artifact_has_one_row_per_node_and_stamped_hash() {
    let dir = TempDir::new().unwrap();
    let p = small("ou_quadratic");
    pipeline::cmd_solve(&p, dir.path()).unwrap();
    pipeline::cmd_boundaries(&p, dir.path()).unwrap();
    pipeline::cmd_osolve(&p, dir.path()).unwrap();
    let table = read_csv(&dir.path().join(OS_FILE), &OS_HEADER).unwrap();
    assert_eq!(table.config_hash, p.hash);
    assert_eq!(table.rows.len(), 81 * 81);
}

#[test]
fn stale_artifacts_are_rejected() {
    let dir = TempDir::new().unwrap();
    let p = small("ou_quadratic");
    pipeline::cmd_solve(&p, dir.path()).unwrap();
    let mut other = p.config.clone();
    other.sim.master_seed += 1;
    let q = prepare(&other).unwrap();
    assert!(matches!(pipeline::cmd_boundaries(&q, dir.path()), Err(Error::Artifact { .. })));
    let mut finer = p.config.clone();
    finer.grid.nx = 100;
    let q = prepare(&finer).unwrap();
    assert!(matches!(pipeline::load_surface(&q, dir.path()), Err(Error::Artifact { .. })));
}

#[test]
fn action_boundaries_from_both_solvers_agree() {
    let mut cfg = RunConfig::catalog("ou_quadratic");
    cfg.diagnostics.base_nx = 100;
    cfg.diagnostics.base_nt = 100;
    let p = prepare(&cfg).unwrap();
    let levels = pipeline::solve_levels(&p, 2).unwrap();
    for level in &levels {
        let dx = level.surface.grid.dx;
        let b_os = extract_b_os(&level.os);
        let j_max = (0.9 * level.surface.grid.nt as f64) as usize;
        for (j, (b, c)) in level.fb.b.iter().zip(&b_os).enumerate().take(j_max + 1) {
            if let (Some(b), Some(c)) = (b.value(), c.value()) {
                assert!((b - c).abs() <= 4.0 * dx, "level {j}: b {b} b_os {c}");
            }
        }
    }
}

#[test]
fn saddle_experiment_reports_every_deviation() {
    let p = small("ou_quadratic");
    let (s, _) = pipeline::solve_surface(&p).unwrap();
    let fb = stopctl_core::extract_boundaries(&s).unwrap();
    let r = pipeline::run_saddle(&p, &fb).unwrap();
    assert!(r.rows.len() >= 8);
    let again = pipeline::run_saddle(&p, &fb).unwrap();
    assert_eq!(r, again);
}
