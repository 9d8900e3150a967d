mod common;

use common::oracle::OuGame;
use stopctl_core::pipeline::prepare;
use stopctl_core::{extract_boundaries, solve_vi, RunConfig};

fn catalog(n: usize) -> stopctl_core::pipeline::Prepared {
    let mut cfg = RunConfig::catalog("ou_quadratic");
    cfg.grid.nx = n;
    cfg.grid.nt = n;
    prepare(&cfg).unwrap()
}

#[test]
fn tree_oracle_is_self_consistent() {
    let game = OuGame::default();
    let coarse = game.solve(200).at(game.x_ref);
    let fine = game.solve(400).at(game.x_ref);
    assert!((coarse - fine).abs() < 1e-4, "{coarse} {fine}");
    let r = game.richardson_at_ref(100);
    assert!((r - fine).abs() < 1e-4);
    // Never below the obstacle, never steeper than alpha0.
    let s = game.solve(100);
    assert!(s.v.iter().all(|&v| v >= game.g0 - 1e-12));
    assert!(s.v.windows(2).all(|w| (w[1] - w[0]) / s.dx <= game.alpha0 + 1e-12));
}

#[test]
fn pde_value_matches_tree_at_moderate_resolution() {
    let p = catalog(200);
    let s = solve_vi(&p.model, &p.grid).unwrap();
    let pde = s.value_at(0, p.model.x_ref);
    let oracle = OuGame::default().richardson_at_ref(100);
    let rel = (pde - oracle).abs() / oracle;
    assert!(rel < 3e-3, "pde {pde} oracle {oracle} rel {rel}");
}

#[test]
fn initial_boundaries_match_tree_within_two_cells() {
    let p = catalog(400);
    let s = solve_vi(&p.model, &p.grid).unwrap();
    let fb = extract_boundaries(&s).unwrap();
    let game = OuGame::default();
    let tree = game.solve(1600);
    let a_tree = tree.stopping_boundary(game.g0, 1e-9).unwrap();
    let b_tree = tree.action_boundary(game.alpha0, 1e-6).unwrap();
    let a = fb.a[0].value().unwrap();
    let b = fb.b[0].value().unwrap();
    assert!((a - a_tree).abs() <= 2.0 * p.grid.dx, "a {a} tree {a_tree}");
    assert!((b - b_tree).abs() <= 2.0 * p.grid.dx, "b {b} tree {b_tree}");
}
