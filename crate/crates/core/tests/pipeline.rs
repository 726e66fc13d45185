use dynnet_core::analytic::{degree_mean_var, edge_degree_theory};
use dynnet_core::bjr::{solve_rho, IterationOptions, Kernel, TypeGrid};
use dynnet_core::critical::{r_and_verdict, Verdict};
use dynnet_core::graphstats::{edge_degree_moments, largest_component, AssortativityPolicy};
use dynnet_core::sim::{run, RunOptions, StopRule};
use dynnet_core::{ModelParams, RngStream, SocialIndexDistribution as Dist, Version};

fn run_one(p: &ModelParams, dist: &Dist, n: usize, seed: u64) -> dynnet_core::Snapshot {
    run(p, dist, StopRule::Population(n), RngStream::new(seed, 0), RunOptions::default()).unwrap().snapshot
}

#[test]
fn snapshot_degrees_are_consistent() {
    let p = ModelParams::new(1.0, 0.3, 0.8, 0.5, Version::P);
    let snap = run_one(&p, &Dist::exponential(1.0), 3000, 1);
    assert_eq!(snap.node_count(), 3000);
    let mut again = snap.clone();
    again.recompute_degrees();
    assert_eq!(again, snap);
    let total: u64 = snap.nodes.iter().map(|n| n.degree).sum();
    assert_eq!(total, 2 * snap.edge_copies());
}

#[test]
fn moments_track_theory_on_one_large_run() {
    let p = ModelParams::new(1.0, 0.2, 1.5, 0.4, Version::U);
    let dist = Dist::two_point(0.5, 2.0, 0.5);
    let snap = run_one(&p, &dist, 40_000, 2);
    let (mean, _) = degree_mean_var(&p, &dist).unwrap();
    assert!((snap.mean_degree() - mean).abs() / mean < 0.04, "{} vs {mean}", snap.mean_degree());
    let th = edge_degree_theory(&p, &dist).unwrap();
    let mc = edge_degree_moments(&snap, AssortativityPolicy::default()).unwrap();
    // excess degree: one less than the endpoint degree
    assert!((mc.mean - 1.0 - th.mean).abs() / th.mean < 0.05, "{} vs {}", mc.mean - 1.0, th.mean);
}

#[test]
fn verdict_and_fixed_point_agree_with_simulated_giant() {
    let dist = Dist::constant(1.0);
    let p = ModelParams::new(1.0, 0.2, 1.2, 0.8, Version::U);
    let report = r_and_verdict(&p, &dist, 0.02).unwrap();
    assert_eq!(report.verdict, Verdict::Giant);
    let kernel = Kernel::model(&p, &dist).unwrap();
    let grid = TypeGrid::for_kernel(&kernel).unwrap();
    let rho = solve_rho(&kernel, &grid, IterationOptions::default()).unwrap().rho_kappa;
    let frac = largest_component(&run_one(&p, &dist, 40_000, 3)).fraction;
    assert!((frac - rho).abs() < 0.04, "{frac} vs {rho}");
}
