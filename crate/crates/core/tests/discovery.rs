mod common;

use std::collections::BTreeSet;

use camuv::discovery::{self, check_sink, combinations, discover, find_most_endogenous, Config};

fn config() -> Config {
    Config::default()
}

#[test]
fn chain_is_recovered() {
    let data = common::sample(&common::chain3(), 600, 1);
    let (g, trace) = discover(&data, &config()).unwrap();
    assert_eq!(g.directed_edges(), BTreeSet::from([(0, 1), (1, 2)]));
    assert!(g.dashed.is_empty());
    assert!(trace.warnings.is_empty());
}

#[test]
fn independent_variables_give_an_empty_graph() {
    let data = common::sample(&common::observed_only(3, &[]), 300, 2);
    let (g, trace) = discover(&data, &config()).unwrap();
    assert!(g.directed_edges().is_empty());
    assert!(g.dashed.is_empty());
    assert_eq!(trace.acceptances, 0);
}

#[test]
fn no_change_sweep_with_full_sets_counts_every_member() {
    for (p, expected) in [(3usize, 9u64), (4, 28)] {
        let data = common::sample(&common::observed_only(p, &[]), 200, p as u64);
        let cfg = Config {
            max_set_size: p,
            ..config()
        };
        let (_, trace) = discover(&data, &cfg).unwrap();
        let formula: u64 = (2..=p).map(|t| (combinations(p, t).len() * t) as u64).sum();
        assert_eq!(formula, expected);
        assert_eq!(trace.acceptances, 0);
        assert_eq!(trace.sink_search_evaluations, expected);
        assert_eq!(trace.final_sweep_evaluations(), expected);
    }
}

#[test]
fn sink_of_a_nonlinear_pair() {
    let s = common::observed_only(2, &[(1, 2)]);
    let data = common::sample(&s, 500, 3);
    let parents = vec![BTreeSet::new(); 2];
    let (b, e) = find_most_endogenous(&[0, 1], &parents, &data, &config()).unwrap();
    assert_eq!(b, 1);
    assert!(e > 0.01);
    assert!(check_sink(1, &[0, 1], &parents, &data, &config()).unwrap());
    assert!(check_sink(7, &[0, 1], &parents, &data, &config()).is_err());
}

#[test]
fn staged_calls_match_the_full_pipeline() {
    let data = common::sample(&common::collider3(), 400, 4);
    let (parents, _) = discovery::get_directed_edges(&data, &config()).unwrap();
    let dashed = discovery::get_undirected_edges(&data, &parents, &config()).unwrap();
    let (g, _) = discover(&data, &config()).unwrap();
    assert_eq!(g.parents, parents);
    assert_eq!(g.dashed, dashed);
}

#[test]
fn repeated_runs_are_identical() {
    let data = common::sample(&common::latent_example(), 300, 5);
    let (a, ta) = discover(&data, &config()).unwrap();
    let (b, tb) = discover(&data, &config()).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
}

#[test]
fn latent_example_mostly_recovered() {
    let data = common::sample(&common::latent_example(), 1000, 6);
    let (g, _) = discover(&data, &config()).unwrap();
    let truth: BTreeSet<(usize, usize)> = common::LATENT_EXAMPLE_DIRECTED
        .iter()
        .map(|&(a, b)| (a - 1, b - 1))
        .collect();
    let est = g.directed_edges();
    let tp = est.intersection(&truth).count();
    assert!(tp >= 5, "estimated {est:?}");
}
