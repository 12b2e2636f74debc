#![allow(dead_code)]

use flexcurve::models::{Node, TreeBuilder};
use flexcurve::{money_of_utility, utility_of_money, DecisionTree, Prospect, RiskAversion};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn ra(v: f64) -> RiskAversion {
    RiskAversion::new(v).unwrap()
}

/// 2..=max_points distinct values in `[lo, hi]` with random positive masses.
pub fn random_discrete(rng: &mut ChaCha8Rng, max_points: usize, lo: f64, hi: f64) -> Prospect {
    let n = rng.gen_range(2..=max_points);
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    Prospect::discrete(
        weights
            .iter()
            .map(|w| (rng.gen_range(lo..hi), w / total))
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

/// Values on a ten-unit lattice and masses in tenths, so worst cases, masses
/// and whole distributions coincide often.
pub fn coarse_discrete(rng: &mut ChaCha8Rng) -> Prospect {
    let n = rng.gen_range(1..=4);
    let mut values: Vec<f64> = (0..5).map(|i| 10.0 * i as f64).collect();
    let mut points = Vec::with_capacity(n);
    let mut left = 10u32;
    for i in 0..n {
        let idx = rng.gen_range(0..values.len());
        let v = values.swap_remove(idx);
        let tenths = if i + 1 == n {
            left
        } else {
            rng.gen_range(1..=left - (n - i - 1) as u32)
        };
        left -= tenths;
        points.push((v, tenths as f64 / 10.0));
    }
    Prospect::discrete(points).unwrap()
}

/// Random tree with at most `max_depth` levels of internal nodes and up to
/// three children per node.
pub fn random_tree(rng: &mut ChaCha8Rng, max_depth: usize) -> DecisionTree {
    let mut b = TreeBuilder::new();
    let mut next = 0usize;
    grow(rng, &mut b, &mut next, 0, max_depth);
    b.build("n0").unwrap()
}

fn grow(
    rng: &mut ChaCha8Rng,
    b: &mut TreeBuilder,
    next: &mut usize,
    depth: usize,
    max_depth: usize,
) -> String {
    let id = format!("n{next}");
    *next += 1;
    let leaf = depth == max_depth || (depth > 0 && rng.gen_bool(0.3));
    if leaf {
        b.terminal(id.clone(), rng.gen_range(-100.0..100.0));
        return id;
    }
    let n = rng.gen_range(1..=3);
    let kids: Vec<String> = (0..n)
        .map(|_| grow(rng, b, next, depth + 1, max_depth))
        .collect();
    if rng.gen_bool(0.5) {
        let labels = kids
            .iter()
            .enumerate()
            .map(|(i, k)| (format!("a{i}"), k.clone()));
        b.decision(id.clone(), labels.collect::<Vec<_>>());
    } else {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        let children = kids.iter().zip(&w).map(|(k, w)| (w / total, k.clone()));
        b.chance(id.clone(), children.collect::<Vec<_>>());
    }
    id
}

/// Expected utility rolled back with decisions maximising utility, then
/// inverted to money.
pub fn utility_rollback(tree: &DecisionTree, rho: RiskAversion) -> f64 {
    money_of_utility(utility_at(tree, tree.root(), rho), rho).unwrap()
}

fn utility_at(tree: &DecisionTree, id: &str, rho: RiskAversion) -> f64 {
    match tree.node(id).unwrap() {
        Node::Terminal { payoff } => utility_of_money(*payoff, rho).unwrap(),
        Node::Chance { children } => children
            .iter()
            .map(|(p, c)| p * utility_at(tree, c, rho))
            .sum(),
        Node::Decision { children } => children
            .iter()
            .map(|(_, c)| utility_at(tree, c, rho))
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Sequential commitment tree. `A` chooses between committing now (`B`) and
/// waiting (`E`). `B` commits to action 1 (`C`) or 2 (`D`) before the state
/// is drawn. `E` draws the state and then picks an action, paying `wait_cost`.
pub fn waiting_tree(pay1: [f64; 2], pay2: [f64; 2], p: f64, wait_cost: f64) -> DecisionTree {
    TreeBuilder::new()
        .decision("A", [("now", "B"), ("wait", "E")])
        .decision("B", [("1", "C"), ("2", "D")])
        .chance("C", [(p, "C.s0"), (1.0 - p, "C.s1")])
        .terminal("C.s0", pay1[0])
        .terminal("C.s1", pay1[1])
        .chance("D", [(p, "D.s0"), (1.0 - p, "D.s1")])
        .terminal("D.s0", pay2[0])
        .terminal("D.s1", pay2[1])
        .chance("E", [(p, "E.s0"), (1.0 - p, "E.s1")])
        .decision("E.s0", [("1", "E.s0.1"), ("2", "E.s0.2")])
        .terminal("E.s0.1", pay1[0] - wait_cost)
        .terminal("E.s0.2", pay2[0] - wait_cost)
        .decision("E.s1", [("1", "E.s1.1"), ("2", "E.s1.2")])
        .terminal("E.s1.1", pay1[1] - wait_cost)
        .terminal("E.s1.2", pay2[1] - wait_cost)
        .build("A")
        .unwrap()
}

/// Plain bisection for the root of `f` on `[lo, hi]`, with `f(lo) > 0 > f(hi)`.
pub fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) > 0.0 && f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
