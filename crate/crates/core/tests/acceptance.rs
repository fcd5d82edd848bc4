//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{close, expect, rng, trees, Tree};
use lobexec::analysis::{
    alternating_limits, classify_premature_closure, classify_round_trips, covariance_y_inv_gamma, fixed_point, g,
    long_time_limit, RoundTrip,
};
use lobexec::engine::{compute_y, compute_y_pimi, value_function};
use lobexec::execution::optimal_trade;
use lobexec::model::{
    build_example_premature_deterministic, build_example_premature_stochastic, build_example_roundtrip_on_unit_mean,
    random_tree, Atom, PimiModel, RandomTreeConfig, StepMoments,
};
use lobexec::oracle::{brute_force_value, monte_carlo_cost, GridSpec, MCConfig};
use rand::Rng;

const EVENT_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(limit: Duration, run: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = run();
    let elapsed = start.elapsed();
    if elapsed > limit {
        out.pass = false;
    }
    out.detail = format!("{}; {:.2} s (limit {} s)", out.detail, elapsed.as_secs_f64(), limit.as_secs());
    out
}

fn grid_trees() -> Vec<Tree> {
    let mut rng = rng(1002);
    (0..50)
        .map(|_| {
            let cfg = RandomTreeConfig { depth: rng.gen_range(1..=3), max_branching: 3, ..Default::default() };
            random_tree(&mut rng, &cfg)
        })
        .collect()
}

fn terminal_and_range() -> Outcome {
    timed(Duration::from_secs(10), || {
        let mut bad = 0;
        let mut nodes = 0;
        for tree in trees(1001, 200, 5, 3) {
            let y = compute_y(&tree).unwrap();
            nodes += tree.len();
            bad += tree.leaves().iter().filter(|&&l| y.values[l] != 0.5).count();
            bad += y.values.iter().filter(|&&v| !(v > 0.0 && v <= 0.5)).count();
        }
        outcome(bad == 0, format!("200 trees, {nodes} nodes, {bad} violations"))
    })
}

fn oracle_equivalence() -> Outcome {
    timed(Duration::from_secs(60), || {
        let mut rng = rng(1003);
        let grid = GridSpec { rounds: 4, ..Default::default() };
        let mut worst: f64 = 0.0;
        let mut below = 0;
        for tree in grid_trees() {
            let y = compute_y(&tree).unwrap();
            let (x, d) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let gamma = tree.node(0).gamma;
            let v = y.values[0] / gamma * (d - gamma * x).powi(2) - d * d / (2.0 * gamma);
            let brute = brute_force_value(&tree, 0, x, d, &grid).unwrap();
            worst = worst.max((brute - v).abs() / (1.0 + v.abs()));
            if brute < v - 1e-9 {
                below += 1;
            }
        }
        outcome(worst <= 1e-4 && below == 0, format!("50 trees, max scaled gap {worst:.2e}, {below} below analytic"))
    })
}

fn monte_carlo() -> Outcome {
    let mut rng = rng(1004);
    let mut worst: f64 = 0.0;
    let mut reproducible = true;
    for tree in trees(1005, 10, 5, 3) {
        let y = compute_y(&tree).unwrap();
        let (x, d) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let v = value_function(&tree, 0, &y, x, d);
        let cfg = MCConfig { samples: 100_000, seed: 2024, antithetic: false };
        let rule = |n, px, pd| optimal_trade(&tree, n, &y, px, pd);
        let a = monte_carlo_cost(&tree, x, d, rule, &cfg).unwrap();
        let b = monte_carlo_cost(&tree, x, d, rule, &cfg).unwrap();
        reproducible &= a.mean.to_bits() == b.mean.to_bits() && a.stderr.to_bits() == b.stderr.to_bits();
        let z = if a.stderr > 0.0 { (a.mean - v).abs() / a.stderr } else if (a.mean - v).abs() < 1e-12 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    outcome(worst <= 4.0 && reproducible, format!("10 trees, max |mean - V| / stderr = {worst:.2}, reproducible = {reproducible}"))
}

fn two_period_closed_form() -> Outcome {
    let mut rng = rng(1006);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let tree = random_tree::<f64, _>(&mut rng, &RandomTreeConfig { depth: 1, max_branching: 4, ..Default::default() });
        let y = compute_y(&tree).unwrap();
        let e_beta = expect(&tree, 0, |b, _, _| b);
        let e_eta = expect(&tree, 0, |_, e, _| e);
        let formula = (e_eta - e_beta * e_beta) / (2.0 * (e_eta - 2.0 * e_beta + 1.0));
        worst = worst.max((y.values[0] - formula).abs());
    }
    outcome(worst <= 1e-12, format!("100 distributions, max deviation {worst:.2e}"))
}

fn iterate_below(params: &StepMoments<f64>, threshold: f64, max_steps: u64) -> (bool, u64, f64) {
    let mut y = 0.5f64;
    for k in 1..=max_steps {
        y = g(y, params);
        if y < threshold {
            return (true, k, y);
        }
    }
    (false, max_steps, y)
}

fn long_time_limits() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let start = Instant::now();
    let mut exact = true;
    for params in [
        StepMoments { beta: 1.0, eta: 2.0, alpha: 0.6 },
        StepMoments { beta: 1.0, eta: 1.5, alpha: 0.9 },
        StepMoments { beta: 1.0, eta: 5.0, alpha: 0.25 },
    ] {
        let mut y = 0.5f64;
        for _ in 0..100_000 {
            y = g(y, &params);
            exact &= y == 0.5;
        }
        exact &= long_time_limit(&params, 1e-12, 1_000_000).map(|r| r.values[0] == 0.5).unwrap_or(false);
    }
    let step = vec![Atom::new(0.5, 0.6, 1.1), Atom::new(0.5, 1.4, 2.9)];
    let model = PimiModel::new(1000, 0, 1.0, vec![step; 1000]).unwrap();
    exact &= compute_y_pimi(&model).unwrap().values.iter().all(|&v| v == 0.5);
    let t = start.elapsed().as_secs_f64();
    pass &= exact && t < 1.0;
    notes.push(format!("unit mean: all iterates 1/2 = {exact} ({t:.2} s)"));

    for params in [
        StepMoments { beta: 0.5, eta: 0.9, alpha: 0.3 },
        StepMoments { beta: 0.8, eta: 0.7, alpha: 0.95 },
        StepMoments { beta: 0.5, eta: 1.0, alpha: 0.3 },
        StepMoments { beta: 0.9, eta: 1.0, alpha: 0.95 },
    ] {
        let start = Instant::now();
        let (hit, steps, last) = iterate_below(&params, 1e-9, 1_000_000);
        let t = start.elapsed().as_secs_f64();
        pass &= hit && t < 1.0;
        notes.push(format!(
            "eta = {}, beta = {}, alpha = {}: {} after {steps} steps (last {last:.2e}, {t:.2} s)",
            params.eta,
            params.beta,
            params.alpha,
            if hit { "below 1e-9" } else { "NOT below 1e-9" }
        ));
    }

    let start = Instant::now();
    let params = StepMoments { beta: 1.2, eta: 2.0, alpha: 0.8 };
    let mut y = 0.5f64;
    let mut steps = 0;
    while (y - 5.0 / 12.0).abs() >= 1e-9 && steps < 1_000_000 {
        y = g(y, &params);
        steps += 1;
    }
    let t = start.elapsed().as_secs_f64();
    let ok = (y - 5.0 / 12.0).abs() < 1e-9 && (fixed_point(&params) - 5.0 / 12.0).abs() < 1e-15 && t < 1.0;
    pass &= ok;
    notes.push(format!("(1.2, 2, 0.8): within 1e-9 of 5/12 after {steps} steps = {ok}"));
    outcome(pass, notes.join("; "))
}

fn alternating() -> Outcome {
    let odd = StepMoments { beta: 1.0f64, eta: 2.0, alpha: 0.6 };
    let even = StepMoments { beta: 1.3, eta: 2.0, alpha: 0.9 };
    match alternating_limits(&odd, &even, 1e-14, 1_000_000) {
        Ok(r) => {
            let ybar = fixed_point(&even);
            let (a, b) = (r.values[0], r.values[1]);
            let pass = (a - b).abs() > 1e-6 && [a, b].iter().all(|&v| v >= ybar && v <= 0.5);
            outcome(pass, format!("limits {a:.10} (odd) and {b:.10} (even), lower bound {ybar:.10}"))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn event_characterizations() -> Outcome {
    let mut counterexamples = 0;
    let mut half_nodes = 0;
    let mut checked = 0;
    for tree in trees(1007, 200, 5, 3) {
        let y = compute_y(&tree).unwrap();
        let labels = classify_round_trips(&tree, &y, EVENT_TOL).unwrap();
        let one_go = classify_premature_closure(&tree, &y, EVENT_TOL).unwrap();
        for node in tree.nodes().iter().filter(|n| !n.children.is_empty()) {
            let id = node.id;
            checked += 1;
            let is_half = close(y.values[id], 0.5, EVENT_TOL);
            half_nodes += is_half as usize;
            let e_y = close(expect(&tree, id, |_, _, c| y.values[c]), 0.5, EVENT_TOL);
            let e_beta = close(expect(&tree, id, |b, _, _| b), 1.0, EVENT_TOL);
            let lemma = close(expect(&tree, id, |b, e, c| (y.values[c] - 0.5) * b * b / e - y.values[c] * b + 0.5), 0.0, EVENT_TOL);
            let closes = (optimal_trade(&tree, id, &y, 1.0, 0.0) + 1.0).abs() <= EVENT_TOL
                && optimal_trade(&tree, id, &y, 0.0, 1.0).abs() <= EVENT_TOL
                && (optimal_trade(&tree, id, &y, -0.7, 1.3) - 0.7).abs() <= EVENT_TOL;
            let last = node.time == tree.horizon() - 1;
            let checks = [
                is_half == (e_y && e_beta),
                (labels[id] == RoundTrip::None) == is_half,
                !last || is_half == e_beta,
                closes == lemma && one_go[id] == lemma,
                !is_half || closes,
                is_half == (closes && e_y),
                !last || is_half == closes,
            ];
            counterexamples += checks.iter().filter(|&&c| !c).count();
        }
    }
    outcome(counterexamples == 0, format!("{checked} nodes ({half_nodes} with Y = 1/2), {counterexamples} counterexamples"))
}

fn paper_examples() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let det = build_example_premature_deterministic(1.0f64, 1.0, 0.5).unwrap();
    let y = compute_y(&det).unwrap();
    let closes = classify_premature_closure(&det, &y, EVENT_TOL).unwrap()[0];
    let rebuild = [-1.0, 0.5, 2.0].iter().all(|&d| optimal_trade(&det, 1, &y, 0.0, d).abs() > 1e-9);
    pass &= closes && rebuild && y.values[0] < 0.5;
    notes.push(format!("premature-det: one-go at N-2 = {closes}, rebuild at N-1 = {rebuild}, Y = {:.6}", y.values[0]));

    let mut worst: f64 = 0.0;
    let mut one_go = true;
    let mut unit_interval = true;
    for p in [0.1f64, 0.25, 0.5, 0.75, 0.9] {
        let tree = build_example_premature_stochastic(p).unwrap();
        let y = compute_y(&tree).unwrap();
        worst = worst.max((covariance_y_inv_gamma(&tree, &y, 1) - 0.5 * 5.0 / 16.0 * (p * p - p)).abs());
        one_go &= classify_premature_closure(&tree, &y, EVENT_TOL).unwrap()[0];
        unit_interval &= tree.nodes()[1..].iter().all(|n| n.beta > 0.0 && n.beta < 1.0);
    }
    pass &= worst <= 1e-12 && one_go && unit_interval;
    notes.push(format!("premature-stoch: covariance error {worst:.1e}, one-go = {one_go}, beta in (0,1) = {unit_interval}"));

    let p = 0.5;
    let unit = build_example_roundtrip_on_unit_mean(0.1f64, p, [1.0, 1.25, 1.5625]).unwrap();
    let y = compute_y(&unit).unwrap();
    let e_beta = expect(&unit, 0, |b, _, _| b);
    let profitable = classify_round_trips(&unit, &y, EVENT_TOL).unwrap()[0] == RoundTrip::Profitable;
    let mass: f64 = unit
        .level(1)
        .iter()
        .filter(|&&id| close(expect(&unit, id, |b, _, _| b), 1.0, EVENT_TOL))
        .map(|&id| unit.node(id).prob)
        .sum();
    let ok = profitable && y.values[0] < 0.5 && close(e_beta, 1.0, 1e-15) && close(mass, 1.0 - p, 1e-15);
    pass &= ok;
    notes.push(format!("roundtrip-unit-mean: Y = {:.6}, E[beta] = {e_beta}, mass with unit next mean = {mass}", y.values[0]));
    outcome(pass, notes.join("; "))
}

fn table_one() -> Outcome {
    let mut rng = rng(1008);
    let mut flags = 0;
    for _ in 0..500 {
        let steps = rng.gen_range(1..=6);
        let beta: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.01..0.99)).collect();
        let eta: Vec<f64> = beta.iter().map(|b| b * b / rng.gen_range(0.01..0.99)).collect();
        let tree = PimiModel::<f64>::deterministic(steps as i64, rng.gen_range(0.5..2.0), &beta, &eta)
            .unwrap()
            .to_tree()
            .unwrap();
        let y = compute_y(&tree).unwrap();
        let one_go = classify_premature_closure(&tree, &y, EVENT_TOL).unwrap();
        flags += tree.nodes().iter().filter(|n| n.time < tree.horizon() && one_go[n.id]).count();
    }
    let det = build_example_premature_deterministic(1.0f64, 1.0, 0.5).unwrap();
    let det_flag = classify_premature_closure(&det, &compute_y(&det).unwrap(), EVENT_TOL).unwrap()[0];
    let stoch = build_example_premature_stochastic(0.5f64).unwrap();
    let stoch_flag = classify_premature_closure(&stoch, &compute_y(&stoch).unwrap(), EVENT_TOL).unwrap()[0];
    // setting 6 (stochastic, beta not (0,1)-valued) contains the deterministic construction
    let rows = [("3", flags > 0, false), ("4", det_flag, true), ("5", stoch_flag, true), ("6", det_flag || stoch_flag, true)];
    let pass = rows.iter().all(|(_, got, want)| got == want);
    let text: Vec<String> = rows.iter().map(|(s, got, _)| format!("setting {s}: {}", if *got { "yes" } else { "no" })).collect();
    outcome(pass, format!("{} ({flags} flags in 500 models)", text.join(", ")))
}

fn no_manipulation() -> Outcome {
    let grid = GridSpec::default();
    let mut worst = f64::INFINITY;
    let mut exact = true;
    let mut all = grid_trees();
    all.extend(trees(1009, 50, 3, 3));
    for tree in &all {
        worst = worst.min(brute_force_value(tree, 0, 0.0, 0.0, &grid).unwrap());
        let y = compute_y(tree).unwrap();
        exact &= tree.nodes().iter().all(|n| value_function(tree, n.id, &y, 0.0, 0.0) == 0.0);
    }
    outcome(worst >= -1e-8 && exact, format!("{} trees, min grid value {worst:.2e}, analytic value exactly 0 = {exact}", all.len()))
}

fn shift_identity() -> Outcome {
    let mut rng = rng(1010);
    let pool = trees(1011, 100, 5, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let tree = &pool[rng.gen_range(0..pool.len())];
        let y = compute_y(tree).unwrap();
        let id = rng.gen_range(0..tree.len());
        let (x, d, h) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let gamma = tree.node(id).gamma;
        let lhs = value_function(tree, id, &y, x + h, d + gamma * h);
        let rhs = value_function(tree, id, &y, x, d) - (d + gamma * h / 2.0) * h;
        worst = worst.max((lhs - rhs).abs());
    }
    outcome(worst <= 1e-10, format!("1000 draws, max deviation {worst:.2e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("terminal and range invariants", terminal_and_range),
        ("oracle equivalence", oracle_equivalence),
        ("Monte Carlo consistency", monte_carlo),
        ("two-period closed form", two_period_closed_form),
        ("long-time limits", long_time_limits),
        ("alternating non-convergence", alternating),
        ("event characterizations", event_characterizations),
        ("constructive examples", paper_examples),
        ("premature-closure matrix", table_one),
        ("no price manipulation at zero deviation", no_manipulation),
        ("shift identity", shift_identity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        failed += !out.pass as usize;
        println!("{} {:>2} {name}: {}", if out.pass { "PASS" } else { "FAIL" }, i + 1, out.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
