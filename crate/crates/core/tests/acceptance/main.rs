//! Acceptance suite: one line per criterion, non-zero exit when any fails.

mod naive;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use num::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

use subext_core::challenge::{branch_entropy_test, fresh_uniform, respond, Verdict};
use subext_core::extract::{ip_extract, random_table_extract, standard_family, verify_extractor, DoubleBase, RotationSe, SeDouble};
use subext_core::harness::disperser::run_disperser_experiment;
use subext_core::harness::fixtures::{build_setup, fixed_left, nested_fixed, uniform};
use subext_core::harness::ramsey::{count_rectangles, plant_rectangle, rectangle_search, BipartiteGraph, CorpusEntry, SearchMode};
use subext_core::harness::{ExperimentConfig, FixtureChoice, FixtureName, OutputFormat, SampleFrom};
use subext_core::oracles::{check_fix, check_split, check_three_types, fix_function_subsource, split_by_conditional_entropy, three_types};
use subext_core::pipeline::{check_trace, observed_paths, observed_vmid, subext, subext_trace, PipelineConfig, PipelineDescriptor};
use subext_core::rng::{self, Rng as ChaRng};
use subext_core::source::Mass;
use subext_core::{BitString, ExplicitSource};

use naive::{Bits, Golden, Naive};

const GOLDEN: &str = include_str!("../data/golden_n4.json");
const CORPUS: &str = include_str!("../data/ramsey_corpus.json");

/// Pipeline shipped with the n=16 fixtures.
fn fixture_pipeline() -> PipelineDescriptor {
    PipelineDescriptor::table(16, 4, 2, 1)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn hashed(key: u64, x: &BitString, m: usize) -> BitString {
    let mut h = DefaultHasher::new();
    (key, x).hash(&mut h);
    BitString::from_u64(h.finish(), m)
}

fn oracle_suite() -> Outcome {
    let mut r = rng::seeded(101);
    let sources = 1200;
    let mut failures = Vec::new();
    let mut routes = [0usize; 3];
    for i in 0..sources {
        let n = [8, 10, 12][i % 3];
        let j = r.gen_range(6..=n as u32);
        let src = ExplicitSource::random_flat(n, j, &mut r);
        let (m, key) = (r.gen_range(1..=4), r.gen::<u64>());
        let f = |x: &BitString| hashed(key, x, m);
        let fix = fix_function_subsource(&src, m, f).expect("fix");
        if !check_fix(&src, m, f, &fix) {
            failures.push(format!("fix n={n} j={j}"));
        }
        let half = (n / 2) as f64;
        let tau1 = r.gen_range(0.0..half);
        let tau2 = r.gen_range(tau1..half);
        let split = split_by_conditional_entropy(&src, tau1, tau2).expect("split");
        routes[split.route as usize] += 1;
        if !check_split(&src, tau1, tau2, &split).expect("check").pass() {
            failures.push(format!("split n={n} j={j} route={:?}", split.route));
        }
        let three = three_types(&src, j as f64).expect("three types");
        if !check_three_types(j as f64, &three).expect("check").pass() {
            failures.push(format!("three-types n={n} j={j} case={:?}", three.case));
        }
    }
    let shown: Vec<&String> = failures.iter().take(3).collect();
    outcome(
        failures.is_empty(),
        format!("{sources} sources, split routes (whole, trimmed, overrun) = {routes:?}, {} failures {shown:?}", failures.len()),
    )
}

fn random_weighted(n: usize, support: usize, r: &mut ChaRng) -> ExplicitSource {
    let points = rand::seq::index::sample(r, 1 << n, support);
    let weights: Vec<u64> = (0..support).map(|_| r.gen_range(1..=16)).collect();
    let total: u64 = weights.iter().sum();
    ExplicitSource::from_atoms(
        n,
        points.into_iter().zip(weights).map(|(p, w)| (BitString::from_u64(p as u64, n), Mass::new(BigInt::from(w), BigInt::from(total)))),
    )
    .expect("valid")
}

fn random_event(src: &ExplicitSource, r: &mut ChaRng) -> Vec<BitString> {
    let mut atoms: Vec<BitString> = src.support().cloned().collect();
    atoms.shuffle(r);
    let keep = r.gen_range(1..=atoms.len());
    atoms.truncate(keep);
    atoms
}

fn entropy_drop() -> Outcome {
    let mut r = rng::seeded(202);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = r.gen_range(3..=8);
        let src = random_weighted(n, r.gen_range(1..=(1 << n).min(40)), &mut r);
        let event = random_event(&src, &mut r);
        let handle = src.condition(&event).expect("non-empty");
        let cond = handle.materialize();
        // max conditional mass times Pr[event] never exceeds the largest mass
        let exact = cond.max_mass() * handle.mass() <= src.max_mass();
        let float = cond.min_entropy() >= src.min_entropy() - handle.deficiency() - 1e-9;
        bad += usize::from(!(exact && float));
    }
    outcome(bad == 0, format!("1000 pairs, {bad} violations"))
}

/// Left half flat on `2^k` values, each right fiber flat on `2^k` values.
fn exact_block(n: usize, k: u32, r: &mut ChaRng) -> ExplicitSource {
    let h = n / 2;
    let lefts = ExplicitSource::random_flat(h, k, r);
    let mut support = Vec::new();
    for l in lefts.support() {
        support.extend(ExplicitSource::random_flat(h, k, r).support().map(|x| l.concat(x)));
    }
    ExplicitSource::flat(n, support).expect("non-empty")
}

fn block_after_conditioning() -> Outcome {
    let mut r = rng::seeded(303);
    let eps = 0.25f64;
    let (mut bad, mut nontrivial, mut worst) = (0, 0, 0.0f64);
    for _ in 0..200 {
        let n = [8, 10, 10][r.gen_range(0..3)];
        let k = r.gen_range(1..=(n / 2) as u32);
        let src = exact_block(n, k, &mut r);
        let d = r.gen_range(0..=2u32);
        let mut atoms: Vec<BitString> = src.support().cloned().collect();
        atoms.shuffle(&mut r);
        atoms.truncate(atoms.len().div_ceil(1 << d));
        let handle = src.condition(&atoms).expect("non-empty");
        assert!(handle.deficiency_at_most(d as f64));
        let target = k as f64 - d as f64 - (1.0 / eps).log2() - 1.0;
        let dist = if target > 0.0 {
            nontrivial += 1;
            handle.materialize().distance_to_block_source(target).expect("lp")
        } else {
            0.0
        };
        worst = worst.max(dist);
        bad += usize::from(dist > eps);
    }
    outcome(bad == 0, format!("200 sources ({nontrivial} with a positive target), worst distance {worst:.4}, {bad} above 1/4"))
}

/// Largest overlap `sum min(p, q)` over capped candidates: atoms in the chosen
/// set get exactly the cap, the others keep their mass and must fit under it.
fn min_entropy_distance_by_subsets(src: &ExplicitSource, k: f64) -> f64 {
    let masses: Vec<f64> = src.atoms().map(|(_, p)| num::ToPrimitive::to_f64(p).expect("finite")).collect();
    let cap = (-k).exp2();
    let mut best = f64::NEG_INFINITY;
    for set in 0u32..(1 << masses.len()) {
        let mut overlap = 0.0;
        let mut ok = true;
        for (i, &p) in masses.iter().enumerate() {
            if set >> i & 1 == 1 {
                overlap += p.min(cap);
            } else if p > cap {
                ok = false;
                break;
            } else {
                overlap += p;
            }
        }
        if ok {
            best = best.max(overlap);
        }
    }
    1.0 - best
}

fn lp_consistency() -> Outcome {
    let mut r = rng::seeded(404);
    let mut mismatches = 0;
    let mut blocks = 0;
    for _ in 0..500 {
        let n = [4, 6][r.gen_range(0..2)];
        let src = if r.gen_bool(0.3) {
            exact_block(n, r.gen_range(0..=(n / 2) as u32), &mut r)
        } else {
            random_weighted(n, r.gen_range(1..=(1 << n)), &mut r)
        };
        let k = f64::from(r.gen_range(1..=(n as u32))) / 2.0;
        let is_block = src.block_report().expect("even").is_block(k);
        let dist = src.distance_to_block_source(k).expect("lp");
        blocks += usize::from(is_block);
        mismatches += usize::from((dist == 0.0) != is_block);
    }
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = r.gen_range(4..=6);
        let src = random_weighted(n, r.gen_range(1..=16), &mut r);
        let k = f64::from(r.gen_range(0..=2 * n as u32)) / 2.0;
        let exact = src.distance_to_min_entropy(k).expect("in range");
        worst = worst.max((exact - min_entropy_distance_by_subsets(&src, k)).abs());
    }
    outcome(
        mismatches == 0 && worst <= 1e-9,
        format!("500 block checks ({blocks} blocks, {mismatches} mismatches); min-entropy distance max error {worst:.2e}"),
    )
}

fn challenge_response() -> Outcome {
    // exhaustive membership at n = 6 against directly computed rows
    let n = 6;
    let width = 3;
    let rot = RotationSe::new(n, width).expect("shape");
    let dbl = SeDouble::new(n, width, DoubleBase::Zero).and_then(|s| s.inject(8, BitString::from_u64(5, width))).expect("shape");
    let mut wrong = 0u64;
    let mut checked = 0u64;
    for x in BitString::all(n) {
        for y in BitString::all(n) {
            let rows: Vec<BitString> = (0..n).map(|i| ip_extract(&x.rotate_left(i), &y, width).expect("shape")).collect();
            for c in BitString::all(width) {
                let expect_rot = rows.contains(&c);
                let expect_dbl = c.is_zero() || c.to_u64() == 5;
                wrong += u64::from((respond(&x, &y, &c, &rot).expect("width") == Verdict::Fixed) != expect_rot);
                wrong += u64::from((respond(&x, &y, &c, &dbl).expect("width") == Verdict::Fixed) != expect_dbl);
                checked += 2;
            }
        }
    }
    let (l, rows, trials) = (8usize, 16usize, 100_000u64);
    let se = RotationSe::new(16, l).expect("shape");
    let p0 = rows as f64 * (-(l as f64)).exp2();
    let bound = p0 + 3.0 * (p0 * (1.0 - p0) / trials as f64).sqrt();
    let u = ExplicitSource::uniform(16);
    let report = branch_entropy_test(&u, &u, fresh_uniform(l), &se, trials, bound, 505).expect("runs");
    outcome(
        wrong == 0 && report.pr_fixed <= bound,
        format!(
            "{checked} membership checks, {wrong} wrong; Pr[Fixed] = {:.5} (Wilson {:.5}..{:.5}) vs bound {bound:.5}",
            report.pr_fixed, report.ci95.0, report.ci95.1
        ),
    )
}

fn pipeline_invariants() -> Outcome {
    let mut violations = Vec::new();
    for (n, l, seed) in [(8usize, 2usize, 61u64), (16, 4, 62)] {
        let cfg = PipelineConfig::build(&PipelineDescriptor::table(n, l, 2, seed)).expect("config");
        let mut r = rng::seeded(seed);
        for _ in 0..5000 {
            let x = BitString::from_u64(r.gen(), n);
            let y = BitString::from_u64(r.gen(), n);
            let t = subext_trace(&x, &y, &cfg).expect("trace");
            let again = subext(&x, &y, &cfg).expect("subext");
            if again != t.output {
                violations.push(format!("n={n} {x} {y}: nondeterministic output"));
            }
            violations.extend(check_trace(&t, &cfg).into_iter().map(|v| format!("n={n} {x} {y}: {v}")));
        }
    }
    let count = violations.len();
    outcome(count == 0, format!("10000 inputs, {count} violations {:?}", violations.iter().take(3).collect::<Vec<_>>()))
}

fn path_recovery() -> Outcome {
    let base = fixture_pipeline();
    let bext = random_table_extract(base.bext.seed, 16, base.l).expect("table");
    let verdict = verify_extractor(&bext, standard_family(16, 8), "block-flat k=8", 20, 0.15, 707).expect("verify");
    let mut pass = verdict.pass;
    let mut parts = vec![format!("table extractor max SD {:.4}", verdict.max_observed_sd)];
    for (seed, fixture) in [(71u64, fixed_left()), (72, nested_fixed())] {
        let name = fixture.name.clone();
        let path = fixture.entropy_path().expect("path");
        let setup = build_setup(fixture, uniform(), &base).expect("setup");
        let checks = setup.check_fixed_sons().expect("checks");
        let fixed_ok = checks.iter().all(|c| c.fixed_son_favored == 0 && c.branch.verified);
        let (sx, sy) = (setup.x_fi.sampler(), setup.y_fi.sampler());
        let mut r = rng::seeded(seed);
        let samples = 10_000;
        let bmid = setup.x.bmid().cloned();
        let (mut hits, mut mid_hits) = (0u32, 0u32);
        for _ in 0..samples {
            let (a, b) = (sx.sample(&mut r), sy.sample(&mut r));
            let (p, q) = observed_paths(&a, &b, &setup.cfg).expect("paths");
            hits += u32::from(p.len() >= path.len() && p[..path.len()] == path[..]);
            mid_hits += u32::from(Some(observed_vmid(&a, &b, &p, &q, &setup.cfg).expect("vmid")) == bmid);
        }
        let pr = f64::from(hits) / f64::from(samples);
        let (alpha, beta) = setup.alpha_beta().expect("alpha/beta");
        pass &= fixed_ok && pr >= 0.9;
        parts.push(format!(
            "{name}: Pr = {pr:.4}, Y deficiency {:.2}, F sons never favoured: {fixed_ok}, alpha/beta deficiencies {:.2}/{:.2}, Pr[vMid = Bmid] = {:.4}",
            setup.y_fi_record.deficiency,
            alpha.deficiency(),
            beta.deficiency(),
            f64::from(mid_hits) / f64::from(samples)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn disperser_and_golden() -> Outcome {
    let cfg = ExperimentConfig {
        pipeline: fixture_pipeline(),
        x: FixtureChoice::Named { name: FixtureName::FixedLeft },
        y: FixtureChoice::Named { name: FixtureName::Uniform },
        trials: 10_000,
        seed: 808,
        format: OutputFormat::Json,
        sample_from: SampleFrom::Full,
    };
    let report = run_disperser_experiment(&cfg).expect("experiment");
    let golden: Golden = serde_json::from_str(GOLDEN).expect("golden file");
    let pcfg = PipelineConfig::build(&PipelineDescriptor::table(golden.n, golden.l, golden.m, golden.seed)).expect("config");
    let oracle = Naive::new(golden.n, golden.l, golden.m, golden.seed);
    let mut mismatched = 0;
    for case in &golden.cases {
        let x: BitString = case.x.parse().expect("bits");
        let y: BitString = case.y.parse().expect("bits");
        let t = subext_trace(&x, &y, &pcfg).expect("trace");
        let names = |p: &[subext_core::TreeNode]| p.iter().map(ToString::to_string).collect::<Vec<_>>();
        let ours = naive::NaiveCase {
            x: case.x.clone(),
            y: case.y.clone(),
            p_obs: names(&t.p_obs),
            q_obs: names(&t.q_obs),
            v_mid_obs: t.v_mid_obs.to_string(),
            output: t.output.to_string(),
        };
        let recomputed = oracle.run(Bits::new(x.to_u64(), golden.n), Bits::new(y.to_u64(), golden.n));
        mismatched += usize::from(&ours != case || &recomputed != case);
    }
    outcome(
        report.output_support_coverage == 1.0 && mismatched == 0,
        format!(
            "coverage {:.2} (SD {:.4}, certified width {}); golden n=4 trace {}/{} cases match",
            report.output_support_coverage,
            report.empirical_sd,
            report.certified_width,
            golden.cases.len() - mismatched,
            golden.cases.len()
        ),
    )
}

fn naive_count(g: &BipartiteGraph, k: usize) -> u128 {
    let subsets = |n: usize| {
        (0u32..1 << n).filter(move |s| s.count_ones() as usize == k).map(move |s| (0..n).filter(|i| s >> i & 1 == 1).collect::<Vec<_>>())
    };
    let mut total = 0;
    for rows in subsets(g.row_count()) {
        for cols in subsets(g.col_count()) {
            for color in [true, false] {
                total += u128::from(rows.iter().all(|&u| cols.iter().all(|&v| g.edge(u, v) == color)));
            }
        }
    }
    total
}

fn ramsey() -> Outcome {
    let corpus: Vec<CorpusEntry> = serde_json::from_str(CORPUS).expect("corpus");
    let mut disagreements = 0;
    for entry in &corpus {
        let g = BipartiteGraph::from_strings(&entry.rows).expect("graph");
        let count = count_rectangles(&g, 2, u128::MAX).expect("budget");
        let found = rectangle_search(&g, 2, SearchMode::Exhaustive, u128::MAX, 0).expect("budget").rectangle().is_some();
        disagreements += usize::from(count != naive_count(&g, 2) || found != (count > 0));
    }
    let (mut found, mut exact) = (0, 0);
    for i in 0..100u64 {
        let (g, planted) = plant_rectangle(&BipartiteGraph::random(32, 32, 9000 + i), 4, i % 2 == 0, 9100 + i);
        let out = rectangle_search(&g, 4, SearchMode::Randomized, 2000, 9200 + i).expect("search");
        if let Some(rect) = out.rectangle() {
            if g.is_rectangle(&rect.rows, &rect.cols, rect.color) && rect.rows.len() == 4 && rect.cols.len() == 4 {
                found += 1;
                exact += usize::from(rect.rows == planted.rows && rect.cols == planted.cols);
            }
        }
    }
    outcome(
        disagreements == 0 && found == 100,
        format!(
            "{} corpus graphs, {disagreements} disagreements; randomized search found 4x4 rectangles in {found}/100 planted instances ({exact} exactly the planted one)",
            corpus.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 9] = [
        ("subsource oracle suite", oracle_suite, Some(Duration::from_secs(60))),
        ("entropy drop within deficiency", entropy_drop, None),
        ("block-source after conditioning", block_after_conditioning, None),
        ("LP and greedy consistency", lp_consistency, None),
        ("challenge-response contract", challenge_response, None),
        ("pipeline determinism and trace invariants", pipeline_invariants, Some(Duration::from_secs(120))),
        ("entropy-path recovery on fixtures", path_recovery, None),
        ("disperser coverage and golden trace", disperser_and_golden, None),
        ("rectangle search", ramsey, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        let timing = match limit {
            Some(l) => format!("{:.1}s, limit {}s", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.1}s", elapsed.as_secs_f64()),
        };
        println!("criterion {}: {} | {name} | {} | {timing}", i + 1, if pass { "PASS" } else { "FAIL" }, result.detail);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
