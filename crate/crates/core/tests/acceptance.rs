//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line and
//! asserts its own verdict, including the runtime budget.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use persuade::constructions::{binary_solve, crater_counterexample, verify_lemma5};
use persuade::harness::{certify_optimality, fixtures, gen_payoff, gen_prior, run_experiment, ExperimentKind, InstanceSpec, PayoffFamily, PriorFamily};
use persuade::measures::{join, less_informative, meet, Atom, Distribution, GridSpec, ORDER_TOL};
use persuade::payoffs::Payoff;
use persuade::solver::{solve, upper_censorship_solve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// the budgets assume the criteria do not share the machine
static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: u32, name: &str, pass: bool, budget: Duration, elapsed: Duration, detail: &str) {
    let within = elapsed <= budget;
    let tag = if pass && within { "PASS" } else { "FAIL" };
    // written directly so the line survives output capture
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {id:>2} {tag} {name}: {detail} [{:.1}s of {}s]",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
    assert!(within, "criterion {id} ({name}) over budget: {elapsed:?} > {budget:?}");
}

fn experiment(id: u32, name: &str, spec: InstanceSpec, count: usize, budget: u64) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let r = run_experiment(&spec, count);
    let mut detail = format!("{}/{} passed, {} errors, worst {:.3e}", r.passed, r.count, r.errors, r.worst_residual);
    if let Some(bad) = r.verdicts.iter().find(|v| !v.pass) {
        detail.push_str(&format!("; first failure seed {}: {} {}", bad.seed, bad.note, bad.error.clone().unwrap_or_default()));
    }
    report(id, name, r.all_passed(), Duration::from_secs(budget), start.elapsed(), &detail);
}

#[test]
fn criterion_01_duality() {
    experiment(1, "LP duality", InstanceSpec::new(ExperimentKind::Duality, 1).with_grid(201), 500, 120);
}

#[test]
fn criterion_02_binary() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let families = [PayoffFamily::Random, PayoffFamily::SShape, PayoffFamily::Convex, PayoffFamily::Concave, PayoffFamily::Crater];
    let mut cases: Vec<(Payoff, f64)> = vec![(Payoff::step(0.5), 0.3)];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    while cases.len() < 200 {
        let u = gen_payoff(&mut rng, families[cases.len() % families.len()], 3);
        cases.push((u, rng.gen_range(0.05..0.95)));
    }
    let base = GridSpec::uniform(201).unwrap();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (k, (u, mu)) in cases.iter().enumerate() {
        let b = binary_solve(u, *mu).unwrap();
        let prior = Distribution::two_point_with_mean(0.0, 1.0, *mu).unwrap();
        // the closed-form contact points are grid points, so both values are exact
        let grid = base.refined_with(&[b.y, b.z]);
        let lp = solve(u, &prior, &grid, None).unwrap();
        let err = (lp.value - b.value).abs();
        worst = worst.max(err);
        if err > 1e-8 {
            failures.push(k);
        }
    }
    let step = binary_solve(&Payoff::step(0.5), 0.3).unwrap().value;
    let pass = failures.is_empty() && (step - 0.6).abs() < 1e-12;
    let detail = format!("{} instances, worst |LP − cav u(μ)| {worst:.2e}, step value {step}, failures {failures:?}", cases.len());
    report(2, "binary concavification", pass, Duration::from_secs(30), start.elapsed(), &detail);
}

#[test]
fn criterion_03_upper_censorship() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let grid = GridSpec::uniform(801).unwrap();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut doubling = Vec::new();
    for k in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + k);
        let v = gen_payoff(&mut rng, PayoffFamily::SShape, 2);
        let f0 = gen_prior(&mut rng, PriorFamily::Uniforms(1 + k as usize % 3));
        let cens = upper_censorship_solve(&v, &f0).unwrap();
        let c = certify_optimality(&v, &f0, &cens.distribution, &grid, 2e-3).unwrap();
        worst = worst.max(c.gap);
        if !c.certified {
            failures.push(k);
        }
        if k < 5 {
            let gaps: Vec<f64> = [201, 401, 801]
                .iter()
                .map(|&n| certify_optimality(&v, &f0, &cens.distribution, &GridSpec::uniform(n).unwrap(), 2e-3).unwrap().gap)
                .collect();
            doubling.push(gaps);
        }
    }
    // single doublings oscillate with the cutoff's position between grid
    // points, so the order is fitted over 201 → 801
    let orders: Vec<f64> = doubling.iter().map(|g| (g[0] / g[2].max(1e-300)).log2() / 2.0).collect();
    let shrinks = orders.iter().all(|&p| p >= 0.75);
    let orders: Vec<String> = orders.iter().map(|p| format!("{p:.2}")).collect();
    let pass = failures.is_empty() && shrinks;
    let detail = format!("50 instances, worst gap {worst:.2e} at n = 801, uncertified {failures:?}, order per doubling {orders:?}");
    report(3, "upper censorship", pass, Duration::from_secs(180), start.elapsed(), &detail);
}

#[test]
fn criterion_04_lemma4_oracle() {
    experiment(4, "interval envelope vs LP oracle", InstanceSpec::new(ExperimentKind::Lemma4, 4), 500, 180);
}

#[test]
fn criterion_05_theorem1_sufficiency() {
    experiment(5, "ordinal convexity sufficiency", InstanceSpec::new(ExperimentKind::Thm1Suff, 5).with_probe(8), 200, 300);
}

#[test]
fn criterion_06_theorem1_necessity() {
    experiment(6, "ordinal convexity necessity", InstanceSpec::new(ExperimentKind::Thm1Nec, 6).with_probe(8), 50, 60);
}

#[test]
fn criterion_07_crater_converse() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let u = fixtures::sin_violation();
    let cx = crater_counterexample(&u).unwrap();
    let r = verify_lemma5(&cx, &GridSpec::uniform(201).unwrap()).unwrap();
    let margin = r.c_prior - r.c_optimizer;
    let pass = r.pass && margin > 1e-3;
    let detail = format!(
        "{:?}, X = {:.4}: u-optimizers C(X) in [{:.12}, {:.12}] vs C_F0(X) {:.12}; v-optimizer below by {margin:.3e} (need > 1e-3)",
        cx.case, cx.cross_x, r.c_min, r.c_max, r.c_prior
    );
    report(7, "crater converse", pass, Duration::from_secs(60), start.elapsed(), &detail);
}

#[test]
fn criterion_08_theorem2_sufficiency() {
    experiment(8, "crater sufficiency", InstanceSpec::new(ExperimentKind::Thm2Suff, 8).with_probe(8), 100, 600);
}

#[test]
fn criterion_09_prop1() {
    experiment(9, "binary-prior bracketing", InstanceSpec::new(ExperimentKind::Prop1, 9), 200, 60);
}

fn random_atoms(rng: &mut ChaCha8Rng) -> Distribution {
    let k = rng.gen_range(1..=5);
    let ws: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = ws.iter().sum();
    let atoms = ws.iter().map(|w| Atom { x: rng.gen_range(0.0..1.0), w: w / total }).collect();
    Distribution::normalized(atoms, vec![], 1e-9).unwrap()
}

/// Two distributions with the mean of `base`: pooled on random intervals, or
/// re-spread to a random two-point law.
fn equal_mean_pair(rng: &mut ChaCha8Rng) -> (Distribution, Distribution) {
    let base = random_atoms(rng);
    let mu = base.mean();
    let variant = |rng: &mut ChaCha8Rng| -> Distribution {
        match rng.gen_range(0..3) {
            0 => {
                let a = rng.gen_range(0.0..1.0);
                let b = rng.gen_range(a..1.0);
                base.pool_intervals(&[(a, b)]).unwrap()
            }
            1 => {
                let lo = rng.gen_range(0.0..mu);
                let hi = rng.gen_range(mu..1.0);
                Distribution::two_point_with_mean(lo, hi, mu).unwrap()
            }
            _ => base.clone(),
        }
    };
    (variant(rng), variant(rng))
}

#[test]
fn criterion_10_lattice_axioms() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let le = |a: &Distribution, b: &Distribution| less_informative(a, b, ORDER_TOL).holds();
    let mut violations: Vec<String> = Vec::new();
    for k in 0..1000 {
        let (f, g) = equal_mean_pair(&mut rng);
        let (j, m) = (join(&f, &g).unwrap_or_else(|e| panic!("{e} {f:?} {g:?}")), meet(&f, &g).unwrap_or_else(|e| panic!("{e} {f:?} {g:?}")));
        let mu = f.mean();
        let point = Distribution::point_mass(mu).unwrap();
        let third = equal_mean_pair(&mut rng).0;
        let mut check = |ok: bool, what: &str| {
            if !ok {
                violations.push(format!("pair {k}: {what}"));
            }
        };
        check(le(&f, &f), "reflexive");
        check(le(&f, &j) && le(&g, &j), "join is an upper bound");
        check(le(&m, &f) && le(&m, &g), "meet is a lower bound");
        check(le(&point, &m), "point mass below meet");
        check(j.distance(&join(&g, &f).unwrap()) < 1e-9, "join commutes");
        check(m.distance(&meet(&g, &f).unwrap()) < 1e-9, "meet commutes");
        check(join(&f, &m).unwrap().distance(&f) < 1e-9, "absorption f ∨ (f ∧ g)");
        check(meet(&f, &j).unwrap().distance(&f) < 1e-9, "absorption f ∧ (f ∨ g)");
        if le(&f, &g) && le(&g, &f) {
            check(f.distance(&g) < 1e-9, "antisymmetry");
        }
        if le(&f, &g) {
            check(le(&g, &j) && j.distance(&g) < 1e-9, "comparable join");
        }
        // sampled common bounds
        if (third.mean() - mu).abs() < 1e-12 {
            if le(&f, &third) && le(&g, &third) {
                check(le(&j, &third), "join below a common upper bound");
            }
            if le(&third, &f) && le(&third, &g) {
                check(le(&third, &m), "meet above a common lower bound");
            }
            if le(&m, &third) && le(&third, &f) {
                check(le(&m, &f), "transitivity");
            }
        }
    }
    let detail = format!("1000 equal-mean pairs, {} violations {:?}", violations.len(), violations.iter().take(3).collect::<Vec<_>>());
    report(10, "lattice and order axioms", violations.is_empty(), Duration::from_secs(30), start.elapsed(), &detail);
}
