use std::path::Path;

use serde::Serialize;

use persuade::constructions::{
    binary_solve, crater_counterexample, theorem1_counterexample, verify_lemma5, ConstructionError, CraterCounterexample,
    Lemma5Report,
};
use persuade::harness::{certify_optimality, run_experiment, ExperimentKind, HarnessError, InstanceSpec};
use persuade::measures::{Distribution, GridSpec};
use persuade::orders::wso_compare;
use persuade::payoffs::{self, is_ordinally_less_convex, Payoff};
use persuade::solver::{check_slackness, probe_argmax, solve as solve_lp, SolveError, SLACK_TOL};

use crate::output::{inline, read_json, write_csv, write_json};
use crate::{CliError, Common, Verdict};

const PLOT_POINTS: usize = 501;

fn solve_error(e: SolveError) -> CliError {
    match e {
        SolveError::Grid(_) | SolveError::Measure(_) | SolveError::Payoff(_) => CliError::Usage(e.to_string()),
        SolveError::Infeasible(_) | SolveError::NumericFailure(_) => CliError::Numeric(e.to_string()),
    }
}

fn construction_error(e: ConstructionError) -> CliError {
    match e {
        ConstructionError::Domain(_) | ConstructionError::Precondition(_) | ConstructionError::InvalidWitness => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Numeric(e.to_string()),
    }
}

fn verdict(pass: bool) -> Verdict {
    if pass {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn num(x: f64) -> String {
    // no "-0" in plot data
    format!("{}", if x == 0.0 { 0.0 } else { x })
}

/// Uniform grid plus every rough point of the payoffs.
fn grid_for(n: usize, payoffs: &[&Payoff]) -> Result<GridSpec, CliError> {
    let base = GridSpec::uniform(n).map_err(|e| CliError::Usage(e.to_string()))?;
    let rough: Vec<f64> = payoffs.iter().flat_map(|u| u.rough_points()).collect();
    Ok(base.refined_with(&rough))
}

fn density(d: &Distribution, m: f64) -> f64 {
    d.uniforms().iter().filter(|u| m >= u.from && m < u.to).map(|u| u.w / (u.to - u.from)).sum()
}

pub fn solve(c: &Common, payoff: &Path, prior: &Path, lower: Option<&Path>) -> Result<Verdict, CliError> {
    let u: Payoff = read_json(payoff)?;
    let f0: Distribution = read_json(prior)?;
    let g0: Option<Distribution> = lower.map(read_json).transpose()?;
    let grid = grid_for(c.grid_size(), &[&u])?;
    let r = solve_lp(&u, &f0, &grid, g0.as_ref()).map_err(solve_error)?;
    let tol = c.tol.unwrap_or(1e-8);
    println!("value {:.12} (dual {:.12}, gap {:e}, {} pivots, {} grid points)", r.value, r.dual_value, r.gap, r.pivots, r.grid.len());
    println!("optimizer {}", inline(&r.optimizer));
    write_json(c.out.as_ref(), &r)?;
    let (c_f0, c_f) = (f0.integrated_cdf(), r.optimizer.integrated_cdf());
    let rows = r.grid.points().iter().enumerate().map(|(i, &x)| {
        let p = r.prices.as_ref().map_or(f64::NAN, |p| p.values[i]);
        vec![num(x), num(f0.cdf(x)), num(r.optimizer.cdf(x)), num(c_f0.eval(x)), num(c_f.eval(x)), num(r.payoff[i]), num(p)]
    });
    write_csv(c.csv.as_ref(), &["x", "F0cdf", "Fcdf", "C_F0", "C_F", "u", "p"], rows)?;
    if r.gap.abs() > tol {
        return Err(CliError::Numeric(format!("duality gap {:e} exceeds {tol:e}", r.gap)));
    }
    if let Err(v) = check_slackness(&r, &f0, SLACK_TOL) {
        return Err(CliError::Numeric(format!("complementary slackness: {}", inline(&v))));
    }
    Ok(Verdict::Pass)
}

pub fn check_olc(c: &Common, u: &Path, v: &Path) -> Result<Verdict, CliError> {
    let (u, v): (Payoff, Payoff) = (read_json(u)?, read_json(v)?);
    let grid = grid_for(c.grid_size(), &[&u, &v])?;
    let r = is_ordinally_less_convex(&u, &v, &grid);
    if r.holds {
        println!("ordinally less convex on {} grid points", r.grid_size);
    } else {
        println!("not ordinally less convex; witness {}", inline(&r.witness));
    }
    write_json(c.out.as_ref(), &r)?;
    Ok(verdict(r.holds))
}

pub fn check_crater(c: &Common, payoff: &Path) -> Result<Verdict, CliError> {
    let u: Payoff = read_json(payoff)?;
    let r = payoffs::check_crater(&u).map_err(|e| CliError::Usage(e.to_string()))?;
    if r.holds {
        println!("crater property holds ({} concave-convex-concave patterns)", r.patterns);
    } else {
        println!("crater property fails; witness {}", inline(&r.witness));
    }
    write_json(c.out.as_ref(), &r)?;
    Ok(verdict(r.holds))
}

#[derive(Serialize)]
struct Regularity {
    regular: bool,
    irregularity: Option<persuade::payoffs::Irregularity>,
}

pub fn check_regular(c: &Common, payoff: &Path) -> Result<Verdict, CliError> {
    let u: Payoff = read_json(payoff)?;
    let irregularity = u.check_regular().err();
    match &irregularity {
        None => println!("regular ({} segments)", u.segments().len()),
        Some(i) => println!("not regular: {i}"),
    }
    write_json(c.out.as_ref(), &Regularity { regular: irregularity.is_none(), irregularity })?;
    Ok(verdict(irregularity.is_none()))
}

pub fn compare(c: &Common, u: &Path, v: &Path, prior: &Path, lower: Option<&Path>, probe: usize) -> Result<Verdict, CliError> {
    let (u, v): (Payoff, Payoff) = (read_json(u)?, read_json(v)?);
    let f0: Distribution = read_json(prior)?;
    let g0: Option<Distribution> = lower.map(read_json).transpose()?;
    let grid = grid_for(c.grid_size(), &[&u, &v])?;
    let pu = probe_argmax(&u, &f0, &grid, g0.as_ref(), probe, c.seed).map_err(solve_error)?;
    let pv = probe_argmax(&v, &f0, &grid, g0.as_ref(), probe, c.seed.wrapping_add(1)).map_err(solve_error)?;
    let r = wso_compare(&pu, &pv, &f0, &grid).map_err(|e| CliError::Numeric(e.to_string()))?;
    println!(
        "u-argmax lower: {} (strictly {}), higher: {} (strictly {}); values {:.10} / {:.10}; {} + {} members",
        r.lower, r.strictly_lower, r.higher, r.strictly_higher, r.value_u, r.value_v, r.members.0, r.members.1
    );
    write_json(c.out.as_ref(), &r)?;
    Ok(verdict(r.lower))
}

#[derive(Serialize)]
struct CraterRecord<'a> {
    counterexample: &'a CraterCounterexample,
    lemma5: &'a Lemma5Report,
}

pub fn counterexample(c: &Common, u: &Path, v: Option<&Path>) -> Result<Verdict, CliError> {
    let u: Payoff = read_json(u)?;
    if let Some(v) = v {
        return ordinal_counterexample(c, &u, &read_json(v)?);
    }
    let cx = match crater_counterexample(&u) {
        Ok(cx) => cx,
        Err(ConstructionError::NotAViolation) => {
            println!("crater property holds; no counterexample");
            return Ok(Verdict::Fail);
        }
        Err(e) => return Err(construction_error(e)),
    };
    let grid = GridSpec::uniform(c.grid_size()).map_err(|e| CliError::Usage(e.to_string()))?;
    let r = verify_lemma5(&cx, &grid).map_err(construction_error)?;
    println!(
        "{:?}{}: x' {:.6} x {:.6} X {:.6} w {:.6} w' {:.6}",
        cx.case,
        if cx.mirrored { " (mirrored)" } else { "" },
        cx.x_prime,
        cx.x,
        cx.cross_x,
        cx.w,
        cx.w_prime
    );
    println!(
        "u-optimizers: C(X) in [{:.12}, {:.12}], prior {:.12}; v-optimizer {:.12} (below by {:e}); lemma holds: {}",
        r.c_min,
        r.c_max,
        r.c_prior,
        r.c_optimizer,
        r.c_prior - r.c_optimizer,
        r.pass
    );
    write_json(c.out.as_ref(), &CraterRecord { counterexample: &cx, lemma5: &r })?;
    let rows = (0..PLOT_POINTS).map(|k| {
        let m = k as f64 / (PLOT_POINTS - 1) as f64;
        vec![num(m), num(cx.u.value(m)), num(cx.v.value(m)), num(cx.p.eval(m)), num(density(&cx.prior, m)), num(cx.optimizer.cdf(m))]
    });
    write_csv(c.csv.as_ref(), &["m", "u", "v", "p", "F0density", "Fcdf"], rows)?;
    Ok(verdict(r.pass))
}

fn ordinal_counterexample(c: &Common, u: &Payoff, v: &Payoff) -> Result<Verdict, CliError> {
    let grid = grid_for(c.grid_size(), &[u, v])?;
    let olc = is_ordinally_less_convex(u, v, &grid);
    let Some(w) = olc.witness else {
        println!("u is ordinally less convex than v; no counterexample");
        return Ok(Verdict::Fail);
    };
    let cx = theorem1_counterexample(u, v, &w, &grid).map_err(construction_error)?;
    println!(
        "{:?}: prior {} with mean {:.6}; u-argmax strictly higher: {}",
        cx.case,
        inline(&cx.prior),
        cx.mean,
        cx.verdict.strictly_higher
    );
    write_json(c.out.as_ref(), &cx)?;
    Ok(verdict(cx.verdict.strictly_higher))
}

pub fn binary(c: &Common, payoff: &Path, mu: f64) -> Result<Verdict, CliError> {
    let u: Payoff = read_json(payoff)?;
    let s = binary_solve(&u, mu).map_err(construction_error)?;
    println!("value {:.12}; [x, w] = [{:.6}, {:.6}], [y, z] = [{:.6}, {:.6}]", s.value, s.x, s.w, s.y, s.z);
    write_json(c.out.as_ref(), &s)?;
    Ok(Verdict::Pass)
}

pub fn certify(c: &Common, payoff: &Path, prior: &Path, candidate: &Path) -> Result<Verdict, CliError> {
    let u: Payoff = read_json(payoff)?;
    let f0: Distribution = read_json(prior)?;
    let g: Distribution = read_json(candidate)?;
    let grid = grid_for(c.grid_size(), &[&u])?;
    let cert = certify_optimality(&u, &f0, &g, &grid, c.tol.unwrap_or(1e-6)).map_err(|e| match e {
        HarnessError::Solve(s) => solve_error(s),
        other => CliError::Usage(other.to_string()),
    })?;
    println!("upper {:.12} lower {:.12} gap {:e}: {}", cert.upper, cert.lower, cert.gap, if cert.certified { "certified" } else { "not certified" });
    write_json(c.out.as_ref(), &cert)?;
    Ok(verdict(cert.certified))
}

pub fn experiment(c: &Common, kind: ExperimentKind, count: usize, probe: usize) -> Result<Verdict, CliError> {
    let mut spec = InstanceSpec::new(kind, c.seed).with_probe(probe);
    if let Some(n) = c.grid {
        spec = spec.with_grid(n);
    }
    let r = run_experiment(&spec, count);
    println!(
        "{kind}: {}/{} passed, {} failed, {} errors, worst residual {:e}, {:.1}s",
        r.passed,
        r.count,
        r.failed,
        r.errors,
        r.worst_residual,
        r.millis / 1e3
    );
    for v in r.verdicts.iter().filter(|v| !v.pass).take(5) {
        println!("  seed {}: {}{}", v.seed, v.note, v.error.as_deref().unwrap_or(""));
    }
    write_json(c.out.as_ref(), &r)?;
    let rows = r.verdicts.iter().map(|v| {
        vec![
            v.index.to_string(),
            v.seed.to_string(),
            v.pass.to_string(),
            num(v.residual),
            num(v.millis),
            v.error.as_deref().unwrap_or("").replace(',', ";"),
            v.note.replace(',', ";"),
        ]
    });
    write_csv(c.csv.as_ref(), &["index", "seed", "pass", "residual", "millis", "error", "note"], rows)?;
    Ok(verdict(r.all_passed()))
}
