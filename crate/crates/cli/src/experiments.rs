//! One runner per experiment kind. Each returns its CSV table and estimates.

use klab_core::bigfixed::DEFAULT_FRAC_BITS;
use klab_core::dio::count::required_frac_bits;
use klab_core::dio::{
    count_sk_direct, count_sk_siegel, khintchine_experiment_at, precise_draw, variance_probe, ApproxFn,
    Normalization, Side,
};
use klab_core::homsp::{CountInterval, PElement};
use klab_core::ifs::{lyapunov, validate, AffineSystem, SampleMode, SampleStream, DEFAULT_POSITIVIZE_CAP, DEFAULT_TOLERANCE};
use klab_core::seed::{label, stream_rng};
use klab_core::stats::{cdf_distance, estimate_ball_mass, log_log_slope, mean, std_err};
use klab_core::translate::{
    cocycle_identity_check, compose_residual, correlation_estimate, double_deviation, equidist_deviation,
    DeviationReport, TranslateConfig,
};
use klab_core::walk::{ball_concentration, recurrence_profile, recurrence_slope, run_walk, walk_equidist, WalkConfig};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::emit::{num, Table};
use crate::manifest::{ExperimentManifest, Kind, Params};
use crate::CliError;

pub const COCYCLE_TOLERANCE: f64 = 1e-10;
pub const COMPOSE_TOLERANCE: f64 = 1e-12;
/// Scale ratios and the largest denominator window of the random Dani cases.
const DANI_TAUS: [f64; 3] = [1.25, 1.5, 2.0];
const DANI_MAX_Q: f64 = 262_144.0;
const DEFAULT_THRESHOLDS: [f64; 3] = [0.1, 0.05, 0.025];

/// What a runner hands back for emission.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub claim: &'static str,
    /// Extra parameter echo beyond the manifest's own block.
    pub resolved: Value,
    pub estimates: Value,
    /// Set when a check embedded in the run did not hold.
    pub failed: Option<String>,
}

pub fn execute(m: &ExperimentManifest) -> Result<Outcome, CliError> {
    match m.kind {
        Kind::Khintchine => khintchine(m),
        Kind::Walk => walk(m),
        Kind::Translate => translate(m),
        Kind::Double => double(m),
        Kind::Correlation => correlation(m),
        Kind::Regularity => regularity(m),
        Kind::IdentitySuite => identity_suite(m),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Exact digit draws for missing-digit systems, backward iteration otherwise.
fn sigma_stream(system: &AffineSystem, seed: u64) -> Result<SampleStream, CliError> {
    let mode = match system.digit_system() {
        Some(_) => SampleMode::DigitExact { depth: 64, frac_bits: DEFAULT_FRAC_BITS },
        None => SampleMode::Backward { tolerance: DEFAULT_TOLERANCE },
    };
    Ok(SampleStream::new(system.clone(), mode, seed)?)
}

fn resolved_ifs(p: &Params) -> Result<(AffineSystem, Value), CliError> {
    let (system, def) = p.system()?;
    let report = validate(&system);
    if !report.usable() {
        return Err(invalid(format!(
            "ifs: system must contract on average and have no common fixed point (mean log rate {}, fixed point {:?})",
            report.mean_log_rate, report.common_fixed_point
        )));
    }
    Ok((system, json!({ "ifs_definition": def })))
}

fn sides(p: &Params) -> Result<Vec<Side>, CliError> {
    match p.side.as_deref().unwrap_or("plus") {
        "plus" => Ok(vec![Side::Plus]),
        "minus" => Ok(vec![Side::Minus]),
        "both" => Ok(vec![Side::Plus, Side::Minus]),
        other => Err(invalid(format!("side: expected plus, minus or both, got {other:?}"))),
    }
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Plus => "plus",
        Side::Minus => "minus",
    }
}

fn khintchine(m: &ExperimentManifest) -> Result<Outcome, CliError> {
    let p = &m.params;
    let (system, mut resolved) = resolved_ifs(p)?;
    let psi = p.psi()?;
    let n = p.n()?;
    let samples = p.samples()?;
    let norm = match p.normalization.as_deref().unwrap_or("raw") {
        "raw" => Normalization::Raw,
        "capped" => Normalization::Capped,
        other => return Err(invalid(format!("normalization: expected raw or capped, got {other:?}"))),
    };
    let bits = p.precision_bits.unwrap_or(DEFAULT_FRAC_BITS);
    if bits < required_frac_bits(n) {
        return Err(invalid(format!(
            "precision_bits: {bits} is below the {} bits needed at N = {n}",
            required_frac_bits(n)
        )));
    }
    if let Some(g) = p.gain_from.filter(|g| *g >= n) {
        return Err(invalid(format!("gain_from: {g} must be below N = {n}")));
    }
    resolved["precision_bits"] = json!(bits);
    let stream = sigma_stream(&system, m.seed)?;
    let mut table = Table::new(&[
        "sample_id", "s_digest", "N", "side", "T_N", "T_N_hi", "sum_psi", "ratio", "ratio_hi", "gain", "gain_hi", "flags",
    ]);
    let mut per_side = serde_json::Map::new();
    for side in sides(p)? {
        let r = khintchine_experiment_at(&stream, &psi, n, samples, side, norm, bits)?;
        let gains: Vec<Option<CountInterval>> =
            r.samples.iter().map(|s| p.gain_from.map(|g| s.result.gain_between(g, n))).collect();
        for (s, gain) in r.samples.iter().zip(&gains) {
            let c = &s.result;
            table.push(vec![
                s.index.to_string(),
                s.s_digest.clone(),
                n.to_string(),
                side_name(side).into(),
                c.count.lo.to_string(),
                c.count.hi.to_string(),
                num(c.sum_psi),
                num(c.ratio),
                num(c.ratio_hi),
                gain.map(|g| g.lo.to_string()).unwrap_or_default(),
                gain.map(|g| g.hi.to_string()).unwrap_or_default(),
                if c.count.is_exact() { String::new() } else { "ambiguous".into() },
            ]);
        }
        let zero_gain = p.gain_from.map(|_| {
            gains.iter().flatten().filter(|g| g.hi == 0).count() as f64 / samples as f64
        });
        per_side.insert(
            side_name(side).into(),
            json!({
                "median": r.median,
                "median_lo": r.median_lo,
                "median_hi": r.median_hi,
                "q1": r.q1,
                "q3": r.q3,
                "ambiguous_samples": r.ambiguous_samples,
                "sum_psi": r.samples[0].result.sum_psi,
                "zero_gain_fraction": zero_gain,
            }),
        );
    }
    let mut estimates = json!({ "samples": samples, "sides": per_side });
    if let (Some(tau), Some([first, last])) = (p.tau, p.blocks) {
        let v = variance_probe(&stream, &psi, tau, first, last, samples)?;
        estimates["variance"] = json!({
            "tau": tau,
            "blocks": [first, last],
            "ratio": v.ratio,
            "std_err": v.ratio_std_err,
            "sum_y": v.sum_y,
            "ambiguous_blocks": v.ambiguous_blocks,
        });
    }
    let claim = if p.gain_from.is_some() {
        "theorem-A-convergent"
    } else if norm == Normalization::Capped {
        "corollary-A-lower-bound"
    } else {
        "theorem-A-divergent"
    };
    Ok(Outcome { table, claim, resolved, estimates, failed: None })
}

fn walk(m: &ExperimentManifest) -> Result<Outcome, CliError> {
    let p = &m.params;
    let (system, resolved) = resolved_ifs(p)?;
    let steps = p.steps.ok_or_else(|| invalid("missing parameter `steps`"))? as usize;
    let replicas = p.samples()? as usize;
    let rect = p.rect()?;
    let cfg = WalkConfig::new(system.clone(), steps, replicas, m.seed);
    let e = run_walk(&cfg)?;

    let mut table = Table::new(&["n", "replica", "log_rate", "offset", "systole"]);
    for (i, (x, g)) in e.endpoints.iter().zip(&e.p_coords).enumerate() {
        table.push(vec![steps.to_string(), i.to_string(), num(g.log_rate), num(g.offset), num(x.systole())]);
    }

    let eq = walk_equidist(&e, &rect)?;
    let thresholds = p.thresholds.clone().unwrap_or(DEFAULT_THRESHOLDS.to_vec());
    let profile = recurrence_profile(&e, &thresholds)?;

    let mut direct = SampleStream::new(system.clone(), SampleMode::Forward { n: steps }, m.seed)?;
    if !system.is_orientation_preserving() {
        direct = direct.with_positivize_cap(DEFAULT_POSITIVIZE_CAP);
    }
    let sigma_n: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| direct.fork(&[label::SIGMA_N, i]).sample_sigma_n(steps))
        .collect::<Result<_, _>>()?;
    let offset_ks = cdf_distance(&e.offsets(), &sigma_n)?;

    let concentration = match p.radius {
        Some(r) => Some(ball_concentration(&e, r)?),
        None => None,
    };
    let rates: Vec<f64> = e.p_coords.iter().map(|g| -g.log_rate / steps.max(1) as f64).collect();
    let estimates = json!({
        "replicas": replicas,
        "steps": steps,
        "equidist": eq,
        "recurrence": profile.iter().map(|(r, f)| json!({ "rho": r, "fraction": f })).collect::<Vec<_>>(),
        "recurrence_slope": recurrence_slope(&profile),
        "ball_concentration": concentration.map(|c| json!({ "radius": p.radius, "value": c })),
        "offset_law": { "kolmogorov": offset_ks, "gate": 3.0 / (replicas as f64).sqrt() },
        "lyapunov": { "mean": mean(&rates), "std_err": std_err(&rates) },
    });
    Ok(Outcome { table, claim: "theorem-C", resolved, estimates, failed: None })
}

fn deviation_table(report: &DeviationReport, double: bool) -> Table {
    let mut table = if double {
        Table::new(&["t1", "t2", "mean", "stderr", "target", "deviation", "ambiguous"])
    } else {
        Table::new(&["t", "mean", "stderr", "target", "deviation", "ambiguous"])
    };
    for q in &report.points {
        let mut row = vec![num(q.t)];
        if double {
            row.push(q.t2.map(num).unwrap_or_default());
        }
        row.extend([num(q.mean), num(q.std_err), num(q.target), num(q.deviation), q.ambiguous.to_string()]);
        table.push(row);
    }
    table
}

fn deviation_estimates(report: &DeviationReport) -> Value {
    json!({
        "replicas": report.replicas,
        "points": report.points,
        "slope": report.slope,
        "non_increasing_1se": report.non_increasing_within(1.0),
        "final_deviation": report.points.last().map(|q| q.deviation),
    })
}

fn translate_config(m: &ExperimentManifest, times: Vec<f64>, double: bool) -> Result<(TranslateConfig, Value), CliError> {
    let p = &m.params;
    let (system, resolved) = resolved_ifs(p)?;
    let rects = if double { vec![p.rect()?, p.rect2()?] } else { vec![p.rect()?] };
    let cfg = TranslateConfig { stream: sigma_stream(&system, m.seed)?, times, rects, replicas: p.samples()? as usize };
    Ok((cfg, resolved))
}

fn translate(m: &ExperimentManifest) -> Result<Outcome, CliError> {
    let (cfg, resolved) = translate_config(m, m.params.t_grid()?, false)?;
    let report = equidist_deviation(&cfg)?;
    Ok(Outcome {
        table: deviation_table(&report, false),
        claim: "theorem-B",
        resolved,
        estimates: deviation_estimates(&report),
        failed: None,
    })
}

fn double(m: &ExperimentManifest) -> Result<Outcome, CliError> {
    let grid = m.params.t_grid()?;
    let Some((&t1, rest)) = grid.split_first().filter(|(_, r)| !r.is_empty()) else {
        return Err(invalid("t_grid: double needs t1 followed by at least one t2"));
    };
    let pairs: Vec<(f64, f64)> = rest.iter().map(|&t2| (t1, t2)).collect();
    let (cfg, resolved) = translate_config(m, vec![], true)?;
    let report = double_deviation(&cfg, &pairs)?;
    Ok(Outcome {
        table: deviation_table(&report, true),
        claim: "prop-6.1-double-equidistribution",
        resolved,
        estimates: deviation_estimates(&report),
        failed: None,
    })
}

fn correlation(m: &ExperimentManifest) -> Result<Outcome, CliError> {
    let p = &m.params;
    let rect = p.rect()?;
    let samples = p.samples()?;
    let mut table = Table::new(&["t", "estimate", "stderr", "haar_mean", "haar_stderr", "samples"]);
    let mut points = Vec::new();
    for t in p.t_grid()? {
        let c = correlation_estimate(t, &rect, samples, m.seed)?;
        table.push(vec![
            num(t),
            num(c.estimate),
            num(c.std_err),
            num(c.haar_mean),
            num(c.haar_std_err),
            samples.to_string(),
        ]);
        points.push(c);
    }
    let decays = points
        .windows(2)
        .all(|w| w[1].estimate.abs() <= w[0].estimate.abs() + 2.0 * w[0].std_err.max(w[1].std_err));
    let estimates = json!({ "points": points, "abs_non_increasing_2se": decays });
    Ok(Outcome { table, claim: "correlation-decay", resolved: json!({}), estimates, failed: None })
}

/// Coupled draws: `sigma` by backward iteration and, along the same index
/// path, its prefixes `phi_1 ∘ ... ∘ phi_n (0)` for each requested `n`.
fn coupled_draws(stream: &SampleStream, i: u64, depths: &[u64]) -> Result<(f64, Vec<f64>), CliError> {
    let mut st = stream.fork(&[label::SIGMA_N, i]);
    let max_depth = depths.iter().copied().max().unwrap_or(0);
    let mut prefixes = vec![0.0; depths.len()];
    let (mut x, mut scale) = (0.0f64, 1.0f64);
    let mut step = 0u64;
    loop {
        for (slot, _) in prefixes.iter_mut().zip(depths).filter(|(_, d)| **d == step) {
            *slot = x;
        }
        let (map, _) = st.draw_step()?;
        let moved = scale * map.offset;
        x += moved;
        scale *= map.rate;
        step += 1;
        if step >= max_depth && scale.abs() < DEFAULT_TOLERANCE && moved.abs() < DEFAULT_TOLERANCE {
            for (slot, _) in prefixes.iter_mut().zip(depths).filter(|(_, d)| **d == step) {
                *slot = x;
            }
            return Ok((x, prefixes));
        }
        if step > 1 << 20 {
            return Err(CliError::Failed("backward iteration did not settle".into()));
        }
    }
}

fn regularity(m: &ExperimentManifest) -> Result<Outcome, CliError> {
    let p = &m.params;
    let (system, resolved) = resolved_ifs(p)?;
    let samples = p.samples()?;
    let replicas = p.replicas.unwrap_or(samples);
    let steps = p.steps.unwrap_or(100).max(1);
    let depths = p.depths.clone().unwrap_or(vec![5, 10, 20]);
    let base = system.digit_system().map(|d| d.base as f64).unwrap_or(2.0);
    let radii = p.radii.clone().unwrap_or((4..=8).map(|k| base.powi(-k)).collect());
    if !radii.iter().all(|r| *r > 0.0) {
        return Err(invalid("radii must be positive"));
    }
    let stream = SampleStream::new(system.clone(), SampleMode::Backward { tolerance: DEFAULT_TOLERANCE }, m.seed)?;
    let draws: Vec<(f64, Vec<f64>)> = (0..samples)
        .into_par_iter()
        .map(|i| coupled_draws(&stream, i, &depths))
        .collect::<Result<_, _>>()?;
    let sigma: Vec<f64> = draws.iter().map(|d| d.0).collect();

    let mut table = Table::new(&["quantity", "parameter", "value"]);
    let ball = estimate_ball_mass(&sigma, &radii)?;
    for (r, mass) in &ball {
        table.push(vec!["ball_mass".into(), num(*r), num(*mass)]);
    }
    let (rs, masses): (Vec<f64>, Vec<f64>) = ball.iter().cloned().unzip();
    let slope = log_log_slope(&rs, &masses);

    let mut distances = Vec::new();
    for (j, d) in depths.iter().enumerate() {
        let prefix: Vec<f64> = draws.iter().map(|x| x.1[j]).collect();
        let dist = cdf_distance(&prefix, &sigma)?;
        table.push(vec!["cdf_distance".into(), d.to_string(), num(dist)]);
        distances.push(json!({ "n": d, "distance": dist }));
    }

    let walkers: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut st = stream.fork(&[label::WALK, i]);
            let mut log_rate = 0.0;
            for _ in 0..steps {
                log_rate += st.draw_step()?.0.rate.abs().ln();
            }
            Ok(-log_rate / steps as f64)
        })
        .collect::<Result<_, CliError>>()?;
    let lyap = json!({ "exact": lyapunov(&system), "mean": mean(&walkers), "std_err": std_err(&walkers), "steps": steps, "replicas": replicas });
    table.push(vec!["lyapunov_mean".into(), steps.to_string(), num(mean(&walkers))]);

    let dimension = system
        .digit_system()
        .filter(|_| system.weights().windows(2).all(|w| w[0] == w[1]))
        .map(|d| (d.digits.len() as f64).ln() / (d.base as f64).ln());
    let estimates = json!({
        "samples": samples,
        "ball_mass": ball.iter().map(|(r, v)| json!({ "radius": r, "mass": v })).collect::<Vec<_>>(),
        "ball_mass_slope": slope,
        "similarity_dimension": dimension,
        "cdf_distance": distances,
        "lyapunov": lyap,
    });
    Ok(Outcome { table, claim: "lemma-2.1-2.2-regularity", resolved, estimates, failed: None })
}

fn identity_suite(m: &ExperimentManifest) -> Result<Outcome, CliError> {
    let p = &m.params;
    let cases = p.samples.unwrap_or(10_000);
    let dani_cases = p.replicas.unwrap_or(1_000);

    let mut rng = stream_rng(m.seed, &[label::IDENTITY, 0]);
    let mut cocycle: f64 = 0.0;
    for _ in 0..cases {
        let t = 10f64.powf(rng.random_range(0.0..6.0));
        let s = rng.random_range(-1e6..1e6);
        let g = PElement::new(10f64.powf(rng.random_range(-3.0..3.0)), rng.random_range(-1e6..1e6))?;
        cocycle = cocycle.max(cocycle_identity_check(t, s, &g)?);
    }

    let mut rng = stream_rng(m.seed, &[label::IDENTITY, 1]);
    let mut compose: f64 = 0.0;
    for _ in 0..cases {
        let mut draw = || PElement::new(10f64.powf(rng.random_range(-3.0..3.0)), rng.random_range(-1e3..1e3));
        let (a, b) = (draw()?, draw()?);
        compose = compose.max(compose_residual(&a, &b));
    }

    let families = [ApproxFn::reciprocal(), ApproxFn::Power { c: 1.0, alpha: 2.0 }, ApproxFn::LogPower { beta: 2.0 }];
    let cantor = sigma_stream(&AffineSystem::cantor(), m.seed)?;
    let dani: Vec<(bool, u64)> = (0..dani_cases)
        .into_par_iter()
        .map(|i| {
            let mut st = cantor.fork(&[label::IDENTITY, 2, i]);
            let tau = DANI_TAUS[st.rng_mut().random_range(0..DANI_TAUS.len())];
            let k = st.rng_mut().random_range(0..=(DANI_MAX_Q.log2() / tau.log2()).floor() as u32);
            let s = precise_draw(&mut st, DANI_MAX_Q, 64)?;
            let psi = &families[(i % 3) as usize];
            let direct = count_sk_direct(&s, psi, tau, k)?;
            let siegel = count_sk_siegel(&s, psi, tau, k)?;
            Ok((direct != siegel, direct.hi))
        })
        .collect::<Result<_, CliError>>()?;
    let mismatches = dani.iter().filter(|d| d.0).count() as u64;
    let nonzero = dani.iter().filter(|d| d.1 > 0).count();

    let checks = [
        ("cocycle", cases, cocycle, 0, COCYCLE_TOLERANCE, cocycle <= COCYCLE_TOLERANCE),
        ("compose_p", cases, compose, 0, COMPOSE_TOLERANCE, compose <= COMPOSE_TOLERANCE),
        ("dani", dani_cases, 0.0, mismatches, 0.0, mismatches == 0),
    ];
    let mut table = Table::new(&["identity", "cases", "max_residual", "mismatches", "tolerance", "pass"]);
    let mut estimates = serde_json::Map::new();
    for (name, n, residual, mism, tol, pass) in checks {
        table.push(vec![name.into(), n.to_string(), num(residual), mism.to_string(), num(tol), pass.to_string()]);
        estimates.insert(
            name.into(),
            json!({ "cases": n, "max_residual": residual, "mismatches": mism, "tolerance": tol, "pass": pass }),
        );
    }
    let failing: Vec<&str> = checks.iter().filter(|c| !c.5).map(|c| c.0).collect();
    estimates["dani"]["nonzero_cases"] = json!(nonzero);
    estimates.insert("all_pass".into(), json!(failing.is_empty()));
    Ok(Outcome {
        table,
        claim: "exact-identities",
        resolved: json!({}),
        estimates: Value::Object(estimates),
        failed: (!failing.is_empty()).then(|| format!("identities failed: {}", failing.join(", "))),
    })
}
