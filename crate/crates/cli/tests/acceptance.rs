//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Every criterion runs through a manifest, so criterion 11 can rerun the same
//! manifests on other worker counts and compare the JSON summaries byte for byte.

use std::time::{Duration, Instant};

use klab_cli::{evaluate, ExperimentManifest, Kind};
use serde_json::Value;

const SEED: u64 = 20_240_917;
const TARGET: f64 = 0.303_963_550_927_013_3;
const WORKERS: usize = 4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn manifest(kind: Kind, configure: impl FnOnce(&mut klab_cli::Params)) -> ExperimentManifest {
    let mut m = ExperimentManifest::new(kind, SEED);
    m.workers = Some(WORKERS);
    configure(&mut m.params);
    m
}

fn f(v: &Value, path: &[&str]) -> f64 {
    path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap_or(f64::NAN)
}

struct Suite {
    runs: Vec<(usize, ExperimentManifest, String)>,
    failures: usize,
}

impl Suite {
    /// Evaluates the manifests of one criterion and applies its gate.
    fn criterion(
        &mut self,
        id: usize,
        name: &str,
        budget: Duration,
        manifests: Vec<ExperimentManifest>,
        gate: impl FnOnce(&[Value]) -> Verdict,
    ) {
        let start = Instant::now();
        let mut estimates = Vec::new();
        for m in &manifests {
            match evaluate(m).and_then(|(s, _, failed)| Ok((s.to_json()?, s, failed))) {
                Ok((json, s, failed)) => {
                    if let Some(msg) = failed {
                        eprintln!("criterion {id}: {msg}");
                    }
                    self.runs.push((id, m.clone(), json));
                    estimates.push(s.estimates);
                }
                Err(e) => {
                    self.report(id, name, false, &format!("run failed: {e}"), start.elapsed(), Some(budget));
                    return;
                }
            }
        }
        let elapsed = start.elapsed();
        let v = gate(&estimates);
        self.report(id, name, v.pass && elapsed <= budget, &v.detail, elapsed, Some(budget));
    }

    fn report(&mut self, id: usize, name: &str, pass: bool, detail: &str, elapsed: Duration, budget: Option<Duration>) {
        if !pass {
            self.failures += 1;
        }
        let budget = budget.map(|b| format!(" of {}s", b.as_secs())).unwrap_or_default();
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.1}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
        );
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn in_band(x: f64) -> bool {
    (0.85..=1.15).contains(&x)
}

fn deviation_gate(e: &Value, final_max: f64) -> Verdict {
    let points = e["points"].as_array().cloned().unwrap_or_default();
    let d: Vec<String> = points
        .iter()
        .map(|p| format!("{:.4}±{:.4}", f(p, &["deviation"]), f(p, &["std_err"])))
        .collect();
    let last = f(e, &["final_deviation"]);
    let monotone = e["non_increasing_1se"].as_bool().unwrap_or(false);
    Verdict {
        pass: monotone && last <= final_max,
        detail: format!("D = [{}], non-increasing within 1 se: {monotone}, final {last:.4} <= {final_max}", d.join(", ")),
    }
}

fn main() {
    let mut suite = Suite { runs: Vec::new(), failures: 0 };

    suite.criterion(1, "exact identities", secs(10), vec![manifest(Kind::IdentitySuite, |_| {})], |e| {
        let e = &e[0];
        Verdict {
            pass: e["all_pass"].as_bool() == Some(true)
                && f(e, &["cocycle", "cases"]) >= 1e4
                && f(e, &["compose_p", "cases"]) >= 1e4
                && f(e, &["dani", "cases"]) >= 1e3,
            detail: format!(
                "cocycle max {:.2e}, compose_p max {:.2e}, dani mismatches {} ({} of {} cases nonzero)",
                f(e, &["cocycle", "max_residual"]),
                f(e, &["compose_p", "max_residual"]),
                e["dani"]["mismatches"],
                e["dani"]["nonzero_cases"],
                e["dani"]["cases"]
            ),
        }
    });

    let haar = manifest(Kind::Correlation, |p| {
        p.t_grid = Some(vec![1.0]);
        p.samples = Some(200_000);
    });
    suite.criterion(2, "Siegel calibration", secs(120), vec![haar], |e| {
        let mean = f(&e[0]["points"][0], &["haar_mean"]);
        Verdict {
            pass: (mean - TARGET).abs() <= 0.02 * TARGET,
            detail: format!("Haar mean count {mean:.5} vs {TARGET:.6} (2% band)"),
        }
    });

    let khintchine = |ifs: &str, samples: u64, side: &str| {
        let (ifs, side) = (ifs.to_string(), side.to_string());
        manifest(Kind::Khintchine, move |p| {
            p.ifs = Some(ifs);
            p.psi = Some("power:1,1".into());
            p.n = Some(1_000_000);
            p.samples = Some(samples);
            p.side = Some(side);
        })
    };
    suite.criterion(3, "Khintchine divergent, Lebesgue", secs(120), vec![khintchine("builtin:lebesgue", 50, "plus")], |e| {
        let med = f(&e[0]["sides"]["plus"], &["median"]);
        Verdict { pass: in_band(med), detail: format!("median ratio {med:.4} in [0.85, 1.15]") }
    });

    suite.criterion(4, "Khintchine divergent, Cantor", secs(300), vec![khintchine("builtin:cantor", 100, "both")], |e| {
        let plus = f(&e[0]["sides"]["plus"], &["median"]);
        let minus = f(&e[0]["sides"]["minus"], &["median"]);
        Verdict {
            pass: in_band(plus) && in_band(minus),
            detail: format!("median ratio plus {plus:.4}, minus {minus:.4} in [0.85, 1.15]"),
        }
    });

    let convergent = manifest(Kind::Khintchine, |p| {
        p.ifs = Some("builtin:cantor".into());
        p.psi = Some("logpower:2".into());
        p.n = Some(1_000_000);
        p.samples = Some(100);
        p.gain_from = Some(10_000);
    });
    suite.criterion(5, "Khintchine convergent, Cantor", secs(300), vec![convergent], |e| {
        let z = f(&e[0]["sides"]["plus"], &["zero_gain_fraction"]);
        Verdict { pass: z >= 0.8, detail: format!("zero-gain fraction {z:.2} >= 0.80") }
    });

    let translate = manifest(Kind::Translate, |p| {
        p.ifs = Some("builtin:cantor".into());
        p.t_grid = Some(vec![1e2, 1e3, 1e4, 1e5]);
        p.samples = Some(100_000);
    });
    suite.criterion(6, "expanding translates trend", secs(600), vec![translate], |e| deviation_gate(&e[0], 0.02));

    let walk = manifest(Kind::Walk, |p| {
        p.ifs = Some("builtin:cantor".into());
        p.steps = Some(100);
        p.samples = Some(100_000);
    });
    suite.criterion(7, "random walk equidistribution", secs(300), vec![walk], |e| {
        let e = &e[0];
        let mean = f(e, &["equidist", "mean_count"]);
        let ks = f(e, &["offset_law", "kolmogorov"]);
        let gate = f(e, &["offset_law", "gate"]);
        Verdict {
            pass: (mean - TARGET).abs() <= 0.05 * TARGET && ks <= gate,
            detail: format!("mean count {mean:.5} vs {TARGET:.5} (5%), offset-law KS {ks:.4} <= {gate:.4}"),
        }
    });

    let double = manifest(Kind::Double, |p| {
        p.ifs = Some("builtin:cantor".into());
        p.t_grid = Some(vec![1e2, 1e3, 1e4]);
        p.samples = Some(100_000);
    });
    suite.criterion(8, "double equidistribution", secs(600), vec![double], |e| deviation_gate(&e[0], 0.05));

    let recurrence = manifest(Kind::Walk, |p| {
        p.ifs = Some("builtin:cantor".into());
        p.steps = Some(200);
        p.samples = Some(10_000);
        p.thresholds = Some(vec![0.1, 0.05, 0.025]);
    });
    let concentration = manifest(Kind::Walk, |p| {
        p.ifs = Some("builtin:cantor".into());
        p.steps = Some(4 * (1.0f64 / 0.05).ln().ceil() as u64);
        p.samples = Some(10_000);
        p.radius = Some(0.05);
    });
    suite.criterion(9, "recurrence and dimension", secs(300), vec![recurrence, concentration], |e| {
        let fr: Vec<f64> = e[0]["recurrence"].as_array().unwrap().iter().map(|r| f(r, &["fraction"])).collect();
        let slope = f(&e[0], &["recurrence_slope"]);
        let conc = f(&e[1], &["ball_concentration", "value"]);
        let decreasing = fr.windows(2).all(|w| w[1] < w[0]);
        Verdict {
            pass: decreasing && slope >= 0.5 && conc <= 0.05,
            detail: format!("fractions {fr:?}, slope {slope:.3} >= 0.5, concentration {conc:.4} <= 0.05"),
        }
    });

    let regularity = manifest(Kind::Regularity, |p| {
        p.ifs = Some("builtin:cantor".into());
        p.samples = Some(100_000);
        p.replicas = Some(10_000);
        p.steps = Some(100);
        p.depths = Some(vec![5, 10, 20]);
    });
    suite.criterion(10, "regularity estimators", secs(120), vec![regularity], |e| {
        let e = &e[0];
        let dim = 2f64.ln() / 3f64.ln();
        let slope = f(e, &["ball_mass_slope"]);
        let lyap = f(e, &["lyapunov", "mean"]);
        let d: Vec<f64> = e["cdf_distance"].as_array().unwrap().iter().map(|x| f(x, &["distance"])).collect();
        let decreasing = d.windows(2).all(|w| w[1] < w[0]);
        Verdict {
            pass: (slope - dim).abs() <= 0.05 && (lyap - 3f64.ln()).abs() <= 0.01 * 3f64.ln() && decreasing,
            detail: format!("ball-mass slope {slope:.4} vs {dim:.4}, Lyapunov {lyap:.5}, cdf distances {d:?}"),
        }
    });

    let start = Instant::now();
    let mut mismatched = Vec::new();
    for (id, m, json) in &suite.runs {
        for workers in [1, 16] {
            let mut again = m.clone();
            again.workers = Some(workers);
            let same = evaluate(&again).and_then(|(s, _, _)| s.to_json()).map(|j| &j == json).unwrap_or(false);
            if !same {
                mismatched.push(format!("criterion {id} at {workers} workers"));
            }
        }
    }
    let detail = if mismatched.is_empty() {
        format!("{} summaries identical at 1, {WORKERS} and 16 workers", suite.runs.len())
    } else {
        format!("differing: {}", mismatched.join(", "))
    };
    suite.report(11, "reproducibility across workers", mismatched.is_empty(), &detail, start.elapsed(), None);

    if suite.failures > 0 {
        println!("{} criteria failed", suite.failures);
        std::process::exit(1);
    }
}
