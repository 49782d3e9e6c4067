use std::fmt::Write as _;

use automodel::baselines::{james_stein, js_expected_mpe, CvConfig};
use automodel::harness::{run_regression, RegMethod, run_study, study_am_config, StudyKind, StudySpec};
use automodel::imputation::am_estimate_with_pool;
use automodel::models::{exact_simple_expectation, MixingDistribution};
use automodel::{
    empirical_loss, Dataset64, DualityKind, ImputationConfig64, ManyNormalMeansModel, SimpleMeanModel, SolverOptions64,
};
use serde_json::{json, Map, Value};

use crate::args::{Common, DualityArg, FitMnmArgs, FitRegArgs, Format, JsArgs, OracleArgs, SimulateArgs, StudyArg};
use crate::io::{fmt10, read_csv, round10};
use crate::CliError;

fn num(v: f64) -> Value {
    json!(round10(v))
}

fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| num(*x)).collect())
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Applies the shared flags on top of a command's default configuration.
fn imputation_config(c: &Common, mut cfg: ImputationConfig64) -> ImputationConfig64 {
    if let Some(b) = c.boot {
        cfg.replicates = b as usize;
    }
    if let Some(d) = c.draws {
        cfg.draws_per_replicate = Some(d as usize);
    }
    cfg.kind = match c.duality {
        DualityArg::L1 => DualityKind::WeightedL1,
        DualityArg::L2 => DualityKind::WeightedL2,
    };
    cfg.seed = c.seed;
    if let Some(s) = c.step {
        cfg.solver.theta_step = s;
    }
    if let Some(t) = c.tol {
        cfg.solver.tol = t;
    }
    if let Some(m) = c.max_iters {
        cfg.solver.max_iters = m as usize;
    }
    cfg
}

fn config_json(command: &str, cfg: &ImputationConfig64, extra: Value) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("boot".into(), json!(cfg.replicates));
    m.insert("draws".into(), cfg.draws_per_replicate.map_or(Value::Null, |d| json!(d)));
    m.insert(
        "duality".into(),
        json!(match cfg.kind {
            DualityKind::WeightedL1 => "l1",
            DualityKind::WeightedL2 => "l2",
        }),
    );
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("step".into(), num(cfg.solver.theta_step));
    m.insert("tol".into(), num(cfg.solver.tol));
    m.insert("max_iters".into(), json!(cfg.solver.max_iters));
    if let Value::Object(e) = extra {
        m.extend(e);
    }
    Value::Object(m)
}

pub fn simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let kind = match a.study {
        StudyArg::Gaussian => StudyKind::GaussianA,
        StudyArg::Bimodal => StudyKind::Bimodal,
        StudyArg::Zeroinf => StudyKind::ZeroInflated,
    };
    let spec = StudySpec { kind, ns: a.n.clone(), reps: a.reps as usize, a: a.a, seed: a.common.seed };
    let cfg = imputation_config(&a.common, study_am_config());
    let res = run_study(&spec, &a.methods, &cfg)?;

    if a.common.format == Format::Csv {
        let mut s = String::from("method");
        for n in &spec.ns {
            write!(s, ",mpe_n{n}").unwrap();
        }
        for n in &spec.ns {
            write!(s, ",se_n{n}").unwrap();
        }
        s.push('\n');
        for r in &res.per_method {
            s.push_str(r.method.name());
            for v in r.mean_mpe.iter().chain(&r.se) {
                write!(s, ",{}", fmt10(*v)).unwrap();
            }
            s.push('\n');
        }
        return Ok(s);
    }

    let mut per_method = Map::new();
    for r in &res.per_method {
        per_method.insert(r.method.name().into(), json!({ "mean_mpe": nums(&r.mean_mpe), "se": nums(&r.se) }));
    }
    let extra = json!({
        "study": kind.name(),
        "n": spec.ns,
        "reps": spec.reps,
        "A": num(spec.a),
        "methods": res.per_method.iter().map(|r| r.method.name()).collect::<Vec<_>>(),
    });
    let mut diagnostics = Map::new();
    if !res.am_converged.is_empty() {
        diagnostics.insert("am_converged".into(), json!(res.am_converged));
    }
    Ok(render(&json!({
        "config": config_json("simulate-mnm", &cfg, extra),
        "per_method": per_method,
        "diagnostics": diagnostics,
    })))
}

pub fn fit_mnm(a: &FitMnmArgs) -> Result<String, CliError> {
    let data = Dataset64::new(read_csv(&a.train)?.y().to_vec())?;
    let m = a.m_support.map_or(data.len(), |m| m as usize);
    let model = ManyNormalMeansModel::new(m)?;
    let cfg = imputation_config(&a.common, study_am_config());
    let (sol, pool) = am_estimate_with_pool(&model, &data, &cfg)?;
    let mix = MixingDistribution::from_theta(&sol.theta)?;
    let post: Vec<f64> = data.y().iter().map(|y| model.posterior_mean(&sol.theta, *y)).collect::<Result<_, _>>()?;

    if a.common.format == Format::Csv {
        let mut s = String::from("eta,alpha\n");
        for (e, w) in mix.eta.iter().zip(&mix.alpha) {
            writeln!(s, "{},{}", fmt10(*e), fmt10(*w)).unwrap();
        }
        return Ok(s);
    }
    let loss = empirical_loss(&model, &sol.theta, &data)?;
    let extra = json!({ "train": a.train.display().to_string(), "n": data.len(), "m_support": m });
    Ok(render(&json!({
        "config": config_json("fit-mnm", &cfg, extra),
        "per_method": { "am": { "loss": num(loss), "posterior_means": nums(&post) } },
        "theta": nums(&sol.theta),
        "eta": nums(&mix.eta),
        "alpha": nums(&mix.alpha),
        "lambda": nums(&sol.lambda),
        "diagnostics": solution_diagnostics(&sol, pool.samples.len()),
    })))
}

fn solution_diagnostics(sol: &automodel::Solution64, pool_size: usize) -> Value {
    json!({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residual_g": num(sol.residual_g),
        "residual_v": num(sol.residual_v),
        "final_step": num(sol.final_step),
        "pool_size": pool_size,
    })
}

pub fn fit_reg(a: &FitRegArgs) -> Result<String, CliError> {
    let train = read_csv(&a.train)?;
    let test = read_csv(&a.test)?;
    let cfg = imputation_config(&a.common, ImputationConfig64::default());
    let cv = CvConfig { seed: a.common.seed, ..CvConfig::default() };
    let report = run_regression(&train, &test, &a.methods, &cfg, &cv, a.screen_top.map(|k| k as usize))?;

    if a.common.format == Format::Csv {
        let mut s = String::from("method,test_error,test_mse,active_1e4,active_nonzero\n");
        for r in &report.per_method {
            writeln!(s, "{},{},{},{},{}", r.method.name(), r.test_error, fmt10(r.test_mse), r.active_1e4, r.active_nonzero)
                .unwrap();
        }
        return Ok(s);
    }
    let mut per_method = Map::new();
    let mut theta = Map::new();
    for r in &report.per_method {
        per_method.insert(
            r.method.name().into(),
            json!({
                "test_error": r.test_error,
                "test_mse": num(r.test_mse),
                "active_counts": { "gt_1e-4": r.active_1e4, "nonzero": r.active_nonzero },
                "cv_lambda": r.lambda.map_or(Value::Null, num),
                "converged": r.converged,
            }),
        );
        theta.insert(r.method.name().into(), nums(&r.theta));
    }
    let extra = json!({
        "train": a.train.display().to_string(),
        "test": a.test.display().to_string(),
        "screen_top": a.screen_top,
        "folds": cv.folds,
        "columns": report.columns,
    });
    let lambda = report.method(RegMethod::Am).map_or(Value::Null, |r| nums(&r.multipliers));
    Ok(render(&json!({
        "config": config_json("fit-reg", &cfg, extra),
        "per_method": per_method,
        "theta": theta,
        "lambda": lambda,
        "diagnostics": { "n_train": train.len(), "n_test": test.len(), "covariates_used": report.columns.len() },
    })))
}

/// Synthetic sample of size `n` with mean exactly `ybar` and unit plug-in
/// variance.
pub fn oracle_data(n: usize, ybar: f64) -> Result<Dataset64, CliError> {
    // A centred grid standardizes exactly, no randomness needed.
    let z: Vec<f64> = (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect();
    let mean = z.iter().sum::<f64>() / n as f64;
    let sd = (z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let y = if n == 1 || sd == 0.0 {
        vec![ybar; n]
    } else {
        z.iter().map(|v| ybar + (v - mean) / sd).collect()
    };
    Ok(Dataset64::new(y)?)
}

pub fn oracle_simple(a: &OracleArgs) -> Result<String, CliError> {
    let n = a.n as usize;
    let base = ImputationConfig64 {
        replicates: 2000,
        solver: SolverOptions64 { theta_step: 1.0, ..SolverOptions64::default() },
        ..ImputationConfig64::default()
    };
    let cfg = imputation_config(&a.common, base);
    let data = oracle_data(n, a.ybar)?;
    let (sol, pool) = am_estimate_with_pool(&SimpleMeanModel, &data, &cfg)?;
    let exact = exact_simple_expectation(a.ybar, n);
    let mc = sol.theta[0];
    let b = pool.replicate_thetas.len() as f64;
    let reps: Vec<f64> = pool.replicate_thetas.iter().map(|t| t[0]).collect();
    let rmean = reps.iter().sum::<f64>() / b;
    let rvar = reps.iter().map(|t| (t - rmean) * (t - rmean)).sum::<f64>() / (b - 1.0).max(1.0);
    let se = (rvar / b + 1.0 / pool.samples.len() as f64).sqrt();

    if a.common.format == Format::Csv {
        return Ok(format!("exact,monte_carlo,abs_diff,se\n{},{},{},{}\n", fmt10(exact), fmt10(mc), fmt10((mc - exact).abs()), fmt10(se)));
    }
    let extra = json!({ "n": n, "ybar": num(a.ybar) });
    Ok(render(&json!({
        "config": config_json("oracle-simple", &cfg, extra),
        "exact": num(exact),
        "monte_carlo": num(mc),
        "abs_diff": num((mc - exact).abs()),
        "se": num(se),
        "per_method": { "am": { "estimate": num(mc), "se": num(se) } },
        "theta": nums(&sol.theta),
        "lambda": nums(&sol.lambda),
        "diagnostics": solution_diagnostics(&sol, pool.samples.len()),
    })))
}

pub fn baseline_js(a: &JsArgs) -> Result<String, CliError> {
    let y = match &a.train {
        Some(p) => Some(read_csv(p)?.y().to_vec()),
        None => None,
    };
    let n = match (&y, a.n) {
        (Some(y), _) => y.len(),
        (None, Some(n)) => n,
        (None, None) => return Err(CliError::Usage("--n is required with --A when no --train file is given".into())),
    };
    let expected = a.a.map(|a| js_expected_mpe(a, n));
    let js = y.as_deref().map(james_stein).transpose()?;

    if a.common.format == Format::Csv {
        let mut s = String::new();
        match (&y, &js) {
            (Some(y), Some(js)) => {
                s.push_str("y,js\n");
                for (v, e) in y.iter().zip(&js.estimates) {
                    writeln!(s, "{},{}", fmt10(*v), fmt10(*e)).unwrap();
                }
            }
            _ => {
                s.push_str("n,A,expected_mpe\n");
                writeln!(s, "{n},{},{}", fmt10(a.a.unwrap_or(0.0)), expected.map_or(String::new(), fmt10)).unwrap();
            }
        }
        return Ok(s);
    }
    let mut js_out = Map::new();
    if let Some(js) = &js {
        js_out.insert("estimates".into(), nums(&js.estimates));
        js_out.insert("degenerate".into(), json!(js.degenerate));
    }
    if let Some(e) = expected {
        js_out.insert("expected_mpe".into(), num(e));
    }
    Ok(render(&json!({
        "config": {
            "command": "baseline-js",
            "train": a.train.as_ref().map(|p| p.display().to_string()),
            "n": n,
            "A": a.a.map(num),
        },
        "per_method": { "js": js_out },
        "diagnostics": {},
    })))
}
