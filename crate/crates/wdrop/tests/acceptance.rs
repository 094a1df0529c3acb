//! Acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed even when
//! output capture is on. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 6 7`.

#[path = "../../core/tests/support/gradcheck.rs"]
mod gradcheck;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use wdrop::bench;
use wdrop::config::ExperimentConfig;
use wdrop::csv_io;
use wdrop_core::data::{self, SplitKind, SplitRegime};
use wdrop_core::experiment::{self, FoldReport, Side, SplitSpec};
use wdrop_core::linalg::Matrix;
use wdrop_core::metrics::{self, NormalizedResiduals};
use wdrop_core::uncertainty::{sample_stats, train, wdropout_loss};
use wdrop_core::{Method, MethodConfig, RegressionDataset, SeededRng};

type Outcome = Result<String, String>;

fn require(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within_time(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    require(took < limit, format!("{what} took {:.1}s, limit {:.0}s", took.as_secs_f64(), limit.as_secs_f64()))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

fn identity_of_squared_deviation() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = 2 + (rng.uniform() * 30.0) as usize;
        let scale = rng.uniform_range(0.1, 3.0);
        let s: Vec<f64> = (0..len).map(|_| scale * rng.standard_normal()).collect();
        let y = 2.0 * rng.standard_normal();
        let direct = s.iter().map(|f| (f - y) * (f - y)).sum::<f64>() / len as f64;
        let (mu, var) = sample_stats(&s).map_err(|e| e.to_string())?;
        worst = worst.max((direct - ((mu - y) * (mu - y) + var)).abs());
    }
    require(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    within_time(start, Duration::from_secs(1), "1000 pairs")?;
    Ok(format!("1000 pairs, max |difference| {worst:.1e}"))
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (loss, base) in [(gradcheck::Loss::Mse, 0), (gradcheck::Loss::Nll, 1000), (gradcheck::Loss::Wdrop, 2000)] {
        for seed in 0..50 {
            worst = worst.max(gradcheck::check(loss, base + seed)?);
        }
    }
    within_time(start, Duration::from_secs(30), "150 gradient checks")?;
    Ok(format!("50 nets per loss, worst relative error {worst:.1e} in {:.1}s", start.elapsed().as_secs_f64()))
}

fn loss_spot_values() -> Outcome {
    let cases = [(vec![1.0, -1.0], 0.0), (vec![1.0, 1.0], 2.0), (vec![2.0, 0.0], 1.0 + (1.0 - 2f64.sqrt()).powi(2))];
    for (s, want) in cases {
        let got = wdropout_loss(&s, 0.0).map_err(|e| e.to_string())?;
        require((got - want).abs() <= 1e-12, format!("{s:?}: {got} vs {want}"))?;
    }
    Ok("{1,-1} -> 0, {1,1} -> 2, {2,0} -> 1 + (1 - sqrt 2)^2".into())
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let point = metrics::ws1(&NormalizedResiduals::from_values(vec![0.0])).map_err(|e| e.to_string())?;
    let closed = (2.0 / std::f64::consts::PI).sqrt();
    require((point - closed).abs() <= 1e-6, format!("ws1({{0}}) = {point}"))?;

    let mut rng = SeededRng::new(4);
    let shifted: Vec<f64> = (0..100_000).map(|_| 2.0 + rng.standard_normal()).collect();
    let ws = metrics::ws1(&NormalizedResiduals::from_values(shifted)).map_err(|e| e.to_string())?;
    require((ws - 2.0).abs() <= 0.02, format!("ws1 of N(2,1) draws = {ws}"))?;

    let ece = metrics::ece(&NormalizedResiduals::from_values(vec![0.7; 500]), 10).map_err(|e| e.to_string())?;
    require(ece == 1.8, format!("ECE of equal residuals = {ece:?}"))?;

    let draws: Vec<f64> = (0..1_000_000).map(|_| rng.standard_normal()).collect();
    let etl = metrics::etl(&NormalizedResiduals::from_values(draws), 0.99).map_err(|e| e.to_string())?;
    require((etl - 2.89).abs() <= 0.05, format!("ETL of N(0,1) draws = {etl}"))?;
    within_time(start, Duration::from_secs(60), "metric oracles")?;
    Ok(format!("ws1({{0}}) = {point:.7}, ws1(N(2,1)) = {ws:.4}, ECE = {ece}, ETL = {etl:.3}"))
}

fn analytic_curve_shape() -> Outcome {
    let curve = |mu: f64, sigma: f64| metrics::analytic_curves(mu, sigma, 10).map_err(|e| e.to_string());
    let sigmas: Vec<f64> = (0..=99).map(|i| 0.05 + i as f64 * (5.0 - 0.05) / 99.0).collect();
    let mut prev_ws2 = f64::INFINITY;
    let mut peak = 0.0f64;
    for &s in &sigmas {
        let c = curve(0.0, s)?;
        require((c.ws2 - (s - 1.0).abs()).abs() <= 1e-6, format!("sigma {s}: W2 {} vs |sigma - 1|", c.ws2))?;
        require(
            (c.ws2_closed - (s - 1.0).abs()).abs() <= 1e-12,
            format!("sigma {s}: closed-form W2 {}", c.ws2_closed),
        )?;
        require(c.ece <= 1.8 + 1e-12, format!("sigma {s}: ECE {} above 2(B-1)/B", c.ece))?;
        if s < 1.0 {
            require(c.ws2 <= prev_ws2, format!("W2 not decreasing towards sigma = 1 at {s}"))?;
        }
        prev_ws2 = c.ws2;
        peak = peak.max(c.ece);
    }
    // Linear growth: equal steps in sigma give equal steps in W1 and W2 far
    // above 1.
    let (a, b, c) = (curve(0.0, 3.0)?, curve(0.0, 4.0)?, curve(0.0, 5.0)?);
    let (d1, d2) = (b.ws1 - a.ws1, c.ws1 - b.ws1);
    require((d1 - d2).abs() <= 1e-6 && d1 > 0.0, format!("W1 steps {d1} and {d2}"))?;
    // ECE saturates on both branches: its steps shrink while W1's do not.
    let ece_at = |s: f64| curve(0.0, s).map(|c| c.ece);
    let (up_near, up_far) = (ece_at(2.0)? - ece_at(1.5)?, ece_at(5.0)? - ece_at(4.5)?);
    require(up_far < 0.5 * up_near, format!("ECE steps above 1: {up_near} then {up_far}"))?;
    let down_mid = (ece_at(0.4)? - ece_at(0.5)?) / 0.1;
    let down_edge = (ece_at(0.05)? - ece_at(0.1)?) / 0.05;
    require(down_edge < 0.5 * down_mid, format!("ECE slopes below 1: {down_mid} then {down_edge}"))?;
    // As sigma -> 0 the mass splits over the two central bins (limit
    // 2(B - 2)/B); exactly at 0 it sits in one bin.
    let (e05, e0) = (ece_at(0.05)?, ece_at(0.0)?);
    require((e05 - 1.6).abs() < 0.01, format!("ECE at sigma = 0.05 is {e05}"))?;
    require((e0 - 1.8).abs() < 1e-12, format!("ECE at sigma = 0 is {e0}"))?;
    // Along the shift curve N(mu, 1) ECE saturates at the same bound.
    let shift = curve(6.0, 1.0)?.ece;
    require((shift - 1.8).abs() < 1e-3, format!("ECE at mu = 6 is {shift}"))?;
    Ok(format!(
        "W2 = |sigma - 1| on [0.05, 5], W1 linear, ECE max on sigma curve {peak:.3} (sigma -> 0 plateau {e05:.3}, at 0: {e0}), shift curve {shift:.4}"
    ))
}

fn noisy_line_recovery() -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (i, sigma_true) in [0.0, 0.5, 1.0, 2.0].into_iter().enumerate() {
        let start = Instant::now();
        let data =
            data::gen_noisy_line(2000, sigma_true, &mut SeededRng::new(60 + i as u64)).map_err(|e| e.to_string())?;
        let mut cfg = MethodConfig::new(Method::Wdropout);
        cfg.hidden = vec![50, 50];
        cfg.drop_rate = 0.1;
        cfg.train_samples = 10;
        cfg.lr = 1e-3;
        cfg.epochs = 1000;
        cfg.batch_size = 100;
        cfg.inference_samples = 200;
        let model = train(&cfg, &data, &SeededRng::new(600 + i as u64)).map_err(|e| e.to_string())?;
        let grid: Vec<f64> = (0..200).map(|k| -1.0 + 2.0 * (k as f64 + 0.5) / 200.0).collect();
        let pred =
            model.predict(&Matrix::column(&grid), &mut SeededRng::new(6000 + i as u64)).map_err(|e| e.to_string())?;
        let s = mean(pred.sigma.as_slice());
        let ok = if sigma_true == 0.0 { s <= 0.1 } else { (s / sigma_true - 1.0).abs() <= 0.25 };
        let line = format!("sigma_true {sigma_true}: mean sigma {s:.3} ({:.0}s)", start.elapsed().as_secs_f64());
        if !ok {
            failures.push(line.clone());
        }
        lines.push(line);
    }
    if failures.is_empty() {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

/// Toy-noise settings shared by the benchmark and profile checks.
fn toy_method(method: Method) -> MethodConfig {
    let mut cfg = MethodConfig::new(method);
    cfg.hidden = vec![50, 50];
    cfg.drop_rate = 0.1;
    cfg.train_samples = 10;
    cfg.inference_samples = 50;
    cfg.epochs = TOY_EPOCHS;
    cfg.batch_size = 100;
    cfg
}

const TOY_N: usize = 10_000;
const TOY_EPOCHS: usize = 150;

fn fold_mean(reports: &[FoldReport], dataset: &str, method: &str, metric: &str) -> f64 {
    let v: Vec<f64> = reports
        .iter()
        .filter(|r| r.dataset == dataset && r.method == method && r.side == Side::Test)
        .map(|r| r.metrics.metric(metric).expect("known metric"))
        .collect();
    mean(&v)
}

fn toy_noise_benchmark() -> Outcome {
    let start = Instant::now();
    let data = data::gen_toy_noise(TOY_N, &mut SeededRng::new(70)).map_err(|e| e.to_string())?;
    let methods = [toy_method(Method::Wdropout), toy_method(Method::Mc)];
    let reports =
        experiment::run_experiment(&[data], &methods, &SplitSpec::kfold(5), 7, 10).map_err(|e| e.to_string())?;
    let w_ece = fold_mean(&reports, "toy-noise", "wdropout", "ece");
    let mc_ece = fold_mean(&reports, "toy-noise", "mc", "ece");
    let w_rmse = fold_mean(&reports, "toy-noise", "wdropout", "rmse");
    let mc_rmse = fold_mean(&reports, "toy-noise", "mc", "rmse");
    let msg = format!(
        "test ECE W {w_ece:.3} / MC {mc_ece:.3}, RMSE W {w_rmse:.3} / MC {mc_rmse:.3} ({:.0}s)",
        start.elapsed().as_secs_f64()
    );
    let ok = w_ece <= 0.25
        && mc_ece >= 0.4
        && (0.95..=1.10).contains(&w_rmse)
        && (0.95..=1.10).contains(&mc_rmse)
        && start.elapsed() < Duration::from_secs(15 * 60);
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn heteroscedastic_profile() -> Outcome {
    let start = Instant::now();
    let data = data::gen_toy_noise(TOY_N, &mut SeededRng::new(80)).map_err(|e| e.to_string())?;
    let norm = data.normalizer.clone().ok_or("generator did not record its scaling")?;
    let grid: Vec<f64> = (0..200).map(|k| -15.0 + 30.0 * k as f64 / 199.0).collect();
    let x = norm.apply_features(&Matrix::column(&grid));
    let truth: Vec<f64> = grid.iter().map(|&g| data::toy_noise_std(g)).collect();
    let mut corr = BTreeMap::new();
    for (i, method) in [Method::Wdropout, Method::Mc].into_iter().enumerate() {
        let model = train(&toy_method(method), &data, &SeededRng::new(800 + i as u64)).map_err(|e| e.to_string())?;
        let pred = model.predict(&x, &mut SeededRng::new(8000 + i as u64)).map_err(|e| e.to_string())?;
        corr.insert(method.name(), pearson(pred.sigma.as_slice(), &truth));
    }
    let (w, mc) = (corr["wdropout"], corr["mc"]);
    let msg = format!("corr(sigma, truth) W {w:.3} / MC {mc:.3} ({:.0}s)", start.elapsed().as_secs_f64());
    if w > 0.8 && mc < 0.3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn split_correctness() -> Outcome {
    // Anisotropic Gaussian rotated by 30 degrees.
    let mut rng = SeededRng::new(90);
    let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
    let rows: Vec<[f64; 2]> = (0..1000)
        .map(|_| {
            let (a, b) = (3.0 * rng.standard_normal() + 5.0, 0.5 * rng.standard_normal() - 2.0);
            [c * a - s * b, s * a + c * b]
        })
        .collect();
    // Oracle: principal axis of the 2x2 covariance in closed form.
    let n = rows.len() as f64;
    let mx = rows.iter().map(|r| r[0]).sum::<f64>() / n;
    let my = rows.iter().map(|r| r[1]).sum::<f64>() / n;
    let sxx: f64 = rows.iter().map(|r| (r[0] - mx).powi(2)).sum();
    let syy: f64 = rows.iter().map(|r| (r[1] - my).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| (r[0] - mx) * (r[1] - my)).sum();
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let axis = [theta.cos(), theta.sin()];
    let proj: Vec<f64> = rows.iter().map(|r| (r[0] - mx) * axis[0] + (r[1] - my) * axis[1]).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]));
    let mut low: Vec<usize> = order[..100].to_vec();
    let mut high: Vec<usize> = order[900..].to_vec();
    low.sort_unstable();
    high.sort_unstable();

    let features = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let targets = Matrix::column(&(0..1000).map(|i| (i % 97) as f64).collect::<Vec<_>>());
    let ds = RegressionDataset::new("aniso", features, targets).map_err(|e| e.to_string())?;
    let spec = SplitSpec::ood(10, vec![SplitRegime::Extrapolate, SplitRegime::Interpolate]);
    let plans = spec.plans(&ds, &mut SeededRng::new(0)).map_err(|e| e.to_string())?;
    let pca_extra: Vec<_> =
        plans.iter().filter(|p| p.kind == SplitKind::Pca && p.regime == SplitRegime::Extrapolate).collect();
    require(pca_extra.len() == 2, format!("{} PCA extrapolation plans", pca_extra.len()))?;
    let tests: Vec<&Vec<usize>> = pca_extra.iter().map(|p| &p.test).collect();
    // The component's sign is a convention; the two extreme chunks must be
    // the two 10% tails either way.
    require(
        (tests[0] == &low && tests[1] == &high) || (tests[0] == &high && tests[1] == &low),
        "PCA extrapolation test sets are not the extreme 10% tails".into(),
    )?;

    let scores: Vec<f64> = (0..100).map(f64::from).collect();
    let top =
        data::ordered_split(&scores, SplitKind::Label, 10, SplitRegime::Extrapolate, 9).map_err(|e| e.to_string())?;
    require(top.test == (90..100).collect::<Vec<_>>(), format!("label extrapolation test {:?}", top.test))?;

    let mut all = plans.clone();
    all.extend(data::kfold(1000, 10, &mut SeededRng::new(1)).map_err(|e| e.to_string())?);
    for p in &all {
        p.validate(1000).map_err(|e| format!("{}: {e}", p.label()))?;
    }
    Ok(format!("PCA tails exact, label top-10 exact, {} plans partition the data", all.len()))
}

/// Synthetic stand-ins with the shapes of three small tabular benchmarks:
/// smooth nonlinear mean plus input-dependent noise.
fn synthetic_tabular(n: usize, d: usize, seed: u64) -> RegressionDataset {
    let mut rng = SeededRng::new(seed);
    let w: Vec<f64> = (0..d).map(|_| rng.standard_normal() / (d as f64).sqrt()).collect();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let lin: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let f = 2.0 * lin.sin() + 0.5 * x[0] * x[1] + x[2].abs();
        let noise = 0.1 + 0.9 / (1.0 + (-2.0 * x[3]).exp());
        ys.push(f + noise * rng.standard_normal());
        xs.extend(x);
    }
    RegressionDataset::new("synthetic", Matrix::from_vec(n, d, xs).unwrap(), Matrix::column(&ys)).unwrap()
}

const TABULAR: [(&str, usize, usize); 3] =
    [("boston-like", 506, 13), ("energy-like", 768, 8), ("concrete-like", 1030, 8)];

fn tabular_ordering() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut datasets = Vec::new();
    for (i, (name, n, d)) in TABULAR.into_iter().enumerate() {
        let path = dir.path().join(format!("{name}.csv"));
        csv_io::write_dataset(&path, &synthetic_tabular(n, d, 100 + i as u64)).map_err(|e| e.to_string())?;
        datasets.push(format!("\"csv:{name}.csv:y\""));
    }
    let cfg_text = format!(
        "seed = 10\ndatasets = [{}]\nmethods = [\"wdropout\", \"mc\"]\nsplit = \"kfold\"\nfolds = {TAB_FOLDS}\n\
         epochs = {TAB_EPOCHS}\nbatch_size = 100\nhidden = [100, 100]\ndrop_rate = 0.1\ntrain_samples = 5\n\
         inference_samples = 50\nlambda = 1e-6\n",
        datasets.join(", ")
    );
    let cfg_path = dir.path().join("tabular.toml");
    std::fs::write(&cfg_path, &cfg_text).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::load(&cfg_path).map_err(|e| e.to_string())?;
    let out = bench::run(&cfg, dir.path(), 10, &dir.path().join("out"), false).map_err(|e| e.to_string())?;
    let mut wins = 0;
    let mut parts = Vec::new();
    for (name, _, _) in TABULAR {
        let (w, mc) = (fold_mean(&out.reports, name, "wdropout", "ece"), fold_mean(&out.reports, name, "mc", "ece"));
        if w < mc {
            wins += 1;
        }
        parts.push(format!("{name} W {w:.3} / MC {mc:.3}"));
    }
    let msg = format!("{}; W better on {wins}/3 ({:.0}s)", parts.join(", "), start.elapsed().as_secs_f64());
    if wins >= 2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

const TAB_FOLDS: usize = 5;
const TAB_EPOCHS: usize = 300;

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("readable output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).expect("readable output file"));
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::from_toml(
        "seed = 3\ndatasets = [\"toy-noise\", \"toy-hf\"]\nn = 200\nmethods = [\"wdropout\", \"mc\", \"pu\", \"de\", \"pu_de\", \"pu_mc\"]\n\
         split = \"ood\"\nregimes = [\"interpolate\", \"extrapolate\"]\nfold_limit = 1\nepochs = 4\nbatch_size = 50\n\
         hidden = [16]\ntrain_samples = 3\ninference_samples = 5\nmembers = 2\n",
        Path::new("determinism.toml"),
    )
    .map_err(|e| e.to_string())?;
    let seed = cfg.seed.unwrap();
    for run in ["a", "b"] {
        bench::run(&cfg, dir.path(), seed, &dir.path().join(run), false).map_err(|e| e.to_string())?;
    }
    let (a, b) = (read_tree(&dir.path().join("a")), read_tree(&dir.path().join("b")));
    require(!a.is_empty() && a.keys().eq(b.keys()), "different file sets".into())?;
    for (name, bytes) in &a {
        require(&b[name] == bytes, format!("{name} differs"))?;
    }
    let json = a.keys().filter(|k| k.ends_with(".json")).count();
    Ok(format!("{} files identical across two runs ({json} JSON, {} CSV)", a.len(), a.len() - json))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "squared deviation identity", identity_of_squared_deviation),
        (2, "gradient oracle", gradient_oracle),
        (3, "W-dropout loss spot values", loss_spot_values),
        (4, "metric oracles", metric_oracles),
        (5, "analytic calibration curves", analytic_curve_shape),
        (6, "noisy-line sigma recovery", noisy_line_recovery),
        (7, "toy-noise benchmark ordering", toy_noise_benchmark),
        (8, "heteroscedastic profile", heteroscedastic_profile),
        (9, "split correctness", split_correctness),
        (10, "small tabular ordering", tabular_ordering),
        (11, "bench determinism", determinism),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        match check() {
            Ok(detail) => println!("criterion {id:>2} {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL ({detail})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
