use std::path::{Path, PathBuf};

use interrupted::base::BaseProcessModel;
use interrupted::condsim::{conditional_pi_field, McmcSettings};
use interrupted::field::GridLayout;
use interrupted::geometry::{PointPattern, ThinnedPair, Window};
use interrupted::inference::study::{run_study, StudyConfig};
use interrupted::inference::{
    average_estimators, fit_min_contrast, fit_q_cl1, fit_theta_cl2, AverageSettings, BaseFamily, ClSettings,
    ContrastSettings, ContrastStat, FitResult, PairRange,
};
use interrupted::io::{curve_to_csv, pattern_to_csv, raster_to_csv, raster_to_pgm};
use interrupted::rng::{split_seed, streams};
use interrupted::selection::pi_raster_given_points;
use interrupted::special::linspace;
use interrupted::summaries::{envelopes, estimate, Stat, StatOptions, SummaryFunction};
use interrupted::thinning::{simulate_triple, InterruptedModel};
use serde_json::json;

use crate::config::{
    ensure_dir, parse_window, read_family, read_json, read_model, read_pattern, write_json, write_text, ModelConfig,
};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::{CondsimArgs, EnvelopeArgs, FitArgs, SimulateArgs, StudyArgs, SummaryArgs};

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// `<stem>.manifest.json` next to a single-file output.
fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn parse_range(s: &str) -> CliResult<PairRange> {
    match s.to_ascii_lowercase().as_str() {
        "default" => Ok(PairRange::Default),
        "unlimited" | "inf" | "none" => Ok(PairRange::Unlimited),
        v => match v.parse::<f64>() {
            Ok(r) if r > 0.0 => Ok(PairRange::Fixed(r)),
            _ => usage(format!("--cl2-range must be default, unlimited or a positive distance, got {s:?}")),
        },
    }
}

fn r_grid(w: &Window, rmax: Option<f64>, nr: usize) -> CliResult<Vec<f64>> {
    let rmax = rmax.unwrap_or(w.min_side() / 4.0);
    if !(rmax > 0.0) || nr < 2 {
        return usage("need rmax > 0 and at least two distances");
    }
    Ok(linspace(0.0, rmax, nr))
}

fn write_curve(out: &Path, f: &SummaryFunction) -> CliResult<()> {
    write_text(out, curve_to_csv(f))?;
    write_json(&out.with_extension("json"), f)
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let mut cfg: ModelConfig = read_json(&a.config)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(1);
    cfg.seed = Some(seed);
    let model = cfg.model()?;
    let w = cfg.window()?;
    let t = simulate_triple(&model, &w, seed)?;
    ensure_dir(&a.out)?;
    let mut man = Manifest::new("simulate", seed, json!({ "model": cfg, "pi_grid": a.pi_grid }));
    for (name, p) in [("y.csv", &t.y), ("x.csv", t.x()), ("xbar.csv", t.xbar())] {
        write_text(&a.out.join(name), pattern_to_csv(p))?;
        man.output(name);
    }
    let meta = json!({
        "model": model,
        "window": w,
        "seed": seed,
        "q": model.q()?,
        "rho_y": model.intensity_y()?,
        "rho_x": model.intensity_x()?,
        "n_y": t.y.len(),
        "n_x": t.x().len(),
        "n_xbar": t.xbar().len(),
    });
    write_json(&a.out.join("meta.json"), &meta)?;
    man.output("meta.json");
    if let Some(r) = a.pi_grid {
        let layout = GridLayout::square(w.clone(), r)?;
        let pi = pi_raster_given_points(&model.selection, &w, t.y.points(), &layout, split_seed(seed, streams::SELECTION))?;
        write_text(&a.out.join("pi.csv"), raster_to_csv(&pi))?;
        man.output("pi.csv");
        if w.dim() == 2 {
            write_text(&a.out.join("pi.pgm"), raster_to_pgm(&pi, 0.0, 1.0)?)?;
            man.output("pi.pgm");
        }
    }
    man.write(&a.out.join("manifest.json"))
}

pub fn summary(a: &SummaryArgs) -> CliResult<()> {
    let w = parse_window(&a.window)?;
    let x = read_pattern(&a.data, &w)?;
    let stat: Stat = a.stat.parse()?;
    let r = r_grid(&w, a.rmax, a.nr)?;
    let opts = StatOptions { bandwidth: a.bandwidth, ..Default::default() };
    let f = estimate(stat, &x, &r, &opts)?;
    write_curve(&a.out, &f)?;
    let mut man = Manifest::new(
        "summary",
        a.seed,
        json!({ "data": file_name(&a.data), "window": w, "stat": stat, "r": r, "bandwidth": a.bandwidth }),
    );
    man.output(file_name(&a.out));
    man.output(file_name(&a.out.with_extension("json")));
    man.write(&manifest_path(&a.out))
}

/// Points of `y` not in `x` (exact coordinate match).
fn difference(y: &PointPattern, x: &PointPattern) -> CliResult<PointPattern> {
    let mut xs: Vec<_> = x.points().to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let mut rest = Vec::new();
    for p in y.points() {
        match xs.binary_search_by(|q| q.partial_cmp(p).expect("finite coordinates")) {
            Ok(_) => {}
            Err(_) => rest.push(*p),
        }
    }
    if y.len() - rest.len() != x.len() {
        return usage("the retained points are not all part of the baseline pattern");
    }
    Ok(PointPattern::new(y.window().clone(), rest)?)
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let w = parse_window(&a.window)?;
    let x = read_pattern(&a.data, &w)?;
    let family = read_family(&a.model)?;
    if family.dim != w.dim() {
        return usage(format!("family dimension {} differs from the window dimension {}", family.dim, w.dim()));
    }
    let contrast = ContrastSettings { r_l: a.rl, r_u: a.ru, c: a.c, seed: a.seed, ..Default::default() };
    let method = a.method.to_ascii_lowercase();
    let mut config = json!({
        "data": file_name(&a.data),
        "family": family,
        "method": method,
        "window": w,
    });
    let result: FitResult = match method.as_str() {
        "cl" => {
            let deleted = match (&a.deleted, &a.baseline) {
                (Some(d), _) => read_pattern(d, &w)?,
                (None, Some(y)) => difference(&read_pattern(y, &w)?, &x)?,
                (None, None) => return usage("--method cl needs --deleted or --baseline"),
            };
            let t = ThinnedPair::new(x, deleted)?;
            let settings = ClSettings { range: parse_range(&a.cl2_range)?, ..Default::default() };
            config["cl"] = json!(settings);
            let q = fit_q_cl1(&t)?.get("q").unwrap_or(f64::NAN);
            let mut fit = fit_theta_cl2(&t, &family.selection, q, &settings)?;
            let rho_y = t.union().intensity();
            fit.estimates.insert("rho_y".into(), rho_y);
            if family.base == BaseFamily::Poisson {
                let sel = family_selection(&fit, &family)?;
                fit.model = Some(InterruptedModel::new(BaseProcessModel::poisson(rho_y)?, sel, w.dim())?);
            } else {
                fit.diagnostics.push("base process not fitted by CL; no full model attached".into());
            }
            fit
        }
        "g" | "k" => {
            let stat = if method == "g" { ContrastStat::G } else { ContrastStat::K };
            config["contrast"] = json!(contrast);
            fit_min_contrast(&x, &family, stat, &contrast)?
        }
        "avg" => {
            config["contrast"] = json!(contrast);
            config["bootstrap"] = json!(a.bootstrap);
            let settings = AverageSettings { contrast, bootstrap: a.bootstrap, seed: split_seed(a.seed, streams::REPLICATE) };
            average_estimators(&x, &family, &settings)?
        }
        _ => return usage(format!("unknown method {:?} (expected cl, g, K or avg)", a.method)),
    };
    write_json(&a.out, &result)?;
    let mut man = Manifest::new("fit", a.seed, config);
    man.output(file_name(&a.out));
    man.write(&manifest_path(&a.out))
}

/// Selection model determined by a CL fit.
fn family_selection(fit: &FitResult, family: &interrupted::inference::ModelFamily) -> CliResult<interrupted::selection::SelectionModel> {
    use interrupted::covariance::CorrelationModel;
    use interrupted::inference::{CorrFamily, SelectionFamily};
    use interrupted::selection::{RadiusLaw, SelectionModel};
    let q = fit.get("q").unwrap_or(f64::NAN);
    Ok(match family.selection {
        SelectionFamily::Chi2 { correlation, .. } => {
            let s = fit.get("s").unwrap_or(f64::NAN);
            let k = fit.get("k").unwrap_or(1.0) as u32;
            let corr = match correlation {
                CorrFamily::Gaussian => CorrelationModel::gaussian(s)?,
                CorrFamily::Exponential => CorrelationModel::exponential(s)?,
                CorrFamily::WhittleMatern { .. } => CorrelationModel::whittle_matern(s, fit.get("nu").unwrap_or(0.5))?,
            };
            SelectionModel::chi2_with_q(k, q, corr)?
        }
        SelectionFamily::Boolean { complement } => {
            let radius = RadiusLaw::Deterministic { radius: fit.get("delta0").unwrap_or(f64::NAN) };
            SelectionModel::boolean_with_q(q, radius, family.dim, complement)?
        }
    })
}

pub fn envelope(a: &EnvelopeArgs) -> CliResult<()> {
    let w = parse_window(&a.window)?;
    let x = read_pattern(&a.data, &w)?;
    let model = read_model(&a.model)?;
    if model.dim != w.dim() {
        return usage("model and window dimensions differ");
    }
    let stat: Stat = a.stat.parse()?;
    let r = r_grid(&w, a.rmax, a.nr)?;
    let opts = StatOptions { bandwidth: a.bandwidth, ..Default::default() };
    let sim = |s: u64| simulate_triple(&model, &w, s).map(|t| t.x().clone());
    let f = envelopes(&x, sim, stat, &r, a.nsim, a.level, &opts, a.seed)?;
    write_curve(&a.out, &f)?;
    let mut man = Manifest::new(
        "envelope",
        a.seed,
        json!({ "data": file_name(&a.data), "model": model, "window": w, "stat": stat, "r": r,
                "nsim": a.nsim, "level": a.level, "bandwidth": a.bandwidth }),
    );
    man.output(file_name(&a.out));
    man.output(file_name(&a.out.with_extension("json")));
    man.write(&manifest_path(&a.out))
}

pub fn condsim(a: &CondsimArgs) -> CliResult<()> {
    let w = parse_window(&a.window)?;
    let data = ThinnedPair::new(read_pattern(&a.retained, &w)?, read_pattern(&a.deleted, &w)?)?;
    let model = read_model(&a.model)?;
    if a.draws == 0 || a.thin == 0 || a.grid == 0 {
        return usage("--draws, --thin and --grid must be positive");
    }
    let n = data.retained().len() + data.deleted().len();
    let burn_in = a.burn_in.unwrap_or(McmcSettings::default_for(n, a.seed).burn_in);
    let settings = McmcSettings { sweeps: burn_in + a.draws * a.thin, burn_in, thin: a.thin, seed: a.seed };
    let layout = GridLayout::square(w.clone(), a.grid)?;
    let out = conditional_pi_field(&model, &data, layout, &settings)?;
    ensure_dir(&a.out)?;
    let draws_dir = a.out.join("draws");
    ensure_dir(&draws_dir)?;
    let mut man = Manifest::new(
        "condsim",
        a.seed,
        json!({ "retained": file_name(&a.retained), "deleted": file_name(&a.deleted), "model": model,
                "window": w, "grid": a.grid, "mcmc": settings }),
    );
    for (i, pi) in out.draws.iter().enumerate() {
        let name = format!("pi_{i:04}.csv");
        write_text(&draws_dir.join(&name), raster_to_csv(pi))?;
        man.output(format!("draws/{name}"));
    }
    write_text(&a.out.join("mean.csv"), raster_to_csv(&out.mean))?;
    man.output("mean.csv");
    if w.dim() == 2 {
        write_text(&a.out.join("mean.pgm"), raster_to_pgm(&out.mean, 0.0, 1.0)?)?;
        man.output("mean.pgm");
    }
    let chain = json!({
        "acceptance_rate": out.run.acceptance_rate,
        "energy": out.run.energy,
        "states": out.run.states,
    });
    write_json(&a.out.join("chain.json"), &chain)?;
    man.output("chain.json");
    man.write(&a.out.join("manifest.json"))
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Option<T>, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|t| f(t.trim()).ok_or_else(|| CliError::Usage(format!("bad {what} {t:?}"))))
        .collect()
}

pub fn study(a: &StudyArgs) -> CliResult<()> {
    let models = parse_list(&a.models, |t| t.parse::<usize>().ok().filter(|m| (1..=4).contains(m)), "model")?;
    let stats = parse_list(
        &a.stats,
        |t| match t {
            "g" => Some(ContrastStat::G),
            "K" | "k" => Some(ContrastStat::K),
            _ => None,
        },
        "statistic",
    )?;
    let cfg = StudyConfig {
        table: a.table,
        models,
        reps: a.reps,
        seed: a.seed,
        stats,
        average: !a.no_average,
        bootstrap: a.bootstrap,
        cl: ClSettings { range: parse_range(&a.cl2_range)?, ..Default::default() },
        ..Default::default()
    };
    let table = run_study(&cfg)?;
    match &a.out {
        None => print!("{}", table.to_markdown()),
        Some(dir) => {
            ensure_dir(dir)?;
            let mut man = Manifest::new("study", a.seed, json!(cfg));
            let stem = format!("table{}", a.table);
            write_text(&dir.join(format!("{stem}.csv")), table.to_csv())?;
            write_text(&dir.join(format!("{stem}.md")), table.to_markdown())?;
            write_json(&dir.join("estimates.json"), &table.estimates)?;
            for f in [format!("{stem}.csv"), format!("{stem}.md"), "estimates.json".into()] {
                man.output(f);
            }
            man.write(&dir.join("manifest.json"))?;
        }
    }
    Ok(())
}
