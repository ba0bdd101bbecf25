//! Simulation study over the four reference models on the unit square.
//!
//! Model 1: DPP with Gaussian kernel (ρ = 1000, α = 0.015) thinned by a χ²
//! field (k = 1, Gaussian correlation with s = 0.05, q = 0.5).
//! Model 2: the same DPP thinned by a Boolean model (Δ₀ = 0.05, q = 0.5).
//! Models 3 and 4: Matérn II (ρ_Φ = 1736, D = 0.015) with the selections
//! of models 1 and 2.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::average::{average_estimators, AverageSettings};
use super::cl::{fit_q_cl1, fit_theta_cl2, ClSettings};
use super::contrast::{fit_min_contrast, ContrastSettings, ContrastStat};
use super::family::{ModelFamily, SelectionFamily};
use super::FitResult;
use crate::base::BaseProcessModel;
use crate::covariance::{CorrelationModel, DppKernel};
use crate::error::{invalid, Result};
use crate::geometry::{PointPattern, Window};
use crate::rng::{replicate_seed, split_seed, streams};
use crate::selection::{RadiusLaw, SelectionModel};
use crate::thinning::{thin_pattern, InterruptedModel, Triple};

const FIT_STREAM: u64 = 10;
const BOOTSTRAP_STREAM: u64 = 11;

/// Reference model 1–4.
pub fn reference_model(index: usize) -> Result<InterruptedModel> {
    let dpp = BaseProcessModel::dpp(DppKernel::new(1000.0, CorrelationModel::gaussian(0.015)?)?)?;
    let matern = BaseProcessModel::matern_ii(1736.0, 0.015)?;
    let chi2 = SelectionModel::chi2_with_q(1, 0.5, CorrelationModel::gaussian(0.05)?)?;
    let boolean = SelectionModel::boolean_with_q(0.5, RadiusLaw::Deterministic { radius: 0.05 }, 2, false)?;
    let (base, sel) = match index {
        1 => (dpp, chi2),
        2 => (dpp, boolean),
        3 => (matern, chi2),
        4 => (matern, boolean),
        _ => return invalid(format!("reference models are numbered 1 to 4, got {index}")),
    };
    InterruptedModel::new(base, sel, 2)
}

/// Generating values of the estimated parameters of a reference model.
pub fn reference_truth(index: usize) -> Result<BTreeMap<String, f64>> {
    let m = reference_model(index)?;
    let mut t = BTreeMap::new();
    t.insert("q".to_string(), 0.5);
    if let BaseProcessModel::Dpp { .. } = m.base {
        t.insert("alpha".to_string(), 0.015);
    }
    match m.selection {
        SelectionModel::Chi2 { .. } => t.insert("s".to_string(), 0.05),
        SelectionModel::Boolean { .. } => t.insert("delta0".to_string(), 0.05),
    };
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// 1: composite likelihood with (X, Y) observed; 2: minimum contrast
    /// with only X observed.
    pub table: u8,
    pub models: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Statistics used in table 2.
    pub stats: Vec<ContrastStat>,
    /// Add the averaged estimator (table 2; needs both statistics).
    pub average: bool,
    pub bootstrap: usize,
    pub contrast: ContrastSettings,
    pub cl: ClSettings,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            table: 1,
            models: vec![1, 2, 3, 4],
            reps: 100,
            seed: 1,
            stats: vec![ContrastStat::G, ContrastStat::K],
            average: true,
            bootstrap: 100,
            contrast: ContrastSettings::default(),
            cl: ClSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub model: usize,
    pub parameter: String,
    pub method: String,
    pub truth: f64,
    pub mean: f64,
    pub sd: f64,
    pub mse: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub table: u8,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<StudyRow>,
    /// Raw estimates per (model, parameter, method), in replicate order
    /// (NaN for failed replicates).
    pub estimates: BTreeMap<String, Vec<f64>>,
}

impl StudyTable {
    pub fn row(&self, model: usize, parameter: &str, method: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.model == model && r.parameter == parameter && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,parameter,method,truth,mean,sd,mse,n_ok,n_failed,weight_g,weight_k\n");
        for r in &self.rows {
            let (wg, wk) = r.weights.map_or((String::new(), String::new()), |w| (fmt(w[0]), fmt(w[1])));
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.model,
                r.parameter,
                r.method,
                fmt(r.truth),
                fmt(r.mean),
                fmt(r.sd),
                fmt(r.mse),
                r.n_ok,
                r.n_failed,
                wg,
                wk
            );
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| model | parameter | method | mean | sd | MSE | ok | failed | weights |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let w = r.weights.map_or(String::new(), |w| format!("({:.2}, {:.2})", w[0], w[1]));
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.4} | {:.4} | {:.3e} | {} | {} | {} |",
                r.model, r.parameter, r.method, r.mean, r.sd, r.mse, r.n_ok, r.n_failed, w
            );
        }
        s
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6e}")
    } else {
        "NA".into()
    }
}

/// Summary of replicate estimates against a true value.
pub fn summarize(values: &[f64], truth: f64) -> (f64, f64, f64, usize) {
    let ok: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = ok.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN, 0);
    }
    let mean = ok.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 { (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { f64::NAN };
    let mse = ok.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n as f64;
    (mean, sd, mse, n)
}

/// Triples of replicate `rep` for the given models; models sharing a base
/// process share its draw, which leaves each model's law unchanged.
pub fn replicate_triples(models: &[InterruptedModel], w: &Window, root: u64, rep: u64) -> Result<Vec<Triple>> {
    let seed = replicate_seed(root, rep);
    let mut cache: Vec<(BaseProcessModel, PointPattern)> = Vec::new();
    models
        .iter()
        .map(|m| {
            let y = match cache.iter().find(|(b, _)| *b == m.base) {
                Some((_, y)) => y.clone(),
                None => {
                    let y = m.base.simulate(w, split_seed(seed, streams::BASE))?;
                    cache.push((m.base, y.clone()));
                    y
                }
            };
            thin_pattern(&y, &m.selection, seed)
        })
        .collect()
}

type RepOut = BTreeMap<(usize, String, String), (f64, Option<[f64; 2]>)>;

fn fit_table1(m: &InterruptedModel, t: &Triple, cfg: &StudyConfig, idx: usize) -> RepOut {
    let mut out = RepOut::new();
    let Ok(fam) = SelectionFamily::of(&m.selection) else { return out };
    let name = fam.theta_name().to_string();
    let value = fit_q_cl1(&t.split)
        .and_then(|q| fit_theta_cl2(&t.split, &fam, q.get("q").unwrap_or(f64::NAN), &cfg.cl))
        .map(|f| f.get(&name).unwrap_or(f64::NAN))
        .unwrap_or(f64::NAN);
    out.insert((idx, name, "CL".into()), (value, None));
    out
}

fn fit_table2(m: &InterruptedModel, t: &Triple, cfg: &StudyConfig, idx: usize, seed: u64) -> RepOut {
    let mut out = RepOut::new();
    let Ok(truth) = reference_truth(idx) else { return out };
    let Ok(fam) = ModelFamily::of(m) else { return out };
    let contrast = ContrastSettings { seed: split_seed(seed, FIT_STREAM), ..cfg.contrast.clone() };
    let mut record = |label: &str, fit: &Result<FitResult>, suffix: &str, with_weights: bool| {
        for name in truth.keys() {
            let (v, w) = match fit {
                Ok(f) => (
                    f.get(&format!("{name}{suffix}")).unwrap_or(f64::NAN),
                    if with_weights { f.weights.get(name).copied() } else { None },
                ),
                Err(_) => (f64::NAN, None),
            };
            out.insert((idx, name.clone(), label.to_string()), (v, w));
        }
    };
    let both = cfg.stats.contains(&ContrastStat::G) && cfg.stats.contains(&ContrastStat::K);
    if cfg.average && both {
        let settings = AverageSettings { contrast, bootstrap: cfg.bootstrap, seed: split_seed(seed, BOOTSTRAP_STREAM) };
        let fit = average_estimators(t.x(), &fam, &settings);
        record("g", &fit, "_g", false);
        record("K", &fit, "_K", false);
        record("AV", &fit, "", true);
    } else {
        for &stat in &cfg.stats {
            let fit = fit_min_contrast(t.x(), &fam, stat, &contrast);
            record(if stat == ContrastStat::G { "g" } else { "K" }, &fit, "", false);
        }
    }
    out
}

/// Runs the study and tabulates mean, sd and MSE per model, parameter and
/// method. Failed fits are counted, not fatal.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyTable> {
    if cfg.table != 1 && cfg.table != 2 {
        return invalid(format!("table must be 1 or 2, got {}", cfg.table));
    }
    let models: Vec<InterruptedModel> = cfg.models.iter().map(|&i| reference_model(i)).collect::<Result<_>>()?;
    let w = Window::unit(2)?;
    let per_rep: Vec<RepOut> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let seed = replicate_seed(cfg.seed, rep);
            let triples = replicate_triples(&models, &w, cfg.seed, rep)?;
            let mut out = RepOut::new();
            for ((m, t), &idx) in models.iter().zip(&triples).zip(&cfg.models) {
                out.extend(if cfg.table == 1 { fit_table1(m, t, cfg, idx) } else { fit_table2(m, t, cfg, idx, seed) });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut estimates: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut rows = Vec::new();
    if let Some(first) = per_rep.first() {
        let mut keys: Vec<_> = first.keys().cloned().collect();
        let order = |m: &str| ["CL", "g", "K", "AV"].iter().position(|x| *x == m).unwrap_or(9);
        let porder = |p: &str| ["q", "alpha", "s", "delta0"].iter().position(|x| *x == p).unwrap_or(9);
        keys.sort_by_key(|(m, p, meth)| (*m, porder(p), order(meth)));
        for key in keys {
            let (idx, param, method) = &key;
            let truth = reference_truth(*idx)?.get(param).copied().unwrap_or(f64::NAN);
            let vals: Vec<f64> = per_rep.iter().map(|r| r.get(&key).map_or(f64::NAN, |v| v.0)).collect();
            let (mean, sd, mse, n_ok) = summarize(&vals, truth);
            let ws: Vec<[f64; 2]> = per_rep.iter().filter_map(|r| r.get(&key).and_then(|v| v.1)).collect();
            let weights = (!ws.is_empty()).then(|| {
                let n = ws.len() as f64;
                [ws.iter().map(|w| w[0]).sum::<f64>() / n, ws.iter().map(|w| w[1]).sum::<f64>() / n]
            });
            rows.push(StudyRow {
                model: *idx,
                parameter: param.clone(),
                method: method.clone(),
                truth,
                mean,
                sd,
                mse,
                n_ok,
                n_failed: vals.len() - n_ok,
                weights,
            });
            estimates.insert(format!("model{idx}/{param}/{method}"), vals);
        }
    }
    Ok(StudyTable { table: cfg.table, reps: cfg.reps, seed: cfg.seed, rows, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_models_have_target_intensities() {
        for i in 1..=4 {
            let m = reference_model(i).unwrap();
            assert!((m.q().unwrap() - 0.5).abs() < 1e-12);
            assert!((m.intensity_y().unwrap() - 1000.0).abs() < 1.0);
        }
        assert!(reference_model(5).is_err());
    }

    #[test]
    fn empty_study() {
        let t = run_study(&StudyConfig { reps: 0, ..Default::default() }).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.to_csv().lines().count(), 1);
    }

    #[test]
    fn shared_base_draws_match_separate_simulation() {
        let models: Vec<_> = [3, 4].iter().map(|&i| reference_model(i).unwrap()).collect();
        let w = Window::unit(2).unwrap();
        let shared = replicate_triples(&models, &w, 5, 2).unwrap();
        for (m, t) in models.iter().zip(&shared) {
            let alone = crate::thinning::simulate_triple(m, &w, replicate_seed(5, 2)).unwrap();
            assert_eq!(alone.x().points(), t.x().points());
        }
    }

    #[test]
    fn small_table1_is_deterministic() {
        let cfg = StudyConfig { table: 1, models: vec![3, 4], reps: 2, seed: 7, ..Default::default() };
        let a = run_study(&cfg).unwrap();
        let b = run_study(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.rows.len(), 2);
        assert!(a.rows.iter().all(|r| r.n_ok == 2));
    }

    #[test]
    fn summarize_counts_failures() {
        let (mean, sd, mse, n) = summarize(&[1.0, f64::NAN, 3.0], 2.0);
        assert_eq!((mean, n), (2.0, 2));
        assert!((sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mse, 1.0);
    }
}
