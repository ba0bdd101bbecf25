//! JSON configuration and file helpers.

use std::path::Path;

use interrupted::base::BaseProcessModel;
use interrupted::geometry::{PointPattern, Window};
use interrupted::inference::{FitResult, ModelFamily};
use interrupted::selection::SelectionModel;
use interrupted::thinning::InterruptedModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};

/// Model to simulate: base process, selection field and window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub window: Option<Window>,
    pub base: BaseProcessModel,
    pub selection: SelectionModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelConfig {
    pub fn dim(&self) -> usize {
        self.dim.or(self.window.as_ref().map(Window::dim)).unwrap_or(2)
    }

    pub fn window(&self) -> CliResult<Window> {
        let w = match &self.window {
            Some(w) => w.clone(),
            None => Window::unit(self.dim())?,
        };
        if w.dim() != self.dim() {
            return Err(CliError::Usage(format!("window has dimension {} but dim is {}", w.dim(), self.dim())));
        }
        Ok(w)
    }

    /// Builds the model; admissibility is checked here.
    pub fn model(&self) -> CliResult<InterruptedModel> {
        Ok(InterruptedModel::new(self.base, self.selection, self.dim())?)
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    write_text(path, s)
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn read_pattern(path: &Path, window: &Window) -> CliResult<PointPattern> {
    let text = read_text(path)?;
    interrupted::io::pattern_from_csv(&text, window)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// `x0,x1,y0,y1[,z0,z1]`.
pub fn parse_window(s: &str) -> CliResult<Window> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad window bound {t:?}"))))
        .collect::<CliResult<Vec<f64>>>()?;
    if v.len() % 2 != 0 || v.is_empty() {
        return Err(CliError::Usage("window needs lower,upper pairs per axis".into()));
    }
    let lower: Vec<f64> = v.iter().step_by(2).copied().collect();
    let upper: Vec<f64> = v.iter().skip(1).step_by(2).copied().collect();
    Ok(Window::new(&lower, &upper)?)
}

/// A model file: a model config, a fit result carrying a model, or a bare
/// model.
pub fn read_model(path: &Path) -> CliResult<InterruptedModel> {
    let value: serde_json::Value = read_json(path)?;
    if let Ok(fit) = serde_json::from_value::<FitResult>(value.clone()) {
        if let Some(m) = fit.model {
            return Ok(m);
        }
        return Err(CliError::Usage(format!("{}: fit result has no fitted model", path.display())));
    }
    if let Ok(m) = serde_json::from_value::<InterruptedModel>(value.clone()) {
        m.validate()?;
        return Ok(m);
    }
    match serde_json::from_value::<ModelConfig>(value) {
        Ok(c) => c.model(),
        Err(e) => Err(CliError::Usage(format!("{}: not a model: {e}", path.display()))),
    }
}

/// A family file, or any model file (whose family is used).
pub fn read_family(path: &Path) -> CliResult<ModelFamily> {
    let value: serde_json::Value = read_json(path)?;
    if let Ok(f) = serde_json::from_value::<ModelFamily>(value) {
        return Ok(f);
    }
    Ok(ModelFamily::of(&read_model(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_flag() {
        let w = parse_window("0,2,-1,1").unwrap();
        assert_eq!(w.lower(), &[0.0, -1.0]);
        assert_eq!(w.upper(), &[2.0, 1.0]);
        assert!(parse_window("0,1,0").is_err());
        assert!(parse_window("0,a").is_err());
    }

    #[test]
    fn config_defaults_to_unit_square() {
        let c: ModelConfig = serde_json::from_str(
            r#"{"base":{"type":"poisson","intensity":100},"selection":{"type":"boolean","q":0.5,"radius":{"law":"deterministic","radius":0.05}}}"#,
        )
        .unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.window().unwrap().volume(), 1.0);
        assert!((c.model().unwrap().q().unwrap() - 0.5).abs() < 1e-12);
    }
}
