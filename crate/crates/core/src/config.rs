//! Flat key=value run configuration with CLI override support. Later
//! assignments win, so a config file can be partially overridden by flags
//! applied on top.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::study::GridKind;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    Constant(f64),
    /// one value per boundary node, boundary ordering
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Grid(GridKind),
    Rings(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Method1,
    Method2,
    Spectral,
    Dirichlet,
    Neumann,
}

impl SolveMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "method1" => Ok(SolveMethod::Method1),
            "method2" => Ok(SolveMethod::Method2),
            "spectral" => Ok(SolveMethod::Spectral),
            "dirichlet" => Ok(SolveMethod::Dirichlet),
            "neumann" => Ok(SolveMethod::Neumann),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected method1, method2, spectral, \
                 dirichlet or neumann)"
            ))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SolveMethod::Method1 => "method1",
            SolveMethod::Method2 => "method2",
            SolveMethod::Spectral => "spectral",
            SolveMethod::Dirichlet => "dirichlet",
            SolveMethod::Neumann => "neumann",
        }
    }

    /// true for the methods parameterized by a fractional exponent
    pub fn fractional(self) -> bool {
        matches!(
            self,
            SolveMethod::Method1 | SolveMethod::Method2 | SolveMethod::Spectral
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub c0: f64,
    pub k: f64,
    pub g: BoundaryData,
    pub mesh: MeshSource,
    pub method: SolveMethod,
    /// quadrature half-width M
    pub m: usize,
    /// quadrature step override (default M^{-1/2})
    pub eta: Option<f64>,
    /// time steps N
    pub n_steps: usize,
    pub sigma: f64,
    /// spectral shift override (default 0.95·λ̃₁)
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub out_vtk: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            c0: 5.0,
            k: 1.0,
            g: BoundaryData::Constant(1.0),
            mesh: MeshSource::Grid(GridKind::Coarse),
            method: SolveMethod::Method1,
            m: 40,
            eta: None,
            n_steps: 40,
            sigma: 0.5,
            delta: None,
            tol: 1e-12,
            max_iter: None,
            out_vtk: None,
            out_csv: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}'")))
}

impl RunConfig {
    /// Apply one key=value assignment; both the file parser and the CLI
    /// flag layer funnel through here.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = num(key, value)?,
            "c0" => self.c0 = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "g" => self.g = BoundaryData::Constant(num(key, value)?),
            "g_file" => self.g = BoundaryData::File(PathBuf::from(value)),
            "grid" => self.mesh = MeshSource::Grid(GridKind::parse(value)?),
            "rings" => self.mesh = MeshSource::Rings(num(key, value)?),
            "mesh_file" => self.mesh = MeshSource::File(PathBuf::from(value)),
            "method" => self.method = SolveMethod::parse(value)?,
            "M" => self.m = num(key, value)?,
            "eta" => self.eta = Some(num(key, value)?),
            "N" => self.n_steps = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "delta" => self.delta = Some(num(key, value)?),
            "tol" => self.tol = num(key, value)?,
            "max_iter" => self.max_iter = Some(num(key, value)?),
            "out_vtk" => self.out_vtk = Some(PathBuf::from(value)),
            "out_csv" => self.out_csv = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Config(format!(
                    "unknown configuration key '{other}'"
                )))
            }
        }
        Ok(())
    }

    /// Parse `key = value` lines; '#' starts a comment, blank lines are
    /// skipped. Starts from the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(idx + 1, format!("expected key=value, got '{line}'"))
            })?;
            config
                .apply_override(key.trim(), value.trim())
                .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        }
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Emit the full configuration; `parse(serialize(c)) == c` for any valid c.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        push("alpha", format!("{}", self.alpha));
        push("c0", format!("{}", self.c0));
        push("k", format!("{}", self.k));
        match &self.g {
            BoundaryData::Constant(v) => push("g", format!("{v}")),
            BoundaryData::File(p) => push("g_file", p.display().to_string()),
        }
        match &self.mesh {
            MeshSource::Grid(g) => push("grid", g.label().to_string()),
            MeshSource::Rings(n) => push("rings", format!("{n}")),
            MeshSource::File(p) => push("mesh_file", p.display().to_string()),
        }
        push("method", self.method.label().to_string());
        push("M", format!("{}", self.m));
        if let Some(eta) = self.eta {
            push("eta", format!("{eta}"));
        }
        push("N", format!("{}", self.n_steps));
        push("sigma", format!("{}", self.sigma));
        if let Some(delta) = self.delta {
            push("delta", format!("{delta}"));
        }
        push("tol", format!("{}", self.tol));
        if let Some(mi) = self.max_iter {
            push("max_iter", format!("{mi}"));
        }
        if let Some(p) = &self.out_vtk {
            push("out_vtk", p.display().to_string());
        }
        if let Some(p) = &self.out_csv {
            push("out_csv", p.display().to_string());
        }
        out
    }

    /// Range checks; returns non-fatal warnings (currently only the σ < 0.5
    /// stability caveat).
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.k > 0.0) {
            return Err(Error::Config(format!("k must be positive, got {}", self.k)));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::Config(format!(
                "c0 must be positive, got {}",
                self.c0
            )));
        }
        if self.method.fractional() {
            let allow_one = self.method == SolveMethod::Spectral;
            let ok = self.alpha > 0.0 && (self.alpha < 1.0 || (allow_one && self.alpha == 1.0));
            if !ok {
                return Err(Error::Config(format!(
                    "alpha must lie in (0,1) for {}, got {}",
                    self.method.label(),
                    self.alpha
                )));
            }
        }
        if self.m < 1 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if self.n_steps < 1 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::Config(format!(
                "sigma must lie in (0,1], got {}",
                self.sigma
            )));
        }
        if self.sigma < 0.5 {
            warnings.push(format!(
                "sigma={} drops the norm-stability guarantee (needs sigma >= 0.5)",
                self.sigma
            ));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(Error::Config(format!("eta must be positive, got {eta}")));
            }
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0) {
                return Err(Error::Config(format!(
                    "delta must be positive, got {delta}"
                )));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == Some(0) {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if let MeshSource::Rings(n) = self.mesh {
            if n < 2 {
                return Err(Error::Config(format!(
                    "rings must be at least 2, got {n}"
                )));
            }
        }
        Ok(warnings)
    }
}
