//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! grid.nx = 16
//! time.dt = 1e-3
//! continuity.q = 8/3
//! ```
//!
//! Every key has a default; unknown or repeated keys are errors. The resolved
//! configuration prints back in the same format and parses to itself.

use std::path::Path;

use crate::diagnostics::MonitorConfig;
use crate::dynamics::{
    random_initial, Formulation, Scheme, SimState, SolverConfig, ThetaConfig, TransportNoise,
};
use crate::ensemble::{CriticalSpace, Reduce};
use crate::error::{Error, Result};
use crate::exponents::{parse_rational, to_f64};
use crate::io::read_snapshot;
use crate::noise::{build_kraichnan, NoiseEnsemble};
use crate::spaces::random_band_limited;
use crate::spectral::{GridSpec, RealField};

/// Recognized keys with their defaults, in manifest order.
pub const KEYS: &[(&str, &str)] = &[
    ("grid.nx", "16"),
    ("grid.ny", "16"),
    ("grid.nz", "16"),
    ("time.dt", "0.001"),
    ("time.t_end", "0.1"),
    ("model.formulation", "ito"),
    ("model.scheme", "euler_maruyama"),
    ("model.viscosity", "1"),
    ("model.nonlinear", "true"),
    ("model.h", "0"),
    ("noise.d", "3"),
    ("noise.alpha", "4/3"),
    ("noise.kmax", "0"),
    ("noise.scale", "1"),
    ("noise.file", ""),
    ("theta.enabled", "false"),
    ("theta.diffusivity", "1"),
    ("theta.divergence_form", "false"),
    ("theta.transported", "false"),
    ("theta.amplitude", "1"),
    ("theta.kmax", "2"),
    ("init.kind", "random"),
    ("init.amplitude", "1"),
    ("init.kmax", "2"),
    ("init.file", ""),
    ("run.seed", "0"),
    ("run.dealias", "true"),
    ("run.diagnostics_stride", "1"),
    ("run.output_dir", "out"),
    ("monitor.p0", "2"),
    ("monitor.q0", "2"),
    ("monitor.delta0", "0"),
    ("monitor.threshold", "1e6"),
    ("monitor.strict", "false"),
    ("continuity.eps", "0.01,0.005,0.0025"),
    ("continuity.q", "8/3"),
    ("continuity.p", "4"),
    ("continuity.pairs", "20"),
    ("continuity.perturbation_seed", "1"),
    ("montecarlo.paths", "20"),
    ("montecarlo.reduce", "mean_l2"),
];

/// Written into manifests; accepted and ignored on input.
pub const VERSION_KEY: &str = "run.git_like_version";

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: Vec<String>,
}

fn key_index(key: &str) -> Option<usize> {
    KEYS.iter().position(|(k, _)| *k == key)
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(_, v)| v.to_string()).collect(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = vec![false; KEYS.len()];
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!(
                    "line {}: expected 'section.key = value'",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == VERSION_KEY {
                continue;
            }
            let i = key_index(key).ok_or_else(|| {
                Error::Format(format!("line {}: unknown key '{key}'", lineno + 1))
            })?;
            if seen[i] {
                return Err(Error::Format(format!(
                    "line {}: key '{key}' given twice",
                    lineno + 1
                )));
            }
            seen[i] = true;
            cfg.values[i] = value.to_string();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> &str {
        let i = key_index(key).unwrap_or_else(|| panic!("unregistered key {key}"));
        &self.values[i]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let i = key_index(key).ok_or_else(|| Error::Format(format!("unknown key '{key}'")))?;
        let old = std::mem::replace(&mut self.values[i], value.to_string());
        if let Err(e) = self.validate() {
            self.values[i] = old;
            return Err(e);
        }
        Ok(())
    }

    /// Every resolved key followed by the version line.
    pub fn manifest(&self, version: &str) -> String {
        let mut s = String::new();
        for ((k, _), v) in KEYS.iter().zip(&self.values) {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("{VERSION_KEY} = {version}\n"));
        s
    }

    /// Type-checks every value.
    fn validate(&self) -> Result<()> {
        for (k, _) in KEYS {
            match *k {
                "model.formulation" => {
                    self.formulation()?;
                }
                "model.scheme" => {
                    self.scheme()?;
                }
                "init.kind" => {
                    self.init_kind()?;
                }
                "montecarlo.reduce" => {
                    Reduce::parse(self.get(k)).map_err(|e| Error::Format(e.to_string()))?;
                }
                "continuity.eps" => {
                    self.real_list(k)?;
                }
                "noise.file" | "init.file" | "run.output_dir" => {}
                k if k.ends_with("nonlinear")
                    || k.ends_with("enabled")
                    || k.ends_with("divergence_form")
                    || k.ends_with("transported")
                    || k.ends_with("dealias")
                    || k.ends_with("strict") =>
                {
                    self.flag(k)?;
                }
                k if k.starts_with("grid.")
                    || k.ends_with("kmax")
                    || k.ends_with("seed")
                    || k.ends_with("stride")
                    || k.ends_with("pairs")
                    || k.ends_with("paths")
                    || k == "noise.d" =>
                {
                    self.integer(k)?;
                }
                k => {
                    self.real(k)?;
                }
            }
        }
        Ok(())
    }

    fn bad(&self, key: &str, what: &str) -> Error {
        Error::Format(format!("{key} = '{}' is not {what}", self.get(key)))
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        parse_real(self.get(key)).ok_or_else(|| self.bad(key, "a number"))
    }

    pub fn integer(&self, key: &str) -> Result<u64> {
        self.get(key)
            .parse()
            .map_err(|_| self.bad(key, "a non-negative integer"))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.bad(key, "true or false")),
        }
    }

    pub fn real_list(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)
            .split(',')
            .map(|s| {
                parse_real(s.trim())
                    .ok_or_else(|| self.bad(key, "a comma-separated list of numbers"))
            })
            .collect()
    }

    pub fn formulation(&self) -> Result<Formulation> {
        match self.get("model.formulation") {
            "ito" => Ok(Formulation::Ito),
            "stratonovich" => Ok(Formulation::Stratonovich),
            _ => Err(self.bad("model.formulation", "ito or stratonovich")),
        }
    }

    pub fn scheme(&self) -> Result<Scheme> {
        match self.get("model.scheme") {
            "euler_maruyama" => Ok(Scheme::EulerMaruyama),
            "midpoint" => Ok(Scheme::Midpoint),
            _ => Err(self.bad("model.scheme", "euler_maruyama or midpoint")),
        }
    }

    pub fn init_kind(&self) -> Result<InitKind> {
        match self.get("init.kind") {
            "zero" => Ok(InitKind::Zero),
            "random" => Ok(InitKind::Random),
            "mode" => Ok(InitKind::Mode),
            "file" => Ok(InitKind::File),
            _ => Err(self.bad("init.kind", "zero, random, mode or file")),
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let n = |k: &str| self.integer(k).map(|v| v as usize);
        GridSpec::new(n("grid.nx")?, n("grid.ny")?, n("grid.nz")?)
            .map_err(|e| Error::Parameter(e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.integer("run.seed").expect("validated")
    }

    pub fn monitor(&self) -> Result<MonitorConfig> {
        let m = MonitorConfig {
            p0: self.real("monitor.p0")?,
            q0: self.real("monitor.q0")?,
            delta0: self.real("monitor.delta0")?,
            threshold: self.real("monitor.threshold")?,
            strict: self.flag("monitor.strict")?,
        };
        m.mu0()?;
        Ok(m)
    }

    pub fn critical_space(&self) -> Result<CriticalSpace> {
        let space = CriticalSpace {
            q: self.real("continuity.q")?,
            p: self.real("continuity.p")?,
        };
        if !(space.q > 1.0 && space.p >= 1.0) {
            return Err(Error::Parameter(
                "continuity space needs q > 1 and p >= 1".into(),
            ));
        }
        Ok(space)
    }

    /// The noise ensemble, from `noise.file` when set, else generated;
    /// `None` when `noise.kmax = 0` and no file is given.
    pub fn ensemble(&self) -> Result<Option<NoiseEnsemble>> {
        let scale = self.real("noise.scale")?;
        let file = self.get("noise.file");
        let e = if !file.is_empty() {
            NoiseEnsemble::from_text(&std::fs::read_to_string(file)?)?
        } else {
            let kmax = self.integer("noise.kmax")? as i64;
            if kmax == 0 {
                return Ok(None);
            }
            build_kraichnan(
                self.integer("noise.d")? as usize,
                self.real("noise.alpha")?,
                kmax,
            )?
        };
        Ok(Some(e.scaled(scale)))
    }

    /// Solver configuration and initial state.
    pub fn setup(&self) -> Result<(SolverConfig, SimState)> {
        let grid = self.grid()?;
        let mut c = SolverConfig::new(grid, self.real("time.dt")?, self.real("time.t_end")?);
        c.formulation = self.formulation()?;
        c.scheme = self.scheme()?;
        c.viscosity = self.real("model.viscosity")?;
        c.nonlinear = self.flag("model.nonlinear")?;
        c.coeffs = crate::dynamics::DriftCoeffs::ito(grid, c.viscosity, self.real("model.h")?);
        if let Some(e) = self.ensemble()? {
            c.noise = TransportNoise::from_ensemble(&e, grid)?;
        }
        c.seed = self.seed();
        c.dealias = self.flag("run.dealias")?;
        c.diagnostics_stride = self.integer("run.diagnostics_stride")? as usize;
        c.monitor = self.monitor()?;

        let theta = if self.flag("theta.enabled")? {
            let mut tc = ThetaConfig::new(self.real("theta.diffusivity")?);
            tc.divergence_form = self.flag("theta.divergence_form")?;
            if self.flag("theta.transported")? {
                tc.chi = c.noise.sigma.clone();
            }
            c.theta = Some(tc);
            let band = self.integer("theta.kmax")? as usize;
            let raw = random_band_limited(grid, 1, band, self.seed().wrapping_add(1));
            let raw = raw.to_spectral().dealias().to_physical_unchecked();
            let m = raw.max_abs();
            let amp = self.real("theta.amplitude")?;
            Some(if m == 0.0 { raw } else { raw.scale(amp / m) })
        } else {
            None
        };

        let amp = self.real("init.amplitude")?;
        let v = match self.init_kind()? {
            InitKind::Zero => RealField::zeros(grid, 2),
            InitKind::Random => {
                random_initial(grid, self.integer("init.kmax")? as usize, amp, self.seed())
            }
            InitKind::Mode => {
                let k = self.integer("init.kmax")?.max(1) as f64;
                let tau = 2.0 * std::f64::consts::PI * k;
                RealField::from_fn(grid, 2, |comp, x| {
                    if comp == 0 {
                        amp * (tau * x[1]).sin() * (tau * x[2]).cos()
                    } else {
                        amp * (tau * x[0]).cos()
                    }
                })
            }
            InitKind::File => {
                let f = read_snapshot(Path::new(self.get("init.file")))?;
                if f.grid() != grid || f.components() != 2 {
                    return Err(Error::Format(
                        "initial snapshot does not match grid with 2 components".into(),
                    ));
                }
                f
            }
        };
        Ok((c, SimState::new(v, theta)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Zero,
    Random,
    /// `(A sin(2 pi k y) cos(2 pi k z), A cos(2 pi k x))`
    Mode,
    File,
}

/// Decimal or `a/b` fraction.
pub fn parse_real(s: &str) -> Option<f64> {
    if s.contains('/') {
        return parse_rational(s).ok().map(to_f64);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_round_trip() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        let text = "# a run\ngrid.nx = 8   # inline\n\ncontinuity.q = 8/3\nrun.seed=42\n";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.get("grid.nx"), "8");
        assert_eq!(c.seed(), 42);
        assert!((c.real("continuity.q").unwrap() - 8.0 / 3.0).abs() < 1e-15);
        let m = c.manifest("0.1.0");
        assert!(m.ends_with("run.git_like_version = 0.1.0\n"));
        assert_eq!(m.lines().count(), KEYS.len() + 1);
        assert_eq!(Config::parse(&m).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_repeated_and_malformed() {
        assert!(matches!(
            Config::parse("grid.nq = 3"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            Config::parse("grid.nx = 3\ngrid.nx = 4"),
            Err(Error::Format(_))
        ));
        assert!(matches!(Config::parse("grid.nx"), Err(Error::Format(_))));
        assert!(matches!(
            Config::parse("time.dt = fast"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            Config::parse("model.nonlinear = yes"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            Config::parse("model.formulation = other"),
            Err(Error::Format(_))
        ));
        let mut c = Config::default();
        assert!(c.set("time.dt", "nan").is_err());
        assert_eq!(c.get("time.dt"), "0.001");
        c.set("run.seed", "9").unwrap();
        assert_eq!(c.seed(), 9);
    }

    #[test]
    fn monitor_triple_is_validated() {
        let c = Config::parse("monitor.p0 = 4\nmonitor.q0 = 8/3\nmonitor.delta0 = 3/8").unwrap();
        assert!((c.monitor().unwrap().mu0().unwrap() - (0.75 + 0.5)).abs() < 1e-15);
        let c = Config::parse("monitor.p0 = 4\nmonitor.q0 = 4\nmonitor.delta0 = 0.4").unwrap();
        assert!(matches!(c.monitor(), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn setup_builds_an_admissible_state() {
        let c = Config::parse("grid.nx = 8\ngrid.ny = 8\ngrid.nz = 8\nnoise.kmax = 2\nnoise.scale = 0.2\ntheta.enabled = true\ntheta.transported = true").unwrap();
        let (sc, init) = c.setup().unwrap();
        assert_eq!(
            sc.noise.sigma.len(),
            build_kraichnan(3, 4.0 / 3.0, 2).unwrap().len()
        );
        assert!(crate::hydrostatics::is_admissible(&init.v));
        assert!((init.v.max_abs() - 1.0).abs() < 1e-12);
        assert!(init.theta.is_some());
        let mode =
            Config::parse("grid.nx = 8\ngrid.ny = 8\ngrid.nz = 8\ninit.kind = mode\ninit.kmax = 1")
                .unwrap();
        assert!(crate::hydrostatics::is_admissible(
            &mode.setup().unwrap().1.v
        ));
    }
}
