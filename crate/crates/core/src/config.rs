//! Run configuration: polynomial, regions, grids, tolerances, connection
//! constants and output location.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{CbError, Result};
use crate::geom::Rect;
use crate::poly::GeneratingFunction;

/// Numerical tolerances. Defaults follow the values documented per module;
/// every field can be overridden from config JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Residual bound for accepting a root of grad f(y) = x.
    pub tol_root: f64,
    /// Distance under which two roots are merged.
    pub tol_merge: f64,
    /// |det Hess| under which a critical point counts as degenerate.
    pub tol_degenerate: f64,
    /// Relative factor for side-sampling offsets near walls.
    pub side_eps_rel: f64,
    /// Relative integrator tolerance.
    pub ode_rel: f64,
    /// Absolute integrator tolerance.
    pub ode_abs: f64,
    /// Capture-ball radius around critical points for flow termination.
    pub tol_capture: f64,
    /// Relative offset for leaving a saddle along an eigenvector.
    pub sep_eps_rel: f64,
    /// Base-plane bisection tolerance for wall location.
    pub tol_wall: f64,
    /// Threshold on the splitting function for declaring a saddle connection.
    pub tol_split: f64,
    /// Relative speed drop (vs median) that flags a cusp on the caustic.
    pub tol_cusp: f64,
    /// Time budget for a single flow integration.
    pub max_time: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_root: 1e-10,
            tol_merge: 1e-7,
            tol_degenerate: 1e-7,
            side_eps_rel: 1e-3,
            ode_rel: 1e-9,
            ode_abs: 1e-11,
            tol_capture: 1e-5,
            sep_eps_rel: 1e-6,
            tol_wall: 1e-7,
            tol_split: 1e-6,
            tol_cusp: 1e-3,
            max_time: 500.0,
        }
    }
}

impl Tolerances {
    /// The tightened variant used by the robustness checks.
    pub fn halved(&self) -> Tolerances {
        Tolerances {
            tol_root: self.tol_root * 0.5,
            tol_merge: self.tol_merge * 0.5,
            tol_degenerate: self.tol_degenerate,
            side_eps_rel: self.side_eps_rel,
            ode_rel: self.ode_rel * 0.5,
            ode_abs: self.ode_abs * 0.5,
            tol_capture: self.tol_capture * 0.5,
            sep_eps_rel: self.sep_eps_rel,
            tol_wall: self.tol_wall * 0.5,
            tol_split: self.tol_split * 0.5,
            tol_cusp: self.tol_cusp,
            max_time: self.max_time * 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.tol_root,
            self.tol_merge,
            self.tol_degenerate,
            self.side_eps_rel,
            self.ode_rel,
            self.ode_abs,
            self.tol_capture,
            self.sep_eps_rel,
            self.tol_wall,
            self.tol_split,
            self.tol_cusp,
            self.max_time,
        ];
        if all.iter().any(|&t| !(t > 0.0)) {
            return Err(CbError::Config("all tolerances must be positive".into()));
        }
        Ok(())
    }
}

fn default_grid_n() -> u32 {
    12
}
fn default_grid_m() -> u32 {
    16
}
fn default_caustic_samples() -> u32 {
    256
}

/// On-disk configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Polynomial literal: array of [i, j, num, den] quadruples.
    pub polynomial: Vec<[i64; 4]>,
    /// Base rectangle [x1_min, x1_max, x2_min, x2_max].
    pub region: [f64; 4],
    /// Fiber window rectangle [y1_min, y1_max, y2_min, y2_max].
    pub fiber_window: [f64; 4],
    /// Fiber seeding lattice size.
    #[serde(default = "default_grid_n")]
    pub grid_n: u32,
    /// Base lattice size for diagram assembly.
    #[serde(default = "default_grid_m")]
    pub grid_m: u32,
    /// Sample count for the caustic tracer.
    #[serde(default = "default_caustic_samples")]
    pub caustic_samples: u32,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Flat connection constant per chamber id; chambers not listed use 0.
    #[serde(default)]
    pub connection: BTreeMap<String, f64>,
    /// Where the CLI writes JSON/SVG artifacts.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CbError::Config(format!("bad config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 8 {
            return Err(CbError::Config("grid_n must be >= 8".into()));
        }
        if self.grid_m < 8 {
            return Err(CbError::Config("grid_m must be >= 8".into()));
        }
        if !self.region_rect().is_nondegenerate() {
            return Err(CbError::Config("region rectangle is degenerate".into()));
        }
        if !self.fiber_rect().is_nondegenerate() {
            return Err(CbError::Config("fiber window rectangle is degenerate".into()));
        }
        self.tolerances.validate()?;
        self.function()?;
        Ok(())
    }

    pub fn region_rect(&self) -> Rect {
        Rect::new(self.region[0], self.region[1], self.region[2], self.region[3])
    }

    pub fn fiber_rect(&self) -> Rect {
        Rect::new(
            self.fiber_window[0],
            self.fiber_window[1],
            self.fiber_window[2],
            self.fiber_window[3],
        )
    }

    pub fn function(&self) -> Result<GeneratingFunction> {
        GeneratingFunction::from_literal(&self.polynomial)
    }

    pub fn connection_for(&self, chamber_id: u32) -> f64 {
        self.connection.get(&chamber_id.to_string()).copied().unwrap_or(0.0)
    }
}

/// Worker cap from the CB_LAB_THREADS environment variable; install it into
/// the global rayon pool once near process start. Errors after the pool is
/// already built are ignored.
pub fn init_thread_cap() {
    if let Ok(v) = std::env::var("CB_LAB_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
