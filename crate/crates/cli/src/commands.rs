//! Subcommand bodies. Each returns the process exit code and writes its
//! human-readable report to the given sink.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use nullwave_core::diagnostics::{fit_decay, Diagnostics, DiagnosticSeries, FitError};
use nullwave_core::geometry::{build_grid_with, ExteriorGrid, NodeKind};
use nullwave_core::initdata::{check_compatibility, data_norm_h4, sample_data, CompatReport};
use nullwave_core::io::{write_field, write_grid};
use nullwave_core::nullforms::{check_null, decompose_null, CoefficientTensor};
use nullwave_core::solver::run;

use crate::config::RunConfig;
use crate::output::{
    atomic_write, extras_csv, fit_all, plot_script, series_csv, sha256_hex, EXTRAS_FILE, FITS_FILE, META_FILE,
    PLOT_FILE, SERIES_FILE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_NULL: i32 = 1;
pub const EXIT_ABORT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Order and tolerance of the compatibility check recorded for every run.
pub const COMPAT_ORDER: usize = 4;
pub const COMPAT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub n: usize,
    pub h: f64,
    pub r_out: f64,
    pub min_fraction: f64,
    pub interior: usize,
    pub boundary_adjacent: usize,
    pub obstacle: usize,
    pub frame: usize,
}

impl GridMeta {
    fn of(grid: &ExteriorGrid) -> Self {
        Self {
            n: grid.n(),
            h: grid.h(),
            r_out: grid.r_out(),
            min_fraction: grid.min_fraction(),
            interior: grid.count(NodeKind::Interior),
            boundary_adjacent: grid.count(NodeKind::BoundaryAdjacent),
            obstacle: grid.count(NodeKind::Obstacle),
            frame: grid.count(NodeKind::ExteriorCone),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AbortRecord {
    pub stage: &'static str,
    pub error: String,
    pub steps: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub status: &'static str,
    /// Canonical config text; parsing it reproduces the run's config.
    pub config: String,
    pub config_sha256: String,
    pub threads: usize,
    pub grid: Option<GridMeta>,
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    /// `ε (‖u0‖_{H⁴} + ‖u1‖_{H³})` of the data, reported and not enforced.
    pub data_norm_h4: f64,
    pub compatibility: Option<CompatReport>,
    pub abort: Option<AbortRecord>,
}

/// What [`cmd_run`] did, for callers that want more than the exit code.
#[derive(Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub dir: PathBuf,
    pub series: DiagnosticSeries,
    pub meta: Option<RunMeta>,
}

fn io_fail(log: &mut dyn Write, what: &str, e: impl std::fmt::Display) -> i32 {
    let _ = writeln!(log, "error: {what}: {e}");
    EXIT_IO
}

pub fn cmd_run(cfg: &RunConfig, log: &mut dyn Write) -> RunReport {
    let dir = PathBuf::from(&cfg.output.dir);
    let mut report = RunReport {
        exit_code: EXIT_OK,
        dir: dir.clone(),
        series: DiagnosticSeries::default(),
        meta: None,
    };
    if let Err(e) = std::fs::create_dir_all(&dir) {
        report.exit_code = io_fail(log, &format!("creating {}", dir.display()), e);
        return report;
    }
    let config = cfg.to_toml();
    let solver_cfg = cfg.solver();
    let h = cfg.grid.h;
    let dt = solver_cfg.dt(h);
    let mut meta = RunMeta {
        tool: "nullwave",
        version: env!("CARGO_PKG_VERSION"),
        status: "completed",
        config_sha256: sha256_hex(config.as_bytes()),
        config,
        threads: rayon::current_num_threads(),
        grid: None,
        dt,
        steps: 0,
        samples: 0,
        data_norm_h4: f64::NAN,
        compatibility: None,
        abort: None,
    };
    let profile = cfg.profile();
    let cubic = cfg.tensor.cubic();
    let mut final_state = None;
    let mut grid_used = None;
    let setup = build_grid_with(&cfg.obstacle.shape(), h, cfg.r_out(), cfg.grid.min_fraction)
        .map_err(|e| e.to_string())
        .and_then(|grid| {
            let state = sample_data(&profile, &grid, &cubic, dt, cfg.data.allow_overlap).map_err(|e| e.to_string())?;
            Ok((grid, state))
        });
    match setup {
        Err(error) => {
            meta.status = "aborted";
            meta.abort = Some(AbortRecord {
                stage: "setup",
                error,
                steps: 0,
                t: 0.0,
            });
        }
        Ok((grid, state)) => {
            meta.grid = Some(GridMeta::of(&grid));
            meta.data_norm_h4 = profile.epsilon * data_norm_h4(&profile, h);
            meta.compatibility = check_compatibility(&profile, &cubic, &grid, COMPAT_ORDER, COMPAT_TOL).ok();
            let mut diag = Diagnostics::new(cfg.diagnostics()).expect("validated with the config");
            let _ = writeln!(
                log,
                "running {} steps of dt = {dt:.6} on a {}x{} grid",
                solver_cfg.steps(h),
                grid.n(),
                grid.n()
            );
            match run(&grid, &cubic, state, &solver_cfg, None, &mut diag) {
                Ok(out) => {
                    meta.steps = out.steps;
                    final_state = Some(out.state);
                }
                Err(abort) => {
                    meta.status = "aborted";
                    meta.steps = abort.steps;
                    meta.abort = Some(AbortRecord {
                        stage: "solver",
                        error: abort.error.to_string(),
                        steps: abort.steps,
                        t: abort.state.t(),
                    });
                    let _ = writeln!(log, "numerical abort: {}", abort.error);
                }
            }
            report.series = diag.into_series();
            grid_used = Some(grid);
        }
    }
    meta.samples = report.series.len();
    let fits = fit_all(&report.series, &cfg.diagnostics.windows);
    let files: [(&str, Vec<u8>); 4] = [
        (SERIES_FILE, series_csv(&report.series)),
        (EXTRAS_FILE, extras_csv(&report.series)),
        (FITS_FILE, serde_json::to_vec_pretty(&fits).expect("plain data")),
        (PLOT_FILE, plot_script().into_bytes()),
    ];
    for (name, bytes) in files {
        if let Err(e) = atomic_write(&dir.join(name), &bytes) {
            report.exit_code = io_fail(log, &format!("writing {name}"), e);
            return report;
        }
    }
    if cfg.output.snapshots {
        if let (Some(grid), Some(state)) = (&grid_used, &final_state) {
            let mut g = Vec::new();
            let mut f = Vec::new();
            let written = write_grid(grid, &mut g)
                .and_then(|_| write_field(state, grid, &mut f))
                .and_then(|_| atomic_write(&dir.join("grid.bin"), &g))
                .and_then(|_| atomic_write(&dir.join("final.nwfld"), &f));
            if let Err(e) = written {
                report.exit_code = io_fail(log, "writing snapshots", e);
                return report;
            }
        }
    }
    if let Err(e) = atomic_write(&dir.join(META_FILE), &serde_json::to_vec_pretty(&meta).expect("plain data")) {
        report.exit_code = io_fail(log, "writing meta.json", e);
        return report;
    }
    for (name, entry) in &fits {
        match (&entry.fit, &entry.error) {
            (Some(f), _) => {
                let _ = writeln!(log, "fit {name}: exponent {:.3} ± {:.3}", f.exponent, f.stderr);
            }
            (None, Some(e)) => {
                let _ = writeln!(log, "fit {name}: {e}");
            }
            _ => {}
        }
    }
    report.exit_code = if meta.abort.is_some() { EXIT_ABORT } else { EXIT_OK };
    report.meta = Some(meta);
    report
}

pub fn cmd_check_null(path: &Path, out: &mut dyn Write) -> i32 {
    let tensor = match std::fs::read_to_string(path)
        .map_err(|e| e.to_string())
        .and_then(|s| CoefficientTensor::parse_text(&s).map_err(|e| e.to_string()))
    {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(out, "error: {}: {e}", path.display());
            return EXIT_IO;
        }
    };
    check_null_report(&tensor, out)
}

/// Verdicts per block, then either the decomposition or the violated identities.
pub fn check_null_report(tensor: &CoefficientTensor, out: &mut dyn Write) -> i32 {
    let report = check_null(tensor);
    let _ = writeln!(out, "M = {}, {} nonzero block(s)", report.components, report.blocks.len());
    for b in &report.blocks {
        let [i, j, k, l] = b.block;
        if b.null {
            let _ = writeln!(out, "block ({i},{j},{k},{l}): null");
        } else {
            let _ = writeln!(
                out,
                "block ({i},{j},{k},{l}): NOT NULL (max symbol on the light cone {:.3e})",
                b.sampled_max
            );
            for v in &b.violations {
                let _ = writeln!(out, "    violated: {v}");
            }
        }
    }
    if !report.all_null {
        return EXIT_NOT_NULL;
    }
    if let Ok(d) = decompose_null(tensor) {
        let _ = writeln!(out, "decomposition:");
        for (b, label, v) in d.nonzero() {
            let _ = writeln!(out, "    ({},{},{},{}) {label} = {v}", b[0], b[1], b[2], b[3]);
        }
    }
    EXIT_OK
}

pub fn cmd_fit_decay(path: &Path, column: &str, t_lo: f64, t_hi: f64, out: &mut dyn Write) -> i32 {
    let data = match read_column(path, column) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_IO;
        }
    };
    match fit_decay(&data, (t_lo, t_hi)) {
        Ok(f) => {
            let _ = writeln!(
                out,
                "{column} on [{t_lo}, {t_hi}]: exponent {:.3} ± {:.3} ({} samples, {} floored)",
                f.exponent, f.stderr, f.used, f.floored
            );
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            match e {
                FitError::Window(..) | FitError::Insufficient { .. } | FitError::Floored { .. } | FitError::Degenerate => {
                    EXIT_DEGENERATE
                }
                FitError::Nonpositive { .. } => EXIT_DEGENERATE,
            }
        }
    }
}

/// `(t, value)` pairs of a named CSV column.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            format!(
                "{}: no column '{name}' (columns: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            )
        })
    };
    let (ti, vi) = (find("t")?, find(column)?);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| -> Result<f64, String> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| format!("row {}: bad number in column {i}", k + 2))
        };
        out.push((parse(ti)?, parse(vi)?));
    }
    Ok(out)
}
