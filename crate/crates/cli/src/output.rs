//! Run artifacts. Every file is written to a temporary sibling and renamed
//! into place, so an interrupted run never leaves a truncated file behind.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use nullwave_core::diagnostics::{fit_decay, DecayFit, DiagnosticSeries};

pub const SERIES_FILE: &str = "series.csv";
pub const EXTRAS_FILE: &str = "extras.csv";
pub const META_FILE: &str = "meta.json";
pub const FITS_FILE: &str = "fits.json";
pub const PLOT_FILE: &str = "plot.gp";

pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One fitted exponent, or the reason it could not be fitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitEntry {
    pub column: String,
    /// How the column was transformed before fitting.
    pub transform: &'static str,
    pub window: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<DecayFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Fits for the configured windows: the square root of the `K_2` local
/// energy, `‖u‖_{L∞(K_2)}`, the non-increasing envelope of `S_u`, and the
/// energy.
pub fn fit_all(series: &DiagnosticSeries, windows: &BTreeMap<String, [f64; 2]>) -> BTreeMap<String, FitEntry> {
    let mut out = BTreeMap::new();
    for (name, w) in windows {
        let (column, transform) = match name.as_str() {
            "local_energy" => ("local_energy_R2", "sqrt"),
            "linf" => ("linf_R2", "none"),
            "s_u" => ("S_u", "envelope"),
            "energy" => ("energy", "none"),
            _ => continue,
        };
        let mut data = series.column(column).unwrap_or_default();
        match transform {
            "sqrt" => data.iter_mut().for_each(|p| p.1 = p.1.sqrt()),
            "envelope" => {
                let mut run = 0.0f64;
                for p in data.iter_mut().rev() {
                    run = run.max(p.1);
                    p.1 = run;
                }
            }
            _ => {}
        }
        let (fit, error) = match fit_decay(&data, (w[0], w[1])) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        out.insert(
            name.clone(),
            FitEntry {
                column: column.to_string(),
                transform,
                window: *w,
                fit,
                error,
            },
        );
    }
    out
}

pub fn series_csv(series: &DiagnosticSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).expect("writing to memory");
    buf
}

pub fn extras_csv(series: &DiagnosticSeries) -> Vec<u8> {
    let mut buf = Vec::new();
    series.write_extras(&mut buf).expect("writing to memory");
    buf
}

/// Gnuplot script drawing the decay-relevant columns on log-log axes.
pub fn plot_script() -> String {
    let mut s = String::new();
    s.push_str("# gnuplot script; run from the output directory: gnuplot -p plot.gp\n");
    s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
    s.push_str("f(x) = 1.0 / x\nset logscale xy\nset xlabel 't'\nset grid\n");
    s.push_str("set terminal pngcairo size 1200,900\nset output 'decay.png'\n");
    s.push_str("set multiplot layout 2,2\n");
    s.push_str("set title 'local quantities on K_2'\n");
    s.push_str("plot 'extras.csv' using 1:(column('linf_R2')) with lines, \\\n");
    s.push_str("     'series.csv' using 1:(sqrt(column('local_energy_R2'))) with lines title 'sqrt(local_energy_R2)', \\\n");
    s.push_str("     f(x) title 't^-1' dashtype 2\n");
    s.push_str("set title 'weighted sup-norms'\n");
    s.push_str("plot 'series.csv' using 1:(column('S_grad')) with lines, '' using 1:(column('S_good')) with lines, '' using 1:(column('S_u')) with lines\n");
    s.push_str("unset logscale y\nset title 'energy and ghost-weight integral'\n");
    s.push_str("plot 'series.csv' using 1:(column('energy')) with lines, '' using 1:(column('ghost_cum')) with lines\n");
    s.push_str("set title 'inequality monitors'\n");
    s.push_str("plot 'series.csv' using 1:(column('hardy')) with lines, '' using 1:(column('sobolev')) with lines, '' using 1:(column('elliptic')) with lines\n");
    s.push_str("unset multiplot\n");
    s
}
