//! Analysis report: one row per observable of one chain.

use std::fmt::Write as _;

use ncgauge::observables::{Observable, Timeseries};
use ncgauge::stats::{self, ErrorReport, JackknifeResult};
use ncgauge::{Error, Result};

pub const REPORT_HEADER: &str = "observable,mean,corrected_error,tau_int,window,n_effective";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub observable: String,
    pub mean: f64,
    pub corrected_error: f64,
    pub tau_int: f64,
    pub window: usize,
    pub n_effective: f64,
}

impl ReportRow {
    fn from_error(name: impl Into<String>, r: &ErrorReport, scale: f64) -> Self {
        Self {
            observable: name.into(),
            mean: r.mean * scale,
            corrected_error: r.corrected_error * scale,
            tau_int: r.tau_int,
            window: r.window,
            n_effective: r.n_effective,
        }
    }

    fn from_jackknife(
        name: impl Into<String>,
        j: &JackknifeResult,
        tau_source: &ErrorReport,
        scale: f64,
    ) -> Self {
        Self {
            observable: name.into(),
            mean: j.value * scale,
            corrected_error: j.error * scale,
            tau_int: tau_source.tau_int,
            window: tau_source.window,
            n_effective: tau_source.n_effective,
        }
    }
}

/// Observables reported per `n^2` in addition to their raw values.
fn has_density(o: Observable) -> bool {
    !matches!(o, Observable::STot | Observable::SA | Observable::SB)
}

/// All report rows, plus warnings for rows that could not be computed.
pub fn analyze_timeseries(ts: &Timeseries) -> (Vec<ReportRow>, Vec<String>) {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    if ts.records.is_empty() {
        warnings.push("no measurements; report is empty".to_string());
        return (rows, warnings);
    }
    if ts.records.len() < stats::MIN_TAU_LEN {
        warnings.push(format!(
            "only {} measurements; errors assume uncorrelated samples",
            ts.records.len()
        ));
    }
    let vol = ts.volume();
    let s_tot = ts.series(Observable::STot);
    let energy = match stats::error_report(&s_tot) {
        Ok(e) => e,
        Err(e) => {
            warnings.push(format!("energy: {e}"));
            return (rows, warnings);
        }
    };
    rows.push(ReportRow::from_error("energy", &energy, 1.0));
    rows.push(ReportRow::from_error("energy_density", &energy, 1.0 / vol));
    match stats::jackknife_variance(&s_tot) {
        Ok(c) => {
            if c.low_confidence {
                warnings.push(format!("specific_heat: only {} jackknife blocks", c.blocks));
            }
            rows.push(ReportRow::from_jackknife("specific_heat", &c, &energy, 1.0));
            rows.push(ReportRow::from_jackknife(
                "specific_heat_density",
                &c,
                &energy,
                1.0 / vol,
            ));
        }
        Err(e) => warnings.push(format!("specific_heat: {e}")),
    }

    for obs in Observable::all() {
        let name = obs.name();
        match stats::error_report(&ts.series(obs)) {
            Ok(r) => {
                rows.push(ReportRow::from_error(name.clone(), &r, 1.0));
                if has_density(obs) {
                    rows.push(ReportRow::from_error(
                        format!("{name}_density"),
                        &r,
                        1.0 / vol,
                    ));
                }
            }
            Err(e) => warnings.push(format!("{name}: {e}")),
        }
    }

    let fractions =
        std::iter::once(("phi", Observable::Phi02, Observable::PhiA2)).chain((0..4).map(|i| {
            (
                ["z0", "z1", "z2", "z3"][i],
                Observable::Z02(i),
                Observable::ZA2(i),
            )
        }));
    for (label, num, den) in fractions {
        let name = format!("{label}_spherical_fraction");
        let (xs, ys) = (ts.series(num), ts.series(den));
        match (stats::jackknife_ratio(&xs, &ys), stats::error_report(&ys)) {
            (Ok(j), Ok(tau)) => rows.push(ReportRow::from_jackknife(name, &j, &tau, 1.0)),
            (Err(e), _) | (_, Err(e)) => warnings.push(format!("{name}: {e}")),
        }
    }
    (rows, warnings)
}

pub fn render_report(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{},{:?}",
            r.observable, r.mean, r.corrected_error, r.tau_int, r.window, r.n_effective
        )
        .unwrap();
    }
    out
}

pub fn parse_report(text: &str) -> Result<Vec<ReportRow>> {
    let bad = |line: usize, m: &str| Error::InvalidParameter(format!("report line {line}: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(REPORT_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(k + 2, "expected 6 columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(k + 2, "bad number"));
        rows.push(ReportRow {
            observable: f[0].to_string(),
            mean: num(f[1])?,
            corrected_error: num(f[2])?,
            tau_int: num(f[3])?,
            window: f[4].parse().map_err(|_| bad(k + 2, "bad window"))?,
            n_effective: num(f[5])?,
        });
    }
    Ok(rows)
}
