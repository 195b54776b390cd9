//! Report persistence: canonical JSON, the fixed-schema CSV, and plot-ready
//! data files. Numbers are written with the shortest round-trip decimal so
//! determinism checks can compare bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use carleman_core::estimates::EstimateReport;

pub const CSV_HEADER: &str = "h,theta,omega,beta,lhs,rhs,ratio,log_ratio";

pub fn report_json(report: &EstimateReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_csv(report: &EstimateReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.h, r.theta, r.omega, r.beta, r.lhs, r.rhs, r.ratio, r.log_ratio
        ));
    }
    out
}

/// (β(h), log ratio) pairs for direct plotting.
pub fn plot_beta_csv(report: &EstimateReport) -> String {
    let mut out = String::from("beta,log_ratio\n");
    for r in &report.records {
        out.push_str(&format!("{},{}\n", r.beta, r.log_ratio));
    }
    out
}

/// (log h, log log-ratio) pairs; rows with a nonpositive log ratio are
/// dropped since they have no log-log image.
pub fn plot_loglog_csv(report: &EstimateReport) -> String {
    let mut out = String::from("log_h,log_log_ratio\n");
    for r in &report.records {
        if r.log_ratio > 0.0 {
            out.push_str(&format!("{},{}\n", r.h.ln(), r.log_ratio.ln()));
        }
    }
    out
}

pub struct WrittenFiles {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub plot_beta: PathBuf,
    pub plot_loglog: PathBuf,
}

/// Write the full artifact set under `out_dir`.
pub fn write_outputs(report: &EstimateReport, out_dir: &Path) -> io::Result<WrittenFiles> {
    fs::create_dir_all(out_dir)?;
    let files = WrittenFiles {
        json: out_dir.join("report.json"),
        csv: out_dir.join("report.csv"),
        plot_beta: out_dir.join("plot_beta.csv"),
        plot_loglog: out_dir.join("plot_loglog.csv"),
    };
    fs::write(&files.json, report_json(report))?;
    fs::write(&files.csv, report_csv(report))?;
    fs::write(&files.plot_beta, plot_beta_csv(report))?;
    fs::write(&files.plot_loglog, plot_loglog_csv(report))?;
    Ok(files)
}

pub fn read_report(path: &Path) -> io::Result<EstimateReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("bad report JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use carleman_core::estimates::{EstimateReport, FitSummary, HRecord};

    fn sample_report() -> EstimateReport {
        EstimateReport {
            experiment: "carleman_ratio".into(),
            config_hash: "abc".into(),
            seed: 42,
            grid: "torus{nx=8,ny=8,lx=1,ly=1}".into(),
            potential: "constant{value=0}".into(),
            records: vec![HRecord {
                h: 0.2,
                theta: 0.171,
                omega: 0.171,
                beta: 0.0,
                lhs: 1.0,
                rhs: 0.5,
                ratio: 2.0,
                log_ratio: 2f64.ln(),
            }],
            skipped: vec![],
            fit: FitSummary::default(),
            alpha_fits: vec![],
            pass: true,
            flags: vec![],
        }
    }

    #[test]
    fn csv_header_is_pinned() {
        let csv = report_csv(&sample_report());
        assert!(csv.starts_with("h,theta,omega,beta,lhs,rhs,ratio,log_ratio\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn json_round_trip_is_identity() {
        let rep = sample_report();
        let json = report_json(&rep);
        let back: EstimateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        assert_eq!(report_json(&back), json);
    }
}
