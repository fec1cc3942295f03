//! CSV and JSON emission of experiment reports.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{CurveRow, ExperimentConfig, ExperimentReport, LogLikRow, Mode, ReportBody, TrajectoryRow};

pub const CURVE_HEADER: [&str; 5] = ["rho", "psi", "prior_density", "posterior_density", "finite_m_density"];
pub const LOGLIK_HEADER: [&str; 6] = ["rho", "n", "m", "mean_loglik", "stderr", "trials"];
pub const TRAJECTORY_HEADER: [&str; 5] = ["rho", "n", "mean_theta", "mean_psi", "trials"];

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_file_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Unsupervised => "fig1.csv",
        Mode::Supervised => "fig2.csv",
        Mode::SemiSupervised => "fig3.csv",
        Mode::Trajectory => "fig2_traj.csv",
    }
}

impl ReportBody {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match self {
            ReportBody::Curves(rows) => {
                w.write_record(CURVE_HEADER)?;
                for r in rows {
                    w.write_record([
                        fmt_float(r.rho),
                        fmt_float(r.psi),
                        fmt_float(r.prior_density),
                        fmt_float(r.posterior_density),
                        fmt_float(r.finite_m_density),
                    ])?;
                }
            }
            ReportBody::LogLik(rows) => {
                w.write_record(LOGLIK_HEADER)?;
                for r in rows {
                    w.write_record([
                        fmt_float(r.rho),
                        r.n.to_string(),
                        r.m.to_string(),
                        fmt_float(r.mean_loglik),
                        fmt_float(r.stderr),
                        r.trials.to_string(),
                    ])?;
                }
            }
            ReportBody::Trajectory(rows) => {
                w.write_record(TRAJECTORY_HEADER)?;
                for r in rows {
                    w.write_record([
                        fmt_float(r.rho),
                        r.n.to_string(),
                        fmt_float(r.mean_theta),
                        fmt_float(r.mean_psi),
                        r.trials.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ascii"))
    }

    /// Parses a CSV produced by [`ReportBody::write_csv`]; the header
    /// selects the row type.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let records: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
        let num = |rec: &csv::StringRecord, k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::validation(header[k].clone(), e.to_string()))
        };
        let count = |rec: &csv::StringRecord, k: usize| -> Result<usize> {
            rec[k]
                .parse::<usize>()
                .map_err(|e| Error::validation(header[k].clone(), e.to_string()))
        };
        if header == CURVE_HEADER {
            records
                .iter()
                .map(|rec| {
                    Ok(CurveRow {
                        rho: num(rec, 0)?,
                        psi: num(rec, 1)?,
                        prior_density: num(rec, 2)?,
                        posterior_density: num(rec, 3)?,
                        finite_m_density: num(rec, 4)?,
                    })
                })
                .collect::<Result<_>>()
                .map(ReportBody::Curves)
        } else if header == LOGLIK_HEADER {
            records
                .iter()
                .map(|rec| {
                    Ok(LogLikRow {
                        rho: num(rec, 0)?,
                        n: count(rec, 1)?,
                        m: count(rec, 2)?,
                        mean_loglik: num(rec, 3)?,
                        stderr: num(rec, 4)?,
                        trials: count(rec, 5)?,
                    })
                })
                .collect::<Result<_>>()
                .map(ReportBody::LogLik)
        } else if header == TRAJECTORY_HEADER {
            records
                .iter()
                .map(|rec| {
                    Ok(TrajectoryRow {
                        rho: num(rec, 0)?,
                        n: count(rec, 1)?,
                        mean_theta: num(rec, 2)?,
                        mean_psi: num(rec, 3)?,
                        trials: count(rec, 4)?,
                    })
                })
                .collect::<Result<_>>()
                .map(ReportBody::Trajectory)
        } else {
            Err(Error::validation("header", format!("unrecognized header {header:?}")))
        }
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'a str,
    figure: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
}

/// Writes the figure CSV and `meta.json` into `out_dir`. Output depends
/// only on the report, so re-runs produce byte-identical files.
pub fn emit_report(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv_path = out_dir.join(csv_file_name(report.config.mode));
    let body = report.body.to_csv_string()?;
    fs::write(&csv_path, body).map_err(|e| Error::io(&csv_path, e))?;

    let meta = Meta {
        tool: env!("CARGO_PKG_NAME"),
        version: report.version,
        figure: csv_file_name(report.config.mode),
        seed: report.config.master_seed,
        config: &report.config,
    };
    let meta_path = out_dir.join("meta.json");
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(vec![csv_path, meta_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.416_078_005_057_750_8, 1e-300, 12345.678, 0.0, -0.0, f64::MAX] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_float(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn headers() {
        let l = ReportBody::LogLik(vec![]).to_csv_string().unwrap();
        assert_eq!(l.trim_end(), "rho,n,m,mean_loglik,stderr,trials");
        let t = ReportBody::Trajectory(vec![]).to_csv_string().unwrap();
        assert_eq!(t.trim_end(), "rho,n,mean_theta,mean_psi,trials");
    }

    #[test]
    fn unknown_header_is_rejected() {
        assert!(ReportBody::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(ReportBody::read_csv("rho,n,m,mean_loglik,stderr,trials\n0,x,0,0,0,1\n".as_bytes()).is_err());
    }
}
