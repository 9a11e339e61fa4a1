use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::simulate::{BuyoutBin, SimulationResult};
use crate::verify::ICReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    pub rotation_ok: bool,
    pub a1_ok: bool,
    pub a1_route: Option<String>,
    pub a2_ok: bool,
    pub remark3_ok: bool,
    pub certified: bool,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub contract_forge: String,
    pub summary_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            contract_forge: env!("CARGO_PKG_VERSION").to_string(),
            summary_format: 1,
        }
    }
}

/// Contents of summary.json. Stages that did not run leave their fields null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub subcommand: String,
    pub prior: String,
    pub signal: String,
    pub tilde_v1: Option<f64>,
    pub v1_star: f64,
    pub q1_at_tilde_plus: Option<f64>,
    pub possibly_non_unique: Option<bool>,
    pub revenue_quadrature: Option<f64>,
    pub social_surplus: Option<f64>,
    pub revenue_mc: Option<f64>,
    pub revenue_mc_se: Option<f64>,
    pub simulation: Option<SimulationResult>,
    pub buyout_chi_square_p: Option<f64>,
    pub mechanism: Option<String>,
    pub q1_monotone: Option<bool>,
    pub min_delta: Option<f64>,
    pub argmin: Option<(f64, f64)>,
    pub ic_tol: Option<f64>,
    pub pass: Option<bool>,
    pub second_stage_ok: Option<bool>,
    pub envelope_max_err: Option<f64>,
    pub assumptions: AssumptionFlags,
    pub seed: u64,
    pub versions: Versions,
}

/// Pretty JSON with every float written to 17 significant digits.
struct Sig17(PrettyFormatter<'static>);

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    buf.push(b'\n');
    buf
}

fn num(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a String cannot fail");
}

/// One row of allocation.csv.
#[derive(Debug, Clone, Copy)]
pub struct AllocationRow {
    pub v1: f64,
    pub q1_star: f64,
    pub p1_star: f64,
    pub p2_star: f64,
    pub q1_fb: f64,
    pub utility: f64,
    pub expected_payment: f64,
    pub profit: f64,
}

pub fn allocation_csv(rows: &[AllocationRow]) -> Vec<u8> {
    let mut s = String::from("v1,q1_star,p1_star,p2_star,q1_fb,utility,expected_payment,profit\n");
    for r in rows {
        let cols = [
            r.v1,
            r.q1_star,
            r.p1_star,
            r.p2_star,
            r.q1_fb,
            r.utility,
            r.expected_payment,
            r.profit,
        ];
        for (i, x) in cols.into_iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            num(&mut s, x);
        }
        s.push('\n');
    }
    s.into_bytes()
}

pub fn ic_csv(report: &ICReport) -> Vec<u8> {
    let mut s = String::from("v1,r1,delta\n");
    for (i, &v) in report.lattice.iter().enumerate() {
        for (j, &r) in report.lattice.iter().enumerate() {
            num(&mut s, v);
            s.push(',');
            num(&mut s, r);
            s.push(',');
            num(&mut s, report.delta[i][j]);
            s.push('\n');
        }
    }
    s.into_bytes()
}

pub fn buyout_csv(bins: &[BuyoutBin]) -> Vec<u8> {
    let mut s = String::from("v1_lo,v1_hi,draws,buyouts,empirical_rate,predicted_rate\n");
    for b in bins {
        let (emp, pred) = if b.draws > 0 {
            (b.buyouts as f64 / b.draws as f64, b.expected / b.draws as f64)
        } else {
            (f64::NAN, f64::NAN)
        };
        num(&mut s, b.lo);
        s.push(',');
        num(&mut s, b.hi);
        write!(s, ",{},{},", b.draws, b.buyouts).expect("writing to a String cannot fail");
        num(&mut s, emp);
        s.push(',');
        num(&mut s, pred);
        s.push('\n');
    }
    s.into_bytes()
}

/// Writes every file to a temporary name first and renames only once all
/// writes succeeded, so a failed run leaves no partial outputs behind.
pub fn commit(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<()> {
    let io_err = |path: PathBuf| move |source| Error::Output { path, source };
    fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        let written = fs::File::create(&tmp).and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        });
        if let Err(e) = written {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(io_err(tmp)(e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in &staged {
        fs::rename(tmp, dest).map_err(io_err(dest.clone()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Summary {
        Summary {
            subcommand: "all".into(),
            prior: "uniform".into(),
            signal: "truth_or_noise[normal(1)]".into(),
            tilde_v1: Some(0.426_888_813_8),
            v1_star: 0.5,
            q1_at_tilde_plus: Some(1.0 / 3.0),
            possibly_non_unique: Some(false),
            revenue_quadrature: Some(0.1 + 0.2),
            social_surplus: None,
            revenue_mc: Some(std::f64::consts::PI),
            revenue_mc_se: Some(1e-300),
            simulation: None,
            buyout_chi_square_p: None,
            mechanism: None,
            q1_monotone: None,
            min_delta: Some(-0.0),
            argmin: Some((0.25, 0.75)),
            ic_tol: Some(5e-7),
            pass: Some(true),
            second_stage_ok: Some(true),
            envelope_max_err: Some(2.5e-3),
            assumptions: AssumptionFlags {
                rotation_ok: true,
                a1_ok: true,
                a1_route: Some("sufficient_pair".into()),
                a2_ok: true,
                remark3_ok: true,
                certified: true,
                forced: false,
            },
            seed: 7,
            versions: Versions::default(),
        }
    }

    #[test]
    fn summary_round_trips() {
        let s = sample();
        let bytes = to_json(&s);
        let back: Summary = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, s);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
    }

    #[test]
    fn csv_has_fixed_header() {
        let rows = [AllocationRow {
            v1: 0.5,
            q1_star: 0.5,
            p1_star: 0.1,
            p2_star: 0.5,
            q1_fb: 0.6,
            utility: 0.2,
            expected_payment: 0.3,
            profit: 0.1,
        }];
        let text = String::from_utf8(allocation_csv(&rows)).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "v1,q1_star,p1_star,p2_star,q1_fb,utility,expected_payment,profit"
        );
        assert!(lines.next().unwrap().starts_with("5.0000000000000000e-1,"));
    }

    #[test]
    fn commit_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        commit(&out, &[("a.txt", b"1".to_vec()), ("b.txt", b"2".to_vec())]).unwrap();
        assert_eq!(fs::read(out.join("a.txt")).unwrap(), b"1");
        assert_eq!(fs::read(out.join("b.txt")).unwrap(), b"2");
        assert!(fs::read_dir(&out)
            .unwrap()
            .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
    }
}
