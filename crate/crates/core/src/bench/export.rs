//! CSV and SVG output, plus the matching CSV parsers.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AggregateCurve;
use crate::optim::{RunRecord, TracePoint};
use crate::{Error, Result};

const TRAJECTORY_HEADER: [&str; 4] = ["k", "oracle_calls", "grad_norm", "objective"];
const CURVE_HEADER: [&str; 5] = ["method", "r", "oracle_calls", "mean_grad_norm", "std_grad_norm"];

fn csv_write_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv write failed: {e}"))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let got = rdr.headers().map_err(|e| Error::Parse(format!("bad csv header: {e}")))?;
    if got.iter().ne(want.iter().copied()) {
        return Err(Error::Parse(format!("expected header {}, got {}", want.join(","), got.iter().collect::<Vec<_>>().join(","))));
    }
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(r)
}

pub fn write_trajectory_csv<W: Write>(w: W, record: &RunRecord) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(TRAJECTORY_HEADER).map_err(csv_write_err)?;
    for p in &record.points {
        wtr.serialize(p).map_err(csv_write_err)?;
    }
    wtr.flush().map_err(|e| Error::Parse(format!("csv flush failed: {e}")))
}

/// Parses a trajectory CSV. Rows must have strictly increasing `k` and
/// nondecreasing oracle calls.
pub fn parse_trajectory_csv<R: Read>(r: R) -> Result<Vec<TracePoint>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &TRAJECTORY_HEADER)?;
    let mut out: Vec<TracePoint> = Vec::new();
    for (i, row) in rdr.deserialize::<TracePoint>().enumerate() {
        let line = i + 2;
        let p = row.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        if let Some(prev) = out.last() {
            if p.k <= prev.k || p.oracle_calls < prev.oracle_calls {
                return Err(Error::Parse(format!("line {line}: trajectory is not increasing")));
            }
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    method: String,
    r: usize,
    oracle_calls: u64,
    mean_grad_norm: f64,
    std_grad_norm: f64,
}

pub fn write_curves_csv<W: Write>(w: W, curves: &[AggregateCurve]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(CURVE_HEADER).map_err(csv_write_err)?;
    for c in curves {
        for i in 0..c.oracle_calls.len() {
            wtr.serialize(CurveRow {
                method: c.label.clone(),
                r: c.r,
                oracle_calls: c.oracle_calls[i],
                mean_grad_norm: c.mean[i],
                std_grad_norm: c.std[i],
            })
            .map_err(csv_write_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::Parse(format!("csv flush failed: {e}")))
}

/// Parses curves written by [`write_curves_csv`]. Consecutive rows with the
/// same `(method, r)` form one curve.
pub fn parse_curves_csv<R: Read>(r: R) -> Result<Vec<AggregateCurve>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &CURVE_HEADER)?;
    let mut out: Vec<AggregateCurve> = Vec::new();
    for (i, row) in rdr.deserialize::<CurveRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        if row.r < 1 {
            return Err(Error::Parse(format!("line {line}: r must be >= 1")));
        }
        if row.mean_grad_norm.is_nan() || !(row.std_grad_norm >= 0.0) {
            return Err(Error::Parse(format!("line {line}: invalid mean/std")));
        }
        match out.last_mut() {
            Some(c) if c.label == row.method && c.r == row.r => {
                if row.oracle_calls <= *c.oracle_calls.last().expect("curves are nonempty") {
                    return Err(Error::Parse(format!("line {line}: oracle calls must increase")));
                }
                c.oracle_calls.push(row.oracle_calls);
                c.mean.push(row.mean_grad_norm);
                c.std.push(row.std_grad_norm);
            }
            _ => out.push(AggregateCurve {
                label: row.method,
                r: row.r,
                oracle_calls: vec![row.oracle_calls],
                mean: vec![row.mean_grad_norm],
                std: vec![row.std_grad_norm],
            }),
        }
    }
    Ok(out)
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<AggregateCurve>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_curves_csv(f)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const MAX_SVG_POINTS: usize = 600;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// A static line chart of `mean ± std` against oracle calls, log-scale y.
pub fn render_svg(title: &str, curves: &[AggregateCurve]) -> String {
    let (w, h) = (760.0, 500.0);
    let (left, right, top, bottom) = (80.0, 200.0, 40.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let x_max = curves
        .iter()
        .filter_map(|c| c.oracle_calls.last())
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let mut y_lo = f64::INFINITY;
    let mut y_hi: f64 = 0.0;
    for c in curves {
        for (m, s) in c.mean.iter().zip(&c.std) {
            if m.is_finite() && *m > 0.0 {
                y_lo = y_lo.min(*m);
                y_hi = y_hi.max(m + s);
            }
        }
    }
    if !(y_lo.is_finite() && y_hi > 0.0) {
        y_lo = 1e-3;
        y_hi = 1.0;
    }
    let (ly_lo, mut ly_hi) = (y_lo.log10().floor(), y_hi.log10().ceil());
    if ly_hi <= ly_lo {
        ly_hi = ly_lo + 1.0;
    }
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| {
        let ly = y.max(10f64.powf(ly_lo)).log10();
        top + ph * (ly_hi - ly) / (ly_hi - ly_lo)
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, xml_escape(title));

    // Axes, decade gridlines and ticks.
    let _ = writeln!(s, r##"<g stroke="#ddd">"##);
    let mut e = ly_lo;
    while e <= ly_hi + 1e-9 {
        let y = sy(10f64.powf(e));
        let _ = writeln!(s, r#"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#, left + pw);
        e += 1.0;
    }
    let _ = writeln!(s, "</g>");
    let mut e = ly_lo;
    while e <= ly_hi + 1e-9 {
        let y = sy(10f64.powf(e));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#, left - 6.0, y + 4.0, e as i64);
        e += 1.0;
    }
    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let x = sx(xv);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, top + ph + 18.0, xv.round() as u64);
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">oracle calls</text>"#, left + pw / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">gradient norm</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (ci, c) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let stride = c.oracle_calls.len().div_ceil(MAX_SVG_POINTS).max(1);
        let mut idx: Vec<usize> = (0..c.oracle_calls.len()).step_by(stride).collect();
        if idx.last() != Some(&(c.oracle_calls.len() - 1)) {
            idx.push(c.oracle_calls.len() - 1);
        }
        let idx: Vec<usize> = idx.into_iter().filter(|&i| c.mean[i].is_finite()).collect();
        if idx.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &i in &idx {
            let _ = write!(band, "{:.2},{:.2} ", sx(c.oracle_calls[i] as f64), sy(c.mean[i] + c.std[i]));
        }
        for &i in idx.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(c.oracle_calls[i] as f64), sy(c.mean[i] - c.std[i]));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.trim_end());
        let mut line = String::new();
        for &i in &idx {
            let _ = write!(line, "{:.2},{:.2} ", sx(c.oracle_calls[i] as f64), sy(c.mean[i]));
        }
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#, line.trim_end());

        let ly = top + 14.0 + 20.0 * ci as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 24.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, xml_escape(&c.label));
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExportedFiles {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Writes `<stem>.csv` and, for a nonempty curve list, `<stem>.svg` into `dir`.
pub fn export(curves: &[AggregateCurve], dir: &Path, stem: &str, title: &str) -> Result<ExportedFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let f = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_curves_csv(std::io::BufWriter::new(f), curves)?;
    let svg = if curves.is_empty() {
        None
    } else {
        let p = dir.join(format!("{stem}.svg"));
        fs::write(&p, render_svg(title, curves)).map_err(|e| Error::io(&p, e))?;
        Some(p)
    };
    Ok(ExportedFiles { csv: csv_path, svg })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(label: &str, r: usize) -> AggregateCurve {
        AggregateCurve {
            label: label.into(),
            r,
            oracle_calls: vec![0, 16, 32, 48],
            mean: vec![10.0, 1.0 / 3.0, 0.1 + 0.2, 1e-300],
            std: vec![0.0, 2.0f64.sqrt(), 1e-17, 0.0],
        }
    }

    #[test]
    fn curves_round_trip_exactly() {
        let curves = vec![curve("RS-NSGD(r=4)", 4), curve("NSGD", 100)];
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &curves).unwrap();
        assert_eq!(parse_curves_csv(buf.as_slice()).unwrap(), curves);
    }

    #[test]
    fn empty_curve_list_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = export(&[], dir.path(), "panel", "empty").unwrap();
        assert_eq!(fs::read_to_string(&files.csv).unwrap().trim(), CURVE_HEADER.join(","));
        assert!(files.svg.is_none());
        assert!(read_curves_csv(&files.csv).unwrap().is_empty());
    }

    #[test]
    fn svg_has_one_series_per_curve() {
        let curves: Vec<_> = (0..6).map(|i| curve(&format!("m{i}"), 4)).collect();
        let svg = render_svg("rho = 4 & <x>", &curves);
        assert_eq!(svg.matches("<polyline").count(), 6);
        assert_eq!(svg.matches("<polygon").count(), 6);
        assert!(svg.contains("&amp; &lt;x&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn parser_rejects_bad_input() {
        assert!(parse_curves_csv("a,b\n1,2\n".as_bytes()).is_err());
        let bad_order = "method,r,oracle_calls,mean_grad_norm,std_grad_norm\nx,1,5,1,0\nx,1,5,1,0\n";
        assert!(parse_curves_csv(bad_order.as_bytes()).is_err());
        let neg_std = "method,r,oracle_calls,mean_grad_norm,std_grad_norm\nx,1,5,1,-1\n";
        assert!(parse_curves_csv(neg_std.as_bytes()).is_err());
        assert!(parse_trajectory_csv("k,oracle_calls,grad_norm,objective\n1,2,x,4\n".as_bytes()).is_err());
        assert!(parse_trajectory_csv("k,oracle_calls,grad_norm,objective\n1,2,3,4\n1,2,3,4\n".as_bytes()).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        use crate::optim::{run, Method, MethodConfig};
        use crate::problems::{make_quadratic, NoiseModel};
        let q = make_quadratic(10, 3.0).unwrap();
        let rec = run(&q, &NoiseModel::Gaussian { sigma_c: 0.3 }, &MethodConfig::constant(Method::RsNsgd, 3, 0.05, 2, 40, 4)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &rec).unwrap();
        assert_eq!(parse_trajectory_csv(buf.as_slice()).unwrap(), rec.points);
    }
}
