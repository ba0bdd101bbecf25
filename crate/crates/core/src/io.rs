//! Plain-text formats: point patterns and curves as CSV, rasters as CSV
//! or PGM.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{GridField, GridLayout};
use crate::geometry::{PointPattern, Window};
use crate::summaries::SummaryFunction;

const AXES: [&str; 3] = ["x", "y", "z"];

/// `x,y[,z]` header then one point per row.
pub fn pattern_to_csv(p: &PointPattern) -> String {
    let d = p.dim();
    let mut s = AXES[..d].join(",");
    s.push('\n');
    for pt in p.points() {
        let row: Vec<String> = pt[..d].iter().map(|v| format!("{v}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Parses a pattern; the number of columns must match the window.
pub fn pattern_from_csv(text: &str, window: &Window) -> Result<PointPattern> {
    let d = window.dim();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.len() != d {
        return Err(Error::Parse(format!("expected {d} columns ({}), found {}", AXES[..d].join(","), header.len())));
    }
    let mut coords = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("row {}: not a number: {f:?}", line + 2))))
            .collect::<Result<Vec<f64>>>()?;
        coords.push(row);
    }
    PointPattern::from_coords(window.clone(), &coords)
}

pub fn read_pattern(path: &Path, window: &Window) -> Result<PointPattern> {
    pattern_from_csv(&std::fs::read_to_string(path)?, window)
}

pub fn write_pattern(path: &Path, p: &PointPattern) -> Result<()> {
    Ok(std::fs::write(path, pattern_to_csv(p))?)
}

/// `r,value[,lo,hi]`; undefined values as `NA`.
pub fn curve_to_csv(f: &SummaryFunction) -> String {
    let na = |v: f64| if v.is_finite() { format!("{v}") } else { "NA".into() };
    let mut s = String::from(if f.envelope.is_some() { "r,value,lo,hi\n" } else { "r,value\n" });
    for (i, (r, v)) in f.r.iter().zip(&f.values).enumerate() {
        let _ = write!(s, "{},{}", r, na(*v));
        if let Some(env) = &f.envelope {
            let _ = write!(s, ",{},{}", na(env.lo[i]), na(env.hi[i]));
        }
        s.push('\n');
    }
    s
}

/// First line `nx,ny[,nz]`, second the counts, then rows of the raster
/// (x fastest) one per line.
pub fn raster_to_csv(f: &GridField) -> String {
    let res = &f.layout.resolution;
    let mut s = AXES[..res.len()].iter().map(|a| format!("n{a}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    s.push_str(&res.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
    s.push('\n');
    for row in f.values.chunks(res[0]) {
        s.push_str(&row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

/// Inverse of [`raster_to_csv`] on a given window.
pub fn raster_from_csv(text: &str, window: &Window) -> Result<GridField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let _header = lines.next().ok_or_else(|| Error::Parse("empty raster".into()))?;
    let res = lines
        .next()
        .ok_or_else(|| Error::Parse("raster lacks its size line".into()))?
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad raster size {v:?}"))))
        .collect::<Result<Vec<usize>>>()?;
    let mut values = Vec::new();
    for l in lines {
        for v in l.split(',') {
            values.push(v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad raster value {v:?}")))?);
        }
    }
    GridField::new(GridLayout::new(window.clone(), res)?, values)
}

/// 8-bit binary PGM of a 2-d raster scaled from [lo, hi]; the top row is
/// the largest y.
pub fn raster_to_pgm(f: &GridField, lo: f64, hi: f64) -> Result<Vec<u8>> {
    let res = &f.layout.resolution;
    if res.len() != 2 {
        return Err(Error::UnsupportedDimension(res.len()));
    }
    let (nx, ny) = (res[0], res[1]);
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    for j in (0..ny).rev() {
        for i in 0..nx {
            let v = ((f.values[j * nx + i] - lo) / span).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn pattern_round_trip() {
        let w = Window::new(&[0.0, -1.0], &[2.0, 1.0]).unwrap();
        let mut rng = rng_from_seed(1);
        let p = PointPattern::new(w.clone(), (0..25).map(|_| w.uniform_point(&mut rng)).collect()).unwrap();
        let s = pattern_to_csv(&p);
        assert!(s.starts_with("x,y\n"));
        let q = pattern_from_csv(&s, &w).unwrap();
        assert_eq!(p.points(), q.points());
    }

    #[test]
    fn pattern_errors() {
        let w = Window::unit(2).unwrap();
        assert!(matches!(pattern_from_csv("x,y,z\n0.1,0.2,0.3\n", &w), Err(Error::Parse(_))));
        assert!(matches!(pattern_from_csv("x,y\n0.1,abc\n", &w), Err(Error::Parse(_))));
        assert!(pattern_from_csv("x,y\n1.5,0.5\n", &w).is_err());
        assert_eq!(pattern_from_csv("x,y\n", &w).unwrap().len(), 0);
    }

    #[test]
    fn raster_round_trip() {
        let w = Window::unit(2).unwrap();
        let layout = GridLayout::new(w.clone(), vec![3, 2]).unwrap();
        let f = GridField::new(layout, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125]).unwrap();
        let s = raster_to_csv(&f);
        assert!(s.starts_with("nx,ny\n3,2\n"));
        assert_eq!(raster_from_csv(&s, &w).unwrap(), f);
        let pgm = raster_to_pgm(&f, 0.0, 1.0).unwrap();
        assert_eq!(pgm.len(), "P5\n3 2\n255\n".len() + 6);
        assert_eq!(*pgm.last().unwrap(), 128);
    }
}
