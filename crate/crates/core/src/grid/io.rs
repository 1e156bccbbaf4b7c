//! Binary field dumps and CSV exports.
//!
//! Binary layout, little-endian: the 8-byte magic `SPINFLD1`, then
//! `n_active`, `n_interior`, `n_half` as `u64`, then `h`, `r_max`, `r_min`
//! as `f64`, then for every active node in index order the real and
//! imaginary parts of its four components.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{BallGrid, DiscreteSpinorField, GridFingerprint};
use crate::geometry::{scalar_curvature, curvature, ChartMetric};
use crate::spin::Spinor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPINFLD1";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_field<W: Write>(grid: &BallGrid, field: &DiscreteSpinorField, w: W) -> Result<()> {
    field.ensure(grid)?;
    let mut w = BufWriter::new(w);
    w.write_all(MAGIC)?;
    for n in [grid.n_active(), grid.n_interior(), grid.n_half] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in [grid.h, grid.r_max, grid.r_min] {
        w.write_all(&v.to_le_bytes())?;
    }
    for s in &field.values {
        for c in s.iter() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_field(grid: &BallGrid, field: &DiscreteSpinorField, path: &Path) -> Result<()> {
    write_field(grid, field, std::fs::File::create(path)?)
}

/// A decoded dump: the fingerprint, the half-width recorded in the header
/// and the node values.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub n_half: usize,
    pub field: DiscreteSpinorField,
}

impl FieldDump {
    /// Attaches the dump to `grid`, failing if the grid parameters differ.
    pub fn into_field(self, grid: &BallGrid) -> Result<DiscreteSpinorField> {
        if self.n_half != grid.n_half {
            return Err(Error::Format(format!(
                "dump has half-width {}, grid has {}",
                self.n_half, grid.n_half
            )));
        }
        self.field.ensure(grid)?;
        Ok(self.field)
    }
}

pub fn read_field<R: Read>(r: R) -> Result<FieldDump> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a spinor field dump".into()));
    }
    let mut b = [0u8; 8];
    let mut u = || -> Result<u64> {
        r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
        Ok(u64::from_le_bytes(b))
    };
    let n_active = u()? as usize;
    let n_interior = u()? as usize;
    let n_half = u()? as usize;
    let h = f64::from_bits(u()?);
    let r_max = f64::from_bits(u()?);
    let r_min = f64::from_bits(u()?);
    if n_interior > n_active {
        return Err(Error::Format(format!(
            "interior count {n_interior} exceeds active count {n_active}"
        )));
    }
    let mut values = Vec::with_capacity(n_active.min(1 << 24));
    let mut buf = [0u8; 64];
    for i in 0..n_active {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("truncated body at node {i} of {n_active}")))?;
        let f = |k: usize| f64::from_le_bytes(buf[8 * k..8 * k + 8].try_into().expect("8 bytes"));
        values.push(Spinor::new(
            Complex64::new(f(0), f(1)),
            Complex64::new(f(2), f(3)),
            Complex64::new(f(4), f(5)),
            Complex64::new(f(6), f(7)),
        ));
    }
    if r.fill_buf()?.is_empty() {
        Ok(FieldDump {
            n_half,
            field: DiscreteSpinorField {
                grid: GridFingerprint { h, r_max, r_min, n_interior, n_active },
                values,
            },
        })
    } else {
        Err(Error::Format("trailing bytes after field body".into()))
    }
}

pub fn load_field(path: &Path) -> Result<FieldDump> {
    read_field(std::fs::File::open(path)?)
}

/// Writes the nodes of the plane `z = z0` (nearest layer) as CSV with
/// columns `x,y,z,class,density,re0,im0,...,re3,im3`.
pub fn write_slice_csv<W: Write>(grid: &BallGrid, field: &DiscreteSpinorField, z0: f64, w: W) -> Result<usize> {
    field.ensure(grid)?;
    let k = ((z0 / grid.h) + grid.n_half as f64 - 0.5).round();
    let mut w = BufWriter::new(w);
    writeln!(w, "x,y,z,class,density,re0,im0,re1,im1,re2,im2,re3,im3")?;
    let mut rows = 0;
    for (p, s) in field.values.iter().enumerate() {
        if grid.cell(p)[2] as f64 != k {
            continue;
        }
        let x = grid.position(p);
        let class = if p < grid.n_interior() { "interior" } else { "shell" };
        let mut line = format!("{},{},{},{class},{}", fmt(x.x), fmt(x.y), fmt(x.z), fmt(s.norm_squared()));
        for c in s.iter() {
            line.push(',');
            line.push_str(&fmt(c.re));
            line.push(',');
            line.push_str(&fmt(c.im));
        }
        writeln!(w, "{line}")?;
        rows += 1;
    }
    w.flush()?;
    Ok(rows)
}

/// Writes `x,y,z,R,K` at every point, after a `#` header naming the family
/// and its parameters.
pub fn write_curvature_csv<M: ChartMetric + ?Sized, W: Write>(
    metric: &M,
    parameters: &str,
    points: &[crate::Point],
    w: W,
) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "# family={} {parameters}", metric.family())?;
    writeln!(w, "x,y,z,R,K")?;
    for x in points {
        let r = scalar_curvature(metric, x)?;
        let k = curvature(metric, x, false)?.kretschmann;
        writeln!(w, "{},{},{},{},{}", fmt(x.x), fmt(x.y), fmt(x.z), fmt(r), fmt(k))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn binary_round_trip() {
        let g = build_grid(0.25, 2.5).unwrap();
        let f = DiscreteSpinorField::from_fn(&g, |x| {
            Spinor::new(
                Complex64::new(x.x, 0.1),
                Complex64::new(x.y, -x.z),
                Complex64::new(1.0 / 3.0, x.norm()),
                Complex64::new(-2.0, 1e-300),
            )
        });
        let mut bytes = Vec::new();
        write_field(&g, &f, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 48 + 64 * g.n_active());
        let back = read_field(&bytes[..]).unwrap().into_field(&g).unwrap();
        assert_eq!(back, f);
        assert!(read_field(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_field(&bad[..]).is_err());
    }

    #[test]
    fn slice_contains_the_central_layer() {
        let g = build_grid(0.25, 2.5).unwrap();
        let f = DiscreteSpinorField::constant(&g, Spinor::new(Complex64::new(1.0, 0.0), 0.0.into(), 0.0.into(), 0.0.into()));
        let mut out = Vec::new();
        let rows = write_slice_csv(&g, &f, 0.1, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), rows + 1);
        assert!(rows > 100);
        assert!(text.lines().skip(1).all(|l| l.split(',').nth(2).unwrap().starts_with("1.25")));
    }
}
