//! Binary and CSV serialization of fields and spectra.
//!
//! Binary layout (little endian, 40-byte header followed by data):
//!
//! | bytes  | content                                         |
//! |--------|-------------------------------------------------|
//! | 0..4   | magic `BLSC`                                    |
//! | 4      | format version (1)                              |
//! | 5      | kind: 0 = field, 1 = spectrum                   |
//! | 6      | dimension `d`                                   |
//! | 7      | reserved (0)                                    |
//! | 8..12  | `n` as `u32`                                    |
//! | 12..16 | reserved (0)                                    |
//! | 16..24 | half-width `ℓ` as `f64`                         |
//! | 24..28 | convention tag `2PI\0`                          |
//! | 28..32 | reserved (0)                                    |
//! | 32..40 | time `t` as `f64`                               |
//!
//! Data are `n^d` pairs `(re, im)` of `f64` in storage order: lexicographic in
//! the spatial index for fields (`x_j = -ℓ + j·2ℓ/n`), lexicographic in the
//! FFT-ordered index for spectra (`ξ = k/(2ℓ)`, `e^{-2πi x·ξ}` kernel).

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{Field, Grid, Spectrum};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"BLSC";
pub const VERSION: u8 = 1;
pub const CONVENTION_TAG: [u8; 4] = *b"2PI\0";
pub const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Field,
    Spectrum,
}

impl Kind {
    fn code(self) -> u8 {
        match self {
            Kind::Field => 0,
            Kind::Spectrum => 1,
        }
    }
}

fn header(kind: Kind, grid: &Grid, t: f64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4] = VERSION;
    h[5] = kind.code();
    h[6] = grid.dim() as u8;
    h[8..12].copy_from_slice(&(grid.n() as u32).to_le_bytes());
    h[16..24].copy_from_slice(&grid.half_width().to_le_bytes());
    h[24..28].copy_from_slice(&CONVENTION_TAG);
    h[32..40].copy_from_slice(&t.to_le_bytes());
    h
}

fn write_data<W: Write>(w: &mut W, values: &[Complex64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 16);
    for z in values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_all<R: Read>(r: &mut R, expected: Kind) -> Result<(Grid, f64, Vec<Complex64>)> {
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h)?;
    if h[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if h[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", h[4])));
    }
    if h[5] != expected.code() {
        return Err(Error::Format(format!(
            "expected kind {:?}, found code {}",
            expected, h[5]
        )));
    }
    if h[24..28] != CONVENTION_TAG {
        return Err(Error::Format("missing 2PI convention tag".into()));
    }
    let dim = h[6] as usize;
    let n = u32::from_le_bytes(h[8..12].try_into().unwrap()) as usize;
    let half_width = f64::from_le_bytes(h[16..24].try_into().unwrap());
    let t = f64::from_le_bytes(h[32..40].try_into().unwrap());
    let grid = Grid::new(dim, n, half_width)?;
    let mut raw = vec![0u8; grid.len() * 16];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((grid, t, values))
}

pub fn write_field<W: Write>(w: &mut W, f: &Field, t: f64) -> Result<()> {
    w.write_all(&header(Kind::Field, f.grid(), t))?;
    write_data(w, f.values())
}

/// Reads a field and its time stamp.
pub fn read_field<R: Read>(r: &mut R) -> Result<(Field, f64)> {
    let (grid, t, values) = read_all(r, Kind::Field)?;
    Ok((Field::new(grid, values)?, t))
}

pub fn write_spectrum<W: Write>(w: &mut W, s: &Spectrum, t: f64) -> Result<()> {
    w.write_all(&header(Kind::Spectrum, s.grid(), t))?;
    write_data(w, s.coeffs())
}

pub fn read_spectrum<R: Read>(r: &mut R) -> Result<(Spectrum, f64)> {
    let (grid, t, values) = read_all(r, Kind::Spectrum)?;
    Ok((Spectrum::new(grid, values)?, t))
}

/// CSV with columns `index, x (x0, x1 in 2D), re, im`.
pub fn write_field_csv<W: Write>(w: &mut W, f: &Field) -> Result<()> {
    let grid = f.grid();
    if grid.dim() == 1 {
        writeln!(w, "index,x,re,im")?;
    } else {
        writeln!(w, "index,x0,x1,re,im")?;
    }
    for (i, z) in f.values().iter().enumerate() {
        let x = grid.position(i);
        if grid.dim() == 1 {
            writeln!(w, "{i},{},{},{}", x[0], z.re, z.im)?;
        } else {
            writeln!(w, "{i},{},{},{},{}", x[0], x[1], z.re, z.im)?;
        }
    }
    Ok(())
}

/// CSV with columns `index, xi (xi0, xi1 in 2D), re, im`, in storage order.
pub fn write_spectrum_csv<W: Write>(w: &mut W, s: &Spectrum) -> Result<()> {
    let grid = s.grid();
    if grid.dim() == 1 {
        writeln!(w, "index,xi,re,im")?;
    } else {
        writeln!(w, "index,xi0,xi1,re,im")?;
    }
    for (i, z) in s.coeffs().iter().enumerate() {
        let xi = grid.frequency(i);
        if grid.dim() == 1 {
            writeln!(w, "{i},{},{},{}", xi[0], z.re, z.im)?;
        } else {
            writeln!(w, "{i},{},{},{},{}", xi[0], xi[1], z.re, z.im)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::forward_transform;

    fn sample(dim: usize) -> Field {
        let g = Grid::new(dim, 8, 1.5).unwrap();
        Field::from_fn(g, |x| Complex64::new(x[0] - 0.25 * x[1], x[0] * x[1] + 1.0)).unwrap()
    }

    #[test]
    fn field_round_trip_is_bit_exact() {
        for dim in [1, 2] {
            let f = sample(dim);
            let mut buf = Vec::new();
            write_field(&mut buf, &f, 0.375).unwrap();
            assert_eq!(buf.len(), HEADER_LEN + 16 * f.grid().len());
            assert_eq!(&buf[24..27], b"2PI");
            let (back, t) = read_field(&mut buf.as_slice()).unwrap();
            assert_eq!(back, f);
            assert_eq!(t, 0.375);
        }
    }

    #[test]
    fn spectrum_round_trip_and_kind_check() {
        let s = forward_transform(&sample(2)).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &s, 1.0).unwrap();
        assert!(read_field(&mut buf.as_slice()).is_err());
        let (back, _) = read_spectrum(&mut buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let mut buf = Vec::new();
        write_field(&mut buf, &sample(1), 0.0).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_field(&mut bad.as_slice()), Err(Error::Format(_))));
        let truncated = &buf[..buf.len() - 1];
        assert!(read_field(&mut &truncated[..]).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        write_field_csv(&mut out, &sample(1)).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,x,re,im"));
        assert_eq!(lines.next(), Some("0,-1.5,-1.5,1"));
        assert_eq!(text.lines().count(), 9);
    }
}
