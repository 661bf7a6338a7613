//! Plain-text density-matrix format.
//!
//! ```text
//! dm 2
//! 0.5 0 0 0
//! 0 0 0.5 0
//! ```
//!
//! The header gives the dimension `n`; each of the following `n` lines holds
//! `2n` floats, the real and imaginary parts of one row. Values are written in
//! shortest round-trip form, so reading back reproduces every bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ComplexMatrix, C64};
use crate::error::{Error, Result};

pub fn format_density_matrix(m: &ComplexMatrix) -> Result<String> {
    let n = m.require_square()?;
    let mut out = format!("dm {n}\n");
    for r in 0..n {
        for c in 0..n {
            let v = m[(r, c)];
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{:?} {:?}", v.re, v.im).expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_density_matrix(text: &str) -> Result<ComplexMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input, expected `dm <n>`".into(),
    })?;
    let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["dm", n] => n.parse::<usize>().map_err(|_| Error::Parse {
            line,
            msg: format!("bad dimension `{n}`"),
        })?,
        _ => {
            return Err(Error::Parse {
                line,
                msg: format!("expected `dm <n>`, found `{header}`"),
            })
        }
    };
    if n == 0 {
        return Err(Error::Parse { line, msg: "dimension must be positive".into() });
    }

    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        let (line, text) = lines.next().ok_or(Error::Parse {
            line: line + row + 1,
            msg: format!("expected {n} rows, found {row}"),
        })?;
        let nums = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad number `{tok}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != 2 * n {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} numbers, found {}", 2 * n, nums.len()),
            });
        }
        data.extend(nums.chunks(2).map(|p| C64::new(p[0], p[1])));
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse { line, msg: "trailing content after matrix".into() });
    }
    ComplexMatrix::from_vec(n, n, data)
}

pub fn write_density_matrix(path: impl AsRef<Path>, m: &ComplexMatrix) -> Result<()> {
    fs::write(path, format_density_matrix(m)?)?;
    Ok(())
}

pub fn read_density_matrix(path: impl AsRef<Path>) -> Result<ComplexMatrix> {
    parse_density_matrix(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = ComplexMatrix::from_fn(5, 5, |_, _| C64::new(rng.gen::<f64>() * 1e-7, -rng.gen::<f64>() * 3e5));
        let back = parse_density_matrix(&format_density_matrix(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn reads_hand_written_file() {
        let m = parse_density_matrix("dm 2\n0.5 0 0 0\n\n0 0 0.5 0\n").unwrap();
        assert_eq!(m, ComplexMatrix::identity(2).scale_real(0.5));
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_density_matrix("dm 2\n0.5 0 0 0\n0 0 x 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_density_matrix("dm 2\n0.5 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_density_matrix("matrix 2").is_err());
    }
}
