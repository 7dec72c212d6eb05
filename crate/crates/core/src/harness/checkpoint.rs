//! Binary state files: an ASCII header `ELCP1 nx ny m t` and newline, then
//! little-endian f64 arrays (x-faces, y-faces, pressure, director by
//! component), each row-major.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryCondition, CellField, FaceField, Grid, State};

const MAGIC: &str = "ELCP1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointHeader {
    pub nx: usize,
    pub ny: usize,
    pub m: usize,
    pub t: f64,
}

impl CheckpointHeader {
    fn payload_len(&self) -> usize {
        let (nx, ny) = (self.nx, self.ny);
        8 * ((nx + 1) * ny + nx * (ny + 1) + nx * ny + self.m * nx * ny)
    }
}

pub fn encode(state: &State) -> Vec<u8> {
    let (nx, ny, m) = (state.d.nx(), state.d.ny(), state.d.ncomp());
    let mut out = format!("{MAGIC} {nx} {ny} {m} {:?}\n", state.t).into_bytes();
    let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
    for j in 0..ny {
        for i in 0..=nx {
            put(state.u.x(i, j));
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            put(state.u.y(i, j));
        }
    }
    for v in state.pi.interior() {
        put(v);
    }
    for v in state.d.interior() {
        put(v);
    }
    out
}

pub fn parse_header(bytes: &[u8]) -> Result<(CheckpointHeader, usize)> {
    let end = bytes
        .iter()
        .take(256)
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("no header line".into()))?;
    let line = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let fields: Vec<&str> = line.split(' ').collect();
    if fields.len() != 5 || fields[0] != MAGIC {
        return Err(Error::MalformedHeader(format!("expected `{MAGIC} nx ny m t`, got {line:?}")));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| Error::MalformedHeader(format!("bad integer {s:?}")));
    let (nx, ny, m) = (int(fields[1])?, int(fields[2])?, int(fields[3])?);
    let t: f64 = fields[4].parse().map_err(|_| Error::MalformedHeader(format!("bad time {:?}", fields[4])))?;
    if !t.is_finite() {
        return Err(Error::MalformedHeader(format!("time {t} is not finite")));
    }
    if m != 2 && m != 3 {
        return Err(Error::UnsupportedDirectorDimension(m));
    }
    if nx < 4 || ny < 4 {
        return Err(Error::GridTooCoarse { nx, ny });
    }
    Ok((CheckpointHeader { nx, ny, m, t }, end + 1))
}

/// Decode against `grid`, which supplies the edge lengths.
pub fn decode(bytes: &[u8], grid: &Grid) -> Result<State> {
    let (h, start) = parse_header(bytes)?;
    if (h.nx, h.ny, h.m) != (grid.nx(), grid.ny(), grid.m()) {
        return Err(Error::DimensionMismatch {
            found: format!("{}x{} m={}", h.nx, h.ny, h.m),
            expected: format!("{}x{} m={}", grid.nx(), grid.ny(), grid.m()),
        });
    }
    let payload = &bytes[start..];
    let want = h.payload_len();
    if payload.len() < want {
        return Err(Error::TruncatedPayload { expected: want, found: payload.len() });
    }
    if payload.len() > want {
        return Err(Error::TrailingBytes(payload.len() - want));
    }
    let mut vals = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let (nx, ny, m) = (h.nx, h.ny, h.m);
    let mut u = FaceField::zeros(grid);
    for j in 0..ny {
        for i in 0..=nx {
            u.set_x(i, j, vals.next().expect("sized"));
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            u.set_y(i, j, vals.next().expect("sized"));
        }
    }
    let pi_vals: Vec<f64> = vals.by_ref().take(nx * ny).collect();
    let mut pi = CellField::from_interior(nx, ny, 1, &pi_vals)?;
    let d_vals: Vec<f64> = vals.collect();
    let mut d = CellField::from_interior(nx, ny, m, &d_vals)?;
    u.fill_ghosts(BoundaryCondition::NoSlip);
    pi.fill_ghosts(BoundaryCondition::Neumann);
    d.fill_ghosts(BoundaryCondition::Neumann);
    Ok(State { u, pi, d, t: h.t })
}

/// Written to a sibling temporary file and renamed into place.
pub fn checkpoint_write(state: &State, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode(state))?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn checkpoint_read(path: &Path, grid: &Grid) -> Result<State> {
    decode(&std::fs::read(path)?, grid)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mesh::GridSpec;

    fn random_state(g: &Grid, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = FaceField::zeros(g);
        for j in 0..g.ny() {
            for i in 1..g.nx() {
                u.set_x(i, j, rng.random_range(-1.0..1.0));
            }
        }
        for j in 1..g.ny() {
            for i in 0..g.nx() {
                u.set_y(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let d = CellField::from_fn(g, g.m(), |_, _, v| v.iter_mut().for_each(|x| *x = rng.random::<f64>()));
        let mut s = State::new(g, u, d, rng.random::<f64>() * 7.0).unwrap();
        s.pi = CellField::from_fn(g, 1, |_, _, v| v[0] = rng.random_range(-1e-3..1e3));
        s.pi.fill_ghosts(BoundaryCondition::Neumann);
        s
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for (nx, ny, m) in [(4, 4, 2), (7, 5, 3), (16, 16, 2)] {
            let g = Grid::new(GridSpec::new(nx, ny, 1.0, 1.0, m)).unwrap();
            let s = random_state(&g, nx as u64);
            let p = dir.path().join(format!("s{nx}.elcp"));
            checkpoint_write(&s, &p).unwrap();
            let r = checkpoint_read(&p, &g).unwrap();
            assert!(r.bitwise_eq(&s));
            assert_eq!(r, s);
        }
    }

    #[test]
    fn distinct_errors() {
        let g = Grid::new(GridSpec::unit_square(6, 2)).unwrap();
        let bytes = encode(&random_state(&g, 1));
        let truncated = &bytes[..bytes.len() - 3];
        let e = decode(truncated, &g).unwrap_err();
        assert!(e.to_string().contains("truncated payload"), "{e}");
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 8]);
        assert!(matches!(decode(&long, &g), Err(Error::TrailingBytes(8))));
        let m4 = String::from_utf8_lossy(&bytes).replacen("ELCP1 6 6 2", "ELCP1 6 6 4", 1);
        let e = decode(m4.as_bytes(), &g).unwrap_err();
        assert!(matches!(e, Error::UnsupportedDirectorDimension(4)));
        assert!(e.to_string().contains("unsupported director dimension"));
        let other = Grid::new(GridSpec::unit_square(8, 2)).unwrap();
        assert!(matches!(decode(&bytes, &other), Err(Error::DimensionMismatch { .. })));
        for junk in [&b"ELCP2 6 6 2 0\n"[..], b"ELCP1 6 6 2\n", b"ELCP1 a 6 2 0\n", b"no newline", b"ELCP1 6 6 2 nan\n"] {
            assert!(matches!(decode(junk, &g), Err(Error::MalformedHeader(_))), "{:?}", String::from_utf8_lossy(junk));
        }
    }
}
