//! Binary parameter checkpoints.
//!
//! Layout (little-endian): magic `IGPOCKPT`, `u32` version, then `u64`
//! vocab, window, embed, hidden, seed and parameter count, then the
//! parameters as `f64` in canonical order.

use std::io::{Read, Write};
use std::path::Path;

use super::params::{PolicyParams, PolicyShape};
use crate::error::{IgpoError, Result};

const MAGIC: &[u8; 8] = b"IGPOCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, params: &PolicyParams) -> std::io::Result<()> {
    let s = params.shape();
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for x in [s.vocab, s.window, s.embed, s.hidden] {
        out.write_all(&(x as u64).to_le_bytes())?;
    }
    out.write_all(&params.seed().to_le_bytes())?;
    out.write_all(&(params.as_slice().len() as u64).to_le_bytes())?;
    for x in params.as_slice() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input
        .read_exact(&mut b)
        .map_err(|e| IgpoError::format("checkpoint", e.to_string()))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<PolicyParams> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|e| IgpoError::format("checkpoint", e.to_string()))?;
    if &magic != MAGIC {
        return Err(IgpoError::format("checkpoint", "bad magic"));
    }
    let mut v = [0u8; 4];
    input
        .read_exact(&mut v)
        .map_err(|e| IgpoError::format("checkpoint", e.to_string()))?;
    let version = u32::from_le_bytes(v);
    if version != CHECKPOINT_VERSION {
        return Err(IgpoError::format(
            "checkpoint",
            format!("unsupported version {version}"),
        ));
    }
    let shape = PolicyShape {
        vocab: read_u64(&mut input)? as usize,
        window: read_u64(&mut input)? as usize,
        embed: read_u64(&mut input)? as usize,
        hidden: read_u64(&mut input)? as usize,
    };
    shape.validate()?;
    let seed = read_u64(&mut input)?;
    let count = read_u64(&mut input)? as usize;
    if count != shape.num_params() {
        return Err(IgpoError::format(
            "checkpoint",
            format!("header declares {count} parameters, shape needs {}", shape.num_params()),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(f64::from_bits(read_u64(&mut input)?));
    }
    let mut rest = [0u8; 1];
    if input
        .read(&mut rest)
        .map_err(|e| IgpoError::format("checkpoint", e.to_string()))?
        != 0
    {
        return Err(IgpoError::format("checkpoint", "trailing bytes"));
    }
    PolicyParams::from_raw(shape, seed, data)
}

pub fn save(path: &Path, params: &PolicyParams) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| IgpoError::io(path, e))?;
    write_checkpoint(std::io::BufWriter::new(file), params).map_err(|e| IgpoError::io(path, e))
}

pub fn load(path: &Path) -> Result<PolicyParams> {
    let file = std::fs::File::open(path).map_err(|e| IgpoError::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), scale in 0.01f64..3.0) {
            let shape = PolicyShape { vocab: 13, window: 3, embed: 2, hidden: 5 };
            let mut p = PolicyParams::init(shape, seed, scale);
            p.as_mut_slice()[0] = -0.0;
            p.as_mut_slice()[1] = f64::MIN_POSITIVE / 3.0;
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &p).unwrap();
            let back = read_checkpoint(buf.as_slice()).unwrap();
            prop_assert_eq!(back.shape(), p.shape());
            prop_assert_eq!(back.seed(), seed);
            let bits = |q: &PolicyParams| q.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&p));
        }
    }

    #[test]
    fn rejects_truncated_and_corrupt_files() {
        let p = PolicyParams::init(
            PolicyShape {
                vocab: 12,
                window: 2,
                embed: 2,
                hidden: 3,
            },
            1,
            1.0,
        );
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut long = buf;
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
    }
}
