//! Binary machine snapshots.
//!
//! Layout (little endian): magic `NUTMCKPT`, `u32` version, `u64`
//! iteration, `u32` length + machine config text, `u32` parameter count,
//! then per parameter `u32` length + name, `u32` rank, `u64` dims, `f64`
//! data.

use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::Array;
use crate::error::{NutmError, Result};
use crate::machine::{Machine, MachineConfig};

const MAGIC: &[u8; 8] = b"NUTMCKPT";
const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> NutmError {
    NutmError::Checkpoint(msg.into())
}

pub fn encode(machine: &Machine, iteration: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(iteration as u64).to_le_bytes());
    let text = machine.config().to_text();
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(machine.params().len() as u32).to_le_bytes());
    for (name, value) in machine.params().iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.rank() as u32).to_le_bytes());
        for &d in value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("string is not UTF-8"))
    }
}

/// Decodes a snapshot into a machine and the iteration it was taken at.
pub fn decode(bytes: &[u8]) -> Result<(Machine, usize)> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8).map_err(|_| bad("not a checkpoint"))? != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let iteration = c.u64()? as usize;
    let config = MachineConfig::from_text(&c.string()?)?;
    let mut machine = Machine::build(config, 0)?;
    let count = c.u32()? as usize;
    if count != machine.params().len() {
        return Err(bad(format!(
            "checkpoint has {count} tensors, config implies {}",
            machine.params().len()
        )));
    }
    for _ in 0..count {
        let name = c.string()?;
        let rank = c.u32()? as usize;
        let shape = (0..rank)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = c.take(n.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let id = machine
            .params()
            .find(&name)
            .ok_or_else(|| bad(format!("unknown tensor {name:?}")))?;
        if machine.params().get(id).shape() != shape.as_slice() {
            return Err(bad(format!(
                "tensor {name:?} has shape {shape:?}, expected {:?}",
                machine.params().get(id).shape()
            )));
        }
        *machine.params_mut().get_mut(id) = Array::new(shape, data)?;
    }
    if c.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((machine, iteration))
}

pub fn save(path: &Path, machine: &Machine, iteration: usize) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(machine, iteration))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Machine, usize)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
