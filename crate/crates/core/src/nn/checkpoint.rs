//! Network checkpoint format.
//!
//! Layout (all integers little-endian):
//!   magic   8 bytes  "FBQNET1\n"
//!   arch    u8 (0 small, 1 big)     head u8 (0 single, 1 dueling)
//!   rows    u32   cols u32   in_channels u32
//!   count   u32
//!   per tensor: name_len u32, name bytes, ndim u32, dims u32 each,
//!               data f64 bits, numel entries
//! The same primitive readers and writers back the demonstration and
//! run-state files.

use std::fs;
use std::path::Path;

use super::qnet::{Arch, HeadKind, QNetwork};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::files::write_atomic;

const MAGIC: &[u8; 8] = b"FBQNET1\n";

pub(crate) fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], path: &'a Path) -> Self {
        Reader { buf, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::parse(self.path, 0, "unexpected end of file"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::parse(self.path, 0, "invalid utf-8 in string field"))
    }

    pub fn magic(&mut self, expected: &[u8]) -> Result<()> {
        let got = self.take(expected.len())?;
        if got != expected {
            return Err(Error::parse(self.path, 0, "bad magic: not this file format"));
        }
        Ok(())
    }

    pub fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::parse(self.path, 0, "trailing bytes after payload"));
        }
        Ok(())
    }
}

pub(crate) fn put_tensor(buf: &mut Vec<u8>, name: &str, t: &Tensor) {
    put_str(buf, name);
    put_u32(buf, t.shape().len() as u32);
    for &d in t.shape() {
        put_u32(buf, d as u32);
    }
    for &v in t.data() {
        put_f64(buf, v);
    }
}

pub(crate) fn read_tensor(r: &mut Reader) -> Result<(String, Tensor)> {
    let name = r.str()?;
    let ndim = r.u32()? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(r.u32()? as usize);
    }
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    for _ in 0..numel {
        data.push(r.f64()?);
    }
    Ok((name, Tensor::from_vec(shape, data)))
}

/// Appends a complete network (architecture header + named tensors) to `buf`.
pub(crate) fn put_network(buf: &mut Vec<u8>, net: &QNetwork) {
    buf.push(match net.arch {
        Arch::Small => 0,
        Arch::Big => 1,
    });
    buf.push(match net.head {
        HeadKind::Single => 0,
        HeadKind::Dueling => 1,
    });
    put_u32(buf, net.rows as u32);
    put_u32(buf, net.cols as u32);
    put_u32(buf, net.in_channels as u32);
    let names = net.param_names();
    let params = net.params();
    put_u32(buf, params.len() as u32);
    for (name, t) in names.iter().zip(params) {
        put_tensor(buf, name, t);
    }
}

pub(crate) fn read_network(r: &mut Reader, path: &Path) -> Result<QNetwork> {
    let arch = match r.u8()? {
        0 => Arch::Small,
        1 => Arch::Big,
        v => return Err(Error::parse(path, 0, format!("unknown arch tag {v}"))),
    };
    let head = match r.u8()? {
        0 => HeadKind::Single,
        1 => HeadKind::Dueling,
        v => return Err(Error::parse(path, 0, format!("unknown head tag {v}"))),
    };
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let in_channels = r.u32()? as usize;
    let count = r.u32()? as usize;

    let mut net = QNetwork::new(arch, head, rows, cols, in_channels, 0)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let expected_names = net.param_names();
    if count != expected_names.len() {
        return Err(Error::parse(
            path,
            0,
            format!("expected {} tensors, file has {}", expected_names.len(), count),
        ));
    }
    for (i, dst) in net.params_mut().into_iter().enumerate() {
        let (name, t) = read_tensor(r)?;
        if name != expected_names[i] {
            return Err(Error::parse(
                path,
                0,
                format!("tensor {i}: expected name {}, got {name}", expected_names[i]),
            ));
        }
        if t.shape() != dst.shape() {
            return Err(Error::parse(path, 0, format!("tensor {name}: shape mismatch")));
        }
        dst.copy_from(&t);
    }
    Ok(net)
}

pub fn save_network(path: &Path, net: &QNetwork) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_network(&mut buf, net);
    write_atomic(path, &buf)
}

pub fn load_network(path: &Path) -> Result<QNetwork> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(MAGIC)?;
    let net = read_network(&mut r, path)?;
    r.done()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_parameters_bitwise() {
        let dir = std::env::temp_dir().join("fb_ckpt_test");
        let path = dir.join("net.ckpt");
        let net = QNetwork::new(Arch::Small, HeadKind::Dueling, 6, 6, 3, 321).unwrap();
        save_network(&path, &net).unwrap();
        let back = load_network(&path).unwrap();
        assert!(back.same_architecture(&net));
        for (a, b) in net.params().iter().zip(back.params()) {
            assert_eq!(a.data(), b.data());
        }
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = std::env::temp_dir().join("fb_ckpt_trunc");
        let path = dir.join("net.ckpt");
        let net = QNetwork::new(Arch::Small, HeadKind::Single, 4, 4, 2, 1).unwrap();
        save_network(&path, &net).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_network(&path).is_err());
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = std::env::temp_dir().join("fb_ckpt_magic");
        let path = dir.join("net.ckpt");
        fs::create_dir_all(&dir).unwrap();
        fs::write(&path, b"NOTMAGIC").unwrap();
        assert!(load_network(&path).is_err());
        fs::remove_dir_all(&dir).ok();
    }
}
