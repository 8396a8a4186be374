//! On-disk formats: TEN1 tensor containers, CKP1 checkpoints, EVT1 event
//! streams and the CSV debug form of an event stream.
//!
//! All integers are little-endian. TEN1: magic "TEN1", u32 rank, `rank` u32
//! dims, then the raw f32 payload. CKP1: magic "CKP1", u32 entry count, then
//! per entry a u16 name length, the UTF-8 name and an embedded TEN1 record.
//! EVT1: magic "EVT1", u16 width, u16 height, u64 event count, then packed
//! records (u64 t_us, u16 x, u16 y, i8 p, u8 pad).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::events::{Event, EventStream};
use crate::tensor::Tensor;

fn wrap_io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_u16(r: &mut impl Read) -> std::io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

// ---------------------------------------------------------------------------
// TEN1
// ---------------------------------------------------------------------------

pub fn write_tensor_record(w: &mut impl Write, shape: &[usize], data: &[f32]) -> std::io::Result<()> {
    assert_eq!(shape.iter().product::<usize>(), data.len());
    w.write_all(b"TEN1")?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor_record(r: &mut impl Read) -> std::io::Result<(Vec<usize>, Vec<f32>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"TEN1" {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "bad TEN1 magic",
        ));
    }
    let rank = read_u32(r)? as usize;
    if rank > 8 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("implausible tensor rank {rank}"),
        ));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    let n: usize = shape.iter().product();
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    let data = buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((shape, data))
}

pub fn write_tensor_file(path: &Path, shape: &[usize], data: &[f32]) -> Result<()> {
    let mut w = BufWriter::new(wrap_io(path, File::create(path))?);
    wrap_io(path, write_tensor_record(&mut w, shape, data))?;
    wrap_io(path, w.flush())
}

pub fn read_tensor_file(path: &Path) -> Result<(Vec<usize>, Vec<f32>)> {
    let mut r = BufReader::new(wrap_io(path, File::open(path))?);
    wrap_io(path, read_tensor_record(&mut r))
}

// ---------------------------------------------------------------------------
// CKP1
// ---------------------------------------------------------------------------

pub fn write_checkpoint(path: &Path, entries: &[(String, Tensor<f32>)]) -> Result<()> {
    let mut w = BufWriter::new(wrap_io(path, File::create(path))?);
    let go = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(b"CKP1")?;
        w.write_all(&(entries.len() as u32).to_le_bytes())?;
        for (name, tensor) in entries {
            let bytes = name.as_bytes();
            w.write_all(&(bytes.len() as u16).to_le_bytes())?;
            w.write_all(bytes)?;
            write_tensor_record(w, tensor.shape(), &tensor.data())?;
        }
        w.flush()
    };
    wrap_io(path, go(&mut w))
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut r = BufReader::new(wrap_io(path, File::open(path))?);
    let go = |r: &mut BufReader<File>| -> std::io::Result<Vec<(String, Tensor<f32>)>> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CKP1" {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "bad CKP1 magic",
            ));
        }
        let count = read_u32(r)? as usize;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u16(r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, "non-UTF-8 entry name")
            })?;
            let (shape, data) = read_tensor_record(r)?;
            let tensor = Tensor::from_vec(&shape, data).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())
            })?;
            out.push((name, tensor));
        }
        Ok(out)
    };
    wrap_io(path, go(&mut r))
}

// ---------------------------------------------------------------------------
// EVT1
// ---------------------------------------------------------------------------

pub fn write_events(path: &Path, stream: &EventStream) -> Result<()> {
    let mut w = BufWriter::new(wrap_io(path, File::create(path))?);
    let go = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(b"EVT1")?;
        w.write_all(&stream.width.to_le_bytes())?;
        w.write_all(&stream.height.to_le_bytes())?;
        w.write_all(&(stream.events.len() as u64).to_le_bytes())?;
        for e in &stream.events {
            w.write_all(&e.t_us.to_le_bytes())?;
            w.write_all(&e.x.to_le_bytes())?;
            w.write_all(&e.y.to_le_bytes())?;
            w.write_all(&e.polarity.to_le_bytes())?;
            w.write_all(&[0u8])?;
        }
        w.flush()
    };
    wrap_io(path, go(&mut w))
}

pub fn read_events(path: &Path) -> Result<EventStream> {
    let mut r = BufReader::new(wrap_io(path, File::open(path))?);
    let go = |r: &mut BufReader<File>| -> std::io::Result<EventStream> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"EVT1" {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "bad EVT1 magic",
            ));
        }
        let width = read_u16(r)?;
        let height = read_u16(r)?;
        let count = read_u64(r)? as usize;
        let mut events = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let t_us = read_u64(r)?;
            let x = read_u16(r)?;
            let y = read_u16(r)?;
            let mut rest = [0u8; 2];
            r.read_exact(&mut rest)?;
            events.push(Event {
                t_us,
                x,
                y,
                polarity: rest[0] as i8,
            });
        }
        Ok(EventStream {
            width,
            height,
            events,
        })
    };
    let stream = wrap_io(path, go(&mut r))?;
    for e in &stream.events {
        if e.polarity != 1 && e.polarity != -1 {
            return Err(Error::format(
                path.display().to_string(),
                format!("invalid polarity {}", e.polarity),
            ));
        }
        if e.x >= stream.width || e.y >= stream.height {
            return Err(Error::format(
                path.display().to_string(),
                format!("event at ({}, {}) outside {}x{}", e.x, e.y, stream.width, stream.height),
            ));
        }
    }
    Ok(stream)
}

/// Debug CSV with a `t_us,x,y,p` header row.
pub fn write_events_csv(path: &Path, stream: &EventStream) -> Result<()> {
    let mut w = BufWriter::new(wrap_io(path, File::create(path))?);
    let go = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "t_us,x,y,p")?;
        for e in &stream.events {
            writeln!(w, "{},{},{},{}", e.t_us, e.x, e.y, e.polarity)?;
        }
        w.flush()
    };
    wrap_io(path, go(&mut w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ten");
        let shape = vec![2, 3];
        let data = vec![1.0f32, -2.5, 0.0, 3.25, 9.75, -0.125];
        write_tensor_file(&path, &shape, &data).unwrap();
        let (s2, d2) = read_tensor_file(&path).unwrap();
        assert_eq!(s2, shape);
        assert_eq!(d2, data);
        // layout check: magic, rank, dims, payload
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"TEN1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 16 + 6 * 4);
    }

    #[test]
    fn checkpoint_roundtrip_preserves_order_and_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckp");
        let entries = vec![
            (
                "events.enc0.w".to_string(),
                Tensor::<f32>::from_vec(&[2, 1, 1, 1], vec![0.5, -0.5]).unwrap(),
            ),
            (
                "head.b".to_string(),
                Tensor::<f32>::from_vec(&[1], vec![3.0e-8]).unwrap(),
            ),
        ];
        write_checkpoint(&path, &entries).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "events.enc0.w");
        assert_eq!(back[0].1.shape(), &[2, 1, 1, 1]);
        assert_eq!(back[0].1.to_vec(), vec![0.5, -0.5]);
        assert_eq!(back[1].0, "head.b");
        assert_eq!(back[1].1.to_vec(), vec![3.0e-8]);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ten");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(read_tensor_file(&path).is_err());
    }

    #[test]
    fn events_roundtrip_and_record_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.evt");
        let stream = EventStream {
            width: 64,
            height: 48,
            events: vec![
                Event { t_us: 10, x: 3, y: 4, polarity: 1 },
                Event { t_us: 99, x: 63, y: 47, polarity: -1 },
            ],
        };
        write_events(&path, &stream).unwrap();
        let back = read_events(&path).unwrap();
        assert_eq!(back.width, 64);
        assert_eq!(back.height, 48);
        assert_eq!(back.events, stream.events);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16 + 2 * 14);
        assert_eq!(&bytes[..4], b"EVT1");
    }
}
