//! Single-file model bundle.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "CFA1DMDL"
//! version  u32
//! length   u64      payload bytes
//! crc32    u32      of the payload
//! payload
//! ```
//!
//! Complex vectors are stored as interleaved `(re, im)` f64 pairs. Strings are
//! a u64 byte count followed by UTF-8.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use num_complex::Complex64;

use super::config::Config;
use super::model::{Bank, ModelBundle};
use crate::error::{Error, Result};
use crate::filterbank::{CorrelationFilter, FilterBank, FilterKind, TradeoffParams};
use crate::kernelcfa::{KernelBank, KernelFilter, KernelSpec, NoiseMode};
use crate::spectral::Spectrum;
use crate::subspace::PcaModel;

pub const MAGIC: &[u8; 8] = b"CFA1DMDL";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 4;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.write_u32::<LE>(v).unwrap();
    }
    fn u64(&mut self, v: u64) {
        self.0.write_u64::<LE>(v).unwrap();
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.write_f64::<LE>(v).unwrap();
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn reals(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn complexes(&mut self, v: &[Complex64]) {
        self.usize(v.len());
        for c in v {
            self.f64(c.re);
            self.f64(c.im);
        }
    }
    fn params(&mut self, p: &TradeoffParams) {
        self.f64(p.omega_s);
        self.f64(p.omega_n);
    }
}

struct Reader<'a>(Cursor<&'a [u8]>);

fn truncated(_: std::io::Error) -> Error {
    Error::Format("truncated payload".into())
}

impl Reader<'_> {
    fn u8(&mut self) -> Result<u8> {
        self.0.read_u8().map_err(truncated)
    }
    fn u32(&mut self) -> Result<u32> {
        self.0.read_u32::<LE>().map_err(truncated)
    }
    fn u64(&mut self) -> Result<u64> {
        self.0.read_u64::<LE>().map_err(truncated)
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        let remaining = self.0.get_ref().len() as u64;
        // Any count larger than the payload is corrupt.
        if v > remaining.saturating_mul(8) {
            return Err(Error::Format(format!("implausible length field {v}")));
        }
        Ok(v as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        self.0.read_f64::<LE>().map_err(truncated)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        let mut buf = vec![0; n];
        self.0.read_exact(&mut buf).map_err(truncated)?;
        String::from_utf8(buf).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }
    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn complexes(&mut self) -> Result<Vec<Complex64>> {
        let n = self.usize()?;
        (0..n).map(|_| Ok(Complex64::new(self.f64()?, self.f64()?))).collect()
    }
    fn params(&mut self) -> Result<TradeoffParams> {
        Ok(TradeoffParams {
            omega_s: self.f64()?,
            omega_n: self.f64()?,
        })
    }
}

fn kind_tag(kind: FilterKind) -> u8 {
    match kind {
        FilterKind::Uootf => 0,
        FilterKind::Uotf => 1,
        FilterKind::Otf => 2,
    }
}

fn kind_from_tag(tag: u8) -> Result<FilterKind> {
    Ok(match tag {
        0 => FilterKind::Uootf,
        1 => FilterKind::Uotf,
        2 => FilterKind::Otf,
        t => return Err(Error::Format(format!("unknown filter tag {t}"))),
    })
}

fn write_payload(b: &ModelBundle) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.str(&b.config.to_text());

    w.reals(&b.pca.mean);
    w.usize(b.pca.basis.nrows());
    w.usize(b.pca.basis.ncols());
    b.pca.basis.iter().for_each(|&v| w.f64(v));
    w.reals(&b.pca.eigvals);

    match &b.bank {
        Bank::Linear(bank) => {
            w.u8(0);
            w.u8(kind_tag(bank.kind));
            w.usize(bank.p);
            w.params(&bank.params);
            w.usize(bank.filters.len());
            for f in &bank.filters {
                w.usize(f.class_id);
                w.u8(kind_tag(f.kind));
                w.params(&f.params);
                w.complexes(&f.h);
            }
        }
        Bank::Kernel(bank) => {
            w.u8(1);
            match bank.kernel {
                KernelSpec::Rbf { delta } => {
                    w.u8(0);
                    w.f64(delta);
                }
                KernelSpec::Linear => w.u8(1),
                KernelSpec::Polynomial { degree, offset } => {
                    w.u8(2);
                    w.u32(degree);
                    w.f64(offset);
                }
            }
            match bank.noise_mode {
                NoiseMode::Ridge { lambda } => {
                    w.u8(0);
                    w.f64(lambda);
                }
                NoiseMode::Explicit { seed } => {
                    w.u8(1);
                    w.u64(seed);
                }
            }
            w.params(&bank.params);
            w.usize(bank.train.len());
            for s in &bank.train {
                w.usize(s.label);
                w.str(&s.source_id);
                w.complexes(&s.values);
            }
            w.usize(bank.filters.len());
            for f in &bank.filters {
                w.usize(f.class_id);
                w.f64(f.escalation);
                w.complexes(&f.alpha);
            }
        }
    }

    w.usize(b.gallery.len());
    for (g, &label) in b.gallery.iter().zip(&b.gallery_labels) {
        w.usize(label);
        w.reals(g);
    }
    w.usize(b.degenerate_count);
    w.0
}

fn read_payload(payload: &[u8], version: u32) -> Result<ModelBundle> {
    let mut r = Reader(Cursor::new(payload));
    let config = Config::from_text(&r.str()?)?;

    let mean = r.reals()?;
    let rows = r.usize()?;
    let cols = r.usize()?;
    let basis_data = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let basis = DMatrix::from_column_slice(rows, cols, &basis_data);
    let eigvals = r.reals()?;
    let pca = PcaModel { mean, basis, eigvals };

    let bank = match r.u8()? {
        0 => {
            let kind = kind_from_tag(r.u8()?)?;
            let p = r.usize()?;
            let params = r.params()?;
            let count = r.usize()?;
            let mut filters = Vec::with_capacity(count);
            for _ in 0..count {
                let class_id = r.usize()?;
                let fkind = kind_from_tag(r.u8()?)?;
                let fparams = r.params()?;
                let h = r.complexes()?;
                filters.push(CorrelationFilter {
                    h,
                    class_id,
                    kind: fkind,
                    params: fparams,
                });
            }
            Bank::Linear(FilterBank { filters, p, kind, params })
        }
        1 => {
            let kernel = match r.u8()? {
                0 => KernelSpec::Rbf { delta: r.f64()? },
                1 => KernelSpec::Linear,
                2 => KernelSpec::Polynomial {
                    degree: r.u32()?,
                    offset: r.f64()?,
                },
                t => return Err(Error::Format(format!("unknown kernel tag {t}"))),
            };
            let noise_mode = match r.u8()? {
                0 => NoiseMode::Ridge { lambda: r.f64()? },
                1 => NoiseMode::Explicit { seed: r.u64()? },
                t => return Err(Error::Format(format!("unknown noise tag {t}"))),
            };
            let params = r.params()?;
            let n = r.usize()?;
            let mut train = Vec::with_capacity(n);
            for _ in 0..n {
                let label = r.usize()?;
                let source_id = r.str()?;
                let values = r.complexes()?;
                train.push(Spectrum { values, label, source_id });
            }
            let count = r.usize()?;
            let mut filters = Vec::with_capacity(count);
            for _ in 0..count {
                let class_id = r.usize()?;
                let escalation = r.f64()?;
                let alpha = r.complexes()?;
                filters.push(KernelFilter {
                    alpha,
                    class_id,
                    kernel,
                    noise_mode,
                    params,
                    escalation,
                });
            }
            Bank::Kernel(KernelBank {
                train,
                kernel,
                noise_mode,
                params,
                filters,
            })
        }
        t => return Err(Error::Format(format!("unknown bank tag {t}"))),
    };

    let count = r.usize()?;
    let mut gallery = Vec::with_capacity(count);
    let mut gallery_labels = Vec::with_capacity(count);
    for _ in 0..count {
        gallery_labels.push(r.usize()?);
        gallery.push(r.reals()?);
    }
    let degenerate_count = r.usize()?;
    if (r.0.position() as usize) != payload.len() {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let bundle = ModelBundle {
        format_version: version,
        config,
        pca,
        bank,
        gallery,
        gallery_labels,
        degenerate_count,
    };
    bundle.check()?;
    Ok(bundle)
}

pub fn encode_bundle(bundle: &ModelBundle) -> Vec<u8> {
    let payload = write_payload(bundle);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.write_u32::<LE>(FORMAT_VERSION).unwrap();
    out.write_u64::<LE>(payload.len() as u64).unwrap();
    out.write_u32::<LE>(crc32fast::hash(&payload)).unwrap();
    out.extend_from_slice(&payload);
    out
}

pub fn decode_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("file shorter than header".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut head = Cursor::new(&bytes[8..HEADER_LEN]);
    let version = head.read_u32::<LE>().map_err(truncated)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let len = head.read_u64::<LE>().map_err(truncated)? as usize;
    let crc = head.read_u32::<LE>().map_err(truncated)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len {
        return Err(Error::Format(format!(
            "truncated file: payload has {} bytes, header says {len}",
            payload.len()
        )));
    }
    if crc32fast::hash(payload) != crc {
        return Err(Error::Format("checksum mismatch".into()));
    }
    read_payload(payload, version)
}

pub fn save_model(bundle: &ModelBundle, path: &Path) -> Result<()> {
    std::fs::write(path, encode_bundle(bundle)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bundle(&bytes)
}
