//! Binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8   "TRLCKPT\0"
//! version      u32
//! spec hash    32  SHA-256 of the network architecture string
//! config hash  32  SHA-256 of the run config (see RunConfig::hash)
//! updates      u64
//! episodes     u64
//! layers       u32 count, then per layer: n_in u32, n_out u32,
//!              w f64[n_out * n_in] (row-major, out x in), b f64[n_out]
//! input norm   dim u32, count f64, mean f64[dim], m2 f64[dim]
//! feature norm u8 present, then the same layout if 1
//! k-fac        u8 present, then steps u64 and per layer:
//!              seen u8, a f64[(n_in+1)^2], g f64[n_out^2]
//! digest       32  SHA-256 of every preceding byte
//! ```
//!
//! Layers are in network order (convolutions, trunk, policy head, value
//! head). Normalizer eps and clip come from the network config.

use std::path::Path;

use toolrl_core::hash::{hash_bytes, Digest32};
use toolrl_core::net::{NetConfig, PolicyValueNet, RunningNorm};
use toolrl_core::rl::{Kfac, KfacConfig};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TRLCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_hash: Digest32,
    pub updates: u64,
    pub episodes: u64,
    pub net: PolicyValueNet,
    pub kfac: Option<Kfac>,
}

pub fn spec_hash(cfg: &NetConfig) -> Result<Digest32> {
    let net = PolicyValueNet::zeros(cfg.clone()).map_err(|e| Error::Config(e.to_string()))?;
    Ok(hash_bytes(net.architecture().as_bytes()))
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn norm(&mut self, n: &RunningNorm) {
        self.u32(n.dim() as u32);
        self.f64s(&[n.count]);
        self.f64s(&n.mean);
        self.f64s(&n.m2);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Integrity("checkpoint truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n.checked_mul(8).ok_or_else(|| Error::Integrity("bad length".into()))?)?;
        Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn digest(&mut self) -> Result<Digest32> {
        Ok(self.take(32)?.try_into().unwrap())
    }
    fn norm(&mut self, into: &mut RunningNorm) -> Result<()> {
        let dim = self.u32()? as usize;
        if dim != into.dim() {
            return Err(Error::Integrity(format!("normalizer has {dim} entries, network expects {}", into.dim())));
        }
        into.count = self.f64s(1)?[0];
        into.mean = self.f64s(dim)?;
        into.m2 = self.f64s(dim)?;
        Ok(())
    }
}

pub fn encode(c: &Checkpoint) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.0.extend_from_slice(&spec_hash(&c.net.cfg)?);
    w.0.extend_from_slice(&c.config_hash);
    w.u64(c.updates);
    w.u64(c.episodes);
    w.u32(c.net.layers.len() as u32);
    for l in &c.net.layers {
        w.u32(l.n_in as u32);
        w.u32(l.n_out as u32);
        w.f64s(&l.w);
        w.f64s(&l.b);
    }
    w.norm(&c.net.input_norm);
    match &c.net.feature_norm {
        Some(n) => {
            w.u8(1);
            w.norm(n);
        }
        None => w.u8(0),
    }
    match &c.kfac {
        Some(k) => {
            w.u8(1);
            w.u64(k.steps);
            for f in &k.layers {
                w.u8(f.seen as u8);
                w.f64s(&f.a);
                w.f64s(&f.g);
            }
        }
        None => w.u8(0),
    }
    let digest = hash_bytes(&w.0);
    w.0.extend_from_slice(&digest);
    Ok(w.0)
}

/// Decodes a checkpoint for a network built from `cfg`; any architecture
/// difference is an integrity error.
pub fn decode(bytes: &[u8], cfg: &NetConfig, kfac_cfg: &KfacConfig) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 32 || &bytes[..8] != MAGIC {
        return Err(Error::Integrity("not a checkpoint file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if hash_bytes(body) != digest {
        return Err(Error::Integrity("checkpoint digest mismatch (corrupt or truncated)".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Integrity(format!("checkpoint version {version}, expected {VERSION}")));
    }
    if r.digest()? != spec_hash(cfg)? {
        return Err(Error::Integrity("checkpoint network spec differs from the configured network".into()));
    }
    let config_hash = r.digest()?;
    let updates = r.u64()?;
    let episodes = r.u64()?;
    let mut net = PolicyValueNet::zeros(cfg.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let n = r.u32()? as usize;
    if n != net.layers.len() {
        return Err(Error::Integrity(format!("checkpoint has {n} layers, network has {}", net.layers.len())));
    }
    for l in &mut net.layers {
        let (i, o) = (r.u32()? as usize, r.u32()? as usize);
        if (i, o) != (l.n_in, l.n_out) {
            return Err(Error::Integrity(format!("layer shape {i}x{o}, expected {}x{}", l.n_in, l.n_out)));
        }
        l.w = r.f64s(i * o)?;
        l.b = r.f64s(o)?;
    }
    r.norm(&mut net.input_norm)?;
    let has_feature = r.u8()? == 1;
    match (&mut net.feature_norm, has_feature) {
        (Some(f), true) => r.norm(f)?,
        (None, false) => {}
        _ => return Err(Error::Integrity("feature normalizer presence differs".into())),
    }
    let kfac = if r.u8()? == 1 {
        let mut k = Kfac::for_net(kfac_cfg.clone(), &net);
        k.steps = r.u64()?;
        for f in &mut k.layers {
            f.seen = r.u8()? == 1;
            f.a = r.f64s((f.n_in + 1) * (f.n_in + 1))?;
            f.g = r.f64s(f.n_out * f.n_out)?;
        }
        Some(k)
    } else {
        None
    };
    if r.pos != body.len() {
        return Err(Error::Integrity("trailing bytes in checkpoint".into()));
    }
    if !net.is_finite() {
        return Err(Error::Integrity("checkpoint holds non-finite parameters".into()));
    }
    Ok(Checkpoint {
        config_hash,
        updates,
        episodes,
        net,
        kfac,
    })
}

pub fn save(path: &Path, c: &Checkpoint) -> Result<()> {
    let bytes = encode(c)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(Error::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(Error::io(path))
}

pub fn load(path: &Path, cfg: &NetConfig, kfac_cfg: &KfacConfig) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode(&bytes, cfg, kfac_cfg).map_err(|e| match e {
        Error::Integrity(m) => Error::Integrity(format!("{}: {m}", path.display())),
        e => e,
    })
}
