//! Content-addressed cache of assembled operator matrices.
//!
//! Entries are little-endian binary files named by the SHA-256 of the surface
//! document, the resolution, the operator kind and the crate version.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use faer::Mat;
use sha2::{Digest, Sha256};

use super::artifacts::write_atomic;
use super::surface::SurfaceSpec;
use crate::error::{Error, Result};
use crate::geometry::QuadratureMesh;
use crate::layer_potentials::{
    assemble_axisym_blocks, assemble_laplace_pair, AssemblyInfo, AxisymBlock, OperatorKind,
    OperatorMatrix, SurfaceBasis,
};

const MAGIC: &[u8; 8] = b"NPSPEC01";

/// Cache directory with keys derived from a surface and resolution.
#[derive(Clone, Debug)]
pub struct MatrixCache {
    dir: PathBuf,
    surface: String,
    resolution: [usize; 2],
}

impl MatrixCache {
    pub fn new(dir: &Path, surface: &SurfaceSpec, resolution: [usize; 2]) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(MatrixCache {
            dir: dir.to_path_buf(),
            surface: surface.to_json().to_string(),
            resolution,
        })
    }

    /// File holding the entry for an operator kind label.
    pub fn path(&self, kind: &str) -> PathBuf {
        let mut h = Sha256::new();
        h.update(self.surface.as_bytes());
        h.update(format!("|{}x{}|{kind}|", self.resolution[0], self.resolution[1]));
        h.update(env!("CARGO_PKG_VERSION"));
        self.dir.join(format!("{}.bin", hex::encode(h.finalize())))
    }

    fn load(&self, kind: &str) -> Option<Vec<u8>> {
        let bytes = fs::read(self.path(kind)).ok()?;
        (bytes.len() >= MAGIC.len() && &bytes[..MAGIC.len()] == MAGIC).then_some(bytes)
    }

    fn store(&self, kind: &str, w: Writer) -> Result<()> {
        write_atomic(&self.path(kind), &w.0)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn new() -> Self {
        Writer(MAGIC.to_vec())
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn mat(&mut self, m: &Mat<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                self.f64(m[(i, j)]);
            }
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader {
            bytes,
            at: MAGIC.len(),
        }
    }

    fn take8(&mut self) -> Option<[u8; 8]> {
        let b = self.bytes.get(self.at..self.at + 8)?;
        self.at += 8;
        b.try_into().ok()
    }

    fn u64(&mut self) -> Option<u64> {
        self.take8().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Option<f64> {
        self.take8().map(f64::from_le_bytes)
    }

    fn mat(&mut self) -> Option<Mat<f64>> {
        let (r, c) = (self.u64()? as usize, self.u64()? as usize);
        if r.checked_mul(c)?.checked_mul(8)? > self.bytes.len() - self.at {
            return None;
        }
        let mut m = Mat::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                m[(i, j)] = self.f64()?;
            }
        }
        Some(m)
    }

    fn done(&self) -> bool {
        self.at == self.bytes.len()
    }
}

/// `S` and `K*` on `mesh`, read from the cache when present.
pub fn laplace_pair_cached(
    mesh: &QuadratureMesh,
    cache: Option<&MatrixCache>,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    const KIND: &str = "laplace_pair";
    let Some(cache) = cache else {
        return assemble_laplace_pair(mesh);
    };
    if let Some(bytes) = cache.load(KIND) {
        let mut r = Reader::new(&bytes);
        let parsed = (|| Some((r.f64()?, r.mat()?, r.mat()?)))();
        if let Some((asym, s, k)) = parsed.filter(|_| r.done()) {
            let basis = Arc::new(SurfaceBasis::new(mesh)?);
            if s.nrows() == basis.len() && k.nrows() == basis.len() {
                let mut info = AssemblyInfo::derived("read from matrix cache");
                info.raw_asymmetry = Some(asym);
                let single = OperatorMatrix {
                    entries: s,
                    kind: OperatorKind::SingleLayer,
                    basis: basis.clone(),
                    info: info.clone(),
                };
                let np = OperatorMatrix {
                    entries: k,
                    kind: OperatorKind::NeumannPoincare,
                    basis,
                    info,
                };
                return Ok((single, np));
            }
        }
    }
    let (s, k) = assemble_laplace_pair(mesh)?;
    let mut w = Writer::new();
    w.f64(s.info.raw_asymmetry.unwrap_or(0.0));
    w.mat(&s.entries);
    w.mat(&k.entries);
    cache.store(KIND, w)?;
    Ok((s, k))
}

/// Azimuthal mode blocks up to `m_max`, read from the cache when present.
pub fn axisym_blocks_cached(
    mesh: &QuadratureMesh,
    m_max: usize,
    cache: Option<&MatrixCache>,
) -> Result<Vec<AxisymBlock>> {
    let kind = format!("axisym_blocks_m{m_max}");
    let Some(cache) = cache else {
        return assemble_axisym_blocks(mesh, m_max);
    };
    if let Some(bytes) = cache.load(&kind) {
        let mut r = Reader::new(&bytes);
        let parsed = (|| {
            let n = r.u64()? as usize;
            let mut blocks = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                let m = r.u64()? as i64;
                let (d0, d1) = (r.u64()? as usize, r.u64()? as usize);
                let n_azimuth = r.u64()? as usize;
                let raw_asymmetry = r.f64()?;
                blocks.push(AxisymBlock {
                    m,
                    degrees: d0..d1,
                    single_layer: r.mat()?,
                    np: r.mat()?,
                    profile: r.mat()?,
                    n_azimuth,
                    raw_asymmetry,
                });
            }
            Some(blocks)
        })();
        if let Some(blocks) = parsed.filter(|_| r.done()) {
            return Ok(blocks);
        }
    }
    let blocks = assemble_axisym_blocks(mesh, m_max)?;
    let mut w = Writer::new();
    w.u64(blocks.len() as u64);
    for b in &blocks {
        w.u64(b.m as u64);
        w.u64(b.degrees.start as u64);
        w.u64(b.degrees.end as u64);
        w.u64(b.n_azimuth as u64);
        w.f64(b.raw_asymmetry);
        w.mat(&b.single_layer);
        w.mat(&b.np);
        w.mat(&b.profile);
    }
    cache.store(&kind, w)?;
    Ok(blocks)
}
