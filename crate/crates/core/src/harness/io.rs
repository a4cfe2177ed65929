//! Binary artifacts: a dense matrix plus a JSON metadata block.
//!
//! Layout: 8 magic bytes, `u32` version, `u64` rows, `u64` cols, row-major
//! `f64` payload, `u64` metadata length, metadata JSON. Everything is
//! little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eim::EimSpace;
use crate::error::{Error, Result};
use crate::rom::{BasisMode, PodSize, ReducedBasis, SnapshotMeta};

pub const MAGIC: &[u8; 8] = b"DWROM001";
pub const VERSION: u32 = 1;

/// Matrix payload with its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub matrix: DMatrix<f64>,
    pub meta: Value,
}

pub fn write_artifact<W: Write>(mut w: W, matrix: &DMatrix<f64>, meta: &Value) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(matrix.nrows() as u64).to_le_bytes())?;
    w.write_all(&(matrix.ncols() as u64).to_le_bytes())?;
    let mut row = Vec::with_capacity(8 * matrix.ncols());
    for i in 0..matrix.nrows() {
        row.clear();
        for j in 0..matrix.ncols() {
            row.extend_from_slice(&matrix[(i, j)].to_le_bytes());
        }
        w.write_all(&row)?;
    }
    let bytes = serde_json::to_vec(meta)?;
    w.write_all(&(bytes.len() as u64).to_le_bytes())?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Integrity(format!("truncated artifact while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_truncated(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_artifact<R: Read>(mut r: R) -> Result<Artifact> {
    let mut magic = [0u8; 8];
    read_exact_or_truncated(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic bytes {:?}", String::from_utf8_lossy(&magic))));
    }
    let mut v = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut v, "version")?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = read_u64(&mut r, "row count")?;
    let cols = read_u64(&mut r, "column count")?;
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .filter(|&n| n <= isize::MAX as u64)
        .ok_or_else(|| Error::Integrity(format!("implausible dimensions {rows} x {cols}")))?;
    let (rows, cols) = (rows as usize, cols as usize);
    // grow while reading so a corrupt header cannot force a huge allocation
    let mut payload = Vec::new();
    (&mut r).take(len).read_to_end(&mut payload)?;
    if payload.len() as u64 != len {
        return Err(Error::Integrity(format!("payload has {} of {len} bytes", payload.len())));
    }
    let data: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let matrix = DMatrix::from_row_slice(rows, cols, &data);
    let mlen = read_u64(&mut r, "metadata length")?;
    let mut bytes = Vec::new();
    (&mut r).take(mlen).read_to_end(&mut bytes)?;
    if bytes.len() as u64 != mlen {
        return Err(Error::Integrity(format!("metadata has {} of {mlen} bytes", bytes.len())));
    }
    let meta = serde_json::from_slice(&bytes).map_err(|e| Error::Integrity(format!("metadata: {e}")))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Integrity("trailing bytes after metadata".into()));
    }
    Ok(Artifact { matrix, meta })
}

pub fn persist(path: &Path, matrix: &DMatrix<f64>, meta: &Value) -> Result<()> {
    write_artifact(BufWriter::new(File::create(path)?), matrix, meta)
}

pub fn load(path: &Path) -> Result<Artifact> {
    read_artifact(BufReader::new(File::open(path)?))
}

#[derive(Serialize, Deserialize)]
struct BasisMeta {
    kind: String,
    n_rb: usize,
    mode: BasisMode,
    size: PodSize,
    sigma: Vec<f64>,
}

/// Stores `[V | W]` side by side.
pub fn basis_artifact(basis: &ReducedBasis, extra: &Value) -> Artifact {
    let n = basis.n_rb();
    let mut m = DMatrix::zeros(basis.dof(), 2 * n);
    m.columns_mut(0, n).copy_from(&basis.v);
    m.columns_mut(n, n).copy_from(&basis.w);
    let meta = BasisMeta { kind: "basis".into(), n_rb: n, mode: basis.mode, size: basis.size, sigma: basis.sigma.clone() };
    Artifact { matrix: m, meta: with_extra(serde_json::to_value(meta).unwrap(), extra) }
}

pub fn basis_from_artifact(a: &Artifact) -> Result<ReducedBasis> {
    let meta: BasisMeta = parse_meta(&a.meta, "basis")?;
    if a.matrix.ncols() != 2 * meta.n_rb {
        return Err(Error::Integrity(format!("basis has {} columns, expected {}", a.matrix.ncols(), 2 * meta.n_rb)));
    }
    Ok(ReducedBasis {
        v: a.matrix.columns(0, meta.n_rb).into_owned(),
        w: a.matrix.columns(meta.n_rb, meta.n_rb).into_owned(),
        sigma: meta.sigma,
        mode: meta.mode,
        size: meta.size,
    })
}

#[derive(Serialize, Deserialize)]
struct EimMeta {
    kind: String,
    z: Vec<usize>,
    stencils: Vec<Vec<usize>>,
    tol: f64,
    history: Vec<f64>,
    exhausted: bool,
}

/// Stores the cardinal basis `Psi` with magic points in the metadata.
pub fn eim_artifact(space: &EimSpace, extra: &Value) -> Artifact {
    let meta = EimMeta {
        kind: "eim".into(),
        z: space.z.clone(),
        stencils: space.stencils.clone(),
        tol: space.tol,
        history: space.history.clone(),
        exhausted: space.exhausted,
    };
    Artifact { matrix: space.psi.clone(), meta: with_extra(serde_json::to_value(meta).unwrap(), extra) }
}

pub fn eim_from_artifact(a: &Artifact) -> Result<EimSpace> {
    let meta: EimMeta = parse_meta(&a.meta, "eim")?;
    if a.matrix.ncols() != meta.z.len() || meta.stencils.len() != meta.z.len() {
        return Err(Error::Integrity("EIM point count disagrees with the payload".into()));
    }
    if meta.z.iter().any(|&z| z >= a.matrix.nrows()) {
        return Err(Error::Integrity("magic point outside the grid".into()));
    }
    Ok(EimSpace {
        z: meta.z,
        psi: a.matrix.clone(),
        stencils: meta.stencils,
        tol: meta.tol,
        history: meta.history,
        exhausted: meta.exhausted,
    })
}

/// Snapshot columns with per-column provenance; `kind` is `states` or `fluxes`.
pub fn snapshot_artifact(m: &DMatrix<f64>, kind: &str, columns: &[SnapshotMeta], extra: &Value) -> Artifact {
    let meta = json!({ "kind": kind, "columns": columns });
    Artifact { matrix: m.clone(), meta: with_extra(meta, extra) }
}

pub fn snapshot_columns(a: &Artifact) -> Result<Vec<SnapshotMeta>> {
    let cols = a.meta.get("columns").cloned().unwrap_or(Value::Array(vec![]));
    let cols: Vec<SnapshotMeta> = serde_json::from_value(cols).map_err(|e| Error::Integrity(format!("metadata: {e}")))?;
    if cols.len() != a.matrix.ncols() {
        return Err(Error::Integrity(format!("{} column records for {} columns", cols.len(), a.matrix.ncols())));
    }
    Ok(cols)
}

fn with_extra(mut meta: Value, extra: &Value) -> Value {
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        for (k, v) in e {
            m.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }
    meta
}

fn parse_meta<T: for<'de> Deserialize<'de>>(meta: &Value, kind: &str) -> Result<T> {
    if meta.get("kind").and_then(Value::as_str) != Some(kind) {
        return Err(Error::Format(format!("artifact is not a {kind}")));
    }
    serde_json::from_value(meta.clone()).map_err(|e| Error::Integrity(format!("metadata: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
    }

    fn bytes(m: &DMatrix<f64>, meta: &Value) -> Vec<u8> {
        let mut buf = Vec::new();
        write_artifact(&mut buf, m, meta).unwrap();
        buf
    }

    #[test]
    fn header_layout() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = bytes(&m, &json!({}));
        assert_eq!(&b[..8], b"DWROM001");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[20..28].try_into().unwrap()), 3);
        // row-major: second value is (0, 1)
        assert_eq!(f64::from_le_bytes(b[36..44].try_into().unwrap()), 2.0);
        assert_eq!(u64::from_le_bytes(b[76..84].try_into().unwrap()), 2);
        assert_eq!(&b[84..], b"{}");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = random(37, 11, 3);
        m[(0, 0)] = -0.0;
        m[(1, 1)] = f64::MIN_POSITIVE / 3.0;
        let meta = json!({ "seed": 42, "draws": [0.71, 1.29] });
        let a = read_artifact(bytes(&m, &meta).as_slice()).unwrap();
        assert!(a.matrix.iter().zip(m.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.meta, meta);
    }

    #[test]
    fn bad_magic_and_version() {
        let m = random(2, 2, 1);
        let mut b = bytes(&m, &json!({}));
        b[0] = b'X';
        assert!(matches!(read_artifact(b.as_slice()), Err(Error::Format(_))));
        let mut b = bytes(&m, &json!({}));
        b[8] = 9;
        assert!(matches!(read_artifact(b.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_is_an_integrity_error() {
        let b = bytes(&random(4, 5, 2), &json!({ "a": 1 }));
        for cut in [3, 10, 20, 50, b.len() - 12, b.len() - 1] {
            assert!(matches!(read_artifact(&b[..cut]), Err(Error::Integrity(_))), "cut {cut}");
        }
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(read_artifact(long.as_slice()), Err(Error::Integrity(_))));
    }

    #[test]
    fn huge_header_rejected_without_allocating() {
        let mut b = bytes(&random(1, 1, 0), &json!({}));
        b[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(read_artifact(b.as_slice()), Err(Error::Integrity(_))));
        b[12..20].copy_from_slice(&(1u64 << 40).to_le_bytes());
        assert!(matches!(read_artifact(b.as_slice()), Err(Error::Integrity(_))));
    }

    #[test]
    fn typed_round_trips() {
        let v = random(20, 3, 5);
        let basis = ReducedBasis {
            w: &v * 2.0,
            v,
            sigma: vec![3.0, 2.0, 1.0, 0.5],
            mode: BasisMode::Energy,
            size: PodSize::Tol(1e-3),
        };
        let extra = json!({ "seed": 7 });
        let a = basis_artifact(&basis, &extra);
        assert_eq!(a.meta["seed"], 7);
        let b = basis_from_artifact(&read_artifact(bytes(&a.matrix, &a.meta).as_slice()).unwrap()).unwrap();
        assert_eq!((b.v, b.w, b.sigma, b.mode, b.size), (basis.v, basis.w, basis.sigma, basis.mode, basis.size));

        let space = EimSpace {
            z: vec![4, 9],
            psi: random(20, 2, 6),
            stencils: vec![vec![2, 3, 4, 5, 6], vec![7, 8, 9, 10, 11]],
            tol: 1e-4,
            history: vec![1.0, 0.1],
            exhausted: false,
        };
        let a = eim_artifact(&space, &Value::Null);
        let s = eim_from_artifact(&a).unwrap();
        assert_eq!((s.z, s.psi, s.stencils), (space.z, space.psi, space.stencils));
        assert!(matches!(basis_from_artifact(&a), Err(Error::Format(_))));
    }
}
