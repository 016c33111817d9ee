//! Binary ensemble container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "GBENSMBL" | u32 version
//! section "META": u32 n_columns, per column { str name, u8 kind, ... }, u32 n_classes, str class...
//! section "COHT": tensor (rows, cols, f64 data row-major)
//! section "RNDS": u32 n_rounds, per round { u32 feature, f64 gamma, f64 alpha, f64 error,
//!                 u8 expert, config, tensor w1, tensor b1, tensor w2, tensor b2 }
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8; optional strings carry a
//! leading presence byte. Each section is its 4-byte tag followed by a u64
//! payload length. Tensors are a u32 row count, a u32 column count and
//! row-major f64 values (vectors are stored as one row).

use std::fs;
use std::path::Path;

use crate::appnp::{AppnpConfig, AppnpModel, Params};
use crate::data::{ColumnEncoding, ColumnMeta, EncodingMeta};
use crate::boost::{Ensemble, WeakRound};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const MAGIC: &[u8; 8] = b"GBENSMBL";
pub const VERSION: u32 = 1;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn len32(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }
    fn str(&mut self, s: &str) {
        self.len32(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn opt_str(&mut self, s: Option<&str>) {
        match s {
            Some(s) => {
                self.u8(1);
                self.str(s);
            }
            None => self.u8(0),
        }
    }
    fn tensor<T: Real>(&mut self, rows: usize, cols: usize, data: &[T]) {
        self.len32(rows);
        self.len32(cols);
        for v in data {
            self.f64(v.to_f64_lossy());
        }
    }
    fn section(&mut self, tag: &[u8; 4], body: Writer) {
        self.buf.extend_from_slice(tag);
        self.u64(body.buf.len() as u64);
        self.buf.extend_from_slice(&body.buf);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
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
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::ModelFormat("invalid UTF-8 string".into()))
    }
    fn opt_str(&mut self) -> Result<Option<String>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.str()?)),
            b => Err(Error::ModelFormat(format!("bad presence byte {b}"))),
        }
    }
    fn tensor<T: Real>(&mut self) -> Result<Matrix<T>> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let len = rows
            .checked_mul(cols)
            .filter(|&l| l.saturating_mul(8) <= self.buf.len() - self.pos)
            .ok_or_else(|| Error::ModelFormat(format!("tensor {rows}x{cols} exceeds file")))?;
        let data = (0..len)
            .map(|_| self.f64().map(T::of))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_vec(rows, cols, data)
    }
    fn vector<T: Real>(&mut self) -> Result<Vec<T>> {
        let m: Matrix<T> = self.tensor()?;
        if m.rows() != 1 && !(m.rows() == 0 && m.cols() == 0) {
            return Err(Error::ModelFormat("vector tensor must have one row".into()));
        }
        Ok(m.into_vec())
    }
    fn section(&mut self, tag: &[u8; 4]) -> Result<Reader<'a>> {
        let found = self.take(4)?;
        if found != tag {
            return Err(Error::ModelFormat(format!(
                "expected section {:?}, found {:?}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(found)
            )));
        }
        let len = usize::try_from(self.u64()?).map_err(|_| Error::ModelFormat("section too large".into()))?;
        Ok(Reader::new(self.take(len)?))
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::ModelFormat(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_meta(w: &mut Writer, meta: &EncodingMeta) {
    w.len32(meta.columns.len());
    for c in &meta.columns {
        w.str(&c.name);
        match &c.encoding {
            ColumnEncoding::Numeric { impute, mean, sd } => {
                w.u8(0);
                w.f64(*impute);
                w.f64(*mean);
                w.f64(*sd);
            }
            ColumnEncoding::Categorical { categories } => {
                w.u8(1);
                w.len32(categories.len());
                for cat in categories {
                    w.opt_str(cat.as_deref());
                }
            }
        }
    }
    w.len32(meta.classes.len());
    for c in &meta.classes {
        w.str(c);
    }
}

fn read_meta(r: &mut Reader<'_>) -> Result<EncodingMeta> {
    let n = r.u32()? as usize;
    let mut columns = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let name = r.str()?;
        let encoding = match r.u8()? {
            0 => ColumnEncoding::Numeric {
                impute: r.f64()?,
                mean: r.f64()?,
                sd: r.f64()?,
            },
            1 => {
                let k = r.u32()? as usize;
                let categories = (0..k).map(|_| r.opt_str()).collect::<Result<Vec<_>>>()?;
                ColumnEncoding::Categorical { categories }
            }
            b => return Err(Error::ModelFormat(format!("unknown column kind {b}"))),
        };
        columns.push(ColumnMeta { name, encoding });
    }
    let k = r.u32()? as usize;
    let classes = (0..k).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    Ok(EncodingMeta { columns, classes })
}

fn write_config(w: &mut Writer, c: &AppnpConfig) {
    w.len32(c.hidden);
    w.len32(c.steps);
    w.f64(c.teleport);
    w.f64(c.dropout);
    w.f64(c.learning_rate);
    w.f64(c.weight_decay);
    w.len32(c.max_epochs);
    w.len32(c.patience);
    w.u64(c.seed);
}

fn read_config(r: &mut Reader<'_>) -> Result<AppnpConfig> {
    Ok(AppnpConfig {
        hidden: r.u32()? as usize,
        steps: r.u32()? as usize,
        teleport: r.f64()?,
        dropout: r.f64()?,
        learning_rate: r.f64()?,
        weight_decay: r.f64()?,
        max_epochs: r.u32()? as usize,
        patience: r.u32()? as usize,
        seed: r.u64()?,
    })
}

pub fn to_bytes<T: Real>(ensemble: &Ensemble<T>) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);

    let mut meta = Writer::default();
    write_meta(&mut meta, &ensemble.meta);
    w.section(b"META", meta);

    let mut cohort = Writer::default();
    let c = &ensemble.cohort;
    cohort.tensor(c.rows(), c.cols(), c.as_slice());
    w.section(b"COHT", cohort);

    let mut rounds = Writer::default();
    rounds.len32(ensemble.rounds.len());
    for r in &ensemble.rounds {
        rounds.len32(r.feature);
        rounds.f64(r.gamma.to_f64_lossy());
        rounds.f64(r.alpha.to_f64_lossy());
        rounds.f64(r.error);
        rounds.u8(u8::from(r.expert));
        write_config(&mut rounds, &r.model.config);
        let p = &r.model.params;
        rounds.tensor(p.w1.rows(), p.w1.cols(), p.w1.as_slice());
        rounds.tensor(1, p.b1.len(), &p.b1);
        rounds.tensor(p.w2.rows(), p.w2.cols(), p.w2.as_slice());
        rounds.tensor(1, p.b2.len(), &p.b2);
    }
    w.section(b"RNDS", rounds);
    w.buf
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<Ensemble<T>> {
    let mut r = Reader::new(bytes);
    if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::ModelFormat("not a graphboost model file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::ModelVersion {
            found: version,
            expected: VERSION,
        });
    }

    let mut meta_r = r.section(b"META")?;
    let meta = read_meta(&mut meta_r)?;
    meta_r.finish()?;

    let mut cohort_r = r.section(b"COHT")?;
    let cohort: Matrix<T> = cohort_r.tensor()?;
    cohort_r.finish()?;
    let m = meta.columns.len();
    let k = meta.classes.len();
    if cohort.cols() != m {
        return Err(Error::ModelFormat(format!(
            "cohort has {} columns for {m} features",
            cohort.cols()
        )));
    }

    let mut rr = r.section(b"RNDS")?;
    let n_rounds = rr.u32()? as usize;
    let mut rounds = Vec::with_capacity(n_rounds.min(1 << 12));
    for _ in 0..n_rounds {
        let feature = rr.u32()? as usize;
        let gamma = T::of(rr.f64()?);
        let alpha = T::of(rr.f64()?);
        let error = rr.f64()?;
        let expert = match rr.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::ModelFormat(format!("bad flag byte {b}"))),
        };
        let config = read_config(&mut rr)?;
        let w1: Matrix<T> = rr.tensor()?;
        let b1 = rr.vector()?;
        let w2: Matrix<T> = rr.tensor()?;
        let b2 = rr.vector()?;
        let h = config.hidden;
        if feature >= m
            || (w1.rows(), w1.cols()) != (h, m)
            || b1.len() != h
            || (w2.rows(), w2.cols()) != (k, h)
            || b2.len() != k
        {
            return Err(Error::ModelFormat("round tensor shapes disagree with header".into()));
        }
        rounds.push(WeakRound {
            feature,
            gamma,
            expert,
            model: AppnpModel {
                params: Params { w1, b1, w2, b2 },
                config,
            },
            alpha,
            error,
        });
    }
    rr.finish()?;
    r.finish()?;
    if rounds.is_empty() {
        return Err(Error::ModelFormat("model has no rounds".into()));
    }
    Ok(Ensemble {
        rounds,
        n_classes: k,
        meta,
        cohort,
    })
}

pub fn save<T: Real>(ensemble: &Ensemble<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(ensemble)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<Ensemble<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&bytes)
}
