//! Binary checkpoint: `magic | version | payload | crc32(magic..payload)`,
//! all integers and floats little-endian.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{McConfig, StartMode, WeightMode};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::model::{DVariant, FieldConfiguration, ModelParams, PrefactorMode, FIELDS_PER_COPY};
use crate::observables::MeasurementRecord;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NCGCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

const RECORD_FLOATS: usize = 26;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub mc: McConfig,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
    pub accept_count: u64,
    pub propose_count: u64,
    pub window_accept: u64,
    pub window_propose: u64,
    pub sigma: f64,
    pub sweeps_done: u64,
    pub max_drift: f64,
    pub therm_counts: (u64, u64),
    pub measure_counts: (u64, u64),
    pub runtime_secs: f64,
    pub copies: [FieldConfiguration; 2],
    pub records: Vec<MeasurementRecord>,
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
    fn u128(&mut self, v: u128) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        self.pos = end;
        Ok(bytes.try_into().unwrap())
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

fn corrupt(what: &str) -> Error {
    Error::Checkpoint(format!("corrupt field: {what}"))
}

fn d_variant_code(v: DVariant) -> u8 {
    match v {
        DVariant::AsPrintedSf => 0,
        DVariant::AsPrintedSpecAct => 1,
    }
}

fn prefactor_code(p: PrefactorMode) -> u8 {
    match p {
        PrefactorMode::PowerOne => 0,
        PrefactorMode::PowerTwo => 1,
        PrefactorMode::None => 2,
    }
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);

    let p = &ck.params;
    w.f64(p.omega());
    w.f64(p.mu());
    w.f64(p.alpha());
    w.u64(p.n() as u64);
    w.u8(d_variant_code(p.d_variant));
    w.u8(prefactor_code(p.prefactor_mode));

    let mc = &ck.mc;
    for v in [mc.n_therm, mc.n_measure, mc.measure_every] {
        w.u64(v);
    }
    w.f64(mc.step_sigma);
    w.f64(mc.target_accept);
    for v in [mc.adapt_interval, mc.recompute_every, mc.seed, mc.stream] {
        w.u64(v);
    }
    w.u8(match mc.weight_mode {
        WeightMode::ProductTwoCopies => 0,
        WeightMode::SingleCopy => 1,
    });
    match mc.start {
        StartMode::Cold => {
            w.u8(0);
            w.f64(0.0);
        }
        StartMode::Hot(s) => {
            w.u8(1);
            w.f64(s);
        }
    }

    w.0.extend_from_slice(&ck.rng_seed);
    w.u64(ck.rng_stream);
    w.u128(ck.rng_word_pos);
    for v in [
        ck.accept_count,
        ck.propose_count,
        ck.window_accept,
        ck.window_propose,
    ] {
        w.u64(v);
    }
    w.f64(ck.sigma);
    w.u64(ck.sweeps_done);
    w.f64(ck.max_drift);
    for v in [
        ck.therm_counts.0,
        ck.therm_counts.1,
        ck.measure_counts.0,
        ck.measure_counts.1,
    ] {
        w.u64(v);
    }
    w.f64(ck.runtime_secs);

    for cfg in &ck.copies {
        for f in 0..FIELDS_PER_COPY {
            for z in cfg.field(f).as_slice() {
                w.f64(z.re);
                w.f64(z.im);
            }
        }
    }

    w.u64(ck.records.len() as u64);
    for r in &ck.records {
        w.u64(r.sweep_index);
        for x in record_values(r) {
            w.f64(x);
        }
    }

    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

fn record_values(r: &MeasurementRecord) -> [f64; RECORD_FLOATS] {
    let mut out = [0.0; RECORD_FLOATS];
    let head = [
        r.s_tot, r.s_a, r.s_b, r.f_a, r.v0_a, r.v1_a, r.d_a, r.f_b, r.v0_b, r.v1_b, r.d_b,
        r.phi_a2, r.phi_02, r.phi_12,
    ];
    out[..14].copy_from_slice(&head);
    out[14..18].copy_from_slice(&r.z_a2);
    out[18..22].copy_from_slice(&r.z_02);
    out[22..26].copy_from_slice(&r.z_12);
    out
}

fn record_from(sweep_index: u64, v: &[f64; RECORD_FLOATS]) -> MeasurementRecord {
    let arr = |k: usize| [v[k], v[k + 1], v[k + 2], v[k + 3]];
    MeasurementRecord {
        sweep_index,
        s_tot: v[0],
        s_a: v[1],
        s_b: v[2],
        f_a: v[3],
        v0_a: v[4],
        v1_a: v[5],
        d_a: v[6],
        f_b: v[7],
        v0_b: v[8],
        v1_b: v[9],
        d_b: v[10],
        phi_a2: v[11],
        phi_02: v[12],
        phi_12: v[13],
        z_a2: arr(14),
        z_02: arr(18),
        z_12: arr(22),
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(
            "not a checkpoint file (bad magic)".into(),
        ));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Checkpoint("CRC mismatch".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }

    let (omega, mu, alpha) = (r.f64()?, r.f64()?, r.f64()?);
    let n = r.u64()? as usize;
    let d_variant = match r.u8()? {
        0 => DVariant::AsPrintedSf,
        1 => DVariant::AsPrintedSpecAct,
        _ => return Err(corrupt("d_variant")),
    };
    let prefactor = match r.u8()? {
        0 => PrefactorMode::PowerOne,
        1 => PrefactorMode::PowerTwo,
        2 => PrefactorMode::None,
        _ => return Err(corrupt("prefactor_mode")),
    };
    let params = ModelParams::new(omega, mu, alpha, n)?
        .with_d_variant(d_variant)
        .with_prefactor(prefactor);

    let (n_therm, n_measure, measure_every) = (r.u64()?, r.u64()?, r.u64()?);
    let (step_sigma, target_accept) = (r.f64()?, r.f64()?);
    let (adapt_interval, recompute_every, seed, stream) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let weight_mode = match r.u8()? {
        0 => WeightMode::ProductTwoCopies,
        1 => WeightMode::SingleCopy,
        _ => return Err(corrupt("weight_mode")),
    };
    let start = match (r.u8()?, r.f64()?) {
        (0, _) => StartMode::Cold,
        (1, s) => StartMode::Hot(s),
        _ => return Err(corrupt("start")),
    };
    let mc = McConfig {
        n_therm,
        n_measure,
        measure_every,
        step_sigma,
        target_accept,
        adapt_interval,
        recompute_every,
        seed,
        stream,
        weight_mode,
        start,
    };

    let rng_seed = r.take::<32>()?;
    let rng_stream = r.u64()?;
    let rng_word_pos = r.u128()?;
    let (accept_count, propose_count, window_accept, window_propose) =
        (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let sigma = r.f64()?;
    let sweeps_done = r.u64()?;
    let max_drift = r.f64()?;
    let therm_counts = (r.u64()?, r.u64()?);
    let measure_counts = (r.u64()?, r.u64()?);
    let runtime_secs = r.f64()?;

    let read_matrix = |r: &mut Reader| -> Result<ComplexMatrix> {
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            data.push(Complex64::new(r.f64()?, r.f64()?));
        }
        ComplexMatrix::from_row_major(n, data)
    };
    let mut copies = Vec::with_capacity(2);
    for _ in 0..2 {
        let psi = read_matrix(&mut r)?;
        let z = [
            read_matrix(&mut r)?,
            read_matrix(&mut r)?,
            read_matrix(&mut r)?,
            read_matrix(&mut r)?,
        ];
        copies.push(FieldConfiguration::new(psi, z)?);
    }
    let copies: [FieldConfiguration; 2] = copies.try_into().unwrap();

    let count = r.u64()? as usize;
    let remaining = body.len() - r.pos;
    if count.checked_mul(8 * (RECORD_FLOATS + 1)) != Some(remaining) {
        return Err(corrupt("record count"));
    }
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let sweep = r.u64()?;
        let mut v = [0.0; RECORD_FLOATS];
        for x in &mut v {
            *x = r.f64()?;
        }
        records.push(record_from(sweep, &v));
    }

    Ok(Checkpoint {
        params,
        mc,
        rng_seed,
        rng_stream,
        rng_word_pos,
        accept_count,
        propose_count,
        window_accept,
        window_propose,
        sigma,
        sweeps_done,
        max_drift,
        therm_counts,
        measure_counts,
        runtime_secs,
        copies,
        records,
    })
}

/// Writes atomically through a temporary sibling file.
pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let bytes = encode(ck);
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{Chain, RunOptions};

    fn sample() -> Checkpoint {
        let params = ModelParams::new(0.5, 1.5, 1.0, 3)
            .unwrap()
            .with_d_variant(DVariant::AsPrintedSpecAct)
            .with_prefactor(PrefactorMode::None);
        let mc = McConfig {
            n_therm: 10,
            n_measure: 10,
            recompute_every: 5,
            start: StartMode::Hot(0.2),
            stream: 7,
            ..Default::default()
        };
        let mut chain: Chain = Chain::new(params, mc).unwrap();
        chain
            .run(&mut RunOptions {
                stop_after: Some(15),
                ..Default::default()
            })
            .unwrap();
        chain.to_checkpoint()
    }

    #[test]
    fn round_trip() {
        let ck = sample();
        assert_eq!(ck.records.len(), 5);
        assert_eq!(decode(&encode(&ck)).unwrap(), ck);
    }

    #[test]
    fn flipped_byte_fails_crc() {
        let mut bytes = encode(&sample());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        let err = decode(&bytes).unwrap_err();
        assert!(err.to_string().contains("CRC"));
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let bytes = encode(&sample());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        assert!(decode(&bytes[..bytes.len() - 9]).is_err());
        assert!(decode(&[]).is_err());
    }

    #[test]
    fn future_version_is_rejected() {
        let mut bytes = encode(&sample());
        bytes[8] = 9;
        let n = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..n]);
        bytes[n..].copy_from_slice(&crc.to_le_bytes());
        assert!(decode(&bytes).unwrap_err().to_string().contains("version"));
    }
}
