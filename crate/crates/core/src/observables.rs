//! Per-configuration measurements and their assembly into expectation values.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, ComplexMatrix};
use crate::model::{ActionBreakdown, FieldConfiguration, ModelParams};
use crate::sampler::{ChainMeta, McConfig, WeightMode};
use crate::stats::{self, ErrorReport, JackknifeResult};

/// Full, spherical (`l = 0`) and first non-spherical (`l = 1`) power of one
/// matrix. Averaged over the two copies inside [`MeasurementRecord`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModePower {
    pub full: f64,
    pub spherical: f64,
    pub first: f64,
}

impl ModePower {
    pub fn of(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let spherical = (0..n).map(|i| m[(i, i)].norm_sqr()).sum();
        let first = if n > 1 {
            m[(0, 1)].norm_sqr() + m[(1, 0)].norm_sqr()
        } else {
            0.0
        };
        Self {
            full: frobenius_sq(m),
            spherical,
            first,
        }
    }

    fn average(a: Self, b: Self) -> Self {
        Self {
            full: 0.5 * (a.full + b.full),
            spherical: 0.5 * (a.spherical + b.spherical),
            first: 0.5 * (a.first + b.first),
        }
    }
}

/// Mode powers `p_0, p_1, ..., p_{n-1}` of a matrix: `p_0` is the diagonal
/// part and `p_l` (`l >= 1`) collects the off-diagonal entries with
/// `max(row, col) = l`, so that `sum_l p_l = Tr(|m|^2)`.
pub fn mode_decomposition(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let l = if i == j { 0 } else { i.max(j) };
            out[l] += m[(i, j)].norm_sqr();
        }
    }
    out
}

/// One measurement of the two-copy state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementRecord {
    pub sweep_index: u64,
    pub s_tot: f64,
    pub s_a: f64,
    pub s_b: f64,
    pub f_a: f64,
    pub v0_a: f64,
    pub v1_a: f64,
    pub d_a: f64,
    pub f_b: f64,
    pub v0_b: f64,
    pub v1_b: f64,
    pub d_b: f64,
    pub phi_a2: f64,
    pub phi_02: f64,
    pub phi_12: f64,
    pub z_a2: [f64; 4],
    pub z_02: [f64; 4],
    pub z_12: [f64; 4],
}

pub fn measure(
    sweep_index: u64,
    cfg_a: &FieldConfiguration,
    cfg_b: &FieldConfiguration,
    breakdown_a: &ActionBreakdown,
    breakdown_b: &ActionBreakdown,
    weight_mode: WeightMode,
) -> MeasurementRecord {
    let (sa, sb) = (breakdown_a.total, breakdown_b.total);
    let psi = ModePower::average(ModePower::of(&cfg_a.psi), ModePower::of(&cfg_b.psi));
    let z: [ModePower; 4] = std::array::from_fn(|i| {
        ModePower::average(ModePower::of(&cfg_a.z[i]), ModePower::of(&cfg_b.z[i]))
    });
    MeasurementRecord {
        sweep_index,
        s_tot: match weight_mode {
            WeightMode::ProductTwoCopies => sa * sb,
            WeightMode::SingleCopy => sa,
        },
        s_a: sa,
        s_b: sb,
        f_a: breakdown_a.f_term,
        v0_a: breakdown_a.v0_term,
        v1_a: breakdown_a.v1_term,
        d_a: breakdown_a.d_term,
        f_b: breakdown_b.f_term,
        v0_b: breakdown_b.v0_term,
        v1_b: breakdown_b.v1_term,
        d_b: breakdown_b.d_term,
        phi_a2: psi.full,
        phi_02: psi.spherical,
        phi_12: psi.first,
        z_a2: z.map(|p| p.full),
        z_02: z.map(|p| p.spherical),
        z_12: z.map(|p| p.first),
    }
}

/// Scalar quantities extractable from a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observable {
    STot,
    SA,
    SB,
    /// Copy-averaged raw traces.
    F,
    V0,
    V1,
    /// `V0 + V1`.
    V,
    D,
    PhiA2,
    Phi02,
    Phi12,
    ZA2(usize),
    Z02(usize),
    Z12(usize),
}

impl Observable {
    pub fn all() -> Vec<Observable> {
        let mut v = vec![
            Observable::STot,
            Observable::SA,
            Observable::SB,
            Observable::F,
            Observable::V0,
            Observable::V1,
            Observable::V,
            Observable::D,
            Observable::PhiA2,
            Observable::Phi02,
            Observable::Phi12,
        ];
        v.extend((0..4).map(Observable::ZA2));
        v.extend((0..4).map(Observable::Z02));
        v.extend((0..4).map(Observable::Z12));
        v
    }

    pub fn name(&self) -> String {
        match self {
            Observable::STot => "s_tot".into(),
            Observable::SA => "s_a".into(),
            Observable::SB => "s_b".into(),
            Observable::F => "f".into(),
            Observable::V0 => "v0".into(),
            Observable::V1 => "v1".into(),
            Observable::V => "v".into(),
            Observable::D => "d".into(),
            Observable::PhiA2 => "phi_a2".into(),
            Observable::Phi02 => "phi_02".into(),
            Observable::Phi12 => "phi_12".into(),
            Observable::ZA2(i) => format!("z{i}_a2"),
            Observable::Z02(i) => format!("z{i}_02"),
            Observable::Z12(i) => format!("z{i}_12"),
        }
    }

    pub fn value(&self, r: &MeasurementRecord) -> f64 {
        match *self {
            Observable::STot => r.s_tot,
            Observable::SA => r.s_a,
            Observable::SB => r.s_b,
            Observable::F => 0.5 * (r.f_a + r.f_b),
            Observable::V0 => 0.5 * (r.v0_a + r.v0_b),
            Observable::V1 => 0.5 * (r.v1_a + r.v1_b),
            Observable::V => 0.5 * (r.v0_a + r.v0_b + r.v1_a + r.v1_b),
            Observable::D => 0.5 * (r.d_a + r.d_b),
            Observable::PhiA2 => r.phi_a2,
            Observable::Phi02 => r.phi_02,
            Observable::Phi12 => r.phi_12,
            Observable::ZA2(i) => r.z_a2[i],
            Observable::Z02(i) => r.z_02[i],
            Observable::Z12(i) => r.z_12[i],
        }
    }

    pub fn series(&self, records: &[MeasurementRecord]) -> Vec<f64> {
        records.iter().map(|r| self.value(r)).collect()
    }
}

/// Measurement series of one chain together with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Timeseries {
    pub params: ModelParams,
    pub mc: McConfig,
    pub records: Vec<MeasurementRecord>,
    pub meta: ChainMeta,
}

impl Timeseries {
    pub fn series(&self, obs: Observable) -> Vec<f64> {
        obs.series(&self.records)
    }

    fn nonempty(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::EmptySeries);
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        let n = self.params.n() as f64;
        n * n
    }
}

/// `E = <S>` with autocorrelation-corrected error.
pub fn energy(ts: &Timeseries) -> Result<ErrorReport> {
    ts.nonempty()?;
    stats::error_report(&ts.series(Observable::STot))
}

/// `C = <S^2> - <S>^2` with a blocked jackknife error.
pub fn specific_heat(ts: &Timeseries) -> Result<JackknifeResult> {
    ts.nonempty()?;
    let s = ts.series(Observable::STot);
    if s.len() < 2 {
        return Ok(JackknifeResult {
            value: 0.0,
            error: 0.0,
            blocks: s.len(),
            block_size: 1,
            low_confidence: true,
        });
    }
    stats::jackknife_variance(&s)
}

/// `(value, error)` divided by the number of matrix entries `n^2`.
pub fn energy_density(ts: &Timeseries) -> Result<(f64, f64)> {
    let e = energy(ts)?;
    Ok((e.mean / ts.volume(), e.corrected_error / ts.volume()))
}

pub fn specific_heat_density(ts: &Timeseries) -> Result<(f64, f64)> {
    let c = specific_heat(ts)?;
    Ok((c.value / ts.volume(), c.error / ts.volume()))
}

/// Copy-averaged means of the four Lagrangian traces. The traces exclude
/// the global `(1+W^2)^-p` factor, so `F + V0 + V1 + D` equals the mean copy
/// action under `PrefactorMode::None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contributions {
    pub f: ErrorReport,
    pub v0: ErrorReport,
    pub v1: ErrorReport,
    pub d: ErrorReport,
}

impl Contributions {
    pub fn sum(&self) -> f64 {
        self.f.mean + self.v0.mean + self.v1.mean + self.d.mean
    }
}

pub fn contributions(ts: &Timeseries) -> Result<Contributions> {
    ts.nonempty()?;
    let rep = |o: Observable| stats::error_report(&ts.series(o));
    Ok(Contributions {
        f: rep(Observable::F)?,
        v0: rep(Observable::V0)?,
        v1: rep(Observable::V1)?,
        d: rep(Observable::D)?,
    })
}

/// Column names of the raw time-series CSV, in order.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "sweep_index",
        "s_tot",
        "s_a",
        "s_b",
        "f_a",
        "v0_a",
        "v1_a",
        "d_a",
        "f_b",
        "v0_b",
        "v1_b",
        "d_b",
        "phi_a2",
        "phi_02",
        "phi_12",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for kind in ["a2", "02", "12"] {
        h.extend((0..4).map(|i| format!("z{i}_{kind}")));
    }
    h
}

impl MeasurementRecord {
    fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.s_tot,
            self.s_a,
            self.s_b,
            self.f_a,
            self.v0_a,
            self.v1_a,
            self.d_a,
            self.f_b,
            self.v0_b,
            self.v1_b,
            self.d_b,
            self.phi_a2,
            self.phi_02,
            self.phi_12,
        ];
        v.extend_from_slice(&self.z_a2);
        v.extend_from_slice(&self.z_02);
        v.extend_from_slice(&self.z_12);
        v
    }

    fn from_values(sweep_index: u64, v: &[f64]) -> Self {
        let arr = |k: usize| [v[k], v[k + 1], v[k + 2], v[k + 3]];
        Self {
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
}

/// Writes records as CSV with a header row. Floats use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_csv<W: Write>(mut w: W, records: &[MeasurementRecord]) -> Result<()> {
    writeln!(w, "{}", csv_header().join(","))?;
    let mut line = String::new();
    for r in records {
        line.clear();
        write!(line, "{}", r.sweep_index).unwrap();
        for x in r.values() {
            write!(line, ",{x:?}").unwrap();
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses the CSV produced by [`write_csv`], validating the header, the
/// column count, finiteness and strictly increasing sweep indices.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<MeasurementRecord>> {
    let bad = |line: usize, msg: String| Error::InvalidParameter(format!("csv line {line}: {msg}"));
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad(1, "missing header".into()))??;
    let expected = csv_header();
    let found: Vec<&str> = header.trim_end().split(',').collect();
    if found != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut records = Vec::new();
    let mut last: Option<u64> = None;
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != expected.len() {
            return Err(bad(
                lineno,
                format!("expected {} columns, got {}", expected.len(), fields.len()),
            ));
        }
        let sweep: u64 = fields[0]
            .parse()
            .map_err(|_| bad(lineno, format!("bad sweep index `{}`", fields[0])))?;
        if last.is_some_and(|l| sweep <= l) {
            return Err(bad(lineno, "sweep indices not strictly increasing".into()));
        }
        last = Some(sweep);
        let mut vals = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            let x: f64 = f
                .parse()
                .map_err(|_| bad(lineno, format!("bad number `{f}`")))?;
            if !x.is_finite() {
                return Err(bad(lineno, format!("non-finite value `{f}`")));
            }
            vals.push(x);
        }
        records.push(MeasurementRecord::from_values(sweep, &vals));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::model::{evaluate_action, random_configuration, PrefactorMode};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record_for(
        cfg_a: &FieldConfiguration,
        cfg_b: &FieldConfiguration,
        p: &ModelParams,
    ) -> MeasurementRecord {
        let ba = evaluate_action(cfg_a, p).unwrap();
        let bb = evaluate_action(cfg_b, p).unwrap();
        measure(0, cfg_a, cfg_b, &ba, &bb, WeightMode::ProductTwoCopies)
    }

    fn ts_from(records: Vec<MeasurementRecord>, n: usize) -> Timeseries {
        Timeseries {
            params: ModelParams::new(1.0, 1.0, 0.0, n).unwrap(),
            mc: McConfig::default(),
            records,
            meta: ChainMeta::default(),
        }
    }

    fn series_ts(values: &[f64]) -> Timeseries {
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &s)| MeasurementRecord {
                sweep_index: i as u64,
                s_tot: s,
                ..Default::default()
            })
            .collect();
        ts_from(records, 1)
    }

    #[test]
    fn diagonal_psi_is_purely_spherical() {
        let mut cfg = FieldConfiguration::vacuum(3);
        cfg.psi = ComplexMatrix::from_fn(3, |i, j| {
            if i == j {
                ONE * (i as f64 + 1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let p = ModelParams::new(1.0, 1.0, 0.0, 3).unwrap();
        let r = record_for(&cfg, &cfg, &p);
        assert_eq!(r.phi_12, 0.0);
        assert_eq!(r.phi_02, r.phi_a2);
        assert_eq!(r.phi_a2, 14.0);
    }

    #[test]
    fn single_off_diagonal_entry() {
        let mut cfg = FieldConfiguration::vacuum(3);
        cfg.psi[(0, 1)] = Complex64::new(2.0, 0.0);
        let p = ModelParams::new(1.0, 1.0, 0.0, 3).unwrap();
        let r = record_for(&cfg, &cfg, &p);
        assert_eq!((r.phi_a2, r.phi_02, r.phi_12), (4.0, 0.0, 4.0));
    }

    #[test]
    fn copies_are_averaged() {
        let mut a = FieldConfiguration::vacuum(2);
        let b = FieldConfiguration::vacuum(2);
        a.z[2][(1, 1)] = Complex64::new(0.0, 3.0);
        let p = ModelParams::new(1.0, 1.0, 0.0, 2).unwrap();
        let r = record_for(&a, &b, &p);
        assert_eq!(r.z_a2[2], 4.5);
        assert_eq!(r.z_02[2], 4.5);
        assert_eq!(r.z_12[2], 0.0);
    }

    #[test]
    fn mode_decomposition_sums_to_full_power() {
        let m = ComplexMatrix::random_gaussian(4, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        // Oracle: differences of the cumulative off-diagonal power over the
        // leading (l+1) x (l+1) block; l = 0 is the whole diagonal.
        let cumulative = |l: usize| {
            let mut acc = 0.0;
            for i in 0..=l {
                for j in 0..=l {
                    if i != j {
                        acc += m[(i, j)].norm_sqr();
                    }
                }
            }
            acc
        };
        let mut shells = [0.0; 4];
        shells[0] = (0..4).map(|i| m[(i, i)].norm_sqr()).sum();
        for l in 1..4 {
            shells[l] = cumulative(l) - cumulative(l - 1);
        }
        let modes = mode_decomposition(&m);
        let full = frobenius_sq(&m);
        for l in 0..4 {
            assert!((modes[l] - shells[l]).abs() < 1e-13);
        }
        assert!((shells.iter().sum::<f64>() - full).abs() <= 1e-12);
        let p = ModePower::of(&m);
        assert!((p.first - modes[1]).abs() < 1e-15);
    }

    #[test]
    fn constant_series_statistics() {
        let ts = series_ts(&[2.5; 64]);
        let e = energy(&ts).unwrap();
        assert_eq!((e.mean, e.corrected_error), (2.5, 0.0));
        let c = specific_heat(&ts).unwrap();
        assert_eq!((c.value, c.error), (0.0, 0.0));
    }

    #[test]
    fn empty_series_is_rejected() {
        let ts = series_ts(&[]);
        assert!(matches!(energy(&ts), Err(Error::EmptySeries)));
        assert!(specific_heat(&ts).is_err());
        assert!(contributions(&ts).is_err());
    }

    #[test]
    fn gaussian_moments() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let ts = series_ts(&xs);
        let e = energy(&ts).unwrap();
        assert!(e.mean.abs() < 0.03);
        let c = specific_heat(&ts).unwrap();
        assert!((c.value - 1.0).abs() < 0.05);
    }

    #[test]
    fn correlated_series_inflates_error() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho: f64 = 0.8;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..50_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + (1.0 - rho * rho).sqrt() * e;
                x
            })
            .collect();
        let e = energy(&series_ts(&xs)).unwrap();
        let analytic = ((1.0 + rho) / (1.0 - rho)).sqrt();
        assert!(e.corrected_error > e.naive_error);
        assert!((e.corrected_error / e.naive_error / analytic - 1.0).abs() < 0.1);
    }

    #[test]
    fn contributions_sum_to_copy_action_without_prefactor() {
        let p = ModelParams::new(0.4, 1.0, 0.0, 4)
            .unwrap()
            .with_prefactor(PrefactorMode::None);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let records: Vec<_> = (0..40)
            .map(|i| {
                let a = random_configuration(&p, 0.5, &mut rng).unwrap();
                let b = random_configuration(&p, 0.5, &mut rng).unwrap();
                let mut r = record_for(&a, &b, &p);
                r.sweep_index = i;
                r
            })
            .collect();
        let mean_copy = records.iter().map(|r| 0.5 * (r.s_a + r.s_b)).sum::<f64>() / 40.0;
        let ts = ts_from(records, 4);
        let c = contributions(&ts).unwrap();
        assert!((c.sum() - mean_copy).abs() <= 1e-10 * mean_copy.abs());
    }

    #[test]
    fn vacuum_contributions_vanish() {
        let p = ModelParams::new(0.4, 1.0, 0.0, 3).unwrap();
        let vac = FieldConfiguration::vacuum(3);
        let records: Vec<_> = (0..20)
            .map(|i| MeasurementRecord {
                sweep_index: i,
                ..record_for(&vac, &vac, &p)
            })
            .collect();
        let c = contributions(&ts_from(records, 3)).unwrap();
        assert_eq!(c.sum(), 0.0);
    }

    #[test]
    fn block_diagonal_doubling_doubles_traces() {
        let p = ModelParams::new(0.7, 1.0, 0.0, 3).unwrap();
        let p2 = ModelParams::new(0.7, 1.0, 0.0, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_configuration(&p, 0.5, &mut rng).unwrap();
        let doubled = FieldConfiguration {
            psi: a.psi.direct_sum(&a.psi),
            z: std::array::from_fn(|i| a.z[i].direct_sum(&a.z[i])),
        };
        let r1 = record_for(&a, &a, &p);
        let r2 = record_for(&doubled, &doubled, &p2);
        assert!((r2.s_a - 2.0 * r1.s_a).abs() < 1e-12 * r1.s_a.abs());
        assert!((r2.f_a - 2.0 * r1.f_a).abs() < 1e-12 * r1.s_a.abs());
        assert!((r2.d_a - 2.0 * r1.d_a).abs() < 1e-12 * r1.s_a.abs());
        assert!((r2.phi_a2 - 2.0 * r1.phi_a2).abs() < 1e-12 * r1.phi_a2);
        assert!((r2.phi_02 - 2.0 * r1.phi_02).abs() < 1e-12 * r1.phi_a2);
    }

    #[test]
    fn malformed_csv_is_flagged() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[MeasurementRecord::default()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated = text.trim_end().rsplit_once(',').unwrap().0.to_string() + "\n";
        assert!(read_csv(truncated.as_bytes()).is_err());
        let bad_number = text.replacen(",0.0", ",zero", 1);
        assert!(read_csv(bad_number.as_bytes()).is_err());
        assert!(read_csv("nope\n".as_bytes()).is_err());
        let dup = format!("{}{}", text, text.lines().nth(1).unwrap());
        assert!(read_csv(dup.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(vals in proptest::collection::vec(-1e300f64..1e300, 26), sweep in 0u64..1_000_000) {
            let r = MeasurementRecord::from_values(sweep, &vals);
            let mut buf = Vec::new();
            write_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, vec![r]);
        }
    }
}
