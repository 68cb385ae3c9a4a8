//! Single-entry updates of the action in `O(n)` per affected term.
//!
//! Changing entry `(r, c)` of one field by `delta` perturbs every core matrix
//! of [`TermMatrices`] only on rows and columns `{r, c}` (the "cross"). The
//! change of `Tr M^2` or `Tr M M^dagger` then follows from the cross entries
//! alone, and committing an accepted update touches the same entries.

use num_complex::Complex64;

use super::action::{
    Part, TermMatrices, CORE_COUNT, COVARIANT, KA, KB, LD0, MIX0, MIXED, VAC_Z, VAC_ZD, X0, X1,
};
use super::{ActionBreakdown, FieldConfiguration, ModelParams, FIELDS_PER_COPY};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ZERO};

/// At most two nonzero entries: a single-entry change and its adjoint image.
#[derive(Clone, Copy, Debug)]
struct Sparse {
    e: [(usize, usize, Complex64); 2],
    len: usize,
}

impl Sparse {
    fn single(r: usize, c: usize, v: Complex64) -> Self {
        Self {
            e: [(r, c, v), (0, 0, ZERO)],
            len: 1,
        }
    }

    fn combine(a: &Sparse, b: &Sparse, sign: f64) -> Self {
        let (r0, c0, v0) = a.e[0];
        let (r1, c1, v1) = b.e[0];
        if r0 == r1 && c0 == c1 {
            Self::single(r0, c0, v0 + v1 * sign)
        } else {
            Self {
                e: [(r0, c0, v0), (r1, c1, v1 * sign)],
                len: 2,
            }
        }
    }

    fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.e[..self.len]
    }
}

/// Perturbation of one field entry and derived perturbations of its adjoint
/// and Hermitian/anti-Hermitian parts.
struct FieldDelta {
    d: Sparse,
    dd: Sparse,
    dp: Sparse,
    dq: Sparse,
}

impl FieldDelta {
    fn new(r: usize, c: usize, delta: Complex64) -> Self {
        let d = Sparse::single(r, c, delta);
        let dd = Sparse::single(c, r, delta.conj());
        Self {
            d,
            dd,
            dp: Sparse::combine(&d, &dd, 1.0),
            dq: Sparse::combine(&d, &dd, -1.0),
        }
    }

    fn part(&self, p: Part) -> &Sparse {
        match p {
            Part::P => &self.dp,
            Part::Q => &self.dq,
        }
    }
}

/// Writes into a dense scratch matrix that is nonzero only on the cross.
struct Acc<'a> {
    out: &'a mut [Complex64],
    n: usize,
}

impl Acc<'_> {
    fn sp(&mut self, s: Complex64, a: &Sparse) {
        for &(i, j, v) in a.entries() {
            self.out[i * self.n + j] += s * v;
        }
    }

    /// `+= s * a * b` with `a` sparse: fills rows of `out`.
    fn sp_dense(&mut self, s: Complex64, a: &Sparse, b: &ComplexMatrix) {
        let n = self.n;
        for &(i, k, v) in a.entries() {
            let sv = s * v;
            let row = &mut self.out[i * n..(i + 1) * n];
            for (o, bkj) in row.iter_mut().zip(b.row(k)) {
                *o += sv * bkj;
            }
        }
    }

    /// `+= s * a * b` with `b` sparse: fills columns of `out`.
    fn dense_sp(&mut self, s: Complex64, a: &ComplexMatrix, b: &Sparse) {
        let n = self.n;
        let ad = a.as_slice();
        for &(k, j, v) in b.entries() {
            let sv = s * v;
            for i in 0..n {
                self.out[i * n + j] += sv * ad[i * n + k];
            }
        }
    }

    fn sp_sp(&mut self, s: Complex64, a: &Sparse, b: &Sparse) {
        for &(i, k, v) in a.entries() {
            for &(k2, j, w) in b.entries() {
                if k == k2 {
                    self.out[i * self.n + j] += s * v * w;
                }
            }
        }
    }

    /// `+= s * Delta(a b)` for a product of two perturbed factors.
    fn product(
        &mut self,
        s: Complex64,
        a: &ComplexMatrix,
        da: &Sparse,
        b: &ComplexMatrix,
        db: &Sparse,
    ) {
        self.sp_dense(s, da, b);
        self.dense_sp(s, a, db);
        self.sp_sp(s, da, db);
    }
}

/// Calls `f(i, j)` once for every position in rows or columns `idx`.
#[inline]
fn for_cross(n: usize, idx: &[usize], mut f: impl FnMut(usize, usize)) {
    for &i in idx {
        for j in 0..n {
            f(i, j);
        }
    }
    for i in 0..n {
        if idx.contains(&i) {
            continue;
        }
        for &j in idx {
            f(i, j);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TermKind {
    /// Enters as `Tr M^2`.
    Square,
    /// Enters as `Tr M M^dagger`.
    Norm,
}

fn kind(core: usize) -> TermKind {
    if core < X0 {
        TermKind::Square
    } else {
        TermKind::Norm
    }
}

/// Core matrices that depend on field `field` (0 = psi, 1..=4 = Z0..Z3).
fn affected(field: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(8);
    if field == 0 {
        out.extend([X0, X1]);
        out.extend((0..4).map(|k| LD0 + k));
        return out;
    }
    let i = field - 1;
    match i {
        0 => out.push(KA),
        1 => out.push(KB),
        _ => {}
    }
    for (m, &(_, li, _, ri, _)) in MIXED.iter().enumerate() {
        if li == i || ri == i {
            out.push(MIX0 + m);
        }
    }
    out.push(if i % 2 == 0 { X0 } else { X1 });
    for (k, &(_, hi, lo)) in COVARIANT.iter().enumerate() {
        if hi == i || lo == i {
            out.push(LD0 + k);
        }
    }
    out
}

#[derive(Clone, Debug)]
struct Pending {
    field: usize,
    row: usize,
    col: usize,
    new_entry: Complex64,
    idx: [usize; 2],
    nidx: usize,
    /// Changes of (commutator bracket, v0, v1, d).
    dterms: [f64; 4],
    delta_total: f64,
}

/// Action of one copy with every intermediate matrix cached.
#[derive(Clone, Debug)]
pub struct ActionCache {
    tm: TermMatrices,
    n: usize,
    /// Commutator bracket multiplying `D/2`, then `v0`, `v1`, `d`.
    terms: [f64; 4],
    scratch: Vec<ComplexMatrix>,
    affected: [Vec<usize>; FIELDS_PER_COPY],
    pending: Option<Pending>,
}

impl ActionCache {
    pub fn new(cfg: &FieldConfiguration, params: &ModelParams) -> Result<Self> {
        let tm = TermMatrices::build(cfg, params)?;
        let n = params.n();
        let terms = Self::raw_terms(&tm);
        let cache = Self {
            tm,
            n,
            terms,
            scratch: vec![ComplexMatrix::zeros(n); CORE_COUNT],
            affected: std::array::from_fn(affected),
            pending: None,
        };
        cache.breakdown()?;
        Ok(cache)
    }

    fn raw_terms(tm: &TermMatrices) -> [f64; 4] {
        let [_, v0, v1, d] = tm.term_values();
        [tm.commutator_sum(), v0, v1, d]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn breakdown(&self) -> Result<ActionBreakdown> {
        let c = &self.tm.coeffs;
        let b = ActionBreakdown::from_terms(
            0.5 * c.d_coeff * self.terms[0],
            self.terms[1],
            self.terms[2],
            self.terms[3],
            c.prefactor,
        );
        if !b.is_finite() {
            return Err(Error::Blowup(format!("non-finite cached action {b:?}")));
        }
        Ok(b)
    }

    pub fn total(&self) -> f64 {
        let c = &self.tm.coeffs;
        c.prefactor
            * (0.5 * c.d_coeff * self.terms[0] + self.terms[1] + self.terms[2] + self.terms[3])
    }

    pub fn entry(&self, field: usize, row: usize, col: usize) -> Complex64 {
        self.field(field)[(row, col)]
    }

    fn field(&self, field: usize) -> &ComplexMatrix {
        match field {
            0 => &self.tm.psi,
            i => &self.tm.z[i - 1],
        }
    }

    pub fn configuration(&self) -> FieldConfiguration {
        FieldConfiguration {
            psi: self.tm.psi.clone(),
            z: self.tm.z.clone(),
        }
    }

    fn check_indices(&self, field: usize, row: usize, col: usize) -> Result<()> {
        if field >= FIELDS_PER_COPY {
            return Err(Error::IndexOutOfRange {
                what: "field",
                index: field,
                limit: FIELDS_PER_COPY,
            });
        }
        for (what, index) in [("row", row), ("col", col)] {
            if index >= self.n {
                return Err(Error::IndexOutOfRange {
                    what,
                    index,
                    limit: self.n,
                });
            }
        }
        Ok(())
    }

    /// Change of the total action if entry `(row, col)` of `field` were set to
    /// `new_entry`. The proposal stays pending until [`accept`](Self::accept)
    /// or [`reject`](Self::reject); a new proposal discards the previous one.
    pub fn propose(
        &mut self,
        field: usize,
        row: usize,
        col: usize,
        new_entry: Complex64,
    ) -> Result<f64> {
        self.check_indices(field, row, col)?;
        self.reject();
        let delta = new_entry - self.entry(field, row, col);
        let (idx, nidx) = if row == col {
            ([row, row], 1)
        } else {
            ([row, col], 2)
        };
        let fd = FieldDelta::new(row, col, delta);
        let mut dterms = [0.0; 4];

        if delta != ZERO {
            for ai in 0..self.affected[field].len() {
                let core = self.affected[field][ai];
                self.fill_delta(core, field, &fd);
                let d = self.trace_change(core, &idx[..nidx]);
                match core {
                    KA | KB => dterms[0] += d,
                    c if c < X0 => dterms[0] += 0.25 * MIXED[c - MIX0].4 * d,
                    X0 => dterms[1] += d,
                    X1 => dterms[2] += d,
                    _ => dterms[3] += d,
                }
            }
        }

        let c = &self.tm.coeffs;
        let delta_total =
            c.prefactor * (0.5 * c.d_coeff * dterms[0] + dterms[1] + dterms[2] + dterms[3]);
        self.pending = Some(Pending {
            field,
            row,
            col,
            new_entry,
            idx,
            nidx,
            dterms,
            delta_total,
        });
        if !delta_total.is_finite() {
            self.reject();
            return Err(Error::Blowup(format!(
                "non-finite action change for field {field} entry ({row}, {col})"
            )));
        }
        Ok(delta_total)
    }

    fn fill_delta(&mut self, core: usize, field: usize, fd: &FieldDelta) {
        let tm = &self.tm;
        let c = &tm.coeffs;
        let one = Complex64::new(1.0, 0.0);
        let dcos = Complex64::new(c.dcos, 0.0);
        let dfac = Complex64::new(c.dfac, 0.0);
        let mut acc = Acc {
            out: self.scratch[core].as_mut_slice(),
            n: self.n,
        };
        let part = |p: Part, i: usize| match p {
            Part::P => &tm.p[i],
            Part::Q => &tm.q[i],
        };

        if field == 0 {
            match core {
                X0 => {
                    acc.product(one, &tm.psi, &fd.d, &tm.psi_d, &fd.dd);
                    acc.sp(dcos, &fd.d);
                    acc.sp(dcos, &fd.dd);
                }
                X1 => {
                    acc.product(one, &tm.psi_d, &fd.dd, &tm.psi, &fd.d);
                    acc.sp(dcos, &fd.d);
                    acc.sp(dcos, &fd.dd);
                }
                _ => {
                    let (pt, hi, lo) = COVARIANT[core - LD0];
                    acc.sp_dense(dfac, &fd.d, part(pt, hi));
                    acc.dense_sp(-dfac, part(pt, lo), &fd.d);
                }
            }
            return;
        }

        let i = field - 1;
        let (z, zd) = (&tm.z[i], &tm.zd[i]);
        match core {
            KA | KB => {
                acc.product(one, zd, &fd.dd, z, &fd.d);
                acc.product(-one, z, &fd.d, zd, &fd.dd);
            }
            X0 | X1 => {
                let half = Complex64::new(0.5, 0.0);
                acc.product(half, zd, &fd.dd, z, &fd.d);
                acc.product(half, z, &fd.d, zd, &fd.dd);
                let vac = Complex64::new(c.vac_lin, 0.0);
                acc.sp(vac * VAC_Z, &fd.d);
                acc.sp(vac * VAC_ZD, &fd.dd);
            }
            m if m < X0 => {
                let (lp, li, rp, ri, _) = MIXED[m - MIX0];
                if li == i {
                    let dl = fd.part(lp);
                    let r = part(rp, ri);
                    acc.sp_dense(one, dl, r);
                    acc.dense_sp(-one, r, dl);
                } else {
                    let dr = fd.part(rp);
                    let l = part(lp, li);
                    acc.dense_sp(one, l, dr);
                    acc.sp_dense(-one, dr, l);
                }
            }
            _ => {
                let (pt, hi, lo) = COVARIANT[core - LD0];
                let dw = fd.part(pt);
                if hi == i {
                    acc.sp(dfac * dcos, dw);
                    acc.dense_sp(dfac, &tm.psi, dw);
                } else {
                    debug_assert_eq!(lo, i);
                    acc.sp(-dfac * dcos, dw);
                    acc.sp_dense(-dfac, dw, &tm.psi);
                }
            }
        }
    }

    fn trace_change(&self, core: usize, idx: &[usize]) -> f64 {
        let n = self.n;
        let m = self.tm.core[core].as_slice();
        let d = self.scratch[core].as_slice();
        match kind(core) {
            TermKind::Square => {
                let mut lin = ZERO;
                let mut quad = ZERO;
                for_cross(n, idx, |i, j| {
                    let dij = d[i * n + j];
                    lin += m[j * n + i] * dij;
                    quad += dij * d[j * n + i];
                });
                (2.0 * lin + quad).re
            }
            TermKind::Norm => {
                let mut lin = 0.0;
                let mut quad = 0.0;
                for_cross(n, idx, |i, j| {
                    let dij = d[i * n + j];
                    lin += (m[i * n + j].conj() * dij).re;
                    quad += dij.norm_sqr();
                });
                2.0 * lin + quad
            }
        }
    }

    /// Commits the pending proposal. Returns `false` if nothing was pending.
    pub fn accept(&mut self) -> bool {
        let Some(p) = self.pending.take() else {
            return false;
        };
        let n = self.n;
        let idx = &p.idx[..p.nidx];
        for &core in &self.affected[p.field] {
            let (m, d) = (&mut self.tm.core[core], &mut self.scratch[core]);
            let (ms, ds) = (m.as_mut_slice(), d.as_mut_slice());
            for_cross(n, idx, |i, j| {
                ms[i * n + j] += ds[i * n + j];
                ds[i * n + j] = ZERO;
            });
        }
        let (r, c, w) = (p.row, p.col, p.new_entry);
        if p.field == 0 {
            self.tm.psi[(r, c)] = w;
            self.tm.psi_d[(c, r)] = w.conj();
        } else {
            let i = p.field - 1;
            let old = self.tm.z[i][(r, c)];
            self.tm.z[i][(r, c)] = w;
            self.tm.zd[i][(c, r)] = w.conj();
            let delta = w - old;
            let fd = FieldDelta::new(r, c, delta);
            for &(a, b, v) in fd.dp.entries() {
                self.tm.p[i][(a, b)] += v;
            }
            for &(a, b, v) in fd.dq.entries() {
                self.tm.q[i][(a, b)] += v;
            }
        }
        for k in 0..4 {
            self.terms[k] += p.dterms[k];
        }
        true
    }

    /// Drops the pending proposal, if any.
    pub fn reject(&mut self) {
        let Some(p) = self.pending.take() else {
            return;
        };
        let n = self.n;
        let idx = &p.idx[..p.nidx];
        for &core in &self.affected[p.field] {
            let ds = self.scratch[core].as_mut_slice();
            for_cross(n, idx, |i, j| ds[i * n + j] = ZERO);
        }
    }

    /// Change of the action left by the pending proposal.
    pub fn pending_delta(&self) -> Option<f64> {
        self.pending.as_ref().map(|p| p.delta_total)
    }

    /// Rebuilds every cached matrix from the current fields. Returns the
    /// relative drift `|cached - fresh| / (1 + |fresh|)` of the total.
    pub fn refresh(&mut self, params: &ModelParams) -> Result<f64> {
        self.reject();
        let cached = self.total();
        let cfg = self.configuration();
        self.tm = TermMatrices::build(&cfg, params)?;
        self.terms = Self::raw_terms(&self.tm);
        let fresh = self.total();
        if !fresh.is_finite() {
            return Err(Error::Blowup("non-finite action on refresh".into()));
        }
        Ok((cached - fresh).abs() / (1.0 + fresh.abs()))
    }
}

/// `S(cfg with one entry replaced) - S(cfg)`.
pub fn delta_action(
    cfg: &FieldConfiguration,
    params: &ModelParams,
    field_index: usize,
    row: usize,
    col: usize,
    new_entry: Complex64,
) -> Result<f64> {
    let mut cache = ActionCache::new(cfg, params)?;
    cache.propose(field_index, row, col, new_entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate_action, random_configuration};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn full_delta(
        cfg: &FieldConfiguration,
        p: &ModelParams,
        f: usize,
        r: usize,
        c: usize,
        w: Complex64,
    ) -> (f64, f64) {
        let before = evaluate_action(cfg, p).unwrap().total;
        let mut changed = cfg.clone();
        changed.field_mut(f)[(r, c)] = w;
        (evaluate_action(&changed, p).unwrap().total - before, before)
    }

    #[test]
    fn unchanged_entry_gives_zero() {
        let p = ModelParams::new(0.7, 1.0, 0.5, 4).unwrap();
        let cfg = random_configuration(&p, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for f in 0..5 {
            let w = cfg.field(f)[(1, 2)];
            assert_eq!(delta_action(&cfg, &p, f, 1, 2, w).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_updates_match_full_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(omega, mu, alpha) in &[
            (1.0, 1.0, 0.0),
            (0.0, 2.0, 1.0),
            (0.4, 0.0, 2.0),
            (2.5, 3.0, 5.0),
        ] {
            let p = ModelParams::new(omega, mu, alpha, 4).unwrap();
            let cfg = random_configuration(&p, 0.6, &mut rng).unwrap();
            for _ in 0..60 {
                let f = rng.random_range(0..5);
                let r = rng.random_range(0..4);
                let c = rng.random_range(0..4);
                let w = cfg.field(f)[(r, c)]
                    + Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                let fast = delta_action(&cfg, &p, f, r, c, w).unwrap();
                let (slow, s) = full_delta(&cfg, &p, f, r, c, w);
                assert!(
                    (fast - slow).abs() <= 1e-10 * s.abs().max(slow.abs()),
                    "{fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn accepted_updates_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ModelParams::new(0.9, 1.2, 0.7, 5).unwrap();
        let cfg = random_configuration(&p, 0.5, &mut rng).unwrap();
        let mut cache = ActionCache::new(&cfg, &p).unwrap();
        let start = cache.total();
        let mut sum = 0.0;
        for _ in 0..500 {
            let f = rng.random_range(0..5);
            let r = rng.random_range(0..5);
            let c = rng.random_range(0..5);
            let w = cache.entry(f, r, c)
                + Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.3;
            let d = cache.propose(f, r, c, w).unwrap();
            if rng.random::<bool>() {
                cache.accept();
                sum += d;
            } else {
                cache.reject();
            }
        }
        let fresh = evaluate_action(&cache.configuration(), &p).unwrap();
        assert!((start + sum - fresh.total).abs() <= 1e-9 * fresh.total.abs());
        let cached = cache.breakdown().unwrap();
        for (a, b) in [
            (cached.f_term, fresh.f_term),
            (cached.v0_term, fresh.v0_term),
            (cached.v1_term, fresh.v1_term),
            (cached.d_term, fresh.d_term),
        ] {
            assert!((a - b).abs() <= 1e-9 * fresh.total.abs().max(1.0));
        }
        assert!(cache.refresh(&p).unwrap() < 1e-10);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let p = ModelParams::new(1.0, 1.0, 0.0, 3).unwrap();
        let cfg = FieldConfiguration::vacuum(3);
        assert!(matches!(
            delta_action(&cfg, &p, 5, 0, 0, ZERO),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(delta_action(&cfg, &p, 0, 3, 0, ZERO).is_err());
        assert!(delta_action(&cfg, &p, 0, 0, 3, ZERO).is_err());
    }

    #[test]
    fn reject_leaves_cache_untouched() {
        let p = ModelParams::new(1.0, 1.0, 0.3, 3).unwrap();
        let cfg = random_configuration(&p, 0.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut cache = ActionCache::new(&cfg, &p).unwrap();
        let before = cache.total();
        cache.propose(2, 0, 1, Complex64::new(3.0, 1.0)).unwrap();
        cache.reject();
        cache.propose(0, 2, 2, Complex64::new(-1.0, 0.5)).unwrap();
        cache.reject();
        assert_eq!(cache.total(), before);
        assert_eq!(cache.configuration(), cfg);
        assert!(!cache.accept());
    }
}
