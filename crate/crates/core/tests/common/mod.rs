//! Deliberately naive second implementation of the copy action: dense
//! `Vec<Vec<_>>` matrices, triple loops, every term rebuilt from scratch.

#![allow(dead_code)]

use ncgauge::model::{ActionBreakdown, DVariant, FieldConfiguration, ModelParams, PrefactorMode};
use ncgauge::sampler::Evaluator;
use ncgauge::Result;
use num_complex::Complex64;

type M = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn to_m(cfg: &FieldConfiguration, field: usize) -> M {
    let a = cfg.field(field);
    let n = a.dim();
    (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).collect())
        .collect()
}

fn zeros(n: usize) -> M {
    vec![vec![c(0.0, 0.0); n]; n]
}

fn dag(a: &M) -> M {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| a[j][i].conj()).collect())
        .collect()
}

fn add(a: &M, b: &M) -> M {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

fn sub(a: &M, b: &M) -> M {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect()
}

fn smul(k: Complex64, a: &M) -> M {
    a.iter()
        .map(|r| r.iter().map(|x| k * x).collect())
        .collect()
}

fn mm(a: &M, b: &M) -> M {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = c(0.0, 0.0);
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn comm(a: &M, b: &M) -> M {
    sub(&mm(a, b), &mm(b, a))
}

fn acomm(a: &M, b: &M) -> M {
    add(&mm(a, b), &mm(b, a))
}

fn tr(a: &M) -> Complex64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

fn tr_sq(a: &M) -> Complex64 {
    tr(&mm(a, a))
}

fn tr_aadag(a: &M) -> Complex64 {
    tr(&mm(a, &dag(a)))
}

/// Complex traces of each term (imaginary parts should vanish) and the
/// real total.
pub struct NaiveTerms {
    pub f: Complex64,
    pub v0: Complex64,
    pub v1: Complex64,
    pub d: Complex64,
    pub total: f64,
}

pub fn naive_action(cfg: &FieldConfiguration, p: &ModelParams) -> NaiveTerms {
    let w2 = p.omega() * p.omega();
    let d_coeff = match p.d_variant {
        DVariant::AsPrintedSf => {
            (1.0 - w2).powi(2) / 2.0 - (1.0 + w2).powi(4) / (6.0 * (1.0 + w2).powi(2))
        }
        DVariant::AsPrintedSpecAct => {
            (1.0 + w2).powi(2) / 2.0 - (1.0 - w2).powi(4) / (6.0 * (1.0 + w2).powi(2))
        }
    };
    let pref = match p.prefactor_mode {
        PrefactorMode::PowerOne => 1.0 / (1.0 + w2),
        PrefactorMode::PowerTwo => 1.0 / (1.0 + w2).powi(2),
        PrefactorMode::None => 1.0,
    };
    let mc = p.mu() * p.alpha().cos();
    // mu sin(alpha) / (2 sqrt(C)) with C = (1 + W^2) / (4 W^2), written
    // without the division so that W = 0 is regular.
    let vl = p.mu() * p.alpha().sin() * p.omega() / (1.0 + w2).sqrt();
    let dfac = (2.0 * (1.0 + w2)).sqrt();

    let psi = to_m(cfg, 0);
    let z: Vec<M> = (1..5).map(|f| to_m(cfg, f)).collect();
    let zb: Vec<M> = z.iter().map(dag).collect();
    let psib = dag(&psi);
    let pl = |i: usize| add(&z[i], &zb[i]);
    let mi = |i: usize| sub(&z[i], &zb[i]);

    let bracket = tr_sq(&comm(&zb[0], &z[0]))
        + tr_sq(&comm(&zb[1], &z[1]))
        + 0.25
            * (tr_sq(&comm(&pl(0), &mi(2))) - tr_sq(&comm(&pl(0), &pl(2)))
                + tr_sq(&comm(&mi(0), &pl(2)))
                - tr_sq(&comm(&mi(0), &mi(2)))
                - tr_sq(&comm(&pl(1), &pl(3)))
                + tr_sq(&comm(&pl(1), &mi(3)))
                + tr_sq(&comm(&mi(1), &pl(3)))
                - tr_sq(&comm(&mi(1), &mi(3))));
    let f = bracket * (d_coeff / 2.0);

    // Hermitian form of the vacuum-linear term: (1 - i) Z + (1 + i) Z^dagger.
    let potential = |quad: M, a: usize, b: usize| {
        let mut x = quad;
        x = add(&x, &smul(c(mc, 0.0), &add(&psi, &psib)));
        x = add(
            &x,
            &smul(
                c(0.5, 0.0),
                &add(&acomm(&zb[a], &z[a]), &acomm(&zb[b], &z[b])),
            ),
        );
        let lin = add(
            &smul(c(1.0, -1.0), &add(&z[a], &z[b])),
            &smul(c(1.0, 1.0), &add(&zb[a], &zb[b])),
        );
        x = add(&x, &smul(c(vl, 0.0), &lin));
        tr_sq(&x)
    };
    let v0 = potential(mm(&psi, &psib), 0, 2);
    let v1 = potential(mm(&psib, &psi), 1, 3);

    let cov = |hi: M, lo: M| {
        let inner = add(
            &smul(c(mc, 0.0), &sub(&hi, &lo)),
            &sub(&mm(&psi, &hi), &mm(&lo, &psi)),
        );
        tr_aadag(&smul(c(dfac, 0.0), &inner))
    };
    let d = cov(pl(1), pl(0)) + cov(mi(1), mi(0)) + cov(pl(3), pl(2)) + cov(mi(3), mi(2));
    let total = pref * (f.re + v0.re + v1.re + d.re);
    NaiveTerms {
        f,
        v0,
        v1,
        d,
        total,
    }
}

/// Evaluator that recomputes the whole action for every proposal.
#[derive(Clone, Debug)]
pub struct NaiveEvaluator {
    cfg: FieldConfiguration,
    params: ModelParams,
    total: f64,
    pending: Option<(usize, usize, usize, Complex64, f64)>,
}

impl Evaluator for NaiveEvaluator {
    fn build(cfg: &FieldConfiguration, params: &ModelParams) -> Result<Self> {
        Ok(Self {
            cfg: cfg.clone(),
            params: *params,
            total: naive_action(cfg, params).total,
            pending: None,
        })
    }
    fn total(&self) -> f64 {
        self.total
    }
    fn breakdown(&self) -> Result<ActionBreakdown> {
        let t = naive_action(&self.cfg, &self.params);
        let pref = self.params.coefficients().prefactor;
        Ok(ActionBreakdown::from_terms(
            t.f.re, t.v0.re, t.v1.re, t.d.re, pref,
        ))
    }
    fn entry(&self, field: usize, row: usize, col: usize) -> Complex64 {
        self.cfg.field(field)[(row, col)]
    }
    fn propose(&mut self, field: usize, row: usize, col: usize, entry: Complex64) -> Result<f64> {
        let mut trial = self.cfg.clone();
        trial.field_mut(field)[(row, col)] = entry;
        let s = naive_action(&trial, &self.params).total;
        self.pending = Some((field, row, col, entry, s));
        Ok(s - self.total)
    }
    fn accept(&mut self) {
        if let Some((f, r, c, e, s)) = self.pending.take() {
            self.cfg.field_mut(f)[(r, c)] = e;
            self.total = s;
        }
    }
    fn reject(&mut self) {
        self.pending = None;
    }
    fn refresh(&mut self, params: &ModelParams) -> Result<f64> {
        let fresh = naive_action(&self.cfg, params).total;
        let drift = (self.total - fresh).abs() / (1.0 + fresh.abs());
        self.total = fresh;
        Ok(drift)
    }
    fn configuration(&self) -> FieldConfiguration {
        self.cfg.clone()
    }
}
