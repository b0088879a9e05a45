//! Three-headed output block and previous-step embedding fusion, with a
//! hand-written backward pass checked against finite differences.
//!
//! Conventions: a matrix `W` of shape `r x c` maps `x` (length `r`) to
//! `W^T x` (length `c`). Head outputs cover content tokens only, so head
//! class `k` is vocabulary id `k + 3`. Embedding tables are indexed by
//! vocabulary id and include the control rows.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::vocab::{SyllableIds, Vocabulary, CONTROL_TOKENS};

pub const LN_EPS: f64 = 1e-5;
pub const INIT_RANGE: f64 = 0.1;
pub const TONE_CLASSES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeadError {
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: String,
        found: String,
    },
    #[error("{table} id {id} out of range (size {size})")]
    IdOutOfRange {
        table: &'static str,
        id: usize,
        size: usize,
    },
    #[error("sequence lengths differ across heads: {0:?}")]
    LengthMismatch([usize; 3]),
    #[error("parameter file line {line}: {message}")]
    Format { line: usize, message: String },
}

fn mismatch(
    what: impl Into<String>,
    expected: impl fmt::Display,
    found: impl fmt::Display,
) -> HeadError {
    HeadError::ShapeMismatch {
        what: what.into(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix, HeadError> {
        if data.len() != rows * cols {
            return Err(mismatch("matrix data", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `W^T x`.
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += w * xi;
            }
        }
        out
    }

    /// `W y`.
    pub fn matvec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(y).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// `self += a b^T`.
    fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (i, &ai) in a.iter().enumerate() {
            for (w, &bj) in self.row_mut(i).iter_mut().zip(b) {
                *w += ai * bj;
            }
        }
    }

    fn add_row(&mut self, i: usize, v: &[f64]) {
        for (w, x) in self.row_mut(i).iter_mut().zip(v) {
            *w += x;
        }
    }

    fn add_vec(&mut self, v: &[f64]) {
        for (w, x) in self.data.iter_mut().zip(v) {
            *w += x;
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Init,
    /// Projects onto the rhyme vocabulary.
    Vowel,
    Tone,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Init, Head::Vowel, Head::Tone];

    pub fn name(self) -> &'static str {
        match self {
            Head::Init => "init",
            Head::Vowel => "vowel",
            Head::Tone => "tone",
        }
    }
}

/// Model width and per-head output sizes (content tokens only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeadConfig {
    pub d: usize,
    pub v_init: usize,
    pub v_rhyme: usize,
    pub v_tone: usize,
}

impl HeadConfig {
    pub fn new(d: usize, v_init: usize, v_rhyme: usize) -> HeadConfig {
        HeadConfig {
            d,
            v_init,
            v_rhyme,
            v_tone: TONE_CLASSES,
        }
    }

    pub fn from_vocab(vocab: &Vocabulary, d: usize) -> HeadConfig {
        HeadConfig::new(d, vocab.initials.content_len(), vocab.rhymes.content_len())
    }

    pub fn classes(&self, head: Head) -> usize {
        match head {
            Head::Init => self.v_init,
            Head::Vowel => self.v_rhyme,
            Head::Tone => self.v_tone,
        }
    }

    /// Rows of the embedding table feeding this component back in.
    pub fn embedding_rows(&self, head: Head) -> usize {
        self.classes(head) + CONTROL_TOKENS.len()
    }

    pub fn validate(&self) -> Result<(), HeadError> {
        if self.v_tone != TONE_CLASSES {
            return Err(mismatch("tone classes", TONE_CLASSES, self.v_tone));
        }
        if self.d == 0 || self.v_init == 0 || self.v_rhyme == 0 {
            return Err(mismatch("config", "non-zero sizes", format!("{self:?}")));
        }
        Ok(())
    }
}

/// Parameters of one head: layer norm, the two projections, output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FfnParams {
    pub gain: Matrix,
    pub bias: Matrix,
    pub w_u: Matrix,
    pub w_d: Matrix,
    pub w_out: Matrix,
    pub b_out: Matrix,
}

impl FfnParams {
    fn zeros(d: usize, v: usize) -> FfnParams {
        FfnParams {
            gain: Matrix::zeros(1, d),
            bias: Matrix::zeros(1, d),
            w_u: Matrix::zeros(d, 2 * d),
            w_d: Matrix::zeros(2 * d, d),
            w_out: Matrix::zeros(d, v),
            b_out: Matrix::zeros(1, v),
        }
    }

    fn d(&self) -> usize {
        self.gain.cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub config: HeadConfig,
    pub heads: [FfnParams; 3],
    pub e_init: Matrix,
    pub e_rhyme: Matrix,
    pub e_tone: Matrix,
    pub w_e: Matrix,
}

impl HeadParams {
    pub fn zeros(config: HeadConfig) -> HeadParams {
        let d = config.d;
        HeadParams {
            config,
            heads: Head::ALL.map(|h| FfnParams::zeros(d, config.classes(h))),
            e_init: Matrix::zeros(config.embedding_rows(Head::Init), d),
            e_rhyme: Matrix::zeros(config.embedding_rows(Head::Vowel), d),
            e_tone: Matrix::zeros(config.embedding_rows(Head::Tone), d),
            w_e: Matrix::zeros(3 * d, d),
        }
    }

    /// Every entry uniform in [-0.1, 0.1], reproducible from `seed`.
    pub fn random(config: HeadConfig, seed: u64) -> HeadParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = HeadParams::zeros(config);
        for (_, t) in p.tensors_mut() {
            *t = Matrix::random(t.rows, t.cols, &mut rng);
        }
        p
    }

    pub fn head(&self, h: Head) -> &FfnParams {
        &self.heads[h as usize]
    }

    pub fn head_mut(&mut self, h: Head) -> &mut FfnParams {
        &mut self.heads[h as usize]
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (h, f) in Head::ALL.iter().zip(&self.heads) {
            let n = h.name();
            out.push((format!("{n}.ln_gain"), &f.gain));
            out.push((format!("{n}.ln_bias"), &f.bias));
            out.push((format!("{n}.w_u"), &f.w_u));
            out.push((format!("{n}.w_d"), &f.w_d));
            out.push((format!("{n}.w_out"), &f.w_out));
            out.push((format!("{n}.b_out"), &f.b_out));
        }
        out.push(("e_init".into(), &self.e_init));
        out.push(("e_rhyme".into(), &self.e_rhyme));
        out.push(("e_tone".into(), &self.e_tone));
        out.push(("w_e".into(), &self.w_e));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::new();
        for (h, f) in Head::ALL.iter().zip(self.heads.iter_mut()) {
            let n = h.name();
            out.push((format!("{n}.ln_gain"), &mut f.gain));
            out.push((format!("{n}.ln_bias"), &mut f.bias));
            out.push((format!("{n}.w_u"), &mut f.w_u));
            out.push((format!("{n}.w_d"), &mut f.w_d));
            out.push((format!("{n}.w_out"), &mut f.w_out));
            out.push((format!("{n}.b_out"), &mut f.b_out));
        }
        out.push(("e_init".into(), &mut self.e_init));
        out.push(("e_rhyme".into(), &mut self.e_rhyme));
        out.push(("e_tone".into(), &mut self.e_tone));
        out.push(("w_e".into(), &mut self.w_e));
        out
    }

    /// Tensor `i` in the order of [`HeadParams::tensors`].
    fn matrix_mut(&mut self, i: usize) -> &mut Matrix {
        if i < 18 {
            let f = &mut self.heads[i / 6];
            return match i % 6 {
                0 => &mut f.gain,
                1 => &mut f.bias,
                2 => &mut f.w_u,
                3 => &mut f.w_d,
                4 => &mut f.w_out,
                _ => &mut f.b_out,
            };
        }
        match i {
            18 => &mut self.e_init,
            19 => &mut self.e_rhyme,
            20 => &mut self.e_tone,
            _ => &mut self.w_e,
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data.len()).sum()
    }

    /// Text dump: a header, then one tensor per line as
    /// `name rows cols v0 v1 ...` in row-major order.
    pub fn to_text(&self) -> String {
        let c = self.config;
        let mut out = format!(
            "# vi-phonemic head parameters\nconfig {} {} {} {}\n",
            c.d, c.v_init, c.v_rhyme, c.v_tone
        );
        for (name, t) in self.tensors() {
            out.push_str(&format!("{name} {} {}", t.rows, t.cols));
            for v in &t.data {
                out.push_str(&format!(" {v:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<HeadParams, HeadError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let err = |line: usize, message: String| HeadError::Format {
            line: line + 1,
            message,
        };
        let (n, cfg_line) = lines.next().ok_or_else(|| err(0, "empty file".into()))?;
        let nums: Vec<usize> = cfg_line
            .strip_prefix("config ")
            .ok_or_else(|| err(n, "expected config line".into()))?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| err(n, format!("{e}")))?;
        let [d, v_init, v_rhyme, v_tone] = nums[..] else {
            return Err(err(n, "config needs 4 numbers".into()));
        };
        let config = HeadConfig {
            d,
            v_init,
            v_rhyme,
            v_tone,
        };
        config.validate()?;
        let mut params = HeadParams::zeros(config);
        let mut seen = 0;
        for ((name, t), (n, line)) in params.tensors_mut().into_iter().zip(&mut lines) {
            let mut it = line.split_whitespace();
            let got = it.next().unwrap_or_default();
            if got != name {
                return Err(err(n, format!("expected tensor {name}, found {got}")));
            }
            let shape: Vec<usize> = it
                .by_ref()
                .take(2)
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| err(n, format!("{e}")))?;
            if shape != [t.rows, t.cols] {
                return Err(err(
                    n,
                    format!("{name}: shape {shape:?}, expected [{}, {}]", t.rows, t.cols),
                ));
            }
            let values: Vec<f64> = it
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| err(n, format!("{e}")))?;
            if values.len() != t.data.len() {
                return Err(err(
                    n,
                    format!("{name}: {} values, expected {}", values.len(), t.data.len()),
                ));
            }
            t.data = values;
            seen += 1;
        }
        let expected = HeadParams::zeros(config).tensors().len();
        if seen != expected {
            return Err(err(0, format!("{seen} tensors, expected {expected}")));
        }
        if let Some((n, _)) = lines.next() {
            return Err(err(n, "trailing data".into()));
        }
        Ok(params)
    }
}

/// Where the residual branch of a head starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualMode {
    /// From the layer-normalized vector.
    #[default]
    Normalized,
    /// From the head input before normalization.
    Raw,
}

fn check_finite(what: &'static str, xs: &[f64]) -> Result<(), HeadError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(HeadError::NonFiniteInput(what))
    }
}

/// Intermediate values of one head at one step.
#[derive(Debug, Clone)]
struct FfnTrace {
    xhat: Vec<f64>,
    sigma: f64,
    normed: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    out: Vec<f64>,
}

fn ffn_trace(f: &[f64], p: &FfnParams, mode: ResidualMode) -> FfnTrace {
    let d = f.len() as f64;
    let mean = f.iter().sum::<f64>() / d;
    let var = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d;
    let sigma = (var + LN_EPS).sqrt();
    let xhat: Vec<f64> = f.iter().map(|x| (x - mean) / sigma).collect();
    let normed: Vec<f64> = xhat
        .iter()
        .zip(p.gain.data())
        .zip(p.bias.data())
        .map(|((x, g), b)| g * x + b)
        .collect();
    let pre = p.w_u.t_matvec(&normed);
    let act: Vec<f64> = pre.iter().map(|&h| h.max(0.0)).collect();
    let base = match mode {
        ResidualMode::Normalized => &normed,
        ResidualMode::Raw => f,
    };
    let out = base
        .iter()
        .zip(p.w_d.t_matvec(&act))
        .map(|(a, b)| a + b)
        .collect();
    FfnTrace {
        xhat,
        sigma,
        normed,
        pre,
        act,
        out,
    }
}

/// Layer norm followed by the residual two-layer rectified map.
pub fn ffn_forward(f: &[f64], p: &FfnParams, mode: ResidualMode) -> Result<Vec<f64>, HeadError> {
    if f.len() != p.d() {
        return Err(mismatch("head input", p.d(), f.len()));
    }
    check_finite("head input", f)?;
    Ok(ffn_trace(f, p, mode).out)
}

fn project(y: &[f64], p: &FfnParams) -> Vec<f64> {
    p.w_out
        .t_matvec(y)
        .into_iter()
        .zip(p.b_out.data())
        .map(|(a, b)| a + b)
        .collect()
}

/// Logits of the three heads for one decoder feature vector.
pub fn head_logits(
    f_dec: &[f64],
    params: &HeadParams,
    mode: ResidualMode,
) -> Result<[Vec<f64>; 3], HeadError> {
    let mut out: [Vec<f64>; 3] = Default::default();
    for h in Head::ALL {
        let p = params.head(h);
        out[h as usize] = project(&ffn_forward(f_dec, p, mode)?, p);
    }
    Ok(out)
}

fn lookup<'a>(table: &'a Matrix, name: &'static str, id: u32) -> Result<&'a [f64], HeadError> {
    let id = id as usize;
    if id >= table.rows {
        return Err(HeadError::IdOutOfRange {
            table: name,
            id,
            size: table.rows,
        });
    }
    Ok(table.row(id))
}

fn embed_concat(ids: SyllableIds, params: &HeadParams) -> Result<Vec<f64>, HeadError> {
    let mut cat = Vec::with_capacity(3 * params.config.d);
    cat.extend_from_slice(lookup(&params.e_init, "e_init", ids.initial)?);
    cat.extend_from_slice(lookup(&params.e_rhyme, "e_rhyme", ids.rhyme)?);
    cat.extend_from_slice(lookup(&params.e_tone, "e_tone", ids.tone)?);
    Ok(cat)
}

/// Embeds the previous step's ids and fuses them back to width d.
pub fn embed_prev(ids: SyllableIds, params: &HeadParams) -> Result<Vec<f64>, HeadError> {
    Ok(params.w_e.t_matvec(&embed_concat(ids, params)?))
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub per_head: [f64; 3],
    pub total: f64,
}

impl LossReport {
    pub fn head(&self, h: Head) -> f64 {
        self.per_head[h as usize]
    }
}

/// Mean cross-entropy per head over the sequence, and their sum.
pub fn composite_loss(
    logits: [&[Vec<f64>]; 3],
    targets: [&[usize]; 3],
) -> Result<LossReport, HeadError> {
    let lens = [0, 1, 2].map(|i| logits[i].len());
    if lens
        .iter()
        .copied()
        .chain(targets.iter().map(|t| t.len()))
        .any(|l| l != lens[0])
    {
        return Err(HeadError::LengthMismatch(lens));
    }
    let n = lens[0];
    let mut per_head = [0.0; 3];
    for h in Head::ALL {
        let i = h as usize;
        let mut sum = 0.0;
        for (z, &y) in logits[i].iter().zip(targets[i]) {
            check_finite("logits", z)?;
            if y >= z.len() {
                return Err(HeadError::IdOutOfRange {
                    table: h.name(),
                    id: y,
                    size: z.len(),
                });
            }
            sum -= log_softmax(z)[y];
        }
        per_head[i] = if n == 0 { 0.0 } else { sum / n as f64 };
    }
    Ok(LossReport {
        per_head,
        total: per_head[0] + per_head[1] + per_head[2],
    })
}

/// Inputs for a stand-in decoder trunk: `f_dec = features + embed_prev(prev)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBatch {
    pub features: Vec<Vec<f64>>,
    pub prev: Vec<SyllableIds>,
    /// Target head classes (init, vowel, tone) per step.
    pub targets: Vec<[usize; 3]>,
}

impl ToyBatch {
    pub fn random(config: HeadConfig, steps: usize, rng: &mut impl Rng) -> ToyBatch {
        let mut features = Vec::new();
        let mut prev = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..steps {
            features.push((0..config.d).map(|_| rng.random_range(-1.0..1.0)).collect());
            let [initial, rhyme, tone] =
                Head::ALL.map(|h| rng.random_range(0..config.embedding_rows(h)) as u32);
            prev.push(SyllableIds {
                initial,
                rhyme,
                tone,
            });
            targets.push(Head::ALL.map(|h| rng.random_range(0..config.classes(h))));
        }
        ToyBatch {
            features,
            prev,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn check(&self, config: HeadConfig) -> Result<(), HeadError> {
        if self.features.len() != self.len() || self.prev.len() != self.len() {
            return Err(mismatch(
                "batch",
                self.len(),
                format!("{} features, {} prev", self.features.len(), self.prev.len()),
            ));
        }
        for f in &self.features {
            if f.len() != config.d {
                return Err(mismatch("feature", config.d, f.len()));
            }
            check_finite("features", f)?;
        }
        Ok(())
    }
}

fn heads_only(active: &[Head]) -> [bool; 3] {
    let mut on = [false; 3];
    for h in active {
        on[*h as usize] = true;
    }
    on
}

/// Forward over a batch: the composite loss of all three heads.
pub fn batch_loss(
    params: &HeadParams,
    batch: &ToyBatch,
    mode: ResidualMode,
) -> Result<LossReport, HeadError> {
    forward_batch(params, batch, mode, None)
}

/// Also records which rectifier inputs are positive when `pattern` is given.
fn forward_batch(
    params: &HeadParams,
    batch: &ToyBatch,
    mode: ResidualMode,
    mut pattern: Option<&mut Vec<bool>>,
) -> Result<LossReport, HeadError> {
    batch.check(params.config)?;
    let mut logits: [Vec<Vec<f64>>; 3] = Default::default();
    for (f, &ids) in batch.features.iter().zip(&batch.prev) {
        let f_dec: Vec<f64> = f
            .iter()
            .zip(embed_prev(ids, params)?)
            .map(|(a, b)| a + b)
            .collect();
        for h in Head::ALL {
            let p = params.head(h);
            let tr = ffn_trace(&f_dec, p, mode);
            if let Some(pat) = pattern.as_deref_mut() {
                pat.extend(tr.pre.iter().map(|&v| v > 0.0));
            }
            logits[h as usize].push(project(&tr.out, p));
        }
    }
    let targets: [Vec<usize>; 3] = [0, 1, 2].map(|i| batch.targets.iter().map(|t| t[i]).collect());
    composite_loss(
        [&logits[0], &logits[1], &logits[2]],
        [&targets[0], &targets[1], &targets[2]],
    )
}

/// Analytic gradient of the summed loss of `active` heads.
pub fn backward(
    params: &HeadParams,
    batch: &ToyBatch,
    mode: ResidualMode,
    active: &[Head],
) -> Result<(LossReport, HeadParams), HeadError> {
    let loss = batch_loss(params, batch, mode)?;
    let on = heads_only(active);
    let mut grad = HeadParams::zeros(params.config);
    let n = batch.len() as f64;
    let d = params.config.d;

    for ((f, &ids), targets) in batch.features.iter().zip(&batch.prev).zip(&batch.targets) {
        let cat = embed_concat(ids, params)?;
        let f_dec: Vec<f64> = f
            .iter()
            .zip(params.w_e.t_matvec(&cat))
            .map(|(a, b)| a + b)
            .collect();
        let mut d_dec = vec![0.0; d];

        for h in Head::ALL {
            if !on[h as usize] {
                continue;
            }
            let p = params.head(h);
            let g = grad.head_mut(h);
            let tr = ffn_trace(&f_dec, p, mode);

            let mut dz = softmax(&project(&tr.out, p));
            dz[targets[h as usize]] -= 1.0;
            dz.iter_mut().for_each(|v| *v /= n);
            g.w_out.add_outer(&tr.out, &dz);
            g.b_out.add_vec(&dz);
            let dy = p.w_out.matvec(&dz);

            g.w_d.add_outer(&tr.act, &dy);
            let dh: Vec<f64> = p
                .w_d
                .matvec(&dy)
                .into_iter()
                .zip(&tr.pre)
                .map(|(da, &h)| if h > 0.0 { da } else { 0.0 })
                .collect();
            g.w_u.add_outer(&tr.normed, &dh);
            let mut dn = p.w_u.matvec(&dh);
            match mode {
                ResidualMode::Normalized => dn.iter_mut().zip(&dy).for_each(|(a, b)| *a += b),
                ResidualMode::Raw => d_dec.iter_mut().zip(&dy).for_each(|(a, b)| *a += b),
            }

            g.gain.add_vec(
                &dn.iter()
                    .zip(&tr.xhat)
                    .map(|(a, b)| a * b)
                    .collect::<Vec<_>>(),
            );
            g.bias.add_vec(&dn);
            let dxhat: Vec<f64> = dn.iter().zip(p.gain.data()).map(|(a, b)| a * b).collect();
            let m1 = dxhat.iter().sum::<f64>() / d as f64;
            let m2 = dxhat.iter().zip(&tr.xhat).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            for ((acc, dx), xh) in d_dec.iter_mut().zip(&dxhat).zip(&tr.xhat) {
                *acc += (dx - m1 - xh * m2) / tr.sigma;
            }
        }

        grad.w_e.add_outer(&cat, &d_dec);
        let dcat = params.w_e.matvec(&d_dec);
        grad.e_init.add_row(ids.initial as usize, &dcat[..d]);
        grad.e_rhyme.add_row(ids.rhyme as usize, &dcat[d..2 * d]);
        grad.e_tone.add_row(ids.tone as usize, &dcat[2 * d..]);
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor for the relative error. Central differences on a
    /// loss near 1 carry roundoff near 1e-10, so partials below the floor
    /// are compared in absolute terms.
    pub floor: f64,
    pub mode: ResidualMode,
    /// Adds this to one analytic partial (tensor index, entry) before
    /// comparing. A correct checker must then fail.
    #[serde(skip)]
    pub corrupt: Option<(usize, usize, f64)>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-5,
            mode: ResidualMode::Normalized,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// Entries whose perturbation moved a rectifier input across zero.
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub loss: f64,
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Compares every analytic partial of the total loss with a central
/// difference. Entries whose perturbation flips a rectifier are skipped.
pub fn grad_check(
    params: &HeadParams,
    batch: &ToyBatch,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, HeadError> {
    let (loss, mut grad) = backward(params, batch, opts.mode, &Head::ALL)?;
    if let Some((t, i, delta)) = opts.corrupt {
        grad.matrix_mut(t).data[i] += delta;
    }
    let mut base_pattern = Vec::new();
    forward_batch(params, batch, opts.mode, Some(&mut base_pattern))?;
    let mut probe = params.clone();
    let mut pattern = Vec::with_capacity(base_pattern.len());

    let mut tensors = Vec::new();
    for (ti, (name, analytic)) in grad.tensors().into_iter().enumerate() {
        let mut check = TensorCheck {
            name,
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        };
        for (i, &a) in analytic.data.iter().enumerate() {
            let orig = probe.matrix_mut(ti).data[i];
            let mut eval = |x: f64| -> Result<(f64, bool), HeadError> {
                probe.matrix_mut(ti).data[i] = x;
                pattern.clear();
                let l = forward_batch(&probe, batch, opts.mode, Some(&mut pattern))?.total;
                Ok((l, pattern == base_pattern))
            };
            let (plus, same_p) = eval(orig + opts.step)?;
            let (minus, same_m) = eval(orig - opts.step)?;
            probe.matrix_mut(ti).data[i] = orig;
            if !(same_p && same_m) {
                check.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            check.max_rel_error = check.max_rel_error.max(rel);
            check.checked += 1;
        }
        tensors.push(check);
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        loss: loss.total,
        passed: max_rel_error < opts.tolerance,
        tensors,
        max_rel_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteCase {
    pub seed: u64,
    pub config: HeadConfig,
    pub steps: usize,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub options: GradCheckOptions,
    pub cases: Vec<SuiteCase>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Gradient checks over `configs` seeded toy setups with d <= 8, up to 10
/// classes in the init and vowel heads and up to 5 steps.
pub fn gradient_suite(
    configs: usize,
    seed: u64,
    opts: &GradCheckOptions,
) -> Result<SuiteReport, HeadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(configs);
    for _ in 0..configs {
        let case_seed: u64 = rng.random();
        let mut case_rng = ChaCha8Rng::seed_from_u64(case_seed);
        let config = HeadConfig::new(
            case_rng.random_range(2..=8),
            case_rng.random_range(2..=10),
            case_rng.random_range(2..=10),
        );
        let steps = case_rng.random_range(1..=5);
        let params = HeadParams::random(config, case_rng.random());
        let batch = ToyBatch::random(config, steps, &mut case_rng);
        let r = grad_check(&params, &batch, opts)?;
        cases.push(SuiteCase {
            seed: case_seed,
            config,
            steps,
            checked: r.tensors.iter().map(|t| t.checked).sum(),
            skipped: r.tensors.iter().map(|t| t.skipped).sum(),
            max_rel_error: r.max_rel_error,
            passed: r.passed,
        });
    }
    let max_rel_error = cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(SuiteReport {
        options: *opts,
        passed: cases.iter().all(|c| c.passed),
        cases,
        max_rel_error,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> (HeadParams, ToyBatch) {
        let cfg = HeadConfig::new(4, 5, 7);
        let params = HeadParams::random(cfg, 11);
        let batch = ToyBatch::random(cfg, 3, &mut ChaCha8Rng::seed_from_u64(12));
        (params, batch)
    }

    /// Straight-line recomputation with explicit index loops.
    fn ffn_oracle(f: &[f64], p: &FfnParams, raw: bool) -> Vec<f64> {
        let d = f.len();
        let mut mean = 0.0;
        for x in f {
            mean += x;
        }
        mean /= d as f64;
        let mut var = 0.0;
        for x in f {
            var += (x - mean) * (x - mean);
        }
        var /= d as f64;
        let mut n = vec![0.0; d];
        for i in 0..d {
            n[i] = p.gain[(0, i)] * (f[i] - mean) / (var + 1e-5).sqrt() + p.bias[(0, i)];
        }
        let mut a = vec![0.0; 2 * d];
        for j in 0..2 * d {
            let mut s = 0.0;
            for i in 0..d {
                s += p.w_u[(i, j)] * n[i];
            }
            a[j] = if s > 0.0 { s } else { 0.0 };
        }
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = if raw { f[i] } else { n[i] };
            for j in 0..2 * d {
                s += p.w_d[(j, i)] * a[j];
            }
            y[i] = s;
        }
        y
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn ffn_matches_oracle() {
        let (params, _) = toy();
        let f = [0.3, -1.2, 0.7, 2.0];
        for (mode, raw) in [(ResidualMode::Normalized, false), (ResidualMode::Raw, true)] {
            for h in Head::ALL {
                let p = params.head(h);
                assert!(close(
                    &ffn_forward(&f, p, mode).unwrap(),
                    &ffn_oracle(&f, p, raw)
                ));
            }
        }
    }

    #[test]
    fn zero_input_is_finite() {
        let mut p = FfnParams::zeros(4, 3);
        p.gain.data_mut().fill(1.0);
        let y = ffn_forward(&[0.0; 4], &p, ResidualMode::Normalized).unwrap();
        assert_eq!(y, vec![0.0; 4]);
    }

    #[test]
    fn residual_only_is_layer_norm() {
        let (mut params, _) = toy();
        let p = params.head_mut(Head::Init);
        p.w_u.data_mut().fill(0.0);
        p.w_d.data_mut().fill(0.0);
        let f = [1.0, 2.0, 3.0, 4.0];
        let y = ffn_forward(&f, p, ResidualMode::Normalized).unwrap();
        let sigma = (1.25f64 + LN_EPS).sqrt();
        let expect: Vec<f64> = f
            .iter()
            .enumerate()
            .map(|(i, x)| p.gain[(0, i)] * (x - 2.5) / sigma + p.bias[(0, i)])
            .collect();
        assert!(close(&y, &expect));
    }

    #[test]
    fn non_finite_input() {
        let (params, _) = toy();
        let err = ffn_forward(
            &[f64::NAN, 0.0, 0.0, 0.0],
            params.head(Head::Tone),
            ResidualMode::Normalized,
        );
        assert_eq!(err, Err(HeadError::NonFiniteInput("head input")));
        assert!(matches!(
            head_logits(&[0.0; 3], &params, ResidualMode::Normalized),
            Err(HeadError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn logits_shapes() {
        let (params, _) = toy();
        let z = head_logits(&[0.1, 0.2, 0.3, 0.4], &params, ResidualMode::Normalized).unwrap();
        assert_eq!(z.map(|v| v.len()), [5, 7, 6]);
    }

    #[test]
    fn heads_are_independent() {
        let (params, batch) = toy();
        let f = [0.5, -0.5, 0.25, 1.0];
        let before = head_logits(&f, &params, ResidualMode::Normalized).unwrap();
        let mut other = params.clone();
        other.head_mut(Head::Tone).w_u.data_mut()[0] += 1.0;
        other.head_mut(Head::Tone).b_out.data_mut()[2] -= 3.0;
        let after = head_logits(&f, &other, ResidualMode::Normalized).unwrap();
        assert_eq!(before[0], after[0]);
        assert_eq!(before[1], after[1]);
        assert_ne!(before[2], after[2]);

        let (_, g) = backward(&params, &batch, ResidualMode::Normalized, &[Head::Init]).unwrap();
        for h in [Head::Vowel, Head::Tone] {
            let gh = g.head(h);
            for t in [&gh.gain, &gh.bias, &gh.w_u, &gh.w_d, &gh.w_out, &gh.b_out] {
                assert!(t.data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn embed_scaled_identity_blocks() {
        let (mut params, _) = toy();
        let d = 4;
        let w = [0.5, 2.0, -1.0];
        params.w_e = Matrix::zeros(3 * d, d);
        for (b, wb) in w.iter().enumerate() {
            for i in 0..d {
                params.w_e[(b * d + i, i)] = *wb;
            }
        }
        let ids = SyllableIds::from((4, 2, 7));
        let out = embed_prev(ids, &params).unwrap();
        for i in 0..d {
            let expect = w[0] * params.e_init[(4, i)]
                + w[1] * params.e_rhyme[(2, i)]
                + w[2] * params.e_tone[(7, i)];
            assert!((out[i] - expect).abs() < 1e-15);
        }
        assert!(matches!(
            embed_prev(SyllableIds::from((0, 0, 9)), &params),
            Err(HeadError::IdOutOfRange {
                table: "e_tone",
                ..
            })
        ));
    }

    #[test]
    fn embed_matches_oracle() {
        let (params, _) = toy();
        let ids = SyllableIds::from((1, 5, 3));
        let out = embed_prev(ids, &params).unwrap();
        let d = 4;
        for j in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                s += params.w_e[(i, j)] * params.e_init[(1, i)];
                s += params.w_e[(d + i, j)] * params.e_rhyme[(5, i)];
                s += params.w_e[(2 * d + i, j)] * params.e_tone[(3, i)];
            }
            assert!((out[j] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_logits_give_ln_v() {
        let z = [
            vec![vec![0.0; 5]; 2],
            vec![vec![3.0; 7]; 2],
            vec![vec![-1.0; 6]; 2],
        ];
        let l = composite_loss([&z[0], &z[1], &z[2]], [&[0, 4], &[6, 1], &[2, 2]]).unwrap();
        for (v, ce) in [5.0f64, 7.0, 6.0].iter().zip(l.per_head) {
            assert!((ce - v.ln()).abs() <= 1e-12);
        }
        assert_eq!(l.total, l.per_head[0] + l.per_head[1] + l.per_head[2]);
    }

    #[test]
    fn loss_errors() {
        let z = vec![vec![0.0; 3]];
        assert!(matches!(
            composite_loss([&z, &z, &[]], [&[0], &[0], &[]]),
            Err(HeadError::LengthMismatch(_))
        ));
        assert!(matches!(
            composite_loss([&z, &z, &z], [&[0], &[3], &[0]]),
            Err(HeadError::IdOutOfRange { .. })
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (params, batch) = toy();
        for mode in [ResidualMode::Normalized, ResidualMode::Raw] {
            let r = grad_check(
                &params,
                &batch,
                &GradCheckOptions {
                    mode,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(r.passed, "{mode:?}: {}", r.max_rel_error);
        }
    }

    #[test]
    fn zero_params_gradient() {
        let cfg = HeadConfig::new(3, 4, 4);
        let params = HeadParams::zeros(cfg);
        let batch = ToyBatch::random(cfg, 2, &mut ChaCha8Rng::seed_from_u64(3));
        let r = grad_check(&params, &batch, &GradCheckOptions::default()).unwrap();
        assert!(r.passed);
        let expect = 4f64.ln() * 2.0 + 6f64.ln();
        assert!((r.loss - expect).abs() < 1e-12);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let (params, batch) = toy();
        let opts = GradCheckOptions {
            corrupt: Some((4, 0, 1e-2)),
            ..Default::default()
        };
        assert!(!grad_check(&params, &batch, &opts).unwrap().passed);
    }

    #[test]
    fn text_round_trip() {
        let (params, _) = toy();
        let text = params.to_text();
        assert_eq!(HeadParams::from_text(&text).unwrap(), params);
        let broken = text.replace("w_e 12 4", "w_e 4 12");
        assert!(HeadParams::from_text(&broken).is_err());
        let short: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(HeadParams::from_text(&short).is_err());
    }

    #[test]
    fn tensor_indices_agree() {
        let (mut params, _) = toy();
        let names: Vec<(String, (usize, usize))> = params
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape()))
            .collect();
        for (i, (name, shape)) in names.iter().enumerate() {
            params.matrix_mut(i).data_mut()[0] = 42.0 + i as f64;
            let (n, t) = &params.tensors()[i];
            assert_eq!((n, t.shape(), t.data()[0]), (name, *shape, 42.0 + i as f64));
        }
    }

    #[test]
    fn tone_classes_fixed() {
        let mut cfg = HeadConfig::new(4, 5, 5);
        assert!(cfg.validate().is_ok());
        cfg.v_tone = 7;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(z in proptest::collection::vec(-700.0f64..700.0, 1..12)) {
            let s: f64 = softmax(&z).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn embed_permutation_equivariant(seed in any::<u64>(), a in 0usize..8, b in 0usize..8) {
            let (mut params, _) = toy();
            params = HeadParams::random(params.config, seed);
            let ids_a = SyllableIds::from((0, a as u32, 1));
            let ids_b = SyllableIds::from((0, b as u32, 1));
            let (ea, eb) = (embed_prev(ids_a, &params).unwrap(), embed_prev(ids_b, &params).unwrap());
            let mut swapped = params.clone();
            for i in 0..4 {
                let t = swapped.e_rhyme[(a, i)];
                swapped.e_rhyme[(a, i)] = swapped.e_rhyme[(b, i)];
                swapped.e_rhyme[(b, i)] = t;
            }
            prop_assert_eq!(embed_prev(ids_a, &swapped).unwrap(), eb);
            prop_assert_eq!(embed_prev(ids_b, &swapped).unwrap(), ea);
            let other = SyllableIds::from((0, ((a.max(b) + 1) % 10) as u32, 1));
            if other.rhyme as usize != a && other.rhyme as usize != b {
                prop_assert_eq!(embed_prev(other, &swapped).unwrap(), embed_prev(other, &params).unwrap());
            }
        }
    }
}
