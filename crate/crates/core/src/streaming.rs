//! One-pass hybrid sampling with weighted single-item reservoirs, and the
//! iterative estimate of the mixing weight from a second pair of reservoirs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::BufRead;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alphaopt::{BoundObjective, DEFAULT_GRID_SIZE};
use crate::distributions::hybrid_prob_value;
use crate::error::{check_alpha, Error, Result};
use crate::linalg::spectral_norm_estimate;
use crate::matrix::{SparseSketch, Triple};
use crate::rng::SeededRng;

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    L1,
    L2,
}

impl WeightMode {
    #[inline]
    pub fn weight(self, v: f64) -> f64 {
        match self {
            WeightMode::L1 => v.abs(),
            WeightMode::L2 => v * v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Threshold(f64);

impl Eq for Threshold {}

impl PartialOrd for Threshold {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Threshold {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Clone, Debug)]
struct Slot {
    item: Option<Triple>,
    rng: SeededRng,
}

/// `s` independent weighted reservoirs of size one.
///
/// Slot `t` replaces its item by an entry of weight `w` with probability
/// `w / W`, where `W` is the running weight total including `w`. Instead of a
/// coin per slot per entry, each slot draws `u` once per replacement and
/// waits until `W >= W_now / u`; survival through later entries has the same
/// probability `W_now / W`, so the two are equal in law. A min-heap on these
/// thresholds makes a pass cost `O(N + R log s)` for `R` replacements.
#[derive(Clone, Debug)]
pub struct ReservoirBank {
    mode: WeightMode,
    slots: Vec<Slot>,
    heap: BinaryHeap<Reverse<(Threshold, usize)>>,
    total: KahanSum,
}

impl ReservoirBank {
    /// Slot `t` draws from `rng.substream(t)`.
    pub fn new(slots: usize, mode: WeightMode, rng: &SeededRng) -> Self {
        let slots: Vec<Slot> = (0..slots)
            .map(|t| Slot {
                item: None,
                rng: rng.substream(t as u64),
            })
            .collect();
        let heap = (0..slots.len()).map(|t| Reverse((Threshold(0.0), t))).collect();
        Self {
            mode,
            slots,
            heap,
            total: KahanSum::default(),
        }
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn running_total(&self) -> f64 {
        self.total.value()
    }

    pub fn slot(&self, t: usize) -> Option<&Triple> {
        self.slots[t].item.as_ref()
    }

    pub fn items(&self) -> impl Iterator<Item = Option<&Triple>> {
        self.slots.iter().map(|s| s.item.as_ref())
    }

    /// Offers one stream entry to every slot. Zero-weight entries are ignored.
    pub fn step(&mut self, entry: Triple) {
        let w = self.mode.weight(entry.value);
        if !(w > 0.0) {
            return;
        }
        self.total.add(w);
        let total = self.total.value();
        while let Some(&Reverse((Threshold(th), t))) = self.heap.peek() {
            if th > total {
                break;
            }
            self.heap.pop();
            let slot = &mut self.slots[t];
            slot.item = Some(entry);
            let u: f64 = slot.rng.sample(Open01);
            self.heap.push(Reverse((Threshold(total / u), t)));
        }
    }
}

/// Offers `entry` to `bank`; see [`ReservoirBank::step`].
pub fn reservoir_step(bank: &mut ReservoirBank, entry: Triple) {
    bank.step(entry)
}

/// Everything kept after one pass: `O(s)` triples plus a few scalars.
#[derive(Clone, Debug)]
pub struct StreamState {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub s1: ReservoirBank,
    pub s2: ReservoirBank,
    pub s3: Option<ReservoirBank>,
    pub s4: Option<ReservoirBank>,
    pub l1_total: f64,
    pub frob_sq: f64,
    pub entries_seen: u64,
}

impl StreamState {
    /// Number of reservoir slots held (2s, or 4s with estimation banks).
    pub fn memory_slots(&self) -> usize {
        self.s1.len() + self.s2.len() + self.s3.as_ref().map_or(0, |b| b.len()) + self.s4.as_ref().map_or(0, |b| b.len())
    }
}

/// Incremental driver for a pass; [`one_pass_sample`] wraps it.
#[derive(Clone, Debug)]
pub struct StreamSampler {
    samples: usize,
    shape: Option<(usize, usize)>,
    s1: ReservoirBank,
    s2: ReservoirBank,
    s3: Option<ReservoirBank>,
    s4: Option<ReservoirBank>,
    l1: KahanSum,
    frob: KahanSum,
    max_row: usize,
    max_col: usize,
    seen: u64,
}

impl StreamSampler {
    /// Banks draw from `rng.substream(1..=4)`.
    pub fn new(samples: usize, want_alpha_est: bool, rng: &SeededRng) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParameter("sample count must be at least 1".into()));
        }
        Ok(Self {
            samples,
            shape: None,
            s1: ReservoirBank::new(samples, WeightMode::L1, &rng.substream(1)),
            s2: ReservoirBank::new(samples, WeightMode::L2, &rng.substream(2)),
            s3: want_alpha_est.then(|| ReservoirBank::new(samples, WeightMode::L1, &rng.substream(3))),
            s4: want_alpha_est.then(|| ReservoirBank::new(samples, WeightMode::L2, &rng.substream(4))),
            l1: KahanSum::default(),
            frob: KahanSum::default(),
            max_row: 0,
            max_col: 0,
            seen: 0,
        })
    }

    /// Fixes the matrix shape; entries outside it become errors. Without
    /// this the shape is the bounding box of the indices seen.
    pub fn with_shape(mut self, rows: usize, cols: usize) -> Self {
        self.shape = Some((rows, cols));
        self
    }

    pub fn push(&mut self, t: Triple) -> Result<()> {
        if !t.value.is_finite() {
            return Err(Error::NonFinite { row: t.row, col: t.col });
        }
        if let Some((rows, cols)) = self.shape {
            if t.row >= rows || t.col >= cols {
                return Err(Error::IndexOutOfBounds {
                    row: t.row,
                    col: t.col,
                    rows,
                    cols,
                });
            }
        }
        self.seen += 1;
        if t.value == 0.0 {
            return Ok(());
        }
        self.max_row = self.max_row.max(t.row + 1);
        self.max_col = self.max_col.max(t.col + 1);
        self.l1.add(t.value.abs());
        self.frob.add(t.value * t.value);
        self.s1.step(t);
        self.s2.step(t);
        if let Some(b) = self.s3.as_mut() {
            b.step(t);
        }
        if let Some(b) = self.s4.as_mut() {
            b.step(t);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<StreamState> {
        if !(self.l1.value() > 0.0) {
            return Err(Error::EmptyStream);
        }
        let (rows, cols) = self.shape.unwrap_or((self.max_row, self.max_col));
        Ok(StreamState {
            rows,
            cols,
            samples: self.samples,
            s1: self.s1,
            s2: self.s2,
            s3: self.s3,
            s4: self.s4,
            l1_total: self.l1.value(),
            frob_sq: self.frob.value(),
            entries_seen: self.seen,
        })
    }
}

/// Consumes `stream` once, filling ℓ1 banks `S1` (and `S3`) and ℓ2 banks `S2`
/// (and `S4`) with `s` slots each, and recording `‖A‖₁` and `‖A‖_F²`.
pub fn one_pass_sample<I>(stream: I, samples: usize, want_alpha_est: bool, rng: &SeededRng) -> Result<StreamState>
where
    I: IntoIterator<Item = Triple>,
{
    let mut sampler = StreamSampler::new(samples, want_alpha_est, rng)?;
    for t in stream {
        sampler.push(t)?;
    }
    sampler.finish()
}

// Per slot: the ℓ1 bank with probability α, otherwise the ℓ2 bank.
fn select(l1_bank: &ReservoirBank, l2_bank: &ReservoirBank, alpha: f64, rng: &mut SeededRng) -> Vec<Triple> {
    l1_bank
        .items()
        .zip(l2_bank.items())
        .map(|(a, b)| {
            let x: f64 = rng.random();
            let pick = if x < alpha { a } else { b };
            *pick.expect("banks are full after a nonempty pass")
        })
        .collect()
}

fn rescale(state: &StreamState, picked: Vec<Triple>, alpha: f64) -> Result<SparseSketch> {
    let s = picked.len();
    let contributions = picked
        .into_iter()
        .map(|t| {
            let p = hybrid_prob_value(t.value, alpha, state.l1_total, state.frob_sq);
            Triple::new(t.row, t.col, t.value / (p * s as f64))
        })
        .collect();
    SparseSketch::from_contributions(state.rows, state.cols, s, contributions)
}

/// The multiset `S` of selected raw triples, one per slot.
pub fn select_hybrid(state: &StreamState, alpha: f64, rng: &mut SeededRng) -> Result<Vec<Triple>> {
    check_alpha(alpha)?;
    Ok(select(&state.s1, &state.s2, alpha, rng))
}

/// Mixes `S1`/`S2` into a hybrid sketch: every selected triple is rescaled by
/// its hybrid probability, so each slot is a draw from the hybrid law.
pub fn mix_to_hybrid(state: &StreamState, alpha: f64, rng: &mut SeededRng) -> Result<SparseSketch> {
    check_alpha(alpha)?;
    let picked = select(&state.s1, &state.s2, alpha, rng);
    rescale(state, picked, alpha)
}

/// Result of the iterative mixing-weight estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// `α_1, …, α_τ`.
    pub history: Vec<f64>,
}

/// Starting from `α₀ = 0.5`, each iteration mixes `S3`/`S4` into a proxy
/// sketch `X` and re-minimizes the bound with `X` standing in for `A`:
/// `ξ̃`, `ρ̃²` from `X`'s entries with no `σ_min` term, and
/// `γ̃ = max ‖X‖₁/(α + (1−α)λ̃) + ‖X‖_F`, scaled by `ε‖X‖₂/3`.
/// Fresh selection draws are used every iteration.
pub fn estimate_alpha_iterative(
    state: &StreamState,
    tau: usize,
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<AlphaEstimate> {
    let (Some(s3), Some(s4)) = (state.s3.as_ref(), state.s4.as_ref()) else {
        return Err(Error::InvalidParameter(
            "stream state was built without estimation banks".into(),
        ));
    };
    if tau == 0 {
        return Err(Error::InvalidParameter("tau must be at least 1".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon}")));
    }
    let mut alpha = 0.5;
    let mut history = Vec::with_capacity(tau);
    for _ in 0..tau {
        let picked = select(s3, s4, alpha, rng);
        let x = rescale(state, picked, alpha)?;
        let x_frob = x.frob_norm_sq().sqrt();
        let x_spec = spectral_norm_estimate(&x, rng);
        let entries = x
            .entries()
            .iter()
            .filter(|t| t.value != 0.0)
            .map(|t| (t.row, t.col, t.value.abs()))
            .collect();
        let obj = BoundObjective::new(state.rows, state.cols, entries, 0.0, x_frob, epsilon * x_spec / 3.0)?;
        alpha = obj.minimize(DEFAULT_GRID_SIZE)?.0;
        history.push(alpha);
    }
    Ok(AlphaEstimate { alpha, history })
}

/// Parses `i j value` lines (0-based indices). Blank lines and lines starting
/// with `#` or `%` are skipped.
pub fn read_triples<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Triple>> {
    reader.lines().enumerate().filter_map(|(k, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::Io(e))),
        };
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') || body.starts_with('%') {
            return None;
        }
        Some(parse_triple_line(body, k + 1, 0))
    })
}

pub(crate) fn parse_triple_line(body: &str, line: usize, base: usize) -> Result<Triple> {
    let bad = |reason: String| Error::Parse { line, reason };
    let mut it = body.split_whitespace();
    let mut index = |name: &str| -> Result<usize> {
        let tok = it.next().ok_or_else(|| bad(format!("missing {name}")))?;
        let v: usize = tok.parse().map_err(|_| bad(format!("bad {name} '{tok}'")))?;
        v.checked_sub(base).ok_or_else(|| bad(format!("{name} {v} below {base}")))
    };
    let row = index("row index")?;
    let col = index("column index")?;
    let tok = it.next().ok_or_else(|| bad("missing value".into()))?;
    let value: f64 = tok.parse().map_err(|_| bad(format!("bad value '{tok}'")))?;
    if !value.is_finite() {
        return Err(bad(format!("non-finite value '{tok}'")));
    }
    if let Some(extra) = it.next() {
        return Err(bad(format!("unexpected token '{extra}'")));
    }
    Ok(Triple::new(row, col, value))
}
