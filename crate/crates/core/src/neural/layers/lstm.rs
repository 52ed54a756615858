use rand::Rng;

use super::glorot_uniform;
use crate::neural::{gemm, Mat, NeuralError, Param, Scalar, SeqBatch, Tensor, Value};

/// One LSTM direction with fused gate weights in `i, f, g, o` order:
/// `wx: [C, 4U]`, `wh: [U, 4U]`, `b: [4U]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    pub wx: Param<T>,
    pub wh: Param<T>,
    pub b: Param<T>,
}

impl<T: Scalar> LstmCell<T> {
    fn new<R: Rng>(channels: usize, units: usize, rng: &mut R) -> Self {
        let mut b = Tensor::zeros(&[4 * units]);
        b.data_mut()[units..2 * units].fill(T::one());
        Self {
            wx: Param::new(glorot_uniform(&[channels, 4 * units], channels, 4 * units, rng)),
            wh: Param::new(glorot_uniform(&[units, 4 * units], units, 4 * units, rng)),
            b: Param::new(b),
        }
    }

    fn units(&self) -> usize {
        self.wh.value.shape()[0]
    }
}

/// Bidirectional LSTM over the valid prefix of each row. The backward
/// direction reads position `len - 1 - s` at step `s`. Output features are
/// `[forward, backward]`; without `return_sequences` each direction
/// contributes its final state.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm<T> {
    pub forward: LstmCell<T>,
    pub backward: LstmCell<T>,
    pub return_sequences: bool,
}

/// Per-step state indexed `[b, s]`, only valid for `s < len[b]`.
#[derive(Debug, Clone)]
struct DirCache<T> {
    gates: Vec<T>,
    cells: Vec<T>,
    hidden: Vec<T>,
    tanh_c: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache<T> {
    /// Valid input rows packed `[ΣL, C]`, sample-major.
    x: Vec<T>,
    offsets: Vec<usize>,
    lengths: Vec<usize>,
    steps: usize,
    dirs: [DirCache<T>; 2],
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn position(len: usize, s: usize, reverse: bool) -> usize {
    if reverse {
        len - 1 - s
    } else {
        s
    }
}

impl<T: Scalar> BiLstm<T> {
    pub fn new<R: Rng>(channels: usize, units: usize, return_sequences: bool, rng: &mut R) -> Self {
        let forward = LstmCell::new(channels, units, rng);
        let backward = LstmCell::new(channels, units, rng);
        Self { forward, backward, return_sequences }
    }

    pub fn units(&self) -> usize {
        self.forward.units()
    }

    pub fn channels(&self) -> usize {
        self.forward.wx.value.shape()[0]
    }

    pub(crate) fn params(&self) -> Vec<&Param<T>> {
        let (f, b) = (&self.forward, &self.backward);
        vec![&f.wx, &f.wh, &f.b, &b.wx, &b.wh, &b.b]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let (f, b) = (&mut self.forward, &mut self.backward);
        vec![&mut f.wx, &mut f.wh, &mut f.b, &mut b.wx, &mut b.wh, &mut b.b]
    }

    fn run_direction(cell: &LstmCell<T>, x: &[T], offsets: &[usize], lengths: &[usize], t: usize, reverse: bool) -> DirCache<T> {
        let c = cell.wx.value.shape()[0];
        let u = cell.units();
        let g4 = 4 * u;
        let total = x.len() / c;
        let b = lengths.len();

        let mut xw = vec![T::zero(); total * g4];
        for r in xw.chunks_mut(g4) {
            r.copy_from_slice(cell.b.value.data());
        }
        gemm(Mat::new(x, total, c), Mat::new(cell.wx.value.data(), c, g4), &mut xw, T::one());

        let mut st = DirCache {
            gates: vec![T::zero(); b * t * g4],
            cells: vec![T::zero(); b * t * u],
            hidden: vec![T::zero(); b * t * u],
            tanh_c: vec![T::zero(); b * t * u],
        };
        let tmax = lengths.iter().copied().max().unwrap_or(0);
        for s in 0..tmax {
            let active: Vec<usize> = (0..b).filter(|&i| lengths[i] > s).collect();
            let na = active.len();
            let mut pre = vec![T::zero(); na * g4];
            for (a, &bi) in active.iter().enumerate() {
                let row = offsets[bi] + position(lengths[bi], s, reverse);
                pre[a * g4..(a + 1) * g4].copy_from_slice(&xw[row * g4..(row + 1) * g4]);
            }
            if s > 0 {
                let mut hprev = vec![T::zero(); na * u];
                for (a, &bi) in active.iter().enumerate() {
                    let src = (bi * t + s - 1) * u;
                    hprev[a * u..(a + 1) * u].copy_from_slice(&st.hidden[src..src + u]);
                }
                gemm(Mat::new(&hprev, na, u), Mat::new(cell.wh.value.data(), u, g4), &mut pre, T::one());
            }
            for (a, &bi) in active.iter().enumerate() {
                let z = &pre[a * g4..(a + 1) * g4];
                let at = bi * t + s;
                for k in 0..u {
                    let i = sigmoid(z[k]);
                    let f = sigmoid(z[u + k]);
                    let g = z[2 * u + k].tanh();
                    let o = sigmoid(z[3 * u + k]);
                    let c_prev = if s > 0 { st.cells[(at - 1) * u + k] } else { T::zero() };
                    let cell_v = f * c_prev + i * g;
                    let tc = cell_v.tanh();
                    let gates = &mut st.gates[at * g4..(at + 1) * g4];
                    gates[k] = i;
                    gates[u + k] = f;
                    gates[2 * u + k] = g;
                    gates[3 * u + k] = o;
                    st.cells[at * u + k] = cell_v;
                    st.tanh_c[at * u + k] = tc;
                    st.hidden[at * u + k] = o * tc;
                }
            }
        }
        st
    }

    pub fn forward(&self, x: &Value<T>) -> Result<(Value<T>, BiLstmCache<T>), NeuralError> {
        let x = x.expect_seq("bilstm")?;
        let (b, t, c) = (x.batch(), x.steps(), x.channels());
        if c != self.channels() {
            return Err(NeuralError::Shape(format!("bilstm expects {} channels, got {c}", self.channels())));
        }
        let u = self.units();
        let mut offsets = Vec::with_capacity(b);
        let mut packed = Vec::with_capacity(x.lengths.iter().sum::<usize>() * c);
        for (bi, &len) in x.lengths.iter().enumerate() {
            offsets.push(packed.len() / c);
            packed.extend_from_slice(&x.data.data()[bi * t * c..(bi * t + len) * c]);
        }
        let fwd = Self::run_direction(&self.forward, &packed, &offsets, &x.lengths, t, false);
        let bwd = Self::run_direction(&self.backward, &packed, &offsets, &x.lengths, t, true);

        let out = if self.return_sequences {
            let mut y = Tensor::zeros(&[b, t, 2 * u]);
            let yd = y.data_mut();
            for (bi, &len) in x.lengths.iter().enumerate() {
                for s in 0..len {
                    let src = (bi * t + s) * u;
                    let fpos = (bi * t + s) * 2 * u;
                    yd[fpos..fpos + u].copy_from_slice(&fwd.hidden[src..src + u]);
                    let bpos = (bi * t + (len - 1 - s)) * 2 * u + u;
                    yd[bpos..bpos + u].copy_from_slice(&bwd.hidden[src..src + u]);
                }
            }
            Value::Seq(SeqBatch { data: y, lengths: x.lengths.clone() })
        } else {
            let mut y = Tensor::zeros(&[b, 2 * u]);
            let yd = y.data_mut();
            for (bi, &len) in x.lengths.iter().enumerate() {
                let src = (bi * t + len - 1) * u;
                yd[bi * 2 * u..bi * 2 * u + u].copy_from_slice(&fwd.hidden[src..src + u]);
                yd[bi * 2 * u + u..(bi + 1) * 2 * u].copy_from_slice(&bwd.hidden[src..src + u]);
            }
            Value::Flat(y)
        };
        let cache = BiLstmCache { x: packed, offsets, lengths: x.lengths.clone(), steps: t, dirs: [fwd, bwd] };
        Ok((out, cache))
    }

    /// Backpropagation through time for one direction. `dh_ext` holds the
    /// output gradient per `[b, s]`; adds into `dx` (packed like `cache.x`).
    fn backward_direction(cell: &mut LstmCell<T>, cache: &BiLstmCache<T>, d: usize, dh_ext: &[T], dx: &mut [T]) {
        let st = &cache.dirs[d];
        let reverse = d == 1;
        let (t, lengths, offsets) = (cache.steps, &cache.lengths, &cache.offsets);
        let c = cell.wx.value.shape()[0];
        let u = cell.units();
        let g4 = 4 * u;
        let b = lengths.len();
        let total = cache.x.len() / c;

        let mut da_all = vec![T::zero(); total * g4];
        let mut dh_next = vec![T::zero(); b * u];
        let mut dc_next = vec![T::zero(); b * u];
        let tmax = lengths.iter().copied().max().unwrap_or(0);
        for s in (0..tmax).rev() {
            let active: Vec<usize> = (0..b).filter(|&i| lengths[i] > s).collect();
            let na = active.len();
            let mut da = vec![T::zero(); na * g4];
            for (a, &bi) in active.iter().enumerate() {
                let at = bi * t + s;
                let gates = &st.gates[at * g4..(at + 1) * g4];
                let row = &mut da[a * g4..(a + 1) * g4];
                for k in 0..u {
                    let (i, f, g, o) = (gates[k], gates[u + k], gates[2 * u + k], gates[3 * u + k]);
                    let tc = st.tanh_c[at * u + k];
                    let dh = dh_ext[at * u + k] + dh_next[bi * u + k];
                    let dc = dc_next[bi * u + k] + dh * o * (T::one() - tc * tc);
                    let c_prev = if s > 0 { st.cells[(at - 1) * u + k] } else { T::zero() };
                    row[k] = dc * g * i * (T::one() - i);
                    row[u + k] = dc * c_prev * f * (T::one() - f);
                    row[2 * u + k] = dc * i * (T::one() - g * g);
                    row[3 * u + k] = dh * tc * o * (T::one() - o);
                    dc_next[bi * u + k] = dc * f;
                }
                let dst = offsets[bi] + position(lengths[bi], s, reverse);
                da_all[dst * g4..(dst + 1) * g4].copy_from_slice(row);
            }
            if s > 0 {
                let mut hprev = vec![T::zero(); na * u];
                for (a, &bi) in active.iter().enumerate() {
                    let src = (bi * t + s - 1) * u;
                    hprev[a * u..(a + 1) * u].copy_from_slice(&st.hidden[src..src + u]);
                }
                gemm(Mat::new(&hprev, na, u).t(), Mat::new(&da, na, g4), cell.wh.grad.data_mut(), T::one());
                let mut dhprev = vec![T::zero(); na * u];
                gemm(Mat::new(&da, na, g4), Mat::new(cell.wh.value.data(), u, g4).t(), &mut dhprev, T::zero());
                for (a, &bi) in active.iter().enumerate() {
                    dh_next[bi * u..(bi + 1) * u].copy_from_slice(&dhprev[a * u..(a + 1) * u]);
                }
            }
        }
        gemm(Mat::new(&cache.x, total, c).t(), Mat::new(&da_all, total, g4), cell.wx.grad.data_mut(), T::one());
        let db = cell.b.grad.data_mut();
        for r in da_all.chunks(g4) {
            db.iter_mut().zip(r).for_each(|(a, &v)| *a = *a + v);
        }
        gemm(Mat::new(&da_all, total, g4), Mat::new(cell.wx.value.data(), c, g4).t(), dx, T::one());
    }

    pub fn backward(&mut self, cache: &BiLstmCache<T>, dy: &Value<T>) -> Result<Value<T>, NeuralError> {
        let (t, u, c) = (cache.steps, self.units(), self.channels());
        let b = cache.lengths.len();
        let mut dh = [vec![T::zero(); b * t * u], vec![T::zero(); b * t * u]];
        match (self.return_sequences, dy) {
            (true, Value::Seq(g)) if g.data.shape() == [b, t, 2 * u] => {
                let gd = g.data.data();
                for (bi, &len) in cache.lengths.iter().enumerate() {
                    for s in 0..len {
                        let dst = (bi * t + s) * u;
                        let fsrc = (bi * t + s) * 2 * u;
                        dh[0][dst..dst + u].copy_from_slice(&gd[fsrc..fsrc + u]);
                        let bsrc = (bi * t + (len - 1 - s)) * 2 * u + u;
                        dh[1][dst..dst + u].copy_from_slice(&gd[bsrc..bsrc + u]);
                    }
                }
            }
            (false, Value::Flat(g)) if g.shape() == [b, 2 * u] => {
                let gd = g.data();
                for (bi, &len) in cache.lengths.iter().enumerate() {
                    let dst = (bi * t + len - 1) * u;
                    dh[0][dst..dst + u].copy_from_slice(&gd[bi * 2 * u..bi * 2 * u + u]);
                    dh[1][dst..dst + u].copy_from_slice(&gd[bi * 2 * u + u..(bi + 1) * 2 * u]);
                }
            }
            _ => return Err(NeuralError::Shape("bilstm backward: gradient shape mismatch".into())),
        }
        let mut dx_packed = vec![T::zero(); cache.x.len()];
        Self::backward_direction(&mut self.forward, cache, 0, &dh[0], &mut dx_packed);
        Self::backward_direction(&mut self.backward, cache, 1, &dh[1], &mut dx_packed);

        let mut dx = Tensor::zeros(&[b, t, c]);
        for (bi, &len) in cache.lengths.iter().enumerate() {
            let o = cache.offsets[bi];
            dx.data_mut()[bi * t * c..(bi * t + len) * c].copy_from_slice(&dx_packed[o * c..(o + len) * c]);
        }
        Ok(Value::Seq(SeqBatch { data: dx, lengths: cache.lengths.clone() }))
    }
}
