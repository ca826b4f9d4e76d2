use rand::Rng;

use crate::diffcore::params::{Init, ParamId, ParamStore};
use crate::diffcore::tape::{Tape, Var};
use crate::error::{Error, Result};

/// LSTM cell weights: one `[4H, I+H]` matrix over `[x; h]` and a `4H` bias,
/// gates ordered input, forget, candidate, output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lstm {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl Lstm {
    /// Glorot weights, zero biases except the forget gate at 1.0.
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let w = store.add(&format!("{prefix}.w"), &[4 * hidden, input + hidden], Init::Glorot, rng);
        let b = store.add(&format!("{prefix}.b"), &[4 * hidden], Init::Zeros, rng);
        store.value_mut(b)[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        Lstm { w, b, input, hidden }
    }

    /// Looks up the tensors created by [`Lstm::new`] with the same prefix.
    pub fn bind(store: &ParamStore, prefix: &str) -> Result<Self> {
        let w = lookup(store, &format!("{prefix}.w"))?;
        let b = lookup(store, &format!("{prefix}.b"))?;
        let p = store.get(w);
        let hidden = p.rows() / 4;
        Ok(Lstm { w, b, input: p.cols() - hidden, hidden })
    }

    pub fn zero_state(&self, tape: &mut Tape) -> LstmState {
        LstmState { h: tape.zeros(self.hidden), c: tape.zeros(self.hidden) }
    }

    pub fn step(&self, tape: &mut Tape, store: &ParamStore, x: Var, state: LstmState) -> Result<LstmState> {
        if tape.dim(x) != self.input || tape.dim(state.h) != self.hidden || tape.dim(state.c) != self.hidden {
            return Err(Error::Shape(format!(
                "lstm expects input {} hidden {}, got input {} h {} c {}",
                self.input,
                self.hidden,
                tape.dim(x),
                tape.dim(state.h),
                tape.dim(state.c)
            )));
        }
        let n = self.hidden;
        let xh = tape.concat(&[x, state.h]);
        let z = tape.matvec(store, self.w, xh);
        let b = tape.param(store, self.b);
        let z = tape.add(z, b);
        let zi = tape.slice(z, 0, n);
        let zf = tape.slice(z, n, n);
        let zg = tape.slice(z, 2 * n, n);
        let zo = tape.slice(z, 3 * n, n);
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let g = tape.tanh(zg);
        let o = tape.sigmoid(zo);
        let fc = tape.mul(f, state.c);
        let ig = tape.mul(i, g);
        let c = tape.add(fc, ig);
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc);
        Ok(LstmState { h, c })
    }
}

pub(crate) fn lookup(store: &ParamStore, name: &str) -> Result<ParamId> {
    store.id(name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
}

/// Forward and backward LSTMs whose hidden states are concatenated per position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Blstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

impl Blstm {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Blstm {
            fwd: Lstm::new(store, &format!("{prefix}.fwd"), input, hidden, rng),
            bwd: Lstm::new(store, &format!("{prefix}.bwd"), input, hidden, rng),
        }
    }

    pub fn bind(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(Blstm { fwd: Lstm::bind(store, &format!("{prefix}.fwd"))?, bwd: Lstm::bind(store, &format!("{prefix}.bwd"))? })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }

    /// Output `t` is `[fwd_h_t ; bwd_h_t]`, where the backward pass runs from
    /// the last position to the first.
    pub fn run(&self, tape: &mut Tape, store: &ParamStore, xs: &[Var]) -> Result<Vec<Var>> {
        if xs.is_empty() {
            return Err(Error::Shape("blstm over an empty sequence".into()));
        }
        let mut state = self.fwd.zero_state(tape);
        let mut fwd = Vec::with_capacity(xs.len());
        for &x in xs {
            state = self.fwd.step(tape, store, x, state)?;
            fwd.push(state.h);
        }
        let mut state = self.bwd.zero_state(tape);
        let mut bwd = vec![state.h; xs.len()];
        for (t, &x) in xs.iter().enumerate().rev() {
            state = self.bwd.step(tape, store, x, state)?;
            bwd[t] = state.h;
        }
        Ok(fwd.into_iter().zip(bwd).map(|(f, b)| tape.concat(&[f, b])).collect())
    }
}

/// Additive attention: `score_j = v . tanh(W_q q + W_k k_j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Attention {
    pub w_query: ParamId,
    pub w_key: ParamId,
    pub v: ParamId,
}

#[derive(Clone, Debug)]
pub struct Attended {
    pub scores: Var,
    pub alpha: Var,
    pub context: Var,
}

impl Attention {
    pub fn new(store: &mut ParamStore, prefix: &str, query: usize, key: usize, dim: usize, rng: &mut impl Rng) -> Self {
        Attention {
            w_query: store.add(&format!("{prefix}.wq"), &[dim, query], Init::Glorot, rng),
            w_key: store.add(&format!("{prefix}.wk"), &[dim, key], Init::Glorot, rng),
            v: store.add(&format!("{prefix}.v"), &[1, dim], Init::Glorot, rng),
        }
    }

    pub fn bind(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(Attention {
            w_query: lookup(store, &format!("{prefix}.wq"))?,
            w_key: lookup(store, &format!("{prefix}.wk"))?,
            v: lookup(store, &format!("{prefix}.v"))?,
        })
    }

    /// `W_k k_j` for every key; reusable across decoder steps.
    pub fn project_keys(&self, tape: &mut Tape, store: &ParamStore, keys: &[Var]) -> Vec<Var> {
        keys.iter().map(|&k| tape.matvec(store, self.w_key, k)).collect()
    }

    /// Attends with keys already passed through [`Attention::project_keys`].
    /// `mask[j] == false` removes key `j` from the softmax.
    pub fn attend(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        query: Var,
        keys: &[Var],
        projected: &[Var],
        mask: Option<&[bool]>,
    ) -> Result<Attended> {
        if keys.is_empty() || keys.len() != projected.len() {
            return Err(Error::Shape("attention needs one projection per key".into()));
        }
        if let Some(m) = mask {
            if m.len() != keys.len() {
                return Err(Error::Shape(format!("mask has {} entries for {} keys", m.len(), keys.len())));
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::NoCandidate);
            }
        }
        let q = tape.matvec(store, self.w_query, query);
        let scores: Vec<Var> = projected
            .iter()
            .enumerate()
            .map(|(j, &pk)| {
                if mask.is_some_and(|m| !m[j]) {
                    // excluded from the softmax; value is irrelevant
                    return tape.zeros(1);
                }
                let pre = tape.add(q, pk);
                let act = tape.tanh(pre);
                tape.matvec(store, self.v, act)
            })
            .collect();
        let scores = tape.concat(&scores);
        let alpha = tape.softmax(scores, mask.map(<[bool]>::to_vec));
        let context = tape.weighted_sum(alpha, keys);
        Ok(Attended { scores, alpha, context })
    }
}

/// One-shot attention: projects `keys` and attends with `query`.
pub fn additive_attention(
    tape: &mut Tape,
    store: &ParamStore,
    att: &Attention,
    query: Var,
    keys: &[Var],
    mask: Option<&[bool]>,
) -> Result<Attended> {
    let projected = att.project_keys(tape, store, keys);
    att.attend(tape, store, query, keys, &projected, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::gradcheck::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_lstm_gives_zero_state() {
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "l", 3, 4, &mut rng(0));
        store.value_mut(lstm.w).iter_mut().for_each(|v| *v = 0.0);
        store.value_mut(lstm.b).iter_mut().for_each(|v| *v = 0.0);
        let mut t = Tape::new();
        let x = t.leaf(vec![0.3, -2.0, 5.0]);
        let s0 = lstm.zero_state(&mut t);
        let s1 = lstm.step(&mut t, &store, x, s0).unwrap();
        assert!(t.value(s1.h).iter().all(|&v| v == 0.0));
        assert!(t.value(s1.c).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "l", 2, 3, &mut rng(0));
        // zero input weights; forget bias huge, input gate closed
        store.value_mut(lstm.w).iter_mut().for_each(|v| *v = 0.0);
        let b = store.value_mut(lstm.b);
        b.iter_mut().for_each(|v| *v = 0.0);
        b[0..3].iter_mut().for_each(|v| *v = -50.0);
        b[3..6].iter_mut().for_each(|v| *v = 50.0);
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0, -1.0]);
        let h = t.leaf(vec![0.1, 0.2, 0.3]);
        let c = t.leaf(vec![0.5, -0.7, 2.0]);
        let s = lstm.step(&mut t, &store, x, LstmState { h, c }).unwrap();
        for (a, b) in t.value(s.c).iter().zip([0.5, -0.7, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_rejects_bad_shapes() {
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "l", 2, 3, &mut rng(0));
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0; 5]);
        let s = lstm.zero_state(&mut t);
        assert!(matches!(lstm.step(&mut t, &store, x, s), Err(Error::Shape(_))));
    }

    #[test]
    fn lstm_gradients() {
        for seed in 0..5 {
            let mut r = rng(seed);
            let mut store = ParamStore::new();
            let lstm = Lstm::new(&mut store, "l", 4, 4, &mut r);
            let (x, h, c, target) = (random_vec(&mut r, 4), random_vec(&mut r, 4), random_vec(&mut r, 4), random_vec(&mut r, 4));
            let report = grad_check(&mut store, 1e-4, 1e-4, |t, s| {
                let x = t.leaf(x.clone());
                let st = LstmState { h: t.leaf(h.clone()), c: t.leaf(c.clone()) };
                let out = lstm.step(t, s, x, st).unwrap();
                let tv = t.leaf(target.clone());
                let a = t.dot(out.h, tv);
                let b = t.dot(out.c, out.c);
                t.add(a, b)
            });
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn blstm_singleton_and_reversal() {
        let mut r = rng(3);
        let mut store = ParamStore::new();
        let bl = Blstm::new(&mut store, "b", 3, 2, &mut r);
        let xs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut r, 3)).collect();

        let mut t = Tape::new();
        let x0 = t.leaf(xs[0].clone());
        let out = bl.run(&mut t, &store, &[x0]).unwrap();
        let s = bl.fwd.zero_state(&mut t);
        let f = bl.fwd.step(&mut t, &store, x0, s).unwrap();
        let s = bl.bwd.zero_state(&mut t);
        let b = bl.bwd.step(&mut t, &store, x0, s).unwrap();
        assert_eq!(t.value(out[0]), [t.value(f.h), t.value(b.h)].concat().as_slice());

        // Reversing the sequence swaps the roles of the two directions only
        // when both directions share weights.
        let mut shared = store.clone();
        let fw = shared.value(bl.fwd.w).to_vec();
        let fb = shared.value(bl.fwd.b).to_vec();
        shared.value_mut(bl.bwd.w).copy_from_slice(&fw);
        shared.value_mut(bl.bwd.b).copy_from_slice(&fb);
        let mut t = Tape::new();
        let fwd_in: Vec<Var> = xs.iter().map(|x| t.leaf(x.clone())).collect();
        let rev_in: Vec<Var> = xs.iter().rev().map(|x| t.leaf(x.clone())).collect();
        let a = bl.run(&mut t, &shared, &fwd_in).unwrap();
        let b = bl.run(&mut t, &shared, &rev_in).unwrap();
        for i in 0..3 {
            let (av, bv) = (t.value(a[i]), t.value(b[2 - i]));
            assert_eq!(&av[..2], &bv[2..]);
            assert_eq!(&av[2..], &bv[..2]);
        }
    }

    #[test]
    fn blstm_rejects_empty() {
        let mut store = ParamStore::new();
        let bl = Blstm::new(&mut store, "b", 3, 2, &mut rng(0));
        assert!(bl.run(&mut Tape::new(), &store, &[]).is_err());
    }

    #[test]
    fn blstm_gradients() {
        let mut r = rng(9);
        let mut store = ParamStore::new();
        let bl = Blstm::new(&mut store, "b", 3, 4, &mut r);
        let xs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut r, 3)).collect();
        let target = random_vec(&mut r, 8);
        let report = grad_check(&mut store, 1e-4, 1e-4, |t, s| {
            let ins: Vec<Var> = xs.iter().map(|x| t.leaf(x.clone())).collect();
            let outs = bl.run(t, s, &ins).unwrap();
            let tv = t.leaf(target.clone());
            let terms: Vec<Var> = outs.iter().map(|&o| t.dot(o, tv)).collect();
            t.sum(&terms)
        });
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn attention_single_key_and_uniform() {
        let mut r = rng(4);
        let mut store = ParamStore::new();
        let att = Attention::new(&mut store, "a", 3, 2, 4, &mut r);
        let mut t = Tape::new();
        let q = t.leaf(random_vec(&mut r, 3));
        let k = t.leaf(vec![0.4, -0.2]);
        let out = additive_attention(&mut t, &store, &att, q, &[k], None).unwrap();
        assert_eq!(t.value(out.alpha), &[1.0]);
        assert_eq!(t.value(out.context), &[0.4, -0.2]);

        let keys: Vec<Var> = (0..4).map(|_| t.leaf(vec![0.1, 0.7])).collect();
        let mask = [true, false, true, true];
        let out = additive_attention(&mut t, &store, &att, q, &keys, Some(&mask)).unwrap();
        let a = t.value(out.alpha);
        assert_eq!(a[1], 0.0);
        for &j in &[0, 2, 3] {
            assert!((a[j] - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(matches!(
            additive_attention(&mut t, &store, &att, q, &keys, Some(&[false; 4])),
            Err(Error::NoCandidate)
        ));
    }

    #[test]
    fn attention_gradients() {
        for seed in 0..5 {
            let mut r = rng(100 + seed);
            let mut store = ParamStore::new();
            let att = Attention::new(&mut store, "a", 5, 4, 6, &mut r);
            let q = random_vec(&mut r, 5);
            let keys: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut r, 4)).collect();
            let target = random_vec(&mut r, 4);
            let mask = [true, true, false, true];
            let report = grad_check(&mut store, 1e-4, 1e-4, |t, s| {
                let qv = t.leaf(q.clone());
                let ks: Vec<Var> = keys.iter().map(|k| t.leaf(k.clone())).collect();
                let out = additive_attention(t, s, &att, qv, &ks, Some(&mask)).unwrap();
                let tv = t.leaf(target.clone());
                let a = t.dot(out.context, tv);
                let lp = t.log_softmax(out.scores, Some(mask.to_vec()));
                let b = t.pick(lp, 1);
                t.add(a, b)
            });
            assert!(report.passed(), "{report:?}");
        }
    }
}
