use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// How a new parameter is filled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Uniform in `(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Uniform(f64),
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Param {
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }
}

/// Adam hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Named dense parameters with gradients and Adam moments.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: BTreeMap<String, ParamId>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. `shape` is `[len]` for vectors and
    /// `[rows, cols]` for row-major matrices.
    ///
    /// # Panics
    /// If `name` is already registered.
    pub fn add(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut impl Rng) -> ParamId {
        assert!(!self.by_name.contains_key(name), "duplicate parameter {name}");
        let len: usize = shape.iter().product();
        let value = match init {
            Init::Zeros => vec![0.0; len],
            Init::Constant(c) => vec![c; len],
            Init::Glorot => {
                let (fan_out, fan_in) = match shape {
                    [r, c] => (*r, *c),
                    [n] => (*n, 1),
                    _ => (len, 1),
                };
                let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..len).map(|_| rng.gen_range(-r..r)).collect()
            }
            Init::Uniform(r) => (0..len).map(|_| rng.gen_range(-r..r)).collect(),
        };
        self.insert(name, shape.to_vec(), value)
    }

    pub(crate) fn insert(&mut self, name: &str, shape: Vec<usize>, value: Vec<f64>) -> ParamId {
        let id = ParamId(self.params.len());
        let len = value.len();
        self.params.push(Param {
            name: name.to_string(),
            shape,
            value,
            grad: vec![0.0; len],
            m: vec![0.0; len],
            v: vec![0.0; len],
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].grad
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// One bias-corrected Adam update over every parameter, then zeroes the
    /// gradients. A non-finite gradient aborts before anything is updated.
    pub fn adam_step(&mut self, opt: &Adam) -> Result<()> {
        if let Some(p) = self.params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::NonFinite(p.name.clone()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - opt.beta1.powi(t);
        let bc2 = 1.0 - opt.beta2.powi(t);
        for p in &mut self.params {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.m[i] = opt.beta1 * p.m[i] + (1.0 - opt.beta1) * g;
                p.v[i] = opt.beta2 * p.v[i] + (1.0 - opt.beta2) * g * g;
                let m_hat = p.m[i] / bc1;
                let v_hat = p.v[i] / bc2;
                p.value[i] -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
                p.grad[i] = 0.0;
            }
            if p.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(p.name.clone()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn glorot_range() {
        let mut s = ParamStore::new();
        let id = s.add("w", &[4, 2], Init::Glorot, &mut rng());
        let r = (6.0f64 / 6.0).sqrt();
        assert!(s.value(id).iter().all(|v| v.abs() < r));
        assert_eq!(s.grad(id).len(), 8);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = ParamStore::new();
        let id = s.add("w", &[3], Init::Constant(0.5), &mut rng());
        s.adam_step(&Adam::new(0.1)).unwrap();
        assert_eq!(s.value(id), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = ParamStore::new();
        let id = s.add("w", &[2], Init::Zeros, &mut rng());
        s.get_mut(id).grad.copy_from_slice(&[3.0, -0.01]);
        s.adam_step(&Adam::new(0.01)).unwrap();
        assert!((s.value(id)[0] + 0.01).abs() < 1e-8);
        assert!((s.value(id)[1] - 0.01).abs() < 1e-5);
        assert_eq!(s.grad(id), &[0.0, 0.0]);
    }

    #[test]
    fn converges_on_quadratic_bowl() {
        let mut s = ParamStore::new();
        let id = s.add("w", &[1], Init::Constant(1.0), &mut rng());
        let opt = Adam::new(0.1);
        for _ in 0..200 {
            let w = s.value(id)[0];
            s.get_mut(id).grad[0] = 2.0 * w;
            s.adam_step(&opt).unwrap();
        }
        assert!(s.value(id)[0].abs() < 1e-2, "{}", s.value(id)[0]);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = ParamStore::new();
        s.add("ok", &[1], Init::Zeros, &mut rng());
        let bad = s.add("bad", &[1], Init::Zeros, &mut rng());
        s.get_mut(bad).grad[0] = f64::NAN;
        match s.adam_step(&Adam::new(0.1)) {
            Err(Error::NonFinite(name)) => assert_eq!(name, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
