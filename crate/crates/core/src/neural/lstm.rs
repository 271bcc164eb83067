use super::params::LstmWeights;
use crate::scalar::Scalar;

/// Intermediate values of one cell step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    pub x: Vec<T>,
    pub s_prev: Vec<T>,
    pub c_prev: Vec<T>,
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub o: Vec<T>,
    pub g: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub s: Vec<T>,
}

/// One step: `i,f,o = σ(xU + sW + b)`, `g = tanh(xU^g + sW^g + b^g)`,
/// `c = c_prev∘f + g∘i`, `s = tanh(c)∘o`.
pub fn lstm_cell<T: Scalar>(
    x: &[T],
    s_prev: &[T],
    c_prev: &[T],
    w: &LstmWeights<T>,
) -> (Vec<T>, Vec<T>) {
    let cache = lstm_forward(x, s_prev, c_prev, w);
    (cache.s, cache.c)
}

pub fn lstm_forward<T: Scalar>(
    x: &[T],
    s_prev: &[T],
    c_prev: &[T],
    w: &LstmWeights<T>,
) -> LstmCache<T> {
    let h = w.hidden();
    let mut z = w.b.data().to_vec();
    w.u.vec_mul_acc(x, &mut z);
    w.w.vec_mul_acc(s_prev, &mut z);
    let i: Vec<T> = z[..h].iter().map(|v| v.sigmoid()).collect();
    let f: Vec<T> = z[h..2 * h].iter().map(|v| v.sigmoid()).collect();
    let o: Vec<T> = z[2 * h..3 * h].iter().map(|v| v.sigmoid()).collect();
    let g: Vec<T> = z[3 * h..].iter().map(|v| v.tanh()).collect();
    let c: Vec<T> = (0..h).map(|k| c_prev[k] * f[k] + g[k] * i[k]).collect();
    let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
    let s: Vec<T> = (0..h).map(|k| tanh_c[k] * o[k]).collect();
    LstmCache {
        x: x.to_vec(),
        s_prev: s_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        o,
        g,
        c,
        tanh_c,
        s,
    }
}

/// Gradients flowing out of one step.
pub struct LstmBack<T> {
    pub dx: Vec<T>,
    pub ds_prev: Vec<T>,
    pub dc_prev: Vec<T>,
}

/// Backpropagates `ds`, `dc` (gradients w.r.t. this step's `s` and `c`),
/// accumulating weight gradients into `grad`.
pub fn lstm_backward<T: Scalar>(
    cache: &LstmCache<T>,
    ds: &[T],
    dc: &[T],
    w: &LstmWeights<T>,
    grad: &mut LstmWeights<T>,
) -> LstmBack<T> {
    let h = w.hidden();
    let one = T::one();
    let mut dz = vec![T::zero(); 4 * h];
    let mut dc_prev = vec![T::zero(); h];
    for k in 0..h {
        let dct = dc[k] + ds[k] * cache.o[k] * (one - cache.tanh_c[k] * cache.tanh_c[k]);
        let (i, f, o, g) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k]);
        dz[k] = dct * g * i * (one - i);
        dz[h + k] = dct * cache.c_prev[k] * f * (one - f);
        dz[2 * h + k] = ds[k] * cache.tanh_c[k] * o * (one - o);
        dz[3 * h + k] = dct * i * (one - g * g);
        dc_prev[k] = dct * f;
    }
    grad.u.outer_acc(&cache.x, &dz);
    grad.w.outer_acc(&cache.s_prev, &dz);
    for (b, d) in grad.b.data_mut().iter_mut().zip(&dz) {
        *b += *d;
    }
    let mut dx = vec![T::zero(); cache.x.len()];
    w.u.vec_mul_t_acc(&dz, &mut dx);
    let mut ds_prev = vec![T::zero(); h];
    w.w.vec_mul_t_acc(&dz, &mut ds_prev);
    LstmBack { dx, ds_prev, dc_prev }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    #[test]
    fn zero_weights_give_zero_state() {
        let w = LstmWeights::<f64>::zeros(3, 2);
        let (s, c) = lstm_cell(&[1.0, -2.0, 0.5], &[0.3, 0.1], &[0.0, 0.0], &w);
        assert_eq!(s, vec![0.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_carries_memory() {
        let mut w = LstmWeights::<f64>::zeros(2, 2);
        let b = w.b.data_mut();
        for k in 0..2 {
            b[k] = -50.0;
            b[2 + k] = 50.0;
        }
        let (_, c) = lstm_cell(&[0.0, 0.0], &[0.0, 0.0], &[0.7, -1.3], &w);
        assert!((c[0] - 0.7).abs() < 1e-12);
        assert!((c[1] + 1.3).abs() < 1e-12);
    }

    #[test]
    fn float_and_double_agree() {
        let mut w = LstmWeights::<f64>::zeros(2, 1);
        w.u = Mat::from_vec(2, 4, vec![0.1, 0.2, 0.3, 0.4, -0.1, -0.2, -0.3, -0.4]);
        w.w = Mat::from_vec(1, 4, vec![0.5, 0.5, 0.5, 0.5]);
        let wf = LstmWeights {
            u: w.u.map(|v| v as f32),
            w: w.w.map(|v| v as f32),
            b: w.b.map(|v| v as f32),
        };
        let (s, _) = lstm_cell(&[1.0, 2.0], &[0.5], &[0.1], &w);
        let (sf, _) = lstm_cell(&[1.0f32, 2.0], &[0.5], &[0.1], &wf);
        assert!((s[0] - f64::from(sf[0])).abs() < 1e-6);
    }
}
