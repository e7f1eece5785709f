use ndarray::{s, Array1, Array2, ArrayView1};

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// In-place `acc += a ⊗ b`.
pub(crate) fn add_outer(acc: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (mut row, &ai) in acc.rows_mut().into_iter().zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(ai, b);
        }
    }
}

/// `w^T v`, walking `w` row by row.
pub(crate) fn tdot(w: &Array2<f64>, v: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(w.ncols());
    for (row, &vi) in w.rows().into_iter().zip(v.iter()) {
        if vi != 0.0 {
            out.scaled_add(vi, &row);
        }
    }
    out
}

pub(crate) fn concat(parts: &[ArrayView1<f64>]) -> Array1<f64> {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = Array1::zeros(n);
    let mut at = 0;
    for p in parts {
        out.slice_mut(s![at..at + p.len()]).assign(p);
        at += p.len();
    }
    out
}

/// Splits `v` into consecutive pieces of the given lengths.
pub(crate) fn split(v: &Array1<f64>, lens: &[usize]) -> Vec<Array1<f64>> {
    let mut at = 0;
    lens.iter()
        .map(|&n| {
            let piece = v.slice(s![at..at + n]).to_owned();
            at += n;
            piece
        })
        .collect()
}

/// Everything one cell step needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    /// `[x; h_prev]`
    xh: Array1<f64>,
    c_prev: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    o: Array1<f64>,
    tanh_c: Array1<f64>,
}

impl LstmCache {
    pub(crate) fn h_out(&self) -> Array1<f64> {
        &self.o * &self.tanh_c
    }
}

/// One step of a standard LSTM with gate order (input, forget, cell, output).
/// `w` has shape `4H x (In + H)`.
pub(crate) fn lstm_forward(
    w: &Array2<f64>,
    b: &Array1<f64>,
    x: &Array1<f64>,
    h_prev: &Array1<f64>,
    c_prev: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>, LstmCache) {
    let hs = h_prev.len();
    let xh = concat(&[x.view(), h_prev.view()]);
    let a = w.dot(&xh) + b;
    let i = a.slice(s![0..hs]).mapv(sigmoid);
    let f = a.slice(s![hs..2 * hs]).mapv(sigmoid);
    let g = a.slice(s![2 * hs..3 * hs]).mapv(f64::tanh);
    let o = a.slice(s![3 * hs..4 * hs]).mapv(sigmoid);
    let c = &f * c_prev + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    let cache = LstmCache {
        xh,
        c_prev: c_prev.clone(),
        i,
        f,
        g,
        o,
        tanh_c,
    };
    (h, c, cache)
}

/// Backward through one step. Accumulates into `dw`/`db` and returns
/// `(dx, dh_prev, dc_prev)`.
pub(crate) fn lstm_backward(
    w: &Array2<f64>,
    cache: &LstmCache,
    dh: &Array1<f64>,
    dc: &Array1<f64>,
    dw: &mut Array2<f64>,
    db: &mut Array1<f64>,
) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let hs = dh.len();
    let LstmCache { xh, c_prev, i, f, g, o, tanh_c } = cache;
    let d_o = dh * tanh_c;
    let dct = dc + &(dh * o * &tanh_c.mapv(|t| 1.0 - t * t));
    let mut da = Array1::zeros(4 * hs);
    for k in 0..hs {
        da[k] = dct[k] * g[k] * i[k] * (1.0 - i[k]);
        da[hs + k] = dct[k] * c_prev[k] * f[k] * (1.0 - f[k]);
        da[2 * hs + k] = dct[k] * i[k] * (1.0 - g[k] * g[k]);
        da[3 * hs + k] = d_o[k] * o[k] * (1.0 - o[k]);
    }
    add_outer(dw, &da, xh);
    *db += &da;
    let dxh = tdot(w, &da);
    let n_in = xh.len() - hs;
    let dx = dxh.slice(s![0..n_in]).to_owned();
    let dh_prev = dxh.slice(s![n_in..]).to_owned();
    let dc_prev = &dct * f;
    (dx, dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_gradient_matches_finite_differences() {
        let (n_in, hs) = (3, 2);
        let w = Array2::from_shape_fn((4 * hs, n_in + hs), |(r, c)| ((r * 7 + c * 3) % 11) as f64 / 10.0 - 0.5);
        let b = Array1::from_shape_fn(4 * hs, |k| k as f64 / 20.0);
        let x = Array1::from(vec![0.3, -0.2, 0.9]);
        let h0 = Array1::from(vec![0.1, -0.4]);
        let c0 = Array1::from(vec![0.5, 0.2]);
        // loss = sum(h * [1, -2]) + sum(c * [0.5, 0.3])
        let wh = Array1::from(vec![1.0, -2.0]);
        let wc = Array1::from(vec![0.5, 0.3]);
        let loss = |w: &Array2<f64>, x: &Array1<f64>| {
            let (h, c, _) = lstm_forward(w, &b, x, &h0, &c0);
            h.dot(&wh) + c.dot(&wc)
        };
        let (_, _, cache) = lstm_forward(&w, &b, &x, &h0, &c0);
        let mut dw = Array2::zeros(w.raw_dim());
        let mut db = Array1::zeros(b.len());
        let (dx, _, _) = lstm_backward(&w, &cache, &wh, &wc, &mut dw, &mut db);
        let h = 1e-6;
        for r in 0..w.nrows() {
            for c in 0..w.ncols() {
                let mut wp = w.clone();
                wp[[r, c]] += h;
                let mut wm = w.clone();
                wm[[r, c]] -= h;
                let num = (loss(&wp, &x) - loss(&wm, &x)) / (2.0 * h);
                assert!((num - dw[[r, c]]).abs() < 1e-8, "{r},{c}: {num} vs {}", dw[[r, c]]);
            }
        }
        for k in 0..n_in {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let num = (loss(&w, &xp) - loss(&w, &xm)) / (2.0 * h);
            assert!((num - dx[k]).abs() < 1e-8);
        }
    }
}
