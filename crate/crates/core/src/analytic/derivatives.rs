//! Derivatives of `L(s) = exp(η(s))` from derivatives of `η`.

/// Raw derivatives `L^{(k)}`, `k = 0..eta.len()`, from `eta[j] = η^{(j)}(s)`:
///
/// `L^{(k)} = Σ_{j=0}^{k−1} C(k−1, j) η^{(j+1)} L^{(k−1−j)}`, `L^{(0)} = e^{η}`.
pub fn exp_derivatives(eta: &[f64]) -> Vec<f64> {
    let Some(&eta0) = eta.first() else {
        return Vec::new();
    };
    let n = eta.len();
    let mut out = Vec::with_capacity(n);
    out.push(eta0.exp());
    // binomial row C(k−1, ·), updated in place
    let mut binom = vec![1.0f64];
    for k in 1..n {
        let mut acc = 0.0;
        for j in 0..k {
            acc += binom[j] * eta[j + 1] * out[k - 1 - j];
        }
        out.push(acc);
        let mut next = vec![1.0; k + 1];
        for j in 1..k {
            next[j] = binom[j - 1] + binom[j];
        }
        binom = next;
    }
    out
}

/// Scaled form of [`exp_derivatives`]: with `g[j] = η^{(j)}(s) h^j / j!`
/// returns `f[k] = L^{(k)}(s) h^k / k!`.
///
/// Uses `k f_k = Σ_{j=1}^{k} j g_j f_{k−j}`. With `h = −s` and `L` completely
/// monotone every term is non-negative, so the sum never cancels.
pub fn exp_taylor(g: &[f64]) -> Vec<f64> {
    let Some(&g0) = g.first() else {
        return Vec::new();
    };
    let n = g.len();
    let mut f = Vec::with_capacity(n);
    f.push(g0.exp());
    for k in 1..n {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * g[j] * f[k - j];
        }
        f.push(acc / k as f64);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn unit_rate_exponential() {
        // η(s) = −s  ⇒  L^{(k)}(s) = (−1)^k e^{−s}
        for &s in &[0.0, 0.3, 1.0, 7.5] {
            let mut eta = vec![0.0; 17];
            eta[0] = -s;
            eta[1] = -1.0;
            let d = exp_derivatives(&eta);
            for (k, v) in d.iter().enumerate() {
                let expected = if k % 2 == 0 { (-s).exp() } else { -(-s).exp() };
                assert!((v - expected).abs() <= 1e-12, "k = {k}: {v} vs {expected}");
            }
        }
    }

    #[test]
    fn m_two_case() {
        let s = 0.8;
        let d = exp_derivatives(&[-s, -1.0, 0.0]);
        assert!((d[1] + (-s).exp()).abs() < 1e-15);
        assert!((d[2] - (-s).exp()).abs() < 1e-15);
    }

    #[test]
    fn scaled_and_raw_forms_agree() {
        // η(s) = −a ln(1 + s) (Gamma-type transform), all derivatives closed form
        let a: f64 = 2.7;
        let s: f64 = 1.3;
        let n = 12;
        let eta: Vec<f64> = (0..n)
            .map(|j| {
                if j == 0 {
                    -a * (1.0 + s).ln()
                } else {
                    // d^j/ds^j[−a ln(1+s)] = −a (−1)^{j−1} (j−1)! (1+s)^{−j}
                    let sign = if (j - 1) % 2 == 0 { 1.0 } else { -1.0 };
                    -a * sign * factorial(j - 1) * (1.0 + s).powi(-(j as i32))
                }
            })
            .collect();
        let raw = exp_derivatives(&eta);
        let h = -s;
        let g: Vec<f64> = eta
            .iter()
            .enumerate()
            .map(|(j, e)| e * h.powi(j as i32) / factorial(j))
            .collect();
        let scaled = exp_taylor(&g);
        for k in 0..n {
            let back = scaled[k] * factorial(k) / h.powi(k as i32);
            assert!(((back - raw[k]) / raw[k]).abs() < 1e-12);
            // L = (1+s)^{−a}: L^{(k)} = (−a)(−a−1)…(−a−k+1) (1+s)^{−a−k}
            let exact: f64 = (0..k).map(|i| -a - i as f64).product::<f64>() * (1.0 + s).powf(-a - k as f64);
            assert!(((raw[k] - exact) / exact).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_input() {
        assert!(exp_derivatives(&[]).is_empty());
        assert!(exp_taylor(&[]).is_empty());
    }
}
