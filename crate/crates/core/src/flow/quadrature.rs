//! Gauss-Legendre nodes and collocation coefficients on `[0, 1]`.

/// `s`-stage Gauss-Legendre collocation tableau on `[0,1]`.
#[derive(Debug, Clone)]
pub struct GaussTableau {
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    /// `a[i][j] = int_0^{c_i} l_j(tau) dtau` for the Lagrange basis `l_j` on `c`.
    pub a: Vec<Vec<f64>>,
}

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(s: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; s];
    let mut w = vec![0.0; s];
    for i in 0..s {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (s as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=s {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = s as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    let mut idx: Vec<usize> = (0..s).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| w[i]).collect())
}

impl GaussTableau {
    pub fn new(s: usize) -> Self {
        assert!(s >= 1, "collocation needs at least one stage");
        let (x, w) = gauss_legendre(s);
        let c: Vec<f64> = x.iter().map(|&z| 0.5 * (z + 1.0)).collect();
        let b: Vec<f64> = w.iter().map(|&v| 0.5 * v).collect();
        let lagrange = |j: usize, tau: f64| {
            (0..s).filter(|&m| m != j).fold(1.0, |acc, m| acc * (tau - c[m]) / (c[j] - c[m]))
        };
        // s-point Gauss on [0, c_i] integrates the degree s-1 basis exactly
        let a = c
            .iter()
            .map(|&ci| (0..s).map(|j| c.iter().zip(&b).map(|(&ck, &bk)| ci * bk * lagrange(j, ci * ck)).sum()).collect())
            .collect();
        GaussTableau { c, b, a }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        for s in 1..=6 {
            let (x, w) = gauss_legendre(s);
            for deg in 0..2 * s {
                let got: f64 = x.iter().zip(&w).map(|(&z, &v)| v * z.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert_relative_eq!(got, exact, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn tableau_rows_integrate_monomials() {
        let t = GaussTableau::new(5);
        for (i, ci) in t.c.iter().enumerate() {
            for deg in 0..5 {
                let got: f64 = (0..5).map(|j| t.a[i][j] * t.c[j].powi(deg)).sum();
                assert_relative_eq!(got, ci.powi(deg + 1) / (deg as f64 + 1.0), epsilon = 1e-14);
            }
        }
    }
}
