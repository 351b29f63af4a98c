//! Small numerical helpers shared across modules.

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Ordinary or weighted least-squares line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Root mean square of the (weighted) residuals.
    pub residual_rms: f64,
}

/// Least-squares line. With `weights = None` the standard errors come from the
/// residual variance; with weights (inverse variances) they are the formal
/// errors `sqrt((X^T W X)^-1)`.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        sw += w(i);
        sx += w(i) * x[i];
        sy += w(i) * y[i];
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * (y[i] - my);
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut rss = 0.0;
    for i in 0..n {
        let r = y[i] - intercept - slope * x[i];
        rss += w(i) * r * r;
    }
    let (slope_var, icpt_var) = if weights.is_some() {
        (1.0 / sxx, 1.0 / sw + mx * mx / sxx)
    } else {
        let s2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
        (s2 / sxx, s2 * (1.0 / sw + mx * mx / sxx))
    };
    Some(LineFit {
        slope,
        intercept,
        slope_se: slope_var.sqrt(),
        intercept_se: icpt_var.sqrt(),
        residual_rms: (rss / sw).sqrt(),
    })
}

/// Solves the weighted normal equations for a general linear model.
/// Returns coefficients and their covariance matrix (row-major), or `None`
/// when the design is singular.
pub fn weighted_least_squares(
    design: &[Vec<f64>],
    y: &[f64],
    weights: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let p = design.first()?.len();
    let mut a = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    for ((row, &yi), &wi) in design.iter().zip(y).zip(weights) {
        for i in 0..p {
            b[i] += wi * row[i] * yi;
            for j in 0..p {
                a[i * p + j] += wi * row[i] * row[j];
            }
        }
    }
    let inv = invert(&a, p)?;
    let coef = (0..p)
        .map(|i| (0..p).map(|j| inv[i * p + j] * b[j]).sum())
        .collect();
    Some((coef, inv))
}

/// Gauss-Jordan inverse with partial pivoting and a relative singularity test.
fn invert(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; p * p];
    for i in 0..p {
        inv[i * p + i] = 1.0;
    }
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| {
            m[i * p + col].abs().total_cmp(&m[j * p + col].abs())
        })?;
        if m[piv * p + col].abs() <= 1e-13 * scale {
            return None;
        }
        for j in 0..p {
            m.swap(col * p + j, piv * p + j);
            inv.swap(col * p + j, piv * p + j);
        }
        let d = m[col * p + col];
        for j in 0..p {
            m[col * p + j] /= d;
            inv[col * p + j] /= d;
        }
        for i in 0..p {
            if i != col {
                let f = m[i * p + col];
                if f != 0.0 {
                    for j in 0..p {
                        m[i * p + j] -= f * m[col * p + j];
                        inv[i * p + j] -= f * inv[col * p + j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Binomial coefficient as f64 (exact for the sizes used here).
pub fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k.min(n));
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Γ(x) for x > 0 via the Lanczos approximation (g = 7, n = 9).
pub fn gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Surface area of the unit sphere S^{d-1} in R^d.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Hurwitz zeta `ζ(s, a) = Σ_{n>=0} (n + a)^{-s}` for `s > 1`, `a > 0`
/// (Euler-Maclaurin after ten explicit terms).
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0);
    const B2: [f64; 6] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
    ];
    let n = 10;
    let mut sum = 0.0;
    for i in 0..n {
        sum += (a + i as f64).powf(-s);
    }
    let x = a + n as f64;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // Σ_j B_{2j}/(2j)! s(s+1)...(s+2j-2) x^{-s-2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut xp = x.powf(-s - 1.0);
    for (j, b) in B2.iter().enumerate() {
        sum += b / fact * rising * xp;
        let k = 2 * j as u32 + 2;
        rising *= (s + k as f64 - 1.0) * (s + k as f64);
        fact *= (k + 1) as f64 * (k + 2) as f64;
        xp /= x * x;
    }
    sum
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(1e-16, 10_000));
        assert!((kahan_sum(v.iter().copied()) - (1.0 + 1e-12)).abs() < 1e-18);
    }

    #[test]
    fn line_fit_exact() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = fit_line(&x, &y, None).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-13);
    }

    #[test]
    fn wls_recovers_plane() {
        let rows: Vec<Vec<f64>> = (1..20).map(|n| vec![n as f64, (n as f64).ln(), 1.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.2 * r[0] - 0.7 * r[1] + 1.5).collect();
        let (c, _) = weighted_least_squares(&rows, &y, &vec![1.0; rows.len()]).unwrap();
        assert!((c[0] - 0.2).abs() < 1e-12 && (c[1] + 0.7).abs() < 1e-11 && (c[2] - 1.5).abs() < 1e-11);
    }

    #[test]
    fn wls_singular() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(weighted_least_squares(&rows, &[1.0, 2.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn gamma_and_sphere() {
        assert!((gamma(5.0) - 24.0).abs() < 1e-10);
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-10);
    }

    #[test]
    fn hurwitz_matches_riemann() {
        let z2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((hurwitz_zeta(2.0, 1.0) - z2).abs() < 1e-13);
        assert!((hurwitz_zeta(2.0, 3.0) - (z2 - 1.0 - 0.25)).abs() < 1e-13);
        let direct: f64 = (0..200_000).map(|n| (n as f64 + 2.5).powf(-3.7)).sum();
        assert!((hurwitz_zeta(3.7, 2.5) - direct).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "{n}");
        }
    }
}
