//! Real spherical harmonics on the parameter sphere.
//!
//! Functions are grouped in azimuthal families indexed by a signed order `m`:
//! `m >= 0` holds `P_n^m(cos theta) cos(m phi)` and `m < 0` holds
//! `P_n^|m|(cos theta) sin(|m| phi)`, each for degrees `n = |m|, ..., l_max`. Families
//! are stored contiguously in the order `m = -l_max, ..., l_max`. All functions are
//! orthonormal in `L2` of the unit sphere.

use std::f64::consts::PI;
use std::ops::Range;

#[derive(Clone, Debug)]
pub struct Harmonics {
    l_max: usize,
    offsets: Vec<usize>,
    /// Recurrence coefficients `a_nm`, `b_nm` indexed `[m][n - m]`.
    rec: Vec<Vec<(f64, f64)>>,
}

impl Harmonics {
    pub fn new(l_max: usize) -> Self {
        let mut offsets = Vec::with_capacity(2 * l_max + 2);
        let mut at = 0;
        for m in -(l_max as i64)..=(l_max as i64) {
            offsets.push(at);
            at += l_max + 1 - m.unsigned_abs() as usize;
        }
        offsets.push(at);
        let rec = (0..=l_max)
            .map(|m| {
                let mf = m as f64;
                (m..=l_max)
                    .map(|n| {
                        if n < m + 2 {
                            return (0.0, 0.0);
                        }
                        let nf = n as f64;
                        let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
                        let n1 = nf - 1.0;
                        let b = ((n1 * n1 - mf * mf) / (4.0 * n1 * n1 - 1.0)).sqrt();
                        (a, b)
                    })
                    .collect()
            })
            .collect();
        Harmonics { l_max, offsets, rec }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Number of functions, `(l_max + 1)^2`.
    pub fn len(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index range of family `m`.
    pub fn family(&self, m: i64) -> Range<usize> {
        let f = (m + self.l_max as i64) as usize;
        self.offsets[f]..self.offsets[f + 1]
    }

    /// `(degree, signed order)` of function `idx`.
    pub fn degree_order(&self, idx: usize) -> (usize, i64) {
        let f = self.offsets.partition_point(|&o| o <= idx) - 1;
        let m = f as i64 - self.l_max as i64;
        (m.unsigned_abs() as usize + idx - self.offsets[f], m)
    }

    /// Normalized associated Legendre functions `P_n^m(t)` for `n = m..=l_max`, with
    /// `int_{-1}^{1} P^2 dt = 1`.
    pub fn legendre(&self, m: usize, t: f64, out: &mut [f64]) {
        let s = (1.0 - t * t).max(0.0).sqrt();
        let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..=m {
            let kf = k as f64;
            pmm *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
        }
        out[0] = pmm;
        if m < self.l_max {
            out[1] = (2.0 * m as f64 + 3.0).sqrt() * t * pmm;
        }
        let rec = &self.rec[m];
        for j in 2..=(self.l_max - m) {
            let (a, b) = rec[j];
            out[j] = a * (t * out[j - 1] - b * out[j - 2]);
        }
    }

    /// Evaluates every function at `(cos theta, phi) = (t, phi)`.
    pub fn eval(&self, t: f64, phi: f64, out: &mut [f64]) {
        let mut p = vec![0.0; self.l_max + 1];
        for m in 0..=self.l_max {
            let len = self.l_max + 1 - m;
            self.legendre(m, t, &mut p[..len]);
            if m == 0 {
                let c = 1.0 / (2.0 * PI).sqrt();
                for (o, v) in out[self.family(0)].iter_mut().zip(&p[..len]) {
                    *o = c * v;
                }
            } else {
                let (s, c) = (m as f64 * phi).sin_cos();
                let norm = 1.0 / PI.sqrt();
                let cos_range = self.family(m as i64);
                let sin_range = self.family(-(m as i64));
                for (j, v) in p[..len].iter().enumerate() {
                    out[cos_range.start + j] = norm * c * v;
                    out[sin_range.start + j] = norm * s * v;
                }
            }
        }
    }

    /// Evaluates family `m` only.
    pub fn eval_family(&self, m: i64, t: f64, phi: f64, out: &mut [f64]) {
        let ma = m.unsigned_abs() as usize;
        let len = self.l_max + 1 - ma;
        self.legendre(ma, t, &mut out[..len]);
        let f = if m == 0 {
            1.0 / (2.0 * PI).sqrt()
        } else if m > 0 {
            (ma as f64 * phi).cos() / PI.sqrt()
        } else {
            (ma as f64 * phi).sin() / PI.sqrt()
        };
        out[..len].iter_mut().for_each(|v| *v *= f);
    }

    /// Rotates a coefficient row in place so that values computed at azimuth-shifted
    /// points `phi - shift` become values at `phi`: row entries `r_b = sum_a c_a Y_b(p_a)`
    /// are mapped to `sum_a c_a Y_b(R_z(shift) p_a)`.
    pub fn rotate_azimuth(&self, shift: f64, row: &mut [f64]) {
        for m in 1..=self.l_max as i64 {
            let (s, c) = (m as f64 * shift).sin_cos();
            let cr = self.family(m);
            let sr = self.family(-m);
            for (i, j) in cr.zip(sr) {
                let (a, b) = (row[i], row[j]);
                row[i] = c * a - s * b;
                row[j] = s * a + c * b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::quadrature::gauss_legendre;

    #[test]
    fn layout_covers_all_functions() {
        let h = Harmonics::new(5);
        assert_eq!(h.len(), 36);
        assert_eq!(h.family(-5), 0..1);
        assert_eq!(h.family(5), 35..36);
        for idx in 0..h.len() {
            let (n, m) = h.degree_order(idx);
            assert!(h.family(m).contains(&idx));
            assert!(n >= m.unsigned_abs() as usize && n <= 5);
        }
    }

    #[test]
    fn discrete_orthonormality() {
        let l = 7;
        let h = Harmonics::new(l);
        let (t, w) = gauss_legendre(l + 1);
        let n2 = 2 * l + 2;
        let mut gram = vec![0.0; h.len() * h.len()];
        let mut y = vec![0.0; h.len()];
        for (tk, wk) in t.iter().zip(&w) {
            for j in 0..n2 {
                let ph = 2.0 * PI * j as f64 / n2 as f64;
                h.eval(*tk, ph, &mut y);
                let wt = wk * 2.0 * PI / n2 as f64;
                for a in 0..h.len() {
                    for b in 0..h.len() {
                        gram[a * h.len() + b] += wt * y[a] * y[b];
                    }
                }
            }
        }
        for a in 0..h.len() {
            for b in 0..h.len() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * h.len() + b] - expect).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn low_degree_closed_forms() {
        let h = Harmonics::new(2);
        let mut y = vec![0.0; h.len()];
        let (t, ph) = (0.3f64, 1.1f64);
        h.eval(t, ph, &mut y);
        let s = (1.0 - t * t).sqrt();
        let c10 = (3.0 / (4.0 * PI)).sqrt();
        assert!((y[h.family(0).start + 1] - c10 * t).abs() < 1e-14);
        assert!((y[h.family(1).start] - c10 * s * ph.cos()).abs() < 1e-14);
        assert!((y[h.family(-1).start] - c10 * s * ph.sin()).abs() < 1e-14);
        let c22 = (15.0 / (16.0 * PI)).sqrt();
        assert!((y[h.family(2).start] - c22 * s * s * (2.0 * ph).cos()).abs() < 1e-14);
        let mut fam = vec![0.0; 2];
        h.eval_family(-1, t, ph, &mut fam);
        for (a, b) in fam.iter().zip(&y[h.family(-1)]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn azimuthal_rotation_matches_direct_evaluation() {
        let h = Harmonics::new(6);
        let mut a = vec![0.0; h.len()];
        let mut b = vec![0.0; h.len()];
        let (t, ph, shift) = (-0.4, 0.7, 2.3);
        h.eval(t, ph, &mut a);
        h.rotate_azimuth(shift, &mut a);
        h.eval(t, ph + shift, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
