//! Residual, extended Rayleigh quotient, optimal fibering scale and the
//! scaled quotient `λ(u, v)` with their gradients.

use crate::error::{Error, Result};
use crate::laplace::laplacian_raw;
use crate::mesh::{Grid, ScalarField};
use crate::real::Real;

/// Exponents `0 < q < 1 < γ` and the constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams<T> {
    q: T,
    gamma: T,
    c: T,
    beta1: T,
    beta2: T,
    dimension_hint: Option<usize>,
}

impl<T: Real> ProblemParams<T> {
    pub fn new(q: T, gamma: T) -> Result<Self> {
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::InvalidParams(format!("hypothesis 0 < q < 1 violated: q = {q}")));
        }
        if !(gamma > T::one()) || !gamma.is_finite() {
            return Err(Error::InvalidParams(format!("hypothesis γ > 1 violated: gamma = {gamma}")));
        }
        let one = T::one();
        let gq = gamma - q;
        let beta1 = (gamma - one) / gq;
        let beta2 = (one - q) / gq;
        // max over t of (tA − t^γ B)/t^q equals c·A^{1/β₁}/B^{β₂/β₁}
        let c = beta1 * beta2.powf((one - q) / (gamma - one));
        Ok(ProblemParams { q, gamma, c, beta1, beta2, dimension_hint: None })
    }

    /// Attaches the spatial dimension. For `N ≥ 3` the subcritical bound
    /// `γ < (N+2)/(N−2)` is enforced; see [`Self::warnings`] for the rest.
    pub fn with_dimension(mut self, n: usize) -> Result<Self> {
        if n >= 3 {
            let nf = T::usize(n);
            let two = T::lit(2.0);
            let crit = (nf + two) / (nf - two);
            if !(self.gamma < crit) {
                return Err(Error::InvalidParams(format!(
                    "hypothesis γ < 2*−1 = {crit} violated for N = {n}: gamma = {}",
                    self.gamma
                )));
            }
        }
        self.dimension_hint = Some(n);
        Ok(self)
    }

    /// Non-fatal hypothesis violations (`q ≤ 2/(N−2)` for `N ≥ 3`).
    pub fn warnings(&self) -> Vec<String> {
        match self.dimension_hint {
            Some(n) if n >= 3 => {
                let bound = T::lit(2.0) / T::usize(n - 2);
                if self.q > bound {
                    vec![format!("q = {} exceeds 2/(N−2) = {bound} for N = {n}", self.q)]
                } else {
                    vec![]
                }
            }
            _ => vec![],
        }
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn beta1(&self) -> T {
        self.beta1
    }

    pub fn beta2(&self) -> T {
        self.beta2
    }

    pub fn dimension_hint(&self) -> Option<usize> {
        self.dimension_hint
    }
}

/// The pairings `⟨−Δu,v⟩`, `⟨u^q,v⟩`, `⟨u^γ,v⟩`, `⟨u,v⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pairings<T> {
    pub laplace_v: T,
    pub uq_v: T,
    pub ugamma_v: T,
    pub u_v: T,
}

impl<T: Real> Pairings<T> {
    pub fn rayleigh(&self) -> T {
        (self.laplace_v - self.ugamma_v) / self.uq_v
    }

    pub fn rayleigh_scaled(&self, t: T, p: &ProblemParams<T>) -> T {
        (t * self.laplace_v - t.powf(p.gamma) * self.ugamma_v) / (t.powf(p.q) * self.uq_v)
    }

    pub fn t_opt(&self, p: &ProblemParams<T>) -> Result<T> {
        if !(self.laplace_v > T::zero()) {
            return Err(Error::OutsideCone(self.laplace_v.f64()));
        }
        let one = T::one();
        Ok(((one - p.q) * self.laplace_v / ((p.gamma - p.q) * self.ugamma_v)).powf(one / (p.gamma - one)))
    }

    pub fn lambda(&self, p: &ProblemParams<T>) -> Result<T> {
        if !(self.laplace_v > T::zero()) {
            return Err(Error::OutsideCone(self.laplace_v.f64()));
        }
        let one = T::one();
        let a = (p.gamma - p.q) / (p.gamma - one);
        let b = (one - p.q) / (p.gamma - one);
        Ok(p.c * self.laplace_v.powf(a) / (self.uq_v * self.ugamma_v.powf(b)))
    }

    pub fn lambda_tilde(&self, p: &ProblemParams<T>) -> Result<T> {
        if !(self.laplace_v > T::zero()) {
            return Err(Error::OutsideCone(self.laplace_v.f64()));
        }
        Ok(self.laplace_v / (self.uq_v.powf(p.beta1) * self.ugamma_v.powf(p.beta2)))
    }
}

/// Result of [`Problem::lambda_scaled`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientEval<T> {
    pub value: T,
    pub t_opt: T,
    pub pairings: Pairings<T>,
    /// `R(t_opt·u, v)`, an independent evaluation of `value`.
    pub value_via_scaling: T,
}

/// The problem `−Δu = λu^q + u^γ` on a fixed grid.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'g, T> {
    grid: &'g Grid<T>,
    params: ProblemParams<T>,
}

impl<'g, T: Real> Problem<'g, T> {
    pub fn new(grid: &'g Grid<T>, params: ProblemParams<T>) -> Self {
        Problem { grid, params }
    }

    pub fn grid(&self) -> &'g Grid<T> {
        self.grid
    }

    pub fn params(&self) -> &ProblemParams<T> {
        &self.params
    }

    fn positive(&self, u: &ScalarField<T>) -> Result<()> {
        self.grid.check(u)?;
        match u.first_nonpositive() {
            Some((index, value)) => Err(Error::NonPositive { index, value: value.f64() }),
            None => Ok(()),
        }
    }

    /// `F(u, λ) = −Δ_h u − λu^q − u^γ`.
    pub fn residual(&self, u: &ScalarField<T>, lambda: T) -> Result<ScalarField<T>> {
        self.positive(u)?;
        Ok(self.grid.wrap(self.residual_raw(u.values(), lambda)))
    }

    pub(crate) fn residual_raw(&self, u: &[T], lambda: T) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        laplacian_raw(self.grid, u, &mut out);
        let (q, g) = (self.params.q, self.params.gamma);
        for (o, &x) in out.iter_mut().zip(u) {
            *o -= lambda * x.powf(q) + x.powf(g);
        }
        out
    }

    pub fn pairings(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<Pairings<T>> {
        self.positive(u)?;
        self.positive(v)?;
        Ok(self.pairings_raw(u.values(), v.values()))
    }

    pub(crate) fn pairings_raw(&self, u: &[T], v: &[T]) -> Pairings<T> {
        let mut lu = vec![T::zero(); u.len()];
        laplacian_raw(self.grid, u, &mut lu);
        let (q, g) = (self.params.q, self.params.gamma);
        let (mut a, mut c, mut b, mut d) = (T::zero(), T::zero(), T::zero(), T::zero());
        for ((&x, &y), &l) in u.iter().zip(v).zip(&lu) {
            a += l * y;
            c += x.powf(q) * y;
            b += x.powf(g) * y;
            d += x * y;
        }
        let w = self.grid.weight();
        Pairings { laplace_v: a * w, uq_v: c * w, ugamma_v: b * w, u_v: d * w }
    }

    /// `R(u,v) = (⟨−Δu,v⟩ − ⟨u^γ,v⟩)/⟨u^q,v⟩`.
    pub fn rayleigh(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<T> {
        let p = self.pairings(u, v)?;
        if p.uq_v == T::zero() {
            return Err(Error::InvalidParams("⟨u^q, v⟩ vanishes".into()));
        }
        Ok(p.rayleigh())
    }

    pub fn t_opt(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<T> {
        self.pairings(u, v)?.t_opt(&self.params)
    }

    pub fn lambda_scaled(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<QuotientEval<T>> {
        let p = self.pairings(u, v)?;
        let t = p.t_opt(&self.params)?;
        Ok(QuotientEval {
            value: p.lambda(&self.params)?,
            t_opt: t,
            pairings: p,
            value_via_scaling: p.rayleigh_scaled(t, &self.params),
        })
    }

    pub fn lambda_tilde(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<T> {
        self.pairings(u, v)?.lambda_tilde(&self.params)
    }

    pub fn grad_rayleigh_u(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.positive(u)?;
        self.positive(v)?;
        let p = self.pairings_raw(u.values(), v.values());
        Ok(self.grid.wrap(self.grad_u_raw(u.values(), v.values(), T::one(), &p)))
    }

    pub fn grad_rayleigh_v(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<ScalarField<T>> {
        self.positive(u)?;
        self.positive(v)?;
        let p = self.pairings_raw(u.values(), v.values());
        Ok(self.grid.wrap(self.grad_v_raw(u.values(), T::one(), &p)))
    }

    pub fn grad_lambda_u(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<ScalarField<T>> {
        let p = self.pairings(u, v)?;
        let t = p.t_opt(&self.params)?;
        let g = self.grad_u_raw(u.values(), v.values(), t, &p);
        Ok(self.grid.wrap(g))
    }

    pub fn grad_lambda_v(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<ScalarField<T>> {
        let p = self.pairings(u, v)?;
        let t = p.t_opt(&self.params)?;
        Ok(self.grid.wrap(self.grad_v_raw(u.values(), t, &p)))
    }

    /// `t·∇_u R(tu, v)` from the pairings of `(u, v)`.
    pub(crate) fn grad_u_raw(&self, u: &[T], v: &[T], t: T, p: &Pairings<T>) -> Vec<T> {
        let (q, g) = (self.params.q, self.params.gamma);
        let one = T::one();
        let tq = t.powf(q);
        let tg = t.powf(g);
        let a = t * p.laplace_v;
        let b = tg * p.ugamma_v;
        let c = tq * p.uq_v;
        let r = (a - b) / c;
        let mut lv = vec![T::zero(); v.len()];
        laplacian_raw(self.grid, v, &mut lv);
        lv.iter()
            .zip(u)
            .zip(v)
            .map(|((&l, &x), &y)| {
                let tx = t * x;
                t * (l - g * tx.powf(g - one) * y - r * q * tx.powf(q - one) * y) / c
            })
            .collect()
    }

    /// `∇_v R(tu, v) = F(tu, R(tu,v))/⟨(tu)^q, v⟩`.
    pub(crate) fn grad_v_raw(&self, u: &[T], t: T, p: &Pairings<T>) -> Vec<T> {
        let (q, g) = (self.params.q, self.params.gamma);
        let c = t.powf(q) * p.uq_v;
        let r = p.rayleigh_scaled(t, &self.params);
        let mut lu = vec![T::zero(); u.len()];
        laplacian_raw(self.grid, u, &mut lu);
        lu.iter()
            .zip(u)
            .map(|(&l, &x)| {
                let tx = t * x;
                (t * l - r * tx.powf(q) - tx.powf(g)) / c
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pairs(a: f64, b: f64, c: f64) -> Pairings<f64> {
        Pairings { laplace_v: a, ugamma_v: b, uq_v: c, u_v: 1.0 }
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(1.5, 3.0).is_err());
        assert!(ProblemParams::new(0.0, 3.0).is_err());
        assert!(ProblemParams::new(0.5, 1.0).is_err());
        let p = ProblemParams::new(0.5, 3.0).unwrap();
        assert_relative_eq!(p.beta1() + p.beta2(), 1.0, max_relative = 1e-15);
        assert!(p.with_dimension(3).is_ok());
        assert!(p.with_dimension(4).is_err());
        let p = ProblemParams::new(0.9, 1.5).unwrap().with_dimension(5).unwrap();
        assert_eq!(p.warnings().len(), 1);
        assert!(ProblemParams::new(0.5, 3.0).unwrap().with_dimension(2).unwrap().warnings().is_empty());
    }

    #[test]
    fn constant_is_exact_maximum() {
        // independent check: brute-force maximum of (t − t³)/√t for A = B = C = 1
        let p = ProblemParams::new(0.5, 3.0).unwrap();
        let best = (1..200_000)
            .map(|k| k as f64 * 1e-5)
            .map(|t| (t - t.powi(3)) / t.sqrt())
            .fold(f64::MIN, f64::max);
        assert_relative_eq!(p.c(), best, max_relative = 1e-9);
        assert_relative_eq!(p.c(), 0.8 * 0.2f64.powf(0.25), max_relative = 1e-15);
    }

    #[test]
    fn pairing_arithmetic() {
        let p = ProblemParams::new(0.5, 3.0).unwrap();
        assert_relative_eq!(pairs(5.0, 1.0, 2.0).rayleigh(), 2.0);
        assert_relative_eq!(pairs(5.0, 1.0, 2.0).t_opt(&p).unwrap(), 1.0);
        assert_relative_eq!(pairs(1.0, 1.0, 1.0).lambda_tilde(&p).unwrap(), 1.0);
        assert!(matches!(pairs(-1.0, 1.0, 1.0).t_opt(&p), Err(Error::OutsideCone(_))));
        let pr = pairs(3.7, 0.4, 1.3);
        let t = pr.t_opt(&p).unwrap();
        assert_relative_eq!(pr.lambda(&p).unwrap(), pr.rayleigh_scaled(t, &p), max_relative = 1e-14);
    }

    #[test]
    fn residual_at_interior_constant() {
        let g = Grid::<f64>::interval(1.0, 101).unwrap();
        let pb = Problem::new(&g, ProblemParams::new(0.5, 3.0).unwrap());
        let r = pb.residual(&g.constant(1.0), 2.0).unwrap();
        assert_relative_eq!(r.values()[50], -3.0, max_relative = 1e-12);
        let mut z = vec![1.0; 101];
        z[3] = -1.0;
        assert!(pb.residual(&g.field(z).unwrap(), 1.0).is_err());
    }

    #[test]
    fn rayleigh_invariant_under_v_scaling() {
        let g = Grid::<f64>::interval(1.0, 50).unwrap();
        let pb = Problem::new(&g, ProblemParams::new(0.5, 3.0).unwrap());
        let u = g.sample(|x, _| x * (1.0 - x) * 3.0);
        let v = g.sample(|x, _| (3.0 * x).sin() + 0.2);
        let r1 = pb.rayleigh(&u, &v).unwrap();
        let r2 = pb.rayleigh(&u, &v.scale(2.0)).unwrap();
        assert_relative_eq!(r1, r2, max_relative = 1e-14);
    }

    #[test]
    fn grad_v_structure() {
        let g = Grid::<f64>::interval(1.0, 40).unwrap();
        let pb = Problem::new(&g, ProblemParams::new(0.5, 3.0).unwrap());
        let u = g.sample(|x, _| x * (1.0 - x));
        let v1 = g.sample(|x, _| 1.0 + x);
        let v2 = g.sample(|x, _| 2.0 - x * x);
        let c1 = pb.pairings(&u, &v1).unwrap().uq_v;
        let c2 = pb.pairings(&u, &v2).unwrap().uq_v;
        // same λ = R(u,v) is needed for the identity; use v₂ = s·v₁
        let v2s = v1.scale(3.0);
        let c2s = pb.pairings(&u, &v2s).unwrap().uq_v;
        let g1 = pb.grad_rayleigh_v(&u, &v1).unwrap();
        let g2 = pb.grad_rayleigh_v(&u, &v2s).unwrap();
        for (a, b) in g1.values().iter().zip(g2.values()) {
            assert_relative_eq!(a * c1, b * c2s, max_relative = 1e-12, epsilon = 1e-12);
        }
        assert!(c2 > 0.0);
    }

    #[test]
    fn grad_u_symmetric_for_constant() {
        let g = Grid::<f64>::interval(1.0, 41).unwrap();
        let pb = Problem::new(&g, ProblemParams::new(0.5, 3.0).unwrap());
        let u = g.constant(1.0);
        let gr = pb.grad_rayleigh_u(&u, &u).unwrap();
        let vals = gr.values();
        for k in 1..40 {
            assert_relative_eq!(vals[k], vals[40 - k], max_relative = 1e-13);
        }
        for k in 2..39 {
            assert_relative_eq!(vals[k], vals[20], max_relative = 1e-12);
        }
    }
}
