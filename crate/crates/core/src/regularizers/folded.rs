//! Scalar SCAD and MCP penalties and their convexified counterparts.
//!
//! Both penalties split as `g_{lambda,mu}(t) = lambda * g_lambda(t) - (mu/2) t^2`
//! with `g_lambda` convex. On `s = |t| >= 0` the derivative of `g_lambda` is
//! piecewise affine, `a + b s`, which is what the prox case analysis uses.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldedKind {
    Scad,
    Mcp,
}

/// A folded-concave penalty at a fixed `lambda` and shape (`zeta` or `b`).
#[derive(Debug, Clone, Copy)]
pub struct Folded<T> {
    pub kind: FoldedKind,
    pub lambda: T,
    pub shape: T,
}

/// One affine piece of `g_lambda'` on `[lo, hi]`: `a + b s`.
#[derive(Debug, Clone, Copy)]
struct Piece<T> {
    lo: T,
    hi: T,
    a: T,
    b: T,
}

impl<T: Scalar> Folded<T> {
    pub fn scad(lambda: T, zeta: T) -> Self {
        Self { kind: FoldedKind::Scad, lambda, shape: zeta }
    }

    pub fn mcp(lambda: T, b: T) -> Self {
        Self { kind: FoldedKind::Mcp, lambda, shape: b }
    }

    pub fn mu(&self) -> T {
        match self.kind {
            FoldedKind::Scad => T::one() / (self.shape - T::one()),
            FoldedKind::Mcp => T::one() / self.shape,
        }
    }

    /// Original (non-convex) penalty.
    pub fn value(&self, t: T) -> T {
        let s = t.abs();
        let lam = self.lambda;
        let half = T::lit(0.5);
        match self.kind {
            FoldedKind::Scad => {
                let zeta = self.shape;
                if s <= lam {
                    lam * s
                } else if s <= zeta * lam {
                    -(s * s - T::lit(2.0) * zeta * lam * s + lam * lam) / (T::lit(2.0) * (zeta - T::one()))
                } else {
                    (zeta + T::one()) * lam * lam * half
                }
            }
            FoldedKind::Mcp => {
                let b = self.shape;
                if s <= b * lam {
                    lam * s - s * s / (T::lit(2.0) * b)
                } else {
                    b * lam * lam * half
                }
            }
        }
    }

    /// Convexified penalty `g_lambda(t) = (g_{lambda,mu}(t) + (mu/2) t^2) / lambda`.
    pub fn convexified(&self, t: T) -> T {
        (self.value(t) + self.mu() * T::lit(0.5) * t * t) / self.lambda
    }

    fn pieces(&self) -> [Option<Piece<T>>; 3] {
        let lam = self.lambda;
        let mu = self.mu();
        let inf = T::infinity();
        match self.kind {
            FoldedKind::Scad => {
                let zl = self.shape * lam;
                [
                    Some(Piece { lo: T::zero(), hi: lam, a: T::one(), b: mu / lam }),
                    Some(Piece { lo: lam, hi: zl, a: T::one() + mu, b: T::zero() }),
                    Some(Piece { lo: zl, hi: inf, a: T::zero(), b: mu / lam }),
                ]
            }
            FoldedKind::Mcp => {
                let bl = self.shape * lam;
                [
                    Some(Piece { lo: T::zero(), hi: bl, a: T::one(), b: T::zero() }),
                    Some(Piece { lo: bl, hi: inf, a: T::zero(), b: mu / lam }),
                    None,
                ]
            }
        }
    }

    /// Sum of [`Folded::convexified`] over `theta`.
    pub fn convexified_sum(&self, theta: &[T]) -> T {
        let half_mu = self.mu() * T::lit(0.5);
        let inv = T::one() / self.lambda;
        theta.iter().fold(T::zero(), |acc, &t| acc + (self.value(t) + half_mu * t * t) * inv)
    }

    /// `argmin_t 1/2 (t - w)^2 + threshold * g_lambda(t)`.
    ///
    /// `g_lambda'(0+) = 1`, so `|w| <= threshold` gives 0 (ties included).
    pub fn prox(&self, w: T, threshold: T) -> T {
        self.prox_map(threshold).apply(w)
    }

    /// Prox at a fixed threshold with the piece data precomputed, for
    /// applying it to many coordinates.
    pub fn prox_map(&self, threshold: T) -> FoldedProx<T> {
        // h(s) = s + threshold * (a + b s) is continuous and strictly increasing;
        // the prox inverts it on the piece whose image contains |w|.
        let mut steps = [ProxPiece {
            h_hi: T::infinity(),
            shift: T::zero(),
            inv: T::one(),
            lo: T::zero(),
            hi: T::infinity(),
        }; 3];
        let mut len = 0;
        for piece in self.pieces().into_iter().flatten() {
            steps[len] = ProxPiece {
                h_hi: if piece.hi.is_infinite() {
                    T::infinity()
                } else {
                    piece.hi + threshold * (piece.a + piece.b * piece.hi)
                },
                shift: threshold * piece.a,
                inv: T::one() / (T::one() + threshold * piece.b),
                lo: piece.lo,
                hi: piece.hi,
            };
            len += 1;
        }
        FoldedProx { threshold, steps, len }
    }
}

#[derive(Debug, Clone, Copy)]
struct ProxPiece<T> {
    h_hi: T,
    shift: T,
    inv: T,
    lo: T,
    hi: T,
}

/// Scalar prox of a folded penalty at one threshold; see [`Folded::prox_map`].
#[derive(Debug, Clone, Copy)]
pub struct FoldedProx<T> {
    threshold: T,
    steps: [ProxPiece<T>; 3],
    len: usize,
}

impl<T: Scalar> FoldedProx<T> {
    #[inline]
    pub fn apply(&self, w: T) -> T {
        let aw = w.abs();
        if aw <= self.threshold {
            return T::zero();
        }
        for p in &self.steps[..self.len] {
            if aw <= p.h_hi {
                return ((aw - p.shift) * p.inv).max(p.lo).min(p.hi).copysign(w);
            }
        }
        unreachable!("last piece is unbounded")
    }
}
