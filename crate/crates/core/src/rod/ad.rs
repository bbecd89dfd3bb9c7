//! Minimal reverse-mode automatic differentiation.
//!
//! Energy code is written once against [`Real`]; instantiated with `f64` it
//! evaluates the energy, instantiated with [`Var`] it records a tape that
//! [`value_and_gradient`] sweeps backwards. The tape is thread-local, so
//! independent solves on different threads never share state.

use std::cell::RefCell;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn val(self) -> f64;
    fn sqrt(self) -> Self;
    /// `max(self, 0)`.
    fn relu(self) -> Self;

    fn sq(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn relu(self) -> Self {
        self.max(0.0)
    }
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    a: u32,
    da: f64,
    b: u32,
    db: f64,
}

#[derive(Default)]
struct Tape {
    nodes: Vec<Node>,
    adjoint: Vec<f64>,
    active: bool,
}

thread_local! {
    static TAPE: RefCell<Tape> = RefCell::new(Tape::default());
}

/// A recorded scalar. Constants carry no tape index.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    idx: u32,
    val: f64,
}

impl Var {
    #[inline]
    fn constant(val: f64) -> Var {
        Var { idx: NONE, val }
    }

    #[inline]
    fn record(val: f64, a: u32, da: f64, b: u32, db: f64) -> Var {
        if a == NONE && b == NONE {
            return Var::constant(val);
        }
        let idx = TAPE.with(|t| {
            let mut t = t.borrow_mut();
            debug_assert!(t.active, "Var used outside value_and_gradient");
            t.nodes.push(Node { a, da, b, db });
            (t.nodes.len() - 1) as u32
        });
        Var { idx, val }
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Var {
        Var::record(val, self.idx, d, NONE, 0.0)
    }
}

impl Add for Var {
    type Output = Var;
    #[inline]
    fn add(self, o: Var) -> Var {
        Var::record(self.val + o.val, self.idx, 1.0, o.idx, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    #[inline]
    fn sub(self, o: Var) -> Var {
        Var::record(self.val - o.val, self.idx, 1.0, o.idx, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    #[inline]
    fn mul(self, o: Var) -> Var {
        Var::record(self.val * o.val, self.idx, o.val, o.idx, self.val)
    }
}

impl Div for Var {
    type Output = Var;
    #[inline]
    fn div(self, o: Var) -> Var {
        let inv = 1.0 / o.val;
        let val = self.val * inv;
        Var::record(val, self.idx, inv, o.idx, -val * inv)
    }
}

impl Neg for Var {
    type Output = Var;
    #[inline]
    fn neg(self) -> Var {
        self.unary(-self.val, -1.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    #[inline]
    fn add(self, c: f64) -> Var {
        self.unary(self.val + c, 1.0)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    #[inline]
    fn sub(self, c: f64) -> Var {
        self.unary(self.val - c, 1.0)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    #[inline]
    fn mul(self, c: f64) -> Var {
        self.unary(self.val * c, c)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    #[inline]
    fn div(self, c: f64) -> Var {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl AddAssign for Var {
    #[inline]
    fn add_assign(&mut self, o: Var) {
        *self = *self + o;
    }
}

impl Real for Var {
    #[inline]
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    #[inline]
    fn val(self) -> f64 {
        self.val
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    #[inline]
    fn relu(self) -> Self {
        if self.val > 0.0 {
            self
        } else {
            Var::constant(0.0)
        }
    }
}

struct ActiveGuard;

impl Drop for ActiveGuard {
    fn drop(&mut self) {
        TAPE.with(|t| t.borrow_mut().active = false);
    }
}

/// Evaluate `f` at `x` and return its value and gradient.
///
/// Panics if called re-entrantly from inside `f` on the same thread.
pub fn value_and_gradient(x: &[f64], f: impl FnOnce(&[Var]) -> Var) -> (f64, Vec<f64>) {
    let inputs: Vec<Var> = TAPE.with(|t| {
        let mut t = t.borrow_mut();
        assert!(!t.active, "nested gradient evaluation");
        t.active = true;
        t.nodes.clear();
        x.iter()
            .map(|&val| {
                t.nodes.push(Node {
                    a: NONE,
                    da: 0.0,
                    b: NONE,
                    db: 0.0,
                });
                Var {
                    idx: (t.nodes.len() - 1) as u32,
                    val,
                }
            })
            .collect()
    });
    let _guard = ActiveGuard;
    let out = f(&inputs);
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let Tape { nodes, adjoint, .. } = &mut *t;
        adjoint.clear();
        adjoint.resize(nodes.len(), 0.0);
        if out.idx != NONE {
            adjoint[out.idx as usize] = 1.0;
            for i in (x.len()..=out.idx as usize).rev() {
                let w = adjoint[i];
                if w == 0.0 {
                    continue;
                }
                let n = nodes[i];
                if n.a != NONE {
                    adjoint[n.a as usize] += w * n.da;
                }
                if n.b != NONE {
                    adjoint[n.b as usize] += w * n.db;
                }
            }
        }
        (out.val, adjoint[..x.len()].to_vec())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Real>(x: &[S]) -> S {
        // x0² x1 + sqrt(x2) / x0 - relu(x1 - 3) * 2
        x[0] * x[0] * x[1] + x[2].sqrt() / x[0] - (x[1] - 3.0).relu() * 2.0
    }

    #[test]
    fn matches_hand_derivative() {
        let x = [1.5, 4.0, 2.0];
        let (v, g) = value_and_gradient(&x, f);
        assert!((v - f(&x)).abs() < 1e-15);
        let expect = [
            2.0 * 1.5 * 4.0 - 2f64.sqrt() / (1.5 * 1.5),
            1.5 * 1.5 - 2.0,
            0.5 / 2f64.sqrt() / 1.5,
        ];
        for k in 0..3 {
            assert!((g[k] - expect[k]).abs() < 1e-12, "{k}: {} vs {}", g[k], expect[k]);
        }
    }

    #[test]
    fn constant_output_has_zero_gradient() {
        let (v, g) = value_and_gradient(&[1.0, 2.0], |_| Var::cst(3.0));
        assert_eq!(v, 3.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn tape_is_reusable() {
        for i in 0..3 {
            let x = [i as f64 + 1.0];
            let (_, g) = value_and_gradient(&x, |v| v[0] * v[0] * 3.0);
            assert_eq!(g[0], 6.0 * x[0]);
        }
    }
}
