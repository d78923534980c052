use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::{Direction, Point, State};

/// Orientation-preserving isometry `z ↦ (az + b) / (cz + d)` with real
/// coefficients and `ad − bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl MobiusMap {
    /// Any real matrix with positive determinant; it is rescaled to determinant 1.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.is_finite() && det > 0.0) || ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Möbius matrix [[{a}, {b}], [{c}, {d}]] must be finite with positive determinant"
            )));
        }
        Ok(Self::scaled(a, b, c, d, det))
    }

    #[inline]
    fn scaled(a: f64, b: f64, c: f64, d: f64, det: f64) -> Self {
        let k = det.sqrt().recip();
        MobiusMap { a: a * k, b: b * k, c: c * k, d: d * k }
    }

    pub fn identity() -> Self {
        MobiusMap { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// `z ↦ z + shift`.
    pub fn translation(shift: f64) -> Self {
        MobiusMap { a: 1.0, b: shift, c: 0.0, d: 1.0 }
    }

    /// `z ↦ k z` for `k > 0`.
    pub fn dilation(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidArgument(format!("dilation factor must be > 0, got {k}")));
        }
        let s = k.sqrt();
        Ok(MobiusMap { a: s, b: 0.0, c: 0.0, d: 1.0 / s })
    }

    /// Elliptic map fixing `i` that turns tangent vectors at `i` by `theta`
    /// counterclockwise.
    pub fn rotation_about_i(theta: f64) -> Self {
        let (s, c) = (0.5 * theta).sin_cos();
        MobiusMap { a: c, b: s, c: -s, d: c }
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn apply(&self, p: Point) -> Point {
        let (x, y) = (p.x(), p.y());
        let re_den = self.c * x + self.d;
        let im_den = self.c * y;
        let den2 = re_den * re_den + im_den * im_den;
        let re = ((self.a * x + self.b) * re_den + self.a * self.c * y * y) / den2;
        // Im((az+b)/(cz+d)) = (ad − bc) y / |cz + d|²
        Point::raw(re, y / den2)
    }

    /// Maps the point and turns the direction by `arg(1/(cz+d)²)`, the
    /// argument of the complex derivative at the point.
    pub fn transport(&self, s: &State) -> State {
        let (x, y) = (s.point.x(), s.point.y());
        let turn = -2.0 * (self.c * y).atan2(self.c * x + self.d);
        State {
            point: self.apply(s.point),
            dir: Direction::new(s.dir.alpha() + turn),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        let a = self.a * other.a + self.b * other.c;
        let b = self.a * other.b + self.b * other.d;
        let c = self.c * other.a + self.d * other.c;
        let d = self.c * other.b + self.d * other.d;
        Self::scaled(a, b, c, d, a * d - b * c)
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }
}

/// Isometry sending `s.point` to `i` and the geodesic through `s` onto the
/// upward imaginary axis, so that `geodesic_flow(s, u)` maps to `(0, e^u)`.
///
/// Built as (rotation about `i`) ∘ (dilation by `1/y0`) ∘ (translation by
/// `−x0`); translation and dilation leave directions unchanged, so the
/// rotation angle is `π/2 − α`.
pub fn normalizing_map(s: &State) -> MobiusMap {
    let (x0, y0) = (s.point.x(), s.point.y());
    let theta = 0.5 * PI - s.dir.alpha();
    let (sn, cs) = (0.5 * theta).sin_cos();
    let r = 1.0 / y0.sqrt();
    // [[cs, sn], [-sn, cs]] · [[√(1/y0), 0], [0, √y0]] · [[1, −x0], [0, 1]]
    MobiusMap {
        a: cs * r,
        b: -cs * r * x0 + sn / r,
        c: -sn * r,
        d: sn * r * x0 + cs / r,
    }
}

/// Cayley transform `w = (iz + 1)/(z + i)` onto the unit disk, as `(Re w, Im w)`.
pub fn cayley(p: Point) -> (f64, f64) {
    let (x, y) = (p.x(), p.y());
    let den = x * x + (y + 1.0) * (y + 1.0);
    (2.0 * x / den, (x * x + y * y - 1.0) / den)
}

/// Direction angle after pushing `s` forward by the Cayley transform
/// (derivative `−2/(z+i)²`).
pub fn cayley_angle(s: &State) -> f64 {
    let turn = PI - 2.0 * (s.point.y() + 1.0).atan2(s.point.x());
    Direction::new(s.dir.alpha() + turn).alpha()
}

#[cfg(test)]
mod tests {
    use super::super::{flow_state, geodesic_flow, hyp_distance};
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, TAU};

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y).unwrap()
    }

    fn arb_map() -> impl Strategy<Value = MobiusMap> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
            .prop_filter("det > 0.05", |(a, b, c, d)| a * d - b * c > 0.05)
            .prop_map(|(a, b, c, d)| MobiusMap::new(a, b, c, d).unwrap())
    }

    fn arb_point() -> impl Strategy<Value = Point> {
        (-5.0..5.0f64, -2.0..2.0f64).prop_map(|(x, ly)| pt(x, ly.exp()))
    }

    fn wrapped_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    #[test]
    fn construction_normalises_determinant() {
        let m = MobiusMap::new(2.0, 1.0, 1.0, 3.0).unwrap();
        let [a, b, c, d] = m.coefficients();
        assert!((a * d - b * c - 1.0).abs() < 1e-12);
        assert!(MobiusMap::new(1.0, 2.0, 2.0, 1.0).is_err());
        assert!(MobiusMap::new(f64::NAN, 0.0, 0.0, 1.0).is_err());
        assert!(MobiusMap::dilation(-1.0).is_err());
    }

    #[test]
    fn elementary_maps() {
        let p = pt(0.3, 2.0);
        assert_eq!(MobiusMap::identity().apply(p), p);
        let q = MobiusMap::translation(1.5).apply(p);
        assert!((q.x() - 1.8).abs() < 1e-15 && (q.y() - 2.0).abs() < 1e-15);
        let q = MobiusMap::dilation(3.0).unwrap().apply(p);
        assert!((q.x() - 0.9).abs() < 1e-14 && (q.y() - 6.0).abs() < 1e-14);
        let r = MobiusMap::rotation_about_i(1.0);
        let fixed = r.apply(Point::i());
        assert!(fixed.x().abs() < 1e-15 && (fixed.y() - 1.0).abs() < 1e-15);
        let turned = r.transport(&State::new(Point::i(), Direction::new(0.2)));
        assert!((turned.dir.alpha() - 1.2).abs() < 1e-14);
    }

    #[test]
    fn normalizing_map_examples() {
        let m = normalizing_map(&State::new(Point::i(), Direction::up()));
        let [a, b, c, d] = m.coefficients();
        assert!((a - 1.0).abs() < 1e-15 && b.abs() < 1e-15 && c.abs() < 1e-15 && (d - 1.0).abs() < 1e-15);

        let s = State::new(pt(2.0, 3.0), Direction::new(0.0));
        let m = normalizing_map(&s);
        let q = m.apply(s.point);
        assert!(q.x().abs() < 1e-14 && (q.y() - 1.0).abs() < 1e-14);
        let q = m.apply(geodesic_flow(&s, 1.0));
        assert!(q.x().abs() < 1e-12 && (q.y() - E).abs() < 1e-12);
        let t = m.transport(&s);
        assert!((t.dir.alpha() - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn cayley_examples() {
        assert_eq!(cayley(Point::i()), (0.0, 0.0));
        let (u, v) = cayley(pt(0.0, 3.0));
        assert!(u.abs() < 1e-16 && (v - 0.5).abs() < 1e-16);
        let (u, v) = cayley(pt(-40.0, 1e-3));
        assert!(u * u + v * v < 1.0);
        // vertical geodesic through i maps to the vertical diameter
        let a = cayley_angle(&State::new(Point::i(), Direction::up()));
        assert!((a - PI / 2.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn isometry_preserves_distance(m in arb_map(), p in arb_point(), q in arb_point()) {
            let d0 = hyp_distance(p, q);
            let d1 = hyp_distance(m.apply(p), m.apply(q));
            prop_assert!((d0 - d1).abs() < 1e-10 * d0.max(1.0), "{d0} {d1}");
        }

        #[test]
        fn group_laws(m1 in arb_map(), m2 in arb_map(), p in arb_point()) {
            let lhs = m1.compose(&m2).apply(p);
            let rhs = m1.apply(m2.apply(p));
            prop_assert!(hyp_distance(lhs, rhs) < 1e-9);
            let back = m1.inverse().apply(m1.apply(p));
            prop_assert!(hyp_distance(back, p) < 1e-9);
        }

        #[test]
        fn transport_commutes_with_flow(m in arb_map(), p in arb_point(), a in 0.0..TAU, t in -2.0..2.0f64) {
            let s = State::new(p, Direction::new(a));
            let lhs = flow_state(&m.transport(&s), t);
            let rhs = m.transport(&flow_state(&s, t));
            prop_assert!(hyp_distance(lhs.point, rhs.point) < 1e-9);
            prop_assert!(wrapped_diff(lhs.dir.alpha(), rhs.dir.alpha()) < 1e-9);
        }

        #[test]
        fn transport_preserves_angles(m in arb_map(), p in arb_point(), a in 0.0..TAU, b in 0.0..TAU) {
            let s1 = m.transport(&State::new(p, Direction::new(a)));
            let s2 = m.transport(&State::new(p, Direction::new(b)));
            let before = (b - a).rem_euclid(TAU);
            let after = (s2.dir.alpha() - s1.dir.alpha()).rem_euclid(TAU);
            prop_assert!(wrapped_diff(before, after) < 1e-10);
        }

        #[test]
        fn normalizing_map_straightens_geodesic(p in arb_point(), a in 0.0..TAU, u in -3.0..3.0f64) {
            let s = State::new(p, Direction::new(a));
            let q = normalizing_map(&s).apply(geodesic_flow(&s, u));
            prop_assert!(q.x().abs() < 1e-9 * u.exp().max(1.0));
            prop_assert!((q.y() / u.exp() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn cayley_lands_in_disk(p in arb_point()) {
            let (u, v) = cayley(p);
            prop_assert!(u * u + v * v < 1.0);
        }
    }
}
