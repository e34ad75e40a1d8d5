//! Small numeric helpers shared across modules.

/// `floor(v)` tolerant to values that should be integers but land just
/// below because of rounding, such as `8^(3/2)`.
pub fn floor_tol(v: f64) -> f64 {
    (v + 1e-9 * v.abs().max(1.0)).floor()
}

/// `ceil(v)` with the mirrored tolerance.
pub fn ceil_tol(v: f64) -> f64 {
    (v - 1e-9 * v.abs().max(1.0)).ceil()
}

/// `floor(n^a)`.
pub fn floor_pow(n: u64, a: f64) -> u64 {
    floor_tol((n as f64).powf(a)).max(0.0) as u64
}

/// `floor(sqrt(k))`, exact for every `u64`.
pub fn isqrt(k: u64) -> u64 {
    k.isqrt()
}

/// `ceil(sqrt(k))`.
pub fn ceil_sqrt(k: u64) -> u64 {
    let r = k.isqrt();
    if r * r == k {
        r
    } else {
        r + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floors_survive_rounding() {
        assert_eq!(floor_pow(8, 1.0 / 3.0), 2);
        assert_eq!(floor_pow(16, 7.0 / 4.0), 128);
        assert_eq!(floor_pow(1000, 1.0 / 3.0), 10);
        assert_eq!(ceil_tol(0.25 * 8.0), 2.0);
        assert_eq!(ceil_tol(0.3 * 10.0), 3.0);
    }

    #[test]
    fn square_roots() {
        assert_eq!((isqrt(48), ceil_sqrt(48)), (6, 7));
        assert_eq!((isqrt(49), ceil_sqrt(49)), (7, 7));
        assert_eq!((isqrt(0), ceil_sqrt(0)), (0, 0));
    }
}
