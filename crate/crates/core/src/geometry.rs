use serde::{Deserialize, Serialize};

/// A point in the deployment frame, metres. `z` is height above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Distance measured in the horizontal plane only.
    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Elevation angle of the line from `upper` down to `lower`, measured from
/// the horizontal plane. `sin(φ) = (upper.z - lower.z) / |upper - lower|`.
///
/// Returns a value in `[0, π/2]`; it is strictly positive whenever `upper`
/// sits above `lower`, which holds for every slot/user pair.
pub fn elevation_angle(upper: &Point3, lower: &Point3) -> f64 {
    elevation_sine(upper, lower).asin()
}

/// `sin` of [`elevation_angle`], computed without the round trip through
/// `asin`.
pub fn elevation_sine(upper: &Point3, lower: &Point3) -> f64 {
    let r = upper.distance(lower);
    let dz = upper.z - lower.z;
    if r == 0.0 {
        return 0.0;
    }
    (dz / r).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn directly_beneath_is_vertical() {
        let slot = Point3::new(1.0, 2.0, 3.0);
        let user = Point3::new(1.0, 2.0, 0.0);
        assert_eq!(elevation_sine(&slot, &user), 1.0);
        assert!((elevation_angle(&slot, &user) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn offset_equal_to_height_is_forty_five_degrees() {
        let slot = Point3::new(0.0, 0.0, 2.5);
        let user = Point3::new(2.5, 0.0, 0.0);
        assert!((elevation_angle(&slot, &user) - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn three_four_five() {
        let slot = Point3::new(0.0, 0.0, 3.0);
        let user = Point3::new(0.0, 4.0, 0.0);
        assert!((elevation_sine(&slot, &user) - 0.6).abs() < 1e-15);
    }
}
