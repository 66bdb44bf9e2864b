//! Front-fixing change of variables between `x in [g, h]` and `y in [-1, 1]`.

use crate::error::{Error, Result};

/// Front positions and velocities at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontGeometry {
    pub g: f64,
    pub h: f64,
    pub gdot: f64,
    pub hdot: f64,
}

/// Coefficients of the transformed equation `m_t - D a m_yy + b m_y = f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricTerms {
    /// `(2 / (h - g))^2`, multiplies the diffusion term.
    pub diffusion_scale: f64,
    /// `-(y (h' - g') + (h' + g')) / (h - g)`, the induced drift.
    pub drift: f64,
}

impl FrontGeometry {
    pub fn new(g: f64, h: f64, gdot: f64, hdot: f64) -> Result<Self> {
        let geom = Self { g, h, gdot, hdot };
        geom.check_width()?;
        Ok(geom)
    }

    /// Static symmetric interval `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width, 0.0, 0.0)
    }

    pub fn width(&self) -> f64 {
        self.h - self.g
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.h + self.g)
    }

    fn check_width(&self) -> Result<()> {
        let w = self.width();
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::DegenerateGeometry(w));
        }
        Ok(())
    }

    pub fn x_to_y(&self, x: f64) -> Result<f64> {
        self.check_width()?;
        if !(self.g..=self.h).contains(&x) {
            return Err(Error::OutOfDomain {
                what: "x",
                value: x,
                lo: self.g,
                hi: self.h,
            });
        }
        Ok(((2.0 * x - (self.h + self.g)) / self.width()).clamp(-1.0, 1.0))
    }

    pub fn y_to_x(&self, y: f64) -> Result<f64> {
        self.check_width()?;
        if !(-1.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain {
                what: "y",
                value: y,
                lo: -1.0,
                hi: 1.0,
            });
        }
        Ok(self.y_to_x_unchecked(y))
    }

    /// `y_to_x` without range checks, for hot loops over a known grid.
    #[inline]
    pub(crate) fn y_to_x_unchecked(&self, y: f64) -> f64 {
        0.5 * (y * (self.h - self.g) + (self.h + self.g))
    }

    pub fn metric_terms(&self, y: f64) -> Result<MetricTerms> {
        self.check_width()?;
        if !(-1.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain {
                what: "y",
                value: y,
                lo: -1.0,
                hi: 1.0,
            });
        }
        let w = self.width();
        Ok(MetricTerms {
            diffusion_scale: 4.0 / (w * w),
            drift: self.drift_unchecked(y),
        })
    }

    #[inline]
    pub(crate) fn drift_unchecked(&self, y: f64) -> f64 {
        -(y * (self.hdot - self.gdot) + (self.hdot + self.gdot)) / self.width()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        let geom = FrontGeometry::new(-2.0, 4.0, 0.0, 0.0).unwrap();
        assert_eq!(geom.x_to_y(4.0).unwrap(), 1.0);
        assert_eq!(geom.x_to_y(-2.0).unwrap(), -1.0);
        assert_eq!(geom.x_to_y(1.0).unwrap(), 0.0);
        assert_eq!(geom.y_to_x(1.0).unwrap(), 4.0);
        assert_eq!(geom.y_to_x(-1.0).unwrap(), -2.0);
        assert_eq!(geom.y_to_x(0.0).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_rejected() {
        let geom = FrontGeometry::new(-1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(geom.x_to_y(1.5).is_err());
        assert!(geom.y_to_x(-1.01).is_err());
        assert!(FrontGeometry::new(1.0, 1.0, 0.0, 0.0).is_err());
        let bad = FrontGeometry {
            g: 2.0,
            h: 1.0,
            gdot: 0.0,
            hdot: 0.0,
        };
        assert!(matches!(bad.metric_terms(0.0), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn metric_terms_examples() {
        let unit = FrontGeometry::new(-1.0, 1.0, 0.0, 0.0).unwrap();
        let m = unit.metric_terms(0.3).unwrap();
        assert_eq!((m.diffusion_scale, m.drift), (1.0, 0.0));

        let sym = FrontGeometry::new(-3.0, 3.0, -0.7, 0.7).unwrap();
        assert_eq!(sym.metric_terms(0.0).unwrap().drift, 0.0);

        let geom = FrontGeometry::new(-1.0, 3.0, -0.5, 0.25).unwrap();
        let m = geom.metric_terms(0.5).unwrap();
        assert!((m.diffusion_scale - 0.25).abs() < 1e-15);
        assert!((m.drift + 0.03125).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip(g in -50.0f64..50.0, w in 0.5f64..200.0, y in -1.0f64..=1.0) {
            let geom = FrontGeometry::new(g, g + w, 0.0, 0.0).unwrap();
            let x = geom.y_to_x(y).unwrap().clamp(geom.g, geom.h);
            let back = geom.x_to_y(x).unwrap();
            prop_assert!((back - y).abs() <= 1e-12);
        }
    }
}
