//! Large-scale propagation: V2V dual-slope LOS / corner NLOS and V2I log-distance.

use crate::config::ChannelConfig;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone)]
pub struct PathlossModel {
    cfg: ChannelConfig,
    breakpoint_m: f64,
    freq_term_db: f64,
}

impl PathlossModel {
    pub fn new(cfg: &ChannelConfig, vehicle_height_m: f64) -> Self {
        let fc = cfg.carrier_freq_ghz * 1e9;
        let eff_h = vehicle_height_m - 1.0;
        Self {
            cfg: cfg.clone(),
            breakpoint_m: 4.0 * eff_h * eff_h * fc / SPEED_OF_LIGHT,
            freq_term_db: 20.0 * (cfg.carrier_freq_ghz / 5.0).log10(),
        }
    }

    pub fn breakpoint_m(&self) -> f64 {
        self.breakpoint_m
    }

    /// V2V line-of-sight loss in dB.
    pub fn los_db(&self, distance_m: f64) -> f64 {
        let c = &self.cfg;
        let d = distance_m.max(c.min_distance_m);
        let near = |d: f64| 10.0 * c.los_exponent_near * d.log10() + c.los_intercept_db + self.freq_term_db;
        if d <= self.breakpoint_m {
            near(d)
        } else {
            near(self.breakpoint_m) + 10.0 * c.los_exponent_far * (d / self.breakpoint_m).log10()
        }
    }

    fn nlos_leg_db(&self, d1: f64, d2: f64) -> f64 {
        let c = &self.cfg;
        let d1 = d1.max(c.min_distance_m);
        let d2 = d2.max(c.min_distance_m);
        let nj = (c.nlos_nj_start - c.nlos_nj_slope * d1).max(c.nlos_nj_min);
        self.los_db(d1) + c.nlos_base_db - c.nlos_offset_coeff * nj
            + 10.0 * nj * d2.log10()
            + c.nlos_freq_coeff * (c.carrier_freq_ghz / 5.0).log10()
    }

    /// V2V non-line-of-sight loss around one corner, with legs `d1` and `d2`.
    /// Never below the LOS loss at the same straight-line distance.
    pub fn nlos_db(&self, d1: f64, d2: f64) -> f64 {
        let corner = self.nlos_leg_db(d1, d2).min(self.nlos_leg_db(d2, d1));
        corner.max(self.los_db(d1.hypot(d2)))
    }

    /// V2I loss on the 3-D distance to the base station.
    pub fn v2i_db(&self, distance_3d_m: f64) -> f64 {
        let d_km = distance_3d_m.max(self.cfg.min_distance_m) / 1000.0;
        self.cfg.v2i_intercept_db + 10.0 * self.cfg.v2i_exponent * d_km.log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> PathlossModel {
        PathlossModel::new(&ChannelConfig::default(), 1.5)
    }

    #[test]
    fn frozen_reference_values() {
        // From an independent scratch evaluation of the same formulas.
        let m = model();
        assert!((m.breakpoint_m() - 6.671_281_903_963_041).abs() < 1e-9);
        for (d, pl) in [(3.0, 43.871_852_308_695_59), (50.0, 86.741_179_235_666_27), (200.0, 110.823_578_888_784_77)] {
            assert!((m.los_db(d) - pl).abs() < 1e-9, "los({d})");
        }
        assert!((m.nlos_db(10.0, 10.0) - 70.648_559_036_209_4).abs() < 1e-9);
        assert!((m.nlos_db(200.0, 200.0) - 154.013_654_762_173).abs() < 1e-9);
    }

    #[test]
    fn los_not_worse_than_nlos_over_sweep() {
        let m = model();
        for i in 0..300 {
            for j in 0..300 {
                let (d1, d2) = (i as f64 * 5.0, j as f64 * 5.0);
                let los = m.los_db(d1.hypot(d2));
                assert!(m.nlos_db(d1, d2) >= los, "d1={d1} d2={d2}");
            }
        }
    }

    #[test]
    fn pathloss_increases_with_distance() {
        let m = model();
        let mut d = 4.0;
        while d < 2000.0 {
            assert!(m.los_db(2.0 * d) > m.los_db(d));
            assert!(m.v2i_db(2.0 * d) > m.v2i_db(d));
            d *= 1.3;
        }
        assert!((m.v2i_db(1000.0) - 128.1).abs() < 1e-12);
    }
}
