//! SINR and Shannon capacity for the V2I uplink and the V2V underlay.

use serde::{Deserialize, Serialize};

use super::realization::ChannelRealization;
use crate::config::ChannelConfig;
use crate::error::{Error, Result};
use crate::units::dbm_to_mw;

/// Spectrum and power assignment of the V2V transmitters for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Sub-band reused by each transmitter; `None` when silent.
    pub band: Vec<Option<usize>>,
    pub power_dbm: Vec<f64>,
}

impl Allocation {
    pub fn silent(n_tx: usize) -> Self {
        Self {
            band: vec![None; n_tx],
            power_dbm: vec![f64::NEG_INFINITY; n_tx],
        }
    }

    pub fn len(&self) -> usize {
        self.band.len()
    }

    pub fn is_empty(&self) -> bool {
        self.band.is_empty()
    }

    /// Spectrum allocation indicator: transmitter `k` reuses sub-band `m`.
    #[inline]
    pub fn rho(&self, m: usize, k: usize) -> bool {
        self.band[k] == Some(m)
    }

    #[inline]
    pub fn power_mw(&self, k: usize) -> f64 {
        dbm_to_mw(self.power_dbm[k])
    }

    pub fn assign(&mut self, k: usize, band: usize, power_dbm: f64) {
        self.band[k] = Some(band);
        self.power_dbm[k] = power_dbm;
    }

    pub fn clear(&mut self, k: usize) {
        self.band[k] = None;
        self.power_dbm[k] = f64::NEG_INFINITY;
    }
}

/// Powers and bandwidth shared by every link in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub cue_power_mw: f64,
    pub noise_mw: f64,
    pub bandwidth_hz: f64,
}

impl LinkBudget {
    pub fn from_config(cfg: &ChannelConfig) -> Self {
        Self {
            cue_power_mw: dbm_to_mw(cfg.cue_power_dbm),
            noise_mw: dbm_to_mw(cfg.noise_power_dbm),
            bandwidth_hz: cfg.bandwidth_hz,
        }
    }
}

/// Shannon capacity `W log2(1 + sinr)` in bits/s.
#[inline]
pub fn capacity(sinr: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2
}

/// SINR of the CUE on sub-band `m` at the base station.
pub fn cue_sinr(real: &ChannelRealization, alloc: &Allocation, budget: &LinkBudget, m: usize) -> f64 {
    let interference: f64 = (0..alloc.len())
        .filter(|&k| alloc.rho(m, k))
        .map(|k| alloc.power_mw(k) * real.h_tilde(k, m))
        .sum();
    budget.cue_power_mw * real.h(m) / (budget.noise_mw + interference)
}

/// Interference power at V2V receiver `r` on sub-band `b`: the CUE of that
/// sub-band plus every co-band V2V transmitter other than `exclude`.
pub fn interference_at(
    real: &ChannelRealization,
    alloc: &Allocation,
    budget: &LinkBudget,
    r: usize,
    b: usize,
    exclude: Option<usize>,
) -> f64 {
    let from_vues: f64 = (0..alloc.len())
        .filter(|&t| Some(t) != exclude && alloc.rho(b, t))
        .map(|t| alloc.power_mw(t) * real.vue_gain(t, r, b))
        .sum();
    budget.cue_power_mw * real.g_tilde_c(b, r) + from_vues
}

/// SINR of V2V transmitter `k` at receiver `r` (for unicast, `r == k`).
pub fn vue_sinr(
    real: &ChannelRealization,
    alloc: &Allocation,
    budget: &LinkBudget,
    k: usize,
    r: usize,
) -> Result<f64> {
    let b = alloc.band[k].ok_or(Error::Unallocated(k))?;
    let signal = alloc.power_mw(k) * real.vue_gain(k, r, b);
    Ok(signal / (budget.noise_mw + interference_at(real, alloc, budget, r, b, Some(k))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_budget() -> LinkBudget {
        LinkBudget { cue_power_mw: 1.0, noise_mw: 1.0, bandwidth_hz: 1.0 }
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(0.0, 1e6), 0.0);
        assert!((capacity(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((capacity(3.0, 1e6) - 2e6).abs() < 1e-9);
    }

    #[test]
    fn cue_without_sharing_is_snr() {
        let mut real = ChannelRealization::zeros(2, 1, 1);
        real.cue_bs = vec![2.0, 5.0];
        real.set_h_tilde(0, 0, 1.0);
        let mut alloc = Allocation::silent(1);
        alloc.assign(0, 0, 0.0);
        let b = unit_budget();
        assert_eq!(cue_sinr(&real, &alloc, &b, 1), 5.0);
        // One co-band VUE with P h~ = 1 halves the SINR of a unit-SNR CUE.
        real.cue_bs[0] = 1.0;
        assert!((cue_sinr(&real, &alloc, &b, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sole_vue_with_vanishing_cue_gain() {
        let mut real = ChannelRealization::zeros(1, 1, 1);
        real.set_vue_gain(0, 0, 0, 3.0);
        let mut alloc = Allocation::silent(1);
        alloc.assign(0, 0, 10.0);
        let b = unit_budget();
        let sinr = vue_sinr(&real, &alloc, &b, 0, 0).unwrap();
        assert!((sinr - 30.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_has_equal_sinr() {
        let mut real = ChannelRealization::zeros(1, 2, 2);
        real.set_g_tilde_c(0, 0, 0.2);
        real.set_g_tilde_c(0, 1, 0.2);
        for (t, r, g) in [(0, 0, 4.0), (1, 1, 4.0), (0, 1, 0.5), (1, 0, 0.5)] {
            real.set_vue_gain(t, r, 0, g);
        }
        let mut alloc = Allocation::silent(2);
        alloc.assign(0, 0, 0.0);
        alloc.assign(1, 0, 0.0);
        let b = unit_budget();
        let s0 = vue_sinr(&real, &alloc, &b, 0, 0).unwrap();
        let s1 = vue_sinr(&real, &alloc, &b, 1, 1).unwrap();
        assert_eq!(s0, s1);
        assert!((s0 - 4.0 / 1.7).abs() < 1e-12);
    }

    #[test]
    fn unallocated_vue_is_an_error() {
        let real = ChannelRealization::zeros(1, 1, 1);
        let alloc = Allocation::silent(1);
        assert!(matches!(vue_sinr(&real, &alloc, &unit_budget(), 0, 0), Err(Error::Unallocated(0))));
    }

    proptest! {
        #[test]
        fn capacity_monotone(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(capacity(lo, 1e6) <= capacity(hi, 1e6));
            prop_assert_eq!(capacity(a, 1e6) == 0.0, a == 0.0);
        }

        #[test]
        fn sinr_monotone_in_gains(
            own in 0.1f64..10.0, intf in 0.1f64..10.0, cue in 0.1f64..10.0, bump in 1.01f64..3.0,
        ) {
            let mut real = ChannelRealization::zeros(1, 2, 2);
            real.cue_bs[0] = own;
            real.set_h_tilde(0, 0, intf);
            real.set_h_tilde(1, 0, intf);
            real.set_g_tilde_c(0, 0, cue);
            real.set_vue_gain(0, 0, 0, own);
            real.set_vue_gain(1, 0, 0, intf);
            let mut alloc = Allocation::silent(2);
            alloc.assign(0, 0, 0.0);
            alloc.assign(1, 0, 0.0);
            let b = unit_budget();
            let base_v = vue_sinr(&real, &alloc, &b, 0, 0).unwrap();
            let base_c = cue_sinr(&real, &alloc, &b, 0);

            let mut more = real.clone();
            more.set_vue_gain(1, 0, 0, intf * bump);
            prop_assert!(vue_sinr(&more, &alloc, &b, 0, 0).unwrap() < base_v);
            let mut more = real.clone();
            more.set_g_tilde_c(0, 0, cue * bump);
            prop_assert!(vue_sinr(&more, &alloc, &b, 0, 0).unwrap() < base_v);
            let mut more = real.clone();
            more.set_vue_gain(0, 0, 0, own * bump);
            prop_assert!(vue_sinr(&more, &alloc, &b, 0, 0).unwrap() > base_v);
            let mut more = real.clone();
            more.set_h_tilde(1, 0, intf * bump);
            prop_assert!(cue_sinr(&more, &alloc, &b, 0) < base_c);
            let mut more = real.clone();
            more.cue_bs[0] = own * bump;
            prop_assert!(cue_sinr(&more, &alloc, &b, 0) > base_c);
        }
    }
}
