//! Airtime of one model upload over 802.11ax.
//!
//! Each A-MPDU is sent in its own RTS/CTS-protected exchange:
//!
//! ```text
//! backoff + RTS + SIFS + CTS + SIFS + DATA + SIFS + ACK + DIFS
//! ```
//!
//! with the mean fixed-window backoff `(CW / 2) * slot`, control frames at
//! the legacy OFDM rate and the data frame at the HE single-user rate.
//! Collisions and retransmissions are not modeled.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// 802.11ax MAC/PHY constants. Durations in seconds, lengths in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WifiParams {
    pub model_size_bits: f64,
    pub legacy_symbol_s: f64,
    pub legacy_bits_per_symbol: f64,
    pub subcarriers: u32,
    pub spatial_streams: u32,
    pub bits_per_subcarrier: u32,
    pub coding_rate: f64,
    pub he_symbol_s: f64,
    pub t_empty_slot: f64,
    pub t_sifs: f64,
    pub t_difs: f64,
    pub t_phy: f64,
    pub t_he_su: f64,
    pub l_rts: f64,
    pub l_cts: f64,
    pub l_ack: f64,
    pub l_sf: f64,
    pub l_mac: f64,
    pub cw: u32,
    pub max_ampdu_bits: f64,
}

/// Bits in one megabyte (10^6 bytes).
pub const BITS_PER_MB: f64 = 8e6;

impl Default for WifiParams {
    fn default() -> Self {
        Self {
            model_size_bits: 44.73 * BITS_PER_MB,
            legacy_symbol_s: 4e-6,
            legacy_bits_per_symbol: 24.0,
            subcarriers: 234,
            spatial_streams: 1,
            // 1024-QAM, rate 5/6 (HE-MCS 11)
            bits_per_subcarrier: 10,
            coding_rate: 5.0 / 6.0,
            // 12.8 us symbol + 0.8 us guard interval
            he_symbol_s: 13.6e-6,
            t_empty_slot: 9e-6,
            t_sifs: 16e-6,
            t_difs: 34e-6,
            t_phy: 20e-6,
            t_he_su: 100e-6,
            l_rts: 160.0,
            l_cts: 112.0,
            l_ack: 240.0,
            l_sf: 16.0,
            l_mac: 320.0,
            cw: 15,
            // 6 500 631 octets, the HE A-MPDU ceiling
            max_ampdu_bits: 6_500_631.0 * 8.0,
        }
    }
}

impl WifiParams {
    /// Coded data bits per HE OFDM symbol.
    pub fn data_bits_per_symbol(&self) -> f64 {
        (self.subcarriers as f64
            * self.spatial_streams as f64
            * self.bits_per_subcarrier as f64
            * self.coding_rate)
            .round()
    }

    pub fn validate(&self) -> Result<()> {
        let durations = [
            ("legacy_symbol_s", self.legacy_symbol_s),
            ("he_symbol_s", self.he_symbol_s),
            ("t_empty_slot", self.t_empty_slot),
            ("t_sifs", self.t_sifs),
            ("t_difs", self.t_difs),
            ("t_phy", self.t_phy),
            ("t_he_su", self.t_he_su),
            ("legacy_bits_per_symbol", self.legacy_bits_per_symbol),
            ("l_rts", self.l_rts),
            ("l_cts", self.l_cts),
            ("l_ack", self.l_ack),
            ("l_sf", self.l_sf),
            ("l_mac", self.l_mac),
            ("max_ampdu_bits", self.max_ampdu_bits),
        ];
        if let Some((name, v)) = durations.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "wifi {name} = {v} must be positive"
            )));
        }
        if !(self.model_size_bits >= 0.0 && self.model_size_bits.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "wifi model_size_bits = {} must be >= 0",
                self.model_size_bits
            )));
        }
        if self.data_bits_per_symbol() <= 0.0 {
            return Err(Error::InvalidConfig(
                "data_bits_per_symbol is zero (check subcarriers, streams, modulation, coding rate)"
                    .into(),
            ));
        }
        Ok(())
    }

    fn legacy_frame(&self, bits: f64) -> f64 {
        self.t_phy + (bits / self.legacy_bits_per_symbol).ceil() * self.legacy_symbol_s
    }

    fn he_data_frame(&self, payload_bits: f64) -> f64 {
        let bits = self.l_sf + self.l_mac + payload_bits;
        self.t_phy + self.t_he_su + (bits / self.data_bits_per_symbol()).ceil() * self.he_symbol_s
    }
}

/// Time spent in each part of an upload, summed over all exchanges.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AirtimeBreakdown {
    pub aggregates: usize,
    pub backoff: f64,
    pub rts: f64,
    pub cts: f64,
    pub data: f64,
    pub ack: f64,
    pub sifs: f64,
    pub difs: f64,
    /// Part of `data` spent on payload symbols alone.
    pub payload: f64,
}

impl AirtimeBreakdown {
    pub fn total(&self) -> f64 {
        self.backoff + self.rts + self.cts + self.data + self.ack + self.sifs + self.difs
    }

    pub fn overhead(&self) -> f64 {
        self.total() - self.payload
    }
}

pub fn airtime_breakdown(wifi: &WifiParams) -> Result<AirtimeBreakdown> {
    wifi.validate()?;
    let aggregates = ((wifi.model_size_bits / wifi.max_ampdu_bits).ceil() as usize).max(1);
    let rate = wifi.data_bits_per_symbol() / wifi.he_symbol_s;

    let mut b = AirtimeBreakdown {
        aggregates,
        ..Default::default()
    };
    let mut remaining = wifi.model_size_bits;
    for _ in 0..aggregates {
        let chunk = remaining.min(wifi.max_ampdu_bits);
        remaining -= chunk;
        b.backoff += wifi.cw as f64 / 2.0 * wifi.t_empty_slot;
        b.rts += wifi.legacy_frame(wifi.l_rts);
        b.cts += wifi.legacy_frame(wifi.l_cts);
        b.data += wifi.he_data_frame(chunk);
        b.ack += wifi.legacy_frame(wifi.l_ack);
        b.sifs += 3.0 * wifi.t_sifs;
        b.difs += wifi.t_difs;
        b.payload += chunk / rate;
    }
    Ok(b)
}

/// Total upload airtime in seconds.
pub fn airtime(wifi: &WifiParams) -> Result<f64> {
    Ok(airtime_breakdown(wifi)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn default_rate() {
        let w = WifiParams::default();
        assert_eq!(w.data_bits_per_symbol(), 1950.0);
        assert!(w.validate().is_ok());
    }

    #[test]
    fn empty_payload_is_pure_overhead() {
        let w = WifiParams {
            model_size_bits: 0.0,
            ..Default::default()
        };
        let b = airtime_breakdown(&w).unwrap();
        assert_eq!(b.aggregates, 1);
        // Hand-computed: backoff 7.5 * 9 us, RTS 20 + 7*4, CTS 20 + 5*4,
        // DATA 20 + 100 + 1 symbol (336 header bits), ACK 20 + 10*4, 3 SIFS, DIFS.
        let want = 67.5e-6 + 48e-6 + 40e-6 + (120e-6 + 13.6e-6) + 60e-6 + 48e-6 + 34e-6;
        assert_abs_diff_eq!(b.total(), want, epsilon = 1e-12);
        assert_eq!(b.payload, 0.0);
    }

    #[test]
    fn default_upload_is_payload_dominated() {
        let w = WifiParams::default();
        let b = airtime_breakdown(&w).unwrap();
        // Oracle: bits divided by the PHY rate.
        let oracle = 44.73e6 * 8.0 / (1950.0 / 13.6e-6);
        assert_abs_diff_eq!(b.payload, oracle, epsilon = 1e-9);
        assert!((b.total() - oracle).abs() / oracle < 0.01);
        assert!((2.4..2.7).contains(&b.total()), "{}", b.total());
        assert_eq!(b.aggregates, 7);
    }

    #[test]
    fn single_large_aggregate() {
        let w = WifiParams {
            max_ampdu_bits: 1e12,
            ..Default::default()
        };
        let b = airtime_breakdown(&w).unwrap();
        assert_eq!(b.aggregates, 1);
        let oracle = w.model_size_bits / (1950.0 / 13.6e-6);
        assert!((b.total() - oracle).abs() < 1e-3);
    }

    #[test]
    fn doubling_payload() {
        let w = WifiParams {
            model_size_bits: 1e6,
            ..Default::default()
        };
        let w2 = WifiParams {
            model_size_bits: 2e6,
            ..w.clone()
        };
        let a = airtime_breakdown(&w).unwrap();
        let b = airtime_breakdown(&w2).unwrap();
        assert!(b.total() > a.total());
        assert_abs_diff_eq!(b.payload, 2.0 * a.payload, epsilon = 1e-15);
        // Frame headers ride in the first symbol, so the symbol count at least doubles minus one.
        let syms = |x: &AirtimeBreakdown| (x.data - 120e-6) / 13.6e-6;
        assert!(syms(&b) >= 2.0 * syms(&a) - 1.0 - 1e-9);
    }

    #[test]
    fn zero_rate_rejected() {
        let w = WifiParams {
            bits_per_subcarrier: 0,
            ..Default::default()
        };
        assert!(matches!(airtime(&w), Err(Error::InvalidConfig(_))));
    }

    proptest! {
        #[test]
        fn monotone_in_size(a in 0.0f64..5e8, extra in 1950.0f64..1e8) {
            let w = WifiParams { model_size_bits: a, ..Default::default() };
            let w2 = WifiParams { model_size_bits: a + extra, ..w.clone() };
            prop_assert!(airtime(&w2).unwrap() > airtime(&w).unwrap());
        }

        #[test]
        fn weakly_decreasing_in_rate(bits in 1u32..10) {
            let lo = WifiParams { bits_per_subcarrier: bits, ..Default::default() };
            let hi = WifiParams { bits_per_subcarrier: bits + 1, ..Default::default() };
            prop_assert!(airtime(&hi).unwrap() <= airtime(&lo).unwrap());
        }
    }
}
