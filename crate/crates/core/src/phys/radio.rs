use super::PhysError;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space radio. `tx_power_dbm` is solved from the range and threshold so
/// that the received power at `max_range_m` equals `rssi_threshold_dbm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioModel {
    pub tx_power_dbm: f64,
    pub carrier_freq_hz: f64,
    pub max_range_m: f64,
    pub rssi_threshold_dbm: f64,
}

fn free_space_loss_db(d: f64, freq: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d * freq / SPEED_OF_LIGHT).log10()
}

impl RadioModel {
    pub fn calibrated(
        carrier_freq_hz: f64,
        max_range_m: f64,
        rssi_threshold_dbm: f64,
    ) -> Result<Self, PhysError> {
        if !(carrier_freq_hz > 0.0) {
            return Err(PhysError::InvalidRadio("carrier frequency must be positive"));
        }
        if !(max_range_m > 0.0) {
            return Err(PhysError::InvalidRadio("range must be positive"));
        }
        if !rssi_threshold_dbm.is_finite() {
            return Err(PhysError::InvalidRadio("threshold must be finite"));
        }
        Ok(Self {
            tx_power_dbm: rssi_threshold_dbm + free_space_loss_db(max_range_m, carrier_freq_hz),
            carrier_freq_hz,
            max_range_m,
            rssi_threshold_dbm,
        })
    }

    /// Friis received power in dBm at distance `d`.
    pub fn rssi(&self, d: f64) -> Result<f64, PhysError> {
        if !(d > 0.0) {
            return Err(PhysError::NonPositiveDistance(d));
        }
        Ok(self.tx_power_dbm - free_space_loss_db(d, self.carrier_freq_hz))
    }

    /// Received power, saturating at the transmit power for co-located nodes.
    pub fn rssi_or_max(&self, d: f64) -> f64 {
        self.rssi(d).unwrap_or(self.tx_power_dbm)
    }

    /// True when a frame sent over `d` meters clears the reception threshold.
    pub fn receivable(&self, d: f64) -> bool {
        d <= 0.0 || self.rssi_or_max(d) >= self.rssi_threshold_dbm
    }
}
