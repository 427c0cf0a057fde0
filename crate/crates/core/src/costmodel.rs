//! Hardware-efficiency metrics for candidate networks.
//!
//! Energy efficiency is approximated by arithmetic intensity: MACs per weight
//! (`C/S_p`) and MACs per output activation (`C/S_a`), aggregated as
//! `E = mu1 * C/S_p + mu2 * C/S_a`. Latency is the sum of a load term (bytes
//! moved over memory bandwidth) and an inference term (MACs over throughput).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::CostBreakdown;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub name: String,
    /// Bytes per second.
    pub mem_bandwidth: f64,
    /// MACs per second.
    pub compute_throughput: f64,
    pub bytes_per_param: f64,
    pub bytes_per_activation: f64,
    /// Bytes.
    pub cache_capacity: f64,
    /// Joules per MAC.
    pub energy_per_mac: f64,
    /// Joules per byte moved.
    pub energy_per_byte_moved: f64,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mem_bandwidth", self.mem_bandwidth),
            ("compute_throughput", self.compute_throughput),
            ("bytes_per_param", self.bytes_per_param),
            ("bytes_per_activation", self.bytes_per_activation),
            ("cache_capacity", self.cache_capacity),
            ("energy_per_mac", self.energy_per_mac),
            ("energy_per_byte_moved", self.energy_per_byte_moved),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidValue(format!(
                    "device {}: {name} must be positive, got {v}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let device: DeviceProfile = serde_json::from_str(text)?;
        device.validate()?;
        Ok(device)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        DeviceProfile::from_json(&std::fs::read_to_string(path)?)
    }

    /// Bytes of weights that must stay resident.
    pub fn param_bytes(&self, params: u64) -> f64 {
        params as f64 * self.bytes_per_param
    }

    fn bytes_moved(&self, cost: &CostBreakdown) -> f64 {
        cost.params as f64 * self.bytes_per_param + cost.activations as f64 * self.bytes_per_activation
    }

    /// Synthetic smartphone-class profile (illustrative constants, not calibrated).
    pub fn smartphone() -> Self {
        DeviceProfile {
            name: "smartphone-class (synthetic)".into(),
            mem_bandwidth: 8.0e9,
            compute_throughput: 1.0e10,
            bytes_per_param: 4.0,
            bytes_per_activation: 4.0,
            cache_capacity: 2.0 * MIB,
            energy_per_mac: 3.0e-12,
            energy_per_byte_moved: 2.0e-10,
        }
    }

    /// Synthetic single-board-computer-class profile (illustrative constants).
    pub fn single_board() -> Self {
        DeviceProfile {
            name: "single-board-class (synthetic)".into(),
            mem_bandwidth: 4.0e9,
            compute_throughput: 5.0e9,
            bytes_per_param: 4.0,
            bytes_per_activation: 4.0,
            cache_capacity: 2.0 * MIB,
            energy_per_mac: 4.0e-12,
            energy_per_byte_moved: 3.0e-10,
        }
    }

    /// Synthetic mobile-robot-class profile (illustrative constants).
    pub fn robot() -> Self {
        DeviceProfile {
            name: "robot-class (synthetic)".into(),
            mem_bandwidth: 6.0e9,
            compute_throughput: 2.0e10,
            bytes_per_param: 4.0,
            bytes_per_activation: 4.0,
            cache_capacity: 2.0 * MIB,
            energy_per_mac: 5.0e-12,
            energy_per_byte_moved: 2.5e-10,
        }
    }
}

/// One mebibyte; cache sizes such as "2 MB" are read as binary megabytes.
pub const MIB: f64 = 1_048_576.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModelConfig {
    /// Weight on `C/S_p`.
    pub mu1: f64,
    /// Weight on `C/S_a`.
    pub mu2: f64,
    /// Floor applied before taking the log in [`norm`].
    pub norm_epsilon: f64,
}

impl Default for CostModelConfig {
    fn default() -> Self {
        CostModelConfig {
            mu1: 0.4,
            mu2: 0.6,
            norm_epsilon: 1e-6,
        }
    }
}

impl CostModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu1 < 0.0 || self.mu2 < 0.0 || (self.mu1 + self.mu2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidValue(format!(
                "mu1 and mu2 must be non-negative and sum to 1, got {} and {}",
                self.mu1, self.mu2
            )));
        }
        if !(self.norm_epsilon > 0.0) {
            return Err(Error::InvalidValue("norm_epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// `mu1 * param_intensity + mu2 * activation_intensity`.
pub fn aggregate_intensity(param_intensity: f64, activation_intensity: f64, config: &CostModelConfig) -> f64 {
    config.mu1 * param_intensity + config.mu2 * activation_intensity
}

/// Energy-efficiency proxy `E = mu1 * C/S_p + mu2 * C/S_a`; higher is better.
pub fn energy_proxy(macs: f64, params: f64, activations: f64, config: &CostModelConfig) -> Result<f64> {
    if !(params > 0.0 && activations > 0.0) {
        return Err(Error::InvalidValue(format!(
            "energy proxy needs positive S_p and S_a, got {params} and {activations}"
        )));
    }
    Ok(aggregate_intensity(macs / params, macs / activations, config))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub load: f64,
    pub inference: f64,
    pub total: f64,
}

/// `T_load = bytes moved / bandwidth`, `T_inference = C / throughput`.
pub fn latency(cost: &CostBreakdown, device: &DeviceProfile) -> Latency {
    let load = device.bytes_moved(cost) / device.mem_bandwidth;
    let inference = cost.macs as f64 / device.compute_throughput;
    Latency {
        load,
        inference,
        total: load + inference,
    }
}

/// Linear MAC + data-movement energy model, in joules.
pub fn energy_cost(cost: &CostBreakdown, device: &DeviceProfile) -> f64 {
    cost.macs as f64 * device.energy_per_mac + device.bytes_moved(cost) * device.energy_per_byte_moved
}

/// `ln(max(x, epsilon))`.
pub fn norm(x: f64, config: &CostModelConfig) -> f64 {
    x.max(config.norm_epsilon).ln()
}

/// `lambda1 * norm(A_loss) - lambda2 * norm(E)`; lower is better.
pub fn objective_score(report: &PerfReport, lambda1: f64, lambda2: f64, config: &CostModelConfig) -> f64 {
    lambda1 * norm(report.accuracy_loss, config) - lambda2 * norm(report.energy_proxy, config)
}

/// Measured or modeled performance of one candidate network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    #[serde(rename = "A")]
    pub accuracy: f64,
    /// `A(backbone) - A(candidate)`; negative when accuracy improves.
    #[serde(rename = "A_loss")]
    pub accuracy_loss: f64,
    /// Seconds.
    #[serde(rename = "T")]
    pub latency: f64,
    #[serde(rename = "T_load")]
    pub latency_load: f64,
    #[serde(rename = "T_inference")]
    pub latency_inference: f64,
    #[serde(rename = "C")]
    pub macs: u64,
    #[serde(rename = "S_p")]
    pub params: u64,
    #[serde(rename = "S_a")]
    pub activations: u64,
    /// Weight footprint in bytes.
    #[serde(rename = "S")]
    pub memory_bytes: f64,
    #[serde(rename = "CSp_ratio")]
    pub param_intensity: f64,
    #[serde(rename = "CSa_ratio")]
    pub activation_intensity: f64,
    #[serde(rename = "E")]
    pub energy_proxy: f64,
    /// Joules.
    #[serde(rename = "En")]
    pub energy_cost: f64,
}

impl PerfReport {
    pub fn build(
        cost: &CostBreakdown,
        accuracy: f64,
        base_accuracy: f64,
        device: &DeviceProfile,
        config: &CostModelConfig,
    ) -> Result<Self> {
        let (c, sp, sa) = (cost.macs as f64, cost.params as f64, cost.activations as f64);
        let t = latency(cost, device);
        Ok(PerfReport {
            accuracy,
            accuracy_loss: base_accuracy - accuracy,
            latency: t.total,
            latency_load: t.load,
            latency_inference: t.inference,
            macs: cost.macs,
            params: cost.params,
            activations: cost.activations,
            memory_bytes: device.param_bytes(cost.params),
            param_intensity: c / sp,
            activation_intensity: c / sa,
            energy_proxy: energy_proxy(c, sp, sa, config)?,
            energy_cost: energy_cost(cost, device),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::LayerCost;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn m3_layer() -> CostBreakdown {
        CostBreakdown::from_layers(vec![LayerCost {
            macs: 442_368,
            params: 432,
            activations: 16_384,
        }])
    }

    fn test_device() -> DeviceProfile {
        DeviceProfile {
            name: "test".into(),
            mem_bandwidth: 2e9,
            compute_throughput: 1e10,
            bytes_per_param: 4.0,
            bytes_per_activation: 4.0,
            cache_capacity: 2.0 * MIB,
            energy_per_mac: 1e-12,
            energy_per_byte_moved: 1e-10,
        }
    }

    #[test]
    fn energy_proxy_of_known_ratio_pairs() {
        let cfg = CostModelConfig::default();
        assert!(close(aggregate_intensity(158.9, 358.7, &cfg), 278.78, 1e-9));
        assert!(close(aggregate_intensity(81.2, 394.7, &cfg), 269.30, 1e-9));
        // equal intensities aggregate to themselves
        for x in [1.0, 17.5, 1e4] {
            let c = CostModelConfig {
                mu1: 0.25,
                mu2: 0.75,
                ..cfg
            };
            assert!(close(aggregate_intensity(x, x, &c), x, 1e-9 * x));
        }
    }

    #[test]
    fn energy_proxy_from_counts() {
        let cfg = CostModelConfig::default();
        let e = energy_proxy(442_368.0, 432.0, 16_384.0, &cfg).unwrap();
        assert!(close(e, 0.4 * 1024.0 + 0.6 * 27.0, 1e-9));
        assert!(energy_proxy(1.0, 0.0, 1.0, &cfg).is_err());
        assert!(energy_proxy(1.0, 1.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn latency_example() {
        let t = latency(&m3_layer(), &test_device());
        assert!(close(t.load, 33.632e-6, 1e-15));
        assert!(close(t.inference, 44.2368e-6, 1e-15));
        assert!(close(t.total, 77.8688e-6, 1e-15));

        let zero = latency(&CostBreakdown::default(), &test_device());
        assert_eq!(zero.total, 0.0);

        let mut fast = test_device();
        fast.compute_throughput *= 2.0;
        assert_eq!(latency(&m3_layer(), &fast).inference, t.inference / 2.0);
    }

    #[test]
    fn energy_cost_example() {
        let dev = test_device();
        assert_eq!(energy_cost(&CostBreakdown::default(), &dev), 0.0);
        let en = energy_cost(&m3_layer(), &dev);
        assert!(close(en, 442_368e-12 + 67_264e-10, 1e-18));
        assert!(close(en, 7.17e-6, 0.005e-6));

        let mut doubled = m3_layer();
        doubled.macs *= 2;
        let mac_term = 442_368e-12;
        assert!(close(energy_cost(&doubled, &dev) - en, mac_term, 1e-18));
    }

    #[test]
    fn norm_examples() {
        let cfg = CostModelConfig::default();
        assert_eq!(norm(1.0, &cfg), 0.0);
        assert!(close(norm(std::f64::consts::E, &cfg), 1.0, 1e-15));
        assert!(close(norm(-0.02, &cfg), (1e-6f64).ln(), 1e-15));
        assert!(close(norm(-0.02, &cfg), -13.8155, 1e-4));
    }

    fn report(a_loss: f64, e: f64) -> PerfReport {
        PerfReport {
            accuracy: 0.9 - a_loss,
            accuracy_loss: a_loss,
            latency: 0.0,
            latency_load: 0.0,
            latency_inference: 0.0,
            macs: 0,
            params: 0,
            activations: 0,
            memory_bytes: 0.0,
            param_intensity: 0.0,
            activation_intensity: 0.0,
            energy_proxy: e,
            energy_cost: 0.0,
        }
    }

    #[test]
    fn objective_score_examples() {
        let cfg = CostModelConfig::default();
        let e2 = std::f64::consts::E * std::f64::consts::E;
        assert!(close(objective_score(&report(1.0, e2), 0.5, 0.5, &cfg), -1.0, 1e-12));

        // with lambda2 = 0 only accuracy loss matters
        let a = report(0.01, 10.0);
        let b = report(0.02, 1000.0);
        assert!(objective_score(&a, 1.0, 0.0, &cfg) < objective_score(&b, 1.0, 0.0, &cfg));

        // equal loss: higher E wins
        let lo = report(0.02, 100.0);
        let hi = report(0.02, 200.0);
        assert!(objective_score(&hi, 0.7, 0.3, &cfg) < objective_score(&lo, 0.7, 0.3, &cfg));
        assert_eq!(
            objective_score(&lo, 0.7, 0.3, &cfg),
            objective_score(&lo.clone(), 0.7, 0.3, &cfg)
        );
    }

    #[test]
    fn report_consistency() {
        let cfg = CostModelConfig::default();
        let dev = test_device();
        let r = PerfReport::build(&m3_layer(), 0.9, 0.95, &dev, &cfg).unwrap();
        assert_eq!(r.latency, r.latency_load + r.latency_inference);
        assert_eq!(r.param_intensity, 442_368.0 / 432.0);
        assert_eq!(r.activation_intensity, 442_368.0 / 16_384.0);
        assert!(close(r.energy_proxy, 0.4 * r.param_intensity + 0.6 * r.activation_intensity, 1e-9));
        assert!(close(r.accuracy_loss, 0.05, 1e-12));
        assert_eq!(r.memory_bytes, 432.0 * 4.0);
    }

    #[test]
    fn scaling_counts_keeps_intensities() {
        let cfg = CostModelConfig::default();
        let dev = test_device();
        let base = m3_layer();
        let k = 7u64;
        let scaled = CostBreakdown::from_layers(vec![LayerCost {
            macs: base.macs * k,
            params: base.params * k,
            activations: base.activations * k,
        }]);
        let a = PerfReport::build(&base, 0.9, 0.9, &dev, &cfg).unwrap();
        let b = PerfReport::build(&scaled, 0.9, 0.9, &dev, &cfg).unwrap();
        assert!(close(a.param_intensity, b.param_intensity, 1e-9));
        assert!(close(a.activation_intensity, b.activation_intensity, 1e-9));
        let mac_term = |c: &CostBreakdown| c.macs as f64 * dev.energy_per_mac;
        assert!(close(mac_term(&scaled), k as f64 * mac_term(&base), 1e-18));
    }

    #[test]
    fn config_and_device_validation() {
        assert!(CostModelConfig::default().validate().is_ok());
        let bad = CostModelConfig {
            mu1: 0.5,
            mu2: 0.6,
            norm_epsilon: 1e-6,
        };
        assert!(bad.validate().is_err());
        let mut dev = test_device();
        assert!(dev.validate().is_ok());
        dev.mem_bandwidth = 0.0;
        assert!(dev.validate().is_err());
        for d in [DeviceProfile::smartphone(), DeviceProfile::single_board(), DeviceProfile::robot()] {
            assert!(d.validate().is_ok());
        }
    }
}
