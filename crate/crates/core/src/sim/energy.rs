//! Charge accounting per radio state.
//!
//! Durations come from the session's symbol clock: 62.5 ksymbol/s, so one
//! symbol lasts 16 us. Charge is current times time in state.

use std::collections::BTreeMap;

use super::log::{EventLog, NodeId, RadioState};
use super::SimError;

pub const SYMBOL_PERIOD_US: u64 = 16;
pub const SYMBOLS_PER_SECOND: u64 = 1_000_000 / SYMBOL_PERIOD_US;

pub fn symbols_to_seconds(symbols: u64) -> f64 {
    symbols as f64 / SYMBOLS_PER_SECOND as f64
}

/// Supply current drawn in each radio state. The defaults are typical of a
/// 2.4 GHz transceiver and only meant as a starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pub tx_ma: f64,
    pub rx_ma: f64,
    pub cca_ma: f64,
    pub idle_ma: f64,
    pub supply_voltage: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { tx_ma: 17.4, rx_ma: 19.7, cca_ma: 19.7, idle_ma: 0.02, supply_voltage: 3.0 }
    }
}

impl EnergyModel {
    pub fn current_ma(&self, state: RadioState) -> f64 {
        match state {
            RadioState::Tx => self.tx_ma,
            RadioState::Rx => self.rx_ma,
            RadioState::Cca => self.cca_ma,
            RadioState::Idle => self.idle_ma,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            tx_ma: self.tx_ma * factor,
            rx_ma: self.rx_ma * factor,
            cca_ma: self.cca_ma * factor,
            idle_ma: self.idle_ma * factor,
            supply_voltage: self.supply_voltage,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("tx_ma", self.tx_ma),
            ("rx_ma", self.rx_ma),
            ("cca_ma", self.cca_ma),
            ("idle_ma", self.idle_ma),
            ("supply_voltage", self.supply_voltage),
        ];
        for (key, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::Config { key: key.into(), reason: format!("{v} is not a non-negative number") });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StateUsage {
    pub symbols: u64,
    pub seconds: f64,
    /// Microcoulombs.
    pub charge_uc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    /// Indexed by [`RadioState::index`].
    pub states: [StateUsage; 4],
    pub span_symbols: u64,
    pub total_charge_uc: f64,
    pub total_energy_uj: f64,
}

impl EnergyLedger {
    pub fn state(&self, state: RadioState) -> &StateUsage {
        &self.states[state.index()]
    }

    /// Ledger for `symbols` symbols spent in each listed state.
    pub fn from_durations(durations: &[(RadioState, u64)], model: &EnergyModel) -> Self {
        let mut ledger = Self::default();
        for &(state, symbols) in durations {
            ledger.states[state.index()].symbols += symbols;
            ledger.span_symbols += symbols;
        }
        for state in RadioState::ALL {
            let usage = &mut ledger.states[state.index()];
            usage.seconds = symbols_to_seconds(usage.symbols);
            // mA * s = mC
            usage.charge_uc = model.current_ma(state) * usage.seconds * 1000.0;
            ledger.total_charge_uc += usage.charge_uc;
        }
        ledger.total_energy_uj = ledger.total_charge_uc * model.supply_voltage;
        ledger
    }
}

/// Integrates each node's state timeline up to the log's `END` event.
/// A node is IDLE until its first state event.
pub fn account_energy(log: &EventLog, model: &EnergyModel) -> BTreeMap<NodeId, EnergyLedger> {
    let end = log.end_time().unwrap_or_else(|| log.events().iter().map(|e| e.time).max().unwrap_or(0));
    NodeId::ALL
        .into_iter()
        .map(|node| {
            let mut durations = Vec::new();
            let mut current = (0u64, RadioState::Idle);
            for (t, s) in log.states(node) {
                let t = t.min(end);
                durations.push((current.1, t - current.0));
                current = (t, s);
            }
            durations.push((current.1, end - current.0));
            (node, EnergyLedger::from_durations(&durations, model))
        })
        .collect()
}
