#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyUse {
    Tx,
    Rx,
    Idle,
}

/// Result of one debit: the amount actually removed (after clamping at zero)
/// and whether this debit was the one that emptied the battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Debit {
    pub amount: f64,
    pub died: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBudget {
    pub residual: f64,
    pub tx_cost_per_bit: f64,
    pub rx_cost_per_bit: f64,
    pub idle_drain: f64,
    depleted: bool,
}

impl EnergyBudget {
    pub fn new(residual: f64, tx_cost_per_bit: f64, rx_cost_per_bit: f64, idle_drain: f64) -> Self {
        Self {
            residual: residual.max(0.0),
            tx_cost_per_bit,
            rx_cost_per_bit,
            idle_drain,
            depleted: residual <= 0.0,
        }
    }

    pub fn is_depleted(&self) -> bool {
        self.depleted
    }

    pub fn cost(&self, kind: EnergyUse, bits: u64, dt: f64) -> f64 {
        match kind {
            EnergyUse::Tx => bits as f64 * self.tx_cost_per_bit,
            EnergyUse::Rx => bits as f64 * self.rx_cost_per_bit,
            EnergyUse::Idle => dt.max(0.0) * self.idle_drain,
        }
    }

    /// Removes the cost of one activity. The residual floors at zero and the
    /// death flag is raised only on the first crossing.
    pub fn debit(&mut self, kind: EnergyUse, bits: u64, dt: f64) -> Debit {
        let want = self.cost(kind, bits, dt);
        let amount = want.min(self.residual);
        self.residual -= amount;
        let died = !self.depleted && self.residual <= 0.0 && want > 0.0;
        if died {
            self.residual = 0.0;
            self.depleted = true;
        }
        Debit { amount, died }
    }

    /// Participation gate: a node may transmit while `residual >= threshold`.
    pub fn eligible(&self, threshold: f64) -> bool {
        !self.depleted && self.residual >= threshold
    }
}
