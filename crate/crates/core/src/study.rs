//! A solved case: power flow, dynamic initialization and per-stage R.

use crate::analytic::{solve_analytic, AnalyticSolution};
use crate::case::{FaultScenario, SystemCase};
use crate::error::Result;
use crate::network::{build_stage, compute_r, Projection, RMatrix, StageTag};
use crate::powerflow::{init_dynamics, solve_power_flow, DynamicInit, PowerFlowSolution};
use crate::simulate::{run, SimOptions, Trajectory};

#[derive(Clone, Debug)]
pub struct Study {
    pub case: SystemCase,
    pub init: DynamicInit,
    pub projection: Projection,
}

impl Study {
    pub fn new(case: SystemCase) -> Result<Self> {
        case.validate()?;
        let pf = solve_power_flow(&case)?;
        let init = init_dynamics(&case, &pf)?;
        Ok(Self {
            case,
            init,
            projection: Projection::default(),
        })
    }

    pub fn power_flow(&self) -> &PowerFlowSolution {
        &self.init.pf
    }

    /// Flux-to-voltage matrix of one stage, devices at their pre-fault angles.
    pub fn r_matrix(&self, scenario: Option<&FaultScenario>, tag: StageTag) -> Result<RMatrix> {
        if let Some(s) = scenario {
            s.validate(&self.case)?;
        }
        let stage = build_stage(&self.case, scenario, tag, &self.init.loads)?;
        let devices = self.init.network_devices();
        let w = vec![1.0; devices.len()];
        compute_r(&stage, &devices, &w, &self.init.pf.voltages(), self.projection)
    }

    pub fn analytic(&self, scenario: &FaultScenario) -> Result<AnalyticSolution> {
        let flt = self.r_matrix(Some(scenario), StageTag::Flt)?;
        let clr = self.r_matrix(Some(scenario), StageTag::Clr)?;
        solve_analytic(&self.init, scenario, &flt, &clr)
    }

    pub fn simulate(&self, scenario: Option<&FaultScenario>, opts: &SimOptions) -> Result<Trajectory> {
        run(&self.case, &self.init, scenario, opts)
    }
}
