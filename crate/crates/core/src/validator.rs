//! Solver-free feasibility checks and profit evaluation for schedules.
//!
//! Nothing here calls into the model builders or the trip generator: times,
//! speeds, burns and balances are recomputed from the raw instance data.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{ContractKind, FuelMode, Instance, Vessel};
use crate::schedule::{CallSite, Leg, PortCall, Schedule, VesselPlan};

/// Volume tolerance in m³ (1e-6 in the models' thousand-m³ units).
pub const VOLUME_TOL: f64 = 1e-3;
/// Time tolerance in hours.
pub const TIME_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Full operating rules: terminals, fuel modes, sailing-time burn.
    Main,
    /// Simplified rules of the node model: midpoint visits, LNG only,
    /// burn charged over the whole gap between visits.
    Appendix,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "main" => Ok(Mode::Main),
            "appendix" => Ok(Mode::Appendix),
            other => Err(format!("unknown validation mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Critical,
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Code {
    Structure,
    StartLocation,
    StartVolume,
    EndLocation,
    PortMismatch,
    OutsideWindow,
    OutsideRent,
    NotMidpoint,
    SpeedNotInTable,
    LateArrival,
    SailHours,
    IdleHours,
    Burn,
    FuelCost,
    CallBalance,
    LegBalance,
    Capacity,
    Sloshing,
    LadenFlag,
    VolumeBounds,
    OverDeliveryAtBuy,
    NegativeQuantity,
    DoubleService,
    DuplicateVessel,
}

impl Code {
    pub fn severity(self) -> Severity {
        use Code::*;
        match self {
            Capacity | Sloshing | CallBalance | LegBalance | LateArrival | DoubleService
            | Structure | DuplicateVessel | NegativeQuantity => Severity::Critical,
            StartLocation | StartVolume | EndLocation | PortMismatch | OutsideWindow
            | OutsideRent | NotMidpoint | SpeedNotInTable | VolumeBounds | OverDeliveryAtBuy
            | Burn => Severity::Major,
            SailHours | IdleHours | FuelCost | LadenFlag => Severity::Minor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: Code,
    pub severity: Severity,
    pub vessel: Option<String>,
    pub contract: Option<String>,
    pub day: Option<u32>,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn has(&self, code: Code) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("schedule references unknown {kind} {id:?}")]
    Dangling { kind: &'static str, id: String },
}

fn dangling(kind: &'static str, id: &str) -> ValidationError {
    ValidationError::Dangling {
        kind,
        id: id.to_string(),
    }
}

/// Checks `schedule` against `instance` under `mode`.
pub fn validate(schedule: &Schedule, instance: &Instance, mode: Mode) -> Result<ViolationReport, ValidationError> {
    let mut ctx = Checker {
        inst: instance,
        mode,
        out: Vec::new(),
    };
    let mut seen_vessels = HashSet::new();
    let mut served: HashMap<&str, usize> = HashMap::new();
    for plan in &schedule.vessels {
        let v = instance
            .vessel_index(&plan.vessel)
            .ok_or_else(|| dangling("vessel", &plan.vessel))?;
        for call in &plan.calls {
            instance
                .port_index(&call.port)
                .ok_or_else(|| dangling("port", &call.port))?;
            if let CallSite::Contract { id } = &call.site {
                instance.contract_index(id).ok_or_else(|| dangling("contract", id))?;
                *served.entry(id.as_str()).or_default() += 1;
            }
        }
        if !seen_vessels.insert(v) {
            ctx.push(Code::DuplicateVessel, Some(&plan.vessel), None, None, 2.0, 1.0);
        }
        ctx.check_plan(v, plan);
    }
    let mut doubles: Vec<(&str, usize)> = served.into_iter().filter(|&(_, n)| n > 1).collect();
    doubles.sort_unstable();
    for (id, n) in doubles {
        ctx.push(Code::DoubleService, None, Some(id), None, n as f64, 1.0);
    }
    let mut violations = ctx.out;
    violations.sort_by_key(|a| a.severity);
    Ok(ViolationReport { violations })
}

struct Checker<'a> {
    inst: &'a Instance,
    mode: Mode,
    out: Vec<Violation>,
}

fn contract_of(call: &PortCall) -> Option<&str> {
    match &call.site {
        CallSite::Contract { id } => Some(id),
        _ => None,
    }
}

impl<'a> Checker<'a> {
    fn push(&mut self, code: Code, vessel: Option<&str>, contract: Option<&str>, day: Option<u32>, measured: f64, bound: f64) {
        self.out.push(Violation {
            code,
            severity: code.severity(),
            vessel: vessel.map(str::to_string),
            contract: contract.map(str::to_string),
            day,
            measured,
            bound,
        });
    }

    fn check_plan(&mut self, v: usize, plan: &VesselPlan) {
        let vessel = self.inst.vessel(v);
        let name = plan.vessel.as_str();
        if plan.calls.is_empty() {
            if !plan.legs.is_empty() {
                self.push(Code::Structure, Some(name), None, None, plan.legs.len() as f64, 0.0);
            }
            return;
        }
        if plan.legs.len() + 1 != plan.calls.len() {
            self.push(Code::Structure, Some(name), None, None, plan.legs.len() as f64, (plan.calls.len() - 1) as f64);
            return;
        }
        self.check_terminals(vessel, plan);
        for call in &plan.calls {
            self.check_call(vessel, call);
        }
        for (i, leg) in plan.legs.iter().enumerate() {
            self.check_leg(vessel, &plan.calls[i], &plan.calls[i + 1], leg);
        }
        if self.mode == Mode::Appendix {
            // The load left after the last operation must also sit in a band.
            let last = plan.calls.last().expect("non-empty");
            self.band(vessel, last.volume_after, contract_of(last), last.day);
        }
    }

    fn check_terminals(&mut self, vessel: &Vessel, plan: &VesselPlan) {
        let name = vessel.id.as_str();
        let first = &plan.calls[0];
        let last = plan.calls.last().expect("non-empty");
        match self.mode {
            Mode::Main => {
                let ok_start = first.site == CallSite::Start
                    && first.port == vessel.initial_port
                    && first.day == vessel.rent_start;
                if !ok_start {
                    self.push(Code::StartLocation, Some(name), None, Some(first.day), f64::from(first.day), f64::from(vessel.rent_start));
                }
                let ok_end = plan.calls.len() >= 2
                    && last.site == CallSite::End
                    && last.port == vessel.final_port
                    && last.day <= vessel.rent_end;
                if !ok_end {
                    self.push(Code::EndLocation, Some(name), None, Some(last.day), f64::from(last.day), f64::from(vessel.rent_end));
                }
                let inner_terminal = plan.calls[1..plan.calls.len() - 1]
                    .iter()
                    .any(|c| contract_of(c).is_none());
                if inner_terminal {
                    self.push(Code::Structure, Some(name), None, None, 1.0, 0.0);
                }
            }
            Mode::Appendix => {
                if plan.calls.iter().any(|c| contract_of(c).is_none()) {
                    self.push(Code::Structure, Some(name), None, None, 1.0, 0.0);
                }
            }
        }
        if (first.volume_before - vessel.initial_volume).abs() > VOLUME_TOL {
            self.push(Code::StartVolume, Some(name), None, Some(first.day), first.volume_before, vessel.initial_volume);
        }
    }

    fn check_call(&mut self, vessel: &Vessel, call: &PortCall) {
        let name = vessel.id.as_str();
        let cid = contract_of(call);
        for q in [call.traded, call.free_purchase, call.over_delivery] {
            if q < -VOLUME_TOL {
                self.push(Code::NegativeQuantity, Some(name), cid, Some(call.day), q, 0.0);
            }
        }
        let sign = match cid {
            None => {
                if call.traded.abs() > VOLUME_TOL || call.over_delivery.abs() > VOLUME_TOL {
                    self.push(Code::Structure, Some(name), None, Some(call.day), call.traded, 0.0);
                }
                0.0
            }
            Some(id) => {
                let c = self.inst.contract(self.inst.contract_index(id).expect("checked"));
                if call.port != c.port {
                    self.push(Code::PortMismatch, Some(name), cid, Some(call.day), 0.0, 0.0);
                }
                if call.day < c.release || call.day > c.deadline {
                    self.push(Code::OutsideWindow, Some(name), cid, Some(call.day), f64::from(call.day), f64::from(c.deadline));
                }
                if self.mode == Mode::Appendix {
                    let mid = c.release + (c.deadline - c.release) / 2;
                    if call.day != mid {
                        self.push(Code::NotMidpoint, Some(name), cid, Some(call.day), f64::from(call.day), f64::from(mid));
                    }
                }
                if call.traded < c.v_min - VOLUME_TOL || call.traded > c.v_max + VOLUME_TOL {
                    self.push(Code::VolumeBounds, Some(name), cid, Some(call.day), call.traded, c.v_max);
                }
                match c.kind {
                    ContractKind::Buy => {
                        if call.over_delivery > VOLUME_TOL {
                            self.push(Code::OverDeliveryAtBuy, Some(name), cid, Some(call.day), call.over_delivery, 0.0);
                        }
                        1.0
                    }
                    ContractKind::Sell => -1.0,
                }
            }
        };
        if self.mode == Mode::Main && (call.day < vessel.rent_start || call.day > vessel.rent_end) {
            self.push(Code::OutsideRent, Some(name), cid, Some(call.day), f64::from(call.day), f64::from(vessel.rent_end));
        }
        let expect = call.volume_before + sign * call.traded + call.free_purchase - call.over_delivery;
        if (call.volume_after - expect).abs() > VOLUME_TOL {
            self.push(Code::CallBalance, Some(name), cid, Some(call.day), call.volume_after, expect);
        }
        let cap = match self.mode {
            Mode::Main => vessel.fill_fraction * vessel.capacity,
            Mode::Appendix => vessel.capacity,
        };
        for vol in [call.volume_before, call.volume_after] {
            if vol < -VOLUME_TOL || vol > cap + VOLUME_TOL {
                self.push(Code::Capacity, Some(name), cid, Some(call.day), vol, cap);
            }
        }
    }

    /// Band membership of a single volume, as used by the node model.
    fn band(&mut self, vessel: &Vessel, vol: f64, cid: Option<&str>, day: u32) {
        let low = vessel.forbidden_zone.0 * vessel.capacity;
        let high = vessel.forbidden_zone.1 * vessel.capacity;
        let top = vessel.fill_fraction * vessel.capacity;
        let in_low = vol >= -VOLUME_TOL && vol <= low + VOLUME_TOL;
        let in_high = vol >= high - VOLUME_TOL && vol <= top + VOLUME_TOL;
        if !in_low && !in_high {
            self.push(Code::Sloshing, Some(&vessel.id), cid, Some(day), vol, low);
        }
    }

    fn table_row(&self, vessel: &Vessel, mode: FuelMode, laden: bool, speed: f64) -> Option<(f64, f64, f64)> {
        vessel
            .consumption_table
            .iter()
            .find(|r| r.fuel_mode == mode && r.laden == laden && r.speed == speed)
            .map(|r| (r.consumption, r.boil_off, r.fuel_cost_rate))
    }

    fn check_leg(&mut self, vessel: &Vessel, a: &PortCall, b: &PortCall, leg: &Leg) {
        match self.mode {
            Mode::Main => self.check_main_leg(vessel, a, b, leg),
            Mode::Appendix => self.check_appendix_leg(vessel, a, b, leg),
        }
    }

    fn check_main_leg(&mut self, vessel: &Vessel, a: &PortCall, b: &PortCall, leg: &Leg) {
        let name = vessel.id.as_str();
        let cid = contract_of(b);
        let pa = self.inst.port_index(&a.port).expect("checked");
        let pb = self.inst.port_index(&b.port).expect("checked");
        let dist = self.inst.distance(pa, pb);
        let depart = if a.site == CallSite::Start {
            24.0 * f64::from(a.day)
        } else {
            24.0 * f64::from(a.day + 1)
        };
        let (deadline, close) = if b.site == CallSite::End {
            let t = 24.0 * f64::from(b.day + 1);
            (t, None)
        } else {
            (24.0 * f64::from(b.day), Some(24.0 * f64::from(b.day + 1)))
        };
        let Some((cons, boil, rate)) = self.table_row(vessel, leg.fuel_mode, leg.laden, leg.speed) else {
            self.push(Code::SpeedNotInTable, Some(name), cid, Some(b.day), leg.speed, 0.0);
            return;
        };
        let sail = if dist > 0.0 { dist / leg.speed } else { 0.0 };
        if depart + sail > deadline + TIME_TOL {
            self.push(Code::LateArrival, Some(name), cid, Some(b.day), depart + sail, deadline);
        }
        if (leg.sail_hours - sail).abs() > TIME_TOL * sail.max(1.0) {
            self.push(Code::SailHours, Some(name), cid, Some(b.day), leg.sail_hours, sail);
        }
        let idle = close.map_or(0.0, |c| (c - depart - sail).max(0.0));
        if (leg.idle_hours - idle).abs() > TIME_TOL * idle.max(1.0) {
            self.push(Code::IdleHours, Some(name), cid, Some(b.day), leg.idle_hours, idle);
        }
        let lng_rate = if leg.fuel_mode == FuelMode::FuelOnly { boil } else { cons + boil };
        let burn = sail * lng_rate + idle * vessel.idle_boil_off / 24.0;
        if (leg.lng_burn - burn).abs() > VOLUME_TOL {
            self.push(Code::Burn, Some(name), cid, Some(b.day), leg.lng_burn, burn);
        }
        let fuel = if leg.fuel_mode == FuelMode::LngOnly { 0.0 } else { sail * rate };
        if (leg.fuel_cost - fuel).abs() > 1e-6 * fuel.abs().max(1.0) {
            self.push(Code::FuelCost, Some(name), cid, Some(b.day), leg.fuel_cost, fuel);
        }
        self.segment(vessel, a, b, burn, Some(leg.laden));
    }

    fn check_appendix_leg(&mut self, vessel: &Vessel, a: &PortCall, b: &PortCall, leg: &Leg) {
        let name = vessel.id.as_str();
        let cid = contract_of(b);
        let pa = self.inst.port_index(&a.port).expect("checked");
        let pb = self.inst.port_index(&b.port).expect("checked");
        let dist = self.inst.distance(pa, pb);
        let gap = i64::from(b.day) - i64::from(a.day) - 1;
        let Some((cons, boil, _)) = self.table_row(vessel, FuelMode::LngOnly, true, leg.speed) else {
            self.push(Code::SpeedNotInTable, Some(name), cid, Some(b.day), leg.speed, 0.0);
            return;
        };
        if gap < 0 || (dist > 0.0 && leg.speed * 24.0 * (gap as f64) < dist * (1.0 - 1e-12)) {
            self.push(Code::LateArrival, Some(name), cid, Some(b.day), gap as f64, 0.0);
            return;
        }
        let burn = 24.0 * (cons + boil) * gap as f64 + vessel.idle_boil_off;
        if (leg.lng_burn - burn).abs() > VOLUME_TOL {
            self.push(Code::Burn, Some(name), cid, Some(b.day), leg.lng_burn, burn);
        }
        if leg.fuel_cost.abs() > 1e-9 {
            self.push(Code::FuelCost, Some(name), cid, Some(b.day), leg.fuel_cost, 0.0);
        }
        if ((a.volume_after - burn) - b.volume_before).abs() > VOLUME_TOL {
            self.push(Code::LegBalance, Some(name), cid, Some(b.day), b.volume_before, a.volume_after - burn);
        }
        self.band(vessel, b.volume_before, cid, b.day);
    }

    /// Balance across a sailing segment and the band rule on both ends.
    fn segment(&mut self, vessel: &Vessel, a: &PortCall, b: &PortCall, burn: f64, laden: Option<bool>) {
        let name = vessel.id.as_str();
        let cid = contract_of(b);
        let arrive = a.volume_after - burn;
        if (arrive - b.volume_before).abs() > VOLUME_TOL {
            self.push(Code::LegBalance, Some(name), cid, Some(b.day), b.volume_before, arrive);
        }
        let low = vessel.forbidden_zone.0 * vessel.capacity;
        let high = vessel.forbidden_zone.1 * vessel.capacity;
        let top = vessel.fill_fraction * vessel.capacity;
        let side = |x: f64| {
            if x >= -VOLUME_TOL && x <= low + VOLUME_TOL {
                Some(false)
            } else if x >= high - VOLUME_TOL && x <= top + VOLUME_TOL {
                Some(true)
            } else {
                None
            }
        };
        match (side(a.volume_after), side(b.volume_before)) {
            (Some(x), Some(y)) if x == y => {
                if laden.is_some_and(|l| l != x) {
                    self.push(Code::LadenFlag, Some(name), cid, Some(b.day), f64::from(u8::from(x)), 0.0);
                }
            }
            _ => {
                let worst = if side(a.volume_after).is_none() { a.volume_after } else { b.volume_before };
                self.push(Code::Sloshing, Some(name), cid, Some(b.day), worst, low);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfitBreakdown {
    pub revenue: f64,
    pub purchase_cost: f64,
    pub fuel_cost: f64,
    pub free_lng_cost: f64,
    pub over_delivery_volume: f64,
    pub net: f64,
}

impl std::ops::Add for ProfitBreakdown {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            revenue: self.revenue + o.revenue,
            purchase_cost: self.purchase_cost + o.purchase_cost,
            fuel_cost: self.fuel_cost + o.fuel_cost,
            free_lng_cost: self.free_lng_cost + o.free_lng_cost,
            over_delivery_volume: self.over_delivery_volume + o.over_delivery_volume,
            net: self.net + o.net,
        }
    }
}

/// Money flows of a schedule, recomputed from prices and the consumption
/// table. Over-delivered LNG earns nothing.
pub fn evaluate_profit(schedule: &Schedule, instance: &Instance) -> Result<ProfitBreakdown, ValidationError> {
    let mut total = ProfitBreakdown::default();
    for plan in &schedule.vessels {
        total = total + plan_profit(plan, instance)?;
    }
    Ok(total)
}

/// Money flows of one vessel's plan.
pub fn plan_profit(plan: &VesselPlan, instance: &Instance) -> Result<ProfitBreakdown, ValidationError> {
    let v = instance
        .vessel_index(&plan.vessel)
        .ok_or_else(|| dangling("vessel", &plan.vessel))?;
    let vessel = instance.vessel(v);
    let mut p = ProfitBreakdown::default();
    for call in &plan.calls {
        let port = instance.port_index(&call.port).ok_or_else(|| dangling("port", &call.port))?;
        if let CallSite::Contract { id } = &call.site {
            let c = instance.contract(instance.contract_index(id).ok_or_else(|| dangling("contract", id))?);
            let price = c.price_on(call.day).unwrap_or(0.0);
            match c.kind {
                ContractKind::Buy => p.purchase_cost += price * call.traded,
                ContractKind::Sell => p.revenue += price * call.traded,
            }
        }
        p.free_lng_cost += instance.free_price(port, call.day.min(instance.horizon_days() - 1)) * call.free_purchase;
        p.over_delivery_volume += call.over_delivery;
    }
    for (i, leg) in plan.legs.iter().enumerate() {
        if leg.fuel_mode == FuelMode::LngOnly {
            continue;
        }
        let (a, b) = (&plan.calls[i], &plan.calls[i + 1]);
        let pa = instance.port_index(&a.port).ok_or_else(|| dangling("port", &a.port))?;
        let pb = instance.port_index(&b.port).ok_or_else(|| dangling("port", &b.port))?;
        let dist = instance.distance(pa, pb);
        let sail = if dist > 0.0 { dist / leg.speed } else { 0.0 };
        let rate = vessel
            .consumption_table
            .iter()
            .find(|r| r.fuel_mode == leg.fuel_mode && r.laden == leg.laden && r.speed == leg.speed)
            .map(|r| r.fuel_cost_rate);
        p.fuel_cost += match rate {
            Some(r) => sail * r,
            None => leg.fuel_cost,
        };
    }
    p.net = p.revenue - p.purchase_cost - p.fuel_cost - p.free_lng_cost;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures;

    /// Hand-built plan for the minimal fixture: start at A on day 0, buy b1
    /// at A on day 2, sail 3000 nm to B at 16 kn, sell s1 on day 20, return
    /// to A by the end of day 59.
    pub(crate) fn golden() -> (Instance, Schedule) {
        let inst = Instance::new(fixtures::minimal()).unwrap();
        let v = inst.vessel(0).clone();
        let idle_rate = v.idle_boil_off / 24.0;
        // Initial leg: no distance, idle from hour 0 to the end of day 2.
        let burn0 = 72.0 * idle_rate;
        let at_buy = v.initial_volume - burn0;
        let topup = 20_000.0 - at_buy;
        let load = 140_000.0;
        let after_buy = at_buy + topup + load;
        let sail = 3000.0 / 16.0;
        let idle1 = 24.0 * 18.0 - sail;
        let burn1 = sail * (5.73e-6 + 6.78e-6) + idle1 * idle_rate;
        let at_sell = after_buy - burn1;
        let sold = 150_000.0f64.min(at_sell - 15_000.0);
        let after_sell = at_sell - sold;
        let burn2 = sail * (5.73e-6 + 6.78e-6);
        let call = |site: CallSite, port: &str, day: u32, before: f64, traded: f64, free: f64, after: f64| PortCall {
            site,
            port: port.into(),
            day,
            volume_before: before,
            traded,
            free_purchase: free,
            over_delivery: 0.0,
            volume_after: after,
        };
        let leg = |laden: bool, sail_hours: f64, idle_hours: f64, lng_burn: f64| Leg {
            fuel_mode: FuelMode::LngOnly,
            speed: 16.0,
            laden,
            sail_hours,
            idle_hours,
            lng_burn,
            fuel_cost: 0.0,
        };
        let plan = VesselPlan {
            vessel: "Seal".into(),
            calls: vec![
                call(CallSite::Start, "A", 0, v.initial_volume, 0.0, 0.0, v.initial_volume),
                call(CallSite::Contract { id: "b1".into() }, "A", 2, at_buy, load, topup, after_buy),
                call(CallSite::Contract { id: "s1".into() }, "B", 20, at_sell, sold, 0.0, after_sell),
                call(CallSite::End, "A", 59, after_sell - burn2, 0.0, 0.0, after_sell - burn2),
            ],
            legs: vec![leg(false, 0.0, 72.0, burn0), leg(true, sail, idle1, burn1), leg(false, sail, 0.0, burn2)],
        };
        let s = Schedule {
            provenance: "hand".into(),
            vessels: vec![plan],
            penalty: 0.0,
        };
        (inst, s)
    }

    #[test]
    fn golden_schedule_is_clean() {
        let (inst, s) = golden();
        let r = validate(&s, &inst, Mode::Main).unwrap();
        assert!(r.is_empty(), "{}", r.to_json());
    }

    #[test]
    fn golden_profit_by_hand() {
        let (inst, s) = golden();
        let p = evaluate_profit(&s, &inst).unwrap();
        let calls = &s.vessels[0].calls;
        let expect_rev = 500.0 * calls[2].traded;
        let expect_buy = 200.0 * 140_000.0;
        let expect_free = 200.0 * calls[1].free_purchase;
        assert_eq!(p.revenue, expect_rev);
        assert_eq!(p.purchase_cost, expect_buy);
        assert_eq!(p.free_lng_cost, expect_free);
        assert_eq!(p.fuel_cost, 0.0);
        assert_eq!(p.net, expect_rev - expect_buy - expect_free);
    }

    #[test]
    fn empty_schedule_is_zero() {
        let inst = Instance::new(fixtures::minimal()).unwrap();
        let s = Schedule::empty("none");
        assert_eq!(evaluate_profit(&s, &inst).unwrap(), ProfitBreakdown::default());
        assert!(validate(&s, &inst, Mode::Main).unwrap().is_empty());
    }

    #[test]
    fn half_full_at_sea_is_sloshing() {
        let (inst, mut s) = golden();
        let burn = s.vessels[0].legs[2].lng_burn;
        let calls = &mut s.vessels[0].calls;
        // Sell only part: the vessel leaves B half full.
        calls[2].traded = calls[2].volume_before - 0.5 * 170_000.0;
        calls[2].volume_after = 0.5 * 170_000.0;
        calls[3].volume_before = 0.5 * 170_000.0 - burn;
        calls[3].volume_after = calls[3].volume_before;
        let r = validate(&s, &inst, Mode::Main).unwrap();
        assert!(r.has(Code::Sloshing), "{}", r.to_json());
    }

    #[test]
    fn double_service_is_reported() {
        let (inst, mut s) = golden();
        let mut twin = s.vessels[0].clone();
        twin.vessel = "Seal".into();
        s.vessels.push(twin);
        let r = validate(&s, &inst, Mode::Main).unwrap();
        assert!(r.has(Code::DoubleService));
        assert!(r.has(Code::DuplicateVessel));
    }

    #[test]
    fn dangling_contract_is_an_error() {
        let (inst, mut s) = golden();
        s.vessels[0].calls[1].site = CallSite::Contract { id: "nope".into() };
        assert_eq!(
            validate(&s, &inst, Mode::Main),
            Err(ValidationError::Dangling { kind: "contract", id: "nope".into() })
        );
    }

    #[test]
    fn too_slow_and_wrong_burn_are_caught() {
        let (inst, mut s) = golden();
        s.vessels[0].calls[2].day = 8;
        let r = validate(&s, &inst, Mode::Main).unwrap();
        assert!(r.has(Code::LateArrival) || r.has(Code::OutsideWindow));
        let (inst, mut s) = golden();
        s.vessels[0].legs[1].lng_burn += 1.0;
        let r = validate(&s, &inst, Mode::Main).unwrap();
        assert!(r.has(Code::Burn));
    }

    #[test]
    fn severity_orders_report() {
        let (inst, mut s) = golden();
        s.vessels[0].legs[1].sail_hours += 1.0;
        s.vessels[0].calls[2].traded += 10.0;
        let r = validate(&s, &inst, Mode::Main).unwrap();
        let sev: Vec<Severity> = r.violations.iter().map(|v| v.severity).collect();
        let mut sorted = sev.clone();
        sorted.sort();
        assert_eq!(sev, sorted);
        assert_eq!(sev[0], Severity::Critical);
    }

    #[test]
    fn profit_is_additive_over_vessels() {
        let (inst, s) = golden();
        let whole = evaluate_profit(&s, &inst).unwrap();
        let part = plan_profit(&s.vessels[0], &inst).unwrap();
        assert_eq!(whole, part);
    }
}
