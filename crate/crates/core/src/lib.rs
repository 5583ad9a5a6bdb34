//! Simulation and planning of inbound traffic engineering for stub ASes.

pub mod community;
pub mod engine;
pub mod flow;
pub mod planner;
pub mod policy;
pub mod prefix;
pub mod route;
pub mod scenario;
pub mod topology;

pub use community::{parse_community, Community, CommunityError};
pub use engine::{
    propagate_to_convergence, Announcement, ConfigError, ConvergedState, LinkAdvert, PrefixRib,
    SimError, Simulator, TeConfig,
};
pub use flow::{
    classify, diff_ingress, ingress_map, resolve_forwarding, Flow, FlowClass, FlowError, Ingress,
    IngressChange, IngressMap,
};
pub use planner::{
    apply_actions, common_upstream_check, evaluate_plan, plan_inbound_te, validate_actions, Action,
    Budget, Evaluation, InfeasibilityWitness, Objective, Pivot, Plan, PlanError, PlanOutcome,
};
pub use policy::{egress_apply, ingress_transform, AnnotatedRoute, PeerSelector, PolicyCatalog};
pub use prefix::{Asn, Prefix};
pub use route::{compare_routes, export_permitted, select_best, Preference, Route};
pub use scenario::{parse_scenario, parse_topology, ParseError, Scenario};
pub use topology::{
    validate_topology, AsRole, InterdomainLink, LinkId, NeighborKind, Relationship, Topology,
    ValidationReport,
};
