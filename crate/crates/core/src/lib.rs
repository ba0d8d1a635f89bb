//! Software product lines described by a feature model, a statechart with
//! optional states and transitions, and a mapping between the two; and the
//! rewriting that turns one configuration of such a line into a concrete
//! statechart.

pub mod binding;
pub mod dataset;
pub mod dot;
pub mod feature_model;
pub mod fuzz;
pub mod generate;
pub mod io;
pub mod model;
pub mod rewrite;
pub mod strategy;

pub use binding::{nsc, validate_imp, ImpMapping};
pub use dot::export_dot;
pub use feature_model::{kernel, nsf, validate_configuration, validate_feature_model, Configuration, FeatureModel};
pub use model::{canonicalize, check_well_formed_star, var_elems, State, StateChartStar, Transition};
pub use strategy::{check_confluence, instantiate, InstantiateError, Instantiation, RewriteTrace};
