//! Spatio-temporal reach and escape logic: formulas, parsing, property
//! builders and monitors.

mod ast;
pub mod monitor;
mod parser;
pub mod props;

pub use ast::{Direction, Formula};
pub use monitor::{
    boolean_monitor, monitor, monitor_ensemble, quantitative_monitor, Mode, VerificationField, LABEL_ROBUSTNESS,
};
pub use parser::{parse, parse_script, parse_with_labels, NamedFormula};
pub use props::{build_p1, build_p2, build_p3, build_p4, PropertyParams, HOSPITAL};

#[cfg(test)]
pub(crate) use parser::tests::arb_formula;
