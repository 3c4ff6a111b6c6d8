use std::fmt;

/// Comparison direction of a signal atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Greater,
    Less,
}

/// STREL formula over a single real signal `y` and static location labels.
///
/// Temporal bounds are integer steps relative to the evaluation time; spatial
/// bounds are hop counts.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Compare { direction: Direction, threshold: f64 },
    Label(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Eventually { lo: usize, hi: usize, body: Box<Formula> },
    Always { lo: usize, hi: usize, body: Box<Formula> },
    Reach { left: Box<Formula>, max_hops: usize, right: Box<Formula> },
    Escape { min_hops: usize, max_hops: usize, body: Box<Formula> },
    Somewhere { max_hops: usize, body: Box<Formula> },
}

impl Formula {
    pub fn gt(threshold: f64) -> Formula {
        Formula::Compare { direction: Direction::Greater, threshold }
    }

    pub fn lt(threshold: f64) -> Formula {
        Formula::Compare { direction: Direction::Less, threshold }
    }

    pub fn label(name: &str) -> Formula {
        Formula::Label(name.to_string())
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn eventually(lo: usize, hi: usize, body: Formula) -> Formula {
        Formula::Eventually { lo, hi, body: Box::new(body) }
    }

    pub fn always(lo: usize, hi: usize, body: Formula) -> Formula {
        Formula::Always { lo, hi, body: Box::new(body) }
    }

    pub fn reach(left: Formula, max_hops: usize, right: Formula) -> Formula {
        Formula::Reach { left: Box::new(left), max_hops, right: Box::new(right) }
    }

    pub fn escape(min_hops: usize, max_hops: usize, body: Formula) -> Formula {
        Formula::Escape { min_hops, max_hops, body: Box::new(body) }
    }

    pub fn somewhere(max_hops: usize, body: Formula) -> Formula {
        Formula::Somewhere { max_hops, body: Box::new(body) }
    }

    /// Number of future steps needed to evaluate the formula at one time:
    /// the largest cumulative upper temporal bound along any path.
    pub fn temporal_depth(&self) -> usize {
        use Formula::*;
        match self {
            True | Compare { .. } | Label(_) => 0,
            Not(f) | Escape { body: f, .. } | Somewhere { body: f, .. } => f.temporal_depth(),
            And(a, b) | Or(a, b) | Implies(a, b) | Reach { left: a, right: b, .. } => {
                a.temporal_depth().max(b.temporal_depth())
            }
            Eventually { hi, body, .. } | Always { hi, body, .. } => hi + body.temporal_depth(),
        }
    }

    /// Checks interval and threshold well-formedness.
    pub fn validate(&self) -> Result<(), String> {
        use Formula::*;
        match self {
            True | Label(_) => Ok(()),
            Compare { threshold, .. } => {
                if threshold.is_finite() {
                    Ok(())
                } else {
                    Err(format!("threshold {threshold} is not finite"))
                }
            }
            Not(f) | Somewhere { body: f, .. } => f.validate(),
            Escape { min_hops, max_hops, body } => {
                if min_hops > max_hops {
                    return Err(format!("escape interval [{min_hops},{max_hops}] is empty"));
                }
                body.validate()
            }
            And(a, b) | Or(a, b) | Implies(a, b) | Reach { left: a, right: b, .. } => {
                a.validate()?;
                b.validate()
            }
            Eventually { lo, hi, body } | Always { lo, hi, body } => {
                if lo > hi {
                    return Err(format!("temporal interval [{lo},{hi}] is empty"));
                }
                body.validate()
            }
        }
    }

    /// Label names referenced anywhere in the formula.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Label(name) = f {
                out.push(name.as_str());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        use Formula::*;
        f(self);
        match self {
            True | Compare { .. } | Label(_) => {}
            Not(a) | Eventually { body: a, .. } | Always { body: a, .. } | Escape { body: a, .. } | Somewhere { body: a, .. } => {
                a.visit(f)
            }
            And(a, b) | Or(a, b) | Implies(a, b) | Reach { left: a, right: b, .. } => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Formula::True | Formula::Compare { .. } | Formula::Label(_))
    }

    /// True when only core grammar nodes occur (no Or, Implies, Somewhere).
    pub fn is_core(&self) -> bool {
        let mut core = true;
        self.visit(&mut |f| {
            if matches!(f, Formula::Or(..) | Formula::Implies(..) | Formula::Somewhere { .. }) {
                core = false;
            }
        });
        core
    }

    /// Rewrites derived operators into the core grammar:
    /// `somewhere[d] p` to `true reach[d] p`, `a -> b` to `!a | b`, and
    /// `a | b` to `!(!a & !b)`.
    pub fn expand_derived(&self) -> Formula {
        use Formula::*;
        match self {
            True | Compare { .. } | Label(_) => self.clone(),
            Not(f) => Formula::not(f.expand_derived()),
            And(a, b) => Formula::and(a.expand_derived(), b.expand_derived()),
            Or(a, b) => Formula::not(Formula::and(
                Formula::not(a.expand_derived()),
                Formula::not(b.expand_derived()),
            )),
            Implies(a, b) => Formula::or(Formula::not((**a).clone()), (**b).clone()).expand_derived(),
            Eventually { lo, hi, body } => Formula::eventually(*lo, *hi, body.expand_derived()),
            Always { lo, hi, body } => Formula::always(*lo, *hi, body.expand_derived()),
            Reach { left, max_hops, right } => {
                Formula::reach(left.expand_derived(), *max_hops, right.expand_derived())
            }
            Escape { min_hops, max_hops, body } => Formula::escape(*min_hops, *max_hops, body.expand_derived()),
            Somewhere { max_hops, body } => Formula::reach(True, *max_hops, body.expand_derived()),
        }
    }
}

struct Operand<'a>(&'a Formula);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_atomic() || matches!(self.0, Formula::Not(_)) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "({})", self.0)
        }
    }
}

/// Concrete syntax accepted by [`crate::strel::parse`]. Compound operands are
/// always parenthesized.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        match self {
            True => write!(f, "true"),
            Compare { direction: Direction::Greater, threshold } => write!(f, "y > {threshold}"),
            Compare { direction: Direction::Less, threshold } => write!(f, "y < {threshold}"),
            Label(name) => write!(f, "label({name})"),
            Not(a) => write!(f, "!({a})"),
            And(a, b) => write!(f, "{} & {}", Operand(a), Operand(b)),
            Or(a, b) => write!(f, "{} | {}", Operand(a), Operand(b)),
            Implies(a, b) => write!(f, "{} -> {}", Operand(a), Operand(b)),
            Eventually { lo, hi, body } => write!(f, "F[{lo},{hi}] {}", Operand(body)),
            Always { lo, hi, body } => write!(f, "G[{lo},{hi}] {}", Operand(body)),
            Reach { left, max_hops, right } => write!(f, "{} reach[{max_hops}] {}", Operand(left), Operand(right)),
            Escape { min_hops, max_hops, body } => write!(f, "escape[{min_hops},{max_hops}] {}", Operand(body)),
            Somewhere { max_hops, body } => write!(f, "somewhere[{max_hops}] {}", Operand(body)),
        }
    }
}
