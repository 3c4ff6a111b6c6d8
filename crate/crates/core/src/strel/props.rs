//! Builders for the four crowdedness requirements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ast::Formula;

/// Label name used by [`build_p4`].
pub const HOSPITAL: &str = "hospital";

fn check_threshold(c: f64) -> Result<()> {
    if !c.is_finite() {
        return Err(Error::invalid(format!("threshold {c} is not finite")));
    }
    Ok(())
}

fn check_steps(h: usize) -> Result<()> {
    if h < 1 {
        return Err(Error::invalid("time bound must be at least one step"));
    }
    Ok(())
}

/// Overloads are temporary: `(y > c) -> F[1,h] !(y > c)`.
pub fn build_p1(c: f64, h: usize) -> Result<Formula> {
    check_threshold(c)?;
    check_steps(h)?;
    Ok(Formula::implies(
        Formula::gt(c),
        Formula::eventually(1, h, Formula::not(Formula::gt(c))),
    ))
}

/// Overloads are local: `F[h,h] ((y > c) -> somewhere[d] !(y > c))`.
pub fn build_p2(c: f64, h: usize, d: usize) -> Result<Formula> {
    check_threshold(c)?;
    check_steps(h)?;
    Ok(Formula::eventually(
        h,
        h,
        Formula::implies(Formula::gt(c), Formula::somewhere(d, Formula::not(Formula::gt(c)))),
    ))
}

/// Fault tolerance: `G[1,h] somewhere[d] !(y > c)`.
pub fn build_p3(c: f64, h: usize, d: usize) -> Result<Formula> {
    check_threshold(c)?;
    check_steps(h)?;
    Ok(Formula::always(1, h, Formula::somewhere(d, Formula::not(Formula::gt(c)))))
}

/// Uncrowded reachability of a hospital within `d` one-hop moves, one move
/// per step, staying uncrowded over each step's interval.
///
/// Unrolls `phi(i, 0) = hospital` and
/// `phi(i, n) = hospital | (G[i,i+1] !(y > c) & somewhere[1] phi(i+1, n-1))`,
/// returning `phi(0, d)`. The result needs a horizon of `d` steps.
pub fn build_p4(c: f64, d: usize) -> Result<Formula> {
    check_threshold(c)?;
    fn level(c: f64, i: usize, n: usize) -> Formula {
        if n == 0 {
            return Formula::label(HOSPITAL);
        }
        Formula::or(
            Formula::label(HOSPITAL),
            Formula::and(
                Formula::always(i, i + 1, Formula::not(Formula::gt(c))),
                Formula::somewhere(1, level(c, i + 1, n - 1)),
            ),
        )
    }
    Ok(level(c, 0, d))
}

/// Property parameters in steps and hops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyParams {
    pub c: f64,
    pub h_p1: usize,
    pub h_p2: usize,
    pub h_p3: usize,
    pub d_p2: usize,
    pub d_p3: usize,
    pub d_p4: usize,
}

impl Default for PropertyParams {
    /// Threshold 500; 30/10/30 minute windows at 10-minute steps; radii 1, 1 and 4 cells.
    fn default() -> Self {
        PropertyParams {
            c: 500.0,
            h_p1: 3,
            h_p2: 1,
            h_p3: 3,
            d_p2: 1,
            d_p3: 1,
            d_p4: 4,
        }
    }
}

/// Converts a duration in minutes to whole steps.
pub fn minutes_to_steps(minutes: f64, step_minutes: f64) -> Result<usize> {
    if !(step_minutes > 0.0) || !(minutes >= 0.0) {
        return Err(Error::invalid(format!(
            "cannot convert {minutes} min at {step_minutes} min/step"
        )));
    }
    let steps = minutes / step_minutes;
    let rounded = steps.round();
    if (steps - rounded).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "{minutes} min is not a whole number of {step_minutes}-minute steps"
        )));
    }
    Ok(rounded as usize)
}

impl PropertyParams {
    pub fn validate(&self) -> Result<()> {
        check_threshold(self.c)?;
        for h in [self.h_p1, self.h_p2, self.h_p3] {
            check_steps(h)?;
        }
        Ok(())
    }

    /// The four requirements as named formulas `P1`..`P4`.
    pub fn formulas(&self) -> Result<Vec<(String, Formula)>> {
        self.validate()?;
        Ok(vec![
            ("P1".into(), build_p1(self.c, self.h_p1)?),
            ("P2".into(), build_p2(self.c, self.h_p2, self.d_p2)?),
            ("P3".into(), build_p3(self.c, self.h_p3, self.d_p3)?),
            ("P4".into(), build_p4(self.c, self.d_p4)?),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hospital_leaves(f: &Formula) -> usize {
        f.labels().iter().filter(|l| **l == HOSPITAL).count()
    }

    fn nesting(f: &Formula) -> usize {
        match f {
            Formula::Label(_) => 1,
            Formula::Or(_, rest) => match &**rest {
                Formula::And(_, s) => match &**s {
                    Formula::Somewhere { body, .. } => 1 + nesting(body),
                    _ => unreachable!(),
                },
                _ => unreachable!(),
            },
            _ => unreachable!(),
        }
    }

    #[test]
    fn p1_shape() {
        let f = build_p1(500.0, 3).unwrap();
        assert_eq!(f.to_string(), "y > 500 -> (F[1,3] !(y > 500))");
        assert!(build_p1(500.0, 0).is_err());
    }

    #[test]
    fn p2_p3_shapes() {
        assert_eq!(
            build_p2(500.0, 1, 1).unwrap().to_string(),
            "F[1,1] (y > 500 -> (somewhere[1] !(y > 500)))"
        );
        assert_eq!(build_p3(500.0, 3, 1).unwrap().to_string(), "G[1,3] (somewhere[1] !(y > 500))");
        assert!(build_p2(f64::NAN, 1, 1).is_err());
        assert!(build_p3(500.0, 0, 1).is_err());
    }

    #[test]
    fn p4_structure() {
        assert_eq!(build_p4(500.0, 0).unwrap(), Formula::label(HOSPITAL));
        for d in 0..7 {
            let f = build_p4(500.0, d).unwrap();
            assert_eq!(nesting(&f), d + 1);
            assert_eq!(hospital_leaves(&f), d + 1);
            assert_eq!(f.temporal_depth(), d);
        }
    }

    #[test]
    fn minute_conversion() {
        assert_eq!(minutes_to_steps(30.0, 10.0).unwrap(), 3);
        assert_eq!(minutes_to_steps(40.0, 10.0).unwrap(), 4);
        assert!(minutes_to_steps(25.0, 10.0).is_err());
        assert!(minutes_to_steps(10.0, 0.0).is_err());
    }
}
