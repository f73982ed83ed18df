//! Problem representation: variables with bounds, sparse linear rows, minimize.

use std::fmt;
use std::io::{self, Write};

use crate::MilpError;

/// Direction of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub obj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse row as `(variable index, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization problem over bounded variables subject to sparse linear rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, integer: bool, obj: f64) -> usize {
        self.vars.push(Variable {
            lower,
            upper,
            integer,
            obj,
        });
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, obj: f64) -> usize {
        self.add_var(0.0, 1.0, true, obj)
    }

    pub fn add_continuous(&mut self, lower: f64, upper: f64, obj: f64) -> usize {
        self.add_var(lower, upper, false, obj)
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Constraint { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    /// Checks that every row references existing variables, all numbers are
    /// finite where required and integer variables have finite bounds.
    pub fn validate(&self) -> Result<(), MilpError> {
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || !v.obj.is_finite() {
                return Err(MilpError::NonFinite(format!("variable {j}")));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(MilpError::NonFinite(format!("bounds of variable {j}")));
            }
            if v.integer && !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(MilpError::UnboundedInteger(j));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(MilpError::NonFinite(format!("rhs of row {r}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.vars.len() {
                    return Err(MilpError::BadIndex { row: r, var: j });
                }
                if !a.is_finite() {
                    return Err(MilpError::NonFinite(format!("row {r}, variable {j}")));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.obj * x).sum()
    }

    /// Largest violation of any bound or row at `values` (0 when feasible).
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * values[j]).sum();
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Whether `values` respects bounds, rows and integrality within `tol`.
    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        values.len() == self.vars.len()
            && values.iter().all(|x| x.is_finite())
            && self.max_violation(values) <= tol
            && self
                .vars
                .iter()
                .zip(values)
                .all(|(v, x)| !v.integer || (x - x.round()).abs() <= tol)
    }

    /// Writes the model in a plain-text LP-like format.
    ///
    /// ```text
    /// minimize
    ///   obj: 3 x0 - 2 x1
    /// subject to
    ///   r0: x0 + x1 <= 1
    /// bounds
    ///   0 <= x0 <= 1
    /// binary
    ///   x0 x1
    /// end
    /// ```
    ///
    /// Variables are named `x<index>` and rows `r<index>`, both in index
    /// order; zero objective coefficients are omitted.
    pub fn write_lp<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "minimize")?;
        let obj: Vec<(usize, f64)> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.obj != 0.0)
            .map(|(j, v)| (j, v.obj))
            .collect();
        writeln!(w, "  obj: {}", linear_expr(&obj))?;
        writeln!(w, "subject to")?;
        for (r, row) in self.rows.iter().enumerate() {
            writeln!(
                w,
                "  r{r}: {} {} {}",
                linear_expr(&row.coeffs),
                row.sense,
                row.rhs
            )?;
        }
        writeln!(w, "bounds")?;
        for (j, v) in self.vars.iter().enumerate() {
            writeln!(w, "  {} <= x{j} <= {}", fmt_bound(v.lower), fmt_bound(v.upper))?;
        }
        let is_binary = |v: &Variable| v.lower >= 0.0 && v.upper <= 1.0;
        for (section, binary) in [("binary", true), ("general", false)] {
            let names: Vec<String> = self
                .vars
                .iter()
                .enumerate()
                .filter(|(_, v)| v.integer && is_binary(v) == binary)
                .map(|(j, _)| format!("x{j}"))
                .collect();
            if !names.is_empty() {
                writeln!(w, "{section}")?;
                writeln!(w, "  {}", names.join(" "))?;
            }
        }
        writeln!(w, "end")
    }

    pub fn to_lp_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_lp(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("LP text is ASCII")
    }
}

fn fmt_bound(b: f64) -> String {
    if b == f64::INFINITY {
        "inf".into()
    } else if b == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{b}")
    }
}

fn linear_expr(terms: &[(usize, f64)]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (t, &(j, a)) in terms.iter().enumerate() {
        let mag = a.abs();
        if t == 0 {
            if a < 0.0 {
                s.push('-');
            }
        } else {
            s.push_str(if a < 0.0 { " - " } else { " + " });
        }
        if mag != 1.0 {
            s.push_str(&format!("{mag} "));
        }
        s.push_str(&format!("x{j}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_dump_is_stable() {
        let mut m = Model::new();
        let a = m.add_binary(3.0);
        let b = m.add_binary(-2.0);
        m.add_row(vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0);
        m.add_row(vec![(b, -0.5)], Sense::Ge, -4.0);
        let text = m.to_lp_string();
        assert_eq!(
            text,
            "minimize\n  obj: 3 x0 - 2 x1\nsubject to\n  r0: x0 + x1 <= 1\n  r1: -0.5 x1 >= -4\n\
             bounds\n  0 <= x0 <= 1\n  0 <= x1 <= 1\nbinary\n  x0 x1\nend\n"
        );
    }

    #[test]
    fn validate_rejects_bad_rows() {
        let mut m = Model::new();
        m.add_binary(1.0);
        m.add_row(vec![(3, 1.0)], Sense::Le, 1.0);
        assert!(matches!(m.validate(), Err(MilpError::BadIndex { row: 0, var: 3 })));

        let mut m = Model::new();
        m.add_var(0.0, f64::INFINITY, true, 0.0);
        assert!(matches!(m.validate(), Err(MilpError::UnboundedInteger(0))));
    }

    #[test]
    fn violation_measures_rows_and_bounds() {
        let mut m = Model::new();
        let x = m.add_continuous(0.0, 10.0, 1.0);
        m.add_row(vec![(x, 1.0)], Sense::Ge, 3.0);
        assert_eq!(m.max_violation(&[1.0]), 2.0);
        assert_eq!(m.max_violation(&[11.0]), 1.0);
        assert!(m.is_feasible(&[3.0], 1e-9));
    }
}
