//! Scalar expressions on phase-space charts.
//!
//! Expressions are parsed once against an ordered list of chart variables and
//! evaluated over any [`Scalar`]: plain `f64`, first-order [`Dual`] or
//! second-order [`Dual2`]. Derivatives are exact up to floating-point rounding.

mod ast;
mod parser;
mod scalar;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use ast::{BinOp, Func, Node};
pub use scalar::{Dual, Dual2, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("duplicate chart variable `{0}`")]
    DuplicateVariable(String),
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("point has {got} coordinates, chart has {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Value, gradient and Hessian of an expression at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

/// A parsed scalar field. Immutable after parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    chart: Vec<String>,
    free_vars: Vec<usize>,
}

/// Parses `source` against the ordered chart variables.
pub fn parse(source: &str, chart_vars: &[&str]) -> Result<Expression, ExprError> {
    let chart: Vec<String> = chart_vars.iter().map(|s| s.to_string()).collect();
    Expression::parse(source, &chart)
}

impl Expression {
    pub fn parse(source: &str, chart: &[String]) -> Result<Self, ExprError> {
        for (i, name) in chart.iter().enumerate() {
            if chart[..i].contains(name) {
                return Err(ExprError::DuplicateVariable(name.clone()));
            }
        }
        let root = parser::parse_tree(source, chart)?;
        Ok(Self::from_node(root, chart.to_vec()))
    }

    pub fn from_node(root: Node, chart: Vec<String>) -> Self {
        let mut used = vec![false; chart.len()];
        root.visit_vars(&mut |i| used[i] = true);
        let free_vars = (0..chart.len()).filter(|&i| used[i]).collect();
        Expression { root, chart, free_vars }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn chart(&self) -> &[String] {
        &self.chart
    }

    /// Names of the chart variables the expression actually uses, in chart order.
    pub fn free_vars(&self) -> Vec<&str> {
        self.free_vars.iter().map(|&i| self.chart[i].as_str()).collect()
    }

    /// Evaluates at a point given in chart order.
    pub fn eval<T: Scalar>(&self, point: &[T]) -> Result<T, ExprError> {
        if point.len() != self.chart.len() {
            return Err(ExprError::Dimension { expected: self.chart.len(), got: point.len() });
        }
        self.eval_node(&self.root, point)
    }

    /// Evaluates with variables bound by name. Only free variables need a binding.
    pub fn eval_env<T: Scalar>(&self, env: &HashMap<String, T>) -> Result<T, ExprError> {
        let mut point = vec![T::from_f64(0.0); self.chart.len()];
        for &i in &self.free_vars {
            let name = &self.chart[i];
            point[i] = env.get(name).cloned().ok_or_else(|| ExprError::Unbound(name.clone()))?;
        }
        self.eval_node(&self.root, &point)
    }

    pub fn value(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.eval(point)
    }

    /// Partial derivatives with respect to every chart variable.
    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>, ExprError> {
        Ok(self.eval(&Dual::seed(point))?.gradient(point.len()))
    }

    pub fn hessian(&self, point: &[f64]) -> Result<Vec<Vec<f64>>, ExprError> {
        Ok(self.jet(point)?.hessian)
    }

    pub fn jet(&self, point: &[f64]) -> Result<Jet, ExprError> {
        let n = point.len();
        let d = self.eval(&Dual2::seed(point))?;
        Ok(Jet { value: d.value, gradient: d.gradient(n), hessian: d.hessian(n) })
    }

    fn domain(&self, node: &Node, reason: &str) -> ExprError {
        let mut subexpr = String::new();
        let _ = node.write(&self.chart, &mut subexpr);
        ExprError::Domain { subexpr, reason: reason.to_string() }
    }

    fn eval_node<T: Scalar>(&self, node: &Node, point: &[T]) -> Result<T, ExprError> {
        Ok(match node {
            Node::Const(c) => T::from_f64(*c),
            Node::Var(i) => point[*i].clone(),
            Node::Neg(a) => -self.eval_node(a, point)?,
            Node::Binary(op, a, b) => {
                let lhs = self.eval_node(a, point)?;
                let rhs = self.eval_node(b, point)?;
                match op {
                    BinOp::Add => lhs + rhs,
                    BinOp::Sub => lhs - rhs,
                    BinOp::Mul => lhs * rhs,
                    BinOp::Div => {
                        if rhs.value() == 0.0 {
                            return Err(self.domain(node, "division by zero"));
                        }
                        lhs / rhs
                    }
                    BinOp::Pow => self.pow(node, lhs, rhs)?,
                }
            }
            Node::Call(func, a) => {
                let x = self.eval_node(a, point)?;
                match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x.value() <= 0.0 {
                            return Err(self.domain(node, "logarithm of a non-positive number"));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x.value() < 0.0 {
                            return Err(self.domain(node, "square root of a negative number"));
                        }
                        x.sqrt()
                    }
                    Func::Sinh => x.sinh(),
                    Func::Cosh => x.cosh(),
                }
            }
        })
    }

    fn pow<T: Scalar>(&self, node: &Node, base: T, exponent: T) -> Result<T, ExprError> {
        let b = base.value();
        if exponent.is_constant() {
            let c = exponent.value();
            if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
                if b == 0.0 && c < 0.0 {
                    return Err(self.domain(node, "zero raised to a negative power"));
                }
                return Ok(base.powi(c as i32));
            }
            if b < 0.0 {
                return Err(self.domain(node, "negative base with non-integer exponent"));
            }
            if b == 0.0 && c < 0.0 {
                return Err(self.domain(node, "zero raised to a negative power"));
            }
            return Ok(base.powf(c));
        }
        if b <= 0.0 {
            return Err(self.domain(node, "variable exponent requires a positive base"));
        }
        Ok((base.ln() * exponent).exp())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.root.write(&self.chart, &mut out)?;
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(i: usize) -> Box<Node> {
        Box::new(Node::Var(i))
    }

    #[test]
    fn free_vars_subset_of_chart() {
        let e = parse("p1^2/2", &["q1", "p1"]).unwrap();
        assert_eq!(e.free_vars(), vec!["p1"]);
    }

    #[test]
    fn precedence_tree() {
        let e = parse("q1*p1 - sin(t)", &["q1", "p1", "t"]).unwrap();
        let expected = Node::Binary(
            BinOp::Sub,
            Box::new(Node::Binary(BinOp::Mul, var(0), var(1))),
            Box::new(Node::Call(Func::Sin, var(2))),
        );
        assert_eq!(*e.root(), expected);
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse("2^3^2", &[]).unwrap();
        assert_eq!(e.value(&[]).unwrap(), 512.0);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse("-q1^2", &["q1"]).unwrap();
        assert_eq!(e.value(&[3.0]).unwrap(), -9.0);
        let e = parse("(-q1)^2", &["q1"]).unwrap();
        assert_eq!(e.value(&[3.0]).unwrap(), 9.0);
        let e = parse("2^-1", &[]).unwrap();
        assert_eq!(e.value(&[]).unwrap(), 0.5);
    }

    #[test]
    fn eval_examples() {
        let e = parse("p1^2/2", &["p1"]).unwrap();
        let mut env = HashMap::new();
        env.insert("p1".to_string(), 2.0);
        assert_eq!(e.eval_env(&env).unwrap(), 2.0);

        let e = parse("q1*p1", &["q1", "p1"]).unwrap();
        let d = e.eval(&Dual::seed(&[3.0, 5.0])).unwrap();
        assert_eq!(d.value, 15.0);
        assert_eq!(d.d1, vec![5.0, 3.0]);

        let e = parse("sin(q1)^2 + cos(q1)^2", &["q1"]).unwrap();
        assert!((e.value(&[0.7]).unwrap() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let e = parse("p1^2/2", &["q1", "p1"]).unwrap();
        assert_eq!(e.gradient(&[1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
        let e = parse("q1^2*p1", &["q1", "p1"]).unwrap();
        assert_eq!(e.gradient(&[1.0, 1.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn hessian_examples() {
        let e = parse("q1*p1", &["q1", "p1"]).unwrap();
        assert_eq!(e.hessian(&[0.3, -2.0]).unwrap(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e = parse("p1^3/3", &["q1", "p1"]).unwrap();
        assert_eq!(e.hessian(&[0.0, 2.0]).unwrap()[1][1], 4.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("q1 +", &["q1"]), Err(ExprError::Syntax { position: 4, .. })));
        assert!(matches!(parse("", &["q1"]), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("(q1", &["q1"]), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("q1 q1", &["q1"]), Err(ExprError::Syntax { .. })));
        assert_eq!(parse("x + 1", &["q1"]), Err(ExprError::UnknownVariable("x".into())));
        assert_eq!(parse("atan(q1)", &["q1"]), Err(ExprError::UnknownFunction("atan".into())));
        assert!(matches!(parse("q1", &["q1", "q1"]), Err(ExprError::DuplicateVariable(_))));
        assert!(matches!(parse("1e999", &[]), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("q1 $ 2", &["q1"]), Err(ExprError::Syntax { position: 3, .. })));
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = parse("1 + log(q1 - 1)", &["q1"]).unwrap();
        match e.value(&[0.5]) {
            Err(ExprError::Domain { subexpr, .. }) => assert_eq!(subexpr, "log(q1 - 1)"),
            other => panic!("unexpected {other:?}"),
        }
        let e = parse("sqrt(q1)", &["q1"]).unwrap();
        assert!(matches!(e.value(&[-1.0]), Err(ExprError::Domain { .. })));
        let e = parse("1/q1", &["q1"]).unwrap();
        assert!(matches!(e.gradient(&[0.0]), Err(ExprError::Domain { .. })));
        let e = parse("q1^0.5", &["q1"]).unwrap();
        assert!(matches!(e.value(&[-4.0]), Err(ExprError::Domain { .. })));
        let e = parse("q1^3", &["q1"]).unwrap();
        assert_eq!(e.value(&[-2.0]).unwrap(), -8.0);
        let e = parse("q1^p1", &["q1", "p1"]).unwrap();
        assert!(matches!(e.jet(&[-1.0, 2.0]), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn unbound_variable() {
        let e = parse("q1 + p1", &["q1", "p1"]).unwrap();
        let mut env = HashMap::new();
        env.insert("q1".to_string(), 1.0);
        assert_eq!(e.eval_env(&env), Err(ExprError::Unbound("p1".into())));
    }

    #[test]
    fn display_round_trip_examples() {
        let chart = ["q1", "p1", "t"];
        for src in ["q1 - (p1 - t)", "(q1^p1)^t", "-(q1 + p1)", "q1 / (p1 * t)", "2^-q1", "--q1"] {
            let e = parse(src, &chart).unwrap();
            let again = parse(&e.to_string(), &chart).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }
}
