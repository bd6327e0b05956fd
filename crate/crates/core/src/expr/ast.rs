//! Expression tree and its text serialisation.

use std::fmt::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => " * ",
            BinOp::Div => " / ",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }
}

/// Node of a parsed expression. Variables are indices into the chart the
/// expression was parsed against.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Const(c) if *c < 0.0 => PREC_NEG,
            Node::Const(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
            Node::Neg(_) => PREC_NEG,
            Node::Binary(op, ..) => op.precedence(),
        }
    }

    pub(crate) fn visit_vars(&self, f: &mut impl FnMut(usize)) {
        match self {
            Node::Const(_) => {}
            Node::Var(i) => f(*i),
            Node::Neg(a) | Node::Call(_, a) => a.visit_vars(f),
            Node::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Writes the node with the minimum parentheses that re-parse to the
    /// same tree.
    pub(crate) fn write(&self, names: &[String], out: &mut String) -> fmt::Result {
        match self {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(out, "-{}", -c)
                } else {
                    write!(out, "{c}")
                }
            }
            Node::Var(i) => out.write_str(&names[*i]),
            Node::Neg(a) => {
                out.write_char('-')?;
                wrap(a, a.precedence() < PREC_NEG, names, out)
            }
            Node::Call(func, a) => {
                out.write_str(func.name())?;
                out.write_char('(')?;
                a.write(names, out)?;
                out.write_char(')')
            }
            Node::Binary(BinOp::Pow, base, exponent) => {
                wrap(base, base.precedence() < PREC_ATOM, names, out)?;
                out.write_str(BinOp::Pow.symbol())?;
                wrap(exponent, exponent.precedence() < PREC_NEG, names, out)
            }
            Node::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                wrap(lhs, lhs.precedence() < p, names, out)?;
                out.write_str(op.symbol())?;
                wrap(rhs, rhs.precedence() <= p, names, out)
            }
        }
    }
}

fn wrap(node: &Node, parens: bool, names: &[String], out: &mut String) -> fmt::Result {
    if parens {
        out.write_char('(')?;
        node.write(names, out)?;
        out.write_char(')')
    } else {
        node.write(names, out)
    }
}
