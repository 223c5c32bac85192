//! Arithmetic expressions for input signals and custom right-hand sides.
//!
//! Syntax is that of `fasteval` (`+ - * / ^ %`, `sin cos tan asin acos atan
//! floor ceil round abs sign min max`, `pi()`, `e()`), extended with
//! `exp`, `ln`, `sqrt`, `sinh`, `cosh`, `tanh` and the constant `pi`.
//! Note that `log(x)` is base 10 and `log(b, x)` is base `b`.

use std::sync::Arc;

use fasteval::{Compiler, Evaler, Instruction, Slab};
use flowmap_core::dynamics::SystemSpec;
use flowmap_core::signal::Signal;

use crate::error::CliError;

/// A compiled scalar expression over named variables.
pub struct Expr {
    source: String,
    slab: Slab,
    instr: Instruction,
    vars: Vec<String>,
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("Expr").field(&self.source).finish()
    }
}

fn extension(name: &str, args: &[f64]) -> Option<f64> {
    let one = |f: fn(f64) -> f64| (args.len() == 1).then(|| f(args[0]));
    match name {
        "exp" => one(f64::exp),
        "ln" => one(f64::ln),
        "sqrt" => one(f64::sqrt),
        "sinh" => one(f64::sinh),
        "cosh" => one(f64::cosh),
        "tanh" => one(f64::tanh),
        "pi" if args.is_empty() => Some(std::f64::consts::PI),
        _ => None,
    }
}

impl Expr {
    /// Parses `source`; every free name must be in `vars` or a known function.
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self, CliError> {
        let mut slab = Slab::new();
        let parser = fasteval::Parser::new();
        let instr = parser
            .parse(source, &mut slab.ps)
            .map_err(|e| CliError::Config(format!("cannot parse expression `{source}`: {e}")))?
            .from(&slab.ps)
            .compile(&slab.ps, &mut slab.cs);
        let expr = Self {
            source: source.to_string(),
            slab,
            instr,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        };
        // Evaluate once to reject unknown names up front.
        let probe = vec![0.5; vars.len()];
        let mut unknown = None;
        let _ = expr.eval_inner(&probe, &mut unknown);
        if let Some(name) = unknown {
            return Err(CliError::Config(format!(
                "unknown name `{name}` in expression `{source}` (variables: {})",
                vars.join(", ")
            )));
        }
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn eval_inner(&self, values: &[f64], unknown: &mut Option<String>) -> f64 {
        let mut ns = |name: &str, args: Vec<f64>| -> Option<f64> {
            if args.is_empty() {
                if let Some(i) = self.vars.iter().position(|v| v == name) {
                    return Some(values[i]);
                }
            }
            let v = extension(name, &args);
            if v.is_none() && unknown.is_none() {
                *unknown = Some(name.to_string());
            }
            v
        };
        self.instr.eval(&self.slab, &mut ns).unwrap_or(f64::NAN)
    }

    /// Evaluates with `values[i]` bound to the i-th declared variable.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.eval_inner(values, &mut None)
    }
}

/// Signal whose channels are expressions in `t`.
#[derive(Debug)]
pub struct ExprSignal {
    channels: Vec<Expr>,
}

impl ExprSignal {
    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self, CliError> {
        let channels = sources
            .iter()
            .map(|s| Expr::parse(s.as_ref(), &["t"]))
            .collect::<Result<_, _>>()?;
        Ok(Self { channels })
    }
}

impl Signal for ExprSignal {
    fn arity(&self) -> usize {
        self.channels.len()
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.channels) {
            *o = e.eval(&[t]);
        }
    }
}

/// Builds a system `dx_i/dt = rhs_i(x_0.., g_0.., p_0..)`.
pub fn custom_system(
    name: &str,
    dim: usize,
    inputs: usize,
    extra: usize,
    rhs: &[String],
) -> Result<SystemSpec, CliError> {
    if rhs.len() != dim || dim == 0 {
        return Err(CliError::Config(format!(
            "custom system `{name}` needs one right-hand side per state (dim = {dim}, got {})",
            rhs.len()
        )));
    }
    let names: Vec<String> = (0..dim)
        .map(|i| format!("x{i}"))
        .chain((0..inputs).map(|i| format!("g{i}")))
        .chain((0..extra).map(|i| format!("p{i}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let exprs: Vec<Expr> = rhs.iter().map(|s| Expr::parse(s, &refs)).collect::<Result<_, _>>()?;
    let exprs = Arc::new(exprs);
    let spec = SystemSpec::new(name, dim, inputs, move |x, g, p, out| {
        let mut vals = Vec::with_capacity(x.len() + g.len() + p.len());
        vals.extend_from_slice(x);
        vals.extend_from_slice(g);
        vals.extend_from_slice(p);
        for (o, e) in out.iter_mut().zip(exprs.iter()) {
            *o = e.eval(&vals);
        }
    });
    Ok(spec.with_extra(extra))
}
