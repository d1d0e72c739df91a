//! Module instances and their parallel composition.

use serde::Serialize;

use super::model::Kind;
use super::{ElabError, ElabErrorKind};
use crate::syntax::{Mode, Span};

/// A global variable, or one constant element of a global array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GlobalRef {
    pub var: String,
    pub index: Option<i32>,
}

impl GlobalRef {
    pub fn overlaps(&self, other: &GlobalRef) -> bool {
        self.var == other.var
            && match (self.index, other.index) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            }
    }
}

/// What an interface slot is linked to.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundArg {
    Ref(GlobalRef),
    /// A constant passed to an `in` slot (e.g. an iteration value).
    Value(Kind, i32),
}

/// A module instance with its interface and `depends` slots bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub module: String,
    /// `(slot, declared mode, argument)` in interface order.
    pub slots: Vec<(String, Mode, BoundArg)>,
    /// `(depends slot, instance name)`.
    pub deps: Vec<(String, String)>,
    pub span: Span,
}

/// A set of composed instances and the modes of the globals they share.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Composite {
    pub instances: Vec<Instance>,
    pub interface: Vec<(GlobalRef, Mode)>,
}

impl From<Instance> for Composite {
    fn from(inst: Instance) -> Self {
        let mut c = Composite::default();
        for (_, mode, arg) in &inst.slots {
            if let BoundArg::Ref(r) = arg {
                // Two slots of one instance on one global combine like two
                // instances would.
                match c.interface.iter_mut().find(|(x, _)| x == r) {
                    Some((_, m)) => *m = combine_modes(*m, *mode).unwrap_or(*m),
                    None => c.interface.push((r.clone(), *mode)),
                }
            }
        }
        c.instances.push(inst);
        c
    }
}

/// Combined mode of one global seen through two interfaces; `None` when
/// both write it.
pub fn combine_modes(a: Mode, b: Mode) -> Option<Mode> {
    use Mode::*;
    match (a, b) {
        (Out, Out) => None,
        (In, In) => Some(In),
        (In, Out) | (Out, In) => Some(Out),
        _ => Some(Share),
    }
}

/// `m1 || m2`: union of instances, interface modes combined.
pub fn compose(a: &Composite, b: &Composite) -> Result<Composite, ElabError> {
    let mut out = a.clone();
    for inst in &b.instances {
        if !inst.name.is_empty() && out.instances.iter().any(|i| i.name == inst.name) {
            return Err(ElabError::new(
                ElabErrorKind::NameCollision,
                format!("instance `{}` composed twice", inst.name),
                inst.span,
            ));
        }
        out.instances.push(inst.clone());
    }
    for (r, mode) in &b.interface {
        for (r2, mode2) in &out.interface {
            if r.overlaps(r2) && *mode == Mode::Out && *mode2 == Mode::Out {
                let span = b
                    .instances
                    .iter()
                    .find(|i| i.slots.iter().any(|(_, _, a)| a == &BoundArg::Ref(r.clone())))
                    .map(|i| i.span)
                    .unwrap_or_default();
                return Err(ElabError::new(
                    ElabErrorKind::ModeConflict,
                    format!("`{}` has two `out` writers", render_ref(r)),
                    span,
                ));
            }
        }
        match out.interface.iter_mut().find(|(x, _)| x == r) {
            Some((_, m)) => *m = combine_modes(*m, *mode).expect("conflict checked above"),
            None => out.interface.push((r.clone(), *mode)),
        }
    }
    Ok(out)
}

/// Left fold of [`compose`] over instances built for each index value.
pub fn iterated_compose(
    values: &[i32],
    span: Span,
    mut template: impl FnMut(i32) -> Result<Instance, ElabError>,
) -> Result<Composite, ElabError> {
    let Some((&first, rest)) = values.split_first() else {
        return Err(ElabError::new(
            ElabErrorKind::EmptyIteration,
            "iterated composition over an empty set",
            span,
        ));
    };
    let mut acc = Composite::from(template(first)?);
    for &v in rest {
        acc = compose(&acc, &Composite::from(template(v)?))?;
    }
    Ok(acc)
}

fn render_ref(r: &GlobalRef) -> String {
    match r.index {
        Some(i) => format!("{}[{i}]", r.var),
        None => r.var.clone(),
    }
}
