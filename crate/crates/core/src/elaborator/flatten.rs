//! Instantiation, dependency graphs, sync resolution and flattening.

use std::collections::{HashMap, HashSet};

use super::compile::{Bound, Compiler, Globals, Names};
use super::compose::{compose, iterated_compose, BoundArg, Composite, GlobalRef, Instance};
use super::model::*;
use super::sync::order_projections;
use super::{qualify, ElabError, ElabErrorKind};
use crate::syntax::{
    self, is_implicit_module, CompositionExpr, EventDecl, Expr, Fairness, InstanceDecl, Mode,
    SourceModel, Span, VarDecl,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlattenOptions {
    /// Also order projections by unprimed reads of written variables.
    pub strict_action_edges: bool,
}

/// One synchronous event set.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncSet {
    /// `(instance, event)` pairs in depth-first order from the root.
    pub members: Vec<(String, String)>,
    pub compound: String,
    /// Instances connected to the root instance through `with` bindings.
    pub component: Vec<String>,
}

impl SyncSet {
    pub fn member_names(&self) -> Vec<String> {
        self.members.iter().map(|(i, e)| qualify(i, e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DependencyGraphs {
    pub modules: Vec<(String, String)>,
    pub events: Vec<(String, String)>,
    pub sync_sets: Vec<SyncSet>,
}

fn err(kind: ElabErrorKind, msg: impl Into<String>, span: Span) -> ElabError {
    ElabError::new(kind, msg, span)
}

type IterVar<'a> = Option<(&'a str, Kind, i32)>;

struct Elab<'a> {
    src: &'a SourceModel,
    g: Globals,
    vars: Vec<FlatVar>,
    var_types: Vec<VarType>,
    n_globals: usize,
}

impl<'a> Elab<'a> {
    fn new(src: &'a SourceModel, extra: &[VarDecl]) -> Result<Self, ElabError> {
        let mut el = Elab {
            src,
            g: Globals::build(src)?,
            vars: Vec::new(),
            var_types: Vec::new(),
            n_globals: 0,
        };
        for decl in src.globals.iter().chain(extra) {
            el.add_var(decl.name.clone(), decl)?;
        }
        el.n_globals = el.vars.len();
        Ok(el)
    }

    fn add_var(&mut self, name: String, decl: &VarDecl) -> Result<u32, ElabError> {
        let empty = Names::default();
        let mut cx = Compiler::new(&self.g, &empty);
        let ty = cx.var_type(&decl.ty, decl.span)?;
        let init = cx.initial(&ty, decl.init.as_ref(), decl.span)?;
        if self.vars.iter().any(|v| v.name == name) {
            return Err(err(
                ElabErrorKind::NameCollision,
                format!("variable `{name}` declared twice after prefixing"),
                decl.span,
            ));
        }
        self.var_types.push(ty.clone());
        self.vars.push(FlatVar {
            name,
            ty,
            mode: None,
            init,
            offset: 0,
            span: decl.span,
        });
        Ok(self.vars.len() as u32 - 1)
    }

    fn global(&self, name: &str) -> Option<usize> {
        self.vars[..self.n_globals].iter().position(|v| v.name == name)
    }

    fn const_compiler<'b>(g: &'b Globals, empty: &'b Names, iter: IterVar) -> Compiler<'b> {
        let mut cx = Compiler::new(g, empty);
        if let Some((name, kind, v)) = iter {
            cx.bind_value(name, kind, v);
        }
        cx
    }

    fn binding_arg(&self, value: &Expr, iter: IterVar, span: Span) -> Result<BoundArg, ElabError> {
        let empty = Names::default();
        match value {
            Expr::Name {
                name,
                primed: false,
                ..
            } if iter.is_none_or(|(v, _, _)| v != name) && self.global(name).is_some() => {
                Ok(BoundArg::Ref(GlobalRef {
                    var: name.clone(),
                    index: None,
                }))
            }
            Expr::Index { base, index } => {
                let Expr::Name {
                    name, primed: false, ..
                } = &**base
                else {
                    return Err(err(ElabErrorKind::TypeError, "bad interface argument", span));
                };
                let Some(v) = self.global(name) else {
                    return Err(err(
                        ElabErrorKind::UnknownReference,
                        format!("`{name}` is not a global variable"),
                        span,
                    ));
                };
                let VarType::Array { index: dom, .. } = &self.var_types[v] else {
                    return Err(err(ElabErrorKind::TypeError, format!("`{name}` is not an array"), span));
                };
                let (k, i) = Self::const_compiler(&self.g, &empty, iter).const_value(index)?;
                if k != dom.kind || !dom.contains(i) {
                    return Err(err(ElabErrorKind::TypeError, "array index out of range", span));
                }
                Ok(BoundArg::Ref(GlobalRef {
                    var: name.clone(),
                    index: Some(i),
                }))
            }
            e => {
                let (k, v) = Self::const_compiler(&self.g, &empty, iter)
                    .const_value(e)
                    .map_err(|_| {
                        err(
                            ElabErrorKind::UnknownReference,
                            "interface argument is neither a global variable nor a constant",
                            span,
                        )
                    })?;
                Ok(BoundArg::Value(k, v))
            }
        }
    }

    fn check_binding_type(&self, slot_ty: &VarType, arg: &BoundArg, span: Span) -> Result<(), ElabError> {
        let ok = match arg {
            BoundArg::Value(k, _) => matches!(slot_ty, VarType::Scalar(d) if d.kind == *k),
            BoundArg::Ref(r) => {
                let gty = &self.var_types[self.global(&r.var).unwrap()];
                match (r.index, slot_ty, gty) {
                    (Some(_), VarType::Scalar(d), VarType::Array { elem, .. }) => d.kind == elem.kind,
                    (None, VarType::Scalar(a), VarType::Scalar(b)) => a.kind == b.kind,
                    (None, VarType::Array { index: i1, elem: e1 }, VarType::Array { index: i2, elem: e2 }) => {
                        i1 == i2 && e1.kind == e2.kind
                    }
                    (None, VarType::Queue { elem: e1, capacity: c1 }, VarType::Queue { elem: e2, capacity: c2 }) => {
                        e1.kind == e2.kind && c1 == c2
                    }
                    _ => false,
                }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(err(ElabErrorKind::TypeError, "argument type does not match the interface", span))
        }
    }

    fn instance(&self, decl: &InstanceDecl, iter: IterVar) -> Result<Instance, ElabError> {
        let Some(module) = self.src.module(&decl.module) else {
            return Err(err(
                ElabErrorKind::UnknownReference,
                format!("unknown module `{}`", decl.module),
                decl.span,
            ));
        };
        if let Some(slot) = module.interface.get(decl.bindings.len()) {
            return Err(err(
                ElabErrorKind::MissingBinding,
                format!("interface variable `{}` of `{}` is not bound", slot.name, module.name),
                decl.span,
            ));
        }
        if decl.bindings.len() > module.interface.len() {
            return Err(err(
                ElabErrorKind::TypeError,
                format!("`{}` takes {} interface arguments", module.name, module.interface.len()),
                decl.span,
            ));
        }
        let mut slots = Vec::new();
        for (slot, b) in module.interface.iter().zip(&decl.bindings) {
            if b.mode != slot.mode {
                return Err(err(
                    ElabErrorKind::ModeMismatch,
                    format!("`{}` is declared `{}` but bound as `{}`", slot.name, slot.mode, b.mode),
                    b.span,
                ));
            }
            let arg = self.binding_arg(&b.value, iter, b.span)?;
            if matches!(arg, BoundArg::Value(..)) && slot.mode != Mode::In {
                return Err(err(
                    ElabErrorKind::ModeMismatch,
                    format!("constant bound to `{}` slot `{}`", slot.mode, slot.name),
                    b.span,
                ));
            }
            let empty = Names::default();
            let slot_ty = Compiler::new(&self.g, &empty).var_type(&slot.ty, slot.span)?;
            self.check_binding_type(&slot_ty, &arg, b.span)?;
            slots.push((slot.name.clone(), slot.mode, arg));
        }
        for (slot, _) in &decl.with {
            if !module.depends.iter().any(|d| &d.slot == slot) {
                return Err(err(
                    ElabErrorKind::UnknownDependency,
                    format!("`{}` has no depends slot `{slot}`", module.name),
                    decl.span,
                ));
            }
        }
        Ok(Instance {
            name: decl.name.clone(),
            module: decl.module.clone(),
            slots,
            deps: decl.with.clone(),
            span: decl.span,
        })
    }

    fn composite(&self, c: &CompositionExpr, stack: &mut Vec<String>) -> Result<Composite, ElabError> {
        match c {
            CompositionExpr::Instance(name, span) => {
                if let Some(alias) = self.src.aliases.iter().find(|a| &a.name == name) {
                    if stack.contains(name) {
                        return Err(err(
                            ElabErrorKind::UnknownReference,
                            format!("alias `{name}` refers to itself"),
                            *span,
                        ));
                    }
                    stack.push(name.clone());
                    let r = self.composite(&alias.expr, stack);
                    stack.pop();
                    return r;
                }
                match self.src.instance(name) {
                    Some(d) => Ok(Composite::from(self.instance(d, None)?)),
                    None => Err(err(
                        ElabErrorKind::UnknownReference,
                        format!("unknown instance `{name}`"),
                        *span,
                    )),
                }
            }
            CompositionExpr::Parallel(parts) => {
                let mut acc = self.composite(&parts[0], stack)?;
                for p in &parts[1..] {
                    acc = compose(&acc, &self.composite(p, stack)?)?;
                }
                Ok(acc)
            }
            CompositionExpr::Iterated { var, set, template } => {
                let empty = Names::default();
                let dom = Compiler::new(&self.g, &empty).domain(set)?;
                iterated_compose(&dom.values, template.span, |v| {
                    let mut d = (**template).clone();
                    d.name = iterated_name(&self.g, &template.module, dom.kind, v);
                    self.instance(&d, Some((var, dom.kind, v)))
                })
            }
        }
    }

    fn system(&self) -> Result<Composite, ElabError> {
        let src = self.src;
        let mut comp = if let Some(s) = &src.system {
            self.composite(s, &mut Vec::new())?
        } else if !src.instances.is_empty() {
            let mut acc = Composite::default();
            for d in &src.instances {
                acc = compose(&acc, &Composite::from(self.instance(d, None)?))?;
            }
            acc
        } else {
            // A model without instances is its modules, unprefixed.
            let mut acc = Composite::default();
            for m in src.modules.iter().filter(|m| !is_implicit_module(&m.name)) {
                let inst = Instance {
                    name: String::new(),
                    module: m.name.clone(),
                    slots: m
                        .interface
                        .iter()
                        .map(|s| {
                            let r = GlobalRef {
                                var: s.name.clone(),
                                index: None,
                            };
                            (s.name.clone(), s.mode, BoundArg::Ref(r))
                        })
                        .collect(),
                    deps: vec![],
                    span: m.span,
                };
                acc = compose(&acc, &Composite::from(inst))?;
            }
            acc
        };
        if let Some(m) = src.modules.iter().find(|m| is_implicit_module(&m.name)) {
            let main = Instance {
                name: String::new(),
                module: m.name.clone(),
                slots: vec![],
                deps: vec![],
                span: m.span,
            };
            comp = compose(&Composite::from(main), &comp)?;
        }
        Ok(comp)
    }
}

fn iterated_name(g: &Globals, module: &str, kind: Kind, v: i32) -> String {
    let value = match kind {
        Kind::Sym => g.symbols[v as usize].clone(),
        Kind::Bool => (v != 0).to_string(),
        Kind::Int => v.to_string(),
    };
    format!("{module}_{value}")
}

/// Instance names an alias (or any composition) stands for.
fn instance_names(
    src: &SourceModel,
    g: &Globals,
    c: &CompositionExpr,
    stack: &mut Vec<String>,
    out: &mut Vec<String>,
) {
    match c {
        CompositionExpr::Instance(name, _) => {
            if let Some(a) = src.aliases.iter().find(|a| &a.name == name) {
                if !stack.contains(name) {
                    stack.push(name.clone());
                    instance_names(src, g, &a.expr, stack, out);
                    stack.pop();
                }
            } else {
                out.push(name.clone());
            }
        }
        CompositionExpr::Parallel(parts) => {
            for p in parts {
                instance_names(src, g, p, stack, out);
            }
        }
        CompositionExpr::Iterated { set, template, .. } => {
            let empty = Names::default();
            if let Ok(dom) = Compiler::new(g, &empty).domain(set) {
                for &v in &dom.values {
                    out.push(iterated_name(g, &template.module, dom.kind, v));
                }
            }
        }
    }
}

/// Globals introduced by the interface of a model that has no instances.
fn lone_globals(src: &SourceModel) -> Vec<VarDecl> {
    let mut out: Vec<VarDecl> = Vec::new();
    if src.system.is_some() || !src.instances.is_empty() {
        return out;
    }
    for m in &src.modules {
        for s in &m.interface {
            if !src.globals.iter().any(|g| g.name == s.name) && !out.iter().any(|g| g.name == s.name) {
                out.push(VarDecl {
                    name: s.name.clone(),
                    ty: s.ty.clone(),
                    init: None,
                    span: s.span,
                });
            }
        }
    }
    out
}

/// Binds one instance declaration against the model's globals.
pub fn instantiate(src: &SourceModel, decl: &InstanceDecl) -> Result<Instance, ElabError> {
    Elab::new(src, &lone_globals(src))?.instance(decl, None)
}

/// Depth-first search for a cycle; returns the edge index that closes it.
fn find_cycle_edge(n: usize, edges: &[(usize, usize)]) -> Option<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, k));
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        color[root] = 1;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            if let Some(&(w, k)) = adj[v].get(*i) {
                *i += 1;
                match color[w] {
                    0 => {
                        color[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return Some(k),
                    _ => {}
                }
            } else {
                color[v] = 2;
                stack.pop();
            }
        }
    }
    None
}

fn build_graphs(src: &SourceModel, g: &Globals, comp: &Composite) -> Result<DependencyGraphs, ElabError> {
    // Module graph.
    let mods: Vec<&str> = src.modules.iter().map(|m| m.name.as_str()).collect();
    let mut medges = Vec::new();
    let mut mspans = Vec::new();
    let mut module_edges = Vec::new();
    for (i, m) in src.modules.iter().enumerate() {
        for d in &m.depends {
            if let Some(j) = mods.iter().position(|n| *n == d.module) {
                medges.push((i, j));
                mspans.push(d.span);
                module_edges.push((m.name.clone(), d.module.clone()));
            }
        }
    }
    if let Some(k) = find_cycle_edge(mods.len(), &medges) {
        let (a, b) = &module_edges[k];
        return Err(err(
            ElabErrorKind::CyclicModuleDependency,
            format!("module dependency cycle through `{a}` -> `{b}`"),
            mspans[k],
        ));
    }

    // Event graph, nodes in emission order.
    let mut nodes: Vec<(String, String)> = Vec::new();
    let mut clause_of: Vec<Option<(String, Span)>> = Vec::new();
    for inst in &comp.instances {
        let module = src.module(&inst.module).expect("instances name declared modules");
        for ev in &module.events {
            nodes.push((inst.name.clone(), ev.name.clone()));
            clause_of.push(ev.sync.as_ref().map(|s| (s.compound.clone(), s.span)));
        }
    }
    let node = |i: &str, e: &str| nodes.iter().position(|(a, b)| a == i && b == e);
    let mut eedges: Vec<(usize, usize)> = Vec::new();
    for inst in &comp.instances {
        let module = src.module(&inst.module).unwrap();
        for ev in &module.events {
            let Some(clause) = &ev.sync else { continue };
            let from = node(&inst.name, &ev.name).unwrap();
            for (slot, event, span) in &clause.members {
                let Some(dep) = module.depends.iter().find(|d| &d.slot == slot) else {
                    return Err(err(
                        ElabErrorKind::SyncTargetNotFound,
                        format!("`{slot}` is not a depends slot of `{}`", module.name),
                        *span,
                    ));
                };
                let Some((_, target)) = inst.deps.iter().find(|(s, _)| s == slot) else {
                    return Err(err(
                        ElabErrorKind::UnknownDependency,
                        format!("depends slot `{slot}` of `{}` is not bound by a `with` clause", inst.name),
                        *span,
                    ));
                };
                let Some(ti) = comp.instances.iter().find(|i| &i.name == target) else {
                    return Err(err(
                        ElabErrorKind::UnknownDependency,
                        format!("instance `{target}` is not part of the system"),
                        *span,
                    ));
                };
                if ti.module != dep.module {
                    return Err(err(
                        ElabErrorKind::UnknownDependency,
                        format!("`{target}` is an instance of `{}`, not `{}`", ti.module, dep.module),
                        *span,
                    ));
                }
                let Some(to) = node(target, event) else {
                    return Err(err(
                        ElabErrorKind::SyncTargetNotFound,
                        format!("`{}` has no event `{event}`", ti.module),
                        *span,
                    ));
                };
                if !eedges.contains(&(from, to)) {
                    eedges.push((from, to));
                }
            }
        }
    }
    let qn = |i: usize| qualify(&nodes[i].0, &nodes[i].1);
    if let Some(k) = find_cycle_edge(nodes.len(), &eedges) {
        let (a, b) = eedges[k];
        return Err(err(
            ElabErrorKind::CyclicEventDependency,
            format!("synchronisation cycle through `{}` -> `{}`", qn(a), qn(b)),
            clause_of[a].as_ref().map(|c| c.1).unwrap_or_default(),
        ));
    }

    // Sync sets: weakly connected components of the event graph.
    let mut comp_of: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(a, b) in &eedges {
        let (ra, rb) = (find(&mut comp_of, a), find(&mut comp_of, b));
        if ra != rb {
            comp_of[ra.max(rb)] = ra.min(rb);
        }
    }
    let touched: HashSet<usize> = eedges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut seen_roots = Vec::new();
    let mut aliases: Vec<(String, Vec<String>)> = Vec::new();
    for a in &src.aliases {
        let mut names = Vec::new();
        instance_names(src, g, &a.expr, &mut vec![a.name.clone()], &mut names);
        aliases.push((a.name.clone(), names));
    }
    let mut sync_sets = Vec::new();
    for start in 0..nodes.len() {
        if !touched.contains(&start) {
            continue;
        }
        let root_class = find(&mut comp_of, start);
        if seen_roots.contains(&root_class) {
            continue;
        }
        seen_roots.push(root_class);
        let in_class: Vec<usize> = (0..nodes.len())
            .filter(|&i| find(&mut comp_of, i) == root_class)
            .collect();
        let roots: Vec<usize> = in_class
            .iter()
            .copied()
            .filter(|&i| !eedges.iter().any(|&(_, b)| b == i))
            .collect();
        let mut order = Vec::new();
        for &r in &roots {
            let mut stack = vec![r];
            while let Some(v) = stack.pop() {
                if order.contains(&v) {
                    continue;
                }
                order.push(v);
                for &(a, b) in eedges.iter().rev() {
                    if a == v && !order.contains(&b) {
                        stack.push(b);
                    }
                }
            }
        }
        let root = roots[0];
        let as_name = clause_of[root].as_ref().map(|c| c.0.clone()).unwrap_or_default();
        let member_insts: HashSet<&str> = order.iter().map(|&i| nodes[i].0.as_str()).collect();
        let prefix = aliases
            .iter()
            .filter(|(_, names)| member_insts.iter().all(|m| names.iter().any(|n| n == m)))
            .min_by_key(|(_, names)| names.len())
            .map(|(a, _)| a.clone())
            .unwrap_or_else(|| nodes[root].0.clone());
        sync_sets.push(SyncSet {
            members: order.iter().map(|&i| nodes[i].clone()).collect(),
            compound: qualify(&prefix, &as_name),
            component: instance_component(comp, &nodes[root].0),
        });
    }
    Ok(DependencyGraphs {
        modules: module_edges,
        events: eedges.iter().map(|&(a, b)| (qn(a), qn(b))).collect(),
        sync_sets,
    })
}

/// Instances weakly connected to `root` through `with` bindings.
fn instance_component(comp: &Composite, root: &str) -> Vec<String> {
    let mut set: HashSet<&str> = HashSet::from([root]);
    loop {
        let before = set.len();
        for inst in &comp.instances {
            for (_, dep) in &inst.deps {
                if set.contains(inst.name.as_str()) || set.contains(dep.as_str()) {
                    set.insert(inst.name.as_str());
                    set.insert(dep.as_str());
                }
            }
        }
        if set.len() == before {
            break;
        }
    }
    comp.instances
        .iter()
        .filter(|i| set.contains(i.name.as_str()))
        .map(|i| i.name.clone())
        .collect()
}

/// Module graph, event graph and sync sets of a composed system.
pub fn build_dependency_graphs(src: &SourceModel, comp: &Composite) -> Result<DependencyGraphs, ElabError> {
    build_graphs(src, &Globals::build(src)?, comp)
}

pub fn flatten(src: &SourceModel) -> Result<FlatModel, ElabError> {
    flatten_with(src, &FlattenOptions::default())
}

/// Parses and flattens model text; syntax diagnostics become
/// [`ElabErrorKind::Syntax`] errors.
pub fn flatten_source(text: &str) -> Result<FlatModel, ElabError> {
    let src = syntax::parse(text).map_err(|ds| {
        let d = &ds[0];
        err(ElabErrorKind::Syntax, format!("{}: {}", d.kind, d.message), d.span)
    })?;
    flatten(&src)
}

struct EventCx<'a> {
    g: &'a Globals,
    names: &'a [Names],
    insts: &'a [Instance],
    var_names: Vec<String>,
    opts: FlattenOptions,
}

impl EventCx<'_> {
    /// Compiles one event, or the members of a sync set into one compound
    /// event, returning it with its action-graph edges.
    fn compile(
        &self,
        members: &[(usize, &EventDecl)],
        id: String,
        compound: bool,
    ) -> Result<(FlatEvent, Vec<(u32, u32)>), ElabError> {
        let mut f_ind = Vec::new();
        let mut d_ind = Vec::new();
        // (member, source name, kind) per local slot
        let mut params = Vec::new();
        for fair in [true, false] {
            for (m, &(ii, ev)) in members.iter().enumerate() {
                let list = if fair { &ev.fair_indices } else { &ev.demonic_indices };
                for idx in list {
                    let names = &self.names[ii];
                    if matches!(names.map.get(&idx.name), Some(Bound::Var(_) | Bound::Elem(..) | Bound::Timer(_))) {
                        return Err(err(
                            ElabErrorKind::NameCollision,
                            format!("index `{}` shadows a variable or timer", idx.name),
                            ev.span,
                        ));
                    }
                    let dom = Compiler::new(self.g, names).domain(&idx.set)?;
                    if dom.is_empty() {
                        return Err(err(ElabErrorKind::TypeError, format!("index `{}` ranges over an empty set", idx.name), ev.span));
                    }
                    let name = if compound {
                        qualify(&self.insts[ii].name, &idx.name)
                    } else {
                        idx.name.clone()
                    };
                    params.push((m, idx.name.clone(), dom.kind));
                    let p = IndexParam { name, domain: dom };
                    if fair {
                        f_ind.push(p)
                    } else {
                        d_ind.push(p)
                    }
                }
            }
        }
        let total = params.len() as u32;

        let mut guard = FExpr::Const(1);
        let mut writes = Vec::new();
        let mut if_counter = 0;
        let mut env_size = total;
        let mut bounds: Option<(u32, Option<u32>)> = None;
        let mut fair = Fairness::Spontaneous;
        let mut start = Vec::new();
        let mut stop = Vec::new();
        for (m, &(ii, ev)) in members.iter().enumerate() {
            let names = &self.names[ii];
            let mut cx = Compiler::new(self.g, names);
            for (slot, (pm, pname, kind)) in params.iter().enumerate() {
                if *pm == m {
                    cx.bind_slot(pname, slot as u32, *kind);
                }
            }
            cx.next_slot = total;
            cx.max_slot = cx.max_slot.max(total);
            cx.if_counter = if_counter;
            let gm = cx.bool_expr(&ev.guard)?;
            guard = FExpr::and(guard, gm);
            cx.allow_primed = true;
            cx.stmts(&ev.action, &mut Vec::new(), &mut Vec::new(), m as u32, &mut writes)?;
            if_counter = cx.if_counter;
            env_size = env_size.max(cx.max_slot);

            let bound = |e: &Expr, cx: &mut Compiler| -> Result<u32, ElabError> {
                let v = cx.const_int(e)?;
                u32::try_from(v).map_err(|_| err(ElabErrorKind::BoundError, "negative time bound", ev.span))
            };
            let l = match &ev.lower {
                Some(e) => bound(e, &mut cx)?,
                None => 0,
            };
            let u = match &ev.upper {
                Some(e) => Some(bound(e, &mut cx)?),
                None => None,
            };
            bounds = Some(match bounds {
                None => (l, u),
                Some((l0, u0)) => (
                    l0.max(l),
                    match (u0, u) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    },
                ),
            });
            fair = fair.max(ev.fairness);
            for (list, out) in [(&ev.start, &mut start), (&ev.stop, &mut stop)] {
                for t in list {
                    let Some(Bound::Timer(ti)) = names.map.get(t) else {
                        return Err(err(ElabErrorKind::UnknownReference, format!("unknown timer `{t}`"), ev.span));
                    };
                    if !out.contains(ti) {
                        out.push(*ti);
                    }
                }
            }
        }
        let (l, u) = bounds.unwrap_or((0, None));
        if u.is_some_and(|u| l > u) {
            let (kind, what) = if compound {
                (ElabErrorKind::MergedBoundEmpty, "merged time bounds are empty")
            } else {
                (ElabErrorKind::BoundError, "lower bound exceeds upper bound")
            };
            return Err(err(kind, format!("{what} for `{id}`: [{l}, {}]", u.unwrap()), members[0].1.span));
        }
        let ordered = order_projections(writes, &self.var_names, self.opts.strict_action_edges)?;
        let event = FlatEvent {
            id,
            f_ind,
            d_ind,
            l,
            u,
            fair,
            guard,
            start,
            stop,
            action: ordered.projections,
            members: members
                .iter()
                .map(|&(ii, ev)| qualify(&self.insts[ii].name, &ev.name))
                .collect(),
            env_size,
            span: members[0].1.span,
        };
        Ok((event, ordered.edges))
    }
}

pub fn flatten_with(src: &SourceModel, opts: &FlattenOptions) -> Result<FlatModel, ElabError> {
    let mut el = Elab::new(src, &lone_globals(src))?;
    let comp = el.system()?;
    let graphs = build_graphs(src, &el.g, &comp)?;

    // Names visible inside each instance.
    let mut timers: Vec<FlatTimer> = Vec::new();
    let mut names: Vec<Names> = Vec::new();
    for inst in &comp.instances {
        let module = src.module(&inst.module).unwrap();
        let mut n = Names::default();
        for (i, v) in el.vars[..el.n_globals].iter().enumerate() {
            n.map.insert(v.name.clone(), Bound::Var(i as u32));
        }
        for (slot, mode, arg) in &inst.slots {
            let b = match arg {
                BoundArg::Ref(r) => {
                    let v = el.global(&r.var).unwrap() as u32;
                    match r.index {
                        Some(i) => Bound::Elem(v, i),
                        None => Bound::Var(v),
                    }
                }
                BoundArg::Value(k, v) => Bound::Const(*k, *v),
            };
            n.map.insert(slot.clone(), b);
            n.modes.insert(slot.clone(), *mode);
        }
        for local in &module.locals {
            let v = el.add_var(qualify(&inst.name, &local.name), local)?;
            n.map.insert(local.name.clone(), Bound::Var(v));
            n.modes.remove(&local.name);
        }
        for t in &module.timers {
            let empty = Names::default();
            let mut cx = Compiler::new(&el.g, &empty);
            let bound = cx.const_int(&t.bound)?;
            if bound < 0 {
                return Err(err(ElabErrorKind::BoundError, "timer bound must be non-negative", t.span));
            }
            let init = match &t.init {
                Some(e) => cx.const_int(e)?,
                None => 0,
            };
            if !(0..=bound + 1).contains(&init) {
                return Err(err(ElabErrorKind::BoundError, "initial timer value outside 0..bound+1", t.span));
            }
            let name = qualify(&inst.name, &t.name);
            if timers.iter().any(|x| x.name == name) {
                return Err(err(ElabErrorKind::NameCollision, format!("timer `{name}` declared twice"), t.span));
            }
            n.map.insert(t.name.clone(), Bound::Timer(timers.len() as u32));
            timers.push(FlatTimer {
                name,
                bound,
                init,
                span: t.span,
            });
        }
        names.push(n);
    }
    for n in &mut names {
        n.var_types = el.var_types.clone();
    }

    let cx = EventCx {
        g: &el.g,
        names: &names,
        insts: &comp.instances,
        var_names: el.vars.iter().map(|v| v.name.clone()).collect(),
        opts: *opts,
    };
    let set_of: HashMap<(&str, &str), usize> = graphs
        .sync_sets
        .iter()
        .enumerate()
        .flat_map(|(k, s)| s.members.iter().map(move |(i, e)| ((i.as_str(), e.as_str()), k)))
        .collect();
    let inst_index = |name: &str| comp.instances.iter().position(|i| i.name == name).unwrap();
    let mut events: Vec<FlatEvent> = Vec::new();
    let mut set_infos: Vec<Option<SyncSetInfo>> = vec![None; graphs.sync_sets.len()];
    for (ii, inst) in comp.instances.iter().enumerate() {
        let module = src.module(&inst.module).unwrap();
        for ev in &module.events {
            match set_of.get(&(inst.name.as_str(), ev.name.as_str())) {
                Some(&k) => {
                    if set_infos[k].is_some() {
                        continue;
                    }
                    let set = &graphs.sync_sets[k];
                    let members: Vec<(usize, &EventDecl)> = set
                        .members
                        .iter()
                        .map(|(i, e)| {
                            let ix = inst_index(i);
                            let m = src.module(&comp.instances[ix].module).unwrap();
                            (ix, m.events.iter().find(|x| &x.name == e).unwrap())
                        })
                        .collect();
                    let (fe, edges) = cx.compile(&members, set.compound.clone(), true)?;
                    let vn = |v: u32| cx.var_names[v as usize].clone();
                    set_infos[k] = Some(SyncSetInfo {
                        members: set.member_names(),
                        compound: set.compound.clone(),
                        component: set.component.clone(),
                        action_edges: edges.iter().map(|&(a, b)| (vn(a), vn(b))).collect(),
                        projection_order: fe.action.iter().map(|p| vn(p.var)).collect(),
                    });
                    events.push(fe);
                }
                None => {
                    let (fe, _) = cx.compile(&[(ii, ev)], qualify(&inst.name, &ev.name), false)?;
                    events.push(fe);
                }
            }
        }
    }
    let mut ids = HashSet::new();
    for e in &events {
        if !ids.insert(e.id.as_str()) {
            return Err(err(ElabErrorKind::NameCollision, format!("two events are named `{}`", e.id), e.span));
        }
    }

    for (r, mode) in &comp.interface {
        let gi = el.global(&r.var).unwrap();
        let v = &mut el.vars[gi];
        v.mode = Some(match v.mode {
            None => *mode,
            // Distinct elements of one array may each have their own writer.
            Some(m) => super::combine_modes(m, *mode).unwrap_or(Mode::Out),
        });
    }
    let mut offset = 0;
    for v in &mut el.vars {
        v.offset = offset;
        offset += v.ty.width();
    }

    let Elab { g, vars, .. } = el;
    Ok(FlatModel {
        symbols: g.symbols,
        constants: g.constants,
        sets: g.sets,
        predicates: g.predicates,
        vars,
        timers,
        events,
        graphs: Graphs {
            modules: graphs.modules,
            events: graphs.events,
            sync_sets: set_infos.into_iter().flatten().collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elaborator::render_expr;

    fn flat(src: &str) -> Result<FlatModel, ElabError> {
        flatten_source(src)
    }

    const PHIL: &str = "globals f1 : bool := false; f2 : bool := false end
        module Phil
          interface share left_fork : bool; share right_fork : bool
          events take when !left_fork do left_fork := true, right_fork := true end
        end
        instances p1 = Phil(share f1, share f2) ; p2 = Phil(share f2, share f1) end";

    #[test]
    fn philosopher_slots_are_substituted() {
        let m = flat(PHIL).unwrap();
        assert_eq!(m.events[0].id, "p1.take");
        assert_eq!(
            render_expr(&m, &m.events[0].guard, &[]),
            "!f1"
        );
        assert_eq!(render_expr(&m, &m.events[1].guard, &[]), "!f2");
        assert_eq!(m.vars[0].mode, Some(Mode::Share));
    }

    #[test]
    fn instantiate_reports_missing_binding() {
        let src = syntax::parse(
            "globals f1 : bool := false end
             module Phil interface share left_fork : bool; share right_fork : bool end
             instances p1 = Phil(share f1) end",
        )
        .unwrap();
        let e = instantiate(&src, &src.instances[0]).unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::MissingBinding);
        let ok = syntax::parse(PHIL).unwrap();
        let inst = instantiate(&ok, &ok.instances[0]).unwrap();
        assert_eq!(inst.slots[0].2, BoundArg::Ref(GlobalRef { var: "f1".into(), index: None }));
    }

    #[test]
    fn binding_mode_must_match_the_slot() {
        let e = flat(
            "globals x : bool := false end
             module M interface out x : bool end
             instances a = M(in x) end",
        )
        .unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::ModeMismatch);
    }

    #[test]
    fn two_out_writers_conflict() {
        let e = flat(
            "globals x : bool := false end
             module W interface out x : bool end
             instances a = W(out x) ; b = W(out x) end",
        )
        .unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::ModeConflict);
    }

    #[test]
    fn in_and_out_compose_to_out() {
        let m = flat(
            "globals x : bool := false end
             module R interface in x : bool end
             module W interface out x : bool end
             instances r = R(in x) ; w = W(out x) end",
        )
        .unwrap();
        assert_eq!(m.vars[0].mode, Some(Mode::Out));
    }

    const SYNC: &str = "globals x : 0..3 := 0; b : 0..3 := 0 end
        module PLANT interface out x : 0..3
          events generate do x :: 0..3 end
        end
        module CONTROLLER interface in x : 0..3; out b : 0..3
          depends p : PLANT
          events respond sync p.generate as act do b := x' end
        end
        instances env = PLANT(out x) ; c = CONTROLLER(in x, out b) with p := env end end
        sync_env_c ::= env || c
        system = sync_env_c";

    #[test]
    fn synchronised_events_become_one_compound() {
        let m = flat(SYNC).unwrap();
        assert_eq!(m.events.len(), 1);
        assert_eq!(m.events[0].id, "sync_env_c.act");
        let set = &m.graphs.sync_sets[0];
        assert_eq!(set.members, vec!["c.respond", "env.generate"]);
        assert_eq!(set.projection_order, vec!["x", "b"]);
        assert_eq!(set.action_edges, vec![("b".to_string(), "x".to_string())]);
        assert_eq!(set.component, vec!["env", "c"]);
        assert_eq!(m.graphs.modules, vec![("CONTROLLER".to_string(), "PLANT".to_string())]);
    }

    #[test]
    fn without_sync_clauses_the_event_graph_is_empty() {
        let m = flat(PHIL).unwrap();
        assert!(m.graphs.events.is_empty());
        assert!(m.graphs.sync_sets.is_empty());
    }

    #[test]
    fn circular_primed_flow_is_reported_with_a_position() {
        let src = "globals a : 0..3 := 0; b : 0..3 := 0 end
            module P interface share a : 0..3; share b : 0..3
              events e do a := b' end
            end
            module Q interface share a : 0..3; share b : 0..3
              depends p : P
              events f sync p.e as g do b := a' end
            end
            instances p = P(share a, share b) ; q = Q(share a, share b) with p := p end end";
        let e = flat(src).unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::CircularDataFlow);
        assert!(e.span.line >= 3, "{e}");
    }

    #[test]
    fn double_write_across_synced_events() {
        let src = "globals a : 0..3 := 0 end
            module P interface share a : 0..3 events e do a := 1 end end
            module Q interface share a : 0..3
              depends p : P
              events f sync p.e as g do a := 2 end
            end
            instances p = P(share a) ; q = Q(share a) with p := p end end";
        let e = flat(src).unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::DoubleAssignment);
        // Reported at the write that comes second in member order.
        assert_eq!(e.span.line, 2);
        assert!(e.message.contains("first at 5:"), "{e}");
    }

    #[test]
    fn cyclic_depends_is_reported_at_the_clause() {
        let src = "module A depends b : B end
            module B depends a : A end";
        let e = flat(src).unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::CyclicModuleDependency);
        assert_eq!((e.span.line, e.span.col), (2, 30));
    }

    #[test]
    fn sync_on_a_missing_event() {
        let src = "module P events e do skip end end
            module Q depends p : P events f sync p.nope as g do skip end end
            instances p = P ; q = Q with p := p end end";
        assert_eq!(flat(src).unwrap_err().kind, ElabErrorKind::SyncTargetNotFound);
    }

    #[test]
    fn unbound_dependency() {
        let src = "module P events e do skip end end
            module Q depends p : P events f sync p.e as g do skip end end
            instances p = P ; q = Q end";
        assert_eq!(flat(src).unwrap_err().kind, ElabErrorKind::UnknownDependency);
    }

    #[test]
    fn merged_bounds_can_be_empty() {
        let src = "module P events e [3, *] do skip end end
            module Q depends p : P events f [0, 2] sync p.e as g do skip end end
            instances p = P ; q = Q with p := p end end";
        assert_eq!(flat(src).unwrap_err().kind, ElabErrorKind::MergedBoundEmpty);
    }

    #[test]
    fn merged_bounds_and_fairness() {
        let src = "module P events e [1, *] just do skip end end
            module Q depends p : P events f [0, 4] sync p.e as g do skip end end
            instances p = P ; q = Q with p := p end end";
        let m = flat(src).unwrap();
        let e = &m.events[0];
        assert_eq!((e.l, e.u, e.fair), (1, Some(4), Fairness::Just));
        assert_eq!(e.id, "q.g");
    }

    #[test]
    fn lone_module_is_flattened_as_itself() {
        let m = flat(
            "module M locals v : 0..2 := 1 timers t : 0..3
               events e when v < 2 start t do v := v + 1 end
             end",
        )
        .unwrap();
        assert_eq!(m.vars[0].name, "v");
        assert_eq!(m.timers[0].name, "t");
        assert_eq!(m.events[0].id, "e");
    }

    #[test]
    fn iterated_composition_names_instances_by_value() {
        let m = flat(
            "type PID = {1, 2}
             globals turn : PID := 1 end
             module Process interface in me : PID events run when turn == me do skip end end
             system = || pid : PID @ Process(in pid)",
        )
        .unwrap();
        let ids: Vec<&str> = m.events.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["Process_1.run", "Process_2.run"]);
    }

    #[test]
    fn empty_iteration_is_rejected() {
        let e = flat(
            "module Process interface in me : 0..1 end
             system = || pid : {} @ Process(in pid)",
        );
        assert!(matches!(e, Err(ref e) if e.kind == ElabErrorKind::EmptyIteration || e.kind == ElabErrorKind::Syntax), "{e:?}");
    }

    #[test]
    fn if_branches_fold_into_one_conditional_projection() {
        let m = flat(
            "globals v1 : 0..9 := 0; v2 : 0..9 := 0; c : bool := true end
             event e when true do v1 := 1, if c then v2 := v1' + 2 else skip fi end",
        )
        .unwrap();
        let e = &m.events[0];
        let order: Vec<u32> = e.action.iter().map(|p| p.var).collect();
        assert_eq!(order, vec![0, 1]);
        assert_eq!(e.action[1].writes[0].conds.len(), 1);
    }

    #[test]
    fn strict_edges_order_unprimed_reads() {
        let src = syntax::parse(
            "globals a : 0..3 := 0; b : 0..3 := 0 end
             event e when true do b := a, a := 1 end",
        )
        .unwrap();
        let relaxed = flatten(&src).unwrap();
        let order = |m: &FlatModel| m.events[0].action.iter().map(|p| p.var).collect::<Vec<_>>();
        assert_eq!(order(&relaxed), vec![1, 0]);
        let strict = flatten_with(&src, &FlattenOptions { strict_action_edges: true }).unwrap();
        assert_eq!(order(&strict), vec![0, 1]);
    }
}
