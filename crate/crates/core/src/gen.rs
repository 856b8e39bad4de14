//! Seeded random programs with matching input specifications.
//!
//! Loops always use a counter skeleton `i := 0; while (i < k) { ...; i := i + 1; }`
//! with `k <= 4` and a counter the body never assigns, so every generated
//! program terminates well within the default fuel. Registers hold
//! integers; booleans only appear in conditions and mux selectors.

use bitflags::bitflags;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cfg::CfgProgram;
use crate::expr::{Expr, OpKind, Var};
use crate::input::{DomainBounds, InputEntry, InputKey, InputSpec, Visibility};
use crate::passes::lower;
use crate::passes::STACK_POINTER;
use crate::structured::Cmd;

/// Upper bound on statement nodes in a generated program.
pub const MAX_NODES: usize = 40;
/// Upper bound on the size of a generated input domain.
pub const MAX_INPUTS: u64 = 64;

const LOCALS: [&str; 4] = ["x", "y", "z", "t"];
const INPUTS: [&str; 3] = ["a", "b", "s"];
const SPILL_OFFSETS: [i64; 3] = [0, 4, 8];

bitflags! {
    /// Constructs the generator may emit.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub struct Features: u32 {
        const WHILE = 1 << 0;
        const IF = 1 << 1;
        const LOAD = 1 << 2;
        const STORE = 1 << 3;
        const MUX = 1 << 4;
        /// Conditions that are closed boolean expressions.
        const CONST_COND = 1 << 5;
        /// Closed arithmetic subterms.
        const CONST_EXPR = 1 << 6;
        /// `x := e; ... x ...` pairs.
        const UNTILE = 1 << 7;
        /// Assignments overwritten before being read.
        const DEAD_ASSIGN = 1 << 8;
        /// All memory accesses are `sp + n` stack slots.
        const SPILL = 1 << 9;
        /// `if (c) { x := e1; } else { x := e2; }`.
        const CONVERTIBLE_IF = 1 << 10;
        /// `if (c) { B } else { B }`.
        const IDENTICAL_BRANCHES = 1 << 11;
        /// `y := load[e]; store[e] := y;`.
        const SELF_STORE = 1 << 12;
        /// Loads overwritten before being read.
        const DEAD_LOAD = 1 << 13;
        /// `if (c) { }` with both arms empty.
        const EMPTY_IF = 1 << 14;
    }
}

impl Features {
    /// Plain constructs, without the pass-specific patterns.
    pub fn basic() -> Self {
        Features::WHILE | Features::IF | Features::LOAD | Features::STORE | Features::MUX
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    /// Statement node bound, at most [`MAX_NODES`].
    pub max_nodes: usize,
    pub features: Features,
}

impl GenConfig {
    pub fn new(seed: u64, max_nodes: usize, features: Features) -> Self {
        GenConfig {
            seed,
            max_nodes: max_nodes.clamp(1, MAX_NODES),
            features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub program: Cmd,
    pub spec: InputSpec,
}

/// Endless deterministic stream of programs for a configuration.
pub struct ProgramStream {
    rng: ChaCha8Rng,
    config: GenConfig,
}

impl Iterator for ProgramStream {
    type Item = Generated;

    fn next(&mut self) -> Option<Generated> {
        Some(generate_one(&mut self.rng, &self.config))
    }
}

pub fn generate_programs(seed: u64, max_nodes: usize, features: Features) -> ProgramStream {
    let config = GenConfig::new(seed, max_nodes, features);
    ProgramStream {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        config,
    }
}

/// Generated programs lowered to reducible CFGs.
pub fn generate_cfgs(
    seed: u64,
    max_nodes: usize,
    features: Features,
) -> impl Iterator<Item = (CfgProgram, InputSpec)> {
    generate_programs(seed, max_nodes, features).map(|g| (lower(&g.program), g.spec))
}

/// A uniformly random public/secret partition of the spec's entries.
pub fn random_partition<R: Rng>(rng: &mut R, spec: &InputSpec) -> InputSpec {
    let vis: Vec<Visibility> = spec.entries().iter().map(|_| random_visibility(rng)).collect();
    spec.with_visibilities(&vis)
}

fn random_visibility<R: Rng>(rng: &mut R) -> Visibility {
    if rng.gen_bool(0.5) {
        Visibility::Public
    } else {
        Visibility::Secret
    }
}

fn generate_one(rng: &mut ChaCha8Rng, config: &GenConfig) -> Generated {
    let spill = config.features.contains(Features::SPILL);
    let spec = random_spec(rng, spill);
    let inputs: Vec<Var> = spec
        .entries()
        .iter()
        .filter_map(|e| match &e.key {
            InputKey::Reg(x) => Some(x.clone()),
            InputKey::Mem(_) => None,
        })
        .collect();
    let mut g = Gen {
        rng,
        features: config.features,
        inputs,
        counters: Vec::new(),
        next_counter: 0,
        budget: config.max_nodes,
    };
    let program = g.block(0, true);
    debug_assert!(program.node_count() <= config.max_nodes);
    Generated { program, spec }
}

fn random_spec<R: Rng>(rng: &mut R, spill: bool) -> InputSpec {
    let count = rng.gen_range(1..=INPUTS.len());
    let mut names: Vec<&str> = INPUTS.to_vec();
    names.shuffle(rng);
    names.truncate(count);
    names.sort_unstable();
    let mut entries = Vec::new();
    let mut size: u64 = 1;
    for name in names {
        let room = (MAX_INPUTS / size).min(8);
        let width = rng.gen_range(1..=room.max(1)) as i64;
        let lo = rng.gen_range(-2..=2);
        size *= width as u64;
        entries.push(InputEntry {
            key: InputKey::Reg(Var::new(name)),
            visibility: random_visibility(rng),
            lo,
            hi: lo + width - 1,
        });
    }
    let mut inits = Vec::new();
    if !spill {
        let room = MAX_INPUTS / size;
        if room >= 2 && rng.gen_bool(0.3) {
            let width = rng.gen_range(2..=room.min(4)) as i64;
            entries.push(InputEntry {
                key: InputKey::Mem(rng.gen_range(0..8)),
                visibility: random_visibility(rng),
                lo: 0,
                hi: width - 1,
            });
        }
        for addr in 0..8 {
            if !entries.iter().any(|e| e.key == InputKey::Mem(addr)) {
                inits.push((addr, rng.gen_range(0..10)));
            }
        }
    }
    InputSpec::new(entries, inits, DomainBounds::default()).expect("generated specs stay within bounds")
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    features: Features,
    inputs: Vec<Var>,
    /// Counters of the enclosing loops; readable, never assigned.
    counters: Vec<Var>,
    next_counter: usize,
    budget: usize,
}

impl Gen<'_> {
    fn has(&self, f: Features) -> bool {
        self.features.contains(f)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn local(&mut self) -> Var {
        Var::new(LOCALS.choose(self.rng).expect("nonempty"))
    }

    fn readable(&mut self) -> Var {
        let mut pool: Vec<Var> = LOCALS.iter().map(|x| Var::new(x)).collect();
        pool.extend(self.inputs.iter().cloned());
        pool.extend(self.counters.iter().cloned());
        pool.choose(self.rng).expect("nonempty").clone()
    }

    fn small_int(&mut self) -> Expr {
        Expr::int(self.rng.gen_range(-3..=9))
    }

    fn closed_int(&mut self, depth: usize) -> Expr {
        if depth == 0 || self.chance(0.4) {
            return self.small_int();
        }
        let k = *[OpKind::Add, OpKind::Sub, OpKind::Mul].choose(self.rng).expect("nonempty");
        Expr::binary(k, self.closed_int(depth - 1), self.closed_int(depth - 1))
    }

    fn int_expr(&mut self, depth: usize) -> Expr {
        if self.has(Features::CONST_EXPR) && self.chance(0.15) {
            return Expr::binary(OpKind::Add, self.closed_int(2), Expr::Var(self.readable()));
        }
        if depth == 0 || self.chance(0.35) {
            return if self.chance(0.6) {
                Expr::Var(self.readable())
            } else {
                self.small_int()
            };
        }
        match self.rng.gen_range(0..10) {
            0 => Expr::unary(OpKind::Neg, self.int_expr(depth - 1)),
            1 if self.has(Features::MUX) => {
                Expr::mux(self.bool_expr(depth - 1), self.int_expr(depth - 1), self.int_expr(depth - 1))
            }
            _ => {
                let k = *[OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Add]
                    .choose(self.rng)
                    .expect("nonempty");
                Expr::binary(k, self.int_expr(depth - 1), self.int_expr(depth - 1))
            }
        }
    }

    fn comparison(&mut self, depth: usize) -> Expr {
        let k = *[OpKind::Eq, OpKind::Ne, OpKind::Lt, OpKind::Le]
            .choose(self.rng)
            .expect("nonempty");
        Expr::binary(k, self.int_expr(depth), self.int_expr(depth))
    }

    fn bool_expr(&mut self, depth: usize) -> Expr {
        if depth == 0 || self.chance(0.6) {
            return self.comparison(depth.saturating_sub(1));
        }
        match self.rng.gen_range(0..3) {
            0 => Expr::unary(OpKind::Not, self.bool_expr(depth - 1)),
            1 => Expr::binary(OpKind::And, self.bool_expr(depth - 1), self.bool_expr(depth - 1)),
            _ => Expr::binary(OpKind::Or, self.bool_expr(depth - 1), self.bool_expr(depth - 1)),
        }
    }

    fn condition(&mut self) -> Expr {
        if self.has(Features::CONST_COND) && self.chance(0.45) {
            if self.chance(0.3) {
                return Expr::bool(self.chance(0.5));
            }
            let k = *[OpKind::Lt, OpKind::Eq, OpKind::Le].choose(self.rng).expect("nonempty");
            return Expr::binary(k, self.closed_int(1), self.closed_int(1));
        }
        self.bool_expr(2)
    }

    /// An address expression; in spill mode always a stack slot.
    fn address(&mut self) -> Expr {
        if self.has(Features::SPILL) {
            let off = *SPILL_OFFSETS.choose(self.rng).expect("nonempty");
            return Expr::binary(OpKind::Add, Expr::var(STACK_POINTER), Expr::int(off));
        }
        match self.rng.gen_range(0..3) {
            0 => Expr::int(self.rng.gen_range(0..8)),
            1 => Expr::Var(self.readable()),
            _ => Expr::binary(OpKind::Add, Expr::int(self.rng.gen_range(0..8)), Expr::Var(self.readable())),
        }
    }

    fn take(&mut self, n: usize) -> bool {
        if self.budget >= n {
            self.budget -= n;
            true
        } else {
            false
        }
    }

    fn block(&mut self, depth: usize, top: bool) -> Cmd {
        let max_len = if top { 8 } else { 3 };
        let len = self.rng.gen_range(1..=max_len);
        let mut out = Cmd::nil();
        for _ in 0..len {
            if self.budget == 0 {
                break;
            }
            out = out.then(self.statement(depth));
        }
        out
    }

    fn statement(&mut self, depth: usize) -> Cmd {
        let memory = self.has(Features::LOAD) || self.has(Features::SPILL);
        loop {
            let choice = self.rng.gen_range(0..17);
            let produced = match choice {
                0..=3 => self.take(1).then(|| {
                    let x = self.local();
                    Cmd::assign(x.as_str(), self.int_expr(2))
                }),
                4 if memory => self.take(1).then(|| {
                    let x = self.local();
                    Cmd::load(x.as_str(), self.address())
                }),
                5 if self.has(Features::STORE) || self.has(Features::SPILL) => self.take(1).then(|| {
                    let x = self.readable();
                    Cmd::store(self.address(), x.as_str())
                }),
                6 | 7 if self.has(Features::IF) && depth < 3 => self.if_statement(depth),
                8 if self.has(Features::WHILE) && depth < 2 => self.loop_statement(depth),
                9 if self.has(Features::UNTILE) => self.untile_pair(),
                10 if self.has(Features::DEAD_ASSIGN) => self.dead_pair(false),
                11 if self.has(Features::DEAD_LOAD) && memory => self.dead_pair(true),
                12 if self.has(Features::CONVERTIBLE_IF) => self.convertible_if(),
                13 if self.has(Features::IDENTICAL_BRANCHES) && depth < 3 => self.identical_if(depth),
                14 if self.has(Features::SELF_STORE) && memory => self.self_store(),
                15 if self.has(Features::EMPTY_IF) => self.take(1).then(|| Cmd::if_(self.condition(), Cmd::nil(), Cmd::nil())),
                _ => None,
            };
            if let Some(c) = produced {
                return c;
            }
            if self.budget == 0 {
                return Cmd::nil();
            }
            // The budget still fits a plain assignment.
            if choice >= 16 && self.take(1) {
                let x = self.local();
                return Cmd::assign(x.as_str(), self.int_expr(1));
            }
        }
    }

    fn if_statement(&mut self, depth: usize) -> Option<Cmd> {
        if !self.take(2) {
            return None;
        }
        self.budget += 1;
        let cond = self.condition();
        let then = self.block(depth + 1, false);
        let els = if self.chance(0.7) && self.budget > 0 {
            self.block(depth + 1, false)
        } else {
            Cmd::nil()
        };
        Some(Cmd::if_(cond, then, els))
    }

    fn loop_statement(&mut self, depth: usize) -> Option<Cmd> {
        // init, while, increment and at least one body statement
        if !self.take(4) {
            return None;
        }
        self.budget += 1;
        let i = Var::new(&format!("i{}", self.next_counter));
        self.next_counter += 1;
        let bound = self.rng.gen_range(1..=4);
        self.counters.push(i.clone());
        let body = self.block(depth + 1, false);
        self.counters.pop();
        let step = Cmd::assign(i.as_str(), Expr::binary(OpKind::Add, Expr::Var(i.clone()), Expr::int(1)));
        let cond = Expr::binary(OpKind::Lt, Expr::Var(i.clone()), Expr::int(bound));
        // Counters are readable after their loop too.
        self.counters.push(i.clone());
        Some(Cmd::assign(i.as_str(), Expr::int(0)).then(Cmd::while_(cond, body.then(step))))
    }

    fn untile_pair(&mut self) -> Option<Cmd> {
        if !self.take(2) {
            return None;
        }
        let x = self.local();
        let mut e0 = self.int_expr(1);
        while e0.mentions(&x) {
            e0 = self.int_expr(1);
        }
        let y = self.local();
        let use_x = Expr::binary(OpKind::Add, Expr::Var(x.clone()), self.int_expr(1));
        Some(Cmd::assign(x.as_str(), e0).then(Cmd::assign(y.as_str(), use_x)))
    }

    fn dead_pair(&mut self, load: bool) -> Option<Cmd> {
        if !self.take(2) {
            return None;
        }
        let x = self.local();
        let first = if load {
            Cmd::load(x.as_str(), self.address())
        } else {
            Cmd::assign(x.as_str(), self.int_expr(1))
        };
        let mut e = self.int_expr(1);
        while e.mentions(&x) {
            e = self.int_expr(1);
        }
        Some(first.then(Cmd::assign(x.as_str(), e)))
    }

    fn convertible_if(&mut self) -> Option<Cmd> {
        if !self.take(3) {
            return None;
        }
        let x = self.local();
        let cond = self.bool_expr(1);
        let (a, b) = (self.int_expr(1), self.int_expr(1));
        Some(Cmd::if_(cond, Cmd::assign(x.as_str(), a), Cmd::assign(x.as_str(), b)))
    }

    fn identical_if(&mut self, depth: usize) -> Option<Cmd> {
        let saved = self.budget;
        if !self.take(1) {
            return None;
        }
        let cond = self.condition();
        let arm = self.block(depth + 1, false);
        // The arm appears twice.
        let n = arm.node_count();
        if self.budget < n {
            self.budget = saved;
            return None;
        }
        self.budget -= n;
        Some(Cmd::if_(cond, arm.clone(), arm))
    }

    fn self_store(&mut self) -> Option<Cmd> {
        if !self.take(3) {
            return None;
        }
        let y = self.local();
        let mut addr = self.address();
        while addr.mentions(&y) {
            addr = self.address();
        }
        let pair = Cmd::load(y.as_str(), addr.clone()).then(Cmd::store(addr, y.as_str()));
        // Overwriting `y` afterwards makes the load dead as well.
        if self.chance(0.5) {
            let mut e = self.int_expr(1);
            while e.mentions(&y) {
                e = self.int_expr(1);
            }
            Some(pair.then(Cmd::assign(y.as_str(), e)))
        } else {
            self.budget += 1;
            Some(pair)
        }
    }
}
